//! Phenomenological storage channel: delayed retrieval with an efficiency
//! that decays with storage time, uniform leakage noise on the retrieved
//! channel, and diffusion blur of stored images.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, stream};
use crate::spatial::{gaussian_blur, IntensityImage};
use crate::timetag::{Channel, Tag, TimeTagStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecayShape {
    /// `eta0 exp(-t/T)`
    #[default]
    Exponential,
    /// `eta0 exp(-(t/T)²)`
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryParams {
    /// Retrieval efficiency at zero storage time.
    pub eta0: f64,
    pub decoherence_time_ns: f64,
    pub storage_time_ns: f64,
    /// Leakage clicks per second added to the retrieved channel.
    pub noise_rate: f64,
    /// Diffusion blur width in mm.
    pub blur_sigma_mm: f64,
    pub decay: DecayShape,
}

impl Default for MemoryParams {
    fn default() -> Self {
        MemoryParams {
            eta0: 0.10,
            decoherence_time_ns: 348.0,
            storage_time_ns: 100.0,
            noise_rate: 9.4e4,
            blur_sigma_mm: 0.02,
            decay: DecayShape::Exponential,
        }
    }
}

impl MemoryParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta0) {
            return Err(Error::invalid(format!("eta0 must lie in [0, 1], got {}", self.eta0)));
        }
        if !(self.decoherence_time_ns > 0.0 && self.decoherence_time_ns.is_finite()) {
            return Err(Error::invalid(format!("decoherence time must be > 0, got {}", self.decoherence_time_ns)));
        }
        for (name, v) in [
            ("storage_time", self.storage_time_ns),
            ("noise_rate", self.noise_rate),
            ("blur_sigma", self.blur_sigma_mm),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn with_storage_time(&self, storage_time_ns: f64) -> MemoryParams {
        MemoryParams { storage_time_ns, ..*self }
    }
}

/// Retrieval efficiency after storing for `t_ns` (negative times count as zero).
pub fn storage_efficiency(t_ns: f64, params: &MemoryParams) -> f64 {
    let x = t_ns.max(0.0) / params.decoherence_time_ns;
    match params.decay {
        DecayShape::Exponential => params.eta0 * (-x).exp(),
        DecayShape::Gaussian => params.eta0 * (-x * x).exp(),
    }
}

/// Stores every click of `signal`: it survives with probability
/// `η(storage_time)` and is delayed by the storage time. Leakage noise is
/// added on `signal` uniformly over the stream's time span.
pub fn apply_storage_to_stream(stream: &TimeTagStream, signal: Channel, params: &MemoryParams, seed: u64) -> Result<TimeTagStream> {
    params.validate()?;
    let eta = storage_efficiency(params.storage_time_ns, params);
    let shift = params.storage_time_ns.round() as i64;
    let mut loss = rng::seeded(seed, stream::MEMORY_LOSS);
    let mut tags: Vec<Tag> = Vec::with_capacity(stream.len());
    for t in stream.tags() {
        if t.channel == signal {
            if loss.random::<f64>() < eta {
                tags.push(Tag::new(signal, t.t_ns + shift));
            }
        } else {
            tags.push(*t);
        }
    }
    if let (Some((first, last)), true) = (stream.span(), params.noise_rate > 0.0) {
        let span_ns = (last + shift - first + 1) as f64;
        let mut noise = rng::seeded(seed, stream::MEMORY_NOISE);
        let n = Poisson::new(params.noise_rate * span_ns * 1e-9).map(|p| p.sample(&mut noise) as u64).unwrap_or(0);
        tags.extend((0..n).map(|_| Tag::new(signal, first + (noise.random::<f64>() * span_ns).floor() as i64)));
    }
    let mut channels: Vec<Channel> = stream.channels().iter().copied().collect();
    channels.push(signal);
    Ok(TimeTagStream::from_tags(tags, channels))
}

/// Scales an image by `η(storage_time)` and blurs it by `blur_sigma`.
pub fn apply_storage_to_image(image: &IntensityImage, params: &MemoryParams) -> Result<IntensityImage> {
    params.validate()?;
    let eta = storage_efficiency(params.storage_time_ns, params);
    let mut out = gaussian_blur(image, params.blur_sigma_mm);
    out.pixels.iter_mut().for_each(|p| *p *= eta);
    Ok(out)
}
