//! Monte Carlo time tags from a heralded photon-pair source.
//!
//! Pairs are emitted as a homogeneous Poisson process. The trigger photon
//! of a pair is tagged at the emission time and its partner at
//! `t + delay_offset + Exp(coherence_time)`, both quantized to whole
//! nanoseconds at emission: `t` is floored and the exponential delay is
//! floored, so the delay between partners is `delay_offset + k` with
//! `k` geometric, `P(k) = (1 - q) q^k`, `q = exp(-1 / coherence_time)`.
//! Each photon is detected independently with its detector efficiency and
//! each channel also receives Poisson background clicks.

use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, stream};
use crate::timetag::{Channel, Tag, TimeTagStream};

const NS_PER_S: f64 = 1e9;

/// Coherence time giving a 32.5 ns FWHM one-sided exponential.
pub const DEFAULT_COHERENCE_TIME_NS: f64 = 32.5 / std::f64::consts::LN_2;
pub const DEFAULT_DELAY_OFFSET_NS: i64 = 19;
pub const DEFAULT_PEAK_G2: f64 = 200.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceParams {
    /// Emitted pairs per second.
    pub pair_rate: f64,
    /// Delay `t0` in ns from trigger to the onset of the partner waveform.
    pub delay_offset_ns: i64,
    /// One-sided exponential constant of the partner delay, ns.
    pub coherence_time_ns: f64,
    /// Background clicks per second on the trigger detector.
    pub background_rate_trigger: f64,
    /// Background clicks per second on the signal detector.
    pub background_rate_signal: f64,
    pub det_eff_trigger: f64,
    pub det_eff_signal: f64,
}

impl Default for SourceParams {
    /// Source calibrated to a cross-correlation peak of 200 at 19 ns.
    fn default() -> Self {
        let fixed = SourceParams {
            pair_rate: 0.0,
            delay_offset_ns: DEFAULT_DELAY_OFFSET_NS,
            coherence_time_ns: DEFAULT_COHERENCE_TIME_NS,
            background_rate_trigger: 500.0,
            background_rate_signal: 500.0,
            det_eff_trigger: 0.5,
            det_eff_signal: 0.5,
        };
        calibrate_to_peak(DEFAULT_PEAK_G2, &fixed).expect("default source calibration is feasible")
    }
}

impl SourceParams {
    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("pair_rate", self.pair_rate),
            ("background_rate_trigger", self.background_rate_trigger),
            ("background_rate_signal", self.background_rate_signal),
        ];
        for (name, v) in rates {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        for (name, v) in [("det_eff_trigger", self.det_eff_trigger), ("det_eff_signal", self.det_eff_signal)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if !(self.coherence_time_ns > 0.0 && self.coherence_time_ns.is_finite()) {
            return Err(Error::invalid(format!("coherence_time must be > 0, got {}", self.coherence_time_ns)));
        }
        Ok(())
    }

    /// Total click rate (per second) on the trigger detector.
    pub fn singles_rate_trigger(&self) -> f64 {
        self.pair_rate * self.det_eff_trigger + self.background_rate_trigger
    }

    /// Total click rate (per second) on the signal detector.
    pub fn singles_rate_signal(&self) -> f64 {
        self.pair_rate * self.det_eff_signal + self.background_rate_signal
    }

    /// Probability that a partner arrives in the 1 ns bin starting at `tau_ns`.
    pub fn delay_pmf(&self, tau_ns: f64) -> f64 {
        let k = (tau_ns - self.delay_offset_ns as f64).floor();
        if k < 0.0 {
            return 0.0;
        }
        let q = (-1.0 / self.coherence_time_ns).exp();
        (1.0 - q) * q.powf(k)
    }
}

fn poisson_count<R: Rng>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|p| p.sample(rng) as u64).unwrap_or(0)
}

fn uniform_clicks<R: Rng>(ch: Channel, rate: f64, duration_ns: f64, rng: &mut R, out: &mut Vec<Tag>) {
    let n = poisson_count(rate * duration_ns / NS_PER_S, rng);
    out.extend((0..n).map(|_| Tag::new(ch, (rng.random::<f64>() * duration_ns).floor() as i64)));
}

/// Simulates `duration_s` seconds of trigger and signal clicks.
pub fn simulate_timetags(params: &SourceParams, duration_s: f64, seed: u64) -> Result<TimeTagStream> {
    params.validate()?;
    if !(duration_s > 0.0 && duration_s.is_finite()) {
        return Err(Error::invalid(format!("duration must be > 0, got {duration_s}")));
    }
    let duration_ns = duration_s * NS_PER_S;
    let mut tags = Vec::new();

    let mut pair_rng = rng::seeded(seed, stream::PAIRS);
    let n_pairs = poisson_count(params.pair_rate * duration_s, &mut pair_rng);
    let delay = Exp::new(1.0 / params.coherence_time_ns).expect("coherence time validated");
    tags.reserve((n_pairs as f64 * (params.det_eff_trigger + params.det_eff_signal)) as usize);
    for _ in 0..n_pairs {
        let t = (pair_rng.random::<f64>() * duration_ns).floor() as i64;
        let trigger_hit = pair_rng.random::<f64>() < params.det_eff_trigger;
        let signal_hit = pair_rng.random::<f64>() < params.det_eff_signal;
        let lag = delay.sample(&mut pair_rng).floor() as i64;
        if trigger_hit {
            tags.push(Tag::new(Channel::TRIGGER, t));
        }
        if signal_hit {
            tags.push(Tag::new(Channel::SIGNAL, t + params.delay_offset_ns + lag));
        }
    }

    let mut bg = rng::seeded(seed, stream::TRIGGER_BACKGROUND);
    uniform_clicks(Channel::TRIGGER, params.background_rate_trigger, duration_ns, &mut bg, &mut tags);
    let mut bg = rng::seeded(seed, stream::SIGNAL_BACKGROUND);
    uniform_clicks(Channel::SIGNAL, params.background_rate_signal, duration_ns, &mut bg, &mut tags);

    Ok(TimeTagStream::from_tags(tags, [Channel::TRIGGER, Channel::SIGNAL]))
}

/// Expected normalized trigger-signal cross-correlation at delay `tau_ns`:
/// `1 + R η_t η_s f(τ) / (r_t r_s)` with `f` the per-nanosecond delay
/// probability and `r_t`, `r_s` the detector singles rates.
pub fn analytic_g2(tau_ns: f64, params: &SourceParams) -> Result<f64> {
    let (r1, r2) = (params.singles_rate_trigger(), params.singles_rate_signal());
    if !(r1 > 0.0 && r2 > 0.0) {
        return Err(Error::UndefinedNormalization("a detector has zero singles rate".into()));
    }
    let true_rate = params.pair_rate * params.det_eff_trigger * params.det_eff_signal;
    Ok(1.0 + true_rate * params.delay_pmf(tau_ns) * NS_PER_S / (r1 * r2))
}

/// Chooses `pair_rate` so that `analytic_g2(delay_offset) == target_peak`.
///
/// The peak is a non-monotonic function of the pair rate: background
/// limits it at low rates and multi-pair accidentals at high rates. Of
/// the two rates that reach the target, the higher (multi-pair limited)
/// one is returned.
pub fn calibrate_to_peak(target_peak: f64, fixed: &SourceParams) -> Result<SourceParams> {
    if !(target_peak > 1.0 && target_peak.is_finite()) {
        return Err(Error::invalid(format!("target peak must be > 1, got {target_peak}")));
    }
    let mut params = SourceParams { pair_rate: 0.0, ..*fixed };
    params.validate()?;
    let (e1, e2) = (params.det_eff_trigger, params.det_eff_signal);
    let (b1, b2) = (params.background_rate_trigger, params.background_rate_signal);
    let g = target_peak - 1.0;
    let k = params.delay_pmf(params.delay_offset_ns as f64) * NS_PER_S * e1 * e2;
    if k == 0.0 {
        return Err(Error::NoSolution("a detector efficiency is zero".into()));
    }
    // g (e1 x + b1)(e2 x + b2) = k x
    let a = g * e1 * e2;
    let b = g * (e1 * b2 + e2 * b1) - k;
    let c = g * b1 * b2;
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 || b >= 0.0 {
        return Err(Error::NoSolution(format!(
            "peak g2 of {target_peak} is unreachable with backgrounds ({b1}, {b2}) /s"
        )));
    }
    let rate = (-b + disc.sqrt()) / (2.0 * a);
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::NoSolution(format!("no positive pair rate reaches peak {target_peak}")));
    }
    params.pair_rate = rate;
    Ok(params)
}

/// Sends every `signal` click through a 50:50 beam splitter onto `out_a`
/// or `out_b`.
pub fn hbt_split(stream: &TimeTagStream, signal: Channel, out_a: Channel, out_b: Channel, seed: u64) -> TimeTagStream {
    let mut rng = rng::seeded(seed, stream::BEAM_SPLITTER);
    let tags: Vec<Tag> = stream
        .tags()
        .iter()
        .map(|t| {
            if t.channel == signal {
                Tag::new(if rng.random::<bool>() { out_a } else { out_b }, t.t_ns)
            } else {
                *t
            }
        })
        .collect();
    let mut channels: Vec<Channel> = stream.channels().iter().copied().collect();
    channels.extend([out_a, out_b]);
    TimeTagStream::from_tags(tags, channels)
}
