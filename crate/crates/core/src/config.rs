//! Experiment configuration in a flat `section.key = value` text format.
//!
//! ```text
//! # comments run to end of line
//! source.target_peak_g2 = 200
//! memory.decoherence_time_ns = 348
//! correlation.storage_times_ns = 0, 50, 100
//! seeds = 1, 2
//! ```
//!
//! Every key is optional and falls back to its default. Unknown and
//! repeated keys are errors.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::memory::{DecayShape, MemoryParams};
use crate::source::{calibrate_to_peak, SourceParams};
use crate::spatial::TransverseGrid;
use crate::timetag::Channel;
use crate::tomography::ChannelParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamParams {
    pub waist_mm: f64,
    /// OAM charge of the stored donut image.
    pub l: i32,
}

impl Default for BeamParams {
    fn default() -> Self {
        BeamParams { waist_mm: 0.6, l: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageParams {
    /// Input-profile visibility the peak cross-correlation is calibrated
    /// to, used unless `peak_g2` is given.
    pub visibility_input: f64,
    pub peak_g2: Option<f64>,
    /// Leakage noise on the retrieved image channel, counts/s.
    pub noise_rate: f64,
}

impl Default for ImageParams {
    fn default() -> Self {
        ImageParams { visibility_input: 0.9, peak_g2: None, noise_rate: 900.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationParams {
    /// Simulated seconds per seed and storage time.
    pub duration_s: f64,
    pub storage_times_ns: Vec<f64>,
    pub bin_width_ns: i64,
    /// Histogram range relative to the expected retrieval delay.
    pub window_before_ns: i64,
    pub window_after_ns: i64,
}

impl Default for CorrelationParams {
    fn default() -> Self {
        CorrelationParams {
            duration_s: 20.0,
            storage_times_ns: (0..=8).map(|k| 50.0 * k as f64).collect(),
            bin_width_ns: 1,
            window_before_ns: 100,
            window_after_ns: 300,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TomographySettings {
    pub shots: u64,
}

impl Default for TomographySettings {
    fn default() -> Self {
        TomographySettings { shots: 10_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferenceParams {
    pub l: u32,
    pub waist_mm: f64,
    pub noise_floor: f64,
    /// Azimuth of the monitored lobe, degrees.
    pub azimuth0_deg: f64,
    pub step_deg: f64,
    pub points: usize,
    /// Mean photon number at a fringe maximum of unit visibility.
    pub photons: f64,
    pub shot_noise: bool,
}

impl Default for InterferenceParams {
    fn default() -> Self {
        InterferenceParams {
            l: 2,
            waist_mm: 0.6,
            noise_floor: 0.26,
            azimuth0_deg: 0.0,
            step_deg: 7.5,
            points: 24,
            photons: 10_000.0,
            shot_noise: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisParams {
    pub trigger: Channel,
    pub bin_width_ns: i64,
    pub delay_min_ns: i64,
    pub delay_max_ns: i64,
    /// Herald window start relative to the trigger, ns.
    pub alpha_window_start_ns: i64,
    pub alpha_window_ns: i64,
    /// Normalization time; the stream's own span when unset.
    pub duration_s: Option<f64>,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        AnalysisParams {
            trigger: Channel::TRIGGER,
            bin_width_ns: 1,
            delay_min_ns: -100,
            delay_max_ns: 300,
            alpha_window_start_ns: crate::source::DEFAULT_DELAY_OFFSET_NS,
            alpha_window_ns: crate::analysis::DEFAULT_ALPHA_WINDOW_NS,
            duration_s: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulateParams {
    pub duration_s: f64,
    /// Route the signal through the memory before detection.
    pub storage: bool,
    /// Split the signal onto the two HBT detectors.
    pub hbt: bool,
}

impl Default for SimulateParams {
    fn default() -> Self {
        SimulateParams { duration_s: 1.0, storage: false, hbt: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: SourceParams,
    pub memory: MemoryParams,
    pub channel: ChannelParams,
    pub grid: TransverseGrid,
    pub beam: BeamParams,
    pub image: ImageParams,
    pub correlation: CorrelationParams,
    pub tomography: TomographySettings,
    pub interference: InterferenceParams,
    pub analysis: AnalysisParams,
    pub simulate: SimulateParams,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            source: SourceParams::default(),
            memory: MemoryParams::default(),
            channel: ChannelParams::default(),
            grid: TransverseGrid::default(),
            beam: BeamParams::default(),
            image: ImageParams::default(),
            correlation: CorrelationParams::default(),
            tomography: TomographySettings::default(),
            interference: InterferenceParams::default(),
            analysis: AnalysisParams::default(),
            simulate: SimulateParams::default(),
            seeds: vec![1],
            output_dir: PathBuf::from("out"),
        }
    }
}

type FieldResult = std::result::Result<(), String>;

fn number(v: &str) -> std::result::Result<f64, String> {
    let x: f64 = v.parse().map_err(|_| format!("`{v}` is not a number"))?;
    if !x.is_finite() {
        return Err(format!("`{v}` is not finite"));
    }
    Ok(x)
}

fn non_negative(v: &str) -> std::result::Result<f64, String> {
    let x = number(v)?;
    if x < 0.0 {
        return Err(format!("must be >= 0, got {x}"));
    }
    Ok(x)
}

fn positive(v: &str) -> std::result::Result<f64, String> {
    let x = number(v)?;
    if x <= 0.0 {
        return Err(format!("must be > 0, got {x}"));
    }
    Ok(x)
}

fn fraction(v: &str) -> std::result::Result<f64, String> {
    let x = number(v)?;
    if !(0.0..=1.0).contains(&x) {
        return Err(format!("must lie in [0, 1], got {x}"));
    }
    Ok(x)
}

fn integer<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("`{v}` is not a valid integer here"))
}

fn boolean(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("`{v}` is not a boolean")),
    }
}

fn list<T>(v: &str, item: impl Fn(&str) -> std::result::Result<T, String>) -> std::result::Result<Vec<T>, String> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| item(s.trim())).collect()
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(", ")
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        let mut seen = HashSet::new();
        let mut target_peak: Option<(usize, f64)> = None;
        let mut pair_rate_line = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |message: String| Error::Config { line, message };
            let (key, value) = content.split_once('=').ok_or_else(|| err(format!("expected `key = value`, found `{content}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(err(format!("key `{key}` is set twice")));
            }
            match key {
                "source.target_peak_g2" => {
                    let g = number(value).map_err(|m| err(format!("{key}: {m}")))?;
                    target_peak = Some((line, g));
                }
                "source.pair_rate" => {
                    pair_rate_line = Some(line);
                    cfg.source.pair_rate = non_negative(value).map_err(|m| err(format!("{key}: {m}")))?;
                }
                _ => cfg.set(key, value).map_err(|m| err(format!("{key}: {m}")))?,
            }
        }
        if let Some((line, g)) = target_peak {
            if pair_rate_line.is_some() {
                return Err(Error::Config { line, message: "set either source.pair_rate or source.target_peak_g2, not both".into() });
            }
            cfg.source = calibrate_to_peak(g, &cfg.source).map_err(|e| Error::Config { line, message: e.to_string() })?;
        } else if pair_rate_line.is_none() {
            // Keep the default calibration consistent with any changed
            // efficiencies or backgrounds.
            cfg.source = calibrate_to_peak(crate::source::DEFAULT_PEAK_G2, &cfg.source)
                .map_err(|e| Error::InvalidConfig(format!("default source calibration: {e}")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, v: &str) -> FieldResult {
        match key {
            "source.delay_offset_ns" => self.source.delay_offset_ns = integer(v)?,
            "source.coherence_time_ns" => self.source.coherence_time_ns = positive(v)?,
            "source.background_rate_trigger" => self.source.background_rate_trigger = non_negative(v)?,
            "source.background_rate_signal" => self.source.background_rate_signal = non_negative(v)?,
            "source.det_eff_trigger" => self.source.det_eff_trigger = fraction(v)?,
            "source.det_eff_signal" => self.source.det_eff_signal = fraction(v)?,

            "memory.eta0" => self.memory.eta0 = fraction(v)?,
            "memory.decoherence_time_ns" => self.memory.decoherence_time_ns = positive(v)?,
            "memory.storage_time_ns" => self.memory.storage_time_ns = non_negative(v)?,
            "memory.noise_rate" => self.memory.noise_rate = non_negative(v)?,
            "memory.blur_sigma_mm" => self.memory.blur_sigma_mm = non_negative(v)?,
            "memory.decay" => {
                self.memory.decay = match v {
                    "exponential" => DecayShape::Exponential,
                    "gaussian" => DecayShape::Gaussian,
                    _ => return Err(format!("`{v}` is not one of exponential, gaussian")),
                }
            }

            "channel.loss" => self.channel.loss = fraction(v)?,
            "channel.phase_noise_sigma" => self.channel.phase_noise_sigma = non_negative(v)?,
            "channel.depolarization" => self.channel.depolarization = fraction(v)?,

            "grid.width" => self.grid.width = integer(v)?,
            "grid.height" => self.grid.height = integer(v)?,
            "grid.pitch_mm" => self.grid.pitch_mm = positive(v)?,

            "beam.waist_mm" => self.beam.waist_mm = positive(v)?,
            "beam.l" => self.beam.l = integer(v)?,

            "image.visibility_input" => self.image.visibility_input = fraction(v)?,
            "image.peak_g2" => self.image.peak_g2 = Some(positive(v)?),
            "image.noise_rate" => self.image.noise_rate = non_negative(v)?,

            "correlation.duration_s" => self.correlation.duration_s = positive(v)?,
            "correlation.storage_times_ns" => self.correlation.storage_times_ns = list(v, non_negative)?,
            "correlation.bin_width_ns" => self.correlation.bin_width_ns = integer(v)?,
            "correlation.window_before_ns" => self.correlation.window_before_ns = integer(v)?,
            "correlation.window_after_ns" => self.correlation.window_after_ns = integer(v)?,

            "tomography.shots" => self.tomography.shots = integer(v)?,

            "interference.l" => self.interference.l = integer(v)?,
            "interference.waist_mm" => self.interference.waist_mm = positive(v)?,
            "interference.noise_floor" => self.interference.noise_floor = fraction(v)?,
            "interference.azimuth0_deg" => self.interference.azimuth0_deg = number(v)?,
            "interference.step_deg" => self.interference.step_deg = positive(v)?,
            "interference.points" => self.interference.points = integer(v)?,
            "interference.photons" => self.interference.photons = positive(v)?,
            "interference.shot_noise" => self.interference.shot_noise = boolean(v)?,

            "analysis.trigger_channel" => self.analysis.trigger = Channel(integer(v)?),
            "analysis.bin_width_ns" => self.analysis.bin_width_ns = integer(v)?,
            "analysis.delay_min_ns" => self.analysis.delay_min_ns = integer(v)?,
            "analysis.delay_max_ns" => self.analysis.delay_max_ns = integer(v)?,
            "analysis.alpha_window_start_ns" => self.analysis.alpha_window_start_ns = integer(v)?,
            "analysis.alpha_window_ns" => self.analysis.alpha_window_ns = integer(v)?,
            "analysis.duration_s" => self.analysis.duration_s = Some(positive(v)?),

            "simulate.duration_s" => self.simulate.duration_s = positive(v)?,
            "simulate.storage" => self.simulate.storage = boolean(v)?,
            "simulate.hbt" => self.simulate.hbt = boolean(v)?,

            "seeds" => self.seeds = list(v, integer)?,
            "output_dir" => {
                if v.is_empty() {
                    return Err("must not be empty".into());
                }
                self.output_dir = PathBuf::from(v)
            }
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    /// Checks cross-field constraints after parsing or editing.
    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| Error::InvalidConfig(e.to_string());
        self.source.validate().map_err(wrap)?;
        self.memory.validate().map_err(wrap)?;
        self.channel.validate().map_err(wrap)?;
        self.grid.validate().map_err(wrap)?;
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        if self.beam.l == 0 {
            return bad("beam.l must be non-zero for a donut image");
        }
        if self.interference.l == 0 {
            return bad("interference.l must be >= 1");
        }
        if self.interference.noise_floor >= 1.0 {
            return bad("interference.noise_floor must be < 1");
        }
        if self.interference.points < 8 {
            return bad("interference.points must be >= 8");
        }
        if self.tomography.shots == 0 {
            return bad("tomography.shots must be > 0");
        }
        if self.correlation.storage_times_ns.is_empty() {
            return bad("correlation.storage_times_ns must list at least one time");
        }
        if self.correlation.bin_width_ns < 1 || self.analysis.bin_width_ns < 1 {
            return bad("bin widths must be >= 1 ns");
        }
        if self.correlation.window_before_ns < 0 || self.correlation.window_after_ns <= 0 {
            return bad("correlation window must extend after the retrieval delay");
        }
        if self.analysis.delay_max_ns <= self.analysis.delay_min_ns {
            return bad("analysis.delay_max_ns must exceed analysis.delay_min_ns");
        }
        if self.analysis.alpha_window_ns < 1 {
            return bad("analysis.alpha_window_ns must be >= 1");
        }
        Ok(())
    }

    /// Text form listing every key; `parse(to_text())` reproduces `self`
    /// (the pair rate is written explicitly).
    pub fn to_text(&self) -> String {
        let s = &self.source;
        let m = &self.memory;
        let c = &self.channel;
        let i = &self.interference;
        let a = &self.analysis;
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("source.pair_rate", s.pair_rate.to_string());
        put("source.delay_offset_ns", s.delay_offset_ns.to_string());
        put("source.coherence_time_ns", s.coherence_time_ns.to_string());
        put("source.background_rate_trigger", s.background_rate_trigger.to_string());
        put("source.background_rate_signal", s.background_rate_signal.to_string());
        put("source.det_eff_trigger", s.det_eff_trigger.to_string());
        put("source.det_eff_signal", s.det_eff_signal.to_string());
        put("memory.eta0", m.eta0.to_string());
        put("memory.decoherence_time_ns", m.decoherence_time_ns.to_string());
        put("memory.storage_time_ns", m.storage_time_ns.to_string());
        put("memory.noise_rate", m.noise_rate.to_string());
        put("memory.blur_sigma_mm", m.blur_sigma_mm.to_string());
        put(
            "memory.decay",
            match m.decay {
                DecayShape::Exponential => "exponential".into(),
                DecayShape::Gaussian => "gaussian".into(),
            },
        );
        put("channel.loss", c.loss.to_string());
        put("channel.phase_noise_sigma", c.phase_noise_sigma.to_string());
        put("channel.depolarization", c.depolarization.to_string());
        put("grid.width", self.grid.width.to_string());
        put("grid.height", self.grid.height.to_string());
        put("grid.pitch_mm", self.grid.pitch_mm.to_string());
        put("beam.waist_mm", self.beam.waist_mm.to_string());
        put("beam.l", self.beam.l.to_string());
        put("image.visibility_input", self.image.visibility_input.to_string());
        if let Some(g) = self.image.peak_g2 {
            put("image.peak_g2", g.to_string());
        }
        put("image.noise_rate", self.image.noise_rate.to_string());
        put("correlation.duration_s", self.correlation.duration_s.to_string());
        put("correlation.storage_times_ns", join(&self.correlation.storage_times_ns));
        put("correlation.bin_width_ns", self.correlation.bin_width_ns.to_string());
        put("correlation.window_before_ns", self.correlation.window_before_ns.to_string());
        put("correlation.window_after_ns", self.correlation.window_after_ns.to_string());
        put("tomography.shots", self.tomography.shots.to_string());
        put("interference.l", i.l.to_string());
        put("interference.waist_mm", i.waist_mm.to_string());
        put("interference.noise_floor", i.noise_floor.to_string());
        put("interference.azimuth0_deg", i.azimuth0_deg.to_string());
        put("interference.step_deg", i.step_deg.to_string());
        put("interference.points", i.points.to_string());
        put("interference.photons", i.photons.to_string());
        put("interference.shot_noise", i.shot_noise.to_string());
        put("analysis.trigger_channel", a.trigger.to_string());
        put("analysis.bin_width_ns", a.bin_width_ns.to_string());
        put("analysis.delay_min_ns", a.delay_min_ns.to_string());
        put("analysis.delay_max_ns", a.delay_max_ns.to_string());
        put("analysis.alpha_window_start_ns", a.alpha_window_start_ns.to_string());
        put("analysis.alpha_window_ns", a.alpha_window_ns.to_string());
        if let Some(d) = a.duration_s {
            put("analysis.duration_s", d.to_string());
        }
        put("simulate.duration_s", self.simulate.duration_s.to_string());
        put("simulate.storage", self.simulate.storage.to_string());
        put("simulate.hbt", self.simulate.hbt.to_string());
        put("seeds", join(&self.seeds));
        put("output_dir", self.output_dir.display().to_string());
        out
    }
}
