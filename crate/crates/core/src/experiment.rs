//! End-to-end runs behind each CLI subcommand. Every run returns its output
//! files in memory so callers can compare or write them.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::analysis::{coincidence_histogram, measure_alpha, normalize_g2, AlphaMeasurement, CoincidenceHistogram, CoincidenceWindow};
use crate::config::{AnalysisParams, ExperimentConfig};
use crate::error::{Error, Result};
use crate::fit::{decay_points_csv, fit_exponential_decay, DecayFit, DecayPoint};
use crate::interference::{
    angle_scan, fringe_csv, fringe_visibility, lobe_intensity, pattern_rotation, prepare_hybrid, project_and_pattern,
    simulate_fringe_scan, PATTERN_ANGLES_DEG,
};
use crate::memory::{apply_storage_to_image, apply_storage_to_stream, storage_efficiency};
use crate::pgm;
use crate::rng::derive_seed;
use crate::source::{hbt_split, simulate_timetags};
use crate::spatial::{
    azimuthal_profile, count_lobes, intensity, lg_mode, lg_ring_radius, profile_csv, similarity, similarity_of, transverse_scan,
    visibility, IntensityImage,
};
use crate::timetag::{Channel, Tag, TimeTagStream};
use crate::tomography::{
    frequencies, process_fidelities, reconstruct_process, simulate_tomography, tomography_to_json, ProcessReconstruction,
    TomographyData,
};

/// Named output files plus non-fatal warnings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outputs {
    pub files: Vec<(String, Vec<u8>)>,
    pub warnings: Vec<String>,
}

impl Outputs {
    fn add(&mut self, name: impl Into<String>, contents: impl Into<Vec<u8>>) {
        self.files.push((name.into(), contents.into()));
    }

    fn add_json<T: Serialize>(&mut self, name: &str, value: &T) {
        let mut s = serde_json::to_string_pretty(value).expect("report serializes");
        s.push('\n');
        self.add(name, s);
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_slice())
    }

    pub fn names(&self) -> Vec<&str> {
        self.files.iter().map(|(n, _)| n.as_str()).collect()
    }

    /// Writes every file under `dir`, creating it if needed.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        self.files
            .iter()
            .map(|(name, contents)| {
                let path = dir.join(name);
                std::fs::write(&path, contents)?;
                Ok(path)
            })
            .collect()
    }
}

fn primary_seed(cfg: &ExperimentConfig) -> Result<u64> {
    cfg.seeds.first().copied().ok_or_else(|| Error::InvalidConfig("at least one seed is required".into()))
}

/// Source clicks for `seed`, optionally stored and split onto the HBT pair.
pub fn simulate_stream(cfg: &ExperimentConfig, seed: u64) -> Result<TimeTagStream> {
    let mut stream = simulate_timetags(&cfg.source, cfg.simulate.duration_s, seed)?;
    if cfg.simulate.storage {
        stream = apply_storage_to_stream(&stream, Channel::SIGNAL, &cfg.memory, seed)?;
    }
    if cfg.simulate.hbt {
        stream = hbt_split(&stream, Channel::SIGNAL, Channel::HBT_A, Channel::HBT_B, seed);
    }
    Ok(stream)
}

#[derive(Serialize)]
struct SimulateSummary {
    seed: u64,
    duration_s: f64,
    pair_rate: f64,
    counts: BTreeMap<String, u64>,
}

fn channel_counts(stream: &TimeTagStream) -> BTreeMap<String, u64> {
    stream.channels().iter().map(|c| (c.to_string(), stream.count(*c))).collect()
}

/// `timetags.csv` and `simulation.json`.
pub fn run_simulate(cfg: &ExperimentConfig) -> Result<Outputs> {
    let seed = primary_seed(cfg)?;
    let stream = simulate_stream(cfg, seed)?;
    let mut out = Outputs::default();
    out.add("timetags.csv", stream.to_csv());
    out.add_json(
        "simulation.json",
        &SimulateSummary { seed, duration_s: cfg.simulate.duration_s, pair_rate: cfg.source.pair_rate, counts: channel_counts(&stream) },
    );
    Ok(out)
}

/// Every signal-side click (direct or either HBT port) relabeled as
/// [`Channel::SIGNAL`].
pub fn merged_signal(stream: &TimeTagStream, trigger: Channel) -> TimeTagStream {
    let signal = [Channel::SIGNAL, Channel::HBT_A, Channel::HBT_B];
    let tags: Vec<Tag> = stream
        .tags()
        .iter()
        .filter(|t| t.channel == trigger || signal.contains(&t.channel))
        .map(|t| if t.channel == trigger { *t } else { Tag::new(Channel::SIGNAL, t.t_ns) })
        .collect();
    TimeTagStream::from_tags(tags, [trigger, Channel::SIGNAL])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisSummary {
    pub duration_s: f64,
    pub counts: BTreeMap<String, u64>,
    pub peak_g2: Option<f64>,
    pub peak_tau_ns: Option<f64>,
    pub alpha: Option<AlphaMeasurement>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub histogram: Option<CoincidenceHistogram>,
    pub g2: Option<crate::analysis::G2Curve>,
    pub summary: AnalysisSummary,
    pub warnings: Vec<String>,
}

/// Cross-correlation of the trigger with all signal-side clicks, and α
/// when both HBT ports carry clicks.
pub fn analyze_stream(stream: &TimeTagStream, params: &AnalysisParams) -> Result<AnalysisReport> {
    let mut warnings = Vec::new();
    let counts = channel_counts(stream);
    let Some((first, last)) = stream.span() else {
        warnings.push("input stream is empty; outputs are empty".to_string());
        let summary = AnalysisSummary { duration_s: 0.0, counts, peak_g2: None, peak_tau_ns: None, alpha: None };
        return Ok(AnalysisReport { histogram: None, g2: None, summary, warnings });
    };
    let duration_s = params.duration_s.unwrap_or((last - first + 1) as f64 * 1e-9);
    let merged = merged_signal(stream, params.trigger);
    let range = (params.delay_min_ns, params.delay_max_ns);
    let width = range.1 - range.0;
    let hi = range.0 + (width + params.bin_width_ns - 1) / params.bin_width_ns * params.bin_width_ns;
    let hist = coincidence_histogram(&merged, params.trigger, Channel::SIGNAL, params.bin_width_ns, (range.0, hi))?;
    let g2 = match normalize_g2(&hist, merged.count(params.trigger), merged.count(Channel::SIGNAL), duration_s) {
        Ok(g) => Some(g),
        Err(e @ Error::UndefinedNormalization(_)) => {
            warnings.push(format!("g2 not computed: {e}"));
            None
        }
        Err(e) => return Err(e),
    };
    let peak = g2.as_ref().and_then(|g| g.peak());
    let alpha = if stream.count(Channel::HBT_A) > 0 && stream.count(Channel::HBT_B) > 0 {
        let window = CoincidenceWindow::new(params.alpha_window_start_ns, params.alpha_window_ns)?;
        match measure_alpha(stream, params.trigger, Channel::HBT_A, Channel::HBT_B, window) {
            Ok(a) => Some(a),
            Err(e @ Error::InsufficientStatistics(_)) => {
                warnings.push(format!("alpha not computed: {e}"));
                None
            }
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let summary = AnalysisSummary { duration_s, counts, peak_g2: peak.map(|p| p.0), peak_tau_ns: peak.map(|p| p.1), alpha };
    Ok(AnalysisReport { histogram: Some(hist), g2, summary, warnings })
}

/// `histogram.csv`, `g2.csv`, `analysis.json`, plus `alpha.json` when α
/// was measured.
pub fn run_analyze(cfg: &ExperimentConfig, csv_text: &str) -> Result<Outputs> {
    let stream = TimeTagStream::from_csv(csv_text)?;
    let report = analyze_stream(&stream, &cfg.analysis)?;
    let mut out = Outputs { warnings: report.warnings.clone(), ..Outputs::default() };
    out.add("histogram.csv", report.histogram.as_ref().map_or_else(|| "tau_ns,counts\n".to_string(), |h| h.to_csv()));
    out.add("g2.csv", report.g2.as_ref().map_or_else(|| "tau_ns,g,stderr\n".to_string(), |g| g.to_csv()));
    out.add_json("analysis.json", &report.summary);
    if let Some(a) = &report.summary.alpha {
        out.add_json("alpha.json", a);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationReport {
    /// Retrieved peak g² per storage time.
    pub points: Vec<DecayPoint>,
    pub fit: DecayFit,
}

/// Retrieved cross-correlation peak at each storage time (histograms merged
/// over all seeds) and its exponential-decay fit.
pub fn correlation_sweep(cfg: &ExperimentConfig) -> Result<CorrelationReport> {
    if cfg.source.pair_rate <= 0.0 {
        return Err(Error::InsufficientStatistics("the source emits no pairs".into()));
    }
    let c = &cfg.correlation;
    let t0 = cfg.source.delay_offset_ns;
    let mut points = Vec::with_capacity(c.storage_times_ns.len());
    for (k, &storage) in c.storage_times_ns.iter().enumerate() {
        let memory = cfg.memory.with_storage_time(storage);
        let center = t0 + storage.round() as i64;
        let before = (c.window_before_ns + c.bin_width_ns - 1) / c.bin_width_ns * c.bin_width_ns;
        let after = (c.window_after_ns + c.bin_width_ns - 1) / c.bin_width_ns * c.bin_width_ns;
        let range = (center - before, center + after);
        let mut merged: Option<CoincidenceHistogram> = None;
        let (mut na, mut nb, mut duration) = (0u64, 0u64, 0.0);
        for &seed in &cfg.seeds {
            let s = derive_seed(seed, k as u64);
            let stream = simulate_timetags(&cfg.source, c.duration_s, s)?;
            let stored = apply_storage_to_stream(&stream, Channel::SIGNAL, &memory, s)?;
            let hist = coincidence_histogram(&stored, Channel::TRIGGER, Channel::SIGNAL, c.bin_width_ns, range)?;
            na += stored.count(Channel::TRIGGER);
            nb += stored.count(Channel::SIGNAL);
            duration += c.duration_s;
            match merged.as_mut() {
                Some(m) => m.merge(&hist)?,
                None => merged = Some(hist),
            }
        }
        let hist = merged.ok_or_else(|| Error::InvalidConfig("at least one seed is required".into()))?;
        let peak_bin = (before / c.bin_width_ns) as usize;
        if hist.bins[peak_bin] == 0 {
            return Err(Error::InsufficientStatistics(format!("no coincidences at the retrieval peak for storage {storage} ns")));
        }
        let g2 = normalize_g2(&hist, na, nb, duration)?;
        points.push(DecayPoint { t_ns: storage, g: g2.g[peak_bin], stderr: g2.stderr[peak_bin] });
    }
    let fit = fit_exponential_decay(&points)?;
    Ok(CorrelationReport { points, fit })
}

/// `g2_vs_storage.csv` and `decay_fit.json`.
pub fn run_correlation(cfg: &ExperimentConfig) -> Result<Outputs> {
    let report = correlation_sweep(cfg)?;
    let mut out = Outputs::default();
    out.add("g2_vs_storage.csv", decay_points_csv(&report.points));
    out.add("decay_fit.json", report.fit.to_json());
    Ok(out)
}

/// Peak cross-correlation `G` such that the scanned profile
/// `1 + (G - 1)·u(x)` has visibility `target`, where `u` is the profile
/// normalized to the image maximum.
pub fn calibrate_peak_for_visibility(profile: &[f64], target: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&target) {
        return Err(Error::invalid(format!("target visibility must lie in [0, 1), got {target}")));
    }
    let hi = profile.iter().copied().fold(f64::MIN, f64::max);
    let lo = profile.iter().copied().fold(f64::MAX, f64::min);
    let denom = (hi - lo) - target * (hi + lo);
    if profile.is_empty() || !(denom > 0.0) {
        return Err(Error::NoSolution(format!("profile contrast cannot reach visibility {target}")));
    }
    Ok(1.0 + 2.0 * target / denom)
}

/// Position-scanned cross-correlation `1 + (G - 1)·I(x)/I_max` along the
/// center row.
pub fn scanned_g2_profile(image: &IntensityImage, peak_g2: f64) -> Result<Vec<f64>> {
    let max = image.max();
    if !(max > 0.0) {
        return Err(Error::UndefinedVisibility);
    }
    Ok(transverse_scan(image, image.grid.center_row())?.into_iter().map(|v| 1.0 + (peak_g2 - 1.0) * v / max).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImageMetrics {
    pub visibility_in: f64,
    pub visibility_out: f64,
    /// Similarity of the scanned input and retrieved g² profiles.
    pub similarity: f64,
    /// Similarity of the full input and retrieved intensity images.
    pub similarity_image: f64,
    pub peak_g2_in: f64,
    pub peak_g2_out: f64,
    pub efficiency: f64,
    /// Fraction of retrieved clicks that are stored photons.
    pub signal_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageReport {
    pub input: IntensityImage,
    pub retrieved: IntensityImage,
    pub input_profile: Vec<f64>,
    pub retrieved_profile: Vec<f64>,
    pub metrics: ImageMetrics,
}

/// Stores `input` and compares scanned cross-correlation profiles. The
/// retrieved peak excess is the input excess times the stored-photon
/// fraction `ηS/(ηS + n)`, with `S` the detected signal rate and `n` the
/// image leakage noise.
pub fn image_memory(input: &IntensityImage, cfg: &ExperimentConfig) -> Result<ImageReport> {
    let retrieved = apply_storage_to_image(input, &cfg.memory)?;
    let row = transverse_scan(input, input.grid.center_row())?;
    let max = input.max();
    if !(max > 0.0) {
        return Err(Error::UndefinedVisibility);
    }
    let peak_in = match cfg.image.peak_g2 {
        Some(g) => g,
        None => calibrate_peak_for_visibility(&row.iter().map(|v| v / max).collect::<Vec<_>>(), cfg.image.visibility_input)?,
    };
    let eta = storage_efficiency(cfg.memory.storage_time_ns, &cfg.memory);
    let stored_rate = eta * cfg.source.pair_rate * cfg.source.det_eff_signal;
    let signal_fraction = if stored_rate + cfg.image.noise_rate > 0.0 { stored_rate / (stored_rate + cfg.image.noise_rate) } else { 0.0 };
    let peak_out = 1.0 + (peak_in - 1.0) * signal_fraction;
    let input_profile = scanned_g2_profile(input, peak_in)?;
    let retrieved_profile = scanned_g2_profile(&retrieved, peak_out)?;
    let metrics = ImageMetrics {
        visibility_in: visibility(&input_profile)?,
        visibility_out: visibility(&retrieved_profile)?,
        similarity: similarity_of(&input_profile, &retrieved_profile)?,
        similarity_image: similarity(input, &retrieved)?,
        peak_g2_in: peak_in,
        peak_g2_out: peak_out,
        efficiency: eta,
        signal_fraction,
    };
    Ok(ImageReport { input: input.clone(), retrieved, input_profile, retrieved_profile, metrics })
}

/// Donut image of `beam.l` on the configured grid.
pub fn donut_image(cfg: &ExperimentConfig) -> Result<IntensityImage> {
    Ok(intensity(&lg_mode(cfg.beam.l, cfg.beam.waist_mm, cfg.grid)?))
}

/// `input_profile.csv`, `retrieved_profile.csv`, `input.pgm`,
/// `retrieved.pgm`, `metrics.json`.
pub fn run_image_memory(cfg: &ExperimentConfig) -> Result<Outputs> {
    let report = image_memory(&donut_image(cfg)?, cfg)?;
    let x = cfg.grid.column_positions();
    let mut out = Outputs::default();
    out.add("input_profile.csv", profile_csv(&x, &report.input_profile));
    out.add("retrieved_profile.csv", profile_csv(&x, &report.retrieved_profile));
    out.add("input.pgm", pgm::encode(&report.input));
    out.add("retrieved.pgm", pgm::encode(&report.retrieved));
    out.add_json("metrics.json", &report.metrics);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TomographySummary {
    pub fidelities: BTreeMap<String, f64>,
    pub mean_fidelity: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub success_probability: Option<f64>,
    pub tp_residual: f64,
}

pub fn tomography_summary(rec: &ProcessReconstruction, success_probability: Option<f64>) -> TomographySummary {
    let fidelities: BTreeMap<String, f64> = process_fidelities(rec).into_iter().map(|(l, f)| (l.to_string(), f)).collect();
    let mean_fidelity = fidelities.values().sum::<f64>() / fidelities.len().max(1) as f64;
    TomographySummary { fidelities, mean_fidelity, success_probability, tp_residual: rec.chi.tp_residual() }
}

fn tomography_outputs(data: &TomographyData, success_probability: Option<f64>) -> Result<Outputs> {
    let rec = reconstruct_process(&frequencies(data)?)?;
    let mut out = Outputs::default();
    out.add("tomography_data.json", tomography_to_json(data));
    out.add("chi.json", rec.chi.to_json());
    out.add_json("fidelities.json", &tomography_summary(&rec, success_probability));
    Ok(out)
}

/// Simulated tomography of the configured channel: `tomography_data.json`,
/// `chi.json`, `fidelities.json`.
pub fn run_tomography(cfg: &ExperimentConfig) -> Result<Outputs> {
    let data = simulate_tomography(&cfg.channel, cfg.tomography.shots, primary_seed(cfg)?)?;
    tomography_outputs(&data, Some(1.0 - cfg.channel.loss))
}

/// Reconstruction from measured counts in the JSON exchange format. The
/// success probability of external data is unknown and left out.
pub fn run_tomography_from_data(json: &str) -> Result<Outputs> {
    tomography_outputs(&crate::tomography::tomography_from_json(json)?, None)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterferenceSummary {
    pub l: u32,
    pub visibility: f64,
    pub expected_visibility: f64,
    pub noise_floor: f64,
    pub lobes: usize,
    /// Pattern rotation per degree of HWP rotation, degrees.
    pub rotation_per_hwp_deg: f64,
}

pub fn pattern_file_name(theta_deg: f64) -> String {
    format!("pattern_theta{theta_deg}.pgm")
}

/// Fringe scan samples `(theta_rad, counts)` for the configured lobe.
pub fn fringe_scan(cfg: &ExperimentConfig) -> Result<Vec<(f64, f64)>> {
    let p = &cfg.interference;
    let thetas = angle_scan(0.0, p.step_deg.to_radians(), p.points);
    let az = p.azimuth0_deg.to_radians();
    if p.shot_noise {
        simulate_fringe_scan(p.l, &thetas, az, p.noise_floor, p.photons, primary_seed(cfg)?)
    } else {
        thetas.iter().map(|&t| Ok((t, p.photons * lobe_intensity(p.l, t, az, p.noise_floor)?))).collect()
    }
}

/// Patterns at the four recorded HWP angles, `fringe.csv` and
/// `visibility.json`.
pub fn run_interference(cfg: &ExperimentConfig) -> Result<Outputs> {
    let p = &cfg.interference;
    let state = prepare_hybrid(p.l)?;
    let mut out = Outputs::default();
    let mut lobes = 0;
    for (i, deg) in PATTERN_ANGLES_DEG.iter().enumerate() {
        let img = project_and_pattern(&state, deg.to_radians(), cfg.grid, p.waist_mm)?;
        if i == 0 {
            lobes = count_lobes(&azimuthal_profile(&img, lg_ring_radius(p.l as i32, p.waist_mm), 720));
        }
        out.add(pattern_file_name(*deg), pgm::encode(&img));
    }
    let samples = fringe_scan(cfg)?;
    let v = fringe_visibility(&samples)?;
    out.add("fringe.csv", fringe_csv(&samples));
    out.add_json(
        "visibility.json",
        &InterferenceSummary {
            l: p.l,
            visibility: v,
            expected_visibility: 1.0 - p.noise_floor,
            noise_floor: p.noise_floor,
            lobes,
            rotation_per_hwp_deg: pattern_rotation(p.l, 1.0),
        },
    );
    Ok(out)
}
