//! Coincidence histograms, normalized g², the Cauchy-Schwarz factor and
//! the heralded anti-correlation parameter α.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timetag::{Channel, TimeTagStream};

/// The heralded-detection coincidence window, in ns.
pub const DEFAULT_ALPHA_WINDOW_NS: i64 = 50;

/// Auto-correlation of each arm of a thermal (single-mode SFWM) source.
pub const THERMAL_AUTO_G2: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoincidenceHistogram {
    pub bin_width_ns: i64,
    /// Half-open delay range `[min, max)` of `t_b - t_a`.
    pub delay_range_ns: (i64, i64),
    pub bins: Vec<u64>,
    /// Number of `(a, b)` click pairs whose delay fell inside the range.
    pub total_pairs_examined: u64,
}

impl CoincidenceHistogram {
    /// Start of each bin in ns.
    pub fn taus(&self) -> Vec<i64> {
        (0..self.bins.len() as i64).map(|i| self.delay_range_ns.0 + i * self.bin_width_ns).collect()
    }

    /// Sums `factor` adjacent bins.
    pub fn rebin(&self, factor: usize) -> Result<CoincidenceHistogram> {
        if factor == 0 || !self.bins.len().is_multiple_of(factor) {
            return Err(Error::invalid(format!("cannot rebin {} bins by {factor}", self.bins.len())));
        }
        Ok(CoincidenceHistogram {
            bin_width_ns: self.bin_width_ns * factor as i64,
            delay_range_ns: self.delay_range_ns,
            bins: self.bins.chunks(factor).map(|c| c.iter().sum()).collect(),
            total_pairs_examined: self.total_pairs_examined,
        })
    }

    /// Adds bins of a histogram with identical binning.
    pub fn merge(&mut self, other: &CoincidenceHistogram) -> Result<()> {
        if self.bin_width_ns != other.bin_width_ns || self.delay_range_ns != other.delay_range_ns {
            return Err(Error::invalid("merging histograms with different binning"));
        }
        self.bins.iter_mut().zip(&other.bins).for_each(|(a, b)| *a += b);
        self.total_pairs_examined += other.total_pairs_examined;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau_ns,counts\n");
        for (tau, n) in self.taus().iter().zip(&self.bins) {
            let _ = writeln!(out, "{tau},{n}");
        }
        out
    }
}

/// Histogram of `t_b - t_a` over every click pair of channels `a` and `b`.
/// For `a == b` a click is never paired with itself.
pub fn coincidence_histogram(
    stream: &TimeTagStream,
    ch_a: Channel,
    ch_b: Channel,
    bin_width_ns: i64,
    delay_range_ns: (i64, i64),
) -> Result<CoincidenceHistogram> {
    for ch in [ch_a, ch_b] {
        if !stream.has_channel(ch) {
            return Err(Error::invalid(format!("channel {ch} is not declared by the stream")));
        }
    }
    if bin_width_ns < 1 {
        return Err(Error::invalid(format!("bin width must be >= 1 ns, got {bin_width_ns}")));
    }
    let (lo, hi) = delay_range_ns;
    if hi <= lo {
        return Err(Error::invalid(format!("empty delay range [{lo}, {hi})")));
    }
    if (hi - lo) % bin_width_ns != 0 {
        return Err(Error::invalid(format!("delay range [{lo}, {hi}) is not a multiple of {bin_width_ns} ns")));
    }
    let mut bins = vec![0u64; ((hi - lo) / bin_width_ns) as usize];
    let a = stream.times(ch_a);
    let b = if ch_a == ch_b { a.clone() } else { stream.times(ch_b) };
    let mut total = 0;
    let mut start = 0;
    for (i, &ta) in a.iter().enumerate() {
        while start < b.len() && b[start] < ta + lo {
            start += 1;
        }
        for (j, &tb) in b.iter().enumerate().skip(start) {
            if tb >= ta + hi {
                break;
            }
            if ch_a == ch_b && i == j {
                continue;
            }
            bins[((tb - ta - lo) / bin_width_ns) as usize] += 1;
            total += 1;
        }
    }
    Ok(CoincidenceHistogram { bin_width_ns, delay_range_ns, bins, total_pairs_examined: total })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G2Curve {
    pub tau_ns: Vec<f64>,
    pub g: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl G2Curve {
    /// Largest `g` and its delay.
    pub fn peak(&self) -> Option<(f64, f64)> {
        self.g
            .iter()
            .zip(&self.tau_ns)
            .fold(None, |best: Option<(f64, f64)>, (g, t)| match best {
                Some((bg, _)) if bg >= *g => best,
                _ => Some((*g, *t)),
            })
    }

    /// Mean `g` (and its standard error) over bins with `lo <= tau < hi`.
    pub fn mean_over(&self, lo: f64, hi: f64) -> Option<(f64, f64)> {
        let picked: Vec<usize> = (0..self.tau_ns.len()).filter(|&i| self.tau_ns[i] >= lo && self.tau_ns[i] < hi).collect();
        if picked.is_empty() {
            return None;
        }
        let n = picked.len() as f64;
        let mean = picked.iter().map(|&i| self.g[i]).sum::<f64>() / n;
        let var = picked.iter().map(|&i| self.stderr[i].powi(2)).sum::<f64>() / (n * n);
        Some((mean, var.sqrt()))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau_ns,g,stderr\n");
        for i in 0..self.g.len() {
            let _ = writeln!(out, "{},{},{}", self.tau_ns[i], self.g[i], self.stderr[i]);
        }
        out
    }
}

/// Coincidences divided by the accidental level `N_a N_b Δτ / T`.
pub fn normalize_g2(hist: &CoincidenceHistogram, singles_a: u64, singles_b: u64, duration_s: f64) -> Result<G2Curve> {
    if singles_a == 0 || singles_b == 0 {
        return Err(Error::UndefinedNormalization("zero singles counts".into()));
    }
    if !(duration_s > 0.0 && duration_s.is_finite()) {
        return Err(Error::UndefinedNormalization(format!("duration must be > 0, got {duration_s}")));
    }
    let accidental = singles_a as f64 * singles_b as f64 * hist.bin_width_ns as f64 / (duration_s * 1e9);
    Ok(G2Curve {
        tau_ns: hist.taus().into_iter().map(|t| t as f64).collect(),
        g: hist.bins.iter().map(|&n| n as f64 / accidental).collect(),
        stderr: hist.bins.iter().map(|&n| (n as f64).sqrt() / accidental).collect(),
    })
}

/// `R = g_cross² / (g_aa g_bb)`; classical light has `R <= 1`.
pub fn cauchy_schwarz_r(g_cross_peak: f64, g_auto_a: f64, g_auto_b: f64) -> Result<f64> {
    if !(g_auto_a > 0.0 && g_auto_b > 0.0 && g_auto_a.is_finite() && g_auto_b.is_finite()) {
        return Err(Error::invalid(format!(
            "auto-correlations must be positive, got ({g_auto_a}, {g_auto_b})"
        )));
    }
    Ok(g_cross_peak * g_cross_peak / (g_auto_a * g_auto_b))
}

/// `α = P1 P123 / (P12 P13)`.
pub fn anti_correlation_alpha(p1: u64, p12: u64, p13: u64, p123: u64) -> Result<f64> {
    if p12 == 0 || p13 == 0 {
        return Err(Error::InsufficientStatistics(format!(
            "no twofold coincidences (P12 = {p12}, P13 = {p13})"
        )));
    }
    Ok(p1 as f64 * p123 as f64 / (p12 as f64 * p13 as f64))
}

/// Delay window `[start, start + width)` relative to each trigger click.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoincidenceWindow {
    pub start_ns: i64,
    pub width_ns: i64,
}

impl CoincidenceWindow {
    pub fn new(start_ns: i64, width_ns: i64) -> Result<Self> {
        if width_ns < 1 {
            return Err(Error::invalid(format!("window width must be >= 1 ns, got {width_ns}")));
        }
        Ok(CoincidenceWindow { start_ns, width_ns })
    }

    /// Default heralding window opening at the expected onset of the partner.
    pub fn heralded(onset_ns: i64) -> Self {
        CoincidenceWindow { start_ns: onset_ns, width_ns: DEFAULT_ALPHA_WINDOW_NS }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaMeasurement {
    pub p1: u64,
    pub p12: u64,
    pub p13: u64,
    pub p123: u64,
    pub alpha: f64,
}

/// Counts heralded two- and threefold coincidences and applies
/// [`anti_correlation_alpha`].
pub fn measure_alpha(
    stream: &TimeTagStream,
    trigger: Channel,
    a: Channel,
    b: Channel,
    window: CoincidenceWindow,
) -> Result<AlphaMeasurement> {
    for ch in [trigger, a, b] {
        if !stream.has_channel(ch) {
            return Err(Error::invalid(format!("channel {ch} is not declared by the stream")));
        }
    }
    let triggers = stream.times(trigger);
    let times_a = stream.times(a);
    let times_b = stream.times(b);
    let (mut ia, mut ib) = (0, 0);
    let (mut p12, mut p13, mut p123) = (0, 0, 0);
    let hit = |times: &[i64], cursor: &mut usize, lo: i64, hi: i64| {
        while *cursor < times.len() && times[*cursor] < lo {
            *cursor += 1;
        }
        *cursor < times.len() && times[*cursor] < hi
    };
    for &t in &triggers {
        let lo = t + window.start_ns;
        let hi = lo + window.width_ns;
        let in_a = hit(&times_a, &mut ia, lo, hi);
        let in_b = hit(&times_b, &mut ib, lo, hi);
        p12 += in_a as u64;
        p13 += in_b as u64;
        p123 += (in_a && in_b) as u64;
    }
    let p1 = triggers.len() as u64;
    let alpha = anti_correlation_alpha(p1, p12, p13, p123)?;
    Ok(AlphaMeasurement { p1, p12, p13, p123, alpha })
}

/// Zero-delay auto-correlation of one light field estimated from the two
/// outputs of a beam splitter: coincidences with `|t_b - t_a| < half_window`
/// over the accidental level.
pub fn estimate_auto_g2(stream: &TimeTagStream, a: Channel, b: Channel, half_window_ns: i64, duration_s: f64) -> Result<f64> {
    if half_window_ns < 1 {
        return Err(Error::invalid("half window must be >= 1 ns"));
    }
    let hist = coincidence_histogram(stream, a, b, 2 * half_window_ns - 1, (-half_window_ns + 1, half_window_ns))?;
    let g2 = normalize_g2(&hist, stream.count(a), stream.count(b), duration_s)?;
    Ok(g2.g[0])
}

/// Full width at half maximum of the peak of `values` above `baseline`,
/// in units of the sample spacing, with linear interpolation on both edges.
pub fn fwhm(values: &[f64], baseline: f64) -> Option<f64> {
    let (imax, vmax) = values.iter().enumerate().fold(None, |best: Option<(usize, f64)>, (i, v)| match best {
        Some((_, b)) if b >= *v => best,
        _ => Some((i, *v)),
    })?;
    let half = baseline + (vmax - baseline) / 2.0;
    if vmax <= baseline {
        return None;
    }
    let mut left = None;
    for i in (0..imax).rev() {
        if values[i] < half {
            left = Some(i as f64 + (half - values[i]) / (values[i + 1] - values[i]));
            break;
        }
    }
    let mut right = None;
    for i in imax + 1..values.len() {
        if values[i] < half {
            right = Some(i as f64 - 1.0 + (values[i - 1] - half) / (values[i - 1] - values[i]));
            break;
        }
    }
    Some(right? - left?)
}
