//! Polarization-OAM hybrid state, the waveplate sequence that turns the
//! stored superposition into a rotating four-spot pattern, and the
//! `sin 4θ` fringe of a fixed spot.
//!
//! After `qwp(π/4)`, `hwp(θ)` and a V-polarization analyzer the OAM state is
//! `(e^{-2iθ}|-l⟩ + i e^{2iθ}|l⟩)/√2`, whose intensity is
//! `∝ 1 - sin(2lφ + 4θ)`. Increasing θ by Δ rotates the pattern by `-2Δ/l`
//! (clockwise for positive Δ).

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::fmt::Write as _;

use num_complex::Complex64;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::polarization::{hwp, qwp, unitarity_error, DensityMatrix, Jones};
use crate::rng::{self, stream};
use crate::spatial::{intensity, lg_mode, IntensityImage, TransverseGrid};

/// OAM charge used in the experiment.
pub const EXPERIMENT_L: u32 = 2;

/// HWP angles (degrees) at which patterns are recorded.
pub const PATTERN_ANGLES_DEG: [f64; 4] = [22.5, 67.5, 112.5, 157.5];

const NORM_TOL: f64 = 1e-10;

/// Coefficients over `{H, V} ⊗ {+l, -l}` ordered
/// `(H,+l), (H,-l), (V,+l), (V,-l)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridState {
    coeffs: [Complex64; 4],
    l: u32,
}

impl HybridState {
    pub fn new(coeffs: [Complex64; 4], l: u32) -> Result<Self> {
        if l == 0 {
            return Err(Error::invalid("OAM charge must be >= 1"));
        }
        let norm: f64 = coeffs.iter().map(|z| z.norm_sqr()).sum();
        if !((norm - 1.0).abs() <= NORM_TOL) {
            return Err(Error::invalid(format!("hybrid state norm² must be 1, got {norm}")));
        }
        Ok(HybridState { coeffs, l })
    }

    pub fn coeffs(&self) -> &[Complex64; 4] {
        &self.coeffs
    }

    pub fn l(&self) -> u32 {
        self.l
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Polarization state with the OAM degree of freedom traced out.
    pub fn polarization_reduced(&self) -> Result<DensityMatrix> {
        let [hp, hm, vp, vm] = self.coeffs;
        let m = Jones::new(
            hp * hp.conj() + hm * hm.conj(),
            hp * vp.conj() + hm * vm.conj(),
            vp * hp.conj() + vm * hm.conj(),
            vp * vp.conj() + vm * vm.conj(),
        );
        DensityMatrix::new(m)
    }

    /// `|⟨self|other⟩|`
    pub fn overlap(&self, other: &HybridState) -> f64 {
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.conj() * b).sum::<Complex64>().norm()
    }
}

/// `(|H⟩|l⟩ + |V⟩|-l⟩)/√2`
pub fn prepare_hybrid(l: u32) -> Result<HybridState> {
    let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let z = Complex64::new(0.0, 0.0);
    HybridState::new([s, z, z, s], l)
}

/// Acts with `plate` on polarization, identity on OAM.
pub fn apply_waveplate(state: &HybridState, plate: &Jones) -> Result<HybridState> {
    let err = unitarity_error(plate);
    if !(err <= 1e-8) {
        return Err(Error::invalid(format!("waveplate is not unitary (deviation {err:e})")));
    }
    let [hp, hm, vp, vm] = state.coeffs;
    let coeffs = [
        plate[(0, 0)] * hp + plate[(0, 1)] * vp,
        plate[(0, 0)] * hm + plate[(0, 1)] * vm,
        plate[(1, 0)] * hp + plate[(1, 1)] * vp,
        plate[(1, 0)] * hm + plate[(1, 1)] * vm,
    ];
    Ok(HybridState { coeffs, l: state.l })
}

/// Normalized OAM amplitudes `(c_{+l}, c_{-l})` transmitted by the V
/// analyzer after `qwp(π/4)` and `hwp(theta)`.
pub fn analyzer_amplitudes(state: &HybridState, theta: f64) -> Result<(Complex64, Complex64)> {
    let s = apply_waveplate(&apply_waveplate(state, &qwp(FRAC_PI_4))?, &hwp(theta))?;
    let (p, m) = (s.coeffs[2], s.coeffs[3]);
    let norm = (p.norm_sqr() + m.norm_sqr()).sqrt();
    if !(norm > 0.0) {
        return Err(Error::InvalidData("analyzer transmits nothing".into()));
    }
    Ok((p / norm, m / norm))
}

/// Intensity of the analyzer output as the superposition of `lg_mode(±l)`
/// rings with the [`analyzer_amplitudes`].
pub fn project_and_pattern(state: &HybridState, theta: f64, grid: TransverseGrid, waist_mm: f64) -> Result<IntensityImage> {
    let (cp, cm) = analyzer_amplitudes(state, theta)?;
    let l = state.l as i32;
    let plus = lg_mode(l, waist_mm, grid)?;
    let minus = lg_mode(-l, waist_mm, grid)?;
    Ok(intensity(&plus.superpose(cp, &minus, cm)?))
}

/// Rigid rotation (radians, counter-clockwise) relating the pattern at
/// `theta + delta` to the one at `theta`.
pub fn pattern_rotation(l: u32, delta: f64) -> f64 {
    -2.0 * delta / l as f64
}

/// Normalized intensity of the lobe at `azimuth0` for the experiment's
/// `l = 2`: `(1 - V sin(4θ + 4·azimuth0))/2`, `V = 1 - noise_floor`.
pub fn spot_counts(theta: f64, azimuth0: f64, noise_floor: f64) -> Result<f64> {
    lobe_intensity(EXPERIMENT_L, theta, azimuth0, noise_floor)
}

/// [`spot_counts`] for charge `l`: the fringe phase is `2l·azimuth0`.
pub fn lobe_intensity(l: u32, theta: f64, azimuth0: f64, noise_floor: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&noise_floor) {
        return Err(Error::invalid(format!("noise floor must lie in [0, 1), got {noise_floor}")));
    }
    let phi0 = 2.0 * l as f64 * azimuth0;
    Ok((1.0 - (1.0 - noise_floor) * (4.0 * theta + phi0).sin()) / 2.0)
}

/// Least-squares fit of `c0 + a sin 4θ + b cos 4θ`; returns `√(a²+b²)/c0`.
/// `samples` are `(theta_rad, counts)` and must cover a full period.
pub fn fringe_visibility(samples: &[(f64, f64)]) -> Result<f64> {
    let n = samples.len();
    if n < 8 {
        return Err(Error::invalid(format!("need at least 8 samples, got {n}")));
    }
    let lo = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let hi = samples.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    // An evenly spaced scan of one period ends one step short of it.
    let covered = (hi - lo) * n as f64 / (n - 1) as f64;
    if !(covered >= FRAC_PI_2 - 1e-9) {
        return Err(Error::invalid("samples must span at least one period (90°)"));
    }
    let mut ata = nalgebra::Matrix3::<f64>::zeros();
    let mut aty = nalgebra::Vector3::<f64>::zeros();
    for &(theta, y) in samples {
        let (s, c) = (4.0 * theta).sin_cos();
        let row = nalgebra::Vector3::new(1.0, s, c);
        ata += row * row.transpose();
        aty += row * y;
    }
    let x = ata.cholesky().ok_or_else(|| Error::invalid("fringe samples are degenerate"))?.solve(&aty);
    if !(x[0] > 0.0) {
        return Err(Error::InvalidData(format!("fitted mean count {} is not positive", x[0])));
    }
    Ok(x[1].hypot(x[2]) / x[0])
}

/// Photon-counting fringe scan: counts at each angle are Poisson with mean
/// `photons · lobe_intensity(θ)`.
pub fn simulate_fringe_scan(l: u32, thetas: &[f64], azimuth0: f64, noise_floor: f64, photons: f64, seed: u64) -> Result<Vec<(f64, f64)>> {
    if !(photons > 0.0 && photons.is_finite()) {
        return Err(Error::invalid(format!("photon number must be > 0, got {photons}")));
    }
    let mut rng = rng::seeded(seed, stream::FRINGE);
    thetas
        .iter()
        .map(|&t| {
            let mean = photons * lobe_intensity(l, t, azimuth0, noise_floor)?;
            let counts = if mean > 0.0 { Poisson::new(mean).map(|p| p.sample(&mut rng)).unwrap_or(0.0) } else { 0.0 };
            Ok((t, counts))
        })
        .collect()
}

/// Evenly spaced angles `start + k·step` for `k < n`.
pub fn angle_scan(start: f64, step: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| start + step * k as f64).collect()
}

/// `theta_deg,counts` rows.
pub fn fringe_csv(samples: &[(f64, f64)]) -> String {
    let mut out = String::from("theta_deg,counts\n");
    for (t, c) in samples {
        let _ = writeln!(out, "{},{}", t.to_degrees(), c);
    }
    out
}
