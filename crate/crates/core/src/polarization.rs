//! Jones calculus in the `{H, V}` basis.
//!
//! Circular states follow `R = (H - iV)/√2`, `L = (H + iV)/√2`. Waveplate
//! matrices are fixed so that `qwp(π/4)` maps `H → L` and `V → R` with a
//! relative phase of `i` between the two images.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Jones = Matrix2<Complex64>;

const NORM_TOL: f64 = 1e-10;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    H,
    V,
    D,
    A,
    R,
    L,
}

impl Label {
    pub const ALL: [Label; 6] = [Label::H, Label::V, Label::D, Label::A, Label::R, Label::L];
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "H" => Ok(Label::H),
            "V" => Ok(Label::V),
            "D" => Ok(Label::D),
            "A" => Ok(Label::A),
            "R" => Ok(Label::R),
            "L" => Ok(Label::L),
            other => Err(Error::invalid(format!("unknown polarization label `{other}`"))),
        }
    }
}

/// Normalized Jones vector `(c_H, c_V)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationState(Vector2<Complex64>);

impl PolarizationState {
    pub fn new(h: Complex64, v: Complex64) -> Result<Self> {
        let norm = h.norm_sqr() + v.norm_sqr();
        if !((norm - 1.0).abs() <= NORM_TOL) {
            return Err(Error::invalid(format!("Jones vector norm² must be 1, got {norm}")));
        }
        Ok(PolarizationState(Vector2::new(h, v)))
    }

    /// Scales any non-zero vector to unit norm.
    pub fn normalized(h: Complex64, v: Complex64) -> Result<Self> {
        let norm = (h.norm_sqr() + v.norm_sqr()).sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::invalid("cannot normalize a zero Jones vector"));
        }
        Ok(PolarizationState(Vector2::new(h / norm, v / norm)))
    }

    pub fn h(&self) -> Complex64 {
        self.0[0]
    }

    pub fn v(&self) -> Complex64 {
        self.0[1]
    }

    pub fn vector(&self) -> &Vector2<Complex64> {
        &self.0
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &PolarizationState) -> Complex64 {
        self.0.dotc(&other.0)
    }

    /// Applies a unitary; renormalizes away rounding.
    pub fn transformed(&self, u: &Jones) -> PolarizationState {
        let out = u * self.0;
        let norm = out.norm();
        PolarizationState(out / c(norm, 0.0))
    }

    /// `|ψ⟩⟨ψ|`
    pub fn projector(&self) -> Jones {
        self.0 * self.0.adjoint()
    }

    /// Stokes vector `(⟨X⟩, ⟨Y⟩, ⟨Z⟩)` with `Z = |H⟩⟨H| - |V⟩⟨V|`.
    pub fn bloch(&self) -> [f64; 3] {
        DensityMatrix::pure(self).bloch()
    }
}

pub fn prepare_state(label: Label) -> PolarizationState {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let (h, v) = match label {
        Label::H => (c(1.0, 0.0), c(0.0, 0.0)),
        Label::V => (c(0.0, 0.0), c(1.0, 0.0)),
        Label::D => (c(s, 0.0), c(s, 0.0)),
        Label::A => (c(s, 0.0), c(-s, 0.0)),
        Label::R => (c(s, 0.0), c(0.0, -s)),
        Label::L => (c(s, 0.0), c(0.0, s)),
    };
    PolarizationState(Vector2::new(h, v))
}

fn rotation(theta: f64) -> Jones {
    let (s, co) = theta.sin_cos();
    Matrix2::new(c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0))
}

/// Half-wave plate with fast axis at `theta`:
/// `[[cos 2θ, sin 2θ], [sin 2θ, -cos 2θ]]`.
pub fn hwp(theta: f64) -> Jones {
    let (s2, c2) = (2.0 * theta).sin_cos();
    Matrix2::new(c(c2, 0.0), c(s2, 0.0), c(s2, 0.0), c(-c2, 0.0))
}

/// Quarter-wave plate with fast axis at `theta`: `R(θ) diag(1, -i) R(θ)ᵀ`.
pub fn qwp(theta: f64) -> Jones {
    let r = rotation(theta);
    let d = Matrix2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, -1.0));
    r * d * r.transpose()
}

/// Largest entry of `|U†U - I|`.
pub fn unitarity_error(u: &Jones) -> f64 {
    (u.adjoint() * u - Jones::identity()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Whether `a = e^{iφ} b` for some global phase, entrywise within `tol`.
pub fn equal_up_to_phase(a: &Jones, b: &Jones, tol: f64) -> bool {
    let Some((k, _)) = b.iter().enumerate().max_by(|x, y| x.1.norm().total_cmp(&y.1.norm())) else {
        return true;
    };
    if b[k].norm() == 0.0 {
        return a.iter().all(|z| z.norm() <= tol);
    }
    let phase = a[k] / b[k];
    let phase = phase / phase.norm();
    (a - b * phase).iter().all(|z| z.norm() <= tol)
}

pub fn pauli_x() -> Jones {
    Matrix2::new(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0))
}

pub fn pauli_y() -> Jones {
    Matrix2::new(c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0))
}

pub fn pauli_z() -> Jones {
    Matrix2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0))
}

/// 2×2 density operator. Construction checks Hermiticity, unit trace and
/// positivity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix(Jones);

impl DensityMatrix {
    pub const HERMITIAN_TOL: f64 = 1e-10;
    pub const TRACE_TOL: f64 = 1e-10;
    pub const EIGEN_TOL: f64 = 1e-8;

    pub fn new(m: Jones) -> Result<Self> {
        let herm = (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if !(herm <= Self::HERMITIAN_TOL) {
            return Err(Error::invalid(format!("density matrix not Hermitian (deviation {herm:e})")));
        }
        let tr = m.trace();
        if !((tr - c(1.0, 0.0)).norm() <= Self::TRACE_TOL) {
            return Err(Error::invalid(format!("density matrix trace {tr} != 1")));
        }
        let rho = DensityMatrix(m);
        let min = rho.eigenvalues()[0];
        if !(min >= -Self::EIGEN_TOL) {
            return Err(Error::invalid(format!("density matrix has negative eigenvalue {min:e}")));
        }
        Ok(rho)
    }

    pub fn pure(psi: &PolarizationState) -> Self {
        DensityMatrix(psi.projector())
    }

    pub fn maximally_mixed() -> Self {
        DensityMatrix(Jones::identity() * c(0.5, 0.0))
    }

    /// `(I + r·σ)/2`; vectors longer than 1 are rejected.
    pub fn from_bloch(r: [f64; 3]) -> Result<Self> {
        let len = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
        if !(len <= 1.0 + Self::EIGEN_TOL) {
            return Err(Error::invalid(format!("Bloch vector length {len} exceeds 1")));
        }
        let m = (Jones::identity() + pauli_x() * c(r[0], 0.0) + pauli_y() * c(r[1], 0.0) + pauli_z() * c(r[2], 0.0))
            * c(0.5, 0.0);
        Ok(DensityMatrix(m))
    }

    pub fn matrix(&self) -> &Jones {
        &self.0
    }

    pub fn bloch(&self) -> [f64; 3] {
        let m = &self.0;
        [2.0 * m[(0, 1)].re, -2.0 * m[(0, 1)].im, (m[(0, 0)] - m[(1, 1)]).re]
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let [x, y, z] = self.bloch();
        let t = self.0.trace().re;
        let r = (x * x + y * y + z * z).sqrt();
        [(t - r) / 2.0, (t + r) / 2.0]
    }

    /// `⟨a|ρ|a⟩`
    pub fn expectation(&self, a: &PolarizationState) -> f64 {
        a.vector().dotc(&(self.0 * a.vector())).re
    }

    pub fn purity(&self) -> f64 {
        (self.0 * self.0).trace().re
    }

    /// `UρU†`
    pub fn transformed(&self, u: &Jones) -> DensityMatrix {
        DensityMatrix(u * self.0 * u.adjoint())
    }
}
