//! Sagnac dual-rail storage channel, projective measurement sampling, and
//! single-qubit state and process tomography.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use num_complex::Complex64;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polarization::{pauli_x, pauli_y, pauli_z, prepare_state, DensityMatrix, Jones, Label, PolarizationState};
use crate::rng::{self, derive_seed, stream};

/// Inputs used for process tomography.
pub const PROCESS_INPUTS: [Label; 4] = [Label::H, Label::V, Label::D, Label::R];

/// Analyzer projectors used for state tomography.
pub const ANALYZERS: [Label; 6] = Label::ALL;

pub const PAULI_NAMES: [&str; 4] = ["I", "X", "Y", "Z"];

pub fn pauli_basis() -> [Jones; 4] {
    [Jones::identity(), pauli_x(), pauli_y(), pauli_z()]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Probability that the photon is not retrieved.
    pub loss: f64,
    /// Gaussian width of the relative phase between the two rails, radians.
    pub phase_noise_sigma: f64,
    pub depolarization: f64,
}

impl Default for ChannelParams {
    /// Calibrated against the reported storage fidelities.
    fn default() -> Self {
        ChannelParams { loss: 0.9, phase_noise_sigma: 0.2, depolarization: 0.06 }
    }
}

impl ChannelParams {
    pub fn ideal() -> Self {
        ChannelParams { loss: 0.0, phase_noise_sigma: 0.0, depolarization: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.loss) {
            return Err(Error::invalid(format!("loss must lie in [0, 1], got {}", self.loss)));
        }
        if !(0.0..=1.0).contains(&self.depolarization) {
            return Err(Error::invalid(format!("depolarization must lie in [0, 1], got {}", self.depolarization)));
        }
        if !(self.phase_noise_sigma >= 0.0 && self.phase_noise_sigma.is_finite()) {
            return Err(Error::invalid(format!("phase noise sigma must be >= 0, got {}", self.phase_noise_sigma)));
        }
        Ok(())
    }
}

/// Post-selected output of the storage channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoredState {
    pub rho: DensityMatrix,
    /// Probability that a photon is retrieved at all (`1 - loss`).
    pub success_probability: f64,
}

/// Stores `state` in the Sagnac loop. Relative rail phase jitter damps the
/// H/V coherence by `exp(-σ²/2)`, then depolarization mixes toward `I/2`.
/// The channel is evaluated in closed form, so `seed` does not change the
/// result; it is accepted so that every stochastic stage shares one
/// signature.
pub fn sagnac_store(state: &PolarizationState, ch: &ChannelParams, _seed: u64) -> Result<StoredState> {
    ch.validate()?;
    let mut m = state.projector();
    let damp = (-ch.phase_noise_sigma * ch.phase_noise_sigma / 2.0).exp();
    m[(0, 1)] *= damp;
    m[(1, 0)] *= damp;
    let p = ch.depolarization;
    let mixed = m * Complex64::new(1.0 - p, 0.0) + Jones::identity() * Complex64::new(p / 2.0, 0.0);
    Ok(StoredState { rho: DensityMatrix::new(mixed)?, success_probability: 1.0 - ch.loss })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub clicks: u64,
    pub shots: u64,
}

impl Counts {
    pub fn frequency(&self) -> Result<f64> {
        if self.shots == 0 || self.clicks > self.shots {
            return Err(Error::InvalidData(format!("counts {}/{} are not a frequency", self.clicks, self.shots)));
        }
        Ok(self.clicks as f64 / self.shots as f64)
    }
}

/// Born-rule sampling: `clicks ~ Binomial(shots, ⟨a|ρ|a⟩)`.
pub fn measure_projection(rho: &DensityMatrix, analyzer: &PolarizationState, shots: u64, seed: u64) -> Result<Counts> {
    if shots == 0 {
        return Err(Error::invalid("shots must be > 0"));
    }
    let p = rho.expectation(analyzer).clamp(0.0, 1.0);
    let mut rng = rng::seeded(seed, stream::PROJECTION);
    let clicks = Binomial::new(shots, p).map_err(|e| Error::invalid(e.to_string()))?.sample(&mut rng);
    Ok(Counts { clicks, shots })
}

/// `input → analyzer → counts`; the JSON exchange format.
pub type TomographyData = BTreeMap<Label, BTreeMap<Label, Counts>>;

/// `input → analyzer → frequency`.
pub type Frequencies = BTreeMap<Label, BTreeMap<Label, f64>>;

pub fn frequencies(data: &TomographyData) -> Result<Frequencies> {
    data.iter()
        .map(|(input, row)| {
            let row = row.iter().map(|(a, c)| Ok((*a, c.frequency()?))).collect::<Result<_>>()?;
            Ok((*input, row))
        })
        .collect()
}

pub fn tomography_from_json(text: &str) -> Result<TomographyData> {
    serde_json::from_str(text).map_err(|e| Error::InvalidData(format!("tomography JSON: {e}")))
}

pub fn tomography_to_json(data: &TomographyData) -> String {
    let mut s = serde_json::to_string_pretty(data).expect("counts serialize");
    s.push('\n');
    s
}

/// Stores each process input and measures every analyzer with `shots`
/// shots. Each setting draws from its own derived seed.
pub fn simulate_tomography(ch: &ChannelParams, shots: u64, seed: u64) -> Result<TomographyData> {
    let mut data = TomographyData::new();
    for (i, input) in PROCESS_INPUTS.iter().enumerate() {
        let stored = sagnac_store(&prepare_state(*input), ch, derive_seed(seed, i as u64))?;
        let mut row = BTreeMap::new();
        for (j, analyzer) in ANALYZERS.iter().enumerate() {
            let s = derive_seed(seed, 1000 + (i * ANALYZERS.len() + j) as u64);
            row.insert(*analyzer, measure_projection(&stored.rho, &prepare_state(*analyzer), shots, s)?);
        }
        data.insert(*input, row);
    }
    Ok(data)
}

/// Least-squares state estimate from analyzer frequencies, clipped to the
/// nearest physical state by zeroing a negative eigenvalue.
pub fn reconstruct_state(freqs: &BTreeMap<Label, f64>) -> Result<DensityMatrix> {
    if freqs.len() < 4 {
        return Err(Error::IllConditionedReconstruction(format!("{} analyzers cannot fix a qubit state", freqs.len())));
    }
    // p_a = (t + r·n_a)/2 with unknowns (t, r).
    let rows: Vec<[f64; 4]> = freqs
        .keys()
        .map(|a| {
            let n = prepare_state(*a).bloch();
            [0.5, 0.5 * n[0], 0.5 * n[1], 0.5 * n[2]]
        })
        .collect();
    let design = DMatrix::from_fn(rows.len(), 4, |i, j| rows[i][j]);
    let y = DVector::from_iterator(freqs.len(), freqs.values().copied());
    let svd = design.clone().svd(true, true);
    if svd.singular_values.min() < 1e-9 {
        return Err(Error::IllConditionedReconstruction("analyzers do not span the Bloch sphere".into()));
    }
    let x = svd.solve(&y, 1e-12).map_err(|e| Error::IllConditionedReconstruction(e.to_string()))?;
    let t = x[0];
    if !(t > 0.0) {
        return Err(Error::InvalidData("analyzer frequencies sum to zero".into()));
    }
    let mut r = [x[1] / t, x[2] / t, x[3] / t];
    let len = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
    if len > 1.0 {
        r.iter_mut().for_each(|v| *v /= len);
    }
    DensityMatrix::from_bloch(r)
}

/// 4×4 χ in the `{I, X, Y, Z}` basis: `ε(ρ) = Σ χ_mn B_m ρ B_n†`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcessMatrix(pub Matrix4<Complex64>);

impl ProcessMatrix {
    pub fn entry(&self, m: usize, n: usize) -> Complex64 {
        self.0[(m, n)]
    }

    /// `‖Σ χ_mn B_n† B_m - I‖_F`
    pub fn tp_residual(&self) -> f64 {
        let b = pauli_basis();
        let mut acc = Jones::zeros();
        for m in 0..4 {
            for n in 0..4 {
                acc += b[n].adjoint() * b[m] * self.0[(m, n)];
            }
        }
        (acc - Jones::identity()).norm()
    }

    pub fn hermiticity_error(&self) -> f64 {
        (self.0 - self.0.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Applies the process to `rho` (no positivity guarantee).
    pub fn apply(&self, rho: &Jones) -> Jones {
        let b = pauli_basis();
        let mut out = Jones::zeros();
        for m in 0..4 {
            for n in 0..4 {
                out += b[m] * rho * b[n].adjoint() * self.0[(m, n)];
            }
        }
        out
    }

    pub fn from_kraus(kraus: &[Jones]) -> ProcessMatrix {
        let b = pauli_basis();
        // Kraus operator K = Σ_m e_m B_m with e_m = Tr(B_m† K)/2.
        let mut chi = Matrix4::zeros();
        for k in kraus {
            let e = Vector4::from_fn(|m, _| (b[m].adjoint() * k).trace() / 2.0);
            chi += e * e.adjoint();
        }
        ProcessMatrix(chi)
    }

    pub fn to_json(&self) -> String {
        let grid = |f: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
            (0..4).map(|m| (0..4).map(|n| f(&self.0[(m, n)])).collect()).collect()
        };
        let v = ChiJson {
            basis: PAULI_NAMES.iter().map(|s| s.to_string()).collect(),
            real: grid(|z| z.re),
            imag: grid(|z| z.im),
            tp_residual: self.tp_residual(),
        };
        let mut s = serde_json::to_string_pretty(&v).expect("chi serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<ProcessMatrix> {
        let v: ChiJson = serde_json::from_str(text).map_err(|e| Error::InvalidData(format!("chi JSON: {e}")))?;
        let square = |g: &Vec<Vec<f64>>| g.len() == 4 && g.iter().all(|r| r.len() == 4);
        if !square(&v.real) || !square(&v.imag) {
            return Err(Error::InvalidData("chi JSON: real and imag must be 4x4".into()));
        }
        Ok(ProcessMatrix(Matrix4::from_fn(|m, n| Complex64::new(v.real[m][n], v.imag[m][n]))))
    }
}

#[derive(Serialize, Deserialize)]
struct ChiJson {
    basis: Vec<String>,
    real: Vec<Vec<f64>>,
    imag: Vec<Vec<f64>>,
    tp_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessReconstruction {
    pub chi: ProcessMatrix,
    /// Reconstructed output state per input.
    pub outputs: BTreeMap<Label, DensityMatrix>,
}

// Rounding slack for frequencies computed from exact probabilities.
const FREQUENCY_SLACK: f64 = 1e-9;

/// Linear-inversion process tomography. Each output state is estimated by
/// [`reconstruct_state`]; the action on the matrix units `|j⟩⟨k|` follows
/// from expanding them over the input projectors, and χ is read off the
/// Choi matrix.
pub fn reconstruct_process(freqs: &Frequencies) -> Result<ProcessReconstruction> {
    if freqs.len() < 4 {
        return Err(Error::IllConditionedReconstruction(format!("{} inputs cannot fix a qubit process", freqs.len())));
    }
    for (input, row) in freqs {
        if row.len() != ANALYZERS.len() {
            return Err(Error::InvalidData(format!("input {input}: expected {} analyzers, got {}", ANALYZERS.len(), row.len())));
        }
        if let Some((a, f)) = row.iter().find(|(_, f)| !(-FREQUENCY_SLACK..=1.0 + FREQUENCY_SLACK).contains(*f)) {
            return Err(Error::InvalidData(format!("input {input}, analyzer {a}: frequency {f} outside [0, 1]")));
        }
    }
    let outputs: BTreeMap<Label, DensityMatrix> = freqs
        .iter()
        .map(|(input, row)| {
            let clamped: BTreeMap<Label, f64> = row.iter().map(|(a, f)| (*a, f.clamp(0.0, 1.0))).collect();
            Ok((*input, reconstruct_state(&clamped)?))
        })
        .collect::<Result<_>>()?;

    // Columns: vec of each input projector.
    let inputs: Vec<Label> = outputs.keys().copied().collect();
    let vec4 = |m: &Jones| [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]];
    let cols: Vec<[Complex64; 4]> = inputs.iter().map(|l| vec4(&prepare_state(*l).projector())).collect();
    let basis = DMatrix::from_fn(4, cols.len(), |i, j| cols[j][i]);
    let svd = basis.svd(true, true);
    let smin = svd.singular_values.min();
    if smin < 1e-9 {
        return Err(Error::IllConditionedReconstruction("input states do not span the operator space".into()));
    }

    let mut choi = Matrix4::<Complex64>::zeros();
    for j in 0..2 {
        for k in 0..2 {
            let mut unit = [Complex64::new(0.0, 0.0); 4];
            unit[2 * j + k] = Complex64::new(1.0, 0.0);
            let coeffs = svd
                .solve(&DVector::from_row_slice(&unit), 1e-12)
                .map_err(|e| Error::IllConditionedReconstruction(e.to_string()))?;
            let mut image = Jones::zeros();
            for (i, l) in inputs.iter().enumerate() {
                image += outputs[l].matrix() * coeffs[i];
            }
            // |j⟩⟨k| ⊗ ε(|j⟩⟨k|), index (a, b) ↦ 2a + b.
            for a in 0..2 {
                for b in 0..2 {
                    choi[(2 * j + a, 2 * k + b)] += image[(a, b)];
                }
            }
        }
    }

    // |b_m⟩ = Σ_j |j⟩ ⊗ B_m|j⟩
    let paulis = pauli_basis();
    let vecs: Vec<Vector4<Complex64>> =
        paulis.iter().map(|b| Vector4::from_fn(|idx, _| b[(idx % 2, idx / 2)])).collect();
    let chi = Matrix4::from_fn(|m, n| (vecs[m].adjoint() * choi * vecs[n])[(0, 0)] / 4.0);
    Ok(ProcessReconstruction { chi: ProcessMatrix(chi), outputs })
}

/// `⟨ψ|ρ|ψ⟩`, clamped to `[0, 1]`.
pub fn state_fidelity(rho: &DensityMatrix, psi: &PolarizationState) -> f64 {
    rho.expectation(psi).clamp(0.0, 1.0)
}

/// Fidelity of each reconstructed output with its input state.
pub fn process_fidelities(rec: &ProcessReconstruction) -> BTreeMap<Label, f64> {
    rec.outputs.iter().map(|(l, rho)| (*l, state_fidelity(rho, &prepare_state(*l)))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exact_frequencies(channel: impl Fn(&Jones) -> Jones) -> Frequencies {
        PROCESS_INPUTS
            .iter()
            .map(|input| {
                let out = DensityMatrix::new(channel(&prepare_state(*input).projector())).unwrap();
                (*input, ANALYZERS.iter().map(|a| (*a, out.expectation(&prepare_state(*a)))).collect())
            })
            .collect()
    }

    fn assert_chi(chi: &ProcessMatrix, expected: &[(usize, f64)]) {
        for m in 0..4 {
            for n in 0..4 {
                let want = if m == n { expected.iter().find(|(i, _)| *i == m).map_or(0.0, |e| e.1) } else { 0.0 };
                assert!((chi.entry(m, n) - Complex64::new(want, 0.0)).norm() < 1e-8, "chi[{m}][{n}] = {}", chi.entry(m, n));
            }
        }
    }

    #[test]
    fn identity_channel() {
        let rec = reconstruct_process(&exact_frequencies(|r| *r)).unwrap();
        assert_chi(&rec.chi, &[(0, 1.0)]);
        assert!(rec.chi.tp_residual() < 1e-10);
    }

    #[test]
    fn pauli_channels() {
        for (idx, p) in [(1, pauli_x()), (2, pauli_y()), (3, pauli_z())] {
            let rec = reconstruct_process(&exact_frequencies(|r| p * r * p.adjoint())).unwrap();
            assert_chi(&rec.chi, &[(idx, 1.0)]);
        }
    }

    #[test]
    fn depolarizing_channel() {
        let p = 0.3;
        let f = exact_frequencies(|r| r * Complex64::new(1.0 - p, 0.0) + Jones::identity() * Complex64::new(p / 2.0, 0.0));
        let rec = reconstruct_process(&f).unwrap();
        assert_chi(&rec.chi, &[(0, 1.0 - 3.0 * p / 4.0), (1, p / 4.0), (2, p / 4.0), (3, p / 4.0)]);
    }

    #[test]
    fn rank_deficient_inputs() {
        let mut f = exact_frequencies(|r| *r);
        f.remove(&Label::R);
        let a = prepare_state(Label::A);
        f.insert(Label::A, ANALYZERS.iter().map(|x| (*x, DensityMatrix::pure(&a).expectation(&prepare_state(*x)))).collect());
        assert!(matches!(reconstruct_process(&f), Err(Error::IllConditionedReconstruction(_))));
    }

    #[test]
    fn missing_analyzer_is_invalid() {
        let mut f = exact_frequencies(|r| *r);
        f.get_mut(&Label::H).unwrap().remove(&Label::L);
        assert!(matches!(reconstruct_process(&f), Err(Error::InvalidData(_))));
    }

    #[test]
    fn sagnac_examples() {
        let d = prepare_state(Label::D);
        let ideal = sagnac_store(&d, &ChannelParams::ideal(), 0).unwrap();
        assert_eq!(*ideal.rho.matrix(), d.projector());
        assert_eq!(ideal.success_probability, 1.0);
        let full = ChannelParams { depolarization: 1.0, ..ChannelParams::ideal() };
        let out = sagnac_store(&d, &full, 0).unwrap();
        assert!((out.rho.matrix() - Jones::identity() * Complex64::new(0.5, 0.0)).norm() < 1e-15);
        let lossy = ChannelParams { loss: 0.9, ..ChannelParams::ideal() };
        assert!((sagnac_store(&d, &lossy, 0).unwrap().success_probability - 0.1).abs() < 1e-15);
    }

    #[test]
    fn projection_examples() {
        let h = DensityMatrix::pure(&prepare_state(Label::H));
        assert_eq!(measure_projection(&h, &prepare_state(Label::H), 100, 1).unwrap().clicks, 100);
        assert_eq!(measure_projection(&h, &prepare_state(Label::V), 100, 1).unwrap().clicks, 0);
        assert!(measure_projection(&h, &prepare_state(Label::V), 0, 1).is_err());
        let a = measure_projection(&DensityMatrix::maximally_mixed(), &prepare_state(Label::D), 1000, 9).unwrap();
        assert_eq!(a, measure_projection(&DensityMatrix::maximally_mixed(), &prepare_state(Label::D), 1000, 9).unwrap());
    }

    #[test]
    fn fidelity_examples() {
        let r = prepare_state(Label::R);
        assert!((state_fidelity(&DensityMatrix::pure(&r), &r) - 1.0).abs() < 1e-12);
        assert!((state_fidelity(&DensityMatrix::maximally_mixed(), &r) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn kraus_and_json_round_trip() {
        let chi = ProcessMatrix::from_kraus(&[pauli_x()]);
        assert!((chi.entry(1, 1).re - 1.0).abs() < 1e-15);
        let back = ProcessMatrix::from_json(&chi.to_json()).unwrap();
        assert_eq!(back, chi);
        assert!(ProcessMatrix::from_json("{\"basis\":[],\"real\":[[1]],\"imag\":[[0]],\"tp_residual\":0}").is_err());
    }

    #[test]
    fn data_json_round_trip() {
        let data = simulate_tomography(&ChannelParams::default(), 500, 3).unwrap();
        assert_eq!(tomography_from_json(&tomography_to_json(&data)).unwrap(), data);
    }
}
