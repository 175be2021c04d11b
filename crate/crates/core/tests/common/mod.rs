//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use num_complex::Complex64;
use oamem::polarization::Label;
use oamem::timetag::{Channel, Tag, TimeTagStream};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Poisson};

/// Uncorrelated Poissonian clicks on a trigger and two HBT detectors. For
/// this light α = 1 exactly in expectation.
pub fn coherent_source(trigger_rate: f64, detector_rate: f64, duration_s: f64, seed: u64) -> TimeTagStream {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let span = duration_s * 1e9;
    let mut tags = Vec::new();
    for (ch, rate) in [(Channel(1), trigger_rate), (Channel(3), detector_rate), (Channel(4), detector_rate)] {
        let n = Poisson::new(rate * duration_s).unwrap().sample(&mut rng) as u64;
        tags.extend((0..n).map(|_| Tag::new(ch, (rng.random::<f64>() * span) as i64)));
    }
    TimeTagStream::from_tags(tags, [Channel(1), Channel(3), Channel(4)])
}

/// Standard error of α = P1 P123 / (P12 P13) from Poisson counting.
pub fn alpha_sigma(alpha: f64, p1: u64, p12: u64, p13: u64, p123: u64) -> f64 {
    alpha * [p1, p12, p13, p123].iter().map(|&n| 1.0 / n as f64).sum::<f64>().sqrt()
}

/// Jones vectors written out by hand: R = (H - iV)/√2, L = (H + iV)/√2.
pub fn ket(label: Label) -> [Complex64; 2] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let (o, z, i) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 1.0));
    match label {
        Label::H => [o, z],
        Label::V => [z, o],
        Label::D => [o * s, o * s],
        Label::A => [o * s, -o * s],
        Label::R => [o * s, -i * s],
        Label::L => [o * s, i * s],
    }
}

/// `(1 - p) ρ + p I/2` applied to `|ψ⟩⟨ψ|`, then `⟨a|·|a⟩`.
pub fn depolarized_click_probability(input: Label, analyzer: Label, p: f64) -> f64 {
    let psi = ket(input);
    let a = ket(analyzer);
    let overlap = (a[0].conj() * psi[0] + a[1].conj() * psi[1]).norm_sqr();
    (1.0 - p) * overlap + p / 2.0
}

/// χ of the depolarizing channel in the (I, X, Y, Z) basis.
pub fn depolarizing_chi(p: f64) -> [[f64; 4]; 4] {
    let mut chi = [[0.0; 4]; 4];
    chi[0][0] = 1.0 - 3.0 * p / 4.0;
    for (k, row) in chi.iter_mut().enumerate().skip(1) {
        row[k] = p / 4.0;
    }
    chi
}
