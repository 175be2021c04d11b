//! Acceptance criteria 1-7. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use std::f64::consts::{FRAC_PI_2, PI};
use std::time::{Duration, Instant};

use num_complex::Complex64;
use oamem::analysis::{
    cauchy_schwarz_r, coincidence_histogram, measure_alpha, normalize_g2, CoincidenceWindow, THERMAL_AUTO_G2,
};
use oamem::config::ExperimentConfig;
use oamem::experiment::{donut_image, fringe_scan, image_memory, run_interference, simulate_stream};
use oamem::fit::{fit_exponential_decay, DecayPoint};
use oamem::interference::{
    fringe_visibility, pattern_rotation, prepare_hybrid, project_and_pattern, spot_counts, PATTERN_ANGLES_DEG,
};
use oamem::polarization::{hwp, qwp, unitarity_error, DensityMatrix, Jones, PolarizationState};
use oamem::rng::{derive_seed, seeded};
use oamem::source::{analytic_g2, simulate_timetags, SourceParams};
use oamem::spatial::{azimuthal_profile, count_lobes, lg_ring_radius, similarity, visibility, IntensityImage, TransverseGrid};
use oamem::timetag::{Channel, Tag, TimeTagStream};
use oamem::tomography::{
    process_fidelities, reconstruct_process, sagnac_store, simulate_tomography, frequencies, ChannelParams, Frequencies,
    PROCESS_INPUTS, ANALYZERS,
};
use proptest::prelude::*;
use proptest::test_runner::{Config as ProptestConfig, TestRunner};
use rand_distr::{Distribution, StandardNormal};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new() -> Self {
        Outcome { pass: true, detail: String::new() }
    }

    fn check(&mut self, ok: bool, what: impl AsRef<str>) {
        self.pass &= ok;
        if !self.detail.is_empty() {
            self.detail.push_str("; ");
        }
        self.detail.push_str(what.as_ref());
        if !ok {
            self.detail.push_str(" [x]");
        }
    }
}

fn run(n: usize, budget: Duration, body: fn(&mut Outcome)) -> bool {
    let start = Instant::now();
    let mut out = Outcome::new();
    body(&mut out);
    let elapsed = start.elapsed();
    out.check(elapsed < budget, format!("{:.1} s (< {} s)", elapsed.as_secs_f64(), budget.as_secs()));
    println!("criterion {n}: {} | {}", if out.pass { "PASS" } else { "FAIL" }, out.detail);
    out.pass
}

fn cauchy_schwarz(out: &mut Outcome) {
    let r = cauchy_schwarz_r(200.0, 2.0, 2.0).unwrap();
    out.check(r == 10000.0, format!("R(200, 2, 2) = {r}"));

    let source = SourceParams::default();
    let duration = 1e6 / source.pair_rate;
    let stream = simulate_timetags(&source, duration, 11).unwrap();
    let t0 = source.delay_offset_ns;
    let hist = coincidence_histogram(&stream, Channel::TRIGGER, Channel::SIGNAL, 1, (t0 - 20, t0 + 20)).unwrap();
    let g2 = normalize_g2(&hist, stream.count(Channel::TRIGGER), stream.count(Channel::SIGNAL), duration).unwrap();
    let (peak, tau) = g2.peak().unwrap();
    let expected = analytic_g2(t0 as f64, &source).unwrap();
    let r_sim = cauchy_schwarz_r(peak, THERMAL_AUTO_G2, THERMAL_AUTO_G2).unwrap();
    out.check(r_sim > 5000.0, format!("simulated peak g2 {peak:.1} at {tau} ns (analytic {expected:.1}), R = {r_sim:.0} > 5000"));
}

fn decay_points(a: f64, t: f64, g0: f64) -> Vec<DecayPoint> {
    (0..=40)
        .map(|k| {
            let x = 10.0 * k as f64;
            DecayPoint { t_ns: x, g: a * (-x / t).exp() + g0, stderr: 0.0 }
        })
        .collect()
}

fn decay_fit(out: &mut Outcome) {
    let (a, t, g0) = (13.3, 348.0, -1.89);
    let clean = fit_exponential_decay(&decay_points(a, t, g0)).unwrap();
    let rel = [
        (clean.amplitude - a).abs() / a,
        (clean.time_constant_ns - t).abs() / t,
        (clean.g0 - g0).abs() / g0.abs(),
    ];
    out.check(rel.iter().all(|e| *e < 1e-6), format!("noiseless rel. errors {:.1e}/{:.1e}/{:.1e}", rel[0], rel[1], rel[2]));

    let mut errors = [Vec::new(), Vec::new(), Vec::new()];
    for seed in 0..20u64 {
        let mut rng = seeded(derive_seed(2024, seed), 0);
        let noisy: Vec<DecayPoint> = decay_points(a, t, g0)
            .into_iter()
            .map(|p| {
                let sigma = 0.05 * p.g.abs();
                let z: f64 = StandardNormal.sample(&mut rng);
                DecayPoint { g: p.g + sigma * z, stderr: sigma, ..p }
            })
            .collect();
        match fit_exponential_decay(&noisy) {
            Ok(f) => {
                errors[0].push((f.amplitude - a).abs() / a);
                errors[1].push((f.time_constant_ns - t).abs() / t);
                errors[2].push((f.g0 - g0).abs() / g0.abs());
            }
            Err(_) => errors.iter_mut().for_each(|e| e.push(f64::INFINITY)),
        }
    }
    for (name, mut e) in ["A", "T", "g0"].into_iter().zip(errors) {
        e.sort_by(f64::total_cmp);
        let median = 0.5 * (e[9] + e[10]);
        out.check(median < 0.10, format!("5% noise median rel. error {name} {median:.3}"));
    }
}

fn alpha_of(cfg: &ExperimentConfig, seed: u64, start_ns: i64) -> (u64, u64, u64, u64) {
    let stream = simulate_stream(cfg, seed).unwrap();
    let window = CoincidenceWindow::new(start_ns, cfg.analysis.alpha_window_ns).unwrap();
    let m = measure_alpha(&stream, Channel::TRIGGER, Channel::HBT_A, Channel::HBT_B, window).unwrap();
    (m.p1, m.p12, m.p13, m.p123)
}

fn pooled_alpha(counts: &[(u64, u64, u64, u64)]) -> (f64, f64) {
    let (p1, p12, p13, p123) = counts.iter().fold((0, 0, 0, 0), |s, c| (s.0 + c.0, s.1 + c.1, s.2 + c.2, s.3 + c.3));
    let alpha = p1 as f64 * p123 as f64 / (p12 as f64 * p13 as f64);
    (alpha, common::alpha_sigma(alpha, p1, p12, p13, p123))
}

fn heralded_alpha(out: &mut Outcome) {
    let mut cfg = ExperimentConfig::default();
    cfg.simulate.duration_s = 2.0;
    let t0 = cfg.source.delay_offset_ns;
    let pre: Vec<_> = (0..4).map(|s| alpha_of(&cfg, 100 + s, t0)).collect();
    let (a_pre, s_pre) = pooled_alpha(&pre);
    out.check(a_pre < 0.05, format!("pre-storage alpha {a_pre:.4} +- {s_pre:.4} < 0.05"));

    let oracle = common::coherent_source(5e4, 1e6, 1.0, 7);
    let m = measure_alpha(&oracle, Channel(1), Channel(3), Channel(4), CoincidenceWindow::heralded(t0)).unwrap();
    let sigma = common::alpha_sigma(m.alpha, m.p1, m.p12, m.p13, m.p123);
    out.check((m.alpha - 1.0).abs() < 3.0 * sigma, format!("coherent oracle alpha {:.3} +- {sigma:.3}", m.alpha));

    cfg.simulate.storage = true;
    cfg.memory.storage_time_ns = 190.0;
    let start = t0 + cfg.memory.storage_time_ns as i64;
    let post: Vec<_> = (0..4).map(|s| alpha_of(&cfg, 200 + s, start)).collect();
    let (a_post, s_post) = pooled_alpha(&post);
    out.check(a_post > a_pre, format!("post-storage alpha {a_post:.3} +- {s_post:.3} > pre"));
}

fn image_storage(out: &mut Outcome) {
    let mut cfg = ExperimentConfig::default();
    let input = donut_image(&cfg).unwrap();
    let calibrated = image_memory(&input, &cfg).unwrap().metrics;
    cfg.image.noise_rate = 0.0;
    let clean = image_memory(&input, &cfg).unwrap().metrics;
    out.check(
        clean.similarity_image >= 0.996 && clean.similarity >= 0.996,
        format!("noiseless similarity {:.5} (image), {:.5} (profile)", clean.similarity_image, clean.similarity),
    );
    out.check((calibrated.visibility_in - 0.9).abs() <= 0.03, format!("visibility in {:.3}", calibrated.visibility_in));
    out.check((calibrated.visibility_out - 0.88).abs() <= 0.03, format!("visibility out {:.3}", calibrated.visibility_out));
}

fn exact_frequencies(p: f64) -> Frequencies {
    PROCESS_INPUTS
        .iter()
        .map(|&input| {
            let row = ANALYZERS.iter().map(|&a| (a, common::depolarized_click_probability(input, a, p))).collect();
            (input, row)
        })
        .collect()
}

fn tomography(out: &mut Outcome) {
    let ideal = ChannelParams::ideal();
    let good = (0..100u64)
        .filter(|&seed| {
            let data = simulate_tomography(&ideal, 10_000, seed).unwrap();
            let rec = reconstruct_process(&frequencies(&data).unwrap()).unwrap();
            process_fidelities(&rec).values().all(|f| *f >= 0.98)
        })
        .count();
    out.check(good >= 95, format!("ideal channel: {good}/100 seeds with all fidelities >= 0.98"));

    let p = 0.3;
    let rec = reconstruct_process(&exact_frequencies(p)).unwrap();
    let want = common::depolarizing_chi(p);
    let err = (0..4)
        .flat_map(|m| (0..4).map(move |n| (m, n)))
        .map(|(m, n)| (rec.chi.entry(m, n) - Complex64::new(want[m][n], 0.0)).norm())
        .fold(0.0, f64::max);
    out.check(err < 1e-6, format!("depolarizing chi max error {err:.1e}"));

    let data = simulate_tomography(&ChannelParams::default(), 10_000, 1).unwrap();
    let fid = process_fidelities(&reconstruct_process(&frequencies(&data).unwrap()).unwrap());
    let text: Vec<String> = fid.iter().map(|(l, f)| format!("{l} {f:.3}")).collect();
    out.check(
        fid.values().all(|f| (0.93..=0.99).contains(f)),
        format!("calibrated fidelities {} (reported H 0.94, V 0.96, R 0.98, D 0.96)", text.join(", ")),
    );
}

fn rms_relative(a: &IntensityImage, b: &IntensityImage) -> f64 {
    let num: f64 = a.pixels.iter().zip(&b.pixels).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = a.pixels.iter().map(|x| x * x).sum();
    (num / den).sqrt()
}

fn interference(out: &mut Outcome) {
    let period_err = (0..200)
        .map(|k| {
            let theta = -PI + k as f64 * 0.0314;
            (spot_counts(theta, 0.3, 0.26).unwrap() - spot_counts(theta + FRAC_PI_2, 0.3, 0.26).unwrap()).abs()
        })
        .fold(0.0, f64::max);
    let grid = TransverseGrid::new(96, 96, 0.03).unwrap();
    let state = prepare_hybrid(2).unwrap();
    let a = project_and_pattern(&state, 0.2, grid, 0.6).unwrap();
    let b = project_and_pattern(&state, 0.2 + FRAC_PI_2, grid, 0.6).unwrap();
    let image_err = a.pixels.iter().zip(&b.pixels).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / a.max();
    out.check(period_err < 1e-12 && image_err < 1e-12, format!("period pi/2: deviation {period_err:.1e} (counts), {image_err:.1e} (image)"));

    let lobes: Vec<usize> = PATTERN_ANGLES_DEG
        .iter()
        .map(|d| {
            let img = project_and_pattern(&state, d.to_radians(), grid, 0.6).unwrap();
            count_lobes(&azimuthal_profile(&img, lg_ring_radius(2, 0.6), 720))
        })
        .collect();
    out.check(lobes.iter().all(|n| *n == 4), format!("lobes {lobes:?}"));

    let mut worst: f64 = 0.0;
    for theta in [0.0, 0.3, 0.9] {
        for delta in [-0.5, -0.1, 0.05, 0.25, 0.7] {
            let base = project_and_pattern(&state, theta, grid, 0.6).unwrap();
            let moved = project_and_pattern(&state, theta + delta, grid, 0.6).unwrap();
            worst = worst.max(rms_relative(&moved, &base.rotated(pattern_rotation(2, delta))));
        }
    }
    out.check(worst < 0.01, format!("rotation covariance rms {:.2}%", 100.0 * worst));

    let mut cfg = ExperimentConfig::default();
    let calibrated = fringe_visibility(&fringe_scan(&cfg).unwrap()).unwrap();
    cfg.interference.noise_floor = 0.0;
    cfg.interference.shot_noise = false;
    let clean = fringe_visibility(&fringe_scan(&cfg).unwrap()).unwrap();
    out.check((clean - 1.0).abs() < 1e-6, format!("noiseless visibility {clean:.6}"));
    out.check((calibrated - 0.74).abs() <= 0.1, format!("calibrated visibility {calibrated:.3}"));

    let files = run_interference(&ExperimentConfig::default()).unwrap();
    let summary: serde_json::Value = serde_json::from_slice(files.get("visibility.json").unwrap()).unwrap();
    out.check(summary["lobes"] == 4, format!("visibility.json lobes {}", summary["lobes"]));
}

fn property_suites(out: &mut Outcome) {
    let mut runner = TestRunner::new(ProptestConfig { cases: 256, ..ProptestConfig::default() });
    let tags = prop::collection::vec((1u8..=2, 0i64..500), 0..80).prop_map(|raw| {
        TimeTagStream::from_tags(raw.into_iter().map(|(c, t)| Tag::new(Channel(c), t)).collect(), [Channel(1), Channel(2)])
    });

    let hist = runner.run(&(tags, 1usize..6, 3i64..20), |(stream, factor, groups)| {
        let hi = -40 + factor as i64 * groups;
        let fine = coincidence_histogram(&stream, Channel(1), Channel(2), 1, (-40, hi)).unwrap();
        let coarse = coincidence_histogram(&stream, Channel(1), Channel(2), factor as i64, (-40, hi)).unwrap();
        let a = stream.times(Channel(1));
        let b = stream.times(Channel(2));
        let brute = a.iter().flat_map(|x| b.iter().map(move |y| y - x)).filter(|d| (-40..hi).contains(d)).count() as u64;
        prop_assert_eq!(fine.bins.iter().sum::<u64>(), brute);
        prop_assert_eq!(fine.rebin(factor).unwrap(), coarse);
        Ok(())
    });
    out.check(hist.is_ok(), "histogram conservation and re-binning");

    let determinism = runner.run(&any::<u64>(), |seed| {
        let source = SourceParams::default();
        let a = simulate_timetags(&source, 0.002, seed).unwrap().to_csv();
        let b = simulate_timetags(&source, 0.002, seed).unwrap().to_csv();
        prop_assert_eq!(a, b);
        Ok(())
    });
    out.check(determinism.is_ok(), "stream determinism");

    let density = runner.run(
        &(0.0..PI, 0.0..2.0 * PI, 0.0f64..0.99, 0.0f64..3.0, 0.0f64..1.0, -PI..PI),
        |(theta, phi, loss, sigma, depol, angle)| {
            let psi = PolarizationState::new(
                Complex64::new((theta / 2.0).cos(), 0.0),
                Complex64::from_polar((theta / 2.0).sin(), phi),
            )
            .unwrap();
            let ch = ChannelParams { loss, phase_noise_sigma: sigma, depolarization: depol };
            let stored = sagnac_store(&psi, &ch, 0).unwrap().rho;
            let plates: Jones = hwp(angle) * qwp(0.7 * angle);
            for rho in [stored, stored.transformed(&plates), DensityMatrix::pure(&psi).transformed(&plates)] {
                let m = *rho.matrix();
                prop_assert!((m.trace() - Complex64::new(1.0, 0.0)).norm() < 1e-10);
                prop_assert!((m - m.adjoint()).norm() < 1e-10);
                prop_assert!(rho.eigenvalues()[0] >= -1e-8);
            }
            Ok(())
        },
    );
    out.check(density.is_ok(), "density-matrix invariants");

    let unitary = runner.run(&(-10.0f64..10.0), |theta| {
        prop_assert!(unitarity_error(&hwp(theta)) < 1e-12);
        prop_assert!(unitarity_error(&qwp(theta)) < 1e-12);
        Ok(())
    });
    out.check(unitary.is_ok(), "waveplate unitarity 1e-12");

    let image = prop::collection::vec(0.0f64..5.0, 9).prop_map(|mut px| {
        px[4] += 0.1;
        IntensityImage::new(TransverseGrid::new(3, 3, 0.1).unwrap(), px).unwrap()
    });
    let metrics = runner.run(&(image.clone(), image, 0.01f64..100.0), |(a, b, c)| {
        let r = similarity(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&r));
        prop_assert!((r - similarity(&b, &a).unwrap()).abs() < 1e-12);
        let scaled = IntensityImage::new(a.grid, a.pixels.iter().map(|v| c * v).collect()).unwrap();
        prop_assert!((similarity(&a, &scaled).unwrap() - 1.0).abs() < 1e-12);
        let v = visibility(&a.pixels).unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert_eq!(visibility(&[c; 5]).unwrap(), 0.0);
        let mut dipped = a.pixels.clone();
        dipped[0] = 0.0;
        prop_assert!((visibility(&dipped).unwrap() - 1.0).abs() < 1e-12);
        Ok(())
    });
    out.check(metrics.is_ok(), "similarity/visibility axioms");
}

fn main() {
    let results = [
        run(1, Duration::from_secs(30), cauchy_schwarz),
        run(2, Duration::from_secs(5), decay_fit),
        run(3, Duration::from_secs(60), heralded_alpha),
        run(4, Duration::from_secs(10), image_storage),
        run(5, Duration::from_secs(30), tomography),
        run(6, Duration::from_secs(10), interference),
        run(7, Duration::from_secs(60), property_suites),
    ];
    let passed = results.iter().filter(|p| **p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
