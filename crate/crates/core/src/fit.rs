//! Least-squares fit of `g(t) = A exp(-t/T) + g0` by Levenberg-Marquardt.

use std::fmt::Write as _;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayPoint {
    pub t_ns: f64,
    pub g: f64,
    /// One-sigma uncertainty of `g`; when every point has a positive
    /// stderr the fit is weighted by `1/stderr²`.
    pub stderr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    #[serde(rename = "A")]
    pub amplitude: f64,
    #[serde(rename = "T_ns")]
    pub time_constant_ns: f64,
    pub g0: f64,
    /// Euclidean norm of the (weighted) residual vector at the optimum.
    pub residual_norm: f64,
}

impl DecayFit {
    pub fn eval(&self, t_ns: f64) -> f64 {
        self.amplitude * (-t_ns / self.time_constant_ns).exp() + self.g0
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("fit serializes");
        s.push('\n');
        s
    }
}

const NAMES: [&str; 3] = ["A", "T", "g0"];
const MAX_ITER: usize = 500;

struct Problem {
    t: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
}

impl Problem {
    fn residuals(&self, p: &Vector3<f64>) -> Vec<f64> {
        self.t
            .iter()
            .zip(&self.y)
            .zip(&self.w)
            .map(|((t, y), w)| w * (y - (p[0] * (-t / p[1]).exp() + p[2])))
            .collect()
    }

    fn cost(&self, p: &Vector3<f64>) -> f64 {
        self.residuals(p).iter().map(|r| r * r).sum()
    }

    /// Normal matrix and gradient `(JᵀJ, Jᵀr)` of the weighted model.
    fn normal(&self, p: &Vector3<f64>) -> (Matrix3<f64>, Vector3<f64>) {
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for ((t, y), w) in self.t.iter().zip(&self.y).zip(&self.w) {
            let e = (-t / p[1]).exp();
            let j = Vector3::new(e, p[0] * t * e / (p[1] * p[1]), 1.0) * *w;
            let r = w * (y - (p[0] * e + p[2]));
            jtj += j * j.transpose();
            jtr += j * r;
        }
        (jtj, jtr)
    }
}

/// Fits `A exp(-t/T) + g0`, starting from `A = g(first) - g(last)`,
/// `g0 = g(last)`, `T` = half the time span.
pub fn fit_exponential_decay(points: &[DecayPoint]) -> Result<DecayFit> {
    if points.len() < 4 {
        return Err(Error::invalid(format!("need at least 4 points, got {}", points.len())));
    }
    if points.iter().any(|p| !(p.t_ns.is_finite() && p.g.is_finite() && p.stderr.is_finite() && p.stderr >= 0.0)) {
        return Err(Error::invalid("points must be finite with stderr >= 0"));
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.t_ns.total_cmp(&b.t_ns));
    let span = sorted[sorted.len() - 1].t_ns - sorted[0].t_ns;
    if span <= 0.0 {
        return Err(Error::IllConditionedFit { parameter: "T" });
    }

    let weighted = sorted.iter().all(|p| p.stderr > 0.0);
    let mean = sorted.iter().map(|p| p.g).sum::<f64>() / sorted.len() as f64;
    let spread = sorted.iter().map(|p| (p.g - mean).abs()).fold(0.0, f64::max);
    let tolerance = if weighted {
        sorted.iter().map(|p| p.stderr).fold(0.0, f64::max)
    } else {
        1e-12 * mean.abs().max(1e-300)
    };
    if spread <= tolerance {
        return Err(Error::IllConditionedFit { parameter: "T" });
    }

    let problem = Problem {
        t: sorted.iter().map(|p| p.t_ns).collect(),
        y: sorted.iter().map(|p| p.g).collect(),
        w: sorted.iter().map(|p| if weighted { 1.0 / p.stderr } else { 1.0 }).collect(),
    };
    let first = sorted[0].g;
    let last = sorted[sorted.len() - 1].g;
    let mut p = Vector3::new(first - last, span / 2.0, last);
    let mut cost = problem.cost(&p);
    let mut lambda = 1e-3;

    for _ in 0..MAX_ITER {
        let (jtj, jtr) = problem.normal(&p);
        let mut damped = jtj;
        for i in 0..3 {
            damped[(i, i)] += lambda * jtj[(i, i)].max(1e-300);
        }
        let Some(step) = damped.cholesky().map(|c| c.solve(&jtr)) else {
            lambda *= 10.0;
            if lambda > 1e20 {
                break;
            }
            continue;
        };
        let candidate = p + step;
        let candidate_cost = if candidate[1] > 0.0 { problem.cost(&candidate) } else { f64::INFINITY };
        if candidate_cost <= cost {
            let small_step = step.iter().zip(p.iter()).all(|(d, v)| d.abs() <= 1e-15 * (v.abs() + 1e-15));
            let stalled = cost - candidate_cost <= 1e-30 * cost.max(1e-300);
            p = candidate;
            cost = candidate_cost;
            lambda = (lambda / 10.0).max(1e-15);
            if small_step || (stalled && lambda <= 1e-12) || cost == 0.0 {
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e20 {
                break;
            }
        }
    }

    check_conditioning(&problem, &p)?;
    Ok(DecayFit { amplitude: p[0], time_constant_ns: p[1], g0: p[2], residual_norm: cost.sqrt() })
}

/// Rejects fits where some parameter combination is not determined by the
/// data, naming the parameter that dominates the flattest direction.
fn check_conditioning(problem: &Problem, p: &Vector3<f64>) -> Result<()> {
    let (jtj, _) = problem.normal(p);
    let d: Vec<f64> = (0..3).map(|i| jtj[(i, i)].sqrt()).collect();
    if let Some(i) = d.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::IllConditionedFit { parameter: NAMES[i] });
    }
    let corr = Matrix3::from_fn(|i, j| jtj[(i, j)] / (d[i] * d[j]));
    let eig = SymmetricEigen::new(corr);
    let (k, min) = eig.eigenvalues.iter().enumerate().fold((0, f64::INFINITY), |acc, (k, v)| if *v < acc.1 { (k, *v) } else { acc });
    if min < 1e-13 {
        let v = eig.eigenvectors.column(k);
        let worst = (0..3).max_by(|a, b| v[*a].abs().total_cmp(&v[*b].abs())).unwrap_or(1);
        return Err(Error::IllConditionedFit { parameter: NAMES[worst] });
    }
    Ok(())
}

/// `storage_ns,g2_peak,stderr` rows.
pub fn decay_points_csv(points: &[DecayPoint]) -> String {
    let mut out = String::from("storage_ns,g2_peak,stderr\n");
    for p in points {
        let _ = writeln!(out, "{},{},{}", p.t_ns, p.g, p.stderr);
    }
    out
}
