//! Estimates of the incumbent `M` and of the Lipschitz constant `L`.
//!
//! The global estimate is the largest norm of the posterior mean gradient over
//! the domain; the local variant uses the norm at a single point. The
//! gradient covariance is not used.

use rand::Rng;

use crate::design::{latin_hypercube, uniform_point};
use crate::gp::{BoxDomain, GpPosterior};
use crate::optimize::{projected_gradient_ascent, AscentOptions};
pub use crate::penalization::L_FLOOR;

/// Space-filling points per input dimension for the global search.
pub const SAMPLES_PER_DIM: usize = 500;
/// Number of best samples refined by gradient ascent.
pub const REFINED: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MMode {
    /// Largest observed target.
    MaxY,
    /// Maximum of the posterior mean.
    MaxMu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LipschitzMode {
    Global,
    Local,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzEstimate {
    pub value: f64,
    pub argmax_point: Vec<f64>,
    pub mode: LipschitzMode,
}

pub fn estimate_m<R: Rng + ?Sized>(gp: &GpPosterior, mode: MMode, rng: &mut R) -> f64 {
    match mode {
        MMode::MaxY => gp.dataset().best_y(),
        MMode::MaxMu => maximize_mean(gp, rng).1,
    }
}

/// Maximum of the posterior mean by bounded ascent from every training input
/// and a small Latin hypercube.
pub fn maximize_mean<R: Rng + ?Sized>(gp: &GpPosterior, rng: &mut R) -> (Vec<f64>, f64) {
    let domain = gp.domain();
    let mut starts: Vec<Vec<f64>> = gp.dataset().inputs().to_vec();
    starts.extend(latin_hypercube(domain, 10 * domain.dim(), rng));
    let f = |x: &[f64]| (gp.mean(x), gp.mean_grad(x));
    let opts = AscentOptions { max_iter: 200, grad_tol: 1e-9, value_tol: 1e-15 };
    let mut best = (starts[0].clone(), f64::NEG_INFINITY);
    for s in &starts {
        let r = projected_gradient_ascent(f, s, domain.lower(), domain.upper(), &opts);
        if r.value > best.1 {
            best = (r.x, r.value);
        }
    }
    best
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Largest posterior-mean gradient norm over the domain: `500 d` space-filling
/// samples, the best five refined by ascent on the squared norm.
pub fn estimate_l_global<R: Rng + ?Sized>(gp: &GpPosterior, rng: &mut R) -> LipschitzEstimate {
    let domain = gp.domain();
    let samples = latin_hypercube(domain, SAMPLES_PER_DIM * domain.dim(), rng);
    let mut scored: Vec<(f64, usize)> = samples
        .iter()
        .enumerate()
        .map(|(i, x)| (norm(&gp.mean_grad(x)), i))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    // d/dx |mu'|^2 = 2 H mu'
    let f = |x: &[f64]| {
        let g = gp.mean_grad(x);
        let h = gp.mean_hessian(x);
        let grad: Vec<f64> = (0..x.len()).map(|i| 2.0 * (0..x.len()).map(|j| h[(i, j)] * g[j]).sum::<f64>()).collect();
        (g.iter().map(|v| v * v).sum::<f64>(), grad)
    };
    let opts = AscentOptions { max_iter: 200, grad_tol: 1e-10, value_tol: 1e-14 };
    let mut best = (scored[0].0, samples[scored[0].1].clone());
    for &(_, i) in scored.iter().take(REFINED) {
        let r = projected_gradient_ascent(f, &samples[i], domain.lower(), domain.upper(), &opts);
        let v = r.value.max(0.0).sqrt();
        if v > best.0 {
            best = (v, r.x);
        }
    }
    LipschitzEstimate { value: best.0.max(L_FLOOR), argmax_point: best.1, mode: LipschitzMode::Global }
}

/// `max(|grad mu(x_j)|, L_FLOOR)`.
pub fn estimate_l_local(gp: &GpPosterior, x_j: &[f64]) -> f64 {
    norm(&gp.mean_grad(x_j)).max(L_FLOOR)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzReport {
    pub pairs: usize,
    pub violations: usize,
    pub violation_fraction: f64,
    /// Largest `|f(x1) - f(x2)| / |x1 - x2|` over the sampled pairs.
    pub max_slope: f64,
}

/// Empirical check of `|f(x1) - f(x2)| <= L |x1 - x2|` on uniformly sampled pairs.
pub fn verify_lipschitz_bound<F, R>(f: F, domain: &BoxDomain, lipschitz: f64, pairs: usize, rng: &mut R) -> LipschitzReport
where
    F: Fn(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    let mut violations = 0;
    let mut max_slope = 0.0f64;
    for _ in 0..pairs {
        let a = uniform_point(domain, rng);
        let b = uniform_point(domain, rng);
        let dist = norm(&a.iter().zip(&b).map(|(u, v)| u - v).collect::<Vec<_>>());
        let diff = (f(&a) - f(&b)).abs();
        if diff > lipschitz * dist {
            violations += 1;
        }
        if dist > 0.0 {
            max_slope = max_slope.max(diff / dist);
        }
    }
    LipschitzReport {
        pairs,
        violations,
        violation_fraction: if pairs == 0 { 0.0 } else { violations as f64 / pairs as f64 },
        max_slope,
    }
}
