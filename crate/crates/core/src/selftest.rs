//! Quick oracle checks runnable from the command line.
//!
//! Each check compares an analytic quantity with an independent estimate:
//! Monte-Carlo sampling for the penalizer, central differences for the
//! gradients and a dense LU solve for the GP posterior.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::acquisition::{Acquisition, AcquisitionSpec};
use crate::benchmarks::{cosines, cosines_grad, Benchmark};
use crate::design::uniform_point;
use crate::gp::{eq_kernel, BoxDomain, Dataset, GpPosterior, Hyperparams};
use crate::lipschitz::verify_lipschitz_bound;
use crate::penalization::{PenalizedAcquisition, PenalizerParams};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-8)
}

fn central_diff<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|k| {
            let mut xp = x.to_vec();
            xp[k] += h;
            let mut xm = x.to_vec();
            xm[k] -= h;
            (f(&xp) - f(&xm)) / (2.0 * h)
        })
        .collect()
}

fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-8);
    a.iter().zip(b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max) / scale
}

/// Central differences of a penalizer, taken on whichever of `phi` and
/// `1 - phi` is the smaller so that neither tail loses digits to cancellation.
fn penalizer_diff(p: &PenalizerParams, x: &[f64], h: f64) -> Vec<f64> {
    let z = |q: &[f64]| {
        let r = q.iter().zip(p.center()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        (p.lipschitz() * r - p.incumbent() + p.mu_c()) / (std::f64::consts::SQRT_2 * p.sigma_c())
    };
    if z(x) > 0.0 {
        central_diff(|q| -0.5 * libm::erfc(z(q)), x, h)
    } else {
        central_diff(|q| 0.5 * libm::erfc(-z(q)), x, h)
    }
}

fn penalizer_monte_carlo(rng: &mut ChaCha8Rng) -> CheckResult {
    let samples = 200_000;
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let l = rng.random_range(0.5..5.0);
        let m = rng.random_range(0.0..2.0);
        let mu = rng.random_range(-1.0..2.0);
        let sigma = rng.random_range(0.1..1.5);
        let dist = rng.random_range(0.0..1.5);
        let p = PenalizerParams::new(vec![0.0], mu, sigma, l, m);
        let hits = (0..samples)
            .filter(|_| {
                let z: f64 = StandardNormal.sample(rng);
                (m - (mu + sigma * z)) / l <= dist
            })
            .count();
        worst = worst.max((p.value(&[dist]) - hits as f64 / samples as f64).abs());
    }
    CheckResult { name: "penalizer_vs_monte_carlo", passed: worst <= 1e-2, detail: format!("max abs error {worst:.2e}") }
}

fn random_gp(rng: &mut ChaCha8Rng, n: usize, d: usize) -> GpPosterior {
    let domain = BoxDomain::cube(d, 0.0, 1.0).expect("unit box");
    let x: Vec<Vec<f64>> = (0..n).map(|_| uniform_point(&domain, rng)).collect();
    let y: Vec<f64> = x.iter().map(|p| p.iter().map(|v| (4.0 * v).sin()).sum::<f64>()).collect();
    let data = Dataset::new(x, y, domain).expect("valid data");
    GpPosterior::new(data, Hyperparams { theta: 1.3, gamma: 4.0, noise_var: 1e-3 }).expect("factorizable")
}

fn gradients(rng: &mut ChaCha8Rng) -> CheckResult {
    let gp = random_gp(rng, 12, 2);
    let spec = AcquisitionSpec::ucb(2.0).expect("kappa >= 0");
    let acq = Acquisition::new(&gp, spec);
    let center = vec![0.4, 0.6];
    let (mu, var) = gp.mean_var(&center);
    let pen = PenalizerParams::new(center.clone(), mu, var.sqrt(), 3.0, gp.dataset().best_y());
    let pa = PenalizedAcquisition::with_penalizers(acq, vec![pen.clone()]);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let x = vec![rng.random_range(0.05..0.95), rng.random_range(0.05..0.95)];
        if ((x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2)).sqrt() < 1e-2 {
            continue;
        }
        worst = worst.max(max_rel(&acq.value_grad(&x).1, &central_diff(|p| acq.value(p), &x, 1e-6)));
        worst = worst.max(max_rel(&pen.grad(&x), &penalizer_diff(&pen, &x, 1e-7)));
        let lg = pa.log_grad(&x).expect("softplus keeps the value positive");
        worst = worst.max(max_rel(&lg, &central_diff(|p| pa.log_value(p), &x, 1e-6)));
    }
    CheckResult { name: "gradients_vs_finite_differences", passed: worst <= 1e-5, detail: format!("max relative error {worst:.2e}") }
}

fn gp_dense(rng: &mut ChaCha8Rng) -> CheckResult {
    let gp = random_gp(rng, 10, 3);
    let h = *gp.hyper();
    let x = gp.dataset().inputs();
    let n = x.len();
    let mut k = DMatrix::from_fn(n, n, |i, j| eq_kernel(&x[i], &x[j], &h));
    for i in 0..n {
        k[(i, i)] += h.noise_var + gp.jitter();
    }
    let kinv = k.clone().lu().try_inverse().expect("invertible");
    let y = DVector::from_column_slice(gp.dataset().targets());
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let xs: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
        let kx = DVector::from_iterator(n, x.iter().map(|p| eq_kernel(&xs, p, &h)));
        let mean = (kx.transpose() * &kinv * &y)[0];
        let var = h.theta - (kx.transpose() * &kinv * &kx)[0];
        let (m, v) = gp.mean_var(&xs);
        worst = worst.max(rel_err(m, mean)).max((v - var).abs() / h.theta);
    }
    CheckResult { name: "gp_vs_dense_solve", passed: worst <= 1e-8, detail: format!("max relative error {worst:.2e}") }
}

fn cosines_lipschitz(rng: &mut ChaCha8Rng) -> CheckResult {
    let bench = Benchmark::cosines();
    let grid = 801;
    let mut l_grad = 0.0f64;
    for i in 0..grid {
        for j in 0..grid {
            let p = [i as f64 / (grid - 1) as f64, j as f64 / (grid - 1) as f64];
            let g = cosines_grad(&p);
            l_grad = l_grad.max((g[0] * g[0] + g[1] * g[1]).sqrt());
        }
    }
    let report = verify_lipschitz_bound(cosines, bench.domain(), 1.1 * l_grad, 20_000, rng);
    CheckResult {
        name: "cosines_lipschitz_bound",
        passed: report.violations == 0,
        detail: format!("L_grad {l_grad:.4}, {} violations, max slope {:.4}", report.violations, report.max_slope),
    }
}

pub fn run_all(seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    vec![penalizer_monte_carlo(&mut rng), gradients(&mut rng), gp_dense(&mut rng), cosines_lipschitz(&mut rng)]
}
