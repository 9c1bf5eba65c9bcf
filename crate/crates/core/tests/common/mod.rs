//! Independent oracles shared by the integration tests.
//!
//! Nothing here calls into the code under test except to read parameters:
//! the GP oracle inverts the full covariance with an LU solve, derivatives are
//! central differences, and benchmark constants come from dense grids.

#![allow(dead_code)]

use lipbatch::design::uniform_point;
use lipbatch::gp::{eq_kernel, BoxDomain, Dataset, GpPosterior, Hyperparams};
use lipbatch::penalization::PenalizerParams;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub fn central_diff<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<f64> {
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

/// `max_k |a_k - b_k| / max(|b|, floor)`.
pub fn rel_vec_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let scale = b.iter().map(|v| v * v).sum::<f64>().sqrt().max(floor);
    a.iter().zip(b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max) / scale
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
}

/// `z` of a penalizer recomputed from its parameters.
pub fn penalizer_z(p: &PenalizerParams, x: &[f64]) -> f64 {
    (p.lipschitz() * distance(x, p.center()) - p.incumbent() + p.mu_c()) / (std::f64::consts::SQRT_2 * p.sigma_c())
}

/// Central differences of a penalizer taken on the smaller of `phi` and
/// `1 - phi`, so the upper tail does not lose digits to cancellation.
pub fn penalizer_diff(p: &PenalizerParams, x: &[f64], h: f64) -> Vec<f64> {
    if penalizer_z(p, x) > 0.0 {
        central_diff(|q| -0.5 * libm::erfc(penalizer_z(p, q)), x, h)
    } else {
        central_diff(|q| 0.5 * libm::erfc(-penalizer_z(p, q)), x, h)
    }
}

/// Smooth random test surface on the unit cube.
pub fn test_surface(x: &[f64]) -> f64 {
    x.iter().enumerate().map(|(i, v)| ((3.0 + i as f64) * v).sin() + 0.3 * v * v).sum()
}

pub fn random_dataset<R: Rng + ?Sized>(rng: &mut R, n: usize, d: usize) -> Dataset {
    let domain = BoxDomain::cube(d, 0.0, 1.0).unwrap();
    let x: Vec<Vec<f64>> = (0..n).map(|_| uniform_point(&domain, rng)).collect();
    let y = x.iter().map(|p| test_surface(p)).collect();
    Dataset::new(x, y, domain).unwrap()
}

pub fn random_hyper<R: Rng + ?Sized>(rng: &mut R) -> Hyperparams {
    Hyperparams::new(rng.random_range(0.3..3.0), rng.random_range(0.5..8.0), 10f64.powf(rng.random_range(-6.0..-1.0))).unwrap()
}

/// GP posterior computed by explicit inversion of `K + (noise + jitter) I`,
/// applied to targets mapped through `(y - offset) / scale`.
pub struct DenseGp {
    x: Vec<Vec<f64>>,
    y: DVector<f64>,
    hyper: Hyperparams,
    kinv: DMatrix<f64>,
    logdet: f64,
    offset: f64,
    scale: f64,
}

impl DenseGp {
    /// Mirror `gp` (its data, standardized hyperparameters, scaling and jitter).
    pub fn mirror(gp: &GpPosterior) -> Self {
        let (offset, scale) = gp.scaling();
        let hyper = *gp.hyper();
        let x = gp.dataset().inputs().to_vec();
        let n = x.len();
        let mut k = DMatrix::from_fn(n, n, |i, j| eq_kernel(&x[i], &x[j], &hyper));
        for i in 0..n {
            k[(i, i)] += hyper.noise_var + gp.jitter();
        }
        let lu = k.clone().lu();
        let logdet = lu.determinant().ln();
        let kinv = lu.try_inverse().expect("invertible covariance");
        let y = DVector::from_iterator(n, gp.dataset().targets().iter().map(|v| (v - offset) / scale));
        Self { x, y, hyper, kinv, logdet, offset, scale }
    }

    fn k_star(&self, xs: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.x.len(), self.x.iter().map(|p| eq_kernel(xs, p, &self.hyper)))
    }

    /// `d k(xs, x_l) / d xs_i` as an `n x d` matrix.
    fn dk_star(&self, xs: &[f64]) -> DMatrix<f64> {
        let g = self.hyper.gamma;
        DMatrix::from_fn(self.x.len(), xs.len(), |l, i| -2.0 * g * (xs[i] - self.x[l][i]) * eq_kernel(xs, &self.x[l], &self.hyper))
    }

    pub fn mean_var(&self, xs: &[f64]) -> (f64, f64) {
        let k = self.k_star(xs);
        let m = (k.transpose() * &self.kinv * &self.y)[0];
        let v = self.hyper.theta - (k.transpose() * &self.kinv * &k)[0];
        (self.offset + self.scale * m, v * self.scale * self.scale)
    }

    pub fn grad_mean_cov(&self, xs: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
        let dk = self.dk_star(xs);
        let mean = dk.transpose() * &self.kinv * &self.y * self.scale;
        let d = xs.len();
        let prior = DMatrix::identity(d, d) * (2.0 * self.hyper.gamma * self.hyper.theta);
        let cov = (prior - dk.transpose() * &self.kinv * &dk) * (self.scale * self.scale);
        (mean.iter().copied().collect(), cov)
    }

    /// Log marginal likelihood of the standardized targets.
    pub fn lml(&self) -> f64 {
        let n = self.x.len() as f64;
        -0.5 * (self.y.transpose() * &self.kinv * &self.y)[0] - 0.5 * self.logdet - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }
}

/// Maximum of `f` and its location over a `(points x points)` grid on the box.
pub fn grid_max_2d<F: Fn(&[f64]) -> f64>(f: F, domain: &BoxDomain, points: usize) -> (f64, Vec<f64>) {
    let (lo, hi) = (domain.lower(), domain.upper());
    let mut best = (f64::NEG_INFINITY, vec![0.0; 2]);
    for i in 0..points {
        for j in 0..points {
            let p = [
                lo[0] + (hi[0] - lo[0]) * i as f64 / (points - 1) as f64,
                lo[1] + (hi[1] - lo[1]) * j as f64 / (points - 1) as f64,
            ];
            let v = f(&p);
            if v > best.0 {
                best = (v, p.to_vec());
            }
        }
    }
    best
}

/// Largest gradient norm of Cosines over a dense grid of its domain.
pub fn cosines_grid_lipschitz(points: usize) -> (f64, Vec<f64>) {
    let bench = lipbatch::Benchmark::cosines();
    grid_max_2d(
        |p| {
            let g = lipbatch::benchmarks::cosines_grad(p);
            (g[0] * g[0] + g[1] * g[1]).sqrt()
        },
        bench.domain(),
        points,
    )
}
