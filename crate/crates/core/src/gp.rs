//! Gaussian-process regression with the exponentiated-quadratic kernel
//!
//! `k(x, x') = theta * exp(-gamma * |x - x'|^2)`, zero prior mean and
//! homoscedastic Gaussian noise. [`fit_gp`] standardizes the targets,
//! maximizes the log marginal likelihood over `(log theta, log gamma,
//! log noise_var)` from random restarts and caches the Cholesky factor of
//! `K + noise_var * I`. All queries on [`GpPosterior`] report values in the
//! units of the original targets.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::optimize::{projected_bfgs_ascent, AscentOptions};

/// Diagonal jitter starts at `JITTER_START * theta` and grows tenfold up to `JITTER_MAX * theta`.
pub const JITTER_START: f64 = 1e-10;
pub const JITTER_MAX: f64 = 1e-4;
/// Lower bound on the noise variance in standardized units.
pub const NOISE_FLOOR: f64 = 1e-8;

const LOG_2PI: f64 = 1.837_877_066_409_345_3;

/// Range of the uniform draws for the restart points of the hyperparameter search (log space).
const RESTART_RANGE: (f64, f64) = (-4.0, 4.0);
const LOG_THETA_BOUNDS: (f64, f64) = (-6.0, 6.0);
const LOG_GAMMA_BOUNDS: (f64, f64) = (-12.0, 12.0);
const LOG_NOISE_UPPER: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::InvalidInput(format!(
                "box bounds must be non-empty and of equal length (got {} and {})",
                lower.len(),
                upper.len()
            )));
        }
        if let Some(i) = (0..lower.len()).find(|&i| !(lower[i] < upper[i]) || !lower[i].is_finite() || !upper[i].is_finite()) {
            return Err(Error::InvalidInput(format!(
                "bound {i}: lower {} must be finite and below upper {}",
                lower[i], upper[i]
            )));
        }
        Ok(Self { lower, upper })
    }

    /// The cube `[lo, hi]^d`.
    pub fn cube(d: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; d], vec![hi; d])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&v, (&l, &u))| v >= l && v <= u)
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for ((v, &l), &u) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(l, u);
        }
    }
}

/// Observed inputs and targets on a box.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    domain: BoxDomain,
}

impl Dataset {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<f64>, domain: BoxDomain) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::InvalidInput("dataset needs at least one observation".into()));
        }
        if x.len() != y.len() {
            return Err(Error::InvalidInput(format!("{} inputs but {} targets", x.len(), y.len())));
        }
        let mut data = Self { x: Vec::with_capacity(y.len()), y: Vec::with_capacity(y.len()), domain };
        for (xi, yi) in x.into_iter().zip(y) {
            data.push(xi, yi)?;
        }
        Ok(data)
    }

    pub fn push(&mut self, x: Vec<f64>, y: f64) -> Result<()> {
        if !self.domain.contains(&x) {
            return Err(Error::InvalidInput(format!("input {x:?} lies outside the domain")));
        }
        if !y.is_finite() {
            return Err(Error::InvalidInput(format!("target {y} is not finite")));
        }
        self.x.push(x);
        self.y.push(y);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.x
    }

    pub fn targets(&self) -> &[f64] {
        &self.y
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    /// Largest observed target.
    pub fn best_y(&self) -> f64 {
        self.y.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Kernel variance `theta`, inverse squared lengthscale `gamma` and noise variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparams {
    pub theta: f64,
    pub gamma: f64,
    pub noise_var: f64,
}

impl Hyperparams {
    pub fn new(theta: f64, gamma: f64, noise_var: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) || !(gamma > 0.0 && gamma.is_finite()) || !(noise_var >= 0.0 && noise_var.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "hyperparameters need theta > 0, gamma > 0, noise_var >= 0 (got {theta}, {gamma}, {noise_var})"
            )));
        }
        Ok(Self { theta, gamma, noise_var })
    }

    fn from_log(p: &[f64]) -> Self {
        Self { theta: p[0].exp(), gamma: p[1].exp(), noise_var: p[2].exp() }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

pub fn eq_kernel(x1: &[f64], x2: &[f64], hyper: &Hyperparams) -> f64 {
    hyper.theta * (-hyper.gamma * sq_dist(x1, x2)).exp()
}

/// Gaussian posterior over the gradient of the latent function at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct GradPosterior {
    pub mean_grad: Vec<f64>,
    pub cov_grad: DMatrix<f64>,
}

/// Posterior mean and variance with their spatial gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub var: f64,
    pub mean_grad: Vec<f64>,
    pub var_grad: Vec<f64>,
}

impl Prediction {
    pub fn std(&self) -> f64 {
        self.var.sqrt()
    }

    /// Gradient of the posterior standard deviation; zero where the variance vanishes.
    pub fn std_grad(&self) -> Vec<f64> {
        let s = self.std();
        if s <= 0.0 {
            return vec![0.0; self.var_grad.len()];
        }
        self.var_grad.iter().map(|g| g / (2.0 * s)).collect()
    }
}

/// A GP conditioned on a dataset. Immutable after construction.
#[derive(Debug, Clone)]
pub struct GpPosterior {
    data: Dataset,
    /// Hyperparameters in standardized target units.
    hyper: Hyperparams,
    y_offset: f64,
    y_scale: f64,
    chol_l: DMatrix<f64>,
    alpha: DVector<f64>,
    jitter: f64,
    degenerate: bool,
}

struct Factorization {
    l: DMatrix<f64>,
    jitter: f64,
}

fn kernel_matrix(x: &[Vec<f64>], hyper: &Hyperparams) -> DMatrix<f64> {
    let n = x.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = hyper.theta + hyper.noise_var;
        for j in 0..i {
            let v = eq_kernel(&x[i], &x[j], hyper);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Cholesky factor of `k + jitter * I` with escalating jitter.
fn factorize(k: &DMatrix<f64>, theta: f64) -> Result<Factorization> {
    let n = k.nrows();
    let mut jitter = JITTER_START * theta;
    let max = JITTER_MAX * theta * (1.0 + 1e-9);
    while jitter <= max {
        let mut kj = k.clone();
        for i in 0..n {
            kj[(i, i)] += jitter;
        }
        if let Some(c) = kj.cholesky() {
            let l = c.unpack();
            if l.diagonal().iter().all(|v| v.is_finite() && *v > 0.0) {
                return Ok(Factorization { l, jitter });
            }
        }
        jitter *= 10.0;
    }
    Err(Error::SingularKernel { jitter: jitter / 10.0 })
}

fn solve_lower(l: &DMatrix<f64>, b: &mut DVector<f64>) {
    let n = l.nrows();
    for i in 0..n {
        let mut s = b[i];
        for j in 0..i {
            s -= l[(i, j)] * b[j];
        }
        b[i] = s / l[(i, i)];
    }
}

fn solve_upper_t(l: &DMatrix<f64>, b: &mut DVector<f64>) {
    let n = l.nrows();
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in i + 1..n {
            s -= l[(j, i)] * b[j];
        }
        b[i] = s / l[(i, i)];
    }
}

fn chol_solve(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let mut v = b.clone();
    solve_lower(l, &mut v);
    solve_upper_t(l, &mut v);
    v
}

impl GpPosterior {
    /// Condition on `data` with fixed hyperparameters in the units of `data`
    /// (no target standardization).
    pub fn new(data: Dataset, hyper: Hyperparams) -> Result<Self> {
        Self::with_scaling(data, hyper, 0.0, 1.0)
    }

    /// Condition with targets mapped through `(y - offset) / scale` first;
    /// `hyper` is expressed in those standardized units.
    pub fn with_scaling(data: Dataset, hyper: Hyperparams, offset: f64, scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !offset.is_finite() {
            return Err(Error::InvalidInput(format!("bad target scaling ({offset}, {scale})")));
        }
        let k = kernel_matrix(data.inputs(), &hyper);
        let fact = factorize(&k, hyper.theta)?;
        let ys = DVector::from_iterator(data.len(), data.targets().iter().map(|y| (y - offset) / scale));
        let alpha = chol_solve(&fact.l, &ys);
        Ok(Self {
            data,
            hyper,
            y_offset: offset,
            y_scale: scale,
            chol_l: fact.l,
            alpha,
            jitter: fact.jitter,
            degenerate: false,
        })
    }

    pub fn dataset(&self) -> &Dataset {
        &self.data
    }

    pub fn domain(&self) -> &BoxDomain {
        self.data.domain()
    }

    /// Hyperparameters in standardized target units.
    pub fn hyper(&self) -> &Hyperparams {
        &self.hyper
    }

    /// `(offset, scale)` of the target standardization.
    pub fn scaling(&self) -> (f64, f64) {
        (self.y_offset, self.y_scale)
    }

    /// Noise variance in the units of the original targets.
    pub fn noise_var(&self) -> f64 {
        self.hyper.noise_var * self.y_scale * self.y_scale
    }

    /// Diagonal jitter that was needed to factorize the kernel matrix.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// True when the fit saw constant targets and fell back to the noise floor.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Lower Cholesky factor of `K + (noise_var + jitter) I` in standardized units.
    pub fn chol_factor(&self) -> &DMatrix<f64> {
        &self.chol_l
    }

    /// `(K + noise_var I)^-1 y` in standardized units.
    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    fn cross_cov(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.data.len(), self.data.inputs().iter().map(|xi| eq_kernel(x, xi, &self.hyper)))
    }

    /// Posterior mean and variance before clamping, in standardized units.
    fn mean_var_std_units(&self, x: &[f64]) -> (f64, f64) {
        let k = self.cross_cov(x);
        let mean = k.dot(&self.alpha);
        let mut v = k;
        solve_lower(&self.chol_l, &mut v);
        (mean, self.hyper.theta - v.norm_squared())
    }

    /// Posterior variance before the clamp at zero (original units).
    pub fn variance_unclamped(&self, x: &[f64]) -> f64 {
        self.mean_var_std_units(x).1 * self.y_scale * self.y_scale
    }

    /// Posterior mean and (clamped) variance of the latent function.
    pub fn mean_var(&self, x: &[f64]) -> (f64, f64) {
        let (m, v) = self.mean_var_std_units(x);
        (self.y_offset + self.y_scale * m, v.max(0.0) * self.y_scale * self.y_scale)
    }

    pub fn mean(&self, x: &[f64]) -> f64 {
        let m = self.cross_cov(x).dot(&self.alpha);
        self.y_offset + self.y_scale * m
    }

    /// Mean, variance and their gradients in one pass.
    pub fn predict(&self, x: &[f64]) -> Prediction {
        let d = x.len();
        let n = self.data.len();
        let gamma = self.hyper.gamma;
        let k = self.cross_cov(x);
        let mean = k.dot(&self.alpha);
        let mut v = k.clone();
        solve_lower(&self.chol_l, &mut v);
        let var = self.hyper.theta - v.norm_squared();
        // w = K^-1 k
        let mut w = v;
        solve_upper_t(&self.chol_l, &mut w);
        let mut mean_grad = vec![0.0; d];
        let mut var_grad = vec![0.0; d];
        for l in 0..n {
            let xl = &self.data.inputs()[l];
            let a = self.alpha[l] * k[l];
            let b = w[l] * k[l];
            for i in 0..d {
                let dk = -2.0 * gamma * (x[i] - xl[i]);
                mean_grad[i] += a * dk;
                var_grad[i] -= 2.0 * b * dk;
            }
        }
        let s = self.y_scale;
        let s2 = s * s;
        Prediction {
            mean: self.y_offset + s * mean,
            var: var.max(0.0) * s2,
            mean_grad: mean_grad.into_iter().map(|g| g * s).collect(),
            var_grad: if var > 0.0 { var_grad.into_iter().map(|g| g * s2).collect() } else { vec![0.0; d] },
        }
    }

    /// Gradient of the posterior mean.
    pub fn mean_grad(&self, x: &[f64]) -> Vec<f64> {
        let gamma = self.hyper.gamma;
        let mut g = vec![0.0; x.len()];
        for (l, xl) in self.data.inputs().iter().enumerate() {
            let a = self.alpha[l] * eq_kernel(x, xl, &self.hyper);
            for i in 0..x.len() {
                g[i] -= 2.0 * gamma * (x[i] - xl[i]) * a;
            }
        }
        g.iter_mut().for_each(|v| *v *= self.y_scale);
        g
    }

    /// Hessian of the posterior mean.
    pub fn mean_hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let d = x.len();
        let gamma = self.hyper.gamma;
        let mut h = DMatrix::zeros(d, d);
        for (l, xl) in self.data.inputs().iter().enumerate() {
            let a = self.alpha[l] * eq_kernel(x, xl, &self.hyper);
            for i in 0..d {
                let ri = x[i] - xl[i];
                for j in 0..d {
                    let rj = x[j] - xl[j];
                    let delta = if i == j { 2.0 * gamma } else { 0.0 };
                    h[(i, j)] += a * (4.0 * gamma * gamma * ri * rj - delta);
                }
            }
        }
        h * self.y_scale
    }

    /// Posterior distribution of the gradient of the latent function.
    pub fn gradient(&self, x: &[f64]) -> GradPosterior {
        let d = x.len();
        let n = self.data.len();
        let gamma = self.hyper.gamma;
        // dk[(l, i)] = d k(x, x_l) / d x_i
        let mut dk = DMatrix::zeros(n, d);
        for (l, xl) in self.data.inputs().iter().enumerate() {
            let kv = eq_kernel(x, xl, &self.hyper);
            for i in 0..d {
                dk[(l, i)] = -2.0 * gamma * (x[i] - xl[i]) * kv;
            }
        }
        let mean: DVector<f64> = dk.transpose() * &self.alpha;
        let mut v = dk;
        for i in 0..d {
            let mut col = v.column(i).clone_owned();
            solve_lower(&self.chol_l, &mut col);
            v.set_column(i, &col);
        }
        let prior = DMatrix::identity(d, d) * (2.0 * gamma * self.hyper.theta);
        let mut cov = prior - v.transpose() * v;
        cov = (&cov + cov.transpose()) * 0.5;
        let s = self.y_scale;
        GradPosterior {
            mean_grad: mean.iter().map(|g| g * s).collect(),
            cov_grad: cov * (s * s),
        }
    }

    /// Log marginal likelihood of the (standardized) targets under the cached factorization.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.data.len() as f64;
        let ys = DVector::from_iterator(self.data.len(), self.data.targets().iter().map(|y| (y - self.y_offset) / self.y_scale));
        let logdet: f64 = self.chol_l.diagonal().iter().map(|v| v.ln()).sum();
        -0.5 * ys.dot(&self.alpha) - logdet - 0.5 * n * LOG_2PI
    }

    /// Add one observation and recondition with the hyperparameters and scaling frozen.
    pub fn condition_on(&self, x: Vec<f64>, y: f64) -> Result<Self> {
        let mut data = self.data.clone();
        data.push(x, y)?;
        let mut gp = Self::with_scaling(data, self.hyper, self.y_offset, self.y_scale)?;
        gp.degenerate = self.degenerate;
        Ok(gp)
    }
}

pub fn posterior_mean_var(gp: &GpPosterior, x: &[f64]) -> (f64, f64) {
    gp.mean_var(x)
}

pub fn posterior_gradient(gp: &GpPosterior, x: &[f64]) -> GradPosterior {
    gp.gradient(x)
}

/// `-1/2 y^T K^-1 y - 1/2 log|K| - n/2 log(2 pi)` with `K = K_n + noise_var I`
/// (plus whatever jitter the factorization needed).
pub fn log_marginal_likelihood(data: &Dataset, hyper: &Hyperparams) -> Result<f64> {
    Ok(GpPosterior::new(data.clone(), *hyper)?.log_marginal_likelihood())
}

/// Log marginal likelihood and its gradient with respect to
/// `(log theta, log gamma, log noise_var)`; `sqd` holds pairwise squared distances.
fn lml_with_grad(sqd: &DMatrix<f64>, ys: &DVector<f64>, log_params: &[f64]) -> Result<(f64, [f64; 3])> {
    let hyper = Hyperparams::from_log(log_params);
    let n = ys.len();
    let kf = sqd.map(|d| hyper.theta * (-hyper.gamma * d).exp());
    let mut k = kf.clone();
    for i in 0..n {
        k[(i, i)] += hyper.noise_var;
    }
    let fact = factorize(&k, hyper.theta)?;
    let alpha = chol_solve(&fact.l, ys);
    let logdet: f64 = fact.l.diagonal().iter().map(|v| v.ln()).sum();
    let lml = -0.5 * ys.dot(&alpha) - logdet - 0.5 * n as f64 * LOG_2PI;

    let mut linv = DMatrix::identity(n, n);
    for c in 0..n {
        let mut col = linv.column(c).clone_owned();
        solve_lower(&fact.l, &mut col);
        linv.set_column(c, &col);
    }
    let kinv = linv.transpose() * &linv;
    let (mut g_theta, mut g_gamma, mut g_noise) = (0.0, 0.0, 0.0);
    for j in 0..n {
        for i in 0..n {
            let w = alpha[i] * alpha[j] - kinv[(i, j)];
            g_theta += w * kf[(i, j)];
            g_gamma -= w * hyper.gamma * sqd[(i, j)] * kf[(i, j)];
        }
        g_noise += (alpha[j] * alpha[j] - kinv[(j, j)]) * hyper.noise_var;
    }
    Ok((lml, [0.5 * g_theta, 0.5 * g_gamma, 0.5 * g_noise]))
}

/// Fit hyperparameters by maximizing the log marginal likelihood from
/// `restarts` random initializations and condition on `data`.
///
/// Targets are standardized to zero mean and unit variance first. Constant
/// targets are flagged through [`GpPosterior::is_degenerate`] and fitted with
/// unit scale.
pub fn fit_gp<R: Rng + ?Sized>(data: &Dataset, restarts: usize, rng: &mut R) -> Result<GpPosterior> {
    if data.len() < 2 {
        return Err(Error::InvalidInput("fitting needs at least two observations".into()));
    }
    if restarts == 0 {
        return Err(Error::InvalidInput("restarts must be at least 1".into()));
    }
    let n = data.len();
    let offset = data.targets().iter().sum::<f64>() / n as f64;
    let var = data.targets().iter().map(|y| (y - offset).powi(2)).sum::<f64>() / n as f64;
    let mut scale = var.sqrt();
    let degenerate = !(scale > 1e-12 * (1.0 + offset.abs()));
    if degenerate {
        scale = 1.0;
    }
    let ys = DVector::from_iterator(n, data.targets().iter().map(|y| (y - offset) / scale));
    let x = data.inputs();
    let sqd = DMatrix::from_fn(n, n, |i, j| sq_dist(&x[i], &x[j]));

    let lower = [LOG_THETA_BOUNDS.0, LOG_GAMMA_BOUNDS.0, NOISE_FLOOR.ln()];
    let upper = [LOG_THETA_BOUNDS.1, LOG_GAMMA_BOUNDS.1, LOG_NOISE_UPPER];
    let starts: Vec<[f64; 3]> = (0..restarts)
        .map(|_| {
            let mut p = [0.0; 3];
            for (k, v) in p.iter_mut().enumerate() {
                *v = rng.random_range(RESTART_RANGE.0..RESTART_RANGE.1).clamp(lower[k], upper[k]);
            }
            p
        })
        .collect();

    let opts = AscentOptions { max_iter: 100, grad_tol: 1e-5, value_tol: 1e-10 };
    let results: Vec<Option<(f64, Vec<f64>)>> = starts
        .par_iter()
        .map(|start| {
            let objective = |p: &[f64]| match lml_with_grad(&sqd, &ys, p) {
                Ok((v, g)) if v.is_finite() => (v, g.to_vec()),
                _ => (f64::NEG_INFINITY, vec![0.0; 3]),
            };
            let r = projected_bfgs_ascent(objective, start, &lower, &upper, &opts);
            r.value.is_finite().then_some((r.value, r.x))
        })
        .collect();

    let mut best: Option<(f64, Vec<f64>)> = None;
    for (value, p) in results.into_iter().flatten() {
        if best.as_ref().is_none_or(|(bv, _)| value > *bv) {
            best = Some((value, p));
        }
    }
    let Some((_, p)) = best else {
        return Err(Error::SingularKernel { jitter: JITTER_MAX });
    };
    let mut hyper = Hyperparams::from_log(&p);
    hyper.noise_var = hyper.noise_var.max(NOISE_FLOOR);
    let mut gp = GpPosterior::with_scaling(data.clone(), hyper, offset, scale)?;
    gp.degenerate = degenerate;
    Ok(gp)
}
