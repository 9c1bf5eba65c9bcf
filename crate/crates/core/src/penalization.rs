//! Local penalizers and the penalized acquisition.
//!
//! A penalizer centred at a batch point `x_j` is the probability that a
//! candidate `x` lies outside the ball of radius `(M - f(x_j)) / L` around
//! `x_j` when `f(x_j)` follows the GP posterior:
//!
//! ```text
//! phi(x; x_j) = 1/2 erfc(-z),   z = (L |x_j - x| - M + mu(x_j)) / sqrt(2 sigma^2(x_j))
//! ```
//!
//! The penalized acquisition `g(alpha(x)) * prod_j phi(x; x_j)` is maximized
//! in log space, where the penalizers contribute additively.

use rand::Rng;
use libm::erfc;

use crate::acquisition::{log_transform, log_transform_deriv, Acquisition, Transform};
use crate::design::latin_hypercube;
use crate::error::{Error, Result};
use crate::gp::BoxDomain;
use crate::optimize::{projected_gradient_ascent, AscentOptions};

/// Minimum posterior standard deviation at a penalizer centre.
pub const SIGMA_FLOOR: f64 = 1e-6;
/// Minimum Lipschitz constant.
pub const L_FLOOR: f64 = 1e-7;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

/// `exp(w^2) erfc(w)`, evaluated without overflow for large `w`.
fn erfcx(w: f64) -> f64 {
    if w < 25.0 {
        (w * w).exp() * erfc(w)
    } else {
        let w2 = w * w;
        let series = 1.0 - 1.0 / (2.0 * w2) + 3.0 / (4.0 * w2 * w2) - 15.0 / (8.0 * w2 * w2 * w2);
        series / (w * std::f64::consts::PI.sqrt())
    }
}

/// `ln erfc(w)`.
fn ln_erfc(w: f64) -> f64 {
    if w < 25.0 {
        erfc(w).ln()
    } else {
        erfcx(w).ln() - w * w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenalizerParams {
    center: Vec<f64>,
    mu_c: f64,
    sigma_c: f64,
    lipschitz: f64,
    incumbent: f64,
}

impl PenalizerParams {
    /// `sigma_c` and `lipschitz` are raised to [`SIGMA_FLOOR`] and [`L_FLOOR`].
    pub fn new(center: Vec<f64>, mu_c: f64, sigma_c: f64, lipschitz: f64, incumbent: f64) -> Self {
        Self {
            center,
            mu_c,
            sigma_c: if sigma_c.is_nan() { SIGMA_FLOOR } else { sigma_c.max(SIGMA_FLOOR) },
            lipschitz: if lipschitz.is_nan() { L_FLOOR } else { lipschitz.max(L_FLOOR) },
            incumbent,
        }
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn mu_c(&self) -> f64 {
        self.mu_c
    }

    pub fn sigma_c(&self) -> f64 {
        self.sigma_c
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn incumbent(&self) -> f64 {
        self.incumbent
    }

    /// Expected exclusion radius `(M - mu_c) / L`.
    pub fn exclusion_radius(&self) -> f64 {
        (self.incumbent - self.mu_c) / self.lipschitz
    }

    fn distance(&self, x: &[f64]) -> f64 {
        self.center.iter().zip(x).map(|(c, v)| (c - v) * (c - v)).sum::<f64>().sqrt()
    }

    fn z(&self, r: f64) -> f64 {
        (self.lipschitz * r - self.incumbent + self.mu_c) / (SQRT_2 * self.sigma_c)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        0.5 * erfc(-self.z(self.distance(x)))
    }

    pub fn ln_value(&self, x: &[f64]) -> f64 {
        let z = self.z(self.distance(x));
        if z > 0.0 {
            // phi = 1 - erfc(z)/2 is close to one
            (-0.5 * erfc(z)).ln_1p()
        } else {
            (0.5f64).ln() + ln_erfc(-z)
        }
    }

    /// `d z / d x`, zero at the centre.
    fn z_grad(&self, x: &[f64], r: f64) -> Vec<f64> {
        if r == 0.0 {
            return vec![0.0; x.len()];
        }
        let c = self.lipschitz / (SQRT_2 * self.sigma_c * r);
        x.iter().zip(&self.center).map(|(v, cj)| c * (v - cj)).collect()
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let r = self.distance(x);
        let z = self.z(r);
        let scale = (-z * z).exp() / std::f64::consts::PI.sqrt();
        self.z_grad(x, r).into_iter().map(|g| scale * g).collect()
    }

    /// Gradient of `ln phi`.
    pub fn ln_grad(&self, x: &[f64]) -> Vec<f64> {
        let r = self.distance(x);
        let w = -self.z(r);
        // phi'/phi = (2/sqrt(pi)) exp(-w^2) / erfc(w) * dz
        let ratio = if w > 0.0 { FRAC_2_SQRT_PI / erfcx(w) } else { FRAC_2_SQRT_PI * (-w * w).exp() / erfc(w) };
        self.z_grad(x, r).into_iter().map(|g| ratio * g).collect()
    }
}

pub fn penalizer_value(p: &PenalizerParams, x: &[f64]) -> f64 {
    p.value(x)
}

pub fn penalizer_grad(p: &PenalizerParams, x: &[f64]) -> Vec<f64> {
    p.grad(x)
}

/// Options for [`PenalizedAcquisition::maximize`].
#[derive(Debug, Clone, Copy)]
pub struct MaximizeOptions {
    /// Number of Latin-hypercube starts (penalizer centres are added on top).
    pub seeds: usize,
    /// The Latin hypercube holds `seeds * screen_factor` points; the best `seeds` are ascended.
    pub screen_factor: usize,
    pub ascent: AscentOptions,
}

impl Default for MaximizeOptions {
    fn default() -> Self {
        Self { seeds: 10, screen_factor: 25, ascent: AscentOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Maximum {
    pub x: Vec<f64>,
    /// `ln` of the penalized acquisition at `x`.
    pub log_value: f64,
}

/// `g(alpha(x)) * prod_j phi(x; x_j)`.
#[derive(Debug, Clone)]
pub struct PenalizedAcquisition<'a> {
    acq: Acquisition<'a>,
    penalizers: Vec<PenalizerParams>,
}

impl<'a> PenalizedAcquisition<'a> {
    pub fn new(acq: Acquisition<'a>) -> Self {
        Self { acq, penalizers: Vec::new() }
    }

    pub fn with_penalizers(acq: Acquisition<'a>, penalizers: Vec<PenalizerParams>) -> Self {
        Self { acq, penalizers }
    }

    pub fn push(&mut self, p: PenalizerParams) {
        self.penalizers.push(p);
    }

    pub fn penalizers(&self) -> &[PenalizerParams] {
        &self.penalizers
    }

    pub fn acquisition(&self) -> &Acquisition<'a> {
        &self.acq
    }

    fn transform(&self) -> Transform {
        self.acq.spec().transform()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.penalizers.iter().fold(self.acq.transformed(x), |acc, p| acc * p.value(x))
    }

    /// `ln` of [`Self::value`], evaluated term by term; `-inf` where the value is not positive.
    pub fn log_value(&self, x: &[f64]) -> f64 {
        let base = log_transform(self.transform(), self.acq.value(x));
        self.penalizers.iter().fold(base, |acc, p| acc + p.ln_value(x))
    }

    /// Gradient of `ln` of the penalized acquisition.
    pub fn log_grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.log_value_grad(x).map(|(_, g)| g)
    }

    pub fn log_value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (alpha, dalpha) = self.acq.value_grad(x);
        let t = self.transform();
        if t == Transform::Identity && !(alpha > 0.0) {
            return Err(Error::NonPositiveValue(alpha));
        }
        let w = log_transform_deriv(t, alpha);
        let mut value = log_transform(t, alpha);
        let mut grad: Vec<f64> = dalpha.into_iter().map(|g| w * g).collect();
        for p in &self.penalizers {
            value += p.ln_value(x);
            for (gi, pi) in grad.iter_mut().zip(p.ln_grad(x)) {
                *gi += pi;
            }
        }
        Ok((value, grad))
    }

    /// Best of several bounded gradient ascents on the log penalized acquisition.
    ///
    /// Starts are the top `seeds` points of a screened Latin hypercube followed by
    /// every penalizer centre perturbed by up to 1% of the box width. Ties go to
    /// the earliest start.
    pub fn maximize<R: Rng + ?Sized>(&self, domain: &BoxDomain, opts: &MaximizeOptions, rng: &mut R) -> Maximum {
        let seeds = opts.seeds.max(1);
        let pool = latin_hypercube(domain, seeds * opts.screen_factor.max(1), rng);
        let mut scored: Vec<(f64, usize)> = pool
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let v = self.log_value(x);
                (if v.is_nan() { f64::NEG_INFINITY } else { v }, i)
            })
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut starts: Vec<Vec<f64>> = scored.iter().take(seeds).map(|&(_, i)| pool[i].clone()).collect();
        let widths = domain.widths();
        for p in &self.penalizers {
            let mut x: Vec<f64> = p
                .center()
                .iter()
                .zip(&widths)
                .map(|(c, w)| c + 0.01 * w * (2.0 * rng.random::<f64>() - 1.0))
                .collect();
            domain.clamp(&mut x);
            starts.push(x);
        }

        let objective = |x: &[f64]| match self.log_value_grad(x) {
            Ok((v, g)) if v.is_finite() && g.iter().all(|c| c.is_finite()) => (v, g),
            _ => (f64::NEG_INFINITY, vec![0.0; x.len()]),
        };
        let mut best = Maximum { x: starts[0].clone(), log_value: f64::NEG_INFINITY };
        for start in &starts {
            let r = projected_gradient_ascent(objective, start, domain.lower(), domain.upper(), &opts.ascent);
            if r.value > best.log_value {
                best = Maximum { x: r.x, log_value: r.value };
            }
        }
        domain.clamp(&mut best.x);
        best
    }
}

pub fn penalized_value(pa: &PenalizedAcquisition<'_>, x: &[f64]) -> f64 {
    pa.value(x)
}

pub fn log_penalized_grad(pa: &PenalizedAcquisition<'_>, x: &[f64]) -> Result<Vec<f64>> {
    pa.log_grad(x)
}

pub fn maximize_penalized<R: Rng + ?Sized>(pa: &PenalizedAcquisition<'_>, domain: &BoxDomain, seeds: usize, rng: &mut R) -> Vec<f64> {
    let opts = MaximizeOptions { seeds, ..MaximizeOptions::default() };
    pa.maximize(domain, &opts, rng).x
}
