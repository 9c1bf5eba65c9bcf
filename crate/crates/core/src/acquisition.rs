//! Expected improvement and upper confidence bound, written for maximization,
//! and the monotone transforms that make an acquisition strictly positive.

use libm::erfc;

use crate::error::{Error, Result};
use crate::gp::GpPosterior;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Standard normal density.
pub fn norm_pdf(u: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * u * u).exp()
}

/// Standard normal distribution function.
pub fn norm_cdf(u: f64) -> f64 {
    0.5 * erfc(-u / SQRT_2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AcquisitionKind {
    Ei,
    Ucb { kappa: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    Identity,
    Softplus,
    Exp,
}

impl std::str::FromStr for Transform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "identity" | "none" => Ok(Self::Identity),
            "softplus" => Ok(Self::Softplus),
            "exp" => Ok(Self::Exp),
            other => Err(Error::InvalidInput(format!("unknown transform '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcquisitionSpec {
    kind: AcquisitionKind,
    transform: Transform,
}

impl AcquisitionSpec {
    /// EI with the identity transform.
    pub fn ei() -> Self {
        Self { kind: AcquisitionKind::Ei, transform: Transform::Identity }
    }

    /// UCB with the softplus transform.
    pub fn ucb(kappa: f64) -> Result<Self> {
        if !(kappa >= 0.0) {
            return Err(Error::InvalidInput(format!("kappa must be non-negative, got {kappa}")));
        }
        Ok(Self { kind: AcquisitionKind::Ucb { kappa }, transform: Transform::Softplus })
    }

    /// Override the transform. Identity is only allowed for EI, which is never negative.
    pub fn with_transform(self, transform: Transform) -> Result<Self> {
        if transform == Transform::Identity && self.kind != AcquisitionKind::Ei {
            return Err(Error::InvalidInput("identity transform requires a non-negative acquisition (EI)".into()));
        }
        Ok(Self { transform, ..self })
    }

    pub fn kind(&self) -> AcquisitionKind {
        self.kind
    }

    pub fn transform(&self) -> Transform {
        self.transform
    }
}

/// Expected improvement over `y_best` for a maximization problem.
pub fn ei(mu: f64, sigma: f64, y_best: f64) -> f64 {
    if sigma <= 0.0 {
        return (mu - y_best).max(0.0);
    }
    let u = (mu - y_best) / sigma;
    (sigma * (u * norm_cdf(u) + norm_pdf(u))).max(0.0)
}

pub fn ucb(mu: f64, sigma: f64, kappa: f64) -> f64 {
    mu + kappa * sigma
}

pub fn transform(kind: Transform, z: f64) -> f64 {
    match kind {
        Transform::Identity => z,
        Transform::Softplus => {
            if z > 30.0 {
                z + (-z).exp()
            } else {
                z.exp().ln_1p()
            }
        }
        Transform::Exp => z.exp(),
    }
}

pub fn transform_deriv(kind: Transform, z: f64) -> f64 {
    match kind {
        Transform::Identity => 1.0,
        Transform::Softplus => sigmoid(z),
        Transform::Exp => z.exp(),
    }
}

/// `ln g(z)`, stable where `g(z)` would under- or overflow. `-inf` when `g(z) <= 0`.
pub fn log_transform(kind: Transform, z: f64) -> f64 {
    match kind {
        Transform::Identity => {
            if z > 0.0 {
                z.ln()
            } else {
                f64::NEG_INFINITY
            }
        }
        Transform::Softplus => {
            if z < -30.0 {
                // ln(ln(1 + e^z)) = z + ln(1 - e^z / 2 + ...)
                z - 0.5 * z.exp()
            } else {
                transform(Transform::Softplus, z).ln()
            }
        }
        Transform::Exp => z,
    }
}

/// `g'(z) / g(z)`.
pub fn log_transform_deriv(kind: Transform, z: f64) -> f64 {
    match kind {
        Transform::Identity => 1.0 / z,
        Transform::Softplus => {
            if z < -30.0 {
                1.0 - 0.5 * z.exp()
            } else {
                sigmoid(z) / transform(Transform::Softplus, z)
            }
        }
        Transform::Exp => 1.0,
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// An acquisition bound to a posterior and an incumbent.
///
/// Values and gradients are reported in the posterior's standardized target
/// units, `(y - offset) / scale`, so that the positivity transform sees
/// inputs of order one whatever the range of the objective. This rescales EI
/// and shifts and rescales UCB, leaving every argmax unchanged.
#[derive(Debug, Clone, Copy)]
pub struct Acquisition<'a> {
    gp: &'a GpPosterior,
    spec: AcquisitionSpec,
    y_best: f64,
}

impl<'a> Acquisition<'a> {
    /// Incumbent taken as the best observed target of the posterior's dataset.
    pub fn new(gp: &'a GpPosterior, spec: AcquisitionSpec) -> Self {
        Self { gp, spec, y_best: gp.dataset().best_y() }
    }

    pub fn with_incumbent(gp: &'a GpPosterior, spec: AcquisitionSpec, y_best: f64) -> Self {
        Self { gp, spec, y_best }
    }

    pub fn gp(&self) -> &'a GpPosterior {
        self.gp
    }

    pub fn spec(&self) -> AcquisitionSpec {
        self.spec
    }

    pub fn incumbent(&self) -> f64 {
        self.y_best
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let (mu, var) = self.gp.mean_var(x);
        self.from_moments(mu, var.sqrt())
    }

    /// Acquisition from raw-unit moments, returned in standardized units.
    fn from_moments(&self, mu: f64, sigma: f64) -> f64 {
        let (offset, scale) = self.gp.scaling();
        match self.spec.kind {
            AcquisitionKind::Ei => ei(mu, sigma, self.y_best) / scale,
            AcquisitionKind::Ucb { kappa } => (ucb(mu, sigma, kappa) - offset) / scale,
        }
    }

    /// Acquisition value and its gradient with respect to `x`.
    pub fn value_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let p = self.gp.predict(x);
        let sigma = p.std();
        let dsigma = p.std_grad();
        let value = self.from_moments(p.mean, sigma);
        let (wm, ws) = match self.spec.kind {
            AcquisitionKind::Ucb { kappa } => (1.0, kappa),
            AcquisitionKind::Ei => {
                if sigma <= 0.0 {
                    (if p.mean > self.y_best { 1.0 } else { 0.0 }, 0.0)
                } else {
                    let u = (p.mean - self.y_best) / sigma;
                    (norm_cdf(u), norm_pdf(u))
                }
            }
        };
        let scale = self.gp.scaling().1;
        let grad = p.mean_grad.iter().zip(&dsigma).map(|(m, s)| (wm * m + ws * s) / scale).collect();
        (value, grad)
    }

    /// `g(alpha(x))`.
    pub fn transformed(&self, x: &[f64]) -> f64 {
        transform(self.spec.transform, self.value(x))
    }
}

pub fn acquisition_grad(gp: &GpPosterior, spec: AcquisitionSpec, x: &[f64]) -> Vec<f64> {
    Acquisition::new(gp, spec).value_grad(x).1
}
