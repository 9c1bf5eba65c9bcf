//! Synthetic test objectives and Gaussian observation noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::batch::{Goal, Objective};
use crate::error::{Error, Result};
use crate::gp::BoxDomain;

/// `prod_i (|4 x_i - 2| + a_i) / (1 + a_i)`.
pub fn gsobol(x: &[f64], a: &[f64]) -> f64 {
    x.iter().zip(a).map(|(&xi, &ai)| ((4.0 * xi - 2.0).abs() + ai) / (1.0 + ai)).product()
}

fn gsobol_unit_a(x: &[f64]) -> f64 {
    x.iter().map(|&xi| ((4.0 * xi - 2.0).abs() + 1.0) / 2.0).product()
}

/// `1 - sum_i ((1.6 x_i - 0.5)^2 - 0.3 cos(3 pi (1.6 x_i - 0.5)))`.
pub fn cosines(x: &[f64]) -> f64 {
    1.0 - x
        .iter()
        .map(|&xi| {
            let u = 1.6 * xi - 0.5;
            u * u - 0.3 * (3.0 * std::f64::consts::PI * u).cos()
        })
        .sum::<f64>()
}

/// Analytic gradient of [`cosines`].
pub fn cosines_grad(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&xi| {
            let u = 1.6 * xi - 0.5;
            -1.6 * (2.0 * u + 0.9 * std::f64::consts::PI * (3.0 * std::f64::consts::PI * u).sin())
        })
        .collect()
}

/// `(6x - 2)^2 sin(12x - 4)`.
pub fn forrester(x: f64) -> f64 {
    (6.0 * x - 2.0).powi(2) * (12.0 * x - 4.0).sin()
}

fn forrester_vec(x: &[f64]) -> f64 {
    forrester(x[0])
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnownOptimum {
    pub location: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct Benchmark {
    name: &'static str,
    domain: BoxDomain,
    goal: Goal,
    known_opt: Option<KnownOptimum>,
    f: fn(&[f64]) -> f64,
}

impl Benchmark {
    /// gSobol with `a_i = 1` on `[-5, 5]^d`; minimum `2^-d` at `x_i = 0.5`.
    pub fn gsobol(d: usize) -> Result<Self> {
        Ok(Self {
            name: "gsobol",
            domain: BoxDomain::cube(d, -5.0, 5.0)?,
            goal: Goal::Minimize,
            known_opt: Some(KnownOptimum { location: vec![0.5; d], value: 0.5f64.powi(d as i32) }),
            f: gsobol_unit_a,
        })
    }

    /// Cosines on `[0, 1]^2`; maximum 1.6 at `(0.3125, 0.3125)`.
    pub fn cosines() -> Self {
        Self {
            name: "cosines",
            domain: BoxDomain::cube(2, 0.0, 1.0).expect("static bounds"),
            goal: Goal::Maximize,
            known_opt: Some(KnownOptimum { location: vec![0.3125, 0.3125], value: 1.6 }),
            f: cosines,
        }
    }

    /// Forrester on `[0, 1]`; minimum about -6.0207 near 0.7572.
    pub fn forrester() -> Self {
        Self {
            name: "forrester",
            domain: BoxDomain::cube(1, 0.0, 1.0).expect("static bounds"),
            goal: Goal::Minimize,
            known_opt: Some(KnownOptimum { location: vec![0.757_249], value: -6.020_740 }),
            f: forrester_vec,
        }
    }

    /// Look a benchmark up by name. `dimension` is only free for gSobol.
    pub fn by_name(name: &str, dimension: Option<usize>) -> Result<Self> {
        let fixed = |b: Self| match dimension {
            Some(d) if d != b.dim() => Err(Error::InvalidInput(format!("{} has dimension {}, not {d}", b.name, b.dim()))),
            _ => Ok(b),
        };
        match name.to_ascii_lowercase().as_str() {
            "gsobol" => match dimension {
                Some(0) => Err(Error::InvalidInput("gsobol needs dimension >= 1".into())),
                d => Self::gsobol(d.unwrap_or(2)),
            },
            "cosines" => fixed(Self::cosines()),
            "forrester" => fixed(Self::forrester()),
            other => Err(Error::InvalidInput(format!("unknown benchmark '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn goal(&self) -> Goal {
        self.goal
    }

    pub fn known_opt(&self) -> Option<&KnownOptimum> {
        self.known_opt.as_ref()
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    pub fn function(&self) -> fn(&[f64]) -> f64 {
        self.f
    }

    pub fn with_noise(&self, sigma: f64, seed: u64) -> Result<NoisyObjective> {
        NoisyObjective::new(self.clone(), sigma, seed)
    }
}

impl Objective for Benchmark {
    fn evaluate(&mut self, x: &[f64]) -> std::result::Result<f64, String> {
        Ok((self.f)(x))
    }
}

/// A benchmark with i.i.d. `N(0, sigma^2)` noise added to every evaluation.
/// The noise stream depends only on the seed and the call order.
#[derive(Debug, Clone)]
pub struct NoisyObjective {
    benchmark: Benchmark,
    sigma: f64,
    noise: Normal<f64>,
    rng: ChaCha8Rng,
}

impl NoisyObjective {
    pub fn new(benchmark: Benchmark, sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidInput(format!("noise sigma must be finite and >= 0, got {sigma}")));
        }
        let noise = Normal::new(0.0, sigma).map_err(|e| Error::InvalidInput(e.to_string()))?;
        Ok(Self { benchmark, sigma, noise, rng: ChaCha8Rng::seed_from_u64(seed) })
    }

    pub fn benchmark(&self) -> &Benchmark {
        &self.benchmark
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn sample(&mut self, x: &[f64]) -> f64 {
        let f = self.benchmark.evaluate(x);
        if self.sigma == 0.0 {
            f
        } else {
            f + self.noise.sample(&mut self.rng)
        }
    }
}

impl Objective for NoisyObjective {
    fn evaluate(&mut self, x: &[f64]) -> std::result::Result<f64, String> {
        Ok(self.sample(x))
    }
}
