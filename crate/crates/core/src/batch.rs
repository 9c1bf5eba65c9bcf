//! Batch design strategies and the outer optimization loop.
//!
//! Every round refits the GP hyperparameters once, designs a batch and
//! evaluates it. The local-penalization strategy alternates between
//! maximizing `g(alpha) * prod phi_j` and adding a penalizer at the point just
//! chosen; `M` and `L` are estimated once per batch.

use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::acquisition::{Acquisition, AcquisitionSpec};
use crate::design::{latin_hypercube, uniform_point};
use crate::error::{Error, Result};
use crate::gp::{fit_gp, BoxDomain, Dataset, GpPosterior};
use crate::lipschitz::{estimate_l_global, estimate_l_local, estimate_m, maximize_mean, MMode};
use crate::penalization::{MaximizeOptions, PenalizedAcquisition, PenalizerParams, SIGMA_FLOOR};

/// Inputs closer than this to an existing input are nudged.
pub const DUPLICATE_TOL: f64 = 1e-8;
/// Size of the nudge relative to the box width.
pub const DUPLICATE_NUDGE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Goal {
    Minimize,
    Maximize,
}

impl Goal {
    /// Map an objective value into the internal maximization convention (and back).
    pub fn to_internal(self, y: f64) -> f64 {
        match self {
            Goal::Maximize => y,
            Goal::Minimize => -y,
        }
    }

    pub fn from_internal(self, v: f64) -> f64 {
        self.to_internal(v)
    }

    /// True when `a` is strictly better than `b`.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Goal::Maximize => a > b,
            Goal::Minimize => a < b,
        }
    }
}

impl FromStr for Goal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "min" | "minimize" => Ok(Goal::Minimize),
            "max" | "maximize" => Ok(Goal::Maximize),
            other => Err(Error::InvalidInput(format!("unknown goal '{other}'"))),
        }
    }
}

/// A black-box function evaluated by the loop.
pub trait Objective {
    fn evaluate(&mut self, x: &[f64]) -> std::result::Result<f64, String>;
}

impl<F> Objective for F
where
    F: FnMut(&[f64]) -> std::result::Result<f64, String>,
{
    fn evaluate(&mut self, x: &[f64]) -> std::result::Result<f64, String> {
        self(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyKind {
    Sequential,
    /// Local penalization with one global Lipschitz estimate per batch.
    Lp,
    /// Local penalization with `L_j = |grad mu(x_j)|` per penalizer.
    LpLocal,
    /// Acquisition maximizer plus uniformly random fill.
    Rand,
    /// Fake observations at the posterior mean between batch elements.
    Pred,
}

impl StrategyKind {
    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Sequential => "sequential",
            StrategyKind::Lp => "lp",
            StrategyKind::LpLocal => "lp_local",
            StrategyKind::Rand => "rand",
            StrategyKind::Pred => "pred",
        }
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sequential" | "seq" => Ok(StrategyKind::Sequential),
            "lp" => Ok(StrategyKind::Lp),
            "lp_local" | "lp-local" => Ok(StrategyKind::LpLocal),
            "rand" | "random" => Ok(StrategyKind::Rand),
            "pred" | "predictive" => Ok(StrategyKind::Pred),
            other => Err(Error::InvalidInput(format!("unknown strategy '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchStrategy {
    pub kind: StrategyKind,
    pub batch_size: usize,
    pub acquisition: AcquisitionSpec,
}

impl BatchStrategy {
    pub fn new(kind: StrategyKind, batch_size: usize, acquisition: AcquisitionSpec) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::InvalidInput("batch size must be at least 1".into()));
        }
        Ok(Self { kind, batch_size, acquisition })
    }

    /// Points proposed per model update; always 1 for the sequential strategy.
    pub fn points_per_round(&self) -> usize {
        match self.kind {
            StrategyKind::Sequential => 1,
            _ => self.batch_size,
        }
    }
}

/// Knobs of the batch design that are not part of the strategy itself.
#[derive(Debug, Clone, Copy)]
pub struct DesignSettings {
    /// Random restarts of the hyperparameter fit.
    pub restarts: usize,
    pub maximize: MaximizeOptions,
    pub m_mode: MMode,
    /// Use this Lipschitz constant instead of estimating one.
    pub lipschitz_override: Option<f64>,
}

impl Default for DesignSettings {
    fn default() -> Self {
        Self { restarts: 10, maximize: MaximizeOptions::default(), m_mode: MMode::MaxY, lipschitz_override: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchPlan {
    pub points: Vec<Vec<f64>>,
}

/// Data, fitted posterior and random state of one run.
#[derive(Debug, Clone)]
pub struct RunState {
    pub data: Dataset,
    pub gp: GpPosterior,
    pub iteration: usize,
    pub seed: u64,
    pub rng: ChaCha8Rng,
    pub settings: DesignSettings,
}

impl RunState {
    /// Fit a GP to `data` and set up the random stream.
    pub fn new(data: Dataset, seed: u64, settings: DesignSettings) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gp = fit_gp(&data, settings.restarts, &mut rng)?;
        Ok(Self { data, gp, iteration: 0, seed, rng, settings })
    }

    fn with_rng(data: Dataset, mut rng: ChaCha8Rng, seed: u64, settings: DesignSettings) -> Result<Self> {
        let gp = fit_gp(&data, settings.restarts, &mut rng)?;
        Ok(Self { data, gp, iteration: 0, seed, rng, settings })
    }

    /// Re-optimize hyperparameters on the current data.
    pub fn refit(&mut self) -> Result<()> {
        self.gp = fit_gp(&self.data, self.settings.restarts, &mut self.rng)?;
        Ok(())
    }

    pub fn propose(&mut self, strategy: &BatchStrategy) -> Result<BatchPlan> {
        match strategy.kind {
            StrategyKind::Sequential => {
                let single = BatchStrategy { batch_size: 1, ..*strategy };
                design_batch_lp(self, &single, false)
            }
            StrategyKind::Lp => design_batch_lp(self, strategy, false),
            StrategyKind::LpLocal => design_batch_lp(self, strategy, true),
            StrategyKind::Rand => design_batch_rand(self, strategy),
            StrategyKind::Pred => design_batch_pred(self, strategy),
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

/// Nudge `x` if it coincides with an existing input or earlier batch point.
fn guard_duplicate<R: Rng + ?Sized>(x: &mut [f64], data: &Dataset, batch: &[Vec<f64>], domain: &BoxDomain, rng: &mut R) {
    let tol2 = DUPLICATE_TOL * DUPLICATE_TOL;
    let clash = |x: &[f64]| data.inputs().iter().chain(batch).any(|p| sq_dist(p, x) <= tol2);
    if !clash(x) {
        return;
    }
    let widths = domain.widths();
    for (k, v) in x.iter_mut().enumerate() {
        let step = DUPLICATE_NUDGE * widths[k] * (2.0 * rng.random::<f64>() - 1.0);
        let moved = *v + step;
        *v = if moved < domain.lower()[k] || moved > domain.upper()[k] { *v - step } else { moved };
    }
    domain.clamp(x);
}

/// Local penalization: maximize, then penalize around the maximizer, `n_b` times.
pub fn design_batch_lp(state: &mut RunState, strategy: &BatchStrategy, local_lipschitz: bool) -> Result<BatchPlan> {
    let RunState { data, gp, rng, settings, .. } = state;
    let domain = data.domain().clone();
    let (_, scale) = gp.scaling();
    let mut pa = PenalizedAcquisition::new(Acquisition::new(gp, strategy.acquisition));
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(strategy.batch_size);
    let mut lm: Option<(f64, f64)> = None;
    for j in 0..strategy.batch_size {
        let mut x = pa.maximize(&domain, &settings.maximize, rng).x;
        guard_duplicate(&mut x, data, &points, &domain, rng);
        points.push(x.clone());
        if j + 1 == strategy.batch_size {
            break;
        }
        // L and M are only needed once there is something to penalize.
        let (l_global, m) = *lm.get_or_insert_with(|| {
            let l = match (settings.lipschitz_override, local_lipschitz) {
                (Some(l), _) => l,
                (None, false) => estimate_l_global(gp, rng).value,
                (None, true) => f64::NAN,
            };
            (l, estimate_m(gp, settings.m_mode, rng))
        });
        let lipschitz = match (settings.lipschitz_override, local_lipschitz) {
            (None, true) => estimate_l_local(gp, &x),
            _ => l_global,
        };
        let (mu, var) = gp.mean_var(&x);
        let sigma = var.sqrt().max(SIGMA_FLOOR * scale);
        pa.push(PenalizerParams::new(x, mu, sigma, lipschitz, m));
    }
    Ok(BatchPlan { points })
}

/// First point maximizes the acquisition, the rest are uniform on the box.
pub fn design_batch_rand(state: &mut RunState, strategy: &BatchStrategy) -> Result<BatchPlan> {
    let RunState { data, gp, rng, settings, .. } = state;
    let domain = data.domain().clone();
    let pa = PenalizedAcquisition::new(Acquisition::new(gp, strategy.acquisition));
    let mut first = pa.maximize(&domain, &settings.maximize, rng).x;
    guard_duplicate(&mut first, data, &[], &domain, rng);
    let mut points = vec![first];
    for _ in 1..strategy.batch_size {
        points.push(uniform_point(&domain, rng));
    }
    Ok(BatchPlan { points })
}

/// Maximize, condition on a fake observation equal to the posterior mean
/// (hyperparameters frozen), repeat. The state's posterior is left untouched.
pub fn design_batch_pred(state: &mut RunState, strategy: &BatchStrategy) -> Result<BatchPlan> {
    let RunState { data, gp, rng, settings, .. } = state;
    let domain = data.domain().clone();
    let incumbent = data.best_y();
    let mut fake = gp.clone();
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(strategy.batch_size);
    for j in 0..strategy.batch_size {
        let pa = PenalizedAcquisition::new(Acquisition::with_incumbent(&fake, strategy.acquisition, incumbent));
        let mut x = pa.maximize(&domain, &settings.maximize, rng).x;
        guard_duplicate(&mut x, data, &points, &domain, rng);
        points.push(x.clone());
        if j + 1 < strategy.batch_size {
            let mu = fake.mean(&x);
            fake = fake.condition_on(x, mu)?;
        }
    }
    Ok(BatchPlan { points })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub replicate: usize,
    /// 0 for the initial design, then 1-based batch rounds.
    pub iteration: usize,
    pub batch_index: usize,
    pub x: Vec<f64>,
    pub y: f64,
    pub best_so_far: f64,
    pub design_time_s: f64,
    pub eval_time_s: f64,
    pub wall_clock_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
    /// Maximizer of the final posterior mean (in the goal's sense); empty if the run failed.
    pub recommended: Vec<f64>,
    /// Posterior mean at `recommended`, in objective units.
    pub recommended_mean: f64,
}

impl RunTrace {
    pub fn best(&self) -> Option<f64> {
        self.rows.last().map(|r| r.best_so_far)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure {
    pub error: Error,
    pub partial: RunTrace,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (after {} evaluations)", self.error, self.partial.rows.len())
    }
}

impl std::error::Error for RunFailure {}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    /// Number of batch rounds.
    pub budget_iters: usize,
    pub init_size: usize,
    pub seed: u64,
    pub goal: Goal,
    pub replicate: usize,
    /// When false all timing columns are written as zero.
    pub record_timing: bool,
    pub settings: DesignSettings,
}

impl RunOptions {
    pub fn new(budget_iters: usize, init_size: usize, seed: u64, goal: Goal) -> Self {
        Self { budget_iters, init_size, seed, goal, replicate: 0, record_timing: true, settings: DesignSettings::default() }
    }
}

struct Recorder {
    goal: Goal,
    replicate: usize,
    timing: bool,
    wall: f64,
    best: Option<f64>,
    rows: Vec<TraceRow>,
}

impl Recorder {
    fn record(&mut self, iteration: usize, xs: &[Vec<f64>], ys: &[f64], design_s: f64, eval_s: &[f64]) {
        let eval_max = eval_s.iter().copied().fold(0.0, f64::max);
        let (design_s, eval_max) = if self.timing { (design_s, eval_max) } else { (0.0, 0.0) };
        self.wall += design_s + eval_max;
        for (b, (x, &y)) in xs.iter().zip(ys).enumerate() {
            if self.best.is_none_or(|best| self.goal.better(y, best)) {
                self.best = Some(y);
            }
            self.rows.push(TraceRow {
                replicate: self.replicate,
                iteration,
                batch_index: b,
                x: x.clone(),
                y,
                best_so_far: self.best.unwrap_or(y),
                design_time_s: design_s,
                eval_time_s: eval_max,
                wall_clock_s: self.wall,
            });
        }
    }

    fn fail(self, error: Error) -> RunFailure {
        RunFailure { error, partial: RunTrace { rows: self.rows, recommended: Vec::new(), recommended_mean: f64::NAN } }
    }
}

/// Evaluate a batch point by point. Evaluation time of the batch is the
/// slowest point, as if the batch ran in parallel.
fn evaluate_batch<O: Objective + ?Sized>(objective: &mut O, xs: &[Vec<f64>]) -> std::result::Result<(Vec<f64>, Vec<f64>), (usize, String)> {
    let mut ys = Vec::with_capacity(xs.len());
    let mut times = Vec::with_capacity(xs.len());
    for (i, x) in xs.iter().enumerate() {
        let t = Instant::now();
        let y = objective.evaluate(x).map_err(|e| (i, e))?;
        if !y.is_finite() {
            return Err((i, format!("non-finite value {y} at {x:?}")));
        }
        times.push(t.elapsed().as_secs_f64());
        ys.push(y);
    }
    Ok((ys, times))
}

/// Run batch Bayesian optimization on `objective` over `domain`.
///
/// Starts from a Latin hypercube of `init_size` points, then performs
/// `budget_iters` rounds of refit, batch design and evaluation. The returned
/// recommendation maximizes (or minimizes) the final posterior mean. On an
/// objective failure the rows recorded so far travel with the error.
pub fn run_bbo<O: Objective + ?Sized>(
    objective: &mut O,
    domain: &BoxDomain,
    strategy: &BatchStrategy,
    opts: &RunOptions,
) -> std::result::Result<RunTrace, RunFailure> {
    let mut rec = Recorder { goal: opts.goal, replicate: opts.replicate, timing: opts.record_timing, wall: 0.0, best: None, rows: Vec::new() };
    if opts.budget_iters == 0 || opts.init_size < 2 {
        return Err(rec.fail(Error::InvalidInput("need budget_iters >= 1 and init_size >= 2".into())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let init = latin_hypercube(domain, opts.init_size, &mut rng);
    let (ys, times) = match evaluate_batch(objective, &init) {
        Ok(v) => v,
        Err((i, e)) => {
            return Err(rec.fail(Error::ObjectiveFailure(format!("initial point {i}: {e}"))));
        }
    };
    rec.record(0, &init, &ys, 0.0, &times);
    let internal: Vec<f64> = ys.iter().map(|&y| opts.goal.to_internal(y)).collect();
    let data = match Dataset::new(init, internal, domain.clone()) {
        Ok(d) => d,
        Err(e) => return Err(rec.fail(e)),
    };

    let start = Instant::now();
    let mut state = match RunState::with_rng(data, rng, opts.seed, opts.settings) {
        Ok(s) => s,
        Err(e) => return Err(rec.fail(e)),
    };
    let mut fit_time = start.elapsed().as_secs_f64();
    for t in 1..=opts.budget_iters {
        let start = Instant::now();
        if t > 1 {
            if let Err(e) = state.refit() {
                return Err(rec.fail(e));
            }
        }
        state.iteration = t;
        let plan = match state.propose(strategy) {
            Ok(p) => p,
            Err(e) => return Err(rec.fail(e)),
        };
        let design_s = fit_time + start.elapsed().as_secs_f64();
        fit_time = 0.0;
        let (ys, times) = match evaluate_batch(objective, &plan.points) {
            Ok(v) => v,
            Err((i, e)) => return Err(rec.fail(Error::ObjectiveFailure(format!("round {t}, point {i}: {e}")))),
        };
        rec.record(t, &plan.points, &ys, design_s, &times);
        for (x, y) in plan.points.into_iter().zip(ys) {
            if let Err(e) = state.data.push(x, opts.goal.to_internal(y)) {
                return Err(rec.fail(e));
            }
        }
    }
    if let Err(e) = state.refit() {
        return Err(rec.fail(e));
    }
    let (recommended, mean) = maximize_mean(&state.gp, &mut state.rng);
    Ok(RunTrace { rows: rec.rows, recommended, recommended_mean: opts.goal.from_internal(mean) })
}
