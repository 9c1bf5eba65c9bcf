//! Batch Bayesian optimization with local penalization.
//!
//! The crate is organised bottom-up:
//!
//! * [`gp`]: exponentiated-quadratic kernel, GP regression with marginal-likelihood
//!   fitting, posterior mean/variance and the posterior over the gradient.
//! * [`acquisition`]: EI and UCB, their gradients and the positivity transforms.
//! * [`penalization`]: the erfc local penalizer and the penalized acquisition,
//!   maximized in log space.
//! * [`lipschitz`]: estimates of the incumbent `M` and of the Lipschitz constant
//!   from the gradient of the posterior mean.
//! * [`batch`]: batch strategies (local penalization, random fill, predictive
//!   fake observations) and the outer optimization loop.
//! * [`benchmarks`]: synthetic objectives and noise wrapping.
//! * [`cli`]: experiment configuration, CSV records and summaries.
//!
//! Everything maximizes internally; minimization problems are negated at the
//! boundary of [`batch::run_bbo`].

pub mod acquisition;
pub mod batch;
pub mod benchmarks;
pub mod cli;
pub mod design;
pub mod error;
pub mod gp;
pub mod lipschitz;
pub mod optimize;
pub mod penalization;
pub mod selftest;

pub use acquisition::{Acquisition, AcquisitionKind, AcquisitionSpec, Transform};
pub use batch::{
    run_bbo, BatchPlan, BatchStrategy, Goal, Objective, RunFailure, RunOptions, RunState,
    RunTrace, StrategyKind, TraceRow,
};
pub use benchmarks::{Benchmark, NoisyObjective};
pub use error::{Error, Result};
pub use gp::{BoxDomain, Dataset, GpPosterior, GradPosterior, Hyperparams};
pub use lipschitz::{LipschitzEstimate, LipschitzMode, LipschitzReport, MMode};
pub use penalization::{PenalizedAcquisition, PenalizerParams};
