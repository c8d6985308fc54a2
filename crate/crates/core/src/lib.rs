//! Beta regression diagnostics.
//!
//! Maximum-likelihood fitting in the mean/precision parameterization,
//! standardized weighted and quantile residuals, Anderson–Darling normality
//! screening, half-normal plots with simulated envelopes, and a Monte Carlo
//! engine for comparing residuals across scenarios.

pub mod betadist;
pub mod envelope;
pub mod error;
pub mod fit;
pub mod gof;
pub mod optim;
pub mod par;
pub mod residuals;
pub mod rng;
pub mod simstudy;
pub mod specfun;

pub use betadist::{BetaParams, Link};
pub use envelope::{half_normal_envelope, residual_vs_predictor, EnvelopeData, EnvelopeOptions};
pub use error::{Error, Result};
pub use fit::{fit_mle, Dataset, FitOptions, FittedModel};
pub use gof::{anderson_darling, moment_summary, MomentSummary, AD_CRITICAL_5PCT};
pub use par::Execution;
pub use residuals::{ResidualKind, ResidualSet};
pub use simstudy::{builtin_scenario, run_study, ScenarioId, ScenarioSpec, StudySummary};
