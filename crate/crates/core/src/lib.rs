//! Bayesian inference and optimisation for time-series models.
//!
//! Problems pair a forward model with observations. Error measures and
//! log-densities built on a problem can be minimised by the optimisers or
//! explored by the samplers.

// `!(x > 0.0)` and friends are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod densities;
pub mod diagnostics;
mod error;
mod evaluation;
pub mod measures;
pub mod optimisers;
mod problem;
mod random;
pub mod samplers;
pub mod toys;

pub use densities::{LogPdf, LogPrior, LogPosterior};
pub use error::{Error, Result};
pub use evaluation::{FnSink, LogSink, NullSink};
pub use measures::ErrorMeasure;
pub use optimisers::{Method, Optimiser};
pub use problem::{simulate, ForwardModel, ParameterVector, TimeSeriesProblem};
pub use random::{RandomSource, GENERATOR_ID};
pub use samplers::McmcSampler;
