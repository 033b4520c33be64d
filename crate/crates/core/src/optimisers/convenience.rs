//! One-call wrappers for optimising plain functions.

use super::{Method, Objective, OptimisationController, StoppingCriteria};
use crate::error::{check_dimension, Result};
use crate::evaluation::NullSink;
use crate::measures::FunctionError;

/// Minimises `f` from `x0`, returning the best point and its score.
pub fn fmin<F>(
    f: F,
    x0: &[f64],
    sigma0: &[f64],
    method: Method,
    criteria: StoppingCriteria,
    seed: u64,
) -> Result<(Vec<f64>, f64)>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    let measure = FunctionError::new(x0.len(), f);
    let r = OptimisationController::new(Objective::Minimise(&measure), x0.to_vec())
        .sigma0(sigma0.to_vec())
        .method(method)
        .criteria(criteria)
        .seed(seed)
        .run(&mut NullSink)?;
    Ok((r.best, r.best_score))
}

/// Least-squares fit of `model(times, params)` to `observations`.
///
/// Returns the best parameters and their sum of squared residuals.
#[allow(clippy::too_many_arguments)]
pub fn curve_fit<F>(
    model: F,
    times: &[f64],
    observations: &[f64],
    x0: &[f64],
    sigma0: &[f64],
    method: Method,
    criteria: StoppingCriteria,
    seed: u64,
) -> Result<(Vec<f64>, f64)>
where
    F: Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync,
{
    check_dimension(times.len(), observations.len())?;
    let sse = |p: &[f64]| {
        let predicted = model(times, p);
        if predicted.len() != observations.len() {
            return f64::INFINITY;
        }
        predicted.iter().zip(observations).map(|(y, o)| (y - o).powi(2)).sum()
    };
    fmin(sse, x0, sigma0, method, criteria, seed)
}
