//! Forward models and the time-series problems built on top of them.

use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{check_dimension, Error, Result};

/// A point in parameter space, guaranteed finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector(Vec<f64>);

impl ParameterVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::contract(format!(
                "parameter {i} is not finite ({})",
                values[i]
            )));
        }
        Ok(Self(values))
    }

    /// Wraps values produced internally by a method; callers guarantee finiteness.
    pub(crate) fn from_finite(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ParameterVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<ParameterVector> for Vec<f64> {
    fn from(p: ParameterVector) -> Self {
        p.0
    }
}

/// User-supplied simulator.
///
/// `simulate` must be deterministic and return one row per requested time
/// and `n_outputs()` columns. Models are invoked from worker threads unless
/// they report themselves as serial.
pub trait ForwardModel: Send + Sync {
    fn n_parameters(&self) -> usize;

    fn n_outputs(&self) -> usize {
        1
    }

    fn simulate(&self, parameters: &[f64], times: &[f64]) -> Result<DMatrix<f64>>;

    /// True if the model cannot be evaluated from several threads at once.
    fn is_serial(&self) -> bool {
        false
    }
}

/// Runs `model` with dimension and shape checks on both sides of the call.
pub fn simulate(model: &dyn ForwardModel, parameters: &[f64], times: &[f64]) -> Result<DMatrix<f64>> {
    check_dimension(model.n_parameters(), parameters.len())?;
    let out = model.simulate(parameters, times)?;
    if out.nrows() != times.len() || out.ncols() != model.n_outputs() {
        return Err(Error::Evaluation {
            parameters: parameters.to_vec(),
            reason: format!(
                "model returned a {}x{} matrix, expected {}x{}",
                out.nrows(),
                out.ncols(),
                times.len(),
                model.n_outputs()
            ),
        });
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Evaluation {
            parameters: parameters.to_vec(),
            reason: "model output is not finite".into(),
        });
    }
    Ok(out)
}

/// A forward model paired with sampling times and observed values.
#[derive(Clone)]
pub struct TimeSeriesProblem {
    model: Arc<dyn ForwardModel>,
    times: Vec<f64>,
    observations: DMatrix<f64>,
    true_parameters: Option<Vec<f64>>,
}

impl fmt::Debug for TimeSeriesProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TimeSeriesProblem")
            .field("n_parameters", &self.n_parameters())
            .field("n_outputs", &self.n_outputs())
            .field("n_times", &self.times.len())
            .finish()
    }
}

impl TimeSeriesProblem {
    /// Validates times and observations once, up front.
    pub fn new(
        model: Arc<dyn ForwardModel>,
        times: Vec<f64>,
        observations: DMatrix<f64>,
    ) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidProblem("no sampling times".into()));
        }
        if let Some(i) = times.iter().position(|t| !t.is_finite()) {
            return Err(Error::InvalidProblem(format!("time {i} is not finite")));
        }
        if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidProblem(format!(
                "times must be strictly increasing (index {})",
                i + 1
            )));
        }
        if observations.nrows() != times.len() {
            return Err(Error::InvalidProblem(format!(
                "{} observation rows for {} times",
                observations.nrows(),
                times.len()
            )));
        }
        if observations.ncols() != model.n_outputs() {
            return Err(Error::InvalidProblem(format!(
                "{} observation columns for a model with {} outputs",
                observations.ncols(),
                model.n_outputs()
            )));
        }
        if observations.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidProblem("observations contain NaN or infinity".into()));
        }
        Ok(Self {
            model,
            times,
            observations,
            true_parameters: None,
        })
    }

    /// Convenience constructor for single-output data.
    pub fn single_output(model: Arc<dyn ForwardModel>, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Self::new(model, times, DMatrix::from_vec(n, 1, values))
    }

    pub fn with_true_parameters(mut self, parameters: Vec<f64>) -> Self {
        self.true_parameters = Some(parameters);
        self
    }

    /// Parameters the data were generated from, when known.
    pub fn true_parameters(&self) -> Option<&[f64]> {
        self.true_parameters.as_deref()
    }

    pub fn model(&self) -> &Arc<dyn ForwardModel> {
        &self.model
    }

    pub fn n_parameters(&self) -> usize {
        self.model.n_parameters()
    }

    pub fn n_outputs(&self) -> usize {
        self.model.n_outputs()
    }

    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn observations(&self) -> &DMatrix<f64> {
        &self.observations
    }

    pub fn is_serial(&self) -> bool {
        self.model.is_serial()
    }

    pub fn simulate(&self, parameters: &[f64]) -> Result<DMatrix<f64>> {
        simulate(self.model.as_ref(), parameters, &self.times)
    }

    /// Simulated minus observed values, same shape as the observations.
    pub fn residuals(&self, parameters: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.simulate(parameters)? - &self.observations)
    }
}
