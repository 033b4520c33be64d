//! MCMC and nested samplers.
//!
//! MCMC samplers follow the same ask-and-tell protocol as the optimisers but
//! one point at a time: `ask` returns the next proposal, `tell` takes its
//! log-density. The very first `ask` returns the starting point so its
//! density can be recorded. Nested samplers are inherently sequential and
//! drive the likelihood themselves.

mod adaptive;
mod controller;
mod metropolis;
mod nested;
mod population;

pub use adaptive::AdaptiveCovariance;
pub use controller::{McmcController, McmcMethod, McmcRecord, McmcResult};
pub use metropolis::MetropolisRandomWalk;
pub use nested::{NestedMethod, NestedResult, NestedSampler};
pub use population::PopulationMcmc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::densities::LogPdf;
use crate::error::{check_dimension, Error, Result};
use crate::problem::ParameterVector;
use crate::random::RandomSource;

pub trait McmcSampler: Send {
    fn name(&self) -> &'static str;

    fn n_parameters(&self) -> usize;

    fn ask(&mut self) -> Result<ParameterVector>;

    fn tell(&mut self, log_density: f64) -> Result<()>;

    /// Current sample and its log-density, once the start has been told.
    fn current(&self) -> Option<(&[f64], f64)>;

    /// Completed Metropolis steps, not counting the initial evaluation.
    fn iterations(&self) -> usize;

    fn acceptances(&self) -> usize;

    fn acceptance_rate(&self) -> f64 {
        match self.iterations() {
            0 => 0.0,
            n => self.acceptances() as f64 / n as f64,
        }
    }

    fn hyperparameters(&self) -> Vec<(&'static str, f64)>;

    /// One ask, evaluate, tell round against `density`.
    fn step(&mut self, density: &dyn LogPdf) -> Result<()> {
        let x = self.ask()?;
        let value = density.evaluate(&x);
        self.tell(value)
    }
}

/// Metropolis accept/reject for a log density ratio.
///
/// Always consumes exactly one uniform draw so that streams stay aligned
/// whatever the outcome. Returns the decision and the acceptance probability.
pub fn metropolis_accept(log_ratio: f64, rng: &mut RandomSource) -> (bool, f64) {
    let u: f64 = rng.random();
    let probability = if log_ratio.is_nan() { 0.0 } else { log_ratio.min(0.0).exp() };
    (u < probability, probability)
}

/// Zero-mean Gaussian increments with a fixed covariance.
#[derive(Debug, Clone)]
pub(crate) struct GaussianProposal {
    cholesky: DMatrix<f64>,
    z: Vec<f64>,
}

impl GaussianProposal {
    pub(crate) fn new(covariance: &DMatrix<f64>) -> Result<Self> {
        if !covariance.is_square() || covariance.nrows() == 0 {
            return Err(Error::contract("proposal covariance must be a non-empty square matrix"));
        }
        if covariance.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("proposal covariance must be finite"));
        }
        let cholesky = covariance
            .clone()
            .cholesky()
            .ok_or_else(|| Error::contract("proposal covariance must be positive definite"))?
            .l();
        Ok(Self {
            z: vec![0.0; cholesky.nrows()],
            cholesky,
        })
    }

    pub(crate) fn diagonal(sigma: &[f64]) -> Result<Self> {
        if sigma.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::contract("proposal widths must be positive"));
        }
        Self::new(&DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            sigma.len(),
            sigma.iter().map(|s| s * s),
        )))
    }

    pub(crate) fn dimension(&self) -> usize {
        self.z.len()
    }

    pub(crate) fn propose(&mut self, x: &[f64], rng: &mut RandomSource) -> Vec<f64> {
        for z in self.z.iter_mut() {
            *z = rng.sample(StandardNormal);
        }
        let n = self.z.len();
        (0..n)
            .map(|i| x[i] + (0..=i).map(|j| self.cholesky[(i, j)] * self.z[j]).sum::<f64>())
            .collect()
    }
}

/// Current point, cached log-density and the alternation guard for one chain.
#[derive(Debug, Clone)]
pub(crate) struct Chain {
    current: Vec<f64>,
    log_density: f64,
    pending: Option<Vec<f64>>,
    started: bool,
    iterations: usize,
    acceptances: usize,
}

impl Chain {
    pub(crate) fn new(x0: Vec<f64>) -> Result<Self> {
        if x0.is_empty() {
            return Err(Error::contract("starting point is empty"));
        }
        ParameterVector::new(x0.clone())?;
        Ok(Self {
            current: x0,
            log_density: f64::NEG_INFINITY,
            pending: None,
            started: false,
            iterations: 0,
            acceptances: 0,
        })
    }

    /// Next point to evaluate: the start on the first call, a proposal after.
    pub(crate) fn ask(&mut self, proposal: &mut GaussianProposal, rng: &mut RandomSource) -> Result<ParameterVector> {
        if self.pending.is_some() {
            return Err(Error::contract("ask() called twice without tell()"));
        }
        check_dimension(self.current.len(), proposal.dimension())?;
        let x = if self.started {
            proposal.propose(&self.current, rng)
        } else {
            self.current.clone()
        };
        self.pending = Some(x.clone());
        ParameterVector::new(x)
    }

    /// Records the pending point's density. Returns the acceptance
    /// probability of the step, or `None` for the initial evaluation.
    pub(crate) fn tell(&mut self, log_density: f64, rng: &mut RandomSource) -> Result<Option<f64>> {
        let Some(x) = self.pending.take() else {
            return Err(Error::contract("tell() called without a preceding ask()"));
        };
        let log_density = if log_density.is_nan() { f64::NEG_INFINITY } else { log_density };
        if !self.started {
            if log_density == f64::NEG_INFINITY {
                self.pending = Some(x);
                return Err(Error::contract("starting point has zero density"));
            }
            self.log_density = log_density;
            self.started = true;
            return Ok(None);
        }
        let (accept, probability) = metropolis_accept(log_density - self.log_density, rng);
        if accept {
            self.current = x;
            self.log_density = log_density;
            self.acceptances += 1;
        }
        self.iterations += 1;
        Ok(Some(probability))
    }

    pub(crate) fn point(&self) -> &[f64] {
        &self.current
    }

    pub(crate) fn current(&self) -> Option<(&[f64], f64)> {
        self.started.then_some((self.current.as_slice(), self.log_density))
    }

    pub(crate) fn iterations(&self) -> usize {
        self.iterations
    }

    pub(crate) fn acceptances(&self) -> usize {
        self.acceptances
    }
}
