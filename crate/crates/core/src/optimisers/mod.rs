//! Derivative-free optimisers behind an ask-and-tell interface.
//!
//! Every method minimises. `ask` hands out a population of points, the
//! caller scores them however it likes, and `tell` feeds the scores back in
//! the same order. Calls must alternate; anything else is rejected.

mod cmaes;
mod controller;
mod convenience;
mod pso;
mod snes;
mod xnes;

pub use cmaes::Cmaes;
pub use controller::{
    Objective, OptimisationController, OptimisationRecord, OptimisationResult, RunMetadata, StopReason,
    StoppingCriteria,
};
pub use convenience::{curve_fit, fmin};
pub use pso::Pso;
pub use snes::Snes;
pub use xnes::Xnes;

use std::fmt;
use std::str::FromStr;

use crate::error::{check_dimension, Error, Result};
use crate::problem::ParameterVector;
use crate::random::RandomSource;

pub trait Optimiser: Send {
    fn name(&self) -> &'static str;

    fn n_parameters(&self) -> usize;

    fn population_size(&self) -> usize;

    fn ask(&mut self) -> Result<Vec<ParameterVector>>;

    fn tell(&mut self, scores: &[f64]) -> Result<()>;

    /// Best point and score seen so far, once at least one `tell` happened.
    fn best(&self) -> Option<(&[f64], f64)>;

    /// Number of completed ask/tell rounds.
    fn iterations(&self) -> usize;

    fn hyperparameters(&self) -> Vec<(&'static str, f64)>;
}

/// Shipped optimisation methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Cmaes,
    Xnes,
    Snes,
    Pso,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Cmaes, Method::Xnes, Method::Snes, Method::Pso];

    pub fn name(self) -> &'static str {
        match self {
            Method::Cmaes => "cmaes",
            Method::Xnes => "xnes",
            Method::Snes => "snes",
            Method::Pso => "pso",
        }
    }

    /// Builds a fresh optimiser centred at `x0` with per-coordinate spread `sigma0`.
    pub fn build(
        self,
        x0: &[f64],
        sigma0: &[f64],
        population_size: Option<usize>,
        rng: RandomSource,
    ) -> Result<Box<dyn Optimiser>> {
        Ok(match self {
            Method::Cmaes => Box::new(Cmaes::new(x0, sigma0, population_size, rng)?),
            Method::Xnes => Box::new(Xnes::new(x0, sigma0, population_size, rng)?),
            Method::Snes => Box::new(Snes::new(x0, sigma0, population_size, rng)?),
            Method::Pso => Box::new(Pso::new(x0, sigma0, population_size, rng)?),
        })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "cmaes" => Ok(Method::Cmaes),
            "xnes" => Ok(Method::Xnes),
            "snes" => Ok(Method::Snes),
            "pso" => Ok(Method::Pso),
            _ => Err(Error::contract(format!("unknown optimiser '{s}'"))),
        }
    }
}

/// `4 + floor(3 ln n)`, the usual evolution-strategy population.
pub fn default_population_size(n: usize) -> usize {
    4 + (3.0 * (n as f64).ln()).floor() as usize
}

/// `10 + floor(2 sqrt n)` particles.
pub fn default_swarm_size(n: usize) -> usize {
    10 + (2.0 * (n as f64).sqrt()).floor() as usize
}

pub(crate) fn validate_start(x0: &[f64], sigma0: &[f64]) -> Result<()> {
    if x0.is_empty() {
        return Err(Error::contract("starting point is empty"));
    }
    check_dimension(x0.len(), sigma0.len())?;
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::contract("starting point must be finite"));
    }
    if sigma0.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::contract("initial spread must be positive"));
    }
    Ok(())
}

/// Indices of `scores` from best to worst. NaN counts as `+inf`; ties keep
/// proposal order.
pub(crate) fn rank_order(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| sanitise(scores[a]).total_cmp(&sanitise(scores[b])));
    idx
}

pub(crate) fn sanitise(score: f64) -> f64 {
    if score.is_nan() {
        f64::INFINITY
    } else {
        score
    }
}

/// Log-rank utilities shared by xNES and SNES, indexed by rank.
pub(crate) fn rank_utilities(lambda: usize) -> Vec<f64> {
    let l = lambda as f64;
    let raw: Vec<f64> = (1..=lambda)
        .map(|i| ((l / 2.0 + 1.0).ln() - (i as f64).ln()).max(0.0))
        .collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|u| u / total - 1.0 / l).collect()
}

/// Utility of each sample in draw order. Tied scores share the mean utility
/// of the ranks they occupy, so a fully tied population moves nothing.
pub(crate) fn sample_utilities(utilities: &[f64], scores: &[f64]) -> Vec<f64> {
    let order = rank_order(scores);
    let mut out = vec![0.0; scores.len()];
    let mut start = 0;
    while start < order.len() {
        let key = sanitise(scores[order[start]]);
        let mut end = start + 1;
        while end < order.len() && sanitise(scores[order[end]]) == key {
            end += 1;
        }
        let shared = utilities[start..end].iter().sum::<f64>() / (end - start) as f64;
        for &i in &order[start..end] {
            out[i] = shared;
        }
        start = end;
    }
    out
}

/// Alternation guard and best-so-far bookkeeping common to all methods.
#[derive(Debug, Clone)]
pub(crate) struct AskTell {
    pending: Option<Vec<ParameterVector>>,
    best: Option<(Vec<f64>, f64)>,
    iterations: usize,
}

impl AskTell {
    pub(crate) fn new() -> Self {
        Self {
            pending: None,
            best: None,
            iterations: 0,
        }
    }

    pub(crate) fn check_ask(&self) -> Result<()> {
        if self.pending.is_some() {
            return Err(Error::contract("ask() called twice without tell()"));
        }
        Ok(())
    }

    pub(crate) fn asked(&mut self, points: Vec<ParameterVector>) -> Vec<ParameterVector> {
        self.pending = Some(points.clone());
        points
    }

    /// Consumes the pending population and records any strict improvement.
    pub(crate) fn take(&mut self, scores: &[f64]) -> Result<(Vec<ParameterVector>, Vec<f64>)> {
        let Some(points) = self.pending.as_ref() else {
            return Err(Error::contract("tell() called without a preceding ask()"));
        };
        if points.len() != scores.len() {
            return Err(Error::contract(format!(
                "tell() received {} scores for {} points",
                scores.len(),
                points.len()
            )));
        }
        let points = self.pending.take().unwrap();
        let scores: Vec<f64> = scores.iter().copied().map(sanitise).collect();
        for (x, &s) in points.iter().zip(&scores) {
            if self.best.as_ref().is_none_or(|(_, b)| s < *b) {
                self.best = Some((x.to_vec(), s));
            }
        }
        self.iterations += 1;
        Ok((points, scores))
    }

    pub(crate) fn best(&self) -> Option<(&[f64], f64)> {
        self.best.as_ref().map(|(x, s)| (x.as_slice(), *s))
    }

    pub(crate) fn iterations(&self) -> usize {
        self.iterations
    }
}
