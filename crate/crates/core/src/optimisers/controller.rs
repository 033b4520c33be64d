use std::time::Instant;

use super::{sanitise, Method};
use crate::densities::LogPdf;
use crate::error::{check_dimension, Error, Result};
use crate::evaluation::{Evaluator, LogSink};
use crate::measures::ErrorMeasure;
use crate::random::{RandomSource, GENERATOR_ID};

/// What the controller optimises. Log-densities are maximised by minimising
/// their negation; the methods themselves only ever minimise.
#[derive(Clone, Copy)]
pub enum Objective<'a> {
    Minimise(&'a dyn ErrorMeasure),
    Maximise(&'a dyn LogPdf),
}

impl Objective<'_> {
    pub fn n_parameters(&self) -> usize {
        match self {
            Objective::Minimise(f) => f.n_parameters(),
            Objective::Maximise(f) => f.n_parameters(),
        }
    }

    fn is_serial(&self) -> bool {
        match self {
            Objective::Minimise(f) => f.is_serial(),
            Objective::Maximise(f) => f.is_serial(),
        }
    }

    /// Score in minimisation convention; failures and NaN map to `+inf`.
    pub fn score(&self, x: &[f64]) -> f64 {
        sanitise(match self {
            Objective::Minimise(f) => f.evaluate(x),
            Objective::Maximise(f) => -f.evaluate(x),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoppingCriteria {
    pub max_iterations: Option<usize>,
    /// Stop after `count` iterations without an improvement larger than `threshold`.
    pub max_unchanged: Option<(usize, f64)>,
    /// Stop once the best score drops below this value.
    pub target_score: Option<f64>,
}

impl StoppingCriteria {
    pub fn iterations(n: usize) -> Self {
        Self {
            max_iterations: Some(n),
            max_unchanged: None,
            target_score: None,
        }
    }

    pub fn unchanged(count: usize, threshold: f64) -> Self {
        Self {
            max_iterations: None,
            max_unchanged: Some((count, threshold)),
            target_score: None,
        }
    }

    pub fn with_max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = Some(n);
        self
    }

    pub fn with_unchanged(mut self, count: usize, threshold: f64) -> Self {
        self.max_unchanged = Some((count, threshold));
        self
    }

    pub fn with_target(mut self, target: f64) -> Self {
        self.target_score = Some(target);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.max_iterations.is_none() && self.max_unchanged.is_none() && self.target_score.is_none() {
            return Err(Error::contract("at least one stopping criterion must be set"));
        }
        if let Some((count, threshold)) = self.max_unchanged {
            if count == 0 || !(threshold >= 0.0) {
                return Err(Error::contract("unchanged criterion needs a positive count and a non-negative threshold"));
            }
        }
        Ok(())
    }
}

impl Default for StoppingCriteria {
    fn default() -> Self {
        Self::iterations(10_000).with_unchanged(200, 1e-11)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxIterations,
    Unchanged,
    TargetReached,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::MaxIterations => "max_iterations",
            StopReason::Unchanged => "unchanged",
            StopReason::TargetReached => "target_score",
        }
    }
}

/// One line of the iteration log.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimisationRecord {
    pub iteration: usize,
    pub evaluations: usize,
    pub best_score: f64,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetadata {
    pub method: String,
    pub seed: u64,
    pub generator: &'static str,
    pub workers: usize,
    pub hyperparameters: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimisationResult {
    pub best: Vec<f64>,
    /// Best score in minimisation convention.
    pub best_score: f64,
    pub maximised: bool,
    pub iterations: usize,
    pub evaluations: usize,
    pub stop_reason: StopReason,
    pub log: Vec<OptimisationRecord>,
    pub metadata: RunMetadata,
}

impl OptimisationResult {
    /// Best value of the original objective (the log-density when maximising).
    pub fn objective_value(&self) -> f64 {
        if self.maximised {
            -self.best_score
        } else {
            self.best_score
        }
    }
}

/// Runs ask → evaluate → tell until a stopping criterion fires.
///
/// The starting point is always evaluated once and seeds the best-so-far,
/// so a zero-iteration budget returns `x0` with its score.
pub struct OptimisationController<'a> {
    objective: Objective<'a>,
    x0: Vec<f64>,
    sigma0: Option<Vec<f64>>,
    method: Method,
    criteria: StoppingCriteria,
    workers: usize,
    seed: u64,
    population_size: Option<usize>,
}

impl<'a> OptimisationController<'a> {
    pub fn new(objective: Objective<'a>, x0: Vec<f64>) -> Self {
        Self {
            objective,
            x0,
            sigma0: None,
            method: Method::Cmaes,
            criteria: StoppingCriteria::default(),
            workers: 1,
            seed: 0,
            population_size: None,
        }
    }

    pub fn method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn sigma0(mut self, sigma0: Vec<f64>) -> Self {
        self.sigma0 = Some(sigma0);
        self
    }

    pub fn sigma0_scalar(mut self, sigma0: f64) -> Self {
        self.sigma0 = Some(vec![sigma0; self.x0.len()]);
        self
    }

    pub fn criteria(mut self, criteria: StoppingCriteria) -> Self {
        self.criteria = criteria;
        self
    }

    pub fn workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn population_size(mut self, size: usize) -> Self {
        self.population_size = Some(size);
        self
    }

    pub fn run(&self, sink: &mut dyn LogSink<OptimisationRecord>) -> Result<OptimisationResult> {
        self.criteria.validate()?;
        check_dimension(self.objective.n_parameters(), self.x0.len())?;
        // default spread: a tenth of each coordinate's magnitude, at least 0.1
        let sigma0 = self
            .sigma0
            .clone()
            .unwrap_or_else(|| self.x0.iter().map(|x| 0.1 * x.abs().max(1.0)).collect());
        let mut optimiser = self
            .method
            .build(&self.x0, &sigma0, self.population_size, RandomSource::new(self.seed))?;
        let evaluator = Evaluator::new(self.workers, self.objective.is_serial())?;
        let objective = self.objective;
        let started = Instant::now();

        let mut best = self.x0.clone();
        let mut best_score = objective.score(&self.x0);
        let mut evaluations = 1;
        let mut iteration = 0;
        let mut log = Vec::new();
        let mut unchanged_reference = best_score;
        let mut unchanged_count = 0;

        let stop_reason = loop {
            if self.criteria.max_iterations.is_some_and(|m| iteration >= m) {
                break StopReason::MaxIterations;
            }
            let points = optimiser.ask()?;
            let scores = evaluator.map(&points, |x| objective.score(x));
            evaluations += scores.len();
            optimiser.tell(&scores)?;
            iteration += 1;

            if let Some((x, s)) = optimiser.best() {
                if s < best_score {
                    best_score = s;
                    best = x.to_vec();
                }
            }
            if let Some((_, threshold)) = self.criteria.max_unchanged {
                if best_score < unchanged_reference - threshold {
                    unchanged_reference = best_score;
                    unchanged_count = 0;
                } else {
                    unchanged_count += 1;
                }
            }

            let record = OptimisationRecord {
                iteration,
                evaluations,
                best_score,
                elapsed_seconds: started.elapsed().as_secs_f64(),
            };
            sink.record(&record);
            log.push(record);

            if self.criteria.target_score.is_some_and(|t| best_score < t) {
                break StopReason::TargetReached;
            }
            if self.criteria.max_unchanged.is_some_and(|(k, _)| unchanged_count >= k) {
                break StopReason::Unchanged;
            }
        };

        Ok(OptimisationResult {
            best,
            best_score,
            maximised: matches!(self.objective, Objective::Maximise(_)),
            iterations: iteration,
            evaluations,
            stop_reason,
            log,
            metadata: RunMetadata {
                method: self.method.name().to_string(),
                seed: self.seed,
                generator: GENERATOR_ID,
                workers: self.workers,
                hyperparameters: optimiser
                    .hyperparameters()
                    .into_iter()
                    .map(|(k, v)| (k.to_string(), v))
                    .collect(),
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::NullSink;
    use crate::measures::FunctionError;
    use crate::toys::{GaussianTarget, Sphere};

    #[test]
    fn zero_budget_returns_evaluated_start() {
        let f = Sphere(2);
        let r = OptimisationController::new(Objective::Minimise(&f), vec![1.0, 2.0])
            .criteria(StoppingCriteria::iterations(0))
            .run(&mut NullSink)
            .unwrap();
        assert_eq!(r.best, vec![1.0, 2.0]);
        assert_eq!(r.best_score, 5.0);
        assert_eq!(r.evaluations, 1);
        assert_eq!(r.stop_reason, StopReason::MaxIterations);
        assert!(r.log.is_empty());
    }

    #[test]
    fn constant_function_triggers_unchanged() {
        let f = FunctionError::new(3, |_| 7.0);
        for method in Method::ALL {
            let r = OptimisationController::new(Objective::Minimise(&f), vec![0.0; 3])
                .method(method)
                .criteria(StoppingCriteria::unchanged(50, 1e-11))
                .run(&mut NullSink)
                .unwrap();
            assert_eq!(r.stop_reason, StopReason::Unchanged);
            assert!(r.iterations <= 51, "{method}: {}", r.iterations);
            assert_eq!(r.best_score, 7.0);
        }
    }

    #[test]
    fn target_stops_early() {
        let f = Sphere(2);
        let r = OptimisationController::new(Objective::Minimise(&f), vec![3.0, 3.0])
            .criteria(StoppingCriteria::iterations(1000).with_target(1e-2))
            .run(&mut NullSink)
            .unwrap();
        assert_eq!(r.stop_reason, StopReason::TargetReached);
        assert!(r.best_score < 1e-2);
    }

    #[test]
    fn maximising_a_log_density() {
        let g = GaussianTarget::new(vec![1.5, -0.5], nalgebra::DMatrix::identity(2, 2)).unwrap();
        let r = OptimisationController::new(Objective::Maximise(&g), vec![0.0, 0.0])
            .criteria(StoppingCriteria::iterations(200))
            .run(&mut NullSink)
            .unwrap();
        assert!((r.best[0] - 1.5).abs() < 1e-4 && (r.best[1] + 0.5).abs() < 1e-4);
        assert!((r.objective_value() + (2.0 * std::f64::consts::PI).ln()).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_configuration() {
        let f = Sphere(2);
        let none = StoppingCriteria {
            max_iterations: None,
            max_unchanged: None,
            target_score: None,
        };
        assert!(OptimisationController::new(Objective::Minimise(&f), vec![0.0, 0.0]).criteria(none).run(&mut NullSink).is_err());
        assert!(OptimisationController::new(Objective::Minimise(&f), vec![0.0]).run(&mut NullSink).is_err());
        assert!(OptimisationController::new(Objective::Minimise(&f), vec![0.0, 0.0]).sigma0_scalar(-1.0).run(&mut NullSink).is_err());
        assert!(OptimisationController::new(Objective::Minimise(&f), vec![0.0, 0.0]).workers(0).run(&mut NullSink).is_err());
    }

    #[test]
    fn sink_sees_every_iteration() {
        let f = Sphere(2);
        let mut records: Vec<OptimisationRecord> = Vec::new();
        let r = OptimisationController::new(Objective::Minimise(&f), vec![1.0, 1.0])
            .criteria(StoppingCriteria::iterations(25))
            .run(&mut records)
            .unwrap();
        assert_eq!(records.len(), 25);
        assert_eq!(records, r.log);
        assert!(records.windows(2).all(|w| w[1].best_score <= w[0].best_score));
        assert_eq!(records.last().unwrap().evaluations, 1 + 25 * 6);
    }
}
