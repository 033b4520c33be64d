use std::fmt;
use std::str::FromStr;

use super::{AdaptiveCovariance, McmcSampler, MetropolisRandomWalk, PopulationMcmc};
use crate::densities::LogPdf;
use crate::error::{check_dimension, Error, Result};
use crate::evaluation::{Evaluator, LogSink};
use crate::optimisers::RunMetadata;
use crate::random::{RandomSource, GENERATOR_ID};

/// Shipped MCMC methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McmcMethod {
    Metropolis,
    AdaptiveCovariance,
    Population { temperatures: usize },
}

impl McmcMethod {
    pub fn population() -> Self {
        McmcMethod::Population { temperatures: 10 }
    }

    pub fn name(self) -> &'static str {
        match self {
            McmcMethod::Metropolis => "metropolis",
            McmcMethod::AdaptiveCovariance => "adaptive-covariance",
            McmcMethod::Population { .. } => "population",
        }
    }
}

impl fmt::Display for McmcMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for McmcMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "metropolis" | "randomwalk" => Ok(McmcMethod::Metropolis),
            "adaptivecovariance" | "adaptive" => Ok(McmcMethod::AdaptiveCovariance),
            "population" | "populationmcmc" => Ok(McmcMethod::population()),
            _ => Err(Error::contract(format!("unknown sampler '{s}'"))),
        }
    }
}

/// One line of the sampling log.
#[derive(Debug, Clone, PartialEq)]
pub struct McmcRecord {
    pub iteration: usize,
    pub evaluations: usize,
    pub acceptance_rates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McmcResult {
    /// `chains[j][t]` is chain `j` after `t` steps; `chains[j][0]` is its start.
    pub chains: Vec<Vec<Vec<f64>>>,
    pub log_densities: Vec<Vec<f64>>,
    pub acceptance_rates: Vec<f64>,
    pub evaluations: usize,
    pub log: Vec<McmcRecord>,
    pub metadata: RunMetadata,
}

/// Runs independent chains in lock-step for a fixed number of iterations.
///
/// Chain `j` draws from seed `seed XOR (j+1)`. With several workers the
/// chains' proposals are evaluated concurrently; results are merged by
/// chain index so the output does not depend on the worker count.
pub struct McmcController<'a> {
    density: &'a dyn LogPdf,
    starts: Vec<Vec<f64>>,
    method: McmcMethod,
    iterations: usize,
    sigma0: Option<Vec<f64>>,
    prior: Option<&'a dyn LogPdf>,
    workers: usize,
    seed: u64,
}

impl<'a> McmcController<'a> {
    /// One chain per starting point.
    pub fn new(density: &'a dyn LogPdf, starts: Vec<Vec<f64>>) -> Self {
        Self {
            density,
            starts,
            method: McmcMethod::AdaptiveCovariance,
            iterations: 1000,
            sigma0: None,
            prior: None,
            workers: 1,
            seed: 0,
        }
    }

    pub fn method(mut self, method: McmcMethod) -> Self {
        self.method = method;
        self
    }

    pub fn iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    /// Proposal widths per coordinate.
    pub fn sigma0(mut self, sigma0: Vec<f64>) -> Self {
        self.sigma0 = Some(sigma0);
        self
    }

    /// Prior used by population MCMC to split the density into prior and
    /// likelihood parts.
    pub fn prior(mut self, prior: &'a dyn LogPdf) -> Self {
        self.prior = Some(prior);
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

    fn build(&self, j: usize, x0: &[f64], sigma0: &[f64]) -> Result<Box<dyn McmcSampler + 'a>> {
        let rng = RandomSource::new(self.seed ^ (j as u64 + 1));
        Ok(match self.method {
            McmcMethod::Metropolis => Box::new(MetropolisRandomWalk::new(x0.to_vec(), sigma0, rng)?),
            McmcMethod::AdaptiveCovariance => Box::new(AdaptiveCovariance::new(x0.to_vec(), sigma0, rng)?),
            McmcMethod::Population { temperatures } => {
                let prior = self
                    .prior
                    .ok_or_else(|| Error::contract("population MCMC needs a prior"))?;
                Box::new(PopulationMcmc::new(x0.to_vec(), sigma0, prior, temperatures, rng)?)
            }
        })
    }

    pub fn run(&self, sink: &mut dyn LogSink<McmcRecord>) -> Result<McmcResult> {
        if self.starts.is_empty() {
            return Err(Error::contract("at least one chain is required"));
        }
        let n = self.density.n_parameters();
        for x0 in &self.starts {
            check_dimension(n, x0.len())?;
        }
        let sigma0 = match &self.sigma0 {
            Some(s) => {
                check_dimension(n, s.len())?;
                s.clone()
            }
            None => self.starts[0].iter().map(|x| 0.1 * x.abs().max(1.0)).collect(),
        };
        let mut samplers = self
            .starts
            .iter()
            .enumerate()
            .map(|(j, x0)| self.build(j, x0, &sigma0))
            .collect::<Result<Vec<_>>>()?;
        let evaluator = Evaluator::new(self.workers, self.density.is_serial())?;
        let density = self.density;
        let n_chains = samplers.len();

        let mut chains: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(self.iterations + 1); n_chains];
        let mut log_densities: Vec<Vec<f64>> = vec![Vec::with_capacity(self.iterations + 1); n_chains];
        let mut log = Vec::with_capacity(self.iterations);
        let mut evaluations = 0;

        for iteration in 0..=self.iterations {
            let proposals = samplers.iter_mut().map(|s| s.ask()).collect::<Result<Vec<_>>>()?;
            let values = evaluator.map(&proposals, |x| density.evaluate(x));
            evaluations += values.len();
            for (j, (sampler, value)) in samplers.iter_mut().zip(values).enumerate() {
                sampler.tell(value).map_err(|e| match (iteration, e) {
                    (0, Error::Contract(reason)) => Error::contract(format!("chain {j}: {reason}")),
                    (_, e) => e,
                })?;
                let (x, v) = sampler.current().expect("sampler was told");
                chains[j].push(x.to_vec());
                log_densities[j].push(v);
            }
            if iteration > 0 {
                let record = McmcRecord {
                    iteration,
                    evaluations,
                    acceptance_rates: samplers.iter().map(|s| s.acceptance_rate()).collect(),
                };
                sink.record(&record);
                log.push(record);
            }
        }

        Ok(McmcResult {
            chains,
            log_densities,
            acceptance_rates: samplers.iter().map(|s| s.acceptance_rate()).collect(),
            evaluations,
            log,
            metadata: RunMetadata {
                method: self.method.name().to_string(),
                seed: self.seed,
                generator: GENERATOR_ID,
                workers: self.workers,
                hyperparameters: samplers[0]
                    .hyperparameters()
                    .into_iter()
                    .map(|(k, v)| (k.to_string(), v))
                    .collect(),
            },
        })
    }
}
