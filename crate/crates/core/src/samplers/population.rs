use rand::Rng;

use super::{metropolis_accept, GaussianProposal, McmcSampler};
use crate::densities::LogPdf;
use crate::error::{check_dimension, Error, Result};
use crate::problem::ParameterVector;
use crate::random::RandomSource;

#[derive(Debug, Clone)]
struct Tempered {
    point: Vec<f64>,
    log_prior: f64,
    log_likelihood: f64,
}

impl Tempered {
    fn density(&self, beta: f64) -> f64 {
        tempered(beta, self.log_likelihood, self.log_prior)
    }
}

/// `β·loglik + logprior`, with the prior alone at `β = 0` so that a zero
/// likelihood does not turn into `0·(-inf)`.
fn tempered(beta: f64, log_likelihood: f64, log_prior: f64) -> f64 {
    if log_prior == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else if beta == 0.0 {
        log_prior
    } else {
        beta * log_likelihood + log_prior
    }
}

/// Parallel tempering over a ladder of inverse temperatures.
///
/// The density told to the sampler is the full log-posterior; the sampler
/// evaluates the prior itself and tempers the likelihood part only. Each
/// step updates one uniformly chosen chain and then proposes one exchange
/// between a uniformly chosen adjacent pair. Only the `β = 1` chain is
/// reported as the sample stream.
pub struct PopulationMcmc<P> {
    prior: P,
    betas: Vec<f64>,
    chains: Vec<Tempered>,
    proposal: GaussianProposal,
    pending: Option<(usize, Vec<f64>)>,
    started: bool,
    iterations: usize,
    acceptances: usize,
    swaps_proposed: usize,
    swaps_accepted: usize,
    widths: Vec<f64>,
    rng: RandomSource,
    log_density: f64,
}

impl<P: LogPdf> PopulationMcmc<P> {
    pub const DEFAULT_TEMPERATURES: usize = 10;

    /// Uniform ladder `β_i = i/(K-1)` with `K` chains.
    pub fn new(x0: Vec<f64>, sigma: &[f64], prior: P, temperatures: usize, rng: RandomSource) -> Result<Self> {
        if temperatures < 2 {
            return Err(Error::contract("population MCMC needs at least two temperatures"));
        }
        let k = temperatures as f64 - 1.0;
        let betas = (0..temperatures).map(|i| i as f64 / k).collect();
        Self::with_betas(x0, sigma, prior, betas, rng)
    }

    /// Explicit inverse temperatures: non-decreasing within `[0, 1]` and
    /// ending at 1.
    pub fn with_betas(x0: Vec<f64>, sigma: &[f64], prior: P, betas: Vec<f64>, rng: RandomSource) -> Result<Self> {
        if betas.len() < 2 {
            return Err(Error::contract("population MCMC needs at least two temperatures"));
        }
        if betas.iter().any(|b| !(0.0..=1.0).contains(b)) || betas.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::contract("inverse temperatures must be non-decreasing within [0, 1]"));
        }
        if *betas.last().unwrap() != 1.0 {
            return Err(Error::contract("the last inverse temperature must be 1"));
        }
        check_dimension(x0.len(), sigma.len())?;
        check_dimension(prior.n_parameters(), x0.len())?;
        ParameterVector::new(x0.clone())?;
        let start = Tempered {
            point: x0,
            log_prior: f64::NEG_INFINITY,
            log_likelihood: f64::NEG_INFINITY,
        };
        Ok(Self {
            prior,
            chains: vec![start; betas.len()],
            betas,
            proposal: GaussianProposal::diagonal(sigma)?,
            pending: None,
            started: false,
            iterations: 0,
            acceptances: 0,
            swaps_proposed: 0,
            swaps_accepted: 0,
            widths: sigma.to_vec(),
            rng,
            log_density: f64::NEG_INFINITY,
        })
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    /// Current point of every tempered chain, coldest last.
    pub fn chain_points(&self) -> Vec<&[f64]> {
        self.chains.iter().map(|c| c.point.as_slice()).collect()
    }

    pub fn swaps_proposed(&self) -> usize {
        self.swaps_proposed
    }

    pub fn swaps_accepted(&self) -> usize {
        self.swaps_accepted
    }

    fn exchange(&mut self) {
        let i = self.rng.random_range(0..self.betas.len() - 1);
        let (bi, bj) = (self.betas[i], self.betas[i + 1]);
        let (li, lj) = (self.chains[i].log_likelihood, self.chains[i + 1].log_likelihood);
        let log_ratio = if bi == bj || li == lj { 0.0 } else { (bi - bj) * (lj - li) };
        let (accept, _) = metropolis_accept(log_ratio, &mut self.rng);
        self.swaps_proposed += 1;
        if accept {
            self.chains.swap(i, i + 1);
            self.swaps_accepted += 1;
        }
    }

    fn refresh_density(&mut self) {
        let cold = self.chains.last().unwrap();
        self.log_density = cold.log_prior + cold.log_likelihood;
    }
}

impl<P: LogPdf> McmcSampler for PopulationMcmc<P> {
    fn name(&self) -> &'static str {
        "population"
    }

    fn n_parameters(&self) -> usize {
        self.proposal.dimension()
    }

    fn ask(&mut self) -> Result<ParameterVector> {
        if self.pending.is_some() {
            return Err(Error::contract("ask() called twice without tell()"));
        }
        let (index, x) = if self.started {
            let index = self.rng.random_range(0..self.chains.len());
            (index, self.proposal.propose(&self.chains[index].point, &mut self.rng))
        } else {
            (0, self.chains[0].point.clone())
        };
        self.pending = Some((index, x.clone()));
        ParameterVector::new(x)
    }

    fn tell(&mut self, log_density: f64) -> Result<()> {
        let Some((index, x)) = self.pending.take() else {
            return Err(Error::contract("tell() called without a preceding ask()"));
        };
        let log_density = if log_density.is_nan() { f64::NEG_INFINITY } else { log_density };
        let log_prior = self.prior.evaluate(&x);
        let log_likelihood = if log_prior == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            log_density - log_prior
        };
        let candidate = Tempered {
            point: x,
            log_prior,
            log_likelihood,
        };

        if !self.started {
            if log_density == f64::NEG_INFINITY || log_prior == f64::NEG_INFINITY {
                self.pending = Some((index, candidate.point));
                return Err(Error::contract("starting point has zero density"));
            }
            for chain in &mut self.chains {
                *chain = candidate.clone();
            }
            self.started = true;
            self.refresh_density();
            return Ok(());
        }

        let beta = self.betas[index];
        let log_ratio = candidate.density(beta) - self.chains[index].density(beta);
        let (accept, _) = metropolis_accept(log_ratio, &mut self.rng);
        if accept {
            self.chains[index] = candidate;
            self.acceptances += 1;
        }
        self.iterations += 1;
        self.exchange();
        self.refresh_density();
        Ok(())
    }

    fn current(&self) -> Option<(&[f64], f64)> {
        self.started
            .then(|| (self.chains.last().unwrap().point.as_slice(), self.log_density))
    }

    fn iterations(&self) -> usize {
        self.iterations
    }

    fn acceptances(&self) -> usize {
        self.acceptances
    }

    fn hyperparameters(&self) -> Vec<(&'static str, f64)> {
        let mean_width = self.widths.iter().sum::<f64>() / self.widths.len() as f64;
        vec![
            ("temperatures", self.betas.len() as f64),
            ("proposal_width", mean_width),
        ]
    }
}
