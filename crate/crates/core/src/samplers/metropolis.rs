use nalgebra::DMatrix;

use super::{Chain, GaussianProposal, McmcSampler};
use crate::error::{check_dimension, Result};
use crate::problem::ParameterVector;
use crate::random::RandomSource;

/// Random-walk Metropolis with a fixed Gaussian proposal.
#[derive(Debug, Clone)]
pub struct MetropolisRandomWalk {
    chain: Chain,
    proposal: GaussianProposal,
    widths: Vec<f64>,
    rng: RandomSource,
}

impl MetropolisRandomWalk {
    /// Independent proposal widths per coordinate.
    pub fn new(x0: Vec<f64>, sigma: &[f64], rng: RandomSource) -> Result<Self> {
        check_dimension(x0.len(), sigma.len())?;
        Ok(Self {
            chain: Chain::new(x0)?,
            proposal: GaussianProposal::diagonal(sigma)?,
            widths: sigma.to_vec(),
            rng,
        })
    }

    pub fn with_covariance(x0: Vec<f64>, covariance: &DMatrix<f64>, rng: RandomSource) -> Result<Self> {
        check_dimension(x0.len(), covariance.nrows())?;
        Ok(Self {
            widths: covariance.diagonal().iter().map(|v| v.sqrt()).collect(),
            chain: Chain::new(x0)?,
            proposal: GaussianProposal::new(covariance)?,
            rng,
        })
    }
}

impl McmcSampler for MetropolisRandomWalk {
    fn name(&self) -> &'static str {
        "metropolis"
    }

    fn n_parameters(&self) -> usize {
        self.chain.point().len()
    }

    fn ask(&mut self) -> Result<ParameterVector> {
        self.chain.ask(&mut self.proposal, &mut self.rng)
    }

    fn tell(&mut self, log_density: f64) -> Result<()> {
        self.chain.tell(log_density, &mut self.rng).map(|_| ())
    }

    fn current(&self) -> Option<(&[f64], f64)> {
        self.chain.current()
    }

    fn iterations(&self) -> usize {
        self.chain.iterations()
    }

    fn acceptances(&self) -> usize {
        self.chain.acceptances()
    }

    fn hyperparameters(&self) -> Vec<(&'static str, f64)> {
        let mean_width = self.widths.iter().sum::<f64>() / self.widths.len() as f64;
        vec![("proposal_width", mean_width)]
    }
}
