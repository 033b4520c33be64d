use nalgebra::{DMatrix, DVector};

use super::{Chain, GaussianProposal, McmcSampler};
use crate::error::{check_dimension, Result};
use crate::problem::ParameterVector;
use crate::random::RandomSource;

const WARM_UP: usize = 100;
const ETA: f64 = 0.6;
const TARGET_ACCEPTANCE: f64 = 0.234;
const JITTER: f64 = 1e-9;
const LOG_SCALE_BOUND: f64 = 13.815510557964274; // ln 1e6

/// Metropolis with a proposal covariance and global scale learned from the
/// chain's own history.
///
/// The first 100 steps use the initial covariance unchanged. After that each
/// step proposes from `λΣ + 1e-9 I` and then moves the running mean `μ`,
/// covariance `Σ` and log-scale `ln λ` with rate `γ = (k+1)^-0.6`, where `k`
/// counts steps since the warm-up ended.
#[derive(Debug, Clone)]
pub struct AdaptiveCovariance {
    chain: Chain,
    initial: GaussianProposal,
    proposal: GaussianProposal,
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    log_scale: f64,
    adapted_steps: usize,
    adaptive: bool,
    rng: RandomSource,
}

impl AdaptiveCovariance {
    pub fn new(x0: Vec<f64>, sigma: &[f64], rng: RandomSource) -> Result<Self> {
        check_dimension(x0.len(), sigma.len())?;
        let covariance = DMatrix::from_diagonal(&DVector::from_iterator(sigma.len(), sigma.iter().map(|s| s * s)));
        GaussianProposal::diagonal(sigma)?;
        Self::with_covariance(x0, &covariance, rng)
    }

    pub fn with_covariance(x0: Vec<f64>, covariance: &DMatrix<f64>, rng: RandomSource) -> Result<Self> {
        check_dimension(x0.len(), covariance.nrows())?;
        let initial = GaussianProposal::new(covariance)?;
        Ok(Self {
            mean: DVector::from_column_slice(&x0),
            chain: Chain::new(x0)?,
            proposal: initial.clone(),
            initial,
            covariance: covariance.clone(),
            log_scale: 0.0,
            adapted_steps: 0,
            adaptive: true,
            rng,
        })
    }

    /// Switching adaptation off freezes the proposal at the initial
    /// covariance, which makes the sampler plain random-walk Metropolis.
    pub fn set_adaptive(&mut self, adaptive: bool) {
        self.adaptive = adaptive;
    }

    pub fn is_adaptive(&self) -> bool {
        self.adaptive
    }

    /// Running covariance estimate `Σ`.
    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
    }

    /// Global proposal scale `λ`.
    pub fn scale(&self) -> f64 {
        self.log_scale.exp()
    }

    fn adapt(&mut self, acceptance_probability: f64) -> Result<()> {
        self.adapted_steps += 1;
        let gamma = (self.adapted_steps as f64 + 1.0).powf(-ETA);
        let d = DVector::from_column_slice(self.chain.point()) - &self.mean;
        self.covariance = &self.covariance + gamma * (&d * d.transpose() - &self.covariance);
        self.covariance = (&self.covariance + self.covariance.transpose()) * 0.5;
        self.mean += gamma * &d;
        self.log_scale = (self.log_scale + gamma * (acceptance_probability - TARGET_ACCEPTANCE))
            .clamp(-LOG_SCALE_BOUND, LOG_SCALE_BOUND);
        let n = self.covariance.nrows();
        let mut scaled = &self.covariance * self.log_scale.exp();
        for i in 0..n {
            scaled[(i, i)] += JITTER;
        }
        self.proposal = GaussianProposal::new(&scaled)?;
        Ok(())
    }
}

impl McmcSampler for AdaptiveCovariance {
    fn name(&self) -> &'static str {
        "adaptive-covariance"
    }

    fn n_parameters(&self) -> usize {
        self.chain.point().len()
    }

    fn ask(&mut self) -> Result<ParameterVector> {
        let proposal = if self.adaptive && self.chain.iterations() >= WARM_UP {
            &mut self.proposal
        } else {
            &mut self.initial
        };
        self.chain.ask(proposal, &mut self.rng)
    }

    fn tell(&mut self, log_density: f64) -> Result<()> {
        let step = self.chain.tell(log_density, &mut self.rng)?;
        if let Some(probability) = step {
            if self.adaptive && self.chain.iterations() >= WARM_UP {
                self.adapt(probability)?;
            }
        }
        Ok(())
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
        vec![
            ("warm_up", WARM_UP as f64),
            ("eta", ETA),
            ("target_acceptance", TARGET_ACCEPTANCE),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::MetropolisRandomWalk;
    use crate::toys::GaussianTarget;

    #[test]
    fn non_adaptive_matches_metropolis_exactly() {
        let target = GaussianTarget::new(vec![0.0, 0.0], DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0])).unwrap();
        let mut a = AdaptiveCovariance::new(vec![0.2, 0.1], &[0.7, 0.7], RandomSource::new(4)).unwrap();
        a.set_adaptive(false);
        let mut m = MetropolisRandomWalk::new(vec![0.2, 0.1], &[0.7, 0.7], RandomSource::new(4)).unwrap();
        for _ in 0..2000 {
            a.step(&target).unwrap();
            m.step(&target).unwrap();
            assert_eq!(a.current(), m.current());
        }
        assert_eq!(a.acceptances(), m.acceptances());
    }

    #[test]
    fn acceptance_rate_settles_near_target() {
        let target = GaussianTarget::new(vec![0.0; 5], DMatrix::identity(5, 5)).unwrap();
        let mut a = AdaptiveCovariance::new(vec![0.0; 5], &[0.1; 5], RandomSource::new(2)).unwrap();
        a.step(&target).unwrap();
        for _ in 0..50_000 {
            a.step(&target).unwrap();
        }
        let rate = a.acceptance_rate();
        assert!((0.15..=0.35).contains(&rate), "acceptance {rate}");
        assert!(a.scale() >= 1e-6 && a.scale() <= 1e6);
    }

    #[test]
    fn learns_correlation() {
        let target = GaussianTarget::new(vec![0.0, 0.0], DMatrix::from_row_slice(2, 2, &[1.0, 0.9, 0.9, 1.0])).unwrap();
        let mut a = AdaptiveCovariance::new(vec![0.0, 0.0], &[1.0, 1.0], RandomSource::new(8)).unwrap();
        a.step(&target).unwrap();
        for _ in 0..50_000 {
            a.step(&target).unwrap();
            let c = a.covariance();
            assert!(c[(0, 0)] >= 0.0 && c[(1, 1)] >= 0.0);
            assert!(c[(0, 1)].powi(2) <= c[(0, 0)] * c[(1, 1)] * (1.0 + 1e-9));
        }
        let c = a.covariance();
        let rho = c[(0, 1)] / (c[(0, 0)] * c[(1, 1)]).sqrt();
        assert!((rho - 0.9).abs() < 0.1, "correlation {rho}");
    }
}
