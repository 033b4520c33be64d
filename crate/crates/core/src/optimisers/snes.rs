//! Separable natural evolution strategy: one standard deviation per coordinate.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{default_population_size, rank_utilities, sample_utilities, validate_start, AskTell, Optimiser};
use crate::error::{Error, Result};
use crate::problem::ParameterVector;
use crate::random::RandomSource;

pub struct Snes {
    n: usize,
    lambda: usize,
    utilities: Vec<f64>,
    eta_mean: f64,
    eta_shape: f64,
    mean: Vec<f64>,
    std_dev: Vec<f64>,
    draws: Vec<Vec<f64>>,
    rng: RandomSource,
    state: AskTell,
}

impl Snes {
    pub fn new(x0: &[f64], sigma0: &[f64], population_size: Option<usize>, rng: RandomSource) -> Result<Self> {
        validate_start(x0, sigma0)?;
        let n = x0.len();
        let nf = n as f64;
        let lambda = population_size.unwrap_or_else(|| default_population_size(n));
        if lambda < 2 {
            return Err(Error::contract("SNES needs a population of at least 2"));
        }
        Ok(Self {
            n,
            lambda,
            utilities: rank_utilities(lambda),
            eta_mean: 1.0,
            eta_shape: (9.0 + 3.0 * nf.ln()) / (5.0 * nf * nf.sqrt()),
            mean: x0.to_vec(),
            std_dev: sigma0.to_vec(),
            draws: Vec::new(),
            rng,
            state: AskTell::new(),
        })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std_dev(&self) -> &[f64] {
        &self.std_dev
    }
}

impl Optimiser for Snes {
    fn name(&self) -> &'static str {
        "snes"
    }

    fn n_parameters(&self) -> usize {
        self.n
    }

    fn population_size(&self) -> usize {
        self.lambda
    }

    fn ask(&mut self) -> Result<Vec<ParameterVector>> {
        self.state.check_ask()?;
        self.draws.clear();
        let mut points = Vec::with_capacity(self.lambda);
        for _ in 0..self.lambda {
            let z: Vec<f64> = (0..self.n).map(|_| self.rng.sample(StandardNormal)).collect();
            let x = self
                .mean
                .iter()
                .zip(&self.std_dev)
                .zip(&z)
                .map(|((m, s), z)| m + s * z)
                .collect();
            points.push(ParameterVector::from_finite(x));
            self.draws.push(z);
        }
        Ok(self.state.asked(points))
    }

    fn tell(&mut self, scores: &[f64]) -> Result<()> {
        let (_, scores) = self.state.take(scores)?;
        let weights = sample_utilities(&self.utilities, &scores);
        let mut grad_mean = vec![0.0; self.n];
        let mut grad_std = vec![0.0; self.n];
        for (u, draw) in weights.iter().zip(&self.draws) {
            for (j, z) in draw.iter().enumerate() {
                grad_mean[j] += u * z;
                grad_std[j] += u * (z * z - 1.0);
            }
        }
        for j in 0..self.n {
            self.mean[j] += self.eta_mean * self.std_dev[j] * grad_mean[j];
            self.std_dev[j] *= (0.5 * self.eta_shape * grad_std[j]).exp();
        }
        if self.std_dev.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::contract("SNES standard deviation degenerated"));
        }
        Ok(())
    }

    fn best(&self) -> Option<(&[f64], f64)> {
        self.state.best()
    }

    fn iterations(&self) -> usize {
        self.state.iterations()
    }

    fn hyperparameters(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("population_size", self.lambda as f64),
            ("learning_rate_mean", self.eta_mean),
            ("learning_rate_shape", self.eta_shape),
        ]
    }
}
