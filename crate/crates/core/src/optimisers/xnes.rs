//! Exponential natural evolution strategy with a full shape matrix.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{default_population_size, rank_utilities, sample_utilities, validate_start, AskTell, Optimiser};
use crate::error::{Error, Result};
use crate::problem::ParameterVector;
use crate::random::RandomSource;

/// Search distribution N(μ, σ² B Bᵀ) with det B = 1.
pub struct Xnes {
    n: usize,
    lambda: usize,
    utilities: Vec<f64>,
    eta_mean: f64,
    eta_shape: f64,
    mean: DVector<f64>,
    scale: f64,
    shape: DMatrix<f64>,
    draws: Vec<DVector<f64>>,
    rng: RandomSource,
    state: AskTell,
}

impl Xnes {
    pub fn new(x0: &[f64], sigma0: &[f64], population_size: Option<usize>, rng: RandomSource) -> Result<Self> {
        validate_start(x0, sigma0)?;
        let n = x0.len();
        let nf = n as f64;
        let lambda = population_size.unwrap_or_else(|| default_population_size(n));
        if lambda < 2 {
            return Err(Error::contract("xNES needs a population of at least 2"));
        }
        let scale = (sigma0.iter().map(|s| s.ln()).sum::<f64>() / nf).exp();
        Ok(Self {
            n,
            lambda,
            utilities: rank_utilities(lambda),
            eta_mean: 1.0,
            eta_shape: (9.0 + 3.0 * nf.ln()) / (5.0 * nf * nf.sqrt()),
            mean: DVector::from_column_slice(x0),
            scale,
            shape: DMatrix::from_diagonal(&DVector::from_iterator(n, sigma0.iter().map(|s| s / scale))),
            draws: Vec::new(),
            rng,
            state: AskTell::new(),
        })
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
    }

    /// Covariance σ² B Bᵀ of the search distribution.
    pub fn covariance(&self) -> DMatrix<f64> {
        self.scale * self.scale * &self.shape * self.shape.transpose()
    }
}

fn symmetric_expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::exp));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

impl Optimiser for Xnes {
    fn name(&self) -> &'static str {
        "xnes"
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
        let a = self.scale * &self.shape;
        let mut points = Vec::with_capacity(self.lambda);
        for _ in 0..self.lambda {
            let z = DVector::from_iterator(self.n, (0..self.n).map(|_| self.rng.sample::<f64, _>(StandardNormal)));
            let x = &self.mean + &a * &z;
            points.push(ParameterVector::from_finite(x.as_slice().to_vec()));
            self.draws.push(z);
        }
        Ok(self.state.asked(points))
    }

    fn tell(&mut self, scores: &[f64]) -> Result<()> {
        let (_, scores) = self.state.take(scores)?;
        let weights = sample_utilities(&self.utilities, &scores);
        let n = self.n;
        let identity = DMatrix::<f64>::identity(n, n);

        let mut grad_mean = DVector::zeros(n);
        let mut grad_m = DMatrix::zeros(n, n);
        for (u, z) in weights.iter().zip(&self.draws) {
            grad_mean += *u * z;
            grad_m += *u * (z * z.transpose() - &identity);
        }
        let grad_scale = grad_m.trace() / n as f64;
        let grad_shape = grad_m - grad_scale * &identity;

        self.mean += self.eta_mean * self.scale * &self.shape * grad_mean;
        self.scale *= (0.5 * self.eta_shape * grad_scale).exp();
        self.shape = &self.shape * symmetric_expm(&(0.5 * self.eta_shape * grad_shape));
        if !self.scale.is_finite() || self.scale <= 0.0 {
            return Err(Error::contract(format!("xNES scale degenerated to {}", self.scale)));
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
