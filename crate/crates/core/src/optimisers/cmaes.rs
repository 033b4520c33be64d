//! Covariance matrix adaptation evolution strategy.
//!
//! Standard (μ/μ_w, λ) CMA-ES with cumulative step-size adaptation, rank-one
//! and rank-μ covariance updates, and positive recombination weights only.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{default_population_size, sample_utilities, sanitise, validate_start, AskTell, Optimiser};
use crate::error::{Error, Result};
use crate::problem::ParameterVector;
use crate::random::RandomSource;

pub struct Cmaes {
    n: usize,
    lambda: usize,
    weights: Vec<f64>,
    mu_eff: f64,
    c_sigma: f64,
    d_sigma: f64,
    c_c: f64,
    c_1: f64,
    c_mu: f64,
    chi_n: f64,

    mean: DVector<f64>,
    step_size: f64,
    covariance: DMatrix<f64>,
    path_sigma: DVector<f64>,
    path_c: DVector<f64>,
    /// Eigenvectors B and axis lengths D of the covariance, C = B D² Bᵀ.
    basis: DMatrix<f64>,
    axis: DVector<f64>,
    steps: Vec<DVector<f64>>,

    rng: RandomSource,
    state: AskTell,
}

impl Cmaes {
    pub fn new(x0: &[f64], sigma0: &[f64], population_size: Option<usize>, rng: RandomSource) -> Result<Self> {
        validate_start(x0, sigma0)?;
        let n = x0.len();
        let nf = n as f64;
        let lambda = population_size.unwrap_or_else(|| default_population_size(n));
        if lambda < 2 {
            return Err(Error::contract("CMA-ES needs a population of at least 2"));
        }
        let mu = lambda / 2;
        let raw: Vec<f64> = (1..=mu)
            .map(|i| (mu as f64 + 0.5).ln() - (i as f64).ln())
            .collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

        let c_sigma = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
        let c_1 = 2.0 / ((nf + 1.3).powi(2) + mu_eff);
        let c_mu = (2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0).powi(2) + mu_eff)).min(1.0 - c_1);
        let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));

        // overall step size is the largest spread; C carries the ratios
        let step_size = sigma0.iter().copied().fold(0.0, f64::max);
        let axis = DVector::from_iterator(n, sigma0.iter().map(|s| s / step_size));
        let covariance = DMatrix::from_diagonal(&axis.map(|a| a * a));

        Ok(Self {
            n,
            lambda,
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            chi_n,
            mean: DVector::from_column_slice(x0),
            step_size,
            covariance,
            path_sigma: DVector::zeros(n),
            path_c: DVector::zeros(n),
            basis: DMatrix::identity(n, n),
            axis,
            steps: Vec::new(),
            rng,
            state: AskTell::new(),
        })
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
    }

    pub fn step_size(&self) -> f64 {
        self.step_size
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    fn decompose(&mut self) {
        let eig = SymmetricEigen::new(self.covariance.clone());
        self.axis = eig.eigenvalues.map(|v| v.max(1e-300).sqrt());
        self.basis = eig.eigenvectors;
    }

    /// C^{-1/2} y = B D⁻¹ Bᵀ y
    fn whiten(&self, y: &DVector<f64>) -> DVector<f64> {
        let t = self.basis.transpose() * y;
        &self.basis * t.component_div(&self.axis)
    }
}

impl Optimiser for Cmaes {
    fn name(&self) -> &'static str {
        "cmaes"
    }

    fn n_parameters(&self) -> usize {
        self.n
    }

    fn population_size(&self) -> usize {
        self.lambda
    }

    fn ask(&mut self) -> Result<Vec<ParameterVector>> {
        self.state.check_ask()?;
        let bd = &self.basis * DMatrix::from_diagonal(&self.axis);
        self.steps.clear();
        let mut points = Vec::with_capacity(self.lambda);
        for _ in 0..self.lambda {
            let z = DVector::from_iterator(self.n, (0..self.n).map(|_| self.rng.sample::<f64, _>(StandardNormal)));
            let y = &bd * z;
            let x = &self.mean + self.step_size * &y;
            points.push(ParameterVector::from_finite(x.as_slice().to_vec()));
            self.steps.push(y);
        }
        Ok(self.state.asked(points))
    }

    fn tell(&mut self, scores: &[f64]) -> Result<()> {
        let (_, scores) = self.state.take(scores)?;
        // A fully tied population carries no ranking information. Updating on
        // draw order instead lets C drift to singularity.
        let first = sanitise(scores[0]);
        if scores.iter().all(|s| sanitise(*s) == first) {
            return Ok(());
        }
        let mut by_rank = self.weights.clone();
        by_rank.resize(self.lambda, 0.0);
        let weights = sample_utilities(&by_rank, &scores);
        let n = self.n as f64;

        let mut y_w = DVector::zeros(self.n);
        for (w, y) in weights.iter().zip(&self.steps) {
            y_w += *w * y;
        }
        self.mean += self.step_size * &y_w;

        let cs = self.c_sigma;
        self.path_sigma = (1.0 - cs) * &self.path_sigma + (cs * (2.0 - cs) * self.mu_eff).sqrt() * self.whiten(&y_w);
        let generation = self.state.iterations() as i32;
        let ps_norm = self.path_sigma.norm();
        let h_sigma = ps_norm / (1.0 - (1.0 - cs).powi(2 * generation)).sqrt() < (1.4 + 2.0 / (n + 1.0)) * self.chi_n;
        let h = if h_sigma { 1.0 } else { 0.0 };

        let cc = self.c_c;
        self.path_c = (1.0 - cc) * &self.path_c + h * (cc * (2.0 - cc) * self.mu_eff).sqrt() * &y_w;

        let mut rank_mu = DMatrix::zeros(self.n, self.n);
        for (w, y) in weights.iter().zip(&self.steps) {
            if *w != 0.0 {
                rank_mu += *w * y * y.transpose();
            }
        }
        let rank_one = &self.path_c * self.path_c.transpose() + (1.0 - h) * cc * (2.0 - cc) * &self.covariance;
        self.covariance = (1.0 - self.c_1 - self.c_mu) * &self.covariance + self.c_1 * rank_one + self.c_mu * rank_mu;
        self.covariance = (&self.covariance + self.covariance.transpose()) * 0.5;

        self.step_size *= ((cs / self.d_sigma) * (ps_norm / self.chi_n - 1.0)).exp();
        if !self.step_size.is_finite() || self.step_size <= 0.0 {
            return Err(Error::contract(format!("CMA-ES step size degenerated to {}", self.step_size)));
        }
        self.decompose();
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
            ("parents", self.weights.len() as f64),
            ("mu_eff", self.mu_eff),
            ("c_sigma", self.c_sigma),
            ("d_sigma", self.d_sigma),
            ("c_c", self.c_c),
            ("c_1", self.c_1),
            ("c_mu", self.c_mu),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    #[test]
    fn default_population_in_two_dimensions() {
        let mut c = Cmaes::new(&[0.0, 0.0], &[1.0, 1.0], None, RandomSource::new(0)).unwrap();
        assert_eq!(c.ask().unwrap().len(), 6);
    }

    #[test]
    fn converges_on_sphere() {
        let mut c = Cmaes::new(&[2.0, 2.0], &[0.5, 0.5], None, RandomSource::new(0)).unwrap();
        for _ in 0..100 {
            let xs = c.ask().unwrap();
            let fs: Vec<f64> = xs.iter().map(|x| sphere(x)).collect();
            c.tell(&fs).unwrap();
        }
        assert!(c.best().unwrap().1 < 1e-6, "{}", c.best().unwrap().1);
    }

    #[test]
    fn fully_tied_population_changes_nothing() {
        let mut c = Cmaes::new(&[1.0, -1.0], &[0.5, 2.0], None, RandomSource::new(3)).unwrap();
        let (mean, sigma, cov) = (c.mean().to_vec(), c.step_size(), c.covariance().clone());
        for _ in 0..20 {
            c.ask().unwrap();
            c.tell(&[7.0; 6]).unwrap();
        }
        assert_eq!(c.mean(), &mean[..]);
        assert_eq!(c.step_size(), sigma);
        assert_eq!(c.covariance(), &cov);
    }

    #[test]
    fn infinite_scores_keep_state_finite() {
        let mut c = Cmaes::new(&[0.0; 3], &[1.0; 3], None, RandomSource::new(4)).unwrap();
        for k in 0..50 {
            let xs = c.ask().unwrap();
            let fs: Vec<f64> = xs
                .iter()
                .enumerate()
                .map(|(i, x)| if (i + k) % 3 == 0 { f64::INFINITY } else { sphere(x) })
                .collect();
            c.tell(&fs).unwrap();
            assert!(c.covariance().iter().all(|v| v.is_finite()));
            assert!(c.covariance().clone().cholesky().is_some());
            assert!(c.mean().iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn alternation_enforced() {
        let mut c = Cmaes::new(&[0.0], &[1.0], None, RandomSource::new(0)).unwrap();
        assert!(c.tell(&[1.0; 4]).is_err());
        let xs = c.ask().unwrap();
        assert!(c.ask().is_err());
        assert!(c.tell(&vec![1.0; xs.len() + 1]).is_err());
        c.tell(&vec![1.0; xs.len()]).unwrap();
        assert!(c.tell(&vec![1.0; xs.len()]).is_err());
    }
}
