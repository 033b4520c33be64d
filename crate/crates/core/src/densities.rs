//! Log-densities: likelihoods over time-series problems, priors, and the
//! posterior that combines them.
//!
//! Every density works in natural-log space and may return `-inf` (zero
//! density) but never NaN or `+inf`. The priors shipped here are normalised,
//! which nested sampling relies on when it reports an evidence.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::problem::TimeSeriesProblem;
use crate::random::RandomSource;

/// Natural log of an (unnormalised) probability density.
pub trait LogPdf: Send + Sync {
    fn n_parameters(&self) -> usize;

    fn evaluate(&self, parameters: &[f64]) -> f64;

    fn is_serial(&self) -> bool {
        false
    }
}

/// A normalised density that can also be sampled from directly.
pub trait LogPrior: LogPdf {
    fn sample_into(&self, rng: &mut RandomSource, out: &mut [f64]);

    fn sample(&self, rng: &mut RandomSource) -> Vec<f64> {
        let mut out = vec![0.0; self.n_parameters()];
        self.sample_into(rng, &mut out);
        out
    }
}

macro_rules! forward_densities {
    ($($ptr:ty),*) => {$(
        impl<T: LogPdf + ?Sized> LogPdf for $ptr {
            fn n_parameters(&self) -> usize {
                (**self).n_parameters()
            }

            fn evaluate(&self, parameters: &[f64]) -> f64 {
                (**self).evaluate(parameters)
            }

            fn is_serial(&self) -> bool {
                (**self).is_serial()
            }
        }

        impl<T: LogPrior + ?Sized> LogPrior for $ptr {
            fn sample_into(&self, rng: &mut RandomSource, out: &mut [f64]) {
                (**self).sample_into(rng, out)
            }
        }
    )*};
}

forward_densities!(&T, Box<T>, Arc<T>);

#[cold]
#[inline(never)]
fn dimension_panic(expected: usize, found: usize) -> ! {
    panic!("{}", Error::DimensionMismatch { expected, found })
}

#[inline]
fn finite_or_neg_inf(v: f64) -> f64 {
    if v.is_nan() || v == f64::INFINITY {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Per-output sums of squared residuals, or `None` when the model failed.
fn output_sse(problem: &TimeSeriesProblem, parameters: &[f64]) -> Option<Vec<f64>> {
    match problem.residuals(parameters) {
        Ok(r) => Some(r.column_iter().map(|c| c.iter().map(|v| v * v).sum()).collect()),
        Err(e @ Error::DimensionMismatch { .. }) => panic!("{e}"),
        Err(_) => None,
    }
}

/// i.i.d. Gaussian log-density of `n` residuals with squared sum `sse`.
fn gaussian_residual_log_density(n: usize, sse: f64, sigma: f64) -> f64 {
    let n = n as f64;
    let quad = if sse == 0.0 {
        0.0
    } else {
        sse / (2.0 * sigma * sigma)
    };
    finite_or_neg_inf(-0.5 * n * (2.0 * PI).ln() - n * sigma.ln() - quad)
}

/// Gaussian noise with a fixed standard deviation per output.
#[derive(Debug, Clone)]
pub struct GaussianKnownSigmaLogLikelihood {
    problem: TimeSeriesProblem,
    sigma: Vec<f64>,
}

impl GaussianKnownSigmaLogLikelihood {
    /// `sigma` holds one value per output, or a single value shared by all.
    pub fn new(problem: TimeSeriesProblem, sigma: Vec<f64>) -> Result<Self> {
        let sigma = match sigma.len() {
            1 => vec![sigma[0]; problem.n_outputs()],
            n if n == problem.n_outputs() => sigma,
            n => {
                return Err(Error::contract(format!(
                    "{n} noise levels for {} outputs",
                    problem.n_outputs()
                )))
            }
        };
        if sigma.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::contract("noise standard deviations must be positive"));
        }
        Ok(Self { problem, sigma })
    }

    pub fn problem(&self) -> &TimeSeriesProblem {
        &self.problem
    }
}

impl LogPdf for GaussianKnownSigmaLogLikelihood {
    fn n_parameters(&self) -> usize {
        self.problem.n_parameters()
    }

    fn evaluate(&self, parameters: &[f64]) -> f64 {
        let Some(sse) = output_sse(&self.problem, parameters) else {
            return f64::NEG_INFINITY;
        };
        let n = self.problem.n_times();
        sse.iter()
            .zip(&self.sigma)
            .map(|(&s, &sigma)| gaussian_residual_log_density(n, s, sigma))
            .sum()
    }

    fn is_serial(&self) -> bool {
        self.problem.is_serial()
    }
}

/// Gaussian noise whose standard deviations are inferred with the model.
///
/// The parameter vector is the model's parameters followed by one noise
/// standard deviation per output, in output order.
#[derive(Debug, Clone)]
pub struct GaussianLogLikelihood {
    problem: TimeSeriesProblem,
}

impl GaussianLogLikelihood {
    pub fn new(problem: TimeSeriesProblem) -> Self {
        Self { problem }
    }

    pub fn problem(&self) -> &TimeSeriesProblem {
        &self.problem
    }
}

impl LogPdf for GaussianLogLikelihood {
    fn n_parameters(&self) -> usize {
        self.problem.n_parameters() + self.problem.n_outputs()
    }

    fn evaluate(&self, parameters: &[f64]) -> f64 {
        crate::error::check_dimension(self.n_parameters(), parameters.len())
            .unwrap_or_else(|e| panic!("{e}"));
        let (model, sigma) = parameters.split_at(self.problem.n_parameters());
        if sigma.iter().any(|&s| s <= 0.0) {
            return f64::NEG_INFINITY;
        }
        let Some(sse) = output_sse(&self.problem, model) else {
            return f64::NEG_INFINITY;
        };
        let n = self.problem.n_times();
        sse.iter()
            .zip(sigma)
            .map(|(&s, &sd)| gaussian_residual_log_density(n, s, sd))
            .sum()
    }

    fn is_serial(&self) -> bool {
        self.problem.is_serial()
    }
}

/// Uniform density on the box `[lower, upper)`.
#[derive(Debug, Clone)]
pub struct UniformLogPrior {
    lower: Vec<f64>,
    upper: Vec<f64>,
    log_density: f64,
}

impl UniformLogPrior {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        crate::error::check_dimension(lower.len(), upper.len())?;
        if lower.is_empty() {
            return Err(Error::contract("uniform prior needs at least one dimension"));
        }
        if lower
            .iter()
            .zip(&upper)
            .any(|(l, u)| !(l.is_finite() && u.is_finite() && l < u))
        {
            return Err(Error::contract("uniform prior requires finite lower < upper"));
        }
        let log_volume: f64 = lower.iter().zip(&upper).map(|(l, u)| (u - l).ln()).sum();
        Ok(Self {
            lower,
            upper,
            log_density: -log_volume,
        })
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| l <= v && v < u)
    }
}

impl LogPdf for UniformLogPrior {
    fn n_parameters(&self) -> usize {
        self.lower.len()
    }

    fn evaluate(&self, parameters: &[f64]) -> f64 {
        if self.contains(parameters) {
            self.log_density
        } else {
            f64::NEG_INFINITY
        }
    }
}

impl LogPrior for UniformLogPrior {
    fn sample_into(&self, rng: &mut RandomSource, out: &mut [f64]) {
        for ((o, l), u) in out.iter_mut().zip(&self.lower).zip(&self.upper) {
            let x = l + rng.random::<f64>() * (u - l);
            // rounding can land exactly on the open upper edge
            *o = if x >= *u { u.next_down() } else { x };
        }
    }
}

/// Multivariate normal prior with a full covariance matrix.
#[derive(Debug, Clone)]
pub struct GaussianLogPrior {
    mean: DVector<f64>,
    cholesky: DMatrix<f64>,
    precision: DMatrix<f64>,
    log_normaliser: f64,
}

impl GaussianLogPrior {
    pub fn new(mean: Vec<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 || covariance.nrows() != d || covariance.ncols() != d {
            return Err(Error::contract(format!(
                "covariance must be {d}x{d}, got {}x{}",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        let scale = covariance.amax().max(f64::MIN_POSITIVE);
        if (&covariance - covariance.transpose()).amax() > 1e-12 * scale {
            return Err(Error::contract("covariance is not symmetric"));
        }
        let chol = covariance
            .cholesky()
            .ok_or_else(|| Error::contract("covariance is not positive definite"))?;
        let precision = chol.inverse();
        let l = chol.unpack();
        let log_det_half: f64 = l.diagonal().iter().map(|v| v.ln()).sum();
        Ok(Self {
            mean: DVector::from_vec(mean),
            log_normaliser: -0.5 * d as f64 * (2.0 * PI).ln() - log_det_half,
            cholesky: l,
            precision,
        })
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        &self.cholesky * self.cholesky.transpose()
    }
}

impl LogPdf for GaussianLogPrior {
    fn n_parameters(&self) -> usize {
        self.mean.len()
    }

    fn evaluate(&self, parameters: &[f64]) -> f64 {
        let mean = self.mean.as_slice();
        let d = mean.len();
        if parameters.len() != d {
            dimension_panic(d, parameters.len());
        }
        // allocation-free quadratic form; this sits in nested sampling's inner loop
        let mut quad = 0.0;
        for (column, (xj, mj)) in self.precision.as_slice().chunks_exact(d).zip(parameters.iter().zip(mean)) {
            let row: f64 = column
                .iter()
                .zip(parameters.iter().zip(mean))
                .map(|(p, (x, m))| p * (x - m))
                .sum();
            quad += (xj - mj) * row;
        }
        finite_or_neg_inf(self.log_normaliser - 0.5 * quad)
    }
}

impl LogPrior for GaussianLogPrior {
    fn sample_into(&self, rng: &mut RandomSource, out: &mut [f64]) {
        let z = DVector::from_iterator(self.mean.len(), (0..self.mean.len()).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let x = &self.mean + &self.cholesky * z;
        out.copy_from_slice(x.as_slice());
    }
}

/// Independent priors over consecutive slices of the parameter vector.
pub struct ComposedLogPrior {
    priors: Vec<Box<dyn LogPrior>>,
    offsets: Vec<usize>,
}

impl ComposedLogPrior {
    pub fn new(priors: Vec<Box<dyn LogPrior>>) -> Result<Self> {
        if priors.is_empty() {
            return Err(Error::contract("composed prior needs at least one component"));
        }
        let mut offsets = Vec::with_capacity(priors.len() + 1);
        let mut total = 0;
        offsets.push(0);
        for p in &priors {
            total += p.n_parameters();
            offsets.push(total);
        }
        Ok(Self { priors, offsets })
    }

    fn slices(&self) -> impl Iterator<Item = (&dyn LogPrior, std::ops::Range<usize>)> + '_ {
        self.priors
            .iter()
            .zip(self.offsets.windows(2))
            .map(|(p, w)| (p.as_ref(), w[0]..w[1]))
    }
}

impl std::fmt::Debug for ComposedLogPrior {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ComposedLogPrior").field("offsets", &self.offsets).finish()
    }
}

impl LogPdf for ComposedLogPrior {
    fn n_parameters(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    fn evaluate(&self, parameters: &[f64]) -> f64 {
        crate::error::check_dimension(self.n_parameters(), parameters.len()).unwrap_or_else(|e| panic!("{e}"));
        let mut total = 0.0;
        for (prior, range) in self.slices() {
            let v = prior.evaluate(&parameters[range]);
            if v == f64::NEG_INFINITY {
                return v;
            }
            total += v;
        }
        total
    }
}

impl LogPrior for ComposedLogPrior {
    fn sample_into(&self, rng: &mut RandomSource, out: &mut [f64]) {
        for (prior, range) in self.slices() {
            prior.sample_into(rng, &mut out[range]);
        }
    }
}

/// Likelihood plus prior. The likelihood is skipped where the prior is zero.
#[derive(Debug, Clone)]
pub struct LogPosterior<L, P> {
    likelihood: L,
    prior: P,
}

impl<L: LogPdf, P: LogPdf> LogPosterior<L, P> {
    pub fn new(likelihood: L, prior: P) -> Result<Self> {
        crate::error::check_dimension(likelihood.n_parameters(), prior.n_parameters())?;
        Ok(Self { likelihood, prior })
    }

    pub fn likelihood(&self) -> &L {
        &self.likelihood
    }

    pub fn prior(&self) -> &P {
        &self.prior
    }
}

impl<L: LogPdf, P: LogPdf> LogPdf for LogPosterior<L, P> {
    fn n_parameters(&self) -> usize {
        self.prior.n_parameters()
    }

    fn evaluate(&self, parameters: &[f64]) -> f64 {
        let prior = self.prior.evaluate(parameters);
        if prior == f64::NEG_INFINITY {
            return prior;
        }
        finite_or_neg_inf(self.likelihood.evaluate(parameters) + prior)
    }

    fn is_serial(&self) -> bool {
        self.likelihood.is_serial() || self.prior.is_serial()
    }
}
