//! Analytic benchmark problems with known optima, moments or evidence.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::densities::{GaussianLogPrior, LogPdf};
use crate::error::{Error, Result};
use crate::measures::ErrorMeasure;
use crate::problem::{simulate, ForwardModel, TimeSeriesProblem};
use crate::random::RandomSource;

/// Logistic growth `y(t) = K / (1 + (K/y0 - 1) exp(-r t))` with parameters `(r, K)`.
#[derive(Debug, Clone)]
pub struct LogisticModel {
    initial_value: f64,
}

impl LogisticModel {
    pub fn new(initial_value: f64) -> Result<Self> {
        if !(initial_value.is_finite() && initial_value > 0.0) {
            return Err(Error::contract("logistic initial value must be positive"));
        }
        Ok(Self { initial_value })
    }

    pub fn initial_value(&self) -> f64 {
        self.initial_value
    }

    pub fn value(&self, growth_rate: f64, capacity: f64, t: f64) -> f64 {
        if t == 0.0 {
            return self.initial_value;
        }
        capacity / (1.0 + (capacity / self.initial_value - 1.0) * (-growth_rate * t).exp())
    }
}

impl Default for LogisticModel {
    fn default() -> Self {
        Self { initial_value: 1.0 }
    }
}

impl ForwardModel for LogisticModel {
    fn n_parameters(&self) -> usize {
        2
    }

    fn simulate(&self, parameters: &[f64], times: &[f64]) -> Result<DMatrix<f64>> {
        let (r, k) = (parameters[0], parameters[1]);
        Ok(DMatrix::from_iterator(times.len(), 1, times.iter().map(|&t| self.value(r, k, t))))
    }
}

/// `(1 - x)^2 + 100 (y - x^2)^2`, minimum 0 at `(1, 1)`.
pub fn rosenbrock(x: &[f64]) -> f64 {
    (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Rosenbrock;

impl ErrorMeasure for Rosenbrock {
    fn n_parameters(&self) -> usize {
        2
    }

    fn evaluate(&self, parameters: &[f64]) -> f64 {
        rosenbrock(parameters)
    }
}

/// Sum of squares `‖x‖²` in any dimension.
#[derive(Debug, Clone, Copy)]
pub struct Sphere(pub usize);

impl ErrorMeasure for Sphere {
    fn n_parameters(&self) -> usize {
        self.0
    }

    fn evaluate(&self, parameters: &[f64]) -> f64 {
        parameters.iter().map(|v| v * v).sum()
    }
}

/// Normalised multivariate normal target.
#[derive(Debug, Clone)]
pub struct GaussianTarget {
    inner: GaussianLogPrior,
    covariance: DMatrix<f64>,
}

impl GaussianTarget {
    pub fn new(mean: Vec<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        Ok(Self {
            inner: GaussianLogPrior::new(mean, covariance.clone())?,
            covariance,
        })
    }

    pub fn mean(&self) -> &[f64] {
        self.inner.mean()
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// CDF of the `i`-th marginal.
    pub fn marginal_cdf(&self, i: usize) -> impl Fn(f64) -> f64 + Send + Sync {
        let normal = Normal::new(self.mean()[i], self.covariance[(i, i)].sqrt()).expect("positive variance");
        move |x| normal.cdf(x)
    }
}

impl LogPdf for GaussianTarget {
    fn n_parameters(&self) -> usize {
        self.inner.n_parameters()
    }

    fn evaluate(&self, parameters: &[f64]) -> f64 {
        self.inner.evaluate(parameters)
    }
}

/// Banana-shaped target: a normal with variances `(100, 1, 1, ...)` in the
/// coordinates `(x1, x2 + b x1² - 100 b, x3, ...)`.
///
/// The warp has unit Jacobian, so the density stays normalised. Its mean is
/// the origin; `var(x1) = 100` and `var(x2) = 1 + 2·10⁴·b²`.
#[derive(Debug, Clone)]
pub struct TwistedGaussianTarget {
    dimension: usize,
    warp: f64,
}

impl TwistedGaussianTarget {
    const FIRST_AXIS_VARIANCE: f64 = 100.0;

    pub fn new(dimension: usize, warp: f64) -> Result<Self> {
        if dimension < 2 {
            return Err(Error::contract("twisted gaussian needs at least two dimensions"));
        }
        if !warp.is_finite() {
            return Err(Error::contract("warp must be finite"));
        }
        Ok(Self { dimension, warp })
    }

    pub fn mean(&self) -> Vec<f64> {
        vec![0.0; self.dimension]
    }

    pub fn variances(&self) -> Vec<f64> {
        let mut v = vec![1.0; self.dimension];
        v[0] = Self::FIRST_AXIS_VARIANCE;
        v[1] = 1.0 + 2.0 * Self::FIRST_AXIS_VARIANCE.powi(2) * self.warp * self.warp;
        v
    }

    /// Maps to the coordinates in which the target is a plain normal.
    pub fn untwist(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        y[1] = x[1] + self.warp * x[0] * x[0] - Self::FIRST_AXIS_VARIANCE * self.warp;
        y
    }
}

impl LogPdf for TwistedGaussianTarget {
    fn n_parameters(&self) -> usize {
        self.dimension
    }

    fn evaluate(&self, parameters: &[f64]) -> f64 {
        let y = self.untwist(parameters);
        let quad = y[0] * y[0] / Self::FIRST_AXIS_VARIANCE + y[1..].iter().map(|v| v * v).sum::<f64>();
        let log_norm = -0.5 * self.dimension as f64 * (2.0 * std::f64::consts::PI).ln()
            - 0.5 * Self::FIRST_AXIS_VARIANCE.ln();
        let v = log_norm - 0.5 * quad;
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }
}

/// One-dimensional mixture of two unit-variance normals centred at
/// `±separation/2`, weighted `(w, 1 - w)` for the left and right mode.
#[derive(Debug, Clone)]
pub struct BimodalTarget {
    separation: f64,
    left_weight: f64,
}

impl BimodalTarget {
    pub fn new(separation: f64, left_weight: f64) -> Result<Self> {
        if !(separation.is_finite() && separation >= 0.0) {
            return Err(Error::contract("separation must be finite and non-negative"));
        }
        if !(left_weight > 0.0 && left_weight < 1.0) {
            return Err(Error::contract("mode weight must lie strictly between 0 and 1"));
        }
        Ok(Self {
            separation,
            left_weight,
        })
    }

    pub fn modes(&self) -> [f64; 2] {
        [-self.separation / 2.0, self.separation / 2.0]
    }

    pub fn cdf(&self) -> impl Fn(f64) -> f64 + Send + Sync {
        let [a, b] = self.modes();
        let (na, nb) = (Normal::new(a, 1.0).unwrap(), Normal::new(b, 1.0).unwrap());
        let w = self.left_weight;
        move |x| w * na.cdf(x) + (1.0 - w) * nb.cdf(x)
    }
}

impl LogPdf for BimodalTarget {
    fn n_parameters(&self) -> usize {
        1
    }

    fn evaluate(&self, parameters: &[f64]) -> f64 {
        let [a, b] = self.modes();
        let x = parameters[0];
        let la = self.left_weight.ln() - 0.5 * (x - a).powi(2);
        let lb = (1.0 - self.left_weight).ln() - 0.5 * (x - b).powi(2);
        let m = la.max(lb);
        let v = m + ((la - m).exp() + (lb - m).exp()).ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }
}

/// Simulates `model` at the true parameters and adds i.i.d. Gaussian noise.
pub fn generate_synthetic_data(
    model: Arc<dyn ForwardModel>,
    true_parameters: &[f64],
    times: Vec<f64>,
    noise_sigma: f64,
    rng: &mut RandomSource,
) -> Result<TimeSeriesProblem> {
    if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
        return Err(Error::contract("noise level must be finite and non-negative"));
    }
    let clean = simulate(model.as_ref(), true_parameters, &times)?;
    let noisy = if noise_sigma == 0.0 {
        clean
    } else {
        clean.map(|v| v + noise_sigma * rng.sample::<f64, _>(StandardNormal))
    };
    Ok(TimeSeriesProblem::new(model, times, noisy)?.with_true_parameters(true_parameters.to_vec()))
}
