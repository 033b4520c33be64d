//! Error measures: scalar functions of the parameters to minimise.
//!
//! Failed evaluations score `+inf` so derivative-free methods can keep going.

use std::sync::Arc;

use crate::densities::LogPdf;
use crate::error::Error;
use crate::problem::TimeSeriesProblem;

/// A function to minimise. Returns a finite value or `+inf`, never NaN.
///
/// Implementations may panic when handed a vector of the wrong length; the
/// controllers check dimensions before the first evaluation.
pub trait ErrorMeasure: Send + Sync {
    fn n_parameters(&self) -> usize;

    fn evaluate(&self, parameters: &[f64]) -> f64;

    fn is_serial(&self) -> bool {
        false
    }
}

macro_rules! forward_error_measure {
    ($($ptr:ty),*) => {$(
        impl<T: ErrorMeasure + ?Sized> ErrorMeasure for $ptr {
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
    )*};
}

forward_error_measure!(&T, Box<T>, Arc<T>);

fn squared_residual_sum(problem: &TimeSeriesProblem, parameters: &[f64]) -> f64 {
    match problem.residuals(parameters) {
        Ok(r) => {
            let sse = r.iter().map(|v| v * v).sum::<f64>();
            if sse.is_nan() {
                f64::INFINITY
            } else {
                sse
            }
        }
        Err(e @ Error::DimensionMismatch { .. }) => panic!("{e}"),
        Err(_) => f64::INFINITY,
    }
}

/// Sum of squared residuals over every time and output.
pub fn sum_of_squares_error(problem: &TimeSeriesProblem, parameters: &[f64]) -> f64 {
    squared_residual_sum(problem, parameters)
}

pub fn mean_squared_error(problem: &TimeSeriesProblem, parameters: &[f64]) -> f64 {
    let n = (problem.n_times() * problem.n_outputs()) as f64;
    squared_residual_sum(problem, parameters) / n
}

pub fn root_mean_squared_error(problem: &TimeSeriesProblem, parameters: &[f64]) -> f64 {
    mean_squared_error(problem, parameters).sqrt()
}

/// `-density(parameters)`, so that minimising it maximises the density.
pub fn probability_based_error(density: &dyn LogPdf, parameters: &[f64]) -> f64 {
    let v = density.evaluate(parameters);
    if v.is_nan() {
        f64::INFINITY
    } else {
        -v
    }
}

macro_rules! problem_measure {
    ($(#[$doc:meta])* $name:ident, $f:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone)]
        pub struct $name {
            problem: TimeSeriesProblem,
        }

        impl $name {
            pub fn new(problem: TimeSeriesProblem) -> Self {
                Self { problem }
            }

            pub fn problem(&self) -> &TimeSeriesProblem {
                &self.problem
            }
        }

        impl ErrorMeasure for $name {
            fn n_parameters(&self) -> usize {
                self.problem.n_parameters()
            }

            fn evaluate(&self, parameters: &[f64]) -> f64 {
                $f(&self.problem, parameters)
            }

            fn is_serial(&self) -> bool {
                self.problem.is_serial()
            }
        }
    };
}

problem_measure!(
    /// Summed over outputs without weighting.
    SumOfSquaresError,
    sum_of_squares_error
);
problem_measure!(MeanSquaredError, mean_squared_error);
problem_measure!(RootMeanSquaredError, root_mean_squared_error);

/// Turns any log-density into an error measure for maximum likelihood.
#[derive(Debug, Clone)]
pub struct ProbabilityBasedError<P> {
    density: P,
}

impl<P: LogPdf> ProbabilityBasedError<P> {
    pub fn new(density: P) -> Self {
        Self { density }
    }
}

impl<P: LogPdf> ErrorMeasure for ProbabilityBasedError<P> {
    fn n_parameters(&self) -> usize {
        self.density.n_parameters()
    }

    fn evaluate(&self, parameters: &[f64]) -> f64 {
        probability_based_error(&self.density, parameters)
    }

    fn is_serial(&self) -> bool {
        self.density.is_serial()
    }
}

/// Adapts a plain closure.
pub struct FunctionError<F> {
    n_parameters: usize,
    f: F,
}

impl<F> FunctionError<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    pub fn new(n_parameters: usize, f: F) -> Self {
        Self { n_parameters, f }
    }
}

impl<F> ErrorMeasure for FunctionError<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn n_parameters(&self) -> usize {
        self.n_parameters
    }

    fn evaluate(&self, parameters: &[f64]) -> f64 {
        let v = (self.f)(parameters);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}
