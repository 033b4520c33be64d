//! Turns a config plus command-line flags into a runnable problem.

use std::path::PathBuf;
use std::sync::Arc;

use nalgebra::DMatrix;
use tsinfer::densities::{GaussianKnownSigmaLogLikelihood, GaussianLogLikelihood, UniformLogPrior};
use tsinfer::measures::{MeanSquaredError, RootMeanSquaredError, SumOfSquaresError};
use tsinfer::toys::{BimodalTarget, GaussianTarget, LogisticModel, Rosenbrock};
use tsinfer::{ErrorMeasure, ForwardModel, LogPdf, TimeSeriesProblem};

use crate::config::{Config, Section};
use crate::data::read_timeseries_csv;
use crate::model::{ExternalModel, FailureCounter};
use crate::{CliError, RunArgs};

const PROBLEM_KEYS: &[&str] = &[
    "model",
    "data",
    "initial_value",
    "command",
    "n_parameters",
    "parameter_names",
    "max_failures",
    "measure",
    "sigma",
    "lower",
    "upper",
    "x0",
    "sigma0",
    "mean",
    "covariance",
    "variance",
    "separation",
    "weight",
];
const METHOD_KEYS: &[&str] = &[
    "name",
    "population_size",
    "max_unchanged",
    "unchanged_tolerance",
    "target",
    "temperatures",
    "live_points",
    "max_draws",
    "tolerance",
    "enlargement",
    "first",
    "refit",
];
const RUN_KEYS: &[&str] = &["iterations", "chains", "seed", "workers", "out"];

pub const DEFAULT_CHAINS: usize = 3;
pub const DEFAULT_MAX_FAILURES: usize = 10;

fn config_error(e: tsinfer::Error) -> CliError {
    CliError::Config(e.to_string())
}

fn check_keys(section: &Section, name: &str, allowed: &[&str]) -> Result<(), CliError> {
    match section.keys().find(|k| !allowed.contains(k)) {
        Some(k) => Err(CliError::Config(format!("[{name}] unknown setting '{k}'"))),
        None => Ok(()),
    }
}

/// Run settings after flags have overridden the config.
#[derive(Debug, Clone)]
pub struct Settings {
    pub method: String,
    pub iterations: Option<usize>,
    pub chains: usize,
    pub seed: u64,
    pub workers: usize,
    pub out: PathBuf,
    pub quiet: bool,
}

impl Settings {
    pub fn resolve(config: &Config, args: &RunArgs, default_method: &str) -> Result<Self, CliError> {
        check_keys(&config.problem, "problem", PROBLEM_KEYS)?;
        check_keys(&config.method, "method", METHOD_KEYS)?;
        check_keys(&config.run, "run", RUN_KEYS)?;
        let run = &config.run;
        let out = match (&args.out, run.get("out")) {
            (Some(p), _) => p.clone(),
            (None, Some(p)) => config.resolve(p),
            (None, None) => config.base.join("output"),
        };
        let settings = Self {
            method: args
                .method
                .clone()
                .or_else(|| config.method.get("name").map(str::to_string))
                .unwrap_or_else(|| default_method.to_string()),
            iterations: args.iterations.or(run.parse("iterations")?),
            chains: args.chains.map_or_else(|| run.parse_or("chains", DEFAULT_CHAINS), Ok)?,
            seed: args.seed.map_or_else(|| run.parse_or("seed", 0), Ok)?,
            workers: args.workers.map_or_else(|| run.parse_or("workers", 1), Ok)?,
            out,
            quiet: args.quiet,
        };
        if settings.workers == 0 {
            return Err(CliError::Config("workers must be at least 1".into()));
        }
        if settings.chains == 0 {
            return Err(CliError::Config("chains must be at least 1".into()));
        }
        Ok(settings)
    }
}

/// What the configured problem scores.
pub enum Scored {
    /// An error measure, minimised.
    Error(Box<dyn ErrorMeasure>),
    /// A log-likelihood or log-density, maximised or sampled.
    Density(Box<dyn LogPdf>),
}

pub struct Problem {
    pub names: Vec<String>,
    pub x0: Vec<f64>,
    pub sigma0: Option<Vec<f64>>,
    pub prior: Option<UniformLogPrior>,
    pub scored: Scored,
    /// Present for external models.
    pub failures: Option<Arc<FailureCounter>>,
}

impl Problem {
    /// `default_measure` applies to time-series models without a `measure`.
    pub fn load(config: &Config, default_measure: &str) -> Result<Self, CliError> {
        let p = &config.problem;
        let model = p.require("model")?;
        let mut failures = None;
        let (scored, names) = match model {
            "logistic" | "external" => {
                let path = config.resolve(p.require("data")?);
                let data = read_timeseries_csv(&path)?;
                let (forward, mut names): (Arc<dyn ForwardModel>, Vec<String>) = if model == "logistic" {
                    if data.observations.ncols() != 1 {
                        return Err(CliError::Config("the logistic model has one output".into()));
                    }
                    let m = LogisticModel::new(p.parse_or("initial_value", 1.0)?).map_err(config_error)?;
                    (Arc::new(m), vec!["r".into(), "K".into()])
                } else {
                    let n: usize = p.parse("n_parameters")?.ok_or_else(|| {
                        CliError::Config("[problem] n_parameters: required for external models".into())
                    })?;
                    let counter = Arc::new(FailureCounter::new(p.parse_or("max_failures", DEFAULT_MAX_FAILURES)?));
                    let m = ExternalModel::new(
                        p.require("command")?,
                        config.base.clone(),
                        n,
                        data.observations.ncols(),
                        counter.clone(),
                    )
                    .ok_or_else(|| CliError::Config("[problem] command: empty".into()))?;
                    failures = Some(counter);
                    let names: Vec<String> = match p.get("parameter_names") {
                        Some(raw) => raw.split(',').map(|s| s.trim().to_string()).collect(),
                        None => (1..=n).map(|i| format!("p{i}")).collect(),
                    };
                    if names.len() != n {
                        return Err(CliError::Config(format!(
                            "[problem] parameter_names: expected {n} names, found {}",
                            names.len()
                        )));
                    }
                    (Arc::new(m), names)
                };
                let problem = TimeSeriesProblem::new(forward, data.times, data.observations).map_err(config_error)?;
                let measure = p.get("measure").unwrap_or(default_measure);
                let scored = match measure {
                    "sum_of_squares" => Scored::Error(Box::new(SumOfSquaresError::new(problem))),
                    "mean_squared" => Scored::Error(Box::new(MeanSquaredError::new(problem))),
                    "root_mean_squared" => Scored::Error(Box::new(RootMeanSquaredError::new(problem))),
                    "gaussian" => {
                        names.extend(data.output_names.iter().map(|o| format!("sigma_{o}")));
                        Scored::Density(Box::new(GaussianLogLikelihood::new(problem)))
                    }
                    "gaussian_known_sigma" => {
                        let sigma = p.list("sigma")?.ok_or_else(|| {
                            CliError::Config("[problem] sigma: required for gaussian_known_sigma".into())
                        })?;
                        let l = GaussianKnownSigmaLogLikelihood::new(problem, sigma).map_err(config_error)?;
                        Scored::Density(Box::new(l))
                    }
                    other => return Err(CliError::Config(format!("[problem] measure: unknown measure '{other}'"))),
                };
                (scored, names)
            }
            "gaussian" => {
                let mean = p.list("mean")?.ok_or_else(|| CliError::Config("[problem] mean: missing".into()))?;
                let d = mean.len();
                let covariance = match (p.list("covariance")?, p.list_of("variance", d)?) {
                    (Some(_), Some(_)) => {
                        return Err(CliError::Config("[problem] give either covariance or variance".into()))
                    }
                    (Some(c), None) if c.len() == d * d => DMatrix::from_row_slice(d, d, &c),
                    (Some(c), None) => {
                        return Err(CliError::Config(format!(
                            "[problem] covariance: expected {} values, found {}",
                            d * d,
                            c.len()
                        )))
                    }
                    (None, Some(v)) => DMatrix::from_diagonal(&v.into()),
                    (None, None) => DMatrix::identity(d, d),
                };
                let target = GaussianTarget::new(mean, covariance).map_err(config_error)?;
                (Scored::Density(Box::new(target)), coordinate_names(d))
            }
            "bimodal" => {
                let target = BimodalTarget::new(p.parse_or("separation", 10.0)?, p.parse_or("weight", 0.5)?)
                    .map_err(config_error)?;
                (Scored::Density(Box::new(target)), coordinate_names(1))
            }
            "rosenbrock" => (Scored::Error(Box::new(Rosenbrock)), coordinate_names(2)),
            other => return Err(CliError::Config(format!("[problem] model: unknown model '{other}'"))),
        };
        let n = names.len();
        let x0 = p.list("x0")?.ok_or_else(|| CliError::Config("[problem] x0: missing".into()))?;
        if x0.len() != n {
            return Err(CliError::Config(format!("[problem] x0: expected {n} values, found {}", x0.len())));
        }
        let prior = match (p.list_of("lower", n)?, p.list_of("upper", n)?) {
            (Some(lower), Some(upper)) => Some(UniformLogPrior::new(lower, upper).map_err(config_error)?),
            (None, None) => None,
            _ => return Err(CliError::Config("[problem] lower and upper must be given together".into())),
        };
        Ok(Self {
            names,
            x0,
            sigma0: p.list_of("sigma0", n)?,
            prior,
            scored,
            failures,
        })
    }

    pub fn n_parameters(&self) -> usize {
        self.names.len()
    }

    /// Exit status 3 takes precedence over any other failure.
    pub fn check_failures(&self) -> Result<(), CliError> {
        match &self.failures {
            Some(f) if f.exceeded() => Err(CliError::FailureCap(f.summary())),
            _ => Ok(()),
        }
    }

    pub fn failed_evaluations(&self) -> Option<usize> {
        self.failures.as_ref().map(|f| f.count())
    }
}

fn coordinate_names(d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("x{i}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> Result<Problem, CliError> {
        Problem::load(&Config::parse(text, std::env::temp_dir()).unwrap(), "sum_of_squares")
    }

    #[test]
    fn toy_problems() {
        let g = load("[problem]\nmodel = gaussian\nmean = 1, 2\nvariance = 0.5\nx0 = 0, 0\n").unwrap();
        assert_eq!(g.names, ["x1", "x2"]);
        assert!(matches!(g.scored, Scored::Density(_)));
        let r = load("[problem]\nmodel = rosenbrock\nx0 = -1, 1\nlower = -5\nupper = 5\n").unwrap();
        assert!(matches!(r.scored, Scored::Error(_)));
        assert_eq!(r.prior.unwrap().upper(), &[5.0, 5.0]);
    }

    #[test]
    fn config_mistakes() {
        let err = |text: &str| load(text).err().unwrap().to_string();
        assert!(err("[problem]\nmodel = nope\nx0 = 1\n").contains("unknown model"));
        assert!(err("[problem]\nmodel = rosenbrock\nx0 = 1\n").contains("expected 2 values"));
        assert!(err("[problem]\nmodel = rosenbrock\nx0 = 1, 1\nlower = 0\n").contains("together"));
        assert!(err("[problem]\nmodel = gaussian\nmean = 0\ncovariance = 1, 2\nx0 = 0\n").contains("expected 1 values"));
        assert!(err("[problem]\nmodel = logistic\ndata = /no/such/file.csv\nx0 = 1, 1\n").contains("/no/such/file.csv"));
    }

    #[test]
    fn unknown_keys_rejected() {
        let config = Config::parse("[run]\nsede = 3\n", std::env::temp_dir()).unwrap();
        let e = Settings::resolve(&config, &RunArgs::default(), "cmaes").unwrap_err();
        assert!(e.to_string().contains("sede"));
    }

    #[test]
    fn flags_override_config() {
        let config = Config::parse("[method]\nname = xnes\n[run]\nseed = 4\nworkers = 2\n", PathBuf::from("/base")).unwrap();
        let args = RunArgs {
            seed: Some(9),
            ..RunArgs::default()
        };
        let s = Settings::resolve(&config, &args, "cmaes").unwrap();
        assert_eq!((s.method.as_str(), s.seed, s.workers, s.chains), ("xnes", 9, 2, DEFAULT_CHAINS));
        assert_eq!(s.out, PathBuf::from("/base/output"));
    }
}
