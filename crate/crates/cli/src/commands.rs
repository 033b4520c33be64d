//! The `optimise` and `sample` commands.

use std::path::Path;

use serde_json::{json, Map, Value};
use tsinfer::optimisers::{Objective, OptimisationController, OptimisationRecord, StoppingCriteria};
use tsinfer::samplers::{McmcController, McmcMethod, McmcRecord, NestedMethod, NestedSampler};
use tsinfer::densities::UniformLogPrior;
use tsinfer::diagnostics::{ess_per_dimension, rhat_per_dimension};
use tsinfer::{ErrorMeasure, FnSink, LogPdf, LogPosterior, Method, RandomSource, GENERATOR_ID};

use crate::config::Config;
use crate::data::{format_f64, write_csv, write_table};
use crate::output::{hyperparameters, number, numbers, timestamp, write_json};
use crate::setup::{Problem, Scored, Settings};
use crate::{CliError, RunArgs};

const PROGRESS_EVERY: usize = 100;

fn config_error(e: tsinfer::Error) -> CliError {
    CliError::Config(e.to_string())
}

/// A failure cap hit during the run outranks whatever error it caused.
fn finish<T>(problem: &Problem, outcome: tsinfer::Result<T>) -> Result<T, CliError> {
    problem.check_failures()?;
    outcome.map_err(|e| CliError::Run(e.to_string()))
}

fn create_out(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))
}

fn header(command: &str, method: &str, seed: u64, workers: usize, hyper: &[(String, f64)], problem: &Problem) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("tool".into(), json!("tsinfer"));
    m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    m.insert("command".into(), json!(command));
    m.insert("method".into(), json!(method));
    m.insert("seed".into(), json!(seed));
    m.insert("generator".into(), json!(GENERATOR_ID));
    m.insert("workers".into(), json!(workers));
    m.insert("hyperparameters".into(), hyperparameters(hyper));
    m.insert("parameter_names".into(), json!(problem.names));
    m.insert("x0".into(), numbers(&problem.x0));
    if let Some(n) = problem.failed_evaluations() {
        m.insert("failed_evaluations".into(), json!(n));
    }
    m.insert("timestamp".into(), timestamp());
    m
}

/// An error measure that is infinite outside the prior's box.
struct Bounded<'a> {
    measure: &'a dyn ErrorMeasure,
    bounds: &'a UniformLogPrior,
}

impl ErrorMeasure for Bounded<'_> {
    fn n_parameters(&self) -> usize {
        self.measure.n_parameters()
    }

    fn evaluate(&self, parameters: &[f64]) -> f64 {
        if self.bounds.contains(parameters) {
            self.measure.evaluate(parameters)
        } else {
            f64::INFINITY
        }
    }

    fn is_serial(&self) -> bool {
        self.measure.is_serial()
    }
}

pub fn optimise(args: &RunArgs) -> Result<(), CliError> {
    let config = Config::load(&args.config)?;
    let settings = Settings::resolve(&config, args, "cmaes")?;
    let method: Method = settings.method.parse().map_err(config_error)?;
    let problem = Problem::load(&config, "sum_of_squares")?;
    let criteria = stopping_criteria(&config, &settings)?;

    let bounded;
    let posterior;
    let objective = match (&problem.scored, &problem.prior) {
        (Scored::Error(e), None) => Objective::Minimise(e.as_ref()),
        (Scored::Error(e), Some(bounds)) => {
            bounded = Bounded {
                measure: e.as_ref(),
                bounds,
            };
            Objective::Minimise(&bounded)
        }
        (Scored::Density(d), None) => Objective::Maximise(d.as_ref()),
        (Scored::Density(d), Some(prior)) => {
            posterior = LogPosterior::new(d.as_ref(), prior).map_err(config_error)?;
            Objective::Maximise(&posterior)
        }
    };
    let mut controller = OptimisationController::new(objective, problem.x0.clone())
        .method(method)
        .criteria(criteria)
        .workers(settings.workers)
        .seed(settings.seed);
    if let Some(s) = &problem.sigma0 {
        controller = controller.sigma0(s.clone());
    }
    if let Some(n) = config.method.parse("population_size")? {
        controller = controller.population_size(n);
    }
    create_out(&settings.out)?;

    let quiet = settings.quiet;
    let mut progress = FnSink(|r: &OptimisationRecord| {
        if !quiet && r.iteration.is_multiple_of(PROGRESS_EVERY) {
            eprintln!("iteration {}: best {} after {} evaluations", r.iteration, r.best_score, r.evaluations);
        }
    });
    let outcome = controller.run(&mut progress);
    let result = finish(&problem, outcome)?;

    let meta = &result.metadata;
    let mut summary = header("optimise", &meta.method, meta.seed, meta.workers, &meta.hyperparameters, &problem);
    summary.insert("objective".into(), json!(if result.maximised { "maximise" } else { "minimise" }));
    summary.insert("parameters".into(), numbers(&result.best));
    summary.insert("best_score".into(), number(result.best_score));
    summary.insert("objective_value".into(), number(result.objective_value()));
    summary.insert("stop_reason".into(), json!(result.stop_reason.as_str()));
    summary.insert("iterations".into(), json!(result.iterations));
    summary.insert("evaluations".into(), json!(result.evaluations));
    write_json(&settings.out.join("result.json"), &Value::Object(summary))?;

    // wall-clock time is left out so that repeated runs give identical logs
    let rows = result
        .log
        .iter()
        .map(|r| vec![r.iteration.to_string(), r.evaluations.to_string(), format_f64(r.best_score)]);
    let columns = ["iteration", "evaluations", "best_score"].map(String::from);
    write_table(&settings.out.join("log.csv"), &columns, rows)?;
    if !quiet {
        eprintln!(
            "{}: best score {} ({}); results in {}",
            meta.method,
            result.best_score,
            result.stop_reason.as_str(),
            settings.out.display()
        );
    }
    Ok(())
}

fn stopping_criteria(config: &Config, settings: &Settings) -> Result<StoppingCriteria, CliError> {
    let m = &config.method;
    let mut criteria = StoppingCriteria::default();
    if let Some(n) = settings.iterations {
        criteria.max_iterations = Some(n);
    }
    let (default_count, default_tolerance) = criteria.max_unchanged.unwrap_or((200, 1e-11));
    let count = m.parse_or("max_unchanged", default_count)?;
    let tolerance = m.parse_or("unchanged_tolerance", default_tolerance)?;
    // zero switches the criterion off
    criteria.max_unchanged = (count > 0).then_some((count, tolerance));
    criteria.target_score = m.parse("target")?;
    Ok(criteria)
}

pub fn sample(args: &RunArgs) -> Result<(), CliError> {
    let config = Config::load(&args.config)?;
    let settings = Settings::resolve(&config, args, "adaptive")?;
    let problem = Problem::load(&config, "gaussian")?;
    let density = match &problem.scored {
        Scored::Density(d) => d.as_ref(),
        Scored::Error(_) => {
            return Err(CliError::Config(
                "sampling needs a log-density; set [problem] measure to gaussian or gaussian_known_sigma".into(),
            ))
        }
    };
    match settings.method.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
        "nestedrejection" => nested(&config, &settings, &problem, density, NestedMethod::Rejection),
        "nestedellipsoid" => {
            let NestedMethod::Ellipsoid { enlargement, first, refit } = NestedMethod::ellipsoid() else {
                unreachable!("ellipsoid() builds the ellipsoid variant")
            };
            let m = &config.method;
            let method = NestedMethod::Ellipsoid {
                enlargement: m.parse_or("enlargement", enlargement)?,
                first: m.parse_or("first", first)?,
                refit: m.parse_or("refit", refit)?,
            };
            nested(&config, &settings, &problem, density, method)
        }
        _ => mcmc(&config, &settings, &problem, density),
    }
}

fn mcmc(config: &Config, settings: &Settings, problem: &Problem, density: &dyn LogPdf) -> Result<(), CliError> {
    let mut method: McmcMethod = settings.method.parse().map_err(config_error)?;
    if let (McmcMethod::Population { .. }, Some(k)) = (method, config.method.parse("temperatures")?) {
        method = McmcMethod::Population { temperatures: k };
    }
    let posterior;
    let target: &dyn LogPdf = match &problem.prior {
        Some(prior) => {
            posterior = LogPosterior::new(density, prior).map_err(config_error)?;
            &posterior
        }
        None => density,
    };
    let mut controller = McmcController::new(target, vec![problem.x0.clone(); settings.chains])
        .method(method)
        .workers(settings.workers)
        .seed(settings.seed);
    if let Some(n) = settings.iterations {
        controller = controller.iterations(n);
    }
    if let Some(s) = &problem.sigma0 {
        controller = controller.sigma0(s.clone());
    }
    if let Some(prior) = &problem.prior {
        controller = controller.prior(prior);
    }
    create_out(&settings.out)?;

    let quiet = settings.quiet;
    let mut progress = FnSink(|r: &McmcRecord| {
        if !quiet && r.iteration.is_multiple_of(PROGRESS_EVERY) {
            let rates: Vec<String> = r.acceptance_rates.iter().map(|a| format!("{a:.3}")).collect();
            eprintln!("iteration {}: acceptance {}", r.iteration, rates.join(" "));
        }
    });
    let outcome = controller.run(&mut progress);
    let result = finish(problem, outcome)?;

    for (j, chain) in result.chains.iter().enumerate() {
        write_csv(&settings.out.join(format!("chain_{j}.csv")), &problem.names, chain.iter().cloned())?;
    }
    let mut columns = vec!["iteration".to_string(), "evaluations".to_string()];
    columns.extend((0..result.chains.len()).map(|j| format!("acceptance_{j}")));
    let rows = result.log.iter().map(|r| {
        let mut row = vec![r.iteration.to_string(), r.evaluations.to_string()];
        row.extend(r.acceptance_rates.iter().map(|a| format_f64(*a)));
        row
    });
    write_table(&settings.out.join("log.csv"), &columns, rows)?;

    // diagnostics use the second half of each chain
    let kept: Vec<Vec<Vec<f64>>> = result.chains.iter().map(|c| c[c.len() / 2..].to_vec()).collect();
    let meta = &result.metadata;
    let mut summary = header("sample", &meta.method, meta.seed, meta.workers, &meta.hyperparameters, problem);
    summary.insert("chains".into(), json!(result.chains.len()));
    summary.insert("iterations".into(), json!(result.chains[0].len() - 1));
    summary.insert("evaluations".into(), json!(result.evaluations));
    summary.insert("acceptance_rates".into(), numbers(&result.acceptance_rates));
    if kept.len() < 2 {
        summary.insert("rhat".into(), Value::Null);
        summary.insert("rhat_note".into(), json!("unavailable: R-hat requires at least 2 chains"));
    } else {
        match rhat_per_dimension(&kept) {
            Ok(r) => {
                summary.insert("rhat".into(), numbers(&r));
            }
            Err(e) => {
                summary.insert("rhat".into(), Value::Null);
                summary.insert("rhat_note".into(), json!(format!("unavailable: {e}")));
            }
        }
    }
    let ess: tsinfer::Result<Vec<Vec<f64>>> = kept.iter().map(|c| ess_per_dimension(c)).collect();
    match ess {
        Ok(per_chain) => {
            let total: Vec<f64> = (0..problem.n_parameters())
                .map(|i| per_chain.iter().map(|c| c[i]).sum())
                .collect();
            summary.insert("ess".into(), numbers(&total));
        }
        Err(e) => {
            summary.insert("ess".into(), Value::Null);
            summary.insert("ess_note".into(), json!(format!("unavailable: {e}")));
        }
    }
    write_json(&settings.out.join("summary.json"), &Value::Object(summary))?;
    if !quiet {
        eprintln!("{}: {} chains written to {}", meta.method, result.chains.len(), settings.out.display());
    }
    Ok(())
}

fn nested(
    config: &Config,
    settings: &Settings,
    problem: &Problem,
    likelihood: &dyn LogPdf,
    method: NestedMethod,
) -> Result<(), CliError> {
    let prior = problem.prior.clone().ok_or_else(|| {
        CliError::Config("nested sampling needs a prior: set [problem] lower and upper".into())
    })?;
    let m = &config.method;
    let mut sampler = NestedSampler::new(prior, method, RandomSource::new(settings.seed)).map_err(config_error)?;
    if let Some(n) = m.parse("live_points")? {
        sampler = sampler.with_live_points(n).map_err(config_error)?;
    }
    if let Some(n) = m.parse("max_draws")? {
        sampler = sampler.with_max_draws(n).map_err(config_error)?;
    }
    if let Some(t) = m.parse("tolerance")? {
        sampler = sampler.with_tolerance(t).map_err(config_error)?;
    }
    let max_iterations = settings.iterations.unwrap_or(NestedSampler::<UniformLogPrior>::DEFAULT_MAX_ITERATIONS);
    sampler = sampler.with_max_iterations(max_iterations);
    create_out(&settings.out)?;

    let mut log = Vec::new();
    let mut record = |s: &NestedSampler<UniformLogPrior>| {
        log.push(vec![
            s.iterations().to_string(),
            s.evaluations().to_string(),
            format_f64(s.log_volume()),
            format_f64(s.accumulated_log_evidence()),
        ])
    };
    let outcome = (|| {
        sampler.initialise(likelihood)?;
        record(&sampler);
        while !sampler.is_finished() {
            sampler.step(likelihood)?;
            record(&sampler);
            if !settings.quiet && sampler.iterations() % (10 * PROGRESS_EVERY) == 0 {
                eprintln!(
                    "iteration {}: log Z so far {:.4} after {} evaluations",
                    sampler.iterations(),
                    sampler.accumulated_log_evidence(),
                    sampler.evaluations()
                );
            }
        }
        sampler.result()
    })();
    let result = finish(problem, outcome)?;

    let columns = ["iteration", "evaluations", "log_volume", "log_evidence"].map(String::from);
    write_table(&settings.out.join("log.csv"), &columns, log)?;
    let mut columns = problem.names.clone();
    columns.extend(["log_likelihood".to_string(), "weight".to_string()]);
    let rows = result
        .points
        .iter()
        .zip(result.log_likelihoods.iter().zip(&result.weights))
        .map(|(p, (l, w))| p.iter().copied().chain([*l, *w]).collect());
    write_csv(&settings.out.join("samples.csv"), &columns, rows)?;

    let mut hyper = vec![
        ("live_points".to_string(), sampler.n_live() as f64),
        ("max_iterations".to_string(), max_iterations as f64),
    ];
    if let Some(d) = m.parse::<u64>("max_draws")? {
        hyper.push(("max_draws".to_string(), d as f64));
    }
    if let NestedMethod::Ellipsoid { enlargement, first, refit } = method {
        hyper.push(("enlargement".to_string(), enlargement));
        hyper.push(("first".to_string(), first as f64));
        hyper.push(("refit".to_string(), refit as f64));
    }
    let mut summary = header("sample", method.name(), settings.seed, 1, &hyper, problem);
    summary.insert("log_evidence".into(), number(result.log_evidence));
    summary.insert("log_evidence_error".into(), number(result.log_evidence_error));
    summary.insert("information".into(), number(result.information));
    summary.insert("iterations".into(), json!(result.iterations));
    summary.insert("evaluations".into(), json!(result.evaluations));
    summary.insert("posterior_mean".into(), numbers(&result.posterior_mean()));
    write_json(&settings.out.join("summary.json"), &Value::Object(summary))?;
    if !settings.quiet {
        eprintln!(
            "{}: log Z = {:.4} ± {:.4}; results in {}",
            method.name(),
            result.log_evidence,
            result.log_evidence_error,
            settings.out.display()
        );
    }
    Ok(())
}
