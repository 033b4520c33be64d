//! Property checks shared by the proptest suite and the acceptance run.
#![allow(dead_code)]

use nalgebra::DMatrix;
use tsinfer::optimisers::{
    Cmaes, Objective, OptimisationController, OptimisationResult, StoppingCriteria, Xnes,
};
use tsinfer::samplers::{McmcController, McmcMethod, McmcResult};
use tsinfer::toys::{GaussianTarget, TwistedGaussianTarget};
use tsinfer::{LogPdf, Method, NullSink, Optimiser, RandomSource};

pub type Check = Result<(), String>;

/// Weighted, shifted sphere so coordinates are not interchangeable.
pub fn bowl(x: &[f64]) -> f64 {
    x.iter()
        .enumerate()
        .map(|(i, v)| (i as f64 + 1.0) * (v - 0.5 * i as f64).powi(2))
        .sum()
}

pub fn is_spd(m: &DMatrix<f64>) -> bool {
    let scale = m.amax();
    m.iter().all(|v| v.is_finite())
        && (m - m.transpose()).amax() <= 1e-10 * scale
        && m.clone().cholesky().is_some()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Ask,
    Tell,
    TellWrongLength,
}

/// Drives an optimiser through `ops`, checking every out-of-order call is
/// rejected and leaves the state usable.
pub fn alternation(method: Method, seed: u64, ops: &[Op]) -> Check {
    let mut opt = method
        .build(&[0.5, -0.5, 1.0], &[0.3; 3], None, RandomSource::new(seed))
        .map_err(|e| e.to_string())?;
    let mut pending: Option<usize> = None;
    for (i, op) in ops.iter().enumerate() {
        match (op, pending) {
            (Op::Ask, None) => pending = Some(opt.ask().map_err(|e| format!("op {i}: {e}"))?.len()),
            (Op::Ask, Some(_)) => {
                if opt.ask().is_ok() {
                    return Err(format!("op {i}: second ask accepted"));
                }
            }
            (Op::Tell, Some(n)) => {
                opt.tell(&vec![1.0; n]).map_err(|e| format!("op {i}: {e}"))?;
                pending = None;
            }
            (Op::Tell, None) => {
                if opt.tell(&vec![1.0; opt.population_size()]).is_ok() {
                    return Err(format!("op {i}: tell without ask accepted"));
                }
            }
            (Op::TellWrongLength, _) => {
                if opt.tell(&vec![1.0; opt.population_size() + 1]).is_ok() {
                    return Err(format!("op {i}: wrong-length tell accepted"));
                }
            }
        }
    }
    Ok(())
}

/// Best-so-far never increases and always equals the minimum score told.
pub fn monotone_best(method: Method, seed: u64, iterations: usize) -> Check {
    let mut opt = method
        .build(&[2.0, -1.0, 0.5, 3.0], &[0.5; 4], None, RandomSource::new(seed))
        .map_err(|e| e.to_string())?;
    let mut lowest = f64::INFINITY;
    let mut previous = f64::INFINITY;
    for it in 0..iterations {
        let xs = opt.ask().map_err(|e| e.to_string())?;
        // a rugged objective so that many tells bring no improvement
        let scores: Vec<f64> = xs
            .iter()
            .map(|x| bowl(x) + 2.0 * x.iter().map(|v| (5.0 * v).sin().abs()).sum::<f64>())
            .collect();
        lowest = scores.iter().copied().fold(lowest, f64::min);
        opt.tell(&scores).map_err(|e| e.to_string())?;
        let (_, best) = opt.best().ok_or("no best after tell")?;
        if best > previous {
            return Err(format!("iteration {it}: best rose from {previous} to {best}"));
        }
        if best != lowest {
            return Err(format!("iteration {it}: best {best} differs from lowest score {lowest}"));
        }
        previous = best;
    }
    Ok(())
}

pub type Transform = (&'static str, fn(f64) -> f64);

pub const TRANSFORMS: [Transform; 6] = [
    ("10f", |f| 10.0 * f),
    ("3f+7", |f| 3.0 * f + 7.0),
    ("sqrt", f64::sqrt),
    ("f^3+f", |f| f * f * f + f),
    ("ln(1+f)", f64::ln_1p),
    ("-exp(-f)", |f| -(-f).exp()),
];

/// Two optimisers with the same seed, one fed `f` and one fed `g(f)`, must
/// propose identical points throughout.
pub fn rank_invariance(method: Method, seed: u64, transform: usize, iterations: usize) -> Check {
    let (name, g) = TRANSFORMS[transform];
    let build = || method.build(&[1.0, -2.0, 0.5], &[0.7; 3], None, RandomSource::new(seed));
    let mut a = build().map_err(|e| e.to_string())?;
    let mut b = build().map_err(|e| e.to_string())?;
    for it in 0..iterations {
        let pa = a.ask().map_err(|e| e.to_string())?;
        let pb = b.ask().map_err(|e| e.to_string())?;
        if pa != pb {
            return Err(format!("{method} under {name}: proposals diverged at iteration {it}"));
        }
        let fa: Vec<f64> = pa.iter().map(|x| bowl(x)).collect();
        let fb: Vec<f64> = fa.iter().map(|&f| g(f)).collect();
        a.tell(&fa).map_err(|e| e.to_string())?;
        b.tell(&fb).map_err(|e| e.to_string())?;
    }
    let (xa, _) = a.best().ok_or("no best")?;
    let (xb, _) = b.best().ok_or("no best")?;
    if xa != xb {
        return Err(format!("{method} under {name}: argmin differs"));
    }
    Ok(())
}

fn banana_score(target: &TwistedGaussianTarget, x: &[f64]) -> f64 {
    -target.evaluate(x)
}

/// Search distributions stay symmetric positive definite on the banana.
pub fn spd_on_banana(seed: u64, iterations: usize) -> Check {
    let target = TwistedGaussianTarget::new(2, 0.1).map_err(|e| e.to_string())?;
    let x0 = [5.0, -3.0];
    let mut cmaes = Cmaes::new(&x0, &[1.0, 1.0], None, RandomSource::new(seed)).map_err(|e| e.to_string())?;
    let mut xnes = Xnes::new(&x0, &[1.0, 1.0], None, RandomSource::new(seed)).map_err(|e| e.to_string())?;
    for it in 0..iterations {
        let xs = cmaes.ask().map_err(|e| e.to_string())?;
        let scores: Vec<f64> = xs.iter().map(|x| banana_score(&target, x)).collect();
        cmaes.tell(&scores).map_err(|e| format!("cmaes iteration {it}: {e}"))?;
        if !is_spd(cmaes.covariance()) || cmaes.step_size().is_nan() || cmaes.step_size() <= 0.0 {
            return Err(format!("cmaes covariance not SPD at iteration {it}"));
        }
        let xs = xnes.ask().map_err(|e| e.to_string())?;
        let scores: Vec<f64> = xs.iter().map(|x| banana_score(&target, x)).collect();
        xnes.tell(&scores).map_err(|e| format!("xnes iteration {it}: {e}"))?;
        if !is_spd(&xnes.covariance()) {
            return Err(format!("xnes covariance not SPD at iteration {it}"));
        }
    }
    Ok(())
}

pub fn optimise(method: Method, seed: u64, workers: usize) -> OptimisationResult {
    let f = tsinfer::measures::FunctionError::new(4, bowl);
    OptimisationController::new(Objective::Minimise(&f), vec![1.0, 1.0, 1.0, 1.0])
        .method(method)
        .criteria(StoppingCriteria::iterations(60))
        .seed(seed)
        .workers(workers)
        .run(&mut NullSink)
        .expect("optimisation runs")
}

/// Everything except wall-clock time.
pub fn same_optimisation(a: &OptimisationResult, b: &OptimisationResult) -> bool {
    let strip = |r: &OptimisationResult| {
        r.log
            .iter()
            .map(|l| (l.iteration, l.evaluations, l.best_score.to_bits()))
            .collect::<Vec<_>>()
    };
    a.best == b.best
        && a.best_score.to_bits() == b.best_score.to_bits()
        && a.iterations == b.iterations
        && a.evaluations == b.evaluations
        && a.stop_reason == b.stop_reason
        && a.metadata.hyperparameters == b.metadata.hyperparameters
        && strip(a) == strip(b)
}

pub fn sample(method: McmcMethod, seed: u64, workers: usize) -> McmcResult {
    let target = GaussianTarget::new(vec![0.5, -1.0], DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.8])).unwrap();
    let prior = tsinfer::densities::UniformLogPrior::new(vec![-20.0, -20.0], vec![20.0, 20.0]).unwrap();
    let posterior = tsinfer::densities::LogPosterior::new(target, prior.clone()).unwrap();
    McmcController::new(&posterior, vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![-1.0, 0.5]])
        .method(method)
        .prior(&prior)
        .iterations(300)
        .seed(seed)
        .workers(workers)
        .run(&mut NullSink)
        .expect("sampling runs")
}

/// Repeat and worker-count determinism for both controllers.
pub fn controller_determinism(seed: u64) -> Check {
    for method in Method::ALL {
        let first = optimise(method, seed, 1);
        if !same_optimisation(&first, &optimise(method, seed, 1)) {
            return Err(format!("{method}: repeat run differs"));
        }
        if !same_optimisation(&first, &optimise(method, seed, 4)) {
            return Err(format!("{method}: workers=4 differs from workers=1"));
        }
    }
    for method in [McmcMethod::Metropolis, McmcMethod::AdaptiveCovariance, McmcMethod::population()] {
        let first = sample(method, seed, 1);
        let again = sample(method, seed, 1);
        let parallel = sample(method, seed, 4);
        if first != again {
            return Err(format!("{method}: repeat run differs"));
        }
        if first.chains != parallel.chains || first.log != parallel.log || first.log_densities != parallel.log_densities {
            return Err(format!("{method}: workers=4 differs from workers=1"));
        }
    }
    Ok(())
}
