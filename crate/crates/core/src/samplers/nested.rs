use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::densities::{LogPdf, LogPrior};
use crate::error::{check_dimension, Error, Result};
use crate::random::RandomSource;

/// How replacement live points are drawn above the likelihood threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NestedMethod {
    /// Draw from the prior until a point clears the threshold.
    Rejection,
    /// Draw uniformly from the bounding ellipsoid of the live points,
    /// with semi-axes scaled by `enlargement`. The first `first` iterations
    /// use prior rejection; the ellipsoid is refitted every `refit` iterations.
    Ellipsoid { enlargement: f64, first: usize, refit: usize },
}

impl NestedMethod {
    pub fn ellipsoid() -> Self {
        NestedMethod::Ellipsoid {
            enlargement: 1.1,
            first: 1000,
            refit: 100,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            NestedMethod::Rejection => "nested-rejection",
            NestedMethod::Ellipsoid { .. } => "nested-ellipsoid",
        }
    }

    fn validate(&self) -> Result<()> {
        if let NestedMethod::Ellipsoid { enlargement, refit, .. } = *self {
            if !(enlargement.is_finite() && enlargement >= 1.0) {
                return Err(Error::contract("ellipsoid enlargement must be at least 1"));
            }
            if refit == 0 {
                return Err(Error::contract("ellipsoid refit interval must be positive"));
            }
        }
        Ok(())
    }
}

/// Uniform sampler over `{x : (x-c)ᵀ S⁻¹ (x-c) ≤ 1}`.
#[derive(Debug, Clone)]
struct Ellipsoid {
    centre: DVector<f64>,
    /// Lower Cholesky factor of the (enlarged) shape matrix `S`.
    factor: DMatrix<f64>,
}

const FIT_JITTER: f64 = 1e-12;
const FIT_TOLERANCE: f64 = 1e-3;
const FIT_MAX_ITERATIONS: usize = 10_000;

impl Ellipsoid {
    /// Minimum-volume enclosing ellipsoid by Khachiyan's algorithm, grown
    /// until every point is inside and then scaled by `enlargement`.
    fn fit(points: &[Vec<f64>], enlargement: f64) -> Result<Self> {
        let d = points[0].len();
        let n = points.len();
        let df = d as f64;
        let m = d + 1;
        // lifted points (p, 1), row-major
        let lifted: Vec<f64> = points.iter().flat_map(|p| p.iter().copied().chain(std::iter::once(1.0))).collect();
        let mut u = vec![1.0 / n as f64; n];
        let mut inverse = vec![0.0; m * m];
        for _ in 0..FIT_MAX_ITERATIONS {
            let mut x = DMatrix::<f64>::identity(m, m) * FIT_JITTER;
            for (q, uj) in lifted.chunks_exact(m).zip(&u) {
                for a in 0..m {
                    for b in 0..m {
                        x[(a, b)] += uj * q[a] * q[b];
                    }
                }
            }
            let Some(inv) = x.cholesky().map(|c| c.inverse()) else { break };
            inverse.copy_from_slice(inv.as_slice());
            let (mut worst, mut m_max) = (0, f64::NEG_INFINITY);
            for (j, q) in lifted.chunks_exact(m).enumerate() {
                let mut value = 0.0;
                for (column, qb) in inverse.chunks_exact(m).zip(q) {
                    value += qb * column.iter().zip(q).map(|(c, qa)| c * qa).sum::<f64>();
                }
                if value > m_max {
                    worst = j;
                    m_max = value;
                }
            }
            if !m_max.is_finite() || m_max <= (df + 1.0) * (1.0 + FIT_TOLERANCE) {
                break;
            }
            let step = (m_max - df - 1.0) / ((df + 1.0) * (m_max - 1.0));
            for uj in u.iter_mut() {
                *uj *= 1.0 - step;
            }
            u[worst] += step;
        }

        let mut centre = DVector::zeros(d);
        for (p, uj) in points.iter().zip(&u) {
            centre.axpy(*uj, &DVector::from_column_slice(p), 1.0);
        }
        let mut spread = DMatrix::<f64>::identity(d, d) * FIT_JITTER;
        for (p, uj) in points.iter().zip(&u) {
            let diff = DVector::from_column_slice(p) - &centre;
            spread.ger(*uj, &diff, &diff, 1.0);
        }
        let mut shape = spread * df;
        let chol = shape
            .clone()
            .cholesky()
            .ok_or_else(|| Error::contract("live points do not admit a bounding ellipsoid"))?;
        let reach = points
            .iter()
            .map(|p| {
                let diff = DVector::from_column_slice(p) - &centre;
                diff.dot(&chol.solve(&diff))
            })
            .fold(0.0, f64::max);
        if reach > 1.0 {
            shape *= reach;
        }
        shape *= enlargement * enlargement;
        let factor = shape
            .cholesky()
            .ok_or_else(|| Error::contract("live points do not admit a bounding ellipsoid"))?
            .l();
        Ok(Self { centre, factor })
    }

    fn sample_into(&self, rng: &mut RandomSource, direction: &mut [f64], out: &mut [f64]) {
        let d = direction.len();
        let mut norm = 0.0;
        for z in direction.iter_mut() {
            *z = rng.sample(StandardNormal);
            norm += *z * *z;
        }
        let radius = rng.random::<f64>().powf(1.0 / d as f64) / norm.sqrt();
        for (i, o) in out.iter_mut().enumerate() {
            let mut v = self.centre[i];
            for (j, z) in direction.iter().enumerate().take(i + 1) {
                v += self.factor[(i, j)] * z * radius;
            }
            *o = v;
        }
    }
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let hi = a.max(b);
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + ((a - hi).exp() + (b - hi).exp()).ln()
}

/// Output of a nested-sampling run.
///
/// `points`, `log_likelihoods`, `log_weights` and `weights` run over the
/// discarded points followed by the final live set. `weights` are the
/// normalised posterior weights `L_i w_i / Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct NestedResult {
    pub log_evidence: f64,
    pub log_evidence_error: f64,
    /// Information `H` (nats) of the posterior relative to the prior.
    pub information: f64,
    pub points: Vec<Vec<f64>>,
    pub log_likelihoods: Vec<f64>,
    pub log_weights: Vec<f64>,
    pub weights: Vec<f64>,
    pub evaluations: u64,
    pub iterations: usize,
}

impl NestedResult {
    /// Draws `n` posterior samples with replacement according to `weights`.
    pub fn resample(&self, n: usize, rng: &mut RandomSource) -> Vec<Vec<f64>> {
        let mut cumulative = Vec::with_capacity(self.weights.len());
        let mut total = 0.0;
        for w in &self.weights {
            total += w;
            cumulative.push(total);
        }
        (0..n)
            .map(|_| {
                let u = rng.random::<f64>() * total;
                let i = cumulative.partition_point(|c| *c <= u).min(self.points.len() - 1);
                self.points[i].clone()
            })
            .collect()
    }

    pub fn posterior_mean(&self) -> Vec<f64> {
        let d = self.points.first().map_or(0, Vec::len);
        let mut mean = vec![0.0; d];
        for (p, w) in self.points.iter().zip(&self.weights) {
            for (m, x) in mean.iter_mut().zip(p) {
                *m += w * x;
            }
        }
        mean
    }
}

/// Nested sampler over a prior that supports direct draws.
///
/// Prior volume shrinks as `X_i = exp(-i/N)`. The run ends once the live
/// points could add less than `tolerance` (default 1e-3) of the evidence
/// accumulated so far, or after `max_iterations` (default 1e5).
pub struct NestedSampler<P> {
    prior: P,
    method: NestedMethod,
    n_live: usize,
    max_draws: u64,
    max_iterations: usize,
    tolerance: f64,
    rng: RandomSource,
    live: Vec<Vec<f64>>,
    live_log_likelihoods: Vec<f64>,
    discarded: Vec<Vec<f64>>,
    discarded_log_likelihoods: Vec<f64>,
    discarded_log_weights: Vec<f64>,
    log_evidence: f64,
    iteration: usize,
    evaluations: u64,
    ellipsoid: Option<Ellipsoid>,
    scratch: Vec<f64>,
    direction: Vec<f64>,
}

impl<P: LogPrior> NestedSampler<P> {
    pub const DEFAULT_LIVE_POINTS: usize = 400;
    pub const DEFAULT_MAX_DRAWS: u64 = 1_000_000;
    pub const DEFAULT_MAX_ITERATIONS: usize = 100_000;
    pub const DEFAULT_TOLERANCE: f64 = 1e-3;

    pub fn new(prior: P, method: NestedMethod, rng: RandomSource) -> Result<Self> {
        method.validate()?;
        let d = prior.n_parameters();
        if d == 0 {
            return Err(Error::contract("prior has no parameters"));
        }
        Ok(Self {
            prior,
            method,
            n_live: Self::DEFAULT_LIVE_POINTS,
            max_draws: Self::DEFAULT_MAX_DRAWS,
            max_iterations: Self::DEFAULT_MAX_ITERATIONS,
            tolerance: Self::DEFAULT_TOLERANCE,
            rng,
            live: Vec::new(),
            live_log_likelihoods: Vec::new(),
            discarded: Vec::new(),
            discarded_log_likelihoods: Vec::new(),
            discarded_log_weights: Vec::new(),
            log_evidence: f64::NEG_INFINITY,
            iteration: 0,
            evaluations: 0,
            ellipsoid: None,
            scratch: vec![0.0; d],
            direction: vec![0.0; d],
        })
    }

    pub fn with_live_points(mut self, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::contract("nested sampling needs at least two live points"));
        }
        self.n_live = n;
        Ok(self)
    }

    /// Cap on draws for a single replacement point.
    pub fn with_max_draws(mut self, draws: u64) -> Result<Self> {
        if draws == 0 {
            return Err(Error::contract("draw cap must be positive"));
        }
        self.max_draws = draws;
        Ok(self)
    }

    pub fn with_max_iterations(mut self, iterations: usize) -> Self {
        self.max_iterations = iterations;
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Result<Self> {
        if !(tolerance > 0.0) {
            return Err(Error::contract("tolerance must be positive"));
        }
        self.tolerance = tolerance;
        Ok(self)
    }

    pub fn method(&self) -> NestedMethod {
        self.method
    }

    pub fn n_live(&self) -> usize {
        self.n_live
    }

    pub fn iterations(&self) -> usize {
        self.iteration
    }

    /// Likelihood evaluations so far, including rejected draws.
    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    pub fn live_points(&self) -> &[Vec<f64>] {
        &self.live
    }

    pub fn discarded_log_likelihoods(&self) -> &[f64] {
        &self.discarded_log_likelihoods
    }

    /// Evidence accumulated from discarded points only.
    pub fn accumulated_log_evidence(&self) -> f64 {
        self.log_evidence
    }

    /// `ln X_i = -i/N`.
    pub fn log_volume(&self) -> f64 {
        -(self.iteration as f64) / self.n_live as f64
    }

    /// Accumulated evidence plus the live points' current contribution.
    pub fn current_log_evidence_estimate(&self) -> f64 {
        log_add_exp(self.log_evidence, self.log_volume() + self.log_mean_live())
    }

    fn log_mean_live(&self) -> f64 {
        let hi = self.live_log_likelihoods.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi == f64::NEG_INFINITY {
            return hi;
        }
        let sum: f64 = self.live_log_likelihoods.iter().map(|l| (l - hi).exp()).sum();
        hi + (sum / self.live_log_likelihoods.len() as f64).ln()
    }

    pub fn is_initialised(&self) -> bool {
        !self.live.is_empty()
    }

    /// Draws the initial live set from the prior.
    pub fn initialise<L: LogPdf + ?Sized>(&mut self, log_likelihood: &L) -> Result<()> {
        check_dimension(self.prior.n_parameters(), log_likelihood.n_parameters())?;
        if self.is_initialised() {
            return Err(Error::contract("nested sampler already initialised"));
        }
        for _ in 0..self.n_live {
            let x = self.prior.sample(&mut self.rng);
            let l = log_likelihood.evaluate(&x);
            self.evaluations += 1;
            self.live_log_likelihoods.push(if l.is_nan() { f64::NEG_INFINITY } else { l });
            self.live.push(x);
        }
        Ok(())
    }

    pub fn is_finished(&self) -> bool {
        if self.iteration >= self.max_iterations {
            return true;
        }
        self.is_initialised()
            && self.log_evidence > f64::NEG_INFINITY
            && self.log_volume() + self.log_mean_live() < self.tolerance.ln() + self.log_evidence
    }

    /// Replaces the worst live point with a fresh one above its likelihood.
    pub fn step<L: LogPdf + ?Sized>(&mut self, log_likelihood: &L) -> Result<()> {
        if !self.is_initialised() {
            self.initialise(log_likelihood)?;
        }
        let worst = (0..self.n_live)
            .min_by(|&a, &b| self.live_log_likelihoods[a].total_cmp(&self.live_log_likelihoods[b]))
            .unwrap();
        let threshold = self.live_log_likelihoods[worst];

        // w_i = X_{i-1} - X_i = exp(-(i-1)/N) (1 - exp(-1/N))
        let n = self.n_live as f64;
        let log_weight = self.log_volume() + (-(-1.0 / n).exp_m1()).ln();
        let (point, l) = self.replacement(log_likelihood, threshold)?;
        self.iteration += 1;
        self.log_evidence = log_add_exp(self.log_evidence, threshold + log_weight);
        self.discarded.push(std::mem::replace(&mut self.live[worst], point));
        self.discarded_log_likelihoods.push(threshold);
        self.discarded_log_weights.push(log_weight);
        self.live_log_likelihoods[worst] = l;
        Ok(())
    }

    fn replacement<L: LogPdf + ?Sized>(&mut self, log_likelihood: &L, threshold: f64) -> Result<(Vec<f64>, f64)> {
        let ellipsoid = match self.method {
            NestedMethod::Ellipsoid { enlargement, first, refit } if self.iteration >= first => {
                if self.ellipsoid.is_none() || (self.iteration - first).is_multiple_of(refit) {
                    self.ellipsoid = Some(Ellipsoid::fit(&self.live, enlargement)?);
                }
                self.ellipsoid.as_ref()
            }
            _ => None,
        };
        for _ in 0..self.max_draws {
            match ellipsoid {
                Some(e) => {
                    e.sample_into(&mut self.rng, &mut self.direction, &mut self.scratch);
                    if self.prior.evaluate(&self.scratch) == f64::NEG_INFINITY {
                        continue;
                    }
                }
                None => self.prior.sample_into(&mut self.rng, &mut self.scratch),
            }
            let l = log_likelihood.evaluate(&self.scratch);
            self.evaluations += 1;
            // ties are accepted so that a flat likelihood can still progress
            if l >= threshold {
                return Ok((self.scratch.clone(), l));
            }
        }
        Err(Error::RejectionCapExceeded {
            draws: self.max_draws,
            iteration: self.iteration + 1,
        })
    }

    /// Steps until a termination rule fires, then summarises.
    pub fn run<L: LogPdf + ?Sized>(&mut self, log_likelihood: &L) -> Result<NestedResult> {
        if !self.is_initialised() {
            self.initialise(log_likelihood)?;
        }
        while !self.is_finished() {
            self.step(log_likelihood)?;
        }
        self.result()
    }

    /// Evidence, its error and posterior weights, counting the live points
    /// at `X_final / N` each.
    pub fn result(&self) -> Result<NestedResult> {
        if !self.is_initialised() {
            return Err(Error::contract("nested sampler has not been initialised"));
        }
        let live_log_weight = self.log_volume() - (self.n_live as f64).ln();
        let mut points = self.discarded.clone();
        points.extend(self.live.iter().cloned());
        let mut log_likelihoods = self.discarded_log_likelihoods.clone();
        log_likelihoods.extend_from_slice(&self.live_log_likelihoods);
        let mut log_weights = self.discarded_log_weights.clone();
        log_weights.extend(std::iter::repeat_n(live_log_weight, self.n_live));

        let log_evidence = log_likelihoods
            .iter()
            .zip(&log_weights)
            .fold(f64::NEG_INFINITY, |acc, (l, w)| log_add_exp(acc, l + w));
        let (weights, information) = if log_evidence == f64::NEG_INFINITY {
            (vec![1.0 / points.len() as f64; points.len()], 0.0)
        } else {
            let mut information = 0.0;
            let weights: Vec<f64> = log_likelihoods
                .iter()
                .zip(&log_weights)
                .map(|(l, w)| {
                    let p = (l + w - log_evidence).exp();
                    if p > 0.0 {
                        information += p * (l - log_evidence);
                    }
                    p
                })
                .collect();
            let total: f64 = weights.iter().sum();
            (weights.iter().map(|w| w / total).collect(), information.max(0.0))
        };
        Ok(NestedResult {
            log_evidence,
            log_evidence_error: (information / self.n_live as f64).sqrt(),
            information,
            points,
            log_likelihoods,
            log_weights,
            weights,
            evaluations: self.evaluations,
            iterations: self.iteration,
        })
    }
}
