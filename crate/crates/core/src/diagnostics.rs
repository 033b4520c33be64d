//! Convergence and correctness diagnostics for sampler output.
//!
//! R-hat here is the plain Gelman–Rubin statistic, without chain splitting
//! or rank normalisation.

use crate::error::{Error, Result};

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_variance(x: &[f64], m: f64) -> f64 {
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Gelman–Rubin potential scale reduction for one scalar quantity.
///
/// All chains must have the same length. When every chain is constant the
/// result is 1 if the constants agree and `+inf` otherwise.
pub fn rhat(chains: &[&[f64]]) -> Result<f64> {
    let m = chains.len();
    if m < 2 {
        return Err(Error::contract("R-hat needs at least two chains"));
    }
    let n = chains[0].len();
    if n < 2 {
        return Err(Error::contract("R-hat needs at least two samples per chain"));
    }
    if chains.iter().any(|c| c.len() != n) {
        return Err(Error::contract("chains have different lengths"));
    }
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let w = chains
        .iter()
        .zip(&means)
        .map(|(c, &mu)| sample_variance(c, mu))
        .sum::<f64>()
        / m as f64;
    let grand = mean(&means);
    let b = n as f64 * sample_variance(&means, grand);
    if w == 0.0 {
        return Ok(if b == 0.0 { 1.0 } else { f64::INFINITY });
    }
    let nf = n as f64;
    Ok((((nf - 1.0) / nf * w + b / nf) / w).sqrt())
}

/// R-hat per coordinate, for chains laid out as `chains[chain][sample][dim]`.
pub fn rhat_per_dimension(chains: &[Vec<Vec<f64>>]) -> Result<Vec<f64>> {
    let dims = chains.first().and_then(|c| c.first()).map_or(0, Vec::len);
    (0..dims)
        .map(|d| {
            let cols: Vec<Vec<f64>> = chains.iter().map(|c| c.iter().map(|x| x[d]).collect()).collect();
            let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
            rhat(&refs)
        })
        .collect()
}

struct Centered {
    values: Vec<f64>,
    lag0: f64,
}

impl Centered {
    fn new(chain: &[f64]) -> Self {
        let m = mean(chain);
        let values: Vec<f64> = chain.iter().map(|v| v - m).collect();
        let lag0 = values.iter().map(|v| v * v).sum();
        Self { values, lag0 }
    }

    fn rho(&self, lag: usize) -> f64 {
        let x = &self.values;
        x[..x.len() - lag].iter().zip(&x[lag..]).map(|(a, b)| a * b).sum::<f64>() / self.lag0
    }
}

/// Biased autocorrelation estimates for lags `0..=max_lag`.
pub fn autocorrelation(chain: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if max_lag >= chain.len() {
        return Err(Error::contract(format!(
            "max lag {max_lag} must be below the chain length {}",
            chain.len()
        )));
    }
    let c = Centered::new(chain);
    if c.lag0 == 0.0 {
        let mut out = vec![0.0; max_lag + 1];
        out[0] = 1.0;
        return Ok(out);
    }
    Ok((0..=max_lag).map(|k| c.rho(k)).collect())
}

/// Effective sample size using Geyer's initial positive sequence.
///
/// Autocorrelations are summed in adjacent pairs until a pair sum is no
/// longer positive. The result is clipped to `[1, n]`.
pub fn effective_sample_size(chain: &[f64]) -> Result<f64> {
    let n = chain.len();
    if n < 10 {
        return Err(Error::contract("effective sample size needs at least 10 samples"));
    }
    let c = Centered::new(chain);
    if c.lag0 == 0.0 {
        return Ok(n as f64);
    }
    let mut tau = -1.0;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = c.rho(lag) + c.rho(lag + 1);
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        lag += 2;
    }
    Ok((n as f64 / tau).clamp(1.0, n as f64))
}

/// ESS per coordinate for a chain laid out as `chain[sample][dim]`.
pub fn ess_per_dimension(chain: &[Vec<f64>]) -> Result<Vec<f64>> {
    let dims = chain.first().map_or(0, Vec::len);
    (0..dims)
        .map(|d| effective_sample_size(&chain.iter().map(|x| x[d]).collect::<Vec<_>>()))
        .collect()
}

/// Survival function of the limiting Kolmogorov distribution, `P(K > x)`.
pub fn kolmogorov_survival(x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else if x < 1.18 {
        kolmogorov_small(x)
    } else {
        kolmogorov_large(x)
    }
}

// theta-function form, fast for small arguments
fn kolmogorov_small(x: f64) -> f64 {
    let y = std::f64::consts::PI.powi(2) / (8.0 * x * x);
    let s: f64 = (1..=20).map(|k| (-((2 * k - 1) as f64).powi(2) * y).exp()).sum();
    (1.0 - (2.0 * std::f64::consts::PI).sqrt() / x * s).clamp(0.0, 1.0)
}

fn kolmogorov_large(x: f64) -> f64 {
    let s: f64 = (1..=100)
        .map(|k| {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            sign * (-2.0 * (k * k) as f64 * x * x).exp()
        })
        .sum();
    (2.0 * s).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov–Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionReport {
    pub passed: bool,
    pub statistics: Vec<f64>,
    pub p_values: Vec<f64>,
}

pub const DEFAULT_ALPHA: f64 = 0.001;
const MIN_SAMPLES: usize = 500;

/// Kolmogorov–Smirnov check of every marginal against its reference CDF.
///
/// `samples[i][d]` is coordinate `d` of sample `i`; `references[d]` is the
/// CDF for coordinate `d`. Fails if any marginal has `p < alpha`. P-values
/// come from the asymptotic Kolmogorov distribution.
pub fn distribution_check<F>(samples: &[Vec<f64>], references: &[F], alpha: f64) -> Result<DistributionReport>
where
    F: Fn(f64) -> f64,
{
    if references.is_empty() {
        return Ok(DistributionReport {
            passed: true,
            statistics: vec![],
            p_values: vec![],
        });
    }
    if samples.len() < MIN_SAMPLES {
        return Err(Error::contract(format!(
            "distribution check needs at least {MIN_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|s| s.len() < references.len()) {
        return Err(Error::contract("samples have fewer coordinates than references"));
    }
    let sqrt_n = (samples.len() as f64).sqrt();
    let mut statistics = Vec::with_capacity(references.len());
    let mut p_values = Vec::with_capacity(references.len());
    for (d, cdf) in references.iter().enumerate() {
        let mut column: Vec<f64> = samples.iter().map(|s| s[d]).collect();
        let stat = ks_statistic(&mut column, cdf);
        statistics.push(stat);
        p_values.push(kolmogorov_survival(sqrt_n * stat));
    }
    Ok(DistributionReport {
        passed: p_values.iter().all(|&p| p >= alpha),
        statistics,
        p_values,
    })
}

/// Keeps every `factor`-th sample, starting with the first.
pub fn thin<T: Clone>(samples: &[T], factor: usize) -> Vec<T> {
    samples.iter().step_by(factor.max(1)).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::RandomSource;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn normals(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = RandomSource::new(seed);
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    #[test]
    fn duplicated_chain_rhat() {
        let c = normals(1, 100);
        let r = rhat(&[&c, &c]).unwrap();
        assert!((r - (99.0f64 / 100.0).sqrt()).abs() < 1e-12);
        assert!((r - 0.99499).abs() < 1e-5);
    }

    #[test]
    fn constant_chain_conventions() {
        assert_eq!(rhat(&[&[2.0; 5], &[2.0; 5]]).unwrap(), 1.0);
        assert_eq!(rhat(&[&[2.0; 5], &[3.0; 5]]).unwrap(), f64::INFINITY);
        assert!(rhat(&[&[1.0, 2.0]]).is_err());
        assert!(rhat(&[&[1.0], &[2.0]]).is_err());
    }

    #[test]
    fn independent_normal_chains_rhat_near_one() {
        let (a, b) = (normals(2, 10_000), normals(3, 10_000));
        let r = rhat(&[&a, &b]).unwrap();
        assert!((0.99..=1.01).contains(&r), "{r}");
    }

    #[test]
    fn rhat_affine_invariance() {
        let (a, b, c) = (normals(4, 500), normals(5, 500), normals(6, 500));
        let r0 = rhat(&[&a, &b, &c]).unwrap();
        let map = |x: &Vec<f64>| x.iter().map(|v| -3.7 * v + 12.5).collect::<Vec<_>>();
        let r1 = rhat(&[&map(&a), &map(&b), &map(&c)]).unwrap();
        assert!((r0 - r1).abs() < 1e-10);
    }

    #[test]
    fn ess_of_iid_draws() {
        let c = normals(7, 10_000);
        let ratio = effective_sample_size(&c).unwrap() / 1e4;
        assert!((0.8..=1.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn ess_of_constant_chain() {
        assert_eq!(effective_sample_size(&[1.5; 50]).unwrap(), 50.0);
        assert!(effective_sample_size(&[1.0; 9]).is_err());
    }

    #[test]
    fn ess_of_ar1_chain() {
        let mut rng = RandomSource::new(8);
        let n = 100_000;
        let mut x = 0.0;
        let chain: Vec<f64> = (0..n)
            .map(|_| {
                x = 0.9 * x + rng.sample::<f64, _>(StandardNormal);
                x
            })
            .collect();
        let ratio = effective_sample_size(&chain).unwrap() / n as f64;
        let expected = 0.1 / 1.9;
        assert!((ratio / expected - 1.0).abs() < 0.3, "{ratio}");
    }

    #[test]
    fn autocorrelation_cases() {
        let alt: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let r = autocorrelation(&alt, 2).unwrap();
        assert_eq!(r[0], 1.0);
        assert!((r[1] + 1.0).abs() < 2e-3);
        assert_eq!(autocorrelation(&[3.0; 10], 3).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
        assert!(autocorrelation(&[1.0, 2.0], 2).is_err());

        let n = 10_000;
        let white = normals(9, n);
        let r = autocorrelation(&white, 100).unwrap();
        let bound = 3.0 / (n as f64).sqrt();
        let inside = r[1..].iter().filter(|v| v.abs() < bound).count();
        assert!(inside >= 95, "{inside}");
    }

    #[test]
    fn kolmogorov_reference_points() {
        // standard critical values of the limiting distribution
        assert!((kolmogorov_survival(1.358) - 0.05).abs() < 5e-4);
        assert!((kolmogorov_survival(1.628) - 0.01).abs() < 2e-4);
        assert!((kolmogorov_survival(1.949) - 0.001).abs() < 5e-5);
        // both branches agree where they meet
        for x in [0.8, 1.18, 1.5] {
            assert!((kolmogorov_small(x) - kolmogorov_large(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn ks_calibration_and_power() {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let cdf = |x| normal.cdf(x);
        let mut passes = 0;
        for seed in 0..100 {
            let s: Vec<Vec<f64>> = normals(1000 + seed, 1000).into_iter().map(|v| vec![v]).collect();
            passes += distribution_check(&s, &[cdf], DEFAULT_ALPHA).unwrap().passed as usize;
        }
        assert!(passes >= 99, "{passes}");
        let shifted: Vec<Vec<f64>> = normals(77, 5000).into_iter().map(|v| vec![v + 1.0]).collect();
        assert!(!distribution_check(&shifted, &[cdf], DEFAULT_ALPHA).unwrap().passed);
    }

    #[test]
    fn ks_edge_cases() {
        let none: [fn(f64) -> f64; 0] = [];
        assert!(distribution_check(&[], &none, 0.001).unwrap().passed);
        assert!(distribution_check(&vec![vec![0.0]; 10], &[|x: f64| x], 0.001).is_err());
    }

    #[test]
    fn thinning_keeps_every_kth() {
        assert_eq!(thin(&[0, 1, 2, 3, 4, 5, 6], 3), vec![0, 3, 6]);
    }

    proptest! {
        #[test]
        fn ess_is_clipped(xs in prop::collection::vec(-100.0f64..100.0, 10..200)) {
            let e = effective_sample_size(&xs).unwrap();
            prop_assert!(e >= 1.0 && e <= xs.len() as f64);
        }

        #[test]
        fn distribution_check_is_deterministic(seed in 0u64..1000) {
            let s: Vec<Vec<f64>> = normals(seed, 600).into_iter().map(|v| vec![v]).collect();
            let normal = Normal::new(0.0, 1.0).unwrap();
            let a = distribution_check(&s, &[|x| normal.cdf(x)], 0.001).unwrap();
            let b = distribution_check(&s, &[|x| normal.cdf(x)], 0.001).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
