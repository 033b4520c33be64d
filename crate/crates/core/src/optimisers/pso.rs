//! Global-best particle swarm with constriction coefficients.

use rand::Rng;

use super::{default_swarm_size, validate_start, AskTell, Optimiser};
use crate::error::{Error, Result};
use crate::problem::ParameterVector;
use crate::random::RandomSource;

const INERTIA: f64 = 0.729;
const COGNITIVE: f64 = 1.494;
const SOCIAL: f64 = 1.494;

pub struct Pso {
    n: usize,
    positions: Vec<Vec<f64>>,
    velocities: Vec<Vec<f64>>,
    personal_best: Vec<Vec<f64>>,
    personal_score: Vec<f64>,
    global_best: Option<usize>,
    /// Per-coordinate velocity limit: the width of the initial box.
    max_velocity: Vec<f64>,
    started: bool,
    rng: RandomSource,
    state: AskTell,
}

impl Pso {
    /// Particles start uniformly in `x0 ± 3·sigma0`.
    pub fn new(x0: &[f64], sigma0: &[f64], swarm_size: Option<usize>, mut rng: RandomSource) -> Result<Self> {
        validate_start(x0, sigma0)?;
        let n = x0.len();
        let size = swarm_size.unwrap_or_else(|| default_swarm_size(n));
        if size < 1 {
            return Err(Error::contract("swarm needs at least one particle"));
        }
        let mut positions = Vec::with_capacity(size);
        let mut velocities = Vec::with_capacity(size);
        for _ in 0..size {
            positions.push(
                x0.iter()
                    .zip(sigma0)
                    .map(|(x, s)| x - 3.0 * s + 6.0 * s * rng.random::<f64>())
                    .collect::<Vec<_>>(),
            );
            velocities.push(sigma0.iter().map(|s| s * (2.0 * rng.random::<f64>() - 1.0)).collect::<Vec<_>>());
        }
        Ok(Self {
            n,
            personal_best: positions.clone(),
            personal_score: vec![f64::INFINITY; size],
            positions,
            velocities,
            global_best: None,
            max_velocity: sigma0.iter().map(|s| 6.0 * s).collect(),
            started: false,
            rng,
            state: AskTell::new(),
        })
    }

    pub fn positions(&self) -> &[Vec<f64>] {
        &self.positions
    }

    fn advance(&mut self) {
        let g = self.global_best.map(|i| self.personal_best[i].clone());
        for p in 0..self.positions.len() {
            for j in 0..self.n {
                let (r1, r2): (f64, f64) = (self.rng.random(), self.rng.random());
                let x = self.positions[p][j];
                let social = g.as_ref().map_or(0.0, |g| SOCIAL * r2 * (g[j] - x));
                let v = INERTIA * self.velocities[p][j] + COGNITIVE * r1 * (self.personal_best[p][j] - x) + social;
                let v = v.clamp(-self.max_velocity[j], self.max_velocity[j]);
                self.velocities[p][j] = v;
                self.positions[p][j] = x + v;
            }
        }
    }
}

impl Optimiser for Pso {
    fn name(&self) -> &'static str {
        "pso"
    }

    fn n_parameters(&self) -> usize {
        self.n
    }

    fn population_size(&self) -> usize {
        self.positions.len()
    }

    fn ask(&mut self) -> Result<Vec<ParameterVector>> {
        self.state.check_ask()?;
        if self.started {
            self.advance();
        }
        self.started = true;
        if self.positions.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::contract("particle positions diverged"));
        }
        let points = self.positions.iter().cloned().map(ParameterVector::from_finite).collect();
        Ok(self.state.asked(points))
    }

    fn tell(&mut self, scores: &[f64]) -> Result<()> {
        let (_, scores) = self.state.take(scores)?;
        for (p, &s) in scores.iter().enumerate() {
            if s < self.personal_score[p] {
                self.personal_score[p] = s;
                self.personal_best[p].clone_from(&self.positions[p]);
            }
            let incumbent = self.global_best.map_or(f64::INFINITY, |g| self.personal_score[g]);
            if self.personal_score[p] < incumbent {
                self.global_best = Some(p);
            }
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
            ("swarm_size", self.positions.len() as f64),
            ("inertia", INERTIA),
            ("cognitive", COGNITIVE),
            ("social", SOCIAL),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn swarm_size_and_initial_box() {
        let mut p = Pso::new(&[1.0, -1.0], &[0.5, 2.0], Some(10), RandomSource::new(3)).unwrap();
        let pts = p.ask().unwrap();
        assert_eq!(pts.len(), 10);
        for x in &pts {
            assert!((-0.5..=2.5).contains(&x[0]));
            assert!((-7.0..=5.0).contains(&x[1]));
        }
    }

    #[test]
    fn velocities_respect_clamp() {
        let mut p = Pso::new(&[0.0], &[0.1], None, RandomSource::new(0)).unwrap();
        for _ in 0..50 {
            let pts = p.ask().unwrap();
            // a far-away optimum pulls hard on every particle
            let fs: Vec<f64> = pts.iter().map(|x| (x[0] - 1e6).abs()).collect();
            p.tell(&fs).unwrap();
            assert!(p.velocities.iter().all(|v| v[0].abs() <= 0.6 + 1e-12));
        }
    }
}
