use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Trajectory;
use crate::error::{Error, Result};
use crate::rng::task_rng;

/// Ring of Ulam maps `f(x) = 2 - x^2`, each driven by its left neighbour:
/// `x[m](n+1) = f(eps * x[m-1](n) + (1 - eps) * x[m](n))`, indices mod `n_maps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UlamConfig {
    pub epsilon: f64,
    pub n_maps: usize,
    pub length: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl Default for UlamConfig {
    fn default() -> Self {
        Self { epsilon: 0.5, n_maps: 100, length: 100_000, burn_in: 10_000, seed: 0 }
    }
}

impl UlamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::Config(format!("epsilon must lie in [0,1], got {}", self.epsilon)));
        }
        if self.n_maps < 2 {
            return Err(Error::Config("the lattice needs at least 2 maps".into()));
        }
        if self.length == 0 {
            return Err(Error::Config("length must be positive".into()));
        }
        Ok(())
    }
}

/// Allowance for rounding when checking that states stay in `[-2, 2]`.
const RANGE_SLACK: f64 = 1e-9;

#[inline]
fn ulam(x: f64) -> f64 {
    2.0 - x * x
}

/// Simulates the lattice; columns are `x0, x1, ...`, burn-in discarded.
pub fn simulate_ulam(cfg: &UlamConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let n = cfg.n_maps;
    let mut rng = task_rng(cfg.seed, "ulam/init");
    let mut state: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    let mut next = vec![0.0; n];
    let mut series = vec![Vec::with_capacity(cfg.length); n];
    let eps = cfg.epsilon;
    for step in 0..cfg.burn_in + cfg.length {
        for m in 0..n {
            let left = state[(m + n - 1) % n];
            next[m] = ulam(eps * left + (1.0 - eps) * state[m]);
        }
        std::mem::swap(&mut state, &mut next);
        if let Some(bad) = state.iter().find(|v| !(v.abs() <= 2.0 + RANGE_SLACK)) {
            return Err(Error::Numerical(format!("Ulam state left [-2,2] at step {step}: {bad}")));
        }
        if step >= cfg.burn_in {
            for (s, v) in series.iter_mut().zip(&state) {
                s.push(*v);
            }
        }
    }
    Ok(Trajectory { names: (0..n).map(|m| format!("x{m}")).collect(), series, sample_interval: 1.0 })
}
