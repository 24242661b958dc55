use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Trajectory;
use crate::error::{Error, Result};
use crate::rng::task_rng;

/// Ground-truth structure of a three-variable symbolic system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TriadKind {
    /// `x -> y -> z`.
    Chain,
    /// `x -> y` and `x -> z`, with `z` lagging `y` by `delay_yz`.
    Fork,
    /// `x -> y -> z` plus a direct `x -> z` that interacts with `y`.
    Triangle,
}

/// Memoryless binary triad driven by an iid source.
///
/// `x_t ~ Bernoulli(p_x)`, `y_t ~ a[x(t-d1)]`, and depending on `kind`:
/// chain `z_t ~ b[y(t-d2)]`, fork `z_t ~ b[x(t-d1-d2)]`, triangle
/// `z_t ~ d[y(t-d2)][x(t-d1-d2)]`. Each table entry is `P(output = 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolicTriad {
    pub kind: TriadKind,
    pub p_x: f64,
    pub a: [f64; 2],
    pub b: [f64; 2],
    /// Used by `Triangle` only, indexed `[y][x]`.
    pub d: [[f64; 2]; 2],
    pub delay_xy: usize,
    pub delay_yz: usize,
}

impl SymbolicTriad {
    pub fn validate(&self) -> Result<()> {
        let probs = [self.p_x, self.a[0], self.a[1], self.b[0], self.b[1]]
            .into_iter()
            .chain(self.d.iter().flatten().copied());
        for p in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("probability {p} outside [0,1]")));
            }
        }
        if self.delay_xy == 0 || self.delay_yz == 0 {
            return Err(Error::Config("triad delays must be positive".into()));
        }
        Ok(())
    }

    /// Draws a random model whose tables keep every row in `[0.1, 0.9]`.
    pub fn random<R: Rng>(rng: &mut R, kind: TriadKind, delay_xy: usize, delay_yz: usize) -> Self {
        let mut p = || rng.random_range(0.1..0.9);
        Self {
            kind,
            p_x: p(),
            a: [p(), p()],
            b: [p(), p()],
            d: [[p(), p()], [p(), p()]],
            delay_xy,
            delay_yz,
        }
    }
}

impl SymbolicTriad {
    /// Fixed, clearly informative tables for the given structure.
    pub fn example(kind: TriadKind, delay_xy: usize, delay_yz: usize) -> Self {
        Self {
            kind,
            p_x: 0.5,
            a: [0.1, 0.85],
            b: [0.2, 0.9],
            d: [[0.1, 0.6], [0.5, 0.95]],
            delay_xy,
            delay_yz,
        }
    }
}

/// Samples `length` steps of `x, y, z` as 0/1 values.
pub fn simulate_symbolic_triad(model: &SymbolicTriad, length: usize, seed: u64) -> Result<Trajectory> {
    model.validate()?;
    let (d1, d2) = (model.delay_xy, model.delay_yz);
    let warm = d1 + d2;
    let total = length + warm;
    let mut rng = task_rng(seed, "symbolic-triad");
    let mut x = vec![0u8; total];
    let mut y = vec![0u8; total];
    let mut z = vec![0u8; total];
    let draw = |p: f64, rng: &mut crate::rng::TaskRng| u8::from(rng.random::<f64>() < p);
    for t in 0..total {
        x[t] = draw(model.p_x, &mut rng);
        let xa = if t >= d1 { x[t - d1] } else { 0 };
        y[t] = draw(model.a[xa as usize], &mut rng);
        let yb = if t >= d2 { y[t - d2] } else { 0 };
        let xb = if t >= warm { x[t - warm] } else { 0 };
        let pz = match model.kind {
            TriadKind::Chain => model.b[yb as usize],
            TriadKind::Fork => model.b[xb as usize],
            TriadKind::Triangle => model.d[yb as usize][xb as usize],
        };
        z[t] = draw(pz, &mut rng);
    }
    let col = |v: &[u8]| v[warm..].iter().map(|&s| f64::from(s)).collect::<Vec<_>>();
    Ok(Trajectory {
        names: vec!["x".into(), "y".into(), "z".into()],
        series: vec![col(&x), col(&y), col(&z)],
        sample_interval: 1.0,
    })
}
