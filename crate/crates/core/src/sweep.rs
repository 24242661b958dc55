//! Coupling-strength sweeps over the Ulam lattice.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alphabet::{encode, fit_encoder, BinStrategy, Normalization, SymbolSeries};
use crate::dynamics::{simulate_ulam, UlamConfig};
use crate::error::{Error, Result};
use crate::inference::{scan_delays, significance_test, ScanSpec, ScoreConfig, ScoreKind, SignificanceConfig};
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub n_points: usize,
    pub epsilon_min: f64,
    pub epsilon_max: f64,
    pub n_maps: usize,
    pub length: usize,
    /// Long enough for domain walls between synchronized patches to die out.
    pub burn_in: usize,
    pub seed: u64,
    /// Map indices of the scored pair.
    pub src: usize,
    pub dst: usize,
    pub bins: usize,
    pub ell: usize,
    pub m: usize,
    pub tau_min: i64,
    pub tau_max: i64,
    pub score: ScoreConfig,
    pub significance: SignificanceConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            n_points: 51,
            epsilon_min: 0.0,
            epsilon_max: 1.0,
            n_maps: 100,
            length: 100_000,
            burn_in: 1_000_000,
            seed: 0,
            src: 0,
            dst: 1,
            bins: 4,
            ell: 1,
            m: 1,
            tau_min: 1,
            tau_max: 20,
            score: ScoreConfig::default(),
            significance: SignificanceConfig { n_surrogates: 19, ..Default::default() },
        }
    }
}

impl SweepConfig {
    pub fn epsilons(&self) -> Vec<f64> {
        match self.n_points {
            1 => vec![self.epsilon_min],
            n => (0..n)
                .map(|k| self.epsilon_min + (self.epsilon_max - self.epsilon_min) * k as f64 / (n - 1) as f64)
                .collect(),
        }
    }

    fn spec(&self) -> ScanSpec {
        ScanSpec { ell: self.ell, m_plus_1: self.m + 1, tau_min: self.tau_min, tau_max: self.tau_max }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_points == 0 {
            return bad("n_points must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.epsilon_min) || !(0.0..=1.0).contains(&self.epsilon_max) {
            return bad("epsilon range must lie in [0,1]".into());
        }
        if self.epsilon_min > self.epsilon_max {
            return bad("epsilon_min exceeds epsilon_max".into());
        }
        if self.src >= self.n_maps || self.dst >= self.n_maps || self.src == self.dst {
            return bad(format!("pair ({}, {}) is not two distinct maps of {}", self.src, self.dst, self.n_maps));
        }
        self.spec().validate().map_err(|e| Error::Config(e.to_string()))?;
        self.significance.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.ulam(0.0).validate()
    }

    fn ulam(&self, epsilon: f64) -> UlamConfig {
        UlamConfig { epsilon, n_maps: self.n_maps, length: self.length, burn_in: self.burn_in, seed: self.seed }
    }
}

/// One coupling strength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub gamma_tilde: f64,
    /// Transfer entropy at `best_tau`.
    pub te: f64,
    /// Delay maximizing the approximated capacity; absent when a series is constant.
    pub best_tau: Option<i64>,
    pub p_value: f64,
    pub significant: bool,
}

fn encode_pair(cfg: &SweepConfig, x: &[f64], y: &[f64]) -> Result<Option<(SymbolSeries, SymbolSeries)>> {
    let enc = |c: &[f64]| fit_encoder(c, cfg.bins, BinStrategy::EqualWidth, Normalization::None);
    match (enc(x), enc(y)) {
        (Ok(ex), Ok(ey)) => Ok(Some((encode(x, &ex, 1.0)?, encode(y, &ey, 1.0)?))),
        // A frozen map carries no information either way.
        (Err(Error::DegenerateData(_)), _) | (_, Err(Error::DegenerateData(_))) => Ok(None),
        (Err(e), _) | (_, Err(e)) => Err(e),
    }
}

/// Scores `src -> dst` at every coupling strength. Every point uses the same
/// initial condition; surrogates are seeded per point.
pub fn ulam_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let spec = cfg.spec();
    let te_cfg = ScoreConfig { kind: ScoreKind::Te, ..cfg.score };
    let g_cfg = ScoreConfig { kind: ScoreKind::GammaTilde, ..cfg.score };
    cfg.epsilons()
        .into_par_iter()
        .enumerate()
        .map(|(k, epsilon)| {
            let traj = simulate_ulam(&cfg.ulam(epsilon))?;
            let Some((x, y)) = encode_pair(cfg, &traj.series[cfg.src], &traj.series[cfg.dst])? else {
                return Ok(SweepRow { epsilon, gamma_tilde: 0.0, te: 0.0, best_tau: None, p_value: 1.0, significant: false });
            };
            let seed = derive_seed(cfg.seed, &format!("sweep/{k}"));
            let (scan, sig) = match significance_test(&x, &y, &spec, &g_cfg, &cfg.significance, seed) {
                Ok(r) => r,
                Err(Error::DegenerateData(_)) => {
                    return Ok(SweepRow { epsilon, gamma_tilde: 0.0, te: 0.0, best_tau: None, p_value: 1.0, significant: false })
                }
                Err(e) => return Err(e),
            };
            let te = scan_delays(&x, &y, &spec.clone(), &te_cfg)?;
            let te_at = te.curve.iter().find(|(t, _)| *t == scan.best_tau).map_or(0.0, |p| p.1);
            Ok(SweepRow {
                epsilon,
                gamma_tilde: scan.best_score,
                te: te_at,
                best_tau: Some(scan.best_tau),
                p_value: sig.p_value,
                significant: sig.significant,
            })
        })
        .collect()
}
