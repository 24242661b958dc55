use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scan::{scan_delays, scan_words, DelayScan, ScanSpec, ScoreConfig};
use crate::alphabet::{PairWords, SymbolSeries};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, task_rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SignificanceConfig {
    pub n_surrogates: usize,
    /// Confidence level; a relation is significant when `p <= 1 - alpha`.
    pub alpha: f64,
    /// Smallest circular shift; raised automatically to the scan's reach.
    pub min_shift: usize,
}

impl Default for SignificanceConfig {
    fn default() -> Self {
        Self { n_surrogates: 100, alpha: 0.9, min_shift: 0 }
    }
}

impl SignificanceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_surrogates < 19 {
            return Err(Error::InvalidInput(format!(
                "at least 19 surrogates are needed, got {}",
                self.n_surrogates
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidInput(format!("alpha must lie in (0,1), got {}", self.alpha)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    pub significant: bool,
    pub p_value: f64,
    /// `alpha`-quantile of the surrogate scores.
    pub threshold: f64,
    pub observed: f64,
    pub surrogate_scores: Vec<f64>,
}

/// Empirical quantile by the nearest-rank rule.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

/// Surrogate test of an already scanned relation.
///
/// Each surrogate circularly shifts the source by a uniform offset in
/// `[min_shift, n - min_shift]` and records the best score over the same
/// delay range; the p-value is the fraction of surrogates scoring at least
/// the observed maximum.
pub fn surrogate_test(
    src: &SymbolSeries,
    dst: &SymbolSeries,
    spec: &ScanSpec,
    score: &ScoreConfig,
    cfg: &SignificanceConfig,
    observed: f64,
    seed: u64,
) -> Result<SignificanceResult> {
    cfg.validate()?;
    if dst.histogram().iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::DegenerateData("destination series is constant".into()));
    }
    let n = src.len();
    let min_shift = cfg.min_shift.max(spec.reach() + 1);
    if n < 2 * min_shift + 1 {
        return Err(Error::InsufficientData(format!(
            "series of length {n} is too short for shifts of at least {min_shift}"
        )));
    }
    let scores = (0..cfg.n_surrogates)
        .into_par_iter()
        .map(|r| {
            let mut rng = task_rng(seed, &format!("surrogate/{r}"));
            let shift = rng.random_range(min_shift..=n - min_shift);
            let shifted = src.rotated(shift);
            let words = PairWords::new(&shifted, dst, spec.ell, spec.m_plus_1)?;
            Ok(scan_words(&words, spec, score)?.best_score)
        })
        .collect::<Result<Vec<f64>>>()?;
    let exceed = scores.iter().filter(|&&s| s >= observed).count();
    let p_value = exceed as f64 / scores.len() as f64;
    Ok(SignificanceResult {
        significant: p_value <= 1.0 - cfg.alpha,
        p_value,
        threshold: quantile(&scores, cfg.alpha),
        observed,
        surrogate_scores: scores,
    })
}

/// Scans `src -> dst` and tests the best score against time-shift surrogates.
pub fn significance_test(
    src: &SymbolSeries,
    dst: &SymbolSeries,
    spec: &ScanSpec,
    score: &ScoreConfig,
    cfg: &SignificanceConfig,
    seed: u64,
) -> Result<(DelayScan, SignificanceResult)> {
    let scan = scan_delays(src, dst, spec, score)?;
    let sig = surrogate_test(src, dst, spec, score, cfg, scan.best_score, seed)?;
    Ok((scan, sig))
}

/// Outcome of testing both directions of a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Direction {
    None,
    #[serde(rename = "x-to-y")]
    XtoY { tau: i64 },
    #[serde(rename = "y-to-x")]
    YtoX { tau: i64 },
    Cycle { tau_xy: i64, tau_yx: i64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionResult {
    pub direction: Direction,
    pub forward: (DelayScan, SignificanceResult),
    pub backward: (DelayScan, SignificanceResult),
}

/// Tests `x -> y` and `y -> x`.
///
/// Neither significant gives `None`; exactly one gives that direction. When
/// both are significant, different delays indicate a cycle and equal delays
/// are resolved in favour of the larger score.
pub fn direction_test(
    x: &SymbolSeries,
    y: &SymbolSeries,
    spec: &ScanSpec,
    score: &ScoreConfig,
    cfg: &SignificanceConfig,
    seed: u64,
) -> Result<DirectionResult> {
    let forward = significance_test(x, y, spec, score, cfg, derive_seed(seed, "forward"))?;
    let backward = significance_test(y, x, spec, score, cfg, derive_seed(seed, "backward"))?;
    let direction = decide_direction(&forward, &backward);
    Ok(DirectionResult { direction, forward, backward })
}

pub(crate) fn decide_direction(
    forward: &(DelayScan, SignificanceResult),
    backward: &(DelayScan, SignificanceResult),
) -> Direction {
    let (fs, fsig) = forward;
    let (bs, bsig) = backward;
    match (fsig.significant, bsig.significant) {
        (false, false) => Direction::None,
        (true, false) => Direction::XtoY { tau: fs.best_tau },
        (false, true) => Direction::YtoX { tau: bs.best_tau },
        (true, true) if fs.best_tau != bs.best_tau => {
            Direction::Cycle { tau_xy: fs.best_tau, tau_yx: bs.best_tau }
        }
        (true, true) if fs.best_score >= bs.best_score => Direction::XtoY { tau: fs.best_tau },
        (true, true) => Direction::YtoX { tau: bs.best_tau },
    }
}
