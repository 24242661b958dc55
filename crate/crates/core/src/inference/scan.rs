use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alphabet::{PairWords, SymbolSeries};
use crate::capacity::{approx_capacity, DEFAULT_MAX_ITER};
use crate::error::{Error, Result};
use crate::estimation::{count_pair, tensor_from_counts, JointCounts};
use crate::info::te_from_counts;

/// Which quantity a delay scan maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreKind {
    /// Sub-channel-weighted capacity.
    #[default]
    GammaTilde,
    Te,
}

/// Capacity gap tolerance (bits) used while scanning. The reported lower
/// bound is far more accurate than the gap at this point.
pub const SCAN_CAPACITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScoreConfig {
    pub kind: ScoreKind,
    pub capacity_tol: f64,
    pub capacity_max_iter: usize,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self { kind: ScoreKind::GammaTilde, capacity_tol: SCAN_CAPACITY_TOL, capacity_max_iter: DEFAULT_MAX_ITER }
    }
}

/// Both scores of one relation at one delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelationScores {
    pub gamma_tilde: f64,
    pub te: f64,
}

impl RelationScores {
    pub fn get(&self, kind: ScoreKind) -> f64 {
        match kind {
            ScoreKind::GammaTilde => self.gamma_tilde,
            ScoreKind::Te => self.te,
        }
    }
}

/// Embedding orders plus the inclusive range of delays to scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanSpec {
    pub ell: usize,
    pub m_plus_1: usize,
    pub tau_min: i64,
    pub tau_max: i64,
}

impl ScanSpec {
    pub fn validate(&self) -> Result<()> {
        if self.ell == 0 || self.m_plus_1 == 0 {
            return Err(Error::InvalidInput("ell and m_plus_1 must be at least 1".into()));
        }
        if self.tau_min > self.tau_max {
            return Err(Error::InvalidInput(format!(
                "empty delay range [{}, {}]",
                self.tau_min, self.tau_max
            )));
        }
        Ok(())
    }

    pub fn taus(&self) -> impl Iterator<Item = i64> {
        self.tau_min..=self.tau_max
    }

    /// Longest stretch of samples any record in the scan reaches back over.
    pub fn reach(&self) -> usize {
        let tau = self.tau_min.unsigned_abs().max(self.tau_max.unsigned_abs()) as usize;
        self.ell.max(tau + self.m_plus_1)
    }
}

/// Scores counts with the requested measure.
pub fn score_counts(c: &JointCounts, cfg: &ScoreConfig) -> Result<f64> {
    match cfg.kind {
        ScoreKind::Te => Ok(te_from_counts(c)),
        ScoreKind::GammaTilde => {
            let (t, _) = tensor_from_counts(c, 0.0, 0)?;
            Ok(approx_capacity(&t, cfg.capacity_tol, cfg.capacity_max_iter)?.gamma_tilde)
        }
    }
}

/// Both scores from counts.
pub fn relation_scores(c: &JointCounts, cfg: &ScoreConfig) -> Result<RelationScores> {
    let (t, _) = tensor_from_counts(c, 0.0, 0)?;
    Ok(RelationScores {
        gamma_tilde: approx_capacity(&t, cfg.capacity_tol, cfg.capacity_max_iter)?.gamma_tilde,
        te: te_from_counts(c),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayScan {
    pub best_tau: i64,
    pub best_score: f64,
    /// `(tau, score)` for every scanned delay, in increasing `tau`.
    pub curve: Vec<(i64, f64)>,
}

/// Index of the best point: highest score, then smallest `|tau|`, then positive `tau`.
pub(crate) fn argmax_delay(curve: &[(i64, f64)]) -> Option<usize> {
    (0..curve.len()).min_by(|&a, &b| {
        let (ta, sa) = curve[a];
        let (tb, sb) = curve[b];
        sb.total_cmp(&sa)
            .then(ta.unsigned_abs().cmp(&tb.unsigned_abs()))
            .then((ta < 0).cmp(&(tb < 0)))
    })
}

/// Scores every delay in the range from precomputed word tables.
pub fn scan_words(words: &PairWords<'_>, spec: &ScanSpec, cfg: &ScoreConfig) -> Result<DelayScan> {
    spec.validate()?;
    let taus: Vec<i64> = spec.taus().collect();
    let curve = taus
        .par_iter()
        .map(|&tau| Ok((tau, score_counts(&count_pair(words, tau)?, cfg)?)))
        .collect::<Result<Vec<_>>>()?;
    let best = argmax_delay(&curve).expect("nonempty range");
    Ok(DelayScan { best_tau: curve[best].0, best_score: curve[best].1, curve })
}

/// Finds the delay that maximizes the score of `src -> dst`.
pub fn scan_delays(
    src: &SymbolSeries,
    dst: &SymbolSeries,
    spec: &ScanSpec,
    cfg: &ScoreConfig,
) -> Result<DelayScan> {
    spec.validate()?;
    if dst.len() <= spec.reach() {
        return Err(Error::InsufficientData(format!(
            "series of length {} cannot cover delays up to {}",
            dst.len(),
            spec.tau_max
        )));
    }
    let words = PairWords::new(src, dst, spec.ell, spec.m_plus_1)?;
    scan_words(&words, spec, cfg)
}
