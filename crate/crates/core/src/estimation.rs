//! Plug-in estimation of causal and interaction tensors from symbol counts.

use ndarray::{Array2, Array3, Array4, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alphabet::{EmbeddedRecords, PairWords, SymbolSeries, WordTable};
use crate::error::{shape_err, Error, Result};
use crate::tensor::{CausalTensor, InteractionTensor, Pmf};

/// Record count above which [`count_joint`] splits work across threads.
const PARALLEL_COUNT_MIN: usize = 1 << 16;

/// Joint counts over `(g, i, j)`: destination past, source word, destination symbol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointCounts {
    counts: Array3<u64>,
    total: u64,
}

impl JointCounts {
    pub fn zeros(n_subchannels: usize, n_inputs: usize, n_outputs: usize) -> Self {
        Self { counts: Array3::zeros((n_subchannels, n_inputs, n_outputs)), total: 0 }
    }

    pub fn from_counts(counts: Array3<u64>) -> Self {
        let total = counts.sum();
        Self { counts, total }
    }

    #[inline]
    pub fn add(&mut self, g: usize, i: usize, j: usize) {
        self.counts[[g, i, j]] += 1;
        self.total += 1;
    }

    pub fn merge(mut self, other: &Self) -> Result<Self> {
        if self.counts.dim() != other.counts.dim() {
            return Err(shape_err!("cannot merge counts of different shapes"));
        }
        self.counts += &other.counts;
        self.total += other.total;
        Ok(self)
    }

    pub fn counts(&self) -> &Array3<u64> {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.counts.dim()
    }
}

/// Joint counts over `(h, i, j, k)` for a two-parent relation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionCounts {
    counts: Array4<u64>,
    total: u64,
    delay_x: i64,
    delay_y: i64,
}

impl InteractionCounts {
    pub fn from_counts(counts: Array4<u64>, delay_x: i64, delay_y: i64) -> Self {
        let total = counts.sum();
        Self { counts, total, delay_x, delay_y }
    }

    pub fn counts(&self) -> &Array4<u64> {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }
}

/// A conditioning context that had no observations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnseenContext {
    pub subchannel: usize,
    /// `None` when the whole sub-channel is empty. For interaction tensors
    /// this holds the flattened `(i, j)` input pair.
    pub input: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub unseen_contexts: Vec<UnseenContext>,
    pub effective_samples: u64,
    pub smoothing: f64,
}

/// Counts `(g, i, j)` occurrences in embedded records.
pub fn count_joint(records: &EmbeddedRecords) -> Result<JointCounts> {
    if records.is_empty() {
        return Err(Error::InsufficientData("no records to count".into()));
    }
    let (g, i, j) = (records.n_subchannels, records.n_inputs, records.n_outputs);
    let tally = |chunk: &[crate::alphabet::EmbeddedRecord]| -> Result<JointCounts> {
        let mut c = JointCounts::zeros(g, i, j);
        for r in chunk {
            if r.dest_past_word >= g || r.source_word >= i || r.dest_symbol as usize >= j {
                return Err(shape_err!("record at t={} indexes outside the declared alphabets", r.time_index));
            }
            c.add(r.dest_past_word, r.source_word, r.dest_symbol as usize);
        }
        Ok(c)
    };
    if records.len() < PARALLEL_COUNT_MIN {
        return tally(&records.records);
    }
    let parts = records
        .records
        .par_chunks(PARALLEL_COUNT_MIN)
        .map(tally)
        .collect::<Result<Vec<_>>>()?;
    parts.iter().try_fold(JointCounts::zeros(g, i, j), |acc, p| acc.merge(p))
}

/// Counts records at delay `tau` directly from precomputed word tables.
pub fn count_pair(words: &PairWords<'_>, tau: i64) -> Result<JointCounts> {
    let mut c = JointCounts::zeros(words.n_subchannels(), words.n_inputs(), words.n_outputs());
    words.for_each_record(tau, |g, i, j| c.add(g, i, j))?;
    if c.total == 0 {
        return Err(Error::InsufficientData(format!("no records at tau={tau}")));
    }
    Ok(c)
}

/// Conditional relative frequencies `A[g][i][j] = (n_gij + l) / (n_gi + l*J)`.
///
/// Rows with no observations (and `l = 0`) become uniform and are listed in
/// the report. Sub-channel weights are the marginal frequencies of `g` and
/// `context_input` holds `p(i|g)` (uniform for empty sub-channels).
pub fn tensor_from_counts(
    c: &JointCounts,
    smoothing: f64,
    delay: i64,
) -> Result<(CausalTensor, EstimationReport)> {
    check_smoothing(smoothing)?;
    if c.total == 0 {
        return Err(Error::InsufficientData("empty counts".into()));
    }
    let (ng, ni, nj) = c.dims();
    let mut entries = Array3::zeros((ng, ni, nj));
    let mut ctx = Array2::zeros((ng, ni));
    let mut weights = vec![0.0; ng];
    let mut unseen = Vec::new();
    for g in 0..ng {
        let slice = c.counts.index_axis(Axis(0), g);
        let n_g: u64 = slice.sum();
        weights[g] = n_g as f64 / c.total as f64;
        if n_g == 0 {
            unseen.push(UnseenContext { subchannel: g, input: None });
        }
        for i in 0..ni {
            let row = slice.row(i);
            let n_gi: u64 = row.sum();
            ctx[[g, i]] = if n_g == 0 { 1.0 / ni as f64 } else { n_gi as f64 / n_g as f64 };
            fill_row(row.iter().copied(), n_gi, smoothing, entries.index_axis_mut(Axis(0), g).row_mut(i));
            if n_gi == 0 && n_g > 0 {
                unseen.push(UnseenContext { subchannel: g, input: Some(i) });
            }
        }
    }
    let tensor = CausalTensor::new(entries, delay, Pmf::new(weights)?, Some(ctx))?;
    let report = EstimationReport { unseen_contexts: unseen, effective_samples: c.total, smoothing };
    Ok((tensor, report))
}

/// Interaction tensor `D[h][i][j][k]` by conditional relative frequencies.
pub fn interaction_from_counts(
    c: &InteractionCounts,
    smoothing: f64,
) -> Result<(InteractionTensor, EstimationReport)> {
    check_smoothing(smoothing)?;
    if c.total == 0 {
        return Err(Error::InsufficientData("empty counts".into()));
    }
    let (nh, ni, nj, nk) = c.counts.dim();
    let mut entries = Array4::zeros((nh, ni, nj, nk));
    let mut unseen = Vec::new();
    for h in 0..nh {
        let n_h: u64 = c.counts.index_axis(Axis(0), h).sum();
        if n_h == 0 {
            unseen.push(UnseenContext { subchannel: h, input: None });
        }
        for i in 0..ni {
            for j in 0..nj {
                let row = c.counts.slice(ndarray::s![h, i, j, ..]);
                let n: u64 = row.sum();
                if n == 0 && n_h > 0 {
                    unseen.push(UnseenContext { subchannel: h, input: Some(i * nj + j) });
                }
                fill_row(row.iter().copied(), n, smoothing, entries.slice_mut(ndarray::s![h, i, j, ..]));
            }
        }
    }
    let tensor = InteractionTensor::new(entries, c.delay_x, c.delay_y)?;
    Ok((tensor, EstimationReport { unseen_contexts: unseen, effective_samples: c.total, smoothing }))
}

/// Normalized joint `p[g][i][j]`.
pub fn joint_pmf(c: &JointCounts) -> Result<Array3<f64>> {
    if c.total == 0 {
        return Err(Error::InsufficientData("empty counts".into()));
    }
    let n = c.total as f64;
    Ok(c.counts.mapv(|v| v as f64 / n))
}

/// Counts `(h, i, j, k)` for child `z` with parents `x` (delay `tau_x`) and
/// `y` (delay `tau_y`). Parent words have `m_plus_1` symbols, the child past `ell`.
pub fn count_interaction(
    x: &SymbolSeries,
    y: &SymbolSeries,
    z: &SymbolSeries,
    ell: usize,
    m_plus_1: usize,
    tau_x: i64,
    tau_y: i64,
) -> Result<InteractionCounts> {
    let n = z.len();
    if x.len() != n || y.len() != n {
        return Err(shape_err!("series lengths differ"));
    }
    if ell == 0 || m_plus_1 == 0 {
        return Err(Error::InvalidInput("ell and m_plus_1 must be positive".into()));
    }
    let xw = WordTable::new(x, m_plus_1, 0)?;
    let yw = WordTable::new(y, m_plus_1, 0)?;
    let hw = WordTable::new(z, ell, 1)?;
    let m = m_plus_1 as i64 - 1;
    let ni = n as i64;
    let lo = (ell as i64).max(tau_x + m).max(tau_y + m).max(0);
    let hi = (ni - 1).min(ni - 1 + tau_x).min(ni - 1 + tau_y);
    if lo > hi {
        return Err(Error::InsufficientData(format!(
            "series of length {n} too short for delays ({tau_x},{tau_y})"
        )));
    }
    let mut counts = Array4::zeros((hw.states(), xw.states(), yw.states(), z.cardinality() as usize));
    let zs = z.symbols();
    for t in lo..=hi {
        let tu = t as usize;
        counts[[hw.get(tu), xw.get((t - tau_x) as usize), yw.get((t - tau_y) as usize), zs[tu] as usize]] += 1;
    }
    Ok(InteractionCounts::from_counts(counts, tau_x, tau_y))
}

fn check_smoothing(l: f64) -> Result<()> {
    if !(l >= 0.0 && l.is_finite()) {
        return Err(Error::InvalidInput(format!("smoothing must be finite and >= 0, got {l}")));
    }
    Ok(())
}

fn fill_row(
    counts: impl ExactSizeIterator<Item = u64>,
    total: u64,
    l: f64,
    mut out: ndarray::ArrayViewMut1<'_, f64>,
) {
    let k = counts.len() as f64;
    if total == 0 && l == 0.0 {
        out.fill(1.0 / k);
        return;
    }
    let denom = total as f64 + l * k;
    for (o, c) in out.iter_mut().zip(counts) {
        *o = (c as f64 + l) / denom;
    }
}
