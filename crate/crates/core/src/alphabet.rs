//! Finite alphabets: binning real-valued series into symbols and building
//! the delay-embedded records that feed a causal channel.
//!
//! Words over a product alphabet are packed in mixed radix with the most
//! recent symbol in the least-significant digit. A source window
//! `(x[t-tau], x[t-tau-1], ..., x[t-tau-m])` packs to
//! `x[t-tau] + r*x[t-tau-1] + ... + r^m*x[t-tau-m]`, and a destination past
//! `(y[t-1], ..., y[t-ell])` packs to `y[t-1] + r*y[t-2] + ...`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on the size of any product alphabet we are willing to index densely.
pub const MAX_WORD_STATES: usize = 1 << 24;

/// How bin edges are placed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "value")]
pub enum BinStrategy {
    EqualWidth,
    Quantile,
    /// A single edge at the given value (after normalization), giving a binary alphabet.
    Threshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    #[default]
    None,
    ZScore,
    MinMax,
}

/// A fitted quantizer. Bins are half-open `[lo, hi)`; values below the first
/// edge map to symbol 0 and values at or above the last edge map to the last
/// symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    bin_edges: Vec<f64>,
    strategy: BinStrategy,
    normalization: Normalization,
    offset: f64,
    scale: f64,
}

impl Encoder {
    /// Builds an encoder from explicit edges applied to raw (un-normalized) values.
    pub fn from_edges(bin_edges: Vec<f64>) -> Result<Self> {
        if bin_edges.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidInput("bin edges must be finite".into()));
        }
        if bin_edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("bin edges must be strictly increasing".into()));
        }
        Ok(Self {
            bin_edges,
            strategy: BinStrategy::EqualWidth,
            normalization: Normalization::None,
            offset: 0.0,
            scale: 1.0,
        })
    }

    pub fn bin_edges(&self) -> &[f64] {
        &self.bin_edges
    }

    pub fn cardinality(&self) -> usize {
        self.bin_edges.len() + 1
    }

    pub fn strategy(&self) -> BinStrategy {
        self.strategy
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    /// Applies the fitted normalization to a raw value.
    pub fn normalize(&self, value: f64) -> f64 {
        (value - self.offset) / self.scale
    }

    /// Maps one raw value to its symbol.
    pub fn symbol(&self, value: f64) -> Result<u32> {
        if value.is_nan() {
            return Err(Error::InvalidInput("NaN cannot be encoded".into()));
        }
        let v = self.normalize(value);
        Ok(self.bin_edges.partition_point(|&e| e <= v) as u32)
    }
}

/// Fits an encoder to `series`.
pub fn fit_encoder(
    series: &[f64],
    n_bins: usize,
    strategy: BinStrategy,
    normalization: Normalization,
) -> Result<Encoder> {
    if n_bins == 0 {
        return Err(Error::InvalidInput("n_bins must be positive".into()));
    }
    if series.is_empty() {
        return Err(Error::InsufficientData("cannot fit an encoder to an empty series".into()));
    }
    if let Some(idx) = series.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite value at index {idx}")));
    }
    if let BinStrategy::Threshold(t) = strategy {
        if n_bins != 2 {
            return Err(Error::InvalidInput(format!(
                "threshold strategy yields 2 bins, got n_bins={n_bins}"
            )));
        }
        if !t.is_finite() {
            return Err(Error::InvalidInput("threshold must be finite".into()));
        }
    }

    let (lo, hi) = min_max(series);
    if n_bins >= 2 && lo == hi {
        return Err(Error::DegenerateData(
            "constant series cannot be split into more than one bin".into(),
        ));
    }

    let (offset, scale) = match normalization {
        Normalization::None => (0.0, 1.0),
        Normalization::MinMax => {
            if hi > lo {
                (lo, hi - lo)
            } else {
                (lo, 1.0)
            }
        }
        Normalization::ZScore => {
            let n = series.len() as f64;
            let mean = series.iter().sum::<f64>() / n;
            let var = series.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let sd = var.sqrt();
            if sd > 0.0 {
                (mean, sd)
            } else {
                (mean, 1.0)
            }
        }
    };
    let normalized: Vec<f64> = series.iter().map(|v| (v - offset) / scale).collect();

    let bin_edges = if n_bins == 1 {
        Vec::new()
    } else {
        match strategy {
            BinStrategy::EqualWidth => {
                let (nlo, nhi) = min_max(&normalized);
                let width = (nhi - nlo) / n_bins as f64;
                (1..n_bins).map(|k| nlo + width * k as f64).collect()
            }
            BinStrategy::Quantile => quantile_edges(normalized, n_bins),
            BinStrategy::Threshold(t) => vec![t],
        }
    };

    let mut edges: Vec<f64> = Vec::with_capacity(bin_edges.len());
    for e in bin_edges {
        if edges.last().is_none_or(|&last| e > last) {
            edges.push(e);
        }
    }

    Ok(Encoder { bin_edges: edges, strategy, normalization, offset, scale })
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

// Edge k sits between the order statistics at rank floor(k*n/bins) - 1 and
// floor(k*n/bins), so a ties-free sample gets floor-rounded equal occupancy.
fn quantile_edges(mut values: Vec<f64>, n_bins: usize) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    (1..n_bins)
        .filter_map(|k| {
            let idx = k * n / n_bins;
            if idx == 0 || idx >= n {
                return None;
            }
            Some(0.5 * (values[idx - 1] + values[idx]))
        })
        .collect()
}

/// An encoded time series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolSeries {
    symbols: Vec<u32>,
    cardinality: u32,
    sample_interval: f64,
}

impl SymbolSeries {
    pub fn new(symbols: Vec<u32>, cardinality: u32, sample_interval: f64) -> Result<Self> {
        if cardinality == 0 {
            return Err(Error::InvalidInput("cardinality must be positive".into()));
        }
        if symbols.is_empty() {
            return Err(Error::InsufficientData("symbol series is empty".into()));
        }
        if !(sample_interval > 0.0 && sample_interval.is_finite()) {
            return Err(Error::InvalidInput("sample interval must be positive".into()));
        }
        if let Some(pos) = symbols.iter().position(|&s| s >= cardinality) {
            return Err(Error::InvalidInput(format!(
                "symbol {} at index {pos} exceeds cardinality {cardinality}",
                symbols[pos]
            )));
        }
        Ok(Self { symbols, cardinality, sample_interval })
    }

    pub fn symbols(&self) -> &[u32] {
        &self.symbols
    }

    pub fn cardinality(&self) -> u32 {
        self.cardinality
    }

    pub fn sample_interval(&self) -> f64 {
        self.sample_interval
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Circularly rotates the symbols left by `shift` positions.
    pub fn rotated(&self, shift: usize) -> Self {
        let mut symbols = self.symbols.clone();
        let n = symbols.len();
        symbols.rotate_left(shift % n);
        Self { symbols, ..*self }
    }

    /// Empirical symbol frequencies.
    pub fn histogram(&self) -> Vec<u64> {
        let mut h = vec![0u64; self.cardinality as usize];
        for &s in &self.symbols {
            h[s as usize] += 1;
        }
        h
    }
}

/// Encodes a real series with a fitted encoder.
pub fn encode(series: &[f64], enc: &Encoder, sample_interval: f64) -> Result<SymbolSeries> {
    let symbols = series
        .iter()
        .enumerate()
        .map(|(i, &v)| enc.symbol(v).map_err(|e| e.context(format!("index {i}"))))
        .collect::<Result<Vec<_>>>()?;
    SymbolSeries::new(symbols, enc.cardinality() as u32, sample_interval)
}

/// Delay-embedding parameters: destination-past order, source window length
/// and interaction delay (in samples).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EmbeddingSpec {
    pub ell: usize,
    pub m_plus_1: usize,
    pub tau: i64,
}

impl EmbeddingSpec {
    pub fn new(ell: usize, m_plus_1: usize, tau: i64) -> Result<Self> {
        let spec = Self { ell, m_plus_1, tau };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ell == 0 {
            return Err(Error::InvalidInput("ell must be at least 1".into()));
        }
        if self.m_plus_1 == 0 {
            return Err(Error::InvalidInput("source window length must be at least 1".into()));
        }
        Ok(())
    }

    pub fn with_tau(self, tau: i64) -> Self {
        Self { tau, ..self }
    }

    /// Inclusive range of destination times `t` for which every referenced
    /// sample exists, or `None` if the series is too short.
    pub fn valid_range(&self, len: usize) -> Option<(usize, usize)> {
        let n = len as i64;
        let m = self.m_plus_1 as i64 - 1;
        let lo = (self.ell as i64).max(self.tau + m).max(0);
        let hi = (n - 1).min(n - 1 + self.tau);
        (lo <= hi).then_some((lo as usize, hi as usize))
    }

    /// Number of leading samples consumed before the first record.
    pub fn warmup(&self) -> usize {
        let m = self.m_plus_1 as i64 - 1;
        (self.ell as i64).max(self.tau + m).max(0) as usize
    }

    fn check_length(&self, len: usize) -> Result<(usize, usize)> {
        self.valid_range(len).ok_or_else(|| {
            Error::InsufficientData(format!(
                "series of length {len} is too short for ell={}, m+1={}, tau={}",
                self.ell, self.m_plus_1, self.tau
            ))
        })
    }
}

/// Number of distinct words of `len` symbols over an alphabet of size `radix`.
pub fn word_states(radix: u32, len: usize) -> Result<usize> {
    let mut states: usize = 1;
    for _ in 0..len {
        states = states
            .checked_mul(radix as usize)
            .filter(|&s| s <= MAX_WORD_STATES)
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "product alphabet {radix}^{len} exceeds {MAX_WORD_STATES} states"
                ))
            })?;
    }
    Ok(states)
}

/// Packs a window given most-recent-first.
pub fn pack_word(window: &[u32], radix: u32) -> usize {
    window.iter().rev().fold(0usize, |acc, &s| acc * radix as usize + s as usize)
}

/// Inverse of [`pack_word`]; returns the window most-recent-first.
pub fn unpack_word(word: usize, radix: u32, len: usize) -> Result<Vec<u32>> {
    if radix == 0 {
        return Err(Error::InvalidInput("radix must be positive".into()));
    }
    let r = radix as usize;
    let mut rest = word;
    let mut out = Vec::with_capacity(len.min(usize::BITS as usize));
    for _ in 0..len {
        if rest == 0 {
            out.resize(len, 0);
            break;
        }
        out.push((rest % r) as u32);
        rest /= r;
    }
    if rest != 0 {
        return Err(Error::InvalidInput(format!("word {word} needs more than {len} base-{radix} digits")));
    }
    Ok(out)
}

/// Packed words for every position of a series: `words[t]` covers
/// `(s[t - offset], s[t - offset - 1], ..., s[t - offset - len + 1])`.
/// Positions whose window would start before the series hold `usize::MAX`.
#[derive(Debug, Clone)]
pub struct WordTable {
    words: Vec<usize>,
    states: usize,
}

impl WordTable {
    pub fn new(series: &SymbolSeries, len: usize, offset: usize) -> Result<Self> {
        let radix = series.cardinality();
        let states = word_states(radix, len)?;
        let s = series.symbols();
        let n = s.len();
        let mut words = vec![usize::MAX; n];
        if len == 0 {
            words.iter_mut().skip(offset).for_each(|w| *w = 0);
            return Ok(Self { words, states });
        }
        let first = offset + len - 1;
        if first >= n {
            return Ok(Self { words, states });
        }
        // w[t] = s[t-off] + r * (w[t-1] mod r^(len-1))
        let r = radix as usize;
        let keep = states / r;
        let mut w = pack_word(&(0..len).map(|k| s[first - offset - k]).collect::<Vec<_>>(), radix);
        words[first] = w;
        for t in first + 1..n {
            w = s[t - offset] as usize + r * (w % keep);
            words[t] = w;
        }
        Ok(Self { words, states })
    }

    #[inline]
    pub fn get(&self, t: usize) -> usize {
        self.words[t]
    }

    pub fn states(&self) -> usize {
        self.states
    }
}

/// One aligned observation of a causal channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddedRecord {
    /// Packed source window (input index).
    pub source_word: usize,
    /// Packed destination past (sub-channel index).
    pub dest_past_word: usize,
    /// Destination symbol (output index).
    pub dest_symbol: u32,
    pub time_index: usize,
}

/// Embedded records together with the alphabet sizes they index into.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedRecords {
    pub spec: EmbeddingSpec,
    pub n_subchannels: usize,
    pub n_inputs: usize,
    pub n_outputs: usize,
    pub records: Vec<EmbeddedRecord>,
}

impl EmbeddedRecords {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Precomputed source/past word tables for one ordered pair of series.
#[derive(Debug, Clone)]
pub struct PairWords<'a> {
    dst: &'a SymbolSeries,
    source: WordTable,
    past: WordTable,
    ell: usize,
    m_plus_1: usize,
}

impl<'a> PairWords<'a> {
    pub fn new(src: &SymbolSeries, dst: &'a SymbolSeries, ell: usize, m_plus_1: usize) -> Result<Self> {
        check_pair(src, dst)?;
        EmbeddingSpec { ell, m_plus_1, tau: 0 }.validate()?;
        Ok(Self {
            dst,
            source: WordTable::new(src, m_plus_1, 0)?,
            past: WordTable::new(dst, ell, 1)?,
            ell,
            m_plus_1,
        })
    }

    pub fn spec(&self, tau: i64) -> EmbeddingSpec {
        EmbeddingSpec { ell: self.ell, m_plus_1: self.m_plus_1, tau }
    }

    pub fn n_inputs(&self) -> usize {
        self.source.states()
    }

    pub fn n_subchannels(&self) -> usize {
        self.past.states()
    }

    pub fn n_outputs(&self) -> usize {
        self.dst.cardinality() as usize
    }

    pub fn len(&self) -> usize {
        self.dst.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dst.is_empty()
    }

    /// Calls `f(g, i, j)` for every valid record at delay `tau`.
    pub fn for_each_record(&self, tau: i64, mut f: impl FnMut(usize, usize, usize)) -> Result<usize> {
        let (lo, hi) = self.spec(tau).check_length(self.dst.len())?;
        let y = self.dst.symbols();
        for t in lo..=hi {
            let src_t = (t as i64 - tau) as usize;
            f(self.past.get(t), self.source.get(src_t), y[t] as usize);
        }
        Ok(hi - lo + 1)
    }
}

fn check_pair(src: &SymbolSeries, dst: &SymbolSeries) -> Result<()> {
    if src.len() != dst.len() {
        return Err(Error::Shape(format!(
            "source length {} differs from destination length {}",
            src.len(),
            dst.len()
        )));
    }
    if src.sample_interval() != dst.sample_interval() {
        return Err(Error::InvalidInput("series have different sample intervals".into()));
    }
    Ok(())
}

/// Builds one record per valid destination time `t`.
pub fn embed(src: &SymbolSeries, dst: &SymbolSeries, spec: EmbeddingSpec) -> Result<EmbeddedRecords> {
    spec.validate()?;
    let words = PairWords::new(src, dst, spec.ell, spec.m_plus_1)?;
    let (lo, _) = spec.check_length(dst.len())?;
    let mut records = Vec::new();
    let mut t = lo;
    words.for_each_record(spec.tau, |g, i, j| {
        records.push(EmbeddedRecord {
            source_word: i,
            dest_past_word: g,
            dest_symbol: j as u32,
            time_index: t,
        });
        t += 1;
    })?;
    Ok(EmbeddedRecords {
        spec,
        n_subchannels: words.n_subchannels(),
        n_inputs: words.n_inputs(),
        n_outputs: words.n_outputs(),
        records,
    })
}
