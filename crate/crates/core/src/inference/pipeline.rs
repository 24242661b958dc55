use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::graph::{build_hypergraph, CausalHypergraph, EdgeCandidate};
use super::prune::{prune, PruneConfig, PruneLogEntry, TriadReport};
use super::scan::{relation_scores, ScanSpec, ScoreConfig};
use super::significance::{direction_test, Direction, SignificanceConfig};
use super::triad::TriadConfig;
use crate::alphabet::{encode, fit_encoder, BinStrategy, Normalization, PairWords, SymbolSeries, MAX_WORD_STATES};
use crate::error::{Error, Result};
use crate::estimation::{count_pair, tensor_from_counts};
use crate::io::Dataset;
use crate::rng::{derive_seed, GENERATOR_ID};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncodingConfig {
    pub bins: usize,
    pub strategy: BinStrategy,
    pub normalization: Normalization,
}

impl Default for EncodingConfig {
    fn default() -> Self {
        Self { bins: 2, strategy: BinStrategy::Threshold(0.5), normalization: Normalization::MinMax }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbeddingConfig {
    /// Destination past length.
    pub ell: usize,
    /// Source window holds `m + 1` symbols.
    pub m: usize,
    pub tau_min: i64,
    pub tau_max: i64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self { ell: 1, m: 0, tau_min: 1, tau_max: 20 }
    }
}

impl EmbeddingConfig {
    pub fn scan_spec(&self) -> ScanSpec {
        ScanSpec { ell: self.ell, m_plus_1: self.m + 1, tau_min: self.tau_min, tau_max: self.tau_max }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimationConfig {
    /// Additive smoothing for reported tensors.
    pub smoothing: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub encoding: EncodingConfig,
    pub embedding: EmbeddingConfig,
    pub score: ScoreConfig,
    pub significance: SignificanceConfig,
    pub pruning: PruneConfig,
    pub triad: TriadConfig,
    pub estimation: EstimationConfig,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| Error::Config(e.to_string());
        self.embedding.scan_spec().validate().map_err(cfg)?;
        self.significance.validate().map_err(cfg)?;
        if self.encoding.bins == 0 {
            return Err(Error::Config("encoding.bins must be positive".into()));
        }
        if self.encoding.bins > MAX_WORD_STATES {
            return Err(Error::Config(format!("encoding.bins exceeds {MAX_WORD_STATES}")));
        }
        match self.encoding.strategy {
            BinStrategy::Threshold(_) if self.encoding.bins != 2 => {
                return Err(Error::Config("the threshold strategy needs encoding.bins = 2".into()));
            }
            BinStrategy::Threshold(t) if !t.is_finite() => {
                return Err(Error::Config("encoding threshold must be finite".into()));
            }
            _ => {}
        }
        let tolerances = [
            ("score.capacity_tol", Some(self.score.capacity_tol)),
            ("pruning.dpi_slack", Some(self.pruning.dpi_slack)),
            ("triad.fixed_tol", self.triad.fixed_tol),
            ("triad.degeneracy_tol", self.triad.degeneracy_tol),
        ];
        for (name, v) in tolerances {
            if v.is_some_and(|v| !(v >= 0.0 && v.is_finite())) {
                return Err(Error::Config(format!("{name} must be finite and nonnegative")));
            }
        }
        if self.pruning.delay_tol < 0 {
            return Err(Error::Config("pruning.delay_tol must be nonnegative".into()));
        }
        if !(self.estimation.smoothing >= 0.0) {
            return Err(Error::Config("estimation.smoothing must be nonnegative".into()));
        }
        if !(self.triad.quantile > 0.0 && self.triad.quantile <= 1.0) {
            return Err(Error::Config("triad.quantile must lie in (0,1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableReport {
    pub name: String,
    pub bin_edges: Vec<f64>,
    pub entropy_bits: f64,
}

/// Scan and surrogate summary for one ordered pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub src: String,
    pub dst: String,
    pub best_tau: i64,
    pub best_score: f64,
    pub curve: Vec<(i64, f64)>,
    pub p_value: f64,
    pub threshold: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionReport {
    pub x: String,
    pub y: String,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub generator: String,
    pub config: PipelineConfig,
    pub n_samples: usize,
    pub variables: Vec<VariableReport>,
    pub pairs: Vec<PairReport>,
    pub directions: Vec<DirectionReport>,
    /// Significant relations before pruning.
    pub candidate_edges: Vec<EdgeCandidate>,
    pub triads: Vec<TriadReport>,
    pub pruning: Vec<PruneLogEntry>,
}

/// Encodes every column with its own fitted encoder.
pub fn encode_dataset(data: &Dataset, enc: &EncodingConfig) -> Result<(Vec<SymbolSeries>, Vec<VariableReport>)> {
    data.names
        .iter()
        .zip(&data.columns)
        .map(|(name, col)| {
            let e = fit_encoder(col, enc.bins, enc.strategy, enc.normalization)
                .map_err(|err| err.context(format!("encoding column {name}")))?;
            let s = encode(col, &e, data.sample_interval)?;
            let h = s.histogram();
            let n = s.len() as f64;
            let entropy_bits = -h.iter().filter(|&&c| c > 0).map(|&c| c as f64 / n * (c as f64 / n).log2()).sum::<f64>();
            Ok((s, VariableReport { name: name.clone(), bin_edges: e.bin_edges().to_vec(), entropy_bits }))
        })
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().unzip())
}

/// Encoding, pairwise delay scans with surrogate tests, direction and cycle
/// decisions, triad-based pruning and hyperedge estimation.
pub fn run_pipeline(data: &Dataset, cfg: &PipelineConfig) -> Result<(CausalHypergraph, PipelineReport)> {
    cfg.validate()?;
    data.validate()?;
    if data.names.len() < 2 {
        return Err(Error::InvalidInput("at least two variables are required".into()));
    }
    let (series, variables) = encode_dataset(data, &cfg.encoding)?;
    let spec = cfg.embedding.scan_spec();
    let n = series.len();

    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    let results = pairs
        .par_iter()
        .map(|&(a, b)| {
            let seed = derive_seed(cfg.seed, &format!("pair/{a}/{b}"));
            direction_test(&series[a], &series[b], &spec, &cfg.score, &cfg.significance, seed)
                .map_err(|e| e.context(format!("pair {} / {}", data.names[a], data.names[b])))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut pair_reports = Vec::new();
    let mut directions = Vec::new();
    let mut wanted = Vec::new();
    for (&(a, b), r) in pairs.iter().zip(&results) {
        for ((s, d), (scan, sig)) in [((a, b), &r.forward), ((b, a), &r.backward)] {
            pair_reports.push(PairReport {
                src: data.names[s].clone(),
                dst: data.names[d].clone(),
                best_tau: scan.best_tau,
                best_score: scan.best_score,
                curve: scan.curve.clone(),
                p_value: sig.p_value,
                threshold: sig.threshold,
                significant: sig.significant,
            });
        }
        directions.push(DirectionReport {
            x: data.names[a].clone(),
            y: data.names[b].clone(),
            direction: r.direction,
        });
        match r.direction {
            Direction::None => {}
            Direction::XtoY { tau } => wanted.push((a, b, tau, r.forward.1.p_value)),
            Direction::YtoX { tau } => wanted.push((b, a, tau, r.backward.1.p_value)),
            Direction::Cycle { tau_xy, tau_yx } => {
                wanted.push((a, b, tau_xy, r.forward.1.p_value));
                wanted.push((b, a, tau_yx, r.backward.1.p_value));
            }
        }
    }

    let edges = wanted
        .par_iter()
        .map(|&(s, d, tau, p_value)| {
            let words = PairWords::new(&series[s], &series[d], spec.ell, spec.m_plus_1)?;
            let counts = count_pair(&words, tau)?;
            let scores = relation_scores(&counts, &cfg.score)?;
            let (tensor, _) = tensor_from_counts(&counts, cfg.estimation.smoothing, tau)?;
            Ok(EdgeCandidate {
                src: s,
                dst: d,
                delay: tau,
                gamma_tilde: scores.gamma_tilde,
                te: scores.te,
                significant: true,
                p_value,
                tensor: Some(tensor),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut graph = CausalHypergraph::new(data.names.clone());
    for e in edges {
        graph.add_edge(e)?;
    }
    let candidate_edges = graph.edges.clone();
    let (pruned, triads, pruning) = prune(
        &graph,
        &series,
        spec.ell,
        spec.m_plus_1,
        &cfg.pruning,
        &cfg.triad,
        derive_seed(cfg.seed, "prune"),
    )?;
    let graph = build_hypergraph(pruned, &series, spec.ell, spec.m_plus_1, cfg.estimation.smoothing)?;
    let report = PipelineReport {
        generator: GENERATOR_ID.to_string(),
        config: cfg.clone(),
        n_samples: data.len(),
        variables,
        pairs: pair_reports,
        directions,
        candidate_edges,
        triads,
        pruning,
    };
    Ok((graph, report))
}
