//! Structure inference: delay scans, surrogate significance, direction and
//! cycle decisions, triad classification, pruning and hypergraph assembly.

mod graph;
mod pipeline;
mod prune;
mod scan;
mod significance;
mod triad;

pub use graph::{build_hypergraph, count_multi_parent, CausalHypergraph, EdgeCandidate, Hyperedge};
pub use pipeline::{
    encode_dataset, run_pipeline, DirectionReport, EmbeddingConfig, EncodingConfig, EstimationConfig, PairReport,
    PipelineConfig, PipelineReport, VariableReport,
};
pub use prune::{delay_consistency, prune, PruneConfig, PruneLogEntry, TriadReport};
pub use scan::{
    relation_scores, scan_delays, scan_words, score_counts, DelayScan, RelationScores, ScanSpec, ScoreConfig,
    ScoreKind,
};
pub use significance::{
    direction_test, quantile, significance_test, surrogate_test, Direction, DirectionResult,
    SignificanceConfig, SignificanceResult,
};
pub use triad::{
    analyze_triad, classify_triad, classify_triad_with, delays_consistent, triad_threshold, Basis, IndistinguishableReason,
    Relation, Structure, TriadConfig, TriadJoint, TriadTensors, TriadThreshold, TriadVerdict,
};
