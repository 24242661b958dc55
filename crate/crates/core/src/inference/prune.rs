use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::graph::{CausalHypergraph, EdgeCandidate};
use super::triad::{analyze_triad, delays_consistent, Structure, TriadConfig, TriadJoint, TriadVerdict};
use crate::alphabet::SymbolSeries;
use crate::error::{shape_err, Result};
use crate::info::dpi_check;
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PruneConfig {
    /// Allowance (bits) in the DPI screen for potential indirect relations.
    pub dpi_slack: f64,
    /// Allowed mismatch (samples) between a shortcut's delay and the path's delay sum.
    pub delay_tol: i64,
}

impl Default for PruneConfig {
    fn default() -> Self {
        Self { dpi_slack: 0.01, delay_tol: 1 }
    }
}

/// `xz.delay` matches `xy.delay + yz.delay` and the endpoints chain up.
pub fn delay_consistency(xy: &EdgeCandidate, yz: &EdgeCandidate, xz: &EdgeCandidate, tol: i64) -> bool {
    xy.dst == yz.src
        && xy.src == xz.src
        && yz.dst == xz.dst
        && delays_consistent(xy.delay, yz.delay, xz.delay, tol)
}

/// A triad examined during pruning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriadReport {
    /// `(x, y, z)` with edges `x->y`, `y->z`, `x->z`.
    pub nodes: [usize; 3],
    /// `x->z` passes the chain DPI screen.
    pub chain_candidate: bool,
    /// `y->z` passes the fork DPI screen.
    pub fork_candidate: bool,
    pub verdict: Option<TriadVerdict>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneLogEntry {
    pub src: usize,
    pub dst: usize,
    pub delay: i64,
    pub triad: [usize; 3],
    pub structure: Structure,
    pub residual_chain: f64,
    pub residual_fork: f64,
    pub tol: f64,
}

/// Removes relations explained by a third variable.
///
/// For every ordered triple with edges `x->y`, `y->z`, `x->z` whose delays
/// add up, the DPI screens which edge could be indirect: `x->z` (chain) or
/// `y->z` (fork from `x`). Screened triads are classified from the data and
/// the edge is dropped when the verdict agrees. All triads are judged on the
/// input graph, so removals do not depend on visiting order.
pub fn prune(
    graph: &CausalHypergraph,
    series: &[SymbolSeries],
    ell: usize,
    m_plus_1: usize,
    cfg: &PruneConfig,
    triad: &TriadConfig,
    seed: u64,
) -> Result<(CausalHypergraph, Vec<TriadReport>, Vec<PruneLogEntry>)> {
    if series.len() != graph.nodes.len() {
        return Err(shape_err!("{} series for {} nodes", series.len(), graph.nodes.len()));
    }
    let n = graph.nodes.len();
    let mut motifs = Vec::new();
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                if x == y || y == z || x == z {
                    continue;
                }
                if let (Some(xy), Some(yz), Some(xz)) = (graph.edge(x, y), graph.edge(y, z), graph.edge(x, z)) {
                    if delay_consistency(xy, yz, xz, cfg.delay_tol) {
                        motifs.push((xy, yz, xz));
                    }
                }
            }
        }
    }
    let reports: Vec<TriadReport> = motifs
        .par_iter()
        .map(|(xy, yz, xz)| {
            let chain_candidate = dpi_check(xy.te, yz.te, xz.te, cfg.dpi_slack).is_satisfied();
            let fork_candidate = dpi_check(xy.te, xz.te, yz.te, cfg.dpi_slack).is_satisfied();
            let nodes = [xy.src, xy.dst, yz.dst];
            let mut r = TriadReport { nodes, chain_candidate, fork_candidate, verdict: None, error: None };
            if !(chain_candidate || fork_candidate) {
                return r;
            }
            let label = format!("triad/{}/{}/{}", nodes[0], nodes[1], nodes[2]);
            let verdict = TriadJoint::from_series(
                &series[nodes[0]],
                &series[nodes[1]],
                &series[nodes[2]],
                ell,
                m_plus_1,
                xy.delay,
                yz.delay,
            )
            .and_then(|j| analyze_triad(&j, triad, derive_seed(seed, &label)));
            match verdict {
                Ok(v) => r.verdict = Some(v),
                Err(e) => r.error = Some(e.to_string()),
            }
            r
        })
        .collect();

    let mut removed = BTreeSet::new();
    let mut log = Vec::new();
    for r in &reports {
        let Some(v) = &r.verdict else { continue };
        let [x, y, z] = r.nodes;
        let target = match v.structure {
            Structure::Chain if r.chain_candidate => Some((x, z)),
            Structure::Fork if r.fork_candidate => Some((y, z)),
            _ => None,
        };
        if let Some((s, d)) = target {
            if removed.insert((s, d)) {
                let e = graph.edge(s, d).expect("motif edge exists");
                log.push(PruneLogEntry {
                    src: s,
                    dst: d,
                    delay: e.delay,
                    triad: r.nodes,
                    structure: v.structure,
                    residual_chain: v.residual_chain,
                    residual_fork: v.residual_fork,
                    tol: v.tol,
                });
            }
        }
    }
    let mut out = graph.clone();
    out.edges.retain(|e| !removed.contains(&(e.src, e.dst)));
    Ok((out, reports, log))
}
