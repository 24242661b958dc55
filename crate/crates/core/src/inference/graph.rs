use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::alphabet::{SymbolSeries, WordTable};
use crate::error::{shape_err, Error, Result};
use crate::estimation::{interaction_from_counts, InteractionCounts};
use crate::tensor::{CausalTensor, InteractionTensor};

/// A scored, delayed, directed relation between two variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeCandidate {
    pub src: usize,
    pub dst: usize,
    pub delay: i64,
    pub gamma_tilde: f64,
    pub te: f64,
    pub significant: bool,
    pub p_value: f64,
    /// Causal tensor estimated at `delay`.
    #[serde(skip)]
    pub tensor: Option<CausalTensor>,
}

/// A child with two or more parents and the tensor describing their joint effect.
///
/// The interaction tensor's `i` axis is the first parent's word; the `j`
/// axis packs the words of the remaining parents (first of them least
/// significant).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperedge {
    pub parents: Vec<usize>,
    pub child: usize,
    /// Delay of each parent, aligned with `parents`.
    pub delays: Vec<i64>,
    #[serde(skip)]
    pub tensor: Option<InteractionTensor>,
    /// Why no tensor could be estimated, if so.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CausalHypergraph {
    pub nodes: Vec<String>,
    pub edges: Vec<EdgeCandidate>,
    pub hyperedges: Vec<Hyperedge>,
}

#[derive(Serialize)]
struct JsonEdge<'a> {
    src: &'a str,
    dst: &'a str,
    delay: i64,
    gamma_tilde: f64,
    te: f64,
    p_value: f64,
}

#[derive(Serialize)]
struct JsonHyperedge<'a> {
    parents: Vec<&'a str>,
    child: &'a str,
    delay_map: BTreeMap<&'a str, i64>,
}

#[derive(Serialize)]
struct JsonGraph<'a> {
    nodes: &'a [String],
    edges: Vec<JsonEdge<'a>>,
    hyperedges: Vec<JsonHyperedge<'a>>,
}

impl CausalHypergraph {
    pub fn new(nodes: Vec<String>) -> Self {
        Self { nodes, edges: Vec::new(), hyperedges: Vec::new() }
    }

    pub fn add_edge(&mut self, e: EdgeCandidate) -> Result<()> {
        if e.src == e.dst {
            return Err(Error::InvalidInput(format!("self-loop on node {}", e.src)));
        }
        if e.src >= self.nodes.len() || e.dst >= self.nodes.len() {
            return Err(shape_err!("edge {}->{} references a missing node", e.src, e.dst));
        }
        self.edges.push(e);
        Ok(())
    }

    pub fn edge(&self, src: usize, dst: usize) -> Option<&EdgeCandidate> {
        self.edges.iter().find(|e| e.src == src && e.dst == dst)
    }

    /// Incoming edges of `child`, ordered by source index.
    pub fn parents(&self, child: usize) -> Vec<&EdgeCandidate> {
        let mut v: Vec<_> = self.edges.iter().filter(|e| e.dst == child).collect();
        v.sort_by_key(|e| e.src);
        v
    }

    /// Graph document with named endpoints and per-parent delay maps.
    pub fn to_json_value(&self) -> serde_json::Value {
        let name = |i: usize| self.nodes[i].as_str();
        let doc = JsonGraph {
            nodes: &self.nodes,
            edges: self
                .edges
                .iter()
                .map(|e| JsonEdge {
                    src: name(e.src),
                    dst: name(e.dst),
                    delay: e.delay,
                    gamma_tilde: e.gamma_tilde,
                    te: e.te,
                    p_value: e.p_value,
                })
                .collect(),
            hyperedges: self
                .hyperedges
                .iter()
                .map(|h| JsonHyperedge {
                    parents: h.parents.iter().map(|&p| name(p)).collect(),
                    child: name(h.child),
                    delay_map: h.parents.iter().zip(&h.delays).map(|(&p, &d)| (name(p), d)).collect(),
                })
                .collect(),
        };
        serde_json::to_value(doc).expect("graph serializes")
    }

    /// Graphviz rendering with edges labelled by their delays.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph causal {\n");
        for n in &self.nodes {
            let _ = writeln!(s, "  {};", dot_id(n));
        }
        for e in &self.edges {
            let _ = writeln!(
                s,
                "  {} -> {} [label=\"τ={}\"];",
                dot_id(&self.nodes[e.src]),
                dot_id(&self.nodes[e.dst]),
                e.delay
            );
        }
        s.push_str("}\n");
        s
    }
}

fn dot_id(name: &str) -> String {
    format!("\"{}\"", name.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Counts `(h, i, j, k)` for `child` given its parents at their delays.
pub fn count_multi_parent(
    parents: &[(&SymbolSeries, i64)],
    child: &SymbolSeries,
    ell: usize,
    m_plus_1: usize,
) -> Result<InteractionCounts> {
    if parents.len() < 2 {
        return Err(Error::InvalidInput("an interaction needs at least two parents".into()));
    }
    let n = child.len();
    if parents.iter().any(|(p, _)| p.len() != n) {
        return Err(shape_err!("series lengths differ"));
    }
    let tables = parents
        .iter()
        .map(|(p, _)| WordTable::new(p, m_plus_1, 0))
        .collect::<Result<Vec<_>>>()?;
    let hw = WordTable::new(child, ell, 1)?;
    let m = m_plus_1 as i64 - 1;
    let ni = n as i64;
    let lo = parents.iter().fold(ell as i64, |acc, (_, tau)| acc.max(tau + m)).max(0);
    let hi = parents.iter().fold(ni - 1, |acc, (_, tau)| acc.min(ni - 1 + tau));
    if lo > hi {
        return Err(Error::InsufficientData(format!("series of length {n} too short for parent delays")));
    }
    let n_j = tables[1..].iter().try_fold(1usize, |acc, t| acc.checked_mul(t.states()));
    let n_j = n_j
        .filter(|&s| s <= crate::alphabet::MAX_WORD_STATES)
        .ok_or_else(|| Error::InvalidInput("joint parent alphabet is too large".into()))?;
    let mut counts =
        ndarray::Array4::<u64>::zeros((hw.states(), tables[0].states(), n_j, child.cardinality() as usize));
    let zs = child.symbols();
    for t in lo..=hi {
        let i = tables[0].get((t - parents[0].1) as usize);
        let mut j = 0usize;
        let mut radix = 1usize;
        for (tab, (_, tau)) in tables[1..].iter().zip(&parents[1..]) {
            j += radix * tab.get((t - tau) as usize);
            radix *= tab.states();
        }
        counts[[hw.get(t as usize), i, j, zs[t as usize] as usize]] += 1;
    }
    Ok(InteractionCounts::from_counts(counts, parents[0].1, parents[1].1))
}

/// Attaches an interaction tensor to every node with two or more parents.
/// Estimation failures are recorded on the hyperedge, not returned.
pub fn build_hypergraph(
    mut graph: CausalHypergraph,
    series: &[SymbolSeries],
    ell: usize,
    m_plus_1: usize,
    smoothing: f64,
) -> Result<CausalHypergraph> {
    if series.len() != graph.nodes.len() {
        return Err(shape_err!("{} series for {} nodes", series.len(), graph.nodes.len()));
    }
    let mut hyper = Vec::new();
    for child in 0..graph.nodes.len() {
        let parents = graph.parents(child);
        if parents.len() < 2 {
            continue;
        }
        let ids: Vec<usize> = parents.iter().map(|e| e.src).collect();
        let delays: Vec<i64> = parents.iter().map(|e| e.delay).collect();
        let inputs: Vec<(&SymbolSeries, i64)> = ids.iter().zip(&delays).map(|(&p, &d)| (&series[p], d)).collect();
        let est = count_multi_parent(&inputs, &series[child], ell, m_plus_1)
            .and_then(|c| interaction_from_counts(&c, smoothing));
        let (tensor, error) = match est {
            Ok((d, _)) => (Some(d), None),
            Err(e) => (None, Some(e.to_string())),
        };
        hyper.push(Hyperedge { parents: ids, child, delays, tensor, error });
    }
    graph.hyperedges = hyper;
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edge(src: usize, dst: usize, delay: i64) -> EdgeCandidate {
        EdgeCandidate { src, dst, delay, gamma_tilde: 0.5, te: 0.4, significant: true, p_value: 0.0, tensor: None }
    }

    #[test]
    fn self_loops_rejected() {
        let mut g = CausalHypergraph::new(vec!["a".into(), "b".into()]);
        assert!(g.add_edge(edge(0, 0, 1)).is_err());
        assert!(g.add_edge(edge(0, 1, 1)).is_ok());
    }

    #[test]
    fn dot_has_delay_labels() {
        let mut g = CausalHypergraph::new(vec!["x".into(), "y".into()]);
        g.add_edge(edge(0, 1, 2)).unwrap();
        let dot = g.to_dot();
        assert!(dot.contains("\"x\" -> \"y\" [label=\"τ=2\"];"), "{dot}");
    }

    #[test]
    fn xor_collider_hyperedge() {
        let n = 4000;
        let mut rng = crate::rng::task_rng(1, "xor");
        use rand::Rng;
        let x: Vec<u32> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let y: Vec<u32> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let z: Vec<u32> = (0..n).map(|t| if t == 0 { 0 } else { x[t - 1] ^ y[t - 1] }).collect();
        let s: Vec<SymbolSeries> = [x, y, z].into_iter().map(|v| SymbolSeries::new(v, 2, 1.0).unwrap()).collect();
        let mut g = CausalHypergraph::new(vec!["x".into(), "y".into(), "z".into()]);
        g.add_edge(edge(0, 2, 1)).unwrap();
        g.add_edge(edge(1, 2, 1)).unwrap();
        let g = build_hypergraph(g, &s, 1, 1, 0.0).unwrap();
        assert_eq!(g.hyperedges.len(), 1);
        let d = g.hyperedges[0].tensor.as_ref().unwrap();
        for h in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    assert_eq!(d.entries()[[h, i, j, i ^ j]], 1.0);
                }
            }
        }
        let v = g.to_json_value();
        assert_eq!(v["hyperedges"][0]["delay_map"]["x"], 1);
    }

    #[test]
    fn no_collider_no_hyperedge() {
        let s: Vec<SymbolSeries> =
            (0..3).map(|_| SymbolSeries::new((0..50).map(|t| (t % 2) as u32).collect(), 2, 1.0).unwrap()).collect();
        let mut g = CausalHypergraph::new(vec!["a".into(), "b".into(), "c".into()]);
        g.add_edge(edge(0, 1, 1)).unwrap();
        g.add_edge(edge(1, 2, 1)).unwrap();
        assert!(build_hypergraph(g, &s, 1, 1, 0.0).unwrap().hyperedges.is_empty());
    }
}
