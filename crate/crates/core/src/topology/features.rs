//! Structural features of a reasoning graph and the linear topology score.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::cycles::{cycle_count, topological_order};
use super::graph::{normalize_text, NodeKind, ReasoningGraph, Relation};
use super::sanitize::sanitize_graph;

/// Nonnegative coefficients of the topology score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopologyWeights<F> {
    pub alpha1: F,
    pub alpha2: F,
    pub alpha3: F,
    pub alpha4: F,
}

impl<F: Scalar> TopologyWeights<F> {
    pub fn new(alpha1: F, alpha2: F, alpha3: F, alpha4: F) -> Result<Self> {
        let w = Self {
            alpha1,
            alpha2,
            alpha3,
            alpha4,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, a) in [
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("alpha3", self.alpha3),
            ("alpha4", self.alpha4),
        ] {
            if !(a >= F::zero()) || !a.is_finite() {
                return Err(Error::Config(format!("topology weight {name} = {a} must be finite and >= 0")));
            }
        }
        Ok(())
    }

    pub fn scaled(&self, k: F) -> Self {
        Self {
            alpha1: self.alpha1 * k,
            alpha2: self.alpha2 * k,
            alpha3: self.alpha3 * k,
            alpha4: self.alpha4 * k,
        }
    }
}

impl<F: Scalar> Default for TopologyWeights<F> {
    fn default() -> Self {
        Self {
            alpha1: F::one(),
            alpha2: F::lit(0.5),
            alpha3: F::lit(0.5),
            alpha4: F::one(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopologyFeatures<F> {
    /// Fraction of sanitized nodes and edges on a premise-to-conclusion path.
    pub q_path: F,
    /// Simple cycles in the raw (pre-sanitization) graph.
    pub c_cycle: usize,
    pub d_dangling: usize,
    pub q_contradict: F,
    /// `|V| + |E|` after sanitization.
    pub graph_size: usize,
}

/// Probability of each canonical `(src text, dst text)` edge key.
pub type PathDistribution<F> = BTreeMap<(String, String), F>;

/// Non-premise nodes without an incoming support edge.
pub fn dangling_count<F: Scalar>(g: &ReasoningGraph<F>) -> Result<usize> {
    let endpoints = g.edge_endpoints()?;
    let mut supported = vec![false; g.node_count()];
    for (e, &(_, d)) in g.edges.iter().zip(&endpoints) {
        if e.relation == Relation::Support {
            supported[d] = true;
        }
    }
    Ok(g
        .nodes
        .iter()
        .zip(&supported)
        .filter(|(n, &s)| n.kind != NodeKind::Premise && !s)
        .count())
}

/// Mean contradiction signal over all edges, 0 for an edgeless graph.
pub fn contradiction_score<F: Scalar>(g: &ReasoningGraph<F>) -> F {
    if g.edges.is_empty() {
        return F::zero();
    }
    g.edges.iter().map(|e| e.contradiction_signal).sum::<F>() / F::from_usize_lossy(g.edges.len())
}

struct SupportReach {
    from_premise: Vec<bool>,
    to_conclusion: Vec<bool>,
    support: Vec<(usize, usize, usize)>,
}

fn support_reach<F: Scalar>(g: &ReasoningGraph<F>, endpoints: &[(usize, usize)]) -> SupportReach {
    let n = g.node_count();
    let support: Vec<(usize, usize, usize)> = g
        .edges
        .iter()
        .zip(endpoints)
        .enumerate()
        .filter(|(_, (e, _))| e.relation == Relation::Support)
        .map(|(i, (_, &(s, d)))| (i, s, d))
        .collect();
    let mut from_premise = vec![false; n];
    let mut stack: Vec<usize> = g.nodes_of_kind(NodeKind::Premise).collect();
    for &p in &stack {
        from_premise[p] = true;
    }
    while let Some(v) = stack.pop() {
        for &(_, s, d) in &support {
            if s == v && !from_premise[d] {
                from_premise[d] = true;
                stack.push(d);
            }
        }
    }
    let mut to_conclusion = vec![false; n];
    let mut stack: Vec<usize> = g.nodes_of_kind(NodeKind::Conclusion).collect();
    for &c in &stack {
        to_conclusion[c] = true;
    }
    while let Some(v) = stack.pop() {
        for &(_, s, d) in &support {
            if d == v && !to_conclusion[s] {
                to_conclusion[s] = true;
                stack.push(s);
            }
        }
    }
    SupportReach {
        from_premise,
        to_conclusion,
        support,
    }
}

/// Fraction of nodes and edges lying on some premise-to-conclusion support path.
///
/// Requires an acyclic graph with at least one premise and exactly one conclusion.
pub fn path_coverage<F: Scalar>(g: &ReasoningGraph<F>) -> Result<F> {
    let premises = g.nodes_of_kind(NodeKind::Premise).count();
    let conclusions = g.nodes_of_kind(NodeKind::Conclusion).count();
    if premises == 0 {
        return Err(Error::DegenerateGraph("no premise node".into()));
    }
    if conclusions != 1 {
        return Err(Error::DegenerateGraph(format!(
            "expected exactly one conclusion node, found {conclusions}"
        )));
    }
    let endpoints = g.edge_endpoints()?;
    if topological_order(g.node_count(), &endpoints).is_none() {
        return Err(Error::DegenerateGraph("path coverage needs an acyclic graph".into()));
    }
    let reach = support_reach(g, &endpoints);
    let nodes = (0..g.node_count())
        .filter(|&v| reach.from_premise[v] && reach.to_conclusion[v])
        .count();
    let edges = reach
        .support
        .iter()
        .filter(|&&(_, s, d)| reach.from_premise[s] && reach.to_conclusion[d])
        .count();
    Ok(F::from_usize_lossy(nodes + edges) / F::from_usize_lossy(g.size()))
}

/// `α₁·q_path − α₂·c_cycle − α₃·d_dangling − α₄·q_contradict`
pub fn topology_score<F: Scalar>(f: &TopologyFeatures<F>, w: &TopologyWeights<F>) -> Result<F> {
    w.validate()?;
    Ok(w.alpha1 * f.q_path
        - w.alpha2 * F::from_usize_lossy(f.c_cycle)
        - w.alpha3 * F::from_usize_lossy(f.d_dangling)
        - w.alpha4 * f.q_contradict)
}

/// Edge distribution proportional to the number of premise-to-conclusion
/// support paths through each edge. Empty when no such path exists.
pub fn path_distribution<F: Scalar>(g: &ReasoningGraph<F>) -> Result<PathDistribution<F>> {
    let endpoints = g.edge_endpoints()?;
    let n = g.node_count();
    let support: Vec<(usize, usize, usize)> = g
        .edges
        .iter()
        .zip(&endpoints)
        .enumerate()
        .filter(|(_, (e, _))| e.relation == Relation::Support)
        .map(|(i, (_, &(s, d)))| (i, s, d))
        .collect();
    let pairs: Vec<(usize, usize)> = support.iter().map(|&(_, s, d)| (s, d)).collect();
    let order = topological_order(n, &pairs)
        .ok_or_else(|| Error::DegenerateGraph("path distribution needs an acyclic support graph".into()))?;

    // paths from any premise into v, and from v into any conclusion
    let mut into = vec![F::zero(); n];
    for v in g.nodes_of_kind(NodeKind::Premise) {
        into[v] = F::one();
    }
    for &v in &order {
        for &(_, s, d) in &support {
            if s == v {
                let add = into[v];
                into[d] += add;
            }
        }
    }
    let mut out = vec![F::zero(); n];
    for v in g.nodes_of_kind(NodeKind::Conclusion) {
        out[v] = F::one();
    }
    for &v in order.iter().rev() {
        for &(_, s, d) in &support {
            if s == v {
                let add = out[d];
                out[v] += add;
            }
        }
    }

    let mut dist = PathDistribution::new();
    let mut total = F::zero();
    for &(_, s, d) in &support {
        let through = into[s] * out[d];
        if through > F::zero() {
            let key = (normalize_text(&g.nodes[s].text), normalize_text(&g.nodes[d].text));
            *dist.entry(key).or_insert(F::zero()) += through;
            total += through;
        }
    }
    if total > F::zero() {
        for p in dist.values_mut() {
            *p = *p / total;
        }
    }
    Ok(dist)
}

/// Population z-scores; a zero-variance input maps to all zeros.
pub fn normalize_scores<F: Scalar>(scores: &[F]) -> Vec<F> {
    const STD_GUARD: f64 = 1e-12;
    let m = crate::scalar::mean(scores);
    let sd = crate::scalar::population_variance(scores).sqrt();
    if sd <= F::lit(STD_GUARD) {
        return vec![F::zero(); scores.len()];
    }
    scores.iter().map(|&s| (s - m) / sd).collect()
}

/// Sanitizes `raw` and computes its structural features.
///
/// Cycles are counted on `raw`; everything else on the sanitized graph.
pub fn extract_features<F: Scalar>(raw: &ReasoningGraph<F>) -> Result<(TopologyFeatures<F>, ReasoningGraph<F>)> {
    let c_cycle = cycle_count(raw)?;
    let clean = sanitize_graph(raw)?;
    let features = TopologyFeatures {
        q_path: path_coverage(&clean)?,
        c_cycle,
        d_dangling: dangling_count(&clean)?,
        q_contradict: contradiction_score(&clean),
        graph_size: clean.size(),
    };
    Ok((features, clean))
}

/// Topology score of a raw graph.
pub fn score_graph<F: Scalar>(raw: &ReasoningGraph<F>, w: &TopologyWeights<F>) -> Result<F> {
    let (f, _) = extract_features(raw)?;
    topology_score(&f, w)
}
