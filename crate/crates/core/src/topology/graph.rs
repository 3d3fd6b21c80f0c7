use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Smallest graph accepted from a dataset.
pub const MIN_GRAPH_NODES: usize = 3;
/// Largest graph accepted from a dataset.
pub const MAX_GRAPH_NODES: usize = 16;
/// Graphs outside `MIN_GRAPH_NODES..=TYPICAL_MAX_NODES` are accepted with a warning.
pub const TYPICAL_MAX_NODES: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Premise,
    Intermediate,
    Conclusion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Support,
    Contradict,
}

/// A sub-claim with its verifier correctness probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node<F> {
    pub id: String,
    pub text: String,
    pub kind: NodeKind,
    pub p_v: F,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge<F> {
    pub src: String,
    pub dst: String,
    pub relation: Relation,
    pub contradiction_signal: F,
}

/// Directed graph of sub-claims extracted from one response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningGraph<F> {
    pub nodes: Vec<Node<F>>,
    pub edges: Vec<Edge<F>>,
}

impl<F> Default for ReasoningGraph<F> {
    fn default() -> Self {
        Self {
            nodes: Vec::new(),
            edges: Vec::new(),
        }
    }
}

/// Case-folds, strips punctuation, and collapses whitespace.
///
/// Two claims whose normalized texts are equal are treated as paraphrases.
pub fn normalize_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text
        .split_whitespace()
        .map(|w| {
            w.chars()
                .filter(|c| !c.is_ascii_punctuation() && !is_unicode_punct(*c))
                .flat_map(char::to_lowercase)
                .collect::<String>()
        })
        .filter(|w| !w.is_empty())
    {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(&word);
    }
    out
}

fn is_unicode_punct(c: char) -> bool {
    matches!(
        c,
        '\u{2010}'..='\u{2027}' | '\u{2030}'..='\u{205E}' | '\u{00A1}' | '\u{00BF}' | '\u{00AB}' | '\u{00BB}'
    )
}

impl<F: Scalar> ReasoningGraph<F> {
    pub fn new(nodes: Vec<Node<F>>, edges: Vec<Edge<F>>) -> Self {
        Self { nodes, edges }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// `|V| + |E|`.
    pub fn size(&self) -> usize {
        self.nodes.len() + self.edges.len()
    }

    /// Map from node id to position in `nodes`. Later duplicates are ignored.
    pub fn index(&self) -> HashMap<&str, usize> {
        let mut idx = HashMap::with_capacity(self.nodes.len());
        for (i, n) in self.nodes.iter().enumerate() {
            idx.entry(n.id.as_str()).or_insert(i);
        }
        idx
    }

    /// Edges as `(src, dst)` node positions. Fails on dangling references.
    pub fn edge_endpoints(&self) -> Result<Vec<(usize, usize)>> {
        let idx = self.index();
        self.edges
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let s = idx.get(e.src.as_str()).copied().ok_or_else(|| {
                    Error::validation(format!("edges[{i}].src"), format!("unknown node id {:?}", e.src))
                })?;
                let d = idx.get(e.dst.as_str()).copied().ok_or_else(|| {
                    Error::validation(format!("edges[{i}].dst"), format!("unknown node id {:?}", e.dst))
                })?;
                Ok((s, d))
            })
            .collect()
    }

    /// Checks id uniqueness, probability ranges, and edge references.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashMap::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if let Some(prev) = seen.insert(n.id.as_str(), i) {
                return Err(Error::validation(
                    format!("nodes[{i}].id"),
                    format!("duplicate id {:?} (first at nodes[{prev}])", n.id),
                ));
            }
            if !(n.p_v >= F::zero() && n.p_v <= F::one()) {
                return Err(Error::validation(
                    format!("nodes[{i}].p_v"),
                    format!("{} outside [0, 1]", n.p_v),
                ));
            }
        }
        for (i, e) in self.edges.iter().enumerate() {
            if !(e.contradiction_signal >= F::zero() && e.contradiction_signal <= F::one()) {
                return Err(Error::validation(
                    format!("edges[{i}].contradiction_signal"),
                    format!("{} outside [0, 1]", e.contradiction_signal),
                ));
            }
        }
        self.edge_endpoints().map(|_| ())
    }

    /// Dataset-level size contract: `MIN_GRAPH_NODES..=MAX_GRAPH_NODES` nodes.
    pub fn validate_size(&self) -> Result<()> {
        let n = self.nodes.len();
        if !(MIN_GRAPH_NODES..=MAX_GRAPH_NODES).contains(&n) {
            return Err(Error::validation(
                "nodes",
                format!("{n} nodes outside accepted range {MIN_GRAPH_NODES}..={MAX_GRAPH_NODES}"),
            ));
        }
        if n > TYPICAL_MAX_NODES {
            log::warn!("graph with {n} nodes is larger than the typical {MIN_GRAPH_NODES}-{TYPICAL_MAX_NODES}");
        }
        Ok(())
    }

    pub fn nodes_of_kind(&self, kind: NodeKind) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(move |(_, n)| n.kind == kind)
            .map(|(i, _)| i)
    }
}
