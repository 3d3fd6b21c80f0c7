//! Reasoning topologies: representation, sanitization, and structural scoring.

mod cycles;
mod features;
mod graph;
mod sanitize;

pub use cycles::{cycle_count, is_acyclic, CYCLE_COUNT_CAP};
pub use features::{
    contradiction_score, dangling_count, extract_features, normalize_scores, path_coverage,
    path_distribution, score_graph, topology_score, PathDistribution, TopologyFeatures, TopologyWeights,
};
pub use graph::{
    normalize_text, Edge, Node, NodeKind, ReasoningGraph, Relation, MAX_GRAPH_NODES, MIN_GRAPH_NODES,
    TYPICAL_MAX_NODES,
};
pub use sanitize::{
    sanitize_graph, sanitize_graph_with_report, SanitizeReport, EXHAUSTIVE_EDGE_LIMIT, ORDERING_NODE_LIMIT,
};

#[cfg(test)]
#[allow(unused_imports)]
pub(crate) use graph::builders;
