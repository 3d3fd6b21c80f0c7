//! Graph sanitization: paraphrase merging, self-loop and duplicate removal,
//! and minimum cycle-breaking edge cuts.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::cycles::{is_acyclic_edges, simple_cycles, CYCLE_COUNT_CAP};
use super::graph::{normalize_text, Edge, Node, ReasoningGraph};

/// Largest edge count for which the cut is found by exhaustive subset search.
pub const EXHAUSTIVE_EDGE_LIMIT: usize = 12;
/// Largest node count for which the ordering dynamic program is used.
pub const ORDERING_NODE_LIMIT: usize = 20;

/// What [`sanitize_graph_with_report`] changed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SanitizeReport {
    pub merged_nodes: usize,
    pub self_loops_removed: usize,
    pub duplicates_removed: usize,
    /// Edges removed to break cycles, in the (merged, deduplicated) edge list.
    pub cut_edges: Vec<(String, String)>,
}

pub fn sanitize_graph<F: Scalar>(g: &ReasoningGraph<F>) -> Result<ReasoningGraph<F>> {
    sanitize_graph_with_report(g).map(|(g, _)| g)
}

pub fn sanitize_graph_with_report<F: Scalar>(
    g: &ReasoningGraph<F>,
) -> Result<(ReasoningGraph<F>, SanitizeReport)> {
    if g.nodes.is_empty() {
        return Err(Error::RejectedInput("graph has no nodes".into()));
    }
    let endpoints = g.edge_endpoints()?;
    let mut report = SanitizeReport::default();

    // paraphrase groups in first-occurrence order
    let mut group_of_key: HashMap<String, usize> = HashMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut group_of_node = Vec::with_capacity(g.nodes.len());
    for (i, n) in g.nodes.iter().enumerate() {
        let key = normalize_text(&n.text);
        let gi = *group_of_key.entry(key).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[gi].push(i);
        group_of_node.push(gi);
    }
    report.merged_nodes = g.nodes.len() - groups.len();

    let nodes: Vec<Node<F>> = groups
        .iter()
        .map(|members| {
            let first = &g.nodes[members[0]];
            let p_v = members.iter().map(|&m| g.nodes[m].p_v).sum::<F>()
                / F::from_usize_lossy(members.len());
            let kind = members.iter().map(|&m| g.nodes[m].kind).max().unwrap_or(first.kind);
            Node {
                id: first.id.clone(),
                text: first.text.clone(),
                kind,
                p_v,
            }
        })
        .collect();

    // re-point, drop self-loops, merge duplicates keeping the largest signal
    let mut edges: Vec<(usize, usize, Edge<F>)> = Vec::new();
    for (e, &(s, d)) in g.edges.iter().zip(&endpoints) {
        let (s, d) = (group_of_node[s], group_of_node[d]);
        if s == d {
            report.self_loops_removed += 1;
            continue;
        }
        if let Some(existing) = edges
            .iter_mut()
            .find(|(es, ed, ee)| *es == s && *ed == d && ee.relation == e.relation)
        {
            report.duplicates_removed += 1;
            existing.2.contradiction_signal = existing.2.contradiction_signal.max(e.contradiction_signal);
            continue;
        }
        edges.push((
            s,
            d,
            Edge {
                src: nodes[s].id.clone(),
                dst: nodes[d].id.clone(),
                relation: e.relation,
                contradiction_signal: e.contradiction_signal,
            },
        ));
    }

    let pairs: Vec<(usize, usize)> = edges.iter().map(|(s, d, _)| (*s, *d)).collect();
    let cut = minimum_cycle_cut(nodes.len(), &pairs);
    let mut kept = Vec::with_capacity(edges.len() - cut.len());
    for (i, (_, _, e)) in edges.into_iter().enumerate() {
        if cut.contains(&i) {
            report.cut_edges.push((e.src, e.dst));
        } else {
            kept.push(e);
        }
    }

    Ok((ReasoningGraph::new(nodes, kept), report))
}

/// Indices of a cycle-breaking edge set of minimum cardinality.
///
/// Exhaustive subset search up to [`EXHAUSTIVE_EDGE_LIMIT`] edges, an exact
/// vertex-ordering dynamic program up to [`ORDERING_NODE_LIMIT`] nodes, and a
/// greedy most-cycles-first heuristic beyond that.
pub(crate) fn minimum_cycle_cut(n: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    if is_acyclic_edges(n, edges) {
        return Vec::new();
    }
    if edges.len() <= EXHAUSTIVE_EDGE_LIMIT {
        exhaustive_cut(n, edges)
    } else if n <= ORDERING_NODE_LIMIT {
        ordering_cut(n, edges)
    } else {
        greedy_cut(n, edges)
    }
}

/// First subset (by size, then lexicographic index order) whose removal leaves a DAG.
fn exhaustive_cut(n: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let m = edges.len();
    for k in 0..=m {
        let mut combo: Vec<usize> = (0..k).collect();
        loop {
            let remaining: Vec<(usize, usize)> = edges
                .iter()
                .enumerate()
                .filter(|(i, _)| !combo.contains(i))
                .map(|(_, &e)| e)
                .collect();
            if is_acyclic_edges(n, &remaining) {
                return combo;
            }
            // next combination
            let mut i = k;
            while i > 0 && combo[i - 1] == m - k + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            combo[i - 1] += 1;
            for j in i..k {
                combo[j] = combo[j - 1] + 1;
            }
        }
    }
    (0..m).collect()
}

/// Minimum feedback arc set via a DP over vertex subsets: the cheapest linear
/// order, where the cost is the number of edges pointing backwards.
fn ordering_cut(n: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let mut mult = vec![vec![0u32; n]; n];
    for &(s, d) in edges {
        mult[s][d] += 1;
    }
    let full = (1usize << n) - 1;
    let mut cost = vec![u32::MAX; full + 1];
    let mut choice = vec![u8::MAX; full + 1];
    cost[0] = 0;
    for mask in 0..full {
        let base = cost[mask];
        if base == u32::MAX {
            continue;
        }
        for v in 0..n {
            if mask & (1 << v) != 0 {
                continue;
            }
            // v goes after everything in mask: its edges into mask point backwards
            let back: u32 = (0..n).filter(|&u| mask & (1 << u) != 0).map(|u| mult[v][u]).sum();
            let next = mask | (1 << v);
            if base + back < cost[next] {
                cost[next] = base + back;
                choice[next] = v as u8;
            }
        }
    }
    let mut position = vec![0usize; n];
    let mut mask = full;
    for slot in (0..n).rev() {
        let v = choice[mask] as usize;
        position[v] = slot;
        mask &= !(1 << v);
    }
    edges
        .iter()
        .enumerate()
        .filter(|(_, &(s, d))| position[s] > position[d])
        .map(|(i, _)| i)
        .collect()
}

/// Repeatedly removes the edge lying on the most enumerated simple cycles.
fn greedy_cut(n: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let mut removed: Vec<usize> = Vec::new();
    loop {
        let live: Vec<usize> = (0..edges.len()).filter(|i| !removed.contains(i)).collect();
        let live_edges: Vec<(usize, usize)> = live.iter().map(|&i| edges[i]).collect();
        let cycles = simple_cycles(n, &live_edges, CYCLE_COUNT_CAP);
        if cycles.is_empty() {
            break;
        }
        let mut hits: HashMap<(usize, usize), usize> = HashMap::new();
        for c in &cycles {
            for (k, &a) in c.iter().enumerate() {
                let b = c[(k + 1) % c.len()];
                *hits.entry((a, b)).or_default() += 1;
            }
        }
        let (best, _) = live
            .iter()
            .map(|&i| (i, hits.get(&edges[i]).copied().unwrap_or(0)))
            .fold((usize::MAX, 0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        removed.push(best);
    }
    removed.sort_unstable();
    removed
}
