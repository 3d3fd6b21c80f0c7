//! Cycle detection and simple-cycle enumeration on small digraphs.

use crate::error::Result;
use crate::scalar::Scalar;

use super::graph::ReasoningGraph;

/// Enumeration stops once this many simple cycles have been found.
pub const CYCLE_COUNT_CAP: usize = 1000;

/// Kahn topological order over `n` nodes, or `None` if a cycle exists.
pub(crate) fn topological_order(n: usize, edges: &[(usize, usize)]) -> Option<Vec<usize>> {
    let mut indeg = vec![0usize; n];
    let mut adj = vec![Vec::new(); n];
    for &(s, d) in edges {
        adj[s].push(d);
        indeg[d] += 1;
    }
    let mut ready: Vec<usize> = (0..n).rev().filter(|&v| indeg[v] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(v) = ready.pop() {
        order.push(v);
        for &w in &adj[v] {
            indeg[w] -= 1;
            if indeg[w] == 0 {
                ready.push(w);
            }
        }
    }
    (order.len() == n).then_some(order)
}

pub(crate) fn is_acyclic_edges(n: usize, edges: &[(usize, usize)]) -> bool {
    topological_order(n, edges).is_some()
}

/// Deduplicated successor lists, self-loops kept.
fn successors(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(s, d) in edges {
        if !adj[s].contains(&d) {
            adj[s].push(d);
        }
    }
    for a in &mut adj {
        a.sort_unstable();
    }
    adj
}

/// Johnson's circuit enumeration. Each cycle is reported as its node sequence
/// starting at its smallest node. At most `cap` cycles are returned.
pub(crate) fn simple_cycles(n: usize, edges: &[(usize, usize)], cap: usize) -> Vec<Vec<usize>> {
    let adj = successors(n, edges);
    let mut out = Vec::new();
    for s in 0..n {
        if out.len() >= cap {
            break;
        }
        let comp = component_of(s, &adj);
        if !comp[s] {
            continue;
        }
        let mut state = Johnson {
            adj: &adj,
            comp: &comp,
            start: s,
            blocked: vec![false; n],
            block_map: vec![Vec::new(); n],
            stack: Vec::new(),
            out: &mut out,
            cap,
        };
        state.circuit(s);
    }
    out
}

/// Nodes `>= s` that are both reachable from `s` and reach `s` inside the
/// subgraph induced on `{s, s+1, ..}`. `comp[s]` is false when `s` lies on no cycle.
fn component_of(s: usize, adj: &[Vec<usize>]) -> Vec<bool> {
    let n = adj.len();
    let mut fwd = vec![false; n];
    let mut stack = vec![s];
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if w >= s && !fwd[w] {
                fwd[w] = true;
                stack.push(w);
            }
        }
    }
    // fwd[s] is true iff s reaches itself, i.e. lies on a cycle
    let mut bwd = vec![false; n];
    let mut radj = vec![Vec::new(); n];
    for (v, ws) in adj.iter().enumerate() {
        for &w in ws {
            radj[w].push(v);
        }
    }
    let mut stack = vec![s];
    while let Some(v) = stack.pop() {
        for &w in &radj[v] {
            if w >= s && !bwd[w] {
                bwd[w] = true;
                stack.push(w);
            }
        }
    }
    (0..n).map(|v| fwd[v] && bwd[v]).collect()
}

struct Johnson<'a> {
    adj: &'a [Vec<usize>],
    comp: &'a [bool],
    start: usize,
    blocked: Vec<bool>,
    block_map: Vec<Vec<usize>>,
    stack: Vec<usize>,
    out: &'a mut Vec<Vec<usize>>,
    cap: usize,
}

impl Johnson<'_> {
    fn circuit(&mut self, v: usize) -> bool {
        let mut found = false;
        self.stack.push(v);
        self.blocked[v] = true;
        for &w in &self.adj[v] {
            if self.out.len() >= self.cap {
                break;
            }
            if !self.comp[w] {
                continue;
            }
            if w == self.start {
                self.out.push(self.stack.clone());
                found = true;
            } else if !self.blocked[w] && self.circuit(w) {
                found = true;
            }
        }
        if found {
            self.unblock(v);
        } else {
            for &w in &self.adj[v] {
                if self.comp[w] && !self.block_map[w].contains(&v) {
                    self.block_map[w].push(v);
                }
            }
        }
        self.stack.pop();
        found
    }

    fn unblock(&mut self, u: usize) {
        self.blocked[u] = false;
        let waiting = std::mem::take(&mut self.block_map[u]);
        for w in waiting {
            if self.blocked[w] {
                self.unblock(w);
            }
        }
    }
}

/// Number of distinct simple directed cycles, capped at [`CYCLE_COUNT_CAP`].
///
/// Counts over every edge regardless of relation. Parallel edges do not
/// produce distinct cycles; a self-loop counts as a cycle of length one.
pub fn cycle_count<F: Scalar>(g: &ReasoningGraph<F>) -> Result<usize> {
    let edges = g.edge_endpoints()?;
    Ok(simple_cycles(g.node_count(), &edges, CYCLE_COUNT_CAP).len())
}

pub fn is_acyclic<F: Scalar>(g: &ReasoningGraph<F>) -> Result<bool> {
    let edges = g.edge_endpoints()?;
    Ok(is_acyclic_edges(g.node_count(), &edges))
}
