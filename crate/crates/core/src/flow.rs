//! The source/sink network of a marginal and its exact maximum flow.
//!
//! Node 0 is the source, nodes `1..=k` are the graph vertices in document
//! order and node `k + 1` is the sink. Capacities are undirected:
//! `C(v, w)` is the number of edges between distinct vertices, loops carry
//! nothing, `C(source, v) = t(v)` and `C(v, sink) = s(v)`.

use std::collections::VecDeque;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Marginal;

/// Residual graph over directed arcs; an undirected capacity is a pair of
/// opposite arcs that are each other's reverse.
#[derive(Debug, Clone)]
pub(crate) struct Residual {
    head: Vec<Vec<usize>>,
    to: Vec<usize>,
    res: Vec<i64>,
    cap: Vec<i64>,
}

impl Residual {
    pub(crate) fn new(nodes: usize) -> Self {
        Residual { head: vec![Vec::new(); nodes], to: Vec::new(), res: Vec::new(), cap: Vec::new() }
    }

    fn push_arc(&mut self, a: usize, b: usize, cap: i64) -> usize {
        let id = self.to.len();
        self.head[a].push(id);
        self.to.push(b);
        self.res.push(cap);
        self.cap.push(cap);
        id
    }

    /// Directed arc `a -> b`; its reverse starts empty.
    pub(crate) fn add_arc(&mut self, a: usize, b: usize, cap: i64) -> usize {
        let id = self.push_arc(a, b, cap);
        self.push_arc(b, a, 0);
        id
    }

    /// Undirected edge usable up to `cap` in either direction.
    pub(crate) fn add_edge(&mut self, a: usize, b: usize, cap: i64) -> usize {
        let id = self.push_arc(a, b, cap);
        self.push_arc(b, a, cap);
        id
    }

    /// Shortest augmenting paths (Edmonds–Karp). Arcs are scanned in insertion
    /// order, so results are deterministic.
    pub(crate) fn max_flow(&mut self, s: usize, t: usize) -> i64 {
        let mut total = 0;
        loop {
            let mut parent = vec![usize::MAX; self.head.len()];
            let mut seen = vec![false; self.head.len()];
            seen[s] = true;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                if u == t {
                    break;
                }
                for &arc in &self.head[u] {
                    let w = self.to[arc];
                    if !seen[w] && self.res[arc] > 0 {
                        seen[w] = true;
                        parent[w] = arc;
                        queue.push_back(w);
                    }
                }
            }
            if !seen[t] {
                return total;
            }
            let mut bottleneck = i64::MAX;
            let mut w = t;
            while w != s {
                let arc = parent[w];
                bottleneck = bottleneck.min(self.res[arc]);
                w = self.to[arc ^ 1];
            }
            let mut w = t;
            while w != s {
                let arc = parent[w];
                self.res[arc] -= bottleneck;
                self.res[arc ^ 1] += bottleneck;
                w = self.to[arc ^ 1];
            }
            total += bottleneck;
        }
    }

    /// Nodes reachable from `s` through arcs with residual capacity.
    pub(crate) fn reachable_from(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.head.len()];
        seen[s] = true;
        let mut stack = vec![s];
        while let Some(u) = stack.pop() {
            for &arc in &self.head[u] {
                let w = self.to[arc];
                if !seen[w] && self.res[arc] > 0 {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen
    }

    /// Nodes that can still reach `t` through residual arcs.
    pub(crate) fn reaching(&self, t: usize) -> Vec<bool> {
        let mut seen = vec![false; self.head.len()];
        seen[t] = true;
        let mut stack = vec![t];
        while let Some(u) = stack.pop() {
            // arc a -> u with residual > 0 is the reverse of some arc u -> a
            for &arc in &self.head[u] {
                let back = arc ^ 1;
                let a = self.to[arc];
                if !seen[a] && self.res[back] > 0 {
                    seen[a] = true;
                    stack.push(a);
                }
            }
        }
        seen
    }

    pub(crate) fn arcs_from(&self, u: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.head[u].iter().map(move |&arc| (arc, self.to[arc]))
    }

    /// Capacity consumed on arc `id` (negative when the pair carries flow the
    /// other way).
    pub(crate) fn used(&self, id: usize) -> i64 {
        self.cap[id] - self.res[id]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Node {
    Source,
    Vertex(usize),
    Sink,
}

/// The network `N_{Γ,s}` with symmetric integer capacities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowNetwork {
    labels: Vec<String>,
    cap: Vec<Vec<u64>>,
}

impl FlowNetwork {
    pub fn node_count(&self) -> usize {
        self.cap.len()
    }

    pub fn source(&self) -> usize {
        0
    }

    pub fn sink(&self) -> usize {
        self.cap.len() - 1
    }

    pub fn vertex_node(&self, v: usize) -> usize {
        v + 1
    }

    pub fn node(&self, i: usize) -> Node {
        if i == 0 {
            Node::Source
        } else if i == self.sink() {
            Node::Sink
        } else {
            Node::Vertex(i - 1)
        }
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    /// Capacity of the unordered pair `{a, b}`.
    pub fn capacity(&self, a: usize, b: usize) -> u64 {
        self.cap[a][b]
    }

    /// Total capacity of edges leaving a source-side node set.
    pub fn cut_capacity(&self, side: &[bool]) -> u64 {
        let n = self.node_count();
        let mut total = 0;
        for a in 0..n {
            for b in 0..n {
                if side[a] && !side[b] {
                    total += self.cap[a][b];
                }
            }
        }
        total
    }

    fn residual(&self) -> Residual {
        let n = self.node_count();
        let mut r = Residual::new(n);
        for a in 0..n {
            for b in a + 1..n {
                let c = self.cap[a][b];
                if c > 0 {
                    r.add_edge(a, b, c as i64);
                }
            }
        }
        r
    }
}

/// Builds the network of a marginal. Node order: source, vertices, sink.
pub fn build_network(marginal: &Marginal) -> FlowNetwork {
    let g = marginal.graph();
    let k = g.vertex_count();
    let n = k + 2;
    let mut cap = vec![vec![0u64; n]; n];
    for e in g.edges() {
        if !e.is_loop() {
            cap[e.u + 1][e.v + 1] += 1;
            cap[e.v + 1][e.u + 1] += 1;
        }
    }
    for v in 0..k {
        let t = marginal.t(v) as u64;
        let s = marginal.s(v) as u64;
        cap[0][v + 1] = t;
        cap[v + 1][0] = t;
        cap[v + 1][n - 1] = s;
        cap[n - 1][v + 1] = s;
    }
    let mut labels = Vec::with_capacity(n);
    labels.push("source".to_string());
    labels.extend(g.names().iter().cloned());
    labels.push("sink".to_string());
    FlowNetwork { labels, cap }
}

/// Maximum flow with a unit-path decomposition and a certifying cut.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowResult {
    pub value: u64,
    /// Unit paths as node indices, each starting at the source and ending at
    /// the sink.
    pub paths: Vec<Vec<usize>>,
    /// Source side of the minimal minimum cut, as node indices.
    pub cut: Vec<usize>,
    pub cut_tied: bool,
}

/// Serialized form: `{"X", "paths", "cut", "cut_tied"}` with node labels.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct FlowDocument {
    #[serde(rename = "X")]
    pub x: u64,
    pub paths: Vec<Vec<String>>,
    pub cut: Vec<String>,
    pub cut_tied: bool,
}

impl FlowResult {
    pub fn document(&self, network: &FlowNetwork) -> FlowDocument {
        let names = |nodes: &[usize]| nodes.iter().map(|&i| network.label(i).to_string()).collect();
        FlowDocument {
            x: self.value,
            paths: self.paths.iter().map(|p| names(p)).collect(),
            cut: names(&self.cut),
            cut_tied: self.cut_tied,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinCut {
    pub source_side: Vec<usize>,
    pub capacity: u64,
    /// True when another minimum cut exists.
    pub tied: bool,
}

struct Solved {
    value: u64,
    residual: Residual,
}

fn solve(network: &FlowNetwork) -> Solved {
    let mut residual = network.residual();
    let value = residual.max_flow(network.source(), network.sink()) as u64;
    Solved { value, residual }
}

fn cut_of(network: &FlowNetwork, residual: &Residual) -> MinCut {
    let from_source = residual.reachable_from(network.source());
    let to_sink = residual.reaching(network.sink());
    let source_side: Vec<usize> = (0..network.node_count()).filter(|&i| from_source[i]).collect();
    let capacity = network.cut_capacity(&from_source);
    // The minimal source side is what the source reaches; the maximal one is
    // everything that cannot reach the sink. The minimum cut is unique iff
    // they coincide.
    let tied = (0..network.node_count()).any(|i| !from_source[i] && !to_sink[i]);
    MinCut { source_side, capacity, tied }
}

/// Net directed flow on each ordered node pair, read off the residual graph.
fn net_flows(network: &FlowNetwork, residual: &Residual) -> Vec<Vec<i64>> {
    let n = network.node_count();
    let mut f = vec![vec![0i64; n]; n];
    for a in 0..n {
        for (arc, b) in residual.arcs_from(a) {
            if arc % 2 == 0 {
                let used = residual.used(arc);
                f[a][b] += used;
                f[b][a] -= used;
            }
        }
    }
    f
}

/// Splits a flow into unit source-to-sink paths, cancelling any circulation.
fn decompose(source: usize, sink: usize, mut f: Vec<Vec<i64>>) -> Vec<Vec<usize>> {
    let n = f.len();
    let mut paths = Vec::new();
    'outer: loop {
        let mut path = vec![source];
        let mut on_path = vec![usize::MAX; n];
        on_path[source] = 0;
        let mut u = source;
        while u != sink {
            let Some(w) = (0..n).find(|&w| f[u][w] > 0) else {
                if u == source {
                    break 'outer;
                }
                // conservation guarantees an outgoing unit; reaching here means
                // the flow was malformed
                unreachable!("flow conservation violated at node {u}");
            };
            if on_path[w] != usize::MAX {
                // cancel the cycle w -> ... -> u -> w and restart
                let start = on_path[w];
                let mut cycle: Vec<usize> = path[start..].to_vec();
                cycle.push(w);
                for pair in cycle.windows(2) {
                    f[pair[0]][pair[1]] -= 1;
                    f[pair[1]][pair[0]] += 1;
                }
                continue 'outer;
            }
            on_path[w] = path.len();
            path.push(w);
            u = w;
        }
        for pair in path.windows(2) {
            f[pair[0]][pair[1]] -= 1;
            f[pair[1]][pair[0]] += 1;
        }
        paths.push(path);
    }
    paths
}

/// Exact integer maximum flow, unit-path decomposition and min-cut certificate.
pub fn max_flow(network: &FlowNetwork) -> FlowResult {
    let solved = solve(network);
    let cut = cut_of(network, &solved.residual);
    debug_assert_eq!(cut.capacity, solved.value);
    let flows = net_flows(network, &solved.residual);
    let paths = decompose(network.source(), network.sink(), flows);
    debug_assert_eq!(paths.len() as u64, solved.value);
    FlowResult { value: solved.value, paths, cut: cut.source_side, cut_tied: cut.tied }
}

/// A minimum source-side cut and whether it is unique.
pub fn min_cut(network: &FlowNetwork) -> MinCut {
    let solved = solve(network);
    cut_of(network, &solved.residual)
}

/// Every minimum cut, by exhaustive enumeration of source sides.
pub fn enumerate_min_cuts(network: &FlowNetwork) -> Result<Vec<Vec<usize>>> {
    let inner = network.node_count() - 2;
    if inner > 20 {
        return Err(Error::Guard(format!("cut enumeration over {inner} vertices (limit 20)")));
    }
    let mut best = u64::MAX;
    let mut cuts = Vec::new();
    for mask in 0u64..(1u64 << inner) {
        let mut side = vec![false; network.node_count()];
        side[0] = true;
        for v in 0..inner {
            side[v + 1] = mask >> v & 1 == 1;
        }
        let c = network.cut_capacity(&side);
        if c < best {
            best = c;
            cuts.clear();
        }
        if c == best {
            cuts.push((0..side.len()).filter(|&i| side[i]).collect());
        }
    }
    Ok(cuts)
}

/// Checks that `paths` are unit source-to-sink paths that together respect the
/// capacities of `network`. Returns the total flow they carry.
pub fn replay_paths(network: &FlowNetwork, paths: &[Vec<usize>]) -> Result<u64> {
    let n = network.node_count();
    let mut used = vec![vec![0i64; n]; n];
    for (i, path) in paths.iter().enumerate() {
        if path.first() != Some(&network.source()) || path.last() != Some(&network.sink()) {
            return Err(Error::Inconsistent(format!("path {i} does not run from source to sink")));
        }
        if path[1..path.len() - 1].iter().any(|&x| x == network.source() || x == network.sink() || x >= n) {
            return Err(Error::Inconsistent(format!("path {i} has a non-vertex interior node")));
        }
        for pair in path.windows(2) {
            used[pair[0]][pair[1]] += 1;
            used[pair[1]][pair[0]] -= 1;
        }
    }
    for a in 0..n {
        for b in 0..n {
            if used[a][b].unsigned_abs() > network.capacity(a, b) {
                return Err(Error::Inconsistent(format!(
                    "pair ({}, {}) carries {} units over capacity {}",
                    network.label(a),
                    network.label(b),
                    used[a][b].abs(),
                    network.capacity(a, b)
                )));
            }
        }
    }
    Ok(paths.len() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{resolve_trace, Graph, TraceSpec};

    fn marginal(g: &Graph, s: &[usize]) -> Marginal {
        resolve_trace(g, &TraceSpec::Counts(s.to_vec())).unwrap()
    }

    #[test]
    fn single_loop_network() {
        let g = Graph::new(["V"], [(0, 0, 1)]).unwrap();
        let net = build_network(&marginal(&g, &[1]));
        assert_eq!(net.capacity(0, 1), 1);
        assert_eq!(net.capacity(1, 2), 1);
        assert_eq!(net.capacity(1, 1), 0);
        assert_eq!(net.capacity(0, 2), 0);
        let flow = max_flow(&net);
        assert_eq!(flow.value, 1);
        assert_eq!(flow.paths, vec![vec![0, 1, 2]]);
        assert!(flow.cut_tied);
    }

    #[test]
    fn black_hole_network() {
        let g = Graph::new(["V1", "V2", "V3"], [(0, 1, 1), (1, 2, 1)]).unwrap();
        let net = build_network(&marginal(&g, &[0, 2, 0]));
        assert_eq!(net.capacity(0, 1), 1);
        assert_eq!(net.capacity(0, 3), 1);
        assert_eq!(net.capacity(1, 2), 1);
        assert_eq!(net.capacity(2, 3), 1);
        assert_eq!(net.capacity(2, 4), 2);
        assert_eq!(net.capacity(0, 2), 0);
        let flow = max_flow(&net);
        assert_eq!(flow.value, 2);
        assert_eq!(replay_paths(&net, &flow.paths).unwrap(), 2);
        // the other two black-hole marginals share the (0,1,1) network
        assert_eq!(max_flow(&build_network(&marginal(&g, &[0, 1, 1]))).value, 2);
    }

    #[test]
    fn oxygen_flow() {
        let g = Graph::new(["V1", "V2"], [(0, 1, 1), (0, 1, 1)]).unwrap();
        let net = build_network(&marginal(&g, &[1, 1]));
        assert_eq!(net.capacity(1, 2), 2);
        assert_eq!(max_flow(&net).value, 2);
    }

    #[test]
    fn double_loop_tie() {
        let g = Graph::new(["V"], [(0, 0, 1), (0, 0, 1)]).unwrap();
        let net = build_network(&marginal(&g, &[2]));
        let cut = min_cut(&net);
        assert_eq!(cut.capacity, 2);
        assert!(cut.tied);
        assert_eq!(enumerate_min_cuts(&net).unwrap(), vec![vec![0], vec![0, 1]]);
    }

    #[test]
    fn adapted_unique_cut() {
        // traced vertex with a loop, one edge to a surviving vertex with a loop
        let g = Graph::new(["A", "B"], [(0, 0, 1), (0, 1, 1), (1, 1, 1)]).unwrap();
        let net = build_network(&marginal(&g, &[0, 3]));
        let cut = min_cut(&net);
        assert_eq!(cut.capacity, 1);
        assert!(!cut.tied);
        assert_eq!(enumerate_min_cuts(&net).unwrap(), vec![cut.source_side.clone()]);
        assert_eq!(cut.source_side, vec![0, 1]);
    }

    #[test]
    fn replay_rejects_overuse() {
        let g = Graph::new(["V"], [(0, 0, 1)]).unwrap();
        let net = build_network(&marginal(&g, &[1]));
        let err = replay_paths(&net, &[vec![0, 1, 2], vec![0, 1, 2]]).unwrap_err();
        assert!(matches!(err, Error::Inconsistent(_)));
    }
}
