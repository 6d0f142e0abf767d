//! Fattened graphs, markings and the combinatorial boundary area.
//!
//! The fattened graph has one vertex per leg and one edge per graph edge, so
//! its edges form a perfect matching. A marking picks `s(v)` legs at every
//! vertex (marked = surviving); its crossings are the fat edges with exactly
//! one marked endpoint. The boundary area is the maximal crossing count and
//! equals the maximal flow of [`crate::flow::build_network`].

use std::collections::BTreeSet;

use itertools::Itertools;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow::{self, FlowResult, Residual};
use crate::graph::{Graph, Marginal};

pub const DEFAULT_COMBINATION_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FattenedGraph {
    projection: Vec<usize>,
    edges: Vec<(usize, usize)>,
}

impl FattenedGraph {
    pub fn vertex_count(&self) -> usize {
        self.projection.len()
    }

    /// Fat edges as leg pairs, in graph edge order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// The graph vertex a fat vertex (leg) belongs to.
    pub fn project(&self, leg: usize) -> usize {
        self.projection[leg]
    }

    pub fn fiber(&self, v: usize) -> Vec<usize> {
        (0..self.projection.len()).filter(|&l| self.projection[l] == v).collect()
    }
}

pub fn fatten(graph: &Graph) -> FattenedGraph {
    FattenedGraph {
        projection: graph.legs().iter().map(|l| l.vertex).collect(),
        edges: (0..graph.edge_count()).map(|e| graph.edge_legs(e)).collect(),
    }
}

/// A set of marked (surviving) legs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Marking {
    pub marked: BTreeSet<usize>,
}

impl Marking {
    pub fn new(marked: impl IntoIterator<Item = usize>) -> Self {
        Marking { marked: marked.into_iter().collect() }
    }

    pub fn contains(&self, leg: usize) -> bool {
        self.marked.contains(&leg)
    }

    /// Sorted leg ids, the serialized form.
    pub fn legs(&self) -> Vec<usize> {
        self.marked.iter().copied().collect()
    }

    pub fn is_compatible(&self, marginal: &Marginal) -> bool {
        let g = marginal.graph();
        self.marked.iter().all(|&l| l < g.leg_count())
            && (0..g.vertex_count())
                .all(|v| g.legs_of(v).iter().filter(|l| self.contains(**l)).count() == marginal.s(v))
    }
}

pub fn crossings(fat: &FattenedGraph, marking: &Marking) -> usize {
    fat.edges.iter().filter(|(a, b)| marking.contains(*a) != marking.contains(*b)).count()
}

/// Number of markings compatible with the counting function.
pub fn marking_space_size(marginal: &Marginal) -> u128 {
    let g = marginal.graph();
    (0..g.vertex_count())
        .map(|v| binomial(g.degree(v) as u128, marginal.s(v) as u128))
        .fold(1u128, |acc, c| acc.saturating_mul(c))
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Exact area by enumerating every compatible marking. Returns the maximum
/// crossing count and the first maximizing marking in enumeration order.
pub fn area_bruteforce(marginal: &Marginal, combination_limit: u128) -> Result<(usize, Marking)> {
    let size = marking_space_size(marginal);
    if size > combination_limit {
        return Err(Error::CombinatorialLimit { size, limit: combination_limit });
    }
    let g = marginal.graph();
    let fat = fatten(g);
    if g.vertex_count() == 0 {
        return Ok((0, Marking::new([])));
    }
    let choices: Vec<Vec<Vec<usize>>> = (0..g.vertex_count())
        .map(|v| g.legs_of(v).iter().copied().combinations(marginal.s(v)).collect())
        .collect();

    // Split on the first vertex's choice; ties resolve to the lowest
    // enumeration index regardless of how the work was partitioned.
    let best = choices[0]
        .par_iter()
        .enumerate()
        .map(|(head_idx, head)| {
            let mut best: Option<(usize, usize, Marking)> = None;
            let rest = choices[1..].iter().map(|c| c.iter()).multi_cartesian_product();
            let rest: Box<dyn Iterator<Item = Vec<&Vec<usize>>>> =
                if choices.len() == 1 { Box::new(std::iter::once(Vec::new())) } else { Box::new(rest) };
            for (idx, tail) in rest.enumerate() {
                let marking = Marking::new(head.iter().chain(tail.into_iter().flatten()).copied());
                let cr = crossings(&fat, &marking);
                if best.as_ref().is_none_or(|(b, _, _)| cr > *b) {
                    best = Some((cr, idx, marking));
                }
            }
            let (cr, idx, m) = best.expect("every vertex has at least one choice");
            (cr, head_idx, idx, m)
        })
        .reduce_with(|a, b| {
            if b.0 > a.0 || (b.0 == a.0 && (b.1, b.2) < (a.1, a.2)) {
                b
            } else {
                a
            }
        })
        .expect("at least one marking");
    Ok((best.0, best.3))
}

/// Turns a maximum flow into a compatible marking with exactly `X` crossings.
///
/// The source side `A` of the flow's minimum cut is painted unmarked and the
/// sink side `B` marked, so every `A`-`B` edge crosses. Each `v` in `A` then
/// needs `s(v)` marks placed on edges internal to `A` (at most one end per
/// edge), and each `v` in `B` needs `t(v)` unmarks on edges internal to `B`.
/// Minimality of the cut is exactly Hall's condition for both placements;
/// they are found with a bipartite flow, lowest edge index first.
pub fn marking_from_flow(marginal: &Marginal, flow: &FlowResult) -> Result<Marking> {
    let network = flow::build_network(marginal);
    let replayed = flow::replay_paths(&network, &flow.paths)?;
    if replayed != flow.value {
        return Err(Error::Inconsistent(format!(
            "{} unit paths given for flow value {}",
            replayed, flow.value
        )));
    }
    let mut side = vec![false; network.node_count()];
    for &node in &flow.cut {
        if node >= side.len() {
            return Err(Error::Inconsistent(format!("cut names unknown node {node}")));
        }
        side[node] = true;
    }
    if !side[network.source()] || side[network.sink()] {
        return Err(Error::Inconsistent("cut must separate source from sink".into()));
    }
    let cut_value = network.cut_capacity(&side);
    if cut_value != flow.value {
        return Err(Error::Inconsistent(format!(
            "cut capacity {cut_value} differs from flow value {}; flow is not maximal",
            flow.value
        )));
    }

    let g = marginal.graph();
    let in_a = |v: usize| side[network.vertex_node(v)];
    let mut marked = vec![false; g.leg_count()];
    for v in 0..g.vertex_count() {
        if !in_a(v) {
            for &l in g.legs_of(v) {
                marked[l] = true;
            }
        }
    }
    for source_side in [true, false] {
        let flips = place_flips(marginal, source_side, &in_a)?;
        for leg in flips {
            marked[leg] = source_side;
        }
    }

    let marking = Marking::new((0..g.leg_count()).filter(|&l| marked[l]));
    let cr = crossings(&fatten(g), &marking);
    if !marking.is_compatible(marginal) || cr as u64 != flow.value {
        return Err(Error::Inconsistent(format!(
            "constructed marking has {cr} crossings for flow value {}",
            flow.value
        )));
    }
    Ok(marking)
}

/// Legs to flip on one side of the cut: for the source side each vertex needs
/// `s(v)` marks, for the sink side `t(v)` unmarks, each placed on a distinct
/// edge internal to that side.
fn place_flips(
    marginal: &Marginal,
    source_side: bool,
    in_a: &dyn Fn(usize) -> bool,
) -> Result<Vec<usize>> {
    let g = marginal.graph();
    let members: Vec<usize> = (0..g.vertex_count()).filter(|&v| in_a(v) == source_side).collect();
    let demand = |v: usize| if source_side { marginal.s(v) } else { marginal.t(v) };
    let internal: Vec<usize> = (0..g.edge_count())
        .filter(|&e| {
            let edge = &g.edges()[e];
            in_a(edge.u) == source_side && in_a(edge.v) == source_side
        })
        .collect();

    // source -> member vertex (demand) -> internal edge (1) -> sink
    let src = 0;
    let sink = 1 + members.len() + internal.len();
    let mut r = Residual::new(sink + 1);
    let mut vertex_node = vec![usize::MAX; g.vertex_count()];
    for (i, &v) in members.iter().enumerate() {
        vertex_node[v] = 1 + i;
        r.add_arc(src, 1 + i, demand(v) as i64);
    }
    let mut picks = Vec::new();
    for (j, &e) in internal.iter().enumerate() {
        let node = 1 + members.len() + j;
        let (la, lb) = g.edge_legs(e);
        let edge = &g.edges()[e];
        picks.push((r.add_arc(vertex_node[edge.u], node, 1), la));
        if !edge.is_loop() {
            picks.push((r.add_arc(vertex_node[edge.v], node, 1), lb));
        }
        r.add_arc(node, sink, 1);
    }
    let needed: usize = members.iter().map(|&v| demand(v)).sum();
    let got = r.max_flow(src, sink) as usize;
    if got != needed {
        return Err(Error::Inconsistent(format!(
            "cannot place {needed} {} on the {} side of the cut (placed {got}); the cut is not minimal",
            if source_side { "marks" } else { "unmarks" },
            if source_side { "source" } else { "sink" },
        )));
    }
    Ok(picks.into_iter().filter(|&(arc, _)| r.used(arc) > 0).map(|(_, leg)| leg).collect())
}
