//! Graphs, legs and trace specifications.
//!
//! Every edge carries a maximally entangled pair; its two endpoints are the
//! *legs* of the graph, each a quantum subsystem of dimension `d * N` where `d`
//! is the edge's integer ratio. Legs are numbered by scanning the edge list in
//! document order, first endpoint then second. That numbering is part of the
//! external document format.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    First,
    Second,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub ratio: u32,
}

impl Edge {
    pub fn is_loop(&self) -> bool {
        self.u == self.v
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Leg {
    pub id: usize,
    pub vertex: usize,
    pub edge: usize,
    pub side: Side,
    pub ratio: u32,
}

/// Undirected multigraph with loops. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    names: Vec<String>,
    edges: Vec<Edge>,
    legs: Vec<Leg>,
    legs_by_vertex: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds and validates a graph from vertex names and `(u, v, d)` triples.
    pub fn new<S: Into<String>>(
        vertices: impl IntoIterator<Item = S>,
        edges: impl IntoIterator<Item = (usize, usize, u32)>,
    ) -> Result<Self> {
        let names: Vec<String> = vertices.into_iter().map(Into::into).collect();
        let mut seen = BTreeSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(Error::Validation(format!("duplicate vertex '{name}'")));
            }
        }
        let mut list = Vec::new();
        for (i, (u, v, ratio)) in edges.into_iter().enumerate() {
            for end in [u, v] {
                if end >= names.len() {
                    return Err(Error::Validation(format!(
                        "edge {i} references vertex index {end}, graph has {} vertices",
                        names.len()
                    )));
                }
            }
            if ratio == 0 {
                return Err(Error::Validation(format!("edge {i} has non-positive ratio 0")));
            }
            list.push(Edge { u, v, ratio });
        }

        let mut legs = Vec::with_capacity(2 * list.len());
        let mut legs_by_vertex = vec![Vec::new(); names.len()];
        for (e, edge) in list.iter().enumerate() {
            for (vertex, side) in [(edge.u, Side::First), (edge.v, Side::Second)] {
                let id = legs.len();
                legs.push(Leg { id, vertex, edge: e, side, ratio: edge.ratio });
                legs_by_vertex[vertex].push(id);
            }
        }
        if let Some(v) = legs_by_vertex.iter().position(Vec::is_empty) {
            return Err(Error::Validation(format!(
                "vertex '{}' has degree 0; every vertex must carry an edge endpoint",
                names[v]
            )));
        }
        Ok(Graph { names, edges: list, legs, legs_by_vertex })
    }

    pub fn vertex_count(&self) -> usize {
        self.names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn leg_count(&self) -> usize {
        self.legs.len()
    }

    pub fn name(&self, v: usize) -> &str {
        &self.names[v]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn vertex_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn legs(&self) -> &[Leg] {
        &self.legs
    }

    /// Leg ids attached to `v`, ascending.
    pub fn legs_of(&self, v: usize) -> &[usize] {
        &self.legs_by_vertex[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.legs_by_vertex[v].len()
    }

    /// The two leg ids of edge `e`.
    pub fn edge_legs(&self, e: usize) -> (usize, usize) {
        (2 * e, 2 * e + 1)
    }

    /// The other endpoint of the edge carrying `leg`.
    pub fn partner(&self, leg: usize) -> usize {
        leg ^ 1
    }

    /// Number of edges joining distinct vertices `a` and `b`.
    pub fn multiplicity(&self, a: usize, b: usize) -> usize {
        self.edges
            .iter()
            .filter(|e| (e.u == a && e.v == b) || (e.u == b && e.v == a))
            .count()
    }

    /// Hilbert-space dimension `d * N` of a leg.
    pub fn leg_dim(&self, leg: usize, n: usize) -> usize {
        self.legs[leg].ratio as usize * n
    }

    pub fn to_document(&self, trace: Option<TraceDocument>) -> GraphDocument {
        GraphDocument {
            vertices: self.names.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeRecord {
                    u: self.names[e.u].clone(),
                    v: self.names[e.v].clone(),
                    d: i64::from(e.ratio),
                })
                .collect(),
            trace,
        }
    }
}

/// Which legs are traced out, either as per-vertex survivor counts or as an
/// explicit leg set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceSpec {
    /// `s(v)` surviving legs per vertex, indexed like the graph's vertices.
    Counts(Vec<usize>),
    /// Explicit set of traced leg ids.
    Legs(BTreeSet<usize>),
}

/// A graph together with a resolved partition of its legs into surviving
/// (`S`) and traced (`T`) subsystems.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Marginal {
    graph: Graph,
    survivors: Vec<usize>,
    traced: Vec<bool>,
    from_legs: bool,
}

/// Validates `spec` against `graph` and produces both the counting view and a
/// leg-level view. Counts-mode specs are completed by tracing the
/// lowest-numbered legs of each vertex.
pub fn resolve_trace(graph: &Graph, spec: &TraceSpec) -> Result<Marginal> {
    match spec {
        TraceSpec::Counts(s) => {
            if s.len() != graph.vertex_count() {
                return Err(Error::Validation(format!(
                    "counting function has {} entries, graph has {} vertices",
                    s.len(),
                    graph.vertex_count()
                )));
            }
            let mut traced = vec![false; graph.leg_count()];
            for (v, &count) in s.iter().enumerate() {
                let deg = graph.degree(v);
                if count > deg {
                    return Err(Error::Validation(format!(
                        "s({}) = {count} is outside [0, {deg}]",
                        graph.name(v)
                    )));
                }
                for &leg in &graph.legs_of(v)[..deg - count] {
                    traced[leg] = true;
                }
            }
            Ok(Marginal { graph: graph.clone(), survivors: s.clone(), traced, from_legs: false })
        }
        TraceSpec::Legs(set) => {
            let mut traced = vec![false; graph.leg_count()];
            for &leg in set {
                if leg >= graph.leg_count() {
                    return Err(Error::Validation(format!(
                        "traced leg {leg} does not exist (graph has {} legs)",
                        graph.leg_count()
                    )));
                }
                traced[leg] = true;
            }
            let survivors = (0..graph.vertex_count())
                .map(|v| graph.legs_of(v).iter().filter(|&&l| !traced[l]).count())
                .collect();
            Ok(Marginal { graph: graph.clone(), survivors, traced, from_legs: true })
        }
    }
}

impl Marginal {
    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    /// `s(v)`: surviving legs at `v`.
    pub fn s(&self, v: usize) -> usize {
        self.survivors[v]
    }

    /// `t(v) = deg(v) - s(v)`: traced legs at `v`.
    pub fn t(&self, v: usize) -> usize {
        self.graph.degree(v) - self.survivors[v]
    }

    pub fn counts(&self) -> &[usize] {
        &self.survivors
    }

    pub fn is_traced(&self, leg: usize) -> bool {
        self.traced[leg]
    }

    pub fn traced_legs(&self) -> Vec<usize> {
        (0..self.traced.len()).filter(|&l| self.traced[l]).collect()
    }

    pub fn surviving_legs(&self) -> Vec<usize> {
        (0..self.traced.len()).filter(|&l| !self.traced[l]).collect()
    }

    /// True when the leg set came from an explicit legs-mode spec.
    pub fn from_legs(&self) -> bool {
        self.from_legs
    }

    /// Counts-mode spec equivalent to this marginal.
    pub fn counts_spec(&self) -> TraceSpec {
        TraceSpec::Counts(self.survivors.clone())
    }

    /// The same graph with surviving and traced legs exchanged.
    pub fn complement(&self) -> Marginal {
        let traced: Vec<bool> = self.traced.iter().map(|t| !t).collect();
        let survivors = (0..self.graph.vertex_count()).map(|v| self.t(v)).collect();
        Marginal { graph: self.graph.clone(), survivors, traced, from_legs: self.from_legs }
    }

    /// Whether every vertex is either fully traced or fully surviving.
    pub fn is_adapted(&self) -> bool {
        (0..self.graph.vertex_count()).all(|v| self.s(v) == 0 || self.t(v) == 0)
    }

    pub fn trace_document(&self) -> TraceDocument {
        if self.from_legs {
            TraceDocument::Legs { traced: self.traced_legs().into_iter().map(|l| l as i64).collect() }
        } else {
            TraceDocument::Counts {
                s: self
                    .survivors
                    .iter()
                    .enumerate()
                    .map(|(v, &c)| (self.graph.name(v).to_string(), c as i64))
                    .collect(),
            }
        }
    }
}

pub fn is_adapted(marginal: &Marginal) -> bool {
    marginal.is_adapted()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub u: String,
    pub v: String,
    pub d: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum TraceDocument {
    Counts { s: BTreeMap<String, i64> },
    Legs { traced: Vec<i64> },
}

/// The textual graph document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDocument {
    pub vertices: Vec<String>,
    pub edges: Vec<EdgeRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<TraceDocument>,
}

impl GraphDocument {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn graph(&self) -> Result<Graph> {
        let index: HashMap<&str, usize> =
            self.vertices.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let lookup = |name: &str, e: usize| {
            index.get(name).copied().ok_or_else(|| {
                Error::Validation(format!("edge {e} references undefined vertex '{name}'"))
            })
        };
        let mut edges = Vec::with_capacity(self.edges.len());
        for (e, rec) in self.edges.iter().enumerate() {
            let u = lookup(&rec.u, e)?;
            let v = lookup(&rec.v, e)?;
            if rec.d <= 0 || rec.d > i64::from(u32::MAX) {
                return Err(Error::Validation(format!(
                    "edge {e} ({} - {}) has invalid ratio d = {}",
                    rec.u, rec.v, rec.d
                )));
            }
            edges.push((u, v, rec.d as u32));
        }
        Graph::new(self.vertices.iter().cloned(), edges)
    }

    pub fn trace_spec(&self, graph: &Graph) -> Result<Option<TraceSpec>> {
        self.trace.as_ref().map(|t| t.to_spec(graph)).transpose()
    }
}

impl TraceDocument {
    pub fn to_spec(&self, graph: &Graph) -> Result<TraceSpec> {
        match self {
            TraceDocument::Counts { s } => {
                for name in s.keys() {
                    if graph.vertex_index(name).is_none() {
                        return Err(Error::Validation(format!("count given for unknown vertex '{name}'")));
                    }
                }
                let mut counts = Vec::with_capacity(graph.vertex_count());
                for name in graph.names() {
                    let c = *s.get(name).ok_or_else(|| {
                        Error::Validation(format!("count missing for vertex '{name}'"))
                    })?;
                    if c < 0 {
                        return Err(Error::Validation(format!("s({name}) = {c} is negative")));
                    }
                    counts.push(c as usize);
                }
                Ok(TraceSpec::Counts(counts))
            }
            TraceDocument::Legs { traced } => {
                let mut set = BTreeSet::new();
                for &leg in traced {
                    if leg < 0 {
                        return Err(Error::Validation(format!("traced leg {leg} does not exist")));
                    }
                    set.insert(leg as usize);
                }
                Ok(TraceSpec::Legs(set))
            }
        }
    }
}

/// Parses a graph document and validates the graph it describes.
pub fn parse_graph(text: &str) -> Result<Graph> {
    GraphDocument::parse(text)?.graph()
}

/// Parses a graph document that must carry a `trace` section.
pub fn parse_marginal(text: &str) -> Result<Marginal> {
    let doc = GraphDocument::parse(text)?;
    let graph = doc.graph()?;
    let spec = doc
        .trace_spec(&graph)?
        .ok_or_else(|| Error::Validation("document has no 'trace' section".into()))?;
    resolve_trace(&graph, &spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn black_hole() -> Graph {
        Graph::new(["V1", "V2", "V3"], [(0, 1, 1), (1, 2, 2)]).unwrap()
    }

    #[test]
    fn single_loop_is_smallest_graph() {
        let g = parse_graph(r#"{"vertices":["V"],"edges":[{"u":"V","v":"V","d":1}]}"#).unwrap();
        assert_eq!(g.vertex_count(), 1);
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.leg_count(), 2);
        assert_eq!(g.legs_of(0), &[0, 1]);
    }

    #[test]
    fn path_graph_legs() {
        let g = parse_graph(
            r#"{"vertices":["V1","V2","V3"],"edges":[{"u":"V1","v":"V2","d":1},{"u":"V2","v":"V3","d":2}]}"#,
        )
        .unwrap();
        assert_eq!(g.vertex_count(), 3);
        assert_eq!(g.leg_count(), 4);
        assert_eq!(g.degree(1), 2);
        assert_eq!(g.legs()[2].vertex, 1);
        assert_eq!(g.legs()[2].ratio, 2);
        assert_eq!(g.legs()[3].side, Side::Second);
    }

    #[test]
    fn undefined_vertex_is_named() {
        let err = parse_graph(r#"{"vertices":["A"],"edges":[{"u":"A","v":"B","d":1}]}"#).unwrap_err();
        assert!(matches!(err, Error::Validation(ref m) if m.contains("'B'")), "{err}");
    }

    #[test]
    fn rejects_bad_ratio_and_isolated_vertex() {
        let err = parse_graph(r#"{"vertices":["A"],"edges":[{"u":"A","v":"A","d":0}]}"#).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        let err = parse_graph(r#"{"vertices":["A","B"],"edges":[{"u":"A","v":"A","d":1}]}"#).unwrap_err();
        assert!(matches!(err, Error::Validation(ref m) if m.contains("'B'")));
        assert!(matches!(parse_graph("{not json"), Err(Error::Parse(_))));
    }

    #[test]
    fn resolve_counts_on_loop() {
        let g = Graph::new(["V"], [(0, 0, 1)]).unwrap();
        let m = resolve_trace(&g, &TraceSpec::Counts(vec![1])).unwrap();
        assert_eq!(m.t(0), 1);
        assert_eq!(m.traced_legs(), vec![0]);
    }

    #[test]
    fn legs_mode_induces_counts() {
        let g = black_hole();
        let m = resolve_trace(&g, &TraceSpec::Legs([0, 1].into())).unwrap();
        assert_eq!(m.counts(), &[0, 1, 1]);
        assert!(!m.is_adapted());
    }

    #[test]
    fn count_out_of_range() {
        let g = black_hole();
        let err = resolve_trace(&g, &TraceSpec::Counts(vec![0, 3, 0])).unwrap_err();
        assert!(matches!(err, Error::Validation(ref m) if m.contains("V2")));
        assert!(resolve_trace(&g, &TraceSpec::Legs([9].into())).is_err());
    }

    #[test]
    fn adaptedness() {
        let g = black_hole();
        assert!(resolve_trace(&g, &TraceSpec::Counts(vec![0, 2, 0])).unwrap().is_adapted());
        assert!(!resolve_trace(&g, &TraceSpec::Counts(vec![1, 1, 1])).unwrap().is_adapted());
        assert!(resolve_trace(&g, &TraceSpec::Counts(vec![0, 0, 0])).unwrap().is_adapted());
    }

    #[test]
    fn document_trace_sections() {
        let text = r#"{"vertices":["V"],"edges":[{"u":"V","v":"V","d":1}],"trace":{"mode":"counts","s":{"V":1}}}"#;
        let m = parse_marginal(text).unwrap();
        assert_eq!(m.counts(), &[1]);
        let text = r#"{"vertices":["V"],"edges":[{"u":"V","v":"V","d":1}],"trace":{"mode":"legs","traced":[1]}}"#;
        let m = parse_marginal(text).unwrap();
        assert_eq!(m.traced_legs(), vec![1]);
        let text = r#"{"vertices":["V"],"edges":[{"u":"V","v":"V","d":1}],"trace":{"mode":"counts","s":{}}}"#;
        assert!(matches!(parse_marginal(text), Err(Error::Validation(_))));
    }

    #[test]
    fn complement_swaps_counts() {
        let g = black_hole();
        let m = resolve_trace(&g, &TraceSpec::Legs([0, 2].into())).unwrap();
        let c = m.complement();
        assert_eq!(c.counts(), &[1, 1, 0]);
        assert_eq!(c.traced_legs(), vec![1, 3]);
    }
}
