//! Shipping shared entangled pairs from facilities to two parties `A` and `B`.
//!
//! Each site holds halves of the pairs it shares with other sites and may
//! create extra local pairs. It ships `S_i` particles to `A` and `T_i` to `B`
//! after a local unitary. The number of ebits between `A` and `B` is at most
//! the max flow of the derived graph marginal, and permutations reach it.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow;
use crate::graph::{resolve_trace, Graph, Marginal, TraceSpec};
use crate::marking::{crossings, fatten, marking_from_flow};
use crate::sim::{build_pure_state, BuildOptions, Guards, SampleRng, SpectralReport, VertexUnitary, C64};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairRecord {
    pub a: String,
    pub b: String,
    pub count: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Quota {
    #[serde(rename = "A")]
    pub a: i64,
    #[serde(rename = "B")]
    pub b: i64,
}

/// The instance document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDocument {
    pub facilities: Vec<String>,
    #[serde(default)]
    pub pairs: Vec<PairRecord>,
    pub quotas: BTreeMap<String, Quota>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
}

/// A validated instance. Shared pairs are kept in document order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportInstance {
    pub facilities: Vec<String>,
    pub pairs: Vec<(usize, usize, usize)>,
    /// `(S_i, T_i)` per facility.
    pub quotas: Vec<(usize, usize)>,
    pub n: Option<usize>,
}

fn non_negative(value: i64, what: &str) -> Result<usize> {
    usize::try_from(value).map_err(|_| Error::Validation(format!("{what} must be non-negative, got {value}")))
}

impl TransportInstance {
    pub fn parse(text: &str) -> Result<Self> {
        let doc: InstanceDocument = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_document(&doc)
    }

    pub fn from_document(doc: &InstanceDocument) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (i, f) in doc.facilities.iter().enumerate() {
            if index.insert(f.as_str(), i).is_some() {
                return Err(Error::Validation(format!("duplicate facility '{f}'")));
            }
        }
        let lookup = |name: &str| {
            index.get(name).copied().ok_or_else(|| Error::Validation(format!("unknown facility '{name}'")))
        };
        let mut pairs = Vec::new();
        let mut seen = BTreeSet::new();
        for p in &doc.pairs {
            let (a, b) = (lookup(&p.a)?, lookup(&p.b)?);
            if a == b {
                return Err(Error::Validation(format!(
                    "pair ({}, {}) joins a site to itself; local pairs are created as padding",
                    p.a, p.b
                )));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(Error::Validation(format!("pair ({}, {}) listed twice", p.a, p.b)));
            }
            pairs.push((a, b, non_negative(p.count, "pair count")?));
        }
        for name in doc.quotas.keys() {
            lookup(name)?;
        }
        let quotas = doc
            .facilities
            .iter()
            .map(|f| {
                let q = doc.quotas.get(f).ok_or_else(|| Error::Validation(format!("no quota for facility '{f}'")))?;
                Ok((non_negative(q.a, "quota A")?, non_negative(q.b, "quota B")?))
            })
            .collect::<Result<_>>()?;
        if doc.n == Some(0) {
            return Err(Error::Validation("N must be positive".into()));
        }
        Ok(TransportInstance { facilities: doc.facilities.clone(), pairs, quotas, n: doc.n })
    }

    pub fn to_document(&self) -> InstanceDocument {
        InstanceDocument {
            facilities: self.facilities.clone(),
            pairs: self
                .pairs
                .iter()
                .map(|&(a, b, c)| PairRecord {
                    a: self.facilities[a].clone(),
                    b: self.facilities[b].clone(),
                    count: c as i64,
                })
                .collect(),
            quotas: self
                .facilities
                .iter()
                .zip(&self.quotas)
                .map(|(f, &(a, b))| (f.clone(), Quota { a: a as i64, b: b as i64 }))
                .collect(),
            n: self.n,
        }
    }

    /// Pair halves held by each site.
    pub fn edge_degree(&self, site: usize) -> usize {
        self.pairs.iter().filter(|p| p.0 == site || p.1 == site).map(|p| p.2).sum()
    }
}

/// The graph marginal of an instance plus the bookkeeping back to sites.
#[derive(Debug, Clone)]
pub struct Reduction {
    pub marginal: Marginal,
    /// Facility index of each graph vertex. Sites that ship nothing are dropped.
    pub sites: Vec<usize>,
    /// Number of leading edges that are shared pairs; the rest are pad loops.
    pub shared_edges: usize,
}

/// One vertex per active site, `E_ij` parallel edges per pair and
/// `(S_i + T_i - deg_i) / 2` local pad loops per site; `s(site) = S_i`.
pub fn to_marginal(instance: &TransportInstance) -> Result<Reduction> {
    let k = instance.facilities.len();
    let mut pads = vec![0usize; k];
    for site in 0..k {
        let (s, t) = instance.quotas[site];
        let deg = instance.edge_degree(site);
        let name = &instance.facilities[site];
        if s + t < deg {
            return Err(Error::Infeasible(format!(
                "site '{name}' holds {deg} pair halves but its quotas ship only {}",
                s + t
            )));
        }
        let deficit = s + t - deg;
        if deficit % 2 == 1 {
            return Err(Error::Infeasible(format!(
                "site '{name}' must create {deficit} extra particles locally; pairs come in twos, so an odd count cannot be made"
            )));
        }
        pads[site] = deficit / 2;
    }
    let sites: Vec<usize> = (0..k).filter(|&i| instance.quotas[i].0 + instance.quotas[i].1 > 0).collect();
    let mut vertex_of = vec![usize::MAX; k];
    for (v, &site) in sites.iter().enumerate() {
        vertex_of[site] = v;
    }
    let mut edges = Vec::new();
    for &(a, b, count) in &instance.pairs {
        edges.extend(std::iter::repeat_n((vertex_of[a], vertex_of[b], 1), count));
    }
    let shared_edges = edges.len();
    for &site in &sites {
        edges.extend(std::iter::repeat_n((vertex_of[site], vertex_of[site], 1), pads[site]));
    }
    let graph = Graph::new(sites.iter().map(|&i| instance.facilities[i].clone()), edges)?;
    let counts = sites.iter().map(|&i| instance.quotas[i].0).collect();
    let marginal = resolve_trace(&graph, &TraceSpec::Counts(counts))?;
    Ok(Reduction { marginal, sites, shared_edges })
}

/// Ebit counts under local-only, global and local-unitary shipping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenarios {
    #[serde(rename = "Y1")]
    pub y1: usize,
    #[serde(rename = "Y2")]
    pub y2: usize,
    #[serde(rename = "Y3")]
    pub y3: usize,
}

pub fn scenarios(instance: &TransportInstance) -> Result<Scenarios> {
    let red = to_marginal(instance)?;
    let y1 = instance.quotas.iter().map(|&(s, t)| s.min(t)).sum();
    let total_s: usize = instance.quotas.iter().map(|q| q.0).sum();
    let total_t: usize = instance.quotas.iter().map(|q| q.1).sum();
    let y3 = flow::max_flow(&flow::build_network(&red.marginal)).value as usize;
    Ok(Scenarios { y1, y2: total_s.min(total_t), y3 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Party {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LegRoute {
    pub leg: usize,
    /// Facility at the other end, or this site for a pad pair.
    pub partner: String,
    pub pad: bool,
    pub to: Party,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SitePlan {
    pub site: String,
    pub legs: Vec<LegRoute>,
    /// Output slot `j` carries input factor `permutation[j]` (positions in
    /// `legs`). The first `T_i` slots go to `B`, the rest to `A`.
    pub permutation: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutingPlan {
    pub sites: Vec<SitePlan>,
    pub crossings: usize,
    /// Legs shipped to `A`.
    pub marked: Vec<usize>,
}

pub fn routing(instance: &TransportInstance) -> Result<RoutingPlan> {
    let red = to_marginal(instance)?;
    plan_for(instance, &red)
}

fn plan_for(instance: &TransportInstance, red: &Reduction) -> Result<RoutingPlan> {
    let m = &red.marginal;
    let g = m.graph();
    let result = flow::max_flow(&flow::build_network(m));
    let marking = marking_from_flow(m, &result)?;
    let mut sites = Vec::new();
    for v in 0..g.vertex_count() {
        let legs = g.legs_of(v);
        let routes: Vec<LegRoute> = legs
            .iter()
            .map(|&l| {
                let partner = g.legs()[g.partner(l)].vertex;
                LegRoute {
                    leg: l,
                    partner: instance.facilities[red.sites[partner]].clone(),
                    pad: g.legs()[l].edge >= red.shared_edges,
                    to: if marking.contains(l) { Party::A } else { Party::B },
                }
            })
            .collect();
        let to_b = (0..legs.len()).filter(|&i| routes[i].to == Party::B);
        let to_a = (0..legs.len()).filter(|&i| routes[i].to == Party::A);
        let permutation = to_b.chain(to_a).collect();
        sites.push(SitePlan { site: g.name(v).to_string(), legs: routes, permutation });
    }
    Ok(RoutingPlan { sites, crossings: crossings(&fatten(g), &marking), marked: marking.legs() })
}

/// Unitary relabeling tensor factors: output slot `j` takes input factor `perm[j]`.
pub fn permutation_unitary(dims: &[usize], perm: &[usize]) -> DMatrix<C64> {
    let total: usize = dims.iter().product();
    let k = dims.len();
    let mut u = DMatrix::zeros(total, total);
    let out_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let mut digits = vec![0usize; k];
    for x in 0..total {
        let y = perm.iter().zip(&out_dims).fold(0, |acc, (&p, &d)| acc * d + digits[p]);
        u[(y, x)] = C64::new(1.0, 0.0);
        for a in (0..k).rev() {
            digits[a] += 1;
            if digits[a] < dims[a] {
                break;
            }
            digits[a] = 0;
        }
    }
    u
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenyiCheck {
    pub q: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "Y3")]
    pub y3: usize,
    pub expected_rank: u128,
    pub rank: usize,
    pub max_eigenvalue_deviation: f64,
    pub renyi: Vec<RenyiCheck>,
    pub expected_entropy: f64,
    pub haar_samples: usize,
    pub haar_max_rank: usize,
    pub passed: bool,
}

pub const CERTIFICATE_TOLERANCE: f64 = 1e-9;
pub const CERTIFICATE_HAAR_SAMPLES: usize = 50;

/// Builds the state with the plan's permutations and checks that `ρ_A` is
/// maximally mixed of rank `N^{Y3}`; then checks that Haar samples never
/// exceed that rank.
pub fn certify(instance: &TransportInstance, n: usize, seed: u64, guards: &Guards) -> Result<Certificate> {
    if n < 2 {
        return Err(Error::Validation("the certificate needs N >= 2".into()));
    }
    let red = to_marginal(instance)?;
    let plan = plan_for(instance, &red)?;
    let m = &red.marginal;
    let g = m.graph();
    let y3 = plan.crossings;
    let expected_rank = (n as u128)
        .checked_pow(y3 as u32)
        .ok_or_else(|| Error::Guard(format!("N^{y3} overflows")))?;

    let ops: Vec<VertexUnitary> = plan
        .sites
        .iter()
        .enumerate()
        .map(|(v, site)| {
            let dims: Vec<usize> = g.legs_of(v).iter().map(|&l| g.leg_dim(l, n)).collect();
            VertexUnitary::Explicit(permutation_unitary(&dims, &site.permutation))
        })
        .collect();
    let exact = BuildOptions { skip_traced: false, skip_surviving: false };
    let psi = build_pure_state(m, n, &ops, &exact, guards, SampleRng { seed, stream: 0 })?;
    let qs = [0.0, 1.0, 2.0];
    let report = SpectralReport::from_eigenvalues(psi.marginal_spectrum(m)?, &qs);
    let level = 1.0 / expected_rank as f64;
    let deviation = report.eigenvalues[..report.rank.min(report.eigenvalues.len())]
        .iter()
        .map(|x| (x - level).abs())
        .fold(0.0, f64::max);
    let expected_entropy = y3 as f64 * (n as f64).ln();
    let renyi: Vec<RenyiCheck> = report.renyi.iter().map(|r| RenyiCheck { q: r.q, value: r.value }).collect();

    let haar = vec![VertexUnitary::Haar; g.vertex_count()];
    let mut haar_max_rank = 0;
    for i in 0..CERTIFICATE_HAAR_SAMPLES {
        let rng = SampleRng { seed, stream: 1 + i as u64 };
        let s = build_pure_state(m, n, &haar, &BuildOptions::default(), guards, rng)?.marginal_spectrum(m)?;
        haar_max_rank = haar_max_rank.max(SpectralReport::from_eigenvalues(s, &[]).rank);
    }

    let mut failures = Vec::new();
    if report.rank as u128 != expected_rank {
        failures.push(format!("rank {} differs from N^Y3 = {expected_rank}", report.rank));
    }
    if deviation > CERTIFICATE_TOLERANCE {
        failures.push(format!("eigenvalues deviate from 1/N^Y3 by {deviation:e}"));
    }
    for r in &renyi {
        if (r.value - expected_entropy).abs() > CERTIFICATE_TOLERANCE {
            failures.push(format!("H_{} = {} differs from Y3 ln N = {expected_entropy}", r.q, r.value));
        }
    }
    if haar_max_rank as u128 > expected_rank {
        failures.push(format!("a Haar sample reached rank {haar_max_rank} > N^Y3 = {expected_rank}"));
    }
    if !failures.is_empty() {
        return Err(Error::Certificate(failures.join("; ")));
    }
    Ok(Certificate {
        n,
        y3,
        expected_rank,
        rank: report.rank,
        max_eigenvalue_deviation: deviation,
        renyi,
        expected_entropy,
        haar_samples: CERTIFICATE_HAAR_SAMPLES,
        haar_max_rank,
        passed: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn instance(sites: &[&str], pairs: &[(&str, &str, i64)], quotas: &[(i64, i64)]) -> TransportInstance {
        TransportInstance::from_document(&InstanceDocument {
            facilities: sites.iter().map(|s| s.to_string()).collect(),
            pairs: pairs.iter().map(|&(a, b, c)| PairRecord { a: a.into(), b: b.into(), count: c }).collect(),
            quotas: sites.iter().zip(quotas).map(|(s, &(a, b))| (s.to_string(), Quota { a, b })).collect(),
            n: None,
        })
        .unwrap()
    }

    fn single_edge() -> TransportInstance {
        instance(&["L1", "L2"], &[("L1", "L2", 1)], &[(1, 0), (0, 1)])
    }

    fn doubled_edge() -> TransportInstance {
        instance(&["L1", "L2"], &[("L1", "L2", 2)], &[(1, 1), (1, 1)])
    }

    fn black_hole() -> TransportInstance {
        instance(&["L", "M", "R"], &[("L", "M", 1), ("M", "R", 1)], &[(0, 1), (2, 0), (0, 1)])
    }

    #[test]
    fn parse_document() {
        let text = r#"{"facilities":["L1","L2"],"pairs":[{"a":"L1","b":"L2","count":1}],
                       "quotas":{"L1":{"A":1,"B":0},"L2":{"A":0,"B":1}},"N":2}"#;
        let inst = TransportInstance::parse(text).unwrap();
        assert_eq!(inst.n, Some(2));
        assert_eq!(inst, TransportInstance { n: Some(2), ..single_edge() });
        assert!(matches!(TransportInstance::parse("{"), Err(Error::Parse(_))));
        let bad = text.replace("\"b\":\"L2\"", "\"b\":\"L9\"");
        assert!(matches!(TransportInstance::parse(&bad), Err(Error::Validation(_))));
    }

    #[test]
    fn reductions() {
        let red = to_marginal(&single_edge()).unwrap();
        assert_eq!(red.marginal.graph().edge_count(), 1);
        assert_eq!(red.marginal.counts(), &[1, 0]);

        let local = instance(&["L"], &[], &[(1, 1)]);
        let red = to_marginal(&local).unwrap();
        assert!(red.marginal.graph().edges()[0].is_loop());
        assert_eq!(red.marginal.counts(), &[1]);

        let odd = instance(&["L1", "L2"], &[("L1", "L2", 1)], &[(1, 1), (1, 0)]);
        assert!(matches!(to_marginal(&odd), Err(Error::Infeasible(_))));
        let short = instance(&["L1", "L2"], &[("L1", "L2", 3)], &[(1, 1), (1, 1)]);
        assert!(matches!(to_marginal(&short), Err(Error::Infeasible(_))));
    }

    #[test]
    fn self_pairs_rejected() {
        let doc = InstanceDocument {
            facilities: vec!["L".into()],
            pairs: vec![PairRecord { a: "L".into(), b: "L".into(), count: 1 }],
            quotas: [("L".to_string(), Quota { a: 1, b: 1 })].into(),
            n: None,
        };
        assert!(matches!(TransportInstance::from_document(&doc), Err(Error::Validation(_))));
    }

    #[test]
    fn scenario_values() {
        assert_eq!(scenarios(&single_edge()).unwrap(), Scenarios { y1: 0, y2: 1, y3: 1 });
        let isolated = instance(&["L1", "L2"], &[], &[(2, 0), (0, 2)]);
        assert_eq!(scenarios(&isolated).unwrap(), Scenarios { y1: 0, y2: 2, y3: 0 });
        assert_eq!(scenarios(&doubled_edge()).unwrap(), Scenarios { y1: 2, y2: 2, y3: 2 });
    }

    #[test]
    fn idle_sites_dropped() {
        let inst = instance(&["L1", "X", "L2"], &[("L1", "L2", 1)], &[(1, 0), (0, 0), (0, 1)]);
        let red = to_marginal(&inst).unwrap();
        assert_eq!(red.sites, vec![0, 2]);
        assert_eq!(scenarios(&inst).unwrap().y3, 1);
    }

    #[test]
    fn routing_plans() {
        let plan = routing(&single_edge()).unwrap();
        assert_eq!(plan.sites[0].legs[0].to, Party::A);
        assert_eq!(plan.sites[1].legs[0].to, Party::B);

        let plan = routing(&instance(&["L"], &[], &[(1, 1)])).unwrap();
        let to: Vec<Party> = plan.sites[0].legs.iter().map(|l| l.to).collect();
        assert_eq!(to, vec![Party::B, Party::A]);
        assert!(plan.sites[0].legs.iter().all(|l| l.pad));

        let plan = routing(&black_hole()).unwrap();
        assert!(plan.sites[1].legs.iter().all(|l| l.to == Party::A));
        assert_eq!(plan.crossings, 2);
    }

    #[test]
    fn quotas_respected() {
        let inst = instance(&["P", "Q", "R"], &[("P", "Q", 2), ("Q", "R", 1)], &[(1, 3), (2, 1), (3, 2)]);
        let plan = routing(&inst).unwrap();
        for (site, &(s, t)) in plan.sites.iter().zip(&inst.quotas) {
            let a = site.legs.iter().filter(|l| l.to == Party::A).count();
            assert_eq!((a, site.legs.len() - a), (s, t), "{}", site.site);
        }
        assert_eq!(plan.crossings, scenarios(&inst).unwrap().y3);
    }

    #[test]
    fn permutation_unitary_moves_factors() {
        // swap of a qubit and a qutrit: |x, y> -> |y, x>
        let u = permutation_unitary(&[2, 3], &[1, 0]);
        assert_eq!(u.shape(), (6, 6));
        // input |1, 2> = index 5 maps to |2, 1> = 2*2 + 1
        assert_eq!(u[(5, 5)], C64::new(1.0, 0.0));
        let input = 3 + 1; // |1, 1>
        assert_eq!(u[(1 * 2 + 1, input)], C64::new(1.0, 0.0));
        assert!((u.adjoint() * &u - DMatrix::identity(6, 6)).norm() < 1e-15);
    }

    #[test]
    fn certificates() {
        let g = Guards::default();
        let c = certify(&single_edge(), 2, 0, &g).unwrap();
        assert_eq!((c.rank, c.expected_rank), (2, 2));
        let c = certify(&doubled_edge(), 2, 0, &g).unwrap();
        assert_eq!(c.rank, 4);
        assert!(c.renyi.iter().all(|r| (r.value - 4f64.ln()).abs() < 1e-9));
        let c = certify(&black_hole(), 2, 0, &g).unwrap();
        assert_eq!(c.rank, 4);
        let none = instance(&["L1", "L2"], &[], &[(2, 0), (0, 2)]);
        let c = certify(&none, 2, 0, &g).unwrap();
        assert_eq!((c.rank, c.expected_entropy), (1, 0.0));
    }
}
