use serde::{Deserialize, Serialize};

use super::mp::mp_xlogx;
use crate::error::{Error, Result};
use crate::flow;
use crate::graph::{Graph, Marginal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseLabel {
    Adapted,
    SingleLoop,
    OneVertex,
    #[serde(rename = "black_hole_1")]
    BlackHole1,
    #[serde(rename = "black_hole_2")]
    BlackHole2,
    #[serde(rename = "oxygen_1")]
    Oxygen1,
    #[serde(rename = "oxygen_2")]
    Oxygen2,
    Generic,
}

impl CaseLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            CaseLabel::Adapted => "adapted",
            CaseLabel::SingleLoop => "single_loop",
            CaseLabel::OneVertex => "one_vertex",
            CaseLabel::BlackHole1 => "black_hole_1",
            CaseLabel::BlackHole2 => "black_hole_2",
            CaseLabel::Oxygen1 => "oxygen_1",
            CaseLabel::Oxygen2 => "oxygen_2",
            CaseLabel::Generic => "generic",
        }
    }
}

/// `E H ≈ leading_area · ln N + leading_offset_nats - correction_nats`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyPrediction {
    pub case: CaseLabel,
    pub leading_area: usize,
    pub leading_offset_nats: f64,
    /// `None` when the correction is unknown (generic graphs).
    pub correction_nats: Option<f64>,
    pub exact: bool,
    /// For one-vertex marginals, the literal `|T'| + |G|` of the surviving vertex.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub literal_environment: Option<usize>,
}

impl EntropyPrediction {
    /// Predicted mean entropy in nats. Generic predictions return the
    /// leading term only, which is an upper bound up to `o(1)`.
    pub fn value(&self, n: usize) -> f64 {
        self.leading_area as f64 * (n as f64).ln() + self.leading_offset_nats - self.correction_nats.unwrap_or(0.0)
    }
}

/// Entropic correction `h_{Γ,S}` for cases whose limit law is a rescaled
/// Marchenko–Pastur law. `sys_ratio` and `env_ratio` are the dimension
/// factors left after the common power of `N`.
pub fn limit_correction(case: CaseLabel, sys_ratio: f64, env_ratio: f64) -> Result<f64> {
    match case {
        CaseLabel::Generic => Err(Error::Unsupported("no known limit measure for generic marginals".into())),
        CaseLabel::Adapted => Ok(0.0),
        _ => {
            let c = env_ratio / sys_ratio;
            Ok(mp_xlogx(c)? / c - c.ln().max(0.0))
        }
    }
}

fn page_case(case: CaseLabel, area: usize, sys_ratio: f64, env_ratio: f64) -> EntropyPrediction {
    EntropyPrediction {
        case,
        leading_area: area,
        leading_offset_nats: sys_ratio.min(env_ratio).ln(),
        correction_nats: Some(limit_correction(case, sys_ratio, env_ratio).expect("non-generic case")),
        exact: false,
        literal_environment: None,
    }
}

fn ratio_product(g: &Graph, legs: impl Iterator<Item = usize>) -> f64 {
    legs.map(|l| g.legs()[l].ratio as f64).product()
}

/// Case detection in priority order: adapted, single loop, one surviving
/// (or one traced) vertex, black-hole and oxygen templates, then generic.
pub fn predict_entropy(marginal: &Marginal, _n: usize) -> EntropyPrediction {
    let g = marginal.graph();
    let x = flow::max_flow(&flow::build_network(marginal)).value as usize;

    if marginal.is_adapted() {
        let mut offset = 0.0;
        let mut area = 0;
        for (e, edge) in g.edges().iter().enumerate() {
            let (a, b) = g.edge_legs(e);
            if marginal.is_traced(a) != marginal.is_traced(b) {
                area += 1;
                offset += (edge.ratio as f64).ln();
            }
        }
        debug_assert_eq!(area, x);
        return EntropyPrediction {
            case: CaseLabel::Adapted,
            leading_area: area,
            leading_offset_nats: offset,
            correction_nats: Some(0.0),
            exact: true,
            literal_environment: None,
        };
    }

    if g.vertex_count() == 1 && g.edge_count() == 1 {
        let d = g.edges()[0].ratio as f64;
        return page_case(CaseLabel::SingleLoop, 1, d, d);
    }

    if let Some(p) = one_vertex(marginal).or_else(|| one_vertex(&marginal.complement())) {
        debug_assert_eq!(p.leading_area, x);
        return p;
    }

    if let Some(p) = two_edge_template(marginal) {
        return p;
    }

    EntropyPrediction {
        case: CaseLabel::Generic,
        leading_area: x,
        leading_offset_nats: 0.0,
        correction_nats: None,
        exact: false,
        literal_environment: None,
    }
}

/// A unique vertex keeps survivors; every other vertex is fully traced.
fn one_vertex(marginal: &Marginal) -> Option<EntropyPrediction> {
    let g = marginal.graph();
    let mut live = (0..g.vertex_count()).filter(|&v| marginal.s(v) > 0);
    let v = live.next()?;
    if live.next().is_some() {
        return None;
    }
    let legs = g.legs_of(v);
    let external = |l: &usize| !g.edges()[g.legs()[*l].edge].is_loop();
    let s_legs = legs.iter().copied().filter(|&l| !marginal.is_traced(l));
    let t_legs = legs.iter().copied().filter(|&l| marginal.is_traced(l));
    let g_legs = legs.iter().copied().filter(external);
    let (s, env) = (s_legs.clone().count(), t_legs.clone().count() + g_legs.clone().count());
    let d_s = ratio_product(g, s_legs);
    let d_env = ratio_product(g, t_legs) * ratio_product(g, g_legs);

    let mut p = if s == env {
        page_case(CaseLabel::OneVertex, s, d_s, d_env)
    } else {
        let (area, d) = if s < env { (s, d_s) } else { (env, d_env) };
        EntropyPrediction {
            case: CaseLabel::OneVertex,
            leading_area: area,
            leading_offset_nats: d.ln(),
            correction_nats: Some(0.0),
            exact: false,
            literal_environment: None,
        }
    };
    p.literal_environment = Some(env);
    Some(p)
}

/// Path graph on three vertices or a doubled edge, with two traced legs.
fn two_edge_template(marginal: &Marginal) -> Option<EntropyPrediction> {
    let g = marginal.graph();
    if g.edge_count() != 2 || g.edges().iter().any(|e| e.is_loop()) {
        return None;
    }
    let oxygen = match g.vertex_count() {
        2 => true,
        3 => {
            let mut degrees: Vec<usize> = (0..3).map(|v| g.degree(v)).collect();
            degrees.sort_unstable();
            if degrees != [1, 1, 2] {
                return None;
            }
            false
        }
        _ => return None,
    };
    let traced = marginal.traced_legs();
    if traced.len() != 2 {
        return None;
    }
    let (e0, e1) = (g.legs()[traced[0]].edge, g.legs()[traced[1]].edge);
    let d0 = g.edges()[0].ratio as f64;
    let d1 = g.edges()[1].ratio as f64;
    Some(if e0 == e1 {
        // one whole edge traced: the other edge's pair against it
        let (dt, ds) = if e0 == 0 { (d0, d1) } else { (d1, d0) };
        let case = if oxygen { CaseLabel::Oxygen1 } else { CaseLabel::BlackHole1 };
        page_case(case, 2, ds * ds, dt * dt)
    } else {
        let case = if oxygen { CaseLabel::Oxygen2 } else { CaseLabel::BlackHole2 };
        page_case(case, 2, d0 * d1, d0 * d1)
    })
}
