//! Dense construction of `|Ψ⟩ = (⊗_v U_v)(⊗_e |Φ⁺_e⟩)` and its marginals.
//!
//! Loops never leave their vertex, so `U_v` only ever acts on the fixed
//! vector `|x⟩_ext ⊗ φ_loops`. The builder therefore applies the isometry
//! `W_v = U_v B_v` from the external legs of `v` into its full space. For a
//! Haar `U_v` this is a Haar isometry and is sampled as one directly.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::haar::{check_haar_dim, haar_isometry};
use super::spectrum::bipartite_spectrum;
use super::{Guards, C64};
use crate::error::{Error, Result};
use crate::graph::Marginal;

/// What acts on one vertex.
#[derive(Debug, Clone)]
pub enum VertexUnitary {
    /// A fresh Haar sample from the vertex's random lane.
    Haar,
    Identity,
    /// An explicit unitary on the vertex space, legs in `legs_of` order.
    Explicit(DMatrix<C64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildOptions {
    /// Leave fully traced vertices alone (exact: the trace absorbs them).
    pub skip_traced: bool,
    /// Leave fully surviving vertices alone (the spectrum is unchanged).
    pub skip_surviving: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { skip_traced: true, skip_surviving: true }
    }
}

/// Random lanes for one sample: stream `stream` of the ChaCha20 generator
/// keyed by `seed`, split further by vertex through the word position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleRng {
    pub seed: u64,
    pub stream: u64,
}

impl SampleRng {
    pub fn lane(&self, lane: usize) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos((lane as u128) << 40);
        rng
    }
}

/// A pure state on all legs, amplitudes row-major in leg order.
#[derive(Debug, Clone)]
pub struct PureState {
    pub amplitudes: Vec<C64>,
    pub leg_dims: Vec<usize>,
    /// Vertices whose unitary was skipped because all their legs are traced.
    pub skipped_traced: Vec<usize>,
    /// Vertices whose unitary was skipped because all their legs survive.
    pub skipped_surviving: Vec<usize>,
}

/// `ρ_S` on the surviving legs, in increasing leg order.
#[derive(Debug, Clone)]
pub struct ReducedState {
    pub matrix: DMatrix<C64>,
    pub dims: Vec<usize>,
}

impl ReducedState {
    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Axis {
    Leg(usize),
    Vertex(usize),
}

fn vertex_dim(m: &Marginal, n: usize, v: usize) -> usize {
    m.graph().legs_of(v).iter().map(|&l| m.graph().leg_dim(l, n)).product()
}

fn external_legs(m: &Marginal, v: usize) -> Vec<usize> {
    let g = m.graph();
    g.legs_of(v).iter().copied().filter(|&l| !g.edges()[g.legs()[l].edge].is_loop()).collect()
}

/// Checks the total state dimension against the guard.
pub(crate) fn check_state_dim(m: &Marginal, n: usize, guards: &Guards) -> Result<u128> {
    let g = m.graph();
    let mut total: u128 = 1;
    for l in 0..g.leg_count() {
        total = total.saturating_mul(g.leg_dim(l, n) as u128);
    }
    if total > guards.state_dim_limit {
        return Err(Error::Guard(format!(
            "state dimension {total} exceeds state_dim_limit {} (set AREALAW_STATE_DIM_LIMIT to raise it)",
            guards.state_dim_limit
        )));
    }
    Ok(total)
}

/// The operator actually applied at each vertex once skips are resolved.
pub(crate) fn resolve_ops(
    m: &Marginal,
    n: usize,
    unitaries: &[VertexUnitary],
    options: &BuildOptions,
    guards: &Guards,
) -> Result<(Vec<VertexUnitary>, Vec<usize>, Vec<usize>)> {
    let g = m.graph();
    if unitaries.len() != g.vertex_count() {
        return Err(Error::Validation(format!(
            "{} vertex unitaries given for {} vertices",
            unitaries.len(),
            g.vertex_count()
        )));
    }
    check_state_dim(m, n, guards)?;
    let mut ops = Vec::with_capacity(unitaries.len());
    let (mut skipped_traced, mut skipped_surviving) = (Vec::new(), Vec::new());
    for (v, u) in unitaries.iter().enumerate() {
        let dim = vertex_dim(m, n, v);
        let op = match u {
            VertexUnitary::Haar if options.skip_traced && m.s(v) == 0 => {
                skipped_traced.push(v);
                VertexUnitary::Identity
            }
            VertexUnitary::Haar if options.skip_surviving && m.t(v) == 0 => {
                skipped_surviving.push(v);
                VertexUnitary::Identity
            }
            VertexUnitary::Haar => {
                check_haar_dim(dim, guards)?;
                VertexUnitary::Haar
            }
            VertexUnitary::Explicit(u) if u.shape() != (dim, dim) => {
                return Err(Error::Validation(format!(
                    "unitary for vertex {} is {}×{}, vertex space has dimension {dim}",
                    g.name(v),
                    u.nrows(),
                    u.ncols()
                )));
            }
            other => other.clone(),
        };
        ops.push(op);
    }
    Ok((ops, skipped_traced, skipped_surviving))
}

/// Builds the pure graph state for one sample.
pub fn build_pure_state(
    m: &Marginal,
    n: usize,
    unitaries: &[VertexUnitary],
    options: &BuildOptions,
    guards: &Guards,
    rng: SampleRng,
) -> Result<PureState> {
    if n == 0 {
        return Err(Error::Validation("N must be positive".into()));
    }
    let (ops, skipped_traced, skipped_surviving) = resolve_ops(m, n, unitaries, options, guards)?;
    let g = m.graph();

    // maximally entangled pairs on the non-loop edges, legs 2e and 2e+1 adjacent
    let mut data = vec![C64::new(1.0, 0.0)];
    let mut axes = Vec::new();
    let mut dims = Vec::new();
    for (e, edge) in g.edges().iter().enumerate() {
        if edge.is_loop() {
            continue;
        }
        let d = g.leg_dim(2 * e, n);
        let amp = 1.0 / (d as f64).sqrt();
        let mut next = vec![C64::new(0.0, 0.0); data.len() * d * d];
        for (i, &z) in data.iter().enumerate() {
            for k in 0..d {
                next[i * d * d + k * d + k] = z * amp;
            }
        }
        data = next;
        axes.extend([Axis::Leg(2 * e), Axis::Leg(2 * e + 1)]);
        dims.extend([d, d]);
    }

    for (v, op) in ops.iter().enumerate() {
        let ext = external_legs(m, v);
        let front: Vec<usize> =
            ext.iter().map(|&l| axes.iter().position(|&a| a == Axis::Leg(l)).expect("leg axis")).collect();
        let rest_pos: Vec<usize> = (0..axes.len()).filter(|i| !front.contains(i)).collect();
        let perm: Vec<usize> = front.iter().chain(&rest_pos).copied().collect();
        data = permute_axes(&data, &dims, &perm);
        let r: usize = front.iter().map(|&i| dims[i]).product();
        let rest: usize = rest_pos.iter().map(|&i| dims[i]).product();
        let dim_v = vertex_dim(m, n, v);

        data = match op {
            VertexUnitary::Haar => {
                let w = haar_isometry(dim_v, r, &mut rng.lane(v));
                row_major_product(&w, data, rest)
            }
            VertexUnitary::Identity => embed(m, n, v, &ext, &data, rest),
            VertexUnitary::Explicit(u) => row_major_product(u, embed(m, n, v, &ext, &data, rest), rest),
        };
        axes = std::iter::once(Axis::Vertex(v)).chain(rest_pos.iter().map(|&i| axes[i])).collect();
        dims = std::iter::once(dim_v).chain(rest_pos.iter().map(|&i| dims[i])).collect();
    }

    // split vertex axes into legs, then sort legs
    let mut leg_axes = Vec::new();
    for a in &axes {
        match *a {
            Axis::Vertex(v) => leg_axes.extend(g.legs_of(v).iter().copied()),
            Axis::Leg(_) => unreachable!("every non-loop leg belongs to a vertex"),
        }
    }
    let leg_dims: Vec<usize> = (0..g.leg_count()).map(|l| g.leg_dim(l, n)).collect();
    let current_dims: Vec<usize> = leg_axes.iter().map(|&l| leg_dims[l]).collect();
    let perm: Vec<usize> =
        (0..g.leg_count()).map(|l| leg_axes.iter().position(|&x| x == l).expect("leg present")).collect();
    let amplitudes = permute_axes(&data, &current_dims, &perm);
    Ok(PureState { amplitudes, leg_dims, skipped_traced, skipped_surviving })
}

/// `W · X` for `X` stored row-major with `rest` columns; returns row-major.
fn row_major_product(w: &DMatrix<C64>, x: Vec<C64>, rest: usize) -> Vec<C64> {
    let rows = x.len() / rest;
    debug_assert_eq!(rows, w.ncols());
    let xt = DMatrix::from_vec(rest, rows, x);
    (xt * w.transpose()).data.into()
}

/// Applies `B_v: |x⟩_ext ↦ |x⟩_ext ⊗ φ_loops`, placing each leg at its
/// position inside the vertex space.
fn embed(m: &Marginal, n: usize, v: usize, ext: &[usize], x: &[C64], rest: usize) -> Vec<C64> {
    let g = m.graph();
    let legs = g.legs_of(v);
    let ldims: Vec<usize> = legs.iter().map(|&l| g.leg_dim(l, n)).collect();
    let mut strides = vec![1usize; legs.len()];
    for i in (0..legs.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * ldims[i + 1];
    }
    let stride_of = |leg: usize| strides[legs.iter().position(|&l| l == leg).expect("leg of v")];

    // offsets of φ_loops, one loop edge at a time
    let mut loop_offsets = vec![0usize];
    let mut amp = 1.0;
    for (e, edge) in g.edges().iter().enumerate() {
        if !(edge.is_loop() && edge.u == v) {
            continue;
        }
        let (a, b) = g.edge_legs(e);
        let d = g.leg_dim(a, n);
        let step = stride_of(a) + stride_of(b);
        loop_offsets = loop_offsets.iter().flat_map(|&o| (0..d).map(move |k| o + k * step)).collect();
        amp /= (d as f64).sqrt();
    }

    let ext_strides: Vec<usize> = ext.iter().map(|&l| stride_of(l)).collect();
    let ext_dims: Vec<usize> = ext.iter().map(|&l| g.leg_dim(l, n)).collect();
    let r: usize = ext_dims.iter().product();
    let dim_v: usize = ldims.iter().product();
    let mut out = vec![C64::new(0.0, 0.0); dim_v * rest];
    let mut digits = vec![0usize; ext.len()];
    for xi in 0..r {
        let base: usize = digits.iter().zip(&ext_strides).map(|(d, s)| d * s).sum();
        let src = &x[xi * rest..(xi + 1) * rest];
        for &o in &loop_offsets {
            let dst = &mut out[(base + o) * rest..(base + o + 1) * rest];
            for (t, &s) in dst.iter_mut().zip(src) {
                *t += s * amp;
            }
        }
        for k in (0..digits.len()).rev() {
            digits[k] += 1;
            if digits[k] < ext_dims[k] {
                break;
            }
            digits[k] = 0;
        }
    }
    out
}

/// Reorders the axes of a row-major tensor: output axis `i` is input axis `perm[i]`.
pub(crate) fn permute_axes<T: Copy + Default>(data: &[T], dims: &[usize], perm: &[usize]) -> Vec<T> {
    if perm.iter().enumerate().all(|(i, &p)| i == p) {
        return data.to_vec();
    }
    let k = dims.len();
    let mut in_strides = vec![1usize; k];
    for i in (0..k.saturating_sub(1)).rev() {
        in_strides[i] = in_strides[i + 1] * dims[i + 1];
    }
    let out_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let steps: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
    let mut out = vec![T::default(); data.len()];
    let mut idx = vec![0usize; k];
    let mut offset = 0usize;
    for slot in out.iter_mut() {
        *slot = data[offset];
        for a in (0..k).rev() {
            idx[a] += 1;
            offset += steps[a];
            if idx[a] < out_dims[a] {
                break;
            }
            offset -= steps[a] * out_dims[a];
            idx[a] = 0;
        }
    }
    out
}

impl PureState {
    /// Amplitudes regrouped as a `dim_S × dim_T` row-major array.
    pub fn split(&self, m: &Marginal) -> (Vec<C64>, usize, usize) {
        let surv = m.surviving_legs();
        let traced = m.traced_legs();
        let perm: Vec<usize> = surv.iter().chain(&traced).copied().collect();
        let dim_s = surv.iter().map(|&l| self.leg_dims[l]).product();
        let dim_t = traced.iter().map(|&l| self.leg_dims[l]).product();
        (permute_axes(&self.amplitudes, &self.leg_dims, &perm), dim_s, dim_t)
    }

    /// Nonzero part of the spectrum of `ρ_S` (`min(dim_S, dim_T)` values).
    pub fn marginal_spectrum(&self, m: &Marginal) -> Result<Vec<f64>> {
        let (psi, dim_s, dim_t) = self.split(m);
        bipartite_spectrum(&psi, dim_s, dim_t)
    }

    pub fn reduced_state(&self, m: &Marginal) -> ReducedState {
        let (psi, dim_s, dim_t) = self.split(m);
        let a = DMatrix::from_column_slice(dim_t, dim_s, &psi);
        let matrix = (a.adjoint() * a).transpose();
        ReducedState { matrix, dims: m.surviving_legs().iter().map(|&l| self.leg_dims[l]).collect() }
    }
}

/// `ρ_S = tr_T |Ψ⟩⟨Ψ|` for one draw of the unitaries.
pub fn build_reduced_state(
    m: &Marginal,
    n: usize,
    unitaries: &[VertexUnitary],
    options: &BuildOptions,
    guards: &Guards,
    rng: SampleRng,
) -> Result<ReducedState> {
    Ok(build_pure_state(m, n, unitaries, options, guards, rng)?.reduced_state(m))
}
