use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::state::ReducedState;
use super::C64;
use crate::error::{Error, Result};

/// Eigenvalues below this fraction of the largest one are set to zero.
pub const CLAMP_RELATIVE: f64 = 1e-12;
/// Eigenvalues above this fraction of the largest one count towards the rank.
pub const RANK_RELATIVE: f64 = 1e-9;

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenyiValue {
    pub q: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    /// Descending and clamped. Zeros beyond the smaller side of the
    /// bipartition are not stored.
    pub eigenvalues: Vec<f64>,
    #[serde(rename = "H")]
    pub entropy: f64,
    pub renyi: Vec<RenyiValue>,
    pub rank: usize,
}

impl SpectralReport {
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>, q_list: &[f64]) -> Self {
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        let top = eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
        for x in eigenvalues.iter_mut() {
            if *x < CLAMP_RELATIVE * top {
                *x = 0.0;
            }
        }
        let rank = eigenvalues.iter().filter(|&&x| x > RANK_RELATIVE * top).count();
        let entropy = von_neumann(&eigenvalues);
        let renyi = q_list.iter().map(|&q| RenyiValue { q, value: renyi(&eigenvalues, q, rank, entropy) }).collect();
        SpectralReport { eigenvalues, entropy, renyi, rank }
    }

    pub fn renyi(&self, q: f64) -> Option<f64> {
        self.renyi.iter().find(|r| r.q == q).map(|r| r.value)
    }
}

fn von_neumann(eigenvalues: &[f64]) -> f64 {
    -eigenvalues.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

fn renyi(eigenvalues: &[f64], q: f64, rank: usize, entropy: f64) -> f64 {
    if q == 0.0 {
        (rank as f64).ln()
    } else if q == 1.0 {
        entropy
    } else if q.is_infinite() {
        -eigenvalues.first().copied().unwrap_or(1.0).ln()
    } else {
        eigenvalues.iter().filter(|&&x| x > 0.0).map(|&x| x.powf(q)).sum::<f64>().ln() / (1.0 - q)
    }
}

pub fn spectral_report(rho: &ReducedState, q_list: &[f64]) -> Result<SpectralReport> {
    let eig = hermitian_eigenvalues(rho.matrix.clone())?;
    Ok(SpectralReport::from_eigenvalues(eig, q_list))
}

/// Eigenvalues of the marginal on the first factor of a pure state given
/// row-major as a `dim_s × dim_t` array, through the smaller Gram matrix.
/// Returns `min(dim_s, dim_t)` values.
pub fn bipartite_spectrum(psi: &[C64], dim_s: usize, dim_t: usize) -> Result<Vec<f64>> {
    assert_eq!(psi.len(), dim_s * dim_t);
    // column s of `a` holds the amplitudes psi[s, ·]
    let a = DMatrix::from_column_slice(dim_t, dim_s, psi);
    let gram = if dim_s <= dim_t { a.adjoint() * &a } else { &a * a.adjoint() };
    hermitian_eigenvalues(gram)
}

pub(crate) fn hermitian_eigenvalues(m: DMatrix<C64>) -> Result<Vec<f64>> {
    let n = m.nrows();
    if n == 1 {
        return Ok(vec![m[(0, 0)].re]);
    }
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    match SymmetricEigen::try_new(m, EIGEN_EPS, EIGEN_MAX_ITER) {
        Some(e) => Ok(e.eigenvalues.iter().copied().collect()),
        None => Err(Error::Numeric(format!(
            "Hermitian eigensolver did not converge on a {n}×{n} matrix (max entry modulus {scale:.3e})"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn maximally_mixed() {
        let r = SpectralReport::from_eigenvalues(vec![0.25; 4], &[0.0, 0.5, 1.0, 2.0, 3.0]);
        assert_eq!(r.rank, 4);
        for q in &r.renyi {
            assert!(close(q.value, 4f64.ln()), "q={}", q.q);
        }
    }

    #[test]
    fn pure() {
        let r = SpectralReport::from_eigenvalues(vec![0.0, 1.0, 1e-17], &[0.0, 2.0]);
        assert_eq!(r.eigenvalues, vec![1.0, 0.0, 0.0]);
        assert_eq!((r.rank, r.entropy), (1, 0.0));
        assert_eq!(r.renyi(2.0), Some(0.0));
    }

    #[test]
    fn renyi_is_non_increasing() {
        let r = SpectralReport::from_eigenvalues(vec![0.5, 0.3, 0.15, 0.05], &[0.0, 0.5, 1.0, 2.0, 4.0, f64::INFINITY]);
        assert!(r.renyi.windows(2).all(|w| w[0].value >= w[1].value - 1e-15));
        assert!(close(r.renyi(1.0).unwrap(), r.entropy));
    }

    #[test]
    fn bipartite_matches_both_sides() {
        // product of a Bell pair and |0>: spectrum (1/2, 1/2)
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let z = C64::new(0.0, 0.0);
        // system = qubit A, environment = qubits B and C with C in |0>
        let psi = [C64::new(h, 0.0), z, z, z, z, z, C64::new(h, 0.0), z];
        let mut s = bipartite_spectrum(&psi, 2, 4).unwrap();
        s.sort_by(f64::total_cmp);
        assert!(close(s[0], 0.5) && close(s[1], 0.5));
        // same state read the other way round
        let mut t = vec![z; 8];
        for i in 0..2 {
            for j in 0..4 {
                t[j * 2 + i] = psi[i * 4 + j];
            }
        }
        let mut s2 = bipartite_spectrum(&t, 4, 2).unwrap();
        s2.sort_by(f64::total_cmp);
        assert_eq!(s2.len(), 2);
        assert!(close(s2[0], 0.5) && close(s2[1], 0.5));
    }
}
