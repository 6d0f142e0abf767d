//! Ginibre matrices and Haar-distributed unitaries and isometries.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{Guards, C64};
use crate::error::{Error, Result};

/// Matrix of i.i.d. standard complex Gaussians (`E|g|² = 1`).
pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<C64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * s, im * s)
    })
}

/// The first `cols` columns of a Haar unitary of size `dim`: QR of a
/// Ginibre matrix with the phases of `diag(R)` moved into `Q`.
pub fn haar_isometry<R: Rng + ?Sized>(dim: usize, cols: usize, rng: &mut R) -> DMatrix<C64> {
    assert!(cols <= dim && cols > 0, "isometry needs 0 < cols <= dim");
    let qr = ginibre(dim, cols, rng).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..cols {
        let d = r[(j, j)];
        let norm = d.norm();
        let phase = if norm > 0.0 { d / norm } else { C64::new(1.0, 0.0) };
        let mut col = q.column_mut(j);
        col *= phase;
    }
    q
}

pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R, guards: &Guards) -> Result<DMatrix<C64>> {
    check_haar_dim(dim, guards)?;
    Ok(haar_isometry(dim, dim, rng))
}

pub(crate) fn check_haar_dim(dim: usize, guards: &Guards) -> Result<()> {
    if dim == 0 {
        return Err(Error::Validation("unitary dimension must be positive".into()));
    }
    if dim > guards.haar_dim_limit {
        return Err(Error::Guard(format!(
            "Haar unitary of dimension {dim} exceeds haar_dim_limit {} (set AREALAW_HAAR_DIM_LIMIT to raise it)",
            guards.haar_dim_limit
        )));
    }
    Ok(())
}
