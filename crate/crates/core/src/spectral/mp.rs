use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::nc;

/// The Marchenko–Pastur (free Poisson) law `π_c`: mean `c`, an atom of mass
/// `max(1 - c, 0)` at zero and a density on `[(1-√c)², (1+√c)²]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarchenkoPastur {
    c: f64,
}

impl MarchenkoPastur {
    pub fn new(c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::Validation(format!("Marchenko–Pastur parameter must be positive, got {c}")));
        }
        Ok(MarchenkoPastur { c })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn support(&self) -> (f64, f64) {
        let r = self.c.sqrt();
        ((1.0 - r).powi(2), (1.0 + r).powi(2))
    }

    pub fn atom(&self) -> f64 {
        (1.0 - self.c).max(0.0)
    }

    /// Density of the absolutely continuous part.
    pub fn density(&self, x: f64) -> f64 {
        let (a, b) = self.support();
        if x <= a || x >= b || x <= 0.0 {
            return 0.0;
        }
        ((b - x) * (x - a)).sqrt() / (2.0 * PI * x)
    }

    /// `Σ_{σ ∈ NC(p)} c^{#σ}`.
    pub fn moment(&self, p: usize) -> Result<f64> {
        let hist = nc::block_count_histogram(p)?;
        Ok(hist.iter().enumerate().map(|(k, &n)| n as f64 * self.c.powi(k as i32)).sum())
    }

    /// Closed form of `∫ x ln x dπ_c`.
    pub fn xlogx(&self) -> f64 {
        let c = self.c;
        if c >= 1.0 {
            0.5 + c * c.ln()
        } else {
            c * c / 2.0
        }
    }

    /// `∫ f dπ_c` by the midpoint rule in `θ`, with `x = 1 + c + 2√c cos θ`.
    /// The substitution removes the square-root edges of the density.
    pub fn integrate(&self, f: impl Fn(f64) -> f64, nodes: usize) -> f64 {
        let c = self.c;
        let r = c.sqrt();
        let h = PI / nodes as f64;
        let mut acc = 0.0;
        for i in 0..nodes {
            let theta = (i as f64 + 0.5) * h;
            let x = 1.0 + c + 2.0 * r * theta.cos();
            if x > 0.0 {
                let s = theta.sin();
                acc += f(x) * 2.0 * c * s * s / (PI * x);
            }
        }
        let atom = self.atom();
        let atom_term = if atom > 0.0 { atom * f(0.0) } else { 0.0 };
        atom_term + acc * h
    }
}

pub fn mp_moment(c: f64, p: usize) -> Result<f64> {
    MarchenkoPastur::new(c)?.moment(p)
}

pub fn mp_xlogx(c: f64) -> Result<f64> {
    Ok(MarchenkoPastur::new(c)?.xlogx())
}

/// Asymptotic mean entropy of one side of a random bipartite pure state,
/// `ln D_min - D_min / (2 D_max)`.
pub fn page_entropy(dim_system: f64, dim_environment: f64) -> f64 {
    let lo = dim_system.min(dim_environment);
    let hi = dim_system.max(dim_environment);
    lo.ln() - lo / (2.0 * hi)
}
