//! Monte Carlo realization of the random graph-state ensemble.

mod experiment;
pub mod haar;
mod spectrum;
mod state;

pub use experiment::{
    empirical_moments, empirical_vs_mp, run_experiment, run_wishart, write_spectra_csv, ExperimentConfig,
    MCReport, RenyiMean, SamplingMethod,
};
pub use spectrum::{bipartite_spectrum, spectral_report, SpectralReport};
pub use state::{
    build_pure_state, build_reduced_state, BuildOptions, PureState, ReducedState, SampleRng, VertexUnitary,
};

use crate::error::{Error, Result};

pub type C64 = nalgebra::Complex<f64>;

pub const DEFAULT_STATE_DIM_LIMIT: u128 = 1 << 24;
pub const DEFAULT_HAAR_DIM_LIMIT: usize = 4096;

/// Resource limits checked before any allocation or sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Guards {
    pub state_dim_limit: u128,
    pub haar_dim_limit: usize,
}

impl Default for Guards {
    fn default() -> Self {
        Guards { state_dim_limit: DEFAULT_STATE_DIM_LIMIT, haar_dim_limit: DEFAULT_HAAR_DIM_LIMIT }
    }
}

impl Guards {
    /// Defaults, overridden by `AREALAW_STATE_DIM_LIMIT` / `AREALAW_HAAR_DIM_LIMIT`.
    pub fn from_env() -> Result<Self> {
        let mut g = Guards::default();
        if let Ok(v) = std::env::var("AREALAW_STATE_DIM_LIMIT") {
            g.state_dim_limit = v
                .trim()
                .parse()
                .map_err(|_| Error::Validation(format!("AREALAW_STATE_DIM_LIMIT={v:?} is not an integer")))?;
        }
        if let Ok(v) = std::env::var("AREALAW_HAAR_DIM_LIMIT") {
            g.haar_dim_limit = v
                .trim()
                .parse()
                .map_err(|_| Error::Validation(format!("AREALAW_HAAR_DIM_LIMIT={v:?} is not an integer")))?;
        }
        Ok(g)
    }
}
