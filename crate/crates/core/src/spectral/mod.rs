//! Marchenko–Pastur quantities and asymptotic entropy predictions.

mod mp;
mod predict;

pub use mp::{mp_moment, mp_xlogx, page_entropy, MarchenkoPastur};
pub use predict::{limit_correction, predict_entropy, CaseLabel, EntropyPrediction};
