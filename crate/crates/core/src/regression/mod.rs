//! Latent-variable regression: NIPALS PLS1, a PCA + ridge baseline, and
//! leave-one-out selection of the PLS component count.

mod pls;
mod ridge;
mod selection;

pub use pls::{pls_fit, pls_predict, PlsModel, PLS_MODEL_VERSION};
pub use ridge::{pca, pca_ridge_fit, ridge_fit, PcaBasis, RidgeModel};
pub use selection::{select_components, ComponentSelection};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RegressionError {
    #[error("need at least 2 training rows, got {0}")]
    TooFewRows(usize),
    #[error("requested {requested} components, at most {max} allowed")]
    InvalidComponents { requested: usize, max: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("non-finite input")]
    NonFinite,
    #[error("no covariance between inputs and target; no component extracted")]
    Degenerate,
    #[error("singular system while assembling coefficients")]
    Singular,
    #[error("decomposition failed")]
    Decomposition,
    #[error("lambda must be finite and >= 0, got {0}")]
    InvalidLambda(f64),
    #[error("no feasible component count in {start}..={end}")]
    EmptyRange { start: usize, end: usize },
    #[error("model file: {0}")]
    Format(String),
}
