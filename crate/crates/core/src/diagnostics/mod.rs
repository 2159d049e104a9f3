//! Trajectory diagnostics: property monitors, region labels and the exact
//! displacement decomposition around a boosted step.

mod decompose;
mod monitors;

use thiserror::Error;

use crate::linalg::LinalgError;
use crate::problems::ProblemError;

pub use decompose::{decompose_displacement, Decomposition, DisplacementWindow};
pub use monitors::{
    apag_ratio, apcg_ratio, classify, cnc_projection, evaluate_monitors, grace_value,
    ApagMonitor, ApcgMonitor, ApcgValue, MonitorConfig, MonitorValues, RegionLabel, GRAD_FLOOR,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error("gradient is zero")]
    ZeroGradient,
    #[error("eigenvector is not unit length (norm {0})")]
    InvalidEigenvector(f64),
    #[error("window does not start at a boosted step: {0}")]
    MisalignedWindow(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionError { expected: usize, got: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}
