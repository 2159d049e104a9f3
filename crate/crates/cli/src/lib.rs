//! Experiment harness: config files, single runs, momentum sweeps, parameter
//! planning and the self-check suite.

pub mod check;
pub mod commands;
pub mod config;
pub mod experiment;
pub mod output;

use thiserror::Error;

use config::ConfigError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("run diverged after t = {0}")]
    Diverged(u64),
    #[error("infeasible plan: {constraint} fails")]
    Infeasible { constraint: String, report: String },
    #[error("{0} check(s) failed")]
    CheckFailed(usize),
}

impl HarnessError {
    /// 2 config or i/o, 3 divergence, 4 infeasible plan, 5 failed check.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Io(_) => 2,
            HarnessError::Diverged(_) => 3,
            HarnessError::Infeasible { .. } => 4,
            HarnessError::CheckFailed(_) => 5,
        }
    }
}
