//! Pipeline behind the `thermid` binary: `synth`, `identify`, `estimate`
//! and `report`, driven by a [`PipelineConfig`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;

pub use commands::{cmd_estimate, cmd_identify, cmd_report, cmd_synth};
pub use config::PipelineConfig;

use thermid::ErrorKind;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] thermid::Error),
}

impl CliError {
    /// 2 for configuration, 3 for data and 4 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Data => 3,
                ErrorKind::Numerical => 4,
            },
        }
    }
}
