//! Config-driven runs, artifact manifests, plot tables and verification.

mod config;
mod manifest;
mod plot;
mod run;

pub use config::{DataFamily, Expr, Operation, RunConfig, SetSpec, Tolerances};
pub use manifest::{ArtifactEntry, RunManifest, StageTime, MANIFEST_NAME};
pub use plot::{emit_plotdata, verify, PlotSelector, VerifyReport};
pub use run::{run, run_in, RunOutcome};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Schema(String),
    #[error("unknown expression id {0:?}")]
    UnknownExpression(String),
    #[error("solver: {0}")]
    Solver(#[from] crate::error::Error),
    #[error("artifact: {0}")]
    Artifact(String),
    #[error("verification failed: {0}")]
    Verify(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Schema(_) => 2,
            HarnessError::UnknownExpression(_) => 3,
            HarnessError::Solver(_) | HarnessError::Artifact(_) | HarnessError::Io(_) => 4,
            HarnessError::Verify(_) => 1,
        }
    }
}
