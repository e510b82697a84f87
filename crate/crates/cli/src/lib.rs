//! Configuration-driven front end for the constraint solvers: reads a TOML
//! run description, dispatches to a solver, and writes field files plus a
//! JSON report.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod report;
pub mod run;
pub mod seed;

use constraints_core::fields::FieldError;
use constraints_core::SolveError;
use thiserror::Error;

pub use config::{Mode, RunConfig};
pub use report::RunReport;
pub use run::{run, RunOutcome};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cannot read input field: {0}")]
    Input(FieldError),
    #[error("cannot write output: {0}")]
    Output(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("check failed: {0}")]
    Check(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input(_) => EXIT_CONFIG,
            CliError::Solve(e) if e.is_infeasible() => EXIT_INFEASIBLE,
            CliError::Solve(SolveError::InvalidSeed(_) | SolveError::InvalidArgument(_)) => EXIT_CONFIG,
            CliError::Solve(_) | CliError::Output(_) | CliError::Check(_) => EXIT_SOLVER,
        }
    }

    pub fn kind(&self) -> String {
        match self {
            CliError::Config(_) => "config".into(),
            CliError::Input(_) => "input".into(),
            CliError::Output(_) => "output".into(),
            CliError::Check(_) => "check".into(),
            CliError::Solve(e) => {
                let dbg = format!("{e:?}");
                let name = dbg.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("Solve");
                name.to_owned()
            }
        }
    }
}
