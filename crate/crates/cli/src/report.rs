//! The JSON run report.

use std::path::PathBuf;

use num_rational::BigRational;
use serde::Serialize;

use constraints_core::continuation::{ContinuationRecord, QuadraticC0, Termination};
use constraints_core::coupled::{BootstrapTable, IterationRecord, StabilityReport};
use constraints_core::diagnostics::{ConstraintResiduals, SystemResiduals};
use constraints_core::ConformalSeed;

use crate::config::{Mode, RunConfig};

/// Bumped whenever a field is renamed or removed.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub program: &'static str,
    pub version: &'static str,
    pub mode: Mode,
    pub config: RunConfig,
    pub status: Status,
    pub timing: Timing,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<SeedSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stability: Option<StabilityReport<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed_point: Option<FixedPointSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub continuation: Option<ContinuationSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lichnerowicz: Option<LichnerowiczSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vector: Option<VectorSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tt: Option<TtSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constraints: Option<ConstraintResiduals<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemResiduals<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<BootstrapSection>,
    /// Every measured invariant with the threshold it was held to.
    pub checks: Vec<Check>,
    pub outputs: Vec<PathBuf>,
}

impl RunReport {
    pub fn new(config: &RunConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            program: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            mode: config.mode,
            config: config.clone(),
            status: Status { exit_code: 0, success: true, error_kind: None, message: None },
            timing: Timing::default(),
            seed: None,
            stability: None,
            fixed_point: None,
            continuation: None,
            lichnerowicz: None,
            vector: None,
            tt: None,
            constraints: None,
            system: None,
            bootstrap: None,
            checks: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn check(&mut self, name: &str, value: f64, threshold: f64) -> bool {
        let passed = value <= threshold;
        self.checks.push(Check { name: name.to_owned(), value, threshold, passed });
        passed
    }

    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn find_check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Status {
    pub exit_code: i32,
    pub success: bool,
    pub error_kind: Option<String>,
    pub message: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Timing {
    pub total_seconds: f64,
    pub phases: Vec<Phase>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Phase {
    pub name: String,
    pub seconds: f64,
}

/// A measured quantity and the bound it must not exceed.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedSummary {
    pub n: usize,
    pub m: usize,
    pub sigma_norm: f64,
    pub tau_mass: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    pub eta_min: f64,
    pub p: f64,
    pub t: f64,
    pub parity: bool,
}

impl SeedSummary {
    pub fn of(seed: &ConformalSeed) -> Self {
        Self {
            n: seed.n(),
            m: seed.grid().m(),
            sigma_norm: seed.sigma_norm(),
            tau_mass: seed.tau_mass(),
            tau_min: seed.tau.min(),
            tau_max: seed.tau.max(),
            eta_min: seed.eta.min(),
            p: seed.p,
            t: seed.t,
            parity: seed.parity,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FixedPointSection {
    pub guarded: bool,
    pub iterations: Vec<IterationRecord>,
    pub phi_min: f64,
    pub phi_max: f64,
    pub max_obstruction: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitRows {
    pub psi: f64,
    pub ortho: f64,
    pub w: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuationSection {
    pub quadratic: QuadraticC0<f64>,
    pub unique_positive: bool,
    pub positive_roots: Vec<f64>,
    pub two_positive_roots: bool,
    pub c0: f64,
    pub limit_obstruction: Vec<f64>,
    /// Row residuals of the `lambda = 0` system.
    pub limit_residuals: LimitRows,
    pub records: Vec<ContinuationRecord>,
    pub termination: Termination,
    pub lambda_reached: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LichnerowiczSection {
    pub newton_iterations: usize,
    pub relative_residual: f64,
    pub used_fallback: bool,
    pub bracket_margin: f64,
    pub lambda_minus: f64,
    pub c_minus: f64,
    pub c_plus: f64,
    pub phi_min: f64,
    pub phi_max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VectorSection {
    pub iterations: usize,
    pub relative_residual: f64,
    pub obstruction: Vec<f64>,
    pub obstruction_norm: f64,
    pub w_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TtSection {
    pub norm_l2: f64,
    pub trace_linf: f64,
    pub divergence_l2: f64,
}

/// Exact values as `num/den` strings alongside the `f64` table.
#[derive(Debug, Clone, Serialize)]
pub struct ExactBootstrap {
    pub t: String,
    pub t0: String,
    pub p0: Option<String>,
    pub qbar: Option<String>,
    pub q: Vec<String>,
}

impl ExactBootstrap {
    pub fn of(table: &BootstrapTable<BigRational>) -> Self {
        Self {
            t: table.t.to_string(),
            t0: table.t0.to_string(),
            p0: table.p0.as_ref().map(ToString::to_string),
            qbar: table.qbar.as_ref().map(ToString::to_string),
            q: table.rows.iter().map(|r| r.q.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BootstrapSection {
    pub exact: ExactBootstrap,
    pub table: BootstrapTable<f64>,
    pub strictly_increasing: bool,
    pub constant: bool,
    pub escapes: bool,
}
