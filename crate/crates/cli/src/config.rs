//! Run configuration, read from TOML.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Zero};
use serde::{Deserialize, Serialize};

use constraints_core::continuation::RootPolicy;
use constraints_core::presets::Preset;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    FixedPoint,
    Continuation,
    Lichnerowicz,
    Vector,
    MakeTt,
    Check,
    Stability,
    Bootstrap,
}

impl Mode {
    pub const ALL: [Mode; 8] = [
        Mode::FixedPoint,
        Mode::Continuation,
        Mode::Lichnerowicz,
        Mode::Vector,
        Mode::MakeTt,
        Mode::Check,
        Mode::Stability,
        Mode::Bootstrap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::FixedPoint => "fixed-point",
            Mode::Continuation => "continuation",
            Mode::Lichnerowicz => "lichnerowicz",
            Mode::Vector => "vector",
            Mode::MakeTt => "make-tt",
            Mode::Check => "check",
            Mode::Stability => "stability",
            Mode::Bootstrap => "bootstrap",
        }
    }
}

impl FromStr for Mode {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Mode::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| CliError::Config(format!("unknown mode `{s}`")))
    }
}

/// One term `cos * cos(2 pi k.x) + sin * sin(2 pi k.x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierTerm {
    pub k: Vec<i64>,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

/// Scalar field given by a file or a trigonometric series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldSource {
    File(PathBuf),
    Series {
        #[serde(default)]
        constant: f64,
        #[serde(default)]
        terms: Vec<FourierTerm>,
    },
}

/// TT tensor read from a file or generated by projecting a random tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SigmaSource {
    File(PathBuf),
    Generated {
        #[serde(default = "default_rng_seed")]
        rng_seed: u64,
        #[serde(default = "default_kmax")]
        kmax: usize,
    },
}

fn default_rng_seed() -> u64 {
    0x7a11
}

fn default_kmax() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeedConfig {
    pub preset: Option<Preset>,
    /// Target `|sigma|_{L^2}` for presets and generated tensors.
    pub sigma_norm: Option<f64>,
    /// Multiplies `sigma` by `lambda^N` after construction.
    pub lambda: Option<f64>,
    pub p: f64,
    pub t: f64,
    pub rng_seed: u64,
    /// Required for custom seeds that should run in parity mode.
    pub parity: Option<bool>,
    pub tau: Option<FieldSource>,
    pub eta: Option<FieldSource>,
    pub sigma: Option<SigmaSource>,
}

impl Default for SeedConfig {
    fn default() -> Self {
        Self {
            preset: None,
            sigma_norm: None,
            lambda: None,
            p: 4.0,
            t: 4.0,
            rng_seed: default_rng_seed(),
            parity: None,
            tau: None,
            eta: None,
            sigma: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub linear: f64,
    pub linear_max_iter: usize,
    pub lichnerowicz: f64,
    pub fixpoint: f64,
    pub fixpoint_max_iter: usize,
    pub newton: f64,
    /// Threshold for constraint residuals in `check` mode.
    pub check: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            linear: 1e-11,
            linear_max_iter: 10_000,
            lichnerowicz: 1e-10,
            fixpoint: 1e-12,
            fixpoint_max_iter: 200,
            newton: 1e-11,
            check: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilityConfig {
    pub probes: usize,
    pub safety: f64,
    pub sobolev_trials: usize,
    pub rng_seed: u64,
    /// Check fixed-point iterates against the admissible set when feasible.
    pub guard: bool,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self { probes: 64, safety: 2.0, sobolev_trials: 64, rng_seed: 0x5eed, guard: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContinuationConfig {
    pub lambda_max: f64,
    pub checkpoints: Vec<f64>,
    pub root_policy: RootPolicy,
    pub initial_step: f64,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        Self { lambda_max: 0.05, checkpoints: Vec::new(), root_policy: RootPolicy::Unique, initial_step: 1e-2 }
    }
}

/// An exponent given as a float or as an exact fraction such as `"12/7"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExactValue {
    Float(f64),
    Text(String),
}

impl ExactValue {
    pub fn to_rational(&self) -> Result<BigRational, CliError> {
        match self {
            ExactValue::Float(v) => BigRational::from_f64(*v).ok_or_else(|| CliError::Config(format!("{v} is not finite"))),
            ExactValue::Text(s) => parse_rational(s),
        }
    }
}

fn parse_rational(s: &str) -> Result<BigRational, CliError> {
    let bad = || CliError::Config(format!("cannot read `{s}` as a number"));
    let s = s.trim();
    if let Some((num, den)) = s.split_once('/') {
        let num = BigInt::from_str(num.trim()).map_err(|_| bad())?;
        let den = BigInt::from_str(den.trim()).map_err(|_| bad())?;
        if den.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(num, den));
    }
    let (negative, digits) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    let all = format!("{int}{frac}");
    if all.is_empty() || !all.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let num = BigInt::from_str(&all).map_err(|_| bad())?;
    let den = num_traits::pow(BigInt::from(10), frac.len());
    let value = BigRational::new(num, den);
    Ok(if negative { -value } else { value })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BootstrapConfig {
    /// Defaults to the seed exponent.
    pub p: Option<ExactValue>,
    pub t: Option<ExactValue>,
    pub q0: Option<ExactValue>,
    pub i_max: usize,
    /// Treat a non-escaping sequence as an infeasible verdict.
    pub require_escape: bool,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self { p: None, t: None, q0: None, i_max: 10, require_escape: true }
    }
}

/// Stored fields: `phi` and `w` for `check`, an optional `phi` for `vector`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldInputs {
    pub phi: Option<PathBuf>,
    pub w: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: SeedConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub stability: StabilityConfig,
    #[serde(default)]
    pub continuation: ContinuationConfig,
    #[serde(default)]
    pub bootstrap: BootstrapConfig,
    #[serde(default)]
    pub fields: FieldInputs,
}

fn default_n() -> usize {
    3
}

fn default_m() -> usize {
    16
}

impl RunConfig {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            n: default_n(),
            m: default_m(),
            out: None,
            seed: SeedConfig::default(),
            tolerances: Tolerances::default(),
            stability: StabilityConfig::default(),
            continuation: ContinuationConfig::default(),
            bootstrap: BootstrapConfig::default(),
            fields: FieldInputs::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads a config file; relative paths inside it are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut config = Self::from_toml(&text)?;
        if let Some(dir) = path.parent() {
            config.resolve_paths(dir);
        }
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for src in [&mut self.seed.tau, &mut self.seed.eta].into_iter().flatten() {
            if let FieldSource::File(p) = src {
                fix(p);
            }
        }
        if let Some(SigmaSource::File(p)) = &mut self.seed.sigma {
            fix(p);
        }
        for p in [&mut self.fields.phi, &mut self.fields.w].into_iter().flatten() {
            fix(p);
        }
        if let Some(p) = &mut self.out {
            fix(p);
        }
    }

    /// Checks everything that can be checked without running a solver.
    pub fn validate(&self) -> Result<(), CliError> {
        let err = |msg: String| Err(CliError::Config(msg));
        if self.n < 3 {
            return err(format!("n = {} must be at least 3", self.n));
        }
        if self.m < 4 || !self.m.is_multiple_of(2) {
            return err(format!("m = {} must be even and at least 4", self.m));
        }
        let s = &self.seed;
        if !(s.p > self.n as f64) {
            return err(format!("p = {} must exceed n = {}", s.p, self.n));
        }
        if !(s.t > 1.0) {
            return err(format!("t = {} must exceed 1", s.t));
        }
        if let Some(x) = s.sigma_norm {
            if !(x > 0.0 && x.is_finite()) {
                return err(format!("sigma_norm = {x} must be positive"));
            }
        }
        if let Some(l) = s.lambda {
            if !(l >= 0.0 && l.is_finite()) {
                return err(format!("lambda = {l} must be non-negative"));
            }
        }
        if s.preset.is_some() && (s.tau.is_some() || s.eta.is_some() || s.sigma.is_some()) {
            return err("a preset cannot be combined with tau, eta or sigma sources".into());
        }
        let needs_seed = !matches!(self.mode, Mode::Bootstrap | Mode::MakeTt);
        if needs_seed && s.preset.is_none() && s.tau.is_none() {
            return err("the seed needs either a preset or a tau source".into());
        }
        for src in [&s.tau, &s.eta].into_iter().flatten() {
            match src {
                FieldSource::File(p) if !p.exists() => return err(format!("missing field file {}", p.display())),
                FieldSource::Series { terms, .. } => {
                    if let Some(t) = terms.iter().find(|t| t.k.len() != self.n) {
                        return err(format!("wave vector {:?} does not have {} entries", t.k, self.n));
                    }
                }
                _ => {}
            }
        }
        if let Some(SigmaSource::File(p)) = &s.sigma {
            if !p.exists() {
                return err(format!("missing field file {}", p.display()));
            }
        }
        if self.mode == Mode::Check {
            for (name, p) in [("phi", &self.fields.phi), ("w", &self.fields.w)] {
                match p {
                    None => return err(format!("check mode needs fields.{name}")),
                    Some(p) if !p.exists() => return err(format!("missing field file {}", p.display())),
                    _ => {}
                }
            }
        }
        if let Some(p) = self.fields.phi.as_ref().filter(|p| !p.exists()) {
            return err(format!("missing field file {}", p.display()));
        }
        if self.mode == Mode::Continuation && !(self.continuation.lambda_max >= 0.0) {
            return err("continuation.lambda_max must be non-negative".into());
        }
        if self.mode == Mode::Bootstrap {
            let t = self.bootstrap_t()?;
            if t <= BigRational::one() {
                return err("bootstrap t must exceed 1".into());
            }
        }
        Ok(())
    }

    pub fn bootstrap_p(&self) -> Result<BigRational, CliError> {
        match &self.bootstrap.p {
            Some(v) => v.to_rational(),
            None => ExactValue::Float(self.seed.p).to_rational(),
        }
    }

    pub fn bootstrap_t(&self) -> Result<BigRational, CliError> {
        match &self.bootstrap.t {
            Some(v) => v.to_rational(),
            None => ExactValue::Float(self.seed.t).to_rational(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fractions_and_decimals() {
        assert_eq!(parse_rational("12/7").unwrap(), BigRational::new(12.into(), 7.into()));
        assert_eq!(parse_rational("3.2").unwrap(), BigRational::new(16.into(), 5.into()));
        assert_eq!(parse_rational("-0.5").unwrap(), BigRational::new((-1).into(), 2.into()));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
    }

    #[test]
    fn minimal_config() {
        let c = RunConfig::from_toml("mode = \"bootstrap\"\n[bootstrap]\nt = \"2\"\n").unwrap();
        assert_eq!(c.mode, Mode::Bootstrap);
        assert_eq!(c.n, 3);
        c.validate().unwrap();
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(RunConfig::from_toml("mode = \"check\"\nbogus = 1\n").is_err());
    }

    #[test]
    fn mode_names() {
        assert_eq!("make-tt".parse::<Mode>().unwrap(), Mode::MakeTt);
        assert!("nope".parse::<Mode>().is_err());
    }
}
