//! Job configuration: JSON schema, command-line overrides and validation.
//!
//! ```json
//! {
//!   "kind": "curvature",
//!   "fixture": "kasner(2/3,2/3,-1/3)",
//!   "points": ["t=2", "1.5,0,0,0"],
//!   "grid": 32,
//!   "fd_step": 0.001,
//!   "quad": 32,
//!   "out": "report.csv",
//!   "format": "csv",
//!   "tolerances": { "default": 1e-8, "ricci": 1e-6 }
//! }
//! ```
//!
//! Every field except `kind` is optional.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::report::Format;
use crate::CliError;

/// Job kinds, one per subcommand.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    Curvature,
    Reduce,
    Constraints,
    Weyl,
    Wave,
    Suite,
}

impl JobKind {
    pub fn name(self) -> &'static str {
        match self {
            JobKind::Curvature => "curvature",
            JobKind::Reduce => "reduce",
            JobKind::Constraints => "constraints",
            JobKind::Weyl => "weyl",
            JobKind::Wave => "wave",
            JobKind::Suite => "suite",
        }
    }
}

/// A fully specified job.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub kind: JobKind,
    #[serde(default)]
    pub fixture: Option<String>,
    /// Evaluation points, `name=value` pairs or comma-separated coordinates.
    #[serde(default)]
    pub points: Vec<String>,
    /// Nodes per side of the periodic grid.
    #[serde(default)]
    pub grid: Option<usize>,
    /// Finite-difference step for derivative checks.
    #[serde(default)]
    pub fd_step: Option<f64>,
    /// Base Gauss-Legendre order for quadratures.
    #[serde(default)]
    pub quad: Option<usize>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
    /// Tolerance overrides by check family; `default` applies to every family.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    /// Run every acceptance criterion (suite only).
    #[serde(default)]
    pub all: bool,
}

impl JobConfig {
    pub fn new(kind: JobKind) -> JobConfig {
        JobConfig {
            kind,
            fixture: None,
            points: Vec::new(),
            grid: None,
            fd_step: None,
            quad: None,
            out: None,
            format: Format::Json,
            tolerances: BTreeMap::new(),
            all: false,
        }
    }

    /// Parses a JSON configuration; errors carry line, column and field.
    pub fn from_json(src: &str) -> Result<JobConfig, CliError> {
        let cfg: JobConfig = serde_json::from_str(src).map_err(|e| CliError::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<JobConfig, CliError> {
        let src = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("field `input`: {}: {e}", path.display())))?;
        JobConfig::from_json(&src).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        for (k, v) in &self.tolerances {
            if *v <= 0.0 || !v.is_finite() {
                return Err(CliError::Config(format!("field `tolerances.{k}` must be positive, got {v}")));
            }
        }
        if let Some(h) = self.fd_step {
            if !(h > 0.0 && h < 1.0) {
                return Err(CliError::Config(format!("field `fd_step` must lie in (0, 1), got {h}")));
            }
        }
        if let Some(n) = self.grid {
            if n < 8 {
                return Err(CliError::Config(format!("field `grid` needs at least 8 nodes, got {n}")));
            }
        }
        if let Some(q) = self.quad {
            if q < 4 {
                return Err(CliError::Config(format!("field `quad` needs at least 4 nodes, got {q}")));
            }
        }
        if let Some(out) = &self.out {
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                if !parent.is_dir() {
                    return Err(CliError::Config(format!("field `out`: directory {} does not exist", parent.display())));
                }
            }
        }
        Ok(())
    }

    /// Tolerance for a check family: specific override, then `default`, then `fallback`.
    pub fn tol(&self, family: &str, fallback: f64) -> f64 {
        self.tolerances.get(family).or_else(|| self.tolerances.get("default")).copied().unwrap_or(fallback)
    }
}

/// Parses a point against coordinate names: `t=2,x=0.1` (others default) or `2,0.1,0,0`.
pub fn parse_point(src: &str, names: &[&str], defaults: &[f64]) -> Result<Vec<f64>, CliError> {
    let mut x = defaults.to_vec();
    let parts: Vec<&str> = src.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if parts.iter().all(|p| p.contains('=')) {
        for p in parts {
            let (k, v) = p.split_once('=').expect("checked");
            let idx = names
                .iter()
                .position(|n| *n == k.trim())
                .ok_or_else(|| CliError::Config(format!("field `point`: unknown coordinate `{}` (expected one of {names:?})", k.trim())))?;
            x[idx] = number(v, "point")?;
        }
        return Ok(x);
    }
    if parts.len() != names.len() {
        return Err(CliError::Config(format!("field `point`: expected {} coordinates, got {}", names.len(), parts.len())));
    }
    parts.iter().map(|p| number(p, "point")).collect()
}

/// Parses a number or a constant expression such as `2/3`.
pub fn number(src: &str, field: &str) -> Result<f64, CliError> {
    cartan_core::expr::Expr::constant(src.trim()).map_err(|e| CliError::Config(format!("field `{field}`: `{}`: {e}", src.trim())))
}
