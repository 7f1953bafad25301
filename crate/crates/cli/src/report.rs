//! Check records, report bundles and their JSON/CSV encodings.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::CliError;

/// How a value is compared with its reference.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `|value − reference| ≤ tolerance`.
    Within,
    /// `value ≤ reference + tolerance`.
    AtMost,
    /// `value ≥ reference − tolerance`.
    AtLeast,
    /// The operation must fail; `value` is 1 when it did.
    Fails,
}

/// Where the reference value comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// A closed-form expression.
    Formula,
    /// An independent numerical route.
    Oracle,
    /// An identity, bound or convergence rate.
    Invariant,
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Comparison::Within => "within",
            Comparison::AtMost => "at_most",
            Comparison::AtLeast => "at_least",
            Comparison::Fails => "fails",
        })
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Formula => "formula",
            Provenance::Oracle => "oracle",
            Provenance::Invariant => "invariant",
        })
    }
}

/// One pass/fail record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    /// `None` when the computation failed.
    pub value: Option<f64>,
    pub reference: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub provenance: Provenance,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CheckRecord {
    pub fn new(name: impl Into<String>, value: f64, reference: f64, tolerance: f64, comparison: Comparison, provenance: Provenance) -> CheckRecord {
        let pass = value.is_finite()
            && match comparison {
                Comparison::Within => (value - reference).abs() <= tolerance,
                Comparison::AtMost => value <= reference + tolerance,
                Comparison::AtLeast => value >= reference - tolerance,
                Comparison::Fails => value == 1.0,
            };
        CheckRecord {
            name: name.into(),
            value: value.is_finite().then_some(value),
            reference,
            tolerance,
            comparison,
            provenance,
            pass,
            error: None,
        }
    }

    /// `|value − reference| ≤ tolerance`.
    pub fn within(name: impl Into<String>, value: f64, reference: f64, tolerance: f64, provenance: Provenance) -> CheckRecord {
        CheckRecord::new(name, value, reference, tolerance, Comparison::Within, provenance)
    }

    /// `value ≤ tolerance` (a residual bound).
    pub fn bound(name: impl Into<String>, value: f64, tolerance: f64) -> CheckRecord {
        CheckRecord::new(name, value, 0.0, tolerance, Comparison::AtMost, Provenance::Invariant)
    }

    /// `value ≥ reference`.
    pub fn at_least(name: impl Into<String>, value: f64, reference: f64) -> CheckRecord {
        CheckRecord::new(name, value, reference, 0.0, Comparison::AtLeast, Provenance::Invariant)
    }

    /// A computation that must be rejected.
    pub fn fails<T>(name: impl Into<String>, outcome: &Result<T, cartan_core::Error>) -> CheckRecord {
        let mut r = CheckRecord::new(name, if outcome.is_err() { 1.0 } else { 0.0 }, 1.0, 0.0, Comparison::Fails, Provenance::Invariant);
        if let Err(e) = outcome {
            r.error = Some(e.to_string());
        }
        r
    }

    /// A check whose computation raised an error.
    pub fn errored(name: impl Into<String>, tolerance: f64, comparison: Comparison, err: impl fmt::Display) -> CheckRecord {
        CheckRecord {
            name: name.into(),
            value: None,
            reference: 0.0,
            tolerance,
            comparison,
            provenance: Provenance::Invariant,
            pass: false,
            error: Some(err.to_string()),
        }
    }
}

/// Fixture and convention metadata.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub job: String,
    pub fixture: String,
    pub conventions: BTreeMap<String, String>,
    pub versions: BTreeMap<String, String>,
}

impl Metadata {
    pub fn new(job: &str, fixture: &str) -> Metadata {
        Metadata {
            job: job.into(),
            fixture: fixture.into(),
            conventions: conventions(),
            versions: BTreeMap::from([
                ("cartan-cli".into(), env!("CARGO_PKG_VERSION").into()),
                ("cartan-core".into(), cartan_core::VERSION.into()),
            ]),
        }
    }
}

/// Sign and normalization choices used throughout the numerics.
pub fn conventions() -> BTreeMap<String, String> {
    [
        ("orientation", "eps_{t x y} = +sqrt|g| on the 2+1 base; eps^{12} = +1 on slices; eps_{0123} = +sqrt|g|"),
        ("momentum_reading", "p in the gamma sector is p_gamma"),
        ("p_omega_sign", "p_omega = -F_12 on Kaluza-Klein data"),
        ("wave_map_coefficient", "T = 1/2 (<dU,dU>_h - 1/2 g <dU,dU>_h), h = 4 dgamma^2 + e^{-4 gamma} domega^2"),
        ("conformal_constant", "both the -2 mu_h variant and the flat-normalized Hamiltonian are evaluated"),
        ("curvature_sign", "R^a_b = d Theta^a_b + Theta^a_c ^ Theta^c_b, de^a = -Theta^a_b ^ e^b"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

/// A complete job report.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub metadata: Metadata,
    pub checks: Vec<CheckRecord>,
}

impl ReportBundle {
    pub fn new(metadata: Metadata, checks: Vec<CheckRecord>) -> ReportBundle {
        ReportBundle { metadata, checks }
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// Process exit code: 0 iff every check passes.
    pub fn exit_code(&self) -> i32 {
        if self.all_pass() {
            0
        } else {
            1
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization");
        s.push('\n');
        s
    }

    pub fn from_json(src: &str) -> Result<ReportBundle, CliError> {
        serde_json::from_str(src).map_err(|e| CliError::Config(format!("report: {e}")))
    }

    /// Flat table of checks.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["name", "value", "reference", "tolerance", "comparison", "pass", "provenance", "error"])
            .expect("csv header");
        for c in &self.checks {
            let value = c.value.map(|v| format!("{v:e}")).unwrap_or_default();
            w.write_record([
                c.name.as_str(),
                &value,
                &format!("{:e}", c.reference),
                &format!("{:e}", c.tolerance),
                &c.comparison.to_string(),
                if c.pass { "true" } else { "false" },
                &c.provenance.to_string(),
                c.error.as_deref().unwrap_or(""),
            ])
            .expect("csv row");
        }
        String::from_utf8(w.into_inner().expect("csv flush")).expect("utf-8 csv")
    }
}

/// Output encodings.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Writes the bundle to `out`, or to standard output.
pub fn emit_report(bundle: &ReportBundle, format: Format, out: Option<&Path>) -> Result<(), CliError> {
    let text = match format {
        Format::Json => bundle.to_json(),
        Format::Csv => bundle.to_csv(),
    };
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::Io(e.to_string())),
    }
}
