use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cartan_cli::report::{emit_report, Format};
use cartan_cli::{run_job, CliError, JobConfig, JobKind};

#[derive(Parser)]
#[command(name = "cartan", version, about = "Frame-curvature, reduction, phase-space and wave-kernel checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Frame curvature of a fixture against the Christoffel oracle and closed forms.
    Curvature(Opts),
    /// Reduced curvature, gauge invariance and twist potential.
    Reduce(Opts),
    /// Hamiltonian and momentum constraints and their propagation.
    Constraints(Opts),
    /// Electric and magnetic Weyl fields on a slice.
    Weyl(Opts),
    /// Kirchhoff, descent, Huygens and Duhamel checks.
    Wave(Opts),
    /// Acceptance criteria.
    Suite(Opts),
}

#[derive(Args)]
struct Opts {
    /// Fixture or data set, e.g. `kasner(2/3,2/3,-1/3)` or `schwarzschild:1`.
    #[arg(long)]
    fixture: Option<String>,
    /// JSON job configuration; command-line flags override its fields.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Evaluation point, `t=2,x=0.1` or `2,0.1,0,0` (repeatable).
    #[arg(long = "point")]
    points: Vec<String>,
    /// Nodes per side of the periodic grid.
    #[arg(long)]
    grid: Option<usize>,
    /// Finite-difference step.
    #[arg(long)]
    fd_step: Option<f64>,
    /// Base quadrature order.
    #[arg(long)]
    quad: Option<usize>,
    /// Output file (standard output when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Tolerance override, `family=value` or a bare default (repeatable).
    #[arg(long = "tol")]
    tols: Vec<String>,
    /// Run every acceptance criterion.
    #[arg(long)]
    all: bool,
}

fn configure(kind: JobKind, o: Opts) -> Result<JobConfig, CliError> {
    let mut cfg = match &o.input {
        Some(p) => JobConfig::from_file(p)?,
        None => JobConfig::new(kind),
    };
    if o.input.is_some() && cfg.kind != kind {
        return Err(CliError::Config(format!("field `kind`: config is `{}` but the subcommand is `{}`", cfg.kind.name(), kind.name())));
    }
    cfg.fixture = o.fixture.or(cfg.fixture);
    if !o.points.is_empty() {
        cfg.points = o.points;
    }
    cfg.grid = o.grid.or(cfg.grid);
    cfg.fd_step = o.fd_step.or(cfg.fd_step);
    cfg.quad = o.quad.or(cfg.quad);
    cfg.out = o.out.or(cfg.out);
    cfg.format = o.format.unwrap_or(cfg.format);
    cfg.all |= o.all;
    for t in o.tols {
        let (family, value) = t.split_once('=').unwrap_or(("default", t.as_str()));
        let v = cartan_cli::config::number(value, &format!("tol.{family}"))?;
        cfg.tolerances.insert(family.trim().to_string(), v);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(kind: JobKind, o: Opts) -> Result<i32, CliError> {
    let cfg = configure(kind, o)?;
    let bundle = run_job(&cfg)?;
    emit_report(&bundle, cfg.format, cfg.out.as_deref())?;
    for f in bundle.failures() {
        eprintln!("FAIL {} value={:?} reference={} tolerance={}{}", f.name, f.value, f.reference, f.tolerance, f.error.as_deref().map(|e| format!(" error={e}")).unwrap_or_default());
    }
    Ok(bundle.exit_code())
}

fn main() -> ExitCode {
    if let Some(n) = std::env::var("CARTAN_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let cli = Cli::parse();
    let (kind, opts) = match cli.command {
        Command::Curvature(o) => (JobKind::Curvature, o),
        Command::Reduce(o) => (JobKind::Reduce, o),
        Command::Constraints(o) => (JobKind::Constraints, o),
        Command::Weyl(o) => (JobKind::Weyl, o),
        Command::Wave(o) => (JobKind::Wave, o),
        Command::Suite(o) => (JobKind::Suite, o),
    };
    match run(kind, opts) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
