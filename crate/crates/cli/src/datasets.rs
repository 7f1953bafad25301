//! Named synthetic data sets for the reduction and phase-space jobs.

use std::f64::consts::PI;
use std::sync::Arc;

use cartan_core::adm::{CanonicalState, GaugeData, Grid2D};
use cartan_core::field::Chart;
use cartan_core::reduction::KKData;

use crate::config::number;
use crate::CliError;

/// Kaluza-Klein data with the box where checks are sampled.
#[derive(Clone, Debug)]
pub struct KKDataset {
    pub name: String,
    pub kk: KKData,
    pub sample_box: Vec<(f64, f64)>,
    /// Base point of the twist integration.
    pub base: Vec<f64>,
    /// Whether `G = e^{3γ}*𝓕` is expected to be closed.
    pub closed: bool,
}

fn chart3(t: (f64, f64)) -> Arc<Chart> {
    Arc::new(Chart::new(&["t", "x", "y"], &[-1, 1, 1], &[t, (-5.0, 5.0), (-5.0, 5.0)]).expect("base chart"))
}

const FLAT: [&str; 6] = ["-1", "0", "0", "1", "0", "1"];
const CURVED: [&str; 6] = ["-(1 + 0.1*x^2)", "0.05*y", "0", "1 + 0.2*sin(t)", "0.1*x*y", "1 + 0.1*cos(x + y)"];
const CURVED_GAMMA: &str = "0.2*sin(x + t) + 0.1*y";

fn generic(name: &str, g: &[&str], gamma: &str, a: Option<&[&str]>, closed: bool) -> Result<KKDataset, CliError> {
    Ok(KKDataset {
        name: name.into(),
        kk: KKData::from_expressions(chart3((-2.0, 2.0)), g, gamma, a)?,
        sample_box: vec![(-0.8, 0.8), (-1.0, 1.0), (-1.0, 1.0)],
        base: vec![0.0; 3],
        closed,
    })
}

/// Kasner with the third direction as fiber: `g̃ = −dt² + t^{2p₁}dx² + t^{2p₂}dy²`, `γ = p₃ ln t`.
pub fn kk_kasner(p: [f64; 3]) -> Result<KKDataset, CliError> {
    let g = ["-1", "0", "0", &format!("t^({})", 2.0 * p[0]), "0", &format!("t^({})", 2.0 * p[1])];
    Ok(KKDataset {
        name: format!("kasner({},{},{})", p[0], p[1], p[2]),
        kk: KKData::from_expressions(chart3((0.2, 5.0)), &g, &format!("{}*log(t)", p[2]), None)?,
        sample_box: vec![(0.5, 3.0), (-1.0, 1.0), (-1.0, 1.0)],
        base: vec![1.0, 0.0, 0.0],
        closed: true,
    })
}

/// Inhomogeneous polarized data (no Kaluza-Klein field).
pub fn kk_polarized() -> Result<KKDataset, CliError> {
    generic("polarized", &CURVED, CURVED_GAMMA, None, true)
}

/// Inhomogeneous data with a generic Kaluza-Klein potential.
pub fn kk_twisted() -> Result<KKDataset, CliError> {
    generic("twisted", &CURVED, CURVED_GAMMA, Some(&["0.1*y", "0.3*x*t", "0.2*sin(x)"]), false)
}

/// Flat base with a null plane-wave field strength; `G` is closed.
pub fn kk_plane_wave() -> Result<KKDataset, CliError> {
    generic("plane_wave", &FLAT, "0", Some(&["0", "0", "sin(x - t)"]), true)
}

/// Flat base with a constant magnetic field `𝓕_{xy} = b`; `G` is closed.
pub fn kk_constant_field(b: f64) -> Result<KKDataset, CliError> {
    generic(&format!("constant_field({b})"), &FLAT, "0", Some(&["0", "0", &format!("{b}*x")]), true)
}

/// Flat base with `𝒜 = ½x² dy`, whose dual `G` is not closed.
pub fn kk_nonclosed() -> Result<KKDataset, CliError> {
    generic("nonclosed", &FLAT, "0", Some(&["0", "0", "0.5*x^2"]), false)
}

/// Parses `kasner(p1,p2,p3)`, `polarized`, `twisted`, `plane_wave`,
/// `constant_field(b)` or `nonclosed`.
pub fn parse_kk(fixture_name: &str) -> Result<KKDataset, CliError> {
    let (name, args) = split_call(fixture_name)?;
    let want = |n: usize| -> Result<Vec<f64>, CliError> {
        if args.len() != n {
            return Err(CliError::Config(format!("field `fixture`: `{name}` expects {n} arguments, got {}", args.len())));
        }
        args.iter().map(|a| number(a, "fixture")).collect()
    };
    match name.as_str() {
        "kasner" => {
            let p = want(3)?;
            kk_kasner([p[0], p[1], p[2]])
        }
        "polarized" => kk_polarized(),
        "twisted" => kk_twisted(),
        "plane_wave" => kk_plane_wave(),
        "constant_field" => kk_constant_field(want(1)?[0]),
        "nonclosed" => kk_nonclosed(),
        other => Err(CliError::Config(format!("field `fixture`: unknown reduction data set `{other}`"))),
    }
}

/// Splits `name(a, b)` or `name:a,b` into its name and arguments.
pub fn split_call(fixture_name: &str) -> Result<(String, Vec<String>), CliError> {
    let s = fixture_name.trim();
    if s.is_empty() {
        return Err(CliError::Config("field `fixture`: empty name".into()));
    }
    let (name, inner) = if let Some(open) = s.find('(') {
        if !s.ends_with(')') {
            return Err(CliError::Config(format!("field `fixture`: `{s}` lacks a closing parenthesis")));
        }
        (&s[..open], &s[open + 1..s.len() - 1])
    } else if let Some((n, rest)) = s.split_once(':') {
        (n, rest)
    } else {
        (s, "")
    };
    let args = inner.split(',').map(str::trim).filter(|a| !a.is_empty()).map(String::from).collect();
    Ok((name.trim().to_string(), args))
}

/// Kasner exponents of a `kasner(...)` or `kasner:...` fixture string.
pub fn kasner_exponents(fixture_name: &str) -> Option<[f64; 3]> {
    let (name, args) = split_call(fixture_name).ok()?;
    if name != "kasner" || args.len() != 3 {
        return None;
    }
    let v: Vec<f64> = args.iter().map(|a| number(a, "fixture")).collect::<Result<_, _>>().ok()?;
    Some([v[0], v[1], v[2]])
}

/// Periodic `2π × 2π` grid.
pub fn torus(n: usize) -> Result<Grid2D, CliError> {
    Ok(Grid2D::new(n, n, 2.0 * PI, 2.0 * PI)?)
}

/// Periodic unit grid.
pub fn unit_torus(n: usize) -> Result<Grid2D, CliError> {
    Ok(Grid2D::new(n, n, 1.0, 1.0)?)
}

/// Smooth inhomogeneous data on the unit torus that violates the constraints.
pub fn seeded_state(grid: Grid2D) -> CanonicalState {
    let w = 2.0 * PI;
    let mut s = CanonicalState::flat(grid);
    s.q[0] = grid.sample(|x, y| 1.0 + 0.05 * (w * y).sin() + 0.02 * (w * x).cos());
    s.q[1] = grid.sample(|x, y| 0.03 * (w * (x - y)).sin());
    s.q[2] = grid.sample(|x, _| 1.0 + 0.04 * (w * x).sin());
    s.pi[0] = grid.sample(|_, y| 0.02 * (w * y).cos());
    s.pi[1] = grid.sample(|x, _| 0.05 * (w * x).sin());
    s.pi[2] = grid.sample(|x, y| -0.03 + 0.01 * (w * (x + y)).cos());
    s.gamma = grid.sample(|x, y| 0.05 * (w * x).sin() * (w * y).cos());
    s.p_gamma = grid.sample(|x, y| 0.1 * (w * (x + y)).cos());
    s.omega = grid.sample(|x, _| 0.05 * (w * x).cos());
    s.p_omega = grid.sample(|_, y| 0.05 * (w * y).sin());
    s
}

/// [`seeded_state`] with zero momenta and twist: time-symmetric polarized data.
pub fn time_symmetric_state(grid: Grid2D) -> CanonicalState {
    let mut s = seeded_state(grid);
    s.pi = [grid.constant(0.0), grid.constant(0.0), grid.constant(0.0)];
    s.p_gamma = grid.constant(0.0);
    s.omega = grid.constant(0.0);
    s.p_omega = grid.constant(0.0);
    s
}

/// Inhomogeneous lapse and shift on the unit torus.
pub fn general_gauge(grid: &Grid2D) -> GaugeData {
    let w = 2.0 * PI;
    let mut g = GaugeData::unit(grid);
    g.lapse = grid.sample(|x, y| 1.0 + 0.1 * (w * x).cos() * (w * y).sin());
    g.shift[0] = grid.sample(|_, y| 0.05 * (w * y).cos());
    g.shift[1] = grid.sample(|x, y| 0.03 * (w * (x + y)).sin());
    g
}
