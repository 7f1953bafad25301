//! Job dispatch and the check families behind each subcommand.

use std::sync::Arc;

use cartan_core::adm::{
    bel_robinson_density, constraint_propagation_check, hamiltonian_constraint, hamiltonian_constraint_kk, induced_state, kasner_slice,
    max_norm, momentum_constraint, weyl_fields, CanonicalState, GaugeData, Grid2D,
};
use cartan_core::curvature::{
    bel_robinson_at, contract_curvature, coordinate_riemann_oracle, curvature_two_forms, divergence_bel_robinson, penrose_wave_residual,
    riemann_divergence_residual, second_bianchi_residual, solve_spin_connection, Curvature,
};
use cartan_core::field::{self, constant, fd_field};
use cartan_core::fixtures::{parse_fixture, Fixture};
use cartan_core::forms::CoFrame;
use cartan_core::math::max_abs;
use cartan_core::reduction::{reduced_riemann, ricci_projections, ricci_projections_4d, riemann_4d, twist_potential, wavemap_residuals, TwistOptions};
use cartan_core::wave::{descent_2d, duhamel_solve, huygens_probe, kirchhoff_3d, CauchyData, QuadratureSpec, Source};
use cartan_core::Error;
use rayon::prelude::*;

use crate::config::{parse_point, JobConfig, JobKind};
use crate::datasets::{self, kasner_exponents, parse_kk, KKDataset};
use crate::oracles::{self, adm_mixed, max_diff, mixed};
use crate::report::{CheckRecord, Comparison, Metadata, Provenance, ReportBundle};
use crate::suite;
use crate::CliError;

pub const DEFAULT_FIXTURE: &str = "kasner(2/3,2/3,-1/3)";

/// Runs a job and collects its checks.
pub fn run_job(cfg: &JobConfig) -> Result<ReportBundle, CliError> {
    cfg.validate()?;
    let fixture = cfg.fixture.clone().unwrap_or_else(|| default_fixture(cfg.kind).to_string());
    let checks = match cfg.kind {
        JobKind::Curvature => curvature_job(cfg, &fixture)?,
        JobKind::Reduce => reduce_job(cfg, &fixture)?,
        JobKind::Constraints => constraints_job(cfg, &fixture)?,
        JobKind::Weyl => weyl_job(cfg, &fixture)?,
        JobKind::Wave => wave_checks(cfg),
        JobKind::Suite => suite::run_suite(cfg).into_iter().flat_map(|c| c.checks).collect(),
    };
    Ok(ReportBundle::new(Metadata::new(cfg.kind.name(), &fixture), checks))
}

fn default_fixture(kind: JobKind) -> &'static str {
    match kind {
        JobKind::Reduce => "twisted",
        JobKind::Wave => "bump",
        JobKind::Suite => "all",
        _ => DEFAULT_FIXTURE,
    }
}

pub fn load_fixture(fixture_name: &str) -> Result<Fixture, CliError> {
    parse_fixture(fixture_name).map_err(|e| CliError::Config(format!("field `fixture`: {e}")))
}

fn midpoint(bx: &[(f64, f64)]) -> Vec<f64> {
    bx.iter().map(|(a, b)| 0.5 * (a + b)).collect()
}

fn points(cfg: &JobConfig, names: &[&str], bx: &[(f64, f64)], sample: impl FnOnce() -> Vec<Vec<f64>>) -> Result<Vec<Vec<f64>>, CliError> {
    if cfg.points.is_empty() {
        return Ok(sample());
    }
    cfg.points.iter().map(|p| parse_point(p, names, &midpoint(bx))).collect()
}

/// `t=2,x1=0,...` label of a point.
pub fn label(names: &[&str], x: &[f64]) -> String {
    names.iter().zip(x).map(|(n, v)| format!("{n}={v}")).collect::<Vec<_>>().join(",")
}

/// Records a computation that may fail as a single check.
pub fn guarded(name: &str, tol: f64, cmp: Comparison, f: impl FnOnce() -> Result<CheckRecord, Error>) -> CheckRecord {
    f().unwrap_or_else(|e| CheckRecord::errored(name, tol, cmp, e))
}

fn cartan(coframe: &CoFrame, x: &[f64]) -> Result<Curvature, Error> {
    curvature_two_forms(coframe, &solve_spin_connection(coframe))?.at(x)
}

// ---------- curvature ----------

/// Same coframe with every component wrapped as a closure, forcing finite-difference partials.
pub fn fd_coframe(coframe: &CoFrame) -> Result<CoFrame, Error> {
    let n = coframe.dim();
    let rows = (0..n)
        .map(|a| {
            (0..n)
                .map(|mu| {
                    let cf = coframe.clone();
                    fd_field(n, move |x| cf.eval(x).map(|e| e[a * n + mu]).unwrap_or(f64::NAN))
                })
                .collect()
        })
        .collect();
    CoFrame::from_components(coframe.chart().clone(), rows)
}

/// Max deviation between the Cartan frame Riemann tensor and the Christoffel oracle.
pub fn oracle_deviation(coframe: &CoFrame, fx: &Fixture, x: &[f64]) -> Result<f64, Error> {
    let c = cartan(coframe, x)?;
    let e = fx.coframe.eval(x)?;
    let o = coordinate_riemann_oracle(&fx.metric).at(x)?.to_frame(&e)?;
    Ok(max_diff(&c.riem, &o))
}

/// Frame curvature checks at one point.
pub fn curvature_checks(fx: &Fixture, fixture_name: &str, x: &[f64], cfg: &JobConfig) -> Vec<CheckRecord> {
    let names = fx.chart.names();
    let at = label(&names, x);
    let n = fx.chart.dim();
    let tol = cfg.tol("riemann", 1e-8);
    let c = match cartan(&fx.coframe, x) {
        Ok(c) => c,
        Err(e) => return vec![CheckRecord::errored(format!("curvature@{at}"), tol, Comparison::Within, e)],
    };
    let mut out = Vec::new();
    let oracle = fx.coframe.eval(x).and_then(|e| coordinate_riemann_oracle(&fx.metric).at(x)?.to_frame(&e));
    match &oracle {
        Ok(o) => {
            out.push(CheckRecord::new(format!("riemann_vs_oracle@{at}"), max_diff(&c.riem, o), 0.0, tol, Comparison::AtMost, Provenance::Oracle));
            for a in 0..n {
                for b in 0..n {
                    for cc in 0..n {
                        for d in cc + 1..n {
                            let i = ((a * n + b) * n + cc) * n + d;
                            let (v, r) = (c.riem[i], o[i]);
                            if a != b && (v.abs() > 1e-12 || r.abs() > 1e-12) {
                                let idx = format!("{},{},{},{}", names[a], names[b], names[cc], names[d]);
                                out.push(CheckRecord::within(format!("riem[{idx}]@{at}"), v, r, tol, Provenance::Oracle));
                            }
                        }
                    }
                }
            }
        }
        Err(e) => out.push(CheckRecord::errored(format!("riemann_vs_oracle@{at}"), tol, Comparison::AtMost, e)),
    }
    if let Some(p) = kasner_exponents(fixture_name) {
        out.extend(kasner_formula_checks(&c, p, x[0], &at, cfg.tol("formula", 1e-8)));
    }
    if let Some(m) = schwarzschild_mass(fixture_name) {
        out.extend(schwarzschild_formula_checks(&fx.coframe, m, x, cfg.tol("formula", 1e-8)));
    }
    let h = cfg.fd_step.unwrap_or(1e-3);
    out.push(CheckRecord::bound(format!("first_bianchi@{at}"), c.first_bianchi_residual(), cfg.tol("bianchi1", 1e-8)));
    if fx.vacuum {
        out.push(CheckRecord::bound(format!("ricci_sup@{at}"), max_abs(&contract_curvature(&c).ricci), cfg.tol("ricci", 1e-6)));
        let t2 = cfg.tol("bianchi2", 1e-4);
        out.push(guarded(&format!("contracted_bianchi@{at}"), t2, Comparison::AtMost, || {
            Ok(CheckRecord::bound(format!("contracted_bianchi@{at}"), riemann_divergence_residual(&fx.coframe, x, h)?, t2))
        }));
        out.push(guarded(&format!("second_bianchi@{at}"), t2, Comparison::AtMost, || {
            Ok(CheckRecord::bound(format!("second_bianchi@{at}"), second_bianchi_residual(&fx.coframe, x, h)?, t2))
        }));
    }
    out
}

/// `Ω^i_j = p_ip_j t^{−2} e^i∧e^j` and `Ω^0_i = p_i(p_i − 1) t^{−2} e^0∧e^i`.
pub fn kasner_formula_checks(c: &Curvature, p: [f64; 3], t: f64, at: &str, tol: f64) -> Vec<CheckRecord> {
    let mut out = Vec::new();
    for i in 1..4 {
        let want = p[i - 1] * (p[i - 1] - 1.0) / (t * t);
        out.push(CheckRecord::within(format!("kasner_two_form[0,{i}]@{at}"), c.two_form_coefficient(0, i, 0, i), want, tol, Provenance::Formula));
        for j in i + 1..4 {
            let want = p[i - 1] * p[j - 1] / (t * t);
            out.push(CheckRecord::within(format!("kasner_two_form[{i},{j}]@{at}"), c.two_form_coefficient(i, j, i, j), want, tol, Provenance::Formula));
        }
    }
    out
}

fn schwarzschild_mass(fixture_name: &str) -> Option<f64> {
    let (name, args) = datasets::split_call(fixture_name).ok()?;
    if name != "schwarzschild" || args.len() != 1 {
        return None;
    }
    crate::config::number(&args[0], "fixture").ok()
}

/// Spin connection of the static frame: `Θ^t_r = e^{−β}α′ e^t`, `Θ^θ_r = e^{−β}/r e^θ`, `Θ^φ_θ = cot θ/r e^φ`.
pub fn schwarzschild_formula_checks(coframe: &CoFrame, m: f64, x: &[f64], tol: f64) -> Vec<CheckRecord> {
    let at = label(&["t", "r", "theta", "phi"], x);
    let v = match solve_spin_connection(coframe).at(x) {
        Ok(v) => v,
        Err(e) => return vec![CheckRecord::errored(format!("schwarzschild_spin@{at}"), tol, Comparison::Within, e)],
    };
    let (r, th) = (x[1], x[2]);
    let f = 1.0 - 2.0 * m / r;
    let e_minus_beta = f.sqrt();
    let dalpha = m / (r * r * f);
    vec![
        CheckRecord::within(format!("spin[t,r;t]@{at}"), v.get(0, 1, 0), e_minus_beta * dalpha, tol, Provenance::Formula),
        CheckRecord::within(format!("spin[theta,r;theta]@{at}"), v.get(2, 1, 2), e_minus_beta / r, tol, Provenance::Formula),
        CheckRecord::within(format!("spin[phi,r;phi]@{at}"), v.get(3, 1, 3), e_minus_beta / r, tol, Provenance::Formula),
        CheckRecord::within(format!("spin[phi,theta;phi]@{at}"), v.get(3, 2, 3), th.cos() / (th.sin() * r), tol, Provenance::Formula),
        CheckRecord::bound(format!("spin_antisymmetry@{at}"), v.antisymmetry_residual(), tol),
    ]
}

fn curvature_job(cfg: &JobConfig, fixture_name: &str) -> Result<Vec<CheckRecord>, CliError> {
    let fx = load_fixture(fixture_name)?;
    let names = fx.chart.names();
    let pts = points(cfg, &names, &fx.sample_box, || fx.sample_points(3))?;
    Ok(pts.par_iter().map(|x| curvature_checks(&fx, fixture_name, x, cfg)).collect::<Vec<_>>().concat())
}

// ---------- Penrose and Bel-Robinson ----------

/// Penrose residual at the working step and its observed orders on `(4h₀, 2h₀, h₀)`.
pub fn penrose_checks(fx: &Fixture, x: &[f64], h: f64, coarse: f64, tol: f64, min_order: f64) -> Vec<CheckRecord> {
    let at = format!("{}@{}", fx.name, label(&fx.chart.names(), x));
    let res = |s: f64| penrose_wave_residual(&fx.coframe, x, s).map(|r| max_abs(&r));
    let mut out = vec![guarded(&format!("penrose@{at}"), tol, Comparison::AtMost, || Ok(CheckRecord::bound(format!("penrose@{at}"), res(h)?, tol)))];
    out.extend(order_checks(&format!("penrose_order@{at}"), coarse, min_order, res));
    out
}

/// Observed orders on the step sequence `(4h, 2h, h)`.
pub fn order_checks(name: &str, h: f64, min_order: f64, f: impl Fn(f64) -> Result<f64, Error>) -> Vec<CheckRecord> {
    match (f(4.0 * h), f(2.0 * h), f(h)) {
        (Ok(a), Ok(b), Ok(c)) => vec![
            CheckRecord::at_least(format!("{name}[{},{}]", 4.0 * h, 2.0 * h), oracles::order(a, b), min_order),
            CheckRecord::at_least(format!("{name}[{},{}]", 2.0 * h, h), oracles::order(b, c), min_order),
        ],
        (a, b, c) => {
            let e = [a, b, c].into_iter().find_map(Result::err).expect("one failed");
            vec![CheckRecord::errored(name, min_order, Comparison::AtLeast, e)]
        }
    }
}

/// Bel-Robinson symmetry, positivity on timelike vectors, divergence and its order.
pub fn bel_robinson_checks(fx: &Fixture, x: &[f64], divergence: Option<(f64, f64, f64)>, sym_tol: f64) -> Vec<CheckRecord> {
    let at = format!("{}@{}", fx.name, label(&fx.chart.names(), x));
    let (_, _, q) = match bel_robinson_at(&fx.coframe, x) {
        Ok(v) => v,
        Err(e) => return vec![CheckRecord::errored(format!("bel_robinson@{at}"), sym_tol, Comparison::AtMost, e)],
    };
    let mut out = vec![CheckRecord::bound(format!("bel_robinson_symmetry@{at}"), q.symmetry_residual(), sym_tol)];
    let n = q.n;
    let mut lowest = f64::INFINITY;
    for (k, chi) in [0.0f64, 0.4, 1.1].into_iter().enumerate() {
        let mut t = vec![0.0; n];
        t[0] = chi.cosh();
        t[1 + k % (n - 1)] = chi.sinh();
        lowest = lowest.min(q.contract(&t, &t, &t, &t));
    }
    out.push(CheckRecord::at_least(format!("bel_robinson_timelike@{at}"), lowest, 0.0));
    if let Some((h, tol, coarse)) = divergence {
        let div = |s: f64| divergence_bel_robinson(&fx.coframe, x, s).map(|d| max_abs(&d));
        out.push(guarded(&format!("bel_robinson_divergence@{at}"), tol, Comparison::AtMost, || {
            Ok(CheckRecord::bound(format!("bel_robinson_divergence@{at}"), div(h)?, tol))
        }));
        out.extend(order_checks(&format!("bel_robinson_divergence_order@{at}"), coarse, 2.0, div));
    }
    out
}

// ---------- reduction ----------

/// Reduced blocks versus the 4D pipeline, and `𝒜 → 𝒜 + dλ` invariance.
pub fn reduction_checks(ds: &KKDataset, x: &[f64], tol: f64, gauge_tol: f64) -> Vec<CheckRecord> {
    let at = format!("{}@{}", ds.name, label(&["t", "x", "y"], x));
    let mut out = vec![
        guarded(&format!("reduced_riemann_vs_4d@{at}"), tol, Comparison::AtMost, || {
            let full = riemann_4d(&ds.kk, x)?;
            let red = reduced_riemann(&ds.kk, x)?.to_frame4();
            Ok(CheckRecord::new(format!("reduced_riemann_vs_4d@{at}"), max_diff(&full, &red), 0.0, tol, Comparison::AtMost, Provenance::Oracle))
        }),
        guarded(&format!("ricci_projections_vs_4d@{at}"), tol, Comparison::AtMost, || {
            let a = ricci_projections(&ds.kk, x)?;
            let b = ricci_projections_4d(&ds.kk, x)?;
            Ok(CheckRecord::new(format!("ricci_projections_vs_4d@{at}"), a.max_abs_diff(&b), 0.0, tol, Comparison::AtMost, Provenance::Oracle))
        }),
    ];
    if !ds.kk.polarized() {
        out.push(guarded(&format!("gauge_invariance@{at}"), gauge_tol, Comparison::AtMost, || {
            let lambda = field::expr_field("x*y + 0.3*sin(t) + 0.2*cos(x - 2*y)", &ds.kk.chart3, &[])?;
            let shifted = ds.kk.gauge_shifted(lambda)?;
            let d1 = ricci_projections(&ds.kk, x)?.max_abs_diff(&ricci_projections(&shifted, x)?);
            let d2 = max_diff(&reduced_riemann(&ds.kk, x)?.to_frame4(), &reduced_riemann(&shifted, x)?.to_frame4());
            Ok(CheckRecord::bound(format!("gauge_invariance@{at}"), d1.max(d2), gauge_tol))
        }));
    }
    out
}

/// Twist potential diagnostics; data whose `G` is not closed must be rejected.
pub fn twist_checks(ds: &KKDataset, path_tol: f64, exact_tol: f64) -> Vec<CheckRecord> {
    let opts = TwistOptions { sample_box: Some(ds.sample_box.clone()), ..TwistOptions::default() };
    let r = twist_potential(&ds.kk, &ds.base, &opts);
    if !ds.closed {
        return vec![CheckRecord::fails(format!("twist_rejects_nonclosed@{}", ds.name), &r)];
    }
    match r {
        Ok(tw) => vec![
            CheckRecord::bound(format!("twist_closure@{}", ds.name), tw.closure_residual, opts.closure_tolerance),
            CheckRecord::bound(format!("twist_path_independence@{}", ds.name), tw.path_residual, path_tol),
            CheckRecord::bound(format!("twist_exactness@{}", ds.name), tw.exactness_residual, exact_tol),
        ],
        Err(e) => vec![CheckRecord::errored(format!("twist@{}", ds.name), path_tol, Comparison::AtMost, e)],
    }
}

fn reduce_job(cfg: &JobConfig, fixture_name: &str) -> Result<Vec<CheckRecord>, CliError> {
    let ds = parse_kk(fixture_name)?;
    let pts = points(cfg, &["t", "x", "y"], &ds.sample_box, || cartan_core::fixtures::halton_points(&ds.sample_box, 4))?;
    let (tol, gtol) = (cfg.tol("reduction", 1e-5), cfg.tol("gauge", 1e-8));
    let mut out = pts.par_iter().map(|x| reduction_checks(&ds, x, tol, gtol)).collect::<Vec<_>>().concat();
    if kasner_exponents(fixture_name).is_some() {
        let wtol = cfg.tol("wave_map", 1e-8);
        let g = ds.kk.conformal_metric();
        for x in &pts {
            let at = format!("{}@{}", ds.name, label(&["t", "x", "y"], x));
            out.push(guarded(&format!("wave_map@{at}"), wtol, Comparison::AtMost, || {
                let r = wavemap_residuals(&g, &ds.kk.gamma, &field::zero(3), x)?;
                let v = r.r_gamma.abs().max(r.r_omega.abs()).max(max_abs(&r.mismatch));
                Ok(CheckRecord::bound(format!("wave_map@{at}"), v, wtol))
            }));
        }
    }
    if !ds.kk.polarized() || !ds.closed {
        out.extend(twist_checks(&ds, cfg.tol("twist_path", 1e-10), cfg.tol("twist_exact", 1e-8)));
    }
    Ok(out)
}

// ---------- constraints ----------

/// Slice data for a `kasner(...)` or `tilted_kasner(...)` fixture.
pub fn slice_data(fixture_name: &str, grid: Grid2D, t: f64) -> Result<(CanonicalState, GaugeData, Option<Fixture>), CliError> {
    if let Some(p) = kasner_exponents(fixture_name) {
        let (s, g) = kasner_slice(grid, p, t)?;
        return Ok((s, g, Some(load_fixture(fixture_name)?)));
    }
    let fx = load_fixture(fixture_name)?;
    if fx.chart.dim() != 4 {
        return Err(CliError::Config(format!("field `fixture`: `{fixture_name}` is not four-dimensional")));
    }
    let (s, g) = induced_state(&fx.coframe, grid, t, [0.0, 0.0], 0.0)?;
    Ok((s, g, Some(fx)))
}

fn slice_time(cfg: &JobConfig, default: f64) -> Result<f64, CliError> {
    match cfg.points.first() {
        None => Ok(default),
        Some(p) => {
            let x = parse_point(p, &["t"], &[default]).or_else(|_| parse_point(p, &["t", "x", "y", "z"], &[default, 0.0, 0.0, 0.0]))?;
            Ok(x[0])
        }
    }
}

/// Constraint residuals on slice data.
pub fn constraint_checks(s: &CanonicalState, tag: &str, tol: f64) -> Vec<CheckRecord> {
    vec![
        guarded(&format!("hamiltonian@{tag}"), tol, Comparison::AtMost, || {
            let h = if s.kk.is_some() { hamiltonian_constraint_kk(s)? } else { hamiltonian_constraint(s)? };
            Ok(CheckRecord::bound(format!("hamiltonian@{tag}"), max_norm(&h), tol))
        }),
        guarded(&format!("momentum@{tag}"), tol, Comparison::AtMost, || {
            let m = momentum_constraint(s)?;
            let m = m.kk.unwrap_or(m.wm);
            Ok(CheckRecord::bound(format!("momentum@{tag}"), max_norm(&m[0]).max(max_norm(&m[1])), tol))
        }),
    ]
}

fn constraints_job(cfg: &JobConfig, fixture_name: &str) -> Result<Vec<CheckRecord>, CliError> {
    let n = cfg.grid.unwrap_or(32);
    let t = slice_time(cfg, 1.5)?;
    let (s, g, _) = slice_data(fixture_name, datasets::torus(n)?, t)?;
    let exact = kasner_exponents(fixture_name).is_some();
    let tol = cfg.tol("constraints", if exact { 1e-6 } else { 1e-4 });
    let tag = format!("{fixture_name}@t={t},n={n}");
    let mut out = constraint_checks(&s, &tag, tol);
    let dt = cfg.fd_step.unwrap_or(1e-3);
    let ptol = cfg.tol("propagation", if exact { 1e-5 } else { 1e-3 });
    out.push(guarded(&format!("propagation_mismatch@{tag}"), ptol, Comparison::AtMost, || {
        let pc = constraint_propagation_check(&s, &g, dt)?;
        Ok(CheckRecord::new(format!("propagation_mismatch@{tag}"), pc.mismatch, 0.0, ptol, Comparison::AtMost, Provenance::Oracle))
    }));
    Ok(out)
}

/// Observed orders of the propagation mismatch in `dt` (64², dt = 0.04, 0.02)
/// and in `h` (16², 32² at dt = 1e-5) on seeded data with a general gauge.
pub fn propagation_order_checks(n_time: usize) -> Vec<CheckRecord> {
    let run = |n: usize, dt: f64| -> Result<f64, CliError> {
        let grid = datasets::unit_torus(n)?;
        Ok(constraint_propagation_check(&datasets::seeded_state(grid), &datasets::general_gauge(&grid), dt)?.mismatch)
    };
    let pair = |name: String, a: Result<f64, CliError>, b: Result<f64, CliError>, min: f64| match (a, b) {
        (Ok(a), Ok(b)) => CheckRecord::at_least(name, oracles::order(a, b), min),
        (Err(e), _) | (_, Err(e)) => CheckRecord::errored(name, min, Comparison::AtLeast, e),
    };
    vec![
        pair(format!("propagation_order_dt@n={n_time},dt=[0.04,0.02]"), run(n_time, 4e-2), run(n_time, 2e-2), 1.0),
        pair("propagation_order_h@n=[16,32],dt=1e-5".into(), run(16, 1e-5), run(32, 1e-5), 3.0),
    ]
}

// ---------- Weyl ----------

/// Reduced `E`, `B` against the 4D frame Weyl tensor at a few grid nodes.
pub fn weyl_oracle_checks(fixture_name: &str, fx: &Fixture, s: &CanonicalState, t: f64, tol: f64) -> Vec<CheckRecord> {
    let w = match weyl_fields(s) {
        Ok(w) => w,
        Err(e) => return vec![CheckRecord::errored(format!("weyl@{fixture_name}"), tol, Comparison::AtMost, e)],
    };
    let len = s.grid.len();
    let mut nodes: Vec<usize> = [0, 37, 300, 517, 1000].into_iter().map(|k| k % len).collect();
    nodes.dedup();
    let mut out = Vec::new();
    for k in nodes {
        let p = s.grid.point(k);
        let at = format!("{fixture_name}@t={t},x={},y={}", p[0], p[1]);
        match oracles::slice_weyl(fx, &[t, p[0], p[1], 0.0]) {
            Ok((e, b, qb)) => {
                let (ae, ab) = adm_mixed(&w, k);
                out.push(CheckRecord::new(format!("weyl_electric_vs_4d@{at}"), max_diff(&mixed(&e, &qb), &ae), 0.0, tol, Comparison::AtMost, Provenance::Oracle));
                out.push(CheckRecord::new(format!("weyl_magnetic_vs_4d@{at}"), max_diff(&mixed(&b, &qb), &ab), 0.0, tol, Comparison::AtMost, Provenance::Oracle));
            }
            Err(e) => out.push(CheckRecord::errored(format!("weyl_vs_4d@{at}"), tol, Comparison::AtMost, e)),
        }
    }
    out
}

/// Largest magnetic component and smallest Bel-Robinson density.
pub fn weyl_extremes(s: &CanonicalState) -> Result<(f64, f64), Error> {
    let w = weyl_fields(s)?;
    let b = w.b_ab.iter().chain(&w.b3a).chain(&w.ba3).chain([&w.b33]).map(|g| max_norm(g)).fold(0.0, f64::max);
    let d = bel_robinson_density(&w, s).into_iter().fold(f64::INFINITY, f64::min);
    Ok((b, d))
}

fn weyl_job(cfg: &JobConfig, fixture_name: &str) -> Result<Vec<CheckRecord>, CliError> {
    let n = cfg.grid.unwrap_or(32);
    let t = slice_time(cfg, 1.5)?;
    let (s, _, fx) = slice_data(fixture_name, datasets::torus(n)?, t)?;
    let fx = fx.expect("slice fixture");
    let exact = kasner_exponents(fixture_name).is_some();
    let tol = cfg.tol("weyl", if exact { 1e-5 } else { 1e-4 });
    let mut out = weyl_oracle_checks(fixture_name, &fx, &s, t, tol);
    let tag = format!("{fixture_name}@t={t},n={n}");
    match weyl_extremes(&s) {
        Ok((b, d)) => {
            if exact {
                out.push(CheckRecord::bound(format!("magnetic_max@{tag}"), b, cfg.tol("magnetic", 1e-8)));
            }
            out.push(CheckRecord::at_least(format!("bel_robinson_density_min@{tag}"), d, 0.0));
        }
        Err(e) => out.push(CheckRecord::errored(format!("weyl@{tag}"), tol, Comparison::AtMost, e)),
    }
    Ok(out)
}

// ---------- wave ----------

fn bump(r: f64) -> f64 {
    if r < 1.0 {
        (-1.0 / (1.0 - r * r)).exp()
    } else {
        0.0
    }
}

/// Quadrature orders scaled from a base Gauss-Legendre order.
pub fn quadrature(cfg: &JobConfig) -> QuadratureSpec {
    match cfg.quad {
        None => QuadratureSpec::default(),
        Some(q) => QuadratureSpec {
            sphere_theta: q,
            sphere_phi: 2 * q,
            disk_radial: q + q / 2,
            disk_angle: 2 * q,
            time_nodes: q,
            ..QuadratureSpec::default()
        },
    }
}

/// Kernel reproduction, descent, Huygens, Duhamel and Picard checks.
pub fn wave_checks(cfg: &JobConfig) -> Vec<CheckRecord> {
    let q = quadrature(cfg);
    let mut out = Vec::new();
    let tol_pw = cfg.tol("plane_wave", 1e-8);
    out.push(guarded("plane_wave_3d", tol_pw, Comparison::Within, || {
        let k = 3f64.sqrt();
        let u0 = fd_field(3, |y| (y[0] + y[1] + y[2]).sin());
        let u1 = fd_field(3, move |y| -k * (y[0] + y[1] + y[2]).cos());
        let d = CauchyData::new(3, u0, u1)?;
        let v = kirchhoff_3d(&d, &[0.1, 0.2, 0.3], 0.7, &q)?.value;
        Ok(CheckRecord::within("plane_wave_3d@x=(0.1,0.2,0.3),t=0.7", v, (0.6 - k * 0.7).sin(), tol_pw, Provenance::Formula))
    }));
    let tol_t = cfg.tol("unit_velocity", 1e-10);
    for dim in [2, 3] {
        for t in [0.5, 2.5] {
            let name = format!("unit_velocity_{dim}d@t={t}");
            out.push(guarded(&name, tol_t, Comparison::Within, || {
                let d = CauchyData::new(dim, constant(dim, 0.0), constant(dim, 1.0))?;
                let x = vec![0.3; dim];
                let v = if dim == 3 { kirchhoff_3d(&d, &x, t, &q)?.value } else { descent_2d(&d, &x, t, &q)?.value };
                Ok(CheckRecord::within(name.clone(), v, t, tol_t, Provenance::Formula))
            }));
        }
    }
    let tol_d = cfg.tol("descent", 1e-8);
    for (x, t) in [([0.2, -0.1], 0.8), ([0.0, 0.5], 1.3), ([-0.4, 0.3], 0.25)] {
        let name = format!("descent_identity@x=({},{}),t={t}", x[0], x[1]);
        out.push(guarded(&name, tol_d, Comparison::Within, || {
            let u0 = fd_field(2, |y| (-(y[0] * y[0] + y[1] * y[1])).exp() * (1.3 * y[0]).cos());
            let u1 = fd_field(2, |y| 0.5 * (0.7 * y[1] - 0.2).sin() + 0.1 * y[0] * y[1]);
            let d2 = CauchyData::new(2, u0, u1)?;
            let a = descent_2d(&d2, &x, t, &q)?.value;
            let b = kirchhoff_3d(&d2.lifted()?, &[x[0], x[1], 0.37], t, &q)?.value;
            Ok(CheckRecord::within(name.clone(), a, b, tol_d, Provenance::Oracle))
        }));
    }
    let tol_h = cfg.tol("huygens", 1e-10);
    for t in [3.0, 5.0] {
        let name = format!("huygens@t={t}");
        match CauchyData::radial(3, |_| 0.0, bump).map(|d| d.with_support(1.0)).and_then(|d| huygens_probe(&d, &[0.0, 0.0], t, &q)) {
            Ok(p) => {
                out.push(CheckRecord::bound(format!("strong_huygens_3d@t={t}"), p.u3d.value.abs(), tol_h));
                out.push(CheckRecord::at_least(format!("tail_2d@t={t}"), p.u2d.value, 1e-3));
            }
            Err(e) => out.push(CheckRecord::errored(name, tol_h, Comparison::AtMost, e)),
        }
    }
    let tol_s = cfg.tol("duhamel", 1e-8);
    for dim in [2, 3] {
        for t in [0.3, 1.0, 2.2] {
            let name = format!("duhamel_unit_source_{dim}d@t={t}");
            out.push(guarded(&name, tol_s, Comparison::Within, || {
                let d = CauchyData::new(dim, constant(dim, 0.0), constant(dim, 0.0))?.with_source(Source::Fixed(Arc::new(|_, _| 1.0)));
                let v = duhamel_solve(&d, &vec![0.2; dim], t, &q, 1)?.value;
                Ok(CheckRecord::within(name.clone(), v, t * t / 2.0, tol_s, Provenance::Formula))
            }));
        }
    }
    let tol_p = cfg.tol("picard", 1e-3);
    out.push(guarded("picard_vs_fdtd", tol_p, Comparison::Within, || {
        let (amp, r0, t) = (0.5, 0.3, 0.5);
        let d = CauchyData::radial(3, move |r| amp * (-4.0 * r * r).exp(), |_| 0.0)?.with_source(Source::Nonlinear(Arc::new(|u, _, _| -u * u * u)));
        let v = duhamel_solve(&d, &[r0, 0.0, 0.0], t, &q, 8)?.value;
        let reference = oracles::fdtd_radial(move |r| amp * (-4.0 * r * r).exp(), |_| 0.0, |u, _, _| -u * u * u, r0, t, 2e-3);
        Ok(CheckRecord::within(format!("picard_vs_fdtd@r={r0},t={t}"), v, reference, tol_p, Provenance::Oracle))
    }));
    out
}
