//! The acceptance criteria as named groups of checks.

use std::time::{Duration, Instant};

use cartan_core::curvature::{contract_curvature, curvature_two_forms, riemann_divergence_residual, second_bianchi_residual, solve_spin_connection};
use cartan_core::field::{self, FieldRef};
use cartan_core::fixtures::{self, halton_points, Fixture, Mode};
use cartan_core::forms::MetricField;
use cartan_core::math::max_abs;
use cartan_core::quasi_local::{cronstrom_connection, optical_killing_forms, RadialField};
use cartan_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{JobConfig, JobKind};
use crate::datasets;
use crate::jobs::{
    bel_robinson_checks, constraint_checks, fd_coframe, guarded, kasner_formula_checks, label, oracle_deviation,
    penrose_checks, propagation_order_checks, reduction_checks, schwarzschild_formula_checks, slice_data, twist_checks, wave_checks,
    weyl_extremes, weyl_oracle_checks,
};
use crate::oracles::max_diff;
use crate::report::{CheckRecord, Comparison, Provenance};

pub const KASNER: [f64; 3] = [2.0 / 3.0, 2.0 / 3.0, -1.0 / 3.0];
pub const KASNER_FIXTURE: &str = "kasner(2/3,2/3,-1/3)";
pub const TILTED_FIXTURE: &str = "tilted_kasner(2/3,2/3,-1/3,0.3,0.1)";

/// Number of acceptance criteria.
pub const CRITERIA: usize = 11;

/// Criteria run by `suite` without `--all`.
pub const QUICK: [usize; 7] = [2, 3, 5, 6, 7, 9, 11];

/// Checks of one criterion with its wall-clock time.
#[derive(Clone, Debug)]
pub struct CriterionOutcome {
    pub index: usize,
    pub title: &'static str,
    pub checks: Vec<CheckRecord>,
    pub elapsed: Duration,
}

impl CriterionOutcome {
    pub fn pass(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.pass)
    }
}

pub fn title(index: usize) -> &'static str {
    match index {
        1 => "frame curvature agrees with the Christoffel oracle",
        2 => "closed-form Kasner and Schwarzschild data",
        3 => "vacuum Ricci and Bianchi identities",
        4 => "Penrose wave equation",
        5 => "Bel-Robinson symmetry, positivity and divergence",
        6 => "dimensional reduction agrees with the 3+1 curvature",
        7 => "twist potential",
        8 => "constraints and their propagation",
        9 => "electric and magnetic Weyl fields",
        10 => "wave kernels",
        11 => "radial gauge and optical forms",
        _ => "unknown",
    }
}

/// Runs one criterion; check names carry a `c{index}.` prefix.
pub fn run_criterion(index: usize) -> CriterionOutcome {
    let start = Instant::now();
    let checks = match index {
        1 => criterion_oracle(),
        2 => criterion_closed_forms(),
        3 => criterion_identities(),
        4 => criterion_penrose(),
        5 => criterion_bel_robinson(),
        6 => criterion_reduction(),
        7 => criterion_twist(),
        8 => criterion_constraints(),
        9 => criterion_weyl(),
        10 => wave_checks(&JobConfig::new(JobKind::Wave)),
        11 => criterion_quasi_local(),
        _ => vec![CheckRecord::errored("unknown_criterion", 0.0, Comparison::Within, format!("no criterion {index}"))],
    };
    let checks = checks
        .into_iter()
        .map(|mut c| {
            c.name = format!("c{index}.{}", c.name);
            c
        })
        .collect();
    CriterionOutcome { index, title: title(index), checks, elapsed: start.elapsed() }
}

pub fn run_criteria(indices: &[usize]) -> Vec<CriterionOutcome> {
    indices.iter().map(|&k| run_criterion(k)).collect()
}

/// `suite`: the quick criteria, or all of them with `all`.
pub fn run_suite(cfg: &JobConfig) -> Vec<CriterionOutcome> {
    if cfg.all {
        run_criteria(&(1..=CRITERIA).collect::<Vec<_>>())
    } else {
        run_criteria(&QUICK)
    }
}

fn fixture(f: Result<Fixture, Error>, name: &str) -> Result<Fixture, CheckRecord> {
    f.map_err(|e| CheckRecord::errored(format!("fixture@{name}"), 0.0, Comparison::Within, e))
}

/// Perturbations of Minkowski space with ten random modes each.
pub fn random_fixtures(count: usize, seed: u64, amp: f64) -> Vec<Result<Fixture, Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let modes: Vec<Mode> = (0..10)
                .map(|_| Mode {
                    amplitude: amp * rng.gen_range(-1.0..1.0),
                    wave: [0; 4].map(|_| rng.gen_range(-1.5..1.5)),
                    phase: rng.gen_range(0.0..std::f64::consts::TAU),
                    bump: amp * rng.gen_range(-1.0..1.0),
                })
                .collect();
            fixtures::perturbed_flat(&modes)
        })
        .collect()
}

fn named_fixtures() -> Vec<Result<Fixture, Error>> {
    vec![fixtures::kasner(KASNER), fixtures::schwarzschild(1.0), fixtures::equivariant("0.1*t*r", "0.2*sin(r)")]
}

fn criterion_oracle() -> Vec<CheckRecord> {
    let mut all = random_fixtures(20, 7, 1e-2);
    all.extend(named_fixtures());
    let analytic: Vec<Vec<CheckRecord>> = all
        .into_par_iter()
        .enumerate()
        .map(|(i, f)| match fixture(f, &format!("#{i}")) {
            Ok(fx) => fx
                .sample_points(3)
                .iter()
                .map(|x| {
                    let name = format!("oracle@{}#{i}@{}", fx.name, label(&fx.chart.names(), x));
                    guarded(&name, 1e-5, Comparison::AtMost, || {
                        Ok(CheckRecord::new(name.clone(), oracle_deviation(&fx.coframe, &fx, x)?, 0.0, 1e-5, Comparison::AtMost, Provenance::Oracle))
                    })
                })
                .collect(),
            Err(r) => vec![r],
        })
        .collect();
    let fd: Vec<Vec<CheckRecord>> = named_fixtures()
        .into_par_iter()
        .enumerate()
        .map(|(i, f)| match fixture(f, &format!("fd#{i}")) {
            Ok(fx) => {
                let x = fx.sample_points(1).remove(0);
                let name = format!("oracle_fd_coframe@{}@{}", fx.name, label(&fx.chart.names(), &x));
                vec![guarded(&name, 1e-4, Comparison::AtMost, || {
                    let cf = fd_coframe(&fx.coframe)?;
                    Ok(CheckRecord::new(name.clone(), oracle_deviation(&cf, &fx, &x)?, 0.0, 1e-4, Comparison::AtMost, Provenance::Oracle))
                })]
            }
            Err(r) => vec![r],
        })
        .collect();
    analytic.into_iter().chain(fd).flatten().collect()
}

fn criterion_closed_forms() -> Vec<CheckRecord> {
    let mut out = Vec::new();
    match fixtures::kasner(KASNER) {
        Ok(fx) => {
            for x in fx.sample_points(10) {
                let at = label(&fx.chart.names(), &x);
                match curvature_two_forms(&fx.coframe, &solve_spin_connection(&fx.coframe)).and_then(|c| c.at(&x)) {
                    Ok(c) => out.extend(kasner_formula_checks(&c, KASNER, x[0], &at, 1e-8)),
                    Err(e) => out.push(CheckRecord::errored(format!("kasner_two_form@{at}"), 1e-8, Comparison::Within, e)),
                }
            }
        }
        Err(e) => out.push(CheckRecord::errored("fixture@kasner", 1e-8, Comparison::Within, e)),
    }
    match fixtures::schwarzschild(1.0) {
        Ok(fx) => {
            for x in fx.sample_points(10) {
                out.extend(schwarzschild_formula_checks(&fx.coframe, 1.0, &x, 1e-8));
            }
        }
        Err(e) => out.push(CheckRecord::errored("fixture@schwarzschild", 1e-8, Comparison::Within, e)),
    }
    out
}

fn criterion_identities() -> Vec<CheckRecord> {
    let mut fxs = vacuum_fixtures();
    fxs.push(fixtures::equivariant("0.1*t*r", "0.2*sin(r)"));
    fxs.extend(random_fixtures(2, 11, 1e-2));
    fxs.into_par_iter()
        .enumerate()
        .map(|(i, f)| match fixture(f, &format!("#{i}")) {
            Ok(fx) => fx
                .sample_points(4)
                .iter()
                .flat_map(|x| {
                    let at = format!("{}@{}", fx.name, label(&fx.chart.names(), x));
                    let mut out = Vec::new();
                    match curvature_two_forms(&fx.coframe, &solve_spin_connection(&fx.coframe)).and_then(|c| c.at(x)) {
                        Ok(c) => {
                            out.push(CheckRecord::bound(format!("first_bianchi@{at}"), c.first_bianchi_residual(), 1e-8));
                            if fx.vacuum {
                                out.push(CheckRecord::bound(format!("ricci_sup@{at}"), max_abs(&contract_curvature(&c).ricci), 1e-6));
                            }
                        }
                        Err(e) => out.push(CheckRecord::errored(format!("curvature@{at}"), 1e-8, Comparison::AtMost, e)),
                    }
                    let name = format!("second_bianchi@{at}");
                    out.push(guarded(&name, 1e-4, Comparison::AtMost, || {
                        Ok(CheckRecord::bound(name.clone(), second_bianchi_residual(&fx.coframe, x, 1e-3)?, 1e-4))
                    }));
                    if fx.vacuum {
                        let name = format!("contracted_bianchi@{at}");
                        out.push(guarded(&name, 1e-4, Comparison::AtMost, || {
                            Ok(CheckRecord::bound(name.clone(), riemann_divergence_residual(&fx.coframe, x, 1e-3)?, 1e-4))
                        }));
                    }
                    out
                })
                .collect(),
            Err(r) => vec![r],
        })
        .collect::<Vec<_>>()
        .concat()
}

fn vacuum_fixtures() -> Vec<Result<Fixture, Error>> {
    vec![fixtures::kasner(KASNER), fixtures::schwarzschild(1.0), fixtures::parse_fixture(TILTED_FIXTURE)]
}

fn criterion_penrose() -> Vec<CheckRecord> {
    vacuum_fixtures()
        .into_par_iter()
        .enumerate()
        .map(|(i, f)| match fixture(f, &format!("#{i}")) {
            Ok(fx) => fx.sample_points(2).iter().flat_map(|x| penrose_checks(&fx, x, 1e-3, 1e-2, 1e-3, 2.0)).collect(),
            Err(r) => vec![r],
        })
        .collect::<Vec<_>>()
        .concat()
}

fn criterion_bel_robinson() -> Vec<CheckRecord> {
    let mut fxs = vacuum_fixtures();
    fxs.extend(random_fixtures(1, 13, 1e-2));
    fxs.into_par_iter()
        .enumerate()
        .map(|(i, f)| match fixture(f, &format!("#{i}")) {
            Ok(fx) => fx
                .sample_points(100)
                .iter()
                .enumerate()
                .flat_map(|(k, x)| {
                    let div = (fx.vacuum && k < 2).then_some((1e-3, 1e-4, 1e-2));
                    bel_robinson_checks(&fx, x, div, 1e-8)
                })
                .collect(),
            Err(r) => vec![r],
        })
        .collect::<Vec<_>>()
        .concat()
}

fn criterion_reduction() -> Vec<CheckRecord> {
    [datasets::kk_polarized(), datasets::kk_kasner(KASNER), datasets::kk_twisted()]
        .into_par_iter()
        .map(|d| match d {
            Ok(ds) => halton_points(&ds.sample_box, 4).iter().flat_map(|x| reduction_checks(&ds, x, 1e-5, 1e-8)).collect(),
            Err(e) => vec![CheckRecord::errored("dataset", 1e-5, Comparison::AtMost, e)],
        })
        .collect::<Vec<_>>()
        .concat()
}

fn criterion_twist() -> Vec<CheckRecord> {
    [datasets::kk_plane_wave(), datasets::kk_constant_field(0.7), datasets::kk_nonclosed()]
        .into_iter()
        .flat_map(|d| match d {
            Ok(ds) => twist_checks(&ds, 1e-10, 1e-8),
            Err(e) => vec![CheckRecord::errored("dataset", 1e-10, Comparison::AtMost, e)],
        })
        .collect()
}

fn criterion_constraints() -> Vec<CheckRecord> {
    let mut out = match datasets::torus(64).and_then(|g| slice_data(KASNER_FIXTURE, g, 1.5)) {
        Ok((s, _, _)) => constraint_checks(&s, "kasner@t=1.5,n=64", 1e-6),
        Err(e) => vec![CheckRecord::errored("kasner_slice", 1e-6, Comparison::AtMost, e)],
    };
    out.extend(propagation_order_checks(64));
    out
}

fn criterion_weyl() -> Vec<CheckRecord> {
    let mut out = Vec::new();
    match datasets::unit_torus(32) {
        Ok(grid) => {
            let s = datasets::time_symmetric_state(grid);
            match weyl_extremes(&s) {
                Ok((b, d)) => {
                    out.push(CheckRecord::new("magnetic_max@time_symmetric", b, 0.0, 0.0, Comparison::AtMost, Provenance::Formula));
                    out.push(CheckRecord::at_least("bel_robinson_density_min@time_symmetric", d, 0.0));
                }
                Err(e) => out.push(CheckRecord::errored("weyl@time_symmetric", 0.0, Comparison::AtMost, e)),
            }
        }
        Err(e) => out.push(CheckRecord::errored("grid", 0.0, Comparison::AtMost, e)),
    }
    for (fixture_name, tol) in [(KASNER_FIXTURE, 1e-5), (TILTED_FIXTURE, 1e-4)] {
        let t = 1.5;
        match datasets::torus(32).and_then(|g| slice_data(fixture_name, g, t)) {
            Ok((s, _, Some(fx))) => {
                out.extend(weyl_oracle_checks(fixture_name, &fx, &s, t, tol));
                match weyl_extremes(&s) {
                    Ok((b, d)) => {
                        if fixture_name == KASNER_FIXTURE {
                            out.push(CheckRecord::bound(format!("magnetic_max@{fixture_name}"), b, 1e-8));
                        }
                        out.push(CheckRecord::at_least(format!("bel_robinson_density_min@{fixture_name}"), d, 0.0));
                    }
                    Err(e) => out.push(CheckRecord::errored(format!("weyl@{fixture_name}"), tol, Comparison::AtMost, e)),
                }
            }
            Ok(_) => out.push(CheckRecord::errored(format!("weyl@{fixture_name}"), tol, Comparison::AtMost, "no fixture")),
            Err(e) => out.push(CheckRecord::errored(format!("slice@{fixture_name}"), tol, Comparison::AtMost, e)),
        }
    }
    out
}

fn antisymmetric(rows: [[f64; 3]; 3]) -> Vec<f64> {
    let mut f = vec![0.0; 9];
    for mu in 0..3 {
        for nu in mu + 1..3 {
            f[mu * 3 + nu] = rows[mu][nu];
            f[nu * 3 + mu] = -rows[mu][nu];
        }
    }
    f
}

/// `η + ε h` with `h` quadratic in the coordinates.
fn quadratic_perturbation(eps: f64) -> Result<MetricField, Error> {
    let chart = fixtures::minkowski4().chart;
    let srcs = [
        "-1 + eps*(x*x + y*z)",
        "eps*t*y",
        "0",
        "eps*x*z",
        "1 + eps*(t*t - z*y)",
        "eps*t*x",
        "0",
        "1 + eps*x*y",
        "eps*y*y",
        "1 + eps*t*z",
    ];
    let comps: Vec<FieldRef> = srcs.iter().map(|s| field::expr_field(s, &chart, &[("eps", eps)])).collect::<Result<_, _>>()?;
    MetricField::new(chart, comps)
}

fn criterion_quasi_local() -> Vec<CheckRecord> {
    let mut out = Vec::new();
    let f = antisymmetric([[0.0, 0.7, -1.1], [0.0, 0.0, 0.4], [0.0, 0.0, 0.0]]);
    for x in [[0.3, -0.2, 0.5], [1.5, 2.0, -0.7]] {
        let name = format!("cronstrom_constant_field@x=({},{},{})", x[0], x[1], x[2]);
        out.push(guarded(&name, 1e-12, Comparison::AtMost, || {
            let theta = cronstrom_connection(&RadialField::constant(3, 1, f.clone())?, &x)?;
            let want: Vec<f64> = (0..3).map(|mu| -0.5 * (0..3).map(|nu| f[mu * 3 + nu] * x[nu]).sum::<f64>()).collect();
            Ok(CheckRecord::new(name.clone(), max_diff(&theta, &want), 0.0, 1e-12, Comparison::AtMost, Provenance::Formula))
        }));
    }
    let mink = fixtures::minkowski4();
    for x in mink.sample_points(3) {
        let at = label(&mink.chart.names(), &x);
        match (optical_killing_forms(&mink.metric, &x), mink.metric.eval(&x)) {
            (Ok(o), Ok(eta)) => {
                let four: Vec<f64> = eta.iter().map(|v| 4.0 * v).collect();
                out.push(CheckRecord::new(format!("optical_k_is_4eta@{at}"), max_diff(&o.k, &four), 0.0, 1e-12, Comparison::AtMost, Provenance::Formula));
                out.push(CheckRecord::bound(format!("optical_ck_vanishes@{at}"), max_abs(&o.ck), 1e-12));
                out.push(CheckRecord::within(format!("optical_box@{at}"), o.box_f, 8.0, 1e-12, Provenance::Formula));
            }
            (Err(e), _) | (_, Err(e)) => out.push(CheckRecord::errored(format!("optical@{at}"), 1e-12, Comparison::AtMost, e)),
        }
    }
    out.push(guarded("conformal_killing_exponent", 0.1, Comparison::Within, || {
        let m = quadratic_perturbation(0.05)?;
        let dir = [0.3, -0.5, 0.7, 0.4];
        let size = |k: i32| -> Result<f64, Error> {
            let s = 0.5f64.powi(k);
            let x: Vec<f64> = dir.iter().map(|d| s * d).collect();
            Ok(max_abs(&optical_killing_forms(&m, &x)?.ck))
        };
        let (a, b) = (size(2)?, size(3)?);
        Ok(CheckRecord::within("conformal_killing_exponent", (a / b).log2(), 2.0, 0.1, Provenance::Invariant))
    }));
    out
}
