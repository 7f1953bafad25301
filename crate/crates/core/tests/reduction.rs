#![allow(clippy::needless_range_loop, clippy::identity_op, clippy::erasing_op)]

use std::sync::Arc;

use cartan_core::curvature::{contract_curvature, curvature_two_forms, solve_spin_connection};
use cartan_core::error::Error;
use cartan_core::field::{self, Chart};
use cartan_core::fixtures::halton_points;
use cartan_core::math::max_abs;
use cartan_core::reduction::*;
use proptest::prelude::*;

const P: [f64; 3] = [2.0 / 3.0, 2.0 / 3.0, -1.0 / 3.0];

fn chart3(t: (f64, f64)) -> Arc<Chart> {
    Arc::new(Chart::new(&["t", "x", "y"], &[-1, 1, 1], &[t, (-5.0, 5.0), (-5.0, 5.0)]).unwrap())
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn kasner() -> KKData {
    let g = ["-1", "0", "0", &format!("t^({})", 2.0 * P[0]), "0", &format!("t^({})", 2.0 * P[1])];
    KKData::from_expressions(chart3((0.2, 5.0)), &g, &format!("{}*log(t)", P[2]), None).unwrap()
}

/// A generic twisted configuration.
fn twisted() -> KKData {
    KKData::from_expressions(
        chart3((-2.0, 2.0)),
        &["-(1 + 0.1*x^2)", "0.05*y", "0", "1 + 0.2*sin(t)", "0.1*x*y", "1 + 0.1*cos(x + y)"],
        "0.2*sin(x + t) + 0.1*y",
        Some(&["0.1*y", "0.3*x*t", "0.2*sin(x)"]),
    )
    .unwrap()
}

fn scalar_4d(kk: &KKData, x: &[f64]) -> f64 {
    let cf = assemble_kk_coframe(kk).unwrap();
    let c = curvature_two_forms(&cf, &solve_spin_connection(&cf)).unwrap().at(&[x[0], x[1], x[2], 0.0]).unwrap();
    contract_curvature(&c).scalar
}

fn sample(n: usize) -> Vec<Vec<f64>> {
    halton_points(&[(-0.8, 0.8), (-1.0, 1.0), (-1.0, 1.0)], n)
}

#[test]
fn kasner_fiber_curvature() {
    let kk = kasner();
    let r = reduced_riemann(&kk, &[1.0, 0.0, 0.0]).unwrap().to_frame4();
    // R^3_{030} = p3 (1 − p3) / t²
    let idx = 3 * 64 + 0 * 16 + 3 * 4;
    assert!((r[idx] + 4.0 / 9.0).abs() < 1e-12, "{}", r[idx]);
    for t in [0.5, 1.0, 2.5] {
        let x = [t, 0.3, -0.2];
        let full = riemann_4d(&kk, &x).unwrap();
        let red = reduced_riemann(&kk, &x).unwrap().to_frame4();
        assert!(max_diff(&full, &red) < 1e-10, "{}", max_diff(&full, &red));
        assert!(ricci_projections(&kk, &x).unwrap().max_abs() < 1e-10);
        assert!(ricci_projections_4d(&kk, &x).unwrap().max_abs() < 1e-10);
    }
}

#[test]
fn twisted_riemann_matches_four_dimensional_pipeline() {
    let kk = twisted();
    for x in sample(6) {
        let full = riemann_4d(&kk, &x).unwrap();
        let red = reduced_riemann(&kk, &x).unwrap().to_frame4();
        assert!(max_diff(&full, &red) < 1e-9, "{x:?}: {}", max_diff(&full, &red));
    }
}

#[test]
fn twisted_ricci_projections_match() {
    let kk = twisted();
    for x in sample(6) {
        let a = ricci_projections(&kk, &x).unwrap();
        let b = ricci_projections_4d(&kk, &x).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-9, "{x:?}: {}", a.max_abs_diff(&b));
        assert!(a.max_abs() > 1e-3);
    }
}

#[test]
fn scalar_curvature_matches() {
    let kk = twisted();
    let s = reduced_scalar_curvature(&kk);
    for x in sample(6) {
        let v = s.eval(&x).unwrap();
        assert!((v - scalar_4d(&kk, &x)).abs() < 1e-9);
    }
}

#[test]
fn constant_field_strength_cross_terms() {
    // A = b x dy on flat 2+1 with γ = 0: F_{12} = b
    let b = 0.7;
    let kk = KKData::from_expressions(chart3((-2.0, 2.0)), &["-1", "0", "0", "1", "0", "1"], "0", Some(&["0", "0", &format!("{b}*x")]))
        .unwrap();
    let x = [0.1, 0.2, 0.3];
    let red = reduced_riemann(&kk, &x).unwrap();
    assert!(max_abs(&red.cross) < 1e-12);
    // R_{1212} = −¾ b², R_{1313} = R_{2323} = ¼ b²
    assert!((red.pure[1 * 27 + 2 * 9 + 1 * 3 + 2] + 0.75 * b * b).abs() < 1e-12);
    assert!((red.ext[1 * 3 + 1] - 0.25 * b * b).abs() < 1e-12);
    let full = riemann_4d(&kk, &x).unwrap();
    assert!(max_diff(&full, &red.to_frame4()) < 1e-12);
    let ric = ricci_projections(&kk, &x).unwrap();
    assert!((ric.ext - 0.5 * b * b).abs() < 1e-12);
}

#[test]
fn gauge_shift_leaves_projections_unchanged() {
    let kk = twisted();
    let lambda = field::expr_field("x*y + 0.3*sin(t)", &kk.chart3, &[]).unwrap();
    let shifted = kk.gauge_shifted(lambda).unwrap();
    for x in sample(4) {
        let a = ricci_projections(&kk, &x).unwrap();
        let b = ricci_projections(&shifted, &x).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-12);
        let c = ricci_projections_4d(&shifted, &x).unwrap();
        assert!(a.max_abs_diff(&c) < 1e-9);
        assert!((scalar_4d(&kk, &x) - scalar_4d(&shifted, &x)).abs() < 1e-9);
    }
}

fn opts() -> TwistOptions {
    TwistOptions { sample_box: Some(vec![(-0.5, 0.5), (-0.5, 0.5), (-0.5, 0.5)]), ..TwistOptions::default() }
}

#[test]
fn twist_of_plane_wave_is_exact() {
    let kk = KKData::from_expressions(
        chart3((-2.0, 2.0)),
        &["-1", "0", "0", "1", "0", "1"],
        "0",
        Some(&["0", "0", "sin(x - t)"]),
    )
    .unwrap();
    let tw = twist_potential(&kk, &[0.0, 0.0, 0.0], &opts()).unwrap();
    assert!(tw.closure_residual < 1e-10);
    assert!(tw.path_residual < 1e-10, "{}", tw.path_residual);
    assert!(tw.exactness_residual < 1e-7, "{}", tw.exactness_residual);
}

#[test]
fn non_closed_twist_is_rejected() {
    let kk = KKData::from_expressions(
        chart3((-2.0, 2.0)),
        &["-1", "0", "0", "1", "0", "1"],
        "0",
        Some(&["0", "0", "0.5*x^2"]),
    )
    .unwrap();
    match twist_potential(&kk, &[0.0, 0.0, 0.0], &opts()) {
        Err(Error::NotClosed(r)) => assert!(r > 0.1),
        other => panic!("expected NotClosed, got {other:?}"),
    }
}

#[test]
fn constant_field_has_linear_twist() {
    let b = 0.4;
    let kk = KKData::from_expressions(chart3((-2.0, 2.0)), &["-1", "0", "0", "1", "0", "1"], "0", Some(&["0", "0", &format!("{b}*x")]))
        .unwrap();
    let tw = twist_potential(&kk, &[0.0, 0.0, 0.0], &opts()).unwrap();
    let w = tw.omega.eval(&[0.5, 0.0, 0.0]).unwrap();
    assert!((w.abs() - 0.5 * b).abs() < 1e-12, "{w}");
    assert!(tw.omega.eval(&[0.0, 0.3, -0.2]).unwrap().abs() < 1e-12);
}

#[test]
fn kasner_solves_wave_map_system() {
    let kk = kasner();
    let g = kk.conformal_metric();
    let omega = field::zero(3);
    for t in [0.6, 1.0, 2.0] {
        let r = wavemap_residuals(&g, &kk.gamma, &omega, &[t, 0.1, 0.2]).unwrap();
        assert!(r.r_gamma.abs() < 1e-10);
        assert!(r.r_omega.abs() < 1e-10);
        assert!(max_abs(&r.einstein) > 1e-3);
        assert!(max_abs(&r.mismatch) < 1e-10, "{:?}", r.mismatch);
    }
}

#[test]
fn linear_twist_wave_map_residual() {
    // ω = c t on Minkowski with γ = 0: r_γ = −½c²
    let c3 = chart3((-2.0, 2.0));
    let g = cartan_core::forms::MetricField::flat(c3.clone());
    let omega = field::expr_field("0.6*t", &c3, &[]).unwrap();
    let r = wavemap_residuals(&g, &field::zero(3), &omega, &[0.0, 0.0, 0.0]).unwrap();
    assert!((r.r_gamma + 0.18).abs() < 1e-12);
    assert!(r.r_omega.abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]
    #[test]
    fn gauge_invariance(c1 in -1.0f64..1.0, c2 in -1.0f64..1.0, k in 0.2f64..2.0) {
        let kk = twisted();
        let src = format!("{c1}*t*x + {c2}*sin({k}*y)");
        let lambda = field::expr_field(&src, &kk.chart3, &[]).unwrap();
        let shifted = kk.gauge_shifted(lambda).unwrap();
        let x = [0.2 * c1, 0.3 * c2, 0.1 * k];
        let a = ricci_projections(&kk, &x).unwrap();
        let b = ricci_projections(&shifted, &x).unwrap();
        prop_assert!(a.max_abs_diff(&b) < 1e-12);
        let ra = reduced_riemann(&kk, &x).unwrap();
        let rb = reduced_riemann(&shifted, &x).unwrap();
        prop_assert!(max_diff(&ra.to_frame4(), &rb.to_frame4()) < 1e-12);
    }
}
