#![allow(clippy::needless_range_loop)]

use std::sync::Arc;

use cartan_core::field::{constant, fd_field};
use cartan_core::wave::*;
use cartan_core::Error;
use proptest::prelude::*;

fn bump(r: f64) -> f64 {
    if r < 1.0 {
        (-1.0 / (1.0 - r * r)).exp()
    } else {
        0.0
    }
}

fn quad() -> QuadratureSpec {
    QuadratureSpec::default()
}

#[test]
fn spherical_mean_examples() {
    let q = quad();
    let c = constant(3, 2.5);
    for r in [0.0, 0.3, 4.0] {
        assert!((spherical_mean(&c, &[0.1, 0.2, 0.3], r, &q).unwrap().value - 2.5).abs() < 1e-13);
    }
    let lin = fd_field(3, |y| 1.0 + 2.0 * y[0] - y[1] + 0.5 * y[2]);
    let x = [0.3, -0.2, 0.7];
    let want = 1.0 + 0.6 + 0.2 + 0.35;
    assert!((spherical_mean(&lin, &x, 1.7, &q).unwrap().value - want).abs() < 1e-13);
    let sq = fd_field(3, |y| y.iter().map(|v| v * v).sum());
    assert!((spherical_mean(&sq, &[0.0; 3], 2.0, &q).unwrap().value - 4.0).abs() < 1e-13);
    assert!(spherical_mean(&sq, &[0.0; 3], -1.0, &q).is_err());
}

#[test]
fn low_orders_are_rejected() {
    let q = QuadratureSpec { sphere_theta: 3, ..quad() };
    assert!(spherical_mean(&constant(3, 1.0), &[0.0; 3], 1.0, &q).is_err());
    let q = QuadratureSpec { disk_angle: 9, ..quad() };
    assert!(q.validate().is_err());
}

#[test]
fn coarse_rule_is_flagged_by_doubling() {
    let q = QuadratureSpec { sphere_theta: 4, sphere_phi: 4, ..quad() };
    let f = fd_field(3, |y| (5.0 * y[0]).cos() * (4.0 * y[2]).cos());
    assert!(matches!(spherical_mean(&f, &[0.0; 3], 2.0, &q), Err(Error::Quadrature(_))));
}

#[test]
fn kirchhoff_trivial_data() {
    let q = quad();
    let d = CauchyData::new(3, constant(3, 1.7), constant(3, 0.0)).unwrap();
    assert!((kirchhoff_3d(&d, &[0.1, 0.0, 0.0], 2.0, &q).unwrap().value - 1.7).abs() < 1e-10);
    let d = CauchyData::new(3, constant(3, 0.0), constant(3, 1.0)).unwrap();
    for t in [0.0, 0.5, 3.0] {
        assert!((kirchhoff_3d(&d, &[0.1, 0.0, 0.0], t, &q).unwrap().value - t).abs() < 1e-10);
    }
}

#[test]
fn kirchhoff_reproduces_plane_wave() {
    let k = [1.0, 1.0, 1.0];
    let kn = 3f64.sqrt();
    let u0 = fd_field(3, move |y| (k[0] * y[0] + k[1] * y[1] + k[2] * y[2]).sin());
    let u1 = fd_field(3, move |y| -kn * (k[0] * y[0] + k[1] * y[1] + k[2] * y[2]).cos());
    let d = CauchyData::new(3, u0, u1).unwrap();
    let (x, t) = ([0.1, 0.2, 0.3], 0.7);
    let want = (0.6 - kn * t).sin();
    let got = kirchhoff_3d(&d, &x, t, &quad()).unwrap();
    assert!((got.value - want).abs() < 1e-8, "{} {}", got.value, want);
    assert!(got.error < 1e-8);
}

#[test]
fn footprint_outside_domain_is_an_error() {
    let d = CauchyData::new(3, constant(3, 1.0), constant(3, 0.0))
        .unwrap()
        .with_domain(&[(-1.0, 1.0); 3])
        .unwrap();
    assert!(kirchhoff_3d(&d, &[0.0; 3], 0.5, &quad()).is_ok());
    assert!(matches!(kirchhoff_3d(&d, &[0.0; 3], 1.5, &quad()), Err(Error::OutsideDomain { .. })));
}

#[test]
fn descent_trivial_data() {
    let q = quad();
    let d = CauchyData::new(2, constant(2, -0.4), constant(2, 0.0)).unwrap();
    assert!((descent_2d(&d, &[0.3, 0.1], 1.2, &q).unwrap().value + 0.4).abs() < 1e-10);
    let d = CauchyData::new(2, constant(2, 0.0), constant(2, 1.0)).unwrap();
    for t in [0.0, 0.4, 2.5] {
        assert!((descent_2d(&d, &[0.3, 0.1], t, &q).unwrap().value - t).abs() < 1e-10);
    }
}

#[test]
fn descent_identity() {
    let u0 = fd_field(2, |y| (-(y[0] * y[0] + y[1] * y[1])).exp() * (1.3 * y[0]).cos());
    let u1 = fd_field(2, |y| 0.5 * (0.7 * y[1] - 0.2).sin() + 0.1 * y[0] * y[1]);
    let d2 = CauchyData::new(2, u0, u1).unwrap();
    let d3 = d2.lifted().unwrap();
    let q = quad();
    for (x, t) in [([0.2, -0.1], 0.8), ([0.0, 0.5], 1.3), ([-0.4, 0.3], 0.25)] {
        let a = descent_2d(&d2, &x, t, &q).unwrap().value;
        let b = kirchhoff_3d(&d3, &[x[0], x[1], 0.37], t, &q).unwrap().value;
        assert!((a - b).abs() < 1e-8, "{a} {b}");
    }
}

#[test]
fn two_dimensional_plane_wave() {
    let k = [0.6, -0.8];
    let u0 = fd_field(2, move |y| (k[0] * y[0] + k[1] * y[1]).cos());
    let u1 = fd_field(2, move |y| (k[0] * y[0] + k[1] * y[1]).sin());
    let d = CauchyData::new(2, u0, u1).unwrap();
    let (x, t) = ([0.3, 0.4], 1.1);
    let got = descent_2d(&d, &x, t, &quad()).unwrap().value;
    // cos(k·x − t) with |k| = 1
    let phase = k[0] * x[0] + k[1] * x[1];
    assert!((got - (phase - t).cos()).abs() < 1e-8);
}

#[test]
fn duhamel_fixed_unit_source() {
    let q = quad();
    for dim in [2, 3] {
        let d = CauchyData::new(dim, constant(dim, 0.0), constant(dim, 0.0))
            .unwrap()
            .with_source(Source::Fixed(Arc::new(|_, _| 1.0)));
        let x = vec![0.2; dim];
        for t in [0.3, 1.0, 2.2] {
            let r = duhamel_solve(&d, &x, t, &q, 1).unwrap();
            assert!((r.value - t * t / 2.0).abs() < 1e-8, "dim {dim}: {} {}", r.value, t * t / 2.0);
        }
    }
}

#[test]
fn duhamel_fixed_source_matches_exact_solution() {
    // u = t² sin(y1) solves u_tt − Δu = (2 + t²) sin(y1) with zero data
    let d = CauchyData::new(3, constant(3, 0.0), constant(3, 0.0))
        .unwrap()
        .with_source(Source::Fixed(Arc::new(|y, t| (2.0 + t * t) * y[0].sin())));
    let r = duhamel_solve(&d, &[0.4, 0.1, -0.2], 0.9, &quad(), 1).unwrap();
    assert!((r.value - 0.81 * 0.4f64.sin()).abs() < 1e-8);
}

#[test]
fn duhamel_without_source_is_homogeneous() {
    let d = CauchyData::radial(3, |r| (-r * r).exp(), |r| 0.3 * (-2.0 * r * r).exp()).unwrap();
    let x = [0.3, 0.0, 0.0];
    let lin = kirchhoff_3d(&d, &x, 0.6, &quad()).unwrap().value;
    assert!((duhamel_solve(&d, &x, 0.6, &quad(), 3).unwrap().value - lin).abs() < 1e-12);
    let zero = d.clone().with_source(Source::Nonlinear(Arc::new(|_, _, _| 0.0)));
    let r = duhamel_solve(&zero, &x, 0.6, &quad(), 3).unwrap();
    assert!((r.value - lin).abs() < 1e-9, "{} {}", r.value, lin);
}

#[test]
fn picard_iterates_contract() {
    let d = CauchyData::radial(3, |r| 0.5 * (-4.0 * r * r).exp(), |_| 0.0)
        .unwrap()
        .with_source(Source::Nonlinear(Arc::new(|u, _, _| -u * u * u)));
    let r = duhamel_solve(&d, &[0.3, 0.0, 0.0], 0.5, &quad(), 8).unwrap();
    let h = &r.iterate_history;
    assert!(h.len() >= 3);
    for w in h.windows(2) {
        assert!(w[1] < w[0] || w[1] < 1e-14);
    }
    assert!(*h.last().unwrap() < 1e-10);
}

#[test]
fn picard_reports_non_contraction() {
    let d = CauchyData::radial(3, |r| 3.0 * (-r * r).exp(), |_| 0.0)
        .unwrap()
        .with_source(Source::Nonlinear(Arc::new(|u, _, _| 20.0 * u * u * u)));
    let q = QuadratureSpec { lattice_levels: 8, time_nodes: 6, ..quad() };
    match duhamel_solve(&d, &[0.0; 3], 1.5, &q, 6) {
        Err(Error::NonContraction(h)) => assert!(h.len() >= 2),
        Err(Error::NonFinite(_)) => {}
        other => panic!("expected a contraction failure, got {other:?}"),
    }
}

#[test]
fn nonlinear_source_needs_radial_data() {
    let d = CauchyData::new(3, constant(3, 0.1), constant(3, 0.0))
        .unwrap()
        .with_source(Source::Nonlinear(Arc::new(|u, _, _| -u)));
    assert!(duhamel_solve(&d, &[0.0; 3], 0.5, &quad(), 3).is_err());
}

#[test]
fn huygens_probe_bump() {
    let d = CauchyData::radial(3, |_| 0.0, bump).unwrap().with_support(1.0);
    let mut last = f64::INFINITY;
    for t in [3.0, 5.0, 9.0] {
        let p = huygens_probe(&d, &[0.0, 0.0], t, &quad()).unwrap();
        assert!(p.u3d.value.abs() <= 1e-10);
        assert!(p.u2d.value > 1e-3, "{}", p.u2d.value);
        assert!(p.u2d.value < last);
        last = p.u2d.value;
    }
    let d0 = CauchyData::radial(3, bump, |_| 0.0).unwrap().with_support(1.0);
    let p = huygens_probe(&d0, &[0.5, -0.5], 5.0, &quad()).unwrap();
    assert!(p.u3d.value.abs() <= 1e-10);
    assert!(huygens_probe(&d, &[0.0, 0.0], 0.9, &quad()).is_err());
}

#[test]
fn two_dimensional_tail_matches_direct_integral() {
    // at the centre: (1/t)·∫_0^1 s b(s)/√(1 − s²/t²) ds
    let d = CauchyData::radial(2, |_| 0.0, bump).unwrap().with_support(1.0);
    let t = 5.0;
    let got = descent_2d(&d, &[0.0, 0.0], t, &quad()).unwrap().value;
    let n = 20000;
    let h = 1.0 / n as f64;
    let direct: f64 = (0..n)
        .map(|i| {
            let s = (i as f64 + 0.5) * h;
            h * s * bump(s) / (t * t - s * s).sqrt()
        })
        .sum();
    assert!((got - direct).abs() < 1e-8, "{got} {direct}");
}

#[test]
fn energy_is_conserved() {
    let d = CauchyData::radial(3, |r| bump(r / 1.5), |r| 0.5 * bump(r / 1.5)).unwrap();
    let q = QuadratureSpec { sphere_theta: 32, sphere_phi: 64, tolerance: 1e-5, ..quad() };
    let h = 1e-3;
    let energy = |t: f64| {
        let n = 120;
        let rmax = 1.5 + t + 0.1;
        let dr = rmax / n as f64;
        let u = |r: f64, s: f64| kirchhoff_3d(&d, &[r, 0.0, 0.0], s, &q).unwrap().value;
        let mut acc = 0.0;
        for i in 0..=n {
            let r = i as f64 * dr;
            let ut = (u(r, t + h) - u(r, t - h)) / (2.0 * h);
            let ur = (u(r + h, t) - u((r - h).abs(), t)) / (2.0 * h);
            let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * 4.0 * std::f64::consts::PI * r * r * (ut * ut + ur * ur);
        }
        acc * dr / 3.0
    };
    let e: Vec<f64> = [0.2, 0.4, 0.8].iter().map(|&t| energy(t)).collect();
    for v in &e[1..] {
        assert!((v - e[0]).abs() < 0.01 * e[0], "{e:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]
    #[test]
    fn time_reversal(a in -1.0f64..1.0, b in -1.0f64..1.0, c in 0.2f64..1.5, t in 0.0f64..1.5) {
        let u0 = fd_field(3, move |y| a * (-c * (y[0] * y[0] + y[1] * y[1] + y[2] * y[2])).exp());
        let u1 = fd_field(3, move |y| b * (0.5 * y[0] - y[2]).sin() + 0.2 * y[1]);
        let d = CauchyData::new(3, u0, u1).unwrap();
        let x = [0.2, -0.3, 0.1];
        let fwd = kirchhoff_3d(&d.reversed(), &x, t, &quad()).unwrap().value;
        let bwd = kirchhoff_3d_backward(&d, &x, t, &quad()).unwrap().value;
        prop_assert!((fwd - bwd).abs() < 1e-10);
    }

    #[test]
    fn means_of_constants_are_constant(cst in -5.0f64..5.0, r in 0.0f64..10.0) {
        let f = constant(3, cst);
        let m = spherical_mean(&f, &[0.3, 0.1, -0.2], r, &quad()).unwrap().value;
        prop_assert!((m - cst).abs() < 1e-12);
        let d = CauchyData::new(2, constant(2, 0.0), constant(2, cst)).unwrap();
        prop_assert!((descent_2d(&d, &[0.0, 0.0], r, &quad()).unwrap().value - cst * r).abs() < 1e-10 * (1.0 + r));
    }
}
