#![allow(clippy::needless_range_loop)]

use cartan_core::curvature::*;
use cartan_core::fixtures::{self, Mode};
use cartan_core::forms::frame_dual;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const KASNER: [f64; 3] = [2.0 / 3.0, 2.0 / 3.0, -1.0 / 3.0];

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn random_modes(rng: &mut ChaCha8Rng, amp: f64) -> Vec<Mode> {
    (0..10)
        .map(|_| Mode {
            amplitude: amp * rng.gen_range(-1.0..1.0),
            wave: [0; 4].map(|_| rng.gen_range(-1.5..1.5)),
            phase: rng.gen_range(0.0..std::f64::consts::TAU),
            bump: amp * rng.gen_range(-1.0..1.0),
        })
        .collect()
}

/// Frame curvature from the Christoffel route, in the fixture's own coframe.
fn oracle_frame(fx: &fixtures::Fixture, x: &[f64]) -> Vec<f64> {
    let e = fx.coframe.eval(x).unwrap();
    coordinate_riemann_oracle(&fx.metric).at(x).unwrap().to_frame(&e).unwrap()
}

fn cartan(fx: &fixtures::Fixture, x: &[f64]) -> Curvature {
    curvature_two_forms(&fx.coframe, &solve_spin_connection(&fx.coframe)).unwrap().at(x).unwrap()
}

#[test]
fn kasner_two_form_coefficients() {
    let fx = fixtures::kasner(KASNER).unwrap();
    let c = cartan(&fx, &[2.0, 0.1, 0.2, 0.3]);
    assert!((c.two_form_coefficient(1, 2, 1, 2) - 1.0 / 9.0).abs() < 1e-12);
    for t in [0.7, 1.3, 2.9] {
        let c = cartan(&fx, &[t, 0.0, 0.0, 0.0]);
        for i in 1..4 {
            for j in 1..4 {
                if i != j {
                    let want = KASNER[i - 1] * KASNER[j - 1] / (t * t);
                    assert!((c.two_form_coefficient(i, j, i, j) - want).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn kasner_frame_dual_is_diagonal_inverse() {
    let fx = fixtures::kasner(KASNER).unwrap();
    let d = frame_dual(&fx.coframe, &[2.0, 0.0, 0.0, 0.0]).unwrap();
    let want = [1.0, 2f64.powf(-2.0 / 3.0), 2f64.powf(-2.0 / 3.0), 2f64.powf(1.0 / 3.0)];
    for mu in 0..4 {
        for a in 0..4 {
            let w = if mu == a { want[a] } else { 0.0 };
            assert!((d[mu * 4 + a] - w).abs() < 1e-14);
        }
    }
}

#[test]
fn schwarzschild_printed_spin_connection() {
    let m = 1.0;
    let fx = fixtures::schwarzschild(m).unwrap();
    let sc = solve_spin_connection(&fx.coframe);
    for x in fx.sample_points(10) {
        let (r, th) = (x[1], x[2]);
        let f = 1.0 - 2.0 * m / r;
        let e_minus_beta = f.sqrt();
        let dalpha = m / (r * r * f);
        let v = sc.at(&x).unwrap();
        // Θ^t_r = e^{−β} ∂_r α e^t
        assert!((v.get(0, 1, 0) - e_minus_beta * dalpha).abs() < 1e-12);
        // Θ^θ_r = r^{-1} e^{−β} e^θ, Θ^φ_r = r^{-1} e^{−β} e^φ, Θ^φ_θ = r^{-1} cot θ e^φ
        assert!((v.get(2, 1, 2) - e_minus_beta / r).abs() < 1e-12);
        assert!((v.get(3, 1, 3) - e_minus_beta / r).abs() < 1e-12);
        assert!((v.get(3, 2, 3) - th.cos() / (th.sin() * r)).abs() < 1e-12);
        assert!(v.antisymmetry_residual() < 1e-14);
    }
}

#[test]
fn equivariant_printed_spin_connection() {
    let fx = fixtures::equivariant("0.1*t*r", "0.2*sin(r) + 0.05*t").unwrap();
    let sc = solve_spin_connection(&fx.coframe);
    for x in fx.sample_points(10) {
        let (t, r) = (x[0], x[1]);
        let gamma = 0.2 * r.sin() + 0.05 * t;
        let v = sc.at(&x).unwrap();
        assert!((v.get(2, 1, 2) - (-gamma).exp() / r).abs() < 1e-12);
    }
}

#[test]
fn cartan_matches_christoffel_on_fixtures() {
    let fxs = vec![
        fixtures::kasner(KASNER).unwrap(),
        fixtures::schwarzschild(1.0).unwrap(),
        fixtures::equivariant("0.1*t*r", "0.2*sin(r)").unwrap(),
        fixtures::tilted_kasner(KASNER, 0.7, 0.2).unwrap(),
        fixtures::round_sphere(1.5).unwrap(),
    ];
    for fx in &fxs {
        for x in fx.sample_points(5) {
            let a = cartan(fx, &x).riem;
            let b = oracle_frame(fx, &x);
            assert!(max_diff(&a, &b) < 1e-9, "{}: {}", fx.name, max_diff(&a, &b));
        }
    }
}

#[test]
fn cartan_matches_christoffel_on_random_perturbations() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let fx = fixtures::perturbed_flat(&random_modes(&mut rng, 1e-2)).unwrap();
        for x in fx.sample_points(2) {
            let a = cartan(&fx, &x).riem;
            let b = oracle_frame(&fx, &x);
            assert!(max_diff(&a, &b) < 1e-10);
        }
    }
}

#[test]
fn vacuum_and_bianchi() {
    for fx in [fixtures::kasner(KASNER).unwrap(), fixtures::schwarzschild(1.0).unwrap()] {
        for x in fx.sample_points(5) {
            let c = cartan(&fx, &x);
            let con = contract_curvature(&c);
            assert!(cartan_core::math::max_abs(&con.ricci) < 1e-10, "{}", fx.name);
            assert!(c.first_bianchi_residual() < 1e-12);
            assert!(c.symmetry_residual() < 1e-12);
            assert!(first_structure_residual(&fx.coframe, &x).unwrap() < 1e-12);
            assert!(second_bianchi_residual(&fx.coframe, &x, 1e-3).unwrap() < 1e-6);
            assert!(riemann_divergence_residual(&fx.coframe, &x, 1e-3).unwrap() < 1e-6);
        }
    }
}

#[test]
fn sphere_scalar_curvature() {
    let fx = fixtures::round_sphere(2.0).unwrap();
    let c = cartan(&fx, &[1.0, 0.3]);
    assert!((contract_curvature(&c).scalar - 0.5).abs() < 1e-12);
    let o = coordinate_riemann_oracle(&fx.metric).at(&[1.0, 0.3]).unwrap();
    assert!((o.scalar().unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn weyl_vanishes_for_conformally_flat() {
    let fx = fixtures::flrw_conformal("t^2 + 0.3*t").unwrap();
    for x in fx.sample_points(4) {
        let (_, w, _) = bel_robinson_at(&fx.coframe, &x).unwrap();
        assert!(cartan_core::math::max_abs(&w.w) < 1e-10);
    }
}

#[test]
fn weyl_is_traceless_on_perturbed_metric() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let fx = fixtures::perturbed_flat(&random_modes(&mut rng, 5e-2)).unwrap();
    let (_, w, q) = bel_robinson_at(&fx.coframe, &[0.1, 0.2, -0.3, 0.4]).unwrap();
    assert!(w.trace_residual() < 1e-12);
    assert!(q.symmetry_residual() < 1e-12);
}

#[test]
fn bel_robinson_properties() {
    for fx in [fixtures::kasner(KASNER).unwrap(), fixtures::schwarzschild(1.0).unwrap()] {
        for x in fx.sample_points(4) {
            let (c, w, q) = bel_robinson_at(&fx.coframe, &x).unwrap();
            assert!(max_diff(&w.w, &c.lowered()) < 1e-10);
            assert!(q.symmetry_residual() < 1e-10 * (1.0 + cartan_core::math::max_abs(&q.q)));
            let t = [1.0, 0.0, 0.0, 0.0];
            assert!(q.contract(&t, &t, &t, &t) > 0.0);
            let div = divergence_bel_robinson(&fx.coframe, &x, 1e-3).unwrap();
            assert!(cartan_core::math::max_abs(&div) < 1e-6, "{}", cartan_core::math::max_abs(&div));
        }
    }
}

#[test]
fn gravitational_f_agrees_with_frame_curvature() {
    for fx in [fixtures::kasner(KASNER).unwrap(), fixtures::schwarzschild(1.0).unwrap(), fixtures::minkowski4()] {
        for x in fx.sample_points(3) {
            let g = gravitational_f(&fx.coframe, &x).unwrap();
            assert!(g.mismatch() < 1e-10);
            assert!(g.antisymmetry_residual() == 0.0 || g.antisymmetry_residual() < 1e-14);
        }
    }
}

#[test]
fn penrose_residual_on_vacuum() {
    for (fx, x) in [
        (fixtures::kasner(KASNER).unwrap(), vec![1.5, 0.1, 0.2, 0.3]),
        (fixtures::schwarzschild(1.0).unwrap(), vec![0.0, 4.0, std::f64::consts::FRAC_PI_2, 0.0]),
    ] {
        let r = penrose_wave_residual(&fx.coframe, &x, 1e-3).unwrap();
        assert!(cartan_core::math::max_abs(&r) < 1e-6, "{}: {}", fx.name, cartan_core::math::max_abs(&r));
    }
}

#[test]
fn penrose_residual_detects_non_vacuum() {
    let fx = fixtures::kasner_unchecked([0.5, 0.5, 0.5]);
    let r = penrose_wave_residual(&fx.coframe, &[1.5, 0.0, 0.0, 0.0], 1e-3).unwrap();
    assert!(cartan_core::math::max_abs(&r) > 1e-2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn random_frames_satisfy_identities(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fx = fixtures::perturbed_flat(&random_modes(&mut rng, 3e-2)).unwrap();
        let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c = cartan(&fx, &x);
        prop_assert!(c.first_bianchi_residual() < 1e-12);
        prop_assert!(c.symmetry_residual() < 1e-12);
        prop_assert!(first_structure_residual(&fx.coframe, &x).unwrap() < 1e-12);
        let d = frame_dual(&fx.coframe, &x).unwrap();
        let e = fx.coframe.eval(&x).unwrap();
        let id = cartan_core::linalg::matmul(&e, &d, 4);
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((id[i * 4 + j] - want).abs() < 1e-12);
            }
        }
    }
}
