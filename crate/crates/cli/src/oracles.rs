//! Independent numerical references used by the checks.

use cartan_core::adm::WeylADM;
use cartan_core::curvature::{contract_curvature, curvature_two_forms, solve_spin_connection, weyl_tensor};
use cartan_core::fixtures::Fixture;
use cartan_core::linalg;
use cartan_core::Result;

/// Radially symmetric `u_tt − Δu = N(u, r, t)` in three dimensions by
/// leapfrog on `w = r u`, `w_tt = w_rr + r N(w/r, r, t)`, `w(0, t) = 0`.
///
/// Second order in `dr` at fixed Courant number ½. The outer boundary sits
/// beyond the numerical domain of dependence of `(r0, t)`.
pub fn fdtd_radial(
    u0: impl Fn(f64) -> f64,
    u1: impl Fn(f64) -> f64,
    source: impl Fn(f64, f64, f64) -> f64,
    r0: f64,
    t: f64,
    dr: f64,
) -> f64 {
    let dt = 0.5 * dr;
    let steps = (t / dt).round() as usize;
    let dt = t / steps as f64;
    let m = ((r0 + 2.0 * t + 1.0) / dr).ceil() as usize;
    let r: Vec<f64> = (0..=m).map(|i| i as f64 * dr).collect();
    let lam = (dt / dr) * (dt / dr);
    let force = |w: &[f64], s: f64, i: usize| -> f64 {
        let ri = r[i];
        ri * source(w[i] / ri, ri, s)
    };
    let mut prev: Vec<f64> = r.iter().map(|&ri| ri * u0(ri)).collect();
    let mut cur = vec![0.0; m + 1];
    for i in 1..m {
        let lap = prev[i + 1] - 2.0 * prev[i] + prev[i - 1];
        cur[i] = prev[i] + dt * r[i] * u1(r[i]) + 0.5 * lam * lap + 0.5 * dt * dt * force(&prev, 0.0, i);
    }
    let mut next = vec![0.0; m + 1];
    for n in 1..steps {
        let s = n as f64 * dt;
        for i in 1..m {
            let lap = cur[i + 1] - 2.0 * cur[i] + cur[i - 1];
            next[i] = 2.0 * cur[i] - prev[i] + lam * lap + dt * dt * force(&cur, s, i);
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
    let k = r0 / dr;
    let i = k.floor() as usize;
    let f = k - i as f64;
    let w = (1.0 - f) * cur[i] + f * cur[i + 1];
    w / r0
}

/// Electric and magnetic Weyl parts of a four-dimensional fixture on the
/// slice `x⁰ = const`, as densitized contravariant tensors `μ̄ E^{ij}`,
/// `μ̄ B^{ij}` (row-major 3×3), together with the slice metric `q̄_{ij}`.
///
/// `E_{ij} = W_{iαjβ}n^αn^β`, `B_{ij} = ½ε_{iακλ}W^{κλ}{}_{jβ}n^αn^β`, `ε_{0123} = √|g|`.
pub fn slice_weyl(fx: &Fixture, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let cf = &fx.coframe;
    let c = curvature_two_forms(cf, &solve_spin_connection(cf))?.at(x)?;
    let w = weyl_tensor(&c, &contract_curvature(&c))?;
    let e = |a: usize, mu: usize| c.e[a * 4 + mu];
    let mut wc = vec![0.0; 256];
    for (idx, v) in wc.iter_mut().enumerate() {
        let m = [idx / 64, (idx / 16) % 4, (idx / 4) % 4, idx % 4];
        for a in 0..4 {
            for b in 0..4 {
                for cc in 0..4 {
                    for d in 0..4 {
                        *v += e(a, m[0]) * e(b, m[1]) * e(cc, m[2]) * e(d, m[3]) * w.get(a, b, cc, d);
                    }
                }
            }
        }
    }
    let g = fx.metric.eval(x)?;
    let gi = linalg::inverse(&g, 4)?;
    let lapse = 1.0 / (-gi[0]).sqrt();
    let n: Vec<f64> = (0..4).map(|m| -lapse * gi[m]).collect();
    let vol = (-linalg::determinant(&g, 4)).sqrt();
    let mut up = vec![0.0; 256];
    for (idx, v) in up.iter_mut().enumerate() {
        let (k, l, r, s) = (idx / 64, (idx / 16) % 4, (idx / 4) % 4, idx % 4);
        for a in 0..4 {
            for b in 0..4 {
                *v += gi[k * 4 + a] * gi[l * 4 + b] * wc[a * 64 + b * 16 + r * 4 + s];
            }
        }
    }
    let (mut el, mut ml) = (vec![0.0; 9], vec![0.0; 9]);
    for i in 0..3 {
        for j in 0..3 {
            for al in 0..4 {
                for be in 0..4 {
                    let nn = n[al] * n[be];
                    el[i * 3 + j] += wc[(i + 1) * 64 + al * 16 + (j + 1) * 4 + be] * nn;
                    for k in 0..4 {
                        for l in 0..4 {
                            let eps = linalg::levi_civita(&[i + 1, al, k, l]);
                            if eps != 0.0 {
                                ml[i * 3 + j] += 0.5 * vol * eps * up[k * 64 + l * 16 + (j + 1) * 4 + be] * nn;
                            }
                        }
                    }
                }
            }
        }
    }
    let qb: Vec<f64> = (0..9).map(|c| g[(c / 3 + 1) * 4 + c % 3 + 1]).collect();
    let qi = linalg::inverse(&qb, 3)?;
    let mu = linalg::determinant(&qb, 3).sqrt();
    let raise = |t: &[f64]| -> Vec<f64> {
        (0..9)
            .map(|c| {
                let (i, j) = (c / 3, c % 3);
                let mut s = 0.0;
                for a in 0..3 {
                    for b in 0..3 {
                        s += qi[i * 3 + a] * qi[j * 3 + b] * t[a * 3 + b];
                    }
                }
                mu * s
            })
            .collect()
    };
    Ok((raise(&el), raise(&ml), qb))
}

/// Mixed components `(T^{11}, T^{12}, T^{21}, T^{22}, T_3{}^1, T_3{}^2, T^1{}_3, T^2{}_3, T_{33})`.
pub fn mixed(t: &[f64], qb: &[f64]) -> Vec<f64> {
    let low = |first: bool, a: usize| -> f64 { (0..3).map(|j| qb[6 + j] * if first { t[j * 3 + a] } else { t[a * 3 + j] }).sum() };
    let both: f64 = (0..9).map(|c| qb[6 + c / 3] * qb[6 + c % 3] * t[c]).sum();
    vec![t[0], t[1], t[3], t[4], low(true, 0), low(true, 1), low(false, 0), low(false, 1), both]
}

/// The same mixed components from the reduced fields at grid node `k`.
pub fn adm_mixed(w: &WeylADM, k: usize) -> (Vec<f64>, Vec<f64>) {
    let e = vec![w.e_ab[0][k], w.e_ab[1][k], w.e_ab[1][k], w.e_ab[2][k], w.e3a[0][k], w.e3a[1][k], w.e3a[0][k], w.e3a[1][k], w.e33[k]];
    let b = vec![w.b_ab[0][k], w.b_ab[1][k], w.b_ab[2][k], w.b_ab[3][k], w.b3a[0][k], w.b3a[1][k], w.ba3[0][k], w.ba3[1][k], w.b33[k]];
    (e, b)
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `log₂(e₁ / e₂)`: the observed order under halving.
pub fn order(e1: f64, e2: f64) -> f64 {
    (e1 / e2).log2()
}
