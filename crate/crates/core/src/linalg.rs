//! Small dense linear algebra over `f64` and over jets.
//!
//! Matrices are row-major `Vec`s of length `n*n`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::jet::{Jet, JetCtx};
use crate::math;

/// Inverse by Gauss-Jordan elimination with partial pivoting.
pub fn inverse(a: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut m = a.to_vec();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    let scale = math::max_abs(a).max(f64::MIN_POSITIVE);
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if math::abs(m[r * n + col]) > math::abs(m[piv * n + col]) {
                piv = r;
            }
        }
        let p = m[piv * n + col];
        if math::abs(p) <= 1e-14 * scale {
            return Err(Error::Singular(determinant(a, n)));
        }
        if piv != col {
            for k in 0..n {
                m.swap(piv * n + k, col * n + k);
                inv.swap(piv * n + k, col * n + k);
            }
        }
        for k in 0..n {
            m[col * n + k] /= p;
            inv[col * n + k] /= p;
        }
        for r in 0..n {
            if r != col {
                let f = m[r * n + col];
                if f != 0.0 {
                    for k in 0..n {
                        m[r * n + k] -= f * m[col * n + k];
                        inv[r * n + k] -= f * inv[col * n + k];
                    }
                }
            }
        }
    }
    Ok(inv)
}

/// Determinant by LU with partial pivoting.
pub fn determinant(a: &[f64], n: usize) -> f64 {
    let mut m = a.to_vec();
    let mut det = 1.0;
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if math::abs(m[r * n + col]) > math::abs(m[piv * n + col]) {
                piv = r;
            }
        }
        let p = m[piv * n + col];
        if p == 0.0 {
            return 0.0;
        }
        if piv != col {
            for k in 0..n {
                m.swap(piv * n + k, col * n + k);
            }
            det = -det;
        }
        det *= p;
        for r in col + 1..n {
            let f = m[r * n + col] / p;
            for k in col..n {
                m[r * n + k] -= f * m[col * n + k];
            }
        }
    }
    det
}

pub fn matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                c[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    c
}

/// Values of a jet matrix.
pub fn values(a: &[Jet]) -> Vec<f64> {
    a.iter().map(Jet::value).collect()
}

pub fn jmatmul(a: &[Jet], b: &[Jet], n: usize) -> Vec<Jet> {
    let lay = a[0].layout().clone();
    let mut c = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut s = Jet::zero(&lay);
            for k in 0..n {
                s += &a[i * n + k] * &b[k * n + j];
            }
            c.push(s);
        }
    }
    c
}

/// Inverse of a jet matrix through the Neumann series around its value.
///
/// With `M = M₀ + D` and `D` vanishing at the expansion point,
/// `M⁻¹ = Σ_k (−M₀⁻¹ D)^k M₀⁻¹`, which terminates at the jet order.
pub fn jinverse(a: &[Jet], n: usize) -> Result<Vec<Jet>> {
    let lay: JetCtx = a[0].layout().clone();
    let a0 = values(a);
    let x0 = inverse(&a0, n)?;
    let x0j: Vec<Jet> = x0.iter().map(|&v| Jet::constant(&lay, v)).collect();
    if lay.order() == 0 {
        return Ok(x0j);
    }
    let d: Vec<Jet> = a.iter().map(|j| j.clone() - j.value()).collect();
    let p: Vec<Jet> = jmatmul(&x0j, &d, n).into_iter().map(|j| -j).collect();
    let mut term = x0j.clone();
    let mut sum = x0j;
    for _ in 0..lay.order() {
        term = jmatmul(&p, &term, n);
        for (s, t) in sum.iter_mut().zip(&term) {
            *s += t;
        }
    }
    Ok(sum)
}

fn permutations(n: usize) -> Vec<(Vec<usize>, f64)> {
    fn rec(cur: &mut Vec<usize>, used: &mut [bool], n: usize, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for i in 0..n {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(cur, used, n, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], n, &mut out);
    out.into_iter()
        .map(|p| {
            let s = permutation_sign(&p);
            (p, s)
        })
        .collect()
}

/// Sign of a permutation given as an index list.
pub fn permutation_sign(p: &[usize]) -> f64 {
    let mut s = 1.0;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            if p[i] > p[j] {
                s = -s;
            }
        }
    }
    s
}

/// Levi-Civita symbol: the permutation sign, or zero on repeated indices.
pub fn levi_civita(p: &[usize]) -> f64 {
    for i in 0..p.len() {
        if p[i + 1..].contains(&p[i]) {
            return 0.0;
        }
    }
    permutation_sign(p)
}

/// Determinant of a jet matrix by the Leibniz formula (n ≤ 4).
pub fn jdeterminant(a: &[Jet], n: usize) -> Jet {
    let lay = a[0].layout().clone();
    let mut det = Jet::zero(&lay);
    for (p, s) in permutations(n) {
        let mut t = Jet::constant(&lay, s);
        for (i, &pi) in p.iter().enumerate() {
            t = &t * &a[i * n + pi];
        }
        det += &t;
    }
    det
}

/// Orthonormal coframe of a metric by a signed Cholesky factorization.
///
/// Returns `e` (row `a`, column `μ`) with `g_μν = Σ_a η_a e^a_μ e^a_ν` and
/// `e^a_μ = 0` for `μ < a`. Leg 0 is timelike when `eta[0] = −1`.
pub fn jframe_from_metric(g: &[Jet], n: usize, eta: &[f64]) -> Result<Vec<Jet>> {
    let lay = g[0].layout().clone();
    let mut r: Vec<Jet> = g.to_vec();
    let mut e = vec![Jet::zero(&lay); n * n];
    for a in 0..n {
        let s = eta[a];
        let d = r[a * n + a].scale(s);
        if !(d.value() > 0.0) {
            return Err(Error::BadSignature);
        }
        let inv = d.sqrt().recip();
        for mu in a..n {
            e[a * n + mu] = (&r[a * n + mu] * &inv).scale(s);
        }
        for mu in a..n {
            for nu in a..n {
                let t = (&e[a * n + mu] * &e[a * n + nu]).scale(s);
                r[mu * n + nu] -= &t;
            }
        }
    }
    Ok(e)
}

/// Metric `g_μν = Σ_a η_a e^a_μ e^a_ν` from a coframe.
pub fn jmetric_from_frame(e: &[Jet], n: usize, eta: &[f64]) -> Vec<Jet> {
    let lay = e[0].layout().clone();
    let mut g = Vec::with_capacity(n * n);
    for mu in 0..n {
        for nu in 0..n {
            let mut s = Jet::zero(&lay);
            for a in 0..n {
                s += (&e[a * n + mu] * &e[a * n + nu]).scale(eta[a]);
            }
            g.push(s);
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::JetLayout;

    #[test]
    fn inverse_and_determinant() {
        let a = [4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0];
        let inv = inverse(&a, 3).unwrap();
        let id = matmul(&a, &inv, 3);
        for i in 0..3 {
            for j in 0..3 {
                assert!((id[i * 3 + j] - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
        assert!((determinant(&a, 3) - (4.0 * (6.0 - 0.04) - 1.0 * (2.0 - 0.1) + 0.5 * (0.2 - 1.5))).abs() < 1e-12);
        assert!(matches!(inverse(&[1.0, 2.0, 2.0, 4.0], 2), Err(Error::Singular(_))));
    }

    #[test]
    fn jet_inverse_derivatives() {
        let lay = JetLayout::new(2, 3);
        let v = Jet::seed(&lay, &[0.3, 0.5]);
        let one = Jet::constant(&lay, 1.0);
        let a = vec![&one + &(&v[0] * &v[0]), v[1].clone(), v[1].sin(), &one * 2.0 + v[0].exp()];
        let inv = jinverse(&a, 2).unwrap();
        let prod = jmatmul(&a, &inv, 2);
        for (k, p) in prod.iter().enumerate() {
            let target = if k == 0 || k == 3 { 1.0 } else { 0.0 };
            assert!((p.value() - target).abs() < 1e-14);
            for c in &p.coeffs()[1..] {
                assert!(c.abs() < 1e-12);
            }
        }
        let det = jdeterminant(&a, 2);
        let direct = &a[0] * &a[3] - &a[1] * &a[2];
        for (x, y) in det.coeffs().iter().zip(direct.coeffs()) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn lorentzian_cholesky_reassembles() {
        let lay = JetLayout::new(2, 2);
        let v = Jet::seed(&lay, &[0.2, 0.1]);
        let g00 = Jet::constant(&lay, -1.0) + (&v[0] * &v[1]).scale(0.1);
        let g01 = v[0].scale(0.05);
        let g11 = Jet::constant(&lay, 1.0) + v[1].sin().scale(0.2);
        let g = vec![g00, g01.clone(), g01, g11];
        let eta = [-1.0, 1.0];
        let e = jframe_from_metric(&g, 2, &eta).unwrap();
        let back = jmetric_from_frame(&e, 2, &eta);
        for (x, y) in back.iter().zip(&g) {
            for (a, b) in x.coeffs().iter().zip(y.coeffs()) {
                assert!((a - b).abs() < 1e-14);
            }
        }
        let bad = vec![Jet::constant(&lay, 1.0), Jet::zero(&lay), Jet::zero(&lay), Jet::constant(&lay, 1.0)];
        assert_eq!(jframe_from_metric(&bad, 2, &eta).unwrap_err(), Error::BadSignature);
    }
}
