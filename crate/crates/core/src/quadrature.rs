//! Gaussian quadrature rules.
//!
//! Nodes and weights come from the Golub-Welsch eigenvalue problem of the
//! Jacobi matrix; Legendre nodes are polished by Newton steps on the
//! three-term recurrence.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// A rule on `[−1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ w_k f(x_k)` mapped affinely to `[a, b]` (plain Legendre-type rules).
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
        h * self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(m + h * x)).sum::<f64>()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
        let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
        (self.nodes.iter().map(|x| m + h * x).collect(), self.weights.iter().map(|w| h * w).collect())
    }
}

/// Eigenvalues and squared first eigenvector components of a symmetric
/// tridiagonal matrix (implicit QL).
fn tridiagonal_eigen(diag: &[f64], off: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(&off[..n - 1]);
    let mut z = vec![0.0; n];
    z[0] = 1.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = math::abs(d[m]) + math::abs(d[m + 1]);
                if math::abs(e[m]) <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::Quadrature(math::abs(e[l])));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = math::sqrt(g * g + 1.0);
            g = d[m] - d[l] + e[l] / (g + if g >= 0.0 { r } else { -r });
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = math::sqrt(f * f + g * g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let zf = z[i + 1];
                z[i + 1] = s * z[i] + c * zf;
                z[i] = c * z[i] - s * zf;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|a, b| d[*a].partial_cmp(&d[*b]).unwrap_or(core::cmp::Ordering::Equal));
    Ok((idx.iter().map(|&i| d[i]).collect(), idx.iter().map(|&i| z[i] * z[i]).collect()))
}

fn lgamma_ratio(alpha: f64, beta: f64) -> f64 {
    // 2^{α+β+1} Γ(α+1)Γ(β+1)/Γ(α+β+2)
    math::powf(2.0, alpha + beta + 1.0) * libm::tgamma(alpha + 1.0) * libm::tgamma(beta + 1.0)
        / libm::tgamma(alpha + beta + 2.0)
}

/// Gauss-Jacobi rule for the weight `(1 − x)^α (1 + x)^β` on `[−1, 1]`.
pub fn gauss_jacobi(n: usize, alpha: f64, beta: f64) -> Result<Rule> {
    if n == 0 {
        return Err(Error::Invalid("quadrature needs at least one node".into()));
    }
    if !(alpha > -1.0 && beta > -1.0) {
        return Err(Error::Invalid("Jacobi exponents must exceed −1".into()));
    }
    let ab = alpha + beta;
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n];
    for (k, d) in diag.iter_mut().enumerate() {
        let kf = k as f64;
        let s = 2.0 * kf + ab;
        *d = if k == 0 { (beta - alpha) / (ab + 2.0) } else { (beta * beta - alpha * alpha) / (s * (s + 2.0)) };
    }
    for k in 1..n {
        let kf = k as f64;
        let s = 2.0 * kf + ab;
        let b2 = if k == 1 {
            // the (k + α + β) factor cancels against (s − 1)
            4.0 * (1.0 + alpha) * (1.0 + beta) / ((2.0 + ab) * (2.0 + ab) * (3.0 + ab))
        } else {
            4.0 * kf * (kf + alpha) * (kf + beta) * (kf + ab) / (s * s * (s + 1.0) * (s - 1.0))
        };
        off[k - 1] = math::sqrt(b2);
    }
    let (nodes, z2) = tridiagonal_eigen(&diag, &off)?;
    let mu0 = lgamma_ratio(alpha, beta);
    Ok(Rule { nodes, weights: z2.into_iter().map(|v| v * mu0).collect() })
}

/// Gauss-Legendre rule with `n` nodes (Newton-polished).
pub fn gauss_legendre(n: usize) -> Result<Rule> {
    let mut r = gauss_jacobi(n, 0.0, 0.0)?;
    for (x, w) in r.nodes.iter_mut().zip(r.weights.iter_mut()) {
        for _ in 0..3 {
            let (p, dp) = legendre(n, *x);
            *x -= p / dp;
        }
        let (_, dp) = legendre(n, *x);
        *w = 2.0 / ((1.0 - *x * *x) * dp * dp);
    }
    Ok(r)
}

/// `(P_n(x), P_n'(x))`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Composite Gauss-Legendre over `panels` equal panels of `[a, b]`.
pub fn composite(rule: &Rule, a: f64, b: f64, panels: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
    let h = (b - a) / panels as f64;
    (0..panels).map(|k| rule.integrate(a + k as f64 * h, a + (k + 1) as f64 * h, &mut f)).sum()
}

/// Gauss-Legendre integral of `f` over `[a, b]` with `n` nodes and the
/// node-doubling error estimate `|I_{2n} − I_n|`; returns `(I_{2n}, estimate)`.
pub fn integrate_with_estimate(n: usize, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> Result<(f64, f64)> {
    let lo = gauss_legendre(n)?.integrate(a, b, &mut f);
    let hi = gauss_legendre(2 * n)?.integrate(a, b, &mut f);
    Ok((hi, math::abs(hi - lo)))
}
