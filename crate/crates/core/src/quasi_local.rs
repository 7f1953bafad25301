//! Quasi-local diagnostics around a base point: the Cronström-gauge connection,
//! Killing and conformal-Killing forms of the optical function `f̄ = ḡ_{μν}x^μx^ν`,
//! and frame commutators.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::curvature::{i3, ConnectionValues, SpinConnection};
use crate::error::{invalid, Error, Result};
use crate::forms::{CoFrame, MetricField};
use crate::jet::JetLayout;
use crate::linalg;
use crate::math;
use crate::quadrature::gauss_legendre;

/// Curvature sampler `x ↦ F^c{}_{aμν}(x)` flattened at `((c·m + a)·n + μ)·n + ν`.
pub type CurvatureSampler = Arc<dyn Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync>;

/// Curvature along rays from the origin, with the quadrature used on `λ ∈ [0, 1]`.
#[derive(Clone)]
pub struct RadialField {
    /// Coordinate dimension `n`.
    pub dim: usize,
    /// Number of internal (frame) indices `m`.
    pub frame_dim: usize,
    pub sampler: CurvatureSampler,
    /// Gauss-Legendre nodes; the error is estimated by doubling.
    pub nodes: usize,
    /// Accepted node-doubling discrepancy, relative to `1 + |Θ|`.
    pub tolerance: f64,
}

impl core::fmt::Debug for RadialField {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("RadialField").field("dim", &self.dim).field("frame_dim", &self.frame_dim).field("nodes", &self.nodes).finish()
    }
}

impl RadialField {
    pub fn new(dim: usize, frame_dim: usize, sampler: CurvatureSampler) -> RadialField {
        RadialField { dim, frame_dim, sampler, nodes: 32, tolerance: 1e-10 }
    }

    /// A constant curvature field.
    pub fn constant(dim: usize, frame_dim: usize, f: Vec<f64>) -> Result<RadialField> {
        let len = frame_dim * frame_dim * dim * dim;
        if f.len() != len {
            return Err(Error::DimensionMismatch { expected: len, got: f.len() });
        }
        Ok(RadialField::new(dim, frame_dim, Arc::new(move |_| Ok(f.clone()))))
    }

    /// Riemann curvature of a coframe with coordinate legs,
    /// `R^c{}_{aμν} = R^c{}_{ade}e^d_μe^e_ν`.
    pub fn from_coframe(coframe: &CoFrame) -> RadialField {
        let n = coframe.dim();
        let field = crate::curvature::curvature_two_forms(coframe, &crate::curvature::solve_spin_connection(coframe));
        let sampler: CurvatureSampler = Arc::new(move |x| {
            let field = field.as_ref().map_err(Clone::clone)?;
            let c = field.at(x)?;
            let mut out = vec![0.0; n * n * n * n];
            for a in 0..n {
                for b in 0..n {
                    for mu in 0..n {
                        for nu in 0..n {
                            let mut s = 0.0;
                            for d in 0..n {
                                for e in 0..n {
                                    s += c.get(a, b, d, e) * c.e[d * n + mu] * c.e[e * n + nu];
                                }
                            }
                            out[((a * n + b) * n + mu) * n + nu] = s;
                        }
                    }
                }
            }
            Ok(out)
        });
        RadialField::new(n, n, sampler)
    }
}

fn ray_integral(rf: &RadialField, x: &[f64], nodes: usize) -> Result<Vec<f64>> {
    let (n, m) = (rf.dim, rf.frame_dim);
    let rule = gauss_legendre(nodes)?;
    let (ls, ws) = rule.mapped(0.0, 1.0);
    let mut theta = vec![0.0; m * m * n];
    for (l, w) in ls.iter().zip(&ws) {
        let y: Vec<f64> = x.iter().map(|v| l * v).collect();
        let f = (rf.sampler)(&y)?;
        if f.len() != m * m * n * n {
            return Err(Error::DimensionMismatch { expected: m * m * n * n, got: f.len() });
        }
        for ca in 0..m * m {
            for mu in 0..n {
                let s: f64 = (0..n).map(|nu| f[(ca * n + mu) * n + nu] * x[nu]).sum();
                theta[ca * n + mu] -= w * l * s;
            }
        }
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Cronström integrand"));
    }
    Ok(theta)
}

/// `Θ^c{}_{aμ}(x) = −∫₀¹ F^c{}_{aμν}(λx) λx^ν dλ`, flattened at `(c·m + a)·n + μ`.
pub fn cronstrom_connection(rf: &RadialField, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != rf.dim {
        return Err(Error::DimensionMismatch { expected: rf.dim, got: x.len() });
    }
    let coarse = ray_integral(rf, x, rf.nodes)?;
    let fine = ray_integral(rf, x, 2 * rf.nodes)?;
    let err = coarse.iter().zip(&fine).map(|(a, b)| math::abs(a - b)).fold(0.0, f64::max);
    if err > rf.tolerance * (1.0 + math::max_abs(&fine)) {
        return Err(Error::Quadrature(err));
    }
    Ok(fine)
}

/// Killing-form diagnostics of the optical function at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct OpticalForms {
    /// `K_{αβ} = 4ḡ_{αβ} + 2x^ν∂_νḡ_{αβ}`.
    pub k: Vec<f64>,
    /// `CK_{αβ} = K_{αβ} − (2/n)·½□f̄·ḡ_{αβ}` (with `n = 4`: `K − ½□f̄ ḡ`).
    pub ck: Vec<f64>,
    /// `□f̄ = 2n + 2x^ν(−ḡ)^{−1/2}∂_ν√(−ḡ)` (`= 8 + …` in four dimensions).
    pub box_f: f64,
    /// Killing form `∇_α∇_βf̄ + ∇_β∇_αf̄` evaluated directly.
    pub k_direct: Vec<f64>,
    /// `ḡ^{αβ}∇_α∇_βf̄` evaluated directly.
    pub box_f_direct: f64,
    /// `max_β |∇^βf̄ − 2x^β|`; zero in exact normal coordinates.
    pub gauss_residual: f64,
}

/// Evaluates the optical Killing forms of `f̄ = ḡ_{μν}(x)x^μx^ν` for a metric
/// given in normal-type coordinates centered at the origin.
pub fn optical_killing_forms(metric: &MetricField, x: &[f64]) -> Result<OpticalForms> {
    let n = metric.chart().dim();
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x.len() });
    }
    let lay = JetLayout::new(n, 2);
    let gj = metric.jets(x, &lay)?;
    let g = linalg::values(&gj);
    let det = linalg::determinant(&g, n);
    if !(math::abs(det) > 1e-300) {
        return Err(Error::Singular(det));
    }
    let gi = linalg::inverse(&g, n)?;
    let dg = |mu: usize, nu: usize, r: usize| gj[mu * n + nu].d1(r);
    let xdg = |mu: usize, nu: usize| (0..n).map(|r| x[r] * dg(mu, nu, r)).sum::<f64>();
    // x^ν∂_ν ln√|g| = ½ g^{μν} x^ρ∂_ρ g_{μν}
    let xdlog: f64 = 0.5 * (0..n * n).map(|c| gi[c] * xdg(c / n, c % n)).sum::<f64>();
    let box_f = 2.0 * n as f64 + 2.0 * xdlog;
    let k: Vec<f64> = (0..n * n).map(|c| 4.0 * g[c] + 2.0 * xdg(c / n, c % n)).collect();
    let ck: Vec<f64> = (0..n * n).map(|c| k[c] - box_f * g[c] / (0.5 * n as f64)).collect();

    // direct: f̄ = g_{μν}x^μx^ν as a jet
    let mut f = crate::jet::Jet::constant(&lay, 0.0);
    for mu in 0..n {
        for nu in 0..n {
            let xm = crate::jet::Jet::variable(&lay, mu, x[mu]);
            let xn = crate::jet::Jet::variable(&lay, nu, x[nu]);
            f = &f + &(&gj[mu * n + nu] * &(&xm * &xn));
        }
    }
    let gam: Vec<f64> = {
        let mut out = vec![0.0; n * n * n];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    out[i3(n, a, b, c)] =
                        0.5 * (0..n).map(|d| gi[a * n + d] * (dg(b, d, c) + dg(c, d, b) - dg(b, c, d))).sum::<f64>();
                }
            }
        }
        out
    };
    let hess = |a: usize, b: usize| f.d2(a, b) - (0..n).map(|c| gam[i3(n, c, a, b)] * f.d1(c)).sum::<f64>();
    let k_direct: Vec<f64> = (0..n * n).map(|c| 2.0 * hess(c / n, c % n)).collect();
    let box_f_direct: f64 = (0..n * n).map(|c| gi[c] * hess(c / n, c % n)).sum();
    let gauss_residual = (0..n)
        .map(|b| math::abs((0..n).map(|a| gi[b * n + a] * f.d1(a)).sum::<f64>() - 2.0 * x[b]))
        .fold(0.0, f64::max);
    Ok(OpticalForms { k, ck, box_f, k_direct, box_f_direct, gauss_residual })
}

/// `[e_a, e_b]^ν = E^ν_c(E^μ_aΘ^c{}_{bμ} − E^μ_bΘ^c{}_{aμ})` from a connection evaluated at `x`.
pub fn frame_commutator(coframe: &CoFrame, theta: &SpinConnection, a: usize, b: usize, x: &[f64]) -> Result<Vec<f64>> {
    let n = coframe.dim();
    if a >= n || b >= n {
        return Err(invalid("frame index out of range"));
    }
    let cv: ConnectionValues = theta.at(x)?;
    let e = coframe.eval(x)?;
    let einv = linalg::inverse(&e, n)?; // E^μ_a at μ·n + a
    let big_e = |mu: usize, a: usize| einv[mu * n + a];
    let th = |c: usize, b: usize, mu: usize| cv.coordinate[i3(n, c, b, mu)];
    Ok((0..n)
        .map(|nu| {
            let mut s = 0.0;
            for c in 0..n {
                let mut inner = 0.0;
                for mu in 0..n {
                    inner += big_e(mu, a) * th(c, b, mu) - big_e(mu, b) * th(c, a, mu);
                }
                s += big_e(nu, c) * inner;
            }
            s
        })
        .collect())
}

/// Finite-difference Lie bracket `[e_a, e_b]^ν = E^μ_a∂_μE^ν_b − E^μ_b∂_μE^ν_a`.
pub fn frame_lie_bracket(coframe: &CoFrame, a: usize, b: usize, x: &[f64], step: f64) -> Result<Vec<f64>> {
    let n = coframe.dim();
    if a >= n || b >= n {
        return Err(invalid("frame index out of range"));
    }
    let frame = |y: &[f64]| -> Result<Vec<f64>> { linalg::inverse(&coframe.eval(y)?, n) };
    let e0 = frame(x)?;
    let mut de = vec![vec![0.0; n * n]; n];
    for (mu, d) in de.iter_mut().enumerate() {
        let at = |s: f64| -> Result<Vec<f64>> {
            let mut y = x.to_vec();
            y[mu] += s * step;
            frame(&y)
        };
        let (p1, m1, p2, m2) = (at(1.0)?, at(-1.0)?, at(2.0)?, at(-2.0)?);
        for c in 0..n * n {
            d[c] = (8.0 * (p1[c] - m1[c]) - (p2[c] - m2[c])) / (12.0 * step);
        }
    }
    Ok((0..n)
        .map(|nu| (0..n).map(|mu| e0[mu * n + a] * de[mu][nu * n + b] - e0[mu * n + b] * de[mu][nu * n + a]).sum())
        .collect())
}
