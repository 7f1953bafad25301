//! Cartan structural equations and curvature contractions.
//!
//! Conventions: frame index 0 is timelike on Lorentzian charts, `η = diag(signature)`.
//! The connection one-forms satisfy `de^a = −Θ^a_b ∧ e^b` with
//! `∇_X e_b = Θ^a_b(X) e_a`; the curvature two-forms are
//! `Ω^a_b = dΘ^a_b + Θ^a_c ∧ Θ^c_b = ½ R^a_{bcd} e^c ∧ e^d`.
//! Frame components of a one-form are written `Θ^a_{bc} = Θ^a_b(e_c)`.
//!
//! Structure coefficients follow `[e_b, e_c] = C^a_{bc} e_a`, and the
//! torsion-free metric connection is `Θ_{abc} = ½(C_{cab} − C_{abc} − C_{bca})`
//! with the first index lowered by `η`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::{fd_jacobian, FieldRef, PointFn};
use crate::forms::{CoFrame, FormField, MetricField};
use crate::jet::{Jet, JetLayout};
use crate::linalg;
use crate::math;

#[inline]
pub(crate) fn i3(n: usize, a: usize, b: usize, c: usize) -> usize {
    (a * n + b) * n + c
}

#[inline]
pub(crate) fn i4(n: usize, a: usize, b: usize, c: usize, d: usize) -> usize {
    ((a * n + b) * n + c) * n + d
}

/// Jet-valued frame data at a point.
///
/// With frame jets of order `k`, `c` and `theta` carry order `k − 1`.
#[derive(Clone, Debug)]
pub struct FramePoint {
    pub n: usize,
    pub eta: Vec<f64>,
    /// `e^a_μ` at index `a*n + μ`.
    pub e: Vec<Jet>,
    /// `E^μ_a` (dual frame) at index `μ*n + a`.
    pub einv: Vec<Jet>,
    /// `C^a_{bc}` at `i3(a, b, c)`.
    pub c: Vec<Jet>,
    /// `Θ^a_{bc}` at `i3(a, b, c)`.
    pub theta: Vec<Jet>,
}

impl FramePoint {
    /// Expands the coframe at `x` to jet order `order ≥ 1`.
    pub fn new(coframe: &CoFrame, x: &[f64], order: usize) -> Result<FramePoint> {
        let n = coframe.dim();
        if order == 0 {
            return Err(Error::Invalid("frame expansion needs order ≥ 1".into()));
        }
        if order > 2 && !coframe.analytic() {
            return Err(Error::NeedsAnalyticPartials);
        }
        let lay = JetLayout::new(n, order);
        let eta = coframe.eta();
        let e = coframe.jets(x, &lay)?;
        let det = linalg::determinant(&linalg::values(&e), n);
        if !(math::abs(det) > 1e-12) {
            return Err(Error::Singular(det));
        }
        let einv = linalg::jinverse(&e, n)?;
        let low = lay.at_order(order - 1);
        let mut de = vec![Jet::zero(&low); n * n * n];
        for a in 0..n {
            for mu in 0..n {
                for nu in mu + 1..n {
                    let v = e[a * n + nu].derivative(mu) - e[a * n + mu].derivative(nu);
                    de[i3(n, a, nu, mu)] = -&v;
                    de[i3(n, a, mu, nu)] = v;
                }
            }
        }
        let einv_low: Vec<Jet> = einv.iter().map(|j| j.truncate(order - 1)).collect();
        let mut c = vec![Jet::zero(&low); n * n * n];
        for a in 0..n {
            for b in 0..n {
                for cc in b + 1..n {
                    let mut s = Jet::zero(&low);
                    for mu in 0..n {
                        for nu in 0..n {
                            if mu == nu {
                                continue;
                            }
                            let w = &einv_low[mu * n + b] * &einv_low[nu * n + cc];
                            s -= &(&de[i3(n, a, mu, nu)] * &w);
                        }
                    }
                    c[i3(n, a, cc, b)] = -&s;
                    c[i3(n, a, b, cc)] = s;
                }
            }
        }
        let cl = |a: usize, b: usize, cc: usize| c[i3(n, a, b, cc)].scale(eta[a]);
        let mut theta = vec![Jet::zero(&low); n * n * n];
        for a in 0..n {
            for b in 0..n {
                for cc in 0..n {
                    let lowered = (cl(cc, a, b) - cl(a, b, cc) - cl(b, cc, a)).scale(0.5);
                    theta[i3(n, a, b, cc)] = lowered.scale(eta[a]);
                }
            }
        }
        Ok(FramePoint { n, eta, e, einv, c, theta })
    }

    pub fn order(&self) -> usize {
        self.e[0].order()
    }

    /// Frame directional derivative `E_c(f) = E^μ_c ∂_μ f`.
    pub fn frame_derivative(&self, f: &Jet, c: usize) -> Jet {
        let n = self.n;
        let low = f.layout().at_order(f.order().saturating_sub(1));
        let mut s = Jet::zero(&low);
        for mu in 0..n {
            s += &(&self.einv[mu * n + c] * &f.derivative(mu));
        }
        s
    }

    /// Frame Riemann components `R^a_{bcd}` as jets of order `k − 2`.
    pub fn riemann(&self) -> Result<Vec<Jet>> {
        let n = self.n;
        let k = self.order();
        if k < 2 {
            return Err(Error::Invalid("curvature needs frame order ≥ 2".into()));
        }
        let t = &self.theta;
        let lay = t[0].layout().at_order(k - 2);
        let mut r = vec![Jet::zero(&lay); n * n * n * n];
        for a in 0..n {
            for b in 0..n {
                let dth: Vec<Jet> = (0..n)
                    .flat_map(|d| (0..n).map(move |cc| (d, cc)))
                    .map(|(d, cc)| self.frame_derivative(&t[i3(n, a, b, d)], cc))
                    .collect();
                for cc in 0..n {
                    for d in cc + 1..n {
                        let mut s = &dth[d * n + cc] - &dth[cc * n + d];
                        for e in 0..n {
                            s += &(&t[i3(n, a, e, cc)] * &t[i3(n, e, b, d)]);
                            s -= &(&t[i3(n, a, e, d)] * &t[i3(n, e, b, cc)]);
                            s -= &(&t[i3(n, a, b, e)] * &self.c[i3(n, e, cc, d)]);
                        }
                        r[i4(n, a, b, d, cc)] = -&s;
                        r[i4(n, a, b, cc, d)] = s;
                    }
                }
            }
        }
        Ok(r)
    }

    /// Connection in mixed form `Θ^a_{bμ} = Θ^a_{bc} e^c_μ`.
    pub fn theta_coordinate(&self) -> Vec<Jet> {
        let n = self.n;
        let mut out = Vec::with_capacity(n * n * n);
        for a in 0..n {
            for b in 0..n {
                for mu in 0..n {
                    let mut s = Jet::zero(self.theta[0].layout());
                    for c in 0..n {
                        s += &(&self.theta[i3(n, a, b, c)] * &self.e[c * n + mu]);
                    }
                    out.push(s);
                }
            }
        }
        out
    }
}

/// Values of the spin connection at a point.
#[derive(Clone, Debug)]
pub struct ConnectionValues {
    pub n: usize,
    pub eta: Vec<f64>,
    /// `Θ^a_{bc}` (frame leg).
    pub frame: Vec<f64>,
    /// `Θ^a_{bμ}` (coordinate leg).
    pub coordinate: Vec<f64>,
    /// Structure coefficients `C^a_{bc}`.
    pub structure: Vec<f64>,
}

impl ConnectionValues {
    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.frame[i3(self.n, a, b, c)]
    }

    /// `max |Θ_{abμ} + Θ_{baμ}|` after lowering the first index.
    pub fn antisymmetry_residual(&self) -> f64 {
        let n = self.n;
        let mut m: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                for mu in 0..n {
                    let s = self.eta[a] * self.coordinate[i3(n, a, b, mu)]
                        + self.eta[b] * self.coordinate[i3(n, b, a, mu)];
                    m = m.max(math::abs(s));
                }
            }
        }
        m
    }
}

/// The Levi-Civita spin connection of a coframe, evaluated on demand.
#[derive(Clone, Debug)]
pub struct SpinConnection {
    coframe: CoFrame,
}

/// Builds the torsion-free metric connection of a coframe.
pub fn solve_spin_connection(coframe: &CoFrame) -> SpinConnection {
    SpinConnection { coframe: coframe.clone() }
}

impl SpinConnection {
    pub fn coframe(&self) -> &CoFrame {
        &self.coframe
    }

    pub fn at(&self, x: &[f64]) -> Result<ConnectionValues> {
        let fp = FramePoint::new(&self.coframe, x, 1)?;
        let n = fp.n;
        let vals = |v: &[Jet]| linalg::values(v);
        let cv = ConnectionValues {
            n,
            eta: fp.eta.clone(),
            frame: vals(&fp.theta),
            coordinate: vals(&fp.theta_coordinate()),
            structure: vals(&fp.c),
        };
        if cv.antisymmetry_residual() > 1e-10 * (1.0 + math::max_abs(&cv.frame)) {
            return Err(Error::Invalid("connection lost antisymmetry".into()));
        }
        Ok(cv)
    }

    /// `Θ^a_b` as a coordinate one-form.
    pub fn form(&self, a: usize, b: usize) -> FormField {
        let n = self.coframe.dim();
        let analytic = self.coframe.analytic();
        let comps = (0..n)
            .map(|mu| {
                let cf = self.coframe.clone();
                Arc::new(PointFn::new(n, analytic, move |x, lay| {
                    let fp = FramePoint::new(&cf, x, lay.order() + 1)?;
                    Ok(fp.theta_coordinate()[i3(n, a, b, mu)].clone())
                })) as FieldRef
            })
            .collect();
        FormField::one_form(self.coframe.chart().clone(), comps).expect("one-form shape")
    }
}

/// Residual `max |de^a + Θ^a_b ∧ e^b|` of the first structural equation.
pub fn first_structure_residual(coframe: &CoFrame, x: &[f64]) -> Result<f64> {
    let fp = FramePoint::new(coframe, x, 1)?;
    let n = fp.n;
    let th = linalg::values(&fp.theta_coordinate());
    let e = linalg::values(&fp.e);
    let mut m: f64 = 0.0;
    for a in 0..n {
        for mu in 0..n {
            for nu in mu + 1..n {
                let de = fp.e[a * n + nu].d1(mu) - fp.e[a * n + mu].d1(nu);
                let mut w = 0.0;
                for b in 0..n {
                    w += th[i3(n, a, b, mu)] * e[b * n + nu] - th[i3(n, a, b, nu)] * e[b * n + mu];
                }
                m = m.max(math::abs(de + w));
            }
        }
    }
    Ok(m)
}

/// Frame curvature at one point.
#[derive(Clone, Debug)]
pub struct Curvature {
    pub n: usize,
    pub eta: Vec<f64>,
    /// `e^a_μ` values.
    pub e: Vec<f64>,
    /// `E^μ_a` values at `μ*n + a`.
    pub einv: Vec<f64>,
    /// `R^a_{bcd}` at `i4(a, b, c, d)`.
    pub riem: Vec<f64>,
}

impl Curvature {
    pub fn from_frame_point(fp: &FramePoint) -> Result<Curvature> {
        Ok(Curvature {
            n: fp.n,
            eta: fp.eta.clone(),
            e: linalg::values(&fp.e),
            einv: linalg::values(&fp.einv),
            riem: linalg::values(&fp.riemann()?),
        })
    }

    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        self.riem[i4(self.n, a, b, c, d)]
    }

    /// Coefficient of `e^c ∧ e^d` (c < d) in `Ω^a_b`.
    pub fn two_form_coefficient(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        self.get(a, b, c, d)
    }

    /// All-lower frame components `R_{abcd}`.
    pub fn lowered(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = self.riem.clone();
        for a in 0..n {
            for r in 0..n * n * n {
                out[a * n * n * n + r] *= self.eta[a];
            }
        }
        out
    }

    /// `max |R^a_{bcd} + R^a_{cdb} + R^a_{dbc}|`.
    pub fn first_bianchi_residual(&self) -> f64 {
        let n = self.n;
        let mut m: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let s = self.get(a, b, c, d) + self.get(a, c, d, b) + self.get(a, d, b, c);
                        m = m.max(math::abs(s));
                    }
                }
            }
        }
        m
    }

    /// Largest violation of `R_{abcd} = −R_{bacd} = −R_{abdc} = R_{cdab}`.
    pub fn symmetry_residual(&self) -> f64 {
        let n = self.n;
        let l = self.lowered();
        let g = |a, b, c, d| l[i4(n, a, b, c, d)];
        let mut m: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let v = g(a, b, c, d);
                        m = m.max(math::abs(v + g(b, a, c, d)));
                        m = m.max(math::abs(v + g(a, b, d, c)));
                        m = m.max(math::abs(v - g(c, d, a, b)));
                    }
                }
            }
        }
        m
    }

    /// Coordinate components `R^ρ_{σμν}`.
    pub fn to_coordinate(&self) -> Vec<f64> {
        frame_to_coordinate(&self.riem, &self.e, &self.einv, self.n)
    }
}

/// `T^ρ_{σμν} = E^ρ_a T^a_{bcd} e^b_σ e^c_μ e^d_ν`.
pub fn frame_to_coordinate(t: &[f64], e: &[f64], einv: &[f64], n: usize) -> Vec<f64> {
    let first = |t: &[f64], m: &dyn Fn(usize, usize) -> f64, slot: usize| -> Vec<f64> {
        let mut out = vec![0.0; t.len()];
        for idx in 0..t.len() {
            let mut digits = [idx / (n * n * n), (idx / (n * n)) % n, (idx / n) % n, idx % n];
            let target = digits[slot];
            let mut s = 0.0;
            for k in 0..n {
                digits[slot] = k;
                s += m(target, k) * t[i4(n, digits[0], digits[1], digits[2], digits[3])];
            }
            out[idx] = s;
        }
        out
    };
    let up = |rho: usize, a: usize| einv[rho * n + a];
    let down = |mu: usize, c: usize| e[c * n + mu];
    let mut r = first(t, &up, 0);
    for slot in 1..4 {
        r = first(&r, &down, slot);
    }
    r
}

/// Frame curvature of a coframe, evaluated on demand.
#[derive(Clone, Debug)]
pub struct CurvatureField {
    coframe: CoFrame,
}

/// Curvature two-forms `Ω = dΘ + Θ∧Θ` of a coframe and its connection.
pub fn curvature_two_forms(coframe: &CoFrame, theta: &SpinConnection) -> Result<CurvatureField> {
    if **coframe.chart() != **theta.coframe.chart() {
        return Err(Error::ChartMismatch);
    }
    Ok(CurvatureField { coframe: coframe.clone() })
}

impl CurvatureField {
    pub fn coframe(&self) -> &CoFrame {
        &self.coframe
    }

    pub fn at(&self, x: &[f64]) -> Result<Curvature> {
        Curvature::from_frame_point(&FramePoint::new(&self.coframe, x, 2)?)
    }
}

/// Ricci, scalar and Einstein tensors at a point.
#[derive(Clone, Debug)]
pub struct Contractions {
    pub n: usize,
    /// `Ric_{bd} = R^a_{bad}` in the frame.
    pub ricci_frame: Vec<f64>,
    /// `Ric_{μν}` in coordinates.
    pub ricci: Vec<f64>,
    pub scalar: f64,
    /// `G_{μν} = Ric_{μν} − ½ R g_{μν}` in coordinates.
    pub einstein: Vec<f64>,
    /// `g_{μν}`.
    pub metric: Vec<f64>,
}

pub fn contract_curvature(curv: &Curvature) -> Contractions {
    let n = curv.n;
    let mut rf = vec![0.0; n * n];
    for b in 0..n {
        for d in 0..n {
            rf[b * n + d] = (0..n).map(|a| curv.get(a, b, a, d)).sum();
        }
    }
    let scalar = (0..n).map(|b| curv.eta[b] * rf[b * n + b]).sum::<f64>();
    let mut ricci = vec![0.0; n * n];
    let mut metric = vec![0.0; n * n];
    for mu in 0..n {
        for nu in 0..n {
            let mut s = 0.0;
            let mut g = 0.0;
            for b in 0..n {
                g += curv.eta[b] * curv.e[b * n + mu] * curv.e[b * n + nu];
                for d in 0..n {
                    s += rf[b * n + d] * curv.e[b * n + mu] * curv.e[d * n + nu];
                }
            }
            ricci[mu * n + nu] = s;
            metric[mu * n + nu] = g;
        }
    }
    let einstein = ricci.iter().zip(&metric).map(|(r, g)| r - 0.5 * scalar * g).collect();
    Contractions { n, ricci_frame: rf, ricci, scalar, einstein, metric }
}

/// Christoffel-symbol curvature of a metric at one point.
#[derive(Clone, Debug)]
pub struct CoordinateRiemann {
    pub n: usize,
    pub metric: Vec<f64>,
    /// `Γ^λ_{μν}` at `i3(λ, μ, ν)`.
    pub christoffel: Vec<f64>,
    /// `R^ρ_{σμν}` at `i4(ρ, σ, μ, ν)`.
    pub riem: Vec<f64>,
}

impl CoordinateRiemann {
    /// Frame components `R^a_{bcd}` for a coframe `e^a_μ` of the same metric.
    pub fn to_frame(&self, e: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        let einv = linalg::inverse(e, n)?;
        // E^μ_a plays the role of the "down" map and e^a_ρ of the "up" map.
        Ok(frame_to_coordinate(&self.riem, &einv, e, n))
    }

    pub fn ricci(&self) -> Vec<f64> {
        let n = self.n;
        let mut r = vec![0.0; n * n];
        for s in 0..n {
            for nu in 0..n {
                r[s * n + nu] = (0..n).map(|rho| self.riem[i4(n, rho, s, rho, nu)]).sum();
            }
        }
        r
    }

    pub fn scalar(&self) -> Result<f64> {
        let n = self.n;
        let gi = linalg::inverse(&self.metric, n)?;
        let r = self.ricci();
        Ok((0..n * n).map(|k| gi[k] * r[k]).sum())
    }
}

/// Independent curvature route through Christoffel symbols of `g_{μν}`.
#[derive(Clone, Debug)]
pub struct CoordinateOracle {
    metric: MetricField,
}

pub fn coordinate_riemann_oracle(metric: &MetricField) -> CoordinateOracle {
    CoordinateOracle { metric: metric.clone() }
}

/// Christoffel symbols `Γ^λ_{μν}` as jets one order below the metric jets.
pub fn christoffel_jets(g: &[Jet], n: usize) -> Result<Vec<Jet>> {
    let k = g[0].order();
    if k == 0 {
        return Err(Error::Invalid("Christoffel symbols need metric order ≥ 1".into()));
    }
    let gi: Vec<Jet> = linalg::jinverse(g, n)?.iter().map(|j| j.truncate(k - 1)).collect();
    let dg: Vec<Jet> = (0..n * n * n).map(|idx| g[idx % (n * n)].derivative(idx / (n * n))).collect();
    let d = |s: usize, m: usize, nu: usize| &dg[s * n * n + m * n + nu];
    let mut out = Vec::with_capacity(n * n * n);
    for l in 0..n {
        for m in 0..n {
            for nu in 0..n {
                let mut acc = Jet::zero(gi[0].layout());
                for s in 0..n {
                    let t = d(m, s, nu) + d(nu, s, m) - d(s, m, nu).clone();
                    acc += &(&gi[l * n + s] * &t);
                }
                out.push(acc.scale(0.5));
            }
        }
    }
    Ok(out)
}

impl CoordinateOracle {
    pub fn at(&self, x: &[f64]) -> Result<CoordinateRiemann> {
        let n = self.metric.chart().dim();
        let lay = JetLayout::new(n, 2);
        let g = self.metric.jets(x, &lay)?;
        let gv = linalg::values(&g);
        let det = linalg::determinant(&gv, n);
        if !(math::abs(det) > 1e-14) {
            return Err(Error::Singular(det));
        }
        let gam = christoffel_jets(&g, n)?;
        let gv_ = |l: usize, m: usize, nu: usize| gam[i3(n, l, m, nu)].value();
        let mut riem = vec![0.0; n * n * n * n];
        for rho in 0..n {
            for s in 0..n {
                for mu in 0..n {
                    for nu in 0..n {
                        let mut v = gam[i3(n, rho, nu, s)].d1(mu) - gam[i3(n, rho, mu, s)].d1(nu);
                        for l in 0..n {
                            v += gv_(rho, mu, l) * gv_(l, nu, s) - gv_(rho, nu, l) * gv_(l, mu, s);
                        }
                        riem[i4(n, rho, s, mu, nu)] = v;
                    }
                }
            }
        }
        let christoffel = gam.iter().map(Jet::value).collect();
        Ok(CoordinateRiemann { n, metric: gv, christoffel, riem })
    }
}

/// Weyl tensor in all-lower frame components.
#[derive(Clone, Debug)]
pub struct Weyl {
    pub n: usize,
    pub eta: Vec<f64>,
    pub w: Vec<f64>,
}

impl Weyl {
    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        self.w[i4(self.n, a, b, c, d)]
    }

    /// `max |η^{ac} W_{abcd}|`.
    pub fn trace_residual(&self) -> f64 {
        let n = self.n;
        let mut m: f64 = 0.0;
        for b in 0..n {
            for d in 0..n {
                let s: f64 = (0..n).map(|a| self.eta[a] * self.get(a, b, a, d)).sum();
                m = m.max(math::abs(s));
            }
        }
        m
    }

    /// `W_{abcd} W^{abcd}`.
    pub fn square(&self) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let v = self.get(a, b, c, d);
                        s += self.eta[a] * self.eta[b] * self.eta[c] * self.eta[d] * v * v;
                    }
                }
            }
        }
        s
    }
}

/// Standard four-dimensional Weyl decomposition.
pub fn weyl_tensor(curv: &Curvature, con: &Contractions) -> Result<Weyl> {
    let n = curv.n;
    if n != 4 {
        return Err(Error::DimensionMismatch { expected: 4, got: n });
    }
    let r = curv.lowered();
    let eta = &curv.eta;
    let g = |a: usize, b: usize| if a == b { eta[a] } else { 0.0 };
    let ric = |a: usize, b: usize| con.ricci_frame[a * n + b];
    let s = con.scalar;
    let mut w = vec![0.0; n * n * n * n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let v = r[i4(n, a, b, c, d)]
                        - 0.5 * (g(a, c) * ric(b, d) - g(a, d) * ric(b, c) - g(b, c) * ric(a, d) + g(b, d) * ric(a, c))
                        + s / 6.0 * (g(a, c) * g(b, d) - g(a, d) * g(b, c));
                    w[i4(n, a, b, c, d)] = v;
                }
            }
        }
    }
    Ok(Weyl { n, eta: eta.clone(), w })
}

/// Bel-Robinson tensor in all-lower frame components.
#[derive(Clone, Debug)]
pub struct BelRobinson {
    pub n: usize,
    pub eta: Vec<f64>,
    pub q: Vec<f64>,
}

impl BelRobinson {
    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        self.q[i4(self.n, a, b, c, d)]
    }

    /// `Q(X, Y, Z, W)` for frame-component vectors.
    pub fn contract(&self, x: &[f64], y: &[f64], z: &[f64], w: &[f64]) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        s += self.get(a, b, c, d) * x[a] * y[b] * z[c] * w[d];
                    }
                }
            }
        }
        s
    }

    /// Largest difference over all 24 index permutations.
    pub fn symmetry_residual(&self) -> f64 {
        let n = self.n;
        let perms = permutations4();
        let mut m: f64 = 0.0;
        for idx in 0..self.q.len() {
            let dg = [idx / (n * n * n), (idx / (n * n)) % n, (idx / n) % n, idx % n];
            for p in &perms {
                let v = self.get(dg[p[0]], dg[p[1]], dg[p[2]], dg[p[3]]);
                m = m.max(math::abs(v - self.q[idx]));
            }
        }
        m
    }
}

fn permutations4() -> Vec<[usize; 4]> {
    let mut out = Vec::with_capacity(24);
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let p = [a, b, c, d];
                    let mut seen = [false; 4];
                    p.iter().for_each(|&i| seen[i] = true);
                    if seen.iter().all(|s| *s) {
                        out.push(p);
                    }
                }
            }
        }
    }
    out
}

/// `Q_{abcd} = W_{aecf}W_b^e_d^f + W_{aedf}W_b^e_c^f − ⅛η_{ab}η_{cd}W²`.
pub fn bel_robinson(weyl: &Weyl) -> Result<BelRobinson> {
    let n = weyl.n;
    if n != 4 {
        return Err(Error::DimensionMismatch { expected: 4, got: n });
    }
    let eta = &weyl.eta;
    let w2 = weyl.square();
    // M[a,c,b,d] = W_{aecf} W_b^e_d^f
    let mut m = vec![0.0; n * n * n * n];
    for a in 0..n {
        for c in 0..n {
            for b in 0..n {
                for d in 0..n {
                    let mut s = 0.0;
                    for e in 0..n {
                        for f in 0..n {
                            s += eta[e] * eta[f] * weyl.get(a, e, c, f) * weyl.get(b, e, d, f);
                        }
                    }
                    m[i4(n, a, c, b, d)] = s;
                }
            }
        }
    }
    let mut q = vec![0.0; n * n * n * n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let mut v = m[i4(n, a, c, b, d)] + m[i4(n, a, d, b, c)];
                    if a == b && c == d {
                        v -= 0.125 * eta[a] * eta[c] * w2;
                    }
                    q[i4(n, a, b, c, d)] = v;
                }
            }
        }
    }
    Ok(BelRobinson { n, eta: eta.clone(), q })
}

/// Weyl and Bel-Robinson tensors of a coframe at a point.
pub fn bel_robinson_at(coframe: &CoFrame, x: &[f64]) -> Result<(Curvature, Weyl, BelRobinson)> {
    let curv = Curvature::from_frame_point(&FramePoint::new(coframe, x, 2)?)?;
    let con = contract_curvature(&curv);
    let w = weyl_tensor(&curv, &con)?;
    let q = bel_robinson(&w)?;
    Ok((curv, w, q))
}

/// Frame covariant derivative of an all-lower frame tensor of rank `r`.
///
/// `partials[k][μ]` holds `∂_μ T_k` (components flattened row-major), and
/// `theta` the frame connection `Θ^a_{bc}` at the same point. Returns
/// `∇_e T_{a…}` at index `e * n^r + k`.
fn covariant_lower(t: &[f64], partials: &[Vec<f64>], einv: &[f64], theta: &[f64], n: usize, r: usize) -> Vec<f64> {
    let len = t.len();
    let mut out = vec![0.0; n * len];
    for e in 0..n {
        for k in 0..len {
            let mut v: f64 = (0..n).map(|mu| einv[mu * n + e] * partials[k][mu]).sum();
            let mut digits = vec![0usize; r];
            let mut rem = k;
            for s in (0..r).rev() {
                digits[s] = rem % n;
                rem /= n;
            }
            for s in 0..r {
                let orig = digits[s];
                for f in 0..n {
                    let th = theta[i3(n, f, orig, e)];
                    if th == 0.0 {
                        continue;
                    }
                    digits[s] = f;
                    let j = digits.iter().fold(0, |acc, d| acc * n + d);
                    v -= th * t[j];
                }
                digits[s] = orig;
            }
            out[e * len + k] = v;
        }
    }
    out
}

fn check_fd_inputs(coframe: &CoFrame, x: &[f64], h: f64) -> Result<()> {
    if !coframe.analytic() {
        return Err(Error::NeedsAnalyticPartials);
    }
    if !(h > 0.0) {
        return Err(Error::Invalid("finite-difference step must be positive".into()));
    }
    coframe.chart().check(x)
}

/// `∇_e R_{abcd}` by finite differences of exact frame curvature values.
pub fn riemann_derivative(coframe: &CoFrame, x: &[f64], h: f64) -> Result<(Curvature, Vec<f64>)> {
    check_fd_inputs(coframe, x, h)?;
    let n = coframe.dim();
    let fp = FramePoint::new(coframe, x, 2)?;
    let curv = Curvature::from_frame_point(&fp)?;
    let f = |y: &[f64]| -> Result<Vec<f64>> { Ok(CurvatureField { coframe: coframe.clone() }.at(y)?.lowered()) };
    let dom = coframe.chart().domain().to_vec();
    let jac = fd_jacobian(&f, x, h, Some(&dom))?;
    let theta = linalg::values(&fp.theta);
    let d = covariant_lower(&curv.lowered(), &jac, &curv.einv, &theta, n, 4);
    Ok((curv, d))
}

/// Second Bianchi identity: `max |∇_e R_{abcd} + ∇_c R_{abde} + ∇_d R_{abec}|`.
pub fn second_bianchi_residual(coframe: &CoFrame, x: &[f64], h: f64) -> Result<f64> {
    let n = coframe.dim();
    let (_, d) = riemann_derivative(coframe, x, h)?;
    let len = n * n * n * n;
    let g = |e: usize, a: usize, b: usize, c: usize, dd: usize| d[e * len + i4(n, a, b, c, dd)];
    let mut m: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for dd in 0..n {
                    for e in 0..n {
                        let s = g(e, a, b, c, dd) + g(c, a, b, dd, e) + g(dd, a, b, e, c);
                        m = m.max(math::abs(s));
                    }
                }
            }
        }
    }
    Ok(m)
}

/// Contracted second Bianchi residual `max |η^{ae} ∇_e R_{abcd}|` (vanishes in vacuum).
pub fn riemann_divergence_residual(coframe: &CoFrame, x: &[f64], h: f64) -> Result<f64> {
    let n = coframe.dim();
    let (curv, d) = riemann_derivative(coframe, x, h)?;
    let len = n * n * n * n;
    let mut m: f64 = 0.0;
    for b in 0..n {
        for c in 0..n {
            for dd in 0..n {
                let s: f64 = (0..n).map(|a| curv.eta[a] * d[a * len + i4(n, a, b, c, dd)]).sum();
                m = m.max(math::abs(s));
            }
        }
    }
    Ok(m)
}

/// Divergence `∇^d Q_{abcd}` (frame components, index `i3(a, b, c)`).
pub fn divergence_bel_robinson(coframe: &CoFrame, x: &[f64], h: f64) -> Result<Vec<f64>> {
    check_fd_inputs(coframe, x, h)?;
    let n = coframe.dim();
    if n != 4 {
        return Err(Error::DimensionMismatch { expected: 4, got: n });
    }
    let fp = FramePoint::new(coframe, x, 2)?;
    let (curv, _, q) = bel_robinson_at(coframe, x)?;
    let f = |y: &[f64]| -> Result<Vec<f64>> { Ok(bel_robinson_at(coframe, y)?.2.q) };
    let dom = coframe.chart().domain().to_vec();
    let jac = fd_jacobian(&f, x, h, Some(&dom))?;
    let theta = linalg::values(&fp.theta);
    let dq = covariant_lower(&q.q, &jac, &curv.einv, &theta, n, 4);
    let len = n * n * n * n;
    let mut out = vec![0.0; n * n * n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                out[i3(n, a, b, c)] = (0..n).map(|d| curv.eta[d] * dq[d * len + i4(n, a, b, c, d)]).sum();
            }
        }
    }
    Ok(out)
}

/// The curvature viewed as a Lorentz-algebra Yang-Mills field.
#[derive(Clone, Debug)]
pub struct GravitationalF {
    pub n: usize,
    /// Potential `A^a_{bμ} = Θ^a_{bμ}`.
    pub potential: Vec<f64>,
    /// `F^a_{bμν} = ∂_μA_ν − ∂_νA_μ + [A_μ, A_ν]` at `i4(a, b, μ, ν)`.
    pub field: Vec<f64>,
    /// `R^a_{bcd} e^c_μ e^d_ν` from the frame curvature.
    pub from_curvature: Vec<f64>,
}

impl GravitationalF {
    /// `max |F − R e e|`.
    pub fn mismatch(&self) -> f64 {
        self.field.iter().zip(&self.from_curvature).map(|(a, b)| math::abs(a - b)).fold(0.0, f64::max)
    }

    /// `max |F_{μν} + F_{νμ}|`.
    pub fn antisymmetry_residual(&self) -> f64 {
        let n = self.n;
        let mut m: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                for mu in 0..n {
                    for nu in 0..n {
                        m = m.max(math::abs(self.field[i4(n, a, b, mu, nu)] + self.field[i4(n, a, b, nu, mu)]));
                    }
                }
            }
        }
        m
    }
}

/// Builds `F = dA + A∧A` in coordinates and compares with the frame curvature.
pub fn gravitational_f(coframe: &CoFrame, x: &[f64]) -> Result<GravitationalF> {
    let fp = FramePoint::new(coframe, x, 2)?;
    let n = fp.n;
    let a = fp.theta_coordinate();
    let av = linalg::values(&a);
    let mut field = vec![0.0; n * n * n * n];
    for p in 0..n {
        for q in 0..n {
            for mu in 0..n {
                for nu in 0..n {
                    let mut v = a[i3(n, p, q, nu)].d1(mu) - a[i3(n, p, q, mu)].d1(nu);
                    for c in 0..n {
                        v += av[i3(n, p, c, mu)] * av[i3(n, c, q, nu)] - av[i3(n, p, c, nu)] * av[i3(n, c, q, mu)];
                    }
                    field[i4(n, p, q, mu, nu)] = v;
                }
            }
        }
    }
    let curv = Curvature::from_frame_point(&fp)?;
    let from_curvature = mixed_f(&curv.riem, &curv.e, n);
    Ok(GravitationalF { n, potential: av, field, from_curvature })
}

/// `F^a_{bμν} = R^a_{bcd} e^c_μ e^d_ν`.
fn mixed_f(riem: &[f64], e: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n * n * n];
    for a in 0..n {
        for b in 0..n {
            for mu in 0..n {
                for nu in 0..n {
                    let mut s = 0.0;
                    for c in 0..n {
                        for d in 0..n {
                            s += riem[i4(n, a, b, c, d)] * e[c * n + mu] * e[d * n + nu];
                        }
                    }
                    out[i4(n, a, b, mu, nu)] = s;
                }
            }
        }
    }
    out
}

/// `∇̄_α F^a_{bμν}` (Levi-Civita on coordinate indices only) and the pieces
/// needed to assemble the wave operator, at one point.
struct PenrosePoint {
    /// `G[α][a,b,μ,ν]` flattened as `α * n^4 + i4(a,b,μ,ν)`.
    grad: Vec<f64>,
    f: Vec<f64>,
    theta: Vec<Jet>,
    gamma: Vec<f64>,
    g: Vec<f64>,
    ginv: Vec<f64>,
    riem_lower_coord: Vec<f64>,
}

fn penrose_point(coframe: &CoFrame, x: &[f64]) -> Result<PenrosePoint> {
    let fp = FramePoint::new(coframe, x, 3)?;
    let n = fp.n;
    let riem = fp.riemann()?;
    let e1: Vec<Jet> = fp.e.iter().map(|j| j.truncate(1)).collect();
    let mut fj = Vec::with_capacity(n * n * n * n);
    for a in 0..n {
        for b in 0..n {
            for mu in 0..n {
                for nu in 0..n {
                    let mut s = Jet::zero(riem[0].layout());
                    for c in 0..n {
                        for d in 0..n {
                            let r = &riem[i4(n, a, b, c, d)];
                            if r.coeffs().iter().all(|v| *v == 0.0) {
                                continue;
                            }
                            s += &(&(r * &e1[c * n + mu]) * &e1[d * n + nu]);
                        }
                    }
                    fj.push(s);
                }
            }
        }
    }
    let g = linalg::jmetric_from_frame(&e1, n, &fp.eta);
    let gam: Vec<f64> = linalg::values(&christoffel_jets(&g, n)?);
    let gv = linalg::values(&g);
    let ginv = linalg::inverse(&gv, n)?;
    let f: Vec<f64> = linalg::values(&fj);
    let len = n * n * n * n;
    let mut grad = vec![0.0; n * len];
    for al in 0..n {
        for a in 0..n {
            for b in 0..n {
                for mu in 0..n {
                    for nu in 0..n {
                        let mut v = fj[i4(n, a, b, mu, nu)].d1(al);
                        for l in 0..n {
                            v -= gam[i3(n, l, al, mu)] * f[i4(n, a, b, l, nu)];
                            v -= gam[i3(n, l, al, nu)] * f[i4(n, a, b, mu, l)];
                        }
                        grad[al * len + i4(n, a, b, mu, nu)] = v;
                    }
                }
            }
        }
    }
    let ev = linalg::values(&fp.e);
    let rl: Vec<f64> = {
        let mut low = linalg::values(&riem);
        for a in 0..n {
            for r in 0..n * n * n {
                low[a * n * n * n + r] *= fp.eta[a];
            }
        }
        let mut out = vec![0.0; len];
        for idx in 0..len {
            let (m, nn, l, al) = (idx / (n * n * n), (idx / (n * n)) % n, (idx / n) % n, idx % n);
            let mut s = 0.0;
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        for d in 0..n {
                            let v = low[i4(n, a, b, c, d)];
                            if v != 0.0 {
                                s += v * ev[a * n + m] * ev[b * n + nn] * ev[c * n + l] * ev[d * n + al];
                            }
                        }
                    }
                }
            }
            out[idx] = s;
        }
        out
    };
    Ok(PenrosePoint { grad, f, theta: fp.theta_coordinate(), gamma: gam, g: gv, ginv, riem_lower_coord: rl })
}

/// Residual of the Penrose wave equation in gravitational Yang-Mills form,
///
/// `r = D^αD_α F_{μν} + R_{μνλρ}F^{λρ} − 2(F_{μδ}F_ν{}^δ − F_{νδ}F_μ{}^δ)`,
///
/// where the products are frame-matrix products and
/// `D^αD_α F = □̄F + [∇̄^αΘ_α, F] + 2[Θ^α, ∇̄_αF] + [Θ^α, [Θ_α, F]]`.
/// The outer derivative of `∇̄F` is taken by fourth-order finite
/// differences with step `h`; everything else is exact. Returns `r^a_{bμν}`.
pub fn penrose_wave_residual(coframe: &CoFrame, x: &[f64], h: f64) -> Result<Vec<f64>> {
    check_fd_inputs(coframe, x, h)?;
    let n = coframe.dim();
    let len = n * n * n * n;
    let c = penrose_point(coframe, x)?;
    let dom = coframe.chart().domain().to_vec();
    let gfun = |y: &[f64]| -> Result<Vec<f64>> { Ok(penrose_point(coframe, y)?.grad) };
    // dgrad[k][β] = ∂_β G_k
    let dgrad = fd_jacobian(&gfun, x, h, Some(&dom))?;
    let gi = |a: usize, b: usize| c.ginv[a * n + b];
    let gam = |l: usize, m: usize, nu: usize| c.gamma[i3(n, l, m, nu)];
    let grad = |al: usize, idx: usize| c.grad[al * len + idx];
    let th = |a: usize, b: usize, mu: usize| c.theta[i3(n, a, b, mu)].value();
    let fv = |a: usize, b: usize, mu: usize, nu: usize| c.f[i4(n, a, b, mu, nu)];
    let _ = &c.g;

    // ∇̄^α Θ_α
    let mut div_theta = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..n {
            let mut s = 0.0;
            for al in 0..n {
                for be in 0..n {
                    let gab = gi(al, be);
                    if gab == 0.0 {
                        continue;
                    }
                    let mut v = c.theta[i3(n, a, b, al)].d1(be);
                    for l in 0..n {
                        v -= gam(l, be, al) * th(a, b, l);
                    }
                    s += gab * v;
                }
            }
            div_theta[a * n + b] = s;
        }
    }
    // Θ^α with raised coordinate index
    let mut theta_up = vec![0.0; n * n * n];
    for a in 0..n {
        for b in 0..n {
            for al in 0..n {
                theta_up[i3(n, a, b, al)] = (0..n).map(|be| gi(al, be) * th(a, b, be)).sum();
            }
        }
    }
    let comm = |x: &dyn Fn(usize, usize) -> f64, y: &dyn Fn(usize, usize) -> f64, a: usize, b: usize| -> f64 {
        (0..n).map(|cc| x(a, cc) * y(cc, b) - y(a, cc) * x(cc, b)).sum()
    };
    // F with both coordinate indices raised
    let mut f_up = vec![0.0; len];
    for a in 0..n {
        for b in 0..n {
            for l in 0..n {
                for r in 0..n {
                    let mut s = 0.0;
                    for p in 0..n {
                        for q in 0..n {
                            s += gi(l, p) * gi(r, q) * fv(a, b, p, q);
                        }
                    }
                    f_up[i4(n, a, b, l, r)] = s;
                }
            }
        }
    }
    // F_ν^δ (second coordinate index raised)
    let mut f_mixed = vec![0.0; len];
    for a in 0..n {
        for b in 0..n {
            for nu in 0..n {
                for de in 0..n {
                    f_mixed[i4(n, a, b, nu, de)] = (0..n).map(|s| fv(a, b, nu, s) * gi(s, de)).sum();
                }
            }
        }
    }

    let mut out = vec![0.0; len];
    for mu in 0..n {
        for nu in 0..n {
            // □̄F_{μν}
            let mut boxf = vec![0.0; n * n];
            for a in 0..n {
                for b in 0..n {
                    let mut s = 0.0;
                    for al in 0..n {
                        for be in 0..n {
                            let gab = gi(al, be);
                            if gab == 0.0 {
                                continue;
                            }
                            let mut v = dgrad[al * len + i4(n, a, b, mu, nu)][be];
                            for l in 0..n {
                                v -= gam(l, be, al) * grad(l, i4(n, a, b, mu, nu));
                                v -= gam(l, be, mu) * grad(al, i4(n, a, b, l, nu));
                                v -= gam(l, be, nu) * grad(al, i4(n, a, b, mu, l));
                            }
                            s += gab * v;
                        }
                    }
                    boxf[a * n + b] = s;
                }
            }
            let fmn = |a: usize, b: usize| fv(a, b, mu, nu);
            for a in 0..n {
                for b in 0..n {
                    let mut v = boxf[a * n + b];
                    v += comm(&|p, q| div_theta[p * n + q], &fmn, a, b);
                    for al in 0..n {
                        let tu = |p: usize, q: usize| theta_up[i3(n, p, q, al)];
                        let ga = |p: usize, q: usize| grad(al, i4(n, p, q, mu, nu));
                        v += 2.0 * comm(&tu, &ga, a, b);
                        let td = |p: usize, q: usize| th(p, q, al);
                        let inner = |p: usize, q: usize| comm(&td, &fmn, p, q);
                        v += comm(&tu, &inner, a, b);
                    }
                    for l in 0..n {
                        for r in 0..n {
                            v += c.riem_lower_coord[i4(n, mu, nu, l, r)] * f_up[i4(n, a, b, l, r)];
                        }
                    }
                    let mut quad = 0.0;
                    for cc in 0..n {
                        for de in 0..n {
                            quad += fv(a, cc, mu, de) * f_mixed[i4(n, cc, b, nu, de)]
                                - fv(a, cc, nu, de) * f_mixed[i4(n, cc, b, mu, de)];
                        }
                    }
                    v -= 2.0 * quad;
                    out[i4(n, a, b, mu, nu)] = v;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{self, Chart};

    #[test]
    fn flat_frame_has_no_curvature() {
        let chart = Arc::new(Chart::new(&["t", "x", "y", "z"], &[-1, 1, 1, 1], &[(-1.0, 1.0); 4]).unwrap());
        let cf = CoFrame::diagonal(chart.clone(), (0..4).map(|_| field::constant(4, 1.0)).collect()).unwrap();
        let curv = curvature_two_forms(&cf, &solve_spin_connection(&cf)).unwrap().at(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        assert!(curv.riem.iter().all(|v| *v == 0.0));
        assert_eq!(first_structure_residual(&cf, &[0.0; 4]).unwrap(), 0.0);
    }

    #[test]
    fn weyl_needs_four_dimensions() {
        let chart = Arc::new(Chart::new(&["x", "y"], &[1, 1], &[(0.5, 2.0), (0.5, 2.0)]).unwrap());
        let cf = CoFrame::diagonal(chart, vec![field::constant(2, 1.0), field::coordinate(2, 0)]).unwrap();
        let curv = CurvatureField { coframe: cf }.at(&[1.0, 1.0]).unwrap();
        let con = contract_curvature(&curv);
        assert!(matches!(weyl_tensor(&curv, &con), Err(Error::DimensionMismatch { .. })));
    }
}
