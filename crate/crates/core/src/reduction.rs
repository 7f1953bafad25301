//! Kaluza-Klein reduction of U(1)-symmetric four-metrics.
//!
//! The four-metric is `ḡ = g̃ + e^{2γ}(dx³ + 𝒜)²` with `g̃`, `γ` and `𝒜` living
//! on a 2+1 chart. The reduced formulas below are written with respect to
//! `g̃`; the Einstein–wave-map system lives on the conformal metric
//! `g = e^{2γ} g̃`. Every function states which of the two it uses.
//!
//! Frame components use the triad of `g̃` (signed Cholesky, leg 0 timelike)
//! together with the fiber leg `e³ = e^γ(dx³ + 𝒜)`, which is index 3 of the
//! assembled coframe. Coordinate projections use the horizontal lifts
//! `∂_μ − 𝒜_μ∂_3` and the Killing field `∂_3`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::curvature::{contract_curvature, coordinate_riemann_oracle, curvature_two_forms, solve_spin_connection};
use crate::curvature::{christoffel_jets, i3, i4};
use crate::error::{invalid, Error, Result};
use crate::field::{self, Chart, FdField, FieldRef, PointFn};
use crate::fixtures::halton_points;
use crate::forms::{exterior_derivative, hodge_dual, CoFrame, FormField, MetricField};
use crate::jet::{Jet, JetCtx, JetLayout};
use crate::linalg;
use crate::math;
use crate::quadrature::{gauss_legendre, Rule};

/// Reduced data `(g̃, γ, 𝒜)` on a 2+1 chart.
#[derive(Clone, Debug)]
pub struct KKData {
    pub chart3: Arc<Chart>,
    pub gamma: FieldRef,
    /// `None` for polarized data (`𝒜 ≡ 0`).
    pub a: Option<FormField>,
    /// The orbit metric `g̃`.
    pub g3: MetricField,
}

impl KKData {
    pub fn new(g3: MetricField, gamma: FieldRef, a: Option<FormField>) -> Result<KKData> {
        let chart3 = g3.chart().clone();
        if chart3.dim() != 3 || !chart3.is_lorentzian() {
            return Err(invalid("reduced data live on a Lorentzian 2+1 chart"));
        }
        if gamma.dim() != 3 {
            return Err(Error::DimensionMismatch { expected: 3, got: gamma.dim() });
        }
        if let Some(a) = &a {
            if a.degree() != 1 || **a.chart() != *chart3 {
                return Err(Error::ChartMismatch);
            }
        }
        Ok(KKData { chart3, gamma, a, g3 })
    }

    /// Parses expressions in the chart coordinates: six upper-triangular
    /// components of `g̃`, `γ`, and optionally the three components of `𝒜`.
    pub fn from_expressions(chart3: Arc<Chart>, g3: &[&str], gamma: &str, a: Option<&[&str]>) -> Result<KKData> {
        if g3.len() != 6 {
            return Err(Error::DimensionMismatch { expected: 6, got: g3.len() });
        }
        let parse = |s: &str| field::expr_field(s, &chart3, &[]);
        let upper = g3.iter().map(|s| parse(s)).collect::<Result<Vec<_>>>()?;
        let a = match a {
            None => None,
            Some(c) => {
                if c.len() != 3 {
                    return Err(Error::DimensionMismatch { expected: 3, got: c.len() });
                }
                let comps = c.iter().map(|s| parse(s)).collect::<Result<Vec<_>>>()?;
                Some(FormField::one_form(chart3.clone(), comps)?)
            }
        };
        KKData::new(MetricField::new(chart3.clone(), upper)?, parse(gamma)?, a)
    }

    pub fn polarized(&self) -> bool {
        self.a.is_none()
    }

    /// Data with `𝒜 → 𝒜 + dλ`.
    pub fn gauge_shifted(&self, lambda: FieldRef) -> Result<KKData> {
        let dl = exterior_derivative(&FormField::scalar(self.chart3.clone(), lambda))?;
        let a = match &self.a {
            Some(a) => a.add(&dl)?,
            None => dl,
        };
        KKData::new(self.g3.clone(), self.gamma.clone(), Some(a))
    }

    /// Faraday two-form `𝓕 = d𝒜`, or `None` for polarized data.
    pub fn faraday(&self) -> Result<Option<FormField>> {
        self.a.as_ref().map(exterior_derivative).transpose()
    }

    /// Conformal metric `g = e^{2γ} g̃`.
    pub fn conformal_metric(&self) -> MetricField {
        let mut upper = Vec::new();
        for mu in 0..3 {
            for nu in mu..3 {
                let (gamma, c) = (self.gamma.clone(), self.g3.component(mu, nu).clone());
                let analytic = gamma.analytic() && c.analytic();
                upper.push(Arc::new(PointFn::new(3, analytic, move |x, lay| {
                    Ok(&gamma.jet(x, lay)?.scale(2.0).exp() * &c.jet(x, lay)?)
                })) as FieldRef);
            }
        }
        MetricField::new(self.chart3.clone(), upper).expect("six components")
    }

    /// The 3+1 chart `(chart3, x³)`.
    pub fn chart4(&self) -> Result<Arc<Chart>> {
        let mut names = self.chart3.names();
        let fiber = if names.contains(&"x3") { "z" } else { "x3" };
        names.push(fiber);
        let mut sig = self.chart3.signature().to_vec();
        sig.push(1);
        let mut dom = self.chart3.domain().to_vec();
        dom.push((-1e6, 1e6));
        Ok(Arc::new(Chart::new(&names, &sig, &dom)?))
    }
}

fn lift(x: &[f64]) -> [f64; 4] {
    [x[0], x[1], x[2], 0.0]
}

/// Four-dimensional coframe `{e^a of g̃, e^γ(dx³ + 𝒜)}`.
pub fn assemble_kk_coframe(kk: &KKData) -> Result<CoFrame> {
    let chart4 = kk.chart4()?;
    let kk2 = kk.clone();
    let analytic = kk.g3.analytic() && kk.gamma.analytic() && kk.a.as_ref().is_none_or(|a| a.analytic());
    let eta3 = [-1.0, 1.0, 1.0];
    Ok(CoFrame::from_fn(chart4, analytic, move |x, lay4| {
        let lay3 = JetLayout::new(3, lay4.order());
        let x3 = &x[..3];
        let g = kk2.g3.jets(x3, &lay3)?;
        let triad = linalg::jframe_from_metric(&g, 3, &eta3)?;
        let eg = kk2.gamma.jet(x3, &lay3)?.exp();
        let a = match &kk2.a {
            Some(a) => a.jets(x3, &lay3)?,
            None => vec![Jet::zero(&lay3); 3],
        };
        let mut e = vec![Jet::zero(lay4); 16];
        for r in 0..3 {
            for mu in 0..3 {
                e[r * 4 + mu] = triad[r * 3 + mu].embed(lay4);
            }
        }
        for mu in 0..3 {
            e[12 + mu] = (&eg * &a[mu]).embed(lay4);
        }
        e[15] = eg.embed(lay4);
        Ok(e)
    }))
}

/// Point data shared by the reduced formulas (all with respect to `g̃`).
struct Reduced {
    gi: Vec<f64>,
    /// `R_{ρσμν}` of `g̃`, all lower.
    riem: Vec<f64>,
    ricci: Vec<f64>,
    dg: [f64; 3],
    /// `∇̃_μ∇̃_ν γ`.
    hess: Vec<f64>,
    /// `𝓕_{μν}`.
    f: Vec<f64>,
    /// `∇̃_σ 𝓕_{μν}` at `i3(σ, μ, ν)`.
    df: Vec<f64>,
    eg: f64,
    /// Triad `e^a_μ` of `g̃` and its inverse `E^μ_a` (`einv[μ*3 + a]`).
    e: Vec<f64>,
    einv: Vec<f64>,
}

impl Reduced {
    fn at(kk: &KKData, x: &[f64]) -> Result<Reduced> {
        let n = 3;
        kk.chart3.check(x)?;
        let lay = JetLayout::new(3, 2);
        let gj = kk.g3.jets(x, &lay)?;
        let g = linalg::values(&gj);
        let det = linalg::determinant(&g, n);
        if !(math::abs(det) > 1e-14) {
            return Err(Error::Singular(det));
        }
        let gi = linalg::inverse(&g, n)?;
        let gam: Vec<f64> = christoffel_jets(&gj, n)?.iter().map(Jet::value).collect();
        let cr = coordinate_riemann_oracle(&kk.g3).at(x)?;
        let mut riem = vec![0.0; 81];
        for r in 0..n {
            for s in 0..n {
                for m in 0..n {
                    for v in 0..n {
                        riem[i4(n, r, s, m, v)] = (0..n).map(|l| g[r * n + l] * cr.riem[i4(n, l, s, m, v)]).sum();
                    }
                }
            }
        }
        let ricci = cr.ricci();
        let gm = kk.gamma.jet(x, &lay)?;
        let dg = [gm.d1(0), gm.d1(1), gm.d1(2)];
        let mut hess = vec![0.0; 9];
        for m in 0..n {
            for v in 0..n {
                hess[m * n + v] = gm.d2(m, v) - (0..n).map(|l| gam[i3(n, l, m, v)] * dg[l]).sum::<f64>();
            }
        }
        let mut f = vec![0.0; 9];
        let mut pf = vec![0.0; 27];
        if let Some(a) = &kk.a {
            let aj = a.jets(x, &lay)?;
            for m in 0..n {
                for v in 0..n {
                    f[m * n + v] = aj[v].d1(m) - aj[m].d1(v);
                    for s in 0..n {
                        pf[i3(n, s, m, v)] = aj[v].d2(s, m) - aj[m].d2(s, v);
                    }
                }
            }
        }
        let mut df = vec![0.0; 27];
        for s in 0..n {
            for m in 0..n {
                for v in 0..n {
                    let mut c = pf[i3(n, s, m, v)];
                    for l in 0..n {
                        c -= gam[i3(n, l, s, m)] * f[l * n + v] + gam[i3(n, l, s, v)] * f[m * n + l];
                    }
                    df[i3(n, s, m, v)] = c;
                }
            }
        }
        let e = linalg::values(&linalg::jframe_from_metric(&gj, n, &[-1.0, 1.0, 1.0])?);
        let einv = linalg::inverse(&e, n)?;
        Ok(Reduced { gi, riem, ricci, dg, hess, f, df, eg: math::exp(gm.value()), e, einv })
    }

    /// `𝓕_{μσ} 𝓕_ν{}^σ`.
    fn ff(&self, m: usize, v: usize) -> f64 {
        let mut s = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                s += self.f[m * 3 + a] * self.gi[a * 3 + b] * self.f[v * 3 + b];
            }
        }
        s
    }

    /// `𝓕_{μν} 𝓕^{μν}`.
    fn f_squared(&self) -> f64 {
        (0..3).map(|m| (0..3).map(|v| self.gi[m * 3 + v] * self.ff(m, v)).sum::<f64>()).sum()
    }

    fn box_gamma(&self) -> f64 {
        (0..9).map(|k| self.gi[k] * self.hess[k]).sum()
    }

    fn grad_gamma_sq(&self) -> f64 {
        let mut s = 0.0;
        for m in 0..3 {
            for v in 0..3 {
                s += self.gi[m * 3 + v] * self.dg[m] * self.dg[v];
            }
        }
        s
    }

    /// `∇̃_σ(e^{3γ} 𝓕^σ{}_μ)`.
    fn weighted_divergence(&self, mu: usize) -> f64 {
        let e3 = self.eg * self.eg * self.eg;
        let mut s = 0.0;
        for sg in 0..3 {
            for r in 0..3 {
                s += self.gi[sg * 3 + r] * (self.df[i3(3, sg, r, mu)] + 3.0 * self.dg[sg] * self.f[r * 3 + mu]);
            }
        }
        e3 * s
    }
}

/// Ricci projections of `ḡ` on horizontal lifts and the Killing field.
#[derive(Clone, Debug, PartialEq)]
pub struct RicciProjections {
    /// `Ric(X̂_μ, X̂_ν)`.
    pub pure: Vec<f64>,
    /// `Ric(X̂_μ, ∂_3)`.
    pub cross: Vec<f64>,
    /// `Ric(∂_3, ∂_3)`.
    pub ext: f64,
}

impl RicciProjections {
    pub fn max_abs_diff(&self, other: &RicciProjections) -> f64 {
        let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| math::abs(x - y)).fold(0.0, f64::max);
        d(&self.pure, &other.pure).max(d(&self.cross, &other.cross)).max(math::abs(self.ext - other.ext))
    }

    pub fn max_abs(&self) -> f64 {
        math::max_abs(&self.pure).max(math::max_abs(&self.cross)).max(math::abs(self.ext))
    }
}

/// Reduced Ricci projections:
///
/// * `Ric_{μν} = R̃_{μν} − ∇̃_μ∇̃_νγ − ∂_μγ∂_νγ − ½e^{2γ}𝓕_{μσ}𝓕_ν{}^σ`
/// * `Ric_{μ3} = −½e^{−γ}∇̃_σ(e^{3γ}𝓕^σ{}_μ)`
/// * `Ric_{33} = −e^{2γ}(□̃γ + |∇̃γ|² − ¼e^{2γ}𝓕²)`
pub fn ricci_projections(kk: &KKData, x: &[f64]) -> Result<RicciProjections> {
    let r = Reduced::at(kk, x)?;
    let e2 = r.eg * r.eg;
    let polar = kk.polarized();
    let mut pure = vec![0.0; 9];
    for m in 0..3 {
        for v in 0..3 {
            let mut s = r.ricci[m * 3 + v] - r.hess[m * 3 + v] - r.dg[m] * r.dg[v];
            if !polar {
                s -= 0.5 * e2 * r.ff(m, v);
            }
            pure[m * 3 + v] = s;
        }
    }
    let cross = if polar { vec![0.0; 3] } else { (0..3).map(|m| -0.5 / r.eg * r.weighted_divergence(m)).collect() };
    let fsq = if polar { 0.0 } else { r.f_squared() };
    let ext = -e2 * (r.box_gamma() + r.grad_gamma_sq() - 0.25 * e2 * fsq);
    Ok(RicciProjections { pure, cross, ext })
}

/// The same projections from the four-dimensional Cartan pipeline.
pub fn ricci_projections_4d(kk: &KKData, x: &[f64]) -> Result<RicciProjections> {
    let cf = assemble_kk_coframe(kk)?;
    let curv = curvature_two_forms(&cf, &solve_spin_connection(&cf))?.at(&lift(x))?;
    let rf = contract_curvature(&curv).ricci_frame;
    let red = Reduced::at(kk, x)?;
    let mut pure = vec![0.0; 9];
    let mut cross = vec![0.0; 3];
    for m in 0..3 {
        for v in 0..3 {
            let mut s = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    s += red.e[a * 3 + m] * red.e[b * 3 + v] * rf[a * 4 + b];
                }
            }
            pure[m * 3 + v] = s;
        }
        cross[m] = red.eg * (0..3).map(|a| red.e[a * 3 + m] * rf[a * 4 + 3]).sum::<f64>();
    }
    Ok(RicciProjections { pure, cross, ext: red.eg * red.eg * rf[15] })
}

/// Frame Riemann blocks of `ḡ` (all indices down; `a, b, … ∈ {0, 1, 2}`,
/// `3` the fiber leg).
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedRiemann {
    /// `R_{abcd} = R̃_{abcd} − ¼e^{2γ}(𝓕_{ac}𝓕_{bd} − 𝓕_{ad}𝓕_{bc} + 2𝓕_{ab}𝓕_{cd})`.
    pub pure: Vec<f64>,
    /// `R_{abc3} = −½e^γ(∇̃_c𝓕_{ab} + 2γ_c𝓕_{ab} + γ_b𝓕_{ac} − γ_a𝓕_{bc})`.
    pub cross: Vec<f64>,
    /// `R_{a3b3} = −∇̃_a∇̃_bγ − γ_aγ_b + ¼e^{2γ}𝓕_{ac}𝓕_b{}^c`.
    pub ext: Vec<f64>,
}

impl ReducedRiemann {
    /// Full frame tensor `R^A_{BCD}` in the assembled coframe (`i4(4, …)`).
    pub fn to_frame4(&self) -> Vec<f64> {
        let eta = [-1.0, 1.0, 1.0, 1.0];
        let mut low = vec![0.0; 256];
        let mut put = |a: usize, b: usize, c: usize, d: usize, v: f64| low[i4(4, a, b, c, d)] = v;
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    for d in 0..3 {
                        put(a, b, c, d, self.pure[i4(3, a, b, c, d)]);
                    }
                    let v = self.cross[i3(3, a, b, c)];
                    put(a, b, c, 3, v);
                    put(a, b, 3, c, -v);
                    put(c, 3, a, b, v);
                    put(3, c, a, b, -v);
                }
                let v = self.ext[a * 3 + b];
                put(a, 3, b, 3, v);
                put(3, a, 3, b, v);
                put(a, 3, 3, b, -v);
                put(3, a, b, 3, -v);
            }
        }
        (0..256).map(|k| eta[k / 64] * low[k]).collect()
    }
}

pub fn reduced_riemann(kk: &KKData, x: &[f64]) -> Result<ReducedRiemann> {
    let r = Reduced::at(kk, x)?;
    let polar = kk.polarized();
    let e2 = r.eg * r.eg;
    let ei = |mu: usize, a: usize| r.einv[mu * 3 + a];
    // coordinate tensors first, then frame components
    let mut pure_c = r.riem.clone();
    let mut cross_c = vec![0.0; 27];
    let mut ext_c = [0.0; 9];
    for m in 0..3 {
        for v in 0..3 {
            ext_c[m * 3 + v] = -r.hess[m * 3 + v] - r.dg[m] * r.dg[v] + if polar { 0.0 } else { 0.25 * e2 * r.ff(m, v) };
            if polar {
                continue;
            }
            for p in 0..3 {
                let f = |i: usize, j: usize| r.f[i * 3 + j];
                cross_c[i3(3, m, v, p)] = -0.5
                    * r.eg
                    * (r.df[i3(3, p, m, v)] + 2.0 * r.dg[p] * f(m, v) + r.dg[v] * f(m, p) - r.dg[m] * f(v, p));
                for s in 0..3 {
                    pure_c[i4(3, m, v, p, s)] -=
                        0.25 * e2 * (f(m, p) * f(v, s) - f(m, s) * f(v, p) + 2.0 * f(m, v) * f(p, s));
                }
            }
        }
    }
    let mut pure = vec![0.0; 81];
    let mut cross = vec![0.0; 27];
    let mut ext = vec![0.0; 9];
    for a in 0..3 {
        for b in 0..3 {
            let mut s = 0.0;
            for m in 0..3 {
                for v in 0..3 {
                    s += ei(m, a) * ei(v, b) * ext_c[m * 3 + v];
                }
            }
            ext[a * 3 + b] = s;
            for c in 0..3 {
                let mut s = 0.0;
                for m in 0..3 {
                    for v in 0..3 {
                        for p in 0..3 {
                            s += ei(m, a) * ei(v, b) * ei(p, c) * cross_c[i3(3, m, v, p)];
                        }
                    }
                }
                cross[i3(3, a, b, c)] = s;
                for d in 0..3 {
                    let mut s = 0.0;
                    for m in 0..3 {
                        for v in 0..3 {
                            for p in 0..3 {
                                for q in 0..3 {
                                    s += ei(m, a) * ei(v, b) * ei(p, c) * ei(q, d) * pure_c[i4(3, m, v, p, q)];
                                }
                            }
                        }
                    }
                    pure[i4(3, a, b, c, d)] = s;
                }
            }
        }
    }
    Ok(ReducedRiemann { pure, cross, ext })
}

/// Frame Riemann `R^A_{BCD}` of the assembled coframe, for comparison with
/// [`ReducedRiemann::to_frame4`].
pub fn riemann_4d(kk: &KKData, x: &[f64]) -> Result<Vec<f64>> {
    let cf = assemble_kk_coframe(kk)?;
    Ok(curvature_two_forms(&cf, &solve_spin_connection(&cf))?.at(&lift(x))?.riem)
}

fn scalar_value(kk: &KKData, x: &[f64]) -> Result<f64> {
    let r = Reduced::at(kk, x)?;
    let rt: f64 = (0..9).map(|k| r.gi[k] * r.ricci[k]).sum();
    let fsq = if kk.polarized() { 0.0 } else { r.f_squared() };
    Ok(rt - 0.25 * r.eg * r.eg * fsq - 2.0 * r.box_gamma() - 2.0 * r.grad_gamma_sq())
}

/// `Scal(ḡ) = Scal(g̃) − ¼e^{2γ}𝓕² − 2□̃γ − 2|∇̃γ|²`, a field on the 2+1 chart
/// (partials by finite differences).
pub fn reduced_scalar_curvature(kk: &KKData) -> FieldRef {
    let kk = kk.clone();
    Arc::new(FdField::new(3, move |x: &[f64]| scalar_value(&kk, x).unwrap_or(f64::NAN)))
}

/// Settings for the twist construction.
#[derive(Clone, Debug)]
pub struct TwistOptions {
    /// Gauss-Legendre nodes per panel.
    pub nodes: usize,
    /// Panels per unit length along each axis segment.
    pub panels_per_unit: f64,
    /// Largest accepted `|dG|`.
    pub closure_tolerance: f64,
    /// Points used for the closure, path and exactness checks.
    pub samples: usize,
    /// Box for the checks (defaults to the chart domain).
    pub sample_box: Option<Vec<(f64, f64)>>,
}

impl Default for TwistOptions {
    fn default() -> Self {
        TwistOptions { nodes: 12, panels_per_unit: 4.0, closure_tolerance: 1e-8, samples: 16, sample_box: None }
    }
}

/// Twist potential with its diagnostics.
#[derive(Clone, Debug)]
pub struct TwistData {
    pub f: FormField,
    /// `G = e^{3γ} *𝓕` (Hodge dual of `g̃`).
    pub g: FormField,
    /// `ω` with `dω = G`, zero at the base point.
    pub omega: FieldRef,
    pub base: Vec<f64>,
    /// `max |dG|` over the sample points.
    pub closure_residual: f64,
    /// `max |ω_path1 − ω_path2|` over the sample points.
    pub path_residual: f64,
    /// `max |∂_μω − G_μ|` over the sample points.
    pub exactness_residual: f64,
}

/// Line integral of `G` from `base` to `x` along axis-parallel segments taken
/// in the order `axes`.
pub fn staircase_integral(g: &FormField, base: &[f64], x: &[f64], axes: [usize; 3], opts: &TwistOptions) -> Result<f64> {
    let rule = gauss_legendre(opts.nodes)?;
    let mut cur = base.to_vec();
    let mut total = 0.0;
    for &ax in &axes {
        let (a, b) = (cur[ax], x[ax]);
        if a != b {
            total += segment(g, &cur, ax, a, b, &rule, opts)?;
        }
        cur[ax] = b;
    }
    Ok(total)
}

fn segment(g: &FormField, at: &[f64], ax: usize, a: f64, b: f64, rule: &Rule, opts: &TwistOptions) -> Result<f64> {
    let panels = (math::ceil(math::abs(b - a) * opts.panels_per_unit) as usize).max(1);
    let h = (b - a) / panels as f64;
    let comp = g.components()[ax].clone();
    let mut p = at.to_vec();
    let mut err = None;
    let mut acc = 0.0;
    for k in 0..panels {
        let lo = a + k as f64 * h;
        acc += rule.integrate(lo, lo + h, |s| {
            p[ax] = s;
            comp.eval(&p).unwrap_or_else(|e| {
                err = Some(e);
                f64::NAN
            })
        });
    }
    match err {
        Some(e) => Err(e),
        None => Ok(acc),
    }
}

/// `G = e^{3γ} *_{g̃} 𝓕`.
pub fn twist_one_form(kk: &KKData) -> Result<(FormField, FormField)> {
    let f = match kk.faraday()? {
        Some(f) => f,
        None => return Ok((FormField::zero(kk.chart3.clone(), 2), FormField::zero(kk.chart3.clone(), 1))),
    };
    let star = hodge_dual(&f, &kk.g3)?;
    let comps = star
        .components()
        .iter()
        .map(|c| {
            let (c, gamma) = (c.clone(), kk.gamma.clone());
            let analytic = c.analytic() && gamma.analytic();
            Arc::new(PointFn::new(3, analytic, move |x, lay: &JetCtx| {
                Ok(&gamma.jet(x, lay)?.scale(3.0).exp() * &c.jet(x, lay)?)
            })) as FieldRef
        })
        .collect();
    Ok((f, FormField::one_form(kk.chart3.clone(), comps)?))
}

/// Twist potential `ω` with `dω = G`, by line integration from `base`.
pub fn twist_potential(kk: &KKData, base: &[f64], opts: &TwistOptions) -> Result<TwistData> {
    kk.chart3.check(base)?;
    let (f, g) = twist_one_form(kk)?;
    let bx = opts.sample_box.clone().unwrap_or_else(|| kk.chart3.domain().to_vec());
    let pts = halton_points(&bx, opts.samples);
    let dg = exterior_derivative(&g)?;
    let mut closure: f64 = 0.0;
    for p in &pts {
        closure = closure.max(math::max_abs(&dg.eval(p)?));
    }
    if !(closure <= opts.closure_tolerance) {
        return Err(Error::NotClosed(closure));
    }
    let omega: FieldRef = if kk.polarized() {
        field::zero(3)
    } else {
        let (g2, b, o) = (g.clone(), base.to_vec(), opts.clone());
        Arc::new(FdField::new(3, move |x: &[f64]| staircase_integral(&g2, &b, x, [0, 1, 2], &o).unwrap_or(f64::NAN)).with_step(1e-4))
    };
    let mut path: f64 = 0.0;
    let mut exact: f64 = 0.0;
    for p in &pts {
        let w1 = omega.eval(p)?;
        let w2 = if kk.polarized() { 0.0 } else { staircase_integral(&g, base, p, [2, 1, 0], opts)? };
        path = path.max(math::abs(w1 - w2));
        let grad = omega.gradient(p)?;
        let gv = g.eval(p)?;
        for mu in 0..3 {
            exact = exact.max(math::abs(grad[mu] - gv[mu]));
        }
    }
    Ok(TwistData {
        f,
        g,
        omega,
        base: base.to_vec(),
        closure_residual: closure,
        path_residual: path,
        exactness_residual: exact,
    })
}

/// Residuals of the Einstein–wave-map system on `(M, g)` at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveMapResiduals {
    /// `□_gγ + ½e^{−4γ}⟨dω, dω⟩_g`.
    pub r_gamma: f64,
    /// `□_gω − 4⟨dγ, dω⟩_g`.
    pub r_omega: f64,
    /// Wave-map stress tensor `T_{μν}`.
    pub stress: Vec<f64>,
    /// Einstein tensor of `g`.
    pub einstein: Vec<f64>,
    /// `Ein_{μν} − T_{μν}`.
    pub mismatch: Vec<f64>,
}

/// Wave-map residuals for `U = (γ, ω) : (M, g) → (ℍ², 4dγ² + e^{−4γ}dω²)`.
///
/// The stress tensor carries the coupling `½`:
/// `T_{μν} = ½(⟨∂_μU, ∂_νU⟩_h − ½g_{μν}⟨∂^σU, ∂_σU⟩_h)`, so that the reduced
/// vacuum equations read `Ein(g) = T`.
pub fn wavemap_residuals(g: &MetricField, gamma: &FieldRef, omega: &FieldRef, x: &[f64]) -> Result<WaveMapResiduals> {
    let n = 3;
    if g.chart().dim() != 3 {
        return Err(invalid("wave-map residuals live on a 2+1 chart"));
    }
    let lay = JetLayout::new(3, 2);
    let gj = g.jets(x, &lay)?;
    let gv = linalg::values(&gj);
    let gi = linalg::inverse(&gv, n)?;
    let gam: Vec<f64> = christoffel_jets(&gj, n)?.iter().map(Jet::value).collect();
    let gm = gamma.jet(x, &lay)?;
    let om = omega.jet(x, &lay)?;
    let wave = |u: &Jet| {
        let mut s = 0.0;
        for m in 0..n {
            for v in 0..n {
                let h = u.d2(m, v) - (0..n).map(|l| gam[i3(n, l, m, v)] * u.d1(l)).sum::<f64>();
                s += gi[m * n + v] * h;
            }
        }
        s
    };
    let dot = |a: &Jet, b: &Jet| {
        let mut s = 0.0;
        for m in 0..n {
            for v in 0..n {
                s += gi[m * n + v] * a.d1(m) * b.d1(v);
            }
        }
        s
    };
    let w = math::exp(-4.0 * gm.value());
    let r_gamma = wave(&gm) + 0.5 * w * dot(&om, &om);
    let r_omega = wave(&om) - 4.0 * dot(&gm, &om);
    let hsq = 4.0 * dot(&gm, &gm) + w * dot(&om, &om);
    let mut stress = vec![0.0; 9];
    for m in 0..n {
        for v in 0..n {
            let h = 4.0 * gm.d1(m) * gm.d1(v) + w * om.d1(m) * om.d1(v);
            stress[m * n + v] = 0.5 * (h - 0.5 * gv[m * n + v] * hsq);
        }
    }
    let cf = CoFrame::from_metric(g.clone());
    let curv = curvature_two_forms(&cf, &solve_spin_connection(&cf))?.at(x)?;
    let einstein = contract_curvature(&curv).einstein;
    let mismatch = einstein.iter().zip(&stress).map(|(a, b)| a - b).collect();
    Ok(WaveMapResiduals { r_gamma, r_omega, stress, einstein, mismatch })
}
