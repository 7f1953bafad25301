//! Named spacetime fixtures with exact (jet) partials.
//!
//! Every fixture carries a chart whose domain leaves room for
//! finite-difference stencils around its sampling box.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::field::{self, Chart, FieldRef};
use crate::forms::{CoFrame, MetricField};
use crate::jet::Jet;
use crate::math;

/// A metric, its orthonormal coframe and sampling information.
#[derive(Clone, Debug)]
pub struct Fixture {
    pub name: String,
    pub chart: Arc<Chart>,
    pub coframe: CoFrame,
    pub metric: MetricField,
    /// Box inside the chart domain where checks are sampled.
    pub sample_box: Vec<(f64, f64)>,
    pub vacuum: bool,
}

impl Fixture {
    /// `count` deterministic points (Halton sequence) in the sampling box.
    pub fn sample_points(&self, count: usize) -> Vec<Vec<f64>> {
        halton_points(&self.sample_box, count)
    }
}

const PRIMES: [u32; 4] = [2, 3, 5, 7];

fn radical_inverse(mut i: u32, base: u32) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Low-discrepancy points in a box.
pub fn halton_points(bx: &[(f64, f64)], count: usize) -> Vec<Vec<f64>> {
    (1..=count as u32)
        .map(|i| {
            bx.iter()
                .enumerate()
                .map(|(k, (lo, hi))| lo + (hi - lo) * radical_inverse(i, PRIMES[k]))
                .collect()
        })
        .collect()
}

fn chart(names: &[&str], sig: &[i8], dom: &[(f64, f64)]) -> Arc<Chart> {
    Arc::new(Chart::new(names, sig, dom).expect("fixture chart"))
}

fn jf(n: usize, f: impl Fn(&[Jet]) -> Jet + Send + Sync + 'static) -> FieldRef {
    field::jet_fn(n, f)
}

/// Minkowski space in Cartesian coordinates, `dim ∈ {2, 3, 4}`.
pub fn minkowski(dim: usize) -> Result<Fixture> {
    let names = ["t", "x", "y", "z"];
    let mut sig = vec![1i8; dim];
    sig[0] = -1;
    let c = Arc::new(Chart::new(&names[..dim], &sig, &vec![(-10.0, 10.0); dim])?);
    let coframe = CoFrame::diagonal(c.clone(), (0..dim).map(|_| field::constant(dim, 1.0)).collect())?;
    Ok(Fixture {
        name: format!("minkowski{dim}"),
        metric: MetricField::flat(c.clone()),
        chart: c,
        coframe,
        sample_box: vec![(-1.0, 1.0); dim],
        vacuum: true,
    })
}

pub fn minkowski4() -> Fixture {
    minkowski(4).expect("minkowski4")
}

/// Vacuum Kasner metric `−dt² + Σ t^{2p_i} (dx^i)²`.
///
/// The exponents must satisfy `Σp = Σp² = 1` unless `allow_nonvacuum`.
pub fn kasner(p: [f64; 3]) -> Result<Fixture> {
    let s: f64 = p.iter().sum();
    let s2: f64 = p.iter().map(|v| v * v).sum();
    if math::abs(s - 1.0) > 1e-12 || math::abs(s2 - 1.0) > 1e-12 {
        return Err(Error::Invalid(format!("kasner exponents {p:?} violate Σp = Σp² = 1")));
    }
    Ok(kasner_unchecked(p))
}

/// Kasner-form metric with arbitrary exponents (not vacuum in general).
pub fn kasner_unchecked(p: [f64; 3]) -> Fixture {
    let c = chart(
        &["t", "x1", "x2", "x3"],
        &[-1, 1, 1, 1],
        &[(0.2, 20.0), (-50.0, 50.0), (-50.0, 50.0), (-50.0, 50.0)],
    );
    let mut diag = vec![field::constant(4, 1.0)];
    let mut gdiag = vec![field::constant(4, -1.0)];
    for pi in p {
        diag.push(jf(4, move |x| x[0].powf(pi)));
        gdiag.push(jf(4, move |x| x[0].powf(2.0 * pi)));
    }
    let s: f64 = p.iter().sum();
    let s2: f64 = p.iter().map(|v| v * v).sum();
    Fixture {
        name: format!("kasner({},{},{})", p[0], p[1], p[2]),
        coframe: CoFrame::diagonal(c.clone(), diag).expect("kasner coframe"),
        metric: MetricField::diagonal(c.clone(), gdiag).expect("kasner metric"),
        chart: c,
        sample_box: vec![(0.5, 4.0), (-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0)],
        vacuum: math::abs(s - 1.0) < 1e-12 && math::abs(s2 - 1.0) < 1e-12,
    }
}

/// Schwarzschild exterior in Schwarzschild coordinates `(t, r, θ, φ)`.
pub fn schwarzschild(m: f64) -> Result<Fixture> {
    if !(m > 0.0) {
        return Err(Error::Invalid(format!("schwarzschild mass must be positive, got {m}")));
    }
    let eps = 0.05;
    let c = chart(
        &["t", "r", "theta", "phi"],
        &[-1, 1, 1, 1],
        &[(-50.0, 50.0), (2.2 * m, 100.0 * m), (eps, math::PI - eps), (-10.0, 10.0)],
    );
    let lapse = move |x: &[Jet]| (&x[1].recip() * (-2.0 * m) + 1.0).sqrt();
    let coframe = CoFrame::diagonal(
        c.clone(),
        vec![
            jf(4, lapse),
            jf(4, move |x| lapse(x).recip()),
            jf(4, |x| x[1].clone()),
            jf(4, |x| &x[1] * &x[2].sin()),
        ],
    )?;
    let f = move |x: &[Jet]| &x[1].recip() * (-2.0 * m) + 1.0;
    let metric = MetricField::diagonal(
        c.clone(),
        vec![
            jf(4, move |x| -f(x)),
            jf(4, move |x| f(x).recip()),
            jf(4, |x| &x[1] * &x[1]),
            jf(4, |x| {
                let s = &x[1] * &x[2].sin();
                &s * &s
            }),
        ],
    )?;
    Ok(Fixture {
        name: format!("schwarzschild({m})"),
        chart: c,
        coframe,
        metric,
        sample_box: vec![(-1.0, 1.0), (3.0 * m, 6.0 * m), (0.4, math::PI - 0.4), (-1.0, 1.0)],
        vacuum: true,
    })
}

/// Equivariant 2+1 metric with coframe `e^t = e^Ω dt, e^r = e^γ dr, e^θ = r dθ`.
///
/// `omega` and `gamma` are expressions in `t` and `r`.
pub fn equivariant(omega: &str, gamma: &str) -> Result<Fixture> {
    let c = chart(&["t", "r", "theta"], &[-1, 1, 1], &[(-5.0, 5.0), (0.2, 10.0), (-10.0, 10.0)]);
    let names = ["t", "r", "theta"];
    let om = Expr::parse(omega, &names, &[]).map_err(|e| named("omega", e))?;
    let ga = Expr::parse(gamma, &names, &[]).map_err(|e| named("gamma", e))?;
    let (om2, ga2) = (om.clone(), ga.clone());
    let coframe = CoFrame::diagonal(
        c.clone(),
        vec![
            jf(3, move |x| om.eval_jet(x, x[0].layout()).exp()),
            jf(3, move |x| ga.eval_jet(x, x[0].layout()).exp()),
            jf(3, |x| x[1].clone()),
        ],
    )?;
    let metric = MetricField::diagonal(
        c.clone(),
        vec![
            jf(3, move |x| -om2.eval_jet(x, x[0].layout()).scale(2.0).exp()),
            jf(3, move |x| ga2.eval_jet(x, x[0].layout()).scale(2.0).exp()),
            jf(3, |x| &x[1] * &x[1]),
        ],
    )?;
    Ok(Fixture {
        name: format!("equivariant({omega},{gamma})"),
        chart: c,
        coframe,
        metric,
        sample_box: vec![(-1.0, 1.0), (0.5, 3.0), (-1.0, 1.0)],
        vacuum: false,
    })
}

/// Round two-sphere of radius `a` in `(θ, φ)`.
pub fn round_sphere(a: f64) -> Result<Fixture> {
    if !(a > 0.0) {
        return Err(Error::Invalid(format!("sphere radius must be positive, got {a}")));
    }
    let c = chart(&["theta", "phi"], &[1, 1], &[(0.05, math::PI - 0.05), (-10.0, 10.0)]);
    let coframe = CoFrame::diagonal(c.clone(), vec![field::constant(2, a), jf(2, move |x| x[0].sin().scale(a))])?;
    let metric = MetricField::diagonal(
        c.clone(),
        vec![field::constant(2, a * a), jf(2, move |x| x[0].sin().powi(2).scale(a * a))],
    )?;
    Ok(Fixture {
        name: format!("sphere({a})"),
        chart: c,
        coframe,
        metric,
        sample_box: vec![(0.4, math::PI - 0.4), (-1.0, 1.0)],
        vacuum: false,
    })
}

/// Conformally flat `a(t)²(−dt² + dx² + dy² + dz²)`; `scale` is an expression in `t`.
pub fn flrw_conformal(scale: &str) -> Result<Fixture> {
    let c = chart(&["t", "x", "y", "z"], &[-1, 1, 1, 1], &[(0.2, 10.0), (-10.0, 10.0), (-10.0, 10.0), (-10.0, 10.0)]);
    let a = Expr::parse(scale, &["t", "x", "y", "z"], &[]).map_err(|e| named("scale", e))?;
    let a2 = a.clone();
    let af: FieldRef = jf(4, move |x| a.eval_jet(x, x[0].layout()));
    let coframe = CoFrame::diagonal(c.clone(), vec![af.clone(), af.clone(), af.clone(), af])?;
    let sq = move |x: &[Jet]| {
        let v = a2.eval_jet(x, x[0].layout());
        &v * &v
    };
    let sq = Arc::new(sq);
    let comps = (0..4)
        .map(|k| {
            let s = sq.clone();
            jf(4, move |x| if k == 0 { -s(x) } else { s(x) })
        })
        .collect();
    let metric = MetricField::diagonal(c.clone(), comps)?;
    Ok(Fixture {
        name: format!("flrw({scale})"),
        chart: c,
        coframe,
        metric,
        sample_box: vec![(0.5, 3.0), (-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0)],
        vacuum: false,
    })
}

/// One smooth perturbation mode of a metric component.
#[derive(Clone, Debug, PartialEq)]
pub struct Mode {
    pub amplitude: f64,
    pub wave: [f64; 4],
    pub phase: f64,
    pub bump: f64,
}

/// `g = η + Σ (A sin(k·x + φ) + B exp(−|x|²))` per upper-triangular component.
///
/// `modes` lists one mode per component `μ ≤ ν` (10 in four dimensions).
pub fn perturbed_flat(modes: &[Mode]) -> Result<Fixture> {
    if modes.len() != 10 {
        return Err(Error::DimensionMismatch { expected: 10, got: modes.len() });
    }
    let c = chart(&["t", "x", "y", "z"], &[-1, 1, 1, 1], &[(-3.0, 3.0); 4]);
    let mut comps = Vec::new();
    let mut k = 0;
    for mu in 0..4 {
        for nu in mu..4 {
            let m = modes[k].clone();
            k += 1;
            let base = if mu != nu { 0.0 } else if mu == 0 { -1.0 } else { 1.0 };
            comps.push(jf(4, move |x| {
                let lay = x[0].layout();
                let mut arg = Jet::constant(lay, m.phase);
                let mut r2 = Jet::zero(lay);
                for i in 0..4 {
                    arg += &x[i].scale(m.wave[i]);
                    r2 += &(&x[i] * &x[i]);
                }
                arg.sin().scale(m.amplitude) + (-r2).exp().scale(m.bump) + base
            }));
        }
    }
    let metric = MetricField::new(c.clone(), comps)?;
    Ok(Fixture {
        name: "perturbed-flat".to_string(),
        coframe: CoFrame::from_metric(metric.clone()),
        metric,
        chart: c,
        sample_box: vec![(-1.0, 1.0); 4],
        vacuum: false,
    })
}

/// Kasner in tilted, twisted coordinates `(T, y¹, y², y³)`:
///
/// `t = T + ε sin y²`, `ḡ = −dt² + t^{2p₁}(dy¹ + c dy³)² + t^{2p₂}(dy²)² + t^{2p₃}(dy³)²`.
///
/// Vacuum, inhomogeneous in `y²` when `ε ≠ 0`, and with a nonzero
/// Kaluza-Klein field strength along `∂_{y³}` when `c ≠ 0`.
pub fn tilted_kasner(p: [f64; 3], c: f64, eps: f64) -> Result<Fixture> {
    let base = kasner(p)?;
    let ch = chart(
        &["T", "y1", "y2", "y3"],
        &[-1, 1, 1, 1],
        &[(0.3 + math::abs(eps), 20.0), (-50.0, 50.0), (-50.0, 50.0), (-50.0, 50.0)],
    );
    let t = move |x: &[Jet]| &x[2].sin().scale(eps) + &x[0];
    let z = field::zero(4);
    let rows = vec![
        vec![field::constant(4, 1.0), z.clone(), jf(4, move |x| x[2].cos().scale(eps)), z.clone()],
        vec![z.clone(), jf(4, move |x| t(x).powf(p[0])), z.clone(), jf(4, move |x| t(x).powf(p[0]).scale(c))],
        vec![z.clone(), z.clone(), jf(4, move |x| t(x).powf(p[1])), z.clone()],
        vec![z.clone(), z.clone(), z.clone(), jf(4, move |x| t(x).powf(p[2]))],
    ];
    let coframe = CoFrame::from_components(ch.clone(), rows)?;
    let _ = base;
    Ok(Fixture {
        name: format!("tilted_kasner({},{},{},{c},{eps})", p[0], p[1], p[2]),
        metric: coframe.metric(),
        coframe,
        sample_box: vec![(1.0 + math::abs(eps), 3.0), (-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0)],
        chart: ch,
        vacuum: true,
    })
}

fn named(field: &str, e: Error) -> Error {
    Error::Invalid(format!("field `{field}`: {e}"))
}

/// Parses a fixture string such as `kasner(2/3,2/3,-1/3)`, `kasner:2/3,2/3,-1/3`,
/// `schwarzschild(1)`, `equivariant(0, 0.1*r)`, `minkowski4`, `sphere(2)`,
/// `flrw(t^2)` or `tilted_kasner(p1,p2,p3,c,eps)`.
pub fn parse_fixture(src: &str) -> Result<Fixture> {
    let s = src.trim();
    let (name, args) = split_fixture(s)?;
    let nums = |args: &[String], want: usize| -> Result<Vec<f64>> {
        if args.len() != want {
            return Err(Error::Invalid(format!(
                "fixture `{name}`: field `arguments` expects {want} values, got {}",
                args.len()
            )));
        }
        args.iter()
            .enumerate()
            .map(|(i, a)| {
                Expr::constant(a).map_err(|e| Error::Invalid(format!("fixture `{name}`: field `argument {}`: {e}", i + 1)))
            })
            .collect()
    };
    match name.as_str() {
        "minkowski" | "minkowski4" => {
            if !args.is_empty() {
                let d = nums(&args, 1)?[0];
                return minkowski(d as usize);
            }
            Ok(minkowski4())
        }
        "minkowski2" => minkowski(2),
        "minkowski3" => minkowski(3),
        "kasner" => {
            let v = nums(&args, 3)?;
            kasner([v[0], v[1], v[2]])
        }
        "schwarzschild" => schwarzschild(nums(&args, 1)?[0]),
        "equivariant" => {
            if args.len() != 2 {
                return Err(Error::Invalid(format!(
                    "fixture `equivariant`: field `arguments` expects 2 expressions, got {}",
                    args.len()
                )));
            }
            equivariant(&args[0], &args[1])
        }
        "sphere" => round_sphere(nums(&args, 1)?[0]),
        "flrw" => {
            if args.len() != 1 {
                return Err(Error::Invalid("fixture `flrw`: field `arguments` expects 1 expression".into()));
            }
            flrw_conformal(&args[0])
        }
        "tilted_kasner" => {
            let v = nums(&args, 5)?;
            tilted_kasner([v[0], v[1], v[2]], v[3], v[4])
        }
        other => Err(Error::Invalid(format!("unknown fixture name `{other}`"))),
    }
}

fn split_fixture(s: &str) -> Result<(String, Vec<String>)> {
    if s.is_empty() {
        return Err(Error::Invalid("fixture: field `name` is empty".into()));
    }
    if let Some(open) = s.find('(') {
        if !s.ends_with(')') {
            return Err(Error::Invalid(format!("fixture `{s}`: field `arguments` lacks a closing parenthesis")));
        }
        let name = s[..open].trim().to_string();
        let inner = &s[open + 1..s.len() - 1];
        return Ok((name, split_args(inner)?));
    }
    if let Some(colon) = s.find(':') {
        return Ok((s[..colon].trim().to_string(), split_args(&s[colon + 1..])?));
    }
    Ok((s.to_string(), Vec::new()))
}

/// Splits on top-level commas.
fn split_args(s: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for ch in s.chars() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            _ => {}
        }
        if depth < 0 {
            return Err(Error::Invalid("fixture: field `arguments` has unbalanced parentheses".into()));
        }
        if ch == ',' && depth == 0 {
            out.push(cur.trim().to_string());
            cur.clear();
        } else {
            cur.push(ch);
        }
    }
    if depth != 0 {
        return Err(Error::Invalid("fixture: field `arguments` has unbalanced parentheses".into()));
    }
    if !cur.trim().is_empty() || !out.is_empty() {
        out.push(cur.trim().to_string());
    }
    if out.iter().any(|a| a.is_empty()) {
        return Err(Error::Invalid("fixture: field `arguments` contains an empty entry".into()));
    }
    Ok(out)
}
