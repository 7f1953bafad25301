//! Coordinate charts and scalar fields.
//!
//! A scalar field produces a [`Jet`] at any point. Analytic fields (parsed
//! expressions, jet closures) give exact partials to any order; closure-only
//! fields use fourth-order finite differences and support orders up to two.

use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{invalid, Error, Result};
use crate::expr::Expr;
use crate::jet::{Jet, JetCtx, JetLayout};

/// Default finite-difference step for closure-only fields.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// A coordinate chart with its sampling box.
#[derive(Clone, Debug, PartialEq)]
pub struct Chart {
    names: Vec<String>,
    signature: Vec<i8>,
    domain: Vec<(f64, f64)>,
}

impl Chart {
    pub fn new(names: &[&str], signature: &[i8], domain: &[(f64, f64)]) -> Result<Chart> {
        let n = names.len();
        if !(2..=4).contains(&n) {
            return Err(invalid("chart dimension must be 2, 3 or 4"));
        }
        if signature.len() != n || domain.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: signature.len().min(domain.len()) });
        }
        if signature.iter().any(|s| *s != 1 && *s != -1) {
            return Err(invalid("signature entries must be ±1"));
        }
        let negatives = signature.iter().filter(|s| **s == -1).count();
        if negatives > 1 || (negatives == 1 && signature[0] != -1) {
            return Err(invalid("Lorentzian charts carry a single −1 in the first slot"));
        }
        if domain.iter().any(|(a, b)| !(a < b)) {
            return Err(invalid("domain intervals must satisfy lo < hi"));
        }
        Ok(Chart {
            names: names.iter().map(|s| s.to_string()).collect(),
            signature: signature.to_vec(),
            domain: domain.to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> Vec<&str> {
        self.names.iter().map(String::as_str).collect()
    }

    pub fn signature(&self) -> &[i8] {
        &self.signature
    }

    /// Frame metric entry `η_aa`.
    pub fn eta(&self, a: usize) -> f64 {
        self.signature[a] as f64
    }

    pub fn is_lorentzian(&self) -> bool {
        self.signature[0] == -1
    }

    pub fn domain(&self) -> &[(f64, f64)] {
        &self.domain
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(&self.domain).all(|(v, (a, b))| *v >= *a && *v <= *b)
    }

    /// Errors if `x` is outside the closed domain box.
    pub fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        if !self.contains(x) {
            return Err(Error::OutsideDomain { point: x.to_vec() });
        }
        Ok(())
    }

    /// Same chart with a different sampling box.
    pub fn with_domain(&self, domain: &[(f64, f64)]) -> Result<Chart> {
        let names: Vec<&str> = self.names();
        Chart::new(&names, &self.signature, domain)
    }
}

/// A smooth real function on a chart.
pub trait ScalarField: Send + Sync {
    fn dim(&self) -> usize;

    /// Taylor expansion at `x` in the layout `lay` (which fixes the order).
    fn jet(&self, x: &[f64], lay: &JetCtx) -> Result<Jet>;

    fn eval(&self, x: &[f64]) -> Result<f64> {
        let lay = JetLayout::new(self.dim(), 0);
        Ok(self.jet(x, &lay)?.value())
    }

    /// Whether partial derivatives of every order are exact.
    fn analytic(&self) -> bool {
        true
    }

    /// Gradient at `x`.
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let lay = JetLayout::new(self.dim(), 1);
        let j = self.jet(x, &lay)?;
        Ok((0..self.dim()).map(|i| j.d1(i)).collect())
    }
}

pub type FieldRef = Arc<dyn ScalarField>;

impl fmt::Debug for dyn ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarField(dim={}, analytic={})", self.dim(), self.analytic())
    }
}

/// A constant function.
#[derive(Clone, Debug)]
pub struct ConstField {
    pub dim: usize,
    pub value: f64,
}

impl ScalarField for ConstField {
    fn dim(&self) -> usize {
        self.dim
    }
    fn jet(&self, _x: &[f64], lay: &JetCtx) -> Result<Jet> {
        Ok(Jet::constant(lay, self.value))
    }
}

pub fn constant(dim: usize, value: f64) -> FieldRef {
    Arc::new(ConstField { dim, value })
}

pub fn zero(dim: usize) -> FieldRef {
    constant(dim, 0.0)
}

/// The coordinate function `x^i`.
pub fn coordinate(dim: usize, i: usize) -> FieldRef {
    Arc::new(JetFn::new(dim, move |x: &[Jet]| x[i].clone()))
}

/// A field defined by a parsed expression.
#[derive(Clone, Debug)]
pub struct ExprField {
    expr: Expr,
}

impl ExprField {
    pub fn new(expr: Expr) -> ExprField {
        ExprField { expr }
    }

    pub fn parse(src: &str, chart: &Chart, params: &[(&str, f64)]) -> Result<ExprField> {
        Ok(ExprField { expr: Expr::parse(src, &chart.names(), params)? })
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }
}

impl ScalarField for ExprField {
    fn dim(&self) -> usize {
        self.expr.nvars()
    }
    fn jet(&self, x: &[f64], lay: &JetCtx) -> Result<Jet> {
        let j = self.expr.eval_jet(&Jet::seed(lay, x), lay);
        if !j.value().is_finite() {
            return Err(Error::NonFinite("expression field"));
        }
        Ok(j)
    }
    fn eval(&self, x: &[f64]) -> Result<f64> {
        Ok(self.expr.eval(x))
    }
}

/// Parses an expression field on a chart.
pub fn expr_field(src: &str, chart: &Chart, params: &[(&str, f64)]) -> Result<FieldRef> {
    Ok(Arc::new(ExprField::parse(src, chart, params)?))
}

type JetClosure = dyn Fn(&[Jet]) -> Jet + Send + Sync;

/// A field given by a closure over jet arithmetic (exact partials).
#[derive(Clone)]
pub struct JetFn {
    dim: usize,
    f: Arc<JetClosure>,
}

impl JetFn {
    pub fn new(dim: usize, f: impl Fn(&[Jet]) -> Jet + Send + Sync + 'static) -> JetFn {
        JetFn { dim, f: Arc::new(f) }
    }
}

impl ScalarField for JetFn {
    fn dim(&self) -> usize {
        self.dim
    }
    fn jet(&self, x: &[f64], lay: &JetCtx) -> Result<Jet> {
        Ok((self.f)(&Jet::seed(lay, x)))
    }
}

pub fn jet_fn(dim: usize, f: impl Fn(&[Jet]) -> Jet + Send + Sync + 'static) -> FieldRef {
    Arc::new(JetFn::new(dim, f))
}

type PointClosure = dyn Fn(&[f64], &JetCtx) -> Result<Jet> + Send + Sync;

/// A field computed by an arbitrary point-wise jet routine.
#[derive(Clone)]
pub struct PointFn {
    dim: usize,
    analytic: bool,
    f: Arc<PointClosure>,
}

impl PointFn {
    pub fn new(
        dim: usize,
        analytic: bool,
        f: impl Fn(&[f64], &JetCtx) -> Result<Jet> + Send + Sync + 'static,
    ) -> PointFn {
        PointFn { dim, analytic, f: Arc::new(f) }
    }
}

impl ScalarField for PointFn {
    fn dim(&self) -> usize {
        self.dim
    }
    fn jet(&self, x: &[f64], lay: &JetCtx) -> Result<Jet> {
        (self.f)(x, lay)
    }
    fn analytic(&self) -> bool {
        self.analytic
    }
}

type ValueClosure = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A closure-only field; partials by fourth-order finite differences.
#[derive(Clone)]
pub struct FdField {
    dim: usize,
    step: f64,
    domain: Option<Vec<(f64, f64)>>,
    f: Arc<ValueClosure>,
}

impl FdField {
    pub fn new(dim: usize, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> FdField {
        FdField { dim, step: DEFAULT_FD_STEP, domain: None, f: Arc::new(f) }
    }

    pub fn with_step(mut self, step: f64) -> FdField {
        self.step = step;
        self
    }

    /// Restricts stencils to a box; one-sided stencils are used near its faces.
    pub fn with_domain(mut self, domain: &[(f64, f64)]) -> FdField {
        self.domain = Some(domain.to_vec());
        self
    }

    pub fn step(&self) -> f64 {
        self.step
    }
}

impl ScalarField for FdField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn analytic(&self) -> bool {
        false
    }

    fn eval(&self, x: &[f64]) -> Result<f64> {
        Ok((self.f)(x))
    }

    fn jet(&self, x: &[f64], lay: &JetCtx) -> Result<Jet> {
        if lay.order() > 2 {
            return Err(Error::NeedsAnalyticPartials);
        }
        let f = |y: &[f64]| (self.f)(y);
        let dom = self.domain.as_deref();
        let mut c = vec![0.0; lay.len()];
        c[0] = f(x);
        if lay.order() >= 1 {
            for i in 0..self.dim {
                c[1 + i] = fd_first(&f, x, i, self.step, dom);
            }
        }
        if lay.order() >= 2 {
            let h2 = second_step(self.step);
            for i in 0..self.dim {
                for j in i..self.dim {
                    let mut e = [0u8; crate::jet::MAX_VARS];
                    e[i] += 1;
                    e[j] += 1;
                    let idx = lay.index_of(&e[..self.dim]).expect("second-order monomial");
                    c[idx] = if i == j {
                        0.5 * fd_second(&f, x, i, h2, dom)
                    } else {
                        fd_mixed(&f, x, i, j, h2, dom)
                    };
                }
            }
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("finite-difference field"));
        }
        Ok(Jet::from_coeffs(lay, c))
    }
}

pub fn fd_field(dim: usize, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> FieldRef {
    Arc::new(FdField::new(dim, f))
}

/// Step used for second derivatives of closure-only fields.
pub fn second_step(step: f64) -> f64 {
    crate::math::sqrt(step).min(1e-2).max(step)
}

/// Which stencil fits inside the domain along one axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Central,
    Forward,
    Backward,
}

/// Picks a stencil of half-width `reach·h` that stays inside the box.
pub fn stencil_side(x: &[f64], i: usize, reach: f64, domain: Option<&[(f64, f64)]>) -> Side {
    match domain {
        None => Side::Central,
        Some(d) => {
            let (lo, hi) = d[i];
            if x[i] - reach >= lo && x[i] + reach <= hi {
                Side::Central
            } else if x[i] - reach < lo {
                Side::Forward
            } else {
                Side::Backward
            }
        }
    }
}

fn shifted(x: &[f64], i: usize, s: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    y[i] += s;
    y
}

/// Fourth-order first derivative along axis `i` (one-sided near faces).
pub fn fd_first(f: &dyn Fn(&[f64]) -> f64, x: &[f64], i: usize, h: f64, domain: Option<&[(f64, f64)]>) -> f64 {
    fd_first_with(|s| f(&shifted(x, i, s)), stencil_side(x, i, 2.0 * h, domain), h)
}

/// Fourth-order first derivative of a one-parameter function at offset 0.
pub fn fd_first_with(f: impl Fn(f64) -> f64, side: Side, h: f64) -> f64 {
    match side {
        Side::Central => (f(-2.0 * h) - 8.0 * f(-h) + 8.0 * f(h) - f(2.0 * h)) / (12.0 * h),
        Side::Forward => {
            (-25.0 * f(0.0) + 48.0 * f(h) - 36.0 * f(2.0 * h) + 16.0 * f(3.0 * h) - 3.0 * f(4.0 * h)) / (12.0 * h)
        }
        Side::Backward => {
            -(-25.0 * f(0.0) + 48.0 * f(-h) - 36.0 * f(-2.0 * h) + 16.0 * f(-3.0 * h) - 3.0 * f(-4.0 * h))
                / (12.0 * h)
        }
    }
}

/// Fourth-order second derivative along axis `i`.
pub fn fd_second(f: &dyn Fn(&[f64]) -> f64, x: &[f64], i: usize, h: f64, domain: Option<&[(f64, f64)]>) -> f64 {
    let g = |s: f64| f(&shifted(x, i, s));
    match stencil_side(x, i, 2.0 * h, domain) {
        Side::Central => (-g(2.0 * h) + 16.0 * g(h) - 30.0 * g(0.0) + 16.0 * g(-h) - g(-2.0 * h)) / (12.0 * h * h),
        side => {
            let s = if side == Side::Forward { h } else { -h };
            (45.0 * g(0.0) - 154.0 * g(s) + 214.0 * g(2.0 * s) - 156.0 * g(3.0 * s) + 61.0 * g(4.0 * s)
                - 10.0 * g(5.0 * s))
                / (12.0 * h * h)
        }
    }
}

/// Fourth-order mixed derivative `∂_i ∂_j`, `i ≠ j`.
pub fn fd_mixed(
    f: &dyn Fn(&[f64]) -> f64,
    x: &[f64],
    i: usize,
    j: usize,
    h: f64,
    domain: Option<&[(f64, f64)]>,
) -> f64 {
    let side_j = stencil_side(x, j, 4.0 * h, domain);
    let inner = |s: f64| {
        let y = shifted(x, i, s);
        fd_first_with(|t| f(&shifted(&y, j, t)), side_j, h)
    };
    fd_first_with(inner, stencil_side(x, i, 4.0 * h, domain), h)
}

/// Fourth-order gradient of a vector-valued map (each output component).
///
/// Returns `out[k][i] = ∂_i F_k(x)`.
pub fn fd_jacobian(
    f: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    x: &[f64],
    h: f64,
    domain: Option<&[(f64, f64)]>,
) -> Result<Vec<Vec<f64>>> {
    let n = x.len();
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let side = stencil_side(x, i, 2.0 * h, domain);
        let offsets: &[(f64, f64)] = match side {
            Side::Central => &[(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)],
            Side::Forward => &[(0.0, -25.0), (1.0, 48.0), (2.0, -36.0), (3.0, 16.0), (4.0, -3.0)],
            Side::Backward => &[(0.0, 25.0), (-1.0, -48.0), (-2.0, 36.0), (-3.0, -16.0), (-4.0, 3.0)],
        };
        let mut acc: Option<Vec<f64>> = None;
        for &(o, w) in offsets {
            let v = f(&shifted(x, i, o * h))?;
            match acc.as_mut() {
                None => acc = Some(v.iter().map(|a| a * w).collect()),
                Some(a) => a.iter_mut().zip(&v).for_each(|(s, b)| *s += w * b),
            }
        }
        let mut col = acc.unwrap_or_default();
        col.iter_mut().for_each(|v| *v /= 12.0 * h);
        cols.push(col);
    }
    let m = cols.first().map(|c| c.len()).unwrap_or(0);
    Ok((0..m).map(|k| (0..n).map(|i| cols[i][k]).collect()).collect())
}

/// Partial derivative of another field.
#[derive(Clone)]
pub struct Partial {
    inner: FieldRef,
    var: usize,
}

impl ScalarField for Partial {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn jet(&self, x: &[f64], lay: &JetCtx) -> Result<Jet> {
        let up = JetLayout::new(self.dim(), lay.order() + 1);
        let j = self.inner.jet(x, &up)?;
        let d = j.derivative(self.var);
        Ok(Jet::from_coeffs(lay, d.coeffs().to_vec()))
    }
    fn analytic(&self) -> bool {
        self.inner.analytic()
    }
}

pub fn partial(f: &FieldRef, var: usize) -> FieldRef {
    Arc::new(Partial { inner: f.clone(), var })
}

/// A sum of signed products of fields: `Σ c_k Π_j f_kj`.
#[derive(Clone)]
pub struct LinComb {
    dim: usize,
    terms: Vec<(f64, Vec<FieldRef>)>,
}

impl LinComb {
    pub fn new(dim: usize, terms: Vec<(f64, Vec<FieldRef>)>) -> LinComb {
        LinComb { dim, terms }
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

impl ScalarField for LinComb {
    fn dim(&self) -> usize {
        self.dim
    }
    fn jet(&self, x: &[f64], lay: &JetCtx) -> Result<Jet> {
        let mut acc = Jet::zero(lay);
        for (c, factors) in &self.terms {
            let mut p = Jet::constant(lay, *c);
            for f in factors {
                p = &p * &f.jet(x, lay)?;
            }
            acc += &p;
        }
        Ok(acc)
    }
    fn analytic(&self) -> bool {
        self.terms.iter().all(|(_, fs)| fs.iter().all(|f| f.analytic()))
    }
}

pub fn lincomb(dim: usize, terms: Vec<(f64, Vec<FieldRef>)>) -> FieldRef {
    Arc::new(LinComb::new(dim, terms))
}

/// Product of two fields.
pub fn product(a: &FieldRef, b: &FieldRef) -> FieldRef {
    lincomb(a.dim(), vec![(1.0, vec![a.clone(), b.clone()])])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_validation() {
        assert!(Chart::new(&["t", "x"], &[-1, 1], &[(0.0, 1.0), (0.0, 1.0)]).is_ok());
        assert!(Chart::new(&["t", "x"], &[1, -1], &[(0.0, 1.0), (0.0, 1.0)]).is_err());
        assert!(Chart::new(&["t", "x"], &[-1, -1], &[(0.0, 1.0), (0.0, 1.0)]).is_err());
        assert!(Chart::new(&["t"], &[-1], &[(0.0, 1.0)]).is_err());
        let c = Chart::new(&["x", "y"], &[1, 1], &[(0.0, 1.0), (0.0, 2.0)]).unwrap();
        assert!(c.check(&[0.5, 2.0]).is_ok());
        assert!(matches!(c.check(&[0.5, 2.1]), Err(Error::OutsideDomain { .. })));
    }

    #[test]
    fn fd_field_matches_analytic_to_fourth_order() {
        let f = FdField::new(2, |x| (x[0] * x[1]).sin() + x[0].powi(3));
        let lay = JetLayout::new(2, 2);
        let (a, b) = (0.4, 0.9);
        let j = f.jet(&[a, b], &lay).unwrap();
        assert!((j.d1(0) - (b * (a * b).cos() + 3.0 * a * a)).abs() < 1e-9);
        assert!((j.d2(0, 0) - (-b * b * (a * b).sin() + 6.0 * a)).abs() < 1e-7);
        assert!((j.d2(0, 1) - ((a * b).cos() - a * b * (a * b).sin())).abs() < 1e-7);
        let lay3 = JetLayout::new(2, 3);
        assert_eq!(f.jet(&[a, b], &lay3).unwrap_err(), Error::NeedsAnalyticPartials);
    }

    #[test]
    fn one_sided_stencils_near_faces() {
        let dom = [(0.0, 1.0)];
        let f = |x: &[f64]| x[0].exp();
        let d = fd_first(&f, &[0.0], 0, 1e-3, Some(&dom));
        assert!((d - 1.0).abs() < 1e-9);
        let d2 = fd_second(&f, &[1.0], 0, 1e-2, Some(&dom));
        assert!((d2 - 1f64.exp()).abs() < 1e-6);
    }

    #[test]
    fn partial_of_expression() {
        let c = Chart::new(&["t", "x"], &[-1, 1], &[(0.0, 3.0), (0.0, 3.0)]).unwrap();
        let f = expr_field("t^2 * x", &c, &[]).unwrap();
        let ft = partial(&f, 0);
        assert!((ft.eval(&[2.0, 3.0]).unwrap() - 12.0).abs() < 1e-14);
        let ftx = partial(&ft, 1);
        assert!((ftx.eval(&[2.0, 3.0]).unwrap() - 4.0).abs() < 1e-14);
    }
}
