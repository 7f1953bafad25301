//! Exterior algebra over a chart: differential forms, wedge products,
//! exterior derivatives, metrics, orthonormal coframes and the Hodge dual.
//!
//! Forms are stored in the coordinate basis on strictly increasing index
//! sets; frame components are obtained on demand through [`frame_dual`].
//! The orientation is `ε_{01…(n−1)} = +√|det g|` in the chart's coordinate
//! order.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::{self, Chart, FieldRef, PointFn};
use crate::jet::{Jet, JetCtx, JetLayout};
use crate::linalg;

/// Strictly increasing `k`-subsets of `0..n` in lexicographic order.
pub fn index_sets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Sorts an index list; returns the sorted list and the permutation sign,
/// or `None` if an index repeats.
pub fn sort_with_sign(idx: &[usize]) -> Option<(Vec<usize>, f64)> {
    let mut v = idx.to_vec();
    let mut sign = 1.0;
    for i in 0..v.len() {
        for j in 0..v.len() - 1 - i {
            if v[j] > v[j + 1] {
                v.swap(j, j + 1);
                sign = -sign;
            } else if v[j] == v[j + 1] {
                return None;
            }
        }
    }
    if v.windows(2).any(|w| w[0] == w[1]) {
        return None;
    }
    Some((v, sign))
}

/// A differential `k`-form with scalar-field components.
#[derive(Clone, Debug)]
pub struct FormField {
    chart: Arc<Chart>,
    degree: usize,
    comps: Vec<FieldRef>,
}

impl FormField {
    /// Builds a form from components on the increasing index sets (lexicographic).
    pub fn new(chart: Arc<Chart>, degree: usize, comps: Vec<FieldRef>) -> Result<FormField> {
        let n = chart.dim();
        if degree > n {
            return Err(Error::DegreeOverflow(degree, 0, n));
        }
        let want = index_sets(n, degree).len();
        if comps.len() != want {
            return Err(Error::DimensionMismatch { expected: want, got: comps.len() });
        }
        if comps.iter().any(|c| c.dim() != n) {
            return Err(Error::ChartMismatch);
        }
        Ok(FormField { chart, degree, comps })
    }

    pub fn zero(chart: Arc<Chart>, degree: usize) -> FormField {
        let n = chart.dim();
        let comps = index_sets(n, degree).iter().map(|_| field::zero(n)).collect();
        FormField { chart, degree, comps }
    }

    /// A 0-form.
    pub fn scalar(chart: Arc<Chart>, f: FieldRef) -> FormField {
        FormField { chart, degree: 0, comps: vec![f] }
    }

    /// The exact one-form `dx^μ`.
    pub fn coordinate_differential(chart: Arc<Chart>, mu: usize) -> FormField {
        let n = chart.dim();
        let comps = (0..n).map(|i| field::constant(n, if i == mu { 1.0 } else { 0.0 })).collect();
        FormField { chart, degree: 1, comps }
    }

    /// A one-form from its components `a_μ`.
    pub fn one_form(chart: Arc<Chart>, comps: Vec<FieldRef>) -> Result<FormField> {
        FormField::new(chart, 1, comps)
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn components(&self) -> &[FieldRef] {
        &self.comps
    }

    /// Component on an increasing index set.
    pub fn component(&self, idx: &[usize]) -> Option<&FieldRef> {
        let sets = index_sets(self.chart.dim(), self.degree);
        sets.iter().position(|s| s.as_slice() == idx).map(|i| &self.comps[i])
    }

    /// Values of the stored components at `x` (domain-checked).
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.chart.check(x)?;
        self.comps.iter().map(|c| c.eval(x)).collect()
    }

    /// Jets of the stored components at `x` (domain-checked).
    pub fn jets(&self, x: &[f64], lay: &JetCtx) -> Result<Vec<Jet>> {
        self.chart.check(x)?;
        self.comps.iter().map(|c| c.jet(x, lay)).collect()
    }

    /// Fully antisymmetric component `a_{μ₁…μ_k}` for an arbitrary index list.
    pub fn full_component(&self, x: &[f64], idx: &[usize]) -> Result<f64> {
        if idx.len() != self.degree {
            return Err(Error::DimensionMismatch { expected: self.degree, got: idx.len() });
        }
        self.chart.check(x)?;
        match sort_with_sign(idx) {
            None => Ok(0.0),
            Some((sorted, sign)) => Ok(sign * self.component(&sorted).expect("index set").eval(x)?),
        }
    }

    /// Whether all components have exact partials.
    pub fn analytic(&self) -> bool {
        self.comps.iter().all(|c| c.analytic())
    }

    pub fn scale(&self, s: f64) -> FormField {
        let n = self.chart.dim();
        let comps = self.comps.iter().map(|c| field::lincomb(n, vec![(s, vec![c.clone()])])).collect();
        FormField { chart: self.chart.clone(), degree: self.degree, comps }
    }

    pub fn add(&self, other: &FormField) -> Result<FormField> {
        if self.chart != other.chart && *self.chart != *other.chart {
            return Err(Error::ChartMismatch);
        }
        if self.degree != other.degree {
            return Err(Error::DimensionMismatch { expected: self.degree, got: other.degree });
        }
        let n = self.chart.dim();
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| field::lincomb(n, vec![(1.0, vec![a.clone()]), (1.0, vec![b.clone()])]))
            .collect();
        Ok(FormField { chart: self.chart.clone(), degree: self.degree, comps })
    }
}

/// Exterior product `a ∧ b`.
pub fn wedge(a: &FormField, b: &FormField) -> Result<FormField> {
    if *a.chart != *b.chart {
        return Err(Error::ChartMismatch);
    }
    let n = a.chart.dim();
    let (k, l) = (a.degree, b.degree);
    if k + l > n {
        return Err(Error::DegreeOverflow(k, l, n));
    }
    let sa = index_sets(n, k);
    let sb = index_sets(n, l);
    let out_sets = index_sets(n, k + l);
    let mut terms: Vec<Vec<(f64, Vec<FieldRef>)>> = vec![Vec::new(); out_sets.len()];
    for (i, ia) in sa.iter().enumerate() {
        for (j, jb) in sb.iter().enumerate() {
            let mut joined = ia.clone();
            joined.extend_from_slice(jb);
            if let Some((sorted, sign)) = sort_with_sign(&joined) {
                let pos = out_sets.iter().position(|s| *s == sorted).expect("index set");
                terms[pos].push((sign, vec![a.comps[i].clone(), b.comps[j].clone()]));
            }
        }
    }
    let comps = terms.into_iter().map(|t| field::lincomb(n, t)).collect();
    Ok(FormField { chart: a.chart.clone(), degree: k + l, comps })
}

/// Exterior derivative `da`.
pub fn exterior_derivative(a: &FormField) -> Result<FormField> {
    let n = a.chart.dim();
    let k = a.degree;
    if k >= n {
        return Err(Error::DegreeOverflow(k, 1, n));
    }
    let src = index_sets(n, k);
    let out_sets = index_sets(n, k + 1);
    let comps = out_sets
        .iter()
        .map(|set| {
            let mut terms = Vec::new();
            for s in 0..set.len() {
                let rest: Vec<usize> = set.iter().enumerate().filter(|(i, _)| *i != s).map(|(_, v)| *v).collect();
                let pos = src.iter().position(|x| *x == rest).expect("index set");
                let sign = if s % 2 == 0 { 1.0 } else { -1.0 };
                terms.push((sign, vec![field::partial(&a.comps[pos], set[s])]));
            }
            field::lincomb(n, terms)
        })
        .collect();
    Ok(FormField { chart: a.chart.clone(), degree: k + 1, comps })
}

/// A symmetric rank-2 tensor field (metric) on a chart.
#[derive(Clone, Debug)]
pub struct MetricField {
    chart: Arc<Chart>,
    comps: Vec<FieldRef>,
}

impl MetricField {
    /// Components `g_μν` for `μ ≤ ν` in row order (`g00, g01, …, g11, …`).
    pub fn new(chart: Arc<Chart>, upper: Vec<FieldRef>) -> Result<MetricField> {
        let n = chart.dim();
        if upper.len() != n * (n + 1) / 2 {
            return Err(Error::DimensionMismatch { expected: n * (n + 1) / 2, got: upper.len() });
        }
        Ok(MetricField { chart, comps: upper })
    }

    /// Diagonal metric.
    pub fn diagonal(chart: Arc<Chart>, diag: Vec<FieldRef>) -> Result<MetricField> {
        let n = chart.dim();
        if diag.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: diag.len() });
        }
        let mut upper = Vec::new();
        for mu in 0..n {
            for nu in mu..n {
                upper.push(if mu == nu { diag[mu].clone() } else { field::zero(n) });
            }
        }
        Ok(MetricField { chart, comps: upper })
    }

    /// The flat metric `diag(signature)`.
    pub fn flat(chart: Arc<Chart>) -> MetricField {
        let n = chart.dim();
        let diag = (0..n).map(|a| field::constant(n, chart.eta(a))).collect();
        MetricField::diagonal(chart, diag).expect("flat metric")
    }

    fn upper_index(n: usize, mu: usize, nu: usize) -> usize {
        let (a, b) = if mu <= nu { (mu, nu) } else { (nu, mu) };
        a * n - a * (a + 1) / 2 + b
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn component(&self, mu: usize, nu: usize) -> &FieldRef {
        &self.comps[Self::upper_index(self.chart.dim(), mu, nu)]
    }

    pub fn analytic(&self) -> bool {
        self.comps.iter().all(|c| c.analytic())
    }

    /// Full `n×n` jet matrix at `x` (domain-checked).
    pub fn jets(&self, x: &[f64], lay: &JetCtx) -> Result<Vec<Jet>> {
        self.chart.check(x)?;
        let n = self.chart.dim();
        let up: Vec<Jet> = self.comps.iter().map(|c| c.jet(x, lay)).collect::<Result<_>>()?;
        let mut g = Vec::with_capacity(n * n);
        for mu in 0..n {
            for nu in 0..n {
                g.push(up[Self::upper_index(n, mu, nu)].clone());
            }
        }
        Ok(g)
    }

    /// Values `g_μν(x)`.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let lay = JetLayout::new(self.chart.dim(), 0);
        Ok(linalg::values(&self.jets(x, &lay)?))
    }
}

type FrameClosure = dyn Fn(&[f64], &JetCtx) -> Result<Vec<Jet>> + Send + Sync;

#[derive(Clone)]
enum FrameSource {
    Forms(Vec<FormField>),
    Metric(MetricField),
    Custom { f: Arc<FrameClosure>, analytic: bool },
}

/// An orthonormal coframe `e^a = e^a_μ dx^μ` with frame metric `η = diag(signature)`.
#[derive(Clone)]
pub struct CoFrame {
    chart: Arc<Chart>,
    src: FrameSource,
}

impl core::fmt::Debug for CoFrame {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let kind = match &self.src {
            FrameSource::Forms(_) => "forms",
            FrameSource::Metric(_) => "metric-cholesky",
            FrameSource::Custom { .. } => "custom",
        };
        write!(f, "CoFrame({kind}, chart={:?})", self.chart.names())
    }
}

impl CoFrame {
    /// Coframe from explicit one-forms.
    pub fn from_forms(forms: Vec<FormField>) -> Result<CoFrame> {
        let chart = forms.first().ok_or(Error::DimensionMismatch { expected: 1, got: 0 })?.chart.clone();
        if forms.len() != chart.dim() {
            return Err(Error::DimensionMismatch { expected: chart.dim(), got: forms.len() });
        }
        if forms.iter().any(|f| f.degree != 1 || *f.chart != *chart) {
            return Err(Error::ChartMismatch);
        }
        Ok(CoFrame { chart, src: FrameSource::Forms(forms) })
    }

    /// Coframe from component fields `e^a_μ` (row `a`, column `μ`).
    pub fn from_components(chart: Arc<Chart>, comps: Vec<Vec<FieldRef>>) -> Result<CoFrame> {
        let forms = comps
            .into_iter()
            .map(|row| FormField::one_form(chart.clone(), row))
            .collect::<Result<Vec<_>>>()?;
        CoFrame::from_forms(forms)
    }

    /// Diagonal coframe `e^a = f_a dx^a`.
    pub fn diagonal(chart: Arc<Chart>, diag: Vec<FieldRef>) -> Result<CoFrame> {
        let n = chart.dim();
        let rows = diag
            .into_iter()
            .enumerate()
            .map(|(a, f)| (0..n).map(|mu| if mu == a { f.clone() } else { field::zero(n) }).collect())
            .collect();
        CoFrame::from_components(chart, rows)
    }

    /// Coframe of a metric by signed Cholesky factorization (leg 0 timelike).
    pub fn from_metric(metric: MetricField) -> CoFrame {
        CoFrame { chart: metric.chart.clone(), src: FrameSource::Metric(metric) }
    }

    /// Coframe from a point-wise jet routine returning `e^a_μ` row-major.
    pub fn from_fn(
        chart: Arc<Chart>,
        analytic: bool,
        f: impl Fn(&[f64], &JetCtx) -> Result<Vec<Jet>> + Send + Sync + 'static,
    ) -> CoFrame {
        CoFrame { chart, src: FrameSource::Custom { f: Arc::new(f), analytic } }
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn eta(&self) -> Vec<f64> {
        (0..self.dim()).map(|a| self.chart.eta(a)).collect()
    }

    /// Whether every component has exact partials of all orders.
    pub fn analytic(&self) -> bool {
        match &self.src {
            FrameSource::Forms(fs) => fs.iter().all(FormField::analytic),
            FrameSource::Metric(m) => m.analytic(),
            FrameSource::Custom { analytic, .. } => *analytic,
        }
    }

    /// Jet matrix `e^a_μ` (row-major) at `x`, domain-checked.
    pub fn jets(&self, x: &[f64], lay: &JetCtx) -> Result<Vec<Jet>> {
        self.chart.check(x)?;
        let n = self.dim();
        match &self.src {
            FrameSource::Forms(fs) => {
                let mut e = Vec::with_capacity(n * n);
                for f in fs {
                    for c in &f.comps {
                        e.push(c.jet(x, lay)?);
                    }
                }
                Ok(e)
            }
            FrameSource::Metric(m) => {
                let g = m.jets(x, lay)?;
                linalg::jframe_from_metric(&g, n, &self.eta())
            }
            FrameSource::Custom { f, .. } => {
                let e = f(x, lay)?;
                if e.len() != n * n {
                    return Err(Error::DimensionMismatch { expected: n * n, got: e.len() });
                }
                Ok(e)
            }
        }
    }

    /// Values `e^a_μ(x)`.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let lay = JetLayout::new(self.dim(), 0);
        Ok(linalg::values(&self.jets(x, &lay)?))
    }

    /// Leg `e^a` as a one-form.
    pub fn form(&self, a: usize) -> FormField {
        if let FrameSource::Forms(fs) = &self.src {
            return fs[a].clone();
        }
        let n = self.dim();
        let analytic = self.analytic();
        let comps = (0..n)
            .map(|mu| {
                let me = self.clone();
                Arc::new(PointFn::new(n, analytic, move |x, lay| {
                    let e = me.jets(x, lay)?;
                    Ok(e[a * n + mu].clone())
                })) as FieldRef
            })
            .collect();
        FormField { chart: self.chart.clone(), degree: 1, comps }
    }

    /// All legs as one-forms.
    pub fn forms(&self) -> Vec<FormField> {
        (0..self.dim()).map(|a| self.form(a)).collect()
    }

    /// Reconstructed metric `ḡ_μν = η_ab e^a_μ e^b_ν`.
    pub fn metric(&self) -> MetricField {
        let n = self.dim();
        let analytic = self.analytic();
        let mut upper = Vec::new();
        for mu in 0..n {
            for nu in mu..n {
                let me = self.clone();
                upper.push(Arc::new(PointFn::new(n, analytic, move |x, lay| {
                    let e = me.jets(x, lay)?;
                    let eta = me.eta();
                    let mut s = Jet::zero(lay);
                    for a in 0..n {
                        s += (&e[a * n + mu] * &e[a * n + nu]).scale(eta[a]);
                    }
                    Ok(s)
                })) as FieldRef);
            }
        }
        MetricField { chart: self.chart.clone(), comps: upper }
    }
}

/// Dual frame `e_a^μ` at `x`, returned as `E[μ*n + a]`.
pub fn frame_dual(coframe: &CoFrame, x: &[f64]) -> Result<Vec<f64>> {
    let n = coframe.dim();
    let e = coframe.eval(x)?;
    let det = linalg::determinant(&e, n);
    if !(crate::math::abs(det) > 1e-12) {
        return Err(Error::Singular(det));
    }
    linalg::inverse(&e, n)
}

/// Levi-Civita symbol value for an index list.
pub fn levi_civita(idx: &[usize]) -> f64 {
    match sort_with_sign(idx) {
        Some((sorted, s)) if sorted.iter().enumerate().all(|(i, v)| i == *v) => s,
        _ => 0.0,
    }
}

/// Hodge dual of a form with respect to a metric on the same chart.
///
/// `(*α)_{ν₁…ν_{n−k}} = (1/k!) α^{μ₁…μ_k} ε_{μ₁…μ_k ν₁…ν_{n−k}}` with
/// `ε_{01…} = +√|det g|`. On a Lorentzian 3-chart `** = −1` on one-forms
/// and two-forms.
pub fn hodge_dual(form: &FormField, metric: &MetricField) -> Result<FormField> {
    if *form.chart != *metric.chart {
        return Err(Error::ChartMismatch);
    }
    let n = form.chart.dim();
    let k = form.degree;
    let src_sets = index_sets(n, k);
    let out_sets = index_sets(n, n - k);
    let analytic = form.analytic() && metric.analytic();
    let comps = out_sets
        .iter()
        .map(|out| {
            let (form, metric, out, src_sets) = (form.clone(), metric.clone(), out.clone(), src_sets.clone());
            Arc::new(PointFn::new(n, analytic, move |x, lay| {
                let g = metric.jets(x, lay)?;
                let gi = linalg::jinverse(&g, n)?;
                let det = linalg::jdeterminant(&g, n);
                let vol = if det.value() < 0.0 { (-&det).sqrt() } else { det.sqrt() };
                if !(crate::math::abs(det.value()) > 1e-14) {
                    return Err(Error::Singular(det.value()));
                }
                let a = form.jets(x, lay)?;
                let mut acc = Jet::zero(lay);
                // Σ over increasing μ-sets of α^{μ…} ε_{μ… out}
                for (si, mset) in src_sets.iter().enumerate() {
                    let mut full = mset.clone();
                    full.extend_from_slice(&out);
                    let eps = levi_civita(&full);
                    if eps == 0.0 {
                        continue;
                    }
                    // α^{mset} = Σ_{ρ-sets} det(g^{mset,ρset}) α_{ρset}
                    for (ri, rset) in src_sets.iter().enumerate() {
                        let mut minor = Vec::with_capacity(k * k);
                        for &m in mset {
                            for &r in rset {
                                minor.push(gi[m * n + r].clone());
                            }
                        }
                        let d = if k == 0 { Jet::constant(lay, 1.0) } else { linalg::jdeterminant(&minor, k) };
                        acc += (&d * &a[ri]).scale(eps);
                    }
                    let _ = si;
                }
                Ok(&acc * &vol)
            })) as FieldRef
        })
        .collect();
    Ok(FormField { chart: form.chart.clone(), degree: n - k, comps })
}

/// Hodge dual on a 2+1 Lorentzian chart (twist construction).
pub fn hodge_dual_2d(form: &FormField, metric: &MetricField) -> Result<FormField> {
    if form.chart.dim() != 3 || !form.chart.is_lorentzian() {
        return Err(Error::Invalid(alloc::string::String::from("hodge_dual_2d expects a Lorentzian 2+1 chart")));
    }
    if form.degree == 0 || form.degree == 3 {
        return Err(Error::Invalid(alloc::string::String::from("hodge_dual_2d acts on one- and two-forms")));
    }
    hodge_dual(form, metric)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chart3() -> Arc<Chart> {
        Arc::new(Chart::new(&["t", "x", "y"], &[-1, 1, 1], &[(-2.0, 2.0); 3]).unwrap())
    }

    #[test]
    fn index_sets_and_signs() {
        assert_eq!(index_sets(4, 2).len(), 6);
        assert_eq!(index_sets(3, 0), vec![Vec::<usize>::new()]);
        assert_eq!(sort_with_sign(&[2, 0, 1]), Some((vec![0, 1, 2], 1.0)));
        assert_eq!(sort_with_sign(&[1, 0]), Some((vec![0, 1], -1.0)));
        assert_eq!(sort_with_sign(&[1, 1]), None);
        assert_eq!(levi_civita(&[1, 0, 2]), -1.0);
    }

    #[test]
    fn wedge_coefficient_and_overflow() {
        let c = chart3();
        let a = FormField::one_form(c.clone(), vec![field::constant(3, 2.0), field::constant(3, 3.0), field::zero(3)])
            .unwrap();
        let dx = FormField::coordinate_differential(c.clone(), 1);
        let w = wedge(&a, &dx).unwrap();
        assert_eq!(w.full_component(&[0.1, 0.2, 0.3], &[0, 1]).unwrap(), 2.0);
        assert_eq!(w.full_component(&[0.1, 0.2, 0.3], &[1, 0]).unwrap(), -2.0);
        let vol = wedge(&w, &FormField::coordinate_differential(c.clone(), 2)).unwrap();
        assert!(matches!(wedge(&vol, &dx), Err(Error::DegreeOverflow(3, 1, 3))));
    }

    #[test]
    fn hodge_minkowski_orientation() {
        let c = chart3();
        let eta = MetricField::flat(c.clone());
        let dt = FormField::coordinate_differential(c.clone(), 0);
        let dx = FormField::coordinate_differential(c.clone(), 1);
        let s = hodge_dual_2d(&wedge(&dt, &dx).unwrap(), &eta).unwrap();
        let v = s.eval(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(v, vec![0.0, 0.0, -1.0]);
    }
}
