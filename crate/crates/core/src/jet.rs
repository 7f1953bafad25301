//! Truncated multivariate Taylor series.
//!
//! A [`Jet`] of order `K` in `n` variables stores the Taylor coefficients
//! `c_α` of a function around a point, for all multi-indices `|α| ≤ K`.
//! Arithmetic and elementary functions propagate the coefficients exactly, so
//! partial derivatives up to order `K` of any composite expression are
//! available without finite differences.
//!
//! Monomials are ordered by total degree, so the coefficients of a lower-order
//! truncation form a prefix of the full coefficient vector.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use crate::math;

/// Maximum number of variables supported by a layout.
pub const MAX_VARS: usize = 4;

/// Monomial bookkeeping for jets of a fixed variable count and order.
#[derive(Debug)]
pub struct JetLayout {
    nvars: usize,
    order: usize,
    exps: Vec<[u8; MAX_VARS]>,
    lookup: Vec<u32>,
    mul: Vec<[u32; 3]>,
    deriv: Vec<Vec<(u32, f64)>>,
    lower: Option<Arc<JetLayout>>,
}

/// Shared handle to a layout.
pub type JetCtx = Arc<JetLayout>;

fn monomials(nvars: usize, degree: usize, out: &mut Vec<[u8; MAX_VARS]>) {
    fn rec(var: usize, nvars: usize, left: usize, cur: &mut [u8; MAX_VARS], out: &mut Vec<[u8; MAX_VARS]>) {
        if var + 1 == nvars {
            cur[var] = left as u8;
            out.push(*cur);
            cur[var] = 0;
            return;
        }
        for k in (0..=left).rev() {
            cur[var] = k as u8;
            rec(var + 1, nvars, left - k, cur, out);
        }
        cur[var] = 0;
    }
    let mut cur = [0u8; MAX_VARS];
    rec(0, nvars, degree, &mut cur, out);
}

impl JetLayout {
    /// Builds the layout (and the chain of lower-order layouts).
    pub fn new(nvars: usize, order: usize) -> JetCtx {
        assert!((1..=MAX_VARS).contains(&nvars), "jets support 1..={MAX_VARS} variables");
        let lower = if order > 0 { Some(JetLayout::new(nvars, order - 1)) } else { None };
        let mut exps = Vec::new();
        for d in 0..=order {
            monomials(nvars, d, &mut exps);
        }
        let radix = order + 1;
        let key = |e: &[u8; MAX_VARS]| -> usize {
            let mut k = 0;
            for v in (0..nvars).rev() {
                k = k * radix + e[v] as usize;
            }
            k
        };
        let mut lookup = vec![u32::MAX; radix.pow(nvars as u32)];
        for (i, e) in exps.iter().enumerate() {
            lookup[key(e)] = i as u32;
        }
        let deg = |e: &[u8; MAX_VARS]| e.iter().map(|&x| x as usize).sum::<usize>();
        let mut mul = Vec::new();
        for (i, a) in exps.iter().enumerate() {
            for (j, b) in exps.iter().enumerate() {
                if deg(a) + deg(b) > order {
                    continue;
                }
                let mut s = [0u8; MAX_VARS];
                for v in 0..nvars {
                    s[v] = a[v] + b[v];
                }
                mul.push([i as u32, j as u32, lookup[key(&s)]]);
            }
        }
        let mut deriv = Vec::new();
        if let Some(low) = &lower {
            for v in 0..nvars {
                let mut table = Vec::with_capacity(low.exps.len());
                for b in &low.exps {
                    let mut s = *b;
                    s[v] += 1;
                    table.push((lookup[key(&s)], (b[v] as f64) + 1.0));
                }
                deriv.push(table);
            }
        }
        Arc::new(JetLayout { nvars, order, exps, lookup, mul, deriv, lower })
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of stored coefficients.
    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    /// Exponent vector of coefficient `i`.
    pub fn exponent(&self, i: usize) -> &[u8] {
        &self.exps[i][..self.nvars]
    }

    /// Index of the monomial with the given exponents, if within the order.
    pub fn index_of(&self, e: &[u8]) -> Option<usize> {
        if e.len() != self.nvars || e.iter().map(|&x| x as usize).sum::<usize>() > self.order {
            return None;
        }
        let radix = self.order + 1;
        let mut k = 0;
        for v in (0..self.nvars).rev() {
            k = k * radix + e[v] as usize;
        }
        match self.lookup[k] {
            u32::MAX => None,
            i => Some(i as usize),
        }
    }

    /// Layout one order lower.
    pub fn lower(&self) -> Option<&JetCtx> {
        self.lower.as_ref()
    }

    /// Layout of the requested (lower or equal) order.
    pub fn at_order(self: &Arc<Self>, order: usize) -> JetCtx {
        assert!(order <= self.order);
        let mut cur = self.clone();
        while cur.order > order {
            cur = cur.lower.clone().expect("layout chain");
        }
        cur
    }
}

/// Truncated Taylor series around a point.
#[derive(Clone, Debug)]
pub struct Jet {
    lay: JetCtx,
    c: Vec<f64>,
}

impl Jet {
    pub fn constant(lay: &JetCtx, v: f64) -> Jet {
        let mut c = vec![0.0; lay.len()];
        c[0] = v;
        Jet { lay: lay.clone(), c }
    }

    pub fn zero(lay: &JetCtx) -> Jet {
        Jet::constant(lay, 0.0)
    }

    /// The coordinate function `x_i` expanded around `x0`.
    pub fn variable(lay: &JetCtx, i: usize, x0: f64) -> Jet {
        let mut j = Jet::constant(lay, x0);
        if lay.order > 0 {
            j.c[1 + i] = 1.0;
        }
        j
    }

    /// Seeds all coordinate functions at a point.
    pub fn seed(lay: &JetCtx, x: &[f64]) -> Vec<Jet> {
        x.iter().enumerate().map(|(i, &v)| Jet::variable(lay, i, v)).collect()
    }

    pub fn from_coeffs(lay: &JetCtx, c: Vec<f64>) -> Jet {
        assert_eq!(c.len(), lay.len());
        Jet { lay: lay.clone(), c }
    }

    pub fn layout(&self) -> &JetCtx {
        &self.lay
    }

    pub fn order(&self) -> usize {
        self.lay.order
    }

    pub fn nvars(&self) -> usize {
        self.lay.nvars
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.c
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// First partial derivative `∂_i` at the expansion point.
    pub fn d1(&self, i: usize) -> f64 {
        if self.lay.order == 0 {
            return 0.0;
        }
        self.c[1 + i]
    }

    /// Second partial derivative `∂_i ∂_j` at the expansion point.
    pub fn d2(&self, i: usize, j: usize) -> f64 {
        if self.lay.order < 2 {
            return 0.0;
        }
        let mut e = [0u8; MAX_VARS];
        e[i] += 1;
        e[j] += 1;
        let idx = self.lay.index_of(&e[..self.lay.nvars]).expect("second-order monomial");
        if i == j {
            2.0 * self.c[idx]
        } else {
            self.c[idx]
        }
    }

    /// Partial derivative as a jet of one lower order.
    pub fn derivative(&self, var: usize) -> Jet {
        let low = self.lay.lower.as_ref().expect("derivative of an order-0 jet");
        let table = &self.lay.deriv[var];
        let c = table.iter().map(|&(src, f)| f * self.c[src as usize]).collect();
        Jet { lay: low.clone(), c }
    }

    /// The same series in a layout with more trailing variables, on which it
    /// does not depend.
    pub fn embed(&self, lay: &JetCtx) -> Jet {
        assert!(lay.nvars >= self.lay.nvars && lay.order <= self.lay.order, "embedding needs a wider layout");
        let mut c = vec![0.0; lay.len()];
        for (i, v) in c.iter_mut().enumerate() {
            let e = &lay.exps[i];
            if e[self.lay.nvars..lay.nvars].iter().all(|&k| k == 0) {
                if let Some(j) = self.lay.index_of(&e[..self.lay.nvars]) {
                    *v = self.c[j];
                }
            }
        }
        Jet { lay: lay.clone(), c }
    }

    /// Truncates to a lower order.
    pub fn truncate(&self, order: usize) -> Jet {
        if order >= self.lay.order {
            return self.clone();
        }
        let lay = self.lay.at_order(order);
        Jet { c: self.c[..lay.len()].to_vec(), lay }
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|x| x.is_finite())
    }

    fn aligned<'a>(&'a self, other: &'a Jet) -> (JetCtx, &'a [f64], &'a [f64]) {
        if Arc::ptr_eq(&self.lay, &other.lay) {
            return (self.lay.clone(), &self.c, &other.c);
        }
        assert_eq!(self.lay.nvars, other.lay.nvars, "jets over different variable counts");
        let lay = if self.lay.order <= other.lay.order {
            self.lay.clone()
        } else {
            other.lay.clone()
        };
        let n = lay.len();
        (lay, &self.c[..n], &other.c[..n])
    }

    fn mul_raw(lay: &JetCtx, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; lay.len()];
        for &[i, j, k] in &lay.mul {
            out[k as usize] += a[i as usize] * b[j as usize];
        }
        out
    }

    /// Sum of `f^(k)(a₀)/k! · δ^k` for the supplied derivatives of `f`.
    fn compose(&self, derivs: &[f64]) -> Jet {
        let k_max = self.lay.order;
        let mut delta = self.clone();
        delta.c[0] = 0.0;
        let mut fact = 1.0;
        for k in 1..=k_max {
            fact *= k as f64;
        }
        let mut acc = Jet::constant(&self.lay, derivs[k_max] / fact);
        for k in (0..k_max).rev() {
            fact /= (k + 1) as f64;
            let mut next = Jet { lay: self.lay.clone(), c: Jet::mul_raw(&self.lay, &acc.c, &delta.c) };
            next.c[0] += derivs[k] / fact;
            acc = next;
        }
        acc
    }

    pub fn exp(&self) -> Jet {
        let v = math::exp(self.c[0]);
        self.compose(&vec![v; self.lay.order + 1])
    }

    pub fn ln(&self) -> Jet {
        let a = self.c[0];
        let mut d = vec![math::ln(a)];
        let mut f = 1.0;
        for k in 1..=self.lay.order {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            d.push(sign * f / math::powi(a, k as i32));
            f *= k as f64;
        }
        self.compose(&d)
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = (math::sin(self.c[0]), math::cos(self.c[0]));
        let cyc = [s, c, -s, -c];
        let d: Vec<f64> = (0..=self.lay.order).map(|k| cyc[k % 4]).collect();
        self.compose(&d)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = (math::sin(self.c[0]), math::cos(self.c[0]));
        let cyc = [c, -s, -c, s];
        let d: Vec<f64> = (0..=self.lay.order).map(|k| cyc[k % 4]).collect();
        self.compose(&d)
    }

    pub fn tan(&self) -> Jet {
        &self.sin() / &self.cos()
    }

    /// `a^r` for real `r`; needs `a > 0` unless `r` is an integer.
    pub fn powf(&self, r: f64) -> Jet {
        if r == (r as i32) as f64 && math::abs(r) <= 64.0 {
            return self.powi(r as i32);
        }
        let a = self.c[0];
        let mut d = Vec::with_capacity(self.lay.order + 1);
        let mut fall = 1.0;
        for k in 0..=self.lay.order {
            d.push(fall * math::powf(a, r - k as f64));
            fall *= r - k as f64;
        }
        self.compose(&d)
    }

    pub fn powi(&self, n: i32) -> Jet {
        if n < 0 {
            return self.powi(-n).recip();
        }
        let mut base = self.clone();
        let mut e = n as u32;
        let mut acc = Jet::constant(&self.lay, 1.0);
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    pub fn sqrt(&self) -> Jet {
        self.powf(0.5)
    }

    pub fn recip(&self) -> Jet {
        let a = self.c[0];
        let mut d = Vec::with_capacity(self.lay.order + 1);
        let mut f = 1.0;
        for k in 0..=self.lay.order {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            d.push(sign * f / math::powi(a, k as i32 + 1));
            f *= (k + 1) as f64;
        }
        self.compose(&d)
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet { lay: self.lay.clone(), c: self.c.iter().map(|x| x * s).collect() }
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &Jet) {
        if other.lay.order < self.lay.order {
            *self = self.truncate(other.lay.order);
        }
        for (x, y) in self.c.iter_mut().zip(&other.c) {
            *x += s * y;
        }
    }

    /// `self += a * b`, truncating to the lowest order involved.
    pub fn add_mul(&mut self, a: &Jet, b: &Jet) {
        let p = a * b;
        *self += &p;
    }
}

impl<'a> Add<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        let (lay, a, b) = self.aligned(rhs);
        Jet { c: a.iter().zip(b).map(|(x, y)| x + y).collect(), lay }
    }
}

impl<'a> Sub<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        let (lay, a, b) = self.aligned(rhs);
        Jet { c: a.iter().zip(b).map(|(x, y)| x - y).collect(), lay }
    }
}

impl<'a> Mul<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        let (lay, a, b) = self.aligned(rhs);
        let c = Jet::mul_raw(&lay, a, b);
        Jet { lay, c }
    }
}

impl<'a> Div<&'a Jet> for &'a Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: &Jet) -> Jet {
        self * &rhs.recip()
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

macro_rules! owned_binop {
    ($tr:ident, $m:ident) => {
        impl $tr<Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                (&self).$m(&rhs)
            }
        }
        impl<'a> $tr<&'a Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: &Jet) -> Jet {
                (&self).$m(rhs)
            }
        }
        impl<'a> $tr<Jet> for &'a Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                self.$m(&rhs)
            }
        }
    };
}
owned_binop!(Add, add);
owned_binop!(Sub, sub);
owned_binop!(Mul, mul);
owned_binop!(Div, div);

impl Add<f64> for &Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        let mut j = self.clone();
        j.c[0] += rhs;
        j
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.c[0] += rhs;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: f64) -> Jet {
        self.c[0] -= rhs;
        self
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, rhs: f64) -> Jet {
        self.c.iter_mut().for_each(|x| *x *= rhs);
        self
    }
}

impl Mul<&Jet> for f64 {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        rhs.scale(self)
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        rhs * self
    }
}

impl AddAssign<&Jet> for Jet {
    fn add_assign(&mut self, rhs: &Jet) {
        if rhs.lay.order < self.lay.order {
            *self = self.truncate(rhs.lay.order);
        }
        for (x, y) in self.c.iter_mut().zip(&rhs.c) {
            *x += y;
        }
    }
}

impl AddAssign<Jet> for Jet {
    fn add_assign(&mut self, rhs: Jet) {
        *self += &rhs;
    }
}

impl SubAssign<&Jet> for Jet {
    fn sub_assign(&mut self, rhs: &Jet) {
        if rhs.lay.order < self.lay.order {
            *self = self.truncate(rhs.lay.order);
        }
        for (x, y) in self.c.iter_mut().zip(&rhs.c) {
            *x -= y;
        }
    }
}

impl SubAssign<Jet> for Jet {
    fn sub_assign(&mut self, rhs: Jet) {
        *self -= &rhs;
    }
}

impl MulAssign<f64> for Jet {
    fn mul_assign(&mut self, rhs: f64) {
        self.c.iter_mut().for_each(|x| *x *= rhs);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn layout_sizes() {
        assert_eq!(JetLayout::new(4, 2).len(), 15);
        assert_eq!(JetLayout::new(4, 3).len(), 35);
        assert_eq!(JetLayout::new(3, 4).len(), 35);
        assert_eq!(JetLayout::new(1, 5).len(), 6);
    }

    #[test]
    fn lower_layout_is_prefix() {
        let l = JetLayout::new(3, 3);
        let low = l.lower().unwrap();
        for i in 0..low.len() {
            assert_eq!(l.exponent(i), low.exponent(i));
        }
    }

    #[test]
    fn product_rule_second_order() {
        let lay = JetLayout::new(2, 3);
        let v = Jet::seed(&lay, &[0.3, -0.7]);
        // f = x^2 y + sin(x y)
        let f = &(&(&v[0] * &v[0]) * &v[1]) + &(&v[0] * &v[1]).sin();
        let (x, y) = (0.3f64, -0.7f64);
        assert!(close(f.value(), x * x * y + (x * y).sin(), 1e-15));
        assert!(close(f.d1(0), 2.0 * x * y + y * (x * y).cos(), 1e-14));
        assert!(close(f.d2(0, 1), 2.0 * x + (x * y).cos() - x * y * (x * y).sin(), 1e-14));
        assert!(close(f.d2(1, 1), -x * x * (x * y).sin(), 1e-14));
    }

    #[test]
    fn elementary_functions_match_closed_forms() {
        let lay = JetLayout::new(1, 4);
        let x = Jet::variable(&lay, 0, 1.3);
        let e = x.exp().ln();
        assert!(close(e.value(), 1.3, 1e-15));
        assert!(close(e.d1(0), 1.0, 1e-14));
        assert!(e.d2(0, 0).abs() < 1e-13);
        let p = x.powf(2.5);
        assert!(close(p.d2(0, 0), 2.5 * 1.5 * 1.3f64.powf(0.5), 1e-14));
        let r = &x.recip() * &x;
        assert!(close(r.value(), 1.0, 1e-15));
        assert!(r.d1(0).abs() < 1e-14 && r.d2(0, 0).abs() < 1e-13);
        let s = x.sqrt();
        assert!(close((&s * &s).d2(0, 0), 0.0, 1e-13));
        let t = &x.sin() * &x.sin() + &x.cos() * &x.cos();
        assert!(close(t.value(), 1.0, 1e-15) && t.d1(0).abs() < 1e-14);
    }

    #[test]
    fn derivative_lowers_order() {
        let lay = JetLayout::new(2, 3);
        let v = Jet::seed(&lay, &[1.0, 2.0]);
        let f = (&v[0] * &v[0]) * &v[1];
        let fx = f.derivative(0);
        assert_eq!(fx.order(), 2);
        assert!(close(fx.value(), 4.0, 1e-15));
        assert!(close(fx.d1(1), 2.0, 1e-15));
        assert!(close(fx.d2(0, 1), 2.0, 1e-15));
    }

    #[test]
    fn mixed_order_arithmetic_truncates() {
        let hi = JetLayout::new(2, 3);
        let lo = hi.at_order(1);
        let a = Jet::variable(&hi, 0, 2.0);
        let b = Jet::variable(&lo, 1, 3.0);
        let p = &a * &b;
        assert_eq!(p.order(), 1);
        assert!(close(p.d1(0), 3.0, 1e-15) && close(p.d1(1), 2.0, 1e-15));
    }
}
