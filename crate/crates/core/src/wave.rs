//! Flat-space wave kernels.
//!
//! Solutions of `u_tt − Δu = N` in two and three space dimensions through
//! spherical means (Kirchhoff), the method of descent on the disk, and
//! Duhamel's principle with Picard iteration for nonlinear sources.
//!
//! All kernels are evaluated by tensor-product Gaussian quadrature. The disk
//! kernel carries the weight `(1 − ρ²)^{−1/2}`, which is integrated exactly by
//! a Gauss-Jacobi rule in `z = 2ρ² − 1`.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use crate::error::{invalid, Error, Result};
use crate::field::{FdField, FieldRef};
use crate::math;
use crate::quadrature::{gauss_jacobi, gauss_legendre, Rule};

/// Radial step for `∂_r` of spherical and disk means.
const MEAN_FD_STEP: f64 = 1e-3;

/// Quadrature orders for every kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureSpec {
    /// Gauss-Legendre nodes in `cos θ`.
    pub sphere_theta: usize,
    /// Trapezoid nodes in `φ` on the sphere (even).
    pub sphere_phi: usize,
    /// Gauss-Jacobi nodes in the disk radius.
    pub disk_radial: usize,
    /// Trapezoid nodes on the disk circle (even).
    pub disk_angle: usize,
    /// Gauss-Legendre nodes for time and radial line integrals.
    pub time_nodes: usize,
    /// Time levels of the Picard lattice.
    pub lattice_levels: usize,
    /// Largest accepted node-doubling estimate.
    pub tolerance: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            sphere_theta: 16,
            sphere_phi: 32,
            disk_radial: 24,
            disk_angle: 32,
            time_nodes: 16,
            lattice_levels: 32,
            tolerance: 1e-6,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        let orders = [
            self.sphere_theta,
            self.sphere_phi,
            self.disk_radial,
            self.disk_angle,
            self.time_nodes,
            self.lattice_levels,
        ];
        if orders.iter().any(|&n| n < 4) {
            return Err(invalid("quadrature orders must be at least 4"));
        }
        if self.sphere_phi % 2 == 1 || self.disk_angle % 2 == 1 {
            return Err(invalid("angular trapezoid orders must be even"));
        }
        if !(self.tolerance > 0.0) {
            return Err(invalid("quadrature tolerance must be positive"));
        }
        Ok(())
    }

    /// Every order doubled; used for error estimates.
    pub fn doubled(&self) -> QuadratureSpec {
        QuadratureSpec {
            sphere_theta: 2 * self.sphere_theta,
            sphere_phi: 2 * self.sphere_phi,
            disk_radial: 2 * self.disk_radial,
            disk_angle: 2 * self.disk_angle,
            time_nodes: 2 * self.time_nodes,
            lattice_levels: self.lattice_levels,
            tolerance: self.tolerance,
        }
    }
}

/// A value with its node-doubling error estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    fn from_pair(coarse: f64, fine: f64) -> Estimate {
        Estimate { value: fine, error: math::abs(fine - coarse) }
    }

    fn checked(self, quad: &QuadratureSpec) -> Result<Estimate> {
        if !self.value.is_finite() {
            return Err(Error::NonFinite("wave kernel"));
        }
        if self.error > quad.tolerance {
            return Err(Error::Quadrature(self.error));
        }
        Ok(self)
    }
}

pub type Profile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type FixedSource = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;
pub type Nonlinearity = Arc<dyn Fn(f64, &[f64], f64) -> f64 + Send + Sync>;

/// Right-hand side of `u_tt − Δu = N`.
#[derive(Clone, Default)]
pub enum Source {
    #[default]
    None,
    /// `N(x, t)`.
    Fixed(FixedSource),
    /// `N(u, x, t)`.
    Nonlinear(Nonlinearity),
}

impl fmt::Debug for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::None => write!(f, "None"),
            Source::Fixed(_) => write!(f, "Fixed(..)"),
            Source::Nonlinear(_) => write!(f, "Nonlinear(..)"),
        }
    }
}

/// Radial profiles `u0(|y|)`, `u1(|y|)`.
#[derive(Clone)]
pub struct RadialProfiles {
    pub u0: Profile,
    pub u1: Profile,
}

impl fmt::Debug for RadialProfiles {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RadialProfiles(..)")
    }
}

/// Initial data `u(0) = u0`, `u_t(0) = u1` and a source.
#[derive(Clone, Debug)]
pub struct CauchyData {
    pub dim: usize,
    pub u0: FieldRef,
    pub u1: FieldRef,
    pub source: Source,
    /// Radius of a ball about the origin containing the support of the data.
    pub support: Option<f64>,
    /// Present when the data depend on `|y|` only.
    pub radial: Option<RadialProfiles>,
    /// Box on which the data may be evaluated.
    pub domain: Option<Vec<(f64, f64)>>,
}

fn radial_field(dim: usize, p: Profile) -> FieldRef {
    Arc::new(FdField::new(dim, move |y: &[f64]| p(math::sqrt(y.iter().map(|v| v * v).sum()))))
}

impl CauchyData {
    pub fn new(dim: usize, u0: FieldRef, u1: FieldRef) -> Result<CauchyData> {
        if dim != 2 && dim != 3 {
            return Err(invalid("wave data live in two or three space dimensions"));
        }
        for f in [&u0, &u1] {
            if f.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: f.dim() });
            }
        }
        Ok(CauchyData { dim, u0, u1, source: Source::None, support: None, radial: None, domain: None })
    }

    /// Data depending on `|y|` only.
    pub fn radial(
        dim: usize,
        u0: impl Fn(f64) -> f64 + Send + Sync + 'static,
        u1: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<CauchyData> {
        let (p0, p1): (Profile, Profile) = (Arc::new(u0), Arc::new(u1));
        let mut d = CauchyData::new(dim, radial_field(dim, p0.clone()), radial_field(dim, p1.clone()))?;
        d.radial = Some(RadialProfiles { u0: p0, u1: p1 });
        Ok(d)
    }

    pub fn with_source(mut self, source: Source) -> CauchyData {
        self.source = source;
        self
    }

    pub fn with_support(mut self, radius: f64) -> CauchyData {
        self.support = Some(radius);
        self
    }

    pub fn with_domain(mut self, domain: &[(f64, f64)]) -> Result<CauchyData> {
        if domain.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: domain.len() });
        }
        self.domain = Some(domain.to_vec());
        Ok(self)
    }

    /// Same data with `u1` negated.
    pub fn reversed(&self) -> CauchyData {
        let u1 = self.u1.clone();
        let mut d = self.clone();
        d.u1 = Arc::new(FdField::new(self.dim, move |y: &[f64]| -u1.eval(y).unwrap_or(f64::NAN)));
        if let Some(p) = &self.radial {
            let p1 = p.u1.clone();
            d.radial = Some(RadialProfiles { u0: p.u0.clone(), u1: Arc::new(move |r| -p1(r)) });
        }
        d
    }

    /// Two-dimensional data extended to three dimensions, independent of `y³`.
    pub fn lifted(&self) -> Result<CauchyData> {
        if self.dim != 2 {
            return Err(invalid("only planar data can be lifted"));
        }
        let lift = |f: &FieldRef| -> FieldRef {
            let f = f.clone();
            Arc::new(FdField::new(3, move |y: &[f64]| f.eval(&y[..2]).unwrap_or(f64::NAN)))
        };
        let mut d = CauchyData::new(3, lift(&self.u0), lift(&self.u1))?;
        d.source = match &self.source {
            Source::None => Source::None,
            Source::Fixed(n) => {
                let n = n.clone();
                Source::Fixed(Arc::new(move |y: &[f64], t| n(&y[..2], t)))
            }
            Source::Nonlinear(n) => {
                let n = n.clone();
                Source::Nonlinear(Arc::new(move |u, y: &[f64], t| n(u, &y[..2], t)))
            }
        };
        if let Some(dom) = &self.domain {
            let mut dom = dom.clone();
            dom.push((f64::NEG_INFINITY, f64::INFINITY));
            d.domain = Some(dom);
        }
        Ok(d)
    }

    /// Errors if the ball of radius `r` about `x` leaves the data domain.
    pub fn check_footprint(&self, x: &[f64], r: f64) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        if let Some(dom) = &self.domain {
            let r = math::abs(r);
            if x.iter().zip(dom).any(|(xi, (lo, hi))| xi - r < *lo || xi + r > *hi) {
                return Err(Error::OutsideDomain { point: x.to_vec() });
            }
        }
        Ok(())
    }
}

fn eval(f: &FieldRef, y: &[f64]) -> f64 {
    f.eval(y).unwrap_or(f64::NAN)
}

/// Product rule on the unit sphere: unit directions with weights summing to one.
#[derive(Clone, Debug)]
pub struct SphereRule {
    dirs: Vec<[f64; 3]>,
    weights: Vec<f64>,
}

impl SphereRule {
    pub fn new(n_theta: usize, n_phi: usize) -> Result<SphereRule> {
        let gl = gauss_legendre(n_theta)?;
        let mut dirs = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        for (c, w) in gl.nodes.iter().zip(&gl.weights) {
            let s = math::sqrt((1.0 - c * c).max(0.0));
            for j in 0..n_phi {
                let phi = 2.0 * PI * j as f64 / n_phi as f64;
                dirs.push([s * math::cos(phi), s * math::sin(phi), *c]);
                weights.push(w / (2.0 * n_phi as f64));
            }
        }
        Ok(SphereRule { dirs, weights })
    }

    pub fn from_spec(q: &QuadratureSpec) -> Result<SphereRule> {
        SphereRule::new(q.sphere_theta, q.sphere_phi)
    }

    /// Mean of `f` over the sphere of radius `r` about `x`; `r` may be negative.
    pub fn mean(&self, f: impl Fn(&[f64]) -> f64, x: &[f64], r: f64) -> f64 {
        let mut y = [0.0; 3];
        let mut acc = 0.0;
        for (d, w) in self.dirs.iter().zip(&self.weights) {
            for k in 0..3 {
                y[k] = x[k] + r * d[k];
            }
            acc += w * f(&y);
        }
        acc
    }
}

/// Rule for the disk mean `(1/2π t)∫_{|y|<t} f(x + y)(t² − |y|²)^{−1/2} dy`.
#[derive(Clone, Debug)]
pub enum DiskRule {
    /// Gauss-Jacobi in `z = 2ρ² − 1`, `ρ = |y|/t`, carrying the exact singular weight.
    Singular { radii: Vec<f64>, weights: Vec<f64>, angles: Vec<[f64; 2]> },
    /// Gauss-Legendre in `|y| ∈ [0, reach]` for data vanishing beyond `reach < t`.
    Truncated { radii: Vec<f64>, weights: Vec<f64>, angles: Vec<[f64; 2]> },
}

impl DiskRule {
    pub fn new(n_radial: usize, n_angle: usize) -> Result<DiskRule> {
        let gj = gauss_jacobi(n_radial, -0.5, 0.0)?;
        let norm = 1.0 / (2.0 * core::f64::consts::SQRT_2);
        Ok(DiskRule::Singular {
            radii: gj.nodes.iter().map(|z| math::sqrt(0.5 * (1.0 + z))).collect(),
            weights: gj.weights.iter().map(|w| w * norm).collect(),
            angles: angles(n_angle),
        })
    }

    pub fn truncated(n_radial: usize, n_angle: usize, reach: f64) -> Result<DiskRule> {
        let (radii, weights) = gauss_legendre(n_radial)?.mapped(0.0, reach);
        Ok(DiskRule::Truncated { radii, weights, angles: angles(n_angle) })
    }

    /// Disk mean at radius `t`; even in `t`, and `f(x)` for constant `f`.
    pub fn mean(&self, f: impl Fn(&[f64]) -> f64, x: &[f64], t: f64) -> f64 {
        let ring = |angles: &[[f64; 2]], s: f64| {
            let mut y = [0.0; 2];
            let mut acc = 0.0;
            for a in angles {
                y[0] = x[0] + s * a[0];
                y[1] = x[1] + s * a[1];
                acc += f(&y);
            }
            acc / angles.len() as f64
        };
        match self {
            DiskRule::Singular { radii, weights, angles } => {
                radii.iter().zip(weights).map(|(rho, w)| w * ring(angles, t * rho)).sum()
            }
            DiskRule::Truncated { radii, weights, angles } => {
                let t = math::abs(t);
                radii
                    .iter()
                    .zip(weights)
                    .map(|(s, w)| w * s / (t * math::sqrt(t * t - s * s)) * ring(angles, *s))
                    .sum()
            }
        }
    }
}

fn angles(n: usize) -> Vec<[f64; 2]> {
    (0..n)
        .map(|j| {
            let phi = 2.0 * PI * j as f64 / n as f64;
            [math::cos(phi), math::sin(phi)]
        })
        .collect()
}

/// Fourth-order central difference of an even function of `r`.
fn radial_derivative(m: impl Fn(f64) -> f64, r: f64) -> f64 {
    let h = MEAN_FD_STEP;
    (m(r - 2.0 * h) - 8.0 * m(r - h) + 8.0 * m(r + h) - m(r + 2.0 * h)) / (12.0 * h)
}

/// Spherical mean `M_f(x, r)` in three dimensions.
pub fn spherical_mean(f: &FieldRef, x: &[f64], r: f64, quad: &QuadratureSpec) -> Result<Estimate> {
    quad.validate()?;
    if r < 0.0 {
        return Err(invalid("spherical mean radius must be non-negative"));
    }
    if x.len() != 3 || f.dim() != 3 {
        return Err(Error::DimensionMismatch { expected: 3, got: x.len().min(f.dim()) });
    }
    if r == 0.0 {
        return Ok(Estimate { value: eval(f, x), error: 0.0 });
    }
    let coarse = SphereRule::from_spec(quad)?.mean(|y| eval(f, y), x, r);
    let fine = SphereRule::from_spec(&quad.doubled())?.mean(|y| eval(f, y), x, r);
    Estimate::from_pair(coarse, fine).checked(quad)
}

fn kirchhoff_value(data: &CauchyData, rule: &SphereRule, x: &[f64], t: f64) -> f64 {
    let m0 = |r: f64| rule.mean(|y| eval(&data.u0, y), x, r);
    let m1 = rule.mean(|y| eval(&data.u1, y), x, t);
    m0(t) + t * radial_derivative(m0, t) + t * m1
}

/// Homogeneous three-dimensional solution `∂_t(t M_{u0}) + t M_{u1}` at `(x, t)`.
pub fn kirchhoff_3d(data: &CauchyData, x: &[f64], t: f64, quad: &QuadratureSpec) -> Result<Estimate> {
    quad.validate()?;
    if data.dim != 3 {
        return Err(invalid("Kirchhoff evaluation needs three-dimensional data"));
    }
    if t < 0.0 {
        return Err(invalid("evaluation time must be non-negative"));
    }
    data.check_footprint(x, t + 2.0 * MEAN_FD_STEP)?;
    let coarse = kirchhoff_value(data, &SphereRule::from_spec(quad)?, x, t);
    let fine = kirchhoff_value(data, &SphereRule::from_spec(&quad.doubled())?, x, t);
    Estimate::from_pair(coarse, fine).checked(quad)
}

/// Value at time `−t` of the homogeneous solution with data `(u0, u1)`,
/// from the representation formula continued to negative times.
pub fn kirchhoff_3d_backward(data: &CauchyData, x: &[f64], t: f64, quad: &QuadratureSpec) -> Result<Estimate> {
    quad.validate()?;
    if data.dim != 3 || t < 0.0 {
        return Err(invalid("backward evaluation needs three-dimensional data and t ≥ 0"));
    }
    data.check_footprint(x, t + 2.0 * MEAN_FD_STEP)?;
    let coarse = kirchhoff_value(data, &SphereRule::from_spec(quad)?, x, -t);
    let fine = kirchhoff_value(data, &SphereRule::from_spec(&quad.doubled())?, x, -t);
    Estimate::from_pair(coarse, fine).checked(quad)
}

fn descent_value(data: &CauchyData, x: &[f64], t: f64, n_radial: usize, n_angle: usize) -> Result<f64> {
    let reach = data.support.map(|r| math::sqrt(x[0] * x[0] + x[1] * x[1]) + r);
    let rule = match reach {
        // the kernel is smooth on the support of the data; integrate only there
        Some(reach) if reach < t - 2.0 * MEAN_FD_STEP => DiskRule::truncated(n_radial, n_angle, reach)?,
        _ => DiskRule::new(n_radial, n_angle)?,
    };
    let a0 = |s: f64| rule.mean(|y| eval(&data.u0, y), x, s);
    Ok(a0(t) + t * radial_derivative(a0, t) + t * rule.mean(|y| eval(&data.u1, y), x, t))
}

/// Homogeneous two-dimensional solution by the method of descent at `(x, t)`.
pub fn descent_2d(data: &CauchyData, x: &[f64], t: f64, quad: &QuadratureSpec) -> Result<Estimate> {
    quad.validate()?;
    if data.dim != 2 {
        return Err(invalid("descent evaluation needs two-dimensional data"));
    }
    if t < 0.0 {
        return Err(invalid("evaluation time must be non-negative"));
    }
    data.check_footprint(x, t + 2.0 * MEAN_FD_STEP)?;
    let q2 = quad.doubled();
    let coarse = descent_value(data, x, t, quad.disk_radial, quad.disk_angle)?;
    let fine = descent_value(data, x, t, q2.disk_radial, q2.disk_angle)?;
    Estimate::from_pair(coarse, fine).checked(quad)
}

/// Linear part `u_L` in either dimension.
pub fn homogeneous(data: &CauchyData, x: &[f64], t: f64, quad: &QuadratureSpec) -> Result<Estimate> {
    match data.dim {
        3 => kirchhoff_3d(data, x, t, quad),
        _ => descent_2d(data, x, t, quad),
    }
}

/// Source operator `S_f(x, τ)`: the solution at time `τ` with data `(0, f)`.
pub fn source_operator(
    dim: usize,
    f: impl Fn(&[f64]) -> f64,
    x: &[f64],
    tau: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    match dim {
        3 => Ok(tau * SphereRule::from_spec(quad)?.mean(f, x, tau)),
        2 => Ok(tau * DiskRule::new(quad.disk_radial, quad.disk_angle)?.mean(f, x, tau)),
        _ => Err(invalid("wave data live in two or three space dimensions")),
    }
}

/// Result of a Duhamel evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct DuhamelReport {
    pub value: f64,
    pub error_estimate: f64,
    /// Sup-norm distances between successive Picard iterates on the lattice.
    pub iterate_history: Vec<f64>,
}

fn fixed_source_value(
    data: &CauchyData,
    n: &FixedSource,
    x: &[f64],
    t: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let time = gauss_legendre(quad.time_nodes)?;
    let sphere = SphereRule::from_spec(quad)?;
    let disk = DiskRule::new(quad.disk_radial, quad.disk_angle)?;
    let mut acc = 0.0;
    let (nodes, weights) = time.mapped(0.0, t);
    for (tp, w) in nodes.iter().zip(&weights) {
        let tau = t - tp;
        let g = |y: &[f64]| n(y, *tp);
        let s = match data.dim {
            3 => tau * sphere.mean(g, x, tau),
            _ => tau * disk.mean(g, x, tau),
        };
        acc += w * s;
    }
    Ok(acc)
}

/// Solution of `u_tt − Δu = N` at `(x, t)` by Duhamel's principle.
///
/// A fixed source `N(x, t)` is integrated directly in time. A nonlinearity
/// `N(u, x, t)` is resolved by Picard iteration on a radial space-time
/// lattice, which needs radial three-dimensional data; at most `iters`
/// iterations are taken and the iterate distances must decrease.
pub fn duhamel_solve(
    data: &CauchyData,
    x: &[f64],
    t: f64,
    quad: &QuadratureSpec,
    iters: usize,
) -> Result<DuhamelReport> {
    quad.validate()?;
    if t < 0.0 {
        return Err(invalid("evaluation time must be non-negative"));
    }
    data.check_footprint(x, t + 2.0 * MEAN_FD_STEP)?;
    match &data.source {
        Source::None => {
            let e = homogeneous(data, x, t, quad)?;
            Ok(DuhamelReport { value: e.value, error_estimate: e.error, iterate_history: Vec::new() })
        }
        Source::Fixed(n) => {
            let lin = homogeneous(data, x, t, quad)?;
            let coarse = fixed_source_value(data, n, x, t, quad)?;
            let fine = fixed_source_value(data, n, x, t, &quad.doubled())?;
            let e = Estimate::from_pair(coarse, fine).checked(quad)?;
            Ok(DuhamelReport {
                value: lin.value + e.value,
                error_estimate: lin.error + e.error,
                iterate_history: Vec::new(),
            })
        }
        Source::Nonlinear(n) => {
            let p = match (&data.radial, data.dim) {
                (Some(p), 3) => p,
                _ => return Err(invalid("nonlinear Duhamel evaluation needs radial three-dimensional data")),
            };
            let r0 = math::sqrt(x.iter().map(|v| v * v).sum());
            let lattice = PicardLattice::new(p, n.clone(), r0, t, quad)?;
            lattice.solve(r0, t, iters)
        }
    }
}

/// `(1/2r)∫_{|r−τ|}^{r+τ} s g(s) ds`, the radial form of `τ M_g(r, τ)`.
fn radial_shell(g: impl Fn(f64) -> f64, r: f64, tau: f64, rule: &Rule) -> f64 {
    let tau = math::abs(tau);
    if r == 0.0 {
        return tau * g(tau);
    }
    rule.integrate(math::abs(r - tau), r + tau, |s| s * g(s)) / (2.0 * r)
}

/// `∂_τ` of [`radial_shell`].
fn radial_shell_rate(g: impl Fn(f64) -> f64, r: f64, tau: f64) -> f64 {
    let h = if r < 1e-6 { 1e-4 } else { r };
    let phi = |s: f64| s * g(math::abs(s));
    (phi(tau + h) - phi(tau - h)) / (2.0 * h)
}

/// Radial linear solution `∂_t W_{u0} + W_{u1}`.
fn radial_linear(p: &RadialProfiles, r: f64, t: f64, rule: &Rule) -> f64 {
    radial_shell_rate(|s| (p.u0)(s), r, t) + radial_shell(|s| (p.u1)(s), r, t, rule)
}

/// Radial Picard iteration on a cone-adapted `(r, t)` lattice.
struct PicardLattice {
    profiles: RadialProfiles,
    n: Nonlinearity,
    dt: f64,
    dr: f64,
    /// `values[j][i] ≈ u(i·dr, j·dt)`.
    values: Vec<Vec<f64>>,
    rule: Rule,
}

impl PicardLattice {
    fn new(p: &RadialProfiles, n: Nonlinearity, r0: f64, t: f64, quad: &QuadratureSpec) -> Result<PicardLattice> {
        let levels = quad.lattice_levels;
        let dt = if t > 0.0 { t / levels as f64 } else { 1.0 };
        let dr = dt;
        let rule = gauss_legendre(quad.time_nodes)?;
        let mut values = Vec::with_capacity(levels + 1);
        for j in 0..=levels {
            let tj = j as f64 * dt;
            // the backward cone from (r0, t) at time tj, padded by the interpolation stencils
            let reach = r0 + (t - tj).max(0.0) + 4.0 * dt + 4.0 * dr;
            let count = math::ceil(reach / dr) as usize + 1;
            values.push((0..count).map(|i| radial_linear(p, i as f64 * dr, tj, &rule)).collect());
        }
        Ok(PicardLattice { profiles: p.clone(), n, dt, dr, values, rule })
    }

    fn linear(&self, r: f64, t: f64) -> f64 {
        radial_linear(&self.profiles, r, t, &self.rule)
    }

    /// Cubic interpolation in `r` (with even reflection) on level `j`.
    fn at_level(values: &[Vec<f64>], j: usize, dr: f64, r: f64) -> f64 {
        let row = &values[j];
        let x = math::abs(r) / dr;
        let last = row.len() as isize - 1;
        let mut i0 = math::floor(x) as isize - 1;
        i0 = i0.min(last - 3);
        let mut acc = 0.0;
        for a in 0..4 {
            let ia = i0 + a;
            let mut l = 1.0;
            for b in 0..4 {
                if a != b {
                    l *= (x - (i0 + b) as f64) / (a - b) as f64;
                }
            }
            acc += l * row[ia.unsigned_abs()];
        }
        acc
    }

    /// Bicubic interpolation of the lattice at `(r, t)`.
    fn interpolate(values: &[Vec<f64>], dt: f64, dr: f64, r: f64, t: f64) -> f64 {
        let levels = values.len() as isize - 1;
        let y = t / dt;
        let j0 = (math::floor(y) as isize - 1).clamp(0, levels - 3);
        let mut acc = 0.0;
        for a in 0..4 {
            let mut l = 1.0;
            for b in 0..4 {
                if a != b {
                    l *= (y - (j0 + b) as f64) / (a - b) as f64;
                }
            }
            acc += l * Self::at_level(values, (j0 + a) as usize, dr, r);
        }
        acc
    }

    /// `∫_0^t S_{N(u(·, t'))}(r, t − t') dt'` from the lattice values `u`.
    fn duhamel(&self, u: &[Vec<f64>], r: f64, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        let integrand = |tp: f64| {
            let g = |s: f64| {
                let v = Self::interpolate(u, self.dt, self.dr, s, tp);
                (self.n)(v, &[s, 0.0, 0.0], tp)
            };
            radial_shell(g, r, t - tp, &self.rule)
        };
        // the shell's inner radius |r − τ| has a kink at τ = r
        let kink = t - r;
        if kink > 0.0 && kink < t {
            self.rule.integrate(0.0, kink, integrand) + self.rule.integrate(kink, t, integrand)
        } else {
            self.rule.integrate(0.0, t, integrand)
        }
    }

    fn solve(mut self, r0: f64, t: f64, iters: usize) -> Result<DuhamelReport> {
        let mut history = Vec::new();
        for _ in 0..iters {
            let mut next = self.values.clone();
            let mut dist: f64 = 0.0;
            for (j, row) in next.iter_mut().enumerate() {
                let tj = j as f64 * self.dt;
                for (i, v) in row.iter_mut().enumerate() {
                    let r = i as f64 * self.dr;
                    *v = self.linear(r, tj) + self.duhamel(&self.values, r, tj);
                    dist = dist.max(math::abs(*v - self.values[j][i]));
                }
            }
            if !dist.is_finite() {
                return Err(Error::NonFinite("Picard iteration"));
            }
            history.push(dist);
            self.values = next;
            let n = history.len();
            if n >= 2 && history[n - 1] > history[n - 2] && history[n - 2] > 1e-14 {
                return Err(Error::NonContraction(history));
            }
            if dist < 1e-14 {
                break;
            }
        }
        let value = self.linear(r0, t) + self.duhamel(&self.values, r0, t);
        let error_estimate = history.last().copied().unwrap_or(0.0);
        Ok(DuhamelReport { value, error_estimate, iterate_history: history })
    }
}

/// Values of the same radial data evolved in three and in two dimensions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HuygensProbe {
    pub u3d: Estimate,
    pub u2d: Estimate,
}

/// Evaluates radial data supported in `|y| ≤ R` at a planar point `x` with
/// `|x| + R < t`, in three dimensions (at `(x, 0)`) and in two.
pub fn huygens_probe(data: &CauchyData, x: &[f64], t: f64, quad: &QuadratureSpec) -> Result<HuygensProbe> {
    let (p, radius) = match (&data.radial, data.support) {
        (Some(p), Some(r)) => (p, r),
        _ => return Err(invalid("the Huygens probe needs radial data with a support radius")),
    };
    if x.len() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: x.len() });
    }
    if math::sqrt(x[0] * x[0] + x[1] * x[1]) + radius >= t {
        return Err(invalid("probe point must lie strictly inside the cone interior"));
    }
    let (a, b) = (p.u0.clone(), p.u1.clone());
    let d3 = CauchyData::radial(3, move |r| a(r), move |r| b(r))?.with_support(radius);
    let (a, b) = (p.u0.clone(), p.u1.clone());
    let d2 = CauchyData::radial(2, move |r| a(r), move |r| b(r))?.with_support(radius);
    Ok(HuygensProbe {
        u3d: kirchhoff_3d(&d3, &[x[0], x[1], 0.0], t, quad)?,
        u2d: descent_2d(&d2, x, t, quad)?,
    })
}
