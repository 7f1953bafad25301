//! Reduced canonical phase space on a periodic two-dimensional grid.
//!
//! The four-metric is written as
//! `ḡ = e^{−2γ}(−N²dt² + q_{ab}(dx^a + N^a dt)(dx^b + N^b dt)) + e^{2γ}(dx³ + 𝒜)²`.
//! Momenta `π^{ab}`, `p_γ`, `p_ω` and the Kaluza-Klein electric field `𝓔^a` are
//! densities of weight one; `μ_q = √det q`. Spatial derivatives are fourth-order
//! centered differences with periodic wraparound.

use alloc::vec;
use alloc::vec::Vec;

use crate::curvature::{christoffel_jets, i3};
use crate::error::{invalid, Error, Result};
use crate::field::FieldRef;
use crate::forms::CoFrame;
use crate::jet::{Jet, JetLayout};
use crate::linalg;
use crate::math;

/// A grid function.
pub type Grid = Vec<f64>;

/// Symmetric 2-tensor grid stored as `(11, 12, 22)`; component `(a, b)` sits at `a + b`.
pub type Sym2 = [Grid; 3];

/// Uniform periodic grid on the two-torus `[0, lx) × [0, ly)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Grid2D> {
        if nx < 8 || ny < 8 {
            return Err(invalid("grids need at least 8 nodes per direction"));
        }
        if !(lx > 0.0 && ly > 0.0) {
            return Err(invalid("grid lengths must be positive"));
        }
        Ok(Grid2D { nx, ny, hx: lx / nx as f64, hy: ly / ny as f64 })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn point(&self, k: usize) -> [f64; 2] {
        [(k % self.nx) as f64 * self.hx, (k / self.nx) as f64 * self.hy]
    }

    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Grid {
        (0..self.len()).map(|k| {
            let [x, y] = self.point(k);
            f(x, y)
        })
        .collect()
    }

    pub fn constant(&self, v: f64) -> Grid {
        vec![v; self.len()]
    }

    fn shifted(&self, k: usize, dir: usize, s: isize) -> usize {
        let (i, j) = ((k % self.nx) as isize, (k / self.nx) as isize);
        let (nx, ny) = (self.nx as isize, self.ny as isize);
        match dir {
            0 => self.index((i + s).rem_euclid(nx) as usize, j as usize),
            _ => self.index(i as usize, (j + s).rem_euclid(ny) as usize),
        }
    }

    /// `∂_dir f`; the fiber direction (`dir ≥ 2`) gives zero.
    pub fn diff(&self, f: &[f64], dir: usize) -> Grid {
        if dir >= 2 {
            return vec![0.0; self.len()];
        }
        let h = if dir == 0 { self.hx } else { self.hy };
        (0..self.len())
            .map(|k| {
                let at = |s| f[self.shifted(k, dir, s)];
                (-at(2) + 8.0 * at(1) - 8.0 * at(-1) + at(-2)) / (12.0 * h)
            })
            .collect()
    }

    /// `∂_a ∂_b f`.
    pub fn diff2(&self, f: &[f64], a: usize, b: usize) -> Grid {
        if a >= 2 || b >= 2 {
            return vec![0.0; self.len()];
        }
        if a != b {
            return self.diff(&self.diff(f, a), b);
        }
        let h = if a == 0 { self.hx } else { self.hy };
        (0..self.len())
            .map(|k| {
                let at = |s| f[self.shifted(k, a, s)];
                (-at(2) + 16.0 * at(1) - 30.0 * at(0) + 16.0 * at(-1) - at(-2)) / (12.0 * h * h)
            })
            .collect()
    }

    /// Periodic translation by whole nodes.
    pub fn translate(&self, f: &[f64], di: isize, dj: isize) -> Grid {
        (0..self.len()).map(|k| f[self.shifted(self.shifted(k, 0, -di), 1, -dj)]).collect()
    }
}

pub fn max_norm(f: &[f64]) -> f64 {
    math::max_abs(f)
}

fn sym_get(s: &Sym2, a: usize, b: usize, k: usize) -> f64 {
    s[a + b][k]
}

fn mat2(s: &Sym2, k: usize) -> [[f64; 2]; 2] {
    [[s[0][k], s[1][k]], [s[1][k], s[2][k]]]
}

fn inv2(m: &[[f64; 2]; 2]) -> ([[f64; 2]; 2], f64) {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    ([[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]], det)
}

/// Kaluza-Klein pair `(𝒜_a, 𝓔^a)`.
#[derive(Clone, Debug, PartialEq)]
pub struct KaluzaKlein {
    pub a: [Grid; 2],
    pub e: [Grid; 2],
}

/// Canonical data on the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CanonicalState {
    pub grid: Grid2D,
    pub q: Sym2,
    pub pi: Sym2,
    pub gamma: Grid,
    pub p_gamma: Grid,
    pub omega: Grid,
    pub p_omega: Grid,
    /// Kaluza-Klein variables, when the state is given on that phase space.
    pub kk: Option<KaluzaKlein>,
}

/// Lapse, shift, mean curvature and conformal factor.
#[derive(Clone, Debug, PartialEq)]
pub struct GaugeData {
    pub lapse: Grid,
    pub shift: [Grid; 2],
    pub tau: Grid,
    pub nu: Grid,
}

impl GaugeData {
    /// `N = 1`, zero shift, `τ = ν = 0`.
    pub fn unit(grid: &Grid2D) -> GaugeData {
        GaugeData {
            lapse: grid.constant(1.0),
            shift: [grid.constant(0.0), grid.constant(0.0)],
            tau: grid.constant(0.0),
            nu: grid.constant(0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lapse.iter().any(|n| !(*n > 0.0)) {
            return Err(invalid("lapse must be positive"));
        }
        Ok(())
    }
}

/// Time derivatives of the six canonical fields.
#[derive(Clone, Debug, PartialEq)]
pub struct StateRates {
    pub q: Sym2,
    pub pi: Sym2,
    pub gamma: Grid,
    pub p_gamma: Grid,
    pub omega: Grid,
    pub p_omega: Grid,
}

impl StateRates {
    pub fn max_abs(&self) -> f64 {
        let mut m: f64 = 0.0;
        for g in self.q.iter().chain(self.pi.iter()).chain([&self.gamma, &self.p_gamma, &self.omega, &self.p_omega]) {
            m = m.max(max_norm(g));
        }
        m
    }
}

fn axpy(a: &[f64], s: f64, b: &[f64]) -> Grid {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

impl CanonicalState {
    /// Flat torus data: `q = δ`, all other fields zero.
    pub fn flat(grid: Grid2D) -> CanonicalState {
        let z = grid.constant(0.0);
        CanonicalState {
            grid,
            q: [grid.constant(1.0), z.clone(), grid.constant(1.0)],
            pi: [z.clone(), z.clone(), z.clone()],
            gamma: z.clone(),
            p_gamma: z.clone(),
            omega: z.clone(),
            p_omega: z,
            kk: None,
        }
    }

    /// Checks grid sizes and positive definiteness of `q`.
    pub fn validate(&self) -> Result<()> {
        let n = self.grid.len();
        let sizes = self.q.iter().chain(self.pi.iter()).chain([&self.gamma, &self.p_gamma, &self.omega, &self.p_omega]);
        for g in sizes {
            if g.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: g.len() });
            }
        }
        if let Some(kk) = &self.kk {
            for g in kk.a.iter().chain(kk.e.iter()) {
                if g.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, got: g.len() });
                }
            }
        }
        for k in 0..n {
            let m = mat2(&self.q, k);
            if !(m[0][0] > 0.0 && m[0][0] * m[1][1] - m[0][1] * m[0][1] > 0.0) {
                return Err(Error::NotPositiveDefinite);
            }
        }
        Ok(())
    }

    /// `μ_q = √det q`.
    pub fn volume(&self) -> Grid {
        (0..self.grid.len()).map(|k| math::sqrt(inv2(&mat2(&self.q, k)).1)).collect()
    }

    /// De-densitized momenta `(π^{ab}/μ_q, p_γ/μ_q, p_ω/μ_q)`.
    pub fn dedensitized(&self) -> (Sym2, Grid, Grid) {
        let mu = self.volume();
        let div = |g: &Grid| g.iter().zip(&mu).map(|(a, m)| a / m).collect::<Grid>();
        ([div(&self.pi[0]), div(&self.pi[1]), div(&self.pi[2])], div(&self.p_gamma), div(&self.p_omega))
    }

    /// Mean curvature `τ = tr_q π / μ_q`.
    pub fn mean_curvature(&self) -> Grid {
        let mu = self.volume();
        (0..self.grid.len()).map(|k| trace(&self.q, &self.pi, k) / mu[k]).collect()
    }

    /// `self + s · rates`; the Kaluza-Klein pair is carried along unchanged.
    pub fn advanced(&self, s: f64, r: &StateRates) -> CanonicalState {
        CanonicalState {
            grid: self.grid,
            q: [axpy(&self.q[0], s, &r.q[0]), axpy(&self.q[1], s, &r.q[1]), axpy(&self.q[2], s, &r.q[2])],
            pi: [axpy(&self.pi[0], s, &r.pi[0]), axpy(&self.pi[1], s, &r.pi[1]), axpy(&self.pi[2], s, &r.pi[2])],
            gamma: axpy(&self.gamma, s, &r.gamma),
            p_gamma: axpy(&self.p_gamma, s, &r.p_gamma),
            omega: axpy(&self.omega, s, &r.omega),
            p_omega: axpy(&self.p_omega, s, &r.p_omega),
            kk: self.kk.clone(),
        }
    }

    /// Periodic translation of every field.
    pub fn translated(&self, di: isize, dj: isize) -> CanonicalState {
        let t = |g: &Grid| self.grid.translate(g, di, dj);
        CanonicalState {
            grid: self.grid,
            q: [t(&self.q[0]), t(&self.q[1]), t(&self.q[2])],
            pi: [t(&self.pi[0]), t(&self.pi[1]), t(&self.pi[2])],
            gamma: t(&self.gamma),
            p_gamma: t(&self.p_gamma),
            omega: t(&self.omega),
            p_omega: t(&self.p_omega),
            kk: self.kk.as_ref().map(|kk| KaluzaKlein { a: [t(&kk.a[0]), t(&kk.a[1])], e: [t(&kk.e[0]), t(&kk.e[1])] }),
        }
    }

    fn is_finite(&self) -> bool {
        self.q.iter().chain(self.pi.iter()).chain([&self.gamma, &self.p_gamma, &self.omega, &self.p_omega]).all(|g| g.iter().all(|v| v.is_finite()))
    }

    /// Kaluza-Klein field strength `𝓕_{12} = ∂_1𝒜_2 − ∂_2𝒜_1`.
    pub fn field_strength(&self) -> Option<Grid> {
        self.kk.as_ref().map(|kk| {
            let (d1a2, d2a1) = (self.grid.diff(&kk.a[1], 0), self.grid.diff(&kk.a[0], 1));
            d1a2.iter().zip(&d2a1).map(|(a, b)| a - b).collect()
        })
    }
}

fn trace(q: &Sym2, pi: &Sym2, k: usize) -> f64 {
    q[0][k] * pi[0][k] + 2.0 * q[1][k] * pi[1][k] + q[2][k] * pi[2][k]
}

/// `‖π‖²_q − (tr π)²`.
fn dewitt(q: &Sym2, pi: &Sym2, k: usize) -> f64 {
    let (qm, pm) = (mat2(q, k), mat2(pi, k));
    let mut s = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                for d in 0..2 {
                    s += qm[a][c] * qm[b][d] * pm[a][b] * pm[c][d];
                }
            }
        }
    }
    let t = trace(q, pi, k);
    s - t * t
}

/// Metric geometry of an `n`-dimensional metric on the grid (`n ∈ {2, 3}`;
/// nothing depends on the third coordinate).
struct Geometry {
    n: usize,
    g: Vec<Grid>,
    inv: Vec<Grid>,
    mu: Grid,
    /// `Γ^a_{bc}` at `i3(n, a, b, c)`.
    gam: Vec<Grid>,
}

impl Geometry {
    fn new(grid: &Grid2D, g: Vec<Grid>, n: usize) -> Result<Geometry> {
        let len = grid.len();
        let mut inv = vec![vec![0.0; len]; n * n];
        let mut mu = vec![0.0; len];
        for k in 0..len {
            let m: Vec<f64> = (0..n * n).map(|c| g[c][k]).collect();
            let det = linalg::determinant(&m, n);
            if !(det > 0.0) {
                return Err(Error::NotPositiveDefinite);
            }
            let mi = linalg::inverse(&m, n)?;
            for c in 0..n * n {
                inv[c][k] = mi[c];
            }
            mu[k] = math::sqrt(det);
        }
        let dg: Vec<Grid> = (0..n * n * n).map(|idx| {
            let (kd, ab) = (idx / (n * n), idx % (n * n));
            grid.diff(&g[ab], kd)
        })
        .collect();
        let d = |kd: usize, a: usize, b: usize, node: usize| dg[kd * n * n + a * n + b][node];
        let mut gam = vec![vec![0.0; len]; n * n * n];
        for node in 0..len {
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        let mut s = 0.0;
                        for e in 0..n {
                            s += inv[a * n + e][node] * (d(b, e, c, node) + d(c, e, b, node) - d(e, b, c, node));
                        }
                        gam[i3(n, a, b, c)][node] = 0.5 * s;
                    }
                }
            }
        }
        Ok(Geometry { n, g, inv, mu, gam })
    }

    fn ricci(&self, grid: &Grid2D) -> Vec<Grid> {
        let n = self.n;
        let len = grid.len();
        let dgam: Vec<Vec<Grid>> = (0..2).map(|k| self.gam.iter().map(|g| grid.diff(g, k)).collect()).collect();
        let dg = |k: usize, idx: usize, node: usize| if k < 2 { dgam[k][idx][node] } else { 0.0 };
        let mut ric = vec![vec![0.0; len]; n * n];
        for node in 0..len {
            let gm = |a: usize, b: usize, c: usize| self.gam[i3(n, a, b, c)][node];
            for b in 0..n {
                for d in 0..n {
                    let mut s = 0.0;
                    for a in 0..n {
                        s += dg(a, i3(n, a, b, d), node) - dg(d, i3(n, a, a, b), node);
                        for e in 0..n {
                            s += gm(a, a, e) * gm(e, b, d) - gm(a, d, e) * gm(e, a, b);
                        }
                    }
                    ric[b * n + d][node] = s;
                }
            }
        }
        ric
    }

    fn scalar(&self, ric: &[Grid]) -> Grid {
        let n = self.n;
        (0..self.mu.len()).map(|k| (0..n * n).map(|c| self.inv[c][k] * ric[c][k]).sum()).collect()
    }

    /// `∇_a ∇_b f` (all lower).
    fn hessian(&self, grid: &Grid2D, f: &[f64]) -> Vec<Grid> {
        let n = self.n;
        let df: Vec<Grid> = (0..n).map(|a| grid.diff(f, a)).collect();
        let mut h = vec![vec![0.0; f.len()]; n * n];
        for a in 0..n {
            for b in a..n {
                let d2 = grid.diff2(f, a, b);
                let v: Grid = (0..f.len())
                    .map(|k| d2[k] - (0..n).map(|c| self.gam[i3(n, c, a, b)][k] * df[c][k]).sum::<f64>())
                    .collect();
                h[b * n + a] = v.clone();
                h[a * n + b] = v;
            }
        }
        h
    }

    /// `g^{ab} ∂_a f ∂_b h`.
    fn dot(&self, grid: &Grid2D, f: &[f64], h: &[f64]) -> Grid {
        let n = self.n;
        let df: Vec<Grid> = (0..n).map(|a| grid.diff(f, a)).collect();
        let dh: Vec<Grid> = (0..n).map(|a| grid.diff(h, a)).collect();
        (0..f.len())
            .map(|k| {
                let mut s = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        s += self.inv[a * n + b][k] * df[a][k] * dh[b][k];
                    }
                }
                s
            })
            .collect()
    }
}

fn sym_full(s: &Sym2) -> Vec<Grid> {
    vec![s[0].clone(), s[1].clone(), s[1].clone(), s[2].clone()]
}

fn geometry(state: &CanonicalState) -> Result<Geometry> {
    state.validate()?;
    Geometry::new(&state.grid, sym_full(&state.q), 2)
}

/// Hamiltonian constraint on the wave-map phase space:
///
/// `H = μ_q⁻¹(‖π‖²_q − (tr π)² + ⅛p_γ² + ½e^{4γ}p_ω²)
///    + μ_q(−R_q + 2|∂γ|²_q + ½e^{−4γ}|∂ω|²_q)`.
pub fn hamiltonian_constraint(state: &CanonicalState) -> Result<Grid> {
    let geo = geometry(state)?;
    let r = geo.scalar(&geo.ricci(&state.grid));
    let dgg = geo.dot(&state.grid, &state.gamma, &state.gamma);
    let dww = geo.dot(&state.grid, &state.omega, &state.omega);
    Ok((0..state.grid.len())
        .map(|k| {
            let (g, mu) = (state.gamma[k], geo.mu[k]);
            let kin = dewitt(&state.q, &state.pi, k)
                + 0.125 * state.p_gamma[k] * state.p_gamma[k]
                + 0.5 * math::exp(4.0 * g) * state.p_omega[k] * state.p_omega[k];
            kin / mu + mu * (-r[k] + 2.0 * dgg[k] + 0.5 * math::exp(-4.0 * g) * dww[k])
        })
        .collect())
}

/// Hamiltonian constraint on the Kaluza-Klein phase space:
///
/// `H = μ_q⁻¹(‖π‖²_q − (tr π)² + ⅛p_γ² + ½e^{−4γ}q_{ab}𝓔^a𝓔^b)
///    + μ_q(−R_q + 2|∂γ|²_q + ¼e^{4γ}𝓕_{ab}𝓕^{ab})`.
pub fn hamiltonian_constraint_kk(state: &CanonicalState) -> Result<Grid> {
    let kk = state.kk.as_ref().ok_or_else(|| invalid("state carries no Kaluza-Klein variables"))?;
    let geo = geometry(state)?;
    let r = geo.scalar(&geo.ricci(&state.grid));
    let dgg = geo.dot(&state.grid, &state.gamma, &state.gamma);
    let f = state.field_strength().expect("kk present");
    Ok((0..state.grid.len())
        .map(|k| {
            let (g, mu) = (state.gamma[k], geo.mu[k]);
            let e = [kk.e[0][k], kk.e[1][k]];
            let qee: f64 = (0..2).map(|a| (0..2).map(|b| sym_get(&state.q, a, b, k) * e[a] * e[b]).sum::<f64>()).sum();
            let kin = dewitt(&state.q, &state.pi, k) + 0.125 * state.p_gamma[k] * state.p_gamma[k] + 0.5 * math::exp(-4.0 * g) * qee;
            // 𝓕_{ab}𝓕^{ab} = 2𝓕_{12}²/det q
            let fsq = 2.0 * f[k] * f[k] / (mu * mu);
            kin / mu + mu * (-r[k] + 2.0 * dgg[k] + 0.25 * math::exp(4.0 * g) * fsq)
        })
        .collect())
}

/// Momentum constraint in both phase-space forms.
#[derive(Clone, Debug, PartialEq)]
pub struct Momentum {
    /// `−2∇_bπ^b_a + p_γ∂_aγ + p_ω∂_aω`.
    pub wm: [Grid; 2],
    /// `−2∇_bπ^b_a + p_γ∂_aγ + 𝓔^b𝓕_{ab}`, when the state carries `(𝒜, 𝓔)`.
    pub kk: Option<[Grid; 2]>,
}

/// `∇_b π^b_a = q_{ac}∂_bπ^{bc} + π^{bc}∂_b q_{ac} − ½π^{bc}∂_a q_{bc}` (weight-one density).
fn divergence(state: &CanonicalState) -> [Grid; 2] {
    let grid = &state.grid;
    let dpi: Vec<Vec<Grid>> = (0..2).map(|b| state.pi.iter().map(|p| grid.diff(p, b)).collect()).collect();
    let dq: Vec<Vec<Grid>> = (0..2).map(|a| state.q.iter().map(|p| grid.diff(p, a)).collect()).collect();
    let mut out = [vec![0.0; grid.len()], vec![0.0; grid.len()]];
    for (a, o) in out.iter_mut().enumerate() {
        for (k, v) in o.iter_mut().enumerate() {
            let mut s = 0.0;
            for b in 0..2 {
                for c in 0..2 {
                    s += sym_get(&state.q, a, c, k) * dpi[b][b + c][k];
                    s += sym_get(&state.pi, b, c, k) * (dq[b][a + c][k] - 0.5 * dq[a][b + c][k]);
                }
            }
            *v = s;
        }
    }
    out
}

pub fn momentum_constraint(state: &CanonicalState) -> Result<Momentum> {
    state.validate()?;
    let grid = &state.grid;
    let div = divergence(state);
    let dg = [grid.diff(&state.gamma, 0), grid.diff(&state.gamma, 1)];
    let dw = [grid.diff(&state.omega, 0), grid.diff(&state.omega, 1)];
    let base = |a: usize| -> Grid { (0..grid.len()).map(|k| -2.0 * div[a][k] + state.p_gamma[k] * dg[a][k]).collect() };
    let wm = [0, 1].map(|a| base(a).iter().enumerate().map(|(k, v)| v + state.p_omega[k] * dw[a][k]).collect());
    let kk = state.kk.as_ref().map(|kk| {
        let f = state.field_strength().expect("kk present");
        // 𝓔^b𝓕_{ab}: a = 1 gives 𝓔²𝓕_{12}, a = 2 gives −𝓔¹𝓕_{12}
        [0, 1].map(|a| {
            base(a)
                .iter()
                .enumerate()
                .map(|(k, v)| v + if a == 0 { kk.e[1][k] * f[k] } else { -kk.e[0][k] * f[k] })
                .collect()
        })
    });
    Ok(Momentum { wm, kk })
}

/// Right-hand sides of the reduced Einstein–wave-map evolution:
///
/// * `∂_tγ = ¼Nμ⁻¹p_γ + 𝓛_Nγ`
/// * `∂_tp_γ = 4∂_b(Nμq^{ab}∂_aγ) − 2Nμ⁻¹e^{4γ}p_ω² + 2Nμe^{−4γ}|∂ω|² + 𝓛_Np_γ`
/// * `∂_tω = Nμ⁻¹e^{4γ}p_ω + 𝓛_Nω`
/// * `∂_tp_ω = ∂_b(Nμe^{−4γ}q^{ab}∂_aω) + 𝓛_Np_ω`
/// * `∂_tq_{ab} = 2Nμ⁻¹(π_{ab} − q_{ab} tr π) + (𝓛_Nq)_{ab}`
/// * `∂_tπ^{ab} = −2Nμ⁻¹(π^{ac}π_c{}^b − tr π π^{ab}) + ½Nμ⁻¹q^{ab}(‖π‖² − (tr π)² + ⅛p_γ² + ½e^{4γ}p_ω²)
///   + μ(∇^a∇^bN − q^{ab}ΔN) + Nμ(q^{ac}q^{bd} − ½q^{ab}q^{cd})(2∂_cγ∂_dγ + ½e^{−4γ}∂_cω∂_dω) + (𝓛_Nπ)^{ab}`
pub fn evolution_rhs(state: &CanonicalState, gauge: &GaugeData) -> Result<StateRates> {
    gauge.validate()?;
    let geo = geometry(state)?;
    let grid = &state.grid;
    let len = grid.len();
    let (lapse, shift) = (&gauge.lapse, &gauge.shift);
    let d = |f: &[f64], a: usize| grid.diff(f, a);
    let dg = [d(&state.gamma, 0), d(&state.gamma, 1)];
    let dw = [d(&state.omega, 0), d(&state.omega, 1)];
    let dn = [[d(&shift[0], 0), d(&shift[0], 1)], [d(&shift[1], 0), d(&shift[1], 1)]];
    let qi = |a: usize, b: usize, k: usize| geo.inv[a * 2 + b][k];
    let transport = |f: &[f64]| -> Grid { (0..len).map(|k| shift[0][k] * d(f, 0)[k] + shift[1][k] * d(f, 1)[k]).collect() };
    let transport_density = |f: &[f64]| -> Grid {
        let fx: Grid = (0..len).map(|k| shift[0][k] * f[k]).collect();
        let fy: Grid = (0..len).map(|k| shift[1][k] * f[k]).collect();
        let (a, b) = (d(&fx, 0), d(&fy, 1));
        (0..len).map(|k| a[k] + b[k]).collect()
    };
    let flux_div = |coef: &dyn Fn(usize) -> f64, df: &[Grid; 2]| -> Grid {
        let fl: Vec<Grid> = (0..2)
            .map(|b| (0..len).map(|k| coef(k) * (0..2).map(|a| qi(a, b, k) * df[a][k]).sum::<f64>()).collect())
            .collect();
        let (x, y) = (d(&fl[0], 0), d(&fl[1], 1));
        (0..len).map(|k| x[k] + y[k]).collect()
    };
    let mu = &geo.mu;
    let e4 = |k: usize| math::exp(4.0 * state.gamma[k]);
    let ldg = transport(&state.gamma);
    let ldw = transport(&state.omega);
    let gamma: Grid = (0..len).map(|k| 0.25 * lapse[k] / mu[k] * state.p_gamma[k] + ldg[k]).collect();
    let omega: Grid = (0..len).map(|k| lapse[k] / mu[k] * e4(k) * state.p_omega[k] + ldw[k]).collect();
    let div_g = flux_div(&|k| lapse[k] * mu[k], &dg);
    let div_w = flux_div(&|k| lapse[k] * mu[k] / e4(k), &dw);
    let dww = geo.dot(grid, &state.omega, &state.omega);
    let lpg = transport_density(&state.p_gamma);
    let lpw = transport_density(&state.p_omega);
    let p_gamma: Grid = (0..len)
        .map(|k| {
            4.0 * div_g[k] - 2.0 * lapse[k] / mu[k] * e4(k) * state.p_omega[k] * state.p_omega[k]
                + 2.0 * lapse[k] * mu[k] / e4(k) * dww[k]
                + lpg[k]
        })
        .collect();
    let p_omega: Grid = (0..len).map(|k| div_w[k] + lpw[k]).collect();

    // metric
    let dq: Vec<Grid> = state.q.iter().map(|c| d(c, 0)).chain(state.q.iter().map(|c| d(c, 1))).collect();
    let dqc = |c: usize, comp: usize, k: usize| dq[c * 3 + comp][k];
    let mut q_rate: Sym2 = [vec![0.0; len], vec![0.0; len], vec![0.0; len]];
    for (comp, (a, b)) in [(0usize, 0usize), (0, 1), (1, 1)].into_iter().enumerate() {
        for k in 0..len {
            let (qm, pm) = (mat2(&state.q, k), mat2(&state.pi, k));
            let tr = trace(&state.q, &state.pi, k);
            let mut pl = 0.0;
            for c in 0..2 {
                for e in 0..2 {
                    pl += qm[a][c] * qm[b][e] * pm[c][e];
                }
            }
            let mut lie = shift[0][k] * dqc(0, comp, k) + shift[1][k] * dqc(1, comp, k);
            for c in 0..2 {
                lie += qm[c][b] * dn[c][a][k] + qm[a][c] * dn[c][b][k];
            }
            q_rate[comp][k] = 2.0 * lapse[k] / mu[k] * (pl - qm[a][b] * tr) + lie;
        }
    }

    // momentum
    let hess = geo.hessian(grid, lapse);
    let npi: Vec<Vec<Grid>> = (0..2)
        .map(|c| state.pi.iter().map(|p| (0..len).map(|k| shift[c][k] * p[k]).collect()).collect())
        .collect();
    let mut pi_rate: Sym2 = [vec![0.0; len], vec![0.0; len], vec![0.0; len]];
    for (comp, (a, b)) in [(0usize, 0usize), (0, 1), (1, 1)].into_iter().enumerate() {
        let dnpi = [d(&npi[0][comp], 0), d(&npi[1][comp], 1)];
        for k in 0..len {
            let (qm, pm) = (mat2(&state.q, k), mat2(&state.pi, k));
            let (qinv, _) = inv2(&qm);
            let tr = trace(&state.q, &state.pi, k);
            let (n, m) = (lapse[k], mu[k]);
            // π^{ac} q_{cd} π^{db}
            let mut ppq = 0.0;
            for c in 0..2 {
                for e in 0..2 {
                    ppq += pm[a][c] * qm[c][e] * pm[e][b];
                }
            }
            let kin = dewitt(&state.q, &state.pi, k)
                + 0.125 * state.p_gamma[k] * state.p_gamma[k]
                + 0.5 * e4(k) * state.p_omega[k] * state.p_omega[k];
            let mut hup = 0.0;
            let mut lap = 0.0;
            for c in 0..2 {
                for e in 0..2 {
                    hup += qinv[a][c] * qinv[b][e] * hess[c * 2 + e][k];
                    lap += qinv[c][e] * hess[c * 2 + e][k];
                }
            }
            let s = |c: usize, e: usize| 2.0 * dg[c][k] * dg[e][k] + 0.5 / e4(k) * dw[c][k] * dw[e][k];
            let mut src = 0.0;
            for c in 0..2 {
                for e in 0..2 {
                    src += (qinv[a][c] * qinv[b][e] - 0.5 * qinv[a][b] * qinv[c][e]) * s(c, e);
                }
            }
            let mut lie = dnpi[0][k] + dnpi[1][k];
            for c in 0..2 {
                lie -= pm[c][b] * dn[a][c][k] + pm[a][c] * dn[b][c][k];
            }
            pi_rate[comp][k] = -2.0 * n / m * (ppq - tr * pm[a][b]) + 0.5 * n / m * qinv[a][b] * kin + m * (hup - qinv[a][b] * lap)
                + n * m * src
                + lie;
        }
    }
    let _ = qi;
    Ok(StateRates { q: q_rate, pi: pi_rate, gamma, p_gamma, omega, p_omega })
}

fn finite(s: CanonicalState) -> Result<CanonicalState> {
    if s.is_finite() {
        Ok(s)
    } else {
        Err(Error::NonFinite("time step"))
    }
}

/// Forward-Euler step with a frozen gauge.
pub fn euler_step(state: &CanonicalState, gauge: &GaugeData, dt: f64) -> Result<CanonicalState> {
    finite(state.advanced(dt, &evolution_rhs(state, gauge)?))
}

/// Classical fourth-order Runge-Kutta step with a frozen gauge.
pub fn rk4_step(state: &CanonicalState, gauge: &GaugeData, dt: f64) -> Result<CanonicalState> {
    let k1 = evolution_rhs(state, gauge)?;
    let k2 = evolution_rhs(&finite(state.advanced(0.5 * dt, &k1))?, gauge)?;
    let k3 = evolution_rhs(&finite(state.advanced(0.5 * dt, &k2))?, gauge)?;
    let k4 = evolution_rhs(&finite(state.advanced(dt, &k3))?, gauge)?;
    let s = state.advanced(dt / 6.0, &k1).advanced(dt / 3.0, &k2).advanced(dt / 3.0, &k3).advanced(dt / 6.0, &k4);
    finite(s)
}

/// Numeric and predicted time derivatives of the constraints.
#[derive(Clone, Debug, PartialEq)]
pub struct PropagationCheck {
    /// `(H(t + dt) − H(t − dt)) / 2dt` along the RK4 flow.
    pub lhs_h: Grid,
    /// `∂_a(N^aH) + q^{ab}∂_bN H_a + ∂_b(Nq^{ab}H_a)`.
    pub rhs_h: Grid,
    pub lhs_m: [Grid; 2],
    /// `∂_b(N^bH_a) + ∂_aN^b H_b + H∂_aN`.
    pub rhs_m: [Grid; 2],
    /// Largest pointwise mismatch over all components.
    pub mismatch: f64,
    /// Largest `|rhs|`, for relative comparisons.
    pub scale: f64,
}

/// Predicted constraint rates on one slice.
pub fn constraint_rates(state: &CanonicalState, gauge: &GaugeData) -> Result<(Grid, [Grid; 2])> {
    let grid = &state.grid;
    let len = grid.len();
    let h = hamiltonian_constraint(state)?;
    let m = momentum_constraint(state)?.wm;
    let (n, sh) = (&gauge.lapse, &gauge.shift);
    let dn = [grid.diff(n, 0), grid.diff(n, 1)];
    let geo = geometry(state)?;
    let qi = |a: usize, b: usize, k: usize| geo.inv[a * 2 + b][k];
    let prod = |f: &[f64], g: &[f64]| -> Grid { f.iter().zip(g).map(|(a, b)| a * b).collect() };
    let div = |fx: &[f64], fy: &[f64]| -> Grid {
        let (a, b) = (grid.diff(fx, 0), grid.diff(fy, 1));
        a.iter().zip(&b).map(|(x, y)| x + y).collect()
    };
    let transport = div(&prod(&sh[0], &h), &prod(&sh[1], &h));
    let flux: Vec<Grid> = (0..2).map(|b| (0..len).map(|k| n[k] * (0..2).map(|a| qi(a, b, k) * m[a][k]).sum::<f64>()).collect()).collect();
    let fdiv = div(&flux[0], &flux[1]);
    let rhs_h: Grid = (0..len)
        .map(|k| {
            let grad: f64 = (0..2).map(|a| (0..2).map(|b| qi(a, b, k) * dn[b][k] * m[a][k]).sum::<f64>()).sum();
            transport[k] + grad + fdiv[k]
        })
        .collect();
    let dsh = [[grid.diff(&sh[0], 0), grid.diff(&sh[0], 1)], [grid.diff(&sh[1], 0), grid.diff(&sh[1], 1)]];
    let rhs_m = [0, 1].map(|a| {
        let t = div(&prod(&sh[0], &m[a]), &prod(&sh[1], &m[a]));
        (0..len).map(|k| t[k] + dsh[0][a][k] * m[0][k] + dsh[1][a][k] * m[1][k] + h[k] * dn[a][k]).collect()
    });
    Ok((rhs_h, rhs_m))
}

/// Compares the constraint rates along the evolution with their predicted
/// values; the numeric side uses a centered difference of two RK4 steps.
pub fn constraint_propagation_check(state: &CanonicalState, gauge: &GaugeData, dt: f64) -> Result<PropagationCheck> {
    if !(dt > 0.0) {
        return Err(invalid("dt must be positive"));
    }
    let fwd = rk4_step(state, gauge, dt)?;
    let bwd = rk4_step(state, gauge, -dt)?;
    let (hf, hb) = (hamiltonian_constraint(&fwd)?, hamiltonian_constraint(&bwd)?);
    let (mf, mb) = (momentum_constraint(&fwd)?.wm, momentum_constraint(&bwd)?.wm);
    let rate = |f: &[f64], b: &[f64]| -> Grid { f.iter().zip(b).map(|(x, y)| (x - y) / (2.0 * dt)).collect() };
    let lhs_h = rate(&hf, &hb);
    let lhs_m = [rate(&mf[0], &mb[0]), rate(&mf[1], &mb[1])];
    let (rhs_h, rhs_m) = constraint_rates(state, gauge)?;
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| math::abs(x - y)).fold(0.0, f64::max);
    let mismatch = diff(&lhs_h, &rhs_h).max(diff(&lhs_m[0], &rhs_m[0])).max(diff(&lhs_m[1], &rhs_m[1]));
    let scale = max_norm(&rhs_h).max(max_norm(&rhs_m[0])).max(max_norm(&rhs_m[1]));
    if !mismatch.is_finite() {
        return Err(Error::NonFinite("constraint propagation"));
    }
    Ok(PropagationCheck { lhs_h, rhs_h, lhs_m, rhs_m, mismatch, scale })
}

/// Induced canonical data of a Kasner slice at time `t` (homogeneous; `ω = p_ω = 0`)
/// with the lapse `N = e^γ` and zero shift.
pub fn kasner_slice(grid: Grid2D, p: [f64; 3], t: f64) -> Result<(CanonicalState, GaugeData)> {
    if !(t > 0.0) {
        return Err(invalid("Kasner slices need t > 0"));
    }
    let g = p[2] * math::ln(t);
    let q = [math::powf(t, 2.0 * (p[0] + p[2])), math::powf(t, 2.0 * (p[1] + p[2]))];
    let mut s = CanonicalState::flat(grid);
    s.q = [grid.constant(q[0]), grid.constant(0.0), grid.constant(q[1])];
    s.pi = [grid.constant((p[0] - 1.0) / q[0]), grid.constant(0.0), grid.constant((p[1] - 1.0) / q[1])];
    s.gamma = grid.constant(g);
    s.p_gamma = grid.constant(4.0 * p[2]);
    let mut gauge = GaugeData::unit(&grid);
    gauge.lapse = grid.constant(math::exp(g));
    gauge.tau = s.mean_curvature();
    Ok((s, gauge))
}

/// Induced reduced data on the slice `x⁰ = t0` of a four-dimensional coframe
/// whose last coordinate is the symmetry direction; grid node `(x, y)` maps to
/// `(t0, origin + (x, y), fiber)`.
///
/// The state carries the Kaluza-Klein pair; `ω` is left at zero and `p_ω`
/// is set to `−𝓕_{12}`, the value matching `𝓔^a = ε^{ab}∂_bω` with `ε^{12} = 1`.
pub fn induced_state(coframe: &CoFrame, grid: Grid2D, t0: f64, origin: [f64; 2], fiber: f64) -> Result<(CanonicalState, GaugeData)> {
    if coframe.dim() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, got: coframe.dim() });
    }
    let metric = coframe.metric();
    let lay = JetLayout::new(4, 1);
    let len = grid.len();
    let mut s = CanonicalState::flat(grid);
    let mut gauge = GaugeData::unit(&grid);
    let mut kk = KaluzaKlein { a: [vec![0.0; len], vec![0.0; len]], e: [vec![0.0; len], vec![0.0; len]] };
    for k in 0..len {
        let [px, py] = grid.point(k);
        let x = [t0, origin[0] + px, origin[1] + py, fiber];
        let gj = metric.jets(&x, &lay)?;
        let g = linalg::values(&gj);
        let gi = linalg::inverse(&g, 4)?;
        let gam: Vec<f64> = christoffel_jets(&gj, 4)?.iter().map(Jet::value).collect();
        if !(gi[0] < 0.0) {
            return Err(invalid("slice is not spacelike"));
        }
        let lapse = 1.0 / math::sqrt(-gi[0]);
        let qb: Vec<f64> = (0..9).map(|c| g[(c / 3 + 1) * 4 + c % 3 + 1]).collect();
        let qbi = linalg::inverse(&qb, 3)?;
        let mub = math::sqrt(linalg::determinant(&qb, 3));
        let kl: Vec<f64> = (0..9).map(|c| lapse * gam[i3(4, 0, c / 3 + 1, c % 3 + 1)]).collect();
        let ku = linalg::matmul(&linalg::matmul(&qbi, &kl, 3), &qbi, 3);
        let trk: f64 = (0..9).map(|c| qbi[c] * kl[c]).sum();
        let pib: Vec<f64> = (0..9).map(|c| mub * (ku[c] - trk * qbi[c])).collect();
        let shift_low = [g[1], g[2], g[3]];
        let shift: Vec<f64> = (0..3).map(|i| (0..3).map(|j| qbi[i * 3 + j] * shift_low[j]).sum()).collect();

        let e2 = qb[8];
        let gamma = 0.5 * math::ln(e2);
        let a = [qb[2] / e2, qb[5] / e2];
        let q = |i: usize, j: usize| e2 * (qb[i * 3 + j] - e2 * a[i] * a[j]);
        let pab = |i: usize, j: usize| pib[i * 3 + j];
        let pi = |i: usize, j: usize| pab(i, j) / e2;
        let qm = [[q(0, 0), q(0, 1)], [q(1, 0), q(1, 1)]];
        let tr: f64 = (0..2).map(|i| (0..2).map(|j| qm[i][j] * pi(i, j)).sum::<f64>()).sum();
        let mut aa = 0.0;
        let mut a3 = 0.0;
        for i in 0..2 {
            a3 += pab(i, 2) * a[i];
            for j in 0..2 {
                aa += pab(i, j) * a[i] * a[j];
            }
        }
        s.q[0][k] = qm[0][0];
        s.q[1][k] = qm[0][1];
        s.q[2][k] = qm[1][1];
        s.pi[0][k] = pi(0, 0);
        s.pi[1][k] = pi(0, 1);
        s.pi[2][k] = pi(1, 1);
        s.gamma[k] = gamma;
        s.p_gamma[k] = -2.0 * tr + 2.0 * e2 * (aa + 2.0 * a3 + pab(2, 2));
        for i in 0..2 {
            kk.a[i][k] = a[i];
            kk.e[i][k] = 2.0 * e2 * ((0..2).map(|j| pab(i, j) * a[j]).sum::<f64>() + pab(i, 2));
            gauge.shift[i][k] = shift[i];
        }
        gauge.lapse[k] = math::exp(gamma) * lapse;
    }
    s.kk = Some(kk);
    s.p_omega = s.field_strength().expect("kk present").iter().map(|f| -f).collect();
    gauge.tau = s.mean_curvature();
    Ok((s, gauge))
}

/// Conformal-gauge diagnostics for `q = e^{2ν}h` with `h` flat.
#[derive(Clone, Debug, PartialEq)]
pub struct ConformalResiduals {
    /// The conformal Hamiltonian constraint including the constant `−2μ_h`.
    pub hamiltonian: Grid,
    /// The same without the constant; equals `H` when `τ = tr π/μ_q`.
    pub hamiltonian_flat: Grid,
    /// `∇^h_bϖ^b_a + ½μ_q∂_aτ − ½(p_γ∂_aγ + p_ω∂_aω)`, which equals `−½H_a`.
    pub momentum: [Grid; 2],
    /// `∂_tτ = −Δ_qN + Nμ_q⁻²(ϖ^a{}_bϖ^b{}_a + ⅛p_γ² + ½e^{4γ}p_ω²) + ½Nτ² + N^a∂_aτ`.
    pub dtau: Grid,
    /// `2N(π^{ab} − ½q^{ab} tr π) + μ_h CK(h, N⃗)^{ab}` as `(11, 12, 22)`.
    pub shift_residual: Sym2,
    /// `max |R_h|`.
    pub base_curvature: f64,
}

/// Largest accepted `|R_h|` for the conformal base metric.
pub const FLATNESS_TOLERANCE: f64 = 1e-6;

/// Conformal-gauge residuals with `h = e^{−2ν}q`, `ϖ^a_b = π^{ac}q_{cb} − ½δ^a_b tr π`.
pub fn conformal_gauge_residuals(state: &CanonicalState, gauge: &GaugeData) -> Result<ConformalResiduals> {
    gauge.validate()?;
    state.validate()?;
    let grid = &state.grid;
    let len = grid.len();
    let en: Grid = gauge.nu.iter().map(|v| math::exp(-2.0 * v)).collect();
    let h: Sym2 = [0, 1, 2].map(|c| (0..len).map(|k| en[k] * state.q[c][k]).collect());
    let hg = Geometry::new(grid, sym_full(&h), 2)?;
    let rh = hg.scalar(&hg.ricci(grid));
    let base_curvature = max_norm(&rh);
    if !(base_curvature <= FLATNESS_TOLERANCE) {
        return Err(Error::NotFlat(base_curvature));
    }
    let qg = geometry(state)?;
    let (nu, tau) = (&gauge.nu, &gauge.tau);
    let hinv = |a: usize, b: usize, k: usize| hg.inv[a * 2 + b][k];
    let dnu = [grid.diff(nu, 0), grid.diff(nu, 1)];
    let fl: Vec<Grid> = (0..2).map(|b| (0..len).map(|k| hg.mu[k] * (0..2).map(|a| hinv(a, b, k) * dnu[a][k]).sum::<f64>()).collect()).collect();
    let lapnu: Grid = {
        let (x, y) = (grid.diff(&fl[0], 0), grid.diff(&fl[1], 1));
        (0..len).map(|k| x[k] + y[k]).collect()
    };
    let dgg = hg.dot(grid, &state.gamma, &state.gamma);
    let dww = hg.dot(grid, &state.omega, &state.omega);
    // ϖ^a_b
    let varpi = |k: usize| -> [[f64; 2]; 2] {
        let (qm, pm) = (mat2(&state.q, k), mat2(&state.pi, k));
        let tr = trace(&state.q, &state.pi, k);
        let mut w = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                w[a][b] = (0..2).map(|c| pm[a][c] * qm[c][b]).sum::<f64>() - if a == b { 0.5 * tr } else { 0.0 };
            }
        }
        w
    };
    let ww = |k: usize| {
        let w = varpi(k);
        (0..2).map(|a| (0..2).map(|b| w[a][b] * w[b][a]).sum::<f64>()).sum::<f64>()
    };
    let e4 = |k: usize| math::exp(4.0 * state.gamma[k]);
    let mut hamiltonian = vec![0.0; len];
    let mut hamiltonian_flat = vec![0.0; len];
    for k in 0..len {
        let (muh, e2n) = (hg.mu[k], math::exp(2.0 * nu[k]));
        let kin = ww(k) + 0.125 * state.p_gamma[k] * state.p_gamma[k] + 0.5 * e4(k) * state.p_omega[k] * state.p_omega[k];
        let common = kin / (muh * e2n) - 0.5 * muh * e2n * tau[k] * tau[k] + 2.0 * lapnu[k];
        let grads = 2.0 * dgg[k] + 0.5 / e4(k) * dww[k];
        hamiltonian[k] = common - muh * (2.0 - grads);
        hamiltonian_flat[k] = common + muh * grads;
    }
    // momentum: ∇^h_b ϖ^b_a = ∂_bϖ^b_a − Γ(h)^c_{ba}ϖ^b_c
    let wcomp: Vec<Grid> = (0..4).map(|c| (0..len).map(|k| varpi(k)[c / 2][c % 2]).collect()).collect();
    let dtau = [grid.diff(tau, 0), grid.diff(tau, 1)];
    let dgam = [grid.diff(&state.gamma, 0), grid.diff(&state.gamma, 1)];
    let dom = [grid.diff(&state.omega, 0), grid.diff(&state.omega, 1)];
    let momentum = [0, 1].map(|a| {
        let (x, y) = (grid.diff(&wcomp[a], 0), grid.diff(&wcomp[2 + a], 1));
        (0..len)
            .map(|k| {
                let w = varpi(k);
                let mut s = x[k] + y[k];
                for b in 0..2 {
                    for c in 0..2 {
                        s -= hg.gam[i3(2, c, b, a)][k] * w[b][c];
                    }
                }
                s + 0.5 * qg.mu[k] * dtau[a][k] - 0.5 * (state.p_gamma[k] * dgam[a][k] + state.p_omega[k] * dom[a][k])
            })
            .collect()
    });
    // ∂_tτ
    let lapse = &gauge.lapse;
    let dn = [grid.diff(lapse, 0), grid.diff(lapse, 1)];
    let fl: Vec<Grid> = (0..2)
        .map(|b| (0..len).map(|k| qg.mu[k] * (0..2).map(|a| qg.inv[a * 2 + b][k] * dn[a][k]).sum::<f64>()).collect())
        .collect();
    let lapn: Grid = {
        let (x, y) = (grid.diff(&fl[0], 0), grid.diff(&fl[1], 1));
        (0..len).map(|k| (x[k] + y[k]) / qg.mu[k]).collect()
    };
    let dtau_rate: Grid = (0..len)
        .map(|k| {
            let m = qg.mu[k];
            let kin = ww(k) + 0.125 * state.p_gamma[k] * state.p_gamma[k] + 0.5 * e4(k) * state.p_omega[k] * state.p_omega[k];
            -lapn[k] + lapse[k] * (kin / (m * m) + 0.5 * tau[k] * tau[k]) + gauge.shift[0][k] * dtau[0][k] + gauge.shift[1][k] * dtau[1][k]
        })
        .collect();
    // shift equation
    let sh = &gauge.shift;
    let dsh: Vec<Vec<Grid>> = (0..2).map(|c| (0..2).map(|b| grid.diff(&sh[b], c)).collect()).collect();
    let cov = |c: usize, b: usize, k: usize| {
        dsh[c][b][k] + (0..2).map(|e| hg.gam[i3(2, b, c, e)][k] * sh[e][k]).sum::<f64>()
    };
    let shift_residual: Sym2 = [(0usize, 0usize), (0, 1), (1, 1)].map(|(a, b)| {
        (0..len)
            .map(|k| {
                let (qinv, _) = inv2(&mat2(&state.q, k));
                let tr = trace(&state.q, &state.pi, k);
                let div: f64 = (0..2).map(|c| cov(c, c, k)).sum();
                let mut ck = -hinv(a, b, k) * div;
                for c in 0..2 {
                    ck += hinv(a, c, k) * cov(c, b, k) + hinv(b, c, k) * cov(c, a, k);
                }
                2.0 * lapse[k] * (sym_get(&state.pi, a, b, k) - 0.5 * qinv[a][b] * tr) + hg.mu[k] * ck
            })
            .collect()
    });
    Ok(ConformalResiduals { hamiltonian, hamiltonian_flat, momentum, dtau: dtau_rate, shift_residual, base_curvature })
}

/// Conformal Killing operator of a constant flat metric `h` (row-major 2×2)
/// applied to the vector field `X` at a point:
/// `CK^{ab} = h^{ac}∂_cX^b + h^{bc}∂_cX^a − h^{ab}∂_cX^c`, as `(11, 12, 22)`.
pub fn conformal_killing(h: [f64; 4], x: &[FieldRef; 2], p: &[f64]) -> Result<[f64; 3]> {
    let (hi, det) = inv2(&[[h[0], h[1]], [h[2], h[3]]]);
    if !(det > 0.0) || h[1] != h[2] {
        return Err(Error::NotPositiveDefinite);
    }
    let lay = JetLayout::new(2, 1);
    let j = [x[0].jet(p, &lay)?, x[1].jet(p, &lay)?];
    let dx = |c: usize, b: usize| j[b].d1(c);
    let div = dx(0, 0) + dx(1, 1);
    Ok([(0usize, 0usize), (0, 1), (1, 1)].map(|(a, b)| {
        let mut s = -hi[a][b] * div;
        for c in 0..2 {
            s += hi[a][c] * dx(c, b) + hi[b][c] * dx(c, a);
        }
        s
    }))
}

/// Mixed components of the electric and magnetic Weyl densities.
#[derive(Clone, Debug, PartialEq)]
pub struct WeylADM {
    /// `𝓔^{ab}` as `(11, 12, 22)`.
    pub e_ab: Sym2,
    /// `𝓔_3{}^a`.
    pub e3a: [Grid; 2],
    pub e33: Grid,
    /// `𝓑^{ab}` row-major (not symmetric off the constraint surface).
    pub b_ab: [Grid; 4],
    /// `𝓑_3{}^a = ḡ_{3i}𝓑^{ia}`.
    pub b3a: [Grid; 2],
    /// `𝓑^a{}_3 = ḡ_{3j}𝓑^{aj}`.
    pub ba3: [Grid; 2],
    pub b33: Grid,
}

/// Lifted three-dimensional data `(q̄_{ij}, π̄^{ij})` on `(x¹, x², x³)`.
pub struct Lifted {
    pub qbar: Vec<Grid>,
    pub pibar: Vec<Grid>,
}

/// Rebuilds the spatial three-metric `q̄ = e^{−2γ}q + e^{2γ}(dx³ + 𝒜)²` and its
/// momentum from reduced data.
pub fn lift(state: &CanonicalState) -> Result<Lifted> {
    state.validate()?;
    let len = state.grid.len();
    if state.kk.is_none() && (max_norm(&state.omega) > 0.0 || max_norm(&state.p_omega) > 0.0) {
        return Err(invalid("twisted data need the Kaluza-Klein variables"));
    }
    let zero = [vec![0.0; len], vec![0.0; len]];
    let (a, e) = match &state.kk {
        Some(kk) => (&kk.a, &kk.e),
        None => (&zero, &zero),
    };
    let mut qbar = vec![vec![0.0; len]; 9];
    let mut pibar = vec![vec![0.0; len]; 9];
    for k in 0..len {
        let e2 = math::exp(2.0 * state.gamma[k]);
        let av = [a[0][k], a[1][k]];
        let qm = mat2(&state.q, k);
        let pm = mat2(&state.pi, k);
        let tr = trace(&state.q, &state.pi, k);
        let mut pb = [[0.0; 3]; 3];
        for i in 0..2 {
            for j in 0..2 {
                qbar[i * 3 + j][k] = qm[i][j] / e2 + e2 * av[i] * av[j];
                pb[i][j] = e2 * pm[i][j];
            }
            qbar[i * 3 + 2][k] = e2 * av[i];
            qbar[6 + i][k] = e2 * av[i];
        }
        qbar[8][k] = e2;
        for i in 0..2 {
            pb[i][2] = 0.5 / e2 * e[i][k] - (0..2).map(|j| pb[i][j] * av[j]).sum::<f64>();
            pb[2][i] = pb[i][2];
        }
        let mut aa = 0.0;
        let mut a3 = 0.0;
        for i in 0..2 {
            a3 += pb[i][2] * av[i];
            for j in 0..2 {
                aa += pb[i][j] * av[i] * av[j];
            }
        }
        pb[2][2] = 0.5 / e2 * (state.p_gamma[k] + 2.0 * tr) - aa - 2.0 * a3;
        for i in 0..3 {
            for j in 0..3 {
                pibar[i * 3 + j][k] = pb[i][j];
            }
        }
    }
    Ok(Lifted { qbar, pibar })
}

/// Electric and magnetic Weyl densities of the lifted data,
///
/// `𝓔^{ij} = μ̄ Ric(q̄)^{ij} − μ̄⁻¹(π̄^i{}_ℓπ̄^{ℓj} − ½π̄^{ij} tr π̄)`,
/// `𝓑^{ij} = ε^{mℓj} μ̄⁻¹(∇̄_ℓπ̄^i{}_m − ½δ^i_m ∇̄_ℓ tr π̄)`,
///
/// reported through their gauge-invariant mixed components. `ε^{123} = +1`
/// in the order `(x¹, x², x³)`.
pub fn weyl_fields(state: &CanonicalState) -> Result<WeylADM> {
    let grid = &state.grid;
    let len = grid.len();
    let Lifted { qbar, pibar } = lift(state)?;
    let geo = Geometry::new(grid, qbar.clone(), 3)?;
    let ric = geo.ricci(grid);
    let n = 3;
    let qi = |i: usize, j: usize, k: usize| geo.inv[i * n + j][k];
    let qb = |i: usize, j: usize, k: usize| geo.g[i * n + j][k];
    // π̄^i_m
    let mixed: Vec<Grid> = (0..9)
        .map(|c| {
            let (i, m) = (c / 3, c % 3);
            (0..len).map(|k| (0..n).map(|l| pibar[i * n + l][k] * qb(l, m, k)).sum()).collect()
        })
        .collect();
    let tr: Grid = (0..len).map(|k| (0..n).map(|i| mixed[i * n + i][k]).sum()).collect();
    let dmixed: Vec<Vec<Grid>> = (0..2).map(|l| mixed.iter().map(|g| grid.diff(g, l)).collect()).collect();
    let dtr = [grid.diff(&tr, 0), grid.diff(&tr, 1)];
    let mut e = vec![vec![0.0; len]; 9];
    let mut b = vec![vec![0.0; len]; 9];
    for k in 0..len {
        let mu = geo.mu[k];
        let gm = |a: usize, bb: usize, c: usize| geo.gam[i3(n, a, bb, c)][k];
        for i in 0..n {
            for j in 0..n {
                let mut r = 0.0;
                for p in 0..n {
                    for s in 0..n {
                        r += qi(i, p, k) * qi(j, s, k) * ric[p * n + s][k];
                    }
                }
                let pp: f64 = (0..n).map(|l| mixed[i * n + l][k] * pibar[l * n + j][k]).sum();
                e[i * n + j][k] = mu * r - (pp - 0.5 * pibar[i * n + j][k] * tr[k]) / mu;
            }
        }
        // ∇_ℓ π̄^i_m for a weight-one density
        let cov = |l: usize, i: usize, m: usize| {
            let d = if l < 2 { dmixed[l][i * n + m][k] } else { 0.0 };
            let mut s = d;
            for c in 0..n {
                s += gm(i, l, c) * mixed[c * n + m][k] - gm(c, l, m) * mixed[i * n + c][k] - gm(c, c, l) * mixed[i * n + m][k];
            }
            s
        };
        let cov_tr = |l: usize| {
            let d = if l < 2 { dtr[l][k] } else { 0.0 };
            d - (0..n).map(|c| gm(c, c, l)).sum::<f64>() * tr[k]
        };
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for m in 0..n {
                    for l in 0..n {
                        let eps = linalg::levi_civita(&[m, l, j]);
                        if eps != 0.0 {
                            let delta = if i == m { 1.0 } else { 0.0 };
                            s += eps * (cov(l, i, m) - 0.5 * delta * cov_tr(l));
                        }
                    }
                }
                b[i * n + j][k] = s / mu;
            }
        }
    }
    let low3 = |t: &[Grid], k: usize, first: bool, a: usize| -> f64 {
        (0..n).map(|j| qb(2, j, k) * if first { t[j * n + a][k] } else { t[a * n + j][k] }).sum()
    };
    let both3 = |t: &[Grid], k: usize| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += qb(2, i, k) * qb(2, j, k) * t[i * n + j][k];
            }
        }
        s
    };
    let col = |f: &dyn Fn(usize) -> f64| -> Grid { (0..len).map(f).collect() };
    Ok(WeylADM {
        e_ab: [col(&|k| e[0][k]), col(&|k| e[1][k]), col(&|k| e[4][k])],
        e3a: [col(&|k| low3(&e, k, true, 0)), col(&|k| low3(&e, k, true, 1))],
        e33: col(&|k| both3(&e, k)),
        b_ab: [col(&|k| b[0][k]), col(&|k| b[1][k]), col(&|k| b[3][k]), col(&|k| b[4][k])],
        b3a: [col(&|k| low3(&b, k, true, 0)), col(&|k| low3(&b, k, true, 1))],
        ba3: [col(&|k| low3(&b, k, false, 0)), col(&|k| low3(&b, k, false, 1))],
        b33: col(&|k| both3(&b, k)),
    })
}

/// Electric part of [`weyl_fields`].
pub fn weyl_electric(state: &CanonicalState) -> Result<(Sym2, [Grid; 2], Grid)> {
    let w = weyl_fields(state)?;
    Ok((w.e_ab, w.e3a, w.e33))
}

/// Magnetic part of [`weyl_fields`]: `(𝓑^{ab}, 𝓑_3{}^a, 𝓑^a{}_3, 𝓑_{33})`.
#[allow(clippy::type_complexity)]
pub fn weyl_magnetic(state: &CanonicalState) -> Result<([Grid; 4], [Grid; 2], [Grid; 2], Grid)> {
    let w = weyl_fields(state)?;
    Ok((w.b_ab, w.b3a, w.ba3, w.b33))
}

/// Bel-Robinson energy density `𝓔^{ij}𝓔_{ij} + 𝓑^{ij}𝓑_{ij}` (weight two):
///
/// `e^{−4γ}(𝓔_{33}² + 2q_{ab}𝓔_3{}^a𝓔_3{}^b + q_{ac}q_{bd}𝓔^{ab}𝓔^{cd}
///  + 𝓑_{33}² + q_{ab}(𝓑_3{}^a𝓑_3{}^b + 𝓑^a{}_3𝓑^b{}_3) + q_{ac}q_{bd}𝓑^{ab}𝓑^{cd})`.
pub fn bel_robinson_density(w: &WeylADM, state: &CanonicalState) -> Grid {
    (0..state.grid.len())
        .map(|k| {
            let q = mat2(&state.q, k);
            let em = mat2(&w.e_ab, k);
            let bm = [[w.b_ab[0][k], w.b_ab[1][k]], [w.b_ab[2][k], w.b_ab[3][k]]];
            let mut s = w.e33[k] * w.e33[k] + w.b33[k] * w.b33[k];
            for a in 0..2 {
                for b in 0..2 {
                    s += q[a][b] * (2.0 * w.e3a[a][k] * w.e3a[b][k] + w.b3a[a][k] * w.b3a[b][k] + w.ba3[a][k] * w.ba3[b][k]);
                    for c in 0..2 {
                        for d in 0..2 {
                            s += q[a][c] * q[b][d] * (em[a][b] * em[c][d] + bm[a][b] * bm[c][d]);
                        }
                    }
                }
            }
            math::exp(-4.0 * state.gamma[k]) * s
        })
        .collect()
}

/// Closed-form mixed electric components in reduced variables,
/// `𝓕_{ab} = ∂_a𝒜_b − ∂_b𝒜_a`:
///
/// * `𝓔^{ab} = e^{3γ}μ_q(R^{ab} − ∇^a∇^bγ + q^{ab}Δγ − 3∇^aγ∇^bγ + q^{ab}|∇γ|² − ½e^{4γ}𝓕^a{}_c𝓕^{bc})
///   − e^γμ_q⁻¹(−½e^{2γ}π^{ab}(½p_γ + 2 tr π) + e^{2γ}q_{cd}π^{ad}π^{bc} + ¼e^{−2γ}𝓔^a𝓔^b)`
/// * `𝓔_3{}^a = e^{5γ}μ_q(½∇_b𝓕^{ba} − (5/2)∇^bγ𝓕^a{}_b) − e^γμ_q⁻¹(½q_{bc}𝓔^cπ^{ab} + ⅛p_γ𝓔^a)`
/// * `𝓔_{33} = −e^γμ_q⁻¹(¼e^{−2γ}q_{ab}𝓔^a𝓔^b + ¼e^{2γ}p_γ(½p_γ + tr π))
///   − e^{3γ}(∂_a(μ_qq^{ab}∂_bγ) + μ_q|∂γ|² + ¼e^{4γ}μ_q𝓕_{ab}𝓕^{ab})`
///
/// These agree with [`weyl_fields`] on spatially homogeneous data; the gradient
/// terms do not reproduce it on inhomogeneous data, so [`weyl_fields`] is the
/// reference.
pub fn weyl_electric_closed_form(state: &CanonicalState) -> Result<(Sym2, [Grid; 2], Grid)> {
    let geo = geometry(state)?;
    let grid = &state.grid;
    let len = grid.len();
    let r = geo.scalar(&geo.ricci(grid));
    let hess = geo.hessian(grid, &state.gamma);
    let dg = [grid.diff(&state.gamma, 0), grid.diff(&state.gamma, 1)];
    let f = state.field_strength().unwrap_or_else(|| vec![0.0; len]);
    let zero = [vec![0.0; len], vec![0.0; len]];
    let ev = state.kk.as_ref().map(|k| &k.e).unwrap_or(&zero);
    let mb = geo.mu.clone();
    // F_{ab} = f ε_{ab}, F^{ab} = f ε_{ab}/det q
    let fl = |k: usize, a: usize, b: usize| f[k] * linalg::levi_civita(&[a, b]);
    let fup = |k: usize, a: usize, b: usize| fl(k, a, b) / (geo.mu[k] * geo.mu[k]);
    // ∇_b F^{ba} = μ⁻¹∂_b(μF^{ba})
    let flux: Vec<Grid> = (0..4).map(|c| (0..len).map(|k| geo.mu[k] * fup(k, c / 2, c % 2)).collect()).collect();
    let divf = [0, 1].map(|a| {
        let (x, y) = (grid.diff(&flux[a], 0), grid.diff(&flux[2 + a], 1));
        (0..len).map(|k| (x[k] + y[k]) / geo.mu[k]).collect::<Grid>()
    });
    let fl_b: Vec<Grid> = (0..2).map(|b| (0..len).map(|k| mb[k] * (0..2).map(|a| geo.inv[a * 2 + b][k] * dg[a][k]).sum::<f64>()).collect()).collect();
    let divg = {
        let (x, y) = (grid.diff(&fl_b[0], 0), grid.diff(&fl_b[1], 1));
        (0..len).map(|k| x[k] + y[k]).collect::<Grid>()
    };
    let mut e_ab: Sym2 = [vec![0.0; len], vec![0.0; len], vec![0.0; len]];
    let mut e3a = [vec![0.0; len], vec![0.0; len]];
    let mut e33 = vec![0.0; len];
    for k in 0..len {
        let g = state.gamma[k];
        let (q, pm) = (mat2(&state.q, k), mat2(&state.pi, k));
        let (qi, _) = inv2(&q);
        let tr = trace(&state.q, &state.pi, k);
        let pg = state.p_gamma[k];
        let m = mb[k];
        let e = [ev[0][k], ev[1][k]];
        let up_g = [0, 1].map(|a| (0..2).map(|b| qi[a][b] * dg[b][k]).sum::<f64>());
        let grad2: f64 = (0..2).map(|a| up_g[a] * dg[a][k]).sum();
        let lap: f64 = (0..4).map(|c| qi[c / 2][c % 2] * hess[c][k]).sum();
        let fsq: f64 = 2.0 * f[k] * f[k] / (geo.mu[k] * geo.mu[k]);
        let qee: f64 = (0..4).map(|c| q[c / 2][c % 2] * e[c / 2] * e[c % 2]).sum();
        for (comp, (a, b)) in [(0usize, 0usize), (0, 1), (1, 1)].into_iter().enumerate() {
            let mut hup = 0.0;
            let mut ff = 0.0;
            let mut ppq = 0.0;
            for c in 0..2 {
                for d in 0..2 {
                    hup += qi[a][c] * qi[b][d] * hess[c * 2 + d][k];
                    ppq += q[c][d] * pm[a][d] * pm[b][c];
                    // 𝓕^a{}_c𝓕^{bc} = q^{ad}𝓕_{dc}𝓕^{bc}
                    ff += qi[a][d] * fl(k, d, c) * fup(k, b, c);
                }
            }
            let geom = 0.5 * r[k] * qi[a][b] - hup + qi[a][b] * lap - 3.0 * up_g[a] * up_g[b] + qi[a][b] * grad2
                - 0.5 * math::exp(4.0 * g) * ff;
            let mom = -0.5 * math::exp(2.0 * g) * pm[a][b] * (0.5 * pg + 2.0 * tr) + math::exp(2.0 * g) * ppq
                + 0.25 * math::exp(-2.0 * g) * e[a] * e[b];
            e_ab[comp][k] = math::exp(3.0 * g) * m * geom - math::exp(g) / m * mom;
        }
        for a in 0..2 {
            let fgrad: f64 = (0..2).map(|b| up_g[b] * (0..2).map(|c| qi[a][c] * fl(k, c, b)).sum::<f64>()).sum();
            let qep: f64 = (0..2).map(|b| (0..2).map(|c| q[b][c] * e[c] * pm[a][b]).sum::<f64>()).sum();
            e3a[a][k] = math::exp(5.0 * g) * m * (0.5 * divf[a][k] - 2.5 * fgrad) - math::exp(g) / m * (0.5 * qep + 0.125 * pg * e[a]);
        }
        e33[k] = -math::exp(g) / m * (0.25 * math::exp(-2.0 * g) * qee + 0.25 * math::exp(2.0 * g) * pg * (0.5 * pg + tr))
            - math::exp(3.0 * g) * (divg[k] + m * grad2 + 0.25 * math::exp(4.0 * g) * m * fsq);
    }
    Ok((e_ab, e3a, e33))
}
