//! Collocation for the 1-periodic boundary value problem
//!
//! `x′(θ) = T γ f(x(θ), x(θ − 1/T), x(θ − s0/T))`, `x(θ + 1) = x(θ)`,
//! `∫₀¹ ⟨x, x_ref′⟩ dθ = 0`.
//!
//! `x` is continuous piecewise polynomial of degree `m` on `M` uniform intervals,
//! stored by its values at `m + 1` equispaced nodes per interval. Shared
//! endpoints and wrap-around indexing make continuity and periodicity exact,
//! so delayed arguments are simply reduced modulo 1.

use nalgebra::{DMatrix, DVector, Matrix2};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::lindstedt::PeriodicGuess;
use crate::model::Model;
use crate::par;

pub const DEFAULT_INTERVALS: usize = 64;
pub const DEFAULT_DEGREE: usize = 4;
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 20;
/// Amplitudes below this are treated as the equilibrium.
pub const DEGENERATE_AMPLITUDE: f64 = 1e-8;
/// Largest number of whole periods a delay may span.
pub const MAX_DELAY_WRAPS: usize = 64;
const JSON_SAMPLES: usize = 256;
const DISTANCE_GRID: usize = 512;
const NORM_SAMPLES: usize = 1024;

/// Uniform mesh of `intervals` pieces with polynomials of degree `degree`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mesh {
    #[serde(rename = "M")]
    pub intervals: usize,
    #[serde(rename = "m")]
    pub degree: usize,
}

impl Default for Mesh {
    fn default() -> Self {
        Self {
            intervals: DEFAULT_INTERVALS,
            degree: DEFAULT_DEGREE,
        }
    }
}

impl Mesh {
    pub fn new(intervals: usize, degree: usize) -> Result<Self> {
        if intervals < 8 {
            return Err(Error::InvalidMesh(format!("need at least 8 intervals, got {intervals}")));
        }
        if !(2..=7).contains(&degree) {
            return Err(Error::InvalidMesh(format!("degree must lie in 2..=7, got {degree}")));
        }
        Ok(Self { intervals, degree })
    }

    /// Number of distinct nodes, `M m`.
    pub fn nodes(&self) -> usize {
        self.intervals * self.degree
    }

    pub fn node_time(&self, j: usize) -> f64 {
        j as f64 / self.nodes() as f64
    }

    /// Interval index and local coordinate `s ∈ [0, 1]` of `θ` reduced mod 1.
    pub fn locate(&self, theta: f64) -> (usize, f64) {
        let x = theta.rem_euclid(1.0) * self.intervals as f64;
        let i = (x.floor() as usize).min(self.intervals - 1);
        (i, x - i as f64)
    }

    /// Global node index of local node `j` in interval `i`.
    fn node(&self, i: usize, j: usize) -> usize {
        (i * self.degree + j) % self.nodes()
    }
}

/// Gauss–Legendre points and weights mapped to `[0, 1]` (weights sum to 1).
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = Vec::with_capacity(m);
    let mut w = Vec::with_capacity(m);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = m as f64 * (z * p1 - p0) / (z * z - 1.0);
            let step = p1 / dp;
            z -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        x.push(0.5 * (1.0 - z));
        w.push(1.0 / ((1.0 - z * z) * dp * dp));
    }
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    (idx.iter().map(|&i| x[i]).collect(), idx.iter().map(|&i| w[i]).collect())
}

/// Values and derivatives at `s` of the Lagrange basis on `j/m`, `j = 0..=m`.
fn lagrange(m: usize, s: f64, val: &mut [f64], der: &mut [f64]) {
    // Integer node positions in t = m s keep the basis exact at the nodes.
    let t = s * m as f64;
    for j in 0..=m {
        let mut v = 1.0;
        let mut d = 0.0;
        for k in (0..=m).filter(|&k| k != j) {
            let den = j as f64 - k as f64;
            let f = (t - k as f64) / den;
            d = d * f + v / den;
            v *= f;
        }
        val[j] = v;
        der[j] = d * m as f64;
    }
}

/// A periodic orbit on `[0, 1]` with period `T` at parameter `γ`, in centered
/// coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicOrbit {
    pub mesh: Mesh,
    /// `x` at the `M m` nodes `θ_j = j/(Mm)`.
    pub values: Vec<[f64; 2]>,
    pub period: f64,
    pub gamma: f64,
    /// Newton iterations used (0 for an uncorrected orbit).
    pub iterations: usize,
    /// Final max-norm residual of the collocation system (`NaN` if never corrected).
    pub residual: f64,
    /// Residual before each Newton step and at the end.
    pub history: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitJson {
    pub gamma: f64,
    #[serde(rename = "T")]
    pub period: f64,
    pub mesh: Mesh,
    /// `[θ, u, v]` at 256 equispaced points, centered at the equilibrium.
    pub samples: Vec<[f64; 3]>,
}

impl PeriodicOrbit {
    /// Interpolates `f` at the mesh nodes.
    pub fn from_fn(mesh: Mesh, period: f64, gamma: f64, f: impl Fn(f64) -> [f64; 2]) -> Self {
        Self {
            mesh,
            values: (0..mesh.nodes()).map(|j| f(mesh.node_time(j))).collect(),
            period,
            gamma,
            iterations: 0,
            residual: f64::NAN,
            history: Vec::new(),
        }
    }

    /// The profile `θ ↦ y(2πθ)` of a series guess, with `T = 2π/ω`.
    pub fn from_guess(guess: &PeriodicGuess, mesh: Mesh) -> Self {
        Self::from_fn(mesh, guess.period, guess.gamma, |t| guess.eval_unit(t))
    }

    /// Same orbit on another mesh.
    pub fn resample(&self, mesh: Mesh) -> Self {
        let mut o = Self::from_fn(mesh, self.period, self.gamma, |t| self.eval(t));
        o.iterations = self.iterations;
        o
    }

    fn weights(&self, theta: f64) -> (usize, [f64; 8], [f64; 8]) {
        let (i, s) = self.mesh.locate(theta);
        let mut v = [0.0; 8];
        let mut d = [0.0; 8];
        lagrange(self.mesh.degree, s, &mut v, &mut d);
        (i, v, d)
    }

    pub fn eval(&self, theta: f64) -> [f64; 2] {
        let (i, v, _) = self.weights(theta);
        let mut out = [0.0; 2];
        for (j, vj) in v.iter().enumerate().take(self.mesh.degree + 1) {
            let x = self.values[self.mesh.node(i, j)];
            out[0] += vj * x[0];
            out[1] += vj * x[1];
        }
        out
    }

    /// `dx/dθ`.
    pub fn derivative(&self, theta: f64) -> [f64; 2] {
        let (i, _, d) = self.weights(theta);
        let scale = self.mesh.intervals as f64;
        let mut out = [0.0; 2];
        for (j, dj) in d.iter().enumerate().take(self.mesh.degree + 1) {
            let x = self.values[self.mesh.node(i, j)];
            out[0] += scale * dj * x[0];
            out[1] += scale * dj * x[1];
        }
        out
    }

    pub fn flat(&self) -> Vec<f64> {
        self.values.iter().flat_map(|x| [x[0], x[1]]).collect()
    }

    pub(crate) fn set_flat(&mut self, x: &[f64]) {
        for (j, v) in self.values.iter_mut().enumerate() {
            *v = [x[2 * j], x[2 * j + 1]];
        }
    }

    /// Mean over one period (Gauss quadrature).
    pub fn mean(&self) -> [f64; 2] {
        let (g, w) = gauss_legendre(self.mesh.degree + 1);
        let mut acc = [0.0; 2];
        let m = self.mesh.intervals as f64;
        for i in 0..self.mesh.intervals {
            for (s, wl) in g.iter().zip(&w) {
                let x = self.eval((i as f64 + s) / m);
                acc[0] += wl * x[0] / m;
                acc[1] += wl * x[1] / m;
            }
        }
        acc
    }

    /// RMS of `|x|` over one period (Gauss quadrature).
    pub fn l2_norm(&self) -> f64 {
        let (g, w) = gauss_legendre(self.mesh.degree + 1);
        let m = self.mesh.intervals as f64;
        let mut acc = 0.0;
        for i in 0..self.mesh.intervals {
            for (s, wl) in g.iter().zip(&w) {
                let x = self.eval((i as f64 + s) / m);
                acc += wl * (x[0] * x[0] + x[1] * x[1]) / m;
            }
        }
        acc.sqrt()
    }

    /// `sup |x|` on a 1024-point grid.
    pub fn sup_norm(&self) -> f64 {
        (0..NORM_SAMPLES)
            .map(|i| {
                let x = self.eval(i as f64 / NORM_SAMPLES as f64);
                x[0].hypot(x[1])
            })
            .fold(0.0, f64::max)
    }

    /// `sup |x − x̄|` over the nodes.
    pub fn amplitude(&self) -> f64 {
        let n = self.values.len() as f64;
        let mean = self
            .values
            .iter()
            .fold([0.0, 0.0], |a, x| [a[0] + x[0] / n, a[1] + x[1] / n]);
        self.values
            .iter()
            .map(|x| (x[0] - mean[0]).hypot(x[1] - mean[1]))
            .fold(0.0, f64::max)
    }

    /// Largest jump `|x(θ⁺) − x(θ⁻)|` across the breakpoints, including `θ = 0 ≡ 1`.
    pub fn periodicity_defect(&self) -> f64 {
        let m = self.mesh.degree;
        let mut v = [0.0; 8];
        let mut d = [0.0; 8];
        let mut worst: f64 = 0.0;
        for i in 0..self.mesh.intervals {
            lagrange(m, 1.0, &mut v, &mut d);
            let mut left = [0.0; 2];
            for (j, vj) in v.iter().enumerate().take(m + 1) {
                let x = self.values[self.mesh.node(i, j)];
                left[0] += vj * x[0];
                left[1] += vj * x[1];
            }
            let right = self.values[self.mesh.node((i + 1) % self.mesh.intervals, 0)];
            worst = worst.max((left[0] - right[0]).hypot(left[1] - right[1]));
        }
        worst
    }

    pub fn to_json(&self) -> OrbitJson {
        OrbitJson {
            gamma: self.gamma,
            period: self.period,
            mesh: self.mesh,
            samples: (0..JSON_SAMPLES)
                .map(|i| {
                    let t = i as f64 / JSON_SAMPLES as f64;
                    let x = self.eval(t);
                    [t, x[0], x[1]]
                })
                .collect(),
        }
    }
}

/// Jacobians of `f` with respect to its three arguments.
fn rhs_jacobians(model: &Model, p: [f64; 2], q: [f64; 2], w: [f64; 2]) -> [Matrix2<f64>; 3] {
    let d = model.rhs_partials(p, q, w);
    [
        Matrix2::new(d.df1_dp1, 0.0, 0.0, d.df2_dp2),
        Matrix2::new(0.0, 0.0, d.df2_dq1, 0.0),
        Matrix2::new(0.0, d.df1_dw2, 0.0, 0.0),
    ]
}

/// The discretized boundary value problem with a fixed phase reference.
///
/// Unknowns are ordered `(x_0, …, x_{N−1}, T)` with `x_j ∈ ℝ²`; equations are the
/// `2N` collocation conditions followed by the phase condition.
pub struct CollocationSystem<'a> {
    model: &'a Model,
    mesh: Mesh,
    gauss: Vec<f64>,
    gauss_w: Vec<f64>,
    basis: Vec<[f64; 8]>,
    dbasis: Vec<[f64; 8]>,
    /// `x_ref′` at each collocation point, index `i m + l`.
    ref_deriv: Vec<[f64; 2]>,
}

impl<'a> CollocationSystem<'a> {
    pub fn new(model: &'a Model, reference: &PeriodicOrbit) -> Self {
        let mesh = reference.mesh;
        let (gauss, gauss_w) = gauss_legendre(mesh.degree);
        let mut basis = Vec::new();
        let mut dbasis = Vec::new();
        for &s in &gauss {
            let mut v = [0.0; 8];
            let mut d = [0.0; 8];
            lagrange(mesh.degree, s, &mut v, &mut d);
            basis.push(v);
            dbasis.push(d);
        }
        let ref_deriv = (0..mesh.intervals)
            .flat_map(|i| {
                gauss
                    .iter()
                    .map(move |s| (i as f64 + s) / mesh.intervals as f64)
                    .collect::<Vec<_>>()
            })
            .map(|t| reference.derivative(t))
            .collect();
        Self {
            model,
            mesh,
            gauss,
            gauss_w,
            basis,
            dbasis,
            ref_deriv,
        }
    }

    pub fn mesh(&self) -> Mesh {
        self.mesh
    }

    /// `2N + 1`.
    pub fn dim(&self) -> usize {
        2 * self.mesh.nodes() + 1
    }

    fn check_period(&self, period: f64) -> Result<()> {
        if !(period > 0.0) || !period.is_finite() {
            return Err(Error::InvalidParams(format!("period must be positive, got {period}")));
        }
        let wraps = (self.model.s0() / period).floor();
        if wraps > MAX_DELAY_WRAPS as f64 {
            return Err(Error::MeshTooCoarse {
                wraps: wraps as usize,
                bound: MAX_DELAY_WRAPS,
            });
        }
        Ok(())
    }

    fn collocation_time(&self, i: usize, l: usize) -> f64 {
        (i as f64 + self.gauss[l]) / self.mesh.intervals as f64
    }

    fn interp(&self, x: &[f64], theta: f64) -> Probe {
        let (i, s) = self.mesh.locate(theta);
        let mut v = [0.0; 8];
        let mut d = [0.0; 8];
        lagrange(self.mesh.degree, s, &mut v, &mut d);
        let mut val = [0.0; 2];
        let mut der = [0.0; 2];
        let scale = self.mesh.intervals as f64;
        for j in 0..=self.mesh.degree {
            let n = self.mesh.node(i, j);
            for c in 0..2 {
                val[c] += v[j] * x[2 * n + c];
                der[c] += scale * d[j] * x[2 * n + c];
            }
        }
        Probe {
            interval: i,
            weights: v,
            val,
            der,
        }
    }

    /// Residual at collocation point `(i, l)` and the state used there.
    fn point(&self, x: &[f64], period: f64, gamma: f64, i: usize, l: usize) -> Point {
        let t = self.collocation_time(i, l);
        let m = self.mesh.degree;
        let scale = self.mesh.intervals as f64;
        let mut p = [0.0; 2];
        let mut dp = [0.0; 2];
        for j in 0..=m {
            let n = self.mesh.node(i, j);
            for c in 0..2 {
                p[c] += self.basis[l][j] * x[2 * n + c];
                dp[c] += scale * self.dbasis[l][j] * x[2 * n + c];
            }
        }
        let q = self.interp(x, t - 1.0 / period);
        let w = self.interp(x, t - self.model.s0() / period);
        let f = self.model.rhs(p, q.val, w.val);
        Point {
            p,
            q,
            w,
            f,
            res: [
                period * gamma * f[0] - dp[0],
                period * gamma * f[1] - dp[1],
            ],
        }
    }

    /// `∫⟨x, x_ref′⟩` by Gauss quadrature.
    pub fn phase(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        let scale = 1.0 / self.mesh.intervals as f64;
        for i in 0..self.mesh.intervals {
            for l in 0..self.mesh.degree {
                let mut p = [0.0; 2];
                for j in 0..=self.mesh.degree {
                    let n = self.mesh.node(i, j);
                    p[0] += self.basis[l][j] * x[2 * n];
                    p[1] += self.basis[l][j] * x[2 * n + 1];
                }
                let r = self.ref_deriv[i * self.mesh.degree + l];
                acc += scale * self.gauss_w[l] * (p[0] * r[0] + p[1] * r[1]);
            }
        }
        acc
    }

    /// Collocation residuals followed by the phase condition.
    pub fn residual(&self, x: &[f64], period: f64, gamma: f64) -> Result<DVector<f64>> {
        self.check_period(period)?;
        let m = self.mesh.degree;
        let pts = par::map_range(self.mesh.nodes(), |k| {
            self.point(x, period, gamma, k / m, k % m).res
        });
        let mut out = DVector::zeros(self.dim());
        for (k, r) in pts.iter().enumerate() {
            out[2 * k] = r[0];
            out[2 * k + 1] = r[1];
        }
        out[2 * self.mesh.nodes()] = self.phase(x);
        Ok(out)
    }

    /// Residual, Jacobian with respect to `(x, T)`, and the column `∂/∂γ`.
    pub fn linearize(
        &self,
        x: &[f64],
        period: f64,
        gamma: f64,
    ) -> Result<(DVector<f64>, DMatrix<f64>, DVector<f64>)> {
        self.check_period(period)?;
        let n = self.dim();
        let nodes = self.mesh.nodes();
        let m = self.mesh.degree;
        let scale = self.mesh.intervals as f64;
        let s0 = self.model.s0();
        let mut rows = vec![0.0; n * n];
        // Two rows per collocation point; the T column carries the chain terms
        // through the delayed arguments `θ − 1/T` and `θ − s0/T`.
        par::fill_chunks(&mut rows[..2 * nodes * n], 2 * n, |k, rows2| {
            let (i, l) = (k / m, k % m);
            let pt = self.point(x, period, gamma, i, l);
            let jac = rhs_jacobians(self.model, pt.p, pt.q.val, pt.w.val);
            let tg = period * gamma;
            for c in 0..2 {
                let row = &mut rows2[c * n..(c + 1) * n];
                for j in 0..=m {
                    let col = 2 * self.mesh.node(i, j);
                    row[col + c] -= scale * self.dbasis[l][j];
                    for e in 0..2 {
                        row[col + e] += tg * jac[0][(c, e)] * self.basis[l][j];
                    }
                }
                for (which, at) in [(1, &pt.q), (2, &pt.w)] {
                    for j in 0..=m {
                        let col = 2 * self.mesh.node(at.interval, j);
                        for e in 0..2 {
                            row[col + e] += tg * jac[which][(c, e)] * at.weights[j];
                        }
                    }
                }
                let chain: f64 = (0..2)
                    .map(|e| jac[1][(c, e)] * pt.q.der[e] + s0 * jac[2][(c, e)] * pt.w.der[e])
                    .sum();
                row[2 * nodes] = gamma * pt.f[c] + gamma * chain / period;
            }
        });
        let prow = &mut rows[2 * nodes * n..];
        let h = 1.0 / scale;
        for i in 0..self.mesh.intervals {
            for l in 0..m {
                let r = self.ref_deriv[i * m + l];
                for j in 0..=m {
                    let col = 2 * self.mesh.node(i, j);
                    let wgt = h * self.gauss_w[l] * self.basis[l][j];
                    prow[col] += wgt * r[0];
                    prow[col + 1] += wgt * r[1];
                }
            }
        }
        let pts = par::map_range(nodes, |k| {
            let pt = self.point(x, period, gamma, k / m, k % m);
            (pt.res, pt.f)
        });
        let mut res = DVector::zeros(n);
        let mut dgamma = DVector::zeros(n);
        for (k, (r, f)) in pts.iter().enumerate() {
            for c in 0..2 {
                res[2 * k + c] = r[c];
                dgamma[2 * k + c] = period * f[c];
            }
        }
        res[2 * nodes] = self.phase(x);
        Ok((res, DMatrix::from_row_slice(n, n, &rows), dgamma))
    }
}

/// Interpolation data at a (delayed) evaluation point.
struct Probe {
    interval: usize,
    weights: [f64; 8],
    val: [f64; 2],
    der: [f64; 2],
}

struct Point {
    p: [f64; 2],
    q: Probe,
    w: Probe,
    f: [f64; 2],
    res: [f64; 2],
}

/// Newton settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

pub(crate) fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m: f64, x| if x.is_nan() { f64::NAN } else { m.max(x.abs()) })
}

/// Newton's method at fixed `γ` from `initial`, which also serves as the phase
/// reference.
pub fn newton_correct(model: &Model, initial: &PeriodicOrbit, opts: &NewtonOptions) -> Result<PeriodicOrbit> {
    let amp = initial.amplitude();
    if !(amp >= DEGENERATE_AMPLITUDE) {
        return Err(Error::DegenerateOrbit(amp));
    }
    let sys = CollocationSystem::new(model, initial);
    let nodes = initial.mesh.nodes();
    let mut orbit = initial.clone();
    orbit.history.clear();
    let mut x = initial.flat();
    let mut period = initial.period;
    let mut best: Option<(f64, PeriodicOrbit)> = None;
    for it in 0..=opts.max_iter {
        let (res, jac, _) = sys.linearize(&x, period, orbit.gamma)?;
        let norm = max_abs(&res);
        orbit.set_flat(&x);
        orbit.period = period;
        orbit.history.push(norm);
        orbit.residual = norm;
        orbit.iterations = it;
        if norm.is_finite() && best.as_ref().is_none_or(|(b, _)| norm < *b) {
            best = Some((norm, orbit.clone()));
        }
        if norm < opts.tol {
            // Collapse onto the equilibrium also solves the equations.
            let a = orbit.amplitude();
            if !(a >= DEGENERATE_AMPLITUDE) {
                return Err(Error::DegenerateOrbit(a));
            }
            return Ok(orbit);
        }
        if !norm.is_finite() || it == opts.max_iter {
            break;
        }
        let step = jac
            .lu()
            .solve(&res)
            .ok_or(Error::SingularJacobian { iteration: it })?;
        for (xi, si) in x.iter_mut().zip(step.iter()) {
            *xi -= si;
        }
        period -= step[2 * nodes];
        if !(period > 0.0) {
            break;
        }
    }
    let (residual, best) = best.map_or((f64::NAN, None), |(r, o)| (r, Some(Box::new(o))));
    Err(Error::NoConvergence {
        iterations: orbit.iterations,
        residual,
        best,
    })
}

/// Corrects a series guess on `mesh`.
pub fn correct_guess(
    model: &Model,
    guess: &PeriodicGuess,
    mesh: Mesh,
    opts: &NewtonOptions,
) -> Result<PeriodicOrbit> {
    newton_correct(model, &PeriodicOrbit::from_guess(guess, mesh), opts)
}

/// Max-norm collocation residual of `orbit` (its own phase reference, so the
/// phase entry vanishes identically).
pub fn collocation_residual(model: &Model, orbit: &PeriodicOrbit) -> Result<f64> {
    let sys = CollocationSystem::new(model, orbit);
    Ok(max_abs(&sys.residual(&orbit.flat(), orbit.period, orbit.gamma)?))
}

/// A-posteriori resolution indicator: the equation defect
/// `|Tγ f(x(θ), x(θ − 1/T), x(θ − s0/T)) − x'(θ)|` at the mesh nodes and interval
/// midpoints (where collocation does not enforce it), relative to `max |x'|`.
pub fn mesh_defect(model: &Model, orbit: &PeriodicOrbit) -> f64 {
    let t = orbit.period;
    let (d1, ds) = (1.0 / t, model.s0() / t);
    let m = orbit.mesh.intervals;
    let (worst, scale) = (0..2 * m)
        .map(|k| {
            let th = k as f64 / (2 * m) as f64;
            let p = orbit.eval(th);
            let q = orbit.eval((th - d1).rem_euclid(1.0));
            let w = orbit.eval((th - ds).rem_euclid(1.0));
            let f = model.rhs(p, q, w);
            let dx = orbit.derivative(th);
            let r0 = t * orbit.gamma * f[0] - dx[0];
            let r1 = t * orbit.gamma * f[1] - dx[1];
            (r0.abs().max(r1.abs()), dx[0].abs().max(dx[1].abs()))
        })
        .fold((0.0f64, 0.0f64), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    if scale > 0.0 {
        worst / scale
    } else {
        worst
    }
}

/// A 1-periodic curve in ℝ².
pub trait UnitPeriodic {
    fn at(&self, theta: f64) -> [f64; 2];
}

impl UnitPeriodic for PeriodicOrbit {
    fn at(&self, theta: f64) -> [f64; 2] {
        self.eval(theta)
    }
}

impl UnitPeriodic for PeriodicGuess {
    fn at(&self, theta: f64) -> [f64; 2] {
        self.eval_unit(theta)
    }
}

/// `min_σ sup_t |a(t + σ) − b(t)|` with `t` on a 512-point grid: a grid scan
/// over `σ` followed by golden-section refinement.
pub fn orbit_distance(a: &dyn UnitPeriodic, b: &dyn UnitPeriodic) -> f64 {
    let n = DISTANCE_GRID;
    let h = 1.0 / n as f64;
    let sa: Vec<[f64; 2]> = (0..n).map(|i| a.at(i as f64 * h)).collect();
    let sb: Vec<[f64; 2]> = (0..n).map(|i| b.at(i as f64 * h)).collect();
    let grid_cost = |k: usize| {
        (0..n)
            .map(|i| {
                let x = sa[(i + k) % n];
                let y = sb[i];
                (x[0] - y[0]).hypot(x[1] - y[1])
            })
            .fold(0.0, f64::max)
    };
    let (kbest, cbest) = (0..n)
        .map(|k| (k, grid_cost(k)))
        .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
    let cost = |sigma: f64| {
        (0..n)
            .map(|i| {
                let t = i as f64 * h;
                let x = a.at(t + sigma);
                let y = sb[i];
                (x[0] - y[0]).hypot(x[1] - y[1])
            })
            .fold(0.0, f64::max)
    };
    let centre = kbest as f64 * h;
    let refined = crate::fourier::golden_max(|s| -cost(s), centre - h, centre + h, 1e-10);
    cbest.min(-refined)
}
