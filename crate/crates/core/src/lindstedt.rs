//! Poincaré–Lindstedt expansion of the periodic orbits born at a Hopf point.
//!
//! In the time `t = ωs` the orbit is `2π`-periodic and solves
//! `ω y′(t) = γ F(y(t), y(t − ω), y(t − s0 ω))`. Expanding `y = Σ ε^k y_k`,
//! `γ = Σ γ_k ε^k`, `ω = Σ ω_k ε^k`, order `k` reads
//!
//! `Δ(niω0, γ0) ŷ_k(n) = R̂_k(n) = Ĝ_k(n) − [Δ̃(niω_{k−1}, γ_{k−1}, niω0) + γ0 niω_{k−1} S(n)] ŷ1(n)`
//!
//! with `S(n) = e^{−niω0}B1 + s0 e^{−niω0 s0}B2` and `Ĝ_k` built from lower orders.
//! Mode `n = 1` is singular; the solvability condition `ψ̂ R̂_k(1) = 0` fixes
//! `(γ_{k−1}, ω_{k−1})` and the other modes are plain 2×2 solves.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fourier::{FourierScalar, FourierSeries2, SeriesJson};
use crate::hopf::HopfPoint;
use crate::model::{solve2, CMat2, CVec2, LinearData, Model};
use crate::taylor::{delayed_jet, quotient_jet};

pub const DEFAULT_MAX_ORDER: usize = 64;
/// Floor on `|det Δ(niω0, γ0)|` for the off-resonant solves.
pub const DELTA_DET_FLOOR: f64 = 1e-13;
/// Floor on `|det C|`.
pub const SINGULAR_C_FLOOR: f64 = 1e-12;
/// Target relative amplitude for [`PLExpansion::auto_epsilon`].
pub const DEFAULT_AUTO_RHO: f64 = 0.05;
const DEFECT_SAMPLES: usize = 512;
const REFINEMENT_SWEEPS: usize = 2;

const I: Complex64 = Complex64::new(0.0, 1.0);

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Kernel data at a Hopf point: right and left null vectors of `Δ(iω0, γ0)` and
/// the real 2×2 matrix `C` of the solvability conditions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HopfKernel {
    pub gamma0: f64,
    pub omega0: f64,
    /// `ŷ1(1) = (iω0 + γ0, 2γ0u0 e^{−iω0})`.
    pub yhat1: CVec2,
    /// Row vector `ψ̂(−1) = (iω0 + γ0, −γ0 (u0/v0)² e^{−iω0 s0})`.
    pub psi_hat: CVec2,
    pub c: Matrix2<f64>,
    pub det_c: f64,
}

impl HopfKernel {
    /// `ψ̂ · z`.
    pub fn project(&self, z: &CVec2) -> Complex64 {
        self.psi_hat[0] * z[0] + self.psi_hat[1] * z[1]
    }

    /// `[Δ̃(niω, γ, niω0) + γ0 niω S(n)]`, the matrix multiplying `ŷ1(n)` through
    /// the unknowns `(γ_{k−1}, ω_{k−1}) = (γ, ω)`.
    pub fn bracket(&self, lin: &LinearData, n: i64, gamma: f64, omega: f64) -> CMat2 {
        let nf = n as f64;
        lin.delta_tilde(I * (nf * omega), gamma, I * (nf * self.omega0))
            + lin.delay_sensitivity(n, self.omega0) * (I * (self.gamma0 * nf * omega))
    }

    /// `(γ_{k−1}, ω_{k−1})` from `C x = (Re ψ̂Ĝ, Im ψ̂Ĝ)`.
    fn solve_c(&self, forcing: Complex64) -> Result<(f64, f64)> {
        let inv = self
            .c
            .try_inverse()
            .ok_or(Error::SingularC(self.det_c))?;
        let x = inv * Vector2::new(forcing.re, forcing.im);
        Ok((x[0], x[1]))
    }
}

/// Kernel vectors and `C` at a Hopf point. `C` is assembled from its closed-form
/// entries in `b0, b1, γ0, ω0, s0`.
pub fn build_kernel(lin: &LinearData, hp: &HopfPoint) -> Result<HopfKernel> {
    let (g, w, s0) = (hp.gamma0, hp.omega0, lin.s0);
    let (b0, b1) = (lin.b0, lin.b1);
    let r = lin.u0 / lin.v0;
    let yhat1 = CVec2::new(Complex64::new(g, w), Complex64::from_polar(2.0 * g * lin.u0, -w));
    let psi_hat = CVec2::new(
        Complex64::new(g, w),
        Complex64::from_polar(-g * r * r, -w * s0),
    );
    let sp1 = s0 + 1.0;
    let cm = Matrix2::new(
        (b1 + 2.0) * w * w,
        -((b1 + 2.0) * g * w + sp1 * ((b0 + b1) * g * g * w - w.powi(3))),
        (2.0 * w * w / g - b1 * g) * w,
        b1 * g * g - 2.0 * w * w + sp1 * ((-b1 - 1.0) * g * w * w + b0 * g.powi(3)),
    );
    let det_c = cm.determinant();
    if !(det_c.abs() >= SINGULAR_C_FLOOR) {
        return Err(Error::SingularC(det_c));
    }
    Ok(HopfKernel {
        gamma0: g,
        omega0: w,
        yhat1,
        psi_hat,
        c: cm,
        det_c,
    })
}

/// `det C` in the factored form `−ω0²(s0+1)[(b0²+3)γ0ω0² + (b0²+1)γ0³ + 2ω0⁴/γ0]`.
pub fn det_c_closed_form(lin: &LinearData, gamma0: f64, omega0: f64) -> f64 {
    let (g, w, b0) = (gamma0, omega0, lin.b0);
    -w * w
        * (lin.s0 + 1.0)
        * ((b0 * b0 + 3.0) * g * w * w + (b0 * b0 + 1.0) * g.powi(3) + 2.0 * w.powi(4) / g)
}

/// Result of one order of the construction.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderSlice {
    pub k: usize,
    /// `y_k`, support `≤ k`.
    pub y: FourierSeries2,
    /// `γ_{k−1}` fixed by the solvability condition at this order.
    pub gamma_prev: f64,
    /// `ω_{k−1}`.
    pub omega_prev: f64,
    /// Forcing `Ĝ_k`.
    pub g_hat: FourierSeries2,
    /// Right-hand side `R̂_k` after the solvability solve.
    pub r_hat: FourierSeries2,
    /// `|ψ̂ R̂_k(1)|`.
    pub solvability_residual: f64,
}

/// `y_1 = ŷ1(1) e^{it} + c.c.`
pub fn first_order(kernel: &HopfKernel) -> FourierSeries2 {
    let mut y = FourierSeries2::zeros(1);
    y.set(1, kernel.yhat1);
    y
}

/// Shared tail of every order: solvability, `R̂_k`, and the mode solves.
fn solve_order(
    lin: &LinearData,
    kernel: &HopfKernel,
    k: usize,
    g_hat: FourierSeries2,
    solve_profile: bool,
) -> Result<OrderSlice> {
    let g1 = g_hat.coeff(1);
    let (mut gamma_prev, mut omega_prev) = kernel.solve_c(kernel.project(&g1))?;
    let mut r1 = g1 - kernel.bracket(lin, 1, gamma_prev, omega_prev) * kernel.yhat1;
    // The closed-form C and the projected bracket agree only to rounding; a few
    // refinement sweeps remove the mismatch, which grows with |Ĝ_k|.
    for _ in 0..REFINEMENT_SWEEPS {
        let (dg, dw) = kernel.solve_c(kernel.project(&r1))?;
        gamma_prev += dg;
        omega_prev += dw;
        r1 = g1 - kernel.bracket(lin, 1, gamma_prev, omega_prev) * kernel.yhat1;
    }
    let mut r_hat = g_hat.clone();
    if r_hat.support() < 1 {
        r_hat = FourierSeries2::zeros(1).add(&r_hat);
    }
    r_hat.set(1, r1);
    let solvability_residual = kernel.project(&r1).norm();

    let mut y = FourierSeries2::zeros(k);
    if solve_profile {
        for n in (0..=k).filter(|&n| n != 1) {
            let rn = r_hat.coeff(n as i64);
            let m = lin.delta(I * (n as f64 * kernel.omega0), kernel.gamma0);
            let sol = solve2(&m, &rn, DELTA_DET_FLOOR).ok_or_else(|| Error::SingularDelta {
                n: n as i64,
                modulus: crate::model::det2(&m).norm(),
            })?;
            y.set(n, sol);
        }
        y.set(1, kernel_mode(lin, kernel, &r1)?);
    }
    Ok(OrderSlice {
        k,
        y,
        gamma_prev,
        omega_prev,
        g_hat,
        r_hat,
        solvability_residual,
    })
}

/// Solution of `Δ(iω0, γ0) x = r` whose component along `ŷ1(1)` equals `ŷ1(1)`:
/// the bordered system `[Δ ψ̂ᴴ; ŷ1ᴴ 0] (x, μ) = (r, |ŷ1|²)`.
fn kernel_mode(lin: &LinearData, kernel: &HopfKernel, r: &CVec2) -> Result<CVec2> {
    let d = lin.delta(I * kernel.omega0, kernel.gamma0);
    let q = kernel.psi_hat.map(|z| z.conj());
    let yh = kernel.yhat1.map(|z| z.conj());
    let m = Matrix3::new(
        d[(0, 0)], d[(0, 1)], q[0],
        d[(1, 0)], d[(1, 1)], q[1],
        yh[0], yh[1], c(0.0),
    );
    let rhs = Vector3::new(r[0], r[1], c(kernel.yhat1.norm_squared()));
    let sol = m
        .lu()
        .solve(&rhs)
        .ok_or(Error::SingularDelta { n: 1, modulus: 0.0 })?;
    Ok(CVec2::new(sol[0], sol[1]))
}

/// Order 2: `Ĝ2 = γ0 ((1/v0)(U1 − (u0/v0)V1(· − s0ω0))², U1(· − ω0)²)`.
pub fn order2(lin: &LinearData, kernel: &HopfKernel, y1: &FourierSeries2) -> Result<OrderSlice> {
    let g0 = kernel.gamma0;
    let r = lin.u0 / lin.v0;
    let p1 = y1.u.sub(&y1.v.delay_shift(lin.s0, kernel.omega0).scale(r));
    let q1 = y1.u.delay_shift(1.0, kernel.omega0);
    let g = FourierSeries2::new(p1.cauchy(&p1).scale(g0 / lin.v0), q1.cauchy(&q1).scale(g0));
    solve_order(lin, kernel, 2, g, true)
}

/// Order 3, using `γ1 = ω1 = 0`:
/// `Ĝ3 = (2γ0/v0 P1P2 − γ0/v0² V1(· − s0ω0) P1², 2γ0 U1(· − ω0)U2(· − ω0))`
/// with `Pj = Uj − (u0/v0)Vj(· − s0ω0)`.
pub fn order3(
    lin: &LinearData,
    kernel: &HopfKernel,
    y1: &FourierSeries2,
    y2: &FourierSeries2,
) -> Result<OrderSlice> {
    let (g0, w0, s0) = (kernel.gamma0, kernel.omega0, lin.s0);
    let r = lin.u0 / lin.v0;
    let vd1 = y1.v.delay_shift(s0, w0);
    let p1 = y1.u.sub(&vd1.scale(r));
    let p2 = y2.u.sub(&y2.v.delay_shift(s0, w0).scale(r));
    let mut g1 = p1.cauchy(&p2).scale(2.0 * g0 / lin.v0);
    g1.add_scaled(-g0 / (lin.v0 * lin.v0), &vd1.cauchy(&p1.cauchy(&p1)));
    let g2 = y1
        .u
        .cauchy(&y2.u)
        .delay_shift(1.0, w0)
        .scale(2.0 * g0);
    solve_order(lin, kernel, 3, FourierSeries2::new(g1, g2), true)
}

/// Jets of the profile and its delayed copies at order `k`, with `y_k` and
/// `ω_{k−1}` set to zero.
struct Jets {
    u: Vec<FourierScalar>,
    v: Vec<FourierScalar>,
    u_d1: Vec<FourierScalar>,
    v_d1: Vec<FourierScalar>,
    u_ds: Vec<FourierScalar>,
    v_ds: Vec<FourierScalar>,
    d: Vec<FourierScalar>,
}

impl Jets {
    fn new(lin: &LinearData, ys: &[FourierSeries2], omega_jet: &[f64]) -> Self {
        let k = ys.len();
        let mut u: Vec<FourierScalar> = ys.iter().map(|y| y.u.clone()).collect();
        let mut v: Vec<FourierScalar> = ys.iter().map(|y| y.v.clone()).collect();
        u.push(FourierScalar::zeros(0));
        v.push(FourierScalar::zeros(0));
        let q = quotient_jet(&u[..k], &v[..k], omega_jet, lin.u0, lin.v0, lin.s0);
        Self {
            u_d1: delayed_jet(&u, omega_jet, 1.0),
            v_d1: delayed_jet(&v, omega_jet, 1.0),
            u_ds: delayed_jet(&u, omega_jet, lin.s0),
            v_ds: delayed_jet(&v, omega_jet, lin.s0),
            u,
            v,
            d: q.d,
        }
    }
}

/// `Ñ_m`: the order-`m` coefficient of `∂_ε` of the nonlinear part of `F`.
fn n_tilde(jets: &Jets, m: usize) -> FourierSeries2 {
    let mut n1 = FourierScalar::zeros(0);
    let mut n2 = FourierScalar::zeros(0);
    for k1 in 1..=m {
        let w = (m - k1 + 1) as f64;
        let dsq = (0..=k1).fold(FourierScalar::zeros(0), |acc, j| {
            acc.add(&jets.d[j].cauchy(&jets.d[k1 - j]))
        });
        n1.add_scaled(2.0 * w, &jets.d[k1].cauchy(&jets.u[m - k1 + 1]));
        n1.add_scaled(-w, &dsq.cauchy(&jets.v_ds[m - k1 + 1]));
        n2.add_scaled(2.0 * w, &jets.u_d1[k1].cauchy(&jets.u_d1[m - k1 + 1]));
    }
    FourierSeries2::new(n1, n2)
}

/// Order-`k` nonlinear coefficient `N_k = Ñ_{k−1}/k`. `ys` holds `y_0..y_{k−1}`.
pub fn nonlinear_coefficient(
    lin: &LinearData,
    ys: &[FourierSeries2],
    omega: &[f64],
    k: usize,
) -> FourierSeries2 {
    let jets = Jets::new(lin, &ys[..k.min(ys.len())], &padded(omega, k));
    n_tilde(&jets, k - 1).scale(1.0 / k as f64)
}

fn padded(x: &[f64], len: usize) -> Vec<f64> {
    let mut out: Vec<f64> = x.iter().copied().take(len).collect();
    out.resize(len, 0.0);
    out
}

fn apply(m: &Matrix2<f64>, u: &FourierScalar, v: &FourierScalar) -> (FourierScalar, FourierScalar) {
    let mut a = u.scale(m[(0, 0)]);
    a.add_scaled(m[(0, 1)], v);
    let mut b = u.scale(m[(1, 0)]);
    b.add_scaled(m[(1, 1)], v);
    (a, b)
}

/// Forcing `Ĝ_k = ρ̂_k − L̂_k` for `k ≥ 2`, from `y_0..y_{k−1}`, `γ_0..γ_{k−2}`,
/// `ω_0..ω_{k−2}`.
///
/// `L̂_k` is the order-`k` coefficient of `ω(ε)y′ − γ(ε)(A y + B1 y(·−ω) + B2 y(·−s0ω))`
/// with `y_k = 0` and `γ_{k−1} = ω_{k−1} = 0`; `ρ̂_k = Σ_{k2=2}^{k} γ_{k−k2} N_{k2}`.
pub fn forcing(lin: &LinearData, ys: &[FourierSeries2], gamma: &[f64], omega: &[f64]) -> FourierSeries2 {
    let k = ys.len();
    let w = padded(omega, k + 1);
    let g = padded(gamma, k + 1);
    let jets = Jets::new(lin, ys, &w[..k]);

    let mut lu = FourierScalar::zeros(0);
    let mut lv = FourierScalar::zeros(0);
    for j in 0..=k {
        let m = k - j;
        if w[j] != 0.0 {
            lu.add_scaled(w[j], &jets.u[m].differentiate());
            lv.add_scaled(w[j], &jets.v[m].differentiate());
        }
        if g[j] != 0.0 {
            for (mat, ju, jv) in [
                (&lin.a_mat, &jets.u[m], &jets.v[m]),
                (&lin.b1_mat, &jets.u_d1[m], &jets.v_d1[m]),
                (&lin.b2_mat, &jets.u_ds[m], &jets.v_ds[m]),
            ] {
                let (a, b) = apply(mat, ju, jv);
                lu.add_scaled(-g[j], &a);
                lv.add_scaled(-g[j], &b);
            }
        }
    }
    let mut rho = FourierSeries2::zeros(0);
    for k2 in 2..=k {
        let gk = g[k - k2];
        if gk != 0.0 {
            rho.add_scaled(gk, &n_tilde(&jets, k2 - 1).scale(1.0 / k2 as f64));
        }
    }
    let mut out = rho.add(&FourierSeries2::new(lu, lv).scale(-1.0));
    truncate(&mut out, k);
    out
}

fn truncate(s: &mut FourierSeries2, k: usize) {
    let keep = |f: &FourierScalar| FourierScalar::from_nonnegative(f.nonnegative().iter().copied().take(k + 1).collect());
    s.u = keep(&s.u);
    s.v = keep(&s.v);
}

/// Generic order `k ≥ 2` from `y_0..y_{k−1}`, `γ_0..γ_{k−2}`, `ω_0..ω_{k−2}`.
pub fn order_k(
    lin: &LinearData,
    kernel: &HopfKernel,
    ys: &[FourierSeries2],
    gamma: &[f64],
    omega: &[f64],
) -> Result<OrderSlice> {
    let k = ys.len();
    order_k_inner(lin, kernel, ys, gamma, omega, k, true)
}

fn order_k_inner(
    lin: &LinearData,
    kernel: &HopfKernel,
    ys: &[FourierSeries2],
    gamma: &[f64],
    omega: &[f64],
    k: usize,
    solve_profile: bool,
) -> Result<OrderSlice> {
    if k < 2 || gamma.len() < k - 1 || omega.len() < k - 1 {
        return Err(Error::InvalidParams(format!(
            "order {k} needs y_0..y_{} and two scalar sequences of length {}",
            k.saturating_sub(1),
            k.saturating_sub(1)
        )));
    }
    let g = forcing(lin, ys, &gamma[..k - 1], &omega[..k - 1]);
    solve_order(lin, kernel, k, g, solve_profile)
}

/// Truncated expansion evaluated at a given `ε`.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicGuess {
    /// Profile in the `2π`-periodic time, centered at the equilibrium.
    pub y: FourierSeries2,
    pub gamma: f64,
    pub omega: f64,
    pub period: f64,
    pub epsilon: f64,
    pub order: usize,
}

impl PeriodicGuess {
    /// State at the normalized time `θ ∈ [0, 1)`, i.e. `y(2πθ)`.
    pub fn eval_unit(&self, theta: f64) -> [f64; 2] {
        self.y.eval(2.0 * PI * theta)
    }
}

/// A Poincaré–Lindstedt expansion through order `K`.
#[derive(Clone, Debug, PartialEq)]
pub struct PLExpansion {
    pub model: Model,
    pub hopf: HopfPoint,
    pub kernel: HopfKernel,
    /// `y_0..y_K`, with `y_0 = 0`.
    pub y: Vec<FourierSeries2>,
    /// `γ_0..γ_K`.
    pub gamma: Vec<f64>,
    /// `ω_0..ω_K`.
    pub omega: Vec<f64>,
    /// `|ψ̂ R̂_k(1)|` for `k = 2..=K+1` (index `k`; entries 0 and 1 are zero).
    pub solvability: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderJson {
    pub k: usize,
    pub gamma_k: f64,
    pub omega_k: f64,
    pub series: SeriesJson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionJson {
    pub hopf: HopfPoint,
    pub orders: Vec<OrderJson>,
}

/// One row of the per-order summary.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderRow {
    pub k: usize,
    pub gamma_k: f64,
    pub omega_k: f64,
    pub sup_norm: f64,
    pub eps_k_sup_norm: f64,
}

impl PLExpansion {
    /// Builds `y_1..y_K` and `γ_0..γ_K`, `ω_0..ω_K` (the last pair from one
    /// further solvability condition).
    pub fn build(model: &Model, hp: &HopfPoint, order: usize) -> Result<Self> {
        Self::build_with_max(model, hp, order, DEFAULT_MAX_ORDER)
    }

    pub fn build_with_max(model: &Model, hp: &HopfPoint, order: usize, max_order: usize) -> Result<Self> {
        if order > max_order {
            return Err(Error::OrderOverflow {
                requested: order,
                max: max_order,
            });
        }
        if order == 0 {
            return Err(Error::InvalidParams("order must be at least 1".into()));
        }
        let lin = &model.lin;
        let kernel = build_kernel(lin, hp)?;
        let mut y = vec![FourierSeries2::zeros(0), first_order(&kernel)];
        let mut gamma = vec![hp.gamma0];
        let mut omega = vec![hp.omega0];
        let mut solvability = vec![0.0, 0.0];
        for k in 2..=order + 1 {
            let profile = k <= order;
            let slice = match k {
                2 if profile => order2(lin, &kernel, &y[1])?,
                3 if profile => order3(lin, &kernel, &y[1], &y[2])?,
                _ => order_k_inner(lin, &kernel, &y, &gamma, &omega, k, profile)?,
            };
            gamma.push(slice.gamma_prev);
            omega.push(slice.omega_prev);
            solvability.push(slice.solvability_residual);
            if profile {
                y.push(slice.y);
            }
        }
        Ok(Self {
            model: *model,
            hopf: *hp,
            kernel,
            y,
            gamma,
            omega,
            solvability,
        })
    }

    /// Highest order `K` with a profile coefficient.
    pub fn order(&self) -> usize {
        self.y.len() - 1
    }

    /// Truncated sums at `ε`: the profile through order `K`, and `γ(ε)`, `ω(ε)`
    /// through order `K + 1` when available. Carrying the parameter one order
    /// further keeps the orbit at that `γ` within `O(ε^{K+1})` of the profile.
    pub fn evaluate(&self, epsilon: f64, order: usize) -> Result<PeriodicGuess> {
        if order > self.order() {
            return Err(Error::OrderUnavailable {
                requested: order,
                available: self.order(),
            });
        }
        let mut y = FourierSeries2::zeros(0);
        for k in 1..=order {
            y.add_scaled(epsilon.powi(k as i32), &self.y[k]);
        }
        let top = (order + 1).min(self.gamma.len() - 1);
        let poly = |c: &[f64]| c[..=top].iter().rev().fold(0.0, |acc, &x| acc * epsilon + x);
        let gamma = poly(&self.gamma);
        let omega = poly(&self.omega);
        if !(omega > 0.0) {
            return Err(Error::NonpositiveFrequency(omega));
        }
        Ok(PeriodicGuess {
            y,
            gamma,
            omega,
            period: 2.0 * PI / omega,
            epsilon,
            order,
        })
    }

    /// Sup over 512 samples of `|ω y′(t) − γ F(y(t), y(t−ω), y(t−s0ω))|` for the
    /// truncated expansion.
    pub fn defect(&self, epsilon: f64, order: usize) -> Result<f64> {
        let g = self.evaluate(epsilon, order)?;
        Ok(guess_defect(&self.model, &g))
    }

    /// `ε` at which the mode-1 part of the profile has relative size `rho`.
    ///
    /// Since every order carries one copy of `ŷ1(1)`, the mode-1 amplitude is
    /// `η = ε/(1 − ε)` times that of `y_1`; with `a = ρ / max(sup|U1|/u0, sup|V1|/v0)`
    /// this gives `ε = a/(1 + a) < 1`.
    pub fn auto_epsilon(&self, rho: f64) -> f64 {
        let y1 = &self.y[1];
        let su = y1.u.sup_norm() / self.model.eq.u0;
        let sv = y1.v.sup_norm() / self.model.eq.v0;
        let a = rho / su.max(sv);
        a / (1.0 + a)
    }

    pub fn order_table(&self, epsilon: f64) -> Vec<OrderRow> {
        (0..=self.order())
            .map(|k| {
                let sup = self.y[k].sup_norm();
                OrderRow {
                    k,
                    gamma_k: self.gamma[k],
                    omega_k: self.omega[k],
                    sup_norm: sup,
                    eps_k_sup_norm: epsilon.powi(k as i32) * sup,
                }
            })
            .collect()
    }

    pub fn to_json(&self) -> ExpansionJson {
        ExpansionJson {
            hopf: self.hopf,
            orders: (0..=self.order())
                .map(|k| OrderJson {
                    k,
                    gamma_k: self.gamma[k],
                    omega_k: self.omega[k],
                    series: self.y[k].to_json(),
                })
                .collect(),
        }
    }
}

/// Residual of `ω y′ = γ F(…)` for a guess, sup over 512 samples.
pub fn guess_defect(model: &Model, g: &PeriodicGuess) -> f64 {
    let dy = g.y.differentiate();
    let s0 = model.s0();
    crate::par::max_range(DEFECT_SAMPLES, |i| {
        let t = 2.0 * PI * i as f64 / DEFECT_SAMPLES as f64;
        let p = g.y.eval(t);
        let q = g.y.eval(t - g.omega);
        let w = g.y.eval(t - s0 * g.omega);
        let f = model.rhs(p, q, w);
        let d = dy.eval(t);
        (g.omega * d[0] - g.gamma * f[0]).hypot(g.omega * d[1] - g.gamma * f[1])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hopf::hopf_points;
    use crate::model::Preset;

    fn setup(s0: f64) -> (Model, HopfPoint) {
        let m = Model::from_preset(Preset::Set1, s0).unwrap();
        let hp = hopf_points(&m.lin, 30.0).unwrap()[0];
        (m, hp)
    }

    #[test]
    fn kernel_vectors_annihilate_delta() {
        let (m, hp) = setup(1.5);
        let k = build_kernel(&m.lin, &hp).unwrap();
        let d = m.lin.delta(I * hp.omega0, hp.gamma0);
        assert!((d * k.yhat1).norm() < 1e-10);
        let left = d.transpose() * k.psi_hat;
        assert!(left.norm() < 1e-10);
        assert!(k.det_c < 0.0);
        assert!((k.yhat1[1].norm() - 2.0 * hp.gamma0 * m.eq.u0).abs() < 1e-12);
    }

    #[test]
    fn c_matches_projection_of_bracket() {
        let (m, hp) = setup(1.5);
        let k = build_kernel(&m.lin, &hp).unwrap();
        let cg = k.project(&(k.bracket(&m.lin, 1, 1.0, 0.0) * k.yhat1));
        let cw = k.project(&(k.bracket(&m.lin, 1, 0.0, 1.0) * k.yhat1));
        let expect = Matrix2::new(cg.re, cw.re, cg.im, cw.im);
        assert!((expect - k.c).norm() < 1e-10 * k.c.norm());
        let closed = det_c_closed_form(&m.lin, hp.gamma0, hp.omega0);
        assert!((closed - k.det_c).abs() < 1e-10 * closed.abs());
    }

    #[test]
    fn order2_structure() {
        let (m, hp) = setup(1.5);
        let k = build_kernel(&m.lin, &hp).unwrap();
        let s = order2(&m.lin, &k, &first_order(&k)).unwrap();
        assert!(s.gamma_prev.abs() < 1e-10 && s.omega_prev.abs() < 1e-10);
        assert!(s.r_hat.coeff(0)[0].im.abs() < 1e-14);
        assert!(s.r_hat.coeff(0)[1].im.abs() < 1e-14);
        assert!(s.g_hat.support() <= 2);
        assert!((s.y.coeff(1) - k.yhat1).norm() < 1e-12);
    }

    #[test]
    fn generic_path_reproduces_dedicated_orders() {
        for s0 in [1.5, 10.0] {
            let (m, hp) = setup(s0);
            let k = build_kernel(&m.lin, &hp).unwrap();
            let y1 = first_order(&k);
            let zero = FourierSeries2::zeros(0);
            let a2 = order2(&m.lin, &k, &y1).unwrap();
            let b2 = order_k(&m.lin, &k, &[zero.clone(), y1.clone()], &[hp.gamma0], &[hp.omega0]).unwrap();
            let tol = 1e-11 * (1.0 + a2.y.l2_norm());
            assert!(a2.g_hat.add(&b2.g_hat.scale(-1.0)).l2_norm() < tol);
            assert!(a2.y.add(&b2.y.scale(-1.0)).l2_norm() < tol);
            let a3 = order3(&m.lin, &k, &y1, &a2.y).unwrap();
            let b3 = order_k(
                &m.lin,
                &k,
                &[zero, y1, a2.y.clone()],
                &[hp.gamma0, 0.0],
                &[hp.omega0, 0.0],
            )
            .unwrap();
            let tol = 1e-11 * (1.0 + a3.y.l2_norm());
            assert!(a3.y.add(&b3.y.scale(-1.0)).l2_norm() < tol);
            assert!((a3.gamma_prev - b3.gamma_prev).abs() < 1e-11 * (1.0 + a3.gamma_prev.abs()));
            assert!((a3.omega_prev - b3.omega_prev).abs() < 1e-11 * (1.0 + a3.omega_prev.abs()));
        }
    }

    #[test]
    fn order_overflow() {
        let (m, hp) = setup(1.5);
        assert!(matches!(
            PLExpansion::build_with_max(&m, &hp, 9, 8),
            Err(Error::OrderOverflow { .. })
        ));
    }

    #[test]
    fn evaluate_at_zero_is_equilibrium() {
        let (m, hp) = setup(1.5);
        let e = PLExpansion::build(&m, &hp, 3).unwrap();
        let g = e.evaluate(0.0, 3).unwrap();
        assert_eq!(g.y.l2_norm(), 0.0);
        assert_eq!(g.gamma, hp.gamma0);
        assert_eq!(g.omega, hp.omega0);
        assert!(e.defect(0.0, 3).unwrap() < 1e-12);
        assert!(matches!(e.evaluate(0.1, 4), Err(Error::OrderUnavailable { .. })));
    }
}
