//! The two-delay activator–inhibitor system, its equilibria and linearization.
//!
//! Centered at an equilibrium `(u0, v0)` the system reads
//!
//! ```text
//! u'(t) = γ [ (u(t)+u0)² / (v(t−s0)+v0) − b (u(t)+u0) + a ]
//! v'(t) = γ [ (u(t−1)+u0)² − (v(t)+v0) + c ]
//! ```
//!
//! Everything downstream works with the centered form `x' = γ f(x(t), x(t−1), x(t−s0))`.

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub type CMat2 = Matrix2<Complex64>;
pub type CVec2 = Vector2<Complex64>;

/// Roots below this are treated as the boundary of the first quadrant.
const POSITIVE_FLOOR: f64 = 1e-9;

/// The constants `a, b, c` and the delay ratio `s0 = τ_P / τ_Q`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub s0: f64,
}

impl ModelParams {
    pub fn new(a: f64, b: f64, c: f64, s0: f64) -> Result<Self> {
        let p = Self { a, b, c, s0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParams(what.to_string()));
        if !(self.a.is_finite() && self.a > 0.0) {
            return bad("a must be positive");
        }
        if !(self.b.is_finite() && self.b > 0.0) {
            return bad("b must be positive");
        }
        if !(self.c.is_finite() && self.c >= 0.0) {
            return bad("c must be nonnegative");
        }
        if !(self.s0.is_finite() && self.s0 > 1.0) {
            return bad("s0 must exceed 1");
        }
        Ok(())
    }

    /// `τ = (s0 + 1) / 2`, half the sum of the two delays.
    pub fn tau(&self) -> f64 {
        0.5 * (self.s0 + 1.0)
    }
}

/// The three published parameter sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Set1,
    Set2,
    Set3,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Set1, Preset::Set2, Preset::Set3];

    /// Delay ratios examined for every set.
    pub const DELAY_RATIOS: [f64; 5] = [1.5, 2.0, 3.0, 5.0, 10.0];

    pub fn params(self, s0: f64) -> Result<ModelParams> {
        match self {
            Preset::Set1 => ModelParams::new(0.1, 11.0 / 60.0, 11.0, s0),
            Preset::Set2 => ModelParams::new(0.1, 1.0, 1e-6, s0),
            Preset::Set3 => ModelParams::new(0.1, 1.0, 0.0, s0),
        }
    }

    /// Index (ascending `u0`) of the equilibrium each set is studied at.
    /// Set 1 has roots 1, 2, 3 and is analysed at `(3, 20)`.
    pub fn equilibrium_index(self) -> usize {
        match self {
            Preset::Set1 => 2,
            Preset::Set2 | Preset::Set3 => 0,
        }
    }

    /// Upper end of the Hopf search window used for each set.
    pub fn gamma_max(self) -> f64 {
        match self {
            Preset::Set1 => 30.0,
            Preset::Set2 | Preset::Set3 => 2.0,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Preset::Set1 => "set1",
            Preset::Set2 => "set2",
            Preset::Set3 => "set3",
        };
        f.write_str(s)
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "set1" | "1" => Ok(Preset::Set1),
            "set2" | "2" => Ok(Preset::Set2),
            "set3" | "3" => Ok(Preset::Set3),
            other => Err(Error::InvalidParams(format!("unknown preset '{other}'"))),
        }
    }
}

/// A positive equilibrium `(u0, v0)` of the uncentered system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub u0: f64,
    pub v0: f64,
}

/// Residual of `u³ + c u − ((a+1)/b) u² − a c / b`.
pub fn cubic_residual(params: &ModelParams, u: f64) -> f64 {
    let ModelParams { a, b, c, .. } = *params;
    u * u * u + c * u - (a + 1.0) / b * u * u - a * c / b
}

fn cubic_derivative(params: &ModelParams, u: f64) -> f64 {
    let ModelParams { a, b, c, .. } = *params;
    3.0 * u * u + c - 2.0 * (a + 1.0) / b * u
}

/// Real roots of the monic cubic `u³ + k2 u² + k1 u + k0`.
fn real_cubic_roots(k2: f64, k1: f64, k0: f64) -> Vec<f64> {
    let shift = k2 / 3.0;
    let p = k1 - k2 * k2 / 3.0;
    let q = 2.0 * k2 * k2 * k2 / 27.0 - k2 * k1 / 3.0 + k0;
    let disc = 4.0 * p * p * p + 27.0 * q * q;

    let xs: Vec<f64> = if p < 0.0 && disc <= 0.0 {
        let r = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (2.0 * p) * (-3.0 / p).sqrt()).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        (0..3)
            .map(|k| r * (phi - 2.0 * PI * k as f64 / 3.0).cos())
            .collect()
    } else if p == 0.0 {
        vec![(-q).cbrt()]
    } else {
        let s = (q * q / 4.0 + p * p * p / 27.0).max(0.0).sqrt();
        vec![(-q / 2.0 + s).cbrt() + (-q / 2.0 - s).cbrt()]
    };
    xs.into_iter().map(|x| x - shift).collect()
}

/// All equilibria in the open first quadrant, sorted by `u0`.
pub fn solve_equilibria(params: &ModelParams) -> Result<Vec<Equilibrium>> {
    params.validate()?;
    let ModelParams { a, b, c, .. } = *params;
    let mut roots = real_cubic_roots(-(a + 1.0) / b, c, -a * c / b);

    for u in roots.iter_mut() {
        // Newton polish; stop once the residual no longer improves.
        for _ in 0..3 {
            let r = cubic_residual(params, *u);
            let d = cubic_derivative(params, *u);
            if r == 0.0 || d == 0.0 {
                break;
            }
            let next = *u - r / d;
            if cubic_residual(params, next).abs() >= r.abs() {
                break;
            }
            *u = next;
        }
    }

    roots.retain(|&u| u > POSITIVE_FLOOR);
    roots.sort_by(|x, y| x.total_cmp(y));
    roots.dedup_by(|x, y| (*x - *y).abs() <= 1e-9 * y.abs().max(1.0));

    if roots.is_empty() {
        return Err(Error::NoPositiveRoot);
    }
    Ok(roots
        .into_iter()
        .map(|u0| Equilibrium {
            u0,
            v0: u0 * u0 + c,
        })
        .collect())
}

/// Picks one equilibrium by index from [`solve_equilibria`].
pub fn equilibrium_at(params: &ModelParams, index: usize) -> Result<Equilibrium> {
    let all = solve_equilibria(params)?;
    let available = all.len();
    all.get(index)
        .copied()
        .ok_or(Error::EquilibriumIndex { index, available })
}

/// Linearization `A = D_p f(0)`, `B1 = D_q f(0)`, `B2 = D_w f(0)` and the reduced
/// coefficients of the characteristic function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearData {
    pub a_mat: Matrix2<f64>,
    pub b1_mat: Matrix2<f64>,
    pub b2_mat: Matrix2<f64>,
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub tau: f64,
    pub s0: f64,
    pub u0: f64,
    pub v0: f64,
}

pub fn linearize(params: &ModelParams, eq: &Equilibrium) -> LinearData {
    let Equilibrium { u0, v0 } = *eq;
    let b0 = -2.0 * u0 / v0 + params.b;
    let b1 = b0 + 1.0;
    let b2 = 2.0 * u0 * u0 * u0 / (v0 * v0);
    let r = u0 / v0;
    LinearData {
        a_mat: Matrix2::new(2.0 * r - params.b, 0.0, 0.0, -1.0),
        b1_mat: Matrix2::new(0.0, 0.0, 2.0 * u0, 0.0),
        b2_mat: Matrix2::new(0.0, -r * r, 0.0, 0.0),
        b0,
        b1,
        b2,
        tau: params.tau(),
        s0: params.s0,
        u0,
        v0,
    }
}

impl LinearData {
    /// `M(λ, γ) = λ² + γ b1 λ + γ² b0 + γ² b2 e^{−2τλ}`.
    pub fn char_value(&self, lambda: Complex64, gamma: f64) -> Complex64 {
        lambda * lambda
            + gamma * self.b1 * lambda
            + gamma * gamma * self.b0
            + gamma * gamma * self.b2 * (-2.0 * self.tau * lambda).exp()
    }

    /// `∂M/∂λ`.
    pub fn char_derivative(&self, lambda: Complex64, gamma: f64) -> Complex64 {
        2.0 * lambda + gamma * self.b1
            - 2.0 * self.tau * gamma * gamma * self.b2 * (-2.0 * self.tau * lambda).exp()
    }

    /// `Δ̃(λ, γ, z) = λ I − γ (A + e^{−z} B1 + e^{−z s0} B2)`.
    pub fn delta_tilde(&self, lambda: Complex64, gamma: f64, z: Complex64) -> CMat2 {
        let e1 = (-z).exp();
        let es = (-z * self.s0).exp();
        let lin = self.a_mat.map(Complex64::from)
            + self.b1_mat.map(|x| e1 * x)
            + self.b2_mat.map(|x| es * x);
        CMat2::identity() * lambda - lin * Complex64::from(gamma)
    }

    /// Characteristic matrix `Δ(λ, γ) = Δ̃(λ, γ, λ)`.
    pub fn delta(&self, lambda: Complex64, gamma: f64) -> CMat2 {
        self.delta_tilde(lambda, gamma, lambda)
    }

    /// `e^{−n i ω0} B1 + s0 e^{−n i ω0 s0} B2`, the coefficient of the frequency
    /// correction acting through the delayed arguments.
    pub fn delay_sensitivity(&self, n: i64, omega0: f64) -> CMat2 {
        let z = Complex64::new(0.0, n as f64 * omega0);
        let e1 = (-z).exp();
        let es = (-z * self.s0).exp();
        self.b1_mat.map(|x| e1 * x) + self.b2_mat.map(|x| es * x * self.s0)
    }
}

/// Characteristic matrix written entrywise, independent of the `A, B1, B2` route.
pub fn delta_matrix(lin: &LinearData, eq: &Equilibrium, lambda: Complex64, gamma: f64) -> CMat2 {
    let Equilibrium { u0, v0 } = *eq;
    let r = u0 / v0;
    CMat2::new(
        lambda + gamma * lin.b0,
        gamma * r * r * (-lambda * lin.s0).exp(),
        -2.0 * gamma * u0 * (-lambda).exp(),
        lambda + gamma,
    )
}

/// Determinant of a complex 2×2 matrix.
pub fn det2(m: &CMat2) -> Complex64 {
    m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
}

/// Closed-form solve of `m x = rhs`; `None` when `|det m| < floor`.
pub fn solve2(m: &CMat2, rhs: &CVec2, floor: f64) -> Option<CVec2> {
    let det = det2(m);
    if !(det.norm() >= floor) {
        return None;
    }
    Some(CVec2::new(
        (m[(1, 1)] * rhs[0] - m[(0, 1)] * rhs[1]) / det,
        (m[(0, 0)] * rhs[1] - m[(1, 0)] * rhs[0]) / det,
    ))
}

/// Parameters, equilibrium and linearization bundled for the numerical modules.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub params: ModelParams,
    pub eq: Equilibrium,
    pub lin: LinearData,
}

/// Partial derivatives of `f` at a point. `f1` depends on `p1` and `w2`, `f2` on
/// `q1` and `p2` only.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RhsPartials {
    pub df1_dp1: f64,
    pub df1_dw2: f64,
    pub df2_dq1: f64,
    pub df2_dp2: f64,
}

impl Model {
    pub fn new(params: ModelParams, equilibrium_index: usize) -> Result<Self> {
        let eq = equilibrium_at(&params, equilibrium_index)?;
        Ok(Self::with_equilibrium(params, eq))
    }

    pub fn with_equilibrium(params: ModelParams, eq: Equilibrium) -> Self {
        let lin = linearize(&params, &eq);
        Self { params, eq, lin }
    }

    pub fn from_preset(preset: Preset, s0: f64) -> Result<Self> {
        Self::new(preset.params(s0)?, preset.equilibrium_index())
    }

    pub fn s0(&self) -> f64 {
        self.params.s0
    }

    /// `f(p, q, w)` with `p = x(t)`, `q = x(t−1)`, `w = x(t−s0)` in centered coordinates.
    pub fn rhs(&self, p: [f64; 2], q: [f64; 2], w: [f64; 2]) -> [f64; 2] {
        let ModelParams { a, b, c, .. } = self.params;
        let Equilibrium { u0, v0 } = self.eq;
        let pu = p[0] + u0;
        let qu = q[0] + u0;
        [
            pu * pu / (w[1] + v0) - b * pu + a,
            qu * qu - (p[1] + v0) + c,
        ]
    }

    pub fn rhs_partials(&self, p: [f64; 2], q: [f64; 2], w: [f64; 2]) -> RhsPartials {
        let Equilibrium { u0, v0 } = self.eq;
        let pu = p[0] + u0;
        let den = w[1] + v0;
        RhsPartials {
            df1_dp1: 2.0 * pu / den - self.params.b,
            df1_dw2: -pu * pu / (den * den),
            df2_dq1: 2.0 * (q[0] + u0),
            df2_dp2: -1.0,
        }
    }
}
