//! Hopf points `(γ0, ω0)`: purely imaginary roots `λ = iω0` of `M(λ, γ0) = 0`.
//!
//! Writing `Ω = cos(2ωτ)`, the real and imaginary parts of `M(iω, γ) = 0` reduce to
//! the quadratic `b2² Ω² + b1² b2 Ω + (b0 b1² − b2²) = 0` (when `b1 ≠ 0`) and
//! `γ = b1 ω / (b2 sin 2ωτ)`. When `b1 = 0` the crossings sit at
//! `ω = kπ/τ`, `γ = kπ / (τ √(b2 − 1))`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::LinearData;

/// `|M(iω0, γ0)|` bound for a certified point.
pub const CHAR_RESIDUAL_TOL: f64 = 1e-9;
/// `|det Δ(n iω0, γ0)|` must stay above this for every checked `n ≠ ±1`.
pub const NONRESONANCE_FLOOR: f64 = 1e-8;
/// `|b1|` below this selects the `b1 = 0` formulas.
pub const B1_ZERO_THRESHOLD: f64 = 1e-12;
/// Default number of harmonics checked for non-resonance.
pub const DEFAULT_N_MAX: usize = 50;
const MAX_BRANCHES: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HopfCase {
    B1Nonzero,
    B1Zero,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certification {
    pub simple_root: bool,
    pub nonresonant: bool,
    pub char_residual_ok: bool,
}

impl Certification {
    pub fn all(&self) -> bool {
        self.simple_root && self.nonresonant && self.char_residual_ok
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HopfPoint {
    pub gamma0: f64,
    pub omega0: f64,
    pub branch_index: usize,
    pub case: HopfCase,
    /// `Ω₊ = cos(2ω0τ)`; only defined for `b1 ≠ 0`.
    pub omega_plus: Option<f64>,
    pub transversality: f64,
    pub char_residual: f64,
    pub certified: Certification,
}

impl HopfPoint {
    pub fn lambda(&self) -> Complex64 {
        Complex64::new(0.0, self.omega0)
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega0
    }
}

/// Roots of the `Ω` quadratic and its discriminant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmegaRoots {
    pub omega_plus: f64,
    pub omega_minus: f64,
    pub delta: f64,
}

pub fn omega_quadratic(lin: &LinearData) -> OmegaRoots {
    let LinearData { b1, b2, .. } = *lin;
    let b1sq = b1 * b1;
    // b1² − 4b0 = (b1 − 2)², so δ ≥ 0 up to rounding.
    let delta = (b1sq * (b1 - 2.0).powi(2) + 4.0 * b2 * b2).max(0.0);
    let sq = delta.sqrt();
    OmegaRoots {
        omega_plus: (-b1sq + sq) / (2.0 * b2),
        omega_minus: (-b1sq - sq) / (2.0 * b2),
        delta,
    }
}

/// Which formulas apply to a linearization.
pub fn classify(lin: &LinearData) -> HopfCase {
    if lin.b1.abs() < B1_ZERO_THRESHOLD {
        HopfCase::B1Zero
    } else {
        HopfCase::B1Nonzero
    }
}

/// `Re dλ/dγ` at `(iω0, γ0)`.
pub fn transversality(lin: &LinearData, gamma0: f64, omega0: f64) -> Result<f64> {
    let LinearData { b0, b1, tau, .. } = *lin;
    let (g, w) = (gamma0, omega0);
    let num = 4.0 * tau * g * w.powi(4) + 2.0 * tau * g.powi(3) * w * w * (b1 * b1 - 2.0 * b0);
    let re = g * g * b1 - 2.0 * g * tau * w * w + 2.0 * g.powi(3) * tau * b0;
    let im = 2.0 * g * w + 2.0 * g * g * tau * b1 * w;
    let den = re * re + im * im;
    if !(den > 1e-300) {
        return Err(Error::DenominatorZero(den));
    }
    Ok(num / den)
}

/// Outcome of the simplicity and non-resonance checks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonresonanceReport {
    pub n_max: usize,
    /// Smallest `|det Δ(n iω0, γ0)|` over `n = 0` and `2 ≤ n ≤ n_max`.
    pub min_modulus: f64,
    pub argmin: i64,
    /// `|∂M/∂λ(iω0, γ0)|`.
    pub simple_root_modulus: f64,
    /// `4 + 4τ²γ0²(b1² − 4b0)`, positive whenever the crossing is simple.
    pub discriminant: f64,
    pub floor: f64,
}

/// Checks that `iω0` is a simple root and that no other harmonic `n iω0`
/// (including `n = 0`, which the Fourier solves also invert) is a root.
/// Sets the corresponding flags on `hp`.
pub fn certify_nonresonance(
    lin: &LinearData,
    hp: &mut HopfPoint,
    n_max: usize,
) -> Result<NonresonanceReport> {
    if n_max < 2 {
        return Err(Error::InvalidParams("n_max must be at least 2".into()));
    }
    // M(−λ̄) = conj M(λ), so n ≥ 0 suffices.
    let (argmin, min_modulus) = std::iter::once(0)
        .chain(2..=n_max as i64)
        .map(|n| {
            let lambda = Complex64::new(0.0, n as f64 * hp.omega0);
            (n, lin.char_value(lambda, hp.gamma0).norm())
        })
        .fold((0, f64::INFINITY), |best, cur| {
            if cur.1 < best.1 {
                cur
            } else {
                best
            }
        });
    let simple_root_modulus = lin.char_derivative(hp.lambda(), hp.gamma0).norm();
    let discriminant = 4.0
        + 4.0 * lin.tau.powi(2) * hp.gamma0.powi(2) * (lin.b1 * lin.b1 - 4.0 * lin.b0);
    let report = NonresonanceReport {
        n_max,
        min_modulus,
        argmin,
        simple_root_modulus,
        discriminant,
        floor: NONRESONANCE_FLOOR,
    };
    hp.certified.simple_root = simple_root_modulus > NONRESONANCE_FLOOR && discriminant > 0.0;
    hp.certified.nonresonant = min_modulus > NONRESONANCE_FLOOR;
    if !hp.certified.nonresonant {
        return Err(Error::ResonanceDetected {
            n: argmin,
            modulus: min_modulus,
        });
    }
    Ok(report)
}

fn make_point(
    lin: &LinearData,
    gamma0: f64,
    omega0: f64,
    branch_index: usize,
    case: HopfCase,
    omega_plus: Option<f64>,
) -> Result<HopfPoint> {
    let char_residual = lin
        .char_value(Complex64::new(0.0, omega0), gamma0)
        .norm();
    let mut hp = HopfPoint {
        gamma0,
        omega0,
        branch_index,
        case,
        omega_plus,
        transversality: transversality(lin, gamma0, omega0)?,
        char_residual,
        certified: Certification {
            char_residual_ok: char_residual < CHAR_RESIDUAL_TOL,
            ..Default::default()
        },
    };
    // A resonance only clears the flag; the point is still reported.
    match certify_nonresonance(lin, &mut hp, DEFAULT_N_MAX) {
        Ok(_) | Err(Error::ResonanceDetected { .. }) => {}
        Err(e) => return Err(e),
    }
    Ok(hp)
}

/// All Hopf points with `0 < γ0 ≤ gamma_max`, sorted by `γ0`.
pub fn hopf_points(lin: &LinearData, gamma_max: f64) -> Result<Vec<HopfPoint>> {
    let LinearData { b0, b1, b2, tau, .. } = *lin;
    let mut out = Vec::new();
    match classify(lin) {
        HopfCase::B1Nonzero => {
            if b0 * b0 - b2 * b2 >= 0.0 {
                return Err(Error::CaseViolation(format!(
                    "b1 != 0 requires b0^2 - b2^2 < 0, got {:e}",
                    b0 * b0 - b2 * b2
                )));
            }
            let roots = omega_quadratic(lin);
            let omega_plus = roots.omega_plus;
            // sin(2ωτ) must share the sign of b1.
            let base = if b1 > 0.0 {
                omega_plus.acos()
            } else {
                2.0 * PI - omega_plus.acos()
            };
            let sin_base = base.sin();
            for j in 0..MAX_BRANCHES {
                let omega = (base + 2.0 * PI * j as f64) / (2.0 * tau);
                let gamma = b1 * omega / (b2 * sin_base);
                if gamma > gamma_max {
                    break;
                }
                out.push(make_point(
                    lin,
                    gamma,
                    omega,
                    j,
                    HopfCase::B1Nonzero,
                    Some(omega_plus),
                )?);
            }
        }
        HopfCase::B1Zero => {
            if b2 <= 1.0 {
                return Err(Error::CaseViolation(format!(
                    "b1 = 0 requires b2 > 1, got b2 = {b2}"
                )));
            }
            let root = (b2 - 1.0).sqrt();
            for k in 1..=MAX_BRANCHES {
                let omega = k as f64 * PI / tau;
                let gamma = omega / root;
                if gamma > gamma_max {
                    break;
                }
                out.push(make_point(lin, gamma, omega, k - 1, HopfCase::B1Zero, None)?);
            }
        }
    }
    out.sort_by(|a, b| a.gamma0.total_cmp(&b.gamma0));
    Ok(out)
}
