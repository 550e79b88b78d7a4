//! Finite Fourier series of real 2π-periodic functions.
//!
//! Only the coefficients for `n ≥ 0` are stored; `ĉ(−n)` is always produced as
//! `conj(ĉ(n))`, so every series is real-valued by construction. The zero mode
//! is kept real.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::model::CVec2;

const SUP_SAMPLES: usize = 512;
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A real scalar Fourier series `Σ_{|n|≤N} ĉ(n) e^{int}`.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierScalar {
    coeffs: Vec<Complex64>,
}

impl FourierScalar {
    pub fn zeros(support: usize) -> Self {
        Self {
            coeffs: vec![ZERO; support + 1],
        }
    }

    pub fn constant(c: f64) -> Self {
        Self {
            coeffs: vec![Complex64::new(c, 0.0)],
        }
    }

    /// Builds a series from `ĉ(0), ĉ(1), …, ĉ(N)`. The imaginary part of `ĉ(0)`
    /// is discarded.
    pub fn from_nonnegative(mut coeffs: Vec<Complex64>) -> Self {
        if coeffs.is_empty() {
            coeffs.push(ZERO);
        }
        coeffs[0].im = 0.0;
        Self { coeffs }
    }

    pub fn support(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Coefficients for `n = 0..=N`.
    pub fn nonnegative(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeff(&self, n: i64) -> Complex64 {
        let k = n.unsigned_abs() as usize;
        match self.coeffs.get(k) {
            None => ZERO,
            Some(&c) if n < 0 => c.conj(),
            Some(&c) => c,
        }
    }

    /// Sets `ĉ(n)` (and implicitly `ĉ(−n)`); grows the support if needed.
    pub fn set(&mut self, n: usize, c: Complex64) {
        if n >= self.coeffs.len() {
            self.coeffs.resize(n + 1, ZERO);
        }
        self.coeffs[n] = if n == 0 { Complex64::new(c.re, 0.0) } else { c };
    }

    pub fn eval(&self, t: f64) -> f64 {
        let mut acc = self.coeffs[0].re;
        let w = Complex64::from_polar(1.0, t);
        let mut z = w;
        for c in &self.coeffs[1..] {
            acc += 2.0 * (c * z).re;
            z *= w;
        }
        acc
    }

    /// `(f ∗ g)(n) = Σ_{n1+n2=n} f̂(n1) ĝ(n2)`, the coefficients of the product.
    pub fn cauchy(&self, other: &Self) -> Self {
        let nf = self.support() as i64;
        let ng = other.support() as i64;
        let support = (nf + ng) as usize;
        let mut out = Vec::with_capacity(support + 1);
        for n in 0..=(nf + ng) {
            let lo = (-nf).max(n - ng);
            let hi = nf.min(n + ng);
            let mut acc = ZERO;
            for n1 in lo..=hi {
                acc += self.coeff(n1) * other.coeff(n - n1);
            }
            out.push(acc);
        }
        Self::from_nonnegative(out)
    }

    /// Multiplies coefficient `n ≥ 0` by `m(n)`; the multiplier at `−n` is taken to
    /// be `conj(m(n))`, which holds for every Fourier-diagonal real operator.
    pub fn map_modes(&self, mut m: impl FnMut(i64) -> Complex64) -> Self {
        Self::from_nonnegative(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(n, &c)| c * m(n as i64))
                .collect(),
        )
    }

    /// `t ↦ f(t − s ω)`.
    pub fn delay_shift(&self, s: f64, omega: f64) -> Self {
        self.map_modes(|n| Complex64::from_polar(1.0, -(n as f64) * omega * s))
    }

    pub fn differentiate(&self) -> Self {
        self.map_modes(|n| Complex64::new(0.0, n as f64))
    }

    pub fn scale(&self, k: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * k).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let len = self.coeffs.len().max(other.coeffs.len());
        Self::from_nonnegative(
            (0..len as i64)
                .map(|n| self.coeff(n) + other.coeff(n))
                .collect(),
        )
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    /// `self + k·other`.
    pub fn add_scaled(&mut self, k: f64, other: &Self) {
        if other.coeffs.len() > self.coeffs.len() {
            self.coeffs.resize(other.coeffs.len(), ZERO);
        }
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b * k;
        }
    }

    /// Largest `|n|` with a nonzero coefficient (`0` for the zero series).
    pub fn effective_support(&self) -> usize {
        self.coeffs.iter().rposition(|c| *c != ZERO).unwrap_or(0)
    }

    /// RMS value over one period, by Parseval.
    pub fn l2_norm(&self) -> f64 {
        let tail: f64 = self.coeffs[1..].iter().map(|c| c.norm_sqr()).sum();
        (self.coeffs[0].norm_sqr() + 2.0 * tail).sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        sup_on_circle(|t| self.eval(t).abs())
    }
}

/// A real ℝ²-valued Fourier series, one [`FourierScalar`] per component.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierSeries2 {
    pub u: FourierScalar,
    pub v: FourierScalar,
}

impl FourierSeries2 {
    pub fn zeros(support: usize) -> Self {
        Self {
            u: FourierScalar::zeros(support),
            v: FourierScalar::zeros(support),
        }
    }

    pub fn new(u: FourierScalar, v: FourierScalar) -> Self {
        Self { u, v }
    }

    pub fn support(&self) -> usize {
        self.u.support().max(self.v.support())
    }

    pub fn coeff(&self, n: i64) -> CVec2 {
        CVec2::new(self.u.coeff(n), self.v.coeff(n))
    }

    pub fn set(&mut self, n: usize, c: CVec2) {
        self.u.set(n, c[0]);
        self.v.set(n, c[1]);
    }

    pub fn eval(&self, t: f64) -> [f64; 2] {
        [self.u.eval(t), self.v.eval(t)]
    }

    pub fn delay_shift(&self, s: f64, omega: f64) -> Self {
        Self::new(self.u.delay_shift(s, omega), self.v.delay_shift(s, omega))
    }

    pub fn differentiate(&self) -> Self {
        Self::new(self.u.differentiate(), self.v.differentiate())
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::new(self.u.scale(k), self.v.scale(k))
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(self.u.add(&other.u), self.v.add(&other.v))
    }

    pub fn add_scaled(&mut self, k: f64, other: &Self) {
        self.u.add_scaled(k, &other.u);
        self.v.add_scaled(k, &other.v);
    }

    pub fn effective_support(&self) -> usize {
        self.u.effective_support().max(self.v.effective_support())
    }

    /// RMS of the Euclidean norm over one period.
    pub fn l2_norm(&self) -> f64 {
        self.u.l2_norm().hypot(self.v.l2_norm())
    }

    /// `sup_t |y(t)|` with the Euclidean norm on ℝ².
    pub fn sup_norm(&self) -> f64 {
        sup_on_circle(|t| {
            let [a, b] = self.eval(t);
            a.hypot(b)
        })
    }

    /// `sup_t |y(t) − ȳ|`, the amplitude about the mean.
    pub fn amplitude(&self) -> f64 {
        let mut centered = self.clone();
        centered.u.set(0, ZERO);
        centered.v.set(0, ZERO);
        centered.sup_norm()
    }

    pub fn to_json(&self) -> SeriesJson {
        let n = self.support();
        SeriesJson {
            n,
            coeffs: (0..=n as i64)
                .map(|k| {
                    let c = self.coeff(k);
                    [c[0].re, c[0].im, c[1].re, c[1].im]
                })
                .collect(),
        }
    }

    pub fn from_json(json: &SeriesJson) -> Self {
        let mut s = Self::zeros(json.n);
        for (k, c) in json.coeffs.iter().enumerate().take(json.n + 1) {
            s.set(
                k,
                CVec2::new(Complex64::new(c[0], c[1]), Complex64::new(c[2], c[3])),
            );
        }
        s
    }
}

/// Wire format `{"N": int, "coeffs": [[re_u, im_u, re_v, im_v], …]}` for `n = 0..N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesJson {
    #[serde(rename = "N")]
    pub n: usize,
    pub coeffs: Vec<[f64; 4]>,
}

/// Maximum of a 2π-periodic function: dense sampling then golden-section
/// refinement around the best sample.
fn sup_on_circle(f: impl Fn(f64) -> f64) -> f64 {
    let h = 2.0 * PI / SUP_SAMPLES as f64;
    let (imax, fmax) = (0..SUP_SAMPLES)
        .map(|i| (i, f(i as f64 * h)))
        .fold((0, f64::NEG_INFINITY), |best, cur| {
            if cur.1 > best.1 {
                cur
            } else {
                best
            }
        });
    let centre = imax as f64 * h;
    let refined = golden_max(&f, centre - h, centre + h, 1e-12);
    fmax.max(refined)
}

/// Golden-section search for a maximum on `[lo, hi]`.
pub(crate) fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        }
    }
    f1.max(f2)
}
