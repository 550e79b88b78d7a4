//! Taylor recurrences in the amplitude parameter ε.
//!
//! A delayed Fourier mode `ŷ(n) e^{in(t − sω(ε))}` carries the factor
//! `e(ε) = e^{−insω(ε)} = Σ e_j ε^j`, whose coefficients obey
//! `e_j = (1/j) Σ_{l<j} (j−l)(−insω_{j−l}) e_l`. Quotients of jets are built by the
//! explicit division recursion so that the dependence on the newest frequency
//! coefficient stays visible.

use num_complex::Complex64;

use crate::fourier::FourierScalar;
use crate::model::CVec2;

/// Taylor coefficients `e_0..e_J` of `ε ↦ e^{−insω(ε)}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpDelayCoeffs {
    pub n: i64,
    pub s: f64,
    pub e: Vec<Complex64>,
}

impl ExpDelayCoeffs {
    /// `ẽ_{j−1} = e_j + insω_j e_0`: the part of `e_j` that does not involve `ω_j`.
    /// `None` for `j = 0`.
    pub fn e_tilde(&self, j: usize, omega_jet: &[f64]) -> Option<Complex64> {
        if j == 0 || j >= self.e.len() {
            return None;
        }
        let wj = omega_jet.get(j).copied().unwrap_or(0.0);
        Some(self.e[j] + Complex64::new(0.0, self.n as f64 * self.s * wj) * self.e[0])
    }
}

/// Coefficients `e_0..=e_J`. Entries of `omega_jet` beyond its length are taken as zero.
pub fn exp_delay_coeffs(omega_jet: &[f64], n: i64, s: f64, j_max: usize) -> ExpDelayCoeffs {
    let w = |j: usize| omega_jet.get(j).copied().unwrap_or(0.0);
    let ins = Complex64::new(0.0, n as f64 * s);
    let mut e = Vec::with_capacity(j_max + 1);
    e.push((-ins * w(0)).exp());
    for j in 1..=j_max {
        let acc: Complex64 = (0..j)
            .map(|l| -ins * ((j - l) as f64 * w(j - l)) * e[l])
            .sum();
        e.push(acc / j as f64);
    }
    ExpDelayCoeffs { n, s, e }
}

/// Taylor coefficients `e_j ŷ(n)`, `j = 0..=J`, of the delayed mode `ŷ(n) e^{−insω(ε)}`.
pub fn delayed_mode_jet(
    yhat: CVec2,
    omega_jet: &[f64],
    n: i64,
    s: f64,
    j_max: usize,
) -> Vec<CVec2> {
    exp_delay_coeffs(omega_jet, n, s, j_max)
        .e
        .into_iter()
        .map(|e| yhat * e)
        .collect()
}

/// Jet of `t ↦ Y(t − sω(ε), ε)` given the jet `Y_0..Y_K` of a scalar series.
///
/// Order `m` of the result is `Σ_{i≤m} e_i(n) Ŷ_{m−i}(n)` mode by mode.
pub fn delayed_jet(jet: &[FourierScalar], omega_jet: &[f64], s: f64) -> Vec<FourierScalar> {
    let k_max = jet.len().saturating_sub(1);
    let support = jet.iter().map(FourierScalar::support).max().unwrap_or(0);
    let mut out: Vec<FourierScalar> = (0..jet.len()).map(|_| FourierScalar::zeros(0)).collect();
    for n in 0..=support {
        let e = exp_delay_coeffs(omega_jet, n as i64, s, k_max).e;
        for (m, slot) in out.iter_mut().enumerate() {
            let c: Complex64 = (0..=m).map(|i| e[i] * jet[m - i].coeff(n as i64)).sum();
            if c != Complex64::new(0.0, 0.0) || n == 0 {
                slot.set(n, c);
            }
        }
    }
    out
}

/// Jet `d_0..d_K` of `(u0 + U(t, ε)) / (v0 + V(t − s0ω(ε), ε))`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuotientJet {
    pub d: Vec<FourierScalar>,
    /// Jet of the delayed denominator perturbation `V(t − s0ω(ε), ε)`.
    pub v_delayed: Vec<FourierScalar>,
}

/// Builds the quotient jet through order `K = u_jet.len() − 1`.
///
/// `u_jet[k]`, `v_jet[k]` are the order-`k` coefficients of the centered
/// perturbations; entry 0 is ignored since they vanish at `ε = 0`.
pub fn quotient_jet(
    u_jet: &[FourierScalar],
    v_jet: &[FourierScalar],
    omega_jet: &[f64],
    u0: f64,
    v0: f64,
    s0: f64,
) -> QuotientJet {
    assert_eq!(u_jet.len(), v_jet.len(), "jets must have equal length");
    let mut v = v_jet.to_vec();
    if let Some(v0_slot) = v.first_mut() {
        *v0_slot = FourierScalar::zeros(0);
    }
    let vd = delayed_jet(&v, omega_jet, s0);
    let mut d = vec![FourierScalar::constant(u0 / v0)];
    for k in 1..u_jet.len() {
        let mut acc = u_jet[k].clone();
        for (l, dl) in d.iter().enumerate() {
            acc.add_scaled(-1.0, &dl.cauchy(&vd[k - l]));
        }
        d.push(acc.scale(1.0 / v0));
    }
    QuotientJet { d, v_delayed: vd }
}

/// Order-`k` coefficient of the product of two jets.
pub fn jet_product(a: &[FourierScalar], b: &[FourierScalar], k: usize) -> FourierScalar {
    let mut acc = FourierScalar::zeros(0);
    for l in 0..=k {
        if let (Some(x), Some(y)) = (a.get(l), b.get(k - l)) {
            acc.add_scaled(1.0, &x.cauchy(y));
        }
    }
    acc
}
