//! Oracles shared by several test targets.

use num_complex::Complex64;

pub type Poly = Vec<Complex64>;

fn mul_trunc(a: &Poly, b: &Poly, deg: usize) -> Poly {
    let mut out = vec![Complex64::new(0.0, 0.0); deg + 1];
    for (i, x) in a.iter().enumerate().take(deg + 1) {
        for (j, y) in b.iter().enumerate().take(deg + 1 - i) {
            out[i + j] += x * y;
        }
    }
    out
}

/// Taylor coefficients of `exp(−ins(ω0 + ω1 ε + …))` through `ε^J` by composing the
/// exponential series with the polynomial argument.
pub fn composition_oracle(omega: &[f64], n: i64, s: f64, j_max: usize) -> Poly {
    let ins = Complex64::new(0.0, n as f64 * s);
    let mut p: Poly = vec![Complex64::new(0.0, 0.0); j_max + 1];
    for (j, pj) in p.iter_mut().enumerate().skip(1) {
        *pj = -ins * omega.get(j).copied().unwrap_or(0.0);
    }
    let mut sum: Poly = vec![Complex64::new(0.0, 0.0); j_max + 1];
    sum[0] = Complex64::new(1.0, 0.0);
    let mut power = sum.clone();
    let mut fact = 1.0;
    for k in 1..=j_max {
        power = mul_trunc(&power, &p, j_max);
        fact *= k as f64;
        for (s, q) in sum.iter_mut().zip(&power) {
            *s += q / fact;
        }
    }
    let e0 = (-ins * omega[0]).exp();
    sum.into_iter().map(|c| c * e0).collect()
}
