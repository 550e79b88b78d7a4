//! Taylor recurrences checked against independent oracles.

use delay_hopf::fourier::FourierScalar;
use delay_hopf::model::CVec2;
use delay_hopf::taylor::{delayed_mode_jet, exp_delay_coeffs, quotient_jet};
use num_complex::Complex64;
use proptest::prelude::*;

mod common;
use common::composition_oracle;

fn jet(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.5f64..0.5, len).prop_map(|mut v| {
        v[0] = v[0].abs() + 0.1;
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn exp_delay_matches_composition(omega in jet(9), n in -4i64..=4, s in 0.0f64..3.0) {
        for j_max in 0..=8 {
            let e = exp_delay_coeffs(&omega[..=j_max], n, s, j_max).e;
            let o = composition_oracle(&omega[..=j_max], n, s, j_max);
            for (a, b) in e.iter().zip(&o) {
                prop_assert!((a - b).norm() < 1e-12 * b.norm().max(1.0), "J={j_max}: {a} vs {b}");
            }
        }
    }
}

fn scalar(support: usize) -> impl Strategy<Value = FourierScalar> {
    prop::collection::vec((-0.3f64..0.3, -0.3f64..0.3), support + 1).prop_map(|c| {
        let mut c: Vec<Complex64> = c.into_iter().map(|(a, b)| Complex64::new(a, b)).collect();
        c[0].im = 0.0;
        FourierScalar::from_nonnegative(c)
    })
}

/// Jets `X_1..X_K` with `X_k` supported on `|n| ≤ k`, entry 0 zero.
fn series_jet(k: usize) -> impl Strategy<Value = Vec<FourierScalar>> {
    (1..=k)
        .map(scalar)
        .collect::<Vec<_>>()
        .prop_map(|mut v| {
            v.insert(0, FourierScalar::zeros(0));
            v
        })
}

fn jets(k: usize) -> impl Strategy<Value = (Vec<FourierScalar>, Vec<FourierScalar>, Vec<f64>)> {
    (series_jet(k), series_jet(k), jet(k + 1))
}

fn max_diff(a: &FourierScalar, b: &FourierScalar) -> f64 {
    let n = a.support().max(b.support()) as i64;
    (-n..=n).map(|k| (a.coeff(k) - b.coeff(k)).norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    /// `(v0 + V(t − s0ω(ε))) · Σ d_k ε^k = u0 + U` order by order.
    #[test]
    fn quotient_multiplies_back(
        k in 1usize..=6,
        seed in jets(6),
        u0 in 0.5f64..3.0,
        v0 in 1.0f64..20.0,
        s0 in 1.0f64..10.0,
    ) {
        let (u, v, w) = seed;
        let (u, v, w) = (&u[..=k], &v[..=k], &w[..=k]);
        let q = quotient_jet(u, v, w, u0, v0, s0);
        for (m, um) in u.iter().enumerate().skip(1) {
            let mut lhs = q.d[m].scale(v0);
            for l in 0..m {
                lhs = lhs.add(&q.d[l].cauchy(&q.v_delayed[m - l]));
            }
            prop_assert!(max_diff(&lhs, um) < 1e-11, "order {m}: {}", max_diff(&lhs, um));
        }
        prop_assert_eq!(q.d[0].coeff(0).re, u0 / v0);
    }

    /// Changing `ω_{k−1}` by `δ` moves `d̂_k(n)` by `(d0/v0) n i δ s0 V̂1(n) e^{−inω0s0}` exactly.
    #[test]
    fn newest_frequency_enters_linearly(
        k in 2usize..=6,
        seed in jets(6),
        delta in -0.5f64..0.5,
        u0 in 0.5f64..3.0,
        v0 in 1.0f64..20.0,
        s0 in 1.0f64..10.0,
    ) {
        let (u, v, w) = seed;
        let (u, v) = (&u[..=k], &v[..=k]);
        let mut w = w[..k].to_vec();
        let base = quotient_jet(u, v, &w, u0, v0, s0);
        w[k - 1] += delta;
        let moved = quotient_jet(u, v, &w, u0, v0, s0);
        let d0 = u0 / v0;
        for n in -(k as i64)..=(k as i64) {
            let nf = n as f64;
            let expect = Complex64::new(0.0, nf * delta * s0) * (d0 / v0) * v[1].coeff(n)
                * Complex64::from_polar(1.0, -nf * w[0] * s0);
            let got = moved.d[k].coeff(n) - base.d[k].coeff(n);
            prop_assert!((got - expect).norm() < 1e-12, "n={n}: {got} vs {expect}");
        }
    }
}

/// Richardson-extrapolated central differences of `ε ↦ ŷ e^{−insω(ε)}`.
#[test]
fn delayed_mode_matches_finite_differences() {
    let omega = [0.7, 0.0, 0.35, -0.2];
    let y = CVec2::new(Complex64::new(0.4, -0.3), Complex64::new(1.1, 0.2));
    let (n, s) = (2, 1.5);
    let f = |eps: f64| {
        let w = omega[0] + omega[1] * eps + omega[2] * eps * eps + omega[3] * eps.powi(3);
        y * Complex64::from_polar(1.0, -(n as f64) * s * w)
    };
    let d1 = |h: f64| (f(h) - f(-h)).unscale(2.0 * h);
    let d2 = |h: f64| (f(h) - f(0.0).scale(2.0) + f(-h)).unscale(h * h);
    let d3 = |h: f64| (f(2.0 * h) - f(h).scale(2.0) + f(-h).scale(2.0) - f(-2.0 * h)).unscale(2.0 * h * h * h);
    let rich = |d: &dyn Fn(f64) -> CVec2, h: f64| (d(h / 2.0).scale(4.0) - d(h)).unscale(3.0);
    let h = 1e-3;
    let jet = delayed_mode_jet(y, &omega, n, s, 3);
    assert!((jet[0] - f(0.0)).norm() < 1e-15);
    assert!((jet[1] - rich(&d1, h)).norm() < 1e-8);
    assert!((jet[2].scale(2.0) - rich(&d2, h)).norm() < 1e-8);
    // The third difference loses ~1e−16/h³ to roundoff (≈5e−7 here); no step
    // size brings it below ~2e−8, so order 3 is checked at the roundoff level.
    assert!((jet[3].scale(6.0) - rich(&d3, h)).norm() < 1e-6);
}
