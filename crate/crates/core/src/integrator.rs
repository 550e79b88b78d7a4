//! Method-of-steps RK4 for `x' = γ f(x(t), x(t−1), x(t−s0))`.
//!
//! States live on a uniform grid `t_i = t_start + i h` that begins inside the
//! history segment. Delayed values between grid points come from cubic Hermite
//! interpolation of the stored states and derivatives, which keeps the scheme
//! fourth order as long as `h ≤ min(1, s0)` and `h` divides both delays (so
//! derivative jumps of the initial history fall on grid points).

use serde::Serialize;
use std::io::Write;

use crate::bvp::PeriodicOrbit;
use crate::error::{Error, Result};
use crate::model::Model;

/// Guard on `v(t−s0) + v0`.
pub const POLE_GUARD: f64 = 1e-8;

/// Initial function on `[−L, 0]`, tabulated with step `h` (states and derivatives).
#[derive(Clone, Debug, PartialEq)]
pub struct HistorySegment {
    pub h: f64,
    /// Values at `−L, −L + h, …, 0`.
    pub values: Vec<[f64; 2]>,
    pub derivs: Vec<[f64; 2]>,
}

impl HistorySegment {
    /// Samples `f` and its time derivative `df` on `[−length, 0]`, rounding the
    /// length up to a whole number of steps.
    pub fn from_fn(
        length: f64,
        h: f64,
        f: impl Fn(f64) -> [f64; 2],
        df: impl Fn(f64) -> [f64; 2],
    ) -> Result<Self> {
        if !(h > 0.0) || !(length >= 0.0) || !h.is_finite() {
            return Err(Error::InvalidParams(format!("history length {length}, step {h}")));
        }
        let n = (length / h - 1e-9).ceil().max(0.0) as usize;
        let ts = (0..=n).map(|i| (i as f64 - n as f64) * h);
        let (values, derivs) = ts.map(|t| (f(t), df(t))).unzip();
        Ok(Self { h, values, derivs })
    }

    /// Constant history `x ≡ c` (centered coordinates).
    pub fn constant(length: f64, h: f64, c: [f64; 2]) -> Result<Self> {
        Self::from_fn(length, h, |_| c, |_| [0.0; 2])
    }

    /// The orbit itself, `x(t) = orbit(t/T)`.
    pub fn from_orbit(orbit: &PeriodicOrbit, length: f64, h: f64) -> Result<Self> {
        let t = orbit.period;
        Self::from_fn(
            length,
            h,
            |s| orbit.eval((s / t).rem_euclid(1.0)),
            |s| {
                let d = orbit.derivative((s / t).rem_euclid(1.0));
                [d[0] / t, d[1] / t]
            },
        )
    }

    /// Length of the covered interval.
    pub fn length(&self) -> f64 {
        (self.values.len().saturating_sub(1)) as f64 * self.h
    }
}

/// Grid solution with dense output.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub t_start: f64,
    pub h: f64,
    pub values: Vec<[f64; 2]>,
    pub derivs: Vec<[f64; 2]>,
    /// Index of `t = 0` and the right-sided derivative there; the history's own
    /// derivative stays in `derivs` so both one-sided interpolants are exact.
    pub origin: usize,
    pub origin_right: [f64; 2],
}

impl Trajectory {
    pub fn t_end(&self) -> f64 {
        self.t_start + (self.values.len() - 1) as f64 * self.h
    }

    /// Grid time of sample `i`.
    pub fn time(&self, i: usize) -> f64 {
        self.t_start + i as f64 * self.h
    }

    /// Cubic Hermite interpolation on the covering cell.
    pub fn eval(&self, t: f64) -> [f64; 2] {
        let last = self.values.len() - 1;
        let r = (t - self.t_start) / self.h;
        let i = (r.floor().max(0.0) as usize).min(last.saturating_sub(1));
        let s = r - i as f64;
        if last == 0 {
            return self.values[0];
        }
        let d0 = if i == self.origin { self.origin_right } else { self.derivs[i] };
        hermite(
            self.values[i],
            d0,
            self.values[i + 1],
            self.derivs[i + 1],
            self.h,
            s,
        )
    }

    /// Writes `t,u,v` (centered coordinates) for `t ≥ 0`, after an optional comment line.
    pub fn write_csv<W: Write>(&self, mut out: W, comment: Option<&str>) -> Result<()> {
        if let Some(c) = comment {
            writeln!(out, "# {c}")?;
        }
        #[derive(Serialize)]
        struct Row {
            t: f64,
            u: f64,
            v: f64,
        }
        let mut w = csv::Writer::from_writer(out);
        for (i, x) in self.values.iter().enumerate() {
            let t = self.time(i);
            if t >= -0.5 * self.h {
                w.serialize(Row { t, u: x[0], v: x[1] })?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn hermite(y0: [f64; 2], d0: [f64; 2], y1: [f64; 2], d1: [f64; 2], h: f64, s: f64) -> [f64; 2] {
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    std::array::from_fn(|k| h00 * y0[k] + h * h10 * d0[k] + h01 * y1[k] + h * h11 * d1[k])
}

/// Integrates from `t = 0` to `t_end` with step `history.h`.
pub fn integrate(model: &Model, gamma: f64, history: &HistorySegment, t_end: f64) -> Result<Trajectory> {
    let h = history.h;
    let s0 = model.s0();
    let need = s0.max(1.0);
    if history.length() + 1e-9 * h < need {
        return Err(Error::HistoryTooShort {
            have: history.length(),
            need,
        });
    }
    if h > s0.min(1.0) + 1e-12 {
        return Err(Error::InvalidParams(format!("step {h} exceeds the shortest delay")));
    }
    let steps = (t_end / h - 1e-9).ceil().max(0.0) as usize;
    let mut traj = Trajectory {
        t_start: -history.length(),
        h,
        values: history.values.clone(),
        derivs: history.derivs.clone(),
        origin: history.values.len() - 1,
        origin_right: history.derivs[history.values.len() - 1],
    };
    traj.values.reserve(steps);
    traj.derivs.reserve(steps);
    let v0 = model.eq.v0;
    let field = |traj: &Trajectory, t: f64, x: [f64; 2]| -> Result<[f64; 2]> {
        let q = traj.eval(t - 1.0);
        let w = traj.eval(t - s0);
        if w[1] + v0 < POLE_GUARD {
            return Err(Error::PoleEncountered { t, value: w[1] + v0 });
        }
        let f = model.rhs(x, q, w);
        Ok([gamma * f[0], gamma * f[1]])
    };
    let axpy = |x: [f64; 2], a: f64, k: [f64; 2]| [x[0] + a * k[0], x[1] + a * k[1]];
    for _ in 0..steps {
        let n = traj.values.len() - 1;
        let t = traj.time(n);
        let x = traj.values[n];
        let k1 = field(&traj, t, x)?;
        if n == traj.origin {
            traj.origin_right = k1;
        } else {
            traj.derivs[n] = k1;
        }
        let k2 = field(&traj, t + 0.5 * h, axpy(x, 0.5 * h, k1))?;
        let k3 = field(&traj, t + 0.5 * h, axpy(x, 0.5 * h, k2))?;
        let k4 = field(&traj, t + h, axpy(x, h, k3))?;
        let next = std::array::from_fn(|k| x[k] + h / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]));
        traj.values.push(next);
        traj.derivs.push(k4);
    }
    // Replace the provisional last derivative with the field at the final state.
    let n = traj.values.len() - 1;
    if n > traj.origin {
        let t = traj.time(n);
        traj.derivs[n] = field(&traj, t, traj.values[n])?;
    }
    Ok(traj)
}

/// Integrates the orbit over one period from its own history and returns
/// `sup_{θ ∈ [−L, 0]} |x(T + θ) − x(θ)|`, `L = max(1, s0)`.
pub fn return_map_error(model: &Model, orbit: &PeriodicOrbit, h: f64) -> Result<f64> {
    let length = model.s0().max(1.0);
    let hist = HistorySegment::from_orbit(orbit, length, h)?;
    let traj = integrate(model, orbit.gamma, &hist, orbit.period + length)?;
    let samples = (length / h).round().max(1.0) as usize * 4;
    let mut err: f64 = 0.0;
    for i in 0..=samples {
        let theta = -length * i as f64 / samples as f64;
        let a = traj.eval(orbit.period + theta);
        let b = orbit.eval((theta / orbit.period).rem_euclid(1.0));
        err = err.max((a[0] - b[0]).abs()).max((a[1] - b[1]).abs());
    }
    Ok(err)
}

/// Step-halving order estimate `log2(|x_h − x_{h/2}| / |x_{h/2} − x_{h/4}|)` at `t_end`.
///
/// `history` is sampled from `f`, `df` at each step size.
pub fn observed_order(
    model: &Model,
    gamma: f64,
    f: impl Fn(f64) -> [f64; 2],
    df: impl Fn(f64) -> [f64; 2],
    t_end: f64,
    h: f64,
) -> Result<f64> {
    let length = model.s0().max(1.0);
    let mut ends = Vec::with_capacity(3);
    for k in 0..3 {
        let hk = h / f64::powi(2.0, k);
        let hist = HistorySegment::from_fn(length, hk, &f, &df)?;
        ends.push(integrate(model, gamma, &hist, t_end)?.eval(t_end));
    }
    let d = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).hypot(a[1] - b[1]);
    Ok((d(ends[0], ends[1]) / d(ends[1], ends[2])).log2())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Preset;

    #[test]
    fn equilibrium_stays_put() {
        let m = Model::from_preset(Preset::Set1, 1.5).unwrap();
        let hist = HistorySegment::constant(1.5, 0.05, [0.0; 2]).unwrap();
        let tr = integrate(&m, 2.7, &hist, 20.0).unwrap();
        let worst = tr.values.iter().fold(0.0f64, |a, x| a.max(x[0].abs()).max(x[1].abs()));
        assert!(worst < 1e-12, "{worst}");
    }

    #[test]
    fn short_history_is_rejected() {
        let m = Model::from_preset(Preset::Set1, 3.0).unwrap();
        let hist = HistorySegment::constant(1.5, 0.05, [0.0; 2]).unwrap();
        assert!(matches!(integrate(&m, 2.7, &hist, 1.0), Err(Error::HistoryTooShort { .. })));
    }

    #[test]
    fn pole_is_reported() {
        let m = Model::from_preset(Preset::Set1, 1.5).unwrap();
        let v0 = m.eq.v0;
        let hist = HistorySegment::constant(1.5, 0.05, [0.0, -v0]).unwrap();
        assert!(matches!(integrate(&m, 1.0, &hist, 1.0), Err(Error::PoleEncountered { .. })));
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let p = |t: f64| t * t * t - 2.0 * t + 0.5;
        let dp = |t: f64| 3.0 * t * t - 2.0;
        let (a, b) = (0.3, 0.55);
        let h = b - a;
        for s in [0.0, 0.25, 0.6, 1.0] {
            let y = hermite([p(a), 0.0], [dp(a), 0.0], [p(b), 0.0], [dp(b), 0.0], h, s);
            assert!((y[0] - p(a + s * h)).abs() < 1e-14);
        }
    }
}
