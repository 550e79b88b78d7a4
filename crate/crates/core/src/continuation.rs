//! Pseudo-arclength continuation of periodic orbits in `γ`.
//!
//! The unknown is `z = (x, T, γ)`. Each step predicts along the unit tangent and
//! corrects the collocation equations, the phase condition against the previous
//! point, and `⟨z − z_prev, t_prev⟩_W = h`. The inner product `W` scales every
//! block by its size at the Hopf point so that `h` is dimensionless:
//! `⟨a, b⟩_W = (1/N)Σ(a_u b_u/u0² + a_v b_v/v0²) + a_T b_T/T0² + a_γ b_γ/γ0²`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::bvp::{max_abs, mesh_defect, newton_correct, CollocationSystem, Mesh, NewtonOptions, PeriodicOrbit};
use crate::error::{Error, Result};
use crate::hopf::HopfPoint;
use crate::lindstedt::PLExpansion;
use crate::model::Model;

/// Order of the series guess used to start a branch.
pub const START_ORDER: usize = 3;
pub const START_RETRIES: usize = 5;
/// Relative offset in `ε` used to orient the first tangent.
const TANGENT_PROBE: f64 = 0.1;
/// Steps that converge within this many iterations double `h`.
const FAST_ITERATIONS: usize = 3;
pub const DEFAULT_MAX_DEFECT: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    pub h0: f64,
    pub hmin: f64,
    pub hmax: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            h0: 1e-2,
            hmin: 1e-6,
            hmax: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuationSettings {
    pub max_steps: usize,
    pub gamma_bounds: (f64, f64),
    pub step: StepControl,
    pub newton: NewtonOptions,
    /// Corrector iterations per step.
    pub corrector_iter: usize,
    /// Largest accepted relative equation defect between collocation points.
    pub max_defect: f64,
}

impl Default for ContinuationSettings {
    fn default() -> Self {
        Self {
            max_steps: 2000,
            gamma_bounds: (0.0, f64::INFINITY),
            step: StepControl::default(),
            newton: NewtonOptions::default(),
            corrector_iter: 8,
            max_defect: DEFAULT_MAX_DEFECT,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    MaxSteps,
    StepFloor,
    NewtonFail,
    GammaBound,
    /// The mesh no longer resolves the orbit (typically a diverging period).
    Unresolved,
    /// The branch passed through the Hopf point (the orbit shrank to the equilibrium).
    HopfReached,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BranchPoint {
    pub orbit: PeriodicOrbit,
    pub gamma: f64,
    pub period: f64,
    pub l2: f64,
    pub sup: f64,
    pub arclength: f64,
    /// Max-norm residual of the extended system at acceptance.
    pub residual: f64,
    /// Unit tangent in the `W` inner product, oriented along the run.
    pub tangent: Vec<f64>,
}

impl BranchPoint {
    fn new(orbit: PeriodicOrbit, arclength: f64, residual: f64, tangent: Vec<f64>) -> Self {
        Self {
            gamma: orbit.gamma,
            period: orbit.period,
            l2: orbit.l2_norm(),
            sup: orbit.sup_norm(),
            orbit,
            arclength,
            residual,
            tangent,
        }
    }

    /// `(x, T, γ)` flattened.
    pub fn state(&self) -> Vec<f64> {
        pack(&self.orbit)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub hopf: HopfPoint,
    pub points: Vec<BranchPoint>,
    pub termination: Termination,
    /// Arclength-constraint residual `|⟨Δz, t⟩_W − h|` of every accepted step.
    pub arclength_residuals: Vec<f64>,
}

/// One CSV row of a branch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub gamma: f64,
    #[serde(rename = "T")]
    pub period: f64,
    pub l2: f64,
    pub sup: f64,
    pub arclength: f64,
}

pub fn branch_summary(branch: &Branch) -> Vec<SummaryRow> {
    branch
        .points
        .iter()
        .map(|p| SummaryRow {
            gamma: p.gamma,
            period: p.period,
            l2: p.l2,
            sup: p.sup,
            arclength: p.arclength,
        })
        .collect()
}

/// Writes `rows` as CSV with header `gamma,T,l2,sup,arclength`, after an optional
/// `# …` comment line.
pub fn write_summary_csv<W: Write>(mut out: W, comment: Option<&str>, rows: &[SummaryRow]) -> Result<()> {
    if let Some(c) = comment {
        writeln!(out, "# {c}")?;
    }
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(["gamma", "T", "l2", "sup", "arclength"])?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn pack(o: &PeriodicOrbit) -> Vec<f64> {
    let mut z = o.flat();
    z.push(o.period);
    z.push(o.gamma);
    z
}

fn unpack(z: &[f64], template: &PeriodicOrbit) -> PeriodicOrbit {
    let n = z.len();
    let mut o = template.clone();
    o.set_flat(&z[..n - 2]);
    o.period = z[n - 2];
    o.gamma = z[n - 1];
    o
}

/// Diagonal of the weighted inner product.
fn weights(model: &Model, hp: &HopfPoint, mesh: Mesh) -> Vec<f64> {
    let n = mesh.nodes() as f64;
    let (u0, v0) = (model.eq.u0, model.eq.v0);
    let mut w: Vec<f64> = (0..mesh.nodes())
        .flat_map(|_| [1.0 / (n * u0 * u0), 1.0 / (n * v0 * v0)])
        .collect();
    w.push(1.0 / hp.period().powi(2));
    w.push(1.0 / hp.gamma0.powi(2));
    w
}

fn wdot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a).zip(b).map(|((w, a), b)| w * a * b).sum()
}

/// Whether the orbit stays in the open first quadrant after translation.
fn physical(model: &Model, o: &PeriodicOrbit) -> bool {
    o.values
        .iter()
        .all(|x| x[0] + model.eq.u0 > 0.0 && x[1] + model.eq.v0 > 0.0)
}

/// Bordered matrix `[J_(x,T) ∂_γ; (W t)ᵀ]`.
fn bordered(jac: &DMatrix<f64>, dgamma: &DVector<f64>, wt: &[f64]) -> DMatrix<f64> {
    let n = jac.nrows();
    let mut m = DMatrix::zeros(n + 1, n + 1);
    m.view_mut((0, 0), (n, n)).copy_from(jac);
    m.view_mut((0, n), (n, 1)).copy_from(dgamma);
    for (j, v) in wt.iter().enumerate() {
        m[(n, j)] = *v;
    }
    m
}

/// Unit tangent at `z`, oriented so that `⟨t, t_prev⟩_W > 0`.
fn tangent(model: &Model, orbit: &PeriodicOrbit, w: &[f64], t_prev: &[f64]) -> Result<Vec<f64>> {
    let sys = CollocationSystem::new(model, orbit);
    let (_, jac, dg) = sys.linearize(&orbit.flat(), orbit.period, orbit.gamma)?;
    let wt: Vec<f64> = w.iter().zip(t_prev).map(|(a, b)| a * b).collect();
    let m = bordered(&jac, &dg, &wt);
    let mut rhs = DVector::zeros(m.nrows());
    rhs[m.nrows() - 1] = 1.0;
    let t = m.lu().solve(&rhs).ok_or(Error::SingularJacobian { iteration: 0 })?;
    let t: Vec<f64> = t.iter().copied().collect();
    let norm = wdot(w, &t, &t).sqrt();
    Ok(t.iter().map(|x| x / norm).collect())
}

/// First point of a branch together with its orientation.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchStart {
    pub point: BranchPoint,
    pub epsilon: f64,
    pub attempts: usize,
}

/// Corrects the order-3 series guess at `epsilon0`, halving `ε` up to five times
/// on failure. The tangent points toward increasing amplitude.
pub fn start_branch(
    model: &Model,
    exp: &PLExpansion,
    epsilon0: f64,
    mesh: Mesh,
    newton: &NewtonOptions,
) -> Result<BranchStart> {
    if exp.order() < START_ORDER {
        return Err(Error::OrderUnavailable {
            requested: START_ORDER,
            available: exp.order(),
        });
    }
    let hp = &exp.hopf;
    let w = weights(model, hp, mesh);
    let mut eps = epsilon0;
    let mut last_err = None;
    for attempt in 0..=START_RETRIES {
        let attempt_result = exp
            .evaluate(eps, START_ORDER)
            .and_then(|guess| Ok((newton_correct(model, &PeriodicOrbit::from_guess(&guess, mesh), newton)?, guess)));
        match attempt_result {
            Ok((orbit, guess)) => {
                let probe = exp.evaluate(eps * (1.0 + TANGENT_PROBE), START_ORDER)?;
                let a = pack(&PeriodicOrbit::from_guess(&guess, mesh));
                let b = pack(&PeriodicOrbit::from_guess(&probe, mesh));
                let diff: Vec<f64> = b.iter().zip(&a).map(|(b, a)| b - a).collect();
                let t = tangent(model, &orbit, &w, &diff)?;
                let residual = orbit.residual;
                return Ok(BranchStart {
                    point: BranchPoint::new(orbit, 0.0, residual, t),
                    epsilon: eps,
                    attempts: attempt + 1,
                });
            }
            Err(e) if e.is_config() => return Err(e),
            Err(e) => {
                last_err = Some(e);
                eps *= 0.5;
            }
        }
    }
    Err(last_err.expect("at least one attempt"))
}

struct Corrected {
    orbit: PeriodicOrbit,
    iterations: usize,
    residual: f64,
    arc_residual: f64,
}

/// Newton on the extended system from the predictor `z_pred`.
#[allow(clippy::too_many_arguments)]
fn correct_step(
    model: &Model,
    prev: &BranchPoint,
    w: &[f64],
    h: f64,
    z_pred: &[f64],
    tol: f64,
    max_iter: usize,
    fixed_gamma: Option<f64>,
) -> Result<Corrected> {
    let sys = CollocationSystem::new(model, &prev.orbit);
    let z_prev = prev.state();
    let wt: Vec<f64> = w.iter().zip(&prev.tangent).map(|(a, b)| a * b).collect();
    let mut z = z_pred.to_vec();
    if let Some(g) = fixed_gamma {
        *z.last_mut().expect("nonempty") = g;
    }
    let n = z.len();
    for it in 0..=max_iter {
        let (res, jac, dg) = sys.linearize(&z[..n - 2], z[n - 2], z[n - 1])?;
        let arc = match fixed_gamma {
            Some(g) => z[n - 1] - g,
            None => wdot(w, &z.iter().zip(&z_prev).map(|(a, b)| a - b).collect::<Vec<_>>(), &prev.tangent) - h,
        };
        let rn = max_abs(&res);
        if rn.is_finite() && rn < tol && arc.abs() < tol {
            return Ok(Corrected {
                orbit: unpack(&z, &prev.orbit),
                iterations: it,
                residual: rn,
                arc_residual: arc.abs(),
            });
        }
        if !rn.is_finite() || it == max_iter {
            break;
        }
        let mut m = match fixed_gamma {
            Some(_) => {
                let mut e = vec![0.0; n];
                e[n - 1] = 1.0;
                bordered(&jac, &dg, &e)
            }
            None => bordered(&jac, &dg, &wt),
        };
        let mut rhs = DVector::zeros(n);
        rhs.rows_mut(0, n - 1).copy_from(&res);
        rhs[n - 1] = arc;
        let step = std::mem::take(&mut m)
            .lu()
            .solve(&rhs)
            .ok_or(Error::SingularJacobian { iteration: it })?;
        for (zi, si) in z.iter_mut().zip(step.iter()) {
            *zi -= si;
        }
        if !(z[n - 2] > 0.0) {
            break;
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: f64::NAN,
        best: None,
    })
}

/// Follows the branch from `start` in the direction `direction · t_start`.
pub fn continue_branch(
    model: &Model,
    hopf: &HopfPoint,
    start: &BranchPoint,
    direction: f64,
    settings: &ContinuationSettings,
) -> Result<Branch> {
    let mesh = start.orbit.mesh;
    let w = weights(model, hopf, mesh);
    let mut first = start.clone();
    if direction < 0.0 {
        first.tangent.iter_mut().for_each(|x| *x = -*x);
    }
    let (glo, ghi) = settings.gamma_bounds;
    let mut points = vec![first];
    let mut arc_res = Vec::new();
    let mut h = settings.step.h0;
    let mut termination = Termination::MaxSteps;
    let tol = settings.newton.tol;
    for _ in 0..settings.max_steps {
        let prev = points.last().expect("nonempty");
        let z_prev = prev.state();
        let z_pred: Vec<f64> = z_prev.iter().zip(&prev.tangent).map(|(z, t)| z + h * t).collect();
        let attempt = correct_step(model, prev, &w, h, &z_pred, tol, settings.corrector_iter, None);
        let c = match attempt {
            Ok(c) if physical(model, &c.orbit) => c,
            Ok(_) | Err(Error::NoConvergence { .. }) | Err(Error::SingularJacobian { .. }) => {
                h *= 0.5;
                if h < settings.step.hmin {
                    termination = Termination::StepFloor;
                    break;
                }
                continue;
            }
            Err(Error::MeshTooCoarse { .. }) | Err(Error::InvalidParams(_)) => {
                termination = Termination::NewtonFail;
                break;
            }
            Err(e) => return Err(e),
        };
        let g = c.orbit.gamma;
        if g > ghi || g < glo {
            let bound = if g > ghi { ghi } else { glo };
            // Predict at the bound by linear interpolation in γ, then correct at fixed γ.
            let s = (bound - prev.gamma) / (g - prev.gamma);
            let zc = pack(&c.orbit);
            let zi: Vec<f64> = z_prev.iter().zip(&zc).map(|(a, b)| a + s * (b - a)).collect();
            let fixed = correct_step(model, prev, &w, h, &zi, tol, settings.corrector_iter, Some(bound));
            termination = match fixed {
                Ok(f) => {
                    let dz: Vec<f64> = pack(&f.orbit).iter().zip(&z_prev).map(|(a, b)| a - b).collect();
                    let arc = prev.arclength + wdot(&w, &dz, &dz).sqrt();
                    let t = tangent(model, &f.orbit, &w, &prev.tangent)?;
                    points.push(BranchPoint::new(f.orbit, arc, f.residual, t));
                    Termination::GammaBound
                }
                Err(_) => Termination::NewtonFail,
            };
            break;
        }
        // Through the Hopf point the profile changes sign relative to its predecessor.
        let xo = c.orbit.flat();
        let xp = prev.orbit.flat();
        let nx = xp.len();
        if wdot(&w[..nx], &xo, &xp) <= 0.0 {
            termination = Termination::HopfReached;
            break;
        }
        if mesh_defect(model, &c.orbit) > settings.max_defect {
            termination = Termination::Unresolved;
            break;
        }
        let dz: Vec<f64> = pack(&c.orbit).iter().zip(&z_prev).map(|(a, b)| a - b).collect();
        let arc = prev.arclength + wdot(&w, &dz, &dz).sqrt();
        let t = match tangent(model, &c.orbit, &w, &prev.tangent) {
            Ok(t) => t,
            Err(_) => {
                termination = Termination::NewtonFail;
                break;
            }
        };
        arc_res.push(c.arc_residual);
        let fast = c.iterations <= FAST_ITERATIONS;
        points.push(BranchPoint::new(c.orbit, arc, c.residual, t));
        if fast {
            h = (2.0 * h).min(settings.step.hmax);
        }
    }
    Ok(Branch {
        hopf: *hopf,
        points,
        termination,
        arclength_residuals: arc_res,
    })
}

/// Re-corrects `orbit` at a fixed `γ` (used to compare two runs at equal γ).
pub fn correct_at_gamma(model: &Model, orbit: &PeriodicOrbit, gamma: f64, newton: &NewtonOptions) -> Result<PeriodicOrbit> {
    let mut o = orbit.clone();
    o.gamma = gamma;
    newton_correct(model, &o, newton)
}

/// Retrace check: continues backward from `branch.points[index]` and, for every
/// earlier point whose `γ` the reverse run brackets, corrects the linear
/// interpolant of the bracketing reverse points at that `γ`. Returns the largest
/// phase-invariant orbit distance or relative period difference.
pub fn retrace_error(model: &Model, branch: &Branch, index: usize, settings: &ContinuationSettings) -> Result<f64> {
    if index == 0 || index >= branch.points.len() {
        return Err(Error::InvalidParams(format!("retrace index {index}")));
    }
    let mut s = *settings;
    s.max_steps = 2 * index + 2;
    s.gamma_bounds.0 = s.gamma_bounds.0.max(branch.points[0].gamma);
    let back = continue_branch(model, &branch.hopf, &branch.points[index], -1.0, &s)?;
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for p in &branch.points[..index] {
        let Some((a, b)) = back.points.windows(2).map(|w| (&w[0], &w[1])).find(|(a, b)| {
            (a.gamma - p.gamma) * (b.gamma - p.gamma) <= 0.0
        }) else {
            continue;
        };
        let s = if b.gamma == a.gamma { 0.0 } else { (p.gamma - a.gamma) / (b.gamma - a.gamma) };
        let (za, zb) = (a.state(), b.state());
        let zi: Vec<f64> = za.iter().zip(&zb).map(|(x, y)| x + s * (y - x)).collect();
        let o = correct_at_gamma(model, &unpack(&zi, &a.orbit), p.gamma, &settings.newton)?;
        let d = crate::bvp::orbit_distance(&o, &p.orbit);
        worst = worst.max(d).max((o.period - p.period).abs() / p.period);
        compared += 1;
    }
    if compared == 0 {
        return Err(Error::InvalidParams("reverse run covers no earlier point".into()));
    }
    Ok(worst)
}
