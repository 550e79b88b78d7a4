//! Branch-following invariants on the first Set 1 branch at `s0 = 1.5`.

use std::sync::OnceLock;

use delay_hopf::bvp::{Mesh, NewtonOptions};
use delay_hopf::continuation::{
    branch_summary, continue_branch, retrace_error, start_branch, write_summary_csv, Branch, BranchStart,
    ContinuationSettings, Termination,
};
use delay_hopf::hopf::{hopf_points, HopfPoint};
use delay_hopf::lindstedt::{PLExpansion, DEFAULT_AUTO_RHO};
use delay_hopf::model::{Model, Preset};
use delay_hopf::Error;

struct Fixture {
    model: Model,
    hopf: HopfPoint,
    exp: PLExpansion,
    start: BranchStart,
    branch: Branch,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let model = Model::from_preset(Preset::Set1, 1.5).unwrap();
        let hopf = hopf_points(&model.lin, 30.0).unwrap()[0];
        let exp = PLExpansion::build(&model, &hopf, 4).unwrap();
        let eps = exp.auto_epsilon(DEFAULT_AUTO_RHO);
        let start = start_branch(&model, &exp, eps, Mesh::default(), &NewtonOptions::default()).unwrap();
        let branch = continue_branch(&model, &hopf, &start.point, 1.0, &ContinuationSettings::default()).unwrap();
        Fixture {
            model,
            hopf,
            exp,
            start,
            branch,
        }
    })
}

#[test]
fn accepted_points_are_converged_and_ordered() {
    let b = &fixture().branch;
    assert!(b.points.len() >= 8, "{} points", b.points.len());
    for p in &b.points {
        assert!(p.residual < 1e-9, "residual {:e} at gamma {}", p.residual, p.gamma);
        assert!(p.period > 0.0 && p.l2 > 0.0 && p.sup >= p.l2);
    }
    assert!(b.points.windows(2).all(|w| w[1].arclength > w[0].arclength));
    assert_eq!(b.arclength_residuals.len(), b.points.len() - 1);
    assert!(b.arclength_residuals.iter().all(|r| *r < 1e-9));
    // The branch grows in γ and amplitude away from the Hopf point.
    assert!(b.points.windows(2).all(|w| w[1].gamma > w[0].gamma && w[1].l2 > w[0].l2));
}

#[test]
fn branch_stops_when_the_mesh_can_no_longer_resolve_the_orbit() {
    let b = &fixture().branch;
    assert_eq!(b.termination, Termination::Unresolved);
    let last = b.points.last().unwrap();
    assert!(last.period > 2.0 * fixture().hopf.period(), "T = {}", last.period);
}

#[test]
fn gamma_bound_is_hit_exactly() {
    let f = fixture();
    let bound = f.hopf.gamma0 + 0.08;
    let settings = ContinuationSettings {
        gamma_bounds: (0.0, bound),
        ..ContinuationSettings::default()
    };
    let b = continue_branch(&f.model, &f.hopf, &f.start.point, 1.0, &settings).unwrap();
    assert_eq!(b.termination, Termination::GammaBound);
    let last = b.points.last().unwrap();
    assert_eq!(last.gamma, bound);
    assert!(last.residual < 1e-9);
}

#[test]
fn step_budget_is_respected() {
    let f = fixture();
    let settings = ContinuationSettings {
        max_steps: 3,
        ..ContinuationSettings::default()
    };
    let b = continue_branch(&f.model, &f.hopf, &f.start.point, 1.0, &settings).unwrap();
    assert_eq!(b.termination, Termination::MaxSteps);
    assert_eq!(b.points.len(), 4);
    // Deterministic: the same prefix as the unrestricted run.
    for (a, c) in b.points.iter().zip(&f.branch.points) {
        assert_eq!(a.gamma, c.gamma);
        assert_eq!(a.period, c.period);
    }
}

#[test]
fn reverse_direction_returns_to_the_hopf_point() {
    let f = fixture();
    let b = continue_branch(&f.model, &f.hopf, &f.start.point, -1.0, &ContinuationSettings::default()).unwrap();
    assert_eq!(b.termination, Termination::HopfReached);
    let last = b.points.last().unwrap();
    assert!((last.gamma - f.hopf.gamma0).abs() < (f.start.point.gamma - f.hopf.gamma0).abs());
}

#[test]
fn retrace_recovers_earlier_points() {
    let f = fixture();
    let err = retrace_error(&f.model, &f.branch, 6, &ContinuationSettings::default()).unwrap();
    assert!(err < 1e-6, "retrace error {err:e}");
    assert!(retrace_error(&f.model, &f.branch, 0, &ContinuationSettings::default()).is_err());
}

#[test]
fn squared_amplitude_grows_linearly_near_the_hopf_point() {
    let f = fixture();
    let settings = ContinuationSettings {
        max_steps: 6,
        step: delay_hopf::continuation::StepControl {
            hmax: 0.02,
            ..Default::default()
        },
        ..ContinuationSettings::default()
    };
    let b = continue_branch(&f.model, &f.hopf, &f.start.point, 1.0, &settings).unwrap();
    let slopes: Vec<f64> = b
        .points
        .iter()
        .map(|p| p.orbit.amplitude().powi(2) / (p.gamma - f.hopf.gamma0))
        .collect();
    let (lo, hi) = slopes.iter().fold((f64::INFINITY, 0.0f64), |(l, h), s| (l.min(*s), h.max(*s)));
    assert!(lo > 0.0 && hi / lo < 1.25, "amplitude^2 / (gamma - gamma0): {slopes:?}");
    // The sign of γ2 fixes the side of the branch.
    assert!(f.exp.gamma[2] > 0.0);
}

#[test]
fn oversized_start_amplitude_is_halved_until_correction_succeeds() {
    let f = fixture();
    let s = start_branch(&f.model, &f.exp, 0.5, Mesh::default(), &NewtonOptions::default()).unwrap();
    assert!(s.attempts > 1);
    assert_eq!(s.epsilon, 0.5 / 2f64.powi(s.attempts as i32 - 1));
    assert!(s.point.residual < 1e-10);
}

#[test]
fn start_needs_a_third_order_expansion() {
    let f = fixture();
    let low = PLExpansion::build(&f.model, &f.hopf, 2).unwrap();
    assert!(matches!(
        start_branch(&f.model, &low, 0.05, Mesh::default(), &NewtonOptions::default()),
        Err(Error::OrderUnavailable { .. })
    ));
}

#[test]
fn summary_csv_has_one_row_per_point() {
    let f = fixture();
    let rows = branch_summary(&f.branch);
    let mut buf = Vec::new();
    write_summary_csv(&mut buf, Some("note"), &rows).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# note");
    assert_eq!(lines[1], "gamma,T,l2,sup,arclength");
    assert_eq!(lines.len(), rows.len() + 2);

    let mut empty = Vec::new();
    write_summary_csv(&mut empty, None, &[]).unwrap();
    assert_eq!(String::from_utf8(empty).unwrap(), "gamma,T,l2,sup,arclength\n");
}
