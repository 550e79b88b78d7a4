//! Run configuration: a partially specified JSON file, overridden by flags,
//! resolved into a complete [`RunConfig`] that is echoed into every artifact.

use std::path::{Path, PathBuf};

use delay_hopf::bvp::{Mesh, NewtonOptions};
use delay_hopf::continuation::{ContinuationSettings, StepControl};
use delay_hopf::model::{Model, ModelParams, Preset};
use serde::{Deserialize, Serialize};

use crate::Failure;

/// `a, b, c` of the model (the delay ratio is configured separately).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// Optional continuation overrides.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RawContinuation {
    pub max_steps: Option<usize>,
    pub gamma_min: Option<f64>,
    pub gamma_max: Option<f64>,
    pub h0: Option<f64>,
    pub hmin: Option<f64>,
    pub hmax: Option<f64>,
    pub newton_tol: Option<f64>,
    pub newton_max_iter: Option<usize>,
    pub max_defect: Option<f64>,
    pub snapshot_every: Option<usize>,
}

/// Every field optional; later layers override earlier ones.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RawConfig {
    pub preset: Option<Preset>,
    pub params: Option<Coefficients>,
    pub s0: Option<f64>,
    pub equilibrium_index: Option<usize>,
    pub gamma_max: Option<f64>,
    pub hopf_index: Option<usize>,
    pub order: Option<usize>,
    pub epsilon: Option<f64>,
    pub mesh_intervals: Option<usize>,
    pub mesh_degree: Option<usize>,
    pub integrator_step: Option<f64>,
    pub output_dir: Option<PathBuf>,
    pub continuation: RawContinuation,
}

macro_rules! overlay {
    ($dst:expr, $src:expr, $($f:ident),+) => { $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )+ };
}

impl RawConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
    }

    /// Fields set in `other` replace those in `self`.
    pub fn merge(mut self, other: &RawConfig) -> Self {
        overlay!(
            self, other, preset, params, s0, equilibrium_index, gamma_max, hopf_index, order, epsilon,
            mesh_intervals, mesh_degree, integrator_step, output_dir
        );
        let (d, s) = (&mut self.continuation, &other.continuation);
        overlay!(d, s, max_steps, gamma_min, gamma_max, h0, hmin, hmax, newton_tol, newton_max_iter, max_defect, snapshot_every);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResolvedContinuation {
    pub max_steps: usize,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub h0: f64,
    pub hmin: f64,
    pub hmax: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub max_defect: f64,
    pub snapshot_every: usize,
}

/// Fully resolved configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub preset: Option<Preset>,
    pub params: Coefficients,
    pub s0: f64,
    pub equilibrium_index: usize,
    pub gamma_max: f64,
    pub hopf_index: Option<usize>,
    pub order: usize,
    pub epsilon: Option<f64>,
    pub mesh_intervals: usize,
    pub mesh_degree: usize,
    pub integrator_step: f64,
    pub output_dir: PathBuf,
    pub continuation: ResolvedContinuation,
}

pub const DEFAULT_S0: f64 = 1.5;
pub const DEFAULT_ORDER: usize = 10;
pub const DEFAULT_INTEGRATOR_STEP: f64 = 0.01;

impl RunConfig {
    pub fn resolve(raw: RawConfig) -> Result<Self, Failure> {
        let s0 = raw.s0.unwrap_or(DEFAULT_S0);
        let params = match (raw.params, raw.preset) {
            (Some(p), _) => p,
            (None, Some(preset)) => {
                let p = preset.params(s0).map_err(Failure::from)?;
                Coefficients { a: p.a, b: p.b, c: p.c }
            }
            (None, None) => return Err(Failure::Config("either `preset` or `params` is required".into())),
        };
        let preset = raw.preset;
        let gamma_max = raw
            .gamma_max
            .or(preset.map(Preset::gamma_max))
            .ok_or_else(|| Failure::Config("`gamma_max` is required without a preset".into()))?;
        let equilibrium_index = raw.equilibrium_index.or(preset.map(Preset::equilibrium_index)).unwrap_or(0);
        let defaults = ContinuationSettings::default();
        let rc = &raw.continuation;
        let continuation = ResolvedContinuation {
            max_steps: rc.max_steps.unwrap_or(defaults.max_steps),
            gamma_min: rc.gamma_min.unwrap_or(0.0),
            gamma_max: rc.gamma_max.unwrap_or(gamma_max),
            h0: rc.h0.unwrap_or(defaults.step.h0),
            hmin: rc.hmin.unwrap_or(defaults.step.hmin),
            hmax: rc.hmax.unwrap_or(defaults.step.hmax),
            newton_tol: rc.newton_tol.unwrap_or(defaults.newton.tol),
            newton_max_iter: rc.newton_max_iter.unwrap_or(defaults.newton.max_iter),
            max_defect: rc.max_defect.unwrap_or(defaults.max_defect),
            snapshot_every: rc.snapshot_every.unwrap_or(0),
        };
        let mesh = Mesh::default();
        let cfg = RunConfig {
            preset,
            params,
            s0,
            equilibrium_index,
            gamma_max,
            hopf_index: raw.hopf_index,
            order: raw.order.unwrap_or(DEFAULT_ORDER),
            epsilon: raw.epsilon,
            mesh_intervals: raw.mesh_intervals.unwrap_or(mesh.intervals),
            mesh_degree: raw.mesh_degree.unwrap_or(mesh.degree),
            integrator_step: raw.integrator_step.unwrap_or(DEFAULT_INTEGRATOR_STEP),
            output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from(".")),
            continuation,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), Failure> {
        self.model_params()?;
        self.mesh()?;
        let c = &self.continuation;
        let bad = |m: &str| Err(Failure::Config(m.into()));
        if !(self.gamma_max > 0.0) {
            return bad("gamma_max must be positive");
        }
        if self.order == 0 {
            return bad("order must be at least 1");
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0 && e < 1.0) {
                return bad("epsilon must lie in (0, 1)");
            }
        }
        if !(self.integrator_step > 0.0 && self.integrator_step <= self.s0.min(1.0)) {
            return bad("integrator_step must lie in (0, min(1, s0)]");
        }
        if !(c.hmin > 0.0 && c.hmin <= c.h0 && c.h0 <= c.hmax) {
            return bad("step sizes must satisfy 0 < hmin <= h0 <= hmax");
        }
        if !(c.gamma_min < c.gamma_max) {
            return bad("continuation gamma_min must be below gamma_max");
        }
        if !(c.newton_tol > 0.0) || c.newton_max_iter == 0 || !(c.max_defect > 0.0) {
            return bad("Newton tolerance, iteration cap and defect bound must be positive");
        }
        Ok(())
    }

    pub fn model_params(&self) -> Result<ModelParams, Failure> {
        let Coefficients { a, b, c } = self.params;
        ModelParams::new(a, b, c, self.s0).map_err(Failure::from)
    }

    pub fn model(&self) -> Result<Model, Failure> {
        Model::new(self.model_params()?, self.equilibrium_index).map_err(Failure::from)
    }

    pub fn mesh(&self) -> Result<Mesh, Failure> {
        Mesh::new(self.mesh_intervals, self.mesh_degree).map_err(Failure::from)
    }

    pub fn newton(&self) -> NewtonOptions {
        NewtonOptions {
            tol: self.continuation.newton_tol,
            max_iter: self.continuation.newton_max_iter,
        }
    }

    pub fn continuation_settings(&self) -> ContinuationSettings {
        let c = &self.continuation;
        ContinuationSettings {
            max_steps: c.max_steps,
            gamma_bounds: (c.gamma_min, c.gamma_max),
            step: StepControl {
                h0: c.h0,
                hmin: c.hmin,
                hmax: c.hmax,
            },
            newton: self.newton(),
            max_defect: c.max_defect,
            ..ContinuationSettings::default()
        }
    }

    /// Single-line JSON used as the provenance header.
    pub fn header(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
