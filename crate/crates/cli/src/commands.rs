//! Subcommand implementations. Each writes its artifacts into the output
//! directory and reports the written paths on stdout.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use delay_hopf::bvp::{collocation_residual, correct_guess, mesh_defect, orbit_distance, PeriodicOrbit};
use delay_hopf::continuation::{branch_summary, continue_branch, start_branch, write_summary_csv, Branch};
use delay_hopf::hopf::{hopf_points, HopfPoint};
use delay_hopf::integrator::return_map_error;
use delay_hopf::lindstedt::{PLExpansion, DEFAULT_AUTO_RHO};
use delay_hopf::model::{solve_equilibria, Model};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::Failure;

/// Order of the series used as a Newton guess; the expansion is built one order
/// higher so that `γ` and `ω` are available through order 4.
const GUESS_ORDER: usize = 3;

fn create(cfg: &RunConfig, name: &str) -> Result<(PathBuf, BufWriter<File>), Failure> {
    std::fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| Failure::Config(format!("cannot create {}: {e}", cfg.output_dir.display())))?;
    let path = cfg.output_dir.join(name);
    let file = File::create(&path).map_err(|e| Failure::Config(format!("cannot create {}: {e}", path.display())))?;
    Ok((path, BufWriter::new(file)))
}

fn write_csv<T: Serialize>(cfg: &RunConfig, name: &str, rows: &[T], columns: &[&str]) -> Result<PathBuf, Failure> {
    let (path, mut out) = create(cfg, name)?;
    writeln!(out, "# {}", cfg.header())?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(columns)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(path)
}

fn write_json(cfg: &RunConfig, name: &str, body: serde_json::Value) -> Result<PathBuf, Failure> {
    let (path, mut out) = create(cfg, name)?;
    let doc = json!({ "config": cfg, "result": body });
    serde_json::to_writer_pretty(&mut out, &doc).map_err(|e| Failure::Numerical(e.to_string()))?;
    writeln!(out)?;
    out.flush()?;
    Ok(path)
}

fn hopf_list(cfg: &RunConfig, model: &Model) -> Result<Vec<HopfPoint>, Failure> {
    let hps = hopf_points(&model.lin, cfg.gamma_max)?;
    if hps.is_empty() {
        return Err(Failure::Numerical(format!("no Hopf point with gamma0 < {}", cfg.gamma_max)));
    }
    Ok(hps)
}

/// The configured Hopf point (default: the first).
fn selected_hopf(cfg: &RunConfig, model: &Model) -> Result<(usize, HopfPoint), Failure> {
    let hps = hopf_list(cfg, model)?;
    let j = cfg.hopf_index.unwrap_or(0);
    let hp = *hps
        .get(j)
        .ok_or_else(|| Failure::Config(format!("hopf_index {j} out of range ({} points)", hps.len())))?;
    Ok((j, hp))
}

fn guess_epsilon(cfg: &RunConfig, exp: &PLExpansion) -> f64 {
    cfg.epsilon.unwrap_or_else(|| exp.auto_epsilon(DEFAULT_AUTO_RHO))
}

pub fn equilibria(cfg: &RunConfig) -> Result<Vec<PathBuf>, Failure> {
    #[derive(Serialize)]
    struct Row {
        index: usize,
        u0: f64,
        v0: f64,
        selected: bool,
    }
    let eqs = solve_equilibria(&cfg.model_params()?)?;
    let rows: Vec<Row> = eqs
        .iter()
        .enumerate()
        .map(|(index, e)| Row {
            index,
            u0: e.u0,
            v0: e.v0,
            selected: index == cfg.equilibrium_index,
        })
        .collect();
    Ok(vec![write_csv(cfg, "equilibria.csv", &rows, &["index", "u0", "v0", "selected"])?])
}

pub fn hopf(cfg: &RunConfig) -> Result<Vec<PathBuf>, Failure> {
    #[derive(Serialize)]
    struct Row {
        s0: f64,
        j: usize,
        gamma0: f64,
        omega0: f64,
        transversality: f64,
        char_residual: f64,
        certified: bool,
    }
    let model = cfg.model()?;
    let rows: Vec<Row> = hopf_points(&model.lin, cfg.gamma_max)?
        .iter()
        .enumerate()
        .map(|(j, h)| Row {
            s0: cfg.s0,
            j,
            gamma0: h.gamma0,
            omega0: h.omega0,
            transversality: h.transversality,
            char_residual: h.char_residual,
            certified: h.certified.all(),
        })
        .collect();
    let cols = ["s0", "j", "gamma0", "omega0", "transversality", "char_residual", "certified"];
    Ok(vec![write_csv(cfg, "hopf.csv", &rows, &cols)?])
}

pub fn lindstedt(cfg: &RunConfig) -> Result<Vec<PathBuf>, Failure> {
    let eps = cfg
        .epsilon
        .ok_or_else(|| Failure::Config("lindstedt requires an explicit epsilon (--eps)".into()))?;
    let model = cfg.model()?;
    let (j, hp) = selected_hopf(cfg, &model)?;
    let exp = PLExpansion::build(&model, &hp, cfg.order)?;
    let rows = exp.order_table(eps);
    let cols = ["k", "gamma_k", "omega_k", "sup_norm", "eps_k_sup_norm"];
    let csv = write_csv(cfg, &format!("lindstedt_{j}.csv"), &rows, &cols)?;
    let body = json!({
        "hopf_index": j,
        "epsilon": eps,
        "solvability_residuals": exp.solvability,
        "expansion": exp.to_json(),
    });
    let js = write_json(cfg, &format!("lindstedt_{j}.json"), body)?;
    Ok(vec![csv, js])
}

pub fn correct(cfg: &RunConfig) -> Result<Vec<PathBuf>, Failure> {
    let model = cfg.model()?;
    let (j, hp) = selected_hopf(cfg, &model)?;
    let exp = PLExpansion::build(&model, &hp, GUESS_ORDER + 1)?;
    let eps = guess_epsilon(cfg, &exp);
    let guess = exp.evaluate(eps, GUESS_ORDER)?;
    let orbit = correct_guess(&model, &guess, cfg.mesh()?, &cfg.newton())?;
    let body = json!({
        "hopf_index": j,
        "epsilon": eps,
        "guess_order": GUESS_ORDER,
        "distance_to_guess": orbit_distance(&guess, &orbit),
        "iterations": orbit.iterations,
        "residual": orbit.residual,
        "residual_history": orbit.history,
        "orbit": orbit.to_json(),
    });
    Ok(vec![write_json(cfg, &format!("orbit_{j}.json"), body)?])
}

fn run_branch(cfg: &RunConfig, model: &Model, hp: &HopfPoint) -> Result<Branch, Failure> {
    let exp = PLExpansion::build(model, hp, GUESS_ORDER + 1)?;
    let start = start_branch(model, &exp, guess_epsilon(cfg, &exp), cfg.mesh()?, &cfg.newton())?;
    Ok(continue_branch(model, hp, &start.point, 1.0, &cfg.continuation_settings())?)
}

pub fn continuation(cfg: &RunConfig, jobs: usize) -> Result<Vec<PathBuf>, Failure> {
    let model = cfg.model()?;
    let hps = hopf_list(cfg, &model)?;
    let indices: Vec<usize> = match cfg.hopf_index {
        Some(j) if j >= hps.len() => {
            return Err(Failure::Config(format!("hopf_index {j} out of range ({} points)", hps.len())))
        }
        Some(j) => vec![j],
        None => (0..hps.len()).collect(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Failure::Config(format!("thread pool: {e}")))?;
    let branches: Vec<(usize, Result<Branch, Failure>)> = pool.install(|| {
        indices
            .par_iter()
            .map(|&j| (j, run_branch(cfg, &model, &hps[j])))
            .collect()
    });
    let mut written = Vec::new();
    let mut first_err = None;
    for (j, b) in branches {
        match b {
            Ok(b) => {
                let (path, out) = create(cfg, &format!("branch_{j}.csv"))?;
                write_summary_csv(out, Some(&cfg.header()), &branch_summary(&b))?;
                written.push(path);
                let every = cfg.continuation.snapshot_every;
                if every > 0 {
                    for (k, p) in b.points.iter().enumerate().filter(|(k, _)| k % every == 0) {
                        let body = json!({ "hopf_index": j, "step": k, "arclength": p.arclength, "orbit": p.orbit.to_json() });
                        written.push(write_json(cfg, &format!("branch_{j}_orbit_{k:04}.json"), body)?);
                    }
                }
                println!("branch {j}: {} points, termination {:?}", b.points.len(), b.termination);
            }
            Err(e) => {
                eprintln!("branch {j}: {e}");
                first_err.get_or_insert(e);
            }
        }
    }
    match first_err {
        Some(e) => {
            for p in &written {
                println!("{}", p.display());
            }
            Err(e)
        }
        None => Ok(written),
    }
}

pub fn validate(cfg: &RunConfig) -> Result<Vec<PathBuf>, Failure> {
    #[derive(Serialize)]
    struct Row {
        j: usize,
        gamma: f64,
        period: f64,
        iterations: usize,
        collocation_residual: f64,
        mesh_defect: f64,
        return_map_error: f64,
    }
    let model = cfg.model()?;
    let hps = hopf_list(cfg, &model)?;
    let indices: Vec<usize> = match cfg.hopf_index {
        Some(j) => vec![j],
        None => (0..hps.len()).collect(),
    };
    let mut rows = Vec::new();
    for j in indices {
        let hp = hps
            .get(j)
            .ok_or_else(|| Failure::Config(format!("hopf_index {j} out of range ({} points)", hps.len())))?;
        let exp = PLExpansion::build(&model, hp, GUESS_ORDER + 1)?;
        let guess = exp.evaluate(guess_epsilon(cfg, &exp), GUESS_ORDER)?;
        let orbit: PeriodicOrbit = correct_guess(&model, &guess, cfg.mesh()?, &cfg.newton())?;
        rows.push(Row {
            j,
            gamma: orbit.gamma,
            period: orbit.period,
            iterations: orbit.iterations,
            collocation_residual: collocation_residual(&model, &orbit)?,
            mesh_defect: mesh_defect(&model, &orbit),
            return_map_error: return_map_error(&model, &orbit, cfg.integrator_step)?,
        });
    }
    let cols = [
        "j",
        "gamma",
        "T",
        "iterations",
        "collocation_residual",
        "mesh_defect",
        "return_map_error",
    ];
    Ok(vec![write_csv(cfg, "validate.csv", &rows, &cols)?])
}
