//! Experiment drivers that write CSV artifacts and run metadata.
//!
//! Numbers are written with 17 significant digits. Per-scheme files go to
//! `<output>/<scheme>/`, tables spanning schemes to `<output>/`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde_json::json;

use crate::config::{Experiment, RunConfig};
use crate::diagnostics::{eoc, linf_phi_check, mmatrix_witness_check, StepDiagnostics};
use crate::error::{DdfvError, Result};
use crate::experiments::{
    convergence_study, evolution_spec, face_concentration_table, fet_mesh, fet_sweep, gate_sweep, run_evolution,
    ConvergenceRow, IvPoint,
};
use crate::fluxes::{flux, FaceState, SchemeKind};
use crate::mesh::AdmissibleMesh;
use crate::physics::bernoulli;
use crate::solver::TimeGrid;

/// What a run wrote, plus one human-readable line per notable result.
#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub lines: Vec<String>,
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<PathBuf> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(path.to_path_buf())
}

fn write_meta(config: &RunConfig, extra: serde_json::Value) -> Result<PathBuf> {
    let path = config.output.join("meta.json");
    let meta = json!({
        "experiment": config.experiment.name(),
        "schemes": config.schemes.iter().map(|s| s.name()).collect::<Vec<_>>(),
        "package": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "solver": config.solver,
        "config": config,
        "conventions": {
            "gate_term": "Robin faces couple the gate voltage to the cell value of the potential",
            "energy_relative": "E_rel(t) = E(t) - E(t_end) of the same run",
            "h1_error": "l2 error plus the two-point seminorm of the error on the reference mesh, coarse solution prolonged piecewise linearly",
            "iv_error": "max over the sweep of the absolute current difference",
        },
        "results": extra,
    });
    fs::create_dir_all(&config.output)?;
    fs::write(&path, serde_json::to_string_pretty(&meta).expect("metadata serializes") + "\n")?;
    Ok(path)
}

pub fn execute(config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    fs::create_dir_all(&config.output)?;
    match config.experiment {
        Experiment::Run1d => run1d(config),
        Experiment::Converge1d => converge1d(config),
        Experiment::Fet => fet(config),
        Experiment::FaceConcentration => face_concentration(config),
        Experiment::Selftest => selftest(config),
    }
}

/// Index of the first record at or after each snapshot time.
fn snapshot_indices(times: &[f64], snapshots: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = snapshots
        .iter()
        .filter_map(|&s| times.iter().position(|&t| t >= s * (1.0 - 1e-12)))
        .collect();
    idx.dedup();
    idx
}

pub fn run1d(config: &RunConfig) -> Result<RunReport> {
    let r = &config.run1d;
    let outcomes = config
        .schemes
        .par_iter()
        .map(|&scheme| {
            let spec = evolution_spec(scheme, r.length, r.cells, r.c0(), r.phi_left(), r.phi_right)?;
            let traj = run_evolution(&spec, &r.time, &config.solver)?;
            let dir = config.output.join(scheme.name());
            let mut diags: Vec<StepDiagnostics> = vec![traj.initial_diagnostics];
            diags.extend(traj.steps.iter().map(|s| s.diagnostics));
            let e_final = diags.last().map_or(0.0, |d| d.energy);
            let energy = write_table(
                &dir.join("energy.csv"),
                &["t", "E_rel", "dissipation", "mass", "c_min", "c_max"],
                diags.iter().map(|d| {
                    vec![num(d.time), num(d.energy - e_final), num(d.dissipation), num(d.mass), num(d.c_min), num(d.c_max)]
                }),
            )?;
            let mut states = vec![(0.0, &traj.initial)];
            states.extend(traj.steps.iter().map(|s| (s.time, &s.state)));
            let times: Vec<f64> = states.iter().map(|s| s.0).collect();
            let mut rows = Vec::new();
            for i in snapshot_indices(&times, &r.snapshots) {
                let (t, state) = states[i];
                for ((cell, c), phi) in spec.mesh().cells().iter().zip(state.concentrations()).zip(&state.phi) {
                    rows.push(vec![num(t), num(cell.center[0]), num(c), num(*phi)]);
                }
            }
            let profiles = write_table(&dir.join("profiles.csv"), &["t", "x", "c", "phi"], rows)?;
            let energy_increase = diags.windows(2).map(|w| w[1].energy - w[0].energy).fold(f64::NEG_INFINITY, f64::max);
            let line = format!(
                "{scheme}: {} steps, max energy increase {energy_increase:.3e}, c in [{:.6e}, {:.6e}]",
                traj.steps.len(),
                diags.iter().map(|d| d.c_min).fold(f64::INFINITY, f64::min),
                diags.iter().map(|d| d.c_max).fold(f64::NEG_INFINITY, f64::max),
            );
            let summary = json!({
                "scheme": scheme.name(),
                "steps": traj.steps.len(),
                "newton_iterations": traj.steps.iter().map(|s| s.stats.iterations).sum::<usize>(),
                "max_energy_increase": energy_increase,
            });
            Ok((vec![energy, profiles], line, summary))
        })
        .collect::<Result<Vec<_>>>()?;
    finish(config, outcomes)
}

fn finish(config: &RunConfig, outcomes: Vec<(Vec<PathBuf>, String, serde_json::Value)>) -> Result<RunReport> {
    let mut report = RunReport::default();
    let mut results = Vec::new();
    for (files, line, summary) in outcomes {
        report.files.extend(files);
        report.lines.push(line);
        results.push(summary);
    }
    report.files.push(write_meta(config, serde_json::Value::Array(results))?);
    Ok(report)
}

/// Orders between consecutive rows of one scheme.
pub fn eoc_table(rows: &[ConvergenceRow], scheme: SchemeKind) -> Result<Vec<(usize, usize, f64, f64)>> {
    let own: Vec<&ConvergenceRow> = rows.iter().filter(|r| r.scheme == scheme).collect();
    let l2 = eoc(&own.iter().map(|r| (r.h, r.l2)).collect::<Vec<_>>())?;
    let h1 = eoc(&own.iter().map(|r| (r.h, r.h1)).collect::<Vec<_>>())?;
    Ok(own.windows(2).zip(l2.into_iter().zip(h1)).map(|(w, (a, b))| (w[0].n_cells, w[1].n_cells, a, b)).collect())
}

pub fn converge1d(config: &RunConfig) -> Result<RunReport> {
    let g = &config.converge1d;
    let study = convergence_study(&g.case, &config.schemes, &g.grids, g.reference_cells, &config.solver)?;
    let mut report = RunReport::default();
    report.files.push(write_table(
        &config.output.join("errors.csv"),
        &["scheme", "n_cells", "h", "l2", "h1"],
        study.rows.iter().map(|r| vec![r.scheme.name().to_string(), r.n_cells.to_string(), num(r.h), num(r.l2), num(r.h1)]),
    )?);
    let mut eoc_rows = Vec::new();
    let mut results = Vec::new();
    for &scheme in &config.schemes {
        let table = eoc_table(&study.rows, scheme)?;
        if let Some(&(_, _, l2, h1)) = table.last() {
            report.lines.push(format!("{scheme}: terminal EOC l2 {l2:.3}, h1 {h1:.3}"));
            results.push(json!({ "scheme": scheme.name(), "terminal_eoc_l2": l2, "terminal_eoc_h1": h1 }));
        }
        for (coarse, fine, l2, h1) in table {
            eoc_rows.push(vec![scheme.name().to_string(), coarse.to_string(), fine.to_string(), num(l2), num(h1)]);
        }
    }
    report.files.push(write_table(
        &config.output.join("eoc.csv"),
        &["scheme", "n_coarse", "n_fine", "eoc_l2", "eoc_h1"],
        eoc_rows,
    )?);
    report.files.push(write_meta(config, serde_json::Value::Array(results))?);
    Ok(report)
}

fn write_fields(path: &Path, mesh: &AdmissibleMesh, point: &IvPoint) -> Result<PathBuf> {
    write_table(
        path,
        &["x", "y", "c", "phi"],
        mesh.cells()
            .iter()
            .zip(point.state.concentrations())
            .zip(&point.state.phi)
            .map(|((cell, c), phi)| vec![num(cell.center[0]), num(cell.center[1]), num(c), num(*phi)]),
    )
}

pub fn fet(config: &RunConfig) -> Result<RunReport> {
    let f = &config.fet;
    let mesh = Arc::new(fet_mesh(f.n_ref)?);
    let gates = gate_sweep(f.gate_start, f.gate_end, f.gate_count);
    let sweeps = config
        .schemes
        .par_iter()
        .map(|&scheme| fet_sweep(Arc::clone(&mesh), scheme, &gates, &config.solver).map(|pts| (scheme, pts)))
        .collect::<Result<Vec<_>>>()?;
    let mut report = RunReport::default();
    let mut iv_rows = Vec::new();
    let mut results = Vec::new();
    for (scheme, points) in &sweeps {
        for p in points {
            iv_rows.push(vec![scheme.name().to_string(), num(p.u_gate), num(p.current)]);
            if f.snapshots.iter().any(|&u| (u - p.u_gate).abs() < 1e-9) {
                let path = config.output.join(scheme.name()).join(format!("fields_{}.csv", p.u_gate));
                report.files.push(write_fields(&path, &mesh, p)?);
            }
        }
        let imbalance = points.iter().map(|p| (p.current + p.drain_current).abs()).fold(0.0, f64::max);
        let peak = points.iter().map(|p| p.current.abs()).fold(0.0, f64::max);
        let (first, last) = (&points[0], &points[points.len() - 1]);
        report.lines.push(format!(
            "{scheme}: I({}) = {:.6e}, I({}) = {:.6e}, max |I_source + I_drain| = {imbalance:.3e}",
            first.u_gate, first.current, last.u_gate, last.current
        ));
        results.push(json!({
            "scheme": scheme.name(),
            "max_current": peak,
            "max_imbalance": imbalance,
            "linf_bound_holds": points.iter().all(|p| linf_phi_check(&p.spec, &p.state)),
        }));
    }
    report.files.insert(0, write_table(&config.output.join("iv.csv"), &["scheme", "u_gate", "current"], iv_rows)?);
    report.files.push(write_meta(config, serde_json::Value::Array(results))?);
    Ok(report)
}

pub fn face_concentration(config: &RunConfig) -> Result<RunReport> {
    let fc = &config.face_concentration;
    let table = face_concentration_table(fc.c_k, fc.c_l, fc.span, fc.rows)?;
    let path = write_table(
        &config.output.join("face_concentration.csv"),
        &["dphi", "centered", "sedan", "activity", "bess_ch"],
        table.iter().map(|r| vec![num(r.dphi), num(r.centered), num(r.sedan), num(r.activity), num(r.bess_ch)]),
    )?;
    let activity_max = table.iter().map(|r| r.activity).fold(f64::NEG_INFINITY, f64::max);
    let report = RunReport {
        files: vec![path, write_meta(config, json!({ "activity_max": activity_max }))?],
        lines: vec![format!("{} rows, activity face concentration peaks at {activity_max:.6}", table.len())],
    };
    Ok(report)
}

/// Fast consistency checks of the kernels, the mesh bound and a short
/// evolution per scheme. Fails with a solver error naming the broken checks.
pub fn selftest(config: &RunConfig) -> Result<RunReport> {
    let mut checks: Vec<(String, bool, String)> = Vec::new();
    let reflection = (-500..=500)
        .map(|i| {
            let x = i as f64 * 0.1;
            (bernoulli(x) - bernoulli(-x) + x).abs()
        })
        .fold(0.0, f64::max);
    checks.push(("bernoulli_reflection".into(), bernoulli(0.0) == 1.0 && reflection <= 1e-13, num(reflection)));
    for &scheme in &config.schemes {
        let mut worst = 0.0f64;
        for (i, &a) in [0.01, 0.3, 0.5, 0.9, 0.999].iter().enumerate() {
            for &b in &[0.02, 0.4, 0.7, 0.99] {
                let s = FaceState::new(a, b, i as f64 - 2.0, 1.5)?;
                let (f, g) = (flux(scheme, &s), flux(scheme, &s.swapped()));
                worst = worst.max((f + g).abs() / f.abs().max(1e-300));
            }
        }
        checks.push((format!("antisymmetry_{scheme}"), worst <= 1e-12, num(worst)));
    }
    let mesh = AdmissibleMesh::uniform_1d(50.0, 100, "left", "right")?;
    let w = mmatrix_witness_check(&mesh, &|_| true)?;
    checks.push(("mmatrix_witness_1d".into(), w.min_row_value >= 1.0 - 1e-12, num(w.min_row_value)));
    let grid = TimeGrid::Geometric { t1: 1e-3, delta: 1.5, t_end: 1.0 };
    for &scheme in &config.schemes {
        let spec = evolution_spec(scheme, 50.0, 20, 0.5, 10.0, 0.0)?;
        let traj = run_evolution(&spec, &grid, &config.solver)?;
        let mut prev = traj.initial_diagnostics.energy;
        let mut increase = f64::NEG_INFINITY;
        for s in &traj.steps {
            increase = increase.max(s.diagnostics.energy - prev);
            prev = s.diagnostics.energy;
        }
        checks.push((format!("energy_decay_{scheme}"), increase <= 1e-9, num(increase)));
    }
    let path = write_table(
        &config.output.join("selftest.csv"),
        &["check", "passed", "value"],
        checks.iter().map(|(name, ok, v)| vec![name.clone(), ok.to_string(), v.clone()]),
    )?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0.as_str()).collect();
    let meta = write_meta(config, json!({ "checks": checks.len(), "failed": failed }))?;
    if !failed.is_empty() {
        return Err(DdfvError::SolverFailure { time: f64::NAN, reason: format!("selftest failed: {}", failed.join(", ")) });
    }
    Ok(RunReport { files: vec![path, meta], lines: vec![format!("{} checks passed", checks.len())] })
}
