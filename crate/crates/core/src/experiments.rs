//! Problem presets and experiment drivers, free of file I/O.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{BoundaryCondition, CarrierBc, DiscreteState, PotentialBc, ProblemSpec};
use crate::diagnostics::{error_norms, terminal_current, ErrorNorms};
use crate::error::{DdfvError, Result};
use crate::fluxes::{face_concentration, FaceState, SchemeKind};
use crate::mesh::{AdmissibleMesh, Point};
use crate::solver::{march, solve_stationary, solve_stationary_from, SolverConfig, TimeGrid, Trajectory};

pub const EVOLUTION_LENGTH: f64 = 50.0;
pub const DOPING: f64 = -0.5;

/// Blocking contacts at both ends of `(0, length)`, constant doping and initial value.
pub fn evolution_spec(
    scheme: SchemeKind,
    length: f64,
    n_cells: usize,
    c0: f64,
    phi_left: f64,
    phi_right: f64,
) -> Result<ProblemSpec> {
    let mesh = Arc::new(AdmissibleMesh::uniform_1d(length, n_cells, "left", "right")?);
    ProblemSpec::new(
        mesh,
        scheme,
        vec![DOPING; n_cells],
        &[("left", BoundaryCondition::blocking(phi_left)), ("right", BoundaryCondition::blocking(phi_right))],
        vec![c0; n_cells],
    )
}

pub fn run_evolution(spec: &ProblemSpec, grid: &TimeGrid, config: &SolverConfig) -> Result<Trajectory> {
    march(spec, grid, config, |_| {})
}

/// Stationary problem on `(0, length)` with `phi = 0` and `c = c_left`, `c_right` at the ends.
pub fn stationary_spec(scheme: SchemeKind, length: f64, n_cells: usize, c_left: f64, c_right: f64) -> Result<ProblemSpec> {
    let mesh = Arc::new(AdmissibleMesh::uniform_1d(length, n_cells, "left", "right")?);
    let contact = |c| BoundaryCondition { carrier: CarrierBc::Dirichlet(c), potential: PotentialBc::Dirichlet(0.0) };
    ProblemSpec::new(
        mesh,
        scheme,
        vec![DOPING; n_cells],
        &[("left", contact(c_left)), ("right", contact(c_right))],
        vec![0.5; n_cells],
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub scheme: SchemeKind,
    pub n_cells: usize,
    pub h: f64,
    pub l2: f64,
    pub h1: f64,
}

/// Which solution a convergence study compares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum ConvergenceCase {
    /// Stationary problem with concentration contacts.
    Stationary { c_left: f64, c_right: f64 },
    /// Evolution problem compared at `t_end` on the time grid.
    Transient { c0: f64, phi_left: f64, grid: TimeGrid },
}

fn solve_case(case: &ConvergenceCase, scheme: SchemeKind, length: f64, n: usize, config: &SolverConfig) -> Result<(ProblemSpec, DiscreteState)> {
    match *case {
        ConvergenceCase::Stationary { c_left, c_right } => {
            let spec = stationary_spec(scheme, length, n, c_left, c_right)?;
            let (state, _) = solve_stationary(&spec, config)?;
            Ok((spec, state))
        }
        ConvergenceCase::Transient { c0, phi_left, grid } => {
            let spec = evolution_spec(scheme, length, n, c0, phi_left, 0.0)?;
            let traj = run_evolution(&spec, &grid, config)?;
            Ok((spec, traj.last_state().clone()))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub rows: Vec<ConvergenceRow>,
    pub reference: DiscreteState,
    pub reference_spec: ProblemSpec,
    /// Converged coarse solutions, in the order of `rows`.
    pub states: Vec<(ProblemSpec, DiscreteState)>,
}

/// Errors of the concentration on each coarse grid against a Sedan solution
/// on `reference_cells`. Cases run in parallel.
pub fn convergence_study(
    case: &ConvergenceCase,
    schemes: &[SchemeKind],
    grids: &[usize],
    reference_cells: usize,
    config: &SolverConfig,
) -> Result<ConvergenceStudy> {
    let length = EVOLUTION_LENGTH;
    if let Some(&n) = grids.iter().find(|&&n| reference_cells % n != 0) {
        return Err(DdfvError::Config(format!("reference grid {reference_cells} is not a refinement of {n}")));
    }
    let (reference_spec, reference) = solve_case(case, SchemeKind::Sedan, length, reference_cells, config)?;
    let ref_c = reference.concentrations();
    let jobs: Vec<(SchemeKind, usize)> = schemes.iter().flat_map(|&s| grids.iter().map(move |&n| (s, n))).collect();
    let results = jobs
        .par_iter()
        .map(|&(scheme, n)| {
            let (spec, state) = solve_case(case, scheme, length, n, config)?;
            let ErrorNorms { l2, h1 } = error_norms(&state.concentrations(), spec.mesh(), &ref_c, reference_spec.mesh())?;
            Ok((ConvergenceRow { scheme, n_cells: n, h: length / n as f64, l2, h1 }, (spec, state)))
        })
        .collect::<Result<Vec<_>>>()?;
    let (rows, states) = results.into_iter().unzip();
    Ok(ConvergenceStudy { rows, reference, reference_spec, states })
}

pub const FET_LENGTH: f64 = 1e-2;
pub const FET_HEIGHT: f64 = 1e-3;

/// Region of a boundary point of the FET rectangle with outward normal `n`.
pub fn fet_region(p: Point, n: Point) -> String {
    let x = p[0] / FET_LENGTH;
    let name = if n[1] > 0.5 {
        if x < 0.2 {
            "source"
        } else if x > 0.8 {
            "drain"
        } else if x > 0.3 && x < 0.7 {
            "gate"
        } else {
            "insulating"
        }
    } else {
        "insulating"
    };
    name.to_string()
}

/// The `(10 * 2^n_ref) x (5 * 2^n_ref)` FET grid.
pub fn fet_mesh(n_ref: u32) -> Result<AdmissibleMesh> {
    let nx = 10 * 2usize.pow(n_ref);
    let ny = 5 * 2usize.pow(n_ref);
    AdmissibleMesh::triangulated_rect_2d(FET_LENGTH, FET_HEIGHT, nx, ny, &fet_region)
}

pub const FET_SOURCE_POTENTIAL: f64 = -5.0;
pub const FET_DRAIN_POTENTIAL: f64 = 5.0;

pub fn fet_spec(mesh: Arc<AdmissibleMesh>, scheme: SchemeKind, u_gate: f64) -> Result<ProblemSpec> {
    let n = mesh.n_cells();
    ProblemSpec::new(
        mesh,
        scheme,
        vec![DOPING; n],
        &[
            ("source", BoundaryCondition::ohmic(0.5, FET_SOURCE_POTENTIAL)),
            ("drain", BoundaryCondition::ohmic(0.5, FET_DRAIN_POTENTIAL)),
            ("gate", BoundaryCondition::gate(0.1 * FET_HEIGHT, u_gate)),
            ("insulating", BoundaryCondition::INSULATING),
        ],
        vec![0.5; n],
    )
}

/// `count` gate voltages from `start` to `end`, inclusive.
pub fn gate_sweep(start: f64, end: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![start];
    }
    (0..count).map(|i| start + (end - start) * i as f64 / (count - 1) as f64).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct IvPoint {
    pub u_gate: f64,
    /// Carrier current leaving through the source contact.
    pub current: f64,
    /// Carrier current leaving through the drain contact.
    pub drain_current: f64,
    pub state: DiscreteState,
    pub spec: ProblemSpec,
}

/// Stationary solutions along the gate voltages, each warm-started from the previous one.
pub fn fet_sweep(mesh: Arc<AdmissibleMesh>, scheme: SchemeKind, gates: &[f64], config: &SolverConfig) -> Result<Vec<IvPoint>> {
    let mut out: Vec<IvPoint> = Vec::with_capacity(gates.len());
    for &u in gates {
        let spec = fet_spec(Arc::clone(&mesh), scheme, u)?;
        let (state, _) = match out.last() {
            None => solve_stationary(&spec, config)?,
            Some(prev) => solve_stationary_from(&prev.spec, &prev.state, &spec, config)?,
        };
        let current = terminal_current(&spec, &state, "source")?;
        let drain_current = terminal_current(&spec, &state, "drain")?;
        out.push(IvPoint { u_gate: u, current, drain_current, state, spec });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceConcentrationRow {
    pub dphi: f64,
    pub centered: f64,
    pub sedan: f64,
    pub activity: f64,
    pub bess_ch: f64,
}

/// Face concentration of all schemes for fixed `c_k`, `c_l` over
/// `phi_L - phi_K` in `[-span, span]` (`rows` evenly spaced values).
pub fn face_concentration_table(c_k: f64, c_l: f64, span: f64, rows: usize) -> Result<Vec<FaceConcentrationRow>> {
    if rows < 2 {
        return Err(DdfvError::invalid("need at least two rows"));
    }
    (0..rows)
        .map(|i| {
            let dphi = -span + 2.0 * span * i as f64 / (rows - 1) as f64;
            let s = FaceState::new(c_k, c_l, 0.0, dphi)?;
            Ok(FaceConcentrationRow {
                dphi,
                centered: face_concentration(SchemeKind::Centered, &s),
                sedan: face_concentration(SchemeKind::Sedan, &s),
                activity: face_concentration(SchemeKind::ActivityBased, &s),
                bess_ch: face_concentration(SchemeKind::BessemoulinChatard, &s),
            })
        })
        .collect()
}
