//! Discrete functionals and measurements on solver states.

use serde::{Deserialize, Serialize};

use crate::assembly::{face_fluxes, CarrierBc, DiscreteState, PotentialBc, ProblemSpec, SparseMatrix};
use crate::error::{DdfvError, Result};
use crate::fluxes::{face_dissipation, FaceState};
use crate::mesh::{AdmissibleMesh, FaceCells, Point};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub time: f64,
    pub energy: f64,
    pub dissipation: f64,
    pub mass: f64,
    pub c_min: f64,
    pub c_max: f64,
    /// `min (1 - c_K)`; stays positive when `c_max` rounds to 1.
    pub vacancy_min: f64,
    pub newton_iters: usize,
}

impl StepDiagnostics {
    pub fn measure(spec: &ProblemSpec, state: &DiscreteState, time: f64, newton_iters: usize) -> Self {
        let c = state.concentrations();
        StepDiagnostics {
            time,
            energy: discrete_energy(spec, state),
            dissipation: total_dissipation(spec, state),
            mass: mass(spec.mesh(), state),
            c_min: c.iter().copied().fold(f64::INFINITY, f64::min),
            c_max: c.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            vacancy_min: state.vacancies().into_iter().fold(f64::INFINITY, f64::min),
            newton_iters,
        }
    }
}

pub fn mass(mesh: &AdmissibleMesh, state: &DiscreteState) -> f64 {
    mesh.cells().iter().zip(state.concentrations()).map(|(cell, c)| cell.measure * c).sum()
}

/// Entropy plus electrostatic energy, with boundary jumps taken against the
/// mirror values. Gate faces act as Dirichlet faces of transmissibility
/// `m_sigma / thickness` and exterior value the gate voltage.
pub fn discrete_energy(spec: &ProblemSpec, state: &DiscreteState) -> f64 {
    let mesh = spec.mesh();
    let lam = spec.lambda_squared();
    let phi = &state.phi;
    let mut energy: f64 = mesh.cells().iter().enumerate().map(|(k, cell)| cell.measure * state.site(k).entropy()).sum();
    for f in mesh.faces() {
        match f.cells {
            FaceCells::Interior { k, l } => {
                let jump = phi[l] - phi[k];
                energy += 0.5 * lam * f.transmissibility * jump * jump;
            }
            FaceCells::Boundary { cell: k, region } => {
                let (g, exterior) = match spec.conditions()[region].potential {
                    PotentialBc::Dirichlet(p) if f.distance > 0.0 => (f.transmissibility, p),
                    PotentialBc::Robin { thickness, voltage } => (f.measure / thickness, voltage),
                    _ => continue,
                };
                let jump = exterior - phi[k];
                energy += lam * g * (0.5 * jump * jump - exterior * jump);
            }
        }
    }
    energy
}

/// `sum over interior faces of tau * D`.
pub fn total_dissipation(spec: &ProblemSpec, state: &DiscreteState) -> f64 {
    let mesh = spec.mesh();
    mesh.faces()
        .iter()
        .filter_map(|f| match f.cells {
            FaceCells::Interior { k, l } => {
                let s = FaceState::from_sites(state.site(k), state.site(l), state.phi[k], state.phi[l]);
                Some(f.transmissibility * face_dissipation(spec.scheme(), &s))
            }
            _ => None,
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorNorms {
    pub l2: f64,
    pub h1: f64,
}

/// Error of a coarse 1D solution against a reference on a nested refinement.
///
/// The coarse cell values are interpolated piecewise linearly between cell
/// centers (extrapolated linearly in the outer half cells) onto the reference
/// centers. The L2 norm and the two-point seminorm of the difference are then
/// taken on the reference mesh; `h1` is their sum.
pub fn error_norms(
    coarse: &[f64],
    coarse_mesh: &AdmissibleMesh,
    reference: &[f64],
    reference_mesh: &AdmissibleMesh,
) -> Result<ErrorNorms> {
    if coarse_mesh.dimension() != 1 || reference_mesh.dimension() != 1 {
        return Err(DdfvError::invalid("error norms are implemented for 1D meshes"));
    }
    if coarse.len() != coarse_mesh.n_cells() || reference.len() != reference_mesh.n_cells() {
        return Err(DdfvError::invalid("value and mesh sizes differ"));
    }
    let (nc, nf) = (coarse_mesh.n_cells(), reference_mesh.n_cells());
    let (dc, df) = (coarse_mesh.domain(), reference_mesh.domain());
    let same_domain = (dc.min[0] - df.min[0]).abs() <= 1e-12 * dc.max[0].abs().max(1.0)
        && (dc.max[0] - df.max[0]).abs() <= 1e-12 * dc.max[0].abs().max(1.0);
    if !same_domain || nf % nc != 0 {
        return Err(DdfvError::invalid(format!("a {nf}-cell mesh is not a refinement of a {nc}-cell mesh")));
    }
    let xc: Vec<f64> = coarse_mesh.cells().iter().map(|c| c.center[0]).collect();
    let mut e = Vec::with_capacity(nf);
    let mut seg = 0;
    for (cell, r) in reference_mesh.cells().iter().zip(reference) {
        let x = cell.center[0];
        while seg + 2 < nc && x > xc[seg + 1] {
            seg += 1;
        }
        let value = if nf == nc {
            coarse[e.len()]
        } else {
            let t = (x - xc[seg]) / (xc[seg + 1] - xc[seg]);
            coarse[seg] + t * (coarse[seg + 1] - coarse[seg])
        };
        e.push(value - r);
    }
    let l2 = reference_mesh.cells().iter().zip(&e).map(|(c, v)| c.measure * v * v).sum::<f64>().sqrt();
    let semi = reference_mesh
        .faces()
        .iter()
        .filter_map(|f| match f.cells {
            FaceCells::Interior { k, l } => Some(f.transmissibility * (e[l] - e[k]).powi(2)),
            _ => None,
        })
        .sum::<f64>()
        .sqrt();
    Ok(ErrorNorms { l2, h1: l2 + semi })
}

/// Orders `log(e_i / e_{i+1}) / log(h_i / h_{i+1})`; `+inf` when an error vanishes.
pub fn eoc(errors: &[(f64, f64)]) -> Result<Vec<f64>> {
    if errors.len() < 2 {
        return Err(DdfvError::invalid("need at least two (h, error) pairs"));
    }
    errors
        .windows(2)
        .map(|w| {
            let ((h0, e0), (h1, e1)) = (w[0], w[1]);
            if !(h1 < h0 && h1 > 0.0) {
                return Err(DdfvError::invalid("mesh sizes must be positive and strictly decreasing"));
            }
            if e0 == 0.0 || e1 == 0.0 {
                return Ok(f64::INFINITY);
            }
            Ok((e0 / e1).ln() / (h0 / h1).ln())
        })
        .collect()
}

/// The TPFA Laplacian with Dirichlet values kept as unknowns.
#[derive(Debug, Clone)]
pub struct DirichletLaplacian {
    pub matrix: SparseMatrix,
    /// Position of every unknown: cell centers first, then Dirichlet face points.
    pub points: Vec<Point>,
    /// Rows that are identity (Dirichlet faces and cells lying on one).
    pub dirichlet_rows: Vec<usize>,
}

/// Rows `(1/m_K) sum tau (u_K - u_{K,sigma})` for cells, identity rows for
/// Dirichlet faces. Cells whose center lies on a Dirichlet face are
/// themselves Dirichlet unknowns.
pub fn dirichlet_laplacian(mesh: &AdmissibleMesh, is_dirichlet: &dyn Fn(usize) -> bool) -> DirichletLaplacian {
    let n = mesh.n_cells();
    let mut pinned = vec![false; n];
    let mut face_unknown = vec![usize::MAX; mesh.faces().len()];
    let mut points: Vec<Point> = mesh.cells().iter().map(|c| c.center).collect();
    for (i, f) in mesh.faces().iter().enumerate() {
        if let FaceCells::Boundary { cell, region } = f.cells {
            if is_dirichlet(region) {
                if f.through_center() {
                    pinned[cell] = true;
                } else {
                    face_unknown[i] = points.len();
                    points.push(f.point);
                }
            }
        }
    }
    let mut matrix = SparseMatrix::new(points.len());
    let mut dirichlet_rows: Vec<usize> = (0..n).filter(|&k| pinned[k]).collect();
    dirichlet_rows.extend(n..points.len());
    for &row in &dirichlet_rows {
        matrix.push(row, row, 1.0);
    }
    for (i, f) in mesh.faces().iter().enumerate() {
        let tau = f.transmissibility;
        match f.cells {
            FaceCells::Interior { k, l } => {
                for (a, b) in [(k, l), (l, k)] {
                    if !pinned[a] {
                        let m = mesh.cells()[a].measure;
                        matrix.push(a, a, tau / m);
                        matrix.push(a, b, -tau / m);
                    }
                }
            }
            FaceCells::Boundary { cell, .. } => {
                if face_unknown[i] != usize::MAX && !pinned[cell] {
                    let m = mesh.cells()[cell].measure;
                    matrix.push(cell, cell, tau / m);
                    matrix.push(cell, face_unknown[i], -tau / m);
                }
            }
        }
    }
    DirichletLaplacian { matrix, points, dirichlet_rows }
}

/// `w(x) = 1 + (sup_y |y|^2 - |x|^2) / d` over the domain box.
pub fn witness(mesh: &AdmissibleMesh, x: Point) -> f64 {
    let d = mesh.dimension();
    let dom = mesh.domain();
    let sup: f64 = (0..d).map(|i| dom.min[i].powi(2).max(dom.max[i].powi(2))).sum();
    let norm2: f64 = (0..d).map(|i| x[i] * x[i]).sum();
    1.0 + (sup - norm2) / d as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    /// `min over rows of (L w)`
    pub min_row_value: f64,
    /// `min over Dirichlet rows of (L w)`, equal to `w` there.
    pub min_dirichlet_value: f64,
}

pub fn mmatrix_witness_check(mesh: &AdmissibleMesh, is_dirichlet: &dyn Fn(usize) -> bool) -> Result<WitnessReport> {
    let lap = dirichlet_laplacian(mesh, is_dirichlet);
    if lap.dirichlet_rows.is_empty() {
        return Err(DdfvError::invalid("the witness check needs at least one Dirichlet face"));
    }
    let w: Vec<f64> = lap.points.iter().map(|&p| witness(mesh, p)).collect();
    let lw = lap.matrix.mul_vec(&w);
    let min_dirichlet_value = lap.dirichlet_rows.iter().map(|&r| lw[r]).fold(f64::INFINITY, f64::min);
    Ok(WitnessReport { min_row_value: lw.into_iter().fold(f64::INFINITY, f64::min), min_dirichlet_value })
}

/// Witness check with the Dirichlet potential faces of `spec`. Neumann or
/// Robin faces on the boundary void the bound `L w >= 1`; rows next to them
/// can be negative.
pub fn mmatrix_witness_for(spec: &ProblemSpec) -> Result<WitnessReport> {
    let conditions = spec.conditions();
    mmatrix_witness_check(spec.mesh(), &|r| matches!(conditions[r].potential, PotentialBc::Dirichlet(_)))
}

/// `|phi_K| <= (1 + diam^2 / (4 d)) max(boundary potential data, max |c_K + c_dp_K|)`.
pub fn linf_phi_check(spec: &ProblemSpec, state: &DiscreteState) -> bool {
    linf_phi_margin(spec, state) >= 0.0
}

/// Bound minus `max |phi_K|`; nonnegative when the bound holds.
pub fn linf_phi_margin(spec: &ProblemSpec, state: &DiscreteState) -> f64 {
    let mesh = spec.mesh();
    let d = mesh.dimension() as f64;
    let constant = 1.0 + mesh.domain().diameter(mesh.dimension()).powi(2) / (4.0 * d);
    let source = state
        .concentrations()
        .iter()
        .zip(spec.doping())
        .map(|(c, dp)| (c + dp).abs())
        .fold(0.0, f64::max);
    let bound = constant * spec.max_boundary_potential().max(source);
    bound - state.phi.iter().map(|p| p.abs()).fold(0.0, f64::max)
}

/// Stationary carrier current leaving the domain through `contact`.
///
/// Faces at positive distance contribute their boundary flux. For cells pinned
/// by the contact, the outflow is the imbalance of their interior fluxes.
pub fn terminal_current(spec: &ProblemSpec, state: &DiscreteState, contact: &str) -> Result<f64> {
    let mesh = spec.mesh();
    let region = mesh
        .region_id(contact)
        .ok_or_else(|| DdfvError::invalid(format!("unknown contact '{contact}'")))?;
    if !matches!(spec.conditions()[region].carrier, CarrierBc::Dirichlet(_)) {
        return Ok(0.0);
    }
    let fluxes = face_fluxes(spec, state)?;
    let mut current = 0.0;
    for (f, flux) in mesh.faces().iter().zip(&fluxes) {
        if let FaceCells::Boundary { region: r, .. } = f.cells {
            if r == region {
                current += flux;
            }
        }
    }
    for (k, pin) in spec.pins().iter().enumerate() {
        if pin.carrier_region != Some(region) {
            continue;
        }
        for &fi in mesh.cell_faces(k) {
            match mesh.faces()[fi].cells {
                FaceCells::Interior { k: a, .. } if a == k => current -= fluxes[fi],
                FaceCells::Interior { .. } => current += fluxes[fi],
                FaceCells::Boundary { .. } => {}
            }
        }
    }
    Ok(current)
}
