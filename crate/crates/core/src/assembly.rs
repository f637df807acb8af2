//! Residual and analytic Jacobian of one backward-Euler step.
//!
//! Unknowns are interleaved per cell as `(h(c_K), phi_K)`. Row `2K` is the
//! carrier balance, row `2K + 1` the Poisson balance. Cells whose center lies
//! on a Dirichlet boundary face have the corresponding row replaced by the
//! pinning equation `u_K - u_D = 0`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{DdfvError, Result};
use crate::fluxes::{flux, flux_linearization, FaceState, SchemeKind};
use crate::mesh::{AdmissibleMesh, FaceCells};
use crate::physics::{chemical_potential, inverse_chemical_potential, Site};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CarrierBc {
    Neumann,
    Dirichlet(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialBc {
    Neumann,
    Dirichlet(f64),
    /// `grad(phi) . n = -(phi - voltage) / thickness`
    Robin { thickness: f64, voltage: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCondition {
    pub carrier: CarrierBc,
    pub potential: PotentialBc,
}

impl BoundaryCondition {
    pub const INSULATING: BoundaryCondition =
        BoundaryCondition { carrier: CarrierBc::Neumann, potential: PotentialBc::Neumann };

    /// Blocking contact: fixed potential, no carrier flux.
    pub fn blocking(phi: f64) -> Self {
        BoundaryCondition { carrier: CarrierBc::Neumann, potential: PotentialBc::Dirichlet(phi) }
    }

    /// Ohmic contact: fixed concentration and potential.
    pub fn ohmic(c: f64, phi: f64) -> Self {
        BoundaryCondition { carrier: CarrierBc::Dirichlet(c), potential: PotentialBc::Dirichlet(phi) }
    }

    pub fn gate(thickness: f64, voltage: f64) -> Self {
        BoundaryCondition {
            carrier: CarrierBc::Neumann,
            potential: PotentialBc::Robin { thickness, voltage },
        }
    }

    /// Data blended between `self` (at `mu = 0`) and `target` (at `mu = 1`):
    /// potentials linearly, concentrations linearly in `h(c)`.
    pub fn interpolate(&self, target: &BoundaryCondition, mu: f64) -> Result<Self> {
        let lerp = |a: f64, b: f64| a + mu * (b - a);
        let carrier = match (self.carrier, target.carrier) {
            (CarrierBc::Neumann, CarrierBc::Neumann) => CarrierBc::Neumann,
            (CarrierBc::Dirichlet(a), CarrierBc::Dirichlet(b)) => CarrierBc::Dirichlet(inverse_chemical_potential(
                lerp(chemical_potential(a)?, chemical_potential(b)?),
            )),
            _ => return Err(DdfvError::invalid("cannot blend carrier conditions of different kinds")),
        };
        let potential = match (self.potential, target.potential) {
            (PotentialBc::Neumann, PotentialBc::Neumann) => PotentialBc::Neumann,
            (PotentialBc::Dirichlet(a), PotentialBc::Dirichlet(b)) => PotentialBc::Dirichlet(lerp(a, b)),
            (PotentialBc::Robin { thickness: ta, voltage: a }, PotentialBc::Robin { thickness: tb, voltage: b })
                if ta == tb =>
            {
                PotentialBc::Robin { thickness: ta, voltage: lerp(a, b) }
            }
            _ => return Err(DdfvError::invalid("cannot blend potential conditions of different kinds")),
        };
        Ok(BoundaryCondition { carrier, potential })
    }

    /// Same kinds with zero potentials and `c = 1/2`.
    pub fn neutral(&self) -> Self {
        BoundaryCondition {
            carrier: match self.carrier {
                CarrierBc::Dirichlet(_) => CarrierBc::Dirichlet(0.5),
                n => n,
            },
            potential: match self.potential {
                PotentialBc::Dirichlet(_) => PotentialBc::Dirichlet(0.0),
                PotentialBc::Robin { thickness, .. } => PotentialBc::Robin { thickness, voltage: 0.0 },
                n => n,
            },
        }
    }

    fn validate(&self, region: &str) -> Result<()> {
        if let CarrierBc::Dirichlet(c) = self.carrier {
            if !(c > 0.0 && c < 1.0) {
                return Err(DdfvError::Config(format!("boundary concentration {c} on '{region}' not in (0, 1)")));
            }
        }
        match self.potential {
            PotentialBc::Dirichlet(p) if !p.is_finite() => {
                Err(DdfvError::Config(format!("non-finite potential on '{region}'")))
            }
            PotentialBc::Robin { thickness, voltage } if !(thickness > 0.0) || !voltage.is_finite() => {
                Err(DdfvError::Config(format!("gate on '{region}' needs positive thickness and finite voltage")))
            }
            _ => Ok(()),
        }
    }
}

/// Row replacement for cells whose center sits on a Dirichlet face.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pin {
    pub chem: Option<f64>,
    pub phi: Option<f64>,
    /// Region that imposed the concentration pin.
    pub carrier_region: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    mesh: Arc<AdmissibleMesh>,
    scheme: SchemeKind,
    doping: Vec<f64>,
    lambda_squared: f64,
    boundary: Vec<BoundaryCondition>,
    initial: Vec<f64>,
    pins: Vec<Pin>,
}

impl ProblemSpec {
    /// `boundary` assigns a condition to every region name of the mesh.
    pub fn new(
        mesh: Arc<AdmissibleMesh>,
        scheme: SchemeKind,
        doping: Vec<f64>,
        boundary: &[(&str, BoundaryCondition)],
        initial: Vec<f64>,
    ) -> Result<Self> {
        let n = mesh.n_cells();
        if doping.len() != n || initial.len() != n {
            return Err(DdfvError::Config(format!(
                "expected {n} doping and initial values, got {} and {}",
                doping.len(),
                initial.len()
            )));
        }
        if doping.iter().any(|d| !d.is_finite()) {
            return Err(DdfvError::Config("doping must be finite".into()));
        }
        if initial.iter().any(|&c| !(c > 0.0 && c < 1.0)) {
            return Err(DdfvError::Config("initial concentration must lie in (0, 1)".into()));
        }
        for (name, _) in boundary {
            if mesh.region_id(name).is_none() {
                return Err(DdfvError::Config(format!("mesh has no boundary region '{name}'")));
            }
        }
        let mut conditions = Vec::with_capacity(mesh.regions().len());
        for region in mesh.regions() {
            let bc = boundary
                .iter()
                .find(|(name, _)| name == region)
                .map(|(_, bc)| *bc)
                .ok_or_else(|| DdfvError::Config(format!("no boundary condition for region '{region}'")))?;
            bc.validate(region)?;
            conditions.push(bc);
        }
        let spec = ProblemSpec {
            mesh,
            scheme,
            doping,
            lambda_squared: 1.0,
            boundary: Vec::new(),
            initial,
            pins: Vec::new(),
        };
        spec.with_conditions(conditions)
    }

    fn with_conditions(mut self, boundary: Vec<BoundaryCondition>) -> Result<Self> {
        let mesh = &self.mesh;
        let mut anchored = false;
        for (region, bc) in boundary.iter().enumerate() {
            let used = mesh.faces().iter().any(|f| matches!(f.cells, FaceCells::Boundary { region: r, .. } if r == region));
            anchored |= used && !matches!(bc.potential, PotentialBc::Neumann);
        }
        if !anchored {
            return Err(DdfvError::Config(
                "the potential needs at least one Dirichlet or gate boundary face".into(),
            ));
        }
        let mut pins = vec![Pin::default(); mesh.n_cells()];
        for f in mesh.faces().iter().filter(|f| f.through_center()) {
            if let FaceCells::Boundary { cell, region } = f.cells {
                let bc = boundary[region];
                if let CarrierBc::Dirichlet(c) = bc.carrier {
                    if pins[cell].chem.is_none() {
                        pins[cell].chem = Some(chemical_potential(c)?);
                        pins[cell].carrier_region = Some(region);
                    }
                }
                if let PotentialBc::Dirichlet(p) = bc.potential {
                    pins[cell].phi.get_or_insert(p);
                }
            }
        }
        self.boundary = boundary;
        self.pins = pins;
        Ok(self)
    }

    pub fn mesh(&self) -> &AdmissibleMesh {
        &self.mesh
    }

    pub fn shared_mesh(&self) -> Arc<AdmissibleMesh> {
        Arc::clone(&self.mesh)
    }

    pub fn scheme(&self) -> SchemeKind {
        self.scheme
    }

    pub fn doping(&self) -> &[f64] {
        &self.doping
    }

    pub fn lambda_squared(&self) -> f64 {
        self.lambda_squared
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn pins(&self) -> &[Pin] {
        &self.pins
    }

    /// Conditions indexed by mesh region id.
    pub fn conditions(&self) -> &[BoundaryCondition] {
        &self.boundary
    }

    pub fn condition(&self, region: &str) -> Option<BoundaryCondition> {
        self.mesh.region_id(region).map(|id| self.boundary[id])
    }

    pub fn with_scheme(&self, scheme: SchemeKind) -> Self {
        ProblemSpec { scheme, ..self.clone() }
    }

    pub fn with_lambda_squared(&self, lambda_squared: f64) -> Result<Self> {
        if !(lambda_squared > 0.0 && lambda_squared.is_finite()) {
            return Err(DdfvError::Config(format!("lambda^2 must be positive, got {lambda_squared}")));
        }
        Ok(ProblemSpec { lambda_squared, ..self.clone() })
    }

    pub fn with_condition(&self, region: &str, bc: BoundaryCondition) -> Result<Self> {
        let id = self
            .mesh
            .region_id(region)
            .ok_or_else(|| DdfvError::Config(format!("mesh has no boundary region '{region}'")))?;
        bc.validate(region)?;
        let mut boundary = self.boundary.clone();
        boundary[id] = bc;
        self.clone().with_conditions(boundary)
    }

    /// Boundary data blended from `self` (`mu = 0`) to `target` (`mu = 1`).
    pub fn interpolate(&self, target: &ProblemSpec, mu: f64) -> Result<Self> {
        let boundary = self
            .boundary
            .iter()
            .zip(&target.boundary)
            .map(|(a, b)| a.interpolate(b, mu))
            .collect::<Result<Vec<_>>>()?;
        target.clone().with_conditions(boundary)
    }

    /// The same problem with all boundary data set to the neutral state.
    pub fn neutral(&self) -> Result<Self> {
        let boundary = self.boundary.iter().map(BoundaryCondition::neutral).collect();
        self.clone().with_conditions(boundary)
    }

    pub fn has_carrier_dirichlet(&self) -> bool {
        self.mesh.faces().iter().any(|f| match f.cells {
            FaceCells::Boundary { region, .. } => matches!(self.boundary[region].carrier, CarrierBc::Dirichlet(_)),
            _ => false,
        })
    }

    /// Largest absolute boundary potential datum, gate voltages included.
    pub fn max_boundary_potential(&self) -> f64 {
        self.boundary
            .iter()
            .map(|bc| match bc.potential {
                PotentialBc::Dirichlet(p) => p.abs(),
                PotentialBc::Robin { voltage, .. } => voltage.abs(),
                PotentialBc::Neumann => 0.0,
            })
            .fold(0.0, f64::max)
    }
}

/// Cell values at one time level. Concentrations are stored through their
/// chemical potential so that values near 0 and 1 keep full precision.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteState {
    pub chem: Vec<f64>,
    pub phi: Vec<f64>,
}

impl DiscreteState {
    pub fn from_concentrations(c: &[f64], phi: &[f64]) -> Result<Self> {
        if c.len() != phi.len() {
            return Err(DdfvError::invalid("concentration and potential lengths differ"));
        }
        let chem = c.iter().map(|&c| chemical_potential(c)).collect::<Result<Vec<_>>>()?;
        Ok(DiscreteState { chem, phi: phi.to_vec() })
    }

    pub fn n_cells(&self) -> usize {
        self.chem.len()
    }

    pub fn site(&self, k: usize) -> Site {
        Site::from_chemical(self.chem[k])
    }

    pub fn concentrations(&self) -> Vec<f64> {
        self.chem.iter().map(|&h| inverse_chemical_potential(h)).collect()
    }

    /// `1 - c_K`, accurate when `c_K` is close to 1.
    pub fn vacancies(&self) -> Vec<f64> {
        self.chem.iter().map(|&h| inverse_chemical_potential(-h)).collect()
    }

    pub fn to_unknowns(&self) -> Vec<f64> {
        self.chem.iter().zip(&self.phi).flat_map(|(&h, &p)| [h, p]).collect()
    }

    pub fn from_unknowns(u: &[f64]) -> Self {
        DiscreteState {
            chem: u.iter().step_by(2).copied().collect(),
            phi: u.iter().skip(1).step_by(2).copied().collect(),
        }
    }
}

/// Square sparse matrix in coordinate form; duplicate entries are summed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseMatrix {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseMatrix {
    pub fn new(n: usize) -> Self {
        SparseMatrix { n, entries: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix { n, entries: (0..n).map(|i| (i, i, 1.0)).collect() }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.n && col < self.n);
        self.entries.push((row, col, value));
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.n]; self.n];
        for &(i, j, v) in &self.entries {
            a[i][j] += v;
        }
        a
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for &(i, j, v) in &self.entries {
            y[i] += v * x[j];
        }
        y
    }

    pub fn norm_inf(&self) -> f64 {
        let mut rows = vec![0.0; self.n];
        for &(i, _, v) in &self.entries {
            rows[i] += v.abs();
        }
        rows.into_iter().fold(0.0, f64::max)
    }

    /// Sub-matrix on the given rows and columns, renumbered in order.
    pub fn block(&self, rows: &[usize], cols: &[usize]) -> SparseMatrix {
        let mut row_map = vec![usize::MAX; self.n];
        let mut col_map = vec![usize::MAX; self.n];
        for (new, &old) in rows.iter().enumerate() {
            row_map[old] = new;
        }
        for (new, &old) in cols.iter().enumerate() {
            col_map[old] = new;
        }
        let entries = self
            .entries
            .iter()
            .filter(|(i, j, _)| row_map[*i] != usize::MAX && col_map[*j] != usize::MAX)
            .map(|&(i, j, v)| (row_map[i], col_map[j], v))
            .collect();
        SparseMatrix { n: rows.len(), entries }
    }
}

fn check_inputs(spec: &ProblemSpec, previous: &DiscreteState, candidate: &DiscreteState, dt: f64) -> Result<()> {
    let n = spec.mesh.n_cells();
    if previous.n_cells() != n || candidate.n_cells() != n || candidate.phi.len() != n || previous.phi.len() != n {
        return Err(DdfvError::invalid(format!("state size does not match the {n}-cell mesh")));
    }
    if !(dt > 0.0) {
        return Err(DdfvError::invalid(format!("time step must be positive, got {dt}")));
    }
    if candidate.chem.iter().chain(&candidate.phi).any(|v| !v.is_finite()) {
        return Err(DdfvError::invalid("candidate state is not finite"));
    }
    Ok(())
}

struct Scatter {
    r: Vec<f64>,
    jac: Option<SparseMatrix>,
}

impl Scatter {
    fn add(&mut self, row: usize, col: usize, v: f64) {
        if let Some(j) = self.jac.as_mut() {
            j.push(row, col, v);
        }
    }
}

/// Residual of the step from `previous` with step `dt` at `candidate`.
/// `dt = f64::INFINITY` drops the time derivative (stationary problem).
pub fn residual(spec: &ProblemSpec, previous: &DiscreteState, candidate: &DiscreteState, dt: f64) -> Result<Vec<f64>> {
    Ok(assemble(spec, previous, candidate, dt, false)?.0)
}

pub fn jacobian(spec: &ProblemSpec, previous: &DiscreteState, candidate: &DiscreteState, dt: f64) -> Result<SparseMatrix> {
    Ok(assemble(spec, previous, candidate, dt, true)?.1.expect("requested jacobian"))
}

/// Residual and, on request, its Jacobian with respect to the interleaved unknowns.
pub fn assemble(
    spec: &ProblemSpec,
    previous: &DiscreteState,
    candidate: &DiscreteState,
    dt: f64,
    with_jacobian: bool,
) -> Result<(Vec<f64>, Option<SparseMatrix>)> {
    check_inputs(spec, previous, candidate, dt)?;
    let mesh = &*spec.mesh;
    let n = mesh.n_cells();
    let scheme = spec.scheme;
    let lam = spec.lambda_squared;
    let pins = &spec.pins;
    let phi = &candidate.phi;
    let sites: Vec<Site> = candidate.chem.iter().map(|&h| Site::from_chemical(h)).collect();
    let mut out = Scatter { r: vec![0.0; 2 * n], jac: with_jacobian.then(|| SparseMatrix::new(2 * n)) };

    for (k, cell) in mesh.cells().iter().enumerate() {
        let (m, s) = (cell.measure, sites[k]);
        match pins[k].chem {
            Some(h_d) => {
                out.r[2 * k] = s.chem - h_d;
                out.add(2 * k, 2 * k, 1.0);
            }
            None if dt.is_finite() => {
                let c_prev = inverse_chemical_potential(previous.chem[k]);
                out.r[2 * k] += m * (s.c - c_prev) / dt;
                out.add(2 * k, 2 * k, m * s.dc() / dt);
            }
            None => {}
        }
        match pins[k].phi {
            Some(p_d) => {
                out.r[2 * k + 1] = phi[k] - p_d;
                out.add(2 * k + 1, 2 * k + 1, 1.0);
            }
            None => {
                out.r[2 * k + 1] -= m * (s.c + spec.doping[k]);
                out.add(2 * k + 1, 2 * k, -m * s.dc());
            }
        }
    }

    for f in mesh.faces() {
        let tau = f.transmissibility;
        match f.cells {
            FaceCells::Interior { k, l } => {
                let state = FaceState::from_sites(sites[k], sites[l], phi[k], phi[l]);
                let lin = if with_jacobian {
                    flux_linearization(scheme, &state)
                } else {
                    let value = flux(scheme, &state);
                    crate::fluxes::FluxLinearization { value, d_chem_k: 0.0, d_chem_l: 0.0, d_phi_k: 0.0, d_phi_l: 0.0 }
                };
                for (row_cell, sign) in [(k, 1.0), (l, -1.0)] {
                    if pins[row_cell].chem.is_some() {
                        continue;
                    }
                    let row = 2 * row_cell;
                    out.r[row] += sign * tau * lin.value;
                    out.add(row, 2 * k, sign * tau * lin.d_chem_k);
                    out.add(row, 2 * l, sign * tau * lin.d_chem_l);
                    out.add(row, 2 * k + 1, sign * tau * lin.d_phi_k);
                    out.add(row, 2 * l + 1, sign * tau * lin.d_phi_l);
                }
                let g = lam * tau;
                for (a, b) in [(k, l), (l, k)] {
                    if pins[a].phi.is_some() {
                        continue;
                    }
                    out.r[2 * a + 1] += g * (phi[a] - phi[b]);
                    out.add(2 * a + 1, 2 * a + 1, g);
                    out.add(2 * a + 1, 2 * b + 1, -g);
                }
            }
            FaceCells::Boundary { cell: k, region } => {
                let bc = spec.boundary[region];
                if pins[k].phi.is_none() {
                    let term = match bc.potential {
                        PotentialBc::Dirichlet(p_d) if f.distance > 0.0 => Some((lam * tau, p_d)),
                        PotentialBc::Robin { thickness, voltage } => Some((lam * f.measure / thickness, voltage)),
                        _ => None,
                    };
                    if let Some((g, exterior)) = term {
                        out.r[2 * k + 1] += g * (phi[k] - exterior);
                        out.add(2 * k + 1, 2 * k + 1, g);
                    }
                }
                if let CarrierBc::Dirichlet(c_d) = bc.carrier {
                    if f.distance > 0.0 && pins[k].chem.is_none() {
                        let (mirror, mirrors_cell) = match bc.potential {
                            PotentialBc::Dirichlet(p_d) => (p_d, false),
                            _ => (phi[k], true),
                        };
                        let state = FaceState::from_sites(sites[k], Site::from_concentration(c_d)?, phi[k], mirror);
                        let lin = flux_linearization(scheme, &state);
                        out.r[2 * k] += tau * lin.value;
                        out.add(2 * k, 2 * k, tau * lin.d_chem_k);
                        let d_phi = if mirrors_cell { lin.d_phi_k + lin.d_phi_l } else { lin.d_phi_k };
                        out.add(2 * k, 2 * k + 1, tau * d_phi);
                    }
                }
            }
        }
    }
    Ok((out.r, out.jac))
}

/// Outward carrier flux `F_K,sigma` for every face: `K -> L` on interior faces,
/// out of the domain on boundary faces with positive distance, zero otherwise.
pub fn face_fluxes(spec: &ProblemSpec, state: &DiscreteState) -> Result<Vec<f64>> {
    let mesh = &*spec.mesh;
    let mut out = Vec::with_capacity(mesh.faces().len());
    for f in mesh.faces() {
        let value = match f.cells {
            FaceCells::Interior { k, l } => {
                f.transmissibility
                    * flux(spec.scheme, &FaceState::from_sites(state.site(k), state.site(l), state.phi[k], state.phi[l]))
            }
            FaceCells::Boundary { cell: k, region } => match spec.boundary[region].carrier {
                CarrierBc::Dirichlet(c_d) if f.distance > 0.0 => {
                    let mirror = match spec.boundary[region].potential {
                        PotentialBc::Dirichlet(p_d) => p_d,
                        _ => state.phi[k],
                    };
                    let other = Site::from_concentration(c_d)?;
                    f.transmissibility * flux(spec.scheme, &FaceState::from_sites(state.site(k), other, state.phi[k], mirror))
                }
                _ => 0.0,
            },
        };
        out.push(value);
    }
    Ok(out)
}
