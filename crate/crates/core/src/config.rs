//! Run configuration: a TOML document naming one experiment and its parameters.
//!
//! ```toml
//! experiment = "run1d"
//! schemes = ["sedan", "centered"]
//! output = "out/evoli"
//!
//! [run1d]
//! preset = "evoli"
//! cells = 100
//!
//! [solver]
//! newton_tol = 1e-11
//! ```
//!
//! Unknown keys are rejected at every level. Omitted sections take the
//! defaults below.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{DdfvError, Result};
use crate::experiments::{ConvergenceCase, EVOLUTION_LENGTH};
use crate::fluxes::SchemeKind;
use crate::solver::{SolverConfig, TimeGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Run1d,
    Converge1d,
    Fet,
    FaceConcentration,
    Selftest,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Run1d => "run1d",
            Experiment::Converge1d => "converge1d",
            Experiment::Fet => "fet",
            Experiment::FaceConcentration => "face_concentration",
            Experiment::Selftest => "selftest",
        }
    }
}

/// Initial and boundary data of the three evolution runs on `(0, 50)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// `c(0) = 1/2`, `phi(0) = 10`
    Evoli,
    /// `c(0) = 0.3`, `phi(0) = 0`
    Evolii,
    /// `c(0) = 0.7`, `phi(0) = 0`
    Evoliii,
}

impl Preset {
    /// `(c0, phi_left)`
    pub fn data(self) -> (f64, f64) {
        match self {
            Preset::Evoli => (0.5, 10.0),
            Preset::Evolii => (0.3, 0.0),
            Preset::Evoliii => (0.7, 0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Run1dConfig {
    pub preset: Option<Preset>,
    pub length: f64,
    pub cells: usize,
    /// Overrides the preset value.
    pub c0: Option<f64>,
    /// Overrides the preset value.
    pub phi_left: Option<f64>,
    pub phi_right: f64,
    pub time: TimeGrid,
    /// Times at which `profiles.csv` records the solution; each is matched to
    /// the first step at or after it. `0` is the initial state.
    pub snapshots: Vec<f64>,
}

impl Default for Run1dConfig {
    fn default() -> Self {
        Run1dConfig {
            preset: None,
            length: EVOLUTION_LENGTH,
            cells: 100,
            c0: None,
            phi_left: None,
            phi_right: 0.0,
            time: TimeGrid::Geometric { t1: 1e-4, delta: 1.15, t_end: 1000.0 },
            snapshots: vec![0.0, 0.01, 0.1, 1.0, 10.0, 100.0, 1000.0],
        }
    }
}

impl Run1dConfig {
    /// Fills `c0` and `phi_left` from the preset, `evoli` when none is given.
    pub fn resolve(&mut self) {
        let (c0, phi_left) = self.preset.unwrap_or(Preset::Evoli).data();
        self.c0.get_or_insert(c0);
        self.phi_left.get_or_insert(phi_left);
    }

    pub fn c0(&self) -> f64 {
        self.c0.unwrap_or_else(|| self.preset.unwrap_or(Preset::Evoli).data().0)
    }

    pub fn phi_left(&self) -> f64 {
        self.phi_left.unwrap_or_else(|| self.preset.unwrap_or(Preset::Evoli).data().1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Converge1dConfig {
    pub case: ConvergenceCase,
    pub grids: Vec<usize>,
    pub reference_cells: usize,
}

impl Default for Converge1dConfig {
    fn default() -> Self {
        Converge1dConfig {
            case: ConvergenceCase::Stationary { c_left: 1e-3, c_right: 1.0 - 1e-3 },
            grids: vec![40, 80, 160, 320, 640],
            reference_cells: 10240,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FetConfig {
    pub n_ref: u32,
    pub gate_start: f64,
    pub gate_end: f64,
    pub gate_count: usize,
    /// Gate voltages whose fields are written to `fields_{scheme}_{u}.csv`.
    pub snapshots: Vec<f64>,
}

impl Default for FetConfig {
    fn default() -> Self {
        FetConfig { n_ref: 1, gate_start: 50.0, gate_end: -50.0, gate_count: 21, snapshots: vec![50.0, 0.0, -50.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FaceConcentrationConfig {
    pub c_k: f64,
    pub c_l: f64,
    pub span: f64,
    pub rows: usize,
}

impl Default for FaceConcentrationConfig {
    fn default() -> Self {
        FaceConcentrationConfig { c_k: 0.3, c_l: 0.7, span: 10.0, rows: 401 }
    }
}

fn all_schemes() -> Vec<SchemeKind> {
    SchemeKind::ALL.to_vec()
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    #[serde(default = "all_schemes")]
    pub schemes: Vec<SchemeKind>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub run1d: Run1dConfig,
    #[serde(default)]
    pub converge1d: Converge1dConfig,
    #[serde(default)]
    pub fet: FetConfig,
    #[serde(default)]
    pub face_concentration: FaceConcentrationConfig,
    #[serde(default)]
    pub solver: SolverConfig,
}

impl RunConfig {
    /// Defaults for `experiment` with every scheme.
    pub fn new(experiment: Experiment) -> Self {
        RunConfig {
            experiment,
            schemes: all_schemes(),
            output: default_output(),
            run1d: Run1dConfig::default(),
            converge1d: Converge1dConfig::default(),
            fet: FetConfig::default(),
            face_concentration: FaceConcentrationConfig::default(),
            solver: SolverConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let mut config: RunConfig = toml::from_str(text).map_err(|e| DdfvError::Config(e.to_string()))?;
        config.run1d.resolve();
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DdfvError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configurations serialize")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(DdfvError::Config(msg));
        if self.schemes.is_empty() {
            return fail("no schemes selected".into());
        }
        self.solver.validate()?;
        let r = &self.run1d;
        let c0 = r.c0();
        if !(c0 > 0.0 && c0 < 1.0) {
            return fail(format!("run1d.c0 = {c0} is not in (0, 1)"));
        }
        if !(r.length > 0.0 && r.length.is_finite()) || r.cells == 0 {
            return fail("run1d needs a positive length and cell count".into());
        }
        r.time.times()?;
        let g = &self.converge1d;
        if g.grids.len() < 2 || g.grids.windows(2).any(|w| w[0] >= w[1]) {
            return fail("converge1d.grids must hold at least two increasing sizes".into());
        }
        if let ConvergenceCase::Stationary { c_left, c_right } = g.case {
            if ![c_left, c_right].iter().all(|c| *c > 0.0 && *c < 1.0) {
                return fail("converge1d contact concentrations must lie in (0, 1)".into());
            }
        }
        let f = &self.fet;
        if f.gate_count == 0 || f.n_ref > 6 {
            return fail("fet needs gate_count >= 1 and n_ref <= 6".into());
        }
        let fc = &self.face_concentration;
        if !(fc.c_k > 0.0 && fc.c_k < 1.0 && fc.c_l > 0.0 && fc.c_l < 1.0) || fc.rows < 2 {
            return fail("face_concentration needs c_k, c_l in (0, 1) and rows >= 2".into());
        }
        Ok(())
    }
}
