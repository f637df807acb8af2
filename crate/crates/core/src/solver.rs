//! Damped Newton iteration, parameter embedding, and time marching.

use serde::{Deserialize, Serialize};

use crate::assembly::{assemble, residual, DiscreteState, ProblemSpec};
use crate::diagnostics::StepDiagnostics;
use crate::error::{DdfvError, Result};
use crate::linear::linear_solve;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Bound on the residual infinity norm.
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    /// Smallest line-search damping factor before the iteration is abandoned.
    pub min_damping: f64,
    pub embedding_steps: usize,
    /// Halvings allowed for a failing embedding step.
    pub max_bisections: u32,
    /// Largest change of any chemical potential `h(c_K)` in one Newton step.
    pub max_chem_step: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            newton_tol: 1e-10,
            max_newton_iters: 50,
            min_damping: 2f64.powi(-20),
            embedding_steps: 10,
            max_bisections: 8,
            max_chem_step: 10.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.newton_tol > 0.0
            && self.newton_tol < 1.0
            && self.max_newton_iters > 0
            && self.min_damping > 0.0
            && self.min_damping <= 1.0
            && self.embedding_steps > 0
            && self.max_chem_step > 0.0;
        if ok {
            Ok(())
        } else {
            Err(DdfvError::Config(format!("invalid solver settings {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NewtonStats {
    pub iterations: usize,
    pub residual_norm: f64,
    /// Iterations whose step was shortened by the cap or the line search.
    pub damped_steps: usize,
    /// Parameter levels solved by embedding; zero when plain Newton sufficed.
    pub embedding_levels: usize,
}

impl NewtonStats {
    fn absorb(&mut self, other: &NewtonStats) {
        self.iterations += other.iterations;
        self.damped_steps += other.damped_steps;
        self.residual_norm = other.residual_norm;
    }
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn failure(reason: impl Into<String>) -> DdfvError {
    DdfvError::SolverFailure { time: f64::NAN, reason: reason.into() }
}

/// Newton iteration for the step from `previous`, starting at `guess`.
///
/// Steps are capped so no chemical potential moves by more than
/// `max_chem_step`, then halved until the residual 2-norm decreases. Once the
/// tolerance is met, one further step is taken if it lowers the residual.
pub fn newton_from(
    spec: &ProblemSpec,
    previous: &DiscreteState,
    guess: &DiscreteState,
    dt: f64,
    config: &SolverConfig,
) -> Result<(DiscreteState, NewtonStats)> {
    let mut u = guess.to_unknowns();
    let mut stats = NewtonStats::default();
    let (mut r, mut jac) = assemble(spec, previous, guess, dt, true)?;
    let mut converged = false;
    loop {
        let r_inf = norm_inf(&r);
        stats.residual_norm = r_inf;
        if r_inf <= config.newton_tol {
            if converged {
                break;
            }
            converged = true;
        }
        if !r_inf.is_finite() {
            return Err(failure("residual is not finite"));
        }
        if stats.iterations >= config.max_newton_iters {
            if converged {
                break;
            }
            return Err(failure(format!("no convergence in {} iterations, residual {r_inf:e}", stats.iterations)));
        }
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let delta = match linear_solve(jac.as_ref().expect("jacobian requested"), &rhs) {
            Ok(d) => d,
            Err(_) if converged => break,
            Err(e) => return Err(failure(e.to_string())),
        };
        stats.iterations += 1;
        let chem_step = delta.iter().step_by(2).fold(0.0, |m: f64, d| m.max(d.abs()));
        let mut alpha = if chem_step > config.max_chem_step { config.max_chem_step / chem_step } else { 1.0 };
        if alpha < 1.0 {
            stats.damped_steps += 1;
        }
        let merit = norm2(&r);
        let mut accepted = None;
        while alpha >= config.min_damping {
            let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + alpha * d).collect();
            let state = DiscreteState::from_unknowns(&trial);
            if let Ok(rt) = residual(spec, previous, &state, dt) {
                let better = if converged {
                    norm_inf(&rt) <= r_inf
                } else {
                    norm2(&rt) <= (1.0 - 1e-4 * alpha) * merit || norm_inf(&rt) <= config.newton_tol
                };
                if better && rt.iter().all(|v| v.is_finite()) {
                    accepted = Some((trial, state));
                    break;
                }
            }
            if converged {
                break;
            }
            alpha *= 0.5;
            stats.damped_steps += 1;
        }
        match accepted {
            Some((trial, state)) => {
                u = trial;
                let (rn, jn) = assemble(spec, previous, &state, dt, !converged)?;
                r = rn;
                if converged {
                    stats.residual_norm = norm_inf(&r);
                    break;
                }
                jac = jn;
            }
            None if converged => break,
            None => return Err(failure(format!("line search stalled at residual {r_inf:e}"))),
        }
    }
    Ok((DiscreteState::from_unknowns(&u), stats))
}

/// Newton iteration for one step, starting at the previous state.
pub fn newton_solve(
    spec: &ProblemSpec,
    previous: &DiscreteState,
    dt: f64,
    config: &SolverConfig,
) -> Result<(DiscreteState, NewtonStats)> {
    newton_from(spec, previous, previous, dt, config)
}

/// Follows the boundary data from `from` (solved by `state`) to `to` in
/// `embedding_steps` increments, halving a failing increment up to
/// `max_bisections` times.
pub fn continuation(
    from: &ProblemSpec,
    state: DiscreteState,
    to: &ProblemSpec,
    previous: &DiscreteState,
    dt: f64,
    config: &SolverConfig,
) -> Result<(DiscreteState, NewtonStats)> {
    let mut stats = NewtonStats::default();
    let mut state = state;
    let base = 1.0 / config.embedding_steps as f64;
    let smallest = base * 0.5f64.powi(config.max_bisections as i32);
    let mut step = base;
    let mut mu = 0.0;
    while mu < 1.0 {
        let next = if mu + step >= 1.0 - 1e-12 { 1.0 } else { mu + step };
        let level = from.interpolate(to, next)?;
        match newton_from(&level, previous, &state, dt, config) {
            Ok((s, st)) => {
                stats.absorb(&st);
                stats.embedding_levels += 1;
                state = s;
                mu = next;
            }
            Err(e) => {
                step *= 0.5;
                if step < smallest {
                    return Err(failure(format!("embedding stalled at mu = {mu}: {e}")));
                }
            }
        }
    }
    Ok((state, stats))
}

/// Solves from neutral boundary data (zero potentials, `c = 1/2`) up to the
/// data of `spec`.
pub fn embed_and_solve(
    spec: &ProblemSpec,
    previous: &DiscreteState,
    dt: f64,
    config: &SolverConfig,
) -> Result<(DiscreteState, NewtonStats)> {
    let neutral = spec.neutral()?;
    let (start, mut stats) = newton_from(&neutral, previous, previous, dt, config)?;
    let (state, more) = continuation(&neutral, start, spec, previous, dt, config)?;
    stats.absorb(&more);
    stats.embedding_levels = more.embedding_levels;
    Ok((state, stats))
}

/// One backward-Euler step; plain Newton first, embedding on failure.
pub fn solve_step(
    spec: &ProblemSpec,
    previous: &DiscreteState,
    dt: f64,
    config: &SolverConfig,
) -> Result<(DiscreteState, NewtonStats)> {
    newton_solve(spec, previous, dt, config).or_else(|_| embed_and_solve(spec, previous, dt, config))
}

fn stationary_guard(spec: &ProblemSpec) -> Result<()> {
    if spec.has_carrier_dirichlet() {
        Ok(())
    } else {
        Err(DdfvError::invalid("a stationary problem needs a Dirichlet concentration condition"))
    }
}

/// Stationary solve by embedding from the neutral state `c = 1/2, phi = 0`.
pub fn solve_stationary(spec: &ProblemSpec, config: &SolverConfig) -> Result<(DiscreteState, NewtonStats)> {
    stationary_guard(spec)?;
    let n = spec.mesh().n_cells();
    let cold = DiscreteState { chem: vec![0.0; n], phi: vec![0.0; n] };
    embed_and_solve(spec, &cold, f64::INFINITY, config).map_err(|e| at_time(e, f64::INFINITY))
}

/// Stationary solve warm-started from the solution `state` of `solved`;
/// continues in the boundary data if plain Newton fails.
pub fn solve_stationary_from(
    solved: &ProblemSpec,
    state: &DiscreteState,
    spec: &ProblemSpec,
    config: &SolverConfig,
) -> Result<(DiscreteState, NewtonStats)> {
    stationary_guard(spec)?;
    newton_from(spec, state, state, f64::INFINITY, config)
        .or_else(|_| continuation(solved, state.clone(), spec, state, f64::INFINITY, config))
        .map_err(|e| at_time(e, f64::INFINITY))
}

fn at_time(e: DdfvError, time: f64) -> DdfvError {
    match e {
        DdfvError::SolverFailure { reason, .. } => DdfvError::SolverFailure { time, reason },
        other => other,
    }
}

/// Potential solving the Poisson rows for fixed concentrations.
pub fn solve_potential(spec: &ProblemSpec, c: &[f64]) -> Result<Vec<f64>> {
    let n = spec.mesh().n_cells();
    let state = DiscreteState::from_concentrations(c, &vec![0.0; n])?;
    let (r, jac) = assemble(spec, &state, &state, f64::INFINITY, true)?;
    let rows: Vec<usize> = (0..n).map(|k| 2 * k + 1).collect();
    let block = jac.expect("jacobian requested").block(&rows, &rows);
    let rhs: Vec<f64> = rows.iter().map(|&i| -r[i]).collect();
    linear_solve(&block, &rhs)
}

/// Initial concentrations of `spec` with the matching potential.
pub fn initial_state(spec: &ProblemSpec) -> Result<DiscreteState> {
    let phi = solve_potential(spec, spec.initial())?;
    DiscreteState::from_concentrations(spec.initial(), &phi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeGrid {
    /// `t_i = t1 * delta^i`, the last time clipped to `t_end`.
    Geometric { t1: f64, delta: f64, t_end: f64 },
    Uniform { dt: f64, t_end: f64 },
}

impl TimeGrid {
    pub fn times(&self) -> Result<Vec<f64>> {
        let mut times = Vec::new();
        match *self {
            TimeGrid::Geometric { t1, delta, t_end } => {
                if !(t1 > 0.0 && delta > 1.0 && t_end >= t1 && t_end.is_finite()) {
                    return Err(DdfvError::Config(format!("invalid geometric grid t1={t1} delta={delta} t_end={t_end}")));
                }
                let mut t = t1;
                while t < t_end * (1.0 - 1e-12) {
                    times.push(t);
                    t *= delta;
                }
                times.push(t_end);
            }
            TimeGrid::Uniform { dt, t_end } => {
                if !(dt > 0.0 && t_end > 0.0 && t_end.is_finite()) {
                    return Err(DdfvError::Config(format!("invalid uniform grid dt={dt} t_end={t_end}")));
                }
                let steps = ((t_end / dt) - 1e-9).ceil().max(1.0) as usize;
                times.extend((1..steps).map(|i| i as f64 * dt));
                times.push(t_end);
            }
        }
        Ok(times)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub time: f64,
    pub dt: f64,
    pub state: DiscreteState,
    pub diagnostics: StepDiagnostics,
    pub stats: NewtonStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub initial: DiscreteState,
    pub initial_diagnostics: StepDiagnostics,
    pub steps: Vec<StepRecord>,
}

impl Trajectory {
    pub fn last_state(&self) -> &DiscreteState {
        self.steps.last().map(|s| &s.state).unwrap_or(&self.initial)
    }
}

/// Backward-Euler time marching from `initial_state(spec)`; `observer` sees
/// every accepted step.
pub fn march(
    spec: &ProblemSpec,
    grid: &TimeGrid,
    config: &SolverConfig,
    mut observer: impl FnMut(&StepRecord),
) -> Result<Trajectory> {
    config.validate()?;
    let times = grid.times()?;
    let initial = initial_state(spec)?;
    let initial_diagnostics = StepDiagnostics::measure(spec, &initial, 0.0, 0);
    let mut steps: Vec<StepRecord> = Vec::with_capacity(times.len());
    let mut t_prev = 0.0;
    for &t in &times {
        let dt = t - t_prev;
        let previous = steps.last().map(|s| &s.state).unwrap_or(&initial);
        let (state, stats) = solve_step(spec, previous, dt, config).map_err(|e| at_time(e, t))?;
        let diagnostics = StepDiagnostics::measure(spec, &state, t, stats.iterations);
        let record = StepRecord { time: t, dt, state, diagnostics, stats };
        observer(&record);
        steps.push(record);
        t_prev = t;
    }
    Ok(Trajectory { initial, initial_diagnostics, steps })
}
