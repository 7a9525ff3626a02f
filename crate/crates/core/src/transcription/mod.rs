//! Direct-transcription trajectory optimization: decision-vector layout,
//! explicit-Euler defect constraints, task constraints, the six objectives and
//! the solver that drives them.

mod guess;
mod layout;
mod problem;
mod scenario;
mod solver;

pub use guess::{initial_guess, interpolated_guess, seeded_ik, solve_ik, IK_MAX_ITERATIONS};
pub use layout::{Field, Layout};
pub use problem::{build_problem, ConstraintBlock, ConstraintKind, NlpProblem, INFEASIBLE_PENALTY};
pub use scenario::{ConeAxes, ConeSpec, Objective, Scenario, ScenarioDoc, SolverOptions, SURFACE_TOL};
pub use solver::{solve_nlp, Nlp, SolverOutcome, SolverSettings, SolverStatus};

use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forcespace::ResidualMode;
use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum TranscriptionError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("{which} is {distance:.3e} away from the surface")]
    EndpointOffSurface { which: &'static str, distance: f64 },
    #[error("objective F needs a cone")]
    MissingCone,
    #[error("inverse kinematics for {which} did not converge (residual {residual:.3e}); supply a reachable point or a manual seed")]
    Ik { which: &'static str, residual: f64 },
    #[error("io error reading {path}: {message}")]
    Io { path: String, message: String },
    #[error("trajectory: {0}")]
    Trajectory(String),
}

/// Result of one optimization run, in the on-disk solution format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub objective: Objective,
    pub residual_mode: ResidualMode,
    pub mesh_times: Vec<f64>,
    pub q: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    /// One torque per segment; the final mesh point has none.
    pub tau: Vec<Vec<f64>>,
    /// Objective at the returned point, maximization objectives un-negated.
    pub objective_value: f64,
    pub objective_trace: Vec<f64>,
    /// Max absolute equality residual, aligned with `objective_trace`.
    pub feasibility_trace: Vec<f64>,
    /// Trace index where feasible descent begins.
    pub descent_start: usize,
    pub converged: bool,
    pub status: String,
    pub iterations: usize,
    pub wall_time_s: f64,
    pub n_feval: usize,
    pub n_geval: usize,
}

impl Solution {
    /// Rebuilds ξ from the stored sequences.
    pub fn decision_vector(&self) -> Result<DVector<f64>, TranscriptionError> {
        let dof = self.q.first().map_or(0, Vec::len);
        let segments = self.tau.len();
        let bad = |s: &str| Err(TranscriptionError::Trajectory(s.into()));
        if dof == 0 || segments == 0 {
            return bad("empty trajectory");
        }
        if self.q.len() != segments + 1 || self.v.len() != segments + 1 {
            return bad("q and v need one entry per mesh point, tau one per segment");
        }
        if self.q.iter().chain(&self.v).chain(&self.tau).any(|x| x.len() != dof) {
            return bad("inconsistent joint count");
        }
        let to = |x: &Vec<Vec<f64>>| x.iter().map(|r| DVector::from_column_slice(r)).collect::<Vec<_>>();
        Ok(Layout::new(dof, segments).pack(&to(&self.q), &to(&self.v), &to(&self.tau)))
    }

    pub fn final_feasibility(&self) -> f64 {
        self.feasibility_trace.last().copied().unwrap_or(f64::INFINITY)
    }
}

fn settings_for(options: &SolverOptions) -> SolverSettings {
    SolverSettings {
        max_iterations: options.max_iterations,
        feasibility_tol: options.feasibility_tol,
        ..SolverSettings::default()
    }
}

/// Solves from the default initial guess.
pub fn solve(problem: &NlpProblem, options: &SolverOptions) -> Result<Solution, TranscriptionError> {
    let start = Instant::now();
    let mut scenario = problem.scenario.clone();
    scenario.doc.solver.seed = options.seed;
    let xi0 = initial_guess(&scenario)?;
    Ok(solve_from(problem, &xi0, options, start))
}

/// Solves from a given starting point; `start` marks when timing began.
pub fn solve_from(problem: &NlpProblem, xi0: &DVector<f64>, options: &SolverOptions, start: Instant) -> Solution {
    let mut problem = problem.clone();
    problem.set_gradient_step(options.gradient_step);
    let out = solve_nlp(&problem, xi0, settings_for(options));
    let wall_time_s = start.elapsed().as_secs_f64();
    let (q, v, tau) = problem.layout.unpack(&out.x);
    let rows = |x: Vec<DVector<f64>>| x.into_iter().map(|r| r.as_slice().to_vec()).collect::<Vec<_>>();
    let report = |f: f64| problem.reported_objective(f);
    let value = report(problem.objective_value(&out.x));
    Solution {
        objective: problem.objective_kind(),
        residual_mode: problem.scenario.residual_mode(),
        mesh_times: problem.mesh_times(),
        q: rows(q),
        v: rows(v),
        tau: rows(tau),
        objective_value: value,
        objective_trace: out.objective_trace.iter().map(|&f| report(f)).collect(),
        feasibility_trace: out.feasibility_trace.clone(),
        descent_start: out.descent_start,
        converged: out.converged(),
        status: format!("{:?}", out.status),
        iterations: out.iterations,
        wall_time_s,
        n_feval: out.n_feval,
        n_geval: out.n_geval,
    }
}
