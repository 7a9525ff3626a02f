//! Post-hoc robustness analysis of trajectories: admissible-force time series,
//! the Gaussian impulse torque test and cross-trajectory comparisons.

use std::collections::HashSet;
use std::fmt::Write as _;

use nalgebra::DVector;
use thiserror::Error;

use crate::forcespace::{force_context, metric_ball_at, ForceError, ResidualMode};
use crate::model::RobotModel;
use crate::transcription::Solution;

/// Width parameter of the Gaussian disturbance profile, s².
pub const PROFILE_WIDTH: f64 = 0.02;
/// Mesh times must be evenly spaced to this tolerance.
pub const SPACING_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum EvaluationError {
    #[error("invalid trajectory: {0}")]
    Trajectory(String),
    #[error("trajectories do not share a mesh: {0}")]
    MeshMismatch(String),
    #[error("duplicate label {0:?}")]
    DuplicateLabel(String),
    #[error("nothing to compare")]
    Empty,
    #[error("direction must be a unit vector of length {expected}")]
    Direction { expected: usize },
    #[error(transparent)]
    Force(#[from] ForceError),
}

/// States on a uniform mesh with one torque per segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    mesh_times: Vec<f64>,
    q: Vec<DVector<f64>>,
    v: Vec<DVector<f64>>,
    tau: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn new(
        mesh_times: Vec<f64>,
        q: Vec<DVector<f64>>,
        v: Vec<DVector<f64>>,
        tau: Vec<DVector<f64>>,
    ) -> Result<Self, EvaluationError> {
        let bad = |s: String| Err(EvaluationError::Trajectory(s));
        let m = mesh_times.len();
        if m < 2 {
            return bad("need at least two mesh points".into());
        }
        if q.len() != m || v.len() != m || tau.len() + 1 != m {
            return bad(format!(
                "{} mesh times need as many q and v entries and one fewer tau (got {}, {}, {})",
                m,
                q.len(),
                v.len(),
                tau.len()
            ));
        }
        let n = q[0].len();
        if q.iter().chain(&v).chain(&tau).any(|x| x.len() != n) {
            return bad("inconsistent joint count".into());
        }
        let h = mesh_times[1] - mesh_times[0];
        if !(h > 0.0) {
            return bad("mesh times must increase".into());
        }
        for w in mesh_times.windows(2) {
            if ((w[1] - w[0]) - h).abs() > SPACING_TOL {
                return bad("mesh times are not evenly spaced".into());
            }
        }
        Ok(Self { mesh_times, q, v, tau })
    }

    pub fn from_solution(sol: &Solution) -> Result<Self, EvaluationError> {
        let to = |x: &Vec<Vec<f64>>| x.iter().map(|r| DVector::from_column_slice(r)).collect();
        Self::new(sol.mesh_times.clone(), to(&sol.q), to(&sol.v), to(&sol.tau))
    }

    pub fn mesh_times(&self) -> &[f64] {
        &self.mesh_times
    }

    pub fn mesh_points(&self) -> usize {
        self.mesh_times.len()
    }

    pub fn dof(&self) -> usize {
        self.q[0].len()
    }

    pub fn q(&self, k: usize) -> &DVector<f64> {
        &self.q[k]
    }

    pub fn v(&self, k: usize) -> &DVector<f64> {
        &self.v[k]
    }

    /// Torque applied at mesh point `k`; the final point reuses the last one.
    pub fn torque(&self, k: usize) -> &DVector<f64> {
        &self.tau[k.min(self.tau.len() - 1)]
    }

    /// Midpoint of the time span, where the disturbance peaks.
    pub fn center_time(&self) -> f64 {
        0.5 * (self.mesh_times[0] + self.mesh_times[self.mesh_points() - 1])
    }

    fn check_model(&self, model: &RobotModel) -> Result<(), EvaluationError> {
        if self.dof() != model.dof() {
            return Err(EvaluationError::Trajectory(format!(
                "trajectory has {} joints, model {}",
                self.dof(),
                model.dof()
            )));
        }
        Ok(())
    }
}

/// Gaussian disturbance magnitude `f_peak · exp(−(t − 0.5)² / 0.02)`.
pub fn force_profile(t: f64, f_peak: f64) -> f64 {
    force_profile_at(t, f_peak, 0.5)
}

/// The same profile centered at `center`.
pub fn force_profile_at(t: f64, f_peak: f64, center: f64) -> f64 {
    f_peak * (-(t - center).powi(2) / PROFILE_WIDTH).exp()
}

/// ∫ f dt over the whole real line.
pub fn profile_impulse(f_peak: f64) -> f64 {
    f_peak * (PROFILE_WIDTH * std::f64::consts::PI).sqrt()
}

/// Trapezoid-rule impulse over `[0, duration]` with `samples` intervals.
pub fn trapezoid_impulse(f_peak: f64, duration: f64, samples: usize) -> f64 {
    let center = 0.5 * duration;
    let dt = duration / samples as f64;
    let f = |i: usize| force_profile_at(i as f64 * dt, f_peak, center);
    let inner: f64 = (1..samples).map(f).sum();
    dt * (inner + 0.5 * (f(0) + f(samples)))
}

/// Largest-ball radii along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiusSeries {
    pub radii: Vec<f64>,
    /// Set where the nominal torque exceeds its limit (radius reported as 0).
    pub infeasible: Vec<bool>,
}

impl RadiusSeries {
    pub fn mean(&self) -> f64 {
        self.radii.iter().sum::<f64>() / self.radii.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.radii.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Residual-ball radius at every mesh point, using `τ_k` and `τ_{N−1}` at the final point.
pub fn robustness_timeseries(
    model: &RobotModel,
    traj: &Trajectory,
    mode: ResidualMode,
) -> Result<RadiusSeries, EvaluationError> {
    series(model, traj, Some(mode))
}

/// Force-polytope (zero nominal torque) radius at every mesh point.
pub fn force_radius_timeseries(model: &RobotModel, traj: &Trajectory) -> Result<RadiusSeries, EvaluationError> {
    series(model, traj, None)
}

fn series(model: &RobotModel, traj: &Trajectory, mode: Option<ResidualMode>) -> Result<RadiusSeries, EvaluationError> {
    traj.check_model(model)?;
    let lim = model.tau_limits();
    let mut radii = Vec::with_capacity(traj.mesh_points());
    let mut infeasible = Vec::with_capacity(traj.mesh_points());
    for k in 0..traj.mesh_points() {
        let ctx = force_context(model, traj.q(k))?;
        let r = match mode {
            Some(mode) => metric_ball_at(&ctx, &lim, Some(traj.torque(k)), mode),
            None => metric_ball_at(&ctx, &lim, None, ResidualMode::default()),
        };
        match r {
            Ok(r) => {
                radii.push(r);
                infeasible.push(false);
            }
            Err(ForceError::InfeasibleNominal { .. }) => {
                radii.push(0.0);
                infeasible.push(true);
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(RadiusSeries { radii, infeasible })
}

/// Outcome of the impulse torque test.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessReport {
    pub times: Vec<f64>,
    /// Residual-ball radius per mesh point.
    pub radii: RadiusSeries,
    /// `τ_k / τ_lim` per mesh point and joint.
    pub nominal: Vec<Vec<f64>>,
    /// Extra torque `Jᵀ f(t_k) d` per mesh point and joint.
    pub extra: Vec<Vec<f64>>,
    /// `(τ_k + τ_extra) / τ_lim` per mesh point and joint.
    pub normalized: Vec<Vec<f64>>,
    /// `|normalized| > 1`.
    pub saturated: Vec<Vec<bool>>,
}

impl RobustnessReport {
    pub fn mean_radius(&self) -> f64 {
        self.radii.mean()
    }

    pub fn min_radius(&self) -> f64 {
        self.radii.min()
    }

    pub fn peak_normalized(&self) -> f64 {
        self.normalized.iter().flatten().map(|x| x.abs()).fold(0.0, f64::max)
    }

    pub fn any_saturated(&self) -> bool {
        self.saturated.iter().flatten().any(|&s| s)
    }

    pub fn saturated_at(&self, k: usize) -> bool {
        self.saturated[k].iter().any(|&s| s)
    }
}

/// Torques needed to resist the Gaussian disturbance `f(t)·direction` on top of
/// the planned torques, normalized by the joint limits.
pub fn impulse_torque_test(
    model: &RobotModel,
    traj: &Trajectory,
    direction: &DVector<f64>,
    f_peak: f64,
    mode: ResidualMode,
) -> Result<RobustnessReport, EvaluationError> {
    traj.check_model(model)?;
    let m = model.task_dim();
    if direction.len() != m || (direction.norm() - 1.0).abs() > 1e-9 {
        return Err(EvaluationError::Direction { expected: m });
    }
    let radii = robustness_timeseries(model, traj, mode)?;
    let lim = model.tau_limits();
    let center = traj.center_time();
    let mut nominal = Vec::new();
    let mut extra = Vec::new();
    let mut normalized = Vec::new();
    let mut saturated = Vec::new();
    for (k, &t) in traj.mesh_times().iter().enumerate() {
        let j = model.jacobian(traj.q(k)).map_err(ForceError::from)?;
        let f = direction * force_profile_at(t, f_peak, center);
        let tau_extra = j.transpose() * f;
        let tau = traj.torque(k);
        let nom: Vec<f64> = tau.iter().zip(lim.iter()).map(|(t, l)| t / l).collect();
        let total: Vec<f64> = (0..lim.len()).map(|i| (tau[i] + tau_extra[i]) / lim[i]).collect();
        saturated.push(total.iter().map(|x| x.abs() > 1.0).collect());
        nominal.push(nom);
        extra.push(tau_extra.iter().copied().collect());
        normalized.push(total);
    }
    Ok(RobustnessReport {
        times: traj.mesh_times().to_vec(),
        radii,
        nominal,
        extra,
        normalized,
        saturated,
    })
}

/// Largest `f_peak` for which the impulse along `direction` keeps every joint
/// within its limit.
pub fn saturation_threshold(model: &RobotModel, traj: &Trajectory, direction: &DVector<f64>) -> f64 {
    let lim = model.tau_limits();
    let center = traj.center_time();
    let mut best = f64::INFINITY;
    for (k, &t) in traj.mesh_times().iter().enumerate() {
        let Ok(j) = model.jacobian(traj.q(k)) else {
            return 0.0;
        };
        // τ_extra scales linearly with f_peak: τ + f_peak·a must stay in [−lim, lim].
        let a = j.transpose() * direction * force_profile_at(t, 1.0, center);
        let tau = traj.torque(k);
        for i in 0..lim.len() {
            let room = if a[i] > 0.0 {
                (lim[i] - tau[i]) / a[i]
            } else if a[i] < 0.0 {
                (-lim[i] - tau[i]) / a[i]
            } else {
                f64::INFINITY
            };
            best = best.min(room.max(0.0));
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonEntry {
    pub label: String,
    pub radii: RadiusSeries,
}

/// Radius series of several trajectories on a shared mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub times: Vec<f64>,
    pub entries: Vec<ComparisonEntry>,
}

impl Comparison {
    /// Labels sorted by mean radius, largest first.
    pub fn ranking(&self) -> Vec<&str> {
        let mut order: Vec<&ComparisonEntry> = self.entries.iter().collect();
        order.sort_by(|a, b| b.radii.mean().total_cmp(&a.radii.mean()));
        order.into_iter().map(|e| e.label.as_str()).collect()
    }
}

pub fn compare_report(
    model: &RobotModel,
    trajs: &[(String, Trajectory)],
    mode: ResidualMode,
) -> Result<Comparison, EvaluationError> {
    let Some((_, first)) = trajs.first() else {
        return Err(EvaluationError::Empty);
    };
    let mut seen = HashSet::new();
    for (label, t) in trajs {
        if !seen.insert(label.as_str()) {
            return Err(EvaluationError::DuplicateLabel(label.clone()));
        }
        let same = t.mesh_points() == first.mesh_points()
            && t.mesh_times()
                .iter()
                .zip(first.mesh_times())
                .all(|(a, b)| (a - b).abs() <= SPACING_TOL);
        if !same {
            return Err(EvaluationError::MeshMismatch(label.clone()));
        }
    }
    let entries = crate::parallel::pool().install(|| {
        use rayon::prelude::*;
        trajs
            .par_iter()
            .map(|(label, t)| {
                robustness_timeseries(model, t, mode).map(|radii| ComparisonEntry {
                    label: label.clone(),
                    radii,
                })
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(Comparison {
        times: first.mesh_times().to_vec(),
        entries,
    })
}

fn fmt(x: f64) -> String {
    format!("{x:.9}")
}

/// `k,t,radius,tau_norm_1..n,saturated_any`.
pub fn report_csv(report: &RobustnessReport) -> String {
    let n = report.normalized.first().map_or(0, Vec::len);
    let mut out = String::from("k,t,radius");
    for i in 1..=n {
        let _ = write!(out, ",tau_norm_{i}");
    }
    out.push_str(",saturated_any\n");
    for k in 0..report.times.len() {
        let _ = write!(out, "{},{},{}", k, fmt(report.times[k]), fmt(report.radii.radii[k]));
        for x in &report.normalized[k] {
            let _ = write!(out, ",{}", fmt(*x));
        }
        let _ = writeln!(out, ",{}", report.saturated_at(k));
    }
    out
}

/// `k,t,<label>...` with one radius column per trajectory.
pub fn comparison_csv(cmp: &Comparison) -> String {
    let mut out = String::from("k,t");
    for e in &cmp.entries {
        let _ = write!(out, ",{}", e.label);
    }
    out.push('\n');
    for (k, t) in cmp.times.iter().enumerate() {
        let _ = write!(out, "{},{}", k, fmt(*t));
        for e in &cmp.entries {
            let _ = write!(out, ",{}", fmt(e.radii.radii[k]));
        }
        out.push('\n');
    }
    out
}
