use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layout::Layout;
use super::scenario::Scenario;
use super::TranscriptionError;
use crate::model::RobotModel;

pub const IK_MAX_ITERATIONS: usize = 500;
pub const IK_TOL: f64 = 1e-10;
/// Random restarts tried after the zero-posture attempt fails.
pub const IK_RETRIES: usize = 8;
const IK_DAMPING: f64 = 1e-2;
const IK_MAX_STEP: f64 = 0.3;

fn clamp(q: &mut DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) {
    for i in 0..q.len() {
        q[i] = q[i].max(lo[i]).min(hi[i]);
    }
}

/// Damped-least-squares IK from `start`, clamped to joint limits. Returns the
/// configuration and its final position error.
pub fn solve_ik(model: &RobotModel, target: &DVector<f64>, start: &DVector<f64>) -> (DVector<f64>, f64) {
    let (lo, hi) = model.q_bounds();
    let m = model.task_dim();
    let mut q = start.clone();
    clamp(&mut q, &lo, &hi);
    let mut err = f64::INFINITY;
    for _ in 0..IK_MAX_ITERATIONS {
        let frames = model.frames(&q);
        let e = target - model.project(&frames.end_effector.translation);
        err = e.norm();
        if err <= IK_TOL {
            break;
        }
        let j = model.jacobian_from_frames(&frames);
        let jjt = &j * j.transpose() + DMatrix::identity(m, m) * IK_DAMPING * IK_DAMPING;
        let Some(ch) = jjt.cholesky() else { break };
        let mut dq = j.transpose() * ch.solve(&e);
        let big = dq.amax();
        if big > IK_MAX_STEP {
            dq *= IK_MAX_STEP / big;
        }
        q += dq;
        clamp(&mut q, &lo, &hi);
    }
    let e = target - model.forward_kinematics(&q).expect("length checked");
    (q, err.min(e.norm()))
}

/// IK seeded from the zero posture, then from random postures drawn with `seed`.
pub fn seeded_ik(
    model: &RobotModel,
    target: &DVector<f64>,
    which: &'static str,
    seed: u64,
) -> Result<DVector<f64>, TranscriptionError> {
    let (lo, hi) = model.q_bounds();
    let mut zero = DVector::zeros(model.dof());
    clamp(&mut zero, &lo, &hi);
    let (q, err) = solve_ik(model, target, &zero);
    if err <= IK_TOL {
        return Ok(q);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = err;
    for _ in 0..IK_RETRIES {
        let start = DVector::from_iterator(model.dof(), (0..model.dof()).map(|i| rng.gen_range(lo[i]..=hi[i])));
        let (q, err) = solve_ik(model, target, &start);
        if err <= IK_TOL {
            return Ok(q);
        }
        best = best.min(err);
    }
    Err(TranscriptionError::Ik { which, residual: best })
}

fn smoothstep(s: f64) -> f64 {
    s * s * (3.0 - 2.0 * s)
}

/// Trajectory from `q_i` to `q_f` interpolated in joint space with smoothstep
/// timing. Velocities are central differences of the path (zero at both ends);
/// torques are inverse dynamics with forward-differenced accelerations.
/// Everything is clipped to the model's bounds.
pub fn interpolated_guess(
    model: &RobotModel,
    segments: usize,
    h: f64,
    q_i: &DVector<f64>,
    q_f: &DVector<f64>,
) -> DVector<f64> {
    let layout = Layout::new(model.dof(), segments);
    let mesh = layout.mesh_points();
    let q: Vec<DVector<f64>> = (0..mesh)
        .map(|k| q_i + (q_f - q_i) * smoothstep(k as f64 / segments as f64))
        .collect();
    let (vlo, vhi) = model.v_bounds();
    let mut v: Vec<DVector<f64>> = (0..mesh)
        .map(|k| {
            if k == 0 || k == mesh - 1 {
                DVector::zeros(model.dof())
            } else {
                (&q[k + 1] - &q[k - 1]) / (2.0 * h)
            }
        })
        .collect();
    for vk in v.iter_mut() {
        clamp(vk, &vlo, &vhi);
    }
    let lim = model.tau_limits();
    let tau: Vec<DVector<f64>> = (0..segments)
        .map(|k| {
            let vdot = (&v[k + 1] - &v[k]) / h;
            let mut t = model.inverse_dynamics(&q[k], &v[k], &vdot).expect("lengths match");
            clamp(&mut t, &-&lim, &lim);
            t
        })
        .collect();
    layout.pack(&q, &v, &tau)
}

/// Starting point for the solver.
pub fn initial_guess(scenario: &Scenario) -> Result<DVector<f64>, TranscriptionError> {
    let model = &scenario.model;
    let seed = scenario.solver().seed;
    let q_i = seeded_ik(model, &scenario.p_i, "p_I", seed)?;
    let q_f = seeded_ik(model, &scenario.p_f, "p_F", seed.wrapping_add(1))?;
    Ok(interpolated_guess(
        model,
        scenario.segments(),
        scenario.step(),
        &q_i,
        &q_f,
    ))
}
