use nalgebra::{DMatrix, DVector};

use super::layout::{Field, Layout};
use super::scenario::{Objective, Scenario};
use super::solver::Nlp;
use super::TranscriptionError;
use crate::forcespace::{metric_ball_at, metric_cone_volume_at, scaled_manipulability_at, ForceContext, ForceError};
use crate::geometry::Cone;
use crate::model::{RobotModel, State};
use crate::parallel::{map_indexed, map_indexed_if};

/// Objective value returned when a nominal torque leaves its limits during a
/// polytope-based evaluation.
pub const INFEASIBLE_PENALTY: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    /// Euler defect between mesh points `mesh` and `mesh + 1` (positions, then velocities).
    Defect,
    InitialPosition,
    FinalPosition,
    /// Distance from the end-effector to the surface.
    Surface,
    InitialVelocity,
    FinalVelocity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstraintBlock {
    pub kind: ConstraintKind,
    pub mesh: usize,
    pub offset: usize,
    pub dim: usize,
}

/// Direct-transcription NLP for one scenario.
#[derive(Debug, Clone)]
pub struct NlpProblem {
    pub scenario: Scenario,
    pub layout: Layout,
    /// Segment length.
    pub h: f64,
    pub blocks: Vec<ConstraintBlock>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
    cones: Vec<Cone>,
    tau_lim: DVector<f64>,
    gradient_step: f64,
}

pub fn build_problem(scenario: &Scenario) -> Result<NlpProblem, TranscriptionError> {
    let model = &scenario.model;
    let (n, m) = (model.dof(), model.task_dim());
    let layout = Layout::new(n, scenario.segments());
    let mesh = layout.mesh_points();
    let mut blocks = Vec::new();
    let mut offset = 0;
    let mut push = |kind, mesh, dim| {
        blocks.push(ConstraintBlock {
            kind,
            mesh,
            offset,
            dim,
        });
        offset += dim;
    };
    for k in 0..layout.segments() {
        push(ConstraintKind::Defect, k, 2 * n);
    }
    push(ConstraintKind::InitialPosition, 0, m);
    push(ConstraintKind::FinalPosition, mesh - 1, m);
    for k in 0..mesh {
        push(ConstraintKind::Surface, k, 1);
    }
    push(ConstraintKind::InitialVelocity, 0, n);
    push(ConstraintKind::FinalVelocity, mesh - 1, n);

    let tau_lim = model.tau_limits();
    let (lower, upper) = layout.bounds(&model.q_bounds(), &model.v_bounds(), &(-&tau_lim, tau_lim.clone()));
    let cones = match &scenario.doc.cone {
        Some(spec) => spec.cones(m, mesh)?,
        None => Vec::new(),
    };
    Ok(NlpProblem {
        scenario: scenario.clone(),
        layout,
        h: scenario.step(),
        blocks,
        lower,
        upper,
        cones,
        tau_lim,
        gradient_step: scenario.solver().gradient_step,
    })
}

impl NlpProblem {
    pub fn model(&self) -> &RobotModel {
        &self.scenario.model
    }

    pub fn objective_kind(&self) -> Objective {
        self.scenario.objective()
    }

    pub fn set_gradient_step(&mut self, step: f64) {
        self.gradient_step = step;
    }

    pub fn num_constraints(&self) -> usize {
        self.blocks.iter().map(|b| b.dim).sum()
    }

    pub fn mesh_times(&self) -> Vec<f64> {
        (0..self.layout.mesh_points()).map(|k| k as f64 * self.h).collect()
    }

    fn check(&self, xi: &DVector<f64>) {
        assert_eq!(xi.len(), self.layout.len(), "decision vector has the wrong length");
    }

    fn state(&self, xi: &DVector<f64>, k: usize) -> State {
        State::new(self.layout.q(xi, k).into_owned(), self.layout.v(xi, k).into_owned())
    }

    /// Residual vector in block order: defects, endpoint positions, surface
    /// distances, endpoint velocities.
    pub fn constraint_residuals(&self, xi: &DVector<f64>) -> DVector<f64> {
        self.check(xi);
        let model = self.model();
        let l = &self.layout;
        let n = l.dof();
        let defects = map_indexed(l.segments(), |k| {
            let x = self.state(xi, k);
            let tau = l.tau(xi, k).into_owned();
            let next = model.euler_step(&x, &tau, self.h).expect("dimensions checked");
            let mut r = DVector::zeros(2 * n);
            r.rows_mut(0, n).copy_from(&(l.q(xi, k + 1) - next.q));
            r.rows_mut(n, n).copy_from(&(l.v(xi, k + 1) - next.v));
            r
        });
        let tips = map_indexed(l.mesh_points(), |k| {
            model.frames(&l.q(xi, k).into_owned()).end_effector.translation
        });

        let mut out = DVector::zeros(self.num_constraints());
        for b in &self.blocks {
            let mut rows = out.rows_mut(b.offset, b.dim);
            match b.kind {
                ConstraintKind::Defect => rows.copy_from(&defects[b.mesh]),
                ConstraintKind::InitialPosition => rows.copy_from(&(model.project(&tips[b.mesh]) - &self.scenario.p_i)),
                ConstraintKind::FinalPosition => rows.copy_from(&(model.project(&tips[b.mesh]) - &self.scenario.p_f)),
                ConstraintKind::Surface => rows[0] = self.scenario.surface().distance(&tips[b.mesh]).distance,
                ConstraintKind::InitialVelocity | ConstraintKind::FinalVelocity => rows.copy_from(&l.v(xi, b.mesh)),
            }
        }
        out
    }

    /// Analytic constraint Jacobian; the dynamics partials inside the defect
    /// blocks come from the model's finite-differenced inverse dynamics.
    pub fn constraint_jacobian(&self, xi: &DVector<f64>) -> DMatrix<f64> {
        self.check(xi);
        let model = self.model();
        let l = &self.layout;
        let n = l.dof();
        let h = self.h;
        let dyn_jacs = map_indexed(l.segments(), |k| {
            model
                .forward_dynamics_jacobians(
                    &l.q(xi, k).into_owned(),
                    &l.v(xi, k).into_owned(),
                    &l.tau(xi, k).into_owned(),
                )
                .expect("dimensions checked")
        });
        let kin = map_indexed(l.mesh_points(), |k| {
            let frames = model.frames(&l.q(xi, k).into_owned());
            let j3 = model.jacobian3_from_frames(&frames);
            (frames.end_effector.translation, j3)
        });

        let mut jac = DMatrix::zeros(self.num_constraints(), l.len());
        let eye = DMatrix::<f64>::identity(n, n);
        for b in &self.blocks {
            let r = b.offset;
            let k = b.mesh;
            match b.kind {
                ConstraintKind::Defect => {
                    let d = &dyn_jacs[k];
                    let (q0, v0, t0) = (
                        l.range(k, Field::Q).start,
                        l.range(k, Field::V).start,
                        l.range(k, Field::Tau).start,
                    );
                    let (q1, v1) = (l.range(k + 1, Field::Q).start, l.range(k + 1, Field::V).start);
                    jac.view_mut((r, q1), (n, n)).copy_from(&eye);
                    jac.view_mut((r, q0), (n, n)).copy_from(&(-&eye));
                    jac.view_mut((r, v0), (n, n)).copy_from(&(-h * &eye));
                    jac.view_mut((r + n, v1), (n, n)).copy_from(&eye);
                    jac.view_mut((r + n, v0), (n, n)).copy_from(&(-&eye - h * &d.d_v));
                    jac.view_mut((r + n, q0), (n, n)).copy_from(&(-h * &d.d_q));
                    jac.view_mut((r + n, t0), (n, n)).copy_from(&(-h * &d.d_tau));
                }
                ConstraintKind::InitialPosition | ConstraintKind::FinalPosition => {
                    let j = kin[k].1.rows(0, model.task_dim());
                    jac.view_mut((r, l.range(k, Field::Q).start), (b.dim, n)).copy_from(&j);
                }
                ConstraintKind::Surface => {
                    let (tip, j3) = &kin[k];
                    let g = self.scenario.surface().distance(tip).gradient;
                    let row = g.transpose() * j3;
                    jac.view_mut((r, l.range(k, Field::Q).start), (1, n)).copy_from(&row);
                }
                ConstraintKind::InitialVelocity | ConstraintKind::FinalVelocity => {
                    jac.view_mut((r, l.range(k, Field::V).start), (n, n)).copy_from(&eye);
                }
            }
        }
        jac
    }

    /// Number of per-mesh-point terms in the objective sum.
    fn term_count(&self) -> usize {
        match self.objective_kind() {
            Objective::A | Objective::B => self.layout.segments(),
            _ => self.layout.mesh_points(),
        }
    }

    /// Mesh index of the torque a term reads; the final point reuses the last torque.
    fn term_torque_index(&self, k: usize) -> Option<usize> {
        match self.objective_kind() {
            Objective::C | Objective::D => None,
            _ => Some(k.min(self.layout.segments() - 1)),
        }
    }

    /// Whether a term reads the configuration.
    fn term_reads_q(&self) -> bool {
        !matches!(self.objective_kind(), Objective::A | Objective::B)
    }

    /// Term `k` in minimization form, or `None` when a nominal torque is infeasible.
    fn term(&self, k: usize, q: &DVector<f64>, tau: Option<&DVector<f64>>) -> Option<f64> {
        let model = self.model();
        let lim = &self.tau_lim;
        let mode = self.scenario.residual_mode();
        let context = || {
            let frames = model.frames(q);
            let j = model.jacobian_from_frames(&frames);
            ForceContext::from_jacobian(j, model.project(&frames.end_effector.translation))
        };
        let ok = |r: Result<f64, ForceError>| match r {
            Ok(v) => Some(v),
            Err(ForceError::InfeasibleNominal { .. }) => None,
            Err(e) => panic!("objective evaluation failed: {e}"),
        };
        match self.objective_kind() {
            Objective::A => {
                let t = tau.expect("torque term");
                Some(t.dot(t))
            }
            Objective::B => {
                let d = lim - tau.expect("torque term");
                Some(-d.dot(&d))
            }
            Objective::C => Some(-scaled_manipulability_at(&context(), lim)),
            Objective::D => ok(metric_ball_at(&context(), lim, None, mode)).map(|r| -r),
            Objective::E => ok(metric_ball_at(&context(), lim, tau, mode)).map(|r| -r),
            Objective::F => {
                let cone = &self.cones[k];
                ok(metric_cone_volume_at(
                    &context(),
                    lim,
                    tau.expect("torque term"),
                    mode,
                    cone,
                ))
                .map(|v| -v)
            }
        }
    }

    fn term_inputs(&self, xi: &DVector<f64>, k: usize) -> (DVector<f64>, Option<DVector<f64>>) {
        let q = self.layout.q(xi, k.min(self.layout.mesh_points() - 1)).into_owned();
        let tau = self.term_torque_index(k).map(|j| self.layout.tau(xi, j).into_owned());
        (q, tau)
    }

    /// Objective in minimization form. Sums run in mesh order regardless of threading.
    pub fn objective_value(&self, xi: &DVector<f64>) -> f64 {
        self.check(xi);
        // Cheap terms cost less than a pool dispatch.
        let parallel = self.objective_kind().uses_polytopes();
        let terms = map_indexed_if(parallel, self.term_count(), |k| {
            let (q, tau) = self.term_inputs(xi, k);
            self.term(k, &q, tau.as_ref())
        });
        let mut sum = 0.0;
        for t in terms {
            match t {
                Some(v) => sum += v,
                None => return INFEASIBLE_PENALTY,
            }
        }
        sum
    }

    /// Value as reported to users: maximization objectives are un-negated.
    pub fn reported_objective(&self, value: f64) -> f64 {
        if self.objective_kind().is_maximization() {
            -value
        } else {
            value
        }
    }

    /// Finite-difference gradient of the objective, term by term. Central
    /// differences, one-sided next to a bound so trial points stay in the box.
    pub fn objective_gradient(&self, xi: &DVector<f64>) -> DVector<f64> {
        self.check(xi);
        let l = &self.layout;
        let n = l.dof();
        let step = self.gradient_step;
        let parts = map_indexed_if(self.objective_kind().uses_polytopes(), self.term_count(), |k| {
            let (q, tau) = self.term_inputs(xi, k);
            let mut entries: Vec<(usize, f64)> = Vec::new();
            let eval = |q: &DVector<f64>, t: Option<&DVector<f64>>| self.term(k, q, t).unwrap_or(INFEASIBLE_PENALTY);
            if self.term_reads_q() {
                let base = l.range(k, Field::Q).start;
                for i in 0..n {
                    let d = self.difference(base + i, q[i], step, |x| {
                        let mut qq = q.clone();
                        qq[i] = x;
                        eval(&qq, tau.as_ref())
                    });
                    entries.push((base + i, d));
                }
            }
            if let Some(t) = &tau {
                let base = l.range(self.term_torque_index(k).unwrap(), Field::Tau).start;
                for i in 0..n {
                    let d = self.difference(base + i, t[i], step, |x| {
                        let mut tt = t.clone();
                        tt[i] = x;
                        eval(&q, Some(&tt))
                    });
                    entries.push((base + i, d));
                }
            }
            entries
        });
        let mut grad = DVector::zeros(l.len());
        for part in parts {
            for (i, d) in part {
                grad[i] += d;
            }
        }
        grad
    }

    fn difference(&self, index: usize, x: f64, step: f64, f: impl Fn(f64) -> f64) -> f64 {
        let h = step * x.abs().max(1.0);
        let (lo, hi) = (self.lower[index], self.upper[index]);
        let up = x + h <= hi;
        let down = x - h >= lo;
        match (up, down) {
            (true, true) => (f(x + h) - f(x - h)) / (2.0 * h),
            (true, false) => (f(x + h) - f(x)) / h,
            (false, true) => (f(x) - f(x - h)) / h,
            (false, false) => 0.0,
        }
    }
}

impl Nlp for NlpProblem {
    fn len(&self) -> usize {
        self.layout.len()
    }

    fn bounds(&self) -> (&DVector<f64>, &DVector<f64>) {
        (&self.lower, &self.upper)
    }

    fn objective(&self, x: &DVector<f64>) -> f64 {
        self.objective_value(x)
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.objective_gradient(x)
    }

    fn constraints(&self, x: &DVector<f64>) -> DVector<f64> {
        self.constraint_residuals(x)
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        self.constraint_jacobian(x)
    }
}
