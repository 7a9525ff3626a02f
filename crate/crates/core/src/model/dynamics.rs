use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use super::{ChainFrames, ModelError, RobotModel, State};

/// Sensitivities of the forward dynamics at one state, used by the defect constraints.
#[derive(Debug, Clone)]
pub struct FdJacobians {
    pub vdot: DVector<f64>,
    pub d_q: DMatrix<f64>,
    pub d_v: DMatrix<f64>,
    /// ∂v̇/∂τ = M⁻¹.
    pub d_tau: DMatrix<f64>,
}

/// Rigid-body inertia in world coordinates (mass, CoM, rotational inertia about CoM).
#[derive(Debug, Clone, Copy)]
struct BodyInertia {
    mass: f64,
    com: Vector3<f64>,
    inertia: Matrix3<f64>,
}

fn steiner(mass: f64, d: &Vector3<f64>) -> Matrix3<f64> {
    (Matrix3::identity() * d.norm_squared() - d * d.transpose()) * mass
}

impl BodyInertia {
    fn merge(&self, other: &BodyInertia) -> BodyInertia {
        let mass = self.mass + other.mass;
        if mass <= 0.0 {
            return BodyInertia {
                mass: 0.0,
                com: self.com,
                inertia: Matrix3::zeros(),
            };
        }
        let com = (self.com * self.mass + other.com * other.mass) / mass;
        let inertia = self.inertia
            + other.inertia
            + steiner(self.mass, &(self.com - com))
            + steiner(other.mass, &(other.com - com));
        BodyInertia { mass, com, inertia }
    }
}

impl RobotModel {
    fn world_inertias(&self, frames: &ChainFrames) -> Vec<BodyInertia> {
        self.effective_links()
            .iter()
            .zip(&frames.links)
            .map(|(link, frame)| BodyInertia {
                mass: link.mass,
                com: frame.transform_point(&link.com),
                inertia: frame.rotation * link.inertia * frame.rotation.transpose(),
            })
            .collect()
    }

    /// Recursive Newton-Euler in world coordinates. `f_ext` is a force acting on
    /// the robot at the end-effector origin.
    fn rnea(
        &self,
        frames: &ChainFrames,
        v: &DVector<f64>,
        a: &DVector<f64>,
        gravity: &Vector3<f64>,
        f_ext: &Vector3<f64>,
    ) -> DVector<f64> {
        let n = self.dof();
        let bodies = self.world_inertias(frames);
        let mut forces = Vec::with_capacity(n);
        let mut moments = Vec::with_capacity(n);

        let mut omega = Vector3::zeros();
        let mut alpha = Vector3::zeros();
        // Acceleration of the parent origin; the fixed base accelerates at -g.
        let mut acc = -gravity;
        let mut prev_origin = frames.origins[0];
        for i in 0..n {
            let p = frames.origins[i];
            let d = p - prev_origin;
            acc += alpha.cross(&d) + omega.cross(&omega.cross(&d));
            let z = frames.axes[i];
            let spin = z * v[i];
            alpha += z * a[i] + omega.cross(&spin);
            omega += spin;
            let body = &bodies[i];
            let r = body.com - p;
            let acc_com = acc + alpha.cross(&r) + omega.cross(&omega.cross(&r));
            forces.push(acc_com * body.mass);
            moments.push(body.inertia * alpha + omega.cross(&(body.inertia * omega)));
            prev_origin = p;
        }

        let mut tau = DVector::zeros(n);
        let mut f_child = -f_ext;
        let mut n_child = Vector3::zeros();
        let mut p_child = frames.end_effector.translation;
        for i in (0..n).rev() {
            let p = frames.origins[i];
            let r = bodies[i].com - p;
            let f = forces[i] + f_child;
            let moment = moments[i] + r.cross(&forces[i]) + (p_child - p).cross(&f_child) + n_child;
            tau[i] = frames.axes[i].dot(&moment);
            f_child = f;
            n_child = moment;
            p_child = p;
        }
        tau
    }

    /// Joint torques producing acceleration `vdot` at state (q, v), gravity included.
    pub fn inverse_dynamics(
        &self,
        q: &DVector<f64>,
        v: &DVector<f64>,
        vdot: &DVector<f64>,
    ) -> Result<DVector<f64>, ModelError> {
        self.check_len("q", q.len())?;
        self.check_len("v", v.len())?;
        self.check_len("vdot", vdot.len())?;
        let frames = self.frames(q);
        Ok(self.rnea(&frames, v, vdot, &self.gravity(), &Vector3::zeros()))
    }

    /// Coriolis, centrifugal and gravity terms h(q, v).
    pub fn bias_forces(&self, q: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        self.inverse_dynamics(q, v, &DVector::zeros(self.dof()))
    }

    /// Joint-space inertia matrix by the composite-rigid-body algorithm.
    pub fn mass_matrix(&self, q: &DVector<f64>) -> Result<DMatrix<f64>, ModelError> {
        self.check_len("q", q.len())?;
        Ok(self.crba(&self.frames(q)))
    }

    fn crba(&self, frames: &ChainFrames) -> DMatrix<f64> {
        let n = self.dof();
        let bodies = self.world_inertias(frames);
        let mut mass = DMatrix::zeros(n, n);
        let mut composite: Option<BodyInertia> = None;
        for i in (0..n).rev() {
            let c = match composite {
                Some(ref sub) => bodies[i].merge(sub),
                None => bodies[i],
            };
            let z = frames.axes[i];
            let force = z.cross(&(c.com - frames.origins[i])) * c.mass;
            let spin_moment = c.inertia * z;
            for j in 0..=i {
                let moment = spin_moment + (c.com - frames.origins[j]).cross(&force);
                let value = frames.axes[j].dot(&moment);
                mass[(j, i)] = value;
                mass[(i, j)] = value;
            }
            composite = Some(c);
        }
        mass
    }

    /// Solves M v̇ = τ + Jᵀ f_tip − h.
    pub fn forward_dynamics(
        &self,
        q: &DVector<f64>,
        v: &DVector<f64>,
        tau: &DVector<f64>,
        f_tip: &DVector<f64>,
    ) -> Result<DVector<f64>, ModelError> {
        self.check_len("q", q.len())?;
        self.check_len("v", v.len())?;
        self.check_len("tau", tau.len())?;
        if f_tip.len() != self.task_dim() {
            return Err(ModelError::Dimension {
                what: "f_tip",
                expected: self.task_dim(),
                got: f_tip.len(),
            });
        }
        let frames = self.frames(q);
        let f = self.embed(f_tip);
        // rnea with v̇ = 0 and the tip load gives h − Jᵀ f.
        let rhs = tau - self.rnea(&frames, v, &DVector::zeros(self.dof()), &self.gravity(), &f);
        let chol = self.crba(&frames).cholesky().ok_or(ModelError::SingularMassMatrix)?;
        Ok(chol.solve(&rhs))
    }

    /// Explicit Euler propagation with zero tip force.
    pub fn euler_step(&self, x: &State, tau: &DVector<f64>, h: f64) -> Result<State, ModelError> {
        let zero = DVector::zeros(self.task_dim());
        let vdot = self.forward_dynamics(&x.q, &x.v, tau, &zero)?;
        Ok(State {
            q: &x.q + &x.v * h,
            v: &x.v + vdot * h,
        })
    }

    /// Forward dynamics plus its partial derivatives. ∂v̇/∂τ is exact (M⁻¹); the
    /// q and v sensitivities differentiate inverse dynamics by central differences.
    pub fn forward_dynamics_jacobians(
        &self,
        q: &DVector<f64>,
        v: &DVector<f64>,
        tau: &DVector<f64>,
    ) -> Result<FdJacobians, ModelError> {
        self.check_len("q", q.len())?;
        self.check_len("v", v.len())?;
        self.check_len("tau", tau.len())?;
        let n = self.dof();
        let g = self.gravity();
        let zero = Vector3::zeros();
        let frames = self.frames(q);
        let chol = self.crba(&frames).cholesky().ok_or(ModelError::SingularMassMatrix)?;
        let h = self.rnea(&frames, v, &DVector::zeros(n), &g, &zero);
        let vdot = chol.solve(&(tau - h));
        let m_inv = chol.inverse();

        const DQ: f64 = 1e-5;
        const DV: f64 = 1e-3;
        let mut id_q = DMatrix::zeros(n, n);
        let mut id_v = DMatrix::zeros(n, n);
        for i in 0..n {
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[i] += DQ;
            qm[i] -= DQ;
            let tp = self.rnea(&self.frames(&qp), v, &vdot, &g, &zero);
            let tm = self.rnea(&self.frames(&qm), v, &vdot, &g, &zero);
            id_q.set_column(i, &((tp - tm) / (2.0 * DQ)));

            // h is quadratic in v, so the central difference is exact up to rounding.
            let mut vp = v.clone();
            let mut vm = v.clone();
            vp[i] += DV;
            vm[i] -= DV;
            let tp = self.rnea(&frames, &vp, &vdot, &g, &zero);
            let tm = self.rnea(&frames, &vm, &vdot, &g, &zero);
            id_v.set_column(i, &((tp - tm) / (2.0 * DV)));
        }
        Ok(FdJacobians {
            vdot,
            d_q: -(&m_inv * id_q),
            d_v: -(&m_inv * id_v),
            d_tau: m_inv,
        })
    }

    /// Kinetic plus potential energy (potential relative to the base origin).
    pub fn total_energy(&self, q: &DVector<f64>, v: &DVector<f64>) -> Result<f64, ModelError> {
        let m = self.mass_matrix(q)?;
        let kinetic = 0.5 * v.dot(&(&m * v));
        let frames = self.frames(q);
        let g = self.gravity();
        let potential: f64 = self
            .world_inertias(&frames)
            .iter()
            .map(|b| -b.mass * g.dot(&b.com))
            .sum();
        Ok(kinetic + potential)
    }
}
