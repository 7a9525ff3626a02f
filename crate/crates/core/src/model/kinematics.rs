use nalgebra::{DMatrix, DVector, Rotation3, Unit, Vector3};

use super::{Frame, ModelError, RobotModel};

/// World-frame placement of every joint of a chain at one configuration.
#[derive(Debug, Clone)]
pub struct ChainFrames {
    /// Frame of link i (joint i after its rotation).
    pub links: Vec<Frame>,
    /// Joint origins in world coordinates.
    pub origins: Vec<Vector3<f64>>,
    /// Joint axes in world coordinates.
    pub axes: Vec<Vector3<f64>>,
    pub end_effector: Frame,
}

impl RobotModel {
    /// Placement of every joint and the end-effector. Does not check `q`'s length.
    pub fn frames(&self, q: &DVector<f64>) -> ChainFrames {
        let n = self.dof();
        let mut links = Vec::with_capacity(n);
        let mut origins = Vec::with_capacity(n);
        let mut axes = Vec::with_capacity(n);
        let mut parent = Frame::identity();
        for (joint, &qi) in self.joints().iter().zip(q.iter()) {
            let placed = parent.compose(&joint.origin);
            let axis = placed.rotation * joint.axis;
            let rot = Rotation3::from_axis_angle(&Unit::new_unchecked(joint.axis), qi).into_inner();
            let frame = Frame {
                rotation: placed.rotation * rot,
                translation: placed.translation,
            };
            origins.push(placed.translation);
            axes.push(axis);
            links.push(frame);
            parent = frame;
        }
        let end_effector = parent.compose(self.end_effector());
        ChainFrames {
            links,
            origins,
            axes,
            end_effector,
        }
    }

    /// End-effector position; (x, y) for planar models.
    pub fn forward_kinematics(&self, q: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        self.check_len("q", q.len())?;
        let p = self.frames(q).end_effector.translation;
        Ok(self.project(&p))
    }

    /// Linear-velocity Jacobian of the end-effector origin (m × n).
    pub fn jacobian(&self, q: &DVector<f64>) -> Result<DMatrix<f64>, ModelError> {
        self.check_len("q", q.len())?;
        Ok(self.jacobian_from_frames(&self.frames(q)))
    }

    pub(crate) fn jacobian_from_frames(&self, frames: &ChainFrames) -> DMatrix<f64> {
        let full = self.jacobian3_from_frames(frames);
        full.rows(0, self.task_dim()).into_owned()
    }

    /// Full 3 × n linear-velocity Jacobian, including the z row of planar models.
    pub fn jacobian3_from_frames(&self, frames: &ChainFrames) -> DMatrix<f64> {
        let tip = frames.end_effector.translation;
        let mut jac = DMatrix::zeros(3, self.dof());
        for (i, (z, p)) in frames.axes.iter().zip(&frames.origins).enumerate() {
            let col = z.cross(&(tip - p));
            jac.set_column(i, &col);
        }
        jac
    }

    /// Drops the z component for planar models.
    pub(crate) fn project(&self, p: &Vector3<f64>) -> DVector<f64> {
        DVector::from_iterator(self.task_dim(), p.iter().copied().take(self.task_dim()))
    }

    /// Embeds a task-space point in 3-D (z = 0 for planar models).
    pub fn embed(&self, p: &DVector<f64>) -> Vector3<f64> {
        let mut out = Vector3::zeros();
        for (i, v) in p.iter().take(3).enumerate() {
            out[i] = *v;
        }
        out
    }
}
