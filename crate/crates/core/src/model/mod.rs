//! Fixed-base serial chains: description loading, kinematics and rigid-body dynamics.

mod dynamics;
mod kinematics;
mod loader;
mod surface;

pub use dynamics::FdJacobians;
pub use kinematics::ChainFrames;
pub use loader::{builtin_model, load_model, load_model_file, BUILTIN_MODELS};
pub use surface::{distance_to_rectangle, Rectangle, RectangleDistance};

use nalgebra::{DVector, Matrix3, Rotation3, Vector3};
use thiserror::Error;

/// Standard gravity used by every model, m/s².
pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid model: {0}")]
    Validation(String),
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("payload mass must be non-negative, got {0}")]
    NegativePayload(f64),
    #[error("mass matrix is singular (zero-mass links?)")]
    SingularMassMatrix,
    #[error("cannot read {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Rigid transform: rotation followed by translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Frame {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// URDF-style fixed-axis roll/pitch/yaw: R = Rz(yaw) · Ry(pitch) · Rx(roll).
    pub fn from_xyz_rpy(xyz: [f64; 3], rpy: [f64; 3]) -> Self {
        let rotation = Rotation3::from_euler_angles(rpy[0], rpy[1], rpy[2]).into_inner();
        Self {
            rotation,
            translation: Vector3::from(xyz),
        }
    }

    pub fn compose(&self, other: &Frame) -> Frame {
        Frame {
            rotation: self.rotation * other.rotation,
            translation: self.translation + self.rotation * other.translation,
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.translation + self.rotation * p
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub parent: isize,
    pub origin: Frame,
    /// Unit rotation axis expressed in the joint frame.
    pub axis: Vector3<f64>,
    pub q_limits: (f64, f64),
    pub v_limits: (f64, f64),
    pub tau_limit: f64,
}

/// Inertial parameters of one link, expressed in its joint frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub mass: f64,
    pub com: Vector3<f64>,
    /// Rotational inertia about the center of mass.
    pub inertia: Matrix3<f64>,
}

impl Link {
    /// Rigidly merges a point mass located at `point` (link frame) into this link.
    fn with_point_mass(&self, mass: f64, point: &Vector3<f64>) -> Link {
        let total = self.mass + mass;
        if total <= 0.0 {
            return self.clone();
        }
        let com = (self.com * self.mass + point * mass) / total;
        let shift = |m: f64, d: Vector3<f64>| (Matrix3::identity() * d.dot(&d) - d * d.transpose()) * m;
        let inertia = self.inertia + shift(self.mass, self.com - com) + shift(mass, point - com);
        Link {
            mass: total,
            com,
            inertia,
        }
    }
}

/// Immutable description of a fixed-base chain of revolute joints.
#[derive(Debug, Clone)]
pub struct RobotModel {
    name: String,
    task_dim: usize,
    joints: Vec<Joint>,
    links: Vec<Link>,
    end_effector: Frame,
    payload: Option<f64>,
    /// Link inertials with the payload folded into the last link.
    effective_links: Vec<Link>,
}

impl RobotModel {
    pub fn new(
        name: impl Into<String>,
        task_dim: usize,
        joints: Vec<Joint>,
        links: Vec<Link>,
        end_effector: Frame,
    ) -> Result<Self, ModelError> {
        let model = Self {
            name: name.into(),
            task_dim,
            effective_links: links.clone(),
            joints,
            links,
            end_effector,
            payload: None,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<(), ModelError> {
        let fail = |msg: String| Err(ModelError::Validation(msg));
        let n = self.joints.len();
        if n == 0 {
            return fail("model has no joints".into());
        }
        if self.task_dim != 2 && self.task_dim != 3 {
            return fail(format!("task_dim must be 2 or 3, got {}", self.task_dim));
        }
        if self.links.len() != n {
            return fail(format!(
                "expected {} links (one per joint), got {}",
                n,
                self.links.len()
            ));
        }
        for (i, j) in self.joints.iter().enumerate() {
            let label = i + 1;
            if j.parent != i as isize - 1 {
                return fail(format!(
                    "joint {label}: parent must be {} for a serial chain, got {}",
                    i as isize - 1,
                    j.parent
                ));
            }
            if (j.axis.norm() - 1.0).abs() > 1e-9 {
                return fail(format!("joint {label}: axis is not a unit vector"));
            }
            if !(j.q_limits.0 < j.q_limits.1) {
                return fail(format!("joint {label}: q_lb must be < q_ub"));
            }
            if !(j.v_limits.0 < j.v_limits.1) {
                return fail(format!("joint {label}: v_lb must be < v_ub"));
            }
            if !(j.tau_limit > 0.0) || !j.tau_limit.is_finite() {
                return fail(format!("joint {label}: tau_limit must be positive"));
            }
        }
        for (i, l) in self.links.iter().enumerate() {
            let label = i + 1;
            if !(l.mass >= 0.0) {
                return fail(format!("link {label}: mass must be non-negative"));
            }
            if (l.inertia - l.inertia.transpose()).amax() > 1e-12 {
                return fail(format!("link {label}: inertia is not symmetric"));
            }
            let eig = l.inertia.symmetric_eigenvalues();
            if eig.min() < -1e-12 {
                return fail(format!("link {label}: inertia is not positive semidefinite"));
            }
        }
        if self.task_dim == 2 {
            let frames = self.frames(&DVector::zeros(n));
            for (i, z) in frames.axes.iter().enumerate() {
                if z.x.abs() > 1e-9 || z.y.abs() > 1e-9 {
                    return fail(format!("joint {}: planar models need all axes parallel to z", i + 1));
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Number of joints.
    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn task_dim(&self) -> usize {
        self.task_dim
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn end_effector(&self) -> &Frame {
        &self.end_effector
    }

    pub fn payload(&self) -> Option<f64> {
        self.payload
    }

    pub(crate) fn effective_links(&self) -> &[Link] {
        &self.effective_links
    }

    pub fn gravity(&self) -> Vector3<f64> {
        if self.task_dim == 2 {
            Vector3::new(0.0, -GRAVITY, 0.0)
        } else {
            Vector3::new(0.0, 0.0, -GRAVITY)
        }
    }

    pub fn tau_limits(&self) -> DVector<f64> {
        DVector::from_iterator(self.dof(), self.joints.iter().map(|j| j.tau_limit))
    }

    pub fn q_bounds(&self) -> (DVector<f64>, DVector<f64>) {
        bounds(&self.joints, |j| j.q_limits)
    }

    pub fn v_bounds(&self) -> (DVector<f64>, DVector<f64>) {
        bounds(&self.joints, |j| j.v_limits)
    }

    /// Returns a copy carrying a point mass rigidly attached at the end-effector frame.
    pub fn attach_payload(&self, mass: f64) -> Result<RobotModel, ModelError> {
        if !(mass >= 0.0) {
            return Err(ModelError::NegativePayload(mass));
        }
        let mut out = self.clone();
        let last = self.links.len() - 1;
        out.effective_links = self.links.clone();
        out.effective_links[last] = self.links[last].with_point_mass(mass, &self.end_effector.translation);
        out.payload = Some(mass);
        Ok(out)
    }

    pub(crate) fn check_len(&self, what: &'static str, got: usize) -> Result<(), ModelError> {
        if got != self.dof() {
            return Err(ModelError::Dimension {
                what,
                expected: self.dof(),
                got,
            });
        }
        Ok(())
    }
}

fn bounds(joints: &[Joint], f: impl Fn(&Joint) -> (f64, f64)) -> (DVector<f64>, DVector<f64>) {
    let lo = DVector::from_iterator(joints.len(), joints.iter().map(|j| f(j).0));
    let hi = DVector::from_iterator(joints.len(), joints.iter().map(|j| f(j).1));
    (lo, hi)
}

/// Joint positions and velocities at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub q: DVector<f64>,
    pub v: DVector<f64>,
}

impl State {
    pub fn new(q: DVector<f64>, v: DVector<f64>) -> Self {
        Self { q, v }
    }
}
