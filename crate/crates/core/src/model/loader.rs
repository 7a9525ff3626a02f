use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::Deserialize;

use super::{Frame, Joint, Link, ModelError, RobotModel};

/// Names accepted by [`builtin_model`].
pub const BUILTIN_MODELS: &[&str] = &["planar3", "spatial7"];

const PLANAR3: &str = include_str!("../../fixtures/planar3.json");
const SPATIAL7: &str = include_str!("../../fixtures/spatial7.json");

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    name: String,
    task_dim: usize,
    joints: Vec<JointDoc>,
    links: Vec<LinkDoc>,
    end_effector: FrameDoc,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameDoc {
    xyz: [f64; 3],
    rpy: [f64; 3],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JointDoc {
    parent: isize,
    origin: FrameDoc,
    axis: [f64; 3],
    q_limits: [f64; 2],
    v_limits: [f64; 2],
    tau_limit: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkDoc {
    mass: f64,
    com: [f64; 3],
    /// ixx, iyy, izz, ixy, ixz, iyz
    inertia: [f64; 6],
}

impl From<FrameDoc> for Frame {
    fn from(f: FrameDoc) -> Self {
        Frame::from_xyz_rpy(f.xyz, f.rpy)
    }
}

/// Parses and validates a chain-description document (JSON syntax).
pub fn load_model(text: &str) -> Result<RobotModel, ModelError> {
    let doc: ModelDoc = serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))?;
    let joints = doc
        .joints
        .into_iter()
        .enumerate()
        .map(|(i, j)| {
            let axis = Vector3::from(j.axis);
            let norm = axis.norm();
            if norm < 1e-12 {
                return Err(ModelError::Validation(format!("joint {}: axis is zero", i + 1)));
            }
            Ok(Joint {
                parent: j.parent,
                origin: j.origin.into(),
                axis: axis / norm,
                q_limits: (j.q_limits[0], j.q_limits[1]),
                v_limits: (j.v_limits[0], j.v_limits[1]),
                tau_limit: j.tau_limit,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let links = doc
        .links
        .into_iter()
        .map(|l| {
            let [ixx, iyy, izz, ixy, ixz, iyz] = l.inertia;
            Link {
                mass: l.mass,
                com: Vector3::from(l.com),
                inertia: Matrix3::new(ixx, ixy, ixz, ixy, iyy, iyz, ixz, iyz, izz),
            }
        })
        .collect();
    RobotModel::new(doc.name, doc.task_dim, joints, links, doc.end_effector.into())
}

/// One of the fixtures shipped with the crate, by name.
pub fn builtin_model(name: &str) -> Option<RobotModel> {
    let text = match name {
        "planar3" => PLANAR3,
        "spatial7" => SPATIAL7,
        _ => return None,
    };
    Some(load_model(text).expect("shipped fixture is valid"))
}

/// Loads a model from a file path, or a built-in fixture when `path` names one
/// and no such file exists.
pub fn load_model_file(path: impl AsRef<Path>) -> Result<RobotModel, ModelError> {
    let path = path.as_ref();
    if !path.exists() {
        if let Some(model) = path.to_str().and_then(builtin_model) {
            return Ok(model);
        }
    }
    let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_model(&text)
}
