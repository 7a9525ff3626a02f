use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::TranscriptionError;
use crate::forcespace::ResidualMode;
use crate::geometry::{Cone, DEFAULT_CONE_FACETS};
use crate::model::{load_model_file, Rectangle, RobotModel};

/// Endpoints must lie this close to the surface.
pub const SURFACE_TOL: f64 = 1e-6;

/// Objective selector. A minimizes energy, B maximizes residual torque, C the
/// scaled manipulability, D the force-polytope ball, E the residual ball and F
/// the residual volume inside a disturbance cone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Objective {
    A,
    B,
    C,
    D,
    E,
    F,
}

impl Objective {
    pub const ALL: [Objective; 6] = [Self::A, Self::B, Self::C, Self::D, Self::E, Self::F];

    pub fn label(self) -> &'static str {
        match self {
            Self::A => "A",
            Self::B => "B",
            Self::C => "C",
            Self::D => "D",
            Self::E => "E",
            Self::F => "F",
        }
    }

    /// Every objective except A is a maximization solved as a minimization of its negative.
    pub fn is_maximization(self) -> bool {
        self != Self::A
    }

    /// Whether evaluation builds polytopes.
    pub fn uses_polytopes(self) -> bool {
        matches!(self, Self::D | Self::E | Self::F)
    }
}

impl std::str::FromStr for Objective {
    type Err = TranscriptionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|o| o.label().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| TranscriptionError::Invalid(format!("unknown objective {s:?}")))
    }
}

/// One axis for the whole trajectory, or one per mesh point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConeAxes {
    Constant(Vec<f64>),
    PerMesh(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConeSpec {
    pub axis: ConeAxes,
    pub half_aperture_deg: f64,
    #[serde(default = "default_facets")]
    pub facets: usize,
}

fn default_facets() -> usize {
    DEFAULT_CONE_FACETS
}

impl ConeSpec {
    /// Cones with apex at the force-space origin, one per mesh point.
    pub fn cones(&self, task_dim: usize, mesh_points: usize) -> Result<Vec<Cone>, TranscriptionError> {
        let axes: Vec<&Vec<f64>> = match &self.axis {
            ConeAxes::Constant(a) => vec![a; mesh_points],
            ConeAxes::PerMesh(list) => {
                if list.len() != mesh_points {
                    return Err(TranscriptionError::Invalid(format!(
                        "cone lists {} axes for {} mesh points",
                        list.len(),
                        mesh_points
                    )));
                }
                list.iter().collect()
            }
        };
        axes.into_iter()
            .map(|a| {
                if a.len() != task_dim {
                    return Err(TranscriptionError::Invalid(format!(
                        "cone axis has length {}, task space has {}",
                        a.len(),
                        task_dim
                    )));
                }
                Cone::new(
                    DVector::zeros(task_dim),
                    DVector::from_column_slice(a),
                    self.half_aperture_deg.to_radians(),
                    self.facets,
                )
                .map_err(|e| TranscriptionError::Invalid(format!("cone: {e}")))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Max absolute equality residual accepted as feasible.
    pub feasibility_tol: f64,
    /// Finite-difference step for objective gradients.
    pub gradient_step: f64,
    /// Seeds the inverse-kinematics retries.
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 300,
            feasibility_tol: 1e-3,
            gradient_step: 1e-6,
            seed: 0,
        }
    }
}

/// Scenario document as written on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    /// Model file path (relative to the scenario file) or a built-in name.
    pub model: String,
    #[serde(rename = "p_I")]
    pub p_i: Vec<f64>,
    #[serde(rename = "p_F")]
    pub p_f: Vec<f64>,
    pub surface: Rectangle,
    #[serde(default = "default_duration")]
    pub duration: f64,
    #[serde(default = "default_segments")]
    pub segments: usize,
    pub objective: Objective,
    #[serde(default)]
    pub cone: Option<ConeSpec>,
    #[serde(default)]
    pub payload_mass: f64,
    #[serde(default)]
    pub residual_mode: ResidualMode,
    #[serde(default)]
    pub solver: SolverOptions,
}

fn default_duration() -> f64 {
    1.0
}

fn default_segments() -> usize {
    10
}

/// A validated trajectory-optimization task.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub doc: ScenarioDoc,
    /// Model with the payload attached.
    pub model: RobotModel,
    pub p_i: DVector<f64>,
    pub p_f: DVector<f64>,
}

impl Scenario {
    /// Validates a document; relative model paths resolve against `base_dir`.
    pub fn from_doc(doc: ScenarioDoc, base_dir: Option<&Path>) -> Result<Self, TranscriptionError> {
        let path = resolve_model_path(&doc.model, base_dir);
        let model = load_model_file(&path)?;
        Self::with_model(doc, model)
    }

    /// Validates a document against an already loaded model (its `model` key is
    /// kept for reference only).
    pub fn with_model(doc: ScenarioDoc, model: RobotModel) -> Result<Self, TranscriptionError> {
        let model = model.attach_payload(doc.payload_mass)?;
        let m = model.task_dim();
        let invalid = |s: String| Err(TranscriptionError::Invalid(s));
        if doc.p_i.len() != m || doc.p_f.len() != m {
            return invalid(format!("p_I and p_F must have length {m}"));
        }
        if doc.segments < 2 {
            return invalid(format!("need at least 2 segments, got {}", doc.segments));
        }
        if !(doc.duration > 0.0 && doc.duration.is_finite()) {
            return invalid(format!("duration must be positive, got {}", doc.duration));
        }
        let p_i = DVector::from_column_slice(&doc.p_i);
        let p_f = DVector::from_column_slice(&doc.p_f);
        if (&p_i - &p_f).amax() == 0.0 {
            return invalid("p_I and p_F coincide".into());
        }
        for (which, p) in [("p_I", &p_i), ("p_F", &p_f)] {
            let d = doc.surface.distance(&model.embed(p)).distance;
            if d > SURFACE_TOL {
                return Err(TranscriptionError::EndpointOffSurface { which, distance: d });
            }
        }
        match (&doc.cone, doc.objective) {
            (None, Objective::F) => return Err(TranscriptionError::MissingCone),
            (Some(spec), _) => {
                spec.cones(m, doc.segments + 1)?;
            }
            _ => {}
        }
        let s = &doc.solver;
        if !(s.feasibility_tol > 0.0) || !(s.gradient_step > 0.0) {
            return invalid("solver tolerances must be positive".into());
        }
        Ok(Self { doc, model, p_i, p_f })
    }

    pub fn from_json(text: &str, base_dir: Option<&Path>) -> Result<Self, TranscriptionError> {
        let doc: ScenarioDoc = serde_json::from_str(text).map_err(|e| TranscriptionError::Parse(e.to_string()))?;
        Self::from_doc(doc, base_dir)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TranscriptionError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| TranscriptionError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text, path.parent())
    }

    /// Same task with a different objective (and optionally a cone).
    pub fn with_objective(&self, objective: Objective, cone: Option<ConeSpec>) -> Result<Self, TranscriptionError> {
        let mut doc = self.doc.clone();
        doc.objective = objective;
        if cone.is_some() {
            doc.cone = cone;
        }
        let base = self.model.clone();
        // The payload is re-attached from the document.
        Self::with_model(doc, base)
    }

    pub fn objective(&self) -> Objective {
        self.doc.objective
    }

    pub fn segments(&self) -> usize {
        self.doc.segments
    }

    pub fn mesh_points(&self) -> usize {
        self.doc.segments + 1
    }

    pub fn duration(&self) -> f64 {
        self.doc.duration
    }

    /// Segment length h.
    pub fn step(&self) -> f64 {
        self.doc.duration / self.doc.segments as f64
    }

    pub fn surface(&self) -> &Rectangle {
        &self.doc.surface
    }

    pub fn residual_mode(&self) -> ResidualMode {
        self.doc.residual_mode
    }

    pub fn solver(&self) -> &SolverOptions {
        &self.doc.solver
    }
}

fn resolve_model_path(model: &str, base_dir: Option<&Path>) -> PathBuf {
    let direct = PathBuf::from(model);
    match base_dir {
        Some(dir) if direct.is_relative() => {
            let joined = dir.join(&direct);
            if joined.exists() {
                joined
            } else {
                direct
            }
        }
        _ => direct,
    }
}
