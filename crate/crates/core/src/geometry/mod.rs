//! Convex polytopes in 2-D and 3-D task-force space.
//!
//! Polytopes carry a half-space representation, a vertex representation, or
//! both. Conversions never mutate: they return a new [`Polytope`].

mod cone;
mod dump;
mod enumerate;
mod hull;
mod volume;
mod zonotope;

pub use cone::{make_cone, Cone, DEFAULT_CONE_FACETS};
pub use dump::{dump_polytope, parse_dump};
pub use enumerate::{enumerate_vertices, intersect};
pub use hull::{extreme_points, facets_from_vertices};
pub use volume::volume;
pub use zonotope::map_box;

use nalgebra::{DVector, Vector3};
use thiserror::Error;

/// Facet m-tuples whose row-normalized determinant falls below this are skipped.
pub const DET_TOL: f64 = 1e-10;
/// Vertices closer than this (scaled by the problem magnitude) are merged.
pub const MERGE_TOL: f64 = 1e-8;
/// Membership slack for `a·x ≤ b` (scaled by the problem magnitude).
pub const MEMBER_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("half-space set is unbounded")]
    Unbounded,
    #[error("invalid cone: {0}")]
    InvalidCone(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("only 2-D and 3-D polytopes are supported, got {0}")]
    UnsupportedDim(usize),
}

/// Axis-aligned box `lb ≤ x ≤ ub` (equality allowed).
#[derive(Debug, Clone, PartialEq)]
pub struct AxisBox {
    pub lb: DVector<f64>,
    pub ub: DVector<f64>,
}

impl AxisBox {
    pub fn new(lb: DVector<f64>, ub: DVector<f64>) -> Result<Self, GeometryError> {
        if lb.len() != ub.len() {
            return Err(GeometryError::Dimension {
                expected: lb.len(),
                got: ub.len(),
            });
        }
        assert!(
            lb.iter().zip(ub.iter()).all(|(l, u)| l <= u),
            "box lower bound exceeds upper bound"
        );
        Ok(Self { lb, ub })
    }

    /// The box `[-r, r]`.
    pub fn symmetric(radius: &DVector<f64>) -> Self {
        Self {
            lb: -radius,
            ub: radius.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lb.len()
    }

    pub fn center(&self) -> DVector<f64> {
        (&self.lb + &self.ub) * 0.5
    }

    pub fn half_widths(&self) -> DVector<f64> {
        (&self.ub - &self.lb) * 0.5
    }
}

/// `{x : a_i·x ≤ b_i ∀ i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpaceRep {
    pub normals: Vec<DVector<f64>>,
    pub offsets: Vec<f64>,
    /// The set is flat (lower-dimensional).
    pub degenerate: bool,
    /// The set is deliberately unbounded (cones).
    pub unbounded: bool,
}

impl HalfSpaceRep {
    pub fn new(normals: Vec<DVector<f64>>, offsets: Vec<f64>) -> Self {
        assert_eq!(normals.len(), offsets.len());
        Self {
            normals,
            offsets,
            degenerate: false,
            unbounded: false,
        }
    }

    pub fn len(&self) -> usize {
        self.normals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normals.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.normals.first().map(|a| a.len())
    }

    /// Largest violation `max_i (a_i·x − b_i)/‖a_i‖`; non-positive inside.
    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        self.normals
            .iter()
            .zip(&self.offsets)
            .map(|(a, b)| (a.dot(x) - b) / a.norm())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        self.normals.iter().zip(&self.offsets).all(|(a, b)| a.dot(x) <= b + tol)
    }

    /// Concatenates two sets of inequalities.
    pub fn concat(&self, other: &HalfSpaceRep) -> HalfSpaceRep {
        let mut out = self.clone();
        out.normals.extend(other.normals.iter().cloned());
        out.offsets.extend(other.offsets.iter().copied());
        out.unbounded = self.unbounded && other.unbounded;
        out.degenerate = self.degenerate || other.degenerate;
        out
    }

    pub(crate) fn scale(&self) -> f64 {
        self.normals
            .iter()
            .zip(&self.offsets)
            .map(|(a, b)| (b / a.norm()).abs())
            .fold(1.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VertexRep {
    pub vertices: Vec<DVector<f64>>,
}

impl VertexRep {
    /// Wraps vertices that are already known to be extreme points.
    pub fn new(vertices: Vec<DVector<f64>>) -> Self {
        Self { vertices }
    }

    /// Reduces an arbitrary point cloud to its extreme points.
    pub fn from_points(points: &[DVector<f64>]) -> Self {
        Self {
            vertices: extreme_points(points),
        }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn centroid(&self) -> Option<DVector<f64>> {
        let first = self.vertices.first()?;
        let sum = self.vertices.iter().skip(1).fold(first.clone(), |acc, v| acc + v);
        Some(sum / self.vertices.len() as f64)
    }

    pub(crate) fn scale(&self) -> f64 {
        self.vertices.iter().map(|v| v.amax()).fold(1.0, f64::max)
    }
}

/// A convex polytope with at least one of its two representations.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    dim: usize,
    hrep: Option<HalfSpaceRep>,
    vrep: Option<VertexRep>,
    degenerate: bool,
    empty: bool,
}

impl Polytope {
    pub fn from_hrep(hrep: HalfSpaceRep) -> Self {
        let dim = hrep.dim().unwrap_or(0);
        let degenerate = hrep.degenerate;
        Self {
            dim,
            hrep: Some(hrep),
            vrep: None,
            degenerate,
            empty: false,
        }
    }

    /// Builds from a point cloud; points are reduced to extreme points.
    pub fn from_points(dim: usize, points: &[DVector<f64>]) -> Self {
        let vrep = VertexRep::from_points(points);
        let empty = vrep.is_empty();
        let degenerate = !empty && affine_rank(&vrep.vertices) < dim;
        Self {
            dim,
            hrep: None,
            vrep: Some(vrep),
            degenerate,
            empty,
        }
    }

    pub(crate) fn from_parts(dim: usize, hrep: HalfSpaceRep, vrep: VertexRep, degenerate: bool) -> Self {
        let empty = vrep.is_empty();
        Self {
            dim,
            hrep: Some(hrep),
            vrep: Some(vrep),
            degenerate: degenerate || empty,
            empty,
        }
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            hrep: None,
            vrep: Some(VertexRep::default()),
            degenerate: true,
            empty: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hrep(&self) -> Option<&HalfSpaceRep> {
        self.hrep.as_ref()
    }

    pub fn vrep(&self) -> Option<&VertexRep> {
        self.vrep.as_ref()
    }

    /// True when the polytope has no interior (flat, a point, or empty).
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn is_empty(&self) -> bool {
        self.empty
    }

    /// Returns a polytope that carries a half-space representation.
    pub fn with_hrep(&self) -> Polytope {
        if self.hrep.is_some() {
            return self.clone();
        }
        let vrep = self.vrep.as_ref().expect("polytope has a representation");
        let mut hrep = facets_from_vertices(self.dim, &vrep.vertices);
        hrep.degenerate = self.degenerate;
        Polytope {
            hrep: Some(hrep),
            ..self.clone()
        }
    }

    /// Returns a polytope that carries a vertex representation.
    pub fn with_vrep(&self) -> Result<Polytope, GeometryError> {
        if self.vrep.is_some() {
            return Ok(self.clone());
        }
        let hrep = self.hrep.as_ref().expect("polytope has a representation");
        let vrep = enumerate_vertices(hrep)?;
        let empty = vrep.is_empty();
        let degenerate = self.degenerate || empty || affine_rank(&vrep.vertices) < self.dim;
        Ok(Polytope {
            vrep: Some(vrep),
            degenerate,
            empty,
            ..self.clone()
        })
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        if self.empty {
            return false;
        }
        match &self.hrep {
            Some(h) => h.contains(x, tol),
            None => self.with_hrep().contains(x, tol),
        }
    }
}

/// Radius of the largest ball centered at `center` that fits inside `p`.
/// Zero for exterior or boundary centers and for polytopes without interior.
pub fn inscribed_radius_at(p: &Polytope, center: &DVector<f64>) -> f64 {
    if p.is_empty() || p.is_degenerate() {
        return 0.0;
    }
    let owned;
    let hrep = match p.hrep() {
        Some(h) => h,
        None => {
            owned = p.with_hrep();
            owned.hrep().unwrap()
        }
    };
    let r = hrep
        .normals
        .iter()
        .zip(&hrep.offsets)
        .map(|(a, b)| (b - a.dot(center)) / a.norm())
        .fold(f64::INFINITY, f64::min);
    if r.is_finite() {
        r.max(0.0)
    } else {
        0.0
    }
}

pub(crate) fn to3(v: &DVector<f64>) -> Vector3<f64> {
    let mut out = Vector3::zeros();
    for (i, x) in v.iter().take(3).enumerate() {
        out[i] = *x;
    }
    out
}

pub(crate) fn from3(v: &Vector3<f64>, dim: usize) -> DVector<f64> {
    DVector::from_iterator(dim, v.iter().copied().take(dim))
}

/// Dimension of the affine hull of a point set (numerical, relative tolerance).
pub(crate) fn affine_rank(points: &[DVector<f64>]) -> usize {
    let Some(first) = points.first() else {
        return 0;
    };
    let dim = first.len();
    let cols: Vec<DVector<f64>> = points.iter().skip(1).map(|p| p - first).collect();
    if cols.is_empty() {
        return 0;
    }
    let mat = nalgebra::DMatrix::from_columns(&cols);
    let sv = mat.singular_values();
    let smax = sv.max();
    let scale = points.iter().map(|p| p.amax()).fold(1.0, f64::max);
    if smax <= MERGE_TOL * scale {
        return 0;
    }
    sv.iter().filter(|&&s| s > 1e-9 * smax.max(scale)).count().min(dim)
}

/// Merges points closer than `tol` (infinity norm), keeping first occurrences.
pub(crate) fn dedup_points(points: Vec<DVector<f64>>, tol: f64) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(points.len());
    for p in points {
        if !out.iter().any(|q| (q - &p).amax() <= tol) {
            out.push(p);
        }
    }
    out
}
