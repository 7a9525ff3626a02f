use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::ModelError;

/// Bounded planar rectangle `corner + s·edge_u + t·edge_v`, s, t ∈ [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RectangleDoc", into = "RectangleDoc")]
pub struct Rectangle {
    corner: Vector3<f64>,
    edge_u: Vector3<f64>,
    edge_v: Vector3<f64>,
}

#[derive(Serialize, Deserialize)]
struct RectangleDoc {
    corner: [f64; 3],
    edge_u: [f64; 3],
    edge_v: [f64; 3],
}

impl TryFrom<RectangleDoc> for Rectangle {
    type Error = ModelError;

    fn try_from(doc: RectangleDoc) -> Result<Self, Self::Error> {
        Rectangle::new(doc.corner.into(), doc.edge_u.into(), doc.edge_v.into())
    }
}

impl From<Rectangle> for RectangleDoc {
    fn from(r: Rectangle) -> Self {
        RectangleDoc {
            corner: r.corner.into(),
            edge_u: r.edge_u.into(),
            edge_v: r.edge_v.into(),
        }
    }
}

/// Distance from a point to a rectangle together with a (sub)gradient.
#[derive(Debug, Clone, Copy)]
pub struct RectangleDistance {
    pub distance: f64,
    pub closest: Vector3<f64>,
    /// ∂distance/∂p. On the surface itself the unit plane normal is used.
    pub gradient: Vector3<f64>,
}

impl Rectangle {
    pub fn new(corner: Vector3<f64>, edge_u: Vector3<f64>, edge_v: Vector3<f64>) -> Result<Self, ModelError> {
        if edge_u.norm() == 0.0 || edge_v.norm() == 0.0 {
            return Err(ModelError::Validation("rectangle edges must be nonzero".into()));
        }
        if edge_u.dot(&edge_v).abs() > 1e-9 {
            return Err(ModelError::Validation("rectangle edges must be orthogonal".into()));
        }
        Ok(Self { corner, edge_u, edge_v })
    }

    pub fn corner(&self) -> Vector3<f64> {
        self.corner
    }

    pub fn edge_u(&self) -> Vector3<f64> {
        self.edge_u
    }

    pub fn edge_v(&self) -> Vector3<f64> {
        self.edge_v
    }

    pub fn normal(&self) -> Vector3<f64> {
        self.edge_u.cross(&self.edge_v).normalize()
    }

    pub fn distance(&self, p: &Vector3<f64>) -> RectangleDistance {
        let d = p - self.corner;
        let s = (d.dot(&self.edge_u) / self.edge_u.norm_squared()).clamp(0.0, 1.0);
        let t = (d.dot(&self.edge_v) / self.edge_v.norm_squared()).clamp(0.0, 1.0);
        let closest = self.corner + self.edge_u * s + self.edge_v * t;
        let offset = p - closest;
        let distance = offset.norm();
        let gradient = if distance > 1e-14 {
            offset / distance
        } else {
            self.normal()
        };
        RectangleDistance {
            distance,
            closest,
            gradient,
        }
    }
}

/// Euclidean distance from `p` to the closest point of the bounded rectangle.
pub fn distance_to_rectangle(rect: &Rectangle, p: &Vector3<f64>) -> f64 {
    rect.distance(p).distance
}
