use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DVector, Vector3};

use super::zonotope::any_orthogonal;
use super::{from3, to3, GeometryError, HalfSpaceRep};

/// Default number of facets of the polyhedral approximation in 3-D.
pub const DEFAULT_CONE_FACETS: usize = 8;

/// Circular cone `{apex + s·d : s ≥ 0, ∠(d, axis) ≤ half_aperture}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cone {
    apex: DVector<f64>,
    axis: DVector<f64>,
    half_aperture: f64,
    facets: usize,
}

impl Cone {
    /// `axis` is normalized; it must be nonzero. `facets` is ignored in 2-D.
    pub fn new(
        apex: DVector<f64>,
        axis: DVector<f64>,
        half_aperture: f64,
        facets: usize,
    ) -> Result<Self, GeometryError> {
        let dim = apex.len();
        if !(2..=3).contains(&dim) {
            return Err(GeometryError::UnsupportedDim(dim));
        }
        if axis.len() != dim {
            return Err(GeometryError::Dimension {
                expected: dim,
                got: axis.len(),
            });
        }
        let norm = axis.norm();
        if !(norm > 1e-12) || !norm.is_finite() {
            return Err(GeometryError::InvalidCone("axis must be nonzero".into()));
        }
        if !(half_aperture > 0.0 && half_aperture < FRAC_PI_2) {
            return Err(GeometryError::InvalidCone(format!(
                "half-aperture {half_aperture} rad is outside (0, pi/2)"
            )));
        }
        if dim == 3 && facets < 3 {
            return Err(GeometryError::InvalidCone(format!(
                "need at least 3 facets, got {facets}"
            )));
        }
        Ok(Self {
            apex,
            axis: axis / norm,
            half_aperture,
            facets,
        })
    }

    pub fn apex(&self) -> &DVector<f64> {
        &self.apex
    }

    pub fn axis(&self) -> &DVector<f64> {
        &self.axis
    }

    pub fn half_aperture(&self) -> f64 {
        self.half_aperture
    }

    pub fn facets(&self) -> usize {
        self.facets
    }

    pub fn dim(&self) -> usize {
        self.apex.len()
    }
}

/// Inscribed polyhedral approximation of a cone. Every facet passes through the
/// apex and every edge ray makes exactly the half-aperture with the axis.
pub fn make_cone(cone: &Cone) -> HalfSpaceRep {
    let dim = cone.dim();
    let a = to3(&cone.axis);
    let apex = to3(&cone.apex);
    let theta = cone.half_aperture;
    let (c, s) = (theta.cos(), theta.sin());
    let rays: Vec<Vector3<f64>> = if dim == 2 {
        let side = Vector3::new(-a.y, a.x, 0.0);
        vec![a * c + side * s, a * c - side * s]
    } else {
        let e1 = any_orthogonal(&a);
        let e2 = a.cross(&e1);
        (0..cone.facets)
            .map(|j| {
                let phi = 2.0 * PI * j as f64 / cone.facets as f64;
                a * c + (e1 * phi.cos() + e2 * phi.sin()) * s
            })
            .collect()
    };
    let normals: Vec<Vector3<f64>> = if dim == 2 {
        rays.iter()
            .map(|r| {
                let n = Vector3::new(-r.y, r.x, 0.0);
                if n.dot(&a) > 0.0 {
                    -n
                } else {
                    n
                }
            })
            .collect()
    } else {
        (0..rays.len())
            .map(|j| {
                let n = rays[j].cross(&rays[(j + 1) % rays.len()]).normalize();
                if n.dot(&a) > 0.0 {
                    -n
                } else {
                    n
                }
            })
            .collect()
    };
    let offsets = normals.iter().map(|n| n.dot(&apex)).collect();
    HalfSpaceRep {
        normals: normals.iter().map(|n| from3(n, dim)).collect(),
        offsets,
        degenerate: false,
        unbounded: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_4;

    fn dv(x: &[f64]) -> DVector<f64> {
        DVector::from_vec(x.to_vec())
    }

    #[test]
    fn planar_quarter_cone() {
        let h = make_cone(&Cone::new(dv(&[0.0, 0.0]), dv(&[0.0, 1.0]), FRAC_PI_4, 8).unwrap());
        assert_eq!(h.len(), 2);
        assert!(h.unbounded);
        assert!(h.contains(&dv(&[0.0, 1.0]), 0.0));
        assert!(!h.contains(&dv(&[1.0, 0.0]), 1e-12));
        // atan(0.9) ≈ 42°.
        assert!(h.contains(&dv(&[0.9, 1.0]), 0.0));
    }

    #[test]
    fn rejects_bad_cones() {
        assert!(Cone::new(dv(&[0.0, 0.0]), dv(&[0.0, 1.0]), 0.0, 8).is_err());
        assert!(Cone::new(dv(&[0.0, 0.0]), dv(&[0.0, 1.0]), FRAC_PI_2, 8).is_err());
        assert!(Cone::new(dv(&[0.0, 0.0]), dv(&[0.0, 0.0]), 0.3, 8).is_err());
        assert!(Cone::new(dv(&[0.0, 0.0, 0.0]), dv(&[0.0, 0.0, 1.0]), 0.3, 2).is_err());
    }

    fn angle(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        (a.dot(b) / (a.norm() * b.norm())).clamp(-1.0, 1.0).acos()
    }

    proptest! {
        #[test]
        fn inscribed_cone_contains_axis_and_excludes_wide_rays(
            ax in proptest::collection::vec(-1.0f64..1.0, 3),
            apex in proptest::collection::vec(-5.0f64..5.0, 3),
            theta in 0.05f64..1.5,
            k in 3usize..12,
            dir in proptest::collection::vec(-1.0f64..1.0, 3),
            dim in 2usize..=3,
        ) {
            let axis = DVector::from_iterator(dim, ax.iter().copied().take(dim));
            prop_assume!(axis.norm() > 1e-3);
            let apex = DVector::from_iterator(dim, apex.iter().copied().take(dim));
            let cone = Cone::new(apex.clone(), axis.clone(), theta, k).unwrap();
            let h = make_cone(&cone);
            let unit = cone.axis().clone();
            prop_assert!(h.contains(&(&apex + &unit), 1e-9));
            for (n, b) in h.normals.iter().zip(&h.offsets) {
                prop_assert!((n.dot(&apex) - b).abs() < 1e-9);
            }
            let d = DVector::from_iterator(dim, dir.iter().copied().take(dim));
            prop_assume!(d.norm() > 1e-3);
            let ang = angle(&d, &unit);
            let point = &apex + &d / d.norm();
            if ang > theta + 1e-9 {
                prop_assert!(!h.contains(&point, 1e-12));
            }
            // The inscribed cone keeps every ray within theta·cos(pi/k) in 2-D exactly
            // and in 3-D down to the inscribed circular cone.
            let inner = if dim == 2 { theta } else { (theta.tan() * (PI / k as f64).cos()).atan() };
            if ang < inner - 1e-9 {
                prop_assert!(h.contains(&point, 1e-12));
            }
        }
    }
}
