use nalgebra::{DVector, Matrix2, Matrix3, Vector2, Vector3};

use super::{
    affine_rank, dedup_points, from3, to3, GeometryError, HalfSpaceRep, Polytope, VertexRep, DET_TOL, MEMBER_TOL,
    MERGE_TOL,
};

/// Row-normalized inequalities in 3-D storage (z = 0 for planar sets).
struct Rows {
    dim: usize,
    normals: Vec<Vector3<f64>>,
    offsets: Vec<f64>,
    tol: f64,
}

impl Rows {
    fn new(h: &HalfSpaceRep) -> Result<Self, GeometryError> {
        let dim = h.dim().unwrap_or(0);
        if !(2..=3).contains(&dim) {
            return Err(GeometryError::UnsupportedDim(dim));
        }
        let mut normals = Vec::with_capacity(h.len());
        let mut offsets = Vec::with_capacity(h.len());
        for (a, b) in h.normals.iter().zip(&h.offsets) {
            if a.len() != dim {
                return Err(GeometryError::Dimension {
                    expected: dim,
                    got: a.len(),
                });
            }
            let norm = a.norm();
            normals.push(to3(a) / norm);
            offsets.push(b / norm);
        }
        let tol = MEMBER_TOL * h.scale();
        Ok(Self {
            dim,
            normals,
            offsets,
            tol,
        })
    }

    fn feasible(&self, x: &Vector3<f64>) -> bool {
        self.normals
            .iter()
            .zip(&self.offsets)
            .all(|(a, b)| a.dot(x) <= b + self.tol)
    }

    /// True when some direction `d ≠ 0` has `a_i·d ≤ 0` for every row.
    fn has_recession_direction(&self) -> bool {
        let blocked = |d: &Vector3<f64>| self.normals.iter().any(|a| a.dot(d) > 1e-12);
        let k = self.normals.len();
        if self.dim == 2 {
            if k == 0 {
                return true;
            }
            (0..k).any(|i| {
                let a = self.normals[i];
                let d = Vector3::new(-a.y, a.x, 0.0);
                !blocked(&d) || !blocked(&-d)
            })
        } else {
            if k < 2 {
                return true;
            }
            let mut any_pair = false;
            for i in 0..k {
                for j in (i + 1)..k {
                    let c = self.normals[i].cross(&self.normals[j]);
                    let norm = c.norm();
                    if norm <= 1e-12 {
                        continue;
                    }
                    any_pair = true;
                    let d = c / norm;
                    if !blocked(&d) || !blocked(&-d) {
                        return true;
                    }
                }
            }
            !any_pair
        }
    }

    fn normal_rank(&self) -> usize {
        let cols: Vec<DVector<f64>> = self.normals.iter().map(|a| from3(a, self.dim)).collect();
        if cols.is_empty() {
            return 0;
        }
        let sv = nalgebra::DMatrix::from_columns(&cols).singular_values();
        sv.iter().filter(|&&s| s > 1e-9).count()
    }

    fn vertices(&self) -> Vec<Vector3<f64>> {
        let k = self.normals.len();
        let mut out = Vec::new();
        if self.dim == 2 {
            for i in 0..k {
                for j in (i + 1)..k {
                    let (a, c) = (self.normals[i], self.normals[j]);
                    let mat = Matrix2::new(a.x, a.y, c.x, c.y);
                    if mat.determinant().abs() < DET_TOL {
                        continue;
                    }
                    if let Some(inv) = mat.try_inverse() {
                        let x = inv * Vector2::new(self.offsets[i], self.offsets[j]);
                        let x = Vector3::new(x.x, x.y, 0.0);
                        if self.feasible(&x) {
                            out.push(x);
                        }
                    }
                }
            }
        } else {
            for i in 0..k {
                for j in (i + 1)..k {
                    let cij = self.normals[i].cross(&self.normals[j]);
                    if cij.norm() < DET_TOL {
                        continue;
                    }
                    for l in (j + 1)..k {
                        let det = cij.dot(&self.normals[l]);
                        if det.abs() < DET_TOL {
                            continue;
                        }
                        let mat = Matrix3::from_rows(&[
                            self.normals[i].transpose(),
                            self.normals[j].transpose(),
                            self.normals[l].transpose(),
                        ]);
                        if let Some(inv) = mat.try_inverse() {
                            let x = inv * Vector3::new(self.offsets[i], self.offsets[j], self.offsets[l]);
                            if self.feasible(&x) {
                                out.push(x);
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// Vertices of a bounded half-space set, by intersecting every facet m-tuple
/// and keeping the feasible points. An infeasible set yields no vertices.
pub fn enumerate_vertices(h: &HalfSpaceRep) -> Result<VertexRep, GeometryError> {
    let rows = Rows::new(h)?;
    if rows.normal_rank() < rows.dim || rows.has_recession_direction() {
        return Err(GeometryError::Unbounded);
    }
    let verts: Vec<DVector<f64>> = rows.vertices().iter().map(|v| from3(v, rows.dim)).collect();
    let scale = h.scale();
    Ok(VertexRep::new(dedup_points(verts, MERGE_TOL * scale)))
}

/// `P ∩ C` with redundant half-spaces removed. Returns the empty polytope when
/// the sets are disjoint.
pub fn intersect(p: &Polytope, c: &HalfSpaceRep) -> Polytope {
    let dim = p.dim();
    if p.is_empty() {
        return Polytope::empty(dim);
    }
    let with_h = p.with_hrep();
    let base = with_h.hrep().expect("hrep present");
    let joined = base.concat(c);
    let mut joined = HalfSpaceRep {
        unbounded: false,
        ..joined
    };
    let vrep = match enumerate_vertices(&joined) {
        Ok(v) => v,
        // P is bounded, so the joined set is too; only malformed input lands here.
        Err(_) => return Polytope::empty(dim),
    };
    if vrep.is_empty() {
        return Polytope::empty(dim);
    }
    let degenerate = p.is_degenerate() || affine_rank(&vrep.vertices) < dim;
    let tol = MEMBER_TOL * joined.scale().max(vrep.scale());
    let mut keep_n: Vec<DVector<f64>> = Vec::new();
    let mut keep_b: Vec<f64> = Vec::new();
    for (a, b) in joined.normals.iter().zip(&joined.offsets) {
        let norm = a.norm();
        let (an, bn) = (a / norm, b / norm);
        let support = vrep.vertices.iter().filter(|v| (an.dot(v) - bn).abs() <= tol).count();
        if !degenerate && support < dim {
            continue;
        }
        if keep_n
            .iter()
            .zip(&keep_b)
            .any(|(m, d)| (m - &an).amax() <= 1e-9 && (d - bn).abs() <= tol)
        {
            continue;
        }
        keep_n.push(an);
        keep_b.push(bn);
    }
    joined.normals = keep_n;
    joined.offsets = keep_b;
    joined.degenerate = degenerate;
    Polytope::from_parts(dim, joined, vrep, degenerate)
}
