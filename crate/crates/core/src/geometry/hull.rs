use nalgebra::{DVector, Matrix3xX, Vector2, Vector3};

use super::zonotope::any_orthogonal;
use super::{affine_rank, dedup_points, from3, to3, HalfSpaceRep, MEMBER_TOL, MERGE_TOL};

fn scale_of(points: &[Vector3<f64>]) -> f64 {
    points.iter().map(|p| p.amax()).fold(1.0, f64::max)
}

/// Counter-clockwise hull of planar points (Andrew's monotone chain), collinear
/// points dropped.
fn hull2(points: &[Vector2<f64>], tol: f64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| {
        points[a]
            .x
            .total_cmp(&points[b].x)
            .then(points[a].y.total_cmp(&points[b].y))
    });
    if idx.len() < 3 {
        return idx;
    }
    let cross = |o: usize, a: usize, b: usize| {
        let (o, a, b) = (points[o], points[a], points[b]);
        (a - o).perp(&(b - o))
    };
    let mut lower: Vec<usize> = Vec::new();
    for &i in &idx {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], i) <= tol {
            lower.pop();
        }
        lower.push(i);
    }
    let mut upper: Vec<usize> = Vec::new();
    for &i in idx.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], i) <= tol {
            upper.pop();
        }
        upper.push(i);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Orthonormal basis (e1, e2) of the plane with normal `u`, and the plane normal.
fn plane_basis(points: &[Vector3<f64>]) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
    let p0 = points[0];
    let cols: Vec<Vector3<f64>> = points.iter().map(|p| p - p0).collect();
    let svd = Matrix3xX::from_columns(&cols).svd(true, false);
    let u = svd.u.unwrap();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let e1 = u.column(order[0]).into_owned();
    let normal = u.column(order[2]).into_owned();
    (e1, normal.cross(&e1), normal)
}

/// Main direction of a collinear set.
fn line_direction(points: &[Vector3<f64>]) -> Vector3<f64> {
    let p0 = points[0];
    points
        .iter()
        .map(|p| p - p0)
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .map(|d| d.normalize())
        .unwrap_or_else(Vector3::x)
}

fn segment_ends(points: &[Vector3<f64>]) -> Vec<usize> {
    let dir = line_direction(points);
    let key = |i: &usize| dir.dot(&points[*i]);
    let lo = (0..points.len()).min_by(|a, b| key(a).total_cmp(&key(b))).unwrap();
    let hi = (0..points.len()).max_by(|a, b| key(a).total_cmp(&key(b))).unwrap();
    vec![lo, hi]
}

/// Supporting planes of a full-dimensional 3-D point set, as outward unit
/// normals with offsets, found by checking every point triple.
fn facets3(points: &[Vector3<f64>]) -> Vec<(Vector3<f64>, f64)> {
    let scale = scale_of(points);
    let tol = MEMBER_TOL * scale;
    let n = points.len();
    let mut facets: Vec<(Vector3<f64>, f64)> = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let a = points[j] - points[i];
            for k in (j + 1)..n {
                let c = a.cross(&(points[k] - points[i]));
                let norm = c.norm();
                if norm <= 1e-12 * scale * scale {
                    continue;
                }
                let nrm = c / norm;
                let b = nrm.dot(&points[i]);
                let (mut pos, mut neg) = (false, false);
                for p in points {
                    let s = nrm.dot(p) - b;
                    pos |= s > tol;
                    neg |= s < -tol;
                    if pos && neg {
                        break;
                    }
                }
                let oriented = match (pos, neg) {
                    (false, _) => (nrm, b),
                    (true, false) => (-nrm, -b),
                    _ => continue,
                };
                if !facets
                    .iter()
                    .any(|(m, d)| (m - oriented.0).amax() <= 1e-9 && (d - oriented.1).abs() <= tol)
                {
                    facets.push(oriented);
                }
            }
        }
    }
    facets
}

/// Extreme points of a point cloud in 2-D or 3-D (the minimal vertex set of its hull).
pub fn extreme_points(points: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let Some(first) = points.first() else {
        return Vec::new();
    };
    let dim = first.len();
    let scale = points.iter().map(|p| p.amax()).fold(1.0, f64::max);
    let uniq = dedup_points(points.to_vec(), MERGE_TOL * scale);
    let pts: Vec<Vector3<f64>> = uniq.iter().map(to3).collect();
    let keep: Vec<usize> = match affine_rank(&uniq) {
        0 => vec![0],
        1 => segment_ends(&pts),
        2 => {
            let (e1, e2, _) = if dim == 2 {
                (Vector3::x(), Vector3::y(), Vector3::z())
            } else {
                plane_basis(&pts)
            };
            let flat: Vec<Vector2<f64>> = pts.iter().map(|p| Vector2::new(e1.dot(p), e2.dot(p))).collect();
            hull2(&flat, MEMBER_TOL * scale * scale)
        }
        _ => {
            let facets = facets3(&pts);
            let tol = MEMBER_TOL * scale;
            (0..pts.len())
                .filter(|&i| facets.iter().filter(|(n, b)| (n.dot(&pts[i]) - b).abs() <= tol).count() >= 3)
                .collect()
        }
    };
    keep.into_iter().map(|i| uniq[i].clone()).collect()
}

/// Half-space representation of the hull of `points`. Flat hulls get a pair of
/// opposite half-spaces per missing dimension and are flagged degenerate.
pub fn facets_from_vertices(dim: usize, points: &[DVector<f64>]) -> HalfSpaceRep {
    let scale = points.iter().map(|p| p.amax()).fold(1.0, f64::max);
    let uniq = dedup_points(points.to_vec(), MERGE_TOL * scale);
    let pts: Vec<Vector3<f64>> = uniq.iter().map(to3).collect();
    let rank = affine_rank(&uniq);
    let mut normals: Vec<Vector3<f64>> = Vec::new();
    let mut offsets: Vec<f64> = Vec::new();
    let push_support = |n: Vector3<f64>, normals: &mut Vec<Vector3<f64>>, offsets: &mut Vec<f64>| {
        let b = pts.iter().map(|p| n.dot(p)).fold(f64::NEG_INFINITY, f64::max);
        normals.push(n);
        offsets.push(b);
    };
    if pts.is_empty() {
        return HalfSpaceRep {
            normals: Vec::new(),
            offsets: Vec::new(),
            degenerate: true,
            unbounded: false,
        };
    }
    match (dim, rank) {
        (_, 0) => {
            for e in [Vector3::x(), Vector3::y(), Vector3::z()].into_iter().take(dim) {
                push_support(e, &mut normals, &mut offsets);
                push_support(-e, &mut normals, &mut offsets);
            }
        }
        (_, 1) => {
            let d = line_direction(&pts);
            let e1 = if dim == 2 {
                Vector3::new(-d.y, d.x, 0.0)
            } else {
                any_orthogonal(&d)
            };
            let mut dirs = vec![d, e1];
            if dim == 3 {
                dirs.push(d.cross(&e1));
            }
            for n in dirs {
                push_support(n, &mut normals, &mut offsets);
                push_support(-n, &mut normals, &mut offsets);
            }
        }
        (2, _) | (3, 2) => {
            let (e1, e2, u) = if dim == 2 {
                (Vector3::x(), Vector3::y(), Vector3::z())
            } else {
                plane_basis(&pts)
            };
            let flat: Vec<Vector2<f64>> = pts.iter().map(|p| Vector2::new(e1.dot(p), e2.dot(p))).collect();
            let ring = hull2(&flat, MEMBER_TOL * scale * scale);
            for w in 0..ring.len() {
                let a = flat[ring[w]];
                let b = flat[ring[(w + 1) % ring.len()]];
                let edge = b - a;
                // Outward normal of a counter-clockwise edge.
                let n2 = Vector2::new(edge.y, -edge.x).normalize();
                push_support(e1 * n2.x + e2 * n2.y, &mut normals, &mut offsets);
            }
            if dim == 3 {
                push_support(u, &mut normals, &mut offsets);
                push_support(-u, &mut normals, &mut offsets);
            }
        }
        _ => {
            for (n, b) in facets3(&pts) {
                normals.push(n);
                offsets.push(b);
            }
        }
    }
    HalfSpaceRep {
        normals: normals.iter().map(|n| from3(n, dim)).collect(),
        offsets,
        degenerate: rank < dim,
        unbounded: false,
    }
}
