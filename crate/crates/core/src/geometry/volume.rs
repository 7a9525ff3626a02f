use nalgebra::Vector3;

use super::{to3, Polytope, MEMBER_TOL};

/// Order coplanar points counter-clockwise about `normal` around their centroid.
fn ring(points: &[Vector3<f64>], normal: &Vector3<f64>) -> Vec<Vector3<f64>> {
    let n = points.len() as f64;
    let center = points.iter().sum::<Vector3<f64>>() / n;
    let e1 = (points[0] - center).normalize();
    let e2 = normal.cross(&e1);
    let mut keyed: Vec<(f64, Vector3<f64>)> = points
        .iter()
        .map(|p| {
            let d = p - center;
            (e2.dot(&d).atan2(e1.dot(&d)), *p)
        })
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    keyed.into_iter().map(|(_, p)| p).collect()
}

/// m-dimensional volume (area in 2-D). Zero for empty or flat polytopes.
pub fn volume(p: &Polytope) -> f64 {
    if p.is_empty() || p.is_degenerate() {
        return 0.0;
    }
    let with_v = match p.with_vrep() {
        Ok(q) => q,
        Err(_) => return 0.0,
    };
    if with_v.is_degenerate() {
        return 0.0;
    }
    let verts: Vec<Vector3<f64>> = with_v.vrep().unwrap().vertices.iter().map(to3).collect();
    let centroid = verts.iter().sum::<Vector3<f64>>() / verts.len() as f64;
    if p.dim() == 2 {
        let ordered = ring(&verts, &Vector3::z());
        return (0..ordered.len())
            .map(|i| {
                let a = ordered[i] - centroid;
                let b = ordered[(i + 1) % ordered.len()] - centroid;
                0.5 * (a.x * b.y - a.y * b.x)
            })
            .sum::<f64>()
            .abs();
    }
    let with_h = with_v.with_hrep();
    let h = with_h.hrep().unwrap();
    let scale = verts.iter().map(|v| v.amax()).fold(1.0, f64::max);
    let tol = MEMBER_TOL * scale.max(h.scale());
    let mut seen: Vec<(Vector3<f64>, f64)> = Vec::new();
    let mut total = 0.0;
    for (a, b) in h.normals.iter().zip(&h.offsets) {
        let norm = a.norm();
        let (n, off) = (to3(a) / norm, b / norm);
        if seen
            .iter()
            .any(|(m, d)| (m - n).amax() <= 1e-9 && (d - off).abs() <= tol)
        {
            continue;
        }
        seen.push((n, off));
        let face: Vec<Vector3<f64>> = verts
            .iter()
            .copied()
            .filter(|v| (n.dot(v) - off).abs() <= tol)
            .collect();
        if face.len() < 3 {
            continue;
        }
        let ordered = ring(&face, &n);
        let fc = face.iter().sum::<Vector3<f64>>() / face.len() as f64;
        for i in 0..ordered.len() {
            let a = ordered[i] - centroid;
            let b = ordered[(i + 1) % ordered.len()] - centroid;
            total += (a.cross(&b).dot(&(fc - centroid))).abs() / 6.0;
        }
    }
    total
}
