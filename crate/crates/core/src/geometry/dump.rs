//! Plain-text polytope dump: `v x y [z]` per vertex, `h a1 a2 [a3] b` per facet.

use std::fmt::Write;

use nalgebra::DVector;

use super::{HalfSpaceRep, Polytope, VertexRep};

pub fn dump_polytope(p: &Polytope) -> String {
    let mut out = String::new();
    if let Some(v) = p.vrep() {
        for x in &v.vertices {
            out.push('v');
            for c in x.iter() {
                let _ = write!(out, " {c}");
            }
            out.push('\n');
        }
    }
    if let Some(h) = p.hrep() {
        for (a, b) in h.normals.iter().zip(&h.offsets) {
            out.push('h');
            for c in a.iter() {
                let _ = write!(out, " {c}");
            }
            let _ = writeln!(out, " {b}");
        }
    }
    out
}

/// Reads a dump back. Returns `None` on malformed lines.
pub fn parse_dump(dim: usize, text: &str) -> Option<Polytope> {
    let mut verts = Vec::new();
    let mut normals = Vec::new();
    let mut offsets = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let mut parts = line.split_whitespace();
        let tag = parts.next()?;
        let nums: Vec<f64> = parts.map(str::parse).collect::<Result<_, _>>().ok()?;
        match (tag, nums.len()) {
            ("v", n) if n == dim => verts.push(DVector::from_vec(nums)),
            ("h", n) if n == dim + 1 => {
                offsets.push(nums[dim]);
                normals.push(DVector::from_row_slice(&nums[..dim]));
            }
            _ => return None,
        }
    }
    match (verts.is_empty(), normals.is_empty()) {
        (true, true) => Some(Polytope::empty(dim)),
        (false, true) => Some(Polytope::from_points(dim, &verts)),
        (true, false) => Some(Polytope::from_hrep(HalfSpaceRep::new(normals, offsets))),
        (false, false) => {
            let degenerate = super::affine_rank(&verts) < dim;
            let mut h = HalfSpaceRep::new(normals, offsets);
            h.degenerate = degenerate;
            Some(Polytope::from_parts(dim, h, VertexRep::new(verts), degenerate))
        }
    }
}
