use std::ops::Range;

use nalgebra::{DVector, DVectorView};

/// Placement of the per-mesh-point blocks in the flat decision vector
/// `[q₀, v₀, τ₀, …, q_{N−1}, v_{N−1}, τ_{N−1}, q_N, v_N]` (zero-based mesh
/// indices; the final point carries no torque).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    dof: usize,
    segments: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Q,
    V,
    Tau,
}

impl Layout {
    pub fn new(dof: usize, segments: usize) -> Self {
        Self { dof, segments }
    }

    pub fn dof(&self) -> usize {
        self.dof
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    pub fn mesh_points(&self) -> usize {
        self.segments + 1
    }

    /// M·2n + N·n.
    pub fn len(&self) -> usize {
        self.mesh_points() * 2 * self.dof + self.segments * self.dof
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index range of `field` at mesh point `k`. Panics for τ at the final point.
    pub fn range(&self, k: usize, field: Field) -> Range<usize> {
        assert!(k < self.mesh_points(), "mesh index {k} out of range");
        let base = k * 3 * self.dof;
        let off = match field {
            Field::Q => 0,
            Field::V => self.dof,
            Field::Tau => {
                assert!(k < self.segments, "no torque at the final mesh point");
                2 * self.dof
            }
        };
        base + off..base + off + self.dof
    }

    pub fn q<'a>(&self, xi: &'a DVector<f64>, k: usize) -> DVectorView<'a, f64> {
        xi.rows_range(self.range(k, Field::Q))
    }

    pub fn v<'a>(&self, xi: &'a DVector<f64>, k: usize) -> DVectorView<'a, f64> {
        xi.rows_range(self.range(k, Field::V))
    }

    pub fn tau<'a>(&self, xi: &'a DVector<f64>, k: usize) -> DVectorView<'a, f64> {
        xi.rows_range(self.range(k, Field::Tau))
    }

    pub fn set(&self, xi: &mut DVector<f64>, k: usize, field: Field, value: &DVector<f64>) {
        xi.rows_range_mut(self.range(k, field)).copy_from(value);
    }

    /// Assembles ξ from per-point sequences (`tau` has one entry per segment).
    pub fn pack(&self, q: &[DVector<f64>], v: &[DVector<f64>], tau: &[DVector<f64>]) -> DVector<f64> {
        assert_eq!(q.len(), self.mesh_points());
        assert_eq!(v.len(), self.mesh_points());
        assert_eq!(tau.len(), self.segments);
        let mut xi = DVector::zeros(self.len());
        for k in 0..self.mesh_points() {
            self.set(&mut xi, k, Field::Q, &q[k]);
            self.set(&mut xi, k, Field::V, &v[k]);
            if k < self.segments {
                self.set(&mut xi, k, Field::Tau, &tau[k]);
            }
        }
        xi
    }

    #[allow(clippy::type_complexity)]
    pub fn unpack(&self, xi: &DVector<f64>) -> (Vec<DVector<f64>>, Vec<DVector<f64>>, Vec<DVector<f64>>) {
        let q = (0..self.mesh_points()).map(|k| self.q(xi, k).into_owned()).collect();
        let v = (0..self.mesh_points()).map(|k| self.v(xi, k).into_owned()).collect();
        let tau = (0..self.segments).map(|k| self.tau(xi, k).into_owned()).collect();
        (q, v, tau)
    }

    /// Box bounds on ξ from per-joint bounds on q, v and τ.
    pub fn bounds(
        &self,
        q: &(DVector<f64>, DVector<f64>),
        v: &(DVector<f64>, DVector<f64>),
        tau: &(DVector<f64>, DVector<f64>),
    ) -> (DVector<f64>, DVector<f64>) {
        let lo = self.pack(
            &vec![q.0.clone(); self.mesh_points()],
            &vec![v.0.clone(); self.mesh_points()],
            &vec![tau.0.clone(); self.segments],
        );
        let hi = self.pack(
            &vec![q.1.clone(); self.mesh_points()],
            &vec![v.1.clone(); self.mesh_points()],
            &vec![tau.1.clone(); self.segments],
        );
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lengths() {
        assert_eq!(Layout::new(3, 10).len(), 96);
        assert_eq!(Layout::new(3, 2).len(), 3 * 6 + 2 * 3);
        assert_eq!(Layout::new(7, 10).len(), 11 * 14 + 70);
    }

    #[test]
    fn ranges_tile_the_vector() {
        let l = Layout::new(2, 3);
        let mut seen = vec![0; l.len()];
        for k in 0..l.mesh_points() {
            let mut fields = vec![Field::Q, Field::V];
            if k < l.segments() {
                fields.push(Field::Tau);
            }
            for f in fields {
                for i in l.range(k, f) {
                    seen[i] += 1;
                }
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn pack_unpack_round_trip() {
        let l = Layout::new(2, 2);
        let xi = DVector::from_iterator(l.len(), (0..l.len()).map(|i| i as f64));
        let (q, v, t) = l.unpack(&xi);
        assert_eq!(l.pack(&q, &v, &t), xi);
        assert_eq!(q[1].as_slice(), &[6.0, 7.0]);
        assert_eq!(t[1].as_slice(), &[10.0, 11.0]);
        assert_eq!(v[2].as_slice(), &[14.0, 15.0]);
    }

    #[test]
    #[should_panic]
    fn no_final_torque() {
        Layout::new(2, 2).range(2, Field::Tau);
    }
}
