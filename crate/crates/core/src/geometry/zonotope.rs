use nalgebra::{DMatrix, DVector, Matrix3xX, Vector2, Vector3};

use super::{from3, AxisBox, HalfSpaceRep, Polytope, VertexRep, MERGE_TOL};

/// Generators below this norm (relative to the largest) are dropped.
const GEN_TOL: f64 = 1e-12;
/// Relative singular-value threshold for the rank of the generator matrix.
const RANK_TOL: f64 = 1e-10;
/// Sine of the angle under which two generators count as parallel.
const PARALLEL_TOL: f64 = 1e-12;

/// The zonotope `{A·x : x ∈ box}` with both representations.
///
/// # Panics
/// If `A` has more than 3 or fewer than 2 rows, or its column count differs
/// from the box dimension.
pub fn map_box(a: &DMatrix<f64>, bx: &AxisBox) -> Polytope {
    let m = a.nrows();
    assert!((2..=3).contains(&m), "map_box supports 2-D and 3-D images");
    assert_eq!(a.ncols(), bx.dim(), "map_box: matrix/box dimension mismatch");
    let half = bx.half_widths();
    let center = to3(&(a * bx.center()));
    let mut gens: Vec<Vector3<f64>> = (0..a.ncols()).map(|k| to3(&(a.column(k) * half[k]))).collect();
    let gmax = gens.iter().map(|g| g.norm()).fold(0.0, f64::max);
    gens.retain(|g| g.norm() > GEN_TOL * gmax.max(1e-300));
    Zonotope::new(m, center, gens).into_polytope()
}

fn to3<S: nalgebra::Storage<f64, nalgebra::Dyn>>(
    v: &nalgebra::Matrix<f64, nalgebra::Dyn, nalgebra::U1, S>,
) -> Vector3<f64> {
    let mut out = Vector3::zeros();
    for (i, x) in v.iter().take(3).enumerate() {
        out[i] = *x;
    }
    out
}

struct Zonotope {
    dim: usize,
    center: Vector3<f64>,
    /// Generators with parallel ones merged, oriented consistently.
    gens: Vec<Vector3<f64>>,
}

impl Zonotope {
    fn new(dim: usize, center: Vector3<f64>, raw: Vec<Vector3<f64>>) -> Self {
        let mut gens: Vec<Vector3<f64>> = Vec::new();
        for g in raw {
            match gens
                .iter_mut()
                .find(|h| h.cross(&g).norm() <= PARALLEL_TOL * h.norm() * g.norm())
            {
                Some(h) => {
                    if h.dot(&g) >= 0.0 {
                        *h += g;
                    } else {
                        *h -= g;
                    }
                }
                None => gens.push(g),
            }
        }
        Self { dim, center, gens }
    }

    fn scale(&self) -> f64 {
        self.gens.iter().map(|g| g.amax()).sum::<f64>() + self.center.amax() + 1.0
    }

    fn rank(&self) -> usize {
        if self.gens.is_empty() {
            return 0;
        }
        let mat = Matrix3xX::from_columns(&self.gens);
        let sv = mat.singular_values();
        let smax = sv.max();
        sv.iter().filter(|&&s| s > RANK_TOL * smax).count()
    }

    /// Unit normal of the plane holding all generators (rank-2 case in 3-D).
    fn plane_normal(&self) -> Vector3<f64> {
        let mut best = Vector3::zeros();
        for (i, a) in self.gens.iter().enumerate() {
            for b in &self.gens[i + 1..] {
                let c = a.cross(b) / (a.norm() * b.norm());
                if c.norm() > best.norm() {
                    best = c;
                }
            }
        }
        best.normalize()
    }

    fn support(&self, n: &Vector3<f64>) -> f64 {
        n.dot(&self.center) + self.gens.iter().map(|g| n.dot(g).abs()).sum::<f64>()
    }

    fn into_polytope(self) -> Polytope {
        let rank = self.rank();
        let degenerate = rank < self.dim;
        let vertices = match rank {
            0 => vec![self.center],
            1 => self.segment(),
            2 => {
                let normal = if self.dim == 2 {
                    Vector3::z()
                } else {
                    self.plane_normal()
                };
                planar_walk(&self.center, &self.gens, &normal)
            }
            _ => self.spatial_vertices(),
        };
        let tol = MERGE_TOL * self.scale();
        let mut verts: Vec<DVector<f64>> = Vec::with_capacity(vertices.len());
        for v in vertices {
            let v = from3(&v, self.dim);
            if !verts.iter().any(|w| (w - &v).amax() <= tol) {
                verts.push(v);
            }
        }
        let normals = self.facet_normals(rank);
        let offsets = normals.iter().map(|n| self.support(n)).collect();
        let mut hrep = HalfSpaceRep::new(normals.iter().map(|n| from3(n, self.dim)).collect(), offsets);
        hrep.degenerate = degenerate;
        Polytope::from_parts(self.dim, hrep, VertexRep::new(verts), degenerate)
    }

    fn segment(&self) -> Vec<Vector3<f64>> {
        let dir = self.gens[0];
        let total: Vector3<f64> = self.gens.iter().map(|g| if g.dot(&dir) >= 0.0 { *g } else { -g }).sum();
        vec![self.center - total, self.center + total]
    }

    fn spatial_vertices(&self) -> Vec<Vector3<f64>> {
        let k = self.gens.len();
        let mut out = Vec::new();
        for i in 0..k {
            for j in (i + 1)..k {
                let u = self.gens[i].cross(&self.gens[j]).normalize();
                let (inplane, outside): (Vec<usize>, Vec<usize>) =
                    (0..k).partition(|&l| u.dot(&self.gens[l].normalize()).abs() <= 1e-12);
                let face_gens: Vec<Vector3<f64>> = inplane.iter().map(|&l| self.gens[l]).collect();
                for s in [1.0, -1.0] {
                    let base = outside.iter().fold(self.center, |acc, &l| {
                        let g = self.gens[l];
                        acc + g * (s * u.dot(&g)).signum()
                    });
                    out.extend(planar_walk(&base, &face_gens, &u));
                }
            }
        }
        out
    }

    fn facet_normals(&self, rank: usize) -> Vec<Vector3<f64>> {
        let mut normals: Vec<Vector3<f64>> = Vec::new();
        let mut push = |n: Vector3<f64>| {
            let n = n.normalize();
            for cand in [n, -n] {
                if !normals.iter().any(|m| (m - cand).amax() <= 1e-12) {
                    normals.push(cand);
                }
            }
        };
        match (self.dim, rank) {
            (_, 0) => {
                for e in [Vector3::x(), Vector3::y(), Vector3::z()].iter().take(self.dim) {
                    push(*e);
                }
            }
            (2, 1) => {
                let g = self.gens[0];
                push(Vector3::new(-g.y, g.x, 0.0));
                push(g);
            }
            (2, _) => {
                for g in &self.gens {
                    push(Vector3::new(-g.y, g.x, 0.0));
                }
            }
            (3, 1) => {
                let g = self.gens[0].normalize();
                let e1 = any_orthogonal(&g);
                push(e1);
                push(g.cross(&e1));
                push(g);
            }
            (3, 2) => {
                let u = self.plane_normal();
                push(u);
                for g in &self.gens {
                    push(u.cross(g));
                }
            }
            _ => {
                let k = self.gens.len();
                for i in 0..k {
                    for j in (i + 1)..k {
                        push(self.gens[i].cross(&self.gens[j]));
                    }
                }
            }
        }
        normals
    }
}

/// A unit vector orthogonal to `v`, chosen deterministically.
pub(crate) fn any_orthogonal(v: &Vector3<f64>) -> Vector3<f64> {
    let (imin, _) = v.iter().enumerate().fold(
        (0, f64::INFINITY),
        |acc, (i, &x)| if x.abs() < acc.1 { (i, x.abs()) } else { acc },
    );
    let mut e = Vector3::zeros();
    e[imin] = 1.0;
    v.cross(&e).normalize()
}

/// Vertices of the 2-D zonotope `base + Σ [-1,1]·g` whose generators lie in the
/// plane with unit normal `normal`, in counter-clockwise order about `normal`.
fn planar_walk(base: &Vector3<f64>, gens: &[Vector3<f64>], normal: &Vector3<f64>) -> Vec<Vector3<f64>> {
    if gens.is_empty() {
        return vec![*base];
    }
    let e1 = gens[0].normalize();
    let e2 = normal.cross(&e1);
    // Orient each generator into the upper half-plane and sort by angle.
    let mut oriented: Vec<(f64, Vector3<f64>)> = gens
        .iter()
        .map(|g| {
            let p = Vector2::new(e1.dot(g), e2.dot(g));
            let (p, g) = if p.y < 0.0 || (p.y == 0.0 && p.x < 0.0) {
                (-p, -g)
            } else {
                (p, *g)
            };
            (p.y.atan2(p.x), g)
        })
        .collect();
    oriented.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut v = oriented.iter().fold(*base, |acc, (_, g)| acc - g);
    let mut out = Vec::with_capacity(2 * oriented.len());
    for (_, g) in &oriented {
        out.push(v);
        v += g * 2.0;
    }
    for (_, g) in &oriented {
        out.push(v);
        v -= g * 2.0;
    }
    out
}
