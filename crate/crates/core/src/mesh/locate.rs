use super::{Mesh, Point};

/// Barycentric tolerance for accepting a point as inside a triangle.
const INSIDE_TOL: f64 = 1e-11;

/// A location inside the mesh: containing triangle and barycentric weights.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FePoint {
    pub triangle: usize,
    pub bary: [f64; 3],
}

impl FePoint {
    /// Position reconstructed from the barycentric weights.
    pub fn position(&self, mesh: &Mesh) -> Point {
        let v = mesh.triangle_vertices(self.triangle);
        v[0] * self.bary[0] + v[1] * self.bary[1] + v[2] * self.bary[2]
    }

    /// Node indices paired with their interpolation weights.
    pub fn weights(&self, mesh: &Mesh) -> [(usize, f64); 3] {
        let t = mesh.triangles()[self.triangle];
        [(t[0], self.bary[0]), (t[1], self.bary[1]), (t[2], self.bary[2])]
    }
}

/// Barycentric coordinates of `p` with respect to the triangle `abc`.
pub(crate) fn barycentric(p: Point, a: Point, b: Point, c: Point) -> [f64; 3] {
    let det = (b - a).cross(c - a);
    let l1 = (p - a).cross(c - a) / det;
    let l2 = (b - a).cross(p - a) / det;
    [1.0 - l1 - l2, l1, l2]
}

/// Uniform background grid over the bounding box; each bucket lists the
/// triangles whose bounding box meets it.
#[derive(Clone, Debug)]
pub(crate) struct BucketGrid {
    origin: Point,
    cell: Point,
    nx: usize,
    ny: usize,
    start: Vec<usize>,
    items: Vec<usize>,
}

impl BucketGrid {
    pub(crate) fn new(nodes: &[Point], triangles: &[[usize; 3]]) -> Self {
        let (mut lo, mut hi) = (Point::new(f64::MAX, f64::MAX), Point::new(f64::MIN, f64::MIN));
        for p in nodes {
            lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        let pad = 1e-9 * (1.0 + (hi - lo).norm());
        lo = lo - Point::new(pad, pad);
        hi = hi + Point::new(pad, pad);
        let side = ((triangles.len() as f64).sqrt().ceil() as usize).max(1);
        let (nx, ny) = (side, side);
        let cell = Point::new((hi.x - lo.x) / nx as f64, (hi.y - lo.y) / ny as f64);
        let mut grid = BucketGrid {
            origin: lo,
            cell,
            nx,
            ny,
            start: Vec::new(),
            items: Vec::new(),
        };

        let ranges: Vec<_> = triangles
            .iter()
            .map(|t| {
                let v = t.map(|i| nodes[i]);
                let bl = Point::new(v[0].x.min(v[1].x).min(v[2].x), v[0].y.min(v[1].y).min(v[2].y));
                let tr = Point::new(v[0].x.max(v[1].x).max(v[2].x), v[0].y.max(v[1].y).max(v[2].y));
                let (i0, j0) = grid.cell_of(bl - Point::new(pad, pad));
                let (i1, j1) = grid.cell_of(tr + Point::new(pad, pad));
                (i0, j0, i1, j1)
            })
            .collect();
        let mut counts = vec![0usize; nx * ny + 1];
        for &(i0, j0, i1, j1) in &ranges {
            for j in j0..=j1 {
                for i in i0..=i1 {
                    counts[j * nx + i + 1] += 1;
                }
            }
        }
        for k in 1..counts.len() {
            counts[k] += counts[k - 1];
        }
        let mut fill = counts.clone();
        let mut items = vec![0; counts[nx * ny]];
        for (t, &(i0, j0, i1, j1)) in ranges.iter().enumerate() {
            for j in j0..=j1 {
                for i in i0..=i1 {
                    let b = j * nx + i;
                    items[fill[b]] = t;
                    fill[b] += 1;
                }
            }
        }
        grid.start = counts;
        grid.items = items;
        grid
    }

    fn cell_of(&self, p: Point) -> (usize, usize) {
        let fx = ((p.x - self.origin.x) / self.cell.x).floor();
        let fy = ((p.y - self.origin.y) / self.cell.y).floor();
        (
            (fx.max(0.0) as usize).min(self.nx - 1),
            (fy.max(0.0) as usize).min(self.ny - 1),
        )
    }

    /// Triangle containing `p` (up to a small barycentric tolerance).
    ///
    /// Among candidates, the one with the largest minimal barycentric
    /// coordinate wins; its coordinates are clipped to `[0,1]` and
    /// renormalized.
    pub(crate) fn locate(&self, mesh: &Mesh, p: Point) -> Option<FePoint> {
        let fx = (p.x - self.origin.x) / self.cell.x;
        let fy = (p.y - self.origin.y) / self.cell.y;
        if !(fx >= -1e-9 && fy >= -1e-9 && fx <= self.nx as f64 + 1e-9 && fy <= self.ny as f64 + 1e-9) {
            return None;
        }
        let (i, j) = self.cell_of(p);
        let b = j * self.nx + i;
        let mut best: Option<(f64, FePoint)> = None;
        for &t in &self.items[self.start[b]..self.start[b + 1]] {
            let [a, bb, c] = mesh.triangle_vertices(t);
            let bary = barycentric(p, a, bb, c);
            let min = bary[0].min(bary[1]).min(bary[2]);
            if min >= -INSIDE_TOL && best.as_ref().is_none_or(|(m, _)| min > *m) {
                best = Some((min, FePoint { triangle: t, bary }));
                if min >= 0.0 {
                    break;
                }
            }
        }
        best.map(|(_, mut fp)| {
            if fp.bary.iter().any(|&l| l < 0.0) {
                let mut s = 0.0;
                for l in &mut fp.bary {
                    *l = l.max(0.0);
                    s += *l;
                }
                for l in &mut fp.bary {
                    *l /= s;
                }
            }
            fp
        })
    }
}

/// A continuous piecewise linear function given by its nodal values.
#[derive(Clone, Debug)]
pub struct FeFunction<'m> {
    mesh: &'m Mesh,
    values: Vec<f64>,
}

impl<'m> FeFunction<'m> {
    /// # Panics
    /// If `values.len()` differs from the node count.
    pub fn new(mesh: &'m Mesh, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), mesh.num_nodes(), "one value per node");
        FeFunction { mesh, values }
    }

    pub fn zeros(mesh: &'m Mesh) -> Self {
        FeFunction::new(mesh, vec![0.0; mesh.num_nodes()])
    }

    pub fn mesh(&self) -> &'m Mesh {
        self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at_node(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn at(&self, p: &FePoint) -> f64 {
        p.weights(self.mesh).iter().map(|&(i, w)| w * self.values[i]).sum()
    }

    /// Value at `x`. Points of Ω \ Ω_h take the value at their clamped image,
    /// which extends the function constantly along boundary normals.
    pub fn eval(&self, x: Point) -> crate::Result<f64> {
        Ok(self.at(&self.mesh.locate_point(x)?))
    }

    /// Gradient on triangle `t` (constant per element).
    pub fn gradient(&self, t: usize) -> Point {
        let tri = self.mesh.triangles()[t];
        let [a, b, c] = tri.map(|v| self.mesh.node(v));
        let [ua, ub, uc] = tri.map(|v| self.values[v]);
        let det = (b - a).cross(c - a);
        let e1 = b - a;
        let e2 = c - a;
        let d1 = ub - ua;
        let d2 = uc - ua;
        Point::new((d1 * e2.y - d2 * e1.y) / det, (d2 * e1.x - d1 * e2.x) / det)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}
