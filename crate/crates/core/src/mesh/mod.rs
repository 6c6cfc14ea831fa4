//! Triangular meshes of the test domain and P1 finite element functions.

mod generate;
mod geometry;
mod locate;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub use generate::{build_domain_mesh, coarse_mesh, COARSE_TARGET_H};
pub use geometry::{closest_on_segment, DomainGeometry, Point};
pub use locate::{FeFunction, FePoint};

use locate::BucketGrid;

/// Tolerance for boundary nodes lying on ∂Ω.
pub const BOUNDARY_TOL: f64 = 1e-10;

/// A conforming triangulation `Ω_h` with its boundary nodes on ∂Ω.
///
/// Immutable after construction. Triangles are stored counter-clockwise.
#[derive(Clone, Debug)]
pub struct Mesh {
    geometry: DomainGeometry,
    nodes: Vec<Point>,
    boundary: Vec<bool>,
    triangles: Vec<[usize; 3]>,
    node_triangles: Vec<Vec<usize>>,
    diameters: Vec<f64>,
    h_max: f64,
    h_avg: f64,
    /// Edges with a single incident triangle, oriented with Ω_h on the left.
    boundary_edges: Vec<[usize; 2]>,
    interior_nodes: Vec<usize>,
    locator: BucketGrid,
}

impl Mesh {
    /// Builds a mesh from raw connectivity, orienting triangles
    /// counter-clockwise and checking the structural invariants.
    pub fn from_parts(
        geometry: DomainGeometry,
        nodes: Vec<Point>,
        boundary: Vec<bool>,
        mut triangles: Vec<[usize; 3]>,
    ) -> Result<Self> {
        let n = nodes.len();
        if boundary.len() != n {
            return Err(Error::InvalidMesh(format!(
                "{} boundary flags for {} nodes",
                boundary.len(),
                n
            )));
        }
        if triangles.is_empty() {
            return Err(Error::InvalidMesh("no triangles".into()));
        }
        for (t, tri) in triangles.iter_mut().enumerate() {
            if tri.iter().any(|&v| v >= n) {
                return Err(Error::InvalidMesh(format!("triangle {t} references a missing node")));
            }
            let area2 = signed_area2(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
            if area2 < 0.0 {
                tri.swap(1, 2);
            } else if area2 == 0.0 {
                return Err(Error::InvalidMesh(format!("triangle {t} is degenerate")));
            }
        }

        let mut edge_count: HashMap<(usize, usize), (usize, [usize; 2])> = HashMap::new();
        for tri in &triangles {
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                let entry = edge_count.entry((a.min(b), a.max(b))).or_insert((0, [a, b]));
                entry.0 += 1;
            }
        }
        let mut boundary_edges = Vec::new();
        for (&(a, b), &(count, oriented)) in &edge_count {
            match count {
                1 => boundary_edges.push(oriented),
                2 => {}
                _ => {
                    return Err(Error::InvalidMesh(format!(
                        "edge ({a}, {b}) shared by {count} triangles"
                    )))
                }
            }
        }
        boundary_edges.sort_unstable();
        for e in &boundary_edges {
            for &v in e {
                if !boundary[v] {
                    return Err(Error::InvalidMesh(format!(
                        "node {v} lies on a boundary edge but is not flagged"
                    )));
                }
            }
        }

        let mut node_triangles = vec![Vec::new(); n];
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                node_triangles[v].push(t);
            }
        }
        if let Some(v) = node_triangles.iter().position(Vec::is_empty) {
            return Err(Error::InvalidMesh(format!("node {v} belongs to no triangle")));
        }

        let diameters: Vec<f64> = triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|v| nodes[v]);
                a.dist(b).max(b.dist(c)).max(c.dist(a))
            })
            .collect();
        let h_max = diameters.iter().cloned().fold(0.0, f64::max);
        let h_avg = diameters.iter().sum::<f64>() / diameters.len() as f64;
        let interior_nodes = (0..n).filter(|&i| !boundary[i]).collect();
        let locator = BucketGrid::new(&nodes, &triangles);

        Ok(Mesh {
            geometry,
            nodes,
            boundary,
            triangles,
            node_triangles,
            diameters,
            h_max,
            h_avg,
            boundary_edges,
            interior_nodes,
            locator,
        })
    }

    pub fn geometry(&self) -> DomainGeometry {
        self.geometry
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> Point {
        self.nodes[i]
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.boundary[i]
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn triangle_vertices(&self, t: usize) -> [Point; 3] {
        self.triangles[t].map(|v| self.nodes[v])
    }

    pub fn node_triangles(&self, i: usize) -> &[usize] {
        &self.node_triangles[i]
    }

    /// Diameter of each triangle (the mesh function `h`).
    pub fn diameters(&self) -> &[f64] {
        &self.diameters
    }

    /// Largest triangle diameter.
    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    /// Mean triangle diameter.
    pub fn h_avg(&self) -> f64 {
        self.h_avg
    }

    pub fn boundary_edges(&self) -> &[[usize; 2]] {
        &self.boundary_edges
    }

    /// Indices of nodes not on ∂Ω, in increasing order.
    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior_nodes
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_vertices(t);
        0.5 * signed_area2(a, b, c)
    }

    /// Checks the geometric invariants: positive areas, boundary nodes on
    /// ∂Ω, all nodes in Ω̄.
    pub fn validate(&self) -> Result<()> {
        for t in 0..self.triangles.len() {
            if self.triangle_area(t) <= 0.0 {
                return Err(Error::InvalidMesh(format!("triangle {t} has non-positive area")));
            }
        }
        for (i, &p) in self.nodes.iter().enumerate() {
            let sd = self.geometry.signed_distance(p);
            if self.boundary[i] && sd.abs() > BOUNDARY_TOL {
                return Err(Error::InvalidMesh(format!(
                    "boundary node {i} is {sd:e} away from the domain boundary"
                )));
            }
            if sd > 1e-12 {
                return Err(Error::InvalidMesh(format!("node {i} lies outside the domain")));
            }
        }
        Ok(())
    }

    /// Splits every triangle into four at its edge midpoints. Midpoints of
    /// boundary edges are projected onto ∂Ω. Node indices of `self` are kept.
    pub fn refine_uniform(&self) -> Result<Mesh> {
        let mut nodes = self.nodes.clone();
        let mut boundary = self.boundary.clone();
        let boundary_set: std::collections::HashSet<(usize, usize)> = self
            .boundary_edges
            .iter()
            .map(|&[a, b]| (a.min(b), a.max(b)))
            .collect();
        let mut midpoints: HashMap<(usize, usize), usize> =
            HashMap::with_capacity(self.triangles.len() * 3 / 2 + self.boundary_edges.len());
        let mut midpoint = |a: usize, b: usize, nodes: &mut Vec<Point>, boundary: &mut Vec<bool>| {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                let mut p = nodes[a].lerp(nodes[b], 0.5);
                let on_boundary = boundary_set.contains(&key);
                if on_boundary {
                    p = self.geometry.project(p);
                }
                nodes.push(p);
                boundary.push(on_boundary);
                nodes.len() - 1
            })
        };
        let mut triangles = Vec::with_capacity(self.triangles.len() * 4);
        for &[a, b, c] in &self.triangles {
            let ab = midpoint(a, b, &mut nodes, &mut boundary);
            let bc = midpoint(b, c, &mut nodes, &mut boundary);
            let ca = midpoint(c, a, &mut nodes, &mut boundary);
            triangles.push([a, ab, ca]);
            triangles.push([ab, b, bc]);
            triangles.push([ca, bc, c]);
            triangles.push([ab, bc, ca]);
        }
        Mesh::from_parts(self.geometry, nodes, boundary, triangles)
    }

    /// Applies `levels` uniform refinements.
    pub fn refined(&self, levels: usize) -> Result<Mesh> {
        let mut mesh = self.clone();
        for _ in 0..levels {
            mesh = mesh.refine_uniform()?;
        }
        Ok(mesh)
    }

    /// Containing triangle and barycentric coordinates of `x`.
    ///
    /// Points outside Ω̄_h are first clamped with [`Mesh::clamp_to_domain`].
    pub fn locate_point(&self, x: Point) -> Result<FePoint> {
        if let Some(p) = self.locator.locate(self, x) {
            return Ok(p);
        }
        let clamped = self.clamp_to_domain(x);
        self.locator
            .locate(self, clamped)
            .ok_or(Error::PointOutsideDomain { x: x.x, y: x.y })
    }

    /// Like [`Mesh::locate_point`] without clamping; `None` outside Ω̄_h.
    pub fn try_locate(&self, x: Point) -> Option<FePoint> {
        self.locator.locate(self, x)
    }

    /// Returns `x` if it lies in Ω̄_h, else the nearest point on the
    /// boundary edges of Ω_h.
    pub fn clamp_to_domain(&self, x: Point) -> Point {
        if self.locator.locate(self, x).is_some() {
            return x;
        }
        self.nearest_boundary_point(x).0
    }

    /// Nearest point on ∂Ω_h and its distance, by scanning all boundary edges.
    pub fn nearest_boundary_point(&self, x: Point) -> (Point, f64) {
        let mut best = (x, f64::INFINITY);
        for &[a, b] in &self.boundary_edges {
            let q = closest_on_segment(x, self.nodes[a], self.nodes[b]);
            let d = q.dist(x);
            if d < best.1 {
                best = (q, d);
            }
        }
        best
    }

    /// Nodal interpolant of `u`.
    pub fn interpolate(&self, u: impl Fn(Point) -> f64) -> FeFunction<'_> {
        FeFunction::new(self, self.nodes.iter().map(|&p| u(p)).collect())
    }

    /// Writes the text format: header `J T`, then `x y boundary_flag` per
    /// node, then `i j k` per triangle (0-based).
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(40 * (self.nodes.len() + self.triangles.len()));
        let _ = writeln!(s, "{} {}", self.nodes.len(), self.triangles.len());
        for (p, &b) in self.nodes.iter().zip(&self.boundary) {
            let _ = writeln!(s, "{} {} {}", p.x, p.y, u8::from(b));
        }
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        s
    }

    pub fn from_text(geometry: DomainGeometry, text: &str) -> Result<Mesh> {
        let err = |detail: String| Error::Parse {
            what: "mesh".into(),
            detail,
        };
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| err("empty input".into()))?;
        let counts: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| err(format!("header: {e}")))?;
        let [j, t] = counts[..] else {
            return Err(err(format!("header must be `J T`, got `{header}`")));
        };
        let mut nodes = Vec::with_capacity(j);
        let mut boundary = Vec::with_capacity(j);
        for i in 0..j {
            let line = lines.next().ok_or_else(|| err(format!("missing node line {i}")))?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(err(format!("node line {i}: expected `x y flag`")));
            }
            let x: f64 = f[0].parse().map_err(|e| err(format!("node {i}: {e}")))?;
            let y: f64 = f[1].parse().map_err(|e| err(format!("node {i}: {e}")))?;
            let b = match f[2] {
                "0" => false,
                "1" => true,
                other => return Err(err(format!("node {i}: bad boundary flag `{other}`"))),
            };
            nodes.push(Point::new(x, y));
            boundary.push(b);
        }
        let mut triangles = Vec::with_capacity(t);
        for k in 0..t {
            let line = lines.next().ok_or_else(|| err(format!("missing triangle line {k}")))?;
            let v: Vec<usize> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| err(format!("triangle {k}: {e}")))?;
            let [a, b, c] = v[..] else {
                return Err(err(format!("triangle line {k}: expected `i j k`")));
            };
            triangles.push([a, b, c]);
        }
        Mesh::from_parts(geometry, nodes, boundary, triangles)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(geometry: DomainGeometry, path: &Path) -> Result<Mesh> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Mesh::from_text(geometry, &text)
    }
}

/// Twice the signed area of the triangle `abc`.
pub(crate) fn signed_area2(a: Point, b: Point, c: Point) -> f64 {
    (b - a).cross(c - a)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_triangle() -> Mesh {
        Mesh::from_parts(
            DomainGeometry::UnitDisk,
            vec![
                Point::new(1.0, 0.0),
                Point::new(-0.5, 3f64.sqrt() / 2.0),
                Point::new(-0.5, -(3f64.sqrt()) / 2.0),
            ],
            vec![true; 3],
            vec![[0, 2, 1]],
        )
        .unwrap()
    }

    #[test]
    fn from_parts_orients_counter_clockwise() {
        let m = single_triangle();
        assert!(m.triangle_area(0) > 0.0);
        assert_eq!(m.boundary_edges().len(), 3);
    }

    #[test]
    fn one_triangle_refines_to_four() {
        let m = single_triangle().refine_uniform().unwrap();
        assert_eq!(m.num_triangles(), 4);
        assert_eq!(m.num_nodes(), 6);
        // boundary midpoints are pushed onto the unit circle
        for p in m.nodes() {
            assert!((p.norm() - 1.0).abs() < 1e-14);
        }
        m.validate().unwrap();
    }

    #[test]
    fn rejects_non_manifold_edges() {
        let nodes = vec![
            Point::new(0.0, 0.0),
            Point::new(0.5, 0.0),
            Point::new(0.0, 0.5),
            Point::new(-0.5, 0.0),
            Point::new(0.0, -0.5),
        ];
        let err = Mesh::from_parts(
            DomainGeometry::UnitDisk,
            nodes,
            vec![true; 5],
            vec![[0, 1, 2], [0, 1, 4], [0, 1, 3]],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidMesh(_)));
    }

    #[test]
    fn text_round_trip() {
        let m = coarse_mesh().unwrap();
        let back = Mesh::from_text(m.geometry(), &m.to_text()).unwrap();
        assert_eq!(back.nodes(), m.nodes());
        assert_eq!(back.triangles(), m.triangles());
        assert_eq!(back.boundary_flags(), m.boundary_flags());
    }

    #[test]
    fn text_parse_errors() {
        let g = DomainGeometry::DiskUnionSquare;
        assert!(Mesh::from_text(g, "").is_err());
        assert!(Mesh::from_text(g, "3 1\n0 0 1\n1 0 1\n").is_err());
        assert!(Mesh::from_text(g, "3 1\n0 0 1\n1 0 2\n0 1 1\n0 1 2\n").is_err());
    }
}
