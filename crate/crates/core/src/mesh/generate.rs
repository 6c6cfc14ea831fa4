use std::collections::{BTreeSet, HashMap};

use super::{signed_area2, DomainGeometry, Mesh, Point};
use crate::error::{Error, Result};

/// Target size for which [`build_domain_mesh`] yields the 91-node coarse
/// level (32 boundary nodes, 148 triangles) of the disk-union-square.
pub const COARSE_TARGET_H: f64 = 0.21;

/// Interior node spacing relative to the boundary spacing.
const INTERIOR_SPACING: f64 = 1.1;
const SMOOTHING_ROUNDS: usize = 4;
const SMOOTHING_SWEEPS: usize = 3;

/// The coarsest benchmark mesh of the disk-union-square.
pub fn coarse_mesh() -> Result<Mesh> {
    build_domain_mesh(DomainGeometry::DiskUnionSquare, COARSE_TARGET_H)
}

/// Generates a quasi-uniform mesh of Ω with node spacing about `target_h`.
///
/// Boundary nodes are placed on ∂Ω, interior nodes start on scaled copies
/// of the boundary, and the point set is Delaunay-triangulated and
/// Laplace-smoothed. Ω is convex and all boundary nodes are on ∂Ω, so the
/// triangulated convex hull Ω_h is contained in Ω.
pub fn build_domain_mesh(geometry: DomainGeometry, target_h: f64) -> Result<Mesh> {
    if !(target_h.is_finite() && target_h > 0.0) {
        return Err(Error::InvalidArgument(format!("target_h must be positive, got {target_h}")));
    }
    let boundary_pts = geometry.boundary_nodes(target_h);
    let interior = layered_points(geometry, target_h);
    if interior.len() < 4 {
        return Err(Error::DegenerateMesh(format!(
            "target_h = {target_h} leaves {} interior nodes (need at least 4)",
            interior.len()
        )));
    }
    let n_boundary = boundary_pts.len();
    let mut points = boundary_pts;
    points.extend(interior);

    let mut triangles = delaunay(&points)?;
    for _ in 0..SMOOTHING_ROUNDS {
        let neighbours = adjacency(points.len(), &triangles);
        for _ in 0..SMOOTHING_SWEEPS {
            for i in n_boundary..points.len() {
                let nb = &neighbours[i];
                let mut c = Point::default();
                for &j in nb {
                    c = c + points[j];
                }
                points[i] = c * (1.0 / nb.len() as f64);
            }
        }
        triangles = delaunay(&points)?;
    }

    let mut boundary = vec![false; points.len()];
    boundary[..n_boundary].fill(true);
    let mesh = Mesh::from_parts(geometry, points, boundary, triangles)?;
    let expected = 2 * mesh.num_nodes() - n_boundary - 2;
    if mesh.num_triangles() != expected || mesh.boundary_edges().len() != n_boundary {
        return Err(Error::InvalidMesh(format!(
            "triangulation of {} nodes has {} triangles and {} boundary edges",
            mesh.num_nodes(),
            mesh.num_triangles(),
            mesh.boundary_edges().len()
        )));
    }
    mesh.validate()?;
    Ok(mesh)
}

/// Interior seed points: scaled copies `r·∂Ω` of the boundary node layout.
///
/// Both domains are star-shaped about the origin and the inner parallel set
/// of Ω at depth `δ` is `(1-δ)Ω`, so layer `k` sits at depth `k·depth` and
/// is spaced about `INTERIOR_SPACING·h` along its curve. The origin closes
/// the innermost layer.
fn layered_points(geometry: DomainGeometry, h: f64) -> Vec<Point> {
    let tangential = INTERIOR_SPACING * h;
    let depth = tangential * 3f64.sqrt() / 2.0;
    let mut pts = Vec::new();
    for k in 1.. {
        let r = 1.0 - k as f64 * depth;
        if r < 0.75 * depth {
            break;
        }
        pts.extend(geometry.boundary_nodes(tangential / r).into_iter().map(|p| p * r));
    }
    pts.push(Point::default());
    pts
}

fn adjacency(n: usize, triangles: &[[usize; 3]]) -> Vec<Vec<usize>> {
    let mut nb: Vec<Vec<usize>> = vec![Vec::new(); n];
    for t in triangles {
        for e in 0..3 {
            let (a, b) = (t[e], t[(e + 1) % 3]);
            if !nb[a].contains(&b) {
                nb[a].push(b);
            }
            if !nb[b].contains(&a) {
                nb[b].push(a);
            }
        }
    }
    nb
}

struct Circle {
    centre: Point,
    r2: f64,
}

fn circumcircle(a: Point, b: Point, c: Point) -> Circle {
    let d = 2.0 * (a.x * (b.y - c.y) + b.x * (c.y - a.y) + c.x * (a.y - b.y));
    let (a2, b2, c2) = (a.norm_sq(), b.norm_sq(), c.norm_sq());
    let centre = Point::new(
        (a2 * (b.y - c.y) + b2 * (c.y - a.y) + c2 * (a.y - b.y)) / d,
        (a2 * (c.x - b.x) + b2 * (a.x - c.x) + c2 * (b.x - a.x)) / d,
    );
    Circle {
        centre,
        r2: centre.dist(a).powi(2),
    }
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// `p` strictly left of the directed line `a -> b`, with a relative margin.
fn strictly_left(a: Point, b: Point, p: Point) -> bool {
    signed_area2(a, b, p) > 1e-12 * (b - a).norm() * (p - a).norm()
}

/// Incremental Bowyer-Watson triangulation.
///
/// The boundary arc nodes are exactly cocircular, so in-circle decisions can
/// be ambiguous. The cavity is therefore grown only through neighbours from
/// the triangle containing the new point, using a strict in-circle test, and
/// then enlarged until every cavity edge is visible from the point.
/// Quadratic overall, which is fine for the coarse point sets it is used on
/// (finer levels come from refinement).
fn delaunay(points: &[Point]) -> Result<Vec<[usize; 3]>> {
    let n = points.len();
    let (mut lo, mut hi) = (Point::new(f64::MAX, f64::MAX), Point::new(f64::MIN, f64::MIN));
    for p in points {
        lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let centre = lo.lerp(hi, 0.5);
    let span = (hi - lo).norm().max(1e-12) * 1e3;
    let mut all = points.to_vec();
    all.push(centre + Point::new(-span, -span));
    all.push(centre + Point::new(span, -span));
    all.push(centre + Point::new(0.0, span));

    let mut tris: Vec<[usize; 3]> = vec![[n, n + 1, n + 2]];
    let mut circles = vec![circumcircle(all[n], all[n + 1], all[n + 2])];
    let mut alive = vec![true];
    let mut edges: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for e in 0..3 {
        edges.insert(edge_key(tris[0][e], tris[0][(e + 1) % 3]), vec![0]);
    }
    let neighbour = |edges: &HashMap<(usize, usize), Vec<usize>>, t: usize, a: usize, b: usize| {
        edges[&edge_key(a, b)].iter().copied().find(|&s| s != t)
    };

    for (i, &p) in points.iter().enumerate() {
        // seed: the live triangle containing p
        let mut seed = None;
        let mut best = f64::NEG_INFINITY;
        for (t, tri) in tris.iter().enumerate() {
            if !alive[t] {
                continue;
            }
            let [a, b, c] = tri.map(|v| all[v]);
            let m = signed_area2(a, b, p).min(signed_area2(b, c, p)).min(signed_area2(c, a, p));
            if m > best {
                best = m;
                seed = Some(t);
            }
        }
        let seed = seed.ok_or_else(|| Error::InvalidMesh("empty triangulation".into()))?;

        let mut in_cavity = BTreeSet::from([seed]);
        let mut stack = vec![seed];
        while let Some(t) = stack.pop() {
            for e in 0..3 {
                let (a, b) = (tris[t][e], tris[t][(e + 1) % 3]);
                if let Some(s) = neighbour(&edges, t, a, b) {
                    if !in_cavity.contains(&s) {
                        let c = &circles[s];
                        if p.dist(c.centre).powi(2) < c.r2 * (1.0 - 1e-10) {
                            in_cavity.insert(s);
                            stack.push(s);
                        }
                    }
                }
            }
        }

        let boundary = loop {
            let mut boundary = Vec::new();
            let mut grow = None;
            for &t in &in_cavity {
                for e in 0..3 {
                    let (a, b) = (tris[t][e], tris[t][(e + 1) % 3]);
                    match neighbour(&edges, t, a, b) {
                        Some(s) if in_cavity.contains(&s) => {}
                        other => {
                            if strictly_left(all[a], all[b], p) {
                                boundary.push((a, b));
                            } else if let Some(s) = other {
                                grow = Some(s);
                            } else {
                                return Err(Error::InvalidMesh("point outside the super triangle".into()));
                            }
                        }
                    }
                }
            }
            match grow {
                Some(s) => {
                    in_cavity.insert(s);
                }
                None => break boundary,
            }
        };

        for &t in &in_cavity {
            alive[t] = false;
            for e in 0..3 {
                let key = edge_key(tris[t][e], tris[t][(e + 1) % 3]);
                let list = edges.get_mut(&key).expect("edge present");
                list.retain(|&s| s != t);
                if list.is_empty() {
                    edges.remove(&key);
                }
            }
        }
        for (a, b) in boundary {
            let t = tris.len();
            tris.push([a, b, i]);
            circles.push(circumcircle(all[a], all[b], p));
            alive.push(true);
            for (u, v) in [(a, b), (b, i), (i, a)] {
                edges.entry(edge_key(u, v)).or_default().push(t);
            }
        }
    }
    Ok(tris
        .into_iter()
        .zip(alive)
        .filter(|(t, live)| *live && t.iter().all(|&v| v < n))
        .map(|(t, _)| t)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::BOUNDARY_TOL;

    #[test]
    fn coarse_mesh_has_the_benchmark_counts() {
        let m = coarse_mesh().unwrap();
        assert_eq!(m.num_nodes(), 91);
        assert_eq!(m.boundary_flags().iter().filter(|&&b| b).count(), 32);
        assert_eq!(m.num_triangles(), 148);
        m.validate().unwrap();
    }

    #[test]
    fn node_count_scales_with_target_h() {
        let g = DomainGeometry::DiskUnionSquare;
        for h in [0.3, 0.2, 0.12] {
            let m = build_domain_mesh(g, h).unwrap();
            let nominal = (g.diameter() / h).powi(2);
            let n = m.num_nodes() as f64;
            assert!(n >= nominal / 2.0 && n <= nominal * 2.0, "h={h}: {n} vs {nominal}");
            let halved = build_domain_mesh(g, h / 2.0).unwrap().num_nodes() as f64;
            let ratio = halved / n;
            assert!((ratio - 4.0).abs() <= 0.3 * 4.0, "h={h}: ratio {ratio}");
        }
    }

    #[test]
    fn huge_target_h_is_degenerate() {
        let g = DomainGeometry::DiskUnionSquare;
        assert!(matches!(build_domain_mesh(g, g.diameter()), Err(Error::DegenerateMesh(_))));
        assert!(matches!(build_domain_mesh(g, 0.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(build_domain_mesh(g, f64::NAN), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn refinement_keeps_invariants_and_halves_h() {
        let m0 = coarse_mesh().unwrap();
        let mut prev = m0.clone();
        let expected = [329, 1249, 4865];
        for &count in &expected {
            let next = prev.refine_uniform().unwrap();
            next.validate().unwrap();
            assert_eq!(next.num_nodes(), count);
            for i in 0..next.num_nodes() {
                if next.is_boundary(i) {
                    assert!(next.geometry().signed_distance(next.node(i)).abs() <= BOUNDARY_TOL);
                }
            }
            // parent nodes keep their indices and coordinates
            assert_eq!(&next.nodes()[..prev.num_nodes()], prev.nodes());
            assert_eq!(&next.boundary_flags()[..prev.num_nodes()], prev.boundary_flags());
            for (name, a, b) in [("h_avg", prev.h_avg(), next.h_avg()), ("h_max", prev.h_max(), next.h_max())] {
                let ratio = a / b;
                assert!((ratio - 2.0).abs() <= 0.3, "{name} ratio {ratio}");
            }
            prev = next;
        }
    }
}
