use std::f64::consts::{FRAC_PI_2, PI};
use std::ops::{Add, Mul, Neg, Sub};

/// A point (or vector) in the plane.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    /// Unit vector at angle `theta` from the positive x-axis.
    pub fn from_angle(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Point { x: c, y: s }
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3-d cross product.
    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn lerp(self, other: Point, t: f64) -> Point {
        self + (other - self) * t
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

/// Closest point to `p` on the segment `[a, b]`.
pub fn closest_on_segment(p: Point, a: Point, b: Point) -> Point {
    let ab = b - a;
    let len_sq = ab.norm_sq();
    if len_sq == 0.0 {
        return a;
    }
    let t = ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0);
    a + ab * t
}

/// The continuous domain Ω.
///
/// `DiskUnionSquare` is `{x² + y² < 1} ∪ (0,1)²`. The lines `x = 1` and
/// `y = 1` are tangent to the unit circle at `(1,0)` and `(0,1)`, so the
/// union is convex but not strictly convex. Its boundary is the three-quarter
/// arc from `(0,1)` counter-clockwise to `(1,0)` followed by the two square
/// edges through the corner `(1,1)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DomainGeometry {
    #[default]
    DiskUnionSquare,
    UnitDisk,
}

const ARC_START: f64 = FRAC_PI_2;
const ARC_END: f64 = 2.0 * PI;

impl DomainGeometry {
    pub fn contains(&self, p: Point) -> bool {
        let in_disk = p.norm_sq() < 1.0;
        match self {
            DomainGeometry::UnitDisk => in_disk,
            DomainGeometry::DiskUnionSquare => {
                in_disk || (p.x > 0.0 && p.x < 1.0 && p.y > 0.0 && p.y < 1.0)
            }
        }
    }

    /// Nearest point of ∂Ω to `p`.
    pub fn project(&self, p: Point) -> Point {
        match self {
            DomainGeometry::UnitDisk => radial(p),
            DomainGeometry::DiskUnionSquare => {
                let candidates = [
                    nearest_on_arc(p),
                    closest_on_segment(p, Point::new(1.0, 0.0), Point::new(1.0, 1.0)),
                    closest_on_segment(p, Point::new(1.0, 1.0), Point::new(0.0, 1.0)),
                ];
                let mut best = candidates[0];
                for c in &candidates[1..] {
                    if c.dist(p) < best.dist(p) {
                        best = *c;
                    }
                }
                best
            }
        }
    }

    /// Signed distance to ∂Ω: negative inside, positive outside.
    pub fn signed_distance(&self, p: Point) -> f64 {
        let d = p.dist(self.project(p));
        if self.contains(p) {
            -d
        } else {
            d
        }
    }

    /// Largest `t ≥ 0` with `p + t·dir` in Ω̄, for `p` in Ω̄.
    ///
    /// Returns `None` when `p` lies outside Ω̄.
    pub fn exit_parameter(&self, p: Point, dir: Point) -> Option<f64> {
        let disk = disk_interval(p, dir);
        match self {
            DomainGeometry::UnitDisk => disk.filter(|&(lo, _)| lo <= 1e-14).map(|(_, hi)| hi.max(0.0)),
            DomainGeometry::DiskUnionSquare => {
                // Ω is convex, so the ray meets it in a single interval which is
                // the union of the (overlapping) disk and square intervals.
                let square = square_interval(p, dir);
                let mut exit: Option<f64> = None;
                for (lo, hi) in [disk, square].into_iter().flatten() {
                    if lo <= 1e-14 && hi >= 0.0 {
                        exit = Some(exit.map_or(hi, |e: f64| e.max(hi)));
                    }
                }
                let mut e = exit?;
                // a square interval may continue a disk interval (or vice versa)
                for (lo, hi) in [disk, square].into_iter().flatten() {
                    if lo <= e + 1e-14 && hi > e {
                        e = hi;
                    }
                }
                Some(e)
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            DomainGeometry::UnitDisk => 2.0,
            DomainGeometry::DiskUnionSquare => 1.0 + std::f64::consts::SQRT_2,
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            DomainGeometry::UnitDisk => PI,
            DomainGeometry::DiskUnionSquare => 0.75 * PI + 1.0,
        }
    }

    pub fn perimeter(&self) -> f64 {
        match self {
            DomainGeometry::UnitDisk => 2.0 * PI,
            DomainGeometry::DiskUnionSquare => 1.5 * PI + 2.0,
        }
    }

    /// Boundary nodes spaced about `h` apart, in counter-clockwise order.
    ///
    /// For the disk-union-square the kinks of the boundary parametrization,
    /// `(0,1)`, `(1,0)` and the corner `(1,1)`, are always nodes.
    pub(crate) fn boundary_nodes(&self, h: f64) -> Vec<Point> {
        match self {
            DomainGeometry::UnitDisk => {
                let n = ((2.0 * PI / h).round() as usize).max(3);
                (0..n)
                    .map(|i| Point::from_angle(2.0 * PI * i as f64 / n as f64))
                    .collect()
            }
            DomainGeometry::DiskUnionSquare => {
                let n_arc = (((ARC_END - ARC_START) / h).round() as usize).max(3);
                let n_side = ((1.0 / h).round() as usize).max(1);
                let mut pts = Vec::with_capacity(n_arc + 2 * n_side);
                pts.push(Point::new(0.0, 1.0));
                for i in 1..n_arc {
                    let t = ARC_START + (ARC_END - ARC_START) * i as f64 / n_arc as f64;
                    pts.push(Point::from_angle(t));
                }
                pts.push(Point::new(1.0, 0.0));
                for j in 1..=n_side {
                    pts.push(Point::new(1.0, j as f64 / n_side as f64));
                }
                for j in 1..n_side {
                    pts.push(Point::new(1.0 - j as f64 / n_side as f64, 1.0));
                }
                pts
            }
        }
    }
}

fn radial(p: Point) -> Point {
    let r = p.norm();
    if r == 0.0 {
        Point::new(-1.0, 0.0)
    } else {
        p * (1.0 / r)
    }
}

fn nearest_on_arc(p: Point) -> Point {
    let mut angle = p.y.atan2(p.x);
    if angle < 0.0 {
        angle += 2.0 * PI;
    }
    if p.norm_sq() == 0.0 || (ARC_START..=ARC_END).contains(&angle) {
        return radial(p);
    }
    let a = Point::new(0.0, 1.0);
    let b = Point::new(1.0, 0.0);
    if p.dist(a) <= p.dist(b) {
        a
    } else {
        b
    }
}

/// Parameter interval of the ray `p + t·dir` inside the closed unit disk.
fn disk_interval(p: Point, dir: Point) -> Option<(f64, f64)> {
    let a = dir.norm_sq();
    let b = p.dot(dir);
    let c = p.norm_sq() - 1.0;
    let disc = b * b - a * c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    Some(((-b - sq) / a, (-b + sq) / a))
}

/// Parameter interval of the ray `p + t·dir` inside the closed unit square.
fn square_interval(p: Point, dir: Point) -> Option<(f64, f64)> {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for (x, d) in [(p.x, dir.x), (p.y, dir.y)] {
        if d.abs() < 1e-300 {
            if !(0.0..=1.0).contains(&x) {
                return None;
            }
        } else {
            let t0 = (0.0 - x) / d;
            let t1 = (1.0 - x) / d;
            lo = lo.max(t0.min(t1));
            hi = hi.min(t0.max(t1));
        }
    }
    (lo <= hi).then_some((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_lands_on_boundary() {
        let g = DomainGeometry::DiskUnionSquare;
        for i in 0..200 {
            let t = i as f64 * 0.731;
            let p = Point::new(1.7 * t.cos() * (0.3 + (t * 3.1).sin().abs()), 1.7 * t.sin());
            let q = g.project(p);
            assert!(g.signed_distance(q).abs() <= 1e-12, "{q:?}");
        }
    }

    #[test]
    fn signed_distance_signs() {
        let g = DomainGeometry::DiskUnionSquare;
        assert!((g.signed_distance(Point::new(0.0, 0.0)) + 1.0).abs() < 1e-15);
        assert!((g.signed_distance(Point::new(0.9, 0.9)) + 0.1).abs() < 1e-12);
        assert!((g.signed_distance(Point::new(1.5, 1.0)) - 0.5).abs() < 1e-12);
        assert!((g.signed_distance(Point::new(-2.0, 0.0)) - 1.0).abs() < 1e-12);
        assert!(g.signed_distance(Point::new(1.0, 1.0)).abs() < 1e-15);
        assert!(g.contains(Point::new(0.99, 0.99)));
        assert!(!g.contains(Point::new(0.8, -0.8)));
    }

    #[test]
    fn exit_parameter_crosses_from_disk_into_square() {
        let g = DomainGeometry::DiskUnionSquare;
        // from the origin towards the corner the ray leaves through (1,1)
        let dir = Point::new(1.0, 1.0) * (1.0 / 2f64.sqrt());
        let t = g.exit_parameter(Point::new(0.0, 0.0), dir).unwrap();
        assert!((t - 2f64.sqrt()).abs() < 1e-12);
        // from inside the square heading into the disk lobe
        let t = g.exit_parameter(Point::new(0.5, 0.5), Point::new(-1.0, 0.0)).unwrap();
        let expected = 0.5 + (1.0 - 0.25f64).sqrt();
        assert!((t - expected).abs() < 1e-12);
        let t = g.exit_parameter(Point::new(0.0, 0.0), Point::new(0.0, -1.0)).unwrap();
        assert!((t - 1.0).abs() < 1e-12);
        assert!(g.exit_parameter(Point::new(3.0, 3.0), Point::new(1.0, 0.0)).is_none());
    }

    #[test]
    fn boundary_nodes_lie_on_boundary() {
        let g = DomainGeometry::DiskUnionSquare;
        let pts = g.boundary_nodes(0.21);
        assert_eq!(pts.len(), 32);
        for p in pts {
            assert!(g.signed_distance(p).abs() <= 1e-12);
        }
    }
}
