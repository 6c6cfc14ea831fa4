//! Trace-one controls `B = R(θ) diag(a, 1-a) R(θ)ᵀ` and the exact Bellman
//! and Monge-Ampère operators used as oracles.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::mesh::Point;

/// Symmetric 2×2 matrix `[[xx, xy], [xy, yy]]`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub const fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Sym2 { xx, xy, yy }
    }

    pub const fn diag(a: f64, b: f64) -> Self {
        Sym2::new(a, 0.0, b)
    }

    pub const fn identity() -> Self {
        Sym2::diag(1.0, 1.0)
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    /// Frobenius inner product `self : other`.
    pub fn frobenius(&self, other: &Sym2) -> f64 {
        self.xx * other.xx + 2.0 * self.xy * other.xy + self.yy * other.yy
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.frobenius(self).sqrt()
    }

    pub fn scale(&self, s: f64) -> Sym2 {
        Sym2::new(self.xx * s, self.xy * s, self.yy * s)
    }

    /// Eigenvalues in increasing order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.xx + self.yy);
        let r = (0.5 * (self.xx - self.yy)).hypot(self.xy);
        (mean - r, mean + r)
    }

    /// `R(θ) diag(l1, l2) R(θ)ᵀ`: eigenvalue `l1` along `(cos θ, sin θ)`,
    /// `l2` along `(-sin θ, cos θ)`.
    pub fn from_eigen(theta: f64, l1: f64, l2: f64) -> Sym2 {
        let (s, c) = theta.sin_cos();
        Sym2::new(
            l1 * c * c + l2 * s * s,
            (l1 - l2) * c * s,
            l1 * s * s + l2 * c * c,
        )
    }

    /// Quadratic form `vᵀ A v`.
    pub fn quad(&self, v: Point) -> f64 {
        self.xx * v.x * v.x + 2.0 * self.xy * v.x * v.y + self.yy * v.y * v.y
    }
}

/// Factorized trace-one control: rotation angle `θ ∈ [0, π)` and eigenvalue
/// split `a ∈ [0, 1/2]`, with `λ = (a, 1-a)` along the columns of `R(θ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Control {
    theta: f64,
    a: f64,
}

impl Control {
    pub fn new(theta: f64, a: f64) -> Result<Self> {
        if !(0.0..PI).contains(&theta) {
            return Err(Error::InvalidArgument(format!("control angle {theta} outside [0, π)")));
        }
        if !(0.0..=0.5).contains(&a) {
            return Err(Error::InvalidArgument(format!("control split {a} outside [0, 1/2]")));
        }
        Ok(Control { theta, a })
    }

    /// `B = Id / 2`.
    pub const fn isotropic() -> Self {
        Control { theta: 0.0, a: 0.5 }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn is_isotropic(&self) -> bool {
        self.a == 0.5
    }

    /// Weights `λ = (a, 1-a)`.
    pub fn lambda(&self) -> [f64; 2] {
        [self.a, 1.0 - self.a]
    }

    /// Directions `σ`: the columns of `R(θ)`.
    pub fn sigma(&self) -> [Point; 2] {
        let s1 = Point::from_angle(self.theta);
        [s1, Point::new(-s1.y, s1.x)]
    }

    pub fn matrix(&self) -> Sym2 {
        control_to_matrix(self)
    }

    /// `√det B`, the square root of `a(1-a)`.
    pub fn sqrt_det(&self) -> f64 {
        (self.a * (1.0 - self.a)).sqrt()
    }
}

pub fn control_to_matrix(c: &Control) -> Sym2 {
    Sym2::from_eigen(c.theta, c.a, 1.0 - c.a)
}

/// A control in a [`ControlGrid`] with its precomputed stencil data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridControl {
    pub control: Control,
    /// Indices into [`ControlGrid::directions`] of the two `σ` columns.
    pub dirs: [usize; 2],
    pub lambda: [f64; 2],
    pub sqrt_det: f64,
    pub matrix: Sym2,
}

/// Finite subset of the control set: angles `iπ/n_angles` and splits
/// `a = j/(2(n_a-1))`, with the isotropic control (which every angle shares)
/// stored once, last.
#[derive(Clone, Debug)]
pub struct ControlGrid {
    n_angles: usize,
    n_a: usize,
    controls: Vec<GridControl>,
    directions: Vec<Point>,
    isotropic: usize,
}

impl ControlGrid {
    pub fn new(n_angles: usize, n_a: usize) -> Result<Self> {
        build_control_grid(n_angles, n_a)
    }

    pub fn n_angles(&self) -> usize {
        self.n_angles
    }

    pub fn n_a(&self) -> usize {
        self.n_a
    }

    pub fn len(&self) -> usize {
        self.controls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.controls.is_empty()
    }

    pub fn controls(&self) -> &[GridControl] {
        &self.controls
    }

    pub fn get(&self, index: usize) -> &GridControl {
        &self.controls[index]
    }

    /// Distinct unit directions (modulo sign) used by the controls.
    pub fn directions(&self) -> &[Point] {
        &self.directions
    }

    pub fn isotropic_index(&self) -> usize {
        self.isotropic
    }

    /// Grid with both the angle count and the number of `a`-intervals
    /// doubled; it contains every control of `self`.
    pub fn doubled(&self) -> Result<Self> {
        ControlGrid::new(2 * self.n_angles, 2 * (self.n_a - 1) + 1)
    }

    /// Maximum over the grid of `-B:A + f √det B`.
    pub fn sup_linear(&self, a: &Sym2, f: f64) -> f64 {
        self.controls
            .iter()
            .map(|c| -c.matrix.frobenius(a) + f * c.sqrt_det)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn build_control_grid(n_angles: usize, n_a: usize) -> Result<ControlGrid> {
    if n_angles < 1 {
        return Err(Error::InvalidArgument("n_angles must be at least 1".into()));
    }
    if n_a < 2 {
        return Err(Error::InvalidArgument("n_a must be at least 2".into()));
    }
    // Direction angles are multiples of π/(2·n_angles): σ₁ of angle i sits at
    // 2i, σ₂ = σ₁ rotated by π/2 at 2i + n_angles (mod 2·n_angles).
    let period = 2 * n_angles;
    let mut slot_of = vec![usize::MAX; period];
    let mut directions = Vec::new();
    let mut slot = |key: usize, directions: &mut Vec<Point>| {
        let key = key % period;
        if slot_of[key] == usize::MAX {
            slot_of[key] = directions.len();
            directions.push(Point::from_angle(PI * key as f64 / period as f64));
        }
        slot_of[key]
    };

    let mut controls = Vec::with_capacity(n_angles * (n_a - 1) + 1);
    for i in 0..n_angles {
        let theta = PI * i as f64 / n_angles as f64;
        let d1 = slot(2 * i, &mut directions);
        let d2 = slot(2 * i + n_angles, &mut directions);
        for j in 0..n_a - 1 {
            let a = j as f64 / (2 * (n_a - 1)) as f64;
            let control = Control { theta, a };
            controls.push(GridControl {
                control,
                dirs: [d1, d2],
                lambda: control.lambda(),
                sqrt_det: control.sqrt_det(),
                matrix: control.matrix(),
            });
        }
    }
    let iso = Control::isotropic();
    let dirs = [slot(0, &mut directions), slot(n_angles, &mut directions)];
    controls.push(GridControl {
        control: iso,
        dirs,
        lambda: iso.lambda(),
        sqrt_det: 0.5,
        matrix: iso.matrix(),
    });
    Ok(ControlGrid {
        n_angles,
        n_a,
        isotropic: controls.len() - 1,
        controls,
        directions,
    })
}

/// `H(A, f) = sup_{B ∈ S₁} (-B:A + f √det B)`.
///
/// A maximizer commutes with `A`, so with eigenvalues `μ₁ ≤ μ₂` of `A` the
/// supremum reduces to `max_{a∈[0,1]} g(a)` with
/// `g(a) = -(a μ₁ + (1-a) μ₂) + f √(a(1-a))`. Squaring the stationarity
/// condition gives `(1-2a)² (f² + δ²) = δ²`, `δ = μ₂ - μ₁`; both roots and
/// the endpoints are compared.
pub fn exact_hamiltonian(a: &Sym2, f: f64) -> Result<f64> {
    if !(f >= 0.0) {
        return Err(Error::InvalidArgument(format!("source term must be non-negative, got {f}")));
    }
    let (mu1, mu2) = a.eigenvalues();
    let g = |t: f64| -(t * mu1 + (1.0 - t) * mu2) + f * (t * (1.0 - t)).max(0.0).sqrt();
    let mut best = g(0.0).max(g(1.0));
    let delta = mu2 - mu1;
    let rho = f.hypot(delta);
    if rho > 0.0 {
        let s = delta / rho;
        for t in [0.5 * (1.0 + s), 0.5 * (1.0 - s)] {
            best = best.max(g(t.clamp(0.0, 1.0)));
        }
    }
    Ok(best)
}

/// `M(A, f) = (f/2)² - det A`.
pub fn monge_ampere_residual(a: &Sym2, f: f64) -> Result<f64> {
    if !(f >= 0.0) {
        return Err(Error::InvalidArgument(format!("source term must be non-negative, got {f}")));
    }
    Ok((0.5 * f).powi(2) - a.det())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &Sym2, b: &Sym2, tol: f64) -> bool {
        (a.xx - b.xx).abs() <= tol && (a.xy - b.xy).abs() <= tol && (a.yy - b.yy).abs() <= tol
    }

    #[test]
    fn control_matrices() {
        let iso = Control::isotropic().matrix();
        assert!(close(&iso, &Sym2::diag(0.5, 0.5), 1e-15));
        let c = Control::new(0.0, 0.0).unwrap().matrix();
        assert!(close(&c, &Sym2::diag(0.0, 1.0), 1e-15));
        let c = Control::new(PI / 4.0, 0.0).unwrap().matrix();
        assert!(close(&c, &Sym2::new(0.5, -0.5, 0.5), 1e-15));
        assert!(Control::new(PI, 0.2).is_err());
        assert!(Control::new(0.1, 0.6).is_err());
    }

    #[test]
    fn grid_contents() {
        let g = build_control_grid(1, 2).unwrap();
        assert_eq!(g.len(), 2);
        assert!(close(&g.get(0).control.matrix(), &Sym2::diag(0.0, 1.0), 1e-15));
        assert!(close(&g.get(1).control.matrix(), &Sym2::diag(0.5, 0.5), 1e-15));
        assert_eq!(g.isotropic_index(), 1);

        let g = build_control_grid(64, 33).unwrap();
        for i in 0..64 {
            let theta = i as f64 * PI / 64.0;
            assert!(g.controls().iter().any(|c| c.control.theta() == theta));
        }
        assert_eq!(g.directions().len(), 64);
        assert_eq!(g.controls().iter().filter(|c| c.control.is_isotropic()).count(), 1);
    }

    #[test]
    fn grid_is_distinct_as_matrices() {
        // enumerate the raw (angle, split) pairs and count distinct matrices
        for (n_angles, n_a, expected) in [(4, 3, 9), (3, 2, 4), (6, 5, 25)] {
            let mut mats: Vec<Sym2> = Vec::new();
            for i in 0..n_angles {
                for j in 0..n_a {
                    let theta = PI * i as f64 / n_angles as f64;
                    let a = j as f64 / (2.0 * (n_a - 1) as f64);
                    let m = Sym2::from_eigen(theta, a, 1.0 - a);
                    if !mats.iter().any(|x| close(x, &m, 1e-12)) {
                        mats.push(m);
                    }
                }
            }
            assert_eq!(mats.len(), expected);
            let g = build_control_grid(n_angles, n_a).unwrap();
            assert_eq!(g.len(), expected);
            for (k, c) in g.controls().iter().enumerate() {
                for d in &g.controls()[..k] {
                    assert!(!close(&c.control.matrix(), &d.control.matrix(), 1e-12));
                }
            }
        }
    }

    #[test]
    fn grid_directions_match_sigma() {
        let g = build_control_grid(5, 4).unwrap();
        for c in g.controls() {
            let sigma = c.control.sigma();
            for j in 0..2 {
                let d = g.directions()[c.dirs[j]];
                // equal up to sign
                assert!((d.dot(sigma[j]).abs() - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn exact_hamiltonian_examples() {
        let h = |a: Sym2, f: f64| exact_hamiltonian(&a, f).unwrap();
        assert!(h(Sym2::identity(), 2.0).abs() < 1e-12);
        assert!((h(Sym2::diag(2.0, 3.0), 0.0) + 2.0).abs() < 1e-12);
        assert!(h(Sym2::diag(1.0, 4.0), 4.0).abs() < 1e-12);
        assert!((h(Sym2::diag(-1.0, 1.0), 0.0) - 1.0).abs() < 1e-12);
        assert!(exact_hamiltonian(&Sym2::identity(), -1.0).is_err());
    }

    #[test]
    fn exact_hamiltonian_matches_dense_search() {
        // independent oracle: dense 1-d search in a over the commuting family
        let dense = |a: &Sym2, f: f64| {
            let (m1, m2) = a.eigenvalues();
            (0..=1_000_000)
                .map(|k| {
                    let t = k as f64 / 1e6;
                    -(t * m1 + (1.0 - t) * m2) + f * (t * (1.0 - t)).sqrt()
                })
                .fold(f64::NEG_INFINITY, f64::max)
        };
        for (a, f) in [
            (Sym2::diag(-1.0, 1.0), 0.0),
            (Sym2::new(0.3, 0.7, -1.2), 1.5),
            (Sym2::new(2.0, -0.4, 2.5), 0.2),
            (Sym2::new(-3.0, 1.0, 4.0), 7.0),
        ] {
            let exact = exact_hamiltonian(&a, f).unwrap();
            let d = dense(&a, f);
            assert!(exact >= d - 1e-12, "{exact} < {d}");
            assert!(exact - d < 1e-5, "{exact} vs {d}");
        }
    }

    #[test]
    fn monge_ampere_examples() {
        assert_eq!(monge_ampere_residual(&Sym2::identity(), 2.0).unwrap(), 0.0);
        assert_eq!(monge_ampere_residual(&Sym2::default(), 0.0).unwrap(), 0.0);
        assert_eq!(monge_ampere_residual(&Sym2::diag(1.0, 4.0), 4.0).unwrap(), 0.0);
    }

    #[test]
    fn grid_sup_gap_shrinks_under_doubling() {
        let mut grid = ControlGrid::new(4, 3).unwrap();
        let samples = [
            (Sym2::new(1.0, 0.3, 2.0), 1.0),
            (Sym2::new(-0.5, 0.9, 0.4), 0.0),
            (Sym2::new(3.0, -2.0, 1.0), 4.0),
        ];
        let mut prev: Vec<f64> = samples.iter().map(|_| f64::INFINITY).collect();
        for _ in 0..4 {
            for (k, (a, f)) in samples.iter().enumerate() {
                let gap = exact_hamiltonian(a, *f).unwrap() - grid.sup_linear(a, *f);
                assert!(gap >= -1e-12);
                assert!(gap <= prev[k] + 1e-12);
                prev[k] = gap;
            }
            grid = grid.doubled().unwrap();
        }
    }

    fn sym() -> impl Strategy<Value = Sym2> {
        (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64).prop_map(|(a, b, c)| Sym2::new(a, b, c))
    }

    fn psd() -> impl Strategy<Value = Sym2> {
        (0.0..PI, 0.0..5.0f64, 0.0..5.0f64).prop_map(|(t, l1, l2)| Sym2::from_eigen(t, l1, l2))
    }

    proptest! {
        #[test]
        fn grid_controls_are_trace_one_psd(n_angles in 1usize..40, n_a in 2usize..20) {
            let g = ControlGrid::new(n_angles, n_a).unwrap();
            for c in g.controls() {
                let b = c.control.matrix();
                prop_assert!((b.trace() - 1.0).abs() <= 1e-14);
                let (l1, l2) = b.eigenvalues();
                prop_assert!(l1 >= -1e-14 && l2 <= 1.0 + 1e-14);
                prop_assert!((c.lambda[0] + c.lambda[1] - 1.0).abs() <= 1e-15);
            }
        }

        #[test]
        fn hamiltonian_at_zero_source_is_minus_smallest_eigenvalue(a in psd()) {
            let h = exact_hamiltonian(&a, 0.0).unwrap();
            prop_assert!((h + a.eigenvalues().0).abs() <= 1e-10);
        }

        #[test]
        fn hamiltonian_strictly_increasing_in_source(a in psd(), f1 in 0.0..10.0f64, df in 1e-3..5.0f64) {
            let h1 = exact_hamiltonian(&a, f1).unwrap();
            let h2 = exact_hamiltonian(&a, f1 + df).unwrap();
            prop_assert!(h1 < h2);
        }

        #[test]
        fn grid_sup_is_a_lower_bound(a in sym(), f in 0.0..10.0f64) {
            let g = ControlGrid::new(16, 9).unwrap();
            prop_assert!(g.sup_linear(&a, f) <= exact_hamiltonian(&a, f).unwrap() + 1e-12);
        }
    }
}
