//! Monotone wide-stencil semi-Lagrangian discretization of the Bellman
//! operator.
//!
//! At an interior node `x_i` a control `B = Σ_j λ_j σ_j σ_jᵀ` acts through
//! second differences along its eigenvectors,
//! `-Σ_j λ_j [u(x_i - kσ_j) - 2u(x_i) + u(x_i + kσ_j)] / k²`, with probe values
//! interpolated from the P1 function. The step `k = m·h_avg` is shortened
//! symmetrically near the boundary so that both probes stay in Ω̄_h.
//!
//! Stencil geometry depends only on the mesh, the direction set of the
//! control grid and `m`, so a [`Scheme`] computes it once and reuses it for
//! every policy.

use rayon::prelude::*;

use crate::controls::{ControlGrid, GridControl};
use crate::error::{Error, Result};
use crate::howard::Policy;
use crate::linalg::CsrMatrix;
use crate::mesh::{FePoint, Mesh, Point};

/// Stencil factor `m` in `k = m·h_avg`, plus a floor for the nominal step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StencilConfig {
    m: f64,
    min_k: Option<f64>,
}

impl StencilConfig {
    pub fn new(m: f64) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::InvalidArgument(format!("stencil factor must be positive, got {m}")));
        }
        Ok(StencilConfig { m, min_k: None })
    }

    /// Overrides the default floor `h_avg / 4`.
    pub fn with_min_k(mut self, min_k: f64) -> Result<Self> {
        if !(min_k > 0.0 && min_k.is_finite()) {
            return Err(Error::InvalidArgument(format!("min_k must be positive, got {min_k}")));
        }
        self.min_k = Some(min_k);
        Ok(self)
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn min_k(&self, mesh: &Mesh) -> f64 {
        self.min_k.unwrap_or(0.25 * mesh.h_avg())
    }

    /// Untruncated step `max(m·h_avg, min_k)`.
    pub fn nominal_k(&self, mesh: &Mesh) -> f64 {
        (self.m * mesh.h_avg()).max(self.min_k(mesh))
    }
}

/// Largest `t ≥ 0` with `x + tσ` in the convex polygon Ω̄_h.
fn polygon_exit(mesh: &Mesh, x: Point, sigma: Point) -> f64 {
    let nodes = mesh.nodes();
    let mut t = f64::INFINITY;
    for &[a, b] in mesh.boundary_edges() {
        let e = nodes[b] - nodes[a];
        let slope = e.cross(sigma);
        if slope < 0.0 {
            let room = e.cross(x - nodes[a]).max(0.0);
            t = t.min(room / -slope);
        }
    }
    t
}

/// Distance from `x` to the boundary of the convex polygon Ω̄_h, for `x`
/// inside it.
fn polygon_depth(mesh: &Mesh, x: Point) -> f64 {
    let nodes = mesh.nodes();
    mesh.boundary_edges()
        .iter()
        .map(|&[a, b]| {
            let e = nodes[b] - nodes[a];
            e.cross(x - nodes[a]) / e.norm()
        })
        .fold(f64::INFINITY, f64::min)
}

/// `k = min(k_nominal, t₊, t₋)` for the interior node `node` and unit
/// direction `sigma`, where `t±` are the exit steps from Ω̄_h along `±σ`.
pub fn stencil_size(mesh: &Mesh, node: usize, sigma: Point, cfg: &StencilConfig) -> Result<f64> {
    if node >= mesh.num_nodes() {
        return Err(Error::InvalidArgument(format!("node {node} out of range")));
    }
    if mesh.is_boundary(node) {
        return Err(Error::BoundaryNode(node));
    }
    let x = mesh.node(node);
    truncated_step(mesh, x, sigma, cfg.nominal_k(mesh), cfg.min_k(mesh))
}

fn truncated_step(mesh: &Mesh, x: Point, sigma: Point, nominal: f64, min_k: f64) -> Result<f64> {
    let k = nominal.min(polygon_exit(mesh, x, sigma)).min(polygon_exit(mesh, x, -sigma));
    // the exits are never shorter than the distance to ∂Ω_h
    let depth = polygon_depth(mesh, x);
    if !(k > 0.0) || k < min_k.min(depth) * (1.0 - 1e-9) {
        return Err(Error::InvalidArgument(format!(
            "stencil at ({}, {}) collapsed to k = {k}",
            x.x, x.y
        )));
    }
    Ok(k)
}

/// Interpolation data of one probe point: three nodes and their weights.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Probe {
    nodes: [u32; 3],
    weights: [f64; 3],
}

impl Probe {
    fn from_fe(mesh: &Mesh, p: &FePoint) -> Self {
        let w = p.weights(mesh);
        Probe {
            nodes: w.map(|(n, _)| n as u32),
            weights: w.map(|(_, x)| x),
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.nodes.iter().zip(&self.weights).map(|(&n, &w)| (n as usize, w))
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.entries().map(|(n, w)| w * values[n]).sum()
    }
}

/// Stencil along one direction at one interior node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DirectionStencil {
    pub k: f64,
    pub plus: Probe,
    pub minus: Probe,
}

/// The stencil of a single control at an interior node.
#[derive(Clone, Debug, PartialEq)]
pub struct StencilRow {
    pub node: usize,
    pub lambda: [f64; 2],
    pub sigma: [Point; 2],
    pub k: [f64; 2],
    /// `x_i + k_j σ_j` and `x_i - k_j σ_j` for each direction `j`.
    pub probes: [[Point; 2]; 2],
    pub locations: [[FePoint; 2]; 2],
}

/// Precomputed stencil geometry for a mesh, control grid and stencil factor.
pub struct Scheme<'m> {
    mesh: &'m Mesh,
    grid: ControlGrid,
    cfg: StencilConfig,
    /// Row of each node in `table`, `usize::MAX` for boundary nodes.
    slot: Vec<usize>,
    table: Vec<DirectionStencil>,
}

impl<'m> Scheme<'m> {
    pub fn new(mesh: &'m Mesh, grid: ControlGrid, cfg: StencilConfig) -> Result<Self> {
        let dirs = grid.directions().to_vec();
        let nominal = cfg.nominal_k(mesh);
        let min_k = cfg.min_k(mesh);
        let rows: Vec<Vec<DirectionStencil>> = mesh
            .interior_nodes()
            .par_iter()
            .map(|&i| {
                let x = mesh.node(i);
                let deep = polygon_depth(mesh, x) >= nominal;
                dirs.iter()
                    .map(|&sigma| {
                        let k = if deep {
                            nominal
                        } else {
                            truncated_step(mesh, x, sigma, nominal, min_k)?
                        };
                        let plus = mesh.locate_point(x + sigma * k)?;
                        let minus = mesh.locate_point(x - sigma * k)?;
                        Ok(DirectionStencil {
                            k,
                            plus: Probe::from_fe(mesh, &plus),
                            minus: Probe::from_fe(mesh, &minus),
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let mut slot = vec![usize::MAX; mesh.num_nodes()];
        for (r, &i) in mesh.interior_nodes().iter().enumerate() {
            slot[i] = r;
        }
        Ok(Scheme {
            mesh,
            grid,
            cfg,
            slot,
            table: rows.into_iter().flatten().collect(),
        })
    }

    pub fn mesh(&self) -> &'m Mesh {
        self.mesh
    }

    pub fn grid(&self) -> &ControlGrid {
        &self.grid
    }

    pub fn config(&self) -> &StencilConfig {
        &self.cfg
    }

    fn n_dirs(&self) -> usize {
        self.grid.directions().len()
    }

    fn stencils(&self, node: usize) -> &[DirectionStencil] {
        let r = self.slot[node];
        debug_assert!(r != usize::MAX, "node {node} is a boundary node");
        let d = self.n_dirs();
        &self.table[r * d..(r + 1) * d]
    }

    /// Stencil of direction `dir` (an index into the grid's direction list)
    /// at interior node `node`.
    pub fn direction_stencil(&self, node: usize, dir: usize) -> Result<&DirectionStencil> {
        if node >= self.mesh.num_nodes() {
            return Err(Error::InvalidArgument(format!("node {node} out of range")));
        }
        if self.mesh.is_boundary(node) {
            return Err(Error::BoundaryNode(node));
        }
        self.stencils(node)
            .get(dir)
            .ok_or_else(|| Error::InvalidArgument(format!("direction {dir} out of range")))
    }

    /// Steps used at `node`, one per grid direction.
    pub fn steps(&self, node: usize) -> Result<Vec<f64>> {
        if self.mesh.is_boundary(node) {
            return Err(Error::BoundaryNode(node));
        }
        Ok(self.stencils(node).iter().map(|s| s.k).collect())
    }

    /// Full stencil description of grid control `control` at `node`.
    pub fn stencil_row(&self, node: usize, control: usize) -> Result<StencilRow> {
        let c = self.grid.get(control);
        let x = self.mesh.node(node);
        let sigma = c.dirs.map(|d| self.grid.directions()[d]);
        let k = [
            self.direction_stencil(node, c.dirs[0])?.k,
            self.direction_stencil(node, c.dirs[1])?.k,
        ];
        let probes = [0, 1].map(|j| [x + sigma[j] * k[j], x - sigma[j] * k[j]]);
        let mut locations = [[FePoint { triangle: 0, bary: [0.0; 3] }; 2]; 2];
        for j in 0..2 {
            for s in 0..2 {
                locations[j][s] = self.mesh.locate_point(probes[j][s])?;
            }
        }
        Ok(StencilRow {
            node,
            lambda: c.lambda,
            sigma,
            k,
            probes,
            locations,
        })
    }

    /// Second differences `[u(x-kσ) - 2s + u(x+kσ)] / k²` for every grid
    /// direction at an interior node.
    fn second_differences(&self, node: usize, values: &[f64], s: f64) -> Vec<f64> {
        self.stencils(node)
            .iter()
            .map(|st| (st.plus.eval(values) - 2.0 * s + st.minus.eval(values)) / (st.k * st.k))
            .collect()
    }

    /// Discrete Hamiltonian at node `i` with centre value `s`: the value and
    /// the index of the maximizing grid control. Boundary nodes give
    /// `s - g_i` and the isotropic control.
    pub fn hamiltonian_at_node(&self, values: &[f64], i: usize, s: f64, f: &[f64], g: &[f64]) -> (f64, usize) {
        if self.mesh.is_boundary(i) {
            return (s - g[i], self.grid.isotropic_index());
        }
        best_control(&self.grid, &self.second_differences(i, values, s), f[i])
    }

    /// Like [`Scheme::hamiltonian_at_node`] at an interior node, but with the
    /// probe values taken from `phi` evaluated exactly at the probe points.
    pub fn hamiltonian_with_sampler(&self, i: usize, s: f64, f_i: f64, phi: impl Fn(Point) -> f64) -> Result<(f64, usize)> {
        let steps = self.steps(i)?;
        Ok(sampled_hamiltonian(&self.grid, self.mesh.node(i), &steps, s, f_i, phi))
    }

    /// `-Σ_j λ_j [φ(x-kσ_j) - 2s + φ(x+kσ_j)] / k_j²` for one grid control,
    /// with `φ` evaluated exactly at the probe points.
    pub fn operator_with_sampler(&self, i: usize, control: usize, s: f64, phi: impl Fn(Point) -> f64) -> Result<f64> {
        let row = self.stencil_row(i, control)?;
        Ok(-(0..2)
            .map(|j| {
                let [p, q] = row.probes[j];
                row.lambda[j] * (phi(p) - 2.0 * s + phi(q)) / (row.k[j] * row.k[j])
            })
            .sum::<f64>())
    }

    /// Residual `H_h(u(x_i), u)(x_i)` at every node together with the
    /// maximizing control per node.
    pub fn evaluate(&self, values: &[f64], f: &[f64], g: &[f64]) -> (Vec<f64>, Vec<usize>) {
        assert_eq!(values.len(), self.mesh.num_nodes());
        (0..self.mesh.num_nodes())
            .into_par_iter()
            .map(|i| self.hamiltonian_at_node(values, i, values[i], f, g))
            .unzip()
    }

    /// Assembles `A v + b = 0` for a fixed policy.
    pub fn assemble(&self, policy: &Policy, f: &[f64], g: &[f64]) -> Result<PolicySystem> {
        let n = self.mesh.num_nodes();
        if policy.len() != n || f.len() != n || g.len() != n {
            return Err(Error::InvalidArgument("policy and data must have one entry per node".into()));
        }
        let controls = policy.indices();
        if let Some(&bad) = controls.iter().find(|&&c| c >= self.grid.len()) {
            return Err(Error::InvalidArgument(format!("control index {bad} not in the grid")));
        }
        let (rows, rhs): (Vec<_>, Vec<_>) = (0..n)
            .into_par_iter()
            .map(|i| {
                if self.mesh.is_boundary(i) {
                    return (vec![(i, 1.0)], -g[i]);
                }
                let c: &GridControl = self.grid.get(controls[i]);
                let stencils = self.stencils(i);
                let mut row = Vec::with_capacity(13);
                let mut diag = 0.0;
                for j in 0..2 {
                    if c.lambda[j] == 0.0 {
                        continue;
                    }
                    let st = &stencils[c.dirs[j]];
                    let coef = c.lambda[j] / (st.k * st.k);
                    diag += 2.0 * coef;
                    row.extend(st.plus.entries().chain(st.minus.entries()).map(|(node, w)| (node, -coef * w)));
                }
                row.push((i, diag));
                (row, f[i] * c.sqrt_det)
            })
            .unzip();
        Ok(PolicySystem {
            matrix: CsrMatrix::from_rows(n, rows)?,
            rhs,
        })
    }
}

/// Maximum over grid controls of `-(λ₁ D_{σ₁} + λ₂ D_{σ₂}) + f √det B`,
/// keeping the lowest index on ties.
fn best_control(grid: &ControlGrid, diffs: &[f64], f_i: f64) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0);
    for (idx, c) in grid.controls().iter().enumerate() {
        let v = -(c.lambda[0] * diffs[c.dirs[0]] + c.lambda[1] * diffs[c.dirs[1]]) + f_i * c.sqrt_det;
        if v > best.0 {
            best = (v, idx);
        }
    }
    best
}

/// Discrete Hamiltonian at an arbitrary point `x` with per-direction steps
/// `steps` and probe values taken exactly from `phi`.
pub fn sampled_hamiltonian(
    grid: &ControlGrid,
    x: Point,
    steps: &[f64],
    s: f64,
    f_x: f64,
    phi: impl Fn(Point) -> f64,
) -> (f64, usize) {
    assert_eq!(steps.len(), grid.directions().len());
    let diffs: Vec<f64> = grid
        .directions()
        .iter()
        .zip(steps)
        .map(|(&sigma, &k)| (phi(x + sigma * k) - 2.0 * s + phi(x - sigma * k)) / (k * k))
        .collect();
    best_control(grid, &diffs, f_x)
}

/// Sparse affine system of one policy: `A v + b = 0`.
///
/// Boundary rows of `A` are unit rows with `b_i = -g(x_i)`; interior rows hold
/// the wide-stencil operator with `b_i = f(x_i) √det B_i`.
#[derive(Clone, Debug)]
pub struct PolicySystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
}

impl PolicySystem {
    /// Right-hand side `-b` of `A v = -b`.
    pub fn negated_rhs(&self) -> Vec<f64> {
        self.rhs.iter().map(|b| -b).collect()
    }

    /// `A v + b`.
    pub fn residual(&self, v: &[f64]) -> Vec<f64> {
        let mut r = self.matrix.mul_vec(v);
        for (ri, bi) in r.iter_mut().zip(&self.rhs) {
            *ri += bi;
        }
        r
    }
}

pub fn assemble_policy_system(scheme: &Scheme<'_>, policy: &Policy, f: &[f64], g: &[f64]) -> Result<PolicySystem> {
    scheme.assemble(policy, f, g)
}

pub fn discrete_hamiltonian_at_node(
    scheme: &Scheme<'_>,
    u: &[f64],
    i: usize,
    s: f64,
    f: &[f64],
    g: &[f64],
) -> (f64, usize) {
    scheme.hamiltonian_at_node(u, i, s, f, g)
}

pub fn scheme_residual(scheme: &Scheme<'_>, u: &[f64], f: &[f64], g: &[f64]) -> Vec<f64> {
    scheme.evaluate(u, f, g).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controls::Sym2;
    use crate::mesh::coarse_mesh;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scheme(mesh: &Mesh, m: f64, n_angles: usize, n_a: usize) -> Scheme<'_> {
        Scheme::new(mesh, ControlGrid::new(n_angles, n_a).unwrap(), StencilConfig::new(m).unwrap()).unwrap()
    }

    fn deepest_node(mesh: &Mesh) -> usize {
        *mesh
            .interior_nodes()
            .iter()
            .max_by(|&&a, &&b| polygon_depth(mesh, mesh.node(a)).total_cmp(&polygon_depth(mesh, mesh.node(b))))
            .unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(StencilConfig::new(0.0).is_err());
        assert!(StencilConfig::new(f64::NAN).is_err());
        assert!(StencilConfig::new(2.0).unwrap().with_min_k(0.0).is_err());
    }

    #[test]
    fn stencil_size_unclamped_and_clamped() {
        let mesh = coarse_mesh().unwrap();
        let cfg = StencilConfig::new(1.0).unwrap();
        let i = deepest_node(&mesh);
        let k = stencil_size(&mesh, i, Point::new(1.0, 0.0), &cfg).unwrap();
        assert_eq!(k, mesh.h_avg());
        assert!(matches!(
            stencil_size(&mesh, 0, Point::new(1.0, 0.0), &cfg),
            Err(Error::BoundaryNode(0))
        ));
        // wide stencil: limited by the exit distance
        let cfg = StencilConfig::new(50.0).unwrap();
        let x = mesh.node(i);
        let sigma = Point::new(0.0, 1.0);
        let k = stencil_size(&mesh, i, sigma, &cfg).unwrap();
        let expected = polygon_exit(&mesh, x, sigma).min(polygon_exit(&mesh, x, -sigma));
        assert_eq!(k, expected);
        assert!(k < 50.0 * mesh.h_avg());
    }

    #[test]
    fn stencil_steps_are_maximal_and_inside() {
        let mesh = coarse_mesh().unwrap().refine_uniform().unwrap();
        let cfg = StencilConfig::new(8.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let inside = |p: Point| {
            // brute-force point-in-mesh test
            (0..mesh.num_triangles()).any(|t| {
                let [a, b, c] = mesh.triangle_vertices(t);
                let eps = -1e-12;
                (b - a).cross(p - a) >= eps && (c - b).cross(p - b) >= eps && (a - c).cross(p - c) >= eps
            })
        };
        for _ in 0..40 {
            let i = mesh.interior_nodes()[rng.gen_range(0..mesh.interior_nodes().len())];
            let sigma = Point::from_angle(rng.gen_range(0.0..std::f64::consts::PI));
            let k = stencil_size(&mesh, i, sigma, &cfg).unwrap();
            let x = mesh.node(i);
            assert!(inside(x + sigma * k) && inside(x - sigma * k));
            if k < cfg.nominal_k(&mesh) {
                // bisection for the largest symmetric step
                let (mut lo, mut hi) = (0.0, cfg.nominal_k(&mesh));
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if inside(x + sigma * mid) && inside(x - sigma * mid) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                assert!((k - lo).abs() <= 1e-10, "{k} vs {lo}");
            }
        }
    }

    #[test]
    fn stencil_rows_stay_in_the_mesh() {
        let mesh = coarse_mesh().unwrap();
        let s = scheme(&mesh, 16.0, 8, 3);
        for &i in mesh.interior_nodes() {
            for c in 0..s.grid().len() {
                let row = s.stencil_row(i, c).unwrap();
                for j in 0..2 {
                    assert!(row.k[j] <= 16.0 * mesh.h_avg() + 1e-15);
                    for side in 0..2 {
                        let p = row.probes[j][side];
                        assert!(mesh.try_locate(p).is_some(), "probe {p:?} outside");
                        assert!((row.locations[j][side].position(&mesh).dist(p)) <= 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn affine_functions_are_annihilated() {
        let mesh = coarse_mesh().unwrap().refine_uniform().unwrap();
        let s = scheme(&mesh, 4.0, 16, 5);
        let ell = |p: Point| 3.0 * p.x - 2.0 * p.y + 1.0;
        let v: Vec<f64> = mesh.nodes().iter().map(|&p| ell(p)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let policy = Policy::from_indices(
            s.grid(),
            (0..mesh.num_nodes()).map(|_| rng.gen_range(0..s.grid().len())).collect(),
        )
        .unwrap();
        let zeros = vec![0.0; mesh.num_nodes()];
        let sys = s.assemble(&policy, &zeros, &v).unwrap();
        let r = sys.residual(&v);
        for &i in mesh.interior_nodes() {
            assert!(r[i].abs() <= 1e-9 * 4.0, "row {i}: {}", r[i]);
        }
        for i in 0..mesh.num_nodes() {
            if mesh.is_boundary(i) {
                assert_eq!(r[i], 0.0);
            }
        }
        let res = scheme_residual(&s, &v, &zeros, &v);
        assert!(res.iter().all(|x| x.abs() <= 1e-8));
    }

    #[test]
    fn rows_have_m_matrix_structure() {
        let mesh = coarse_mesh().unwrap();
        let s = scheme(&mesh, 8.0, 16, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let zeros = vec![0.0; mesh.num_nodes()];
        for _ in 0..10 {
            let policy = Policy::from_indices(
                s.grid(),
                (0..mesh.num_nodes()).map(|_| rng.gen_range(0..s.grid().len())).collect(),
            )
            .unwrap();
            let sys = s.assemble(&policy, &zeros, &zeros).unwrap();
            assert!(sys.matrix.has_m_matrix_signs());
            for &i in mesh.interior_nodes() {
                let (_, vals) = sys.matrix.row(i);
                assert!(vals.iter().sum::<f64>().abs() <= 1e-10 * sys.matrix.get(i, i));
            }
        }
    }

    #[test]
    fn quadratic_row_action_is_minus_trace() {
        let mesh = coarse_mesh().unwrap().refine_uniform().unwrap();
        let s = scheme(&mesh, 2.0, 8, 3);
        let i = deepest_node(&mesh);
        let phi = |p: Point| 0.5 * p.norm_sq();
        let x = mesh.node(i);
        let v = s.operator_with_sampler(i, s.grid().isotropic_index(), phi(x), phi).unwrap();
        assert!((v + 1.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn argmax_examples() {
        let mesh = coarse_mesh().unwrap().refine_uniform().unwrap();
        let s = scheme(&mesh, 2.0, 64, 33);
        let i = deepest_node(&mesh);
        let x = mesh.node(i);

        let phi = |p: Point| 0.5 * p.norm_sq();
        let (v, c) = s.hamiltonian_with_sampler(i, phi(x), 2.0, phi).unwrap();
        assert!(v.abs() < 1e-12);
        assert_eq!(c, s.grid().isotropic_index());

        // ½x₁²: the maximizer has the smallest B₁₁ on the grid
        let phi = |p: Point| 0.5 * p.x * p.x;
        let (v, c) = s.hamiltonian_with_sampler(i, phi(x), 0.0, phi).unwrap();
        assert!(v.abs() < 1e-12);
        let b11 = |k: usize| s.grid().get(k).control.matrix().xx;
        let min_b11 = (0..s.grid().len()).map(b11).fold(f64::INFINITY, f64::min);
        assert_eq!(b11(c), min_b11);
        assert_eq!(s.grid().get(c).control.a(), 0.0);
    }

    #[test]
    fn zero_data_gives_zero_hamiltonian() {
        let mesh = coarse_mesh().unwrap();
        let s = scheme(&mesh, 4.0, 16, 5);
        let z = vec![0.0; mesh.num_nodes()];
        let (res, controls) = s.evaluate(&z, &z, &z);
        assert!(res.iter().all(|&r| r == 0.0));
        // every control ties, so the lowest index wins
        for &i in mesh.interior_nodes() {
            assert_eq!(controls[i], 0);
        }
    }

    #[test]
    fn hamiltonian_is_monotone() {
        let mesh = coarse_mesh().unwrap();
        let s = scheme(&mesh, 4.0, 16, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = mesh.num_nodes();
        let f: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..3.0)).collect();
        let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for _ in 0..20 {
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let u: Vec<f64> = v.iter().map(|x| x + rng.gen_range(0.0..0.5)).collect();
            for &i in mesh.interior_nodes() {
                let sv = rng.gen_range(-1.0..1.0);
                let (hu, _) = s.hamiltonian_at_node(&u, i, sv, &f, &g);
                let (hv, _) = s.hamiltonian_at_node(&v, i, sv, &f, &g);
                assert!(hu <= hv + 1e-12);
                let (hs, _) = s.hamiltonian_at_node(&v, i, sv + 0.1, &f, &g);
                assert!(hs > hv);
            }
        }
    }

    #[test]
    fn grid_sup_matches_exact_operator_on_quadratics() {
        let mesh = coarse_mesh().unwrap().refine_uniform().unwrap();
        let i = deepest_node(&mesh);
        let x = mesh.node(i);
        let hess = Sym2::new(1.3, 0.4, 0.7);
        let phi = |p: Point| 0.5 * hess.quad(p);
        let f = 0.9;
        let exact = crate::controls::exact_hamiltonian(&hess, f).unwrap();
        let mut prev_gap = f64::INFINITY;
        for (na, nn) in [(4, 3), (8, 5), (16, 9), (32, 17)] {
            let s = scheme(&mesh, 2.0, na, nn);
            let (v, _) = s.hamiltonian_with_sampler(i, phi(x), f, phi).unwrap();
            let gap = exact - v;
            assert!(gap >= -1e-10 && gap <= prev_gap + 1e-10);
            prev_gap = gap;
        }
        assert!(prev_gap < 1e-2);
    }

    #[test]
    fn consistency_rate_on_a_quartic() {
        let grid = ControlGrid::new(16, 9).unwrap();
        let phi = |p: Point| p.norm_sq().powi(2);
        let x = Point::new(0.3, -0.2);
        let r2 = x.norm_sq();
        let hess = Sym2::new(4.0 * r2 + 8.0 * x.x * x.x, 8.0 * x.x * x.y, 4.0 * r2 + 8.0 * x.y * x.y);
        let f = 1.0;
        let target = grid.sup_linear(&hess, f);
        let err = |k: f64| {
            let steps = vec![k; grid.directions().len()];
            (sampled_hamiltonian(&grid, x, &steps, phi(x), f, phi).0 - target).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!((ratio - 4.0).abs() < 0.1, "{ratio}");
    }
}
