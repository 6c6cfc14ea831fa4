//! Benchmark problems, error norms against exact solutions, and
//! convergence studies over mesh levels and stencil factors.

use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use crate::controls::ControlGrid;
use crate::discretization::{Scheme, StencilConfig};
use crate::error::{Error, Result};
use crate::howard::{howard_solve, HowardOptions, SolveReport};
use crate::mesh::{coarse_mesh, FeFunction, Mesh, Point};

type ScalarField = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
type VectorField = Arc<dyn Fn(Point) -> Point + Send + Sync>;

/// A Dirichlet Monge-Ampère problem: source `f ≥ 0`, boundary data `g`, and
/// optionally the exact solution and its gradient.
#[derive(Clone)]
pub struct ProblemSpec {
    name: String,
    exact: Option<ScalarField>,
    gradient: Option<VectorField>,
    source: ScalarField,
    boundary: ScalarField,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("exact", &self.exact.is_some())
            .field("gradient", &self.gradient.is_some())
            .finish()
    }
}

/// Smooth solution `u = |x|⁴` with `f = 8√3 |x|²`.
pub fn quartic_problem() -> ProblemSpec {
    let u = |p: Point| p.norm_sq().powi(2);
    ProblemSpec {
        name: "quartic".into(),
        exact: Some(Arc::new(u)),
        gradient: Some(Arc::new(|p: Point| p * (4.0 * p.norm_sq()))),
        source: Arc::new(|p: Point| 8.0 * 3f64.sqrt() * p.norm_sq()),
        boundary: Arc::new(u),
    }
}

/// Degenerate problem `f = 0` with the non-smooth solution `u = |x₁|`.
pub fn nonsmooth_problem() -> ProblemSpec {
    let u = |p: Point| p.x.abs();
    ProblemSpec {
        name: "nonsmooth".into(),
        exact: Some(Arc::new(u)),
        gradient: Some(Arc::new(|p: Point| Point::new(sign(p.x), 0.0))),
        source: Arc::new(|_| 0.0),
        boundary: Arc::new(u),
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl ProblemSpec {
    /// A problem given by its data only.
    pub fn custom(
        name: impl Into<String>,
        source: impl Fn(Point) -> f64 + Send + Sync + 'static,
        boundary: impl Fn(Point) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ProblemSpec {
            name: name.into(),
            exact: None,
            gradient: None,
            source: Arc::new(source),
            boundary: Arc::new(boundary),
        }
    }

    pub fn with_exact(mut self, u: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        self.exact = Some(Arc::new(u));
        self
    }

    pub fn with_gradient(mut self, grad: impl Fn(Point) -> Point + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(grad));
        self
    }

    /// Looks up a built-in problem by name.
    pub fn by_name(name: &str) -> Result<Self> {
        name.parse()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn has_exact(&self) -> bool {
        self.exact.is_some()
    }

    pub fn exact(&self, p: Point) -> Option<f64> {
        self.exact.as_ref().map(|u| u(p))
    }

    pub fn gradient(&self, p: Point) -> Option<Point> {
        self.gradient.as_ref().map(|g| g(p))
    }

    pub fn source(&self, p: Point) -> f64 {
        (self.source)(p)
    }

    pub fn boundary(&self, p: Point) -> f64 {
        (self.boundary)(p)
    }

    /// Nodal samples `(f, g)`; `g` is evaluated at every node but only its
    /// boundary entries enter the scheme.
    pub fn nodal_data(&self, mesh: &Mesh) -> Result<(Vec<f64>, Vec<f64>)> {
        let f: Vec<f64> = mesh.nodes().iter().map(|&p| self.source(p)).collect();
        if let Some(i) = f.iter().position(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "source of problem {} is not non-negative at node {i}",
                self.name
            )));
        }
        let g = mesh.nodes().iter().map(|&p| self.boundary(p)).collect();
        Ok((f, g))
    }
}

impl FromStr for ProblemSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quartic" => Ok(quartic_problem()),
            "nonsmooth" => Ok(nonsmooth_problem()),
            other => Err(Error::InvalidArgument(format!(
                "unknown problem '{other}' (expected quartic or nonsmooth)"
            ))),
        }
    }
}

/// Relative errors of a discrete solution.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ErrorNorms {
    pub l2_rel: f64,
    pub linf_rel: f64,
    pub h1_rel: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Norm {
    L2,
    Linf,
    H1,
}

impl ErrorNorms {
    pub fn get(&self, norm: Norm) -> f64 {
        match norm {
            Norm::L2 => self.l2_rel,
            Norm::Linf => self.linf_rel,
            Norm::H1 => self.h1_rel,
        }
    }
}

/// Relative L², L^∞ and full H¹ errors of `u_h` against the exact solution,
/// integrated on Ω_h with the edge-midpoint rule. L^∞ is taken over nodes
/// and quadrature points.
pub fn error_norms(mesh: &Mesh, u_h: &FeFunction<'_>, spec: &ProblemSpec) -> Result<ErrorNorms> {
    let u = spec
        .exact
        .as_ref()
        .ok_or_else(|| Error::MissingGradient(format!("problem {} has no exact solution", spec.name)))?;
    let grad = spec
        .gradient
        .as_ref()
        .ok_or_else(|| Error::MissingGradient(format!("problem {} has no exact gradient", spec.name)))?;
    let values = u_h.values();
    let (mut e_l2, mut n_l2, mut e_h1, mut n_h1) = (0.0, 0.0, 0.0, 0.0);
    let (mut e_inf, mut n_inf) = (0.0f64, 0.0f64);
    for (i, &p) in mesh.nodes().iter().enumerate() {
        let exact = u(p);
        e_inf = e_inf.max((values[i] - exact).abs());
        n_inf = n_inf.max(exact.abs());
    }
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let w = mesh.triangle_area(t) / 3.0;
        let grad_h = u_h.gradient(t);
        for e in 0..3 {
            let (a, b) = (tri[e], tri[(e + 1) % 3]);
            let mid = mesh.node(a).lerp(mesh.node(b), 0.5);
            let uh = 0.5 * (values[a] + values[b]);
            let exact = u(mid);
            let gx = grad(mid);
            e_l2 += w * (uh - exact).powi(2);
            n_l2 += w * exact * exact;
            e_h1 += w * (grad_h - gx).norm_sq();
            n_h1 += w * gx.norm_sq();
            e_inf = e_inf.max((uh - exact).abs());
            n_inf = n_inf.max(exact.abs());
        }
    }
    let rel = |e: f64, n: f64| if n > 0.0 { e / n } else { e };
    Ok(ErrorNorms {
        l2_rel: rel(e_l2.sqrt(), n_l2.sqrt()),
        linf_rel: rel(e_inf, n_inf),
        h1_rel: rel((e_l2 + e_h1).sqrt(), (n_l2 + n_h1).sqrt()),
    })
}

/// Settings shared by every cell of a study.
#[derive(Clone, Debug)]
pub struct StudySettings {
    pub n_angles: usize,
    pub n_a: usize,
    pub howard: HowardOptions,
}

impl Default for StudySettings {
    fn default() -> Self {
        StudySettings {
            n_angles: 64,
            n_a: 33,
            howard: HowardOptions::default(),
        }
    }
}

/// One `(level, m)` cell of a study.
#[derive(Clone, Debug, PartialEq)]
pub struct StudyCell {
    pub level: usize,
    pub dofs: usize,
    pub h_avg: f64,
    pub m: f64,
    pub iterations: usize,
    pub converged: bool,
    pub errors: ErrorNorms,
    /// `‖u_h‖_∞`.
    pub solution_max: f64,
    /// Largest nodal increase between consecutive Howard iterates after the
    /// first solve.
    pub max_increase: f64,
    pub final_step: f64,
    pub seconds: f64,
}

/// A cell whose solve failed.
#[derive(Clone, Debug, PartialEq)]
pub struct FailedCell {
    pub level: usize,
    pub m: f64,
    pub message: String,
}

#[derive(Clone, Debug, Default)]
pub struct ErrorReport {
    pub problem: String,
    pub cells: Vec<StudyCell>,
    pub failures: Vec<FailedCell>,
}

pub const CSV_HEADER: &str = "level,dofs,m,iterations,l2_rel,linf_rel,h1_rel,seconds";

impl ErrorReport {
    pub fn levels(&self) -> Vec<usize> {
        let mut levels: Vec<usize> = self.cells.iter().map(|c| c.level).collect();
        levels.dedup();
        levels
    }

    pub fn cell(&self, level: usize, m: f64) -> Option<&StudyCell> {
        self.cells.iter().find(|c| c.level == level && c.m == m)
    }

    /// Cell with the smallest error in `norm` on `level`.
    pub fn best(&self, level: usize, norm: Norm) -> Option<&StudyCell> {
        self.cells
            .iter()
            .filter(|c| c.level == level)
            .min_by(|a, b| a.errors.get(norm).total_cmp(&b.errors.get(norm)))
    }

    /// Least-squares slope of `log(best error)` against `log(h_avg)` over
    /// the levels of the study.
    pub fn order(&self, norm: Norm) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .levels()
            .into_iter()
            .filter_map(|l| self.best(l, norm))
            .map(|c| (c.h_avg.ln(), c.errors.get(norm).ln()))
            .collect();
        fit_slope(&pts)
    }

    /// Same as [`ErrorReport::order`] for a fixed stencil factor.
    pub fn order_for_m(&self, m: f64, norm: Norm) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .cells
            .iter()
            .filter(|c| c.m == m)
            .map(|c| (c.h_avg.ln(), c.errors.get(norm).ln()))
            .collect();
        fit_slope(&pts)
    }

    /// CSV with header [`CSV_HEADER`]; failed cells are omitted.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{CSV_HEADER}\n");
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.6e},{:.6e},{:.6e},{:.3}",
                c.level, c.dofs, c.m, c.iterations, c.errors.l2_rel, c.errors.linf_rel, c.errors.h1_rel, c.seconds
            );
        }
        out
    }

    /// Per-level table of the smallest error and its `m` for each norm.
    pub fn best_table(&self) -> String {
        let mut out = String::from("level,dofs,best_l2,m_l2,best_linf,m_linf,best_h1,m_h1\n");
        for level in self.levels() {
            let cells = [Norm::L2, Norm::Linf, Norm::H1].map(|n| self.best(level, n));
            let Some(first) = cells[0] else { continue };
            let _ = write!(out, "{},{}", level, first.dofs);
            for (norm, cell) in [Norm::L2, Norm::Linf, Norm::H1].iter().zip(cells) {
                let c = cell.unwrap();
                let _ = write!(out, ",{:.6e},{}", c.errors.get(*norm), c.m);
            }
            out.push('\n');
        }
        out
    }
}

fn fit_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Solves `spec` on `mesh` with stencil factor `m`.
pub fn solve_problem(mesh: &Mesh, spec: &ProblemSpec, m: f64, settings: &StudySettings) -> Result<SolveReport> {
    let grid = ControlGrid::new(settings.n_angles, settings.n_a)?;
    let scheme = Scheme::new(mesh, grid, StencilConfig::new(m)?)?;
    let (f, g) = spec.nodal_data(mesh)?;
    howard_solve(&scheme, &f, &g, &settings.howard)
}

/// Solves and measures one cell.
pub fn run_cell(mesh: &Mesh, level: usize, spec: &ProblemSpec, m: f64, settings: &StudySettings) -> Result<StudyCell> {
    let start = Instant::now();
    let report = solve_problem(mesh, spec, m, settings)?;
    let u_h = report.solution(mesh);
    let errors = error_norms(mesh, &u_h, spec)?;
    Ok(StudyCell {
        level,
        dofs: mesh.num_nodes(),
        h_avg: mesh.h_avg(),
        m,
        iterations: report.iterations,
        converged: report.converged,
        errors,
        solution_max: u_h.max_abs(),
        max_increase: report.max_increase(),
        final_step: report.final_step(),
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Meshes of the given refinement levels of the coarse mesh.
pub fn level_meshes(levels: &[usize]) -> Result<Vec<Mesh>> {
    let mut out = Vec::with_capacity(levels.len());
    let mut current = coarse_mesh()?;
    let mut at = 0;
    for &level in levels {
        if level < at {
            return Err(Error::InvalidArgument("levels must be increasing".into()));
        }
        while at < level {
            current = current.refine_uniform()?;
            at += 1;
        }
        out.push(current.clone());
    }
    Ok(out)
}

/// Runs every `(level, m)` cell. Failed cells are recorded and skipped.
pub fn convergence_study(
    spec: &ProblemSpec,
    levels: &[usize],
    m_values: &[f64],
    settings: &StudySettings,
) -> Result<ErrorReport> {
    if levels.is_empty() || m_values.is_empty() {
        return Err(Error::InvalidArgument("a study needs at least one level and one m".into()));
    }
    if let Some(m) = m_values.iter().find(|m| !(**m > 0.0)) {
        return Err(Error::InvalidArgument(format!("stencil factor must be positive, got {m}")));
    }
    let meshes = level_meshes(levels)?;
    let mut report = ErrorReport {
        problem: spec.name.clone(),
        ..ErrorReport::default()
    };
    for (&level, mesh) in levels.iter().zip(&meshes) {
        for &m in m_values {
            match run_cell(mesh, level, spec, m, settings) {
                Ok(cell) => report.cells.push(cell),
                Err(e) => report.failures.push(FailedCell {
                    level,
                    m,
                    message: e.to_string(),
                }),
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controls::{monge_ampere_residual, Sym2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quartic_data() {
        let q = quartic_problem();
        assert_eq!(q.exact(Point::new(0.0, 0.0)), Some(0.0));
        assert_eq!(q.source(Point::new(0.0, 0.0)), 0.0);
        assert!((q.source(Point::new(1.0, 0.0)) - 13.856406460551018).abs() < 1e-12);
        // finite-difference Hessian at (1,0)
        let u = |x: f64, y: f64| q.exact(Point::new(x, y)).unwrap();
        let h = 1e-4;
        let uxx = (u(1.0 + h, 0.0) - 2.0 * u(1.0, 0.0) + u(1.0 - h, 0.0)) / (h * h);
        let uyy = (u(1.0, h) - 2.0 * u(1.0, 0.0) + u(1.0, -h)) / (h * h);
        assert!((uxx - 12.0).abs() < 1e-5 && (uyy - 4.0).abs() < 1e-5);
        assert!((2.0 * (uxx * uyy).sqrt() - q.source(Point::new(1.0, 0.0))).abs() < 1e-5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let p = Point::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let r2 = p.norm_sq();
            let hess = Sym2::new(4.0 * r2 + 8.0 * p.x * p.x, 8.0 * p.x * p.y, 4.0 * r2 + 8.0 * p.y * p.y);
            let res = monge_ampere_residual(&hess, q.source(p)).unwrap();
            assert!(res.abs() <= 1e-9 * (1.0 + hess.det()));
        }
    }

    #[test]
    fn nonsmooth_data() {
        let p = nonsmooth_problem();
        assert_eq!(p.exact(Point::new(0.3, -0.8)), Some(0.3));
        assert_eq!(p.boundary(Point::new(-1.0, 0.0)), 1.0);
        assert_eq!(p.source(Point::new(0.2, 0.1)), 0.0);
        assert_eq!(p.gradient(Point::new(-0.2, 0.1)), Some(Point::new(-1.0, 0.0)));
        assert!(ProblemSpec::by_name("cubic").is_err());
    }

    #[test]
    fn norms_of_simple_functions() {
        let mesh = coarse_mesh().unwrap();
        let affine = ProblemSpec::custom("affine", |_| 0.0, |p| 2.0 * p.x - p.y + 0.5)
            .with_exact(|p| 2.0 * p.x - p.y + 0.5)
            .with_gradient(|_| Point::new(2.0, -1.0));
        let u_h = mesh.interpolate(|p| 2.0 * p.x - p.y + 0.5);
        let e = error_norms(&mesh, &u_h, &affine).unwrap();
        assert!(e.l2_rel <= 1e-10 && e.linf_rel <= 1e-10 && e.h1_rel <= 1e-10);

        let one = ProblemSpec::custom("one", |_| 0.0, |_| 1.0)
            .with_exact(|_| 1.0)
            .with_gradient(|_| Point::new(0.0, 0.0));
        let zero = FeFunction::zeros(&mesh);
        let e = error_norms(&mesh, &zero, &one).unwrap();
        assert!((e.l2_rel - 1.0).abs() < 1e-14 && (e.linf_rel - 1.0).abs() < 1e-14);

        let no_grad = ProblemSpec::custom("x", |_| 0.0, |_| 1.0).with_exact(|_| 1.0);
        assert!(matches!(error_norms(&mesh, &zero, &no_grad), Err(Error::MissingGradient(_))));
    }

    #[test]
    fn interpolation_error_is_second_order() {
        let q = quartic_problem();
        let meshes = level_meshes(&[1, 2, 3]).unwrap();
        let errs: Vec<f64> = meshes
            .iter()
            .map(|m| error_norms(m, &m.interpolate(|p| q.exact(p).unwrap()), &q).unwrap().l2_rel)
            .collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio - 4.0).abs() <= 1.2, "{ratio}");
        }
    }

    #[test]
    fn study_cell_matches_direct_solve() {
        let spec = quartic_problem();
        let settings = StudySettings {
            n_angles: 16,
            n_a: 5,
            ..StudySettings::default()
        };
        let report = convergence_study(&spec, &[0], &[2.0], &settings).unwrap();
        assert_eq!(report.cells.len(), 1);
        let mesh = coarse_mesh().unwrap();
        let direct = solve_problem(&mesh, &spec, 2.0, &settings).unwrap();
        let e = error_norms(&mesh, &direct.solution(&mesh), &spec).unwrap();
        assert_eq!(report.cells[0].errors, e);
        assert_eq!(report.cells[0].iterations, direct.iterations);
        let csv = report.to_csv();
        assert_eq!(csv.lines().next().unwrap(), CSV_HEADER);
        assert_eq!(csv.lines().count(), 2);
    }

    #[test]
    fn slope_fit() {
        let pts: Vec<(f64, f64)> = [0.1f64, 0.05, 0.025].iter().map(|h| (h.ln(), (3.0 * h * h).ln())).collect();
        assert!((fit_slope(&pts).unwrap() - 2.0).abs() < 1e-12);
        assert!(fit_slope(&pts[..1]).is_none());
    }
}
