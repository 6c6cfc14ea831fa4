//! Howard's policy iteration for the discrete Bellman system.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use crate::controls::{Control, ControlGrid};
use crate::discretization::Scheme;
use crate::error::{Error, Result};
use crate::linalg::solve_scaled;
use crate::mesh::{FeFunction, Mesh};

/// Relative tolerance of each linear solve, measured on the row-scaled
/// residual.
pub const INNER_TOL: f64 = 1e-12;

/// One grid control per node. Boundary entries are placeholders and hold
/// the isotropic control.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Policy {
    controls: Vec<usize>,
}

impl Policy {
    /// `B = Id/2` at every node.
    pub fn isotropic(mesh: &Mesh, grid: &ControlGrid) -> Self {
        Policy {
            controls: vec![grid.isotropic_index(); mesh.num_nodes()],
        }
    }

    /// Policy from grid indices, one per node.
    pub fn from_indices(grid: &ControlGrid, controls: Vec<usize>) -> Result<Self> {
        if let Some(&c) = controls.iter().find(|&&c| c >= grid.len()) {
            return Err(Error::InvalidArgument(format!("control index {c} not in the grid")));
        }
        Ok(Policy { controls })
    }

    pub fn len(&self) -> usize {
        self.controls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.controls.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.controls
    }

    pub fn control(&self, grid: &ControlGrid, node: usize) -> Control {
        grid.get(self.controls[node]).control
    }
}

#[derive(Clone, Debug)]
pub struct HowardOptions {
    /// Stop once `‖v^{ℓ+1} - v^ℓ‖_∞ < tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Starting policy; isotropic when `None`.
    pub initial: Option<Policy>,
}

impl Default for HowardOptions {
    fn default() -> Self {
        HowardOptions {
            tol: 1e-6,
            max_iter: 100,
            initial: None,
        }
    }
}

impl HowardOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_initial(mut self, policy: Policy) -> Self {
        self.initial = Some(policy);
        self
    }
}

/// Per-iteration history of a Howard run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IterationRecord {
    /// `‖v^ℓ - v^{ℓ-1}‖_∞`; infinite for the first solve.
    pub step: f64,
    /// `‖H_h(v^ℓ)‖_∞`, the scheme residual of the iterate.
    pub residual: f64,
    /// `max_i (v^ℓ_i - v^{ℓ-1}_i)`; negative infinity for the first solve.
    pub max_increase: f64,
    /// Row-scaled residual reached by the linear solver.
    pub linear_residual: f64,
    /// Seconds since the start of the run.
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub values: Vec<f64>,
    pub policy: Policy,
    /// Number of policy solves.
    pub iterations: usize,
    pub history: Vec<IterationRecord>,
    pub converged: bool,
    pub seconds: f64,
}

impl SolveReport {
    pub fn solution<'m>(&self, mesh: &'m Mesh) -> FeFunction<'m> {
        FeFunction::new(mesh, self.values.clone())
    }

    pub fn steps(&self) -> Vec<f64> {
        self.history.iter().map(|r| r.step).collect()
    }

    pub fn final_step(&self) -> f64 {
        self.history.last().map_or(f64::INFINITY, |r| r.step)
    }

    pub fn final_residual(&self) -> f64 {
        self.history.last().map_or(f64::INFINITY, |r| r.residual)
    }

    /// Largest increase of any nodal value between consecutive iterates,
    /// ignoring the first solve.
    pub fn max_increase(&self) -> f64 {
        self.history
            .iter()
            .skip(1)
            .map(|r| r.max_increase)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// History as CSV with header `iter,step_inf,residual_inf,seconds`.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iter,step_inf,residual_inf,seconds\n");
        for (i, r) in self.history.iter().enumerate() {
            let _ = writeln!(out, "{},{:e},{:e},{:.6}", i + 1, r.step, r.residual, r.seconds);
        }
        out
    }

    pub fn write_trace(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.trace_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Maximizing control at every interior node for the current iterate,
/// together with the scheme residual of `v`.
pub fn policy_improve(scheme: &Scheme<'_>, v: &[f64], f: &[f64], g: &[f64]) -> (Policy, Vec<f64>) {
    let (residual, controls) = scheme.evaluate(v, f, g);
    (Policy { controls }, residual)
}

/// Solves `A v + b = 0` for a fixed policy. Returns the solution and the
/// row-scaled residual of the linear solve.
pub fn policy_solve(scheme: &Scheme<'_>, policy: &Policy, f: &[f64], g: &[f64]) -> Result<(Vec<f64>, f64)> {
    policy_solve_from(scheme, policy, f, g, None)
}

/// [`policy_solve`] with a starting guess for the iterative linear solver.
pub fn policy_solve_from(
    scheme: &Scheme<'_>,
    policy: &Policy,
    f: &[f64],
    g: &[f64],
    guess: Option<&[f64]>,
) -> Result<(Vec<f64>, f64)> {
    let system = scheme.assemble(policy, f, g)?;
    if !system.matrix.has_m_matrix_signs() {
        return Err(Error::LinearSolver("assembled matrix lacks the M-matrix sign pattern".into()));
    }
    let rhs = system.negated_rhs();
    let diag = system.matrix.diagonal();
    let scale = 1.0 + rhs.iter().zip(&diag).map(|(b, d)| (b / d).abs()).fold(0.0, f64::max);
    let (mut v, res) = solve_scaled(&system.matrix, &rhs, guess, INNER_TOL * scale)?;
    if res > INNER_TOL * scale * 1e3 {
        return Err(Error::LinearSolver(format!("linear residual {res:e} too large")));
    }
    // boundary rows are unit rows; pin the Dirichlet data exactly
    for (i, vi) in v.iter_mut().enumerate() {
        if scheme.mesh().is_boundary(i) {
            *vi = g[i];
        }
    }
    Ok((v, res / scale))
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> (f64, f64) {
    a.iter().zip(b).fold((0.0, f64::NEG_INFINITY), |(step, inc), (x, y)| {
        ((x - y).abs().max(step), (x - y).max(inc))
    })
}

/// Howard's algorithm from `options.initial` (isotropic by default): solve
/// the linear system of the current policy, stop once the step is below
/// `options.tol`, otherwise improve the policy.
///
/// Exceeding `max_iter` is not an error; the report has `converged = false`.
pub fn howard_solve(scheme: &Scheme<'_>, f: &[f64], g: &[f64], options: &HowardOptions) -> Result<SolveReport> {
    let mesh = scheme.mesh();
    let n = mesh.num_nodes();
    if f.len() != n || g.len() != n {
        return Err(Error::InvalidArgument("f and g need one value per node".into()));
    }
    if let Some(i) = (0..n).find(|&i| !mesh.is_boundary(i) && !(f[i] >= 0.0)) {
        return Err(Error::InvalidArgument(format!("source term negative at node {i}: {}", f[i])));
    }
    if !(options.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", options.tol)));
    }
    let start = Instant::now();
    let mut policy = match &options.initial {
        Some(p) if p.len() != n => {
            return Err(Error::InvalidArgument("initial policy has the wrong length".into()))
        }
        Some(p) => Policy::from_indices(scheme.grid(), p.controls.clone())?,
        None => Policy::isotropic(mesh, scheme.grid()),
    };
    let mut history = Vec::new();
    let mut previous: Option<Vec<f64>> = None;
    for _ in 0..options.max_iter {
        let (v, linear_residual) = policy_solve_from(scheme, &policy, f, g, previous.as_deref())?;
        let (step, max_increase) = match &previous {
            Some(p) => max_abs_diff(&v, p),
            None => (f64::INFINITY, f64::NEG_INFINITY),
        };
        let (next, residual) = policy_improve(scheme, &v, f, g);
        history.push(IterationRecord {
            step,
            residual: residual.iter().fold(0.0, |m, r| r.abs().max(m)),
            max_increase,
            linear_residual,
            seconds: start.elapsed().as_secs_f64(),
        });
        if step < options.tol {
            return Ok(SolveReport {
                values: v,
                iterations: history.len(),
                history,
                policy,
                converged: true,
                seconds: start.elapsed().as_secs_f64(),
            });
        }
        policy = next;
        previous = Some(v);
    }
    Ok(SolveReport {
        values: previous.unwrap_or_else(|| vec![0.0; n]),
        iterations: history.len(),
        history,
        policy,
        converged: false,
        seconds: start.elapsed().as_secs_f64(),
    })
}
