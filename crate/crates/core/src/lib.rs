//! Solver for the Dirichlet Monge-Ampère problem `det D²u = (f/2)²` on
//! unstructured triangular meshes.
//!
//! The equation is rewritten as the Bellman problem
//! `sup_B (-B : D²u + f √det B) = 0` over trace-one positive semi-definite
//! controls `B`. The Bellman operator is discretized with monotone wide-stencil
//! second differences whose probe values come from P1 interpolation, and the
//! resulting nonlinear system is solved with Howard's policy iteration.
//!
//! Module map:
//!
//! - [`mesh`]: the circle-union-square domain, mesh generation and uniform
//!   refinement, point location and P1 evaluation.
//! - [`controls`]: the factorized control set, its finite grid, and exact
//!   Bellman / Monge-Ampère oracles.
//! - [`discretization`]: stencil sizing, per-policy sparse systems, and the
//!   discrete Hamiltonian.
//! - [`howard`]: policy iteration.
//! - [`experiments`]: benchmark problems, error norms and convergence studies.
//! - [`cli`]: the command line front end used by the `ma-bellman` binary.

pub mod cli;
pub mod controls;
pub mod discretization;
mod error;
pub mod experiments;
pub mod howard;
pub mod linalg;
pub mod mesh;

pub use controls::{Control, ControlGrid, Sym2};
pub use discretization::{PolicySystem, Scheme, StencilConfig};
pub use error::{Error, Result};
pub use experiments::{ErrorReport, ProblemSpec};
pub use howard::{HowardOptions, Policy, SolveReport};
pub use mesh::{DomainGeometry, FeFunction, FePoint, Mesh, Point};

/// Worker-count cap read by [`init_thread_pool`].
pub const THREADS_ENV: &str = "MA_BELLMAN_THREADS";

/// Configures the global rayon pool from `MA_BELLMAN_THREADS`, if set.
///
/// Safe to call more than once; only the first successful call has an effect.
pub fn init_thread_pool() {
    if let Some(n) = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}
