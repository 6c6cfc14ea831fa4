//! C interface to `ma_bellman`.
//!
//! Meshes and solutions are opaque handles created by `ma_*` constructors and
//! released with the matching `*_free` function. Every fallible call returns
//! an [`MaStatus`]; the message of the last failure on the calling thread is
//! available from [`ma_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ma_bellman::experiments::{error_norms, nonsmooth_problem, quartic_problem, ErrorNorms, StudySettings};
use ma_bellman::howard::howard_solve;
use ma_bellman::mesh::{build_domain_mesh, coarse_mesh};
use ma_bellman::{ControlGrid, DomainGeometry, Error, HowardOptions, Mesh, ProblemSpec, Scheme, SolveReport, StencilConfig};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    MeshError = 3,
    NotConverged = 4,
    SolverError = 5,
    IoError = 6,
    Panic = 7,
}

/// Built-in test problems with known solutions.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaProblem {
    Quartic = 0,
    Nonsmooth = 1,
}

/// Solver settings. Obtain defaults from [`ma_default_options`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaOptions {
    /// Stencil factor: nominal stencil size is `m * h_avg`.
    pub m: f64,
    pub n_angles: usize,
    pub n_a: usize,
    pub tol: f64,
    pub max_iter: usize,
}

/// Relative discretization errors against the exact solution.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MaErrorNorms {
    pub l2_rel: f64,
    pub linf_rel: f64,
    pub h1_rel: f64,
}

/// Opaque mesh handle.
pub struct MaMesh {
    mesh: Mesh,
}

/// Opaque solution handle.
pub struct MaSolution {
    report: SolveReport,
    errors: Option<ErrorNorms>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = CString::new(text).unwrap_or_default());
}

fn status_of(err: &Error) -> MaStatus {
    match err {
        Error::DegenerateMesh(_) | Error::InvalidMesh(_) => MaStatus::MeshError,
        Error::LinearSolver(_) => MaStatus::SolverError,
        Error::NotConverged { .. } => MaStatus::NotConverged,
        Error::Io { .. } => MaStatus::IoError,
        _ => MaStatus::InvalidArgument,
    }
}

struct Failure(MaStatus, String);

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        Failure(status_of(&err), err.to_string())
    }
}

fn fail(status: MaStatus, message: impl Into<String>) -> Failure {
    Failure(status, message.into())
}

/// Runs `body`, converting errors and panics into status codes.
fn guard(body: impl FnOnce() -> Result<MaStatus, Failure>) -> MaStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(status)) => {
            if status == MaStatus::Ok {
                set_error("");
            }
            status
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {message}"));
            MaStatus::Panic
        }
    }
}

unsafe fn mesh_ref<'a>(mesh: *const MaMesh) -> Result<&'a Mesh, Failure> {
    mesh.as_ref().map(|m| &m.mesh).ok_or_else(|| fail(MaStatus::NullPointer, "mesh is null"))
}

unsafe fn solution_ref<'a>(solution: *const MaSolution) -> Result<&'a MaSolution, Failure> {
    solution.as_ref().ok_or_else(|| fail(MaStatus::NullPointer, "solution is null"))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(fail(MaStatus::NullPointer, "output pointer is null"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn copy_out<T: Copy>(src: &[T], dst: *mut T, len: usize) -> Result<MaStatus, Failure> {
    if dst.is_null() {
        return Err(fail(MaStatus::NullPointer, "output buffer is null"));
    }
    if len < src.len() {
        return Err(fail(MaStatus::InvalidArgument, format!("buffer holds {len} values, {} needed", src.len())));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    Ok(MaStatus::Ok)
}

/// Message describing the last failed call on this thread, or an empty
/// string. The pointer stays valid until the next `ma_*` call on the thread.
#[no_mangle]
pub extern "C" fn ma_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ma_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default settings: `m = 2`, a 64 x 33 control grid, tolerance `1e-6` and at
/// most 100 Howard iterations.
#[no_mangle]
pub extern "C" fn ma_default_options() -> MaOptions {
    let study = StudySettings::default();
    MaOptions {
        m: 2.0,
        n_angles: study.n_angles,
        n_a: study.n_a,
        tol: study.howard.tol,
        max_iter: study.howard.max_iter,
    }
}

/// Creates the level-0 mesh of the disk-union-square domain.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn ma_mesh_coarse(out: *mut *mut MaMesh) -> MaStatus {
    guard(|| {
        emit(out, MaMesh { mesh: coarse_mesh()? })?;
        Ok(MaStatus::Ok)
    })
}

/// Meshes the disk-union-square domain with target edge length `target_h`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn ma_mesh_build(target_h: f64, out: *mut *mut MaMesh) -> MaStatus {
    guard(|| {
        emit(out, MaMesh { mesh: build_domain_mesh(DomainGeometry::DiskUnionSquare, target_h)? })?;
        Ok(MaStatus::Ok)
    })
}

/// Creates a new mesh by `levels` uniform red refinements of `mesh`.
///
/// # Safety
/// `mesh` must be a live handle and `out` a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn ma_mesh_refine(mesh: *const MaMesh, levels: usize, out: *mut *mut MaMesh) -> MaStatus {
    guard(|| {
        let refined = mesh_ref(mesh)?.refined(levels)?;
        emit(out, MaMesh { mesh: refined })?;
        Ok(MaStatus::Ok)
    })
}

/// Number of nodes, or 0 for a null handle.
///
/// # Safety
/// `mesh` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ma_mesh_num_nodes(mesh: *const MaMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.mesh.num_nodes())
}

/// Number of triangles, or 0 for a null handle.
///
/// # Safety
/// `mesh` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ma_mesh_num_triangles(mesh: *const MaMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.mesh.num_triangles())
}

/// Average triangle diameter, or NaN for a null handle.
///
/// # Safety
/// `mesh` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ma_mesh_h_avg(mesh: *const MaMesh) -> f64 {
    mesh.as_ref().map_or(f64::NAN, |m| m.mesh.h_avg())
}

/// Copies node coordinates as interleaved `x, y` pairs into `xy`, which must
/// hold at least `2 * num_nodes` values.
///
/// # Safety
/// `mesh` must be a live handle and `xy` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ma_mesh_copy_nodes(mesh: *const MaMesh, xy: *mut f64, len: usize) -> MaStatus {
    guard(|| {
        let coords: Vec<f64> = mesh_ref(mesh)?.nodes().iter().flat_map(|p| [p.x, p.y]).collect();
        copy_out(&coords, xy, len)
    })
}

/// Copies zero-based triangle vertex indices, three per triangle.
///
/// # Safety
/// `mesh` must be a live handle and `vertices` must point to `len` writable
/// `size_t` values.
#[no_mangle]
pub unsafe extern "C" fn ma_mesh_copy_triangles(mesh: *const MaMesh, vertices: *mut usize, len: usize) -> MaStatus {
    guard(|| {
        let flat: Vec<usize> = mesh_ref(mesh)?.triangles().iter().flatten().copied().collect();
        copy_out(&flat, vertices, len)
    })
}

/// Copies one flag per node: 1 on the boundary, 0 inside.
///
/// # Safety
/// `mesh` must be a live handle and `flags` must point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ma_mesh_copy_boundary_flags(mesh: *const MaMesh, flags: *mut u8, len: usize) -> MaStatus {
    guard(|| {
        let m = mesh_ref(mesh)?;
        let bytes: Vec<u8> = (0..m.num_nodes()).map(|i| m.is_boundary(i) as u8).collect();
        copy_out(&bytes, flags, len)
    })
}

/// Writes the mesh in the crate's text format.
///
/// # Safety
/// `mesh` must be a live handle and `path` a NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn ma_mesh_write(mesh: *const MaMesh, path: *const c_char) -> MaStatus {
    guard(|| {
        let m = mesh_ref(mesh)?;
        if path.is_null() {
            return Err(fail(MaStatus::NullPointer, "path is null"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| fail(MaStatus::InvalidArgument, "path is not valid UTF-8"))?;
        m.write(Path::new(path))?;
        Ok(MaStatus::Ok)
    })
}

/// Releases a mesh. Null is ignored. Solutions do not borrow their mesh, so
/// the order of release does not matter.
///
/// # Safety
/// `mesh` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ma_mesh_free(mesh: *mut MaMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

fn solve_with(mesh: &Mesh, f: &[f64], g: &[f64], opts: &MaOptions) -> Result<SolveReport, Failure> {
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(fail(MaStatus::InvalidArgument, "tol must be positive and max_iter at least 1"));
    }
    let grid = ControlGrid::new(opts.n_angles, opts.n_a)?;
    let scheme = Scheme::new(mesh, grid, StencilConfig::new(opts.m)?)?;
    let howard = HowardOptions::default().with_tol(opts.tol).with_max_iter(opts.max_iter);
    Ok(howard_solve(&scheme, f, g, &howard)?)
}

unsafe fn finish(out: *mut *mut MaSolution, solution: MaSolution) -> Result<MaStatus, Failure> {
    let converged = solution.report.converged;
    let iterations = solution.report.iterations;
    emit(out, solution)?;
    if converged {
        Ok(MaStatus::Ok)
    } else {
        Err(fail(MaStatus::NotConverged, format!("no convergence within {iterations} iterations")))
    }
}

/// Solves a built-in problem on `mesh`. `options` may be null for defaults.
///
/// On `MA_STATUS_NOT_CONVERGED` the last iterate is still returned in `out`
/// and must be freed.
///
/// # Safety
/// `mesh` must be a live handle, `problem` one of the declared enumerators,
/// `options` null or valid, and `out` a valid pointer to writable storage for
/// one handle.
#[no_mangle]
pub unsafe extern "C" fn ma_solve(
    mesh: *const MaMesh,
    problem: MaProblem,
    options: *const MaOptions,
    out: *mut *mut MaSolution,
) -> MaStatus {
    guard(|| {
        let m = mesh_ref(mesh)?;
        let opts = options.as_ref().copied().unwrap_or_else(|| ma_default_options());
        let spec: ProblemSpec = match problem {
            MaProblem::Quartic => quartic_problem(),
            MaProblem::Nonsmooth => nonsmooth_problem(),
        };
        let (f, g) = spec.nodal_data(m)?;
        let report = solve_with(m, &f, &g, &opts)?;
        let errors = Some(error_norms(m, &report.solution(m), &spec)?);
        finish(out, MaSolution { report, errors })
    })
}

/// Solves with nodal source `f >= 0` and boundary data `g`, both of length
/// `num_nodes`. Only boundary entries of `g` are used.
///
/// # Safety
/// `mesh` must be a live handle, `f` and `g` must point to `len` readable
/// doubles, `options` must be null or valid, and `out` a valid pointer to
/// writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn ma_solve_custom(
    mesh: *const MaMesh,
    f: *const f64,
    g: *const f64,
    len: usize,
    options: *const MaOptions,
    out: *mut *mut MaSolution,
) -> MaStatus {
    guard(|| {
        let m = mesh_ref(mesh)?;
        if f.is_null() || g.is_null() {
            return Err(fail(MaStatus::NullPointer, "data array is null"));
        }
        if len != m.num_nodes() {
            return Err(fail(
                MaStatus::InvalidArgument,
                format!("expected {} nodal values, got {len}", m.num_nodes()),
            ));
        }
        let opts = options.as_ref().copied().unwrap_or_else(|| ma_default_options());
        let f = std::slice::from_raw_parts(f, len);
        let g = std::slice::from_raw_parts(g, len);
        let report = solve_with(m, f, g, &opts)?;
        finish(out, MaSolution { report, errors: None })
    })
}

/// Number of nodal values in the solution, or 0 for a null handle.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ma_solution_len(solution: *const MaSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.report.values.len())
}

/// Copies the nodal values of the solution.
///
/// # Safety
/// `solution` must be a live handle and `values` must point to `len`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ma_solution_copy_values(solution: *const MaSolution, values: *mut f64, len: usize) -> MaStatus {
    guard(|| copy_out(&solution_ref(solution)?.report.values, values, len))
}

/// Number of linear solves performed, or 0 for a null handle.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ma_solution_iterations(solution: *const MaSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.report.iterations)
}

/// Sup-norm change of the last Howard step, or NaN for a null handle.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ma_solution_final_step(solution: *const MaSolution) -> f64 {
    solution.as_ref().map_or(f64::NAN, |s| s.report.final_step())
}

/// Whether the Howard iteration met its tolerance.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ma_solution_converged(solution: *const MaSolution) -> bool {
    solution.as_ref().is_some_and(|s| s.report.converged)
}

/// Relative errors against the exact solution. Only available for solutions
/// of built-in problems.
///
/// # Safety
/// `solution` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ma_solution_errors(solution: *const MaSolution, out: *mut MaErrorNorms) -> MaStatus {
    guard(|| {
        let s = solution_ref(solution)?;
        if out.is_null() {
            return Err(fail(MaStatus::NullPointer, "output pointer is null"));
        }
        let e = s
            .errors
            .ok_or_else(|| fail(MaStatus::InvalidArgument, "no exact solution for this problem"))?;
        *out = MaErrorNorms {
            l2_rel: e.l2_rel,
            linf_rel: e.linf_rel,
            h1_rel: e.h1_rel,
        };
        Ok(MaStatus::Ok)
    })
}

/// Releases a solution. Null is ignored.
///
/// # Safety
/// `solution` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ma_solution_free(solution: *mut MaSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}
