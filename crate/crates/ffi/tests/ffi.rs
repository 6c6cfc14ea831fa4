use std::ffi::CStr;
use std::process::Command;
use std::ptr;

use ma_bellman_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(ma_last_error_message()) }.to_string_lossy().into_owned()
}

fn coarse() -> *mut MaMesh {
    let mut mesh = ptr::null_mut();
    assert_eq!(unsafe { ma_mesh_coarse(&mut mesh) }, MaStatus::Ok);
    mesh
}

#[test]
fn mesh_queries() {
    let mesh = coarse();
    unsafe {
        let n = ma_mesh_num_nodes(mesh);
        let t = ma_mesh_num_triangles(mesh);
        assert_eq!(n, 91);
        assert!(ma_mesh_h_avg(mesh) > 0.0);

        let mut xy = vec![0.0; 2 * n];
        assert_eq!(ma_mesh_copy_nodes(mesh, xy.as_mut_ptr(), xy.len()), MaStatus::Ok);
        assert!(xy.iter().all(|v| v.is_finite()));

        let mut tri = vec![0usize; 3 * t];
        assert_eq!(ma_mesh_copy_triangles(mesh, tri.as_mut_ptr(), tri.len()), MaStatus::Ok);
        assert!(tri.iter().all(|&v| v < n));

        let mut flags = vec![0u8; n];
        assert_eq!(ma_mesh_copy_boundary_flags(mesh, flags.as_mut_ptr(), n), MaStatus::Ok);
        assert!(flags.contains(&1) && flags.contains(&0));

        let mut fine = ptr::null_mut();
        assert_eq!(ma_mesh_refine(mesh, 1, &mut fine), MaStatus::Ok);
        assert_eq!(ma_mesh_num_nodes(fine), 329);
        ma_mesh_free(fine);
        ma_mesh_free(mesh);
    }
}

#[test]
fn short_buffer_is_rejected() {
    let mesh = coarse();
    unsafe {
        let mut xy = vec![0.0; 10];
        assert_eq!(ma_mesh_copy_nodes(mesh, xy.as_mut_ptr(), xy.len()), MaStatus::InvalidArgument);
        assert!(last_error().contains("needed"));
        ma_mesh_free(mesh);
    }
}

#[test]
fn null_handles() {
    unsafe {
        assert_eq!(ma_mesh_num_nodes(ptr::null()), 0);
        assert!(ma_mesh_h_avg(ptr::null()).is_nan());
        let mut out = ptr::null_mut();
        assert_eq!(ma_solve(ptr::null(), MaProblem::Quartic, ptr::null(), &mut out), MaStatus::NullPointer);
        assert!(out.is_null());
        assert_eq!(ma_mesh_coarse(ptr::null_mut()), MaStatus::NullPointer);
        ma_mesh_free(ptr::null_mut());
        ma_solution_free(ptr::null_mut());
    }
}

#[test]
fn invalid_build_parameter() {
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { ma_mesh_build(-1.0, &mut out) }, MaStatus::InvalidArgument);
    assert!(out.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn quartic_solve_matches_reference_magnitude() {
    let mesh = coarse();
    unsafe {
        let mut sol = ptr::null_mut();
        assert_eq!(ma_solve(mesh, MaProblem::Quartic, ptr::null(), &mut sol), MaStatus::Ok);
        assert!(ma_solution_converged(sol));
        assert!(ma_solution_final_step(sol) < 1e-6);
        assert!((2..=10).contains(&ma_solution_iterations(sol)));
        let mut errors = MaErrorNorms::default();
        assert_eq!(ma_solution_errors(sol, &mut errors), MaStatus::Ok);
        assert!(errors.linf_rel > 0.03 && errors.linf_rel < 0.3, "{errors:?}");
        let mut values = vec![0.0; ma_solution_len(sol)];
        assert_eq!(ma_solution_copy_values(sol, values.as_mut_ptr(), values.len()), MaStatus::Ok);
        assert!(values.iter().all(|v| v.is_finite() && v.abs() <= 4.0 + 1e-9));
        // the solution owns its data, so the mesh may go first
        ma_mesh_free(mesh);
        ma_solution_free(sol);
    }
}

#[test]
fn custom_affine_data_is_reproduced() {
    let mesh = coarse();
    unsafe {
        let n = ma_mesh_num_nodes(mesh);
        let mut xy = vec![0.0; 2 * n];
        ma_mesh_copy_nodes(mesh, xy.as_mut_ptr(), xy.len());
        let f = vec![0.0; n];
        let g: Vec<f64> = xy.chunks(2).map(|p| 0.5 * p[0] - 1.5 * p[1] + 2.0).collect();
        let mut opts = ma_default_options();
        opts.m = 4.0;
        let mut sol = ptr::null_mut();
        assert_eq!(ma_solve_custom(mesh, f.as_ptr(), g.as_ptr(), n, &opts, &mut sol), MaStatus::Ok);
        let mut u = vec![0.0; n];
        ma_solution_copy_values(sol, u.as_mut_ptr(), n);
        let err = u.iter().zip(&g).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
        let mut errors = MaErrorNorms::default();
        assert_eq!(ma_solution_errors(sol, &mut errors), MaStatus::InvalidArgument);
        ma_solution_free(sol);
        ma_mesh_free(mesh);
    }
}

#[test]
fn custom_data_validation() {
    let mesh = coarse();
    unsafe {
        let n = ma_mesh_num_nodes(mesh);
        let g = vec![0.0; n];
        let mut f = vec![1.0; n];
        let mut sol = ptr::null_mut();
        assert_eq!(ma_solve_custom(mesh, f.as_ptr(), g.as_ptr(), n - 1, ptr::null(), &mut sol), MaStatus::InvalidArgument);
        f[n / 2] = -1.0;
        assert_eq!(ma_solve_custom(mesh, f.as_ptr(), g.as_ptr(), n, ptr::null(), &mut sol), MaStatus::InvalidArgument);
        assert!(sol.is_null());
        let mut opts = ma_default_options();
        opts.m = 0.0;
        f[n / 2] = 1.0;
        assert_eq!(ma_solve_custom(mesh, f.as_ptr(), g.as_ptr(), n, &opts, &mut sol), MaStatus::InvalidArgument);
        ma_mesh_free(mesh);
    }
}

#[test]
fn iteration_cap_reports_not_converged() {
    let mesh = coarse();
    unsafe {
        let mut opts = ma_default_options();
        opts.max_iter = 1;
        let mut sol = ptr::null_mut();
        assert_eq!(ma_solve(mesh, MaProblem::Nonsmooth, &opts, &mut sol), MaStatus::NotConverged);
        assert!(!sol.is_null());
        assert!(!ma_solution_converged(sol));
        assert_eq!(ma_solution_iterations(sol), 1);
        ma_solution_free(sol);
        ma_mesh_free(mesh);
    }
}

#[test]
fn mesh_write_round_trip() {
    let mesh = coarse();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("coarse.mesh");
    let c_path = std::ffi::CString::new(path.to_str().unwrap()).unwrap();
    unsafe {
        assert_eq!(ma_mesh_write(mesh, c_path.as_ptr()), MaStatus::Ok);
        let missing = std::ffi::CString::new("/nonexistent/dir/x.mesh").unwrap();
        assert_eq!(ma_mesh_write(mesh, missing.as_ptr()), MaStatus::IoError);
        ma_mesh_free(mesh);
    }
    let read = ma_bellman::Mesh::read(ma_bellman::DomainGeometry::DiskUnionSquare, &path).unwrap();
    assert_eq!(read.num_nodes(), 91);
}

#[test]
fn version_is_nonempty() {
    let v = unsafe { CStr::from_ptr(ma_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/ma_bellman.h");
    let text = std::fs::read_to_string(header).unwrap();
    for symbol in ["ma_solve_custom", "MA_STATUS_NOT_CONVERGED", "typedef struct MaMesh MaMesh"] {
        assert!(text.contains(symbol), "{symbol} missing from header");
    }
    let Ok(status) = Command::new("cc")
        .args(["-fsyntax-only", "-std=c99", "-Wall", "-Werror", "-x", "c", header])
        .status()
    else {
        eprintln!("no C compiler found, skipping syntax check");
        return;
    };
    assert!(status.success());
}
