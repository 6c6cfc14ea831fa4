//! Command line front end: configuration parsing and the `solve`, `study`
//! and `selftest` pipelines.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::controls::{exact_hamiltonian, monge_ampere_residual, ControlGrid, Sym2};
use crate::discretization::{Scheme, StencilConfig};
use crate::error::Error;
use crate::experiments::{
    convergence_study, error_norms, level_meshes, ErrorReport, Norm, ProblemSpec, StudySettings, CSV_HEADER,
};
use crate::howard::{howard_solve, policy_solve, HowardOptions, Policy};
use crate::mesh::Mesh;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NOT_CONVERGED: i32 = 4;
pub const EXIT_SELFTEST: i32 = 5;

pub const MAX_LEVEL: usize = 8;
pub const DEFAULT_M: [f64; 6] = [2.0, 4.0, 8.0, 16.0, 32.0, 64.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Solve,
    Study,
    Selftest,
}

/// Monge-Ampère solver on unstructured meshes via Howard's policy iteration.
///
/// Every option may also be given in a `key = value` file passed with
/// `--config`; options on the command line take precedence.
#[derive(Debug, Parser)]
#[command(name = "ma-bellman", version)]
pub struct Cli {
    /// What to run.
    #[arg(value_enum)]
    pub command: Option<Command>,
    /// Benchmark problem: quartic or nonsmooth.
    #[arg(long)]
    pub problem: Option<String>,
    /// Refinement level of the coarse mesh (solve).
    #[arg(long)]
    pub level: Option<String>,
    /// Inclusive level range `a..b` (study).
    #[arg(long)]
    pub levels: Option<String>,
    /// Comma-separated stencil factors.
    #[arg(long)]
    pub m: Option<String>,
    /// Number of control angles.
    #[arg(long)]
    pub angles: Option<String>,
    /// Number of eigenvalue splits in [0, 1/2].
    #[arg(long)]
    pub na: Option<String>,
    /// Howard step-size tolerance.
    #[arg(long)]
    pub tol: Option<String>,
    /// Maximum number of Howard iterations.
    #[arg(long = "max-iter")]
    pub max_iter: Option<String>,
    /// CSV output path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Solution dump as `x y u` lines (solve).
    #[arg(long = "solution-out")]
    pub solution_out: Option<PathBuf>,
    /// Mesh dump in the `J T` text format.
    #[arg(long = "mesh-out")]
    pub mesh_out: Option<PathBuf>,
    /// Howard iteration history as CSV (solve).
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Validated run configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub problem: String,
    pub levels: Vec<usize>,
    pub m: Vec<f64>,
    pub n_angles: usize,
    pub n_a: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub out: Option<PathBuf>,
    pub solution_out: Option<PathBuf>,
    pub mesh_out: Option<PathBuf>,
    pub trace: Option<PathBuf>,
}

/// A failure with its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io { .. } => EXIT_IO,
            Error::InvalidArgument(_) | Error::Parse { .. } => EXIT_USAGE,
            Error::NotConverged { .. } => EXIT_NOT_CONVERGED,
            _ => EXIT_FAILURE,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

const CONFIG_KEYS: [&str; 13] = [
    "command",
    "problem",
    "level",
    "levels",
    "m",
    "angles",
    "na",
    "tol",
    "max_iter",
    "out",
    "solution_out",
    "mesh_out",
    "trace",
];

/// Parses a flat `key = value` file. `#` starts a comment; dashes in keys
/// are read as underscores.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("config line {}: expected key = value", n + 1)))?;
        let key = key.trim().replace('-', "_");
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(CliError::usage(format!("config line {}: unknown key '{key}'", n + 1)));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .trim()
        .parse()
        .map_err(|_| CliError::usage(format!("invalid value for {key}: '{value}'")))
}

/// Parses `a..b` (inclusive) or a single level.
pub fn parse_levels(value: &str) -> Result<Vec<usize>, CliError> {
    let levels = match value.split_once("..") {
        Some((a, b)) => {
            let a: usize = parse_num("levels", a)?;
            let b: usize = parse_num("levels", b.trim_start_matches('='))?;
            if a > b {
                return Err(CliError::usage(format!("empty level range {value}")));
            }
            (a..=b).collect()
        }
        None => vec![parse_num("levels", value)?],
    };
    Ok(levels)
}

pub fn parse_m_list(value: &str) -> Result<Vec<f64>, CliError> {
    value.split(',').map(|s| parse_num("m", s)).collect()
}

/// Merges command line flags over the config file and validates ranges.
pub fn parse_config<I, T>(argv: I) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| CliError {
        code: if e.use_stderr() { EXIT_USAGE } else { EXIT_OK },
        message: e.to_string(),
    })?;
    let file = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::from(Error::io(path, e)))?;
            parse_config_file(&text)?
        }
        None => BTreeMap::new(),
    };
    resolve(cli, file)
}

fn resolve(cli: Cli, file: BTreeMap<String, String>) -> Result<RunConfig, CliError> {
    let pick = |flag: &Option<String>, key: &str| flag.clone().or_else(|| file.get(key).cloned());
    let pick_path = |flag: &Option<PathBuf>, key: &str| flag.clone().or_else(|| file.get(key).map(PathBuf::from));

    let command = match cli.command {
        Some(c) => c,
        None => match file.get("command") {
            Some(c) => Command::from_str(c, true).map_err(|_| CliError::usage(format!("unknown command '{c}'")))?,
            None => return Err(CliError::usage("missing command (solve, study or selftest)")),
        },
    };
    let problem = pick(&cli.problem, "problem").unwrap_or_else(|| "quartic".into());
    ProblemSpec::by_name(&problem).map_err(CliError::from)?;

    let level = pick(&cli.level, "level");
    let levels = pick(&cli.levels, "levels");
    let levels = match (command, level, levels) {
        (Command::Solve, Some(_), Some(_)) => return Err(CliError::usage("solve takes --level, not --levels")),
        (_, Some(l), None) => vec![parse_num("level", &l)?],
        (_, None, Some(ls)) => parse_levels(&ls)?,
        (_, Some(_), Some(_)) => return Err(CliError::usage("give either --level or --levels")),
        (Command::Study, None, None) => (0..=3).collect(),
        (_, None, None) => vec![0],
    };
    if command == Command::Solve && levels.len() != 1 {
        return Err(CliError::usage("solve needs a single level"));
    }
    if let Some(l) = levels.iter().find(|&&l| l > MAX_LEVEL) {
        return Err(CliError::usage(format!("level {l} out of range [0, {MAX_LEVEL}]")));
    }

    let m = match pick(&cli.m, "m") {
        Some(v) => parse_m_list(&v)?,
        None if command == Command::Solve => vec![2.0],
        None => DEFAULT_M.to_vec(),
    };
    if let Some(bad) = m.iter().find(|&&m| !(1.0..=128.0).contains(&m)) {
        return Err(CliError::usage(format!("m = {bad} out of range [1, 128]")));
    }
    if command == Command::Solve && m.len() != 1 {
        return Err(CliError::usage("solve needs a single m"));
    }

    let n_angles: usize = pick(&cli.angles, "angles").map_or(Ok(64), |v| parse_num("angles", &v))?;
    if !(1..=4096).contains(&n_angles) {
        return Err(CliError::usage(format!("angles = {n_angles} out of range [1, 4096]")));
    }
    let n_a: usize = pick(&cli.na, "na").map_or(Ok(33), |v| parse_num("na", &v))?;
    if !(2..=4097).contains(&n_a) {
        return Err(CliError::usage(format!("na = {n_a} out of range [2, 4097]")));
    }
    let tol: f64 = pick(&cli.tol, "tol").map_or(Ok(1e-6), |v| parse_num("tol", &v))?;
    if !(tol > 0.0 && tol <= 1e-2) {
        return Err(CliError::usage(format!("tol = {tol} out of range (0, 1e-2]")));
    }
    let max_iter: usize = pick(&cli.max_iter, "max_iter").map_or(Ok(100), |v| parse_num("max_iter", &v))?;
    if max_iter == 0 {
        return Err(CliError::usage("max_iter must be positive"));
    }

    let solution_out = pick_path(&cli.solution_out, "solution_out");
    let trace = pick_path(&cli.trace, "trace");
    if command != Command::Solve && (solution_out.is_some() || trace.is_some()) {
        return Err(CliError::usage("--solution-out and --trace apply to solve only"));
    }
    Ok(RunConfig {
        command,
        problem,
        levels,
        m,
        n_angles,
        n_a,
        tol,
        max_iter,
        out: pick_path(&cli.out, "out"),
        solution_out,
        mesh_out: pick_path(&cli.mesh_out, "mesh_out"),
        trace,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| Error::io(path, e).into())
}

fn emit_csv(path: Option<&Path>, csv: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write_file(p, csv),
        None => std::io::stdout()
            .write_all(csv.as_bytes())
            .map_err(|e| Error::io("<stdout>", e).into()),
    }
}

fn settings(cfg: &RunConfig) -> StudySettings {
    StudySettings {
        n_angles: cfg.n_angles,
        n_a: cfg.n_a,
        howard: HowardOptions::default().with_tol(cfg.tol).with_max_iter(cfg.max_iter),
    }
}

/// `x y u` per node.
pub fn solution_text(mesh: &Mesh, values: &[f64]) -> String {
    let mut out = String::with_capacity(values.len() * 48);
    for (p, v) in mesh.nodes().iter().zip(values) {
        let _ = writeln!(out, "{:.16e} {:.16e} {:.16e}", p.x, p.y, v);
    }
    out
}

fn run_solve(cfg: &RunConfig) -> Result<i32, CliError> {
    let spec = ProblemSpec::by_name(&cfg.problem)?;
    let level = cfg.levels[0];
    let m = cfg.m[0];
    let mesh = level_meshes(&[level])?.remove(0);
    if let Some(p) = &cfg.mesh_out {
        mesh.write(p)?;
    }
    let settings = settings(cfg);
    let grid = ControlGrid::new(settings.n_angles, settings.n_a)?;
    let scheme = Scheme::new(&mesh, grid, StencilConfig::new(m)?)?;
    let (f, g) = spec.nodal_data(&mesh)?;
    let report = howard_solve(&scheme, &f, &g, &settings.howard)?;
    if let Some(p) = &cfg.trace {
        report.write_trace(p)?;
    }
    if let Some(p) = &cfg.solution_out {
        write_file(p, &solution_text(&mesh, &report.values))?;
    }
    let u_h = report.solution(&mesh);
    let errors = error_norms(&mesh, &u_h, &spec)?;
    let csv = format!(
        "{CSV_HEADER}\n{},{},{},{},{:.6e},{:.6e},{:.6e},{:.3}\n",
        level,
        mesh.num_nodes(),
        m,
        report.iterations,
        errors.l2_rel,
        errors.linf_rel,
        errors.h1_rel,
        report.seconds
    );
    emit_csv(cfg.out.as_deref(), &csv)?;
    eprintln!(
        "{} level {level} ({} nodes), m = {m}: {} iterations, final step {:.3e}, max |u_h| = {:.6}",
        spec.name(),
        mesh.num_nodes(),
        report.iterations,
        report.final_step(),
        u_h.max_abs()
    );
    if !report.converged {
        eprintln!("not converged after {} iterations", report.iterations);
        return Ok(EXIT_NOT_CONVERGED);
    }
    Ok(EXIT_OK)
}

fn summarize(report: &ErrorReport) {
    eprint!("{}", report.best_table());
    for norm in [Norm::L2, Norm::Linf, Norm::H1] {
        if let Some(order) = report.order(norm) {
            eprintln!("order {norm:?}: {order:.3}");
        }
    }
    for f in &report.failures {
        eprintln!("level {} m {} failed: {}", f.level, f.m, f.message);
    }
}

fn run_study(cfg: &RunConfig) -> Result<i32, CliError> {
    let spec = ProblemSpec::by_name(&cfg.problem)?;
    if let Some(p) = &cfg.mesh_out {
        let finest = *cfg.levels.last().unwrap();
        level_meshes(&[finest])?.remove(0).write(p)?;
    }
    let report = convergence_study(&spec, &cfg.levels, &cfg.m, &settings(cfg))?;
    emit_csv(cfg.out.as_deref(), &report.to_csv())?;
    summarize(&report);
    if !report.failures.is_empty() || report.cells.iter().any(|c| !c.converged) {
        return Ok(EXIT_NOT_CONVERGED);
    }
    Ok(EXIT_OK)
}

/// Outcome of one self-test check.
#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, result: Result<String, String>) -> Check {
    match result {
        Ok(detail) => Check { name, passed: true, detail },
        Err(detail) => Check { name, passed: false, detail },
    }
}

fn random_sym(rng: &mut ChaCha8Rng) -> Sym2 {
    Sym2::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0))
}

fn check_grid_sup() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let grid = ControlGrid::new(128, 65).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let a = random_sym(&mut rng);
        let f = rng.gen_range(0.0..10.0);
        let exact = exact_hamiltonian(&a, f).map_err(|e| e.to_string())?;
        let gap = exact - grid.sup_linear(&a, f);
        let scale = 1.0 + a.norm() + f;
        if gap < -1e-12 || gap > 1e-2 * scale {
            return Err(format!("gap {gap:e} for A = {a:?}, f = {f}"));
        }
        worst = worst.max(gap / scale);
    }
    Ok(format!("max scaled gap {worst:.2e}"))
}

fn check_equivalence() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for k in 0..500 {
        let theta = rng.gen_range(0.0..std::f64::consts::PI);
        let l1 = rng.gen_range(0.0..3.0);
        let l2 = rng.gen_range(0.0..3.0);
        let a = Sym2::from_eigen(theta, l1, l2);
        // alternate between solutions (f = 2√det A) and perturbed sources
        let f = if k % 2 == 0 { 2.0 * (l1 * l2).sqrt() } else { 2.0 * (l1 * l2).sqrt() + rng.gen_range(0.1..1.0) };
        let h = exact_hamiltonian(&a, f).map_err(|e| e.to_string())?;
        let m = monge_ampere_residual(&a, f).map_err(|e| e.to_string())?;
        if (h.abs() <= 1e-9) != (m.abs() <= 1e-9) {
            return Err(format!("H = {h:e}, M = {m:e} for A = {a:?}, f = {f}"));
        }
    }
    Ok("500 pairs".into())
}

fn check_m_matrix() -> Result<String, String> {
    let mesh = level_meshes(&[1]).map_err(|e| e.to_string())?.remove(0);
    let grid = ControlGrid::new(16, 5).map_err(|e| e.to_string())?;
    let scheme = Scheme::new(&mesh, grid, StencilConfig::new(4.0).unwrap()).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let n = mesh.num_nodes();
    let zeros = vec![0.0; n];
    for _ in 0..10 {
        let policy = Policy::from_indices(scheme.grid(), (0..n).map(|_| rng.gen_range(0..scheme.grid().len())).collect())
            .map_err(|e| e.to_string())?;
        let sys = scheme.assemble(&policy, &zeros, &zeros).map_err(|e| e.to_string())?;
        if !sys.matrix.has_m_matrix_signs() {
            return Err("sign pattern violated".into());
        }
        let f: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (v, _) = policy_solve(&scheme, &policy, &f, &g).map_err(|e| e.to_string())?;
        let bmax = (0..n).filter(|&i| mesh.is_boundary(i)).map(|i| v[i]).fold(f64::NEG_INFINITY, f64::max);
        let vmax = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if vmax > bmax + 1e-9 {
            return Err(format!("interior maximum {vmax} exceeds boundary maximum {bmax}"));
        }
    }
    Ok("10 random policies on level 1".into())
}

fn check_affine() -> Result<String, String> {
    let mesh = level_meshes(&[1]).map_err(|e| e.to_string())?.remove(0);
    let grid = ControlGrid::new(16, 5).map_err(|e| e.to_string())?;
    let scheme = Scheme::new(&mesh, grid, StencilConfig::new(4.0).unwrap()).map_err(|e| e.to_string())?;
    let g: Vec<f64> = mesh.nodes().iter().map(|p| 1.5 * p.x - 0.5 * p.y + 0.25).collect();
    let f = vec![0.0; mesh.num_nodes()];
    let report = howard_solve(&scheme, &f, &g, &HowardOptions::default()).map_err(|e| e.to_string())?;
    let err = report.values.iter().zip(&g).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if !report.converged || err > 1e-7 {
        return Err(format!("error {err:e}"));
    }
    Ok(format!("max error {err:.2e}"))
}

fn check_quartic_solve() -> Result<String, String> {
    let spec = ProblemSpec::by_name("quartic").map_err(|e| e.to_string())?;
    let report = convergence_study(&spec, &[0], &[2.0], &StudySettings::default()).map_err(|e| e.to_string())?;
    let cell = report.cells.first().ok_or("solve failed")?;
    if !cell.converged || cell.max_increase > 1e-9 || !(3e-2..=3e-1).contains(&cell.errors.linf_rel) {
        return Err(format!("{cell:?}"));
    }
    Ok(format!(
        "{} iterations, relative L-inf error {:.3e}",
        cell.iterations, cell.errors.linf_rel
    ))
}

/// Runs the oracle, M-matrix and small-solve checks.
pub fn selftest() -> Vec<Check> {
    vec![
        check("grid sup vs exact Hamiltonian", check_grid_sup()),
        check("Hamiltonian and Monge-Ampere zero sets agree", check_equivalence()),
        check("M-matrix structure and maximum principle", check_m_matrix()),
        check("affine data reproduced", check_affine()),
        check("quartic benchmark on the coarse mesh", check_quartic_solve()),
    ]
}

fn run_selftest() -> Result<i32, CliError> {
    let checks = selftest();
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    Ok(if checks.iter().all(|c| c.passed) { EXIT_OK } else { EXIT_SELFTEST })
}

/// Executes a validated configuration and returns the process exit code.
pub fn run(cfg: &RunConfig) -> Result<i32, CliError> {
    match cfg.command {
        Command::Solve => run_solve(cfg),
        Command::Study => run_study(cfg),
        Command::Selftest => run_selftest(),
    }
}
