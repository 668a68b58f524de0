//! The `plank` command line: solve, verify, symmetrize, draw.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use plank::bang::BangOptions;
use plank::format::{
    parse_instance, parse_solution, to_json, CertificateSpec, Instance, Norms, SolutionFile, SolverMetadata,
    SymmetrizationFile,
};
use plank::geometry::{davenport_comparison, solve_corollary, HomothetResult};
use plank::oracle::{check_homothet, check_lambda, VerificationReport};
use plank::solver::{
    solve_equal_width, solve_general, PlankSystem, SheetResolution, SolverOptions, Strategy, CONTRACT_SLACK,
};
use plank::symmetrize::{symmetrize, ScalingConfig, SymmetrizationResult};
use plank::Error;

pub mod svg;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_PARSE: i32 = 3;

/// Widths are multiplied by this under `--force-boundary`.
pub const BOUNDARY_SHRINK: f64 = 1.0 - 1e-6;

/// Largest `k` for `davenport`; `2^-k` is zero in f64 beyond it.
const MAX_DAVENPORT: u32 = 1074;

#[derive(Debug, Parser)]
#[command(name = "plank", version, about = "Find points that avoid planks, and homothets that avoid hyperplanes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve an instance and print a solution file.
    Solve(SolveArgs),
    /// Check a solution against its instance.
    Verify(VerifyArgs),
    /// Run the diagonal scaling on a matrix instance.
    Symmetrize(SymmetrizeArgs),
    /// Draw a 2-D geometry instance and its homothet as SVG.
    DemoSvg(DemoSvgArgs),
    /// Compare 2^-n with 1/(n+1).
    Davenport {
        #[arg(long, value_parser = clap::value_parser!(u32).range(0..=i64::from(MAX_DAVENPORT)))]
        n: u32,
    },
    /// Solve and verify every instance in a directory.
    Batch(BatchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Replicate,
    Direct,
}

/// Solver knobs shared by `solve`, `demo-svg` and `batch`.
#[derive(Debug, Clone, Args)]
pub struct SolverFlags {
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_flips: usize,
    #[arg(long, value_enum, default_value_t = StrategyArg::Replicate)]
    pub strategy: StrategyArg,
    /// `auto` or a positive integer.
    #[arg(long, default_value = "auto", value_parser = parse_resolution)]
    pub sheet_resolution: SheetResolution,
    /// Seed of the sign search restart.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Shrink widths summing to 1 by 1 - 1e-6 instead of failing.
    #[arg(long)]
    pub force_boundary: bool,
}

impl Default for SolverFlags {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 10_000,
            max_flips: 1_000_000,
            strategy: StrategyArg::Replicate,
            sheet_resolution: SheetResolution::Auto,
            seed: 42,
            force_boundary: false,
        }
    }
}

#[derive(Debug, Args)]
struct SolveArgs {
    input: PathBuf,
    #[command(flatten)]
    flags: SolverFlags,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    input: PathBuf,
    solution: PathBuf,
    #[arg(long, default_value_t = CONTRACT_SLACK)]
    tol: f64,
}

#[derive(Debug, Args)]
struct SymmetrizeArgs {
    input: PathBuf,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    #[arg(long, default_value_t = 1.0)]
    damping: f64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DemoSvgArgs {
    input: PathBuf,
    #[command(flatten)]
    flags: SolverFlags,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BatchArgs {
    dir: PathBuf,
    #[command(flatten)]
    flags: SolverFlags,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn parse_resolution(s: &str) -> Result<SheetResolution, String> {
    if s == "auto" {
        return Ok(SheetResolution::Auto);
    }
    match s.parse::<usize>() {
        Ok(n) if n > 0 => Ok(SheetResolution::Fixed(n)),
        _ => Err(format!("expected `auto` or a positive integer, got `{s}`")),
    }
}

/// A failed command: exit code plus what goes to stderr.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl Failure {
    fn parse(path: &Path, e: impl std::fmt::Display) -> Self {
        Self { code: EXIT_PARSE, kind: "parse", message: format!("{}: {e}", path.display()) }
    }

    fn mismatch(message: String) -> Self {
        Self { code: EXIT_PARSE, kind: "dimension_mismatch", message }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self { code: EXIT_SOLVER, kind: "io", message: format!("{}: {e}", path.display()) }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self { code: EXIT_SOLVER, kind: error_kind(&e), message: e.to_string() }
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidMatrix(_) => "invalid_matrix",
        Error::InvalidDimension(_) => "invalid_dimension",
        Error::NotPsd(_) => "not_psd",
        Error::InvalidOrthogonal { .. } => "invalid_orthogonal",
        Error::NotSymmetric { .. } => "not_symmetric",
        Error::NullRow { .. } => "null_row",
        Error::DegenerateDiagonal { .. } => "degenerate_diagonal",
        Error::NoConvergence { .. } => "no_convergence",
        Error::FlipBudgetExceeded { .. } => "flip_budget_exceeded",
        Error::CertificateViolation(_) => "certificate_violation",
        Error::InsufficientSlack { .. } => "insufficient_slack",
        Error::ResolutionTooCoarse { .. } => "resolution_too_coarse",
        Error::InvalidSystem(_) => "invalid_system",
        Error::NotNormalized { .. } => "not_normalized",
        Error::NonNormable(_) => "non_normable",
        Error::NullNormal { .. } => "null_normal",
        Error::InvalidBody(_) => "invalid_body",
        Error::TooLarge(_) => "too_large",
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    code: i32,
    kind: &'a str,
    message: &'a str,
}

#[derive(Serialize)]
struct ErrorFile<'a> {
    error: ErrorBody<'a>,
}

type CmdResult = Result<i32, Failure>;

/// Runs the CLI on `args` (including the program name) and returns the exit
/// code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_SOLVER } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ =
                if code == EXIT_OK { out.write_all(rendered.as_bytes()) } else { err.write_all(rendered.as_bytes()) };
            return code;
        }
    };
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(&a, out, err),
        Command::Verify(a) => cmd_verify(&a, out),
        Command::Symmetrize(a) => cmd_symmetrize(&a, out),
        Command::DemoSvg(a) => cmd_demo_svg(&a, out, err),
        Command::Davenport { n } => {
            let _ = out.write_all(davenport_table(n).as_bytes());
            Ok(EXIT_OK)
        }
        Command::Batch(a) => cmd_batch(&a, out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let body = ErrorFile { error: ErrorBody { code: f.code, kind: f.kind, message: &f.message } };
            let _ = err.write_all(to_json(&body).as_bytes());
            f.code
        }
    }
}

fn read_instance(path: &Path) -> Result<Instance, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::parse(path, e))?;
    parse_instance(&text).map_err(|e| Failure::parse(path, e))
}

fn emit(path: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::io(p, e)),
        None => out.write_all(text.as_bytes()).map_err(|e| Failure::io(Path::new("<stdout>"), e)),
    }
}

impl SolverFlags {
    fn options(&self) -> SolverOptions {
        SolverOptions {
            scaling: ScalingConfig { tol: self.tol, max_iter: self.max_iter, ..ScalingConfig::default() },
            bang: BangOptions { max_flips: self.max_flips, record_objective: false, restart_seed: Some(self.seed) },
        }
    }

    fn solver_strategy(&self) -> Strategy {
        match self.strategy {
            StrategyArg::Replicate => Strategy::Replicate,
            StrategyArg::Direct => Strategy::DirectWeighted,
        }
    }
}

/// Solves `instance` and runs the independent verifier on the result before
/// returning it. Warnings go to `warnings`.
pub fn solve_instance(
    instance: &Instance,
    flags: &SolverFlags,
    warnings: &mut Vec<String>,
) -> Result<SolutionFile, Failure> {
    let opts = flags.options();
    match instance {
        Instance::Matrix(sys) => {
            let mut sys = sys.clone();
            let shrunk = flags.force_boundary && !sys.is_equal_width() && sys.width_sum() >= 1.0;
            if shrunk {
                warnings.push(format!(
                    "half-widths sum to {}; shrinking every width by {BOUNDARY_SHRINK}",
                    sys.width_sum()
                ));
                let w = sys.w().iter().map(|w| w * BOUNDARY_SHRINK).collect();
                sys = PlankSystem::new(sys.a().clone(), sys.m().to_vec(), w)?;
            }
            let sol = if sys.is_equal_width() {
                solve_equal_width(sys.a(), sys.m(), &opts)?
            } else {
                match solve_general(&sys, flags.solver_strategy(), flags.sheet_resolution, &opts) {
                    Err(Error::TooLarge(why)) if shrunk && flags.strategy == StrategyArg::Replicate => {
                        warnings.push(format!("replicated system too large ({why}); solving directly"));
                        solve_general(&sys, Strategy::DirectWeighted, flags.sheet_resolution, &opts)?
                    }
                    other => other?,
                }
            };
            reject_infeasible(&check_lambda(&sys, &sol.lambda, sol.certificate, CONTRACT_SLACK)?)?;
            let certificate = CertificateSpec::from_certificate(sol.certificate);
            let sheet_resolution = match certificate {
                CertificateSpec::Replicated { resolution } => Some(resolution),
                _ => None,
            };
            Ok(SolutionFile {
                lambda: sol.lambda,
                center: None,
                ratio: None,
                margins: sol.margins,
                norms: Norms { l1: sol.l1_norm, l2sq: sol.l2sq_norm, weighted: Some(sol.weighted_norm), gauge: None },
                certificate,
                metadata: SolverMetadata {
                    iterations: sol.stats.iterations,
                    flips: sol.stats.flips,
                    sheet_resolution,
                    system_size: sol.stats.system_size,
                },
            })
        }
        Instance::Geometry { body, hyperplanes } => {
            let res = solve_corollary(body, hyperplanes, &opts)?;
            reject_infeasible(&check_homothet(body, hyperplanes, &res.center, CONTRACT_SLACK)?)?;
            Ok(homothet_file(&res))
        }
    }
}

fn homothet_file(res: &HomothetResult) -> SolutionFile {
    SolutionFile {
        lambda: res.lambda.clone(),
        center: Some(res.center.clone()),
        ratio: Some(res.ratio),
        margins: res.margins.clone(),
        norms: Norms {
            l1: res.lambda.iter().map(|l| l.abs()).sum(),
            l2sq: res.lambda.iter().map(|l| l * l).sum(),
            weighted: None,
            gauge: Some(res.body_norm_of_center),
        },
        certificate: CertificateSpec::Homothet,
        metadata: SolverMetadata {
            iterations: res.stats.iterations,
            flips: res.stats.flips,
            sheet_resolution: None,
            system_size: res.stats.system_size,
        },
    }
}

fn describe_failures(report: &VerificationReport) -> String {
    report.failures.iter().map(|(c, deficit)| format!("{c} short by {deficit:e}")).collect::<Vec<_>>().join(", ")
}

fn reject_infeasible(report: &VerificationReport) -> Result<(), Failure> {
    if report.feasible {
        return Ok(());
    }
    Err(Error::CertificateViolation(format!("independent check failed: {}", describe_failures(report))).into())
}

fn cmd_solve(args: &SolveArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let instance = read_instance(&args.input)?;
    let mut warnings = Vec::new();
    let result = solve_instance(&instance, &args.flags, &mut warnings);
    for w in &warnings {
        let _ = writeln!(err, "warning: {w}");
    }
    emit(args.output.as_deref(), &to_json(&result?), out)?;
    Ok(EXIT_OK)
}

/// Checks `solution` against `instance`. Dimension mismatches are errors, a
/// violated constraint is an infeasible report.
pub fn verify_solution(instance: &Instance, solution: &SolutionFile, tol: f64) -> Result<VerificationReport, Failure> {
    match instance {
        Instance::Matrix(sys) => {
            let Some(certificate) = solution.certificate.certificate() else {
                return Err(Failure::mismatch("homothet certificate given for a matrix instance".into()));
            };
            if solution.lambda.len() != sys.len() {
                return Err(Failure::mismatch(format!(
                    "solution has {} coefficients, instance has {} planks",
                    solution.lambda.len(),
                    sys.len()
                )));
            }
            Ok(check_lambda(sys, &solution.lambda, certificate, tol)?)
        }
        Instance::Geometry { body, hyperplanes } => {
            let Some(center) = &solution.center else {
                return Err(Failure::mismatch("geometry instance needs a solution with a center".into()));
            };
            if center.len() != body.dim() {
                return Err(Failure::mismatch(format!(
                    "center has {} coordinates, body dimension is {}",
                    center.len(),
                    body.dim()
                )));
            }
            Ok(check_homothet(body, hyperplanes, center, tol)?)
        }
    }
}

fn slack_line(name: &str, value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{name:<20}{v:.6e}\n"),
        None => String::new(),
    }
}

/// Text rendering of a report: worst slack per constraint class, then what
/// failed.
pub fn render_report(report: &VerificationReport) -> String {
    let mut s = format!("feasible: {}\n", if report.feasible { "yes" } else { "no" });
    s += &slack_line("margin slack", Some(report.worst_margin_slack));
    let n = &report.norm_slacks;
    s += &slack_line("l1 slack", n.l1);
    s += &slack_line("l2sq slack", n.l2sq);
    s += &slack_line("weighted slack", n.weighted);
    s += &slack_line("gauge slack", n.gauge);
    let planks = report.violated_planks();
    if !planks.is_empty() {
        let list: Vec<String> = planks.iter().map(|i| i.to_string()).collect();
        s += &format!("violated planks: {}\n", list.join(", "));
    }
    for (c, deficit) in &report.failures {
        s += &format!("violated: {c} (short by {deficit:.6e})\n");
    }
    s
}

fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> CmdResult {
    let instance = read_instance(&args.input)?;
    let text = fs::read_to_string(&args.solution).map_err(|e| Failure::parse(&args.solution, e))?;
    let solution = parse_solution(&text).map_err(|e| Failure::parse(&args.solution, e))?;
    let report = verify_solution(&instance, &solution, args.tol)?;
    let _ = out.write_all(render_report(&report).as_bytes());
    Ok(if report.feasible { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

fn symmetrization_file(r: &SymmetrizationResult, tol: f64) -> SymmetrizationFile {
    SymmetrizationFile {
        theta: r.theta.clone(),
        u: r.u.to_rows(),
        h: r.h.to_rows(),
        residual: r.residual,
        iterations: r.iterations,
        nuclear_trace: r.nuclear_trace,
        tol,
        converged: r.residual <= tol,
    }
}

fn cmd_symmetrize(args: &SymmetrizeArgs, out: &mut dyn Write) -> CmdResult {
    let Instance::Matrix(sys) = read_instance(&args.input)? else {
        return Err(Error::InvalidSystem("symmetrize needs a matrix instance".into()).into());
    };
    let config = ScalingConfig { tol: args.tol, max_iter: args.max_iter, damping: args.damping };
    let (result, code) = match symmetrize(sys.a(), &config) {
        Ok(r) => (r, EXIT_OK),
        Err(Error::NoConvergence { best }) => (*best, EXIT_SOLVER),
        Err(e) => return Err(e.into()),
    };
    let code = if result.residual <= args.tol { code } else { EXIT_SOLVER };
    emit(args.output.as_deref(), &to_json(&symmetrization_file(&result, args.tol)), out)?;
    Ok(code)
}

fn cmd_demo_svg(args: &DemoSvgArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let Instance::Geometry { body, hyperplanes } = read_instance(&args.input)? else {
        return Err(Error::InvalidSystem("demo-svg needs a geometry instance".into()).into());
    };
    if body.dim() != 2 {
        return Err(Error::InvalidDimension(format!("demo-svg draws 2-D bodies, got dimension {}", body.dim())).into());
    }
    let res = solve_corollary(&body, &hyperplanes, &args.flags.options())?;
    reject_infeasible(&check_homothet(&body, &hyperplanes, &res.center, CONTRACT_SLACK)?)?;
    let doc = svg::render(&body, &hyperplanes, &res)?;
    emit(args.out.as_deref(), &doc, out)?;
    if let Some(p) = &args.out {
        let _ = writeln!(err, "wrote {}", p.display());
    }
    Ok(EXIT_OK)
}

/// `value` with 7 significant digits, trailing zeros dropped.
fn significant(value: f64) -> String {
    if value == 0.0 {
        return "0".into();
    }
    let magnitude = value.abs().log10().floor() as i32;
    let decimals = (6 - magnitude).max(0) as usize;
    let s = format!("{value:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Rows `n, 2^-n, 1/(n+1)` for `n = 0..=k`.
pub fn davenport_table(k: u32) -> String {
    let mut s = format!("{:>5}  {:<24}{}\n", "n", "2^-n", "1/(n+1)");
    for n in 0..=k {
        let (cube, homothet) = davenport_comparison(n);
        s += &format!("{n:>5}  {:<24}{}\n", significant(cube), significant(homothet));
    }
    s
}

/// Outcome of solving and verifying one corpus file.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchEntry {
    pub name: String,
    pub code: i32,
    pub detail: String,
}

fn batch_one(path: &Path, flags: &SolverFlags) -> BatchEntry {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let outcome = read_instance(path).and_then(|inst| {
        let sol = solve_instance(&inst, flags, &mut Vec::new())?;
        // Round-trip through the file format, as `verify` would see it.
        let sol = parse_solution(&to_json(&sol)).map_err(|e| Failure::parse(path, e))?;
        verify_solution(&inst, &sol, CONTRACT_SLACK)
    });
    match outcome {
        Ok(report) if report.feasible => BatchEntry { name, code: EXIT_OK, detail: "ok".into() },
        Ok(report) => BatchEntry { name, code: EXIT_VERIFY_FAILED, detail: describe_failures(&report) },
        Err(f) => BatchEntry { name, code: f.code, detail: format!("{}: {}", f.kind, f.message) },
    }
}

/// Solves and verifies every `*.json` file in `dir`, in name order, on
/// `jobs` threads.
pub fn run_batch(dir: &Path, flags: &SolverFlags, jobs: usize) -> Result<Vec<BatchEntry>, Failure> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Failure::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let next = AtomicUsize::new(0);
    let mut done: Vec<(usize, BatchEntry)> = std::thread::scope(|scope| {
        let workers: Vec<_> = (0..jobs.max(1))
            .map(|_| {
                scope.spawn(|| {
                    let mut mine = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        let Some(path) = paths.get(i) else { break mine };
                        mine.push((i, batch_one(path, flags)));
                    }
                })
            })
            .collect();
        workers.into_iter().flat_map(|w| w.join().expect("batch worker panicked")).collect()
    });
    done.sort_by_key(|(i, _)| *i);
    Ok(done.into_iter().map(|(_, e)| e).collect())
}

fn cmd_batch(args: &BatchArgs, out: &mut dyn Write) -> CmdResult {
    let entries = run_batch(&args.dir, &args.flags, args.jobs)?;
    let mut code = EXIT_OK;
    for e in &entries {
        let _ = if e.code == EXIT_OK {
            writeln!(out, "ok    {}", e.name)
        } else {
            writeln!(out, "FAIL  {}  {}", e.name, e.detail)
        };
        code = code.max(e.code);
    }
    let passed = entries.iter().filter(|e| e.code == EXIT_OK).count();
    let _ = writeln!(out, "{passed}/{} passed", entries.len());
    Ok(code)
}
