//! `dampwave` command-line frontend.
//!
//! Every subcommand writes one or more CSV files and prints a short summary.
//! Exit codes: 0 success, 1 I/O failure, 2 usage or input error,
//! 3 numerical failure, 4 a `solve` run diverged.

use std::f64::consts::PI;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::Error;
use crate::harness::{
    error_history, error_profile, grid_for_spacing, observed_order, output_file_name,
    profile_series, reproduce_table1_with, reproduce_table2, write_csv, Axis, Cell,
    ConvergenceStudy, CsvTable, Reference, Table1Options, TABLE_SCHEMES,
};
use crate::operators::{build_grid, gamma_star, SpatialGrid};
use crate::problems::{resolve_problem, sample_problem, DampedWaveProblem};
use crate::schemes::{solve_evolution, SchemeConfig, SchemeKind, StartUp};
use crate::stability::{
    check_explicit_stability, estimate_spectral_radius, explicit_mode_checks,
    implicit_amplification,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "dampwave", version, about = "Finite-difference experiments for the 1D damped wave equation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scheme and write the solution (and error) profile at t-final.
    Solve(SolveArgs),
    /// Run several schemes on the same grid and write their profiles side by side.
    Compare(CompareArgs),
    /// Evaluate the explicit stability conditions and implicit amplification factors.
    Stability(StabilityArgs),
    /// Refinement study in k or h with observed orders.
    Convergence(ConvergenceArgs),
    /// Per-node errors of the four schemes on the sample problem.
    Table1(Table1Args),
    /// Maximum errors at t = 6 on the sample problem for several r = k/h.
    Table2(Table2Args),
    /// Data series behind the solution and error plots.
    Figures(FiguresArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StartUpArg {
    Taylor2,
    CentralGhost,
}

impl From<StartUpArg> for StartUp {
    fn from(s: StartUpArg) -> StartUp {
        match s {
            StartUpArg::Taylor2 => StartUp::Taylor2,
            StartUpArg::CentralGhost => StartUp::CentralGhost,
        }
    }
}

#[derive(Debug, Clone, Args)]
#[group(id = "space", required = true, multiple = false)]
pub struct SpaceArgs {
    /// Number of subintervals
    #[arg(long = "N", group = "space")]
    pub n: Option<usize>,
    /// Mesh width, rounded to the nearest whole number of cells
    #[arg(long, group = "space")]
    pub h: Option<f64>,
}

#[derive(Debug, Clone, Args)]
#[group(id = "time", required = true, multiple = false)]
pub struct TimeArgs {
    /// Time step
    #[arg(long, group = "time")]
    pub k: Option<f64>,
    /// Ratio r = k/h
    #[arg(long, group = "time")]
    pub r: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Built-in problem name or path to a JSON problem file
    #[arg(long, default_value = "sample")]
    pub problem: String,
    #[command(flatten)]
    pub space: SpaceArgs,
    #[command(flatten)]
    pub time: TimeArgs,
    #[arg(long = "t-final")]
    pub t_final: f64,
    /// Output file, or a directory for the default file name
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long = "start-up", value_enum, default_value = "taylor2")]
    pub start_up: StartUpArg,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    /// fd01, fd11, fdST (with --pade), oefd or oifd
    #[arg(long)]
    pub scheme: String,
    /// Padé orders for fdST, e.g. 2,2
    #[arg(long, value_parser = parse_pade)]
    pub pade: Option<(usize, usize)>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// Comma-separated scheme names
    #[arg(long, value_delimiter = ',', default_value = "oefd,oifd,fd01,fd11")]
    pub schemes: Vec<String>,
    #[arg(long, value_parser = parse_pade)]
    pub pade: Option<(usize, usize)>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Args)]
pub struct StabilityArgs {
    /// Maximum damping; taken from the problem when omitted
    #[arg(long = "gamma-max")]
    pub gamma_max: Option<f64>,
    #[arg(long)]
    pub k: f64,
    #[arg(long)]
    pub h: f64,
    /// Problem used for gamma* and the spectral-radius estimate
    #[arg(long)]
    pub problem: Option<String>,
    /// Also estimate the spectral radius of this semigroup scheme by power iteration
    #[arg(long)]
    pub scheme: Option<String>,
    #[arg(long, value_parser = parse_pade)]
    pub pade: Option<(usize, usize)>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisArg {
    Time,
    Space,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReferenceArg {
    Exact,
    SemiDiscrete,
}

#[derive(Debug, Clone, Args)]
pub struct ConvergenceArgs {
    #[arg(long, default_value = "sample")]
    pub problem: String,
    #[arg(long)]
    pub scheme: String,
    #[arg(long, value_parser = parse_pade)]
    pub pade: Option<(usize, usize)>,
    #[arg(long, value_enum)]
    pub axis: AxisArg,
    /// Coarsest time step
    #[arg(long)]
    pub k: f64,
    /// Coarsest number of subintervals
    #[arg(long = "N")]
    pub n: usize,
    #[arg(long, default_value_t = 4)]
    pub levels: usize,
    #[arg(long = "t-final")]
    pub t_final: f64,
    #[arg(long, value_enum, default_value = "exact")]
    pub reference: ReferenceArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct Table1Args {
    #[arg(long = "t-final", default_value_t = 0.3)]
    pub t_final: f64,
    #[arg(long = "start-up", value_enum, default_value = "taylor2")]
    pub start_up: StartUpArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct Table2Args {
    /// Mesh width; defaults to pi/50
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct FiguresArgs {
    /// Output directory
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

fn parse_pade(text: &str) -> Result<(usize, usize), String> {
    let (s, t) = text
        .split_once(',')
        .ok_or_else(|| format!("expected S,T, got `{text}`"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("`{v}`: {e}"));
    Ok((parse(s)?, parse(t)?))
}

/// Shortest decimal rendering for file names.
fn tag(v: f64) -> String {
    format!("{v}")
}

/// `out` itself when it names a file, otherwise `out/<default>`.
fn resolve_output(out: Option<&Path>, default: &str) -> PathBuf {
    match out {
        Some(p) if p.is_dir() => p.join(default),
        Some(p) => p.to_path_buf(),
        None => PathBuf::from(default),
    }
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { .. } | Error::Csv { .. } => EXIT_IO,
        Error::Singular { .. } | Error::Pole { .. } | Error::OracleTooLarge(_) => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

struct Resolved {
    problem: DampedWaveProblem,
    grid: SpatialGrid,
    k: f64,
}

fn resolve_run(run: &RunArgs) -> Result<Resolved, Error> {
    let problem = resolve_problem(&run.problem)?;
    let (a, b) = problem.domain;
    let grid = match (run.space.n, run.space.h) {
        (Some(n), _) => build_grid(a, b, n)?,
        (None, Some(h)) => grid_for_spacing(a, b, h)?,
        (None, None) => unreachable!("clap enforces one of --N/--h"),
    };
    let k = match (run.time.k, run.time.r) {
        (Some(k), _) => k,
        (None, Some(r)) => r * grid.h(),
        (None, None) => unreachable!("clap enforces one of --k/--r"),
    };
    Ok(Resolved { problem, grid, k })
}

fn run_params(r: &Resolved, t_final: f64) -> Vec<(&'static str, String)> {
    vec![
        ("N", r.grid.subintervals().to_string()),
        ("k", tag(r.k)),
        ("t", tag(t_final)),
    ]
}

fn solve(args: &SolveArgs, out: &mut dyn Write) -> Result<i32, Error> {
    let kind = SchemeKind::parse(&args.scheme, args.pade)?;
    let res = resolve_run(&args.run)?;
    for w in res.problem.compatibility_warnings() {
        eprintln!("warning: {w}");
    }
    let config = SchemeConfig::new(kind, res.k)?.with_start_up(args.run.start_up.into());
    let traj = solve_evolution(&res.problem, &res.grid, &config, args.run.t_final)?;
    let state = traj.final_state();
    let table = if res.problem.has_exact() {
        let profile = error_profile(&traj, &res.problem, args.run.t_final)?;
        writeln!(out, "max_error = {}", crate::harness::format_number(profile.max_error)).ok();
        CsvTable {
            header: ["x", "numeric", "exact", "abs_error"].map(String::from).to_vec(),
            rows: profile
                .rows
                .iter()
                .map(|r| vec![Cell::Num(r.x), Cell::Num(r.numeric), Cell::Num(r.exact), Cell::Num(r.error)])
                .collect(),
        }
    } else {
        let mut values = vec![res.problem.u_a(state.t)?];
        values.extend_from_slice(state.displacement());
        values.push(res.problem.u_b(state.t)?);
        CsvTable {
            header: vec!["x".into(), "numeric".into()],
            rows: res
                .grid
                .all_nodes()
                .into_iter()
                .zip(values)
                .map(|(x, u)| vec![Cell::Num(x), Cell::Num(u)])
                .collect(),
        }
    };
    let name = output_file_name("solve", &kind.label(), &run_params(&res, args.run.t_final));
    let path = resolve_output(args.run.out.as_deref(), &name);
    write_csv(&table, &path)?;
    writeln!(
        out,
        "{} steps={} t={} peak={} -> {}",
        kind.heading(),
        traj.steps,
        crate::harness::format_number(state.t),
        crate::harness::format_number(traj.peak_magnitude),
        path.display()
    )
    .ok();
    if let Some(b) = traj.blow_up {
        eprintln!(
            "diverged: non-finite state at step {} (t = {}), last finite |u| = {:e}",
            b.step, b.t, b.last_finite_magnitude
        );
        return Ok(EXIT_DIVERGED);
    }
    Ok(EXIT_OK)
}

fn compare(args: &CompareArgs, out: &mut dyn Write) -> Result<i32, Error> {
    let kinds = args
        .schemes
        .iter()
        .map(|s| SchemeKind::parse(s, args.pade))
        .collect::<Result<Vec<_>, _>>()?;
    let res = resolve_run(&args.run)?;
    if !res.problem.has_exact() {
        return Err(Error::MissingExact);
    }
    let mut header = vec!["x".to_string(), "exact".to_string()];
    let mut columns = Vec::new();
    let mut exact_col = Vec::new();
    for kind in &kinds {
        let config = SchemeConfig::new(*kind, res.k)?.with_start_up(args.run.start_up.into());
        let traj = solve_evolution(&res.problem, &res.grid, &config, args.run.t_final)?;
        let profile = error_profile(&traj, &res.problem, args.run.t_final)?;
        let status = match traj.blow_up {
            Some(b) => format!("diverged at t = {}", b.t),
            None => "finite".to_string(),
        };
        writeln!(
            out,
            "{:<9} max_error = {} ({status})",
            kind.heading(),
            crate::harness::format_number(profile.max_error)
        )
        .ok();
        header.push(kind.heading());
        header.push(format!("{}_error", kind.heading()));
        exact_col = profile.rows.iter().map(|r| (r.x, r.exact)).collect();
        columns.push(profile.rows);
    }
    let rows = exact_col
        .iter()
        .enumerate()
        .map(|(i, &(x, e))| {
            let mut row = vec![Cell::Num(x), Cell::Num(e)];
            for col in &columns {
                row.push(Cell::Num(col[i].numeric));
                row.push(Cell::Num(col[i].error));
            }
            row
        })
        .collect();
    let name = output_file_name("compare", "all", &run_params(&res, args.run.t_final));
    let path = resolve_output(args.run.out.as_deref(), &name);
    write_csv(&CsvTable { header, rows }, &path)?;
    writeln!(out, "-> {}", path.display()).ok();
    Ok(EXIT_OK)
}

fn stability(args: &StabilityArgs, out: &mut dyn Write) -> Result<i32, Error> {
    let problem = match &args.problem {
        Some(p) => Some(resolve_problem(p)?),
        None => None,
    };
    let grid = match &problem {
        Some(p) => Some(grid_for_spacing(p.domain.0, p.domain.1, args.h)?),
        None => None,
    };
    let gamma = match (args.gamma_max, &problem, &grid) {
        (Some(g), _, _) => g,
        (None, Some(p), Some(g)) => gamma_star(g, p)?,
        _ => {
            return Err(Error::InvalidArgument(
                "give --gamma-max or --problem".to_string(),
            ))
        }
    };
    let verdict = check_explicit_stability(args.k, args.h, gamma)?;
    writeln!(out, "explicit scheme: {}", if verdict.stable { "stable" } else { "unstable" }).ok();
    let mut rows = Vec::new();
    for c in &verdict.conditions {
        writeln!(
            out,
            "  {:<32} {} vs {}  margin {}  {}",
            c.name,
            crate::harness::format_number(c.lhs),
            crate::harness::format_number(c.rhs),
            crate::harness::format_number(c.margin),
            if c.passed { "ok" } else { "violated" }
        )
        .ok();
        rows.push(vec![
            Cell::Text(c.name.to_string()),
            Cell::Num(c.lhs),
            Cell::Num(c.rhs),
            Cell::Num(c.margin),
            Cell::Bool(c.passed),
        ]);
    }
    // mode checks need an integer N; use the problem's grid or [0, pi]
    let cells = grid
        .as_ref()
        .map(|g| g.subintervals())
        .unwrap_or_else(|| (PI / args.h).round().max(2.0) as usize);
    let modes = explicit_mode_checks(cells, args.k, args.h, gamma);
    let mode_ok = modes.iter().all(|&s| s);
    writeln!(
        out,
        "  per-mode Jury test (N = {cells}): {} of {} modes stable",
        modes.iter().filter(|&&s| s).count(),
        modes.len()
    )
    .ok();
    rows.push(vec![
        Cell::Text("per-mode Jury".to_string()),
        Cell::Int(modes.iter().filter(|&&s| s).count() as i64),
        Cell::Int(modes.len() as i64),
        Cell::Num(f64::NAN),
        Cell::Bool(mode_ok),
    ]);
    let spectrum = implicit_amplification(cells, args.h, args.k, gamma)?;
    writeln!(
        out,
        "implicit FD-(1,1): max |mu| = {}",
        crate::harness::format_number(spectrum.max_modulus)
    )
    .ok();
    rows.push(vec![
        Cell::Text("implicit max |mu| <= 1".to_string()),
        Cell::Num(spectrum.max_modulus),
        Cell::Num(1.0),
        Cell::Num(1.0 - spectrum.max_modulus),
        Cell::Bool(spectrum.max_modulus <= 1.0 + 1e-12),
    ]);
    if let Some(name) = &args.scheme {
        let kind = SchemeKind::parse(name, args.pade)?;
        let p = problem.clone().unwrap_or_else(sample_problem);
        let g = match &grid {
            Some(g) => g.clone(),
            None => grid_for_spacing(p.domain.0, p.domain.1, args.h)?,
        };
        let est = estimate_spectral_radius(&p, &g, kind, args.k, args.seed)?;
        writeln!(
            out,
            "{} spectral radius ~ {} ({} iterations{})",
            kind.heading(),
            crate::harness::format_number(est.radius),
            est.iterations,
            if est.converged { "" } else { ", not converged" }
        )
        .ok();
        rows.push(vec![
            Cell::Text(format!("{} spectral radius", kind.heading())),
            Cell::Num(est.radius),
            Cell::Num(1.0),
            Cell::Num(1.0 - est.radius),
            Cell::Bool(est.radius <= 1.0 + 1e-6),
        ]);
    }
    let table = CsvTable {
        header: ["condition", "lhs", "rhs", "margin", "passed"].map(String::from).to_vec(),
        rows,
    };
    let name = output_file_name(
        "stability",
        &args.scheme.clone().unwrap_or_else(|| "fd01".to_string()),
        &[("gamma", tag(gamma)), ("k", tag(args.k)), ("h", tag(args.h))],
    );
    let path = resolve_output(args.out.as_deref(), &name);
    write_csv(&table, &path)?;
    writeln!(out, "-> {}", path.display()).ok();
    Ok(EXIT_OK)
}

fn convergence(args: &ConvergenceArgs, out: &mut dyn Write) -> Result<i32, Error> {
    let kind = SchemeKind::parse(&args.scheme, args.pade)?;
    let problem = resolve_problem(&args.problem)?;
    let study = ConvergenceStudy {
        scheme: kind,
        axis: match args.axis {
            AxisArg::Time => Axis::Time,
            AxisArg::Space => Axis::Space,
        },
        reference: match args.reference {
            ReferenceArg::Exact => Reference::Exact,
            ReferenceArg::SemiDiscrete => Reference::SemiDiscrete,
        },
        base_k: args.k,
        base_n: args.n,
        levels: args.levels,
        t_eval: args.t_final,
    };
    let report = observed_order(&problem, &study)?;
    let level_name = match study.axis {
        Axis::Time => "k",
        Axis::Space => "h",
    };
    let rows = report
        .levels
        .iter()
        .zip(&report.errors)
        .enumerate()
        .map(|(j, (&l, &e))| {
            let order = if j == 0 { f64::NAN } else { report.orders[j - 1] };
            writeln!(
                out,
                "{level_name} = {:<12} error = {:<24} order = {}",
                crate::harness::format_number(l),
                crate::harness::format_number(e),
                crate::harness::format_number(order)
            )
            .ok();
            vec![Cell::Num(l), Cell::Num(e), Cell::Num(order)]
        })
        .collect();
    let table = CsvTable {
        header: vec![level_name.to_string(), "max_error".to_string(), "order".to_string()],
        rows,
    };
    let axis = match study.axis {
        Axis::Time => "time",
        Axis::Space => "space",
    };
    let name = output_file_name(
        "convergence",
        &kind.label(),
        &[
            ("axis-", axis.to_string()),
            ("k", tag(args.k)),
            ("N", args.n.to_string()),
            ("t", tag(args.t_final)),
        ],
    );
    let path = resolve_output(args.out.as_deref(), &name);
    write_csv(&table, &path)?;
    writeln!(out, "-> {}", path.display()).ok();
    Ok(EXIT_OK)
}

fn table1(args: &Table1Args, out: &mut dyn Write) -> Result<i32, Error> {
    let options = Table1Options {
        t: args.t_final,
        start_up: args.start_up.into(),
        ..Table1Options::default()
    };
    let table = reproduce_table1_with(&options)?;
    for (kind, e) in TABLE_SCHEMES.iter().zip(table.max_errors()) {
        writeln!(out, "{:<9} max_error = {}", kind.heading(), crate::harness::format_number(e)).ok();
    }
    let name = output_file_name(
        "table1",
        "all",
        &[("N", "10".to_string()), ("k", "0.1".to_string()), ("t", tag(args.t_final))],
    );
    let path = resolve_output(args.out.as_deref(), &name);
    write_csv(&table.to_csv(), &path)?;
    writeln!(out, "-> {}", path.display()).ok();
    Ok(EXIT_OK)
}

fn table2(args: &Table2Args, out: &mut dyn Write) -> Result<i32, Error> {
    let h = args.h.unwrap_or(PI / 50.0);
    let table = reproduce_table2(h)?;
    writeln!(out, "h = {} (k = r h), t = {}", crate::harness::format_number(table.h), table.t).ok();
    for row in &table.rows {
        let cells: Vec<String> = row
            .cells
            .iter()
            .map(|c| {
                let v = crate::harness::format_number(c.max_error);
                if c.diverged { format!("{v} (diverged)") } else { v }
            })
            .collect();
        writeln!(out, "r = {:<5} {}", row.r, cells.join("  ")).ok();
    }
    let name = output_file_name("table2", "all", &[("h", tag(table.h)), ("t", tag(table.t))]);
    let path = resolve_output(args.out.as_deref(), &name);
    write_csv(&table.to_csv(), &path)?;
    writeln!(out, "-> {}", path.display()).ok();
    Ok(EXIT_OK)
}

/// Profiles at `t = 1` (k = 0.05, N = 23) for the two semigroup schemes and
/// error histories up to `t = 6` on `h = π/50` for several `r`.
fn figures(args: &FiguresArgs, out: &mut dyn Write) -> Result<i32, Error> {
    let dir = &args.out;
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.clone(),
        source,
    })?;
    let problem = sample_problem();
    let profile_grid = build_grid(0.0, PI, 23)?;
    for kind in [SchemeKind::FD01, SchemeKind::FD11] {
        let table = profile_series(&problem, &profile_grid, kind, 0.05, 1.0)?;
        let path = dir.join(output_file_name(
            "figures",
            &kind.label(),
            &[("N", "23".to_string()), ("k", "0.05".to_string()), ("t", "1".to_string())],
        ));
        write_csv(&table, &path)?;
        writeln!(out, "-> {}", path.display()).ok();
    }
    let grid = build_grid(0.0, PI, 50)?;
    for r in [1.5915, 0.016, 0.159, 0.995, 1.45] {
        let table = error_history(&problem, &grid, &TABLE_SCHEMES, r * grid.h(), 6.0)?;
        let path = dir.join(output_file_name(
            "figures",
            "all",
            &[("r", tag(r)), ("N", "50".to_string()), ("t", "6".to_string())],
        ));
        write_csv(&table, &path)?;
        writeln!(out, "-> {}", path.display()).ok();
    }
    Ok(EXIT_OK)
}

/// Parses `argv` (program name first) and runs the subcommand, writing the
/// summary to `out`. Returns the process exit code.
pub fn run_command_with<I, T>(argv: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => solve(a, out),
        Command::Compare(a) => compare(a, out),
        Command::Stability(a) => stability(a, out),
        Command::Convergence(a) => convergence(a, out),
        Command::Table1(a) => table1(a, out),
        Command::Table2(a) => table2(a, out),
        Command::Figures(a) => figures(a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    run_command_with(argv, &mut lock)
}

/// Caps the global thread pool from `DAMPWAVE_THREADS` when set.
pub fn configure_threads() {
    if let Some(n) = std::env::var("DAMPWAVE_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}
