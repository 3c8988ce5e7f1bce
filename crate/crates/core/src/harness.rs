//! Error measurement, refinement studies, table reproduction and CSV output.

use std::f64::consts::PI;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{expm_dense, matrix_exponential};
use crate::operators::{assemble_system, build_grid, forcing_vector, SpatialGrid};
use crate::problems::{sample_problem, DampedWaveProblem};
use crate::schemes::{
    initial_state, make_stepper, solve_evolution, solve_evolution_with, step_semigroup,
    SchemeConfig, SchemeKind, SnapshotPolicy, StartUp, StateVector, Stepper, Trajectory,
};

/// Runs whose largest displacement exceeds this are reported as divergent.
pub const DIVERGENCE_MAGNITUDE: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileRow {
    pub x: f64,
    pub numeric: f64,
    pub exact: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorProfile {
    /// Time of the snapshot actually used.
    pub t: f64,
    /// `t` minus the requested time.
    pub offset: f64,
    pub rows: Vec<ProfileRow>,
    pub max_error: f64,
}

/// Absolute errors at every grid node, endpoints included, of the snapshot
/// nearest to `t`.
pub fn error_profile(traj: &Trajectory, problem: &DampedWaveProblem, t: f64) -> Result<ErrorProfile> {
    if !problem.has_exact() {
        return Err(Error::MissingExact);
    }
    error_profile_with(traj, problem, t, |x, s| {
        problem.exact(x, s).expect("checked above").map_err(Error::from)
    })
}

/// As [`error_profile`] with a caller-supplied reference `exact(x, t)`.
pub fn error_profile_with<F>(
    traj: &Trajectory,
    problem: &DampedWaveProblem,
    t: f64,
    exact: F,
) -> Result<ErrorProfile>
where
    F: Fn(f64, f64) -> Result<f64>,
{
    let snap = traj.nearest(t);
    let grid = &traj.grid;
    let mut numeric = Vec::with_capacity(grid.subintervals() + 1);
    numeric.push(problem.u_a(snap.t)?);
    numeric.extend_from_slice(snap.displacement());
    numeric.push(problem.u_b(snap.t)?);
    let mut rows = Vec::with_capacity(numeric.len());
    for (x, u) in grid.all_nodes().into_iter().zip(numeric) {
        let e = exact(x, snap.t)?;
        rows.push(ProfileRow {
            x,
            numeric: u,
            exact: e,
            error: (u - e).abs(),
        });
    }
    let max_error = rows.iter().map(|r| r.error).fold(0.0, f64::max);
    Ok(ErrorProfile {
        t: snap.t,
        offset: snap.t - t,
        rows,
        max_error,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Time,
    Space,
}

/// What the errors of a refinement study are measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reference {
    /// The problem's exact solution.
    #[default]
    Exact,
    /// The exact solution of the semi-discrete system `V' = MV + F` on the
    /// fixed grid, which isolates the temporal error. Time axis only.
    SemiDiscrete,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub axis: Axis,
    pub scheme: SchemeKind,
    pub reference: Reference,
    /// `k` per level (time axis) or `h` per level (space axis).
    pub levels: Vec<f64>,
    /// Max abs error over interior nodes; non-finite for levels that blew up.
    pub errors: Vec<f64>,
    /// `log2(e_j / e_{j+1})`; NaN where either error is unusable.
    pub orders: Vec<f64>,
}

impl ConvergenceReport {
    pub fn finite_orders(&self) -> Vec<f64> {
        self.orders.iter().copied().filter(|o| o.is_finite()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub scheme: SchemeKind,
    pub axis: Axis,
    pub reference: Reference,
    pub base_k: f64,
    pub base_n: usize,
    pub levels: usize,
    pub t_eval: f64,
}

/// `V(t) = e^{tM} V(0) + ∫_0^t e^{(t-s)M} F(s) ds` on the problem's grid,
/// with the integral by composite Simpson over `panels` panels.
pub fn semi_discrete_solution(
    problem: &DampedWaveProblem,
    grid: &SpatialGrid,
    t: f64,
    panels: usize,
) -> Result<DVector<f64>> {
    let op = assemble_system(grid, problem)?;
    let v0 = DVector::from_vec(initial_state(problem, grid)?.values);
    let m = op.to_dense();
    if problem.is_homogeneous() {
        return Ok(matrix_exponential(&op, t)? * v0);
    }
    let panels = panels.max(1);
    let delta = t / panels as f64;
    let full = expm_dense(&(&m * delta))?;
    let half = expm_dense(&(&m * (delta / 2.0)))?;
    let f = |s: f64| -> Result<DVector<f64>> {
        Ok(DVector::from_vec(forcing_vector(problem, grid, s)?.values))
    };
    let mut v = v0;
    for j in 0..panels {
        let s = j as f64 * delta;
        v = &full * (v + f(s)? * (delta / 6.0)) + &half * f(s + delta / 2.0)? * (4.0 * delta / 6.0)
            + f(s + delta)? * (delta / 6.0);
    }
    Ok(v)
}

fn level_error(
    problem: &DampedWaveProblem,
    study: &ConvergenceStudy,
    k: f64,
    n: usize,
) -> Result<f64> {
    let (a, b) = problem.domain;
    let grid = build_grid(a, b, n)?;
    let config = SchemeConfig::new(study.scheme, k)?;
    let traj = solve_evolution_with(problem, &grid, &config, study.t_eval, SnapshotPolicy::FinalOnly)?;
    if traj.blew_up() {
        return Ok(f64::INFINITY);
    }
    let state = traj.final_state();
    let errors: Vec<f64> = match study.reference {
        Reference::Exact => {
            if !problem.has_exact() {
                return Err(Error::MissingExact);
            }
            grid.interior_nodes()
                .iter()
                .zip(state.displacement())
                .map(|(&x, u)| Ok((u - problem.exact(x, state.t).expect("checked")?).abs()))
                .collect::<Result<_>>()?
        }
        Reference::SemiDiscrete => {
            let panels = ((state.t / k).round() as usize).max(1) * 4;
            let reference = semi_discrete_solution(problem, &grid, state.t, panels)?;
            state
                .displacement()
                .iter()
                .zip(reference.iter())
                .map(|(u, r)| (u - r).abs())
                .collect()
        }
    };
    Ok(errors.into_iter().fold(0.0, f64::max))
}

/// Halves `k` (time axis) or doubles `N` (space axis) `levels - 1` times and
/// reports the errors and successive orders. Levels run in parallel.
pub fn observed_order(problem: &DampedWaveProblem, study: &ConvergenceStudy) -> Result<ConvergenceReport> {
    if study.levels < 3 {
        return Err(Error::InvalidArgument(format!(
            "a refinement study needs at least 3 levels, got {}",
            study.levels
        )));
    }
    if study.axis == Axis::Space && study.reference == Reference::SemiDiscrete {
        return Err(Error::InvalidArgument(
            "the semi-discrete reference only applies to time refinement".to_string(),
        ));
    }
    let (a, b) = problem.domain;
    let params: Vec<(f64, usize)> = (0..study.levels)
        .map(|j| match study.axis {
            Axis::Time => (study.base_k / f64::from(1u32 << j), study.base_n),
            Axis::Space => (study.base_k, study.base_n << j),
        })
        .collect();
    let errors = params
        .par_iter()
        .map(|&(k, n)| level_error(problem, study, k, n))
        .collect::<Result<Vec<f64>>>()?;
    let levels = params
        .iter()
        .map(|&(k, n)| match study.axis {
            Axis::Time => k,
            Axis::Space => (b - a) / n as f64,
        })
        .collect();
    let orders = errors
        .windows(2)
        .map(|w| {
            if w[0].is_finite() && w[1].is_finite() && w[0] > 0.0 && w[1] > 0.0 {
                (w[0] / w[1]).log2()
            } else {
                f64::NAN
            }
        })
        .collect();
    Ok(ConvergenceReport {
        axis: study.axis,
        scheme: study.scheme,
        reference: study.reference,
        levels,
        errors,
        orders,
    })
}

/// `e^{kM} V + (k/2) [e^{kM} F(t) + F(t + k)]`: one exact-propagator step
/// with trapezoidal forcing.
pub fn duhamel_one_step(
    problem: &DampedWaveProblem,
    grid: &SpatialGrid,
    state: &StateVector,
    k: f64,
) -> Result<DVector<f64>> {
    let op = assemble_system(grid, problem)?;
    let e = matrix_exponential(&op, k)?;
    let f0 = DVector::from_vec(forcing_vector(problem, grid, state.t)?.values);
    let f1 = DVector::from_vec(forcing_vector(problem, grid, state.t + k)?.values);
    Ok(&e * DVector::from_column_slice(&state.values) + (&e * f0 + f1) * (k / 2.0))
}

/// Max-norm difference between one scheme step from the initial state and
/// [`duhamel_one_step`].
pub fn one_step_defect(
    problem: &DampedWaveProblem,
    grid: &SpatialGrid,
    kind: SchemeKind,
    k: f64,
) -> Result<f64> {
    let op = assemble_system(grid, problem)?;
    let config = SchemeConfig::new(kind, k)?;
    let Stepper::Semigroup(stepper) = make_stepper(&config, &op, grid, problem)? else {
        return Err(Error::InvalidArgument(format!(
            "one-step defect needs a semigroup scheme, not {}",
            kind.label()
        )));
    };
    let v0 = initial_state(problem, grid)?;
    let step = step_semigroup(&stepper, &v0)?;
    let oracle = duhamel_one_step(problem, grid, &v0, k)?;
    Ok((DVector::from_vec(step.values) - oracle).amax())
}

/// Column order of both comparison tables.
pub const TABLE_SCHEMES: [SchemeKind; 4] = [
    SchemeKind::Oefd,
    SchemeKind::Oifd,
    SchemeKind::FD01,
    SchemeKind::FD11,
];

#[derive(Debug, Clone, PartialEq)]
pub struct Table1Options {
    pub t: f64,
    pub subintervals: usize,
    pub k: f64,
    pub start_up: StartUp,
}

impl Default for Table1Options {
    fn default() -> Self {
        Table1Options {
            t: 0.3,
            subintervals: 10,
            k: 0.1,
            start_up: StartUp::Taylor2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table1Row {
    pub x: f64,
    /// In [`TABLE_SCHEMES`] order.
    pub errors: [f64; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table1 {
    pub options: Table1Options,
    pub rows: Vec<Table1Row>,
}

impl Table1 {
    /// Largest error per scheme, in [`TABLE_SCHEMES`] order.
    pub fn max_errors(&self) -> [f64; 4] {
        let mut out = [0.0f64; 4];
        for row in &self.rows {
            for (o, e) in out.iter_mut().zip(row.errors) {
                *o = o.max(e);
            }
        }
        out
    }

    pub fn to_csv(&self) -> CsvTable {
        let mut header = vec!["x".to_string()];
        header.extend(TABLE_SCHEMES.iter().map(|s| s.heading()));
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut cells = vec![Cell::Num(r.x)];
                cells.extend(r.errors.iter().map(|&e| Cell::Num(e)));
                cells
            })
            .collect();
        CsvTable { header, rows }
    }
}

/// Absolute errors of the four schemes on the sample problem at every node.
pub fn reproduce_table1() -> Result<Table1> {
    reproduce_table1_with(&Table1Options::default())
}

pub fn reproduce_table1_with(options: &Table1Options) -> Result<Table1> {
    let problem = sample_problem();
    let grid = build_grid(0.0, PI, options.subintervals)?;
    let profiles = TABLE_SCHEMES
        .par_iter()
        .map(|&kind| {
            let config = SchemeConfig::new(kind, options.k)?.with_start_up(options.start_up);
            let traj = solve_evolution(&problem, &grid, &config, options.t)?;
            error_profile(&traj, &problem, options.t)
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = (0..=options.subintervals)
        .map(|i| Table1Row {
            x: profiles[0].rows[i].x,
            errors: std::array::from_fn(|j| profiles[j].rows[i].error),
        })
        .collect();
    Ok(Table1 {
        options: options.clone(),
        rows,
    })
}

pub const TABLE2_RATIOS: [f64; 5] = [1.59, 0.53, 0.32, 0.23, 0.18];
pub const TABLE2_T: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Table2Cell {
    /// Max abs error over interior nodes at the last completed step.
    pub max_error: f64,
    /// Largest `|u|` of the last completed step.
    pub magnitude: f64,
    /// Non-finite state reached, or `|u|` above [`DIVERGENCE_MAGNITUDE`].
    pub diverged: bool,
    /// Time of the last completed step.
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table2Row {
    pub r: f64,
    pub k: f64,
    /// In [`TABLE_SCHEMES`] order.
    pub cells: [Table2Cell; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table2 {
    pub h: f64,
    pub t: f64,
    pub rows: Vec<Table2Row>,
}

impl Table2 {
    pub fn to_csv(&self) -> CsvTable {
        let mut header = vec!["r".to_string(), "k".to_string(), "h".to_string()];
        for s in TABLE_SCHEMES {
            header.push(s.heading());
            header.push(format!("{}_diverged", s.heading()));
        }
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let mut cells = vec![Cell::Num(row.r), Cell::Num(row.k), Cell::Num(self.h)];
                for c in &row.cells {
                    cells.push(Cell::Num(c.max_error));
                    cells.push(Cell::Bool(c.diverged));
                }
                cells
            })
            .collect();
        CsvTable { header, rows }
    }
}

fn table2_cell(problem: &DampedWaveProblem, grid: &SpatialGrid, kind: SchemeKind, k: f64, t: f64) -> Result<Table2Cell> {
    let config = SchemeConfig::new(kind, k)?;
    let traj = solve_evolution_with(problem, grid, &config, t, SnapshotPolicy::FinalOnly)?;
    let state = traj.final_state();
    let max_error = grid
        .interior_nodes()
        .iter()
        .zip(state.displacement())
        .map(|(&x, u)| Ok((u - problem.exact(x, state.t).expect("sample has exact")?).abs()))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let magnitude = state.max_abs_displacement();
    Ok(Table2Cell {
        max_error,
        magnitude,
        diverged: traj.blew_up() || magnitude > DIVERGENCE_MAGNITUDE,
        t: state.t,
    })
}

/// Max errors at `t = 6` on the sample problem for `k = r h`, `r` in
/// [`TABLE2_RATIOS`]. `h` must divide `π` into an integer number of cells
/// (within 1e-6); the nearest such grid is used.
pub fn reproduce_table2(h: f64) -> Result<Table2> {
    reproduce_table2_with(h, &TABLE2_RATIOS, TABLE2_T)
}

pub fn reproduce_table2_with(h: f64, ratios: &[f64], t: f64) -> Result<Table2> {
    let problem = sample_problem();
    let grid = grid_for_spacing(0.0, PI, h)?;
    let h = grid.h();
    let jobs: Vec<(usize, usize)> = (0..ratios.len()).flat_map(|i| (0..4).map(move |j| (i, j))).collect();
    let cells = jobs
        .par_iter()
        .map(|&(i, j)| table2_cell(&problem, &grid, TABLE_SCHEMES[j], ratios[i] * h, t))
        .collect::<Result<Vec<_>>>()?;
    let rows = ratios
        .iter()
        .enumerate()
        .map(|(i, &r)| Table2Row {
            r,
            k: r * h,
            cells: std::array::from_fn(|j| cells[4 * i + j]),
        })
        .collect();
    Ok(Table2 { h, t, rows })
}

/// Grid on `[a, b]` whose spacing is `h` rounded to the nearest integer
/// number of cells.
pub fn grid_for_spacing(a: f64, b: f64, h: f64) -> Result<SpatialGrid> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidGrid(format!("spacing h = {h} must be > 0")));
    }
    let n = ((b - a) / h).round();
    if n > 1e7 {
        return Err(Error::InvalidGrid(format!("spacing h = {h} gives too many cells")));
    }
    build_grid(a, b, n as usize)
}

/// Solution profile at `t` with the exact values alongside.
pub fn profile_series(
    problem: &DampedWaveProblem,
    grid: &SpatialGrid,
    kind: SchemeKind,
    k: f64,
    t: f64,
) -> Result<CsvTable> {
    let config = SchemeConfig::new(kind, k)?;
    let traj = solve_evolution_with(problem, grid, &config, t, SnapshotPolicy::FinalOnly)?;
    let profile = error_profile(&traj, problem, t)?;
    Ok(CsvTable {
        header: ["x", "numeric", "exact", "abs_error"].map(String::from).to_vec(),
        rows: profile
            .rows
            .iter()
            .map(|r| vec![Cell::Num(r.x), Cell::Num(r.numeric), Cell::Num(r.exact), Cell::Num(r.error)])
            .collect(),
    })
}

/// Max abs error over interior nodes after every step, one column per scheme.
/// Entries after a blow-up are `inf`.
pub fn error_history(
    problem: &DampedWaveProblem,
    grid: &SpatialGrid,
    schemes: &[SchemeKind],
    k: f64,
    t_final: f64,
) -> Result<CsvTable> {
    let histories = schemes
        .par_iter()
        .map(|&kind| {
            let traj = solve_evolution(problem, grid, &SchemeConfig::new(kind, k)?, t_final)?;
            traj.snapshots
                .iter()
                .map(|s| {
                    grid.interior_nodes()
                        .iter()
                        .zip(s.displacement())
                        .map(|(&x, u)| Ok((u - problem.exact(x, s.t).ok_or(Error::MissingExact)??).abs()))
                        .collect::<Result<Vec<f64>>>()
                        .map(|e| e.into_iter().fold(0.0, f64::max))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let steps = crate::schemes::step_count(t_final, k)?;
    let mut header = vec!["t".to_string()];
    header.extend(schemes.iter().map(|s| s.heading()));
    let rows = (0..=steps)
        .map(|j| {
            let mut cells = vec![Cell::Num(j as f64 * k)];
            cells.extend(
                histories
                    .iter()
                    .map(|h| Cell::Num(h.get(j).copied().unwrap_or(f64::INFINITY))),
            );
            cells
        })
        .collect();
    Ok(CsvTable { header, rows })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Bool(bool),
    Text(String),
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Num(v) => format_number(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

/// Shortest round-trip representation; scientific for `0 < |v| < 1e-3` and
/// `|v| >= 1e6`.
pub fn format_number(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e6) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl CsvTable {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        let wrap = |source| Error::Csv {
            path: PathBuf::from("<memory>"),
            source,
        };
        w.write_record(&self.header).map_err(wrap)?;
        for row in &self.rows {
            if row.len() != self.header.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.header.len(),
                    got: row.len(),
                });
            }
            w.write_record(row.iter().map(Cell::render)).map_err(wrap)?;
        }
        w.into_inner().map_err(|e| Error::Io {
            path: PathBuf::from("<memory>"),
            source: e.into_error(),
        })
    }
}

/// Writes `table` as CSV with a header row, one record per line.
pub fn write_csv(table: &CsvTable, path: &Path) -> Result<()> {
    let bytes = table.to_bytes()?;
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut file = File::create(path).map_err(io)?;
    file.write_all(&bytes).map_err(io)?;
    file.flush().map_err(io)
}

/// `<command>_<scheme>_<params>.csv`, with `params` joined by `_`.
pub fn output_file_name(command: &str, scheme: &str, params: &[(&str, String)]) -> String {
    let params: Vec<String> = params.iter().map(|(k, v)| format!("{k}{v}")).collect();
    if params.is_empty() {
        format!("{command}_{scheme}.csv")
    } else {
        format!("{command}_{scheme}_{}.csv", params.join("_"))
    }
}

/// Least-squares `C` in `e ≈ C level^order` over the finite errors.
pub fn fit_error_constant(levels: &[f64], errors: &[f64], order: f64) -> Option<f64> {
    let pairs: Vec<(f64, f64)> = levels
        .iter()
        .zip(errors)
        .filter(|(_, e)| e.is_finite())
        .map(|(&l, &e)| (l.powf(order), e))
        .collect();
    if pairs.is_empty() {
        return None;
    }
    let a = DMatrix::from_iterator(pairs.len(), 1, pairs.iter().map(|p| p.0));
    let b = DVector::from_iterator(pairs.len(), pairs.iter().map(|p| p.1));
    let ata = (a.transpose() * &a)[(0, 0)];
    (ata > 0.0).then(|| (a.transpose() * b)[0] / ata)
}
