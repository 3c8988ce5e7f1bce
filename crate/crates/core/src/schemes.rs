//! Time stepping.
//!
//! The semigroup family advances `V' = MV + F(t)` by
//!
//! ```text
//! Q_S(kM) V^{n+1} = P_T(kM) V^n + (k/2) [P_T(kM) F(t_n) + Q_S(kM) F(t_{n+1})]
//! ```
//!
//! i.e. a Padé approximant of `exp(kM)` combined with the trapezoidal rule for
//! the Duhamel integral. For `S >= 1` the matrix `Q_S(kM)` is assembled once
//! in interleaved `(u_1, v_1, u_2, v_2, ...)` ordering, where it is banded
//! with half-bandwidth at most `2S + 1`, and LU-factored once.
//!
//! The three-level baselines OEFD and OIFD act on displacements only and need
//! a start-up value `u^1`; see [`StartUp`].

use crate::error::{Error, Result};
use crate::linalg::{lu_factor_banded, BandedFactorization, BandedMatrix};
use crate::operators::{assemble_system, forcing_vector, BlockOperator, SpatialGrid};
use crate::pade::{apply_poly, pade_coefficients, RationalApproximant};
use crate::problems::DampedWaveProblem;

/// Runs longer than this many steps are refused.
pub const MAX_STEPS: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    /// Padé `(S, T)` member of the semigroup family.
    Semigroup { s: usize, t: usize },
    /// Ordinary explicit three-level scheme.
    Oefd,
    /// Ordinary implicit three-level scheme.
    Oifd,
}

impl SchemeKind {
    pub const FD01: SchemeKind = SchemeKind::Semigroup { s: 0, t: 1 };
    pub const FD11: SchemeKind = SchemeKind::Semigroup { s: 1, t: 1 };

    /// Short name used on the command line and in file names.
    pub fn label(&self) -> String {
        match self {
            SchemeKind::Semigroup { s, t } => format!("fd{s}{t}"),
            SchemeKind::Oefd => "oefd".to_string(),
            SchemeKind::Oifd => "oifd".to_string(),
        }
    }

    /// Column heading as used in comparison tables.
    pub fn heading(&self) -> String {
        match self {
            SchemeKind::Semigroup { s: 0, t } => format!("EX-(0,{t})"),
            SchemeKind::Semigroup { s, t } => format!("IM-({s},{t})"),
            SchemeKind::Oefd => "OEFD".to_string(),
            SchemeKind::Oifd => "OIFD".to_string(),
        }
    }

    /// `fd01`, `fd11`, `oefd`, `oifd`, or `fdST` together with `pade = (S, T)`.
    pub fn parse(name: &str, pade: Option<(usize, usize)>) -> Result<SchemeKind> {
        let kind = match name.to_ascii_lowercase().as_str() {
            "fd01" => SchemeKind::FD01,
            "fd11" => SchemeKind::FD11,
            "oefd" => SchemeKind::Oefd,
            "oifd" => SchemeKind::Oifd,
            "fdst" => {
                let (s, t) = pade.ok_or_else(|| {
                    Error::InvalidArgument("scheme fdST needs --pade S,T".to_string())
                })?;
                SchemeKind::Semigroup { s, t }
            }
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown scheme `{other}` (expected fd01, fd11, fdST, oefd, oifd)"
                )))
            }
        };
        if let SchemeKind::Semigroup { s, t } = kind {
            pade_coefficients(s, t)?;
        }
        Ok(kind)
    }
}

/// How the three-level baselines obtain `u^1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StartUp {
    /// `u^1 = φ + kψ + (k²/2)(Δ_h φ − γψ + g(·,0))`.
    #[default]
    Taylor2,
    /// The scheme's own first step with the ghost value `u^{-1} = u^1 − 2kψ`
    /// eliminated. Identical to `Taylor2` for OEFD.
    CentralGhost,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub kind: SchemeKind,
    pub k: f64,
    pub start_up: StartUp,
}

impl SchemeConfig {
    pub fn new(kind: SchemeKind, k: f64) -> Result<Self> {
        let config = SchemeConfig {
            kind,
            k,
            start_up: StartUp::default(),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_start_up(mut self, start_up: StartUp) -> Self {
        self.start_up = start_up;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::InvalidArgument(format!("time step k = {} must be > 0", self.k)));
        }
        if let SchemeKind::Semigroup { s, t } = self.kind {
            pade_coefficients(s, t)?;
        }
        Ok(())
    }
}

/// `[u(x_1..x_{N-1}); u_t(x_1..x_{N-1})]` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub t: f64,
    pub values: Vec<f64>,
}

impl StateVector {
    pub fn n_interior(&self) -> usize {
        self.values.len() / 2
    }

    pub fn displacement(&self) -> &[f64] {
        &self.values[..self.n_interior()]
    }

    pub fn velocity(&self) -> &[f64] {
        &self.values[self.n_interior()..]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_displacement(&self) -> f64 {
        self.displacement().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn from_parts(t: f64, u: &[f64], v: &[f64]) -> Self {
        let mut values = Vec::with_capacity(2 * u.len());
        values.extend_from_slice(u);
        values.extend_from_slice(v);
        StateVector { t, values }
    }
}

/// `[φ(x_i); ψ(x_i)]`.
pub fn initial_state(problem: &DampedWaveProblem, grid: &SpatialGrid) -> Result<StateVector> {
    let nodes = grid.interior_nodes();
    let u = nodes.iter().map(|&x| problem.phi(x)).collect::<Result<Vec<_>, _>>()?;
    let v = nodes.iter().map(|&x| problem.psi(x)).collect::<Result<Vec<_>, _>>()?;
    Ok(StateVector::from_parts(0.0, &u, &v))
}

fn interleave(v: &[f64]) -> Vec<f64> {
    let m = v.len() / 2;
    (0..m).flat_map(|i| [v[i], v[m + i]]).collect()
}

fn deinterleave(w: &[f64]) -> Vec<f64> {
    let m = w.len() / 2;
    let mut v = vec![0.0; w.len()];
    for i in 0..m {
        v[i] = w[2 * i];
        v[m + i] = w[2 * i + 1];
    }
    v
}

/// `kM` in interleaved ordering; `u_i -> 2i`, `v_i -> 2i + 1`.
fn scaled_operator_interleaved(op: &BlockOperator, k: f64) -> BandedMatrix {
    let m = op.n_interior();
    let c = k * op.inv_h2();
    let mut b = BandedMatrix::zeros(2 * m, 3, 1);
    for i in 0..m {
        b.set(2 * i, 2 * i + 1, k);
        if i > 0 {
            b.set(2 * i + 1, 2 * (i - 1), c);
        }
        b.set(2 * i + 1, 2 * i, -2.0 * c);
        if i + 1 < m {
            b.set(2 * i + 1, 2 * (i + 1), c);
        }
        b.set(2 * i + 1, 2 * i + 1, -k * op.damping()[i]);
    }
    b
}

/// `sum_j coeffs[j] (kM)^j` as a banded matrix in interleaved ordering.
pub fn banded_matrix_poly(coeffs: &[f64], op: &BlockOperator, k: f64) -> Result<BandedMatrix> {
    let km = scaled_operator_interleaved(op, k);
    let n = op.dim();
    let mut power = BandedMatrix::identity(n);
    let mut acc = BandedMatrix::zeros(n, 0, 0).add_scaled(coeffs.first().copied().unwrap_or(0.0), &power);
    for &c in coeffs.iter().skip(1) {
        power = power.matmul(&km)?;
        acc = acc.add_scaled(c, &power);
    }
    Ok(acc.trimmed())
}

#[derive(Debug, Clone)]
pub struct SemigroupStepper<'a> {
    problem: &'a DampedWaveProblem,
    grid: &'a SpatialGrid,
    op: BlockOperator,
    k: f64,
    approx: RationalApproximant,
    numerator: Vec<f64>,
    denominator: Vec<f64>,
    denominator_lu: Option<BandedFactorization>,
    homogeneous: bool,
}

impl SemigroupStepper<'_> {
    pub fn approximant(&self) -> &RationalApproximant {
        &self.approx
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn operator(&self) -> &BlockOperator {
        &self.op
    }

    /// Factorization of `Q_S(kM)` (interleaved ordering), absent when `S = 0`.
    pub fn factorization(&self) -> Option<&BandedFactorization> {
        self.denominator_lu.as_ref()
    }

    fn solve_denominator(&self, rhs: Vec<f64>) -> Result<Vec<f64>> {
        match &self.denominator_lu {
            None => Ok(rhs),
            Some(lu) => Ok(deinterleave(&lu.solve(&interleave(&rhs))?)),
        }
    }

    /// `out = Q_S(kM)^{-1} P_T(kM) v`, the homogeneous one-step map.
    pub fn amplify(&self, v: &[f64]) -> Result<Vec<f64>> {
        let p = apply_poly(&self.numerator, &self.op, self.k, v)?;
        self.solve_denominator(p)
    }
}

#[derive(Debug, Clone)]
pub struct BaselineStepper<'a> {
    kind: SchemeKind,
    problem: &'a DampedWaveProblem,
    grid: &'a SpatialGrid,
    op: BlockOperator,
    k: f64,
    r2: f64,
    implicit_lu: Option<BandedFactorization>,
    u0: Vec<f64>,
    u1: Vec<f64>,
}

impl BaselineStepper<'_> {
    pub fn u0(&self) -> &[f64] {
        &self.u0
    }

    pub fn u1(&self) -> &[f64] {
        &self.u1
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    /// `(r^2 B(t))` placed at the first and last interior node.
    fn add_boundary(&self, out: &mut [f64], weight: f64, t: f64) -> Result<()> {
        let m = out.len();
        out[0] += weight * self.problem.u_a(t)?;
        out[m - 1] += weight * self.problem.u_b(t)?;
        Ok(())
    }

    fn add_source(&self, out: &mut [f64], t: f64) -> Result<()> {
        let k2 = self.k * self.k;
        for (o, &x) in out.iter_mut().zip(self.grid.interior_nodes()) {
            *o += k2 * self.problem.g(x, t)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub enum Stepper<'a> {
    Semigroup(SemigroupStepper<'a>),
    Baseline(BaselineStepper<'a>),
}

impl Stepper<'_> {
    pub fn k(&self) -> f64 {
        match self {
            Stepper::Semigroup(s) => s.k,
            Stepper::Baseline(b) => b.k,
        }
    }
}

pub fn make_stepper<'a>(
    config: &SchemeConfig,
    op: &BlockOperator,
    grid: &'a SpatialGrid,
    problem: &'a DampedWaveProblem,
) -> Result<Stepper<'a>> {
    config.validate()?;
    if op.n_interior() != grid.n_interior() {
        return Err(Error::DimensionMismatch {
            expected: grid.n_interior(),
            got: op.n_interior(),
        });
    }
    let k = config.k;
    match config.kind {
        SchemeKind::Semigroup { s, t } => {
            let approx = pade_coefficients(s, t)?;
            let numerator = approx.numerator_f64();
            let denominator = approx.denominator_f64();
            let denominator_lu = if approx.is_explicit() {
                None
            } else {
                Some(lu_factor_banded(&banded_matrix_poly(&denominator, op, k)?)?)
            };
            Ok(Stepper::Semigroup(SemigroupStepper {
                problem,
                grid,
                op: op.clone(),
                k,
                approx,
                numerator,
                denominator,
                denominator_lu,
                homogeneous: problem.is_homogeneous(),
            }))
        }
        kind @ (SchemeKind::Oefd | SchemeKind::Oifd) => {
            let h = grid.h();
            let r2 = (k / h) * (k / h);
            let m = op.n_interior();
            let implicit_lu = if kind == SchemeKind::Oifd {
                let diag: Vec<f64> =
                    op.damping().iter().map(|g| 1.0 + g * k / 2.0 + r2).collect();
                let off = vec![-r2 / 2.0; m.saturating_sub(1)];
                Some(lu_factor_banded(&BandedMatrix::tridiagonal(&off, &diag, &off))?)
            } else {
                None
            };
            let mut stepper = BaselineStepper {
                kind,
                problem,
                grid,
                op: op.clone(),
                k,
                r2,
                implicit_lu,
                u0: initial_state(problem, grid)?.displacement().to_vec(),
                u1: Vec::new(),
            };
            stepper.u1 = match (config.start_up, kind) {
                (StartUp::Taylor2, _) => startup_u1(problem, grid, k)?,
                (StartUp::CentralGhost, SchemeKind::Oefd) => ghost_start_oefd(&stepper)?,
                (StartUp::CentralGhost, _) => ghost_start_oifd(&stepper)?,
            };
            Ok(Stepper::Baseline(stepper))
        }
    }
}

/// One step of the semigroup family; the returned state is at `t + k`.
/// Non-finite entries are returned as-is for the caller to detect.
pub fn step_semigroup(stepper: &SemigroupStepper, state: &StateVector) -> Result<StateVector> {
    let (k, t) = (stepper.k, state.t);
    if state.values.len() != stepper.op.dim() {
        return Err(Error::DimensionMismatch {
            expected: stepper.op.dim(),
            got: state.values.len(),
        });
    }
    let rhs = if stepper.homogeneous {
        apply_poly(&stepper.numerator, &stepper.op, k, &state.values)?
    } else {
        let f_now = forcing_vector(stepper.problem, stepper.grid, t)?;
        let f_next = forcing_vector(stepper.problem, stepper.grid, t + k)?;
        let shifted: Vec<f64> = state
            .values
            .iter()
            .zip(&f_now.values)
            .map(|(v, f)| v + 0.5 * k * f)
            .collect();
        let mut rhs = apply_poly(&stepper.numerator, &stepper.op, k, &shifted)?;
        let q_f = apply_poly(&stepper.denominator, &stepper.op, k, &f_next.values)?;
        for (r, q) in rhs.iter_mut().zip(q_f) {
            *r += 0.5 * k * q;
        }
        rhs
    };
    Ok(StateVector {
        t: t + k,
        values: stepper.solve_denominator(rhs)?,
    })
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// `(1 + γk/2) u^{n+1} = (2I + r²A) u^n + (γk/2 − 1) u^{n−1} + r² B(t_n) + k² g(·, t_n)`.
pub fn step_oefd(
    stepper: &BaselineStepper,
    u_curr: &[f64],
    u_prev: &[f64],
    t: f64,
) -> Result<Vec<f64>> {
    let m = stepper.op.n_interior();
    check_len(m, u_curr.len())?;
    check_len(m, u_prev.len())?;
    let k = stepper.k;
    let mut out = vec![0.0; m];
    stepper.op.apply_laplacian(u_curr, &mut out);
    for i in 0..m {
        let g = stepper.op.damping()[i] * k / 2.0;
        out[i] = 2.0 * u_curr[i] + stepper.r2 * out[i] + (g - 1.0) * u_prev[i];
    }
    stepper.add_boundary(&mut out, stepper.r2, t)?;
    stepper.add_source(&mut out, t)?;
    for (o, g) in out.iter_mut().zip(stepper.op.damping()) {
        *o /= 1.0 + g * k / 2.0;
    }
    Ok(out)
}

/// `(1 + γk/2 − (r²/2)A) u^{n+1} = (2I + (r²/2)A) u^n + (γk/2 − 1) u^{n−1}
///  + (r²/2)(B(t_{n+1}) + B(t_n)) + k² g(·, t_n)`.
pub fn step_oifd(
    stepper: &BaselineStepper,
    u_curr: &[f64],
    u_prev: &[f64],
    t: f64,
) -> Result<Vec<f64>> {
    let m = stepper.op.n_interior();
    check_len(m, u_curr.len())?;
    check_len(m, u_prev.len())?;
    let lu = stepper
        .implicit_lu
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("stepper is not OIFD".to_string()))?;
    let k = stepper.k;
    let half_r2 = stepper.r2 / 2.0;
    let mut rhs = vec![0.0; m];
    stepper.op.apply_laplacian(u_curr, &mut rhs);
    for i in 0..m {
        let g = stepper.op.damping()[i] * k / 2.0;
        rhs[i] = 2.0 * u_curr[i] + half_r2 * rhs[i] + (g - 1.0) * u_prev[i];
    }
    stepper.add_boundary(&mut rhs, half_r2, t + k)?;
    stepper.add_boundary(&mut rhs, half_r2, t)?;
    stepper.add_source(&mut rhs, t)?;
    lu.solve(&rhs)
}

/// Second-order Taylor start:
/// `u^1 = φ + kψ + (k²/2) [Δ_h φ − γψ + g(·, 0)]`, with the Dirichlet data
/// at `t = 0` closing the discrete Laplacian.
pub fn startup_u1(problem: &DampedWaveProblem, grid: &SpatialGrid, k: f64) -> Result<Vec<f64>> {
    let op = assemble_system(grid, problem)?;
    let state = initial_state(problem, grid)?;
    let (phi, psi) = (state.displacement(), state.velocity());
    let m = phi.len();
    let inv_h2 = op.inv_h2();
    let mut lap = vec![0.0; m];
    op.apply_laplacian(phi, &mut lap);
    lap[0] += problem.u_a(0.0)?;
    lap[m - 1] += problem.u_b(0.0)?;
    let mut u1 = Vec::with_capacity(m);
    for i in 0..m {
        let x = grid.interior_nodes()[i];
        let accel = inv_h2 * lap[i] - op.damping()[i] * psi[i] + problem.g(x, 0.0)?;
        u1.push(phi[i] + k * psi[i] + 0.5 * k * k * accel);
    }
    Ok(u1)
}

fn initial_velocity(stepper: &BaselineStepper) -> Result<Vec<f64>> {
    Ok(initial_state(stepper.problem, stepper.grid)?.velocity().to_vec())
}

// 2 u^1 = (2I + r²A) u^0 − (γk − 2) k ψ + r² B(0) + k² g(·, 0)
fn ghost_start_oefd(stepper: &BaselineStepper) -> Result<Vec<f64>> {
    let psi = initial_velocity(stepper)?;
    let k = stepper.k;
    let m = stepper.u0.len();
    let mut out = vec![0.0; m];
    stepper.op.apply_laplacian(&stepper.u0, &mut out);
    for i in 0..m {
        let g = stepper.op.damping()[i];
        out[i] = 2.0 * stepper.u0[i] + stepper.r2 * out[i] - (g * k - 2.0) * k * psi[i];
    }
    stepper.add_boundary(&mut out, stepper.r2, 0.0)?;
    stepper.add_source(&mut out, 0.0)?;
    Ok(out.into_iter().map(|v| v / 2.0).collect())
}

// (2I − (r²/2)A) u^1 = (2I + (r²/2)A) u^0 − (γk − 2) k ψ + (r²/2)(B(k) + B(0)) + k² g(·, 0)
fn ghost_start_oifd(stepper: &BaselineStepper) -> Result<Vec<f64>> {
    let psi = initial_velocity(stepper)?;
    let k = stepper.k;
    let m = stepper.u0.len();
    let half_r2 = stepper.r2 / 2.0;
    let mut rhs = vec![0.0; m];
    stepper.op.apply_laplacian(&stepper.u0, &mut rhs);
    for i in 0..m {
        let g = stepper.op.damping()[i];
        rhs[i] = 2.0 * stepper.u0[i] + half_r2 * rhs[i] - (g * k - 2.0) * k * psi[i];
    }
    stepper.add_boundary(&mut rhs, half_r2, k)?;
    stepper.add_boundary(&mut rhs, half_r2, 0.0)?;
    stepper.add_source(&mut rhs, 0.0)?;
    let diag = vec![2.0 + stepper.r2; m];
    let off = vec![-half_r2; m.saturating_sub(1)];
    lu_factor_banded(&BandedMatrix::tridiagonal(&off, &diag, &off))?.solve(&rhs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SnapshotPolicy {
    #[default]
    All,
    /// Every `n`-th step; the initial and final states are always kept.
    Stride(usize),
    FinalOnly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowUp {
    /// First step whose state contained a non-finite entry.
    pub step: usize,
    pub t: f64,
    /// Largest displacement magnitude of the last finite state.
    pub last_finite_magnitude: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: SpatialGrid,
    pub config: SchemeConfig,
    /// Steps completed (finite states only).
    pub steps: usize,
    pub snapshots: Vec<StateVector>,
    pub blow_up: Option<BlowUp>,
    /// Largest `|u|` over every completed step, not just snapshots.
    pub peak_magnitude: f64,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    pub fn final_state(&self) -> &StateVector {
        self.snapshots.last().expect("trajectory always holds the initial state")
    }

    pub fn blew_up(&self) -> bool {
        self.blow_up.is_some()
    }

    /// Snapshot closest to `t`.
    pub fn nearest(&self, t: f64) -> &StateVector {
        self.snapshots
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
            .expect("trajectory always holds the initial state")
    }
}

/// Number of steps `j` with `j k <= t_final`, treating ratios within 1e-9 of
/// an integer as that integer.
pub fn step_count(t_final: f64, k: f64) -> Result<usize> {
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidArgument(format!("t_final = {t_final} must be > 0")));
    }
    let ratio = t_final / k;
    if ratio > MAX_STEPS as f64 {
        return Err(Error::TooManySteps {
            steps: ratio,
            limit: MAX_STEPS,
        });
    }
    let nearest = ratio.round();
    Ok(if (ratio - nearest).abs() <= 1e-9 * ratio.max(1.0) {
        nearest as usize
    } else {
        ratio.floor() as usize
    })
}

struct Recorder {
    policy: SnapshotPolicy,
    total: usize,
    snapshots: Vec<StateVector>,
    peak: f64,
}

impl Recorder {
    fn keep(&self, step: usize) -> bool {
        step == 0
            || step == self.total
            || match self.policy {
                SnapshotPolicy::All => true,
                SnapshotPolicy::Stride(n) => n > 0 && step.is_multiple_of(n),
                SnapshotPolicy::FinalOnly => false,
            }
    }

    fn record(&mut self, step: usize, state: &StateVector) {
        self.peak = self.peak.max(state.max_abs_displacement());
        if self.keep(step) {
            self.snapshots.push(state.clone());
        }
    }

    fn finish_early(&mut self, last: StateVector) {
        if self.snapshots.last().map(|s| s.t) != Some(last.t) {
            self.snapshots.push(last);
        }
    }
}

pub fn solve_evolution(
    problem: &DampedWaveProblem,
    grid: &SpatialGrid,
    config: &SchemeConfig,
    t_final: f64,
) -> Result<Trajectory> {
    solve_evolution_with(problem, grid, config, t_final, SnapshotPolicy::All)
}

/// Iterates the configured scheme to the last step with `t <= t_final`,
/// halting at the first non-finite state.
pub fn solve_evolution_with(
    problem: &DampedWaveProblem,
    grid: &SpatialGrid,
    config: &SchemeConfig,
    t_final: f64,
    policy: SnapshotPolicy,
) -> Result<Trajectory> {
    config.validate()?;
    let total = step_count(t_final, config.k)?;
    let op = assemble_system(grid, problem)?;
    let stepper = make_stepper(config, &op, grid, problem)?;
    let k = config.k;
    let mut rec = Recorder {
        policy,
        total,
        snapshots: Vec::new(),
        peak: 0.0,
    };
    let mut blow_up = None;
    let mut completed = 0;

    let initial = initial_state(problem, grid)?;
    rec.record(0, &initial);

    match &stepper {
        Stepper::Semigroup(s) => {
            let mut state = initial;
            for step in 1..=total {
                let mut next = step_semigroup(s, &state)?;
                next.t = step as f64 * k;
                if !next.is_finite() {
                    blow_up = Some(BlowUp {
                        step,
                        t: next.t,
                        last_finite_magnitude: state.max_abs_displacement(),
                    });
                    rec.finish_early(state);
                    break;
                }
                rec.record(step, &next);
                completed = step;
                state = next;
            }
        }
        Stepper::Baseline(b) => {
            let mut prev = b.u0.clone();
            let mut curr = b.u1.clone();
            let mut last = initial;
            for step in 1..=total {
                if step >= 2 {
                    let t_n = (step - 1) as f64 * k;
                    let next = match b.kind {
                        SchemeKind::Oefd => step_oefd(b, &curr, &prev, t_n)?,
                        _ => step_oifd(b, &curr, &prev, t_n)?,
                    };
                    prev = std::mem::replace(&mut curr, next);
                }
                let velocity: Vec<f64> =
                    curr.iter().zip(&prev).map(|(c, p)| (c - p) / k).collect();
                let state = StateVector::from_parts(step as f64 * k, &curr, &velocity);
                if !state.is_finite() {
                    blow_up = Some(BlowUp {
                        step,
                        t: state.t,
                        last_finite_magnitude: last.max_abs_displacement(),
                    });
                    rec.finish_early(last);
                    break;
                }
                rec.record(step, &state);
                completed = step;
                last = state;
            }
        }
    }

    Ok(Trajectory {
        grid: grid.clone(),
        config: *config,
        steps: completed,
        snapshots: rec.snapshots,
        blow_up,
        peak_magnitude: rec.peak,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::matrix_exponential;
    use crate::operators::build_grid;
    use crate::problems::{forced_problem, load_problem_config, sample_problem};
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn max_error(traj: &Trajectory, problem: &DampedWaveProblem) -> f64 {
        let s = traj.final_state();
        traj.grid
            .interior_nodes()
            .iter()
            .zip(s.displacement())
            .map(|(&x, u)| (u - problem.exact(x, s.t).unwrap().unwrap()).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn scheme_names() {
        assert_eq!(SchemeKind::parse("fd01", None).unwrap(), SchemeKind::FD01);
        assert_eq!(SchemeKind::parse("FD11", None).unwrap(), SchemeKind::FD11);
        assert_eq!(
            SchemeKind::parse("fdST", Some((2, 2))).unwrap(),
            SchemeKind::Semigroup { s: 2, t: 2 }
        );
        assert!(SchemeKind::parse("fdST", None).is_err());
        assert!(SchemeKind::parse("fdST", Some((5, 0))).is_err());
        assert!(SchemeKind::parse("rk4", None).is_err());
        assert_eq!(SchemeKind::FD11.label(), "fd11");
        assert_eq!(SchemeKind::FD01.heading(), "EX-(0,1)");
        assert_eq!(SchemeKind::FD11.heading(), "IM-(1,1)");
        assert!(SchemeConfig::new(SchemeKind::FD11, 0.0).is_err());
        assert!(SchemeConfig::new(SchemeKind::FD11, f64::NAN).is_err());
    }

    #[test]
    fn step_counts() {
        assert_eq!(step_count(0.3, 0.1).unwrap(), 3);
        assert_eq!(step_count(6.0, 0.05).unwrap(), 120);
        assert_eq!(step_count(1.0, 0.3).unwrap(), 3);
        assert!(step_count(0.0, 0.1).is_err());
        assert!(matches!(step_count(1.0, 1e-8), Err(Error::TooManySteps { .. })));
    }

    #[test]
    fn interleaving_round_trips() {
        let v: Vec<f64> = (0..8).map(f64::from).collect();
        assert_eq!(interleave(&v), vec![0.0, 4.0, 1.0, 5.0, 2.0, 6.0, 3.0, 7.0]);
        assert_eq!(deinterleave(&interleave(&v)), v);
    }

    fn sample_setup(n: usize) -> (DampedWaveProblem, SpatialGrid) {
        (sample_problem(), build_grid(0.0, PI, n).unwrap())
    }

    #[test]
    fn explicit_stepper_has_no_factorization() {
        let (p, g) = sample_setup(10);
        let op = assemble_system(&g, &p).unwrap();
        let cfg = SchemeConfig::new(SchemeKind::FD01, 0.1).unwrap();
        match make_stepper(&cfg, &op, &g, &p).unwrap() {
            Stepper::Semigroup(s) => assert!(s.factorization().is_none()),
            _ => panic!(),
        }
    }

    #[test]
    fn implicit_factorizations_succeed() {
        for n in [10, 23] {
            let (p, g) = sample_setup(n);
            let op = assemble_system(&g, &p).unwrap();
            let cfg = SchemeConfig::new(SchemeKind::FD11, 0.05).unwrap();
            match make_stepper(&cfg, &op, &g, &p).unwrap() {
                Stepper::Semigroup(s) => {
                    let f = s.factorization().unwrap();
                    assert_eq!(f.size(), 2 * (n - 1));
                }
                _ => panic!(),
            }
        }
    }

    #[test]
    fn denominator_bandwidth_is_at_most_2s_plus_1() {
        let (p, g) = sample_setup(12);
        let op = assemble_system(&g, &p).unwrap();
        for s in 1..=4usize {
            let q = pade_coefficients(s, 1).unwrap().denominator_f64();
            let band = banded_matrix_poly(&q, &op, 0.1).unwrap();
            assert!(band.lower_bandwidth() <= 2 * s + 1, "S={s}");
            assert!(band.upper_bandwidth() <= 2 * s + 1, "S={s}");
            // same matrix as the dense polynomial, up to the ordering
            let dense_m = op.to_dense() * 0.1;
            let mut poly = DMatrix::<f64>::zeros(22, 22);
            let mut power = DMatrix::<f64>::identity(22, 22);
            for c in &q {
                poly += &power * *c;
                power = &power * &dense_m;
            }
            let inter = band.to_dense();
            for i in 0..22 {
                for j in 0..22 {
                    let (a, b) = (i % 11 * 2 + i / 11, j % 11 * 2 + j / 11);
                    assert!((poly[(i, j)] - inter[(a, b)]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn kernel_of_m_is_preserved() {
        // inv_h2 = 0, gamma = 0, zero velocity: M V = 0, so R(kM) V = V
        let p = sample_problem();
        let g = build_grid(0.0, PI, 6).unwrap();
        let op = BlockOperator::from_parts(vec![0.0; 5], 0.0).unwrap();
        let v = StateVector {
            t: 0.0,
            values: vec![0.3, -1.0, 2.0, 0.5, 0.25, 0.0, 0.0, 0.0, 0.0, 0.0],
        };
        for (s, t) in [(0, 1), (1, 1), (2, 2), (1, 0), (4, 3)] {
            let cfg = SchemeConfig::new(SchemeKind::Semigroup { s, t }, 0.3).unwrap();
            let Stepper::Semigroup(st) = make_stepper(&cfg, &op, &g, &p).unwrap() else {
                panic!()
            };
            let next = step_semigroup(&st, &v).unwrap();
            for (a, b) in next.values.iter().zip(&v.values) {
                assert!((a - b).abs() < 1e-15, "({s},{t})");
            }
            assert!((next.t - 0.3).abs() < 1e-15);
        }
    }

    #[test]
    fn fd11_single_node_matches_dense_crank_nicolson() {
        let doc = r#"{"domain": [0, 1], "gamma": "1.5", "g": "sin(t) + x", "phi": "0.3",
                      "psi": "-0.2", "u_a": "cos(t)", "u_b": "t"}"#;
        let p = load_problem_config(doc).unwrap();
        let g = build_grid(0.0, 1.0, 2).unwrap();
        let op = assemble_system(&g, &p).unwrap();
        let k = 0.07;
        let cfg = SchemeConfig::new(SchemeKind::FD11, k).unwrap();
        let Stepper::Semigroup(st) = make_stepper(&cfg, &op, &g, &p).unwrap() else { panic!() };
        let state = StateVector { t: 0.4, values: vec![0.3, -0.2] };
        let got = step_semigroup(&st, &state).unwrap();

        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -8.0, -1.5]);
        let f = |t: f64| DVector::from_vec(vec![0.0, t.sin() + 0.5 + 4.0 * (t.cos() + t)]);
        let id = DMatrix::<f64>::identity(2, 2);
        let plus = &id + &m * (k / 2.0);
        let minus = &id - &m * (k / 2.0);
        let rhs = &plus * DVector::from_vec(vec![0.3, -0.2])
            + (&plus * f(0.4) + &minus * f(0.4 + k)) * (k / 2.0);
        let expected = minus.lu().solve(&rhs).unwrap();
        for i in 0..2 {
            assert!((got.values[i] - expected[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn fd11_matches_dense_trapezoidal_form() {
        let p = forced_problem();
        let g = build_grid(0.0, 1.0, 7).unwrap();
        let op = assemble_system(&g, &p).unwrap();
        let k = 0.05;
        let cfg = SchemeConfig::new(SchemeKind::FD11, k).unwrap();
        let Stepper::Semigroup(st) = make_stepper(&cfg, &op, &g, &p).unwrap() else { panic!() };
        let state = StateVector {
            t: 0.35,
            values: (0..12).map(|i| (i as f64 * 0.37).sin()).collect(),
        };
        let got = step_semigroup(&st, &state).unwrap();

        let m = op.to_dense();
        let id = DMatrix::<f64>::identity(12, 12);
        let plus = &id + &m * (k / 2.0);
        let minus = &id - &m * (k / 2.0);
        let f = |t| DVector::from_vec(forcing_vector(&p, &g, t).unwrap().values);
        let rhs = &plus * DVector::from_column_slice(&state.values)
            + &plus * f(0.35) * (k / 2.0)
            + &minus * f(0.35 + k) * (k / 2.0);
        let expected = minus.lu().solve(&rhs).unwrap();
        let scale = expected.amax();
        for i in 0..12 {
            assert!((got.values[i] - expected[i]).abs() < 1e-13 * scale.max(1.0));
        }
    }

    fn one_step_defect(kind: SchemeKind, k: f64) -> f64 {
        let (p, g) = sample_setup(6);
        let op = assemble_system(&g, &p).unwrap();
        let cfg = SchemeConfig::new(kind, k).unwrap();
        let Stepper::Semigroup(st) = make_stepper(&cfg, &op, &g, &p).unwrap() else { panic!() };
        let v0 = initial_state(&p, &g).unwrap();
        let got = step_semigroup(&st, &v0).unwrap();
        let exact = matrix_exponential(&op, k).unwrap() * DVector::from_column_slice(&v0.values);
        (DVector::from_vec(got.values) - exact).amax()
    }

    #[test]
    fn one_step_defect_ratios() {
        let r11 = one_step_defect(SchemeKind::FD11, 0.1) / one_step_defect(SchemeKind::FD11, 0.05);
        assert!((6.0..=10.0).contains(&r11), "{r11}");
        let r01 = one_step_defect(SchemeKind::FD01, 0.1) / one_step_defect(SchemeKind::FD01, 0.05);
        assert!((3.0..=5.0).contains(&r01), "{r01}");
    }

    #[test]
    fn leapfrog_degenerate_case() {
        // gamma = 0, inv_h2 irrelevant because A u = 0 for this u? Use r -> 0 via tiny k/h.
        let doc = r#"{"domain": [0, 1], "gamma": "0", "g": "0", "phi": "0",
                      "psi": "0", "u_a": "0", "u_b": "0"}"#;
        let p = load_problem_config(doc).unwrap();
        let g = build_grid(0.0, 1.0, 5).unwrap();
        let op = assemble_system(&g, &p).unwrap();
        // A-term vanishes when r = 0 in the limit; with tiny k the update is 2u - u_prev
        let k = 1e-9;
        for kind in [SchemeKind::Oefd, SchemeKind::Oifd] {
            let cfg = SchemeConfig::new(kind, k).unwrap();
            let Stepper::Baseline(b) = make_stepper(&cfg, &op, &g, &p).unwrap() else { panic!() };
            let u = [1.0, 2.0, 3.0, 4.0];
            let up = [0.5, 0.5, 0.5, 0.5];
            let next = match kind {
                SchemeKind::Oefd => step_oefd(&b, &u, &up, 0.0).unwrap(),
                _ => step_oifd(&b, &u, &up, 0.0).unwrap(),
            };
            for i in 0..4 {
                assert!((next[i] - (2.0 * u[i] - up[i])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn oefd_matches_dense_update() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let doc = r#"{"domain": [0, 2], "gamma": "1 + x", "g": "x*t + 1", "phi": "0",
                      "psi": "0", "u_a": "sin(t)", "u_b": "2*t"}"#;
        let p = load_problem_config(doc).unwrap();
        let g = build_grid(0.0, 2.0, 6).unwrap();
        let op = assemble_system(&g, &p).unwrap();
        let (k, t) = (0.03, 0.8);
        let cfg = SchemeConfig::new(SchemeKind::Oefd, k).unwrap();
        let Stepper::Baseline(b) = make_stepper(&cfg, &op, &g, &p).unwrap() else { panic!() };
        let u: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let up: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let got = step_oefd(&b, &u, &up, t).unwrap();

        let r2 = (k / g.h()).powi(2);
        let a = op.laplacian_dense();
        let gam = DMatrix::from_diagonal(&DVector::from_column_slice(op.damping()));
        let id = DMatrix::<f64>::identity(5, 5);
        let lhs = &id + &gam * (k / 2.0);
        let mut rhs = (&id * 2.0 + &a * r2) * DVector::from_column_slice(&u)
            + (&gam * (k / 2.0) - &id) * DVector::from_column_slice(&up);
        rhs[0] += r2 * t.sin();
        rhs[4] += r2 * 2.0 * t;
        for i in 0..5 {
            rhs[i] += k * k * (g.interior_nodes()[i] * t + 1.0);
        }
        let expected = lhs.lu().solve(&rhs).unwrap();
        for i in 0..5 {
            assert!((got[i] - expected[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn oifd_solves_its_system() {
        let p = forced_problem();
        let g = build_grid(0.0, 1.0, 9).unwrap();
        let op = assemble_system(&g, &p).unwrap();
        let (k, t) = (0.04, 0.5);
        let cfg = SchemeConfig::new(SchemeKind::Oifd, k).unwrap();
        let Stepper::Baseline(b) = make_stepper(&cfg, &op, &g, &p).unwrap() else { panic!() };
        let mut prev = b.u0().to_vec();
        let mut curr = b.u1().to_vec();
        let r2 = (k / g.h()).powi(2);
        let a = op.laplacian_dense();
        let gam = DMatrix::from_diagonal(&DVector::from_column_slice(op.damping()));
        let id = DMatrix::<f64>::identity(8, 8);
        let lhs = &id + &gam * (k / 2.0) - &a * (r2 / 2.0);
        for step in 0..10 {
            let tn = t + step as f64 * k;
            let next = step_oifd(&b, &curr, &prev, tn).unwrap();
            let mut rhs = (&id * 2.0 + &a * (r2 / 2.0)) * DVector::from_column_slice(&curr)
                + (&gam * (k / 2.0) - &id) * DVector::from_column_slice(&prev);
            rhs[0] += r2 / 2.0 * (p.u_a(tn + k).unwrap() + p.u_a(tn).unwrap());
            rhs[7] += r2 / 2.0 * (p.u_b(tn + k).unwrap() + p.u_b(tn).unwrap());
            for i in 0..8 {
                rhs[i] += k * k * p.g(g.interior_nodes()[i], tn).unwrap();
            }
            let residual = (&lhs * DVector::from_column_slice(&next) - &rhs).amax();
            assert!(residual < 1e-11, "{residual}");
            prev = std::mem::replace(&mut curr, next);
        }
    }

    #[test]
    fn taylor_start_for_linear_data() {
        let doc = r#"{"domain": [0, 1], "gamma": "0", "g": "0", "phi": "2*x + 1",
                      "psi": "0", "u_a": "1", "u_b": "3"}"#;
        let p = load_problem_config(doc).unwrap();
        let g = build_grid(0.0, 1.0, 8).unwrap();
        let u1 = startup_u1(&p, &g, 0.1).unwrap();
        for (u, &x) in u1.iter().zip(g.interior_nodes()) {
            assert!((u - (2.0 * x + 1.0)).abs() < 1e-13);
        }
    }

    #[test]
    fn taylor_start_is_third_order_accurate() {
        let (p, g) = sample_setup(10);
        let errs: Vec<f64> = [0.1, 0.05]
            .iter()
            .map(|&k| {
                let u1 = startup_u1(&p, &g, k).unwrap();
                u1.iter()
                    .zip(g.interior_nodes())
                    .map(|(u, &x)| (u - (-k).exp() * x.sin()).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        // O(k^3 + k^2 h^2): halving k cuts the error by at least 4
        assert!(errs[0] < 3e-4 && errs[0] / errs[1] > 4.0, "{errs:?}");
    }

    #[test]
    fn ghost_start_equals_taylor_for_oefd() {
        let p = forced_problem();
        let g = build_grid(0.0, 1.0, 9).unwrap();
        let op = assemble_system(&g, &p).unwrap();
        let cfg = SchemeConfig::new(SchemeKind::Oefd, 0.02)
            .unwrap()
            .with_start_up(StartUp::CentralGhost);
        let Stepper::Baseline(b) = make_stepper(&cfg, &op, &g, &p).unwrap() else { panic!() };
        let taylor = startup_u1(&p, &g, 0.02).unwrap();
        for (a, b) in b.u1().iter().zip(&taylor) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_data_stays_zero() {
        let doc = r#"{"domain": [0, 1], "gamma": "0.5", "g": "0", "phi": "0",
                      "psi": "0", "u_a": "0", "u_b": "0"}"#;
        let p = load_problem_config(doc).unwrap();
        let g = build_grid(0.0, 1.0, 8).unwrap();
        for kind in [SchemeKind::FD01, SchemeKind::FD11, SchemeKind::Oefd, SchemeKind::Oifd] {
            let traj =
                solve_evolution(&p, &g, &SchemeConfig::new(kind, 0.01).unwrap(), 0.5).unwrap();
            assert!(traj.snapshots.iter().all(|s| s.values.iter().all(|v| *v == 0.0)));
            assert_eq!(traj.steps, 50);
        }
    }

    #[test]
    fn linearity_in_initial_data() {
        let (p, g) = sample_setup(12);
        let scaled = p.scaled(-3.5);
        for kind in [SchemeKind::FD01, SchemeKind::FD11, SchemeKind::Oefd, SchemeKind::Oifd] {
            let cfg = SchemeConfig::new(kind, 0.05).unwrap();
            let a = solve_evolution(&p, &g, &cfg, 1.0).unwrap();
            let b = solve_evolution(&scaled, &g, &cfg, 1.0).unwrap();
            for (sa, sb) in a.snapshots.iter().zip(&b.snapshots) {
                for (x, y) in sa.values.iter().zip(&sb.values) {
                    assert!((-3.5 * x - y).abs() <= 1e-10 * (1.0 + x.abs()));
                }
            }
        }
    }

    #[test]
    fn implicit_norm_never_grows() {
        for (n, k) in [(10, 0.1), (20, 0.05), (40, 0.5), (8, 1.0)] {
            let (p, g) = sample_setup(n);
            let cfg = SchemeConfig::new(SchemeKind::FD11, k).unwrap();
            let traj = solve_evolution(&p, &g, &cfg, 20.0).unwrap();
            assert!(!traj.blew_up());
            // contraction in the energy norm implies boundedness; the Euclidean
            // norm of the mode-1 dominated state also decays here
            let norms: Vec<f64> = traj
                .snapshots
                .iter()
                .map(|s| s.values.iter().map(|v| v * v).sum::<f64>().sqrt())
                .collect();
            assert!(norms.last().unwrap() < &norms[0]);
            assert!(norms.iter().all(|v| *v <= norms[0] * (1.0 + 1e-8)));
        }
    }

    #[test]
    fn published_first_step_errors() {
        let (p, g) = sample_setup(10);
        let first_step = |kind, start| {
            let cfg = SchemeConfig::new(kind, 0.1).unwrap().with_start_up(start);
            max_error(&solve_evolution(&p, &g, &cfg, 0.1).unwrap(), &p)
        };
        let close = |a: f64, b: f64| (a / b - 1.0).abs() < 1e-5;
        assert!(close(first_step(SchemeKind::FD11, StartUp::Taylor2), 4.01054e-5));
        assert!(close(first_step(SchemeKind::FD01, StartUp::Taylor2), 4.837418e-3));
        assert!(close(first_step(SchemeKind::Oefd, StartUp::Taylor2), 2.0357e-4));
        assert!(close(first_step(SchemeKind::Oifd, StartUp::CentralGhost), 4.38439e-4));
    }

    #[test]
    fn blow_up_is_detected_and_halts() {
        let (p, g) = sample_setup(50);
        let cfg = SchemeConfig::new(SchemeKind::FD01, 0.5).unwrap();
        let traj = solve_evolution(&p, &g, &cfg, 400.0).unwrap();
        let b = traj.blow_up.expect("explicit run far outside its region must overflow");
        assert!(b.step < 800);
        assert_eq!(traj.steps, b.step - 1);
        assert!(traj.final_state().is_finite());
        assert!(b.last_finite_magnitude > 1e100);
    }

    #[test]
    fn snapshot_policies() {
        let (p, g) = sample_setup(10);
        let cfg = SchemeConfig::new(SchemeKind::FD11, 0.1).unwrap();
        let all = solve_evolution_with(&p, &g, &cfg, 1.0, SnapshotPolicy::All).unwrap();
        assert_eq!(all.snapshots.len(), 11);
        let times = all.times();
        assert!(times.windows(2).all(|w| ((w[1] - w[0]) - 0.1).abs() < 1e-12));
        let stride = solve_evolution_with(&p, &g, &cfg, 1.0, SnapshotPolicy::Stride(3)).unwrap();
        assert_eq!(stride.times().len(), 5); // 0, 3, 6, 9, 10
        let last = solve_evolution_with(&p, &g, &cfg, 1.0, SnapshotPolicy::FinalOnly).unwrap();
        assert_eq!(last.snapshots.len(), 2);
        assert_eq!(last.final_state(), all.final_state());
        assert_eq!(all.nearest(0.52).t, 0.5);
    }

    #[test]
    fn forced_problem_converges_in_time() {
        // exact solution is quadratic in x, so the only error is temporal
        let p = forced_problem();
        let g = build_grid(0.0, 1.0, 10).unwrap();
        let errs: Vec<f64> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&k| {
                let cfg = SchemeConfig::new(SchemeKind::FD11, k).unwrap();
                max_error(&solve_evolution(&p, &g, &cfg, 1.0).unwrap(), &p)
            })
            .collect();
        let o1 = (errs[0] / errs[1]).log2();
        let o2 = (errs[1] / errs[2]).log2();
        assert!((1.8..2.2).contains(&o1) && (1.8..2.2).contains(&o2), "{errs:?}");
    }
}
