//! C ABI over the `dampwave` solver.
//!
//! Problems and runs are opaque handles created and freed through this
//! interface. Every fallible function returns a [`DwStatus`]; on failure the
//! message is available from [`dw_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dampwave::operators::build_grid;
use dampwave::pade::pade_coefficients;
use dampwave::problems::{builtin, load_problem_config, DampedWaveProblem};
use dampwave::schemes::{solve_evolution_with, SchemeConfig, SchemeKind, SnapshotPolicy, Trajectory};
use dampwave::stability::{check_explicit_stability, implicit_amplification};
use dampwave::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DwStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Numerical = 4,
    MissingExact = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DwScheme {
    Fd01 = 0,
    Fd11 = 1,
    /// General Padé member; orders passed separately.
    FdSt = 2,
    Oefd = 3,
    Oifd = 4,
}

/// Opaque problem definition.
pub struct DwProblem {
    inner: DampedWaveProblem,
}

/// Opaque finished run: the final state and enough context to evaluate errors.
pub struct DwRun {
    problem: DampedWaveProblem,
    traj: Trajectory,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> DwStatus {
    match err {
        Error::Expr(_) | Error::Config(_) => DwStatus::Parse,
        Error::Singular { .. } | Error::Pole { .. } | Error::OracleTooLarge(_) => DwStatus::Numerical,
        Error::MissingExact => DwStatus::MissingExact,
        _ => DwStatus::InvalidArgument,
    }
}

fn fail(status: DwStatus, msg: impl Into<String>) -> DwStatus {
    set_error(msg);
    status
}

fn guard<F: FnOnce() -> DwStatus>(f: F) -> DwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(DwStatus::Panic, "internal panic"),
    }
}

fn lift(err: Error) -> DwStatus {
    let status = status_of(&err);
    fail(status, err.to_string())
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, DwStatus> {
    if s.is_null() {
        return Err(fail(DwStatus::NullPointer, format!("{what} is NULL")));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(DwStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length excluding the NUL,
/// or 0 when there is no error.
///
/// # Safety
/// `buf` must be NULL or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn dw_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Static version string.
#[no_mangle]
pub extern "C" fn dw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Built-in problem by name (`sample`, `undamped`, `forced`).
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dw_problem_builtin(name: *const c_char, out: *mut *mut DwProblem) -> DwStatus {
    guard(|| {
        if out.is_null() {
            return fail(DwStatus::NullPointer, "out is NULL");
        }
        let name = match read_str(name, "name") {
            Ok(n) => n,
            Err(s) => return s,
        };
        match builtin(name) {
            Some(p) => {
                *out = Box::into_raw(Box::new(DwProblem { inner: p }));
                DwStatus::Ok
            }
            None => fail(DwStatus::InvalidArgument, format!("unknown built-in problem `{name}`")),
        }
    })
}

/// Problem from a JSON document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dw_problem_from_json(json: *const c_char, out: *mut *mut DwProblem) -> DwStatus {
    guard(|| {
        if out.is_null() {
            return fail(DwStatus::NullPointer, "out is NULL");
        }
        let text = match read_str(json, "json") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match load_problem_config(text) {
            Ok(p) => {
                *out = Box::into_raw(Box::new(DwProblem { inner: p }));
                DwStatus::Ok
            }
            Err(e) => lift(e),
        }
    })
}

/// # Safety
/// `problem` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dw_problem_free(problem: *mut DwProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

fn scheme_kind(scheme: DwScheme, s: usize, t: usize) -> Result<SchemeKind, Error> {
    Ok(match scheme {
        DwScheme::Fd01 => SchemeKind::FD01,
        DwScheme::Fd11 => SchemeKind::FD11,
        DwScheme::FdSt => {
            pade_coefficients(s, t)?;
            SchemeKind::Semigroup { s, t }
        }
        DwScheme::Oefd => SchemeKind::Oefd,
        DwScheme::Oifd => SchemeKind::Oifd,
    })
}

/// Runs `scheme` with `n` subintervals and step `k` up to `t_final`.
/// `pade_s`/`pade_t` are read only for `DW_SCHEME_FD_ST`. A run that blows up
/// still succeeds; query it with [`dw_run_blew_up`].
///
/// # Safety
/// `problem` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dw_solve(
    problem: *const DwProblem,
    scheme: DwScheme,
    pade_s: usize,
    pade_t: usize,
    n: usize,
    k: f64,
    t_final: f64,
    out: *mut *mut DwRun,
) -> DwStatus {
    guard(|| {
        if problem.is_null() || out.is_null() {
            return fail(DwStatus::NullPointer, "problem or out is NULL");
        }
        let p = &(*problem).inner;
        let run = (|| {
            let kind = scheme_kind(scheme, pade_s, pade_t)?;
            let grid = build_grid(p.domain.0, p.domain.1, n)?;
            let config = SchemeConfig::new(kind, k)?;
            solve_evolution_with(p, &grid, &config, t_final, SnapshotPolicy::FinalOnly)
        })();
        match run {
            Ok(traj) => {
                *out = Box::into_raw(Box::new(DwRun {
                    problem: p.clone(),
                    traj,
                }));
                DwStatus::Ok
            }
            Err(e) => lift(e),
        }
    })
}

/// # Safety
/// `run` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dw_run_free(run: *mut DwRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Number of interior nodes, 0 for NULL.
///
/// # Safety
/// `run` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dw_run_interior_nodes(run: *const DwRun) -> usize {
    run.as_ref().map_or(0, |r| r.traj.grid.n_interior())
}

/// 1 if the run hit a non-finite state, 0 if not, -1 for NULL.
///
/// # Safety
/// `run` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dw_run_blew_up(run: *const DwRun) -> c_int {
    run.as_ref().map_or(-1, |r| c_int::from(r.traj.blew_up()))
}

/// Time of the last completed step.
///
/// # Safety
/// `run` must be a live handle; `t` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dw_run_final_time(run: *const DwRun, t: *mut f64) -> DwStatus {
    match (run.as_ref(), t.is_null()) {
        (Some(r), false) => {
            *t = r.traj.final_state().t;
            DwStatus::Ok
        }
        _ => fail(DwStatus::NullPointer, "run or t is NULL"),
    }
}

/// Copies the interior displacements of the last completed step into `buf`,
/// which must hold [`dw_run_interior_nodes`] values.
///
/// # Safety
/// `run` must be a live handle; `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn dw_run_displacement(run: *const DwRun, buf: *mut f64, len: usize) -> DwStatus {
    let Some(r) = run.as_ref() else {
        return fail(DwStatus::NullPointer, "run is NULL");
    };
    if buf.is_null() {
        return fail(DwStatus::NullPointer, "buf is NULL");
    }
    let u = r.traj.final_state().displacement();
    if len < u.len() {
        return fail(
            DwStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", u.len()),
        );
    }
    ptr::copy_nonoverlapping(u.as_ptr(), buf, u.len());
    DwStatus::Ok
}

/// Max abs error over interior nodes at the last completed step.
///
/// # Safety
/// `run` must be a live handle; `err` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dw_run_max_error(run: *const DwRun, err: *mut f64) -> DwStatus {
    guard(|| {
        let Some(r) = run.as_ref() else {
            return fail(DwStatus::NullPointer, "run is NULL");
        };
        if err.is_null() {
            return fail(DwStatus::NullPointer, "err is NULL");
        }
        let state = r.traj.final_state();
        let mut max: f64 = 0.0;
        for (&x, u) in r.traj.grid.interior_nodes().iter().zip(state.displacement()) {
            match r.problem.exact(x, state.t) {
                None => return lift(Error::MissingExact),
                Some(Err(e)) => return lift(e.into()),
                Some(Ok(v)) => max = max.max((u - v).abs()),
            }
        }
        *err = max;
        DwStatus::Ok
    })
}

/// Explicit-scheme verdict: `*stable` is 1 or 0 and `margins[0..2]` receive
/// `2/γ* - k` and `sqrt(γ*)/2 - sqrt(k)/h` (either may be NULL).
///
/// # Safety
/// `stable` must be valid; `margins` NULL or pointing to 2 doubles.
#[no_mangle]
pub unsafe extern "C" fn dw_explicit_stability(
    k: f64,
    h: f64,
    gamma_star: f64,
    stable: *mut c_int,
    margins: *mut f64,
) -> DwStatus {
    match check_explicit_stability(k, h, gamma_star) {
        Ok(v) => {
            if !stable.is_null() {
                *stable = c_int::from(v.stable);
            }
            if !margins.is_null() {
                *margins = v.conditions[0].margin;
                *margins.add(1) = v.conditions[1].margin;
            }
            DwStatus::Ok
        }
        Err(e) => lift(e),
    }
}

/// Largest `|μ|` of the FD-(1,1) map over all modes, constant damping.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dw_implicit_max_modulus(n: usize, h: f64, k: f64, gamma: f64, out: *mut f64) -> DwStatus {
    if out.is_null() {
        return fail(DwStatus::NullPointer, "out is NULL");
    }
    match implicit_amplification(n, h, k, gamma) {
        Ok(s) => {
            *out = s.max_modulus;
            DwStatus::Ok
        }
        Err(e) => lift(e),
    }
}

/// Padé coefficients in ascending powers: `numerator` gets `t + 1` values,
/// `denominator` gets `s + 1`.
///
/// # Safety
/// `numerator`/`denominator` must point to at least `t + 1`/`s + 1` doubles.
#[no_mangle]
pub unsafe extern "C" fn dw_pade_coefficients(
    s: usize,
    t: usize,
    numerator: *mut f64,
    denominator: *mut f64,
) -> DwStatus {
    if numerator.is_null() || denominator.is_null() {
        return fail(DwStatus::NullPointer, "coefficient buffer is NULL");
    }
    match pade_coefficients(s, t) {
        Ok(a) => {
            let (p, q) = (a.numerator_f64(), a.denominator_f64());
            ptr::copy_nonoverlapping(p.as_ptr(), numerator, p.len());
            ptr::copy_nonoverlapping(q.as_ptr(), denominator, q.len());
            DwStatus::Ok
        }
        Err(e) => lift(e),
    }
}
