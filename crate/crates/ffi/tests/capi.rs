use std::ffi::{c_char, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use dampwave_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { dw_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(255)].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

fn sample() -> *mut DwProblem {
    let name = CString::new("sample").unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { dw_problem_builtin(name.as_ptr(), &mut p) }, DwStatus::Ok);
    p
}

#[test]
fn solve_sample_through_handles() {
    let p = sample();
    let mut run = ptr::null_mut();
    let status = unsafe { dw_solve(p, DwScheme::Fd11, 0, 0, 10, 0.1, 0.1, &mut run) };
    assert_eq!(status, DwStatus::Ok);
    unsafe {
        assert_eq!(dw_run_interior_nodes(run), 9);
        assert_eq!(dw_run_blew_up(run), 0);
        let mut t = 0.0;
        assert_eq!(dw_run_final_time(run, &mut t), DwStatus::Ok);
        assert!((t - 0.1).abs() < 1e-12);
        let mut err = 0.0;
        assert_eq!(dw_run_max_error(run, &mut err), DwStatus::Ok);
        assert!((err / 4.010538e-5 - 1.0).abs() < 1e-5, "{err}");
        let mut u = vec![0.0; 9];
        assert_eq!(dw_run_displacement(run, u.as_mut_ptr(), 9), DwStatus::Ok);
        assert!((u[4] - (-0.1f64).exp()).abs() < 1e-4);
        assert_eq!(dw_run_displacement(run, u.as_mut_ptr(), 3), DwStatus::BufferTooSmall);
        assert!(last_error().contains("9 needed"));
        dw_run_free(run);
        dw_problem_free(p);
    }
}

#[test]
fn general_pade_and_baselines() {
    let p = sample();
    for (scheme, s, t) in [(DwScheme::FdSt, 2, 2), (DwScheme::Oefd, 0, 0), (DwScheme::Oifd, 0, 0), (DwScheme::Fd01, 0, 0)] {
        let mut run = ptr::null_mut();
        assert_eq!(unsafe { dw_solve(p, scheme, s, t, 20, 0.001, 0.2, &mut run) }, DwStatus::Ok);
        let mut err = 1.0;
        unsafe {
            assert_eq!(dw_run_max_error(run, &mut err), DwStatus::Ok);
            dw_run_free(run);
        }
        assert!(err < 1e-3, "{scheme:?} {err}");
    }
    let mut run = ptr::null_mut();
    assert_eq!(unsafe { dw_solve(p, DwScheme::FdSt, 5, 0, 20, 0.01, 0.2, &mut run) }, DwStatus::InvalidArgument);
    assert!(last_error().contains("unsupported"));
    unsafe { dw_problem_free(p) };
}

#[test]
fn blow_up_is_reported_not_failed() {
    let p = sample();
    let mut run = ptr::null_mut();
    assert_eq!(unsafe { dw_solve(p, DwScheme::Fd01, 0, 0, 50, 0.5, 400.0, &mut run) }, DwStatus::Ok);
    unsafe {
        assert_eq!(dw_run_blew_up(run), 1);
        dw_run_free(run);
        dw_problem_free(p);
    }
}

#[test]
fn json_problems_and_errors() {
    let doc = CString::new(
        r#"{"domain": [0, 1], "gamma": "1", "g": "0", "phi": "sin(pi*x)", "psi": "0", "u_a": "0", "u_b": "0"}"#,
    )
    .unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { dw_problem_from_json(doc.as_ptr(), &mut p) }, DwStatus::Ok);
    let mut run = ptr::null_mut();
    assert_eq!(unsafe { dw_solve(p, DwScheme::Fd11, 0, 0, 8, 0.05, 0.5, &mut run) }, DwStatus::Ok);
    let mut err = 0.0;
    assert_eq!(unsafe { dw_run_max_error(run, &mut err) }, DwStatus::MissingExact);
    unsafe {
        dw_run_free(run);
        dw_problem_free(p);
    }

    let bad = CString::new(r#"{"domain": [0, 1], "gamma": "1 +", "g": "0", "phi": "0", "psi": "0", "u_a": "0", "u_b": "0"}"#).unwrap();
    assert_eq!(unsafe { dw_problem_from_json(bad.as_ptr(), &mut p) }, DwStatus::Parse);
    assert!(!last_error().is_empty());

    let unknown = CString::new("nope").unwrap();
    assert_eq!(unsafe { dw_problem_builtin(unknown.as_ptr(), &mut p) }, DwStatus::InvalidArgument);
    assert_eq!(unsafe { dw_problem_builtin(ptr::null(), &mut p) }, DwStatus::NullPointer);
    assert_eq!(
        unsafe { dw_solve(ptr::null(), DwScheme::Fd11, 0, 0, 8, 0.1, 1.0, &mut run) },
        DwStatus::NullPointer
    );
    unsafe {
        dw_problem_free(ptr::null_mut());
        dw_run_free(ptr::null_mut());
        assert_eq!(dw_run_blew_up(ptr::null()), -1);
        assert_eq!(dw_run_interior_nodes(ptr::null()), 0);
    }
}

#[test]
fn stability_and_pade_queries() {
    let mut stable = -1;
    let mut margins = [0.0; 2];
    unsafe {
        assert_eq!(dw_explicit_stability(0.01, 0.2, 2.0, &mut stable, margins.as_mut_ptr()), DwStatus::Ok);
    }
    assert_eq!(stable, 1);
    assert!((margins[0] - 0.99).abs() < 1e-12);
    assert!((margins[1] - (0.5f64.sqrt() - 0.5)).abs() < 1e-12);
    assert_eq!(unsafe { dw_explicit_stability(-1.0, 0.2, 2.0, &mut stable, ptr::null_mut()) }, DwStatus::InvalidArgument);

    let mut m = 0.0;
    assert_eq!(unsafe { dw_implicit_max_modulus(10, 0.3, 0.1, 2.0, &mut m) }, DwStatus::Ok);
    assert!(m <= 1.0);

    let (mut num, mut den) = ([0.0; 2], [0.0; 2]);
    assert_eq!(unsafe { dw_pade_coefficients(1, 1, num.as_mut_ptr(), den.as_mut_ptr()) }, DwStatus::Ok);
    assert_eq!((num, den), ([1.0, 0.5], [1.0, -0.5]));
}

#[test]
fn version_string() {
    let v = unsafe { std::ffi::CStr::from_ptr(dw_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn generated_header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/dampwave.h");
    let text = std::fs::read_to_string(&header).expect("header is generated by the build script");
    for name in ["dw_solve", "dw_problem_builtin", "dw_run_free", "DwStatus", "typedef struct DwRun DwRun"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"dampwave.h\"\nint main(void) { DwProblem *p = 0; DwStatus s = dw_problem_builtin(\"sample\", &p); return (int)s; }\n",
    )
    .unwrap();
    match Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-I"])
        .arg(header.parent().unwrap())
        .arg(&src)
        .output()
    {
        Ok(out) => assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr)),
        Err(_) => eprintln!("no C compiler found; syntax check skipped"),
    }
}
