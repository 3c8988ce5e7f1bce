use std::path::Path;
use std::process::{Command, Output};

fn dampwave(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dampwave"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn records(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn csv_files(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    v.sort();
    v
}

#[test]
fn solve_writes_error_profile() {
    let dir = tempfile::tempdir().unwrap();
    let out = dampwave(
        &["solve", "--problem", "sample", "--scheme", "fd11", "--N", "10", "--k", "0.1", "--t-final", "0.3", "--out", "run.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = records(&dir.path().join("run.csv"));
    assert_eq!(header, ["x", "numeric", "exact", "abs_error"]);
    assert_eq!(rows.len(), 11);
    let center: f64 = rows[5][3].parse().unwrap();
    // the center error after three steps; the one-step value is 4.01e-5
    assert!((center - 8.457e-5).abs() < 1e-8, "{center}");
}

#[test]
fn default_output_name_follows_convention() {
    let dir = tempfile::tempdir().unwrap();
    let out = dampwave(&["solve", "--scheme", "fd01", "--N", "10", "--k", "0.01", "--t-final", "0.1"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("solve_fd01_N10_k0.01_t0.1.csv").exists());
}

#[test]
fn r_flag_sets_k_from_h() {
    let dir = tempfile::tempdir().unwrap();
    let out = dampwave(
        &["solve", "--scheme", "fd11", "--N", "50", "--r", "0.5", "--t-final", "1", "--out", "."],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let k = 0.5 * std::f64::consts::PI / 50.0;
    assert!(dir.path().join(format!("solve_fd11_N50_k{k}_t1.csv")).exists());
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dampwave(&["solve", "--scheme", "fd11", "--N", "10"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--k") && err.contains("Usage"), "{err}");

    let out = dampwave(&["solve", "--scheme", "fdST", "--N", "10", "--k", "0.1", "--t-final", "1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--pade"));
}

#[test]
fn divergence_exits_4_and_still_writes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dampwave(
        &["solve", "--scheme", "fd01", "--N", "50", "--k", "0.5", "--t-final", "400", "--out", "d.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("diverged"));
    assert!(dir.path().join("d.csv").exists());
}

#[test]
fn unwritable_output_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = dampwave(
        &["solve", "--scheme", "fd11", "--N", "10", "--k", "0.1", "--t-final", "0.1", "--out", "missing/dir/x.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn json_problem_matches_builtin() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("sample.json"),
        r#"{"domain": [0, 3.141592653589793], "gamma": "2", "g": "0", "phi": "sin(x)",
            "psi": "-sin(x)", "u_a": "0", "u_b": "0", "exact": "exp(-t)*sin(x)"}"#,
    )
    .unwrap();
    std::fs::write(dir.path().join("builtin.json"), r#"{"builtin": "sample"}"#).unwrap();
    let mut profiles = Vec::new();
    for (src, name) in [("sample", "a.csv"), ("sample.json", "b.csv"), ("builtin.json", "c.csv")] {
        let out = dampwave(
            &["solve", "--problem", src, "--scheme", "fd11", "--N", "16", "--k", "0.05", "--t-final", "1", "--out", name],
            dir.path(),
        );
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        profiles.push(records(&dir.path().join(name)).1);
    }
    for other in &profiles[1..] {
        for (a, b) in profiles[0].iter().zip(other) {
            let (u, v): (f64, f64) = (a[1].parse().unwrap(), b[1].parse().unwrap());
            assert!((u - v).abs() <= 1e-14, "{u} vs {v}");
        }
    }
    let out = dampwave(&["solve", "--problem", "nope.json", "--scheme", "fd11", "--N", "8", "--k", "0.1", "--t-final", "1"], dir.path());
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn stability_subcommand_reports_margins() {
    let dir = tempfile::tempdir().unwrap();
    let out = dampwave(&["stability", "--gamma-max", "2", "--k", "0.01", "--h", "0.2", "--out", "s.csv"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("stable") && !text.contains("unstable"));
    assert_eq!(text.matches("margin").count(), 2);
    let (header, rows) = records(&dir.path().join("s.csv"));
    assert_eq!(header, ["condition", "lhs", "rhs", "margin", "passed"]);
    assert_eq!(rows[0][4], "true");
    assert_eq!(rows[1][4], "true");

    let out = dampwave(&["stability", "--gamma-max", "2", "--k", "0.1", "--h", "0.3141592653589793", "--out", "u.csv"], dir.path());
    assert!(String::from_utf8_lossy(&out.stdout).contains("unstable"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for sub in [
        vec!["table1"],
        vec!["stability", "--problem", "sample", "--k", "0.01", "--h", "0.2", "--scheme", "fd11", "--seed", "9"],
        vec!["compare", "--N", "10", "--k", "0.05", "--t-final", "1"],
    ] {
        let mut outputs = Vec::new();
        for name in ["x.csv", "y.csv"] {
            let mut args = sub.clone();
            args.extend(["--out", name]);
            assert_eq!(dampwave(&args, dir.path()).status.code(), Some(0), "{args:?}");
            outputs.push(std::fs::read(dir.path().join(name)).unwrap());
        }
        assert_eq!(outputs[0], outputs[1], "{sub:?}");
    }
}

#[test]
fn every_subcommand_writes_parseable_csv() {
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 7] = [
        &["solve", "--scheme", "oifd", "--h", "0.3", "--k", "0.05", "--t-final", "0.5"],
        &["compare", "--schemes", "fd01,fd11,fdST", "--pade", "2,2", "--N", "12", "--k", "0.01", "--t-final", "0.5"],
        &["stability", "--gamma-max", "2", "--k", "0.1", "--h", "0.1"],
        &["convergence", "--scheme", "fd11", "--axis", "space", "--k", "0.001", "--N", "8", "--levels", "3", "--t-final", "0.5"],
        &["table1", "--t-final", "0.1", "--start-up", "central-ghost"],
        &["table2"],
        &["figures", "--out", "figs"],
    ];
    for args in runs {
        let out = dampwave(args, dir.path());
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let mut files = csv_files(dir.path());
    files.extend(csv_files(&dir.path().join("figs")));
    assert_eq!(files.len(), 6 + 7);
    for f in files {
        let (header, rows) = records(&f);
        assert!(!header.is_empty());
        for row in rows {
            assert_eq!(row.len(), header.len(), "{}", f.display());
            for cell in &row {
                let ok = cell.parse::<f64>().is_ok() || cell == "true" || cell == "false" || header[0] == "condition";
                assert!(ok, "{}: `{cell}`", f.display());
            }
        }
    }
}

#[test]
fn table_shapes() {
    let dir = tempfile::tempdir().unwrap();
    dampwave(&["table1", "--out", "t1.csv"], dir.path());
    let (header, rows) = records(&dir.path().join("t1.csv"));
    assert_eq!(header, ["x", "OEFD", "OIFD", "EX-(0,1)", "IM-(1,1)"]);
    assert_eq!(rows.len(), 11);
    assert!(rows[0][1..].iter().all(|c| c == "0"));

    dampwave(&["table2", "--out", "t2.csv"], dir.path());
    let (header, rows) = records(&dir.path().join("t2.csv"));
    assert_eq!(header.len(), 3 + 2 * 4);
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0][0], "1.59");
    // EX-(0,1) at r = 1.59 is flagged
    assert_eq!(rows[0][8], "true");
}
