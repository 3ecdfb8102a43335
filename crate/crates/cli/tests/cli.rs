//! End-to-end checks of the command line interface: exit codes, CSV
//! shapes, and byte-stable output.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_heatl1"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn tmpdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("heatl1-cli-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn read_csv(dir: &Path, name: &str) -> Vec<Vec<String>> {
    let text = fs::read_to_string(dir.join(name)).unwrap();
    text.lines()
        .map(|l| l.split(',').map(|c| c.to_string()).collect())
        .collect()
}

#[test]
fn mesh_check_nonobtuse_exits_zero() {
    let out = run(&["mesh-check", "--unit-square", "4"]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("is_nonobtuse true"));

    let out = run(&["mesh-check", "--interval", "6"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn mesh_check_obtuse_file_exits_one() {
    let dir = tmpdir("obtuse");
    let path = dir.join("obtuse.mesh");
    // two triangles sharing an edge, one angle well beyond a right angle
    fs::write(
        &path,
        "d 2 4 2\nv 0 0\nv 1 0\nv -0.5 0.2\nv 1.5 0.2\ne 0 1 2\ne 1 3 2\n",
    )
    .unwrap();
    let out = run(&["mesh-check", "--file", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{out:?}");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("is_nonobtuse false"));
}

#[test]
fn mesh_check_malformed_file_exits_two() {
    let dir = tmpdir("malformed");
    let path = dir.join("bad.mesh");
    fs::write(&path, "d 1 3 2\nv 0\nv abc\nv 1\ne 0 1\ne 1 2\n").unwrap();
    let out = run(&["mesh-check", "--file", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");

    // index out of range is also a parse-level failure
    let path2 = dir.join("bad2.mesh");
    fs::write(&path2, "d 1 3 2\nv 0\nv 0.5\nv 1\ne 0 1\ne 1 99\n").unwrap();
    let out = run(&["mesh-check", "--file", path2.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn solve_zero_problem_writes_zero_columns() {
    let dir = tmpdir("solve-zero");
    let out = run(&[
        "solve",
        "--problem",
        "zero",
        "--dim",
        "1",
        "--n",
        "8",
        "--nt",
        "4",
        "--t-final",
        "1.0",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let rows = read_csv(&dir, "trajectory.csv");
    assert_eq!(rows[0], vec!["step", "t", "l1", "l2", "h1_semi"]);
    assert_eq!(rows.len(), 6);
    for row in &rows[1..] {
        for cell in &row[2..] {
            assert_eq!(cell.parse::<f64>().unwrap(), 0.0);
        }
    }
}

#[test]
fn solve_sine_decays_in_l2() {
    let dir = tmpdir("solve-sine");
    let out = run(&[
        "solve",
        "--problem",
        "sine1d",
        "--dim",
        "1",
        "--n",
        "16",
        "--nt",
        "64",
        "--t-final",
        "0.25",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let rows = read_csv(&dir, "trajectory.csv");
    let l2: Vec<f64> = rows[1..].iter().map(|r| r[3].parse().unwrap()).collect();
    for w in l2.windows(2) {
        assert!(w[1] < w[0], "L2 column must decay: {w:?}");
    }
}

#[test]
fn solve_cfl_enforce_rejects_violating_grid() {
    let dir = tmpdir("solve-cfl");
    let out = run(&[
        "solve",
        "--problem",
        "zero",
        "--dim",
        "1",
        "--n",
        "64",
        "--nt",
        "64",
        "--t-final",
        "0.0001",
        "--cfl",
        "enforce",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1), "{out:?}");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("CFL"), "{stderr}");
}

#[test]
fn diagnose_smooth_problem_passes_monitor() {
    let dir = tmpdir("diagnose");
    let out = run(&[
        "diagnose",
        "--problem",
        "sine1d",
        "--dim",
        "1",
        "--n",
        "16",
        "--nt",
        "32",
        "--t-final",
        "0.25",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let rows = read_csv(&dir, "monitor.csv");
    assert_eq!(rows.len(), 14); // header + 13 dyadic levels
    for row in &rows[1..] {
        assert_eq!(row[6], "true", "monitor row failed: {row:?}");
    }
    let summary = read_csv(&dir, "diagnostics.csv");
    let get = |name: &str| -> f64 {
        summary
            .iter()
            .find(|r| r[0] == name)
            .unwrap_or_else(|| panic!("missing {name}"))[1]
            .parse()
            .unwrap()
    };
    assert!(get("linfty_l1") <= get("linfty_l1_bound"));
    assert!(get("residual").abs() < 1e-2);
}

#[test]
fn diagnose_empty_k_grid_is_usage_error() {
    let dir = tmpdir("diagnose-bad");
    let out = run(&[
        "diagnose",
        "--problem",
        "zero",
        "--dim",
        "1",
        "--n",
        "4",
        "--nt",
        "4",
        "--k-min-exp",
        "3",
        "--k-max-exp",
        "-2",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn infsup_meets_theory_bounds() {
    let dir = tmpdir("infsup");
    let out = run(&[
        "infsup",
        "--dim",
        "1",
        "--n",
        "4,8",
        "--nt",
        "4,8",
        "--t-final",
        "1.0",
        "--consistent-mass",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let rows = read_csv(&dir, "infsup.csv");
    assert!(rows.len() > 1);
    for row in &rows[1..] {
        let cfl_ok = row[7] == "true";
        let sigma: f64 = row[9].parse().unwrap();
        match row[8].as_str() {
            "lumped" => {
                if cfl_ok {
                    assert!(sigma >= 0.5 - 1e-8, "lumped sigma {sigma}");
                }
            }
            "consistent" => assert!(sigma >= 1.0 - 1e-8, "consistent sigma {sigma}"),
            other => panic!("unknown variant {other}"),
        }
    }
}

#[test]
fn infsup_oversized_spec_is_rejected() {
    let dir = tmpdir("infsup-big");
    let out = run(&[
        "infsup",
        "--dim",
        "1",
        "--n",
        "128",
        "--nt",
        "64",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn study_manufactured_orders() {
    let dir = tmpdir("study-rates");
    let out = run(&[
        "study",
        "--problem",
        "sine1d",
        "--dim",
        "1",
        "--ladder",
        "8:16,16:64,32:256",
        "--t-final",
        "0.25",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let orders = read_csv(&dir, "orders.csv");
    let linf: f64 = orders[1][1].parse().unwrap();
    let h1: f64 = orders[2][1].parse().unwrap();
    assert!((1.6..=2.2).contains(&linf), "linf order {linf}");
    assert!((0.8..=1.2).contains(&h1), "h1 order {h1}");
}

#[test]
fn study_cauchy_differences_decrease() {
    let dir = tmpdir("study-cauchy");
    let out = run(&[
        "study",
        "--problem",
        "dirac(0.0625)",
        "--dim",
        "2",
        "--ladder",
        "4:2,8:8,16:32",
        "--t-final",
        "0.25",
        "--q",
        "1.2",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let rows = read_csv(&dir, "cauchy.csv");
    assert_eq!(rows.len(), 3);
    let d1: f64 = rows[1][2].parse().unwrap();
    let d2: f64 = rows[2][2].parse().unwrap();
    assert!(d2 < d1, "Linf(L1) Cauchy differences must decrease");
}

#[test]
fn study_rejects_exponent_at_or_above_the_critical_one() {
    let dir = tmpdir("study-badq");
    let out = run(&[
        "study",
        "--problem",
        "dirac(0.25)",
        "--dim",
        "2",
        "--ladder",
        "4:2,8:8",
        "--q",
        "1.5",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("(d+2)/(d+1)"), "{stderr}");
}

#[test]
fn csv_outputs_are_byte_identical_across_runs() {
    let dir_a = tmpdir("repeat-a");
    let dir_b = tmpdir("repeat-b");
    for dir in [&dir_a, &dir_b] {
        let out = run(&[
            "diagnose",
            "--problem",
            "dirac(0.125)",
            "--dim",
            "2",
            "--n",
            "8",
            "--nt",
            "8",
            "--t-final",
            "0.25",
            "--seed",
            "24235",
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{out:?}");
    }
    for name in ["monitor.csv", "diagnostics.csv"] {
        let a = fs::read(dir_a.join(name)).unwrap();
        let b = fs::read(dir_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }

    // the study tables reproduce byte for byte as well
    for dir in [&dir_a, &dir_b] {
        let out = run(&[
            "study",
            "--problem",
            "sine1d",
            "--dim",
            "1",
            "--ladder",
            "8:16,16:64",
            "--t-final",
            "0.25",
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{out:?}");
    }
    for name in ["rates.csv", "orders.csv"] {
        let a = fs::read(dir_a.join(name)).unwrap();
        let b = fs::read(dir_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn unknown_problem_is_usage_error() {
    let out = run(&["solve", "--problem", "warp-field", "--dim", "1"]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("known problems"), "{stderr}");
}
