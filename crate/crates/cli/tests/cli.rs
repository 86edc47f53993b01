use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn lcco(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lcco"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn generate(dir: &Path, name: &str, n: usize, m: usize, kind: &str, seed: u64) -> PathBuf {
    let path = dir.join(name);
    let out = lcco(&[
        "generate",
        "--n",
        &n.to_string(),
        "--m",
        &m.to_string(),
        "--objective",
        kind,
        "--seed",
        &seed.to_string(),
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    path
}

fn summary_value(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(key))
        .map(|v| v.trim().to_string())
        .unwrap_or_else(|| panic!("no `{key}` in summary:\n{text}"))
}

const TWO_VAR: &str = "LCCO 1
n 2
m 1
A
1 1
b
2
objective linear
c
1 1
";

#[test]
fn solve_seed7_within_bound() {
    let dir = TempDir::new().unwrap();
    let path = generate(dir.path(), "gen4.lcco", 4, 2, "linear", 7);
    let out = lcco(&["solve", path.to_str().unwrap(), "--r", "1", "--eps", "1e-6"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let iterations: u64 = summary_value(&text, "iterations").parse().unwrap();
    let bound: u64 = summary_value(&text, "bound").parse().unwrap();
    assert_eq!(bound, 225);
    assert!(iterations <= bound);
    assert!(text.contains("final gap / mu0"));
}

#[test]
fn solve_rejects_bad_order() {
    let dir = TempDir::new().unwrap();
    let path = generate(dir.path(), "gen4.lcco", 4, 2, "linear", 7);
    for r in ["0", "13", "x"] {
        assert_eq!(code(&lcco(&["solve", path.to_str().unwrap(), "--r", r])), 1);
    }
}

#[test]
fn inadmissible_start_exits_2() {
    let dir = TempDir::new().unwrap();
    let off_centre = dir.path().join("bad_start.lcco");
    fs::write(
        &off_centre,
        format!("{TWO_VAR}start\nx 1.9 0.1\ny 0\nz 1 1\n"),
    )
    .unwrap();
    assert_eq!(code(&lcco(&["solve", off_centre.to_str().unwrap()])), 2);

    let missing = dir.path().join("no_start.lcco");
    fs::write(&missing, TWO_VAR).unwrap();
    assert_eq!(code(&lcco(&["solve", missing.to_str().unwrap()])), 2);
}

#[test]
fn malformed_file_is_usage_error() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("broken.lcco");
    fs::write(&path, "LCCO 1\nn 2\nm 1\nA\n1 oops\n").unwrap();
    let out = lcco(&["solve", path.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 5"));
    assert_eq!(
        code(&lcco(&[
            "solve",
            dir.path().join("absent").to_str().unwrap()
        ])),
        1
    );
}

#[test]
fn iteration_cap_exits_4() {
    let dir = TempDir::new().unwrap();
    let path = generate(dir.path(), "gen4.lcco", 4, 2, "quadratic", 3);
    let out = lcco(&["solve", path.to_str().unwrap(), "--max-iter", "5"]);
    assert_eq!(code(&out), 4);
    assert_eq!(summary_value(&stdout(&out), "iterations"), "5");
}

#[test]
fn strict_monitor_failure_exits_3() {
    let dir = TempDir::new().unwrap();
    let path = generate(dir.path(), "gen4.lcco", 4, 2, "linear", 7);
    let out = lcco(&[
        "solve",
        path.to_str().unwrap(),
        "--theta",
        "0.5",
        "--strict",
    ]);
    assert_eq!(code(&out), 3);
}

#[test]
fn theta_and_cap_validation() {
    let dir = TempDir::new().unwrap();
    let path = generate(dir.path(), "gen4.lcco", 4, 2, "linear", 7);
    let p = path.to_str().unwrap();
    for args in [
        vec!["solve", p, "--theta", "1.5"],
        vec!["solve", p, "--theta", "nope"],
        vec!["solve", p, "--max-iter", "0"],
        vec!["solve", p, "--eps", "-1"],
    ] {
        assert_eq!(code(&lcco(&args)), 1, "{args:?}");
    }
}

#[test]
fn trace_and_check_output() {
    let dir = TempDir::new().unwrap();
    let path = generate(dir.path(), "gen6.lcco", 6, 3, "quadratic", 2);
    let trace = dir.path().join("trace.csv");
    let out = lcco(&[
        "solve",
        path.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
        "--check",
    ]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let iterations: usize = summary_value(&text, "iterations").parse().unwrap();
    let rel: f64 = summary_value(&text, "check: relative error")
        .parse()
        .unwrap();
    assert!(rel <= 1e-5, "{rel}");

    let csv = fs::read_to_string(&trace).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "iter,mu,gap,gamma,min_w,norm_pw,norm_qw,dxTdz,primal_res,dual_res,lemma2,lemma4,lemma5,eq111,eq112,eq115"
    );
    assert_eq!(lines.clone().count(), iterations);
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 16);
        assert!(fields[10..].iter().all(|&f| f == "1"));
    }
}

#[test]
fn generate_is_deterministic_and_parses() {
    let dir = TempDir::new().unwrap();
    let a = generate(dir.path(), "a.lcco", 4, 2, "linear", 7);
    let b = generate(dir.path(), "b.lcco", 4, 2, "linear", 7);
    let c = generate(dir.path(), "c.lcco", 4, 2, "linear", 8);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
    let p = lcco_core::parse_instance(&fs::read_to_string(&a).unwrap()).unwrap();
    let report = lcco_core::validate_start(&p, p.start().unwrap(), 1);
    assert!(report.admissible);
    assert!(report.gamma0.abs() < 1e-12);
}

#[test]
fn generate_rejects_bad_dimensions() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("x.lcco");
    let o = out.to_str().unwrap();
    for (n, m) in [("2", "2"), ("4", "0"), ("1", "1"), ("3", "5")] {
        let res = lcco(&[
            "generate",
            "--n",
            n,
            "--m",
            m,
            "--objective",
            "linear",
            "--seed",
            "1",
            "--out",
            o,
        ]);
        assert_eq!(code(&res), 1, "n={n} m={m}");
    }
    let res = lcco(&[
        "generate",
        "--n",
        "4",
        "--m",
        "2",
        "--objective",
        "cubic",
        "--seed",
        "1",
        "--out",
        o,
    ]);
    assert_eq!(code(&res), 1);
    assert!(!out.exists());
}

#[test]
fn sweep_prefers_r1_and_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let path = generate(dir.path(), "gen4.lcco", 4, 2, "linear", 7);
    let serial = dir.path().join("serial.csv");
    let parallel = dir.path().join("parallel.csv");
    let p = path.to_str().unwrap();
    let out = lcco(&[
        "sweep",
        p,
        "--r-max",
        "3",
        "--eps",
        "1e-6",
        "--out",
        serial.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("fewest iterations: r = 1"));
    let out = lcco(&[
        "sweep",
        p,
        "--r-max",
        "3",
        "--eps",
        "1e-6",
        "--out",
        parallel.to_str().unwrap(),
        "--jobs",
        "3",
    ]);
    assert_eq!(code(&out), 0);

    let csv = fs::read_to_string(&serial).unwrap();
    assert_eq!(csv, fs::read_to_string(&parallel).unwrap());
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "r,theta,iterations,bound,final_gap,max_gamma,monitor_violations,status"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    for (k, row) in rows.iter().enumerate() {
        assert_eq!(row[0], (k + 1).to_string());
        assert_eq!(row[7], "converged");
        assert_eq!(row[6], "0");
        let iterations: u64 = row[2].parse().unwrap();
        let bound: u64 = row[3].parse().unwrap();
        assert!(iterations <= bound);
    }
}

#[test]
fn sweep_failure_keeps_partial_csv() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("no_start.lcco");
    fs::write(&path, TWO_VAR).unwrap();
    let csv = dir.path().join("sweep.csv");
    let out = lcco(&[
        "sweep",
        path.to_str().unwrap(),
        "--r-max",
        "2",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().skip(1).all(|l| l.ends_with("invalid_start")));
}

#[test]
fn sweep_rejects_order_cap() {
    let dir = TempDir::new().unwrap();
    let path = generate(dir.path(), "gen4.lcco", 4, 2, "linear", 7);
    let csv = dir.path().join("s.csv");
    let out = lcco(&[
        "sweep",
        path.to_str().unwrap(),
        "--r-max",
        "13",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn help_exits_zero() {
    assert_eq!(code(&lcco(&["--help"])), 0);
    assert_eq!(code(&lcco(&["solve", "--help"])), 0);
    assert_eq!(code(&lcco(&[])), 1);
}
