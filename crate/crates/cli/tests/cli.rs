use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn phsplit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phsplit"))
        .args(args)
        .current_dir(dir)
        .env_remove("PHSPLIT_OUT")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn summary(path: &Path) -> String {
    fs::read_to_string(path.join("summary.txt")).unwrap()
}

const DEGENERATE: &str = r#"{
  "name": "degenerate",
  "partition": [1, 1],
  "E": [[0, 0], [0, 0]],
  "J": [[0, 1], [-1, 0]],
  "R": [[0, 0], [0, 0]],
  "Q": [[1, 0], [0, 1]],
  "B": [[0], [0]],
  "x0": [0, 0],
  "T": 1.0,
  "N": 101,
  "input": { "signal": { "kind": "zero" } }
}"#;

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = phsplit(dir.path(), &["validate", "rlc-circuit"]);
    assert_eq!(code(&ok), 0, "{}", stderr(&ok));
    let report: serde_json::Value = serde_json::from_str(&stdout(&ok)).unwrap();
    assert_eq!(report["n"], 6);
    assert_eq!(report["rank_er"], 6);

    fs::write(dir.path().join("degenerate.json"), DEGENERATE).unwrap();
    let bad = phsplit(dir.path(), &["validate", "degenerate.json"]);
    assert_eq!(code(&bad), 1);
    assert!(stderr(&bad).contains("rk[E R]"), "{}", stderr(&bad));

    fs::write(dir.path().join("broken.json"), "{ \"E\": [[1, 2], [3]] ").unwrap();
    assert_eq!(code(&phsplit(dir.path(), &["validate", "broken.json"])), 2);
    assert_eq!(code(&phsplit(dir.path(), &["validate", "missing.json"])), 2);
    assert_eq!(code(&phsplit(dir.path(), &["validate", "two-mass", "--param", "m1=-1"])), 2);
    assert_eq!(code(&phsplit(dir.path(), &["frobnicate"])), 2);
}

#[test]
fn run_lm_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = phsplit(
        dir.path(),
        &["run", "--model", "two-mass", "--lm", "lambda=1.5", "mu=2", "omega=2.2", "alpha=0.5", "--out", "lm"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = dir.path().join("lm");
    let table = fs::read_to_string(out.join("iteration.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("k,err_x_l2,err_x_l2w,err_z_l2w,err_Ex_sup,q_bound"));
    assert_eq!(lines.count(), 51);
    let reference = fs::read_to_string(out.join("reference.csv")).unwrap();
    assert!(reference.starts_with("t,c1,c2,c3,c4,c5\n"));
    let s = summary(&out);
    assert!(s.contains("monotone_z: true"), "{s}");
    assert!(s.contains("q: 0.975"), "{s}");

    let again = phsplit(
        dir.path(),
        &["run", "--model", "two-mass", "--lm", "lambda=1.5", "mu=2", "omega=2.2", "alpha=0.5", "--out", "lm2"],
    );
    assert_eq!(code(&again), 0);
    assert_eq!(table, fs::read_to_string(dir.path().join("lm2/iteration.csv")).unwrap());
}

#[test]
fn run_none_and_jacobi() {
    let dir = tempfile::tempdir().unwrap();
    let o = phsplit(dir.path(), &["run", "--model", "simple-2x2", "--none", "--out", "ref"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut files: Vec<String> = fs::read_dir(dir.path().join("ref"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    files.sort();
    assert_eq!(files, ["reference.csv", "summary.txt"]);

    let o = phsplit(dir.path(), &["run", "--model", "simple-2x2", "--jacobi", "H=0.5", "--out", "jac"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(summary(&dir.path().join("jac")).contains("method: jacobi"));

    let o = phsplit(dir.path(), &["run", "--model", "rlc-circuit", "--jacobi", "--out", "jac"]);
    assert_eq!(code(&o), 3);
    let o = phsplit(dir.path(), &["run", "--model", "simple-2x2", "--jacobi", "H=0.3", "--out", "jac"]);
    assert_eq!(code(&o), 2);
    let o = phsplit(dir.path(), &["run", "--model", "simple-2x2", "--jacobi", "--none"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn config_file_with_overrides_and_env() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("exp.json"),
        r#"{ "model": "two-mass", "T": 2.0, "iteration": { "lm": { "lambda": 1.5, "mu": 2, "max_iters": 5 } },
             "output_dir": "from-file" }"#,
    )
    .unwrap();
    let o = phsplit(dir.path(), &["run", "--config", "exp.json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = summary(&dir.path().join("from-file"));
    assert!(s.contains("mu: 2\n") && s.contains("iterations: 5") && s.contains("T: 2\n"), "{s}");

    let o = Command::new(env!("CARGO_BIN_EXE_phsplit"))
        .args(["run", "--config", "exp.json", "--lm", "mu=1.5"])
        .current_dir(dir.path())
        .env("PHSPLIT_OUT", "from-env")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = summary(&dir.path().join("from-env"));
    assert!(s.contains("mu: 1.5\n") && s.contains("lambda: 1.5\n") && s.contains("iterations: 5"), "{s}");

    fs::write(dir.path().join("typo.json"), r#"{ "modle": "two-mass" }"#).unwrap();
    assert_eq!(code(&phsplit(dir.path(), &["run", "--config", "typo.json"])), 2);
}

#[test]
fn degenerate_run_needs_force() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("degenerate.json"), DEGENERATE).unwrap();
    assert_eq!(code(&phsplit(dir.path(), &["run", "--model", "degenerate.json", "--lm"])), 1);
    let o = phsplit(dir.path(), &["run", "--model", "degenerate.json", "--none", "--force", "--out", "f"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn rates_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = phsplit(dir.path(), &["rates", "--model", "scaled-2x2", "--param", "nu=0", "--alpha", "1", "--points", "5"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "lambda,q");
    assert_eq!(lines.len(), 7);
    let star = lines[6].strip_prefix('*').unwrap();
    let q: f64 = star.split(',').nth(1).unwrap().parse().unwrap();
    assert!((q - 1.0 / 3.0).abs() < 1e-10);
    assert_eq!(code(&phsplit(dir.path(), &["rates", "--model", "two-mass", "--points", "0"])), 2);
}

#[test]
fn demos() {
    let dir = tempfile::tempdir().unwrap();
    let o = phsplit(dir.path(), &["demo", "jacobi-overflow", "--out", "d"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(summary(&dir.path().join("d/jacobi-overflow")).contains("first_k_above_f32_max: 40"));
    let o = phsplit(dir.path(), &["demo", "counterexample", "--out", "d"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(summary(&dir.path().join("d/counterexample")).contains("rk[E R]"));
    assert_eq!(code(&phsplit(dir.path(), &["demo", "unknown"])), 2);
}
