use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dcboost(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dcboost"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn summary_rows(dir: &Path) -> Vec<csv::StringRecord> {
    let mut r = csv::Reader::from_path(dir.join("summary.csv")).unwrap();
    r.records().map(|x| x.unwrap()).collect()
}

fn traces(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
        .map(|p| p.to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

#[test]
fn ex1_hundred_starts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = dcboost(&[
        "run",
        "--problem",
        "ex1",
        "--solver",
        "inmbdca",
        "--set",
        "starts.count=100",
        "--set",
        "starts.seed=42",
        "--out",
        out,
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(traces(dir.path()).len(), 100);
    let rows = summary_rows(dir.path());
    assert_eq!(rows.len(), 100);
    for row in rows {
        let residual: f64 = row[6].parse().unwrap();
        assert!(residual <= 1e-3, "{row:?}");
    }
}

#[test]
fn ex2_single_start() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = dcboost(&["run", "--problem", "ex2", "--start", "-4.4615,-9.0766", "--out", out]);
    assert_eq!(code(&o), 0);
    let rows = summary_rows(dir.path());
    assert_eq!(rows.len(), 1);
    assert_eq!(&rows[0][0], "-4.4615;-9.0766");
    let x: Vec<f64> = rows[0][1].split(';').map(|t| t.parse().unwrap()).collect();
    assert!((x[0] - 1.5).hypot(x[1]) < 1e-3, "{x:?}");
}

#[test]
fn empty_start_list() {
    let dir = tempfile::tempdir().unwrap();
    let o = dcboost(&["run", "--set", "starts.list=[]", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(summary_rows(dir.path()).is_empty());
    assert!(traces(dir.path()).is_empty());
}

#[test]
fn summary_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = dcboost(&[
            "run",
            "--problem",
            "random-sep(4,3)",
            "--set",
            "starts.count=16",
            "--set",
            "starts.seed=9",
            "--set",
            "inexact_mode=\"perturbed\"",
            "--out",
            d.path().to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0);
    }
    let sa = fs::read(a.path().join("summary.csv")).unwrap();
    let sb = fs::read(b.path().join("summary.csv")).unwrap();
    assert_eq!(sa, sb);
    assert!(sa.ends_with(b"\n"));
}

#[test]
fn check_accepts_every_problem_and_solver() {
    for problem in ["ex1", "ex2", "random-sep(5,7)"] {
        for solver in ["dca", "nmbdca", "bdca", "inmbdca"] {
            let dir = tempfile::tempdir().unwrap();
            let o = dcboost(&[
                "run",
                "--problem",
                problem,
                "--solver",
                solver,
                "--set",
                "starts.count=5",
                "--out",
                dir.path().to_str().unwrap(),
            ]);
            assert_eq!(code(&o), 0, "{problem} {solver}");
            let mut args = vec!["check".to_string()];
            args.extend(traces(dir.path()));
            let args: Vec<&str> = args.iter().map(String::as_str).collect();
            let o = dcboost(&args);
            assert_eq!(code(&o), 0, "{problem} {solver}: {}", stdout(&o));
        }
    }
}

#[test]
fn check_flags_corrupted_phi_next() {
    let dir = tempfile::tempdir().unwrap();
    let o = dcboost(&[
        "run",
        "--problem",
        "ex2",
        "--start",
        "3,4",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let path = dir.path().join("trace_0000.jsonl");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut rec: serde_json::Value = serde_json::from_str(&lines[2]).unwrap();
    let v = rec["phi_next"].as_f64().unwrap();
    rec["phi_next"] = serde_json::json!(v + 1.0);
    lines[2] = rec.to_string();
    fs::write(&path, lines.join("\n") + "\n").unwrap();

    let o = dcboost(&["check", path.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let out = stdout(&o);
    let line = out.lines().find(|l| l.trim_start().starts_with("linesearch")).unwrap();
    assert!(line.contains("k=1") && line.contains("FAIL"), "{out}");
}

#[test]
fn check_rejects_empty_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.jsonl");
    fs::write(&path, "").unwrap();
    let o = dcboost(&["check", path.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn complexity_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let o = dcboost(&[
        "run",
        "--problem",
        "ex2",
        "--start",
        "-4.4615,-9.0766",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let trace = dir.path().join("trace_0000.jsonl");
    let t = trace.to_str().unwrap();
    assert_eq!(code(&dcboost(&["complexity", t, "--phibar", "-1.125"])), 0);
    assert_eq!(code(&dcboost(&["complexity", t])), 0);
    assert_eq!(code(&dcboost(&["complexity", t, "--phibar", "0"])), 2);

    let one = tempfile::tempdir().unwrap();
    let o = dcboost(&[
        "run",
        "--problem",
        "ex2",
        "--start",
        "3,4",
        "--set",
        "max_iter=1",
        "--out",
        one.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let o = dcboost(&["complexity", one.path().join("trace_0000.jsonl").to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("\"n\": 1"));
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "problem = \"ex1\"\nsolver = \"dca\"\nnu.kind = \"zero\"\n[starts]\ncount = 3\nbox = [-1, 1]\nseed = 1\n",
    )
    .unwrap();
    let out = dir.path().join("o");
    let o = dcboost(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        "starts.count=2",
        "--plot",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(summary_rows(&out).len(), 2);
    assert!(out.join("phi_0000.csv").exists() && out.join("path_0001.csv").exists());

    let bad = dcboost(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        "nonsense=1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&bad), 2);
    let bad = dcboost(&["run", "--set", "theta=0.5", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&bad), 2);
    assert!(String::from_utf8_lossy(&bad.stderr).contains("theta"));
    assert_eq!(code(&dcboost(&["frobnicate"])), 2);
}
