use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use essdesign::operator_assembly::Schedule;
use essdesign::truncated_spectrum::{parse_csv, Method, CSV_HEADER};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_essdesign"));
    c.env("SPECFORGE_THREADS", "2");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn stderr_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.trim()).unwrap_or_else(|_| panic!("stderr is not JSON: {text}"))
}

const POINT_ONE: &str = r#"{"includes_zero":true,"points":[1.0],"intervals":[],"lambda_max":5}"#;

#[test]
fn design_verify_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let target = write(dir.path(), "s.json", POINT_ONE);
    let schedule = dir.path().join("schedule.json");
    let out = run(&[
        "design",
        "--target",
        s(&target),
        "--cells",
        "24",
        "--out",
        s(&schedule),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let parsed = Schedule::from_json(&std::fs::read_to_string(&schedule).unwrap()).unwrap();
    assert_eq!(parsed.cells.len(), 24);
    assert_eq!(Schedule::from_json(&parsed.to_json()).unwrap(), parsed);

    let report = dir.path().join("verify.json");
    let args = [
        "verify",
        "--schedule",
        s(&schedule),
        "--target",
        s(&target),
        "--truncate",
        "24",
        "--lambda-max",
        "5",
        "--threshold",
        "0.05",
        "--skip-head",
        "8",
        "--out",
        s(&report),
    ];
    let out = run(&args);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["pass"], true);
    assert_eq!(v["cells"].as_array().unwrap().len(), 24);

    // The same schedule checked against a set without 1 fails verification.
    let wrong = write(
        dir.path(),
        "w.json",
        r#"{"includes_zero":true,"points":[2.0],"intervals":[],"lambda_max":5}"#,
    );
    let mut args = args;
    args[4] = s(&wrong);
    let out = run(&args);
    assert_eq!(out.status.code(), Some(6));
    assert_eq!(stderr_json(&out)["error"], "VerifyFailed");
}

#[test]
fn decoupled_verify_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let target = write(
        dir.path(),
        "s.json",
        r#"{"includes_zero":true,"points":[],"intervals":[[1,2]],"lambda_max":3}"#,
    );
    let schedule = dir.path().join("schedule.json");
    assert_eq!(
        run(&[
            "design",
            "--target",
            s(&target),
            "--cells",
            "12",
            "--out",
            s(&schedule)
        ])
        .status
        .code(),
        Some(0)
    );
    let out = run(&[
        "verify",
        "--schedule",
        s(&schedule),
        "--target",
        s(&target),
        "--truncate",
        "12",
        "--lambda-max",
        "3",
        "--threshold",
        "1e-10",
        "--decouple",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["max_distance"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn target_set_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("x.json");
    let no_zero = write(
        dir.path(),
        "nz.json",
        r#"{"includes_zero":false,"points":[1.0],"intervals":[],"lambda_max":5}"#,
    );
    let out = run(&[
        "design",
        "--target",
        s(&no_zero),
        "--cells",
        "4",
        "--out",
        s(&out_path),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "ZeroNotIncluded");

    for bad in [
        "{not json",
        r#"{"includes_zero":true,"points":[1.0],"intervals":[[3,2]],"lambda_max":5}"#,
    ] {
        let p = write(dir.path(), "bad.json", bad);
        let out = run(&[
            "design",
            "--target",
            s(&p),
            "--cells",
            "4",
            "--out",
            s(&out_path),
        ]);
        assert_eq!(out.status.code(), Some(3), "{bad}");
        assert_eq!(stderr_json(&out)["error"], "MalformedSet");
    }
    assert!(!out_path.exists());
}

#[test]
fn usage_errors() {
    assert_eq!(run(&[]).status.code(), Some(4));
    assert_eq!(run(&["design", "--cells", "3"]).status.code(), Some(4));
    assert_eq!(
        run(&["design", "--target", "t.json", "--cells", "0", "--out", "x"])
            .status
            .code(),
        Some(4)
    );
    assert_eq!(run(&["no-such-command"]).status.code(), Some(4));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn truncation_beyond_schedule_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let target = write(dir.path(), "s.json", POINT_ONE);
    let schedule = dir.path().join("schedule.json");
    run(&[
        "design",
        "--target",
        s(&target),
        "--cells",
        "3",
        "--out",
        s(&schedule),
    ]);
    let csv = dir.path().join("e.csv");
    let out = run(&[
        "spectrum",
        "--schedule",
        s(&schedule),
        "--truncate",
        "5",
        "--lambda-max",
        "10",
        "--out",
        s(&csv),
    ]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn spectrum_csv_and_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let target = write(dir.path(), "s.json", POINT_ONE);
    let schedule = dir.path().join("schedule.json");
    run(&[
        "design",
        "--target",
        s(&target),
        "--cells",
        "6",
        "--out",
        s(&schedule),
    ]);

    let empty = dir.path().join("empty.csv");
    let out = run(&[
        "spectrum",
        "--schedule",
        s(&schedule),
        "--truncate",
        "4",
        "--lambda-max",
        "0",
        "--out",
        s(&empty),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&empty).unwrap().trim(), CSV_HEADER);

    let csv = dir.path().join("o.csv");
    let out = run(&[
        "spectrum",
        "--schedule",
        s(&schedule),
        "--truncate",
        "3",
        "--lambda-max",
        "20",
        "--out",
        s(&csv),
        "--oracle",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&csv).unwrap();
    let rows = parse_csv(&text).unwrap();
    let shooting: Vec<f64> = rows
        .iter()
        .filter(|r| r.method == Method::Shooting)
        .map(|r| r.lambda)
        .collect();
    let fd: Vec<f64> = rows
        .iter()
        .filter(|r| r.method == Method::FdOracle)
        .map(|r| r.lambda)
        .collect();
    assert!(!shooting.is_empty());
    assert_eq!(shooting.len(), fd.len());
    let line = text
        .lines()
        .find(|l| l.starts_with("# max_deviation="))
        .expect("deviation line");
    let deviation: f64 = line["# max_deviation=".len()..]
        .split_whitespace()
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!(deviation < 1e-6, "{line}");
    for row in rows.iter().filter(|r| r.method == Method::Shooting) {
        assert!(row.bracket.0 <= row.lambda && row.lambda <= row.bracket.1);
    }
}

#[test]
fn tune_chain_command() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("chain.json");
    let out = run(&[
        "tune-chain",
        "--targets",
        "1,2,3",
        "--coupling",
        "1000",
        "--tol",
        "1e-10",
        "--out",
        s(&out_path),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let schedule = Schedule::from_json(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(schedule.cells.len(), 3);

    let out = run(&[
        "tune-chain",
        "--targets",
        "2,1",
        "--coupling",
        "1000",
        "--out",
        s(&out_path),
    ]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn rp_norms_command() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("rp.csv");
    let out = run(&["rp-norms", "--k-max", "50", "--out", s(&out_path)]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&out_path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("k,l2_sq,grad_sq,ratio"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 49);
    assert_eq!(rows.last().unwrap()[0], 50.0);
    assert!(rows.last().unwrap()[3] >= 0.99);
}

#[test]
fn extension_command() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("ext.json");
    let out = run(&[
        "extension",
        "--n",
        "40",
        "--m",
        "20",
        "--seed",
        "7",
        "--out",
        s(&out_path),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert!(v["weyl_defect"].as_f64().unwrap() < 1e-11);
    assert!(v["boundary_defect"].as_f64().unwrap() < 1e-12);
    assert_eq!(v["clustering"]["rows"].as_array().unwrap().len(), 3);

    let out = run(&["extension", "--n", "4", "--m", "9", "--out", s(&out_path)]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn in_process_run_matches_binary_codes() {
    assert_eq!(
        essdesign::cli::run(["essdesign"]),
        essdesign::cli::EXIT_USAGE
    );
    assert_eq!(
        essdesign::cli::run(["essdesign", "--version"]),
        essdesign::cli::EXIT_OK
    );
}
