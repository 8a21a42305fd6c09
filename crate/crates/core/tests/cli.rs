use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pwsc::fixtures;
use pwsc::integrator::Mode;
use pwsc::orbits::find_limit_cycle;
use serde_json::Value;
use tempfile::TempDir;

fn pwsc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pwsc"))
        .args(args)
        .env_remove("PWSC_THREADS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}", String::from_utf8_lossy(&out.stdout));
    })
}

fn fixture_dir() -> TempDir {
    let dir = TempDir::new().unwrap();
    let out = pwsc(&["fixtures", "--write", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    dir
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn csv_rows(path: &Path) -> (String, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let rows = lines
        .map(|l| {
            l.split(',')
                .map(|v| v.parse::<f64>().unwrap_or(f64::NAN))
                .collect()
        })
        .collect();
    (header, rows)
}

fn write_system(dir: &Path, name: &str, f_minus: &str, f_plus: &str) -> PathBuf {
    let p = dir.join(name);
    let body = format!(
        "[functions]\nf_minus = \"{f_minus}\"\nf_plus = \"{f_plus}\"\ng = \"x - lambda\"\n\n[parameters]\neps = 0.1\nlambda = 0.0\n"
    );
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn validate_exit_codes() {
    let dir = fixture_dir();
    let ok = pwsc(&["validate", &path(dir.path(), "sys_a.ini")]);
    assert_eq!(code(&ok), 0);
    assert_eq!(stdout_json(&ok)["passed"], Value::Bool(true));

    let bad = write_system(dir.path(), "bad.ini", "x", "x*(1.9 - x)");
    let out = pwsc(&["validate", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let report = stdout_json(&out);
    let failed: Vec<&str> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["passed"] == Value::Bool(false))
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert!(failed.contains(&"corner"), "{failed:?}");

    assert_eq!(
        code(&pwsc(&["validate", &path(dir.path(), "missing.ini")])),
        1
    );
    let garbage = dir.path().join("garbage.ini");
    fs::write(&garbage, "[functions]\nf_minus = \"-x +\"\n").unwrap();
    assert_eq!(code(&pwsc(&["validate", garbage.to_str().unwrap()])), 1);
}

#[test]
fn classify_reports_the_fixture_cases() {
    let a = stdout_json(&pwsc(&["classify", "fixtures/sys_a.ini"]));
    assert_eq!(a["case"], "iii-c");
    assert_eq!(a["criticality"], "supercritical");
    let b = stdout_json(&pwsc(&["classify", "fixtures/sys_b.ini"]));
    assert_eq!(b["case"], "iii-a");
    assert!((b["Lambda"].as_f64().unwrap() + 0.55654).abs() < 1e-4);
    let c = stdout_json(&pwsc(&["classify", "fixtures/sys_c.ini"]));
    assert_eq!(c["case"], "i");
    assert!((c["lambda0"].as_f64().unwrap() + 0.035).abs() < 1e-6);

    let dir = TempDir::new().unwrap();
    let bad = write_system(dir.path(), "bad.ini", "x", "x*(1.9 - x)");
    assert_eq!(code(&pwsc(&["classify", bad.to_str().unwrap()])), 2);
}

#[test]
fn simulate_settles_on_the_relaxation_cycle() {
    let dir = TempDir::new().unwrap();
    let out_csv = dir.path().join("traj.csv");
    let events_csv = dir.path().join("events.csv");
    let out = pwsc(&[
        "simulate",
        "fixtures/sys_a.ini",
        "--lambda",
        "0.01",
        "--x0",
        "0",
        "--y0",
        "0.5",
        "--t-max",
        "500",
        "--out",
        out_csv.to_str().unwrap(),
        "--events",
        events_csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = csv_rows(&out_csv);
    assert_eq!(header, "t,x,y,region");
    assert!(rows.len() > 100);
    let (ev_header, _) = csv_rows(&events_csv);
    assert_eq!(ev_header, "event_id,t,x,y,direction");

    let cycle = find_limit_cycle(&fixtures::sys_a(), 0.01, Mode::Forward, None)
        .unwrap()
        .unwrap();
    let curve: Vec<(f64, f64)> = cycle
        .trajectory
        .segments
        .iter()
        .flat_map(|s| {
            (0..50).map(move |k| s.state_at(s.t_start + (s.t_end - s.t_start) * k as f64 / 50.0))
        })
        .collect();
    for row in &rows[rows.len() - 100..] {
        let d = curve
            .iter()
            .map(|&(x, y)| (x - row[1]).hypot(y - row[2]))
            .fold(f64::INFINITY, f64::min);
        assert!(d < 1e-3, "{row:?} is {d} from the cycle");
    }
    let manifest = dir.path().join("traj.csv.manifest.json");
    let m: Value = serde_json::from_str(&fs::read_to_string(manifest).unwrap()).unwrap();
    assert_eq!(m["command"], "simulate");
    assert_eq!(m["exit_code"], 0);
}

#[test]
fn simulate_edge_cases() {
    let dir = TempDir::new().unwrap();
    let out_csv = dir.path().join("one.csv");
    let args = [
        "simulate",
        "fixtures/sys_a.ini",
        "--x0",
        "0.25",
        "--y0",
        "-0.5",
        "--t-max",
        "0",
        "--out",
    ];
    let mut full: Vec<&str> = args.to_vec();
    full.push(out_csv.to_str().unwrap());
    assert_eq!(code(&pwsc(&full)), 0);
    let (_, rows) = csv_rows(&out_csv);
    assert_eq!(rows.len(), 1);
    assert_eq!((rows[0][0], rows[0][1], rows[0][2]), (0.0, 0.25, -0.5));

    let nan = pwsc(&[
        "simulate",
        "fixtures/sys_a.ini",
        "--x0",
        "NaN",
        "--y0",
        "0",
        "--t-max",
        "1",
    ]);
    assert_eq!(code(&nan), 1);
    let inf = pwsc(&[
        "simulate",
        "fixtures/sys_a.ini",
        "--x0",
        "inf",
        "--y0",
        "0",
        "--t-max",
        "1",
    ]);
    assert_eq!(code(&inf), 1);
}

#[test]
fn sweep_summaries() {
    let dir = TempDir::new().unwrap();
    let a_csv = dir.path().join("a.csv");
    let out = pwsc(&[
        "sweep",
        "fixtures/sys_a.ini",
        "--lambda-min",
        "-0.01",
        "--lambda-max",
        "0.05",
        "--steps",
        "30",
        "--out",
        a_csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout_json(&out)["super_explosion"], Value::Bool(true));
    let text = fs::read_to_string(&a_csv).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "lambda,found,amplitude,period,cycle_type,multiplier"
    );
    assert_eq!(text.lines().count(), 32);

    let summary = dir.path().join("b.json");
    let out = pwsc(&[
        "sweep",
        "fixtures/sys_b.ini",
        "--lambda-min",
        "0",
        "--lambda-max",
        "0.05",
        "--refine",
        "--out",
        dir.path().join("b.csv").to_str().unwrap(),
        "--summary",
        summary.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let s: Value = serde_json::from_str(&fs::read_to_string(summary).unwrap()).unwrap();
    assert!(s["window_width"].as_f64().unwrap() < 0.01);
    assert_eq!(s["super_explosion"], Value::Bool(false));

    let empty = pwsc(&[
        "sweep",
        "fixtures/sys_a.ini",
        "--lambda-min",
        "0.1",
        "--lambda-max",
        "0.1",
    ]);
    assert_eq!(code(&empty), 1);
}

#[test]
fn shadow_check_outcomes() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("shadow.csv");
    let out = pwsc(&[
        "shadow-check",
        "fixtures/sys_a.ini",
        "--yc",
        "0.5",
        "--lambda",
        "0.01",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let s = stdout_json(&out);
    assert!(s["max_violation"].as_f64().unwrap() <= 1e-8);
    let (header, rows) = csv_rows(&csv);
    assert_eq!(header, "t,x_true,y_true,R_true,x_shadow,y_shadow,R_shadow");
    assert_eq!(rows[0][3], 0.125);
    assert_eq!(rows[0][3], rows[0][6]);

    let out = pwsc(&[
        "shadow-check",
        "fixtures/sys_b.ini",
        "--yc",
        "0.1",
        "--lambda",
        "0.001",
        "--replacement",
        "-0.05*x + x^2",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    assert_eq!(
        code(&pwsc(&[
            "shadow-check",
            "fixtures/sys_a.ini",
            "--yc",
            "-0.1"
        ])),
        1
    );

    // sys_b has f_plus > f_minus for x < -0.5, which this excursion reaches
    let out = pwsc(&["shadow-check", "fixtures/sys_b.ini", "--yc", "0.5"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("not below"));
    let out = pwsc(&[
        "shadow-check",
        "fixtures/sys_a.ini",
        "--yc",
        "0.3",
        "--replacement",
        "-2*x",
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn repeated_runs_write_identical_bytes() {
    let dir = TempDir::new().unwrap();
    let run = |name: &str, threads: &str| -> Vec<u8> {
        let p = dir.path().join(name);
        let out = Command::new(env!("CARGO_BIN_EXE_pwsc"))
            .args([
                "sweep",
                "fixtures/sys_b.ini",
                "--lambda-min",
                "0",
                "--lambda-max",
                "0.01",
                "--steps",
                "10",
                "--out",
                p.to_str().unwrap(),
            ])
            .env("PWSC_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(code(&out), 0);
        fs::read(p).unwrap()
    };
    let first = run("s1.csv", "1");
    assert_eq!(first, run("s2.csv", "1"));
    assert_eq!(first, run("s3.csv", "4"));

    let sim = |name: &str| -> Vec<u8> {
        let p = dir.path().join(name);
        let out = pwsc(&[
            "simulate",
            "fixtures/sys_b.ini",
            "--x0",
            "0.1",
            "--y0",
            "0.2",
            "--t-max",
            "50",
            "--out",
            p.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0);
        fs::read(p).unwrap()
    };
    assert_eq!(sim("t1.csv"), sim("t2.csv"));
    // seventeen significant digits
    let text = String::from_utf8(sim("t3.csv")).unwrap();
    let value = text.lines().nth(1).unwrap().split(',').nth(1).unwrap();
    assert_eq!(value, "1.0000000000000001e-1");
}

#[test]
fn help_version_and_usage() {
    assert_eq!(code(&pwsc(&["--help"])), 0);
    assert_eq!(code(&pwsc(&["--version"])), 0);
    assert_eq!(code(&pwsc(&["sweep", "--help"])), 0);
    assert_eq!(code(&pwsc(&[])), 1);
    assert_eq!(code(&pwsc(&["frobnicate"])), 1);
    assert_eq!(
        code(&pwsc(&["simulate", "fixtures/sys_a.ini", "--x0", "1"])),
        1
    );
    let list = pwsc(&["fixtures"]);
    let text = String::from_utf8(list.stdout).unwrap();
    for name in ["sys_a", "sys_b", "sys_c", "sys_d"] {
        assert!(text.contains(name));
    }
}
