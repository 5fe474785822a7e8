use std::path::PathBuf;
use std::process::{Command, Output};

fn schemes(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/schemes")
        .join(name)
}

fn fsrk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fsrk"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn scheme_arg(name: &str) -> String {
    schemes(name).to_string_lossy().into_owned()
}

#[test]
fn compact_tableau_matches_golden() {
    let o = fsrk(&[
        "tableau",
        &scheme_arg("os3_mixed.json"),
        "--format",
        "compact",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let golden = include_str!("golden/os3_compact.txt");
    assert_eq!(stdout(&o), golden);
}

#[test]
fn tableau_output_is_byte_stable() {
    for format in ["extended", "compact", "text", "json"] {
        let a = fsrk(&["tableau", &scheme_arg("os3_mixed.json"), "--format", format]);
        let b = fsrk(&["tableau", &scheme_arg("os3_mixed.json"), "--format", format]);
        assert!(a.status.success());
        assert_eq!(a.stdout, b.stdout, "{format}");
    }
}

#[test]
fn single_operator_tableau_is_one_by_one() {
    let o = fsrk(&["tableau", &scheme_arg("single_fe.json")]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 3);
    assert!(out.starts_with("Y1,1,1 | 0 | 0"));
}

#[test]
fn json_tableau_round_trips() {
    let o = fsrk(&["tableau", &scheme_arg("os3_mixed.json"), "--format", "json"]);
    let t: fsrk::ExtendedTableau = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(t.total_stages, 11);
    assert_eq!(
        t.b[2].last().unwrap(),
        &"-1/4".parse::<fsrk::Coef>().unwrap()
    );
}

#[test]
fn mismatched_grid_is_a_usage_error() {
    let o = fsrk(&["tableau", &scheme_arg("mismatched.json")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("dimension"), "{}", stderr(&o));
}

#[test]
fn missing_scheme_file_is_a_usage_error() {
    let o = fsrk(&["tableau", "/nonexistent/scheme.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn ruth_scan_reports_one_hole() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("ruth.csv");
    let o = fsrk(&[
        "stability",
        &scheme_arg("ruth_rk3_sdirk23.json"),
        "--ray",
        "1,1",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("holes: 1"), "{out}");
    let line = out.lines().find(|l| l.contains("nearest pole")).unwrap();
    assert!(line.contains("-1.90192"), "{line}");

    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("re,im,absR,stable,component\n"));
    assert_eq!(text.lines().count(), 1 + 801 * 801);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("ruth.meta.json")).unwrap())
            .unwrap();
    assert_eq!(meta["ray"], serde_json::json!([1.0, 1.0]));
    assert_eq!(meta["holes"].as_array().unwrap().len(), 1);
}

#[test]
fn a_stable_diffusion_intercept() {
    let o = fsrk(&[
        "stability",
        &scheme_arg("strang_heun_sdirk_half.json"),
        "--ray",
        "1,0.001",
        "--grid",
        "-3000,1,-10,10,31,11",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let x: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("intercept: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((x / -2008.0 - 1.0).abs() < 0.02, "{x}");
}

#[test]
fn bad_grid_and_ray_are_usage_errors() {
    let s = scheme_arg("godunov_fe.json");
    assert_eq!(
        fsrk(&["stability", &s, "--ray", "1,1", "--grid", ""])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        fsrk(&["stability", &s, "--ray", "1,1", "--grid", "0,1,0,1,0,5"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        fsrk(&["stability", &s, "--ray", "1"]).status.code(),
        Some(2)
    );
    assert_eq!(
        fsrk(&["stability", &s, "--ray", "0,0"]).status.code(),
        Some(2)
    );
}

#[test]
fn divergence_sets_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("run.csv");
    let o = fsrk(&[
        "integrate",
        &scheme_arg("godunov_fe.json"),
        "--problem",
        "linear",
        "--lambda",
        "-300,0",
        "--dt",
        "0.01",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("diverged"));
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run.meta.json")).unwrap())
            .unwrap();
    assert_eq!(meta["diverged"], serde_json::json!(true));
}

#[test]
fn brusselator_unstable_and_stable_steps() {
    let dir = tempfile::tempdir().unwrap();
    let run = |dt: &str| {
        let csv = dir.path().join(format!("b{dt}.csv"));
        let o = fsrk(&[
            "integrate",
            &scheme_arg("strang_heun.json"),
            "--problem",
            "brusselator",
            "--dt",
            dt,
            "--stride",
            "1000",
            "--out",
            csv.to_str().unwrap(),
        ]);
        (o, csv)
    };
    let (o, _) = run("0.00401");
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let (o, csv) = run("0.0039");
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(csv).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(header.split(',').count(), 1 + 202);
    assert!(text.lines().last().unwrap().starts_with("80,"));
}

#[test]
fn zero_final_time_writes_initial_state() {
    let o = fsrk(&[
        "integrate",
        &scheme_arg("strang_heun.json"),
        "--problem",
        "logistic",
        "--T",
        "0",
        "--dt",
        "0.1",
    ]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "t,y1\n0,0.2\n");
}

#[test]
fn operator_count_must_match_problem() {
    let o = fsrk(&[
        "integrate",
        &scheme_arg("os3_mixed.json"),
        "--problem",
        "logistic",
        "--dt",
        "0.1",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("operators"));
}

fn order(out: &str) -> f64 {
    out.lines()
        .find_map(|l| l.strip_prefix("order: "))
        .unwrap()
        .parse()
        .unwrap()
}

#[test]
fn convergence_orders() {
    let dts = "0.1,0.05,0.025,0.0125";
    let ruth = fsrk(&[
        "converge",
        &scheme_arg("ruth_rk3_sdirk23.json"),
        "--problem",
        "logistic",
        "--dts",
        dts,
    ]);
    assert!(ruth.status.success(), "{}", stderr(&ruth));
    assert!((order(&stdout(&ruth)) - 3.0).abs() < 0.2);
    let lie = fsrk(&[
        "converge",
        &scheme_arg("godunov_fe.json"),
        "--problem",
        "linear",
        "--lambda",
        "-0.6,-1.4",
        "--dts",
        dts,
    ]);
    assert!((order(&stdout(&lie)) - 1.0).abs() < 0.2);
}

#[test]
fn convergence_needs_three_steps() {
    let o = fsrk(&[
        "converge",
        &scheme_arg("godunov_fe.json"),
        "--problem",
        "linear",
        "--dts",
        "0.1",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("at least 3"));
}

#[test]
fn thread_count_from_environment() {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_fsrk"))
            .env("FSRK_THREADS", threads)
            .args([
                "stability",
                &scheme_arg("ruth_rk3_sdirk23.json"),
                "--ray",
                "1,1",
                "--grid",
                "-3,1,-2,2,81,81",
            ])
            .output()
            .unwrap()
    };
    let (one, four) = (run("1"), run("4"));
    assert!(one.status.success() && four.status.success());
    assert_eq!(one.stdout, four.stdout);
    assert_eq!(run("many").status.code(), Some(2));
}
