use std::path::Path;
use std::process::{Command, Output};

fn foresight(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_foresight"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn stderr_error_code(out: &Output) -> String {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text
        .lines()
        .rev()
        .find(|l| l.starts_with('{'))
        .unwrap_or_else(|| panic!("no JSON error on stderr: {text}"));
    let v: serde_json::Value = serde_json::from_str(line).unwrap();
    v["error"]["code"].as_str().unwrap().to_string()
}

fn line_count(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count()
}

#[test]
fn protocol_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let out = foresight(&["protocol", "--seed", "5", "--duration-ticks", "800", "--out", "run"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = tmp.path().join("run");
    for f in [
        "training.log",
        "no_feedback.log",
        "reactive.log",
        "predictive.log",
        "snapshot.json",
        "report.json",
        "bins.csv",
        "config.toml",
        "comparison.csv",
    ] {
        assert!(run.join(f).is_file(), "missing {f}");
    }
    assert_eq!(line_count(&run.join("reactive.log")), 801);
    assert_eq!(line_count(&run.join("bins.csv")), 1 + 4 * 32);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout, std::fs::read_to_string(run.join("comparison.csv")).unwrap());
}

#[test]
fn replay_matches_live_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(foresight(&["protocol", "--seed", "2", "--duration-ticks", "1500", "--out", "run"], tmp.path())
        .status
        .success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("run/report.json")).unwrap()).unwrap();
    for task in ["training", "no_feedback", "reactive", "predictive"] {
        let out = foresight(&["replay", &format!("run/{task}.log")], tmp.path());
        assert!(out.status.success());
        let replayed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        let live = report["tasks"]
            .as_array()
            .unwrap()
            .iter()
            .find(|t| t["task"] == task)
            .unwrap();
        assert_eq!(replayed, live["metrics"], "{task}");
    }
}

#[test]
fn simulate_chain_uses_trained_snapshot() {
    let tmp = tempfile::tempdir().unwrap();
    let train = foresight(&["simulate", "--task", "training", "--duration-ticks", "2000", "--out", "s"], tmp.path());
    assert!(train.status.success(), "{}", String::from_utf8_lossy(&train.stderr));
    assert!(tmp.path().join("s/snapshot.json").is_file());
    let pred = foresight(&["simulate", "--task", "predictive", "--duration-ticks", "300", "--out", "s"], tmp.path());
    assert!(pred.status.success(), "{}", String::from_utf8_lossy(&pred.stderr));
    assert_eq!(line_count(&tmp.path().join("s/predictive.log")), 301);
    assert!(tmp.path().join("s/predictive.metrics.json").is_file());
}

#[test]
fn predictive_without_snapshot_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let out = foresight(&["simulate", "--task", "predictive", "--out", "empty"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_error_code(&out), "no_snapshot");

    let out = foresight(&["simulate", "--task", "predictive"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_error_code(&out), "no_snapshot");
}

#[test]
fn usage_and_config_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = foresight(&["protocol", "--bogus"], tmp.path());
    assert_eq!(out.status.code(), Some(1));

    let out = foresight(&["protocol", "--set", "learner.alpha=2.0"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_error_code(&out), "config");

    let out = foresight(&["protocol", "--set", "nonsense"], tmp.path());
    assert_eq!(out.status.code(), Some(1));

    std::fs::write(tmp.path().join("bad.toml"), "[sim]\nno_such_key = 1\n").unwrap();
    let out = foresight(&["--config", "bad.toml", "protocol"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_error_code(&out), "config");

    assert_eq!(foresight(&["--help"], tmp.path()).status.code(), Some(0));
}

#[test]
fn overrides_take_precedence_over_file_over_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("short.toml"), "[trial]\nduration_ticks = 300\n").unwrap();
    let sim = |extra: &[&str], out: &str| {
        let mut args = extra.to_vec();
        args.extend(["simulate", "--task", "no_feedback", "--out", out]);
        let o = foresight(&args, tmp.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        line_count(&tmp.path().join(out).join("no_feedback.log")) - 1
    };
    assert_eq!(sim(&[], "a"), 6000);
    assert_eq!(sim(&["--config", "short.toml"], "b"), 300);
    assert_eq!(
        sim(&["--config", "short.toml", "--set", "trial.duration_ticks=120"], "c"),
        120
    );
}

#[test]
fn several_seeds_get_their_own_directories_and_aggregate() {
    let tmp = tempfile::tempdir().unwrap();
    let out = foresight(
        &["protocol", "--seed", "1", "--seed", "4", "--duration-ticks", "600", "--out", "many"],
        tmp.path(),
    );
    assert!(out.status.success());
    let many = tmp.path().join("many");
    assert!(many.join("seed-1/report.json").is_file());
    assert!(many.join("seed-4/predictive.log").is_file());
    assert_eq!(line_count(&many.join("comparison.csv")), 3);
    assert_eq!(line_count(&many.join("bins.csv")), 1 + 2 * 4 * 32);

    let rep = foresight(&["report", "many", "--out", "agg"], tmp.path());
    assert!(rep.status.success(), "{}", String::from_utf8_lossy(&rep.stderr));
    assert_eq!(
        std::fs::read(tmp.path().join("agg/comparison.csv")).unwrap(),
        std::fs::read(many.join("comparison.csv")).unwrap()
    );
    let agg: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("agg/aggregate.json")).unwrap()).unwrap();
    assert_eq!(agg["seeds"], serde_json::json!([1, 4]));
}

#[test]
fn serve_reports_bind_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = taken.local_addr().unwrap().to_string();
    let out = foresight(&["serve", "--addr", &addr], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}
