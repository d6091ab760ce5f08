use std::path::Path;
use std::process::Command;

fn kernrl() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kernrl"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path
}

const SMALL: &str = r#"{
    "episodes": 10, "horizon": 5, "seeds": [0, 1], "oracle_grid": 11,
    "env": {"type": "ball_world", "period": 4},
    "agents": [
        {"name": "rs", "kind": "rs_kerns"},
        {"name": "restart", "kind": "restart_baseline"}
    ],
    "output": "runs.csv"
}"#;

#[test]
fn tune_prints_tabular_discount() {
    let out = kernrl().args(["tune", "--K", "1000", "--delta", "10", "--bound", "r1"]).output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["eta"].as_f64().unwrap() - 0.954645).abs() < 1e-6);
    assert_eq!(v["sigma"].as_f64().unwrap(), 0.0);
}

#[test]
fn tune_rejects_oversized_variation() {
    let out = kernrl().args(["tune", "--K", "10", "--delta", "1e6"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("variation exceeds horizon budget"));
}

#[test]
fn run_is_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let run = |out: &str, threads: Option<&str>| {
        let mut cmd = kernrl();
        cmd.args(["run", "--config", config.to_str().unwrap(), "--out"]).arg(dir.path().join(out));
        match threads {
            Some(t) => cmd.env("KERNRL_THREADS", t),
            None => cmd.env_remove("KERNRL_THREADS"),
        };
        let status = cmd.output().unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        std::fs::read(dir.path().join(out).join("runs.csv")).unwrap()
    };
    let a = run("a", Some("1"));
    let b = run("b", Some("3"));
    let c = run("c", None);
    assert_eq!(a, b);
    assert_eq!(a, c);

    let text = String::from_utf8(a).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "run_id,agent,seed,episode,episodic_return,cumulative_return,optimal_value,cumulative_regret");
    assert_eq!(lines.len(), 1 + 2 * 2 * 10);
    let run_ids: std::collections::BTreeSet<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(run_ids.len(), 4);
    for line in &lines[1..] {
        let fields: Vec<&str> = line.split(',').collect();
        for f in &fields[4..] {
            assert_eq!(f.split('.').nth(1).map(str::len), Some(6), "{line}");
        }
    }
}

#[test]
fn run_flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = kernrl()
        .args(["run", "--config", config.to_str().unwrap(), "--seeds", "5", "--episodes", "3", "--agents", "rs", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("runs.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.starts_with("rs-s5,rs,5,")));

    let out = kernrl()
        .args(["run", "--config", config.to_str().unwrap(), "--agents", "missing"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_configs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for body in ["{not json", r#"{"episodes": 0}"#, r#"{"agents": []}"#] {
        let config = write_config(dir.path(), body);
        let out = kernrl().args(["run", "--config", config.to_str().unwrap()]).output().unwrap();
        assert_eq!(out.status.code(), Some(2), "{body}");
    }
}

#[test]
fn check_kernel_reports_constants() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{"agents": [{"name": "g", "kind": "kerns", "spatial": {"type": "gaussian_p2", "sigma": 0.05}}]}"#,
    );
    let out = kernrl().args(["check-kernel", "--config", config.to_str().unwrap()]).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("g: ok C1=1.000000"));
}
