use std::path::Path;
use std::process::{Command, Output};

fn ptbec(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ptbec"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr_json(o: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&o.stderr);
    serde_json::from_str(text.lines().last().unwrap_or("")).unwrap_or_else(|_| panic!("stderr is not JSON: {text}"))
}

#[test]
fn census_is_hash_stamped_and_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["census", "na=-0.01", "census.with_stability=false"];
    let a = ptbec(&dir.path().join("a"), &args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let mut with_jobs = vec!["--jobs", "2"];
    with_jobs.extend(args);
    let b = ptbec(&dir.path().join("b"), &with_jobs);
    assert!(b.status.success());
    let csv_a = std::fs::read(dir.path().join("a/census.csv")).unwrap();
    let csv_b = std::fs::read(dir.path().join("b/census.csv")).unwrap();
    assert_eq!(csv_a, csv_b);
    let config = std::fs::read_to_string(dir.path().join("a/config.toml")).unwrap();
    let hash = config.lines().next().unwrap().split('"').nth(1).unwrap().to_string();
    let text = String::from_utf8(csv_a).unwrap();
    assert_eq!(text.lines().next().unwrap(), format!("# config_hash={hash}"));
    assert!(text.lines().any(|l| l.starts_with("S01,pt_symmetric")));
    let states: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a/states.json")).unwrap()).unwrap();
    assert_eq!(states["config_hash"], hash.as_str());
}

#[test]
fn sweep_without_its_section_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = ptbec(&dir.path().join("s"), &["sweep"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"], "usage");
    assert!(!dir.path().join("s").exists());
}

#[test]
fn unknown_keys_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "na = -0.01\n[census]\nwindw = 2.0\n").unwrap();
    let o = ptbec(&dir.path().join("x"), &["census", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = ptbec(&dir.path().join("x"), &["census", "nad=0.1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn overrides_win_over_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "na = -0.02\nnadd = 0.1\n").unwrap();
    let o = ptbec(
        &dir.path().join("x"),
        &["image", "--config", cfg.to_str().unwrap(), "na=-0.01", "image.resolution=[8, 4]", "image.states=[\"S02\"]"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let resolved = std::fs::read_to_string(dir.path().join("x/config.toml")).unwrap();
    assert!(resolved.contains("na = -0.01"));
    assert!(resolved.contains("nadd = 0.1"));
    let image = std::fs::read_to_string(dir.path().join("x/image_S02.txt")).unwrap();
    let rows: Vec<&str> = image.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.split_whitespace().count() == 8));
}

#[test]
fn collapse_has_its_own_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = ptbec(
        &dir.path().join("c"),
        &["oracle", "oracle.kind=ground_state", "na=0", "oracle.grid_n=[16, 8, 16]"],
    );
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(stderr_json(&o)["error"], "collapse_detected");
    assert!(dir.path().join("c/oracle.json").exists());
}

#[test]
fn missing_state_is_a_solver_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = ptbec(
        &dir.path().join("e"),
        &["evolve", "na=-0.01", "census.with_stability=false", "evolve.state=\"S12\"", "evolve.t_end=1.0"],
    );
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stderr_json(&o)["error"], "solver_failure");
}

#[test]
fn short_sweep_writes_branches_and_events() {
    let dir = tempfile::tempdir().unwrap();
    let o = ptbec(
        &dir.path().join("w"),
        &[
            "sweep",
            "na=-0.01",
            "census.with_stability=false",
            "sweep.axis=\"gamma\"",
            "sweep.target=0.01",
            "sweep.states=[\"S02\"]",
            "sweep.with_stability=false",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let branch = std::fs::read_to_string(dir.path().join("w/branch_S02.csv")).unwrap();
    let last = branch.lines().last().unwrap();
    assert!(last.starts_with("1.000000000000e-2,"), "{last}");
    let events: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("w/events.json")).unwrap()).unwrap();
    assert_eq!(events["branches"][0]["termination"]["kind"], "target");
}

#[test]
fn repro_dumps_bundled_configs_and_rejects_unknown_figures() {
    let dir = tempfile::tempdir().unwrap();
    let o = ptbec(dir.path(), &["repro", "all", "--dump"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for f in ["fig2", "fig3", "fig4", "fig5", "fig6"] {
        assert!(text.contains(&format!("# {f}/")), "{f} missing");
    }
    assert!(text.contains("na = -0.038"));
    let o = ptbec(dir.path(), &["repro", "fig9"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn quartet_oracle_reports_agreement() {
    let dir = tempfile::tempdir().unwrap();
    let o = ptbec(&dir.path().join("q"), &["oracle", "oracle.quartets=2", "oracle.seed=7"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("q/oracle.json")).unwrap()).unwrap();
    assert!(report["max_relative_error"].as_f64().unwrap() < 1e-5);
}
