use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn demo_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/demo.toml")
}

fn ecogame(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ecogame"))
        .args(args)
        .env_remove("ECOGAME_SEED")
        .env_remove("ECOGAME_DATA_DIR")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn shipped_demo_config_matches_the_builtin_one() {
    let cfg = ecogame::pipeline::RunConfig::load(&demo_config()).unwrap();
    assert_eq!(cfg, ecogame::pipeline::RunConfig::demo());
}

#[test]
fn simulate_writes_table_and_effective_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a");
    let o = ecogame(&[
        "simulate",
        "--config",
        demo_config().to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("minutes.csv").exists());
    let effective = std::fs::read_to_string(out.join("effective_config.toml")).unwrap();
    assert!(effective.starts_with("# config_hash="));
    assert!(effective.contains("seed = 7"));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let o = ecogame(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"));
}

#[test]
fn bad_flag_value_is_a_usage_error() {
    let o = ecogame(&["train", "--mode", "sideways"]);
    assert_eq!(o.status.code(), Some(2));
    let o = ecogame(&["train", "--seed", "minus-one"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_config_is_a_runtime_error() {
    let o = ecogame(&[
        "simulate",
        "--config",
        "/definitely/not/here.toml",
        "--out",
        "/tmp/unused",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("No such file"), "{}", stderr(&o));
}

#[test]
fn malformed_config_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "seed = \"seven\"\n").unwrap();
    let o = ecogame(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("ecogame: error:"));
}

#[test]
fn ingest_of_a_missing_table_names_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("csv.toml");
    std::fs::write(
        &cfg,
        "seed = 1\n[data]\nsource = \"csv\"\npath = \"missing.csv\"\n",
    )
    .unwrap();
    let o = ecogame(&[
        "ingest",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("ingest"), "{}", stderr(&o));
}

#[test]
fn seed_flag_beats_environment() {
    let dir = tempfile::tempdir().unwrap();
    let run = |extra: &[&str], env: Option<&str>| {
        let out = dir
            .path()
            .join(format!("run{}", extra.len() + env.map_or(0, |_| 10)));
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_ecogame"));
        cmd.args(["simulate", "--out", out.to_str().unwrap()])
            .args(extra);
        cmd.env_remove("ECOGAME_SEED");
        if let Some(s) = env {
            cmd.env("ECOGAME_SEED", s);
        }
        assert!(cmd.output().unwrap().status.success());
        std::fs::read_to_string(out.join("effective_config.toml")).unwrap()
    };
    assert!(run(&[], Some("21")).contains("\nseed = 21\n"));
    assert!(run(&["--seed", "5"], Some("21")).contains("\nseed = 5\n"));
    assert!(run(&[], None).contains("\nseed = 7\n"));
}

#[test]
fn evaluate_then_report_in_sensor_free_mode() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("eval");
    let o = ecogame(&[
        "evaluate",
        "--mode",
        "sensor_free",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = std::fs::read_to_string(out.join("auc_table.csv")).unwrap();
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.contains(",sensor_free,")));
    let o = ecogame(&["report", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("report.md").exists());
}

#[test]
fn report_on_an_empty_directory_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = ecogame(&["report", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn commands_leave_their_inputs_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    assert!(ecogame(&["simulate", "--out", sim.to_str().unwrap()])
        .status
        .success());
    let input = sim.join("minutes.csv");
    let before = std::fs::read(&input).unwrap();
    let cfg = dir.path().join("csv.toml");
    std::fs::write(
        &cfg,
        format!(
            "seed = 3\n[data]\nsource = \"csv\"\npath = \"{}\"\n",
            input.display()
        ),
    )
    .unwrap();
    let out = dir.path().join("ingested");
    let o = ecogame(&[
        "ingest",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read(&input).unwrap(), before);
    assert_eq!(std::fs::read(out.join("minutes.csv")).unwrap(), before);
}
