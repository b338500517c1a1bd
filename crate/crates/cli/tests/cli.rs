use std::path::Path;
use std::process::{Command, Output};

use oaprog_cli::RunConfig;

const SMALL: &str = r#"
seed = 5

[synth]
n_patients = 80
n_noise = 5

[forest]
n_trees = 5
max_depth = 4

[cv]
n_repeats = 1
k = 3
n_seeds = 1
"#;

fn oaprog(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oaprog")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn error_record(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stderr).unwrap_or_else(|e| panic!("stderr is not a JSON record ({e}): {}", String::from_utf8_lossy(&out.stderr)))
}

#[test]
fn invalid_config_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "seed = 1\n[cv]\nk = 1\n");
    let out = oaprog(&["--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap(), "run", "synth"]);
    assert_eq!(out.status.code(), Some(2));
    let rec = error_record(&out);
    assert_eq!(rec["error"], "config");
    assert_eq!(rec["exit_code"], 2);

    let cfg = write_config(tmp.path(), "no_such_key = 1\n");
    assert_eq!(oaprog(&["--config", &cfg, "config"]).status.code(), Some(2));
}

#[test]
fn missing_input_is_a_stage_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out_dir = tmp.path().join("o");
    let out = oaprog(&["--config", &cfg, "--out", out_dir.to_str().unwrap(), "run", "bbc"]);
    assert_eq!(out.status.code(), Some(1));
    let rec = error_record(&out);
    assert_eq!(rec["error"], "stage");
    let saved: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("error.json")).unwrap()).unwrap();
    assert_eq!(saved["exit_code"], 1);
}

#[test]
fn printed_config_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = oaprog(&["--config", &cfg, "--seed", "9", "config"]);
    assert!(out.status.success());
    let parsed = RunConfig::parse(&String::from_utf8(out.stdout).unwrap()).unwrap();
    let mut expected = RunConfig::parse(SMALL).unwrap();
    expected.seed = 9;
    assert_eq!(parsed, expected);
}

#[test]
fn stages_chain_and_ml_p_matches_conventional_count() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out_dir = tmp.path().join("o");
    let out = out_dir.to_str().unwrap();
    for stage in ["synth", "label", "evaluate"] {
        let o = oaprog(&["--config", &cfg, "--out", out, "run", stage]);
        assert!(o.status.success(), "{stage}: {}", String::from_utf8_lossy(&o.stderr));
    }
    for mode in ["conventional", "ml-p"] {
        let o = oaprog(&["--config", &cfg, "--out", out, "run", "select", "--mode", mode]);
        assert!(o.status.success(), "{mode}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let read = |name: &str| -> serde_json::Value {
        serde_json::from_str(&std::fs::read_to_string(out_dir.join(name)).unwrap()).unwrap()
    };
    let conv = read("selection_conventional.json");
    let ml = read("selection_ml_p.json");
    assert_eq!(ml["payload"]["report"]["selected"], conv["payload"]["report"]["selected"]);
    assert_eq!(conv["artifact"], "selection");
    let labels = std::fs::read_to_string(out_dir.join("labels.csv")).unwrap();
    assert!(labels.starts_with("# config_hash="));
    assert_eq!(labels.lines().nth(1), Some("period,patient,start,end,class"));
}
