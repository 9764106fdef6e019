use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_bbma");

/// Small sweeps so every subcommand finishes in a second or two.
const SMALL: &str = r#"
profile = "desk"

[fig3]
n_values = [5, 20]
trials = 6

[fig4]
n_values = [4, 12]
trials = 3

[fig5]
n_bits_values = [1, 4]
bits_per_point = 2000

[check_weights]
n_terminals = 12
trials = 2
"#;

fn bbma(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(dir)
        .env("BBMA_THREADS", "2")
        .args(args)
        .output()
        .expect("binary runs")
}

fn strip_timestamps(manifest: &str) -> String {
    manifest
        .lines()
        .filter(|l| !l.starts_with("started") && !l.starts_with("finished"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn no_arguments_prints_usage_and_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = bbma(dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(bbma(dir.path(), &["fig7"]).status.code(), Some(1));
}

#[test]
fn bad_config_exits_one_and_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "[cell]\ntarget_sinr_db = \"abc\"\n").unwrap();
    let out = bbma(dir.path(), &["fig3", "--config", "bad.toml"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("cell.target_sinr_db") && err.contains("line 2"), "{err}");
}

#[test]
fn condition_ceiling_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    // A ceiling of 10 rejects any realistic drop of 40 terminals.
    fs::write(
        dir.path().join("tight.toml"),
        "profile = \"desk\"\n[null_steering]\ncondition_ceiling = 10.0\n[check_weights]\nn_terminals = 40\ntrials = 1\n",
    )
    .unwrap();
    let out = bbma(dir.path(), &["check-weights", "--config", "tight.toml", "--out", "cw.csv"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn default_output_goes_to_timestamped_file_in_out() {
    let dir = tempfile::tempdir().unwrap();
    let out = bbma(dir.path(), &["table1-demo"]);
    assert_eq!(out.status.code(), Some(0));
    let names: Vec<String> = fs::read_dir(dir.path().join("out"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names.len(), 2, "{names:?}");
    assert!(names.iter().any(|n| n.starts_with("table1-demo-") && n.ends_with(".csv")));
    assert!(names.iter().any(|n| n.starts_with("table1-demo-") && n.ends_with(".meta")));
}

#[test]
fn seed_flag_beats_config_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), format!("seed = 5\n{SMALL}")).unwrap();
    assert!(bbma(dir.path(), &["fig3", "--config", "c.toml", "--seed", "42", "--out", "a.csv"]).status.success());
    let meta: toml::Table = fs::read_to_string(dir.path().join("a.meta")).unwrap().parse().unwrap();
    assert_eq!(meta["seed"].as_integer(), Some(42));
    assert_eq!(meta["config"]["seed"].as_integer(), Some(42));

    assert!(bbma(dir.path(), &["fig3", "--config", "c.toml", "--out", "b.csv"]).status.success());
    let meta: toml::Table = fs::read_to_string(dir.path().join("b.meta")).unwrap().parse().unwrap();
    assert_eq!(meta["seed"].as_integer(), Some(5));
    assert_ne!(fs::read(dir.path().join("a.csv")).unwrap(), fs::read(dir.path().join("b.csv")).unwrap());
}

#[test]
fn manifest_records_profile_array_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), SMALL).unwrap();
    let out = bbma(dir.path(), &["fig4", "--config", "c.toml", "--profile", "paper", "--raw", "--out", "f4.csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let meta: toml::Table = fs::read_to_string(dir.path().join("f4.meta")).unwrap().parse().unwrap();
    assert_eq!(meta["subcommand"].as_str(), Some("fig4"));
    assert_eq!(meta["profile"].as_str(), Some("paper"));
    assert_eq!(meta["config"]["array"]["nx"].as_integer(), Some(64));
    assert_eq!(meta["outputs"]["csv"].as_str(), Some("f4.csv"));
    assert_eq!(meta["outputs"]["raw"].as_str(), Some("f4.trials.csv"));
    assert!(meta["version"].as_str().unwrap().starts_with("bbma-core "));
    let raw = fs::read_to_string(dir.path().join("f4.trials.csv")).unwrap();
    // Header plus two solvers for every trial.
    assert_eq!(raw.lines().count(), 1 + 2 * (3 + 3));
}

#[test]
fn manifest_config_reproduces_the_csv() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), SMALL).unwrap();
    assert!(bbma(dir.path(), &["fig5", "--config", "c.toml", "--seed", "9", "--out", "first.csv"]).status.success());
    let meta: toml::Table = fs::read_to_string(dir.path().join("first.meta")).unwrap().parse().unwrap();
    fs::write(dir.path().join("replay.toml"), toml::to_string(meta["config"].as_table().unwrap()).unwrap()).unwrap();
    assert!(bbma(dir.path(), &["fig5", "--config", "replay.toml", "--out", "second.csv"]).status.success());
    assert_eq!(fs::read(dir.path().join("first.csv")).unwrap(), fs::read(dir.path().join("second.csv")).unwrap());
}

#[test]
fn identical_runs_are_bitwise_identical() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), SMALL).unwrap();
    for sub in ["fig3", "fig4", "fig5", "check-weights", "table1-demo"] {
        for run in ["a", "b"] {
            fs::create_dir_all(dir.path().join(run)).unwrap();
            let target = format!("{run}/{sub}.csv");
            let out = bbma(dir.path(), &[sub, "--config", "c.toml", "--seed", "42", "--raw", "--out", &target]);
            assert!(out.status.success(), "{sub}: {}", String::from_utf8_lossy(&out.stderr));
        }
        let read = |run: &str, ext: &str| fs::read_to_string(dir.path().join(run).join(format!("{sub}.{ext}"))).unwrap();
        assert_eq!(read("a", "csv"), read("b", "csv"), "{sub}");
        assert_eq!(strip_timestamps(&read("a", "meta")), strip_timestamps(&read("b", "meta")), "{sub}");
    }
}

#[test]
fn worker_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), SMALL).unwrap();
    for threads in ["1", "3"] {
        let out = Command::new(BIN)
            .current_dir(dir.path())
            .env("BBMA_THREADS", threads)
            .args(["fig4", "--config", "c.toml", "--out", &format!("t{threads}.csv")])
            .output()
            .unwrap();
        assert!(out.status.success());
    }
    assert_eq!(fs::read(dir.path().join("t1.csv")).unwrap(), fs::read(dir.path().join("t3.csv")).unwrap());
    let bad = Command::new(BIN).current_dir(dir.path()).env("BBMA_THREADS", "many").arg("table1-demo").output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
}
