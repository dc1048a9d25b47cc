use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn krgs(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_krgs"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = "synth_nodes = 8\nsynth_days = 30\nn_train = 15\ntrials = 3\ni_max = 4\n\
                     sigma_scales = [1.0, 4.0]\nalpha_grid = [0.01, 1.0]\nbeta_grid = [0.0, 0.1]\n";

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.toml");
    fs::write(&path, SMALL).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn synth_writes_loadable_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = krgs(&["synth", "--config", &cfg, "--out-dir", "data"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let ds = krgs::data::load_dataset(dir.path().join("data/nodes.csv"), dir.path().join("data/signals.csv")).unwrap();
    assert_eq!(ds.0.len(), 8);
    assert_eq!(ds.1.len(), 30);
}

#[test]
fn fit_then_predict_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    assert!(krgs(&["synth", "--config", &cfg, "--out-dir", "data"], dir.path()).status.success());

    let fit = krgs(
        &[
            "fit", "--config", &cfg, "--nodes", "data/nodes.csv", "--signals", "data/signals.csv",
            "--set", "alpha=0.1", "--set", "beta=0.01", "--set", "sigma=5.0", "--out", "model.json",
        ],
        dir.path(),
    );
    assert!(fit.status.success(), "{}", stderr(&fit));
    assert!(String::from_utf8_lossy(&fit.stdout).contains("alpha=0.1 beta=0.01 sigma=5"));
    let summary = fs::read_to_string(dir.path().join("model.csv")).unwrap();
    assert!(summary.starts_with("iteration,cost_l1,psi_change,jitter\n"));
    assert!(summary.lines().count() >= 2);

    let pred = krgs(
        &["predict", "--model", "model.json", "--signals", "data/signals.csv", "--out", "pred.csv"],
        dir.path(),
    );
    assert!(pred.status.success(), "{}", stderr(&pred));
    assert!(String::from_utf8_lossy(&pred.stdout).contains("next-day NMSE over 29 days"));
    let text = fs::read_to_string(dir.path().join("pred.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header[0], "input_date");
    assert_eq!(header.len(), 9);
    assert_eq!(lines.count(), 30);
}

#[test]
fn cv_writes_one_score_per_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = krgs(&["cv", "--config", &cfg, "--out", "scores.csv"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(dir.path().join("scores.csv")).unwrap();
    assert!(text.starts_with("alpha,beta,sigma,score_db\n"));
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 2);
    assert!(String::from_utf8_lossy(&out.stdout).contains("score_db="));
}

#[test]
fn run_writes_report_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = krgs(&["run", "--config", &cfg, "--seed", "3", "--out-dir", "out", "--plot", "--set", "trials=2"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let nmse = fs::read_to_string(dir.path().join("out").join(krgs::experiment::NMSE_FILE)).unwrap();
    assert!(nmse.starts_with("iteration,N,nmse_db,trials_ok,trials_failed\n"));
    assert_eq!(nmse.lines().count(), 1 + 4);
    assert!(nmse.lines().skip(1).all(|l| l.ends_with(",2,0")));
    let meta = fs::read_to_string(dir.path().join("out").join(krgs::experiment::METADATA_FILE)).unwrap();
    assert!(meta.contains("config.seed,3"));
    assert!(meta.contains("config.trials,2"));
    let svg = fs::read_to_string(dir.path().join("out").join(krgs::experiment::PLOT_FILE)).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn unknown_config_key_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "trails = 3\n").unwrap();
    let out = krgs(&["run", "--config", "bad.toml", "--seed", "1", "--out-dir", "out"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("trails"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn invalid_value_and_bad_override_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let neg = krgs(&["cv", "--config", &cfg, "--set", "noise_fraction=1.5"], dir.path());
    assert_eq!(neg.status.code(), Some(1), "{}", stderr(&neg));
    let malformed = krgs(&["cv", "--config", &cfg, "--set", "trials"], dir.path());
    assert_eq!(malformed.status.code(), Some(1));
}

#[test]
fn missing_input_file_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = krgs(&["predict", "--model", "nope.json", "--signals", "nope.csv", "--out", "p.csv"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("error:"));
}

#[test]
fn predict_rejects_node_count_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let fit = krgs(
        &["fit", "--config", &cfg, "--set", "alpha=0.1", "--set", "beta=0.0", "--set", "sigma=5.0", "--out", "m.json"],
        dir.path(),
    );
    assert!(fit.status.success(), "{}", stderr(&fit));
    fs::write(dir.path().join("s.csv"), "date,v0,v1\n2020-01-01,1,2\n2020-01-02,3,4\n").unwrap();
    let out = krgs(&["predict", "--model", "m.json", "--signals", "s.csv", "--out", "p.csv"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("nodes"));
}
