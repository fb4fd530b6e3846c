use std::fs;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_subrayleigh");

fn cli(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn shipped(name: &str) -> String {
    String::from_utf8(cli(&["scenarios", name]).stdout).unwrap()
}

#[test]
fn missing_field_exits_2_naming_it() {
    let dir = tempfile::tempdir().unwrap();
    let text: String = shipped("fig3a")
        .lines()
        .filter(|l| !l.starts_with("frames_per_position"))
        .map(|l| format!("{l}\n"))
        .collect();
    let path = dir.path().join("broken.toml");
    fs::write(&path, text).unwrap();
    let out = cli(&["simulate", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("frames_per_position"));
}

#[test]
fn unknown_scenario_exits_2() {
    assert_eq!(cli(&["simulate", "--scenario", "nope"]).status.code(), Some(2));
}

#[test]
fn postselect_reproduces_run_images() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.toml");
    let text = shipped("fig3d").replace("frames_per_position = 32000", "frames_per_position = 2000");
    fs::write(&cfg, text).unwrap();
    let run = dir.path().join("run");
    let out = cli(&["simulate", "--config", cfg.to_str().unwrap(), "--out", run.to_str().unwrap(), "--emit-frames"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let post = dir.path().join("post");
    let out = cli(&[
        "postselect",
        "--frames",
        run.join("frames.bin").to_str().unwrap(),
        "--dark",
        run.join("dark_map.csv").to_str().unwrap(),
        "--select",
        "exact:23",
        "--select",
        "all_counts",
        "--out",
        post.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for label in ["exact23", "all_counts"] {
        let values = |p: std::path::PathBuf| -> Vec<String> {
            fs::read_to_string(p).unwrap().lines().skip(1).map(str::to_string).collect()
        };
        assert_eq!(
            values(run.join(format!("image_{label}.csv"))),
            values(post.join(format!("image_{label}.csv"))),
            "{label}"
        );
        assert_eq!(
            fs::read(run.join(format!("image_{label}.pgm"))).unwrap(),
            fs::read(post.join(format!("image_{label}.pgm"))).unwrap()
        );
    }
}

#[test]
fn sweep_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    assert!(cli(&["sweep", "--n-min", "1", "--n-max", "4", "--out", path.to_str().unwrap()]).status.success());
    let text = fs::read_to_string(path).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().nth(1).unwrap().starts_with("1,"));
    assert_eq!(cli(&["sweep", "--n-min", "0"]).status.code(), Some(3));
}

#[test]
fn oracle_and_analyze_agree() {
    let dir = tempfile::tempdir().unwrap();
    let map = dir.path().join("p9.csv");
    let out = cli(&["oracle", "--scenario", "fig3a", "--n", "9", "--out", map.to_str().unwrap()]);
    assert!(out.status.success());
    let from_file: serde_json::Value =
        serde_json::from_slice(&cli(&["analyze", "--image", map.to_str().unwrap(), "--pitch", "100um"]).stdout).unwrap();
    let direct: serde_json::Value = serde_json::from_slice(&cli(&["analyze", "--scenario", "fig3a", "--oracle", "9"]).stdout).unwrap();
    let a = from_file["donut_score"].as_f64().unwrap();
    let b = direct["donut_score"].as_f64().unwrap();
    assert!(a > 0.2);
    assert!((a - b).abs() < 1e-9);
}

#[test]
fn asymptotic_validity_exits_3() {
    let out = cli(&["oracle", "--scenario", "fig3a", "--n", "10", "--asymptotic"]);
    assert_eq!(out.status.code(), Some(3));
}
