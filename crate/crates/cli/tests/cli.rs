use std::path::Path;
use std::process::Command;

use otflow_cli::config::ExperimentConfig;
use otflow_cli::pipeline::{run_experiment, RunOptions};
use otflow_core::io;

fn otflow(args: &[&str], out: &Path) -> String {
    let o = Command::new(env!("CARGO_BIN_EXE_otflow"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

const SMALL: [&str; 8] = ["--spacing", "0.2", "--samples", "40", "--steps", "8", "--max-iter", "30"];

fn with(cmd: &[&'static str]) -> Vec<&'static str> {
    [cmd, &SMALL[..]].concat()
}

#[test]
fn staged_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    otflow(&with(&["sample"]), out);
    otflow(&with(&["plan"]), out);
    otflow(&with(&["train", "--method", "gd"]), out);
    otflow(&with(&["eval", "--reference-factor", "0"]), out);
    let geo = otflow(&with(&["geodesic"]), out);
    assert_eq!(geo.lines().count(), 5);

    let mu = io::load_measure(out.join("mu_N.csv")).unwrap();
    let nu = io::load_measure(out.join("nu_N.csv")).unwrap();
    assert_eq!(nu.len(), 40);
    io::load_plan(out.join("plan.csv"), mu.len(), nu.len()).unwrap();
    let u = io::load_control(out.join("control.json")).unwrap();
    assert_eq!((u.steps(), u.channels()), (8, 14));
    let eval: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("eval.json")).unwrap()).unwrap();
    assert!(eval["coupling_ratio"].as_f64().unwrap() < 1.0);
    assert!(eval["decomposition"].is_null());
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(&cfg, "samples = 25\nspacing = 0.3\n[trainer]\nsteps = 4\n").unwrap();
    let out = dir.path().join("run");
    let cfg = cfg.to_str().unwrap();
    otflow(&["sample", "--config", cfg, "--samples", "12"], &out);
    assert_eq!(io::load_measure(out.join("nu_N.csv")).unwrap().len(), 12);

    let bad = Command::new(env!("CARGO_BIN_EXE_otflow"))
        .args(["sample", "--spacing", "-1"])
        .output()
        .unwrap();
    assert!(!bad.status.success());
}

#[test]
fn gamma_study_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = otflow(
        &["gamma-study", "--levels", "0.3:10,0.2:20,0.15:40", "--steps", "4", "--max-iter", "10"],
        dir.path(),
    );
    assert!(stdout.contains("gaps"));
    let table = std::fs::read_to_string(dir.path().join("gamma.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("n1,n2,min_cost"));
    assert_eq!(lines.count(), 3);
}

#[test]
fn svg_panels_are_valid_xml_with_one_marker_per_atom() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::desk();
    cfg.spacing = 0.15;
    cfg.samples = 60;
    cfg.reference_factor = 0;
    cfg.trainer.max_iter = 10;
    cfg.trainer.steps = 8;
    let s = run_experiment(&cfg, dir.path(), RunOptions::default()).unwrap();
    let (n1, n2) = (s.run.n1, s.run.n2);
    for (name, markers) in [
        ("source.svg", n1),
        ("target.svg", n2),
        ("pushforward.svg", n1 + n2),
        ("comparison.svg", 2 * n1),
    ] {
        let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
        let doc = roxmltree::Document::parse(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(doc.root_element().tag_name().name(), "svg");
        let circles = doc.descendants().filter(|n| n.has_tag_name("circle")).count();
        assert_eq!(circles, markers, "{name}");
    }
}

#[test]
fn timing_is_opt_in() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::desk();
    cfg.spacing = 0.25;
    cfg.samples = 20;
    cfg.reference_factor = 2;
    cfg.trainer.max_iter = 3;
    let plain = run_experiment(&cfg, dir.path(), RunOptions::default()).unwrap();
    assert!(plain.run.wall_seconds.is_none());
    assert!(plain.eval.report.decomposition.is_some());
    let timed = run_experiment(&cfg, dir.path(), RunOptions { timing: true }).unwrap();
    assert!(timed.run.wall_seconds.is_some());
}
