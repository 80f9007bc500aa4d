//! End-to-end tests through the compiled binary: exit codes, config
//! handling, and the analyze-reproduces-inline-metrics contract.

use std::path::Path;
use std::process::{Command, Output};

fn pherovo(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pherovo"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

const TINY: &[&str] = &[
    "--field-width",
    "48",
    "--field-height",
    "48",
    "--n-spots",
    "2",
    "--spot-sigma-min",
    "4",
    "--spot-sigma-max",
    "9",
    "--single-steps",
    "40",
    "--multi-steps",
    "30",
    "--multi-agents",
    "5",
    "--population",
    "6",
    "--max-generations",
    "4",
    "--eval-every",
    "2",
    "--energy-bins",
    "10",
];

#[test]
fn help_and_version_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(pherovo(&["--help"], dir.path()).status.code(), Some(0));
    assert_eq!(pherovo(&["--version"], dir.path()).status.code(), Some(0));
    assert_eq!(
        pherovo(&["evolve", "--help"], dir.path()).status.code(),
        Some(0)
    );
}

#[test]
fn bad_flags_and_configs_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        pherovo(&["evolve", "--no-such-flag"], dir.path())
            .status
            .code(),
        Some(1)
    );
    assert_eq!(pherovo(&[], dir.path()).status.code(), Some(1));

    std::fs::write(dir.path().join("bad.cfg"), "cheese = 9\n").unwrap();
    let out = pherovo(&["evolve", "--config", "bad.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cheese"));

    // Out-of-bounds value through a flag.
    let out = pherovo(&["evolve", "--decay-rate", "1.5", "--out", "x"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_input_files_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = pherovo(&["multi", "--genome", "nope.txt", "--out", "m"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = pherovo(
        &["analyze", "--trace", "nope.csv", "--out", "a"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn evolve_smoke_run_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["evolve", "--seed", "3", "--out", "run"];
    args.extend_from_slice(TINY);
    let out = pherovo(&args, dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let run = dir.path().join("run");
    for name in ["config.json", "metrics.csv", "probes.csv", "scatter.csv"] {
        assert!(run.join(name).exists(), "{name} missing");
    }
    let metrics = std::fs::read_to_string(run.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 5); // header + 4 generations

    // The config echo carries the overridden and default values.
    let echo = std::fs::read_to_string(run.join("config.json")).unwrap();
    assert!(echo.contains("\"field_width\": 48"));
    assert!(echo.contains("\"decay_rate\": 0.001"));
    assert!(echo.contains("\"init_sigma\": 0.1"));
}

#[test]
fn default_config_echo_carries_standard_values() {
    let dir = tempfile::tempdir().unwrap();
    // max-generations 0 runs no episodes; it just writes the echo and the
    // initial checkpoint.
    let out = pherovo(
        &["evolve", "--max-generations", "0", "--out", "defaults"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let echo = std::fs::read_to_string(dir.path().join("defaults/config.json")).unwrap();
    for expect in [
        "\"field_width\": 600",
        "\"field_height\": 600",
        "\"body_radius\": 20.0",
        "\"sensor_radius\": 2.0",
        "\"n_spots\": 5",
        "\"decay_rate\": 0.001",
        "\"single_steps\": 1000",
        "\"multi_steps\": 5000",
        "\"multi_agents\": 1024",
        "\"max_generations\": 0",
        "\"population\": 100",
        "\"init_sigma\": 0.1",
        "\"eval_every\": 10",
    ] {
        assert!(echo.contains(expect), "echo missing {expect}");
    }
}

#[test]
fn genome_flow_multi_then_analyze_matches() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["evolve", "--seed", "8", "--out", "run"];
    args.extend_from_slice(TINY);
    assert_eq!(pherovo(&args, dir.path()).status.code(), Some(0));

    // Use the generation-4 checkpoint from the evolve run.
    let genome = "run/checkpoints/genome_gen000004.txt";
    assert!(dir.path().join(genome).exists());

    let mut args = vec![
        "multi",
        "--genome",
        genome,
        "--seed",
        "8",
        "--out",
        "multi",
        "--save-field",
    ];
    args.extend_from_slice(TINY);
    let out = pherovo(&args, dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let mut args = vec![
        "analyze",
        "--trace",
        "multi/trace.csv",
        "--generation",
        "4",
        "--seed",
        "8",
        "--out",
        "analysis",
    ];
    args.extend_from_slice(TINY);
    let out = pherovo(&args, dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let inline = std::fs::read_to_string(dir.path().join("multi/metrics.csv")).unwrap();
    let offline = std::fs::read_to_string(dir.path().join("analysis/metrics.csv")).unwrap();
    assert_eq!(
        inline, offline,
        "analyze must reproduce inline metrics exactly"
    );
    assert!(dir.path().join("multi/field.bin").exists());
}

#[test]
fn rulebased_flow_writes_correlogram() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["evolve", "--seed", "5", "--out", "run"];
    args.extend_from_slice(TINY);
    assert_eq!(pherovo(&args, dir.path()).status.code(), Some(0));

    let mut args = vec![
        "rulebased",
        "--seed",
        "5",
        "--out",
        "rule",
        "--vs-genome",
        "run/checkpoints/genome_gen000004.txt",
        "--multi",
        "--correlogram-window",
        "20",
        "--correlogram-max-lag",
        "5",
    ];
    args.extend_from_slice(TINY);
    let out = pherovo(&args, dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for name in [
        "rule/rule_single_trace.csv",
        "rule/correlogram.csv",
        "rule/rule_multi_metrics.csv",
    ] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
}

#[test]
fn same_seed_same_bytes_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    for (out, workers) in [("w1", "1"), ("w3", "3")] {
        let mut args = vec!["evolve", "--seed", "12", "--out", out, "--workers", workers];
        args.extend_from_slice(TINY);
        assert_eq!(pherovo(&args, dir.path()).status.code(), Some(0));
    }
    for name in ["metrics.csv", "probes.csv", "scatter.csv"] {
        let a = std::fs::read(dir.path().join("w1").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("w3").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs across worker counts");
    }
}
