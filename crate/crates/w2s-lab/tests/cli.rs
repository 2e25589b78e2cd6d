//! End-to-end tests of the `w2s` binary: the full subcommand chain, exit
//! codes, dependency ordering, determinism, and the plot-export contract.

use std::path::Path;
use std::process::{Command, Output};

fn w2s() -> Command {
    Command::new(env!("CARGO_BIN_EXE_w2s"))
}

fn write_config(dir: &Path, extra: &str) -> std::path::PathBuf {
    let path = dir.join("exp.toml");
    let text = format!(
        "[task]\nsplit_sizes = [300, 300, 300, 300]\n\
         [strong]\nhidden_layers = [8]\n\
         [schedule]\nepochs = 6\n{extra}"
    );
    std::fs::write(&path, text).unwrap();
    path
}

fn run_ok(cmd: &mut Command) -> Output {
    let output = cmd.output().expect("binary runs");
    assert!(
        output.status.success(),
        "command failed: {:?}\nstdout: {}\nstderr: {}",
        cmd,
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

fn exit_code(cmd: &mut Command) -> (i32, String) {
    let output = cmd.output().expect("binary runs");
    (
        output.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&output.stderr).to_string(),
    )
}

#[test]
fn full_subcommand_chain_produces_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let config = write_config(dir.path(), "");

    for sub in ["generate-data", "train-gt", "run", "analyze"] {
        run_ok(
            w2s()
                .arg(sub)
                .arg("--config")
                .arg(&config)
                .arg("--seed")
                .arg("7")
                .arg("--out")
                .arg(&out),
        );
    }
    run_ok(w2s().arg("export-plots").arg("--out").arg(&out));

    for artifact in [
        "manifest.json",
        "bundle.jsonl",
        "config.normalized.toml",
        "checkpoints/weak_gt.json",
        "checkpoints/strong_gt.json",
        "checkpoints/w2s_no_conflict.json",
        "checkpoints/w2s_conflict.json",
        "report.json",
        "analysis_report.json",
        "dumps/confidences.csv",
        "dumps/weak_labels.csv",
        "plots/runs.csv",
        "plots/ds_by_capacity.csv",
    ] {
        assert!(out.join(artifact).exists(), "missing {artifact}");
    }

    // The manifest validates everything it lists.
    let manifest = w2s_lab::io::load_manifest(&out).unwrap();
    manifest.validate(&out).unwrap();
    assert!(!manifest.config_fingerprint.is_empty());

    // Plot export is derivable from persisted reports alone.
    let wide = std::fs::read_to_string(out.join("plots/ds_by_capacity.csv")).unwrap();
    assert!(wide.starts_with("strong_params,"));
    assert!(wide.lines().count() >= 2);
}

#[test]
fn repeated_runs_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let config = write_config(dir.path(), "");

    let chain = |out: &Path| {
        for sub in ["generate-data", "train-gt", "run"] {
            run_ok(
                w2s()
                    .arg(sub)
                    .arg("--config")
                    .arg(&config)
                    .arg("--seed")
                    .arg("7")
                    .arg("--out")
                    .arg(out),
            );
        }
        std::fs::read(out.join("report.json")).unwrap()
    };
    let first = chain(&out);
    let second = chain(&out);
    assert_eq!(first, second, "reports differ across identical runs");
}

#[test]
fn missing_upstream_artifacts_give_dependency_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fresh");
    let config = write_config(dir.path(), "");

    // run before generate-data/train-gt: exit 3 with a machine-readable
    // record naming the prior subcommand.
    let (code, stderr) = exit_code(
        w2s()
            .arg("run")
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out),
    );
    assert_eq!(code, 3, "stderr: {stderr}");
    let record: serde_json::Value = serde_json::from_str(stderr.lines().last().unwrap()).unwrap();
    assert_eq!(record["error"], "dependency");
    assert!(record["message"].as_str().unwrap().contains("generate-data"));

    // train-gt is also blocked, and names generate-data.
    let (code, stderr) = exit_code(
        w2s()
            .arg("train-gt")
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out),
    );
    assert_eq!(code, 3, "stderr: {stderr}");

    // After generate-data, run still needs train-gt.
    run_ok(
        w2s()
            .arg("generate-data")
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out),
    );
    let (code, stderr) = exit_code(
        w2s()
            .arg("run")
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out),
    );
    assert_eq!(code, 3);
    assert!(stderr.contains("train-gt"));
}

#[test]
fn malformed_configs_give_config_exit_code_listing_fields() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = dir.path().join("bad.toml");
    std::fs::write(
        &config,
        "[objective]\nalpha = -0.1\n[run]\nthreshold = 1.5\n[task]\nmystery = 1\n",
    )
    .unwrap();

    let (code, stderr) = exit_code(
        w2s()
            .arg("generate-data")
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out),
    );
    assert_eq!(code, 2, "stderr: {stderr}");
    let record: serde_json::Value = serde_json::from_str(stderr.lines().last().unwrap()).unwrap();
    assert_eq!(record["error"], "config");
    let fields = record["fields"].as_array().unwrap();
    let joined = fields
        .iter()
        .map(|f| f.as_str().unwrap())
        .collect::<Vec<_>>()
        .join("; ");
    assert!(joined.contains("objective.alpha"), "{joined}");
    assert!(joined.contains("run.threshold"), "{joined}");
    assert!(joined.contains("task.mystery"), "{joined}");
}

#[test]
fn out_dir_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("env-out");
    let config = write_config(dir.path(), "");
    run_ok(
        w2s()
            .arg("generate-data")
            .arg("--config")
            .arg(&config)
            .env("W2S_OUT_DIR", &out),
    );
    assert!(out.join("bundle.jsonl").exists());

    // Without either source the command is a config error (exit 2).
    let (code, _) = exit_code(
        w2s()
            .arg("generate-data")
            .arg("--config")
            .arg(&config)
            .env_remove("W2S_OUT_DIR"),
    );
    assert_eq!(code, 2);
}

#[test]
fn threshold_sweep_runs_and_reports_points() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let config = write_config(
        dir.path(),
        "[sweep]\naxis = \"threshold\"\nthresholds = [0.7, 0.8]\n",
    );
    run_ok(
        w2s()
            .arg("generate-data")
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out),
    );
    let output = run_ok(
        w2s()
            .arg("sweep")
            .arg("--config")
            .arg(&config)
            .arg("--jobs")
            .arg("2")
            .arg("--out")
            .arg(&out),
    );
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("T=0.7"), "{stdout}");
    assert!(stdout.contains("trend:"), "{stdout}");
    assert!(out.join("sweep/summary.json").exists());
    assert!(out.join("sweep/point_000/report.json").exists());
    assert!(out.join("sweep/point_001/report.json").exists());
}

#[test]
fn bootstrap_subcommand_runs_a_chain() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("boot");
    let config = write_config(dir.path(), "[[intermediate]]\nhidden_layers = [4]\n");
    for sub in ["generate-data", "train-gt", "bootstrap"] {
        run_ok(
            w2s()
                .arg(sub)
                .arg("--config")
                .arg(&config)
                .arg("--out")
                .arg(&out),
        );
    }
    assert!(out.join("checkpoints/intermediate_0.json").exists());
    let report = w2s_lab::io::load_report(&out.join("report.json")).unwrap();
    assert!(report.accuracies.contains_key("intermediate_0"));
}
