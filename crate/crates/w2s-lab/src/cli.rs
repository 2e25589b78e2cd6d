//! Implementations behind the `w2s` command-line tool.
//!
//! Subcommands compose the pipeline stages through on-disk artifacts: each
//! stage loads what the previous one persisted (via the run manifest),
//! validates that the artifacts match the active config, and writes its own
//! outputs atomically with the manifest updated last. A stage whose inputs
//! are missing fails with a dependency error naming the subcommand to run
//! first.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::analysis::ExperimentReport;
use crate::config::{parse_config_with_seed, PipelineConfig};
use crate::error::{Error, FieldError, Result};
use crate::io;
use crate::pipeline;
use crate::scorer::RoleTag;
use crate::task::generate_bundle;

/// The `w2s` subcommands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    GenerateData,
    TrainGt,
    Run,
    Bootstrap,
    Sweep,
    Analyze,
    ExportPlots,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::GenerateData => "generate-data",
            Command::TrainGt => "train-gt",
            Command::Run => "run",
            Command::Bootstrap => "bootstrap",
            Command::Sweep => "sweep",
            Command::Analyze => "analyze",
            Command::ExportPlots => "export-plots",
        }
    }
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Options {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub jobs: usize,
}

/// Resolves the output directory: the `--out` flag, then `W2S_OUT_DIR`.
pub fn resolve_out_dir(flag: Option<PathBuf>) -> Result<PathBuf> {
    if let Some(path) = flag {
        return Ok(path);
    }
    match std::env::var_os("W2S_OUT_DIR") {
        Some(dir) if !dir.is_empty() => Ok(PathBuf::from(dir)),
        _ => Err(Error::Config(vec![FieldError {
            field: "--out".into(),
            message: "output directory required (flag --out or env W2S_OUT_DIR)".into(),
        }])),
    }
}

// Artifact kinds and their on-disk layout.
const ART_CONFIG: &str = "config";
const ART_BUNDLE: &str = "bundle";
const ART_REPORT: &str = "report";
const ART_ANALYSIS: &str = "report/analysis";
const ART_DUMPS: &str = "dumps/confidences";
const ART_LABELS: &str = "labels/weak";

fn checkpoint_kind(role: &str) -> String {
    format!("checkpoint/{role}")
}

fn checkpoint_rel(role: &str) -> String {
    format!("checkpoints/{role}.json")
}

/// Machine-readable error record emitted on any failure.
#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub error: &'static str,
    pub message: String,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub fields: Vec<String>,
}

pub fn error_record(err: &Error) -> ErrorRecord {
    let fields = match err {
        Error::Config(errors) => errors.iter().map(|e| e.to_string()).collect(),
        _ => Vec::new(),
    };
    ErrorRecord {
        error: err.kind(),
        message: err.to_string(),
        exit_code: err.exit_code(),
        fields,
    }
}

/// Runs one subcommand end to end.
pub fn execute(command: Command, options: &Options) -> Result<()> {
    match command {
        Command::GenerateData => generate_data(options),
        Command::TrainGt => train_gt(options),
        Command::Run => run(options),
        Command::Bootstrap => bootstrap(options),
        Command::Sweep => sweep(options),
        Command::Analyze => analyze(options),
        Command::ExportPlots => export_plots(options),
    }
}

fn load_required_config(options: &Options) -> Result<PipelineConfig> {
    let path = options.config.as_ref().ok_or_else(|| {
        Error::Config(vec![FieldError {
            field: "--config".into(),
            message: "this subcommand requires a config file".into(),
        }])
    })?;
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Config(vec![FieldError {
            field: "--config".into(),
            message: format!("cannot read {}: {e}", path.display()),
        }])
    })?;
    parse_config_with_seed(&text, options.seed)
}

/// Config for re-analysis: the flag if given, otherwise the normalized echo
/// stored by an earlier stage.
fn load_config_or_stored(options: &Options) -> Result<PipelineConfig> {
    if options.config.is_some() {
        return load_required_config(options);
    }
    let manifest = load_manifest_dep(&options.out, "run")?;
    let path = manifest
        .artifact_path(&options.out, ART_CONFIG)
        .filter(|p| p.exists())
        .ok_or(Error::Dependency {
            artifact: ART_CONFIG.into(),
            needed_subcommand: "run",
        })?;
    let text = std::fs::read_to_string(path)?;
    parse_config_with_seed(&text, options.seed)
}

fn load_manifest_dep(out_dir: &Path, needed: &'static str) -> Result<io::RunManifest> {
    io::load_manifest(out_dir).map_err(|_| Error::Dependency {
        artifact: "manifest".into(),
        needed_subcommand: needed,
    })
}

fn load_bundle_dep(
    manifest: &io::RunManifest,
    out_dir: &Path,
    cfg: &PipelineConfig,
) -> Result<crate::task::DatasetBundle> {
    let path = manifest
        .artifact_path(out_dir, ART_BUNDLE)
        .filter(|p| p.exists())
        .ok_or(Error::Dependency {
            artifact: ART_BUNDLE.into(),
            needed_subcommand: "generate-data",
        })?;
    let bundle = io::load_bundle(&path)?;
    if bundle.spec != cfg.task {
        return Err(Error::Dependency {
            artifact: "bundle (generated from a different task section)".into(),
            needed_subcommand: "generate-data",
        });
    }
    Ok(bundle)
}

fn load_gt_dep(
    manifest: &io::RunManifest,
    out_dir: &Path,
    cfg: &PipelineConfig,
) -> Result<pipeline::GroundTruthPair> {
    let load_role = |role: RoleTag, spec: &crate::scorer::ScorerSpec| {
        let kind = checkpoint_kind(role.as_str());
        let path = manifest
            .artifact_path(out_dir, &kind)
            .filter(|p| p.exists())
            .ok_or(Error::Dependency {
                artifact: kind.clone(),
                needed_subcommand: "train-gt",
            })?;
        let model = io::load_checkpoint(&path)?;
        if model.spec() != spec
            || model.feature_dim() != cfg.task.feature_dim
            || model.role() != role
        {
            return Err(Error::Dependency {
                artifact: format!("{kind} (trained from a different config)"),
                needed_subcommand: "train-gt",
            });
        }
        Ok(model)
    };
    Ok(pipeline::GroundTruthPair {
        weak: load_role(RoleTag::WeakGt, &cfg.weak_spec)?,
        strong: load_role(RoleTag::StrongGt, &cfg.strong_spec)?,
        saturation_count: 0,
    })
}

/// Persists the normalized config echo and refreshes the manifest entry.
fn write_config_echo(
    manifest: &mut io::RunManifest,
    out_dir: &Path,
    cfg: &PipelineConfig,
) -> Result<()> {
    io::atomic_write(
        &out_dir.join("config.normalized.toml"),
        cfg.to_normalized_toml().as_bytes(),
    )?;
    manifest.insert(ART_CONFIG, "config.normalized.toml");
    Ok(())
}

fn save_run_outputs(
    manifest: &mut io::RunManifest,
    out_dir: &Path,
    students: &pipeline::StudentPair,
    intermediates: &[crate::scorer::ScorerModel],
    report: &ExperimentReport,
) -> Result<()> {
    let reference_role = RoleTag::W2sNoConflict.as_str();
    io::save_checkpoint(
        &out_dir.join(checkpoint_rel(reference_role)),
        &students.reference,
    )?;
    manifest.insert(
        &checkpoint_kind(reference_role),
        &checkpoint_rel(reference_role),
    );
    if let Some(conflicted) = &students.conflicted {
        let role = RoleTag::W2sConflict.as_str();
        io::save_checkpoint(&out_dir.join(checkpoint_rel(role)), conflicted)?;
        manifest.insert(&checkpoint_kind(role), &checkpoint_rel(role));
    }
    for (i, intermediate) in intermediates.iter().enumerate() {
        let role = format!("intermediate_{i}");
        io::save_checkpoint(&out_dir.join(checkpoint_rel(&role)), intermediate)?;
        manifest.insert(&checkpoint_kind(&role), &checkpoint_rel(&role));
    }
    io::save_report(&out_dir.join("report.json"), report)?;
    manifest.insert(ART_REPORT, "report.json");
    io::save_dumps_csv(
        &out_dir.join("dumps/confidences.csv"),
        &report.confidence_dumps,
    )?;
    manifest.insert(ART_DUMPS, "dumps/confidences.csv");
    Ok(())
}

fn print_report_summary(report: &ExperimentReport) {
    let fmt = |v: Option<f64>| v.map_or("undefined".to_string(), |d| format!("{d:.4}"));
    println!(
        "deception_score={} absolute_deception_score={} area_ratio={:.4} flips={}",
        fmt(report.deception_score),
        fmt(report.absolute_deception_score),
        report.area_ratio,
        report.tax_distribution.total()
    );
    for (role, acc) in &report.accuracies {
        println!("accuracy {role}={acc:.4}");
    }
}

fn generate_data(options: &Options) -> Result<()> {
    let cfg = load_required_config(options)?;
    let bundle = generate_bundle(&cfg.task)?;
    let mut manifest = io::load_or_new_manifest(&options.out, &cfg.fingerprint());
    io::save_bundle(&options.out.join("bundle.jsonl"), &bundle)?;
    manifest.insert(ART_BUNDLE, "bundle.jsonl");
    write_config_echo(&mut manifest, &options.out, &cfg)?;
    io::save_manifest(&options.out, &manifest)?;
    println!(
        "generated splits: d_gt={} d_weak_pool={} d_test={} d_helpful={}",
        bundle.d_gt.len(),
        bundle.d_weak_pool.len(),
        bundle.d_test.len(),
        bundle.d_helpful.len()
    );
    Ok(())
}

fn train_gt(options: &Options) -> Result<()> {
    let cfg = load_required_config(options)?;
    let mut manifest = load_manifest_dep(&options.out, "generate-data")?;
    let bundle = load_bundle_dep(&manifest, &options.out, &cfg)?;
    let gt = pipeline::run_ground_truth(&cfg, &bundle)?;
    for (role, model) in [(RoleTag::WeakGt, &gt.weak), (RoleTag::StrongGt, &gt.strong)] {
        let role = role.as_str();
        io::save_checkpoint(&options.out.join(checkpoint_rel(role)), model)?;
        manifest.insert(&checkpoint_kind(role), &checkpoint_rel(role));
    }
    write_config_echo(&mut manifest, &options.out, &cfg)?;
    io::save_manifest(&options.out, &manifest)?;
    println!(
        "trained ground-truth models: weak={} params, strong={} params",
        gt.weak.param_count(),
        gt.strong.param_count()
    );
    Ok(())
}

fn run(options: &Options) -> Result<()> {
    let cfg = load_required_config(options)?;
    let mut manifest = load_manifest_dep(&options.out, "generate-data")?;
    let bundle = load_bundle_dep(&manifest, &options.out, &cfg)?;
    let gt = load_gt_dep(&manifest, &options.out, &cfg)?;

    let labels = pipeline::relabel_weak(&gt.weak, &bundle.d_weak_pool)?;
    io::save_labels_csv(&options.out.join("dumps/weak_labels.csv"), &labels)?;
    manifest.insert(ART_LABELS, "dumps/weak_labels.csv");

    let outcome = pipeline::run_weak_to_strong(&cfg, &bundle, &gt)?;
    save_run_outputs(
        &mut manifest,
        &options.out,
        &outcome.students,
        &[],
        &outcome.report,
    )?;
    write_config_echo(&mut manifest, &options.out, &cfg)?;
    io::save_manifest(&options.out, &manifest)?;
    print_report_summary(&outcome.report);
    Ok(())
}

fn bootstrap(options: &Options) -> Result<()> {
    let cfg = load_required_config(options)?;
    if cfg.intermediate_specs.is_empty() {
        return Err(Error::Config(vec![FieldError {
            field: "intermediate".into(),
            message: "bootstrap requires at least one [[intermediate]] section".into(),
        }]));
    }
    let mut manifest = load_manifest_dep(&options.out, "generate-data")?;
    let bundle = load_bundle_dep(&manifest, &options.out, &cfg)?;
    let gt = load_gt_dep(&manifest, &options.out, &cfg)?;
    let outcome = pipeline::run_bootstrap(&cfg, &bundle, &gt)?;
    save_run_outputs(
        &mut manifest,
        &options.out,
        &outcome.students,
        &outcome.intermediates,
        &outcome.report,
    )?;
    write_config_echo(&mut manifest, &options.out, &cfg)?;
    io::save_manifest(&options.out, &manifest)?;
    print_report_summary(&outcome.report);
    Ok(())
}

/// Compact sweep summary persisted next to the per-point reports.
#[derive(Debug, Serialize)]
struct SweepSummaryFile {
    format: &'static str,
    version: u32,
    trend: pipeline::TrendSummary,
    points: Vec<SweepSummaryPoint>,
}

#[derive(Debug, Serialize)]
struct SweepSummaryPoint {
    label: String,
    axis_value: f64,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    deception_score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    report_path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn sweep(options: &Options) -> Result<()> {
    let cfg = load_required_config(options)?;
    if cfg.sweep.is_none() {
        return Err(Error::Config(vec![FieldError {
            field: "sweep".into(),
            message: "sweep requires a [sweep] section".into(),
        }]));
    }
    let mut manifest = load_manifest_dep(&options.out, "generate-data")?;
    let bundle = load_bundle_dep(&manifest, &options.out, &cfg)?;
    let outcome = pipeline::run_sweep(&cfg, &bundle, options.jobs.max(1))?;

    let mut summary_points = Vec::new();
    for (idx, point) in outcome.points.iter().enumerate() {
        match &point.outcome {
            Ok(report) => {
                let rel = format!("sweep/point_{idx:03}/report.json");
                io::save_report(&options.out.join(&rel), report)?;
                manifest.insert(&format!("report/sweep/{idx:03}"), &rel);
                summary_points.push(SweepSummaryPoint {
                    label: point.label.clone(),
                    axis_value: point.axis_value,
                    status: "ok",
                    deception_score: report.deception_score,
                    report_path: Some(rel),
                    error: None,
                });
            }
            Err(message) => summary_points.push(SweepSummaryPoint {
                label: point.label.clone(),
                axis_value: point.axis_value,
                status: "error",
                deception_score: None,
                report_path: None,
                error: Some(message.clone()),
            }),
        }
    }
    let summary = SweepSummaryFile {
        format: "w2s-sweep-summary",
        version: 1,
        trend: outcome.trend.clone(),
        points: summary_points,
    };
    io::atomic_write(
        &options.out.join("sweep/summary.json"),
        &serde_json::to_vec_pretty(&summary).expect("summary serializes"),
    )?;
    manifest.insert("sweep/summary", "sweep/summary.json");
    write_config_echo(&mut manifest, &options.out, &cfg)?;
    io::save_manifest(&options.out, &manifest)?;

    for point in &outcome.points {
        let ds = point
            .outcome
            .as_ref()
            .map(|r| {
                r.deception_score
                    .map_or("undefined".to_string(), |d| format!("{d:.4}"))
            })
            .unwrap_or_else(|e| format!("error: {e}"));
        println!("{} deception_score={ds}", point.label);
    }
    println!(
        "trend: spearman={:?} over {} points",
        outcome.trend.spearman_axis_vs_ds, outcome.trend.points_with_ds
    );
    Ok(())
}

fn analyze(options: &Options) -> Result<()> {
    let cfg = load_config_or_stored(options)?;
    let manifest = load_manifest_dep(&options.out, "run")?;
    let report_path = manifest
        .artifact_path(&options.out, ART_REPORT)
        .filter(|p| p.exists())
        .ok_or(Error::Dependency {
            artifact: ART_REPORT.into(),
            needed_subcommand: "run",
        })?;
    let report = io::load_report(&report_path)?;
    let recomputed = pipeline::recompute_report_at_threshold(
        &report,
        cfg.threshold,
        cfg.with_threshold(cfg.threshold).fingerprint(),
    )?;
    let mut manifest = manifest;
    io::save_report(&options.out.join("analysis_report.json"), &recomputed)?;
    manifest.insert(ART_ANALYSIS, "analysis_report.json");
    io::save_manifest(&options.out, &manifest)?;
    println!("recomputed at threshold {}", cfg.threshold);
    print_report_summary(&recomputed);
    Ok(())
}

/// Collects every report under the output directory.
fn collect_reports(dir: &Path, reports: &mut Vec<ExperimentReport>) {
    let Ok(entries) = std::fs::read_dir(dir) else {
        return;
    };
    let mut paths: Vec<PathBuf> = entries.flatten().map(|e| e.path()).collect();
    paths.sort();
    for path in paths {
        if path.is_dir() {
            collect_reports(&path, reports);
        } else if path.extension().is_some_and(|e| e == "json") {
            if let Ok(report) = io::load_report(&path) {
                reports.push(report);
            }
        }
    }
}

fn export_plots(options: &Options) -> Result<()> {
    let mut reports = Vec::new();
    collect_reports(&options.out, &mut reports);
    if reports.is_empty() {
        return Err(Error::Dependency {
            artifact: "reports".into(),
            needed_subcommand: "run",
        });
    }
    reports.sort_by(|a, b| {
        (a.meta.strong_params, &a.meta.conflict, a.meta.seed).cmp(&(
            b.meta.strong_params,
            &b.meta.conflict,
            b.meta.seed,
        ))
    });

    // Long form: one row per report.
    let mut runs = String::from(
        "fingerprint,scenario,conflict,base_po_loss,alpha,threshold,seed,weak_params,\
         strong_params,deception_score,absolute_deception_score,area_ratio\n",
    );
    let opt = |v: Option<f64>| v.map_or(String::new(), |d| d.to_string());
    for r in &reports {
        runs.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            &r.config_fingerprint[..16.min(r.config_fingerprint.len())],
            r.meta.scenario,
            r.meta.conflict,
            r.meta.base_po_loss,
            r.meta.alpha,
            r.meta.threshold,
            r.meta.seed,
            r.meta.weak_params,
            r.meta.strong_params,
            opt(r.deception_score),
            opt(r.absolute_deception_score),
            r.area_ratio
        ));
    }
    io::atomic_write(&options.out.join("plots/runs.csv"), runs.as_bytes())?;

    // Wide form for bar charts: x = strong capacity, one deception-score
    // series per conflict mode, averaged over reports in each cell.
    let mut cells: BTreeMap<(usize, String), Vec<f64>> = BTreeMap::new();
    let mut modes: Vec<String> = Vec::new();
    for r in &reports {
        if let Some(ds) = r.deception_score {
            cells
                .entry((r.meta.strong_params, r.meta.conflict.clone()))
                .or_default()
                .push(ds);
            if !modes.contains(&r.meta.conflict) {
                modes.push(r.meta.conflict.clone());
            }
        }
    }
    modes.sort();
    let capacities: Vec<usize> = {
        let mut c: Vec<usize> = cells.keys().map(|(p, _)| *p).collect();
        c.sort_unstable();
        c.dedup();
        c
    };
    let mut wide = String::from("strong_params");
    for mode in &modes {
        wide.push(',');
        wide.push_str(mode);
    }
    wide.push('\n');
    for capacity in capacities {
        wide.push_str(&capacity.to_string());
        for mode in &modes {
            wide.push(',');
            if let Some(values) = cells.get(&(capacity, mode.clone())) {
                let mean = values.iter().sum::<f64>() / values.len() as f64;
                wide.push_str(&mean.to_string());
            }
        }
        wide.push('\n');
    }
    io::atomic_write(
        &options.out.join("plots/ds_by_capacity.csv"),
        wide.as_bytes(),
    )?;

    // Manifest updated last.
    let mut manifest = io::load_or_new_manifest(
        &options.out,
        &reports
            .first()
            .map(|r| r.config_fingerprint.clone())
            .unwrap_or_default(),
    );
    manifest.insert("plots/runs", "plots/runs.csv");
    manifest.insert("plots/ds_by_capacity", "plots/ds_by_capacity.csv");
    io::save_manifest(&options.out, &manifest)?;
    println!(
        "exported {} reports to plots/runs.csv and plots/ds_by_capacity.csv",
        reports.len()
    );
    Ok(())
}
