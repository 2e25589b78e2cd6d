//! Artifact persistence: dataset bundles, model checkpoints, reports,
//! confidence dumps, and the run manifest.
//!
//! Every format is versioned and self-describing. Floating-point values
//! round-trip bit-exactly: JSON emission uses shortest-round-trip formatting
//! and checkpoints carry raw little-endian parameter bytes in base64. All
//! writes are atomic (write-temp-then-rename) and the manifest is written
//! last.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::analysis::{ConfidenceRow, ExperimentReport, Region};
use crate::error::{Error, Result};
use crate::pipeline::TeacherLabel;
use crate::scorer::{RoleTag, ScorerModel, ScorerSpec};
use crate::task::{DatasetBundle, PreferenceSample, Split, TaskSpec};

pub const BUNDLE_FORMAT: &str = "w2s-bundle";
pub const BUNDLE_VERSION: u32 = 1;
pub const CHECKPOINT_FORMAT: &str = "w2s-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;
pub const MANIFEST_FORMAT: &str = "w2s-manifest";
pub const MANIFEST_VERSION: u32 = 1;

/// Writes `bytes` to `path` atomically via a temp file in the same
/// directory.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let tmp = path.with_extension("tmp-write");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn format_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.display().to_string(),
        message: message.into(),
    }
}

// ---------------------------------------------------------------------------
// Dataset bundle: JSON-lines text, header then one record per sample
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct BundleHeader {
    format: String,
    version: u32,
    spec: TaskSpec,
}

#[derive(Serialize, Deserialize)]
struct BundleRecord {
    split: Split,
    id: u64,
    z_chosen: Vec<f64>,
    z_rejected: Vec<f64>,
    gt_order_correct: bool,
    utility_gap: f64,
    tier: crate::task::Tier,
}

pub fn save_bundle(path: &Path, bundle: &DatasetBundle) -> Result<()> {
    let mut out = String::new();
    let header = BundleHeader {
        format: BUNDLE_FORMAT.into(),
        version: BUNDLE_VERSION,
        spec: bundle.spec.clone(),
    };
    out.push_str(&serde_json::to_string(&header).expect("header serializes"));
    out.push('\n');
    for (split, sample) in bundle.iter_all() {
        let record = BundleRecord {
            split,
            id: sample.id,
            z_chosen: sample.z_chosen.clone(),
            z_rejected: sample.z_rejected.clone(),
            gt_order_correct: sample.gt_order_correct,
            utility_gap: sample.utility_gap,
            tier: sample.tier,
        };
        out.push_str(&serde_json::to_string(&record).expect("record serializes"));
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

pub fn load_bundle(path: &Path) -> Result<DatasetBundle> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| format_error(path, "empty bundle file"))?;
    let header: BundleHeader = serde_json::from_str(header_line)
        .map_err(|e| format_error(path, format!("bad bundle header: {e}")))?;
    if header.format != BUNDLE_FORMAT || header.version != BUNDLE_VERSION {
        return Err(format_error(
            path,
            format!(
                "unsupported bundle format {}/{}",
                header.format, header.version
            ),
        ));
    }
    let mut bundle = DatasetBundle {
        spec: header.spec,
        d_gt: Vec::new(),
        d_weak_pool: Vec::new(),
        d_test: Vec::new(),
        d_helpful: Vec::new(),
    };
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let record: BundleRecord = serde_json::from_str(line)
            .map_err(|e| format_error(path, format!("bad record on line {}: {e}", lineno + 2)))?;
        let sample = PreferenceSample {
            id: record.id,
            z_chosen: record.z_chosen,
            z_rejected: record.z_rejected,
            gt_order_correct: record.gt_order_correct,
            utility_gap: record.utility_gap,
            tier: record.tier,
        };
        match record.split {
            Split::DGt => bundle.d_gt.push(sample),
            Split::DWeakPool => bundle.d_weak_pool.push(sample),
            Split::DTest => bundle.d_test.push(sample),
            Split::DHelpful => bundle.d_helpful.push(sample),
        }
    }
    Ok(bundle)
}

// ---------------------------------------------------------------------------
// Model checkpoints: spec header plus base64 little-endian parameters
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    spec: ScorerSpec,
    feature_dim: usize,
    role: RoleTag,
    param_count: usize,
    params_b64: String,
    fingerprint: String,
}

pub fn save_checkpoint(path: &Path, model: &ScorerModel) -> Result<()> {
    let mut bytes = Vec::with_capacity(model.param_count() * 8);
    for p in model.params() {
        bytes.extend_from_slice(&p.to_le_bytes());
    }
    let checkpoint = Checkpoint {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        spec: model.spec().clone(),
        feature_dim: model.feature_dim(),
        role: model.role(),
        param_count: model.param_count(),
        params_b64: B64.encode(&bytes),
        fingerprint: model.fingerprint(),
    };
    let json = serde_json::to_vec_pretty(&checkpoint).expect("checkpoint serializes");
    atomic_write(path, &json)
}

pub fn load_checkpoint(path: &Path) -> Result<ScorerModel> {
    let text = std::fs::read_to_string(path)?;
    let checkpoint: Checkpoint = serde_json::from_str(&text)
        .map_err(|e| format_error(path, format!("bad checkpoint: {e}")))?;
    if checkpoint.format != CHECKPOINT_FORMAT || checkpoint.version != CHECKPOINT_VERSION {
        return Err(format_error(
            path,
            format!(
                "unsupported checkpoint format {}/{}",
                checkpoint.format, checkpoint.version
            ),
        ));
    }
    let bytes = B64
        .decode(checkpoint.params_b64.as_bytes())
        .map_err(|e| format_error(path, format!("bad parameter encoding: {e}")))?;
    if bytes.len() != checkpoint.param_count * 8 {
        return Err(format_error(
            path,
            format!(
                "parameter payload holds {} bytes, expected {}",
                bytes.len(),
                checkpoint.param_count * 8
            ),
        ));
    }
    let params: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let model = ScorerModel::from_params(checkpoint.spec, checkpoint.feature_dim, params)
        .map_err(|e| format_error(path, e.to_string()))?;
    let model = model.restore_role(checkpoint.role);
    if model.fingerprint() != checkpoint.fingerprint {
        return Err(format_error(path, "checkpoint fingerprint mismatch"));
    }
    Ok(model)
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

pub fn save_report(path: &Path, report: &ExperimentReport) -> Result<()> {
    let json = serde_json::to_vec_pretty(report).expect("report serializes");
    atomic_write(path, &json)
}

pub fn load_report(path: &Path) -> Result<ExperimentReport> {
    let text = std::fs::read_to_string(path)?;
    let report: ExperimentReport = serde_json::from_str(&text)
        .map_err(|e| format_error(path, format!("bad report: {e}")))?;
    if report.format != crate::analysis::REPORT_FORMAT
        || report.version != crate::analysis::REPORT_VERSION
    {
        return Err(format_error(
            path,
            format!(
                "unsupported report format {}/{}",
                report.format, report.version
            ),
        ));
    }
    report
        .check_consistency()
        .map_err(|e| format_error(path, e.to_string()))?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// Confidence dumps: flat CSV for external plotting
// ---------------------------------------------------------------------------

/// Writes per-sample confidence rows as CSV. Columns after the fixed three
/// are the role names present in the rows, sorted.
pub fn save_dumps_csv(path: &Path, rows: &[ConfidenceRow]) -> Result<()> {
    let mut roles: Vec<String> = rows
        .first()
        .map(|r| r.confidences.keys().cloned().collect())
        .unwrap_or_default();
    roles.sort();
    let mut out = String::from("id,gt_order_correct,region");
    for role in &roles {
        out.push(',');
        out.push_str(role);
    }
    out.push('\n');
    for row in rows {
        out.push_str(&format!(
            "{},{},{}",
            row.id,
            row.gt_order_correct,
            row.region.as_str()
        ));
        for role in &roles {
            out.push(',');
            if let Some(v) = row.confidences.get(role) {
                out.push_str(&v.to_string());
            }
        }
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

pub fn load_dumps_csv(path: &Path) -> Result<Vec<ConfidenceRow>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| format_error(path, "empty dumps file"))?;
    let columns: Vec<&str> = header.split(',').collect();
    if columns.len() < 3 || columns[0] != "id" {
        return Err(format_error(path, "unrecognized dumps header"));
    }
    let roles = &columns[3..];
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(format_error(
                path,
                format!(
                    "line {} has {} fields, expected {}",
                    lineno + 2,
                    fields.len(),
                    columns.len()
                ),
            ));
        }
        let parse_err = |what: &str| format_error(path, format!("line {}: bad {what}", lineno + 2));
        let id: u64 = fields[0].parse().map_err(|_| parse_err("id"))?;
        let gt_order_correct: bool = fields[1].parse().map_err(|_| parse_err("flag"))?;
        let region = Region::parse(fields[2]).ok_or_else(|| parse_err("region"))?;
        let mut confidences = BTreeMap::new();
        for (role, field) in roles.iter().zip(&fields[3..]) {
            if field.is_empty() {
                continue;
            }
            let value: f64 = field.parse().map_err(|_| parse_err("confidence"))?;
            confidences.insert((*role).to_string(), value);
        }
        rows.push(ConfidenceRow {
            id,
            gt_order_correct,
            region,
            confidences,
        });
    }
    Ok(rows)
}

/// Persists teacher labels alongside the run artifacts.
pub fn save_labels_csv(path: &Path, labels: &[TeacherLabel]) -> Result<()> {
    let mut out = String::from("id,soft_target,prefers_stored\n");
    for label in labels {
        out.push_str(&format!(
            "{},{},{}\n",
            label.id, label.soft_target, label.prefers_stored
        ));
    }
    atomic_write(path, out.as_bytes())
}

// ---------------------------------------------------------------------------
// Run manifest
// ---------------------------------------------------------------------------

/// Index of every artifact a run directory holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub version: u32,
    pub config_fingerprint: String,
    pub tool_version: String,
    /// Unix epoch seconds of the last manifest write.
    pub created_at: u64,
    /// Artifact kind to path, relative to the manifest's directory.
    pub artifacts: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(config_fingerprint: String) -> Self {
        RunManifest {
            format: MANIFEST_FORMAT.into(),
            version: MANIFEST_VERSION,
            config_fingerprint,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            created_at: now_epoch_seconds(),
            artifacts: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, kind: &str, relative_path: &str) {
        self.artifacts.insert(kind.into(), relative_path.into());
    }

    pub fn artifact_path(&self, out_dir: &Path, kind: &str) -> Option<PathBuf> {
        self.artifacts.get(kind).map(|rel| out_dir.join(rel))
    }

    /// Checks that every listed artifact exists and carries a supported
    /// schema version.
    pub fn validate(&self, out_dir: &Path) -> Result<()> {
        for (kind, rel) in &self.artifacts {
            let path = out_dir.join(rel);
            if !path.exists() {
                return Err(format_error(
                    &path,
                    format!("artifact {kind} listed in manifest but missing on disk"),
                ));
            }
            match kind.split('/').next().unwrap_or("") {
                "bundle" => {
                    load_bundle(&path)?;
                }
                "checkpoint" => {
                    load_checkpoint(&path)?;
                }
                "report" => {
                    load_report(&path)?;
                }
                "dumps" => {
                    load_dumps_csv(&path)?;
                }
                _ => {}
            }
        }
        Ok(())
    }
}

fn now_epoch_seconds() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn manifest_path(out_dir: &Path) -> PathBuf {
    out_dir.join("manifest.json")
}

pub fn save_manifest(out_dir: &Path, manifest: &RunManifest) -> Result<()> {
    let json = serde_json::to_vec_pretty(manifest).expect("manifest serializes");
    atomic_write(&manifest_path(out_dir), &json)
}

pub fn load_manifest(out_dir: &Path) -> Result<RunManifest> {
    let path = manifest_path(out_dir);
    let text = std::fs::read_to_string(&path)?;
    let manifest: RunManifest = serde_json::from_str(&text)
        .map_err(|e| format_error(&path, format!("bad manifest: {e}")))?;
    if manifest.format != MANIFEST_FORMAT || manifest.version != MANIFEST_VERSION {
        return Err(format_error(
            &path,
            format!(
                "unsupported manifest format {}/{}",
                manifest.format, manifest.version
            ),
        ));
    }
    Ok(manifest)
}

/// Loads the manifest if present, otherwise starts a fresh one. The
/// fingerprint and write stamp are refreshed on every command.
pub fn load_or_new_manifest(out_dir: &Path, fingerprint: &str) -> RunManifest {
    match load_manifest(out_dir) {
        Ok(mut manifest) => {
            manifest.config_fingerprint = fingerprint.to_string();
            manifest.created_at = now_epoch_seconds();
            manifest.tool_version = env!("CARGO_PKG_VERSION").into();
            manifest
        }
        Err(_) => RunManifest::new(fingerprint.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorer::{ScorerMode, ScorerSpec};
    use crate::task::{generate_bundle, TaskSpec};

    fn tmp_dir() -> tempfile::TempDir {
        tempfile::tempdir().expect("tempdir")
    }

    #[test]
    fn bundle_roundtrips_bit_exactly() {
        let spec = TaskSpec {
            split_sizes: [40, 40, 40, 40],
            label_noise: 0.1,
            seed: 99,
            ..TaskSpec::default()
        };
        let bundle = generate_bundle(&spec).unwrap();
        let dir = tmp_dir();
        let path = dir.path().join("bundle.jsonl");
        save_bundle(&path, &bundle).unwrap();
        let loaded = load_bundle(&path).unwrap();
        assert_eq!(bundle, loaded);
        // Serialize again: identical bytes.
        let path2 = dir.path().join("bundle2.jsonl");
        save_bundle(&path2, &loaded).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn checkpoint_roundtrips_bit_exactly() {
        let model = ScorerModel::new(
            ScorerSpec::new(ScorerMode::PolicyScorer, vec![7, 3], 4),
            5,
        )
        .with_role(crate::scorer::RoleTag::StrongGt)
        .unwrap();
        let dir = tmp_dir();
        let path = dir.path().join("model.json");
        save_checkpoint(&path, &model).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(model, loaded);
        assert_eq!(loaded.role(), crate::scorer::RoleTag::StrongGt);
    }

    #[test]
    fn checkpoint_rejects_corrupted_payloads() {
        let model = ScorerModel::new(ScorerSpec::new(ScorerMode::RewardHead, vec![], 0), 3);
        let dir = tmp_dir();
        let path = dir.path().join("model.json");
        save_checkpoint(&path, &model).unwrap();
        let mut text = std::fs::read_to_string(&path).unwrap();
        text = text.replace("\"version\": 1", "\"version\": 9");
        std::fs::write(&path, text).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn dumps_csv_roundtrips() {
        let rows: Vec<ConfidenceRow> = (0..20)
            .map(|i| ConfidenceRow {
                id: i,
                gt_order_correct: i % 3 != 0,
                region: Region::ALL[(i % 4) as usize],
                confidences: [
                    ("strong_gt".to_string(), 0.1 + i as f64 * 0.04321),
                    ("weak_gt".to_string(), 1.0 / (i as f64 + 2.0)),
                    ("w2s_no_conflict".to_string(), 0.5),
                ]
                .into_iter()
                .collect(),
            })
            .collect();
        let dir = tmp_dir();
        let path = dir.path().join("dumps.csv");
        save_dumps_csv(&path, &rows).unwrap();
        let loaded = load_dumps_csv(&path).unwrap();
        assert_eq!(rows, loaded);
    }

    #[test]
    fn manifest_validates_listed_artifacts() {
        let dir = tmp_dir();
        let spec = TaskSpec {
            split_sizes: [8, 8, 8, 8],
            seed: 5,
            ..TaskSpec::default()
        };
        let bundle = generate_bundle(&spec).unwrap();
        save_bundle(&dir.path().join("bundle.jsonl"), &bundle).unwrap();

        let mut manifest = RunManifest::new("fp".into());
        manifest.insert("bundle", "bundle.jsonl");
        save_manifest(dir.path(), &manifest).unwrap();
        let loaded = load_manifest(dir.path()).unwrap();
        loaded.validate(dir.path()).unwrap();

        // A listed-but-missing artifact fails validation.
        let mut broken = loaded.clone();
        broken.insert("checkpoint/weak_gt", "checkpoints/weak_gt.json");
        assert!(broken.validate(dir.path()).is_err());
    }

    #[test]
    fn atomic_write_replaces_and_cleans_up() {
        let dir = tmp_dir();
        let path = dir.path().join("nested/dir/file.txt");
        atomic_write(&path, b"one").unwrap();
        atomic_write(&path, b"two").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"two");
        let entries: Vec<_> = std::fs::read_dir(path.parent().unwrap())
            .unwrap()
            .collect();
        assert_eq!(entries.len(), 1);
    }
}
