//! End-to-end experiment protocols.
//!
//! The standard run: train weak and strong ground-truth models on the
//! ground-truth split, let the weak teacher relabel the held-out pool, train
//! a no-conflict reference student and a conflicted student from identical
//! initializations and data order, then partition the test set by the
//! ground-truth models' confidences and measure where the conflict tax
//! landed.
//!
//! Bootstrapping inserts intermediate teachers between the weak model and
//! the strong student; sweeps repeat runs along one axis. Threshold sweeps
//! never retrain: partitions are recomputed from the cached confidence
//! dumps inside the base report.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    self, ConfidenceRow, ExperimentReport, RunMeta, REPORT_FORMAT, REPORT_VERSION,
};
use crate::config::{PipelineConfig, SweepAxis};
use crate::error::{Error, Result};
use crate::objective::ConflictMode;
use crate::scorer::{RoleTag, ScorerModel};
use crate::task::{DatasetBundle, PreferenceSample};
use crate::train::{train, TrainRow, TrainSet};

/// The two ground-truth-trained endpoints of the capability ladder.
#[derive(Debug)]
pub struct GroundTruthPair {
    pub weak: ScorerModel,
    pub strong: ScorerModel,
    pub saturation_count: u64,
}

/// A teacher's prediction on one sample: the soft confidence toward the
/// stored order and the implied hard order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TeacherLabel {
    pub id: u64,
    /// Teacher confidence toward the stored pair order.
    pub soft_target: f64,
    /// Hard order: true when the teacher prefers the stored chosen side
    /// (confidence >= 0.5, ties toward chosen).
    pub prefers_stored: bool,
}

/// Both weak-to-strong students of one run plus training diagnostics.
#[derive(Debug)]
pub struct StudentPair {
    pub reference: ScorerModel,
    pub conflicted: Option<ScorerModel>,
    pub saturation_count: u64,
}

/// Outcome of a full weak-to-strong run.
#[derive(Debug)]
pub struct W2sOutcome {
    pub students: StudentPair,
    pub report: ExperimentReport,
}

/// Outcome of a bootstrapping chain.
#[derive(Debug)]
pub struct BootstrapOutcome {
    pub intermediates: Vec<ScorerModel>,
    pub students: StudentPair,
    pub report: ExperimentReport,
}

/// Trains the weak teacher and the strong ceiling model on the ground-truth
/// split under the no-conflict objective (with the SFT pre-stage in the
/// preference scenario).
pub fn run_ground_truth(cfg: &PipelineConfig, bundle: &DatasetBundle) -> Result<GroundTruthPair> {
    if bundle.d_gt.is_empty() {
        return Err(Error::EmptyInput("ground-truth split is empty".into()));
    }
    let objective = cfg.objective.without_conflict();
    let rows = ground_truth_rows(&bundle.d_gt);
    let data = TrainSet {
        feature_dim: cfg.task.feature_dim,
        rows,
    };
    let weak_init = ScorerModel::new(cfg.weak_spec.clone(), cfg.task.feature_dim);
    let strong_init = ScorerModel::new(cfg.strong_spec.clone(), cfg.task.feature_dim);
    let weak_out = train(&weak_init, &objective, &data, &cfg.schedule)?;
    let strong_out = train(&strong_init, &objective, &data, &cfg.schedule)?;
    Ok(GroundTruthPair {
        weak: weak_out.model.with_role(RoleTag::WeakGt)?,
        strong: strong_out.model.with_role(RoleTag::StrongGt)?,
        saturation_count: weak_out.saturation_count + strong_out.saturation_count,
    })
}

/// Ground-truth supervision: target 1.0 toward the stored order.
fn ground_truth_rows(samples: &[PreferenceSample]) -> Vec<TrainRow> {
    samples
        .iter()
        .map(|s| TrainRow {
            id: s.id,
            z_chosen: s.z_chosen.clone(),
            z_rejected: s.z_rejected.clone(),
            soft_target: 1.0,
            teacher_prefers_stored: true,
            is_helpful: false,
            weight: 1.0,
        })
        .collect()
}

/// Lets a trained teacher predict on a held-out set.
///
/// The soft confidence feeds reward-modeling supervision; the hard order is
/// all the preference scenario sees.
pub fn relabel_weak(
    teacher: &ScorerModel,
    samples: &[PreferenceSample],
) -> Result<Vec<TeacherLabel>> {
    samples
        .iter()
        .map(|s| {
            let conf = teacher.confidence(s)?;
            Ok(TeacherLabel {
                id: s.id,
                soft_target: conf,
                prefers_stored: conf >= 0.5,
            })
        })
        .collect()
}

/// Keeps only samples whose teacher confidence toward the correct label
/// reaches `threshold`.
pub fn filter_high_confidence(
    samples: &[PreferenceSample],
    labels: &[TeacherLabel],
    threshold: f64,
) -> Result<(Vec<PreferenceSample>, Vec<TeacherLabel>)> {
    if !(threshold > 0.5 && threshold < 1.0) {
        return Err(Error::RejectedConfig(format!(
            "filter threshold must be in (0.5, 1), got {threshold}"
        )));
    }
    if samples.len() != labels.len() {
        return Err(Error::IdMismatch("labels do not align with samples".into()));
    }
    let mut kept_samples = Vec::new();
    let mut kept_labels = Vec::new();
    for (sample, label) in samples.iter().zip(labels) {
        debug_assert_eq!(sample.id, label.id);
        let toward_correct = if sample.gt_order_correct {
            label.soft_target
        } else {
            1.0 - label.soft_target
        };
        if toward_correct >= threshold {
            kept_samples.push(sample.clone());
            kept_labels.push(*label);
        }
    }
    if kept_samples.is_empty() {
        return Err(Error::Pipeline(format!(
            "high-confidence filter at {threshold} removed all {} samples",
            samples.len()
        )));
    }
    Ok((kept_samples, kept_labels))
}

/// Supervision rows for a student: teacher-labeled harmless samples plus,
/// under implicit conflict, the helpful split. With two sources, per-row
/// weights are inversely proportional to source size so the batch-mean loss
/// estimates the sum of the two per-source means.
fn student_rows(
    samples: &[PreferenceSample],
    labels: &[TeacherLabel],
    helpful: Option<&[PreferenceSample]>,
) -> Vec<TrainRow> {
    let n_harmless = samples.len();
    let n_helpful = helpful.map_or(0, |h| h.len());
    let total = n_harmless + n_helpful;
    let (w_harmless, w_helpful) = if n_helpful == 0 {
        (1.0, 1.0)
    } else {
        (
            total as f64 / n_harmless as f64,
            total as f64 / n_helpful as f64,
        )
    };
    let mut rows: Vec<TrainRow> = samples
        .iter()
        .zip(labels)
        .map(|(s, label)| TrainRow {
            id: s.id,
            z_chosen: s.z_chosen.clone(),
            z_rejected: s.z_rejected.clone(),
            soft_target: label.soft_target,
            teacher_prefers_stored: label.prefers_stored,
            is_helpful: false,
            weight: w_harmless,
        })
        .collect();
    if let Some(helpful) = helpful {
        rows.extend(helpful.iter().map(|s| TrainRow {
            id: s.id,
            z_chosen: s.z_chosen.clone(),
            z_rejected: s.z_rejected.clone(),
            soft_target: 1.0,
            teacher_prefers_stored: true,
            is_helpful: true,
            weight: w_helpful,
        }));
    }
    rows
}

/// Trains the no-conflict reference and, when the objective carries a
/// conflict, the conflicted student from the identical initialization and
/// shuffle seed. Applies the high-confidence filter and helpful truncation
/// when configured.
fn train_student_pair(
    cfg: &PipelineConfig,
    samples: &[PreferenceSample],
    labels: &[TeacherLabel],
    bundle: &DatasetBundle,
) -> Result<StudentPair> {
    let (samples, labels): (Vec<PreferenceSample>, Vec<TeacherLabel>) =
        match cfg.filter_high_confidence {
            Some(threshold) => filter_high_confidence(samples, labels, threshold)?,
            None => (samples.to_vec(), labels.to_vec()),
        };

    let feature_dim = cfg.task.feature_dim;
    let init = ScorerModel::new(cfg.strong_spec.clone(), feature_dim);

    let reference_rows = TrainSet {
        feature_dim,
        rows: student_rows(&samples, &labels, None),
    };
    let reference_out = train(
        &init,
        &cfg.objective.without_conflict(),
        &reference_rows,
        &cfg.schedule,
    )?;
    let mut saturation = reference_out.saturation_count;
    let reference = reference_out.model.with_role(RoleTag::W2sNoConflict)?;

    let conflicted = match cfg.objective.conflict {
        ConflictMode::None => None,
        conflict => {
            let helpful_slice: Option<&[PreferenceSample]> = if conflict == ConflictMode::Implicit
            {
                // The filter keeps the helpful set the same size as the
                // remaining high-confidence weak samples.
                let take = if cfg.filter_high_confidence.is_some() {
                    samples.len().min(bundle.d_helpful.len())
                } else {
                    bundle.d_helpful.len()
                };
                if take == 0 {
                    return Err(Error::Pipeline(
                        "implicit conflict requires a non-empty helpful split".into(),
                    ));
                }
                Some(&bundle.d_helpful[..take])
            } else {
                None
            };
            let conflicted_rows = TrainSet {
                feature_dim,
                rows: student_rows(&samples, &labels, helpful_slice),
            };
            let out = train(&init, &cfg.objective, &conflicted_rows, &cfg.schedule)?;
            saturation += out.saturation_count;
            Some(out.model.with_role(RoleTag::W2sConflict)?)
        }
    };

    Ok(StudentPair {
        reference,
        conflicted,
        saturation_count: saturation,
    })
}

/// The full weak-to-strong protocol against a prepared ground-truth pair.
pub fn run_weak_to_strong(
    cfg: &PipelineConfig,
    bundle: &DatasetBundle,
    gt: &GroundTruthPair,
) -> Result<W2sOutcome> {
    let labels = relabel_weak(&gt.weak, &bundle.d_weak_pool)?;
    let students = train_student_pair(cfg, &bundle.d_weak_pool, &labels, bundle)?;
    let report = build_report(cfg, bundle, gt, &students, &[])?;
    Ok(W2sOutcome { students, report })
}

/// Bootstrapping: the weak teacher supervises a chain of intermediate
/// models, and only the final stage (training the strong student) carries
/// the conflicting objective. Relabel sources alternate between the held-out
/// pool and the ground-truth split, so a single intermediate relabels the
/// ground-truth prompts for the final stage.
///
/// An intermediate spec equal to the weak spec is the degenerate
/// direct-supervision rung: the chain collapses to the direct pipeline
/// bit-for-bit (the weak teacher itself relabels the held-out pool).
pub fn run_bootstrap(
    cfg: &PipelineConfig,
    bundle: &DatasetBundle,
    gt: &GroundTruthPair,
) -> Result<BootstrapOutcome> {
    if cfg.intermediate_specs.is_empty() {
        return Err(Error::RejectedConfig(
            "bootstrap requires at least one intermediate spec".into(),
        ));
    }
    let feature_dim = cfg.task.feature_dim;
    let no_conflict = cfg.objective.without_conflict();

    let mut on_weak_pool = true;
    let mut teacher_samples: &[PreferenceSample] = &bundle.d_weak_pool;
    let mut labels = relabel_weak(&gt.weak, teacher_samples)?;
    let mut intermediates = Vec::new();
    let mut saturation = 0u64;

    for spec in &cfg.intermediate_specs {
        if spec == &cfg.weak_spec {
            // Degenerate rung: the weak teacher supervises the student
            // directly; the relabel source stays the held-out pool.
            continue;
        }
        let rows = TrainSet {
            feature_dim,
            rows: student_rows(teacher_samples, &labels, None),
        };
        let init = ScorerModel::new(spec.clone(), feature_dim);
        let out = train(&init, &no_conflict, &rows, &cfg.schedule)?;
        saturation += out.saturation_count;
        let intermediate = out.model.with_role(RoleTag::Intermediate)?;

        on_weak_pool = !on_weak_pool;
        teacher_samples = if on_weak_pool {
            &bundle.d_weak_pool
        } else {
            &bundle.d_gt
        };
        labels = relabel_weak(&intermediate, teacher_samples)?;
        intermediates.push(intermediate);
    }

    let students = train_student_pair(cfg, teacher_samples, &labels, bundle)?;
    let extra: Vec<(String, &ScorerModel)> = intermediates
        .iter()
        .enumerate()
        .map(|(i, m)| (format!("intermediate_{i}"), m))
        .collect();
    let mut report = build_report(cfg, bundle, gt, &students, &extra)?;
    report.saturation_count += saturation;
    Ok(BootstrapOutcome {
        intermediates,
        students,
        report,
    })
}

/// Confidences toward the correct label for one model over a dataset.
fn toward_correct(model: &ScorerModel, data: &[PreferenceSample]) -> Result<Vec<f64>> {
    data.iter()
        .map(|s| model.confidence_toward_correct(s))
        .collect()
}

/// Assembles the experiment report: accuracies, partition, deception
/// metrics, and the per-sample confidence dumps every later re-analysis
/// feeds on.
fn build_report(
    cfg: &PipelineConfig,
    bundle: &DatasetBundle,
    gt: &GroundTruthPair,
    students: &StudentPair,
    extra_models: &[(String, &ScorerModel)],
) -> Result<ExperimentReport> {
    let data = &bundle.d_test;
    if data.is_empty() {
        return Err(Error::EmptyInput("test split is empty".into()));
    }
    let part = analysis::partition(&gt.weak, &gt.strong, data, cfg.threshold)?;

    let mut columns: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    columns.insert(
        RoleTag::WeakGt.as_str().into(),
        toward_correct(&gt.weak, data)?,
    );
    columns.insert(
        RoleTag::StrongGt.as_str().into(),
        toward_correct(&gt.strong, data)?,
    );
    columns.insert(
        RoleTag::W2sNoConflict.as_str().into(),
        toward_correct(&students.reference, data)?,
    );
    if let Some(conflicted) = &students.conflicted {
        columns.insert(
            RoleTag::W2sConflict.as_str().into(),
            toward_correct(conflicted, data)?,
        );
    }
    for (name, model) in extra_models {
        columns.insert(name.clone(), toward_correct(model, data)?);
    }

    let mut accuracies = BTreeMap::new();
    for (name, col) in &columns {
        accuracies.insert(name.clone(), analysis::accuracy_from_confidences(col)?);
    }

    let ids: Vec<u64> = data.iter().map(|s| s.id).collect();
    let reference_col = &columns[RoleTag::W2sNoConflict.as_str()];
    let conflicted_col = columns.get(RoleTag::W2sConflict.as_str());

    let tax = match conflicted_col {
        Some(conflicted_col) => analysis::tax_distribution_from_confidences(
            &part,
            &ids,
            reference_col,
            conflicted_col,
        )?,
        None => Default::default(),
    };
    let deception_score = analysis::deception_score_from_counts(&tax);

    // Absolute deception score: the strong ground-truth model as reference,
    // the conflicted student (or the no-conflict student when no conflict
    // was trained) as the evaluated model. Same operation, different
    // reference column.
    let strong_col = &columns[RoleTag::StrongGt.as_str()];
    let evaluated_col = conflicted_col.unwrap_or(reference_col);
    let absolute_tax =
        analysis::tax_distribution_from_confidences(&part, &ids, strong_col, evaluated_col)?;
    let absolute_deception_score = analysis::deception_score_from_counts(&absolute_tax);

    let confidence_dumps = data
        .iter()
        .enumerate()
        .map(|(i, s)| ConfidenceRow {
            id: s.id,
            gt_order_correct: s.gt_order_correct,
            region: part.region_of(s.id).expect("partition covers test set"),
            confidences: columns.iter().map(|(k, v)| (k.clone(), v[i])).collect(),
        })
        .collect();

    Ok(ExperimentReport {
        format: REPORT_FORMAT.into(),
        version: REPORT_VERSION,
        config_fingerprint: cfg.fingerprint(),
        meta: RunMeta {
            scenario: cfg.objective.scenario.as_str().into(),
            conflict: cfg.objective.conflict.as_str().into(),
            base_po_loss: cfg.objective.base_po_loss.as_str().into(),
            alpha: cfg.objective.alpha,
            threshold: cfg.threshold,
            seed: cfg.root_seed,
            weak_params: cfg.weak_spec.param_count(cfg.task.feature_dim),
            strong_params: cfg.strong_spec.param_count(cfg.task.feature_dim),
        },
        accuracies,
        deception_score,
        absolute_deception_score,
        area_ratio: analysis::area_ratio(&part)?,
        tax_distribution: tax,
        saturation_count: students.saturation_count + gt.saturation_count,
        confidence_dumps,
    })
}

/// Rebuilds a report's partition-dependent metrics at a new threshold from
/// its cached confidence dumps. No retraining, no model artifacts.
pub fn recompute_report_at_threshold(
    report: &ExperimentReport,
    threshold: f64,
    fingerprint: String,
) -> Result<ExperimentReport> {
    let ids: Vec<u64> = report.confidence_dumps.iter().map(|r| r.id).collect();
    let column = |name: &str| -> Result<Vec<f64>> {
        report
            .confidence_dumps
            .iter()
            .map(|r| {
                r.confidences
                    .get(name)
                    .copied()
                    .ok_or_else(|| Error::Format {
                        path: "report".into(),
                        message: format!("confidence dump missing role column {name}"),
                    })
            })
            .collect()
    };
    let weak = column(RoleTag::WeakGt.as_str())?;
    let strong = column(RoleTag::StrongGt.as_str())?;
    let reference = column(RoleTag::W2sNoConflict.as_str())?;
    let conflicted = if report
        .confidence_dumps
        .first()
        .is_some_and(|r| r.confidences.contains_key(RoleTag::W2sConflict.as_str()))
    {
        Some(column(RoleTag::W2sConflict.as_str())?)
    } else {
        None
    };

    let part = analysis::partition_from_confidences(
        &ids,
        &weak,
        &strong,
        threshold,
        (String::new(), String::new()),
    )?;
    let tax = match &conflicted {
        Some(conflicted) => {
            analysis::tax_distribution_from_confidences(&part, &ids, &reference, conflicted)?
        }
        None => Default::default(),
    };
    let evaluated = conflicted.as_ref().unwrap_or(&reference);
    let absolute_tax =
        analysis::tax_distribution_from_confidences(&part, &ids, &strong, evaluated)?;

    let confidence_dumps = report
        .confidence_dumps
        .iter()
        .map(|row| ConfidenceRow {
            region: part.region_of(row.id).expect("partition covers dumps"),
            ..row.clone()
        })
        .collect();

    Ok(ExperimentReport {
        config_fingerprint: fingerprint,
        meta: RunMeta {
            threshold,
            ..report.meta.clone()
        },
        deception_score: analysis::deception_score_from_counts(&tax),
        absolute_deception_score: analysis::deception_score_from_counts(&absolute_tax),
        area_ratio: analysis::area_ratio(&part)?,
        tax_distribution: tax,
        confidence_dumps,
        ..report.clone()
    })
}

/// One evaluated sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub label: String,
    pub axis_value: f64,
    /// The report, or the failure message for this point.
    pub outcome: std::result::Result<ExperimentReport, String>,
}

/// Rank-correlation trend over the sweep axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendSummary {
    /// Spearman correlation between axis value and deception score, absent
    /// for singleton axes or when every deception score is undefined.
    pub spearman_axis_vs_ds: Option<f64>,
    pub points_with_ds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub points: Vec<SweepPoint>,
    pub trend: TrendSummary,
}

/// Runs the configured sweep. `jobs` bounds parallel point execution; results
/// are invariant to the degree of parallelism.
pub fn run_sweep(
    cfg: &PipelineConfig,
    bundle: &DatasetBundle,
    jobs: usize,
) -> Result<SweepOutcome> {
    let sweep = cfg
        .sweep
        .clone()
        .ok_or_else(|| Error::RejectedConfig("config has no [sweep] section".into()))?;

    let points = match &sweep {
        SweepAxis::Threshold { thresholds } => {
            // One trained model set; partitions recomputed from cached dumps.
            let gt = run_ground_truth(cfg, bundle)?;
            let base = run_weak_to_strong(cfg, bundle, &gt)?;
            thresholds
                .iter()
                .map(|&t| {
                    let point_cfg = cfg.with_threshold(t);
                    let outcome =
                        recompute_report_at_threshold(&base.report, t, point_cfg.fingerprint())
                            .map_err(|e| e.to_string());
                    SweepPoint {
                        label: format!("T={t}"),
                        axis_value: t,
                        outcome,
                    }
                })
                .collect()
        }
        SweepAxis::Alpha { alphas } => {
            let configs: Vec<(String, f64, PipelineConfig)> = alphas
                .iter()
                .map(|&a| (format!("alpha={a}"), a, cfg.with_alpha(a)))
                .collect();
            run_points(&configs, bundle, jobs)
        }
        SweepAxis::StrongCapacity { strong_capacity } => {
            let configs: Vec<(String, f64, PipelineConfig)> = strong_capacity
                .iter()
                .map(|hidden| {
                    let point_cfg = cfg.with_strong_hidden(hidden.clone());
                    let params = point_cfg.strong_spec.param_count(cfg.task.feature_dim);
                    (format!("strong={hidden:?}"), params as f64, point_cfg)
                })
                .collect();
            run_points(&configs, bundle, jobs)
        }
    };

    let defined: Vec<(f64, f64)> = points
        .iter()
        .filter_map(|p| {
            p.outcome
                .as_ref()
                .ok()
                .and_then(|r| r.deception_score.map(|ds| (p.axis_value, ds)))
        })
        .collect();
    let xs: Vec<f64> = defined.iter().map(|(x, _)| *x).collect();
    let ys: Vec<f64> = defined.iter().map(|(_, y)| *y).collect();
    Ok(SweepOutcome {
        points,
        trend: TrendSummary {
            spearman_axis_vs_ds: analysis::spearman(&xs, &ys),
            points_with_ds: defined.len(),
        },
    })
}

/// Evaluates independent sweep points, optionally in parallel. Each point is
/// a pure function of its config, so execution order cannot change results.
fn run_points(
    configs: &[(String, f64, PipelineConfig)],
    bundle: &DatasetBundle,
    jobs: usize,
) -> Vec<SweepPoint> {
    let eval = |(label, axis_value, point_cfg): &(String, f64, PipelineConfig)| {
        let outcome = run_ground_truth(point_cfg, bundle)
            .and_then(|gt| run_weak_to_strong(point_cfg, bundle, &gt))
            .map(|o| o.report)
            .map_err(|e| e.to_string());
        SweepPoint {
            label: label.clone(),
            axis_value: *axis_value,
            outcome,
        }
    };
    if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .expect("thread pool");
        pool.install(|| configs.par_iter().map(eval).collect())
    } else {
        configs.iter().map(eval).collect()
    }
}

/// Convenience wrapper: generate data, train the ladder, run weak-to-strong.
pub fn run_full(cfg: &PipelineConfig) -> Result<W2sOutcome> {
    let bundle = crate::task::generate_bundle(&cfg.task)?;
    let gt = run_ground_truth(cfg, &bundle)?;
    run_weak_to_strong(cfg, &bundle, &gt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config_with_seed;
    use crate::task::generate_bundle;

    /// Small, fast config used across pipeline tests.
    fn test_config(extra: &str, seed: u64) -> PipelineConfig {
        let text = format!(
            "[task]\nsplit_sizes = [600, 600, 600, 600]\n\
             [strong]\nhidden_layers = [24]\n\
             [schedule]\nepochs = 30\n{extra}"
        );
        parse_config_with_seed(&text, Some(seed)).unwrap()
    }

    #[test]
    fn ground_truth_ladder_orders_accuracy() {
        // Ladder separation needs enough ground-truth data for the strong
        // model to learn the hard component; the other protocol tests run on
        // smaller splits where that gap is irrelevant.
        let cfg = parse_config_with_seed(
            "[task]\nsplit_sizes = [2500, 50, 1000, 50]\n\
             [strong]\nhidden_layers = [24]\n\
             [schedule]\nepochs = 40\n",
            Some(3),
        )
        .unwrap();
        let bundle = generate_bundle(&cfg.task).unwrap();
        let gt = run_ground_truth(&cfg, &bundle).unwrap();
        let weak_acc = crate::analysis::accuracy(&gt.weak, &bundle.d_test).unwrap();
        let strong_acc = crate::analysis::accuracy(&gt.strong, &bundle.d_test).unwrap();
        assert!(
            strong_acc > weak_acc,
            "strong {strong_acc} must beat weak {weak_acc}"
        );
        assert_eq!(gt.weak.role(), RoleTag::WeakGt);
    }

    #[test]
    fn relabel_matches_the_prediction_rule() {
        let cfg = test_config("", 5);
        let bundle = generate_bundle(&cfg.task).unwrap();
        let gt = run_ground_truth(&cfg, &bundle).unwrap();
        let labels = relabel_weak(&gt.weak, &bundle.d_weak_pool).unwrap();
        for (s, label) in bundle.d_weak_pool.iter().zip(&labels) {
            assert_eq!(label.id, s.id);
            let conf = gt.weak.confidence(s).unwrap();
            assert_eq!(label.soft_target, conf);
            assert_eq!(label.prefers_stored, conf >= 0.5);
        }
        // Soft relabeling preserves anti-symmetry through stored pairs.
        for s in bundle.d_weak_pool.iter().take(100) {
            let mut swapped = s.clone();
            std::mem::swap(&mut swapped.z_chosen, &mut swapped.z_rejected);
            let a = gt.weak.confidence(s).unwrap();
            let b = gt.weak.confidence(&swapped).unwrap();
            assert_eq!(a + b, 1.0);
        }
    }

    #[test]
    fn no_conflict_run_has_no_deception_score() {
        let cfg = test_config("[objective]\nconflict = \"none\"\n", 7);
        let bundle = generate_bundle(&cfg.task).unwrap();
        let gt = run_ground_truth(&cfg, &bundle).unwrap();
        let outcome = run_weak_to_strong(&cfg, &bundle, &gt).unwrap();
        assert!(outcome.students.conflicted.is_none());
        assert_eq!(outcome.report.deception_score, None);
        assert_eq!(outcome.report.tax_distribution.total(), 0);
        // Absolute deception score probes spontaneous deviation instead.
        assert!(outcome.report.accuracies.contains_key("w2s_no_conflict"));
        outcome.report.check_consistency().unwrap();
    }

    #[test]
    fn explicit_alpha_zero_degenerates_to_the_reference() {
        let cfg = test_config("[objective]\nconflict = \"explicit\"\nalpha = 0.0\n", 11);
        let bundle = generate_bundle(&cfg.task).unwrap();
        let gt = run_ground_truth(&cfg, &bundle).unwrap();
        let outcome = run_weak_to_strong(&cfg, &bundle, &gt).unwrap();
        let conflicted = outcome.students.conflicted.as_ref().unwrap();
        assert_eq!(conflicted.params(), outcome.students.reference.params());
        assert_eq!(outcome.report.deception_score, None);
    }

    #[test]
    fn reports_are_bit_identical_across_reruns() {
        let cfg = test_config("", 13);
        let bundle = generate_bundle(&cfg.task).unwrap();
        let gt = run_ground_truth(&cfg, &bundle).unwrap();
        let a = run_weak_to_strong(&cfg, &bundle, &gt).unwrap();
        let gt2 = run_ground_truth(&cfg, &bundle).unwrap();
        let b = run_weak_to_strong(&cfg, &bundle, &gt2).unwrap();
        assert_eq!(a.report, b.report);
        assert_eq!(
            serde_json::to_vec(&a.report).unwrap(),
            serde_json::to_vec(&b.report).unwrap()
        );
    }

    #[test]
    fn threshold_recompute_matches_a_fresh_standalone_run() {
        let cfg = test_config("", 17);
        let bundle = generate_bundle(&cfg.task).unwrap();
        let gt = run_ground_truth(&cfg, &bundle).unwrap();
        let base = run_weak_to_strong(&cfg, &bundle, &gt).unwrap();

        let cfg_08 = cfg.with_threshold(0.8);
        let recomputed =
            recompute_report_at_threshold(&base.report, 0.8, cfg_08.fingerprint()).unwrap();
        let gt2 = run_ground_truth(&cfg_08, &bundle).unwrap();
        let fresh = run_weak_to_strong(&cfg_08, &bundle, &gt2).unwrap();
        assert_eq!(recomputed, fresh.report);
    }

    #[test]
    fn degenerate_bootstrap_reproduces_direct_supervision() {
        let mut cfg = test_config("", 19);
        cfg.intermediate_specs = vec![cfg.weak_spec.clone()];
        let bundle = generate_bundle(&cfg.task).unwrap();
        let gt = run_ground_truth(&cfg, &bundle).unwrap();
        let direct = run_weak_to_strong(&cfg, &bundle, &gt).unwrap();
        let boot = run_bootstrap(&cfg, &bundle, &gt).unwrap();
        assert!(boot.intermediates.is_empty());
        assert_eq!(
            boot.students.reference.params(),
            direct.students.reference.params()
        );
        assert_eq!(boot.report.deception_score, direct.report.deception_score);
        assert_eq!(boot.report.tax_distribution, direct.report.tax_distribution);
    }

    #[test]
    fn bootstrap_chain_trains_intermediates_and_keeps_the_gt_partition() {
        let mut cfg = test_config("", 23);
        cfg.intermediate_specs = vec![crate::scorer::ScorerSpec {
            hidden_layers: vec![6],
            ..cfg.weak_spec.clone()
        }];
        let bundle = generate_bundle(&cfg.task).unwrap();
        let gt = run_ground_truth(&cfg, &bundle).unwrap();
        let boot = run_bootstrap(&cfg, &bundle, &gt).unwrap();
        assert_eq!(boot.intermediates.len(), 1);
        assert_eq!(boot.intermediates[0].role(), RoleTag::Intermediate);
        assert!(boot.report.accuracies.contains_key("intermediate_0"));
        // Deterministic chain.
        let boot2 = run_bootstrap(&cfg, &bundle, &gt).unwrap();
        assert_eq!(boot.report, boot2.report);
    }

    #[test]
    fn filter_keeps_only_high_confidence_correct_samples() {
        let cfg = test_config(
            "[objective]\nconflict = \"implicit\"\n[run]\nfilter_high_confidence = 0.75\n",
            29,
        );
        let bundle = generate_bundle(&cfg.task).unwrap();
        let gt = run_ground_truth(&cfg, &bundle).unwrap();
        let labels = relabel_weak(&gt.weak, &bundle.d_weak_pool).unwrap();
        let (kept, kept_labels) =
            filter_high_confidence(&bundle.d_weak_pool, &labels, 0.75).unwrap();
        assert!(!kept.is_empty() && kept.len() < bundle.d_weak_pool.len());
        for (s, l) in kept.iter().zip(&kept_labels) {
            let toward = if s.gt_order_correct {
                l.soft_target
            } else {
                1.0 - l.soft_target
            };
            assert!(toward >= 0.75);
        }
        // The full run wires the truncation through.
        let outcome = run_weak_to_strong(&cfg, &bundle, &gt).unwrap();
        outcome.report.check_consistency().unwrap();
    }

    #[test]
    fn filter_worked_example() {
        use crate::task::Tier;
        let samples: Vec<PreferenceSample> = (0..3)
            .map(|i| PreferenceSample {
                id: i as u64,
                z_chosen: vec![1.0],
                z_rejected: vec![0.0],
                gt_order_correct: true,
                utility_gap: 1.0,
                tier: Tier::Easy,
            })
            .collect();
        let labels: Vec<TeacherLabel> = [0.9, 0.74, 0.2]
            .iter()
            .enumerate()
            .map(|(i, &c)| TeacherLabel {
                id: i as u64,
                soft_target: c,
                prefers_stored: c >= 0.5,
            })
            .collect();
        let (kept, _) = filter_high_confidence(&samples, &labels, 0.75).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].id, 0);
        // Permissive threshold keeps everything the teacher gets right.
        let (kept, _) = filter_high_confidence(&samples, &labels, 0.5000001).unwrap();
        assert_eq!(kept.len(), 2);
    }

    #[test]
    fn threshold_sweep_reuses_one_training_run() {
        let cfg = test_config(
            "[sweep]\naxis = \"threshold\"\nthresholds = [0.7, 0.75, 0.8]\n",
            31,
        );
        let bundle = generate_bundle(&cfg.task).unwrap();
        let outcome = run_sweep(&cfg, &bundle, 1).unwrap();
        assert_eq!(outcome.points.len(), 3);
        for p in &outcome.points {
            let report = p.outcome.as_ref().unwrap();
            assert_eq!(report.meta.threshold, p.axis_value);
            // Accuracies are threshold-independent, so one training run
            // must have produced every point.
            assert_eq!(
                report.accuracies,
                outcome.points[0].outcome.as_ref().unwrap().accuracies
            );
        }
    }

    #[test]
    fn singleton_sweep_has_no_trend() {
        let cfg = test_config("[sweep]\naxis = \"alpha\"\nalphas = [0.5]\n", 37);
        let bundle = generate_bundle(&cfg.task).unwrap();
        let outcome = run_sweep(&cfg, &bundle, 1).unwrap();
        assert_eq!(outcome.points.len(), 1);
        assert_eq!(outcome.trend.spearman_axis_vs_ds, None);
    }

    #[test]
    fn parallel_sweep_matches_serial() {
        let cfg = test_config("[sweep]\naxis = \"alpha\"\nalphas = [0.25, 0.5]\n", 41);
        let bundle = generate_bundle(&cfg.task).unwrap();
        let serial = run_sweep(&cfg, &bundle, 1).unwrap();
        let parallel = run_sweep(&cfg, &bundle, 4).unwrap();
        assert_eq!(serial, parallel);
    }
}
