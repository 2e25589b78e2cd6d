//! Deterministic minibatch training.
//!
//! The optimizer is plain SGD with momentum. Batches are drawn by a seeded
//! shuffle per epoch, every gradient is the exact analytic derivative of the
//! batch-mean loss, and training is a pure function of (initial model,
//! objective, data, schedule): repeated runs produce bit-identical
//! parameters.
//!
//! In the preference scenario a supervised pre-stage runs first: gradient
//! ascent on the score of the teacher-chosen completion. Under a DPO
//! objective the post-SFT model is frozen as the reference whose scores
//! enter the loss.

use serde::{Deserialize, Serialize};

use crate::error::{Error, FieldError, Result};
use crate::objective::{row_terms, ObjectiveSpec, SaturationCounter, Scenario};
use crate::rng;
use crate::scorer::{ScorerMode, ScorerModel};

/// One supervised pair: features in the dataset-stored orientation plus the
/// supervision attached by the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainRow {
    pub id: u64,
    pub z_chosen: Vec<f64>,
    pub z_rejected: Vec<f64>,
    /// Reward-modeling target toward the stored order (teacher confidence,
    /// or 1.0 for ground-truth training).
    pub soft_target: f64,
    /// Preference-scenario orientation: does the teacher prefer the stored
    /// chosen completion?
    pub teacher_prefers_stored: bool,
    pub is_helpful: bool,
    /// Relative weight inside the batch-mean loss.
    pub weight: f64,
}

/// A training view over one or two splits.
#[derive(Debug, Clone)]
pub struct TrainSet {
    pub feature_dim: usize,
    pub rows: Vec<TrainRow>,
}

/// Optimization schedule shared by all training stages of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSchedule {
    pub epochs: usize,
    /// Supervised pre-stage epochs (preference scenario only).
    pub sft_epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        TrainSchedule {
            epochs: 40,
            sft_epochs: 1,
            learning_rate: 3e-2,
            momentum: 0.9,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl TrainSchedule {
    pub fn validate(&self, prefix: &str) -> Vec<FieldError> {
        let mut errors = Vec::new();
        let mut push = |field: &str, message: String| {
            errors.push(FieldError {
                field: format!("{prefix}.{field}"),
                message,
            });
        };
        if self.epochs == 0 {
            push("epochs", "must be a positive integer".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            push(
                "learning_rate",
                format!("must be in (0, inf), got {}", self.learning_rate),
            );
        }
        if !(0.0..1.0).contains(&self.momentum) {
            push("momentum", format!("must be in [0, 1), got {}", self.momentum));
        }
        if self.batch_size == 0 {
            push("batch_size", "must be a positive integer".into());
        }
        errors
    }
}

/// Result of a training run: the new model plus diagnostics.
#[derive(Debug)]
pub struct TrainOutcome {
    pub model: ScorerModel,
    /// Probability clamps observed across all loss evaluations.
    pub saturation_count: u64,
    pub steps: usize,
}

fn check_compat(model: &ScorerModel, objective: &ObjectiveSpec) -> Result<()> {
    let expected = match objective.scenario {
        Scenario::RewardModeling => ScorerMode::RewardHead,
        Scenario::Preference => ScorerMode::PolicyScorer,
    };
    if model.spec().mode != expected {
        return Err(Error::RejectedConfig(format!(
            "objective scenario {} requires scorer mode {}, got {}",
            objective.scenario.as_str(),
            expected.as_str(),
            model.spec().mode.as_str()
        )));
    }
    Ok(())
}

fn needs_reference(objective: &ObjectiveSpec) -> bool {
    objective.scenario == Scenario::Preference
        && objective.base_po_loss == crate::objective::BasePoLoss::Dpo
}

/// Exact analytic gradient of the batch-mean loss, together with the loss.
///
/// `reference` provides the frozen scores required by a DPO objective.
pub fn loss_and_gradient(
    model: &ScorerModel,
    objective: &ObjectiveSpec,
    rows: &[TrainRow],
    reference: Option<&ScorerModel>,
) -> Result<(f64, Vec<f64>)> {
    check_compat(model, objective)?;
    if rows.is_empty() {
        return Err(Error::EmptyInput("gradient over an empty batch".into()));
    }
    if needs_reference(objective) && reference.is_none() {
        return Err(Error::RejectedConfig(
            "dpo objective requires a frozen reference model".into(),
        ));
    }
    let counter = SaturationCounter::new();
    let mut grad = vec![0.0; model.param_count()];
    let refs: Vec<&TrainRow> = rows.iter().collect();
    let loss = accumulate_batch(
        model,
        objective,
        &refs,
        reference,
        &counter,
        &mut grad,
        Phase::Objective,
    )?;
    Ok((loss, grad))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    /// Supervised pre-stage: maximize the teacher-chosen completion's score.
    Sft,
    Objective,
}

impl Phase {
    fn name(self) -> &'static str {
        match self {
            Phase::Sft => "sft",
            Phase::Objective => "objective",
        }
    }
}

/// Adds the batch-mean gradient into `grad` and returns the batch-mean loss.
fn accumulate_batch(
    model: &ScorerModel,
    objective: &ObjectiveSpec,
    rows: &[&TrainRow],
    reference: Option<&ScorerModel>,
    counter: &SaturationCounter,
    grad: &mut [f64],
    phase: Phase,
) -> Result<f64> {
    let inv_batch = 1.0 / rows.len() as f64;
    let mut loss = 0.0;
    for row in rows {
        let scale = row.weight * inv_batch;
        match phase {
            Phase::Sft => {
                let z = if row.teacher_prefers_stored {
                    &row.z_chosen
                } else {
                    &row.z_rejected
                };
                let (score, tape) = model.score_with_tape(z)?;
                loss += scale * (-score);
                model.backprop(&tape, -scale, grad);
            }
            Phase::Objective => {
                let (s_c, tape_c) = model.score_with_tape(&row.z_chosen)?;
                let (s_r, tape_r) = model.score_with_tape(&row.z_rejected)?;
                let (ref_c, ref_r) = match reference {
                    Some(reference) if needs_reference(objective) => (
                        Some(reference.score(&row.z_chosen)?),
                        Some(reference.score(&row.z_rejected)?),
                    ),
                    _ => (None, None),
                };
                let terms = row_terms(
                    objective,
                    s_c,
                    s_r,
                    ref_c,
                    ref_r,
                    row.soft_target,
                    row.teacher_prefers_stored,
                    row.is_helpful,
                    Some(counter),
                )?;
                loss += scale * terms.loss;
                if terms.d_chosen != 0.0 {
                    model.backprop(&tape_c, scale * terms.d_chosen, grad);
                }
                if terms.d_rejected != 0.0 {
                    model.backprop(&tape_r, scale * terms.d_rejected, grad);
                }
            }
        }
    }
    Ok(loss)
}

/// Trains a fresh model. See the module docs for the stage structure.
pub fn train(
    model: &ScorerModel,
    objective: &ObjectiveSpec,
    data: &TrainSet,
    schedule: &TrainSchedule,
) -> Result<TrainOutcome> {
    check_compat(model, objective)?;
    if !(schedule.learning_rate > 0.0 && schedule.learning_rate.is_finite()) {
        return Err(Error::RejectedConfig(format!(
            "learning_rate must be positive, got {}",
            schedule.learning_rate
        )));
    }
    if schedule.batch_size == 0 {
        return Err(Error::RejectedConfig("batch_size must be positive".into()));
    }

    let counter = SaturationCounter::new();
    let mut params = model.params().to_vec();
    let mut velocity = vec![0.0; params.len()];
    let mut steps = 0usize;

    let mut reference: Option<ScorerModel> = None;
    if objective.scenario == Scenario::Preference {
        for epoch in 0..schedule.sft_epochs {
            run_epoch(
                model, objective, data, schedule, Phase::Sft, epoch, &counter, None,
                &mut params, &mut velocity, &mut steps,
            )?;
        }
        if needs_reference(objective) {
            reference = Some(model.replace_params(params.clone()));
        }
    }

    for epoch in 0..schedule.epochs {
        run_epoch(
            model,
            objective,
            data,
            schedule,
            Phase::Objective,
            epoch,
            &counter,
            reference.as_ref(),
            &mut params,
            &mut velocity,
            &mut steps,
        )?;
    }

    Ok(TrainOutcome {
        model: model.replace_params(params),
        saturation_count: counter.count(),
        steps,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_epoch(
    model: &ScorerModel,
    objective: &ObjectiveSpec,
    data: &TrainSet,
    schedule: &TrainSchedule,
    phase: Phase,
    epoch: usize,
    counter: &SaturationCounter,
    reference: Option<&ScorerModel>,
    params: &mut [f64],
    velocity: &mut [f64],
    steps: &mut usize,
) -> Result<()> {
    let n = data.rows.len();
    if n == 0 {
        return Ok(());
    }
    let mut shuffle_rng = rng::stream_rng(
        schedule.seed,
        &format!("shuffle/{}/{epoch}", phase.name()),
    );
    let order = rng::shuffled_indices(&mut shuffle_rng, n);
    let mut grad = vec![0.0; params.len()];

    for batch in order.chunks(schedule.batch_size) {
        let current = model.replace_params(params.to_vec());
        grad.iter_mut().for_each(|g| *g = 0.0);
        let rows: Vec<&TrainRow> = batch.iter().map(|&i| &data.rows[i]).collect();
        let loss = accumulate_batch(
            &current, objective, &rows, reference, counter, &mut grad, phase,
        )?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                phase: phase.name(),
                step: *steps,
            });
        }
        for ((p, v), g) in params.iter_mut().zip(velocity.iter_mut()).zip(&grad) {
            *v = schedule.momentum * *v + g;
            *p -= schedule.learning_rate * *v;
        }
        *steps += 1;
    }
    Ok(())
}
