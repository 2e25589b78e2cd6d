//! Training objectives for both scenarios, parameterized by conflict mode.
//!
//! Reward modeling trains pair confidence against soft targets with a
//! cross-entropy loss; the preference scenario wraps a SimPO or DPO base
//! loss around hard preference orders. Each conflict mode adds its own term:
//!
//! - `none`: supervision toward the target dimension only.
//! - `explicit`: an extra penalty, weighted by `alpha`, rewarding the
//!   opposite direction whenever the student currently gets the pair wrong.
//! - `implicit`: a second supervision source (the helpful split) whose
//!   orders partially contradict the target dimension.
//! - `adaptive`: the no-conflict loss re-weighted by the teacher's
//!   confidence margin `|2t - 1|`, down-weighting uncertain supervision.
//!
//! All losses are pure functions; gradient plumbing lives in [`crate::train`]
//! but routes through the same term evaluation so values and derivatives
//! cannot drift apart.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, FieldError, Result};
use crate::scorer::{pair_confidence, sigmoid, softplus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    RewardModeling,
    Preference,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::RewardModeling => "reward_modeling",
            Scenario::Preference => "preference",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConflictMode {
    None,
    Explicit,
    Implicit,
    Adaptive,
}

impl ConflictMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ConflictMode::None => "none",
            ConflictMode::Explicit => "explicit",
            ConflictMode::Implicit => "implicit",
            ConflictMode::Adaptive => "adaptive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasePoLoss {
    Simpo,
    Dpo,
}

impl BasePoLoss {
    pub fn as_str(self) -> &'static str {
        match self {
            BasePoLoss::Simpo => "simpo",
            BasePoLoss::Dpo => "dpo",
        }
    }

    /// Scaling factor used when the config does not pin one.
    pub fn default_beta(self) -> f64 {
        match self {
            BasePoLoss::Simpo => 2.0,
            BasePoLoss::Dpo => 0.1,
        }
    }
}

/// Scenario, conflict mode, and every loss hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub scenario: Scenario,
    pub conflict: ConflictMode,
    /// Explicit-conflict strength.
    pub alpha: f64,
    /// Base preference-optimization loss (preference scenario only).
    pub base_po_loss: BasePoLoss,
    /// Scaling factor of the base loss.
    pub beta: f64,
    /// SimPO target reward margin.
    pub gamma: f64,
    /// DPO logit normalization constant.
    pub dpo_norm_l: f64,
    /// Weight of the helpful term under implicit conflict.
    pub helpful_weight: f64,
}

impl ObjectiveSpec {
    pub fn reward_modeling(conflict: ConflictMode) -> Self {
        ObjectiveSpec {
            scenario: Scenario::RewardModeling,
            conflict,
            alpha: 0.5,
            base_po_loss: BasePoLoss::Simpo,
            beta: BasePoLoss::Simpo.default_beta(),
            gamma: 1.0,
            dpo_norm_l: 50.0,
            helpful_weight: 1.0,
        }
    }

    pub fn preference(base: BasePoLoss, conflict: ConflictMode) -> Self {
        ObjectiveSpec {
            scenario: Scenario::Preference,
            conflict,
            alpha: 0.5,
            base_po_loss: base,
            beta: base.default_beta(),
            gamma: 1.0,
            dpo_norm_l: 50.0,
            helpful_weight: 1.0,
        }
    }

    /// Same objective with the conflicting term removed.
    pub fn without_conflict(&self) -> Self {
        ObjectiveSpec {
            conflict: ConflictMode::None,
            ..self.clone()
        }
    }

    pub fn validate(&self, prefix: &str) -> Vec<FieldError> {
        let mut errors = Vec::new();
        let mut push = |field: &str, message: String| {
            errors.push(FieldError {
                field: format!("{prefix}.{field}"),
                message,
            });
        };
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            push("alpha", format!("must be in [0, inf), got {}", self.alpha));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            push("beta", format!("must be in (0, inf), got {}", self.beta));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            push("gamma", format!("must be in [0, inf), got {}", self.gamma));
        }
        if !(self.dpo_norm_l > 0.0 && self.dpo_norm_l.is_finite()) {
            push(
                "dpo_norm_l",
                format!("must be in (0, inf), got {}", self.dpo_norm_l),
            );
        }
        if !(self.helpful_weight > 0.0 && self.helpful_weight.is_finite()) {
            push(
                "helpful_weight",
                format!("must be in (0, inf), got {}", self.helpful_weight),
            );
        }
        if self.conflict == ConflictMode::Adaptive && self.scenario != Scenario::RewardModeling {
            push(
                "conflict",
                "adaptive conflict is only valid with scenario = reward_modeling".into(),
            );
        }
        errors
    }
}

/// Counts probability clamps inside [`soft_ce`] evaluations so saturation is
/// visible instead of silent.
#[derive(Debug, Default)]
pub struct SaturationCounter(AtomicU64);

impl SaturationCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }

    fn bump(&self) {
        self.0.fetch_add(1, Ordering::Relaxed);
    }
}

/// Probability clamp bound for cross-entropy evaluation.
pub const PROB_EPSILON: f64 = 1e-12;

/// Soft-label cross entropy `-(t ln p + (1-t) ln(1-p))`.
///
/// `p` is clamped into `[PROB_EPSILON, 1 - PROB_EPSILON]`; use
/// [`soft_ce_counted`] to observe how often the clamp fires.
pub fn soft_ce(p: f64, t: f64) -> f64 {
    soft_ce_counted(p, t, None)
}

pub fn soft_ce_counted(p: f64, t: f64, saturation: Option<&SaturationCounter>) -> f64 {
    let clamped = p.clamp(PROB_EPSILON, 1.0 - PROB_EPSILON);
    if clamped != p {
        if let Some(counter) = saturation {
            counter.bump();
        }
    }
    -(t * clamped.ln() + (1.0 - t) * (1.0 - clamped).ln())
}

fn in_clamp_zone(p: f64) -> bool {
    !(PROB_EPSILON..=1.0 - PROB_EPSILON).contains(&p)
}

/// Reward-modeling loss for one sample.
///
/// `conf_student` is the student's pair confidence on the stored order and
/// `weak_target` the teacher's. Helpful samples are only legal under
/// implicit conflict.
pub fn rm_loss(
    spec: &ObjectiveSpec,
    conf_student: f64,
    weak_target: f64,
    is_helpful_sample: bool,
) -> Result<f64> {
    rm_loss_counted(spec, conf_student, weak_target, is_helpful_sample, None)
}

pub fn rm_loss_counted(
    spec: &ObjectiveSpec,
    conf_student: f64,
    weak_target: f64,
    is_helpful_sample: bool,
    saturation: Option<&SaturationCounter>,
) -> Result<f64> {
    if spec.scenario != Scenario::RewardModeling {
        return Err(Error::RejectedConfig(format!(
            "rm_loss requires scenario = reward_modeling, got {}",
            spec.scenario.as_str()
        )));
    }
    if is_helpful_sample && spec.conflict != ConflictMode::Implicit {
        return Err(Error::RejectedConfig(format!(
            "helpful samples are only valid under implicit conflict, got {}",
            spec.conflict.as_str()
        )));
    }
    let p = conf_student;
    let t = weak_target;
    Ok(match spec.conflict {
        ConflictMode::None => soft_ce_counted(p, t, saturation),
        ConflictMode::Explicit => {
            let base = soft_ce_counted(p, t, saturation);
            // alpha == 0 takes the exact no-conflict code path.
            if spec.alpha > 0.0 && p < 0.5 {
                base + spec.alpha * soft_ce_counted(p, 0.0, saturation)
            } else {
                base
            }
        }
        ConflictMode::Implicit => {
            if is_helpful_sample {
                spec.helpful_weight * soft_ce_counted(p, 1.0, saturation)
            } else {
                soft_ce_counted(p, t, saturation)
            }
        }
        ConflictMode::Adaptive => soft_ce_counted(p, t, saturation) * (2.0 * t - 1.0).abs(),
    })
}

/// Base preference-optimization loss on an ordered pair of policy scores.
///
/// SimPO: `-ln sigmoid(beta * (s_first - s_second) - gamma)`. DPO compares
/// policy-minus-reference gaps with every score divided by `dpo_norm_l`
/// first.
pub fn po_base_loss(
    spec: &ObjectiveSpec,
    s_first: f64,
    s_second: f64,
    refs: Option<(f64, f64)>,
) -> Result<f64> {
    if spec.scenario != Scenario::Preference {
        return Err(Error::RejectedConfig(format!(
            "po_base_loss requires scenario = preference, got {}",
            spec.scenario.as_str()
        )));
    }
    match spec.base_po_loss {
        BasePoLoss::Simpo => {
            let margin = spec.beta * (s_first - s_second) - spec.gamma;
            Ok(softplus(-margin))
        }
        BasePoLoss::Dpo => {
            let (ref_first, ref_second) = refs.ok_or_else(|| {
                Error::RejectedConfig("dpo base loss requires reference scores".into())
            })?;
            let l = spec.dpo_norm_l;
            let gap = (s_first / l - ref_first / l) - (s_second / l - ref_second / l);
            Ok(softplus(-(spec.beta * gap)))
        }
    }
}

/// Policy scores of one sample in the dataset-stored orientation.
#[derive(Debug, Clone, Copy)]
pub struct PairScores {
    pub chosen: f64,
    pub rejected: f64,
    pub ref_chosen: Option<f64>,
    pub ref_rejected: Option<f64>,
}

impl PairScores {
    pub fn new(chosen: f64, rejected: f64) -> Self {
        PairScores {
            chosen,
            rejected,
            ref_chosen: None,
            ref_rejected: None,
        }
    }

    pub fn with_refs(mut self, ref_chosen: f64, ref_rejected: f64) -> Self {
        self.ref_chosen = Some(ref_chosen);
        self.ref_rejected = Some(ref_rejected);
        self
    }

    fn refs(&self) -> Option<(f64, f64)> {
        match (self.ref_chosen, self.ref_rejected) {
            (Some(a), Some(b)) => Some((a, b)),
            _ => None,
        }
    }

    fn refs_reversed(&self) -> Option<(f64, f64)> {
        self.refs().map(|(a, b)| (b, a))
    }
}

/// Full preference-scenario loss for one sample.
///
/// `teacher_prefers_stored` orients the supervised pair: the teacher's
/// chosen completion goes first. Under explicit conflict an extra term
/// rewards the reversed ground-truth order whenever the student currently
/// scores the ground-truth chosen completion below the rejected one.
pub fn po_loss(
    spec: &ObjectiveSpec,
    scores: &PairScores,
    teacher_prefers_stored: bool,
    is_helpful_sample: bool,
) -> Result<f64> {
    if spec.scenario != Scenario::Preference {
        return Err(Error::RejectedConfig(format!(
            "po_loss requires scenario = preference, got {}",
            spec.scenario.as_str()
        )));
    }
    if is_helpful_sample && spec.conflict != ConflictMode::Implicit {
        return Err(Error::RejectedConfig(format!(
            "helpful samples are only valid under implicit conflict, got {}",
            spec.conflict.as_str()
        )));
    }
    if is_helpful_sample {
        // Ground-truth helpful order is the stored order.
        let base = po_base_loss(spec, scores.chosen, scores.rejected, scores.refs())?;
        return Ok(spec.helpful_weight * base);
    }

    let (first, second, refs) = if teacher_prefers_stored {
        (scores.chosen, scores.rejected, scores.refs())
    } else {
        (scores.rejected, scores.chosen, scores.refs_reversed())
    };
    let base = po_base_loss(spec, first, second, refs)?;
    Ok(match spec.conflict {
        ConflictMode::None | ConflictMode::Implicit => base,
        ConflictMode::Explicit => {
            if spec.alpha > 0.0 && scores.chosen < scores.rejected {
                let reversed =
                    po_base_loss(spec, scores.rejected, scores.chosen, scores.refs_reversed())?;
                base + spec.alpha * reversed
            } else {
                base
            }
        }
        ConflictMode::Adaptive => {
            return Err(Error::RejectedConfig(
                "adaptive conflict is only valid with scenario = reward_modeling".into(),
            ))
        }
    })
}

/// Per-sample loss and score-space derivatives used by the trainer.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct RowTerms {
    pub loss: f64,
    pub d_chosen: f64,
    pub d_rejected: f64,
}

/// Evaluates loss and exact derivatives w.r.t. the two completion scores.
///
/// The loss value is computed by the public operations above; derivatives
/// follow the same piecewise structure with indicator gates held constant.
#[allow(clippy::too_many_arguments)]
pub(crate) fn row_terms(
    spec: &ObjectiveSpec,
    s_chosen: f64,
    s_rejected: f64,
    ref_chosen: Option<f64>,
    ref_rejected: Option<f64>,
    soft_target: f64,
    teacher_prefers_stored: bool,
    is_helpful: bool,
    saturation: Option<&SaturationCounter>,
) -> Result<RowTerms> {
    match spec.scenario {
        Scenario::RewardModeling => {
            let p = pair_confidence(s_chosen - s_rejected);
            let target = if is_helpful { 1.0 } else { soft_target };
            let loss = rm_loss_counted(spec, p, target, is_helpful, saturation)?;
            // dL/d(score gap); zero inside the clamp zone where the loss is flat.
            let mut g = if in_clamp_zone(p) {
                0.0
            } else {
                match spec.conflict {
                    ConflictMode::None => p - target,
                    ConflictMode::Explicit => {
                        let mut g = p - target;
                        if spec.alpha > 0.0 && p < 0.5 {
                            g += spec.alpha * p;
                        }
                        g
                    }
                    ConflictMode::Implicit => {
                        if is_helpful {
                            spec.helpful_weight * (p - 1.0)
                        } else {
                            p - target
                        }
                    }
                    ConflictMode::Adaptive => (p - target) * (2.0 * target - 1.0).abs(),
                }
            };
            if g == 0.0 {
                g = 0.0; // normalize -0.0 so zero contributions accumulate cleanly
            }
            Ok(RowTerms {
                loss,
                d_chosen: g,
                d_rejected: -g,
            })
        }
        Scenario::Preference => {
            let scores = PairScores {
                chosen: s_chosen,
                rejected: s_rejected,
                ref_chosen,
                ref_rejected,
            };
            let loss = po_loss(spec, &scores, teacher_prefers_stored, is_helpful)?;
            let mut terms = RowTerms {
                loss,
                ..RowTerms::default()
            };
            if is_helpful {
                let (d1, d2) = po_base_grad(spec, s_chosen, s_rejected, scores.refs());
                terms.d_chosen = spec.helpful_weight * d1;
                terms.d_rejected = spec.helpful_weight * d2;
                return Ok(terms);
            }
            if teacher_prefers_stored {
                let (d1, d2) = po_base_grad(spec, s_chosen, s_rejected, scores.refs());
                terms.d_chosen += d1;
                terms.d_rejected += d2;
            } else {
                let (d1, d2) = po_base_grad(spec, s_rejected, s_chosen, scores.refs_reversed());
                terms.d_rejected += d1;
                terms.d_chosen += d2;
            }
            if spec.conflict == ConflictMode::Explicit
                && spec.alpha > 0.0
                && s_chosen < s_rejected
            {
                let (d1, d2) = po_base_grad(spec, s_rejected, s_chosen, scores.refs_reversed());
                terms.d_rejected += spec.alpha * d1;
                terms.d_chosen += spec.alpha * d2;
            }
            Ok(terms)
        }
    }
}

/// Derivatives of the base preference loss w.r.t. `(s_first, s_second)`.
fn po_base_grad(
    spec: &ObjectiveSpec,
    s_first: f64,
    s_second: f64,
    refs: Option<(f64, f64)>,
) -> (f64, f64) {
    match spec.base_po_loss {
        BasePoLoss::Simpo => {
            let margin = spec.beta * (s_first - s_second) - spec.gamma;
            let d = -spec.beta * sigmoid(-margin);
            (d, -d)
        }
        BasePoLoss::Dpo => {
            let (ref_first, ref_second) = refs.expect("validated by po_base_loss");
            let l = spec.dpo_norm_l;
            let gap = (s_first / l - ref_first / l) - (s_second / l - ref_second / l);
            let d = -(spec.beta / l) * sigmoid(-(spec.beta * gap));
            (d, -d)
        }
    }
}
