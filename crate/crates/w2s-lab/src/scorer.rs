//! Tiny differentiable scorers.
//!
//! A [`ScorerModel`] is a feed-forward network emitting one scalar per
//! completion feature vector. In `reward_head` mode the scalar is a reward
//! logit; in `policy_scorer` mode it stands in for a length-normalized
//! log-likelihood. Pair confidence is the sigmoid of the score difference in
//! both cases.
//!
//! Models are immutable: training returns a fresh model, and the role tag is
//! assigned exactly once by a pipeline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, FieldError, Result};
use crate::rng;
use crate::task::PreferenceSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerMode {
    /// Per-completion reward logit.
    RewardHead,
    /// Normalized log-likelihood surrogate.
    PolicyScorer,
}

impl ScorerMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ScorerMode::RewardHead => "reward_head",
            ScorerMode::PolicyScorer => "policy_scorer",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = pre.tanh();
                1.0 - t * t
            }
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Which role a trained model plays in an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoleTag {
    Untrained,
    /// Weak teacher trained on ground-truth data.
    WeakGt,
    /// Strong ceiling model trained on ground-truth data.
    StrongGt,
    /// Weakly supervised strong model trained without a conflicting target.
    W2sNoConflict,
    /// Weakly supervised strong model trained with the conflicting target.
    W2sConflict,
    /// Intermediate teacher in a bootstrapping chain.
    Intermediate,
}

impl RoleTag {
    pub fn as_str(self) -> &'static str {
        match self {
            RoleTag::Untrained => "untrained",
            RoleTag::WeakGt => "weak_gt",
            RoleTag::StrongGt => "strong_gt",
            RoleTag::W2sNoConflict => "w2s_no_conflict",
            RoleTag::W2sConflict => "w2s_conflict",
            RoleTag::Intermediate => "intermediate",
        }
    }
}

/// Architecture of a scorer. An empty `hidden_layers` list is a linear
/// scorer; parameter count (for a fixed input dimension) orders the
/// capability ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerSpec {
    pub mode: ScorerMode,
    pub hidden_layers: Vec<usize>,
    pub activation: Activation,
    /// Weight initialization scale; biases start at zero.
    pub init_scale: OrderedInit,
    pub seed: u64,
}

/// Wrapper keeping `init_scale` comparable/serializable as a plain f64.
pub type OrderedInit = f64;

impl ScorerSpec {
    pub fn new(mode: ScorerMode, hidden_layers: Vec<usize>, seed: u64) -> Self {
        ScorerSpec {
            mode,
            hidden_layers,
            activation: Activation::Tanh,
            init_scale: 1.0,
            seed,
        }
    }

    /// Total parameter count for the given input dimension.
    pub fn param_count(&self, feature_dim: usize) -> usize {
        layer_dims(self, feature_dim)
            .iter()
            .map(|&(d_in, d_out)| d_in * d_out + d_out)
            .sum()
    }

    pub fn validate(&self, prefix: &str) -> Vec<FieldError> {
        let mut errors = Vec::new();
        if self.init_scale <= 0.0 || self.init_scale.is_nan() {
            errors.push(FieldError {
                field: format!("{prefix}.init_scale"),
                message: format!("must be > 0, got {}", self.init_scale),
            });
        }
        for (i, &width) in self.hidden_layers.iter().enumerate() {
            if width == 0 {
                errors.push(FieldError {
                    field: format!("{prefix}.hidden_layers[{i}]"),
                    message: "layer width must be a positive integer".into(),
                });
            }
        }
        errors
    }
}

/// `(input, output)` dimensions of every affine layer, final output scalar.
fn layer_dims(spec: &ScorerSpec, feature_dim: usize) -> Vec<(usize, usize)> {
    let mut dims = Vec::with_capacity(spec.hidden_layers.len() + 1);
    let mut d_in = feature_dim;
    for &width in &spec.hidden_layers {
        dims.push((d_in, width));
        d_in = width;
    }
    dims.push((d_in, 1));
    dims
}

#[derive(Debug, Clone, Copy)]
struct LayerSlot {
    d_in: usize,
    d_out: usize,
    w_off: usize,
    b_off: usize,
}

fn layout(spec: &ScorerSpec, feature_dim: usize) -> Vec<LayerSlot> {
    let mut slots = Vec::new();
    let mut off = 0;
    for (d_in, d_out) in layer_dims(spec, feature_dim) {
        let w_off = off;
        let b_off = off + d_in * d_out;
        off = b_off + d_out;
        slots.push(LayerSlot {
            d_in,
            d_out,
            w_off,
            b_off,
        });
    }
    slots
}

/// Forward-pass record used for backpropagation: the input of each layer
/// plus the pre-activations of the hidden layers.
pub struct Tape {
    inputs: Vec<Vec<f64>>,
    preacts: Vec<Vec<f64>>,
}

/// A parametric scorer: spec, input dimension, and a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ScorerModel {
    spec: ScorerSpec,
    feature_dim: usize,
    params: Vec<f64>,
    role: RoleTag,
}

impl ScorerModel {
    /// Fresh model with seed-derived initial weights and zero biases.
    pub fn new(spec: ScorerSpec, feature_dim: usize) -> Self {
        let slots = layout(&spec, feature_dim);
        let total: usize = spec.param_count(feature_dim);
        let mut params = vec![0.0; total];
        let mut init_rng = rng::stream_rng(spec.seed, "scorer/init");
        for slot in &slots {
            let fan_in = slot.d_in as f64;
            let scale = spec.init_scale / fan_in.sqrt();
            for w in &mut params[slot.w_off..slot.w_off + slot.d_in * slot.d_out] {
                *w = rng::next_standard_normal(&mut init_rng) * scale;
            }
            // biases stay zero
        }
        ScorerModel {
            spec,
            feature_dim,
            params,
            role: RoleTag::Untrained,
        }
    }

    /// Model with explicitly provided parameters (tests, checkpoint loading).
    pub fn from_params(spec: ScorerSpec, feature_dim: usize, params: Vec<f64>) -> Result<Self> {
        let expected = spec.param_count(feature_dim);
        if params.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: params.len(),
            });
        }
        Ok(ScorerModel {
            spec,
            feature_dim,
            params,
            role: RoleTag::Untrained,
        })
    }

    pub fn spec(&self) -> &ScorerSpec {
        &self.spec
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn role(&self) -> RoleTag {
        self.role
    }

    /// Assigns the role tag; may be called exactly once.
    pub fn with_role(mut self, role: RoleTag) -> Result<Self> {
        if self.role != RoleTag::Untrained {
            return Err(Error::RoleAlreadySet(self.role.as_str()));
        }
        self.role = role;
        Ok(self)
    }

    /// Restores a checkpointed role, bypassing the set-once rule; only the
    /// loader uses this.
    pub(crate) fn restore_role(mut self, role: RoleTag) -> Self {
        self.role = role;
        self
    }

    /// Replaces the parameter vector, keeping spec and role.
    pub(crate) fn replace_params(&self, params: Vec<f64>) -> ScorerModel {
        debug_assert_eq!(params.len(), self.params.len());
        ScorerModel {
            spec: self.spec.clone(),
            feature_dim: self.feature_dim,
            params,
            role: RoleTag::Untrained,
        }
    }

    /// Content identity: hash of spec, input dimension and exact parameters.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_vec(&self.spec).expect("spec serializes"));
        hasher.update((self.feature_dim as u64).to_le_bytes());
        for p in &self.params {
            hasher.update(p.to_le_bytes());
        }
        hex::encode(&hasher.finalize()[..16])
    }

    fn check_dim(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.feature_dim {
            return Err(Error::DimensionMismatch {
                expected: self.feature_dim,
                actual: z.len(),
            });
        }
        Ok(())
    }

    /// Deterministic forward pass producing the scalar score.
    pub fn score(&self, z: &[f64]) -> Result<f64> {
        self.check_dim(z)?;
        Ok(self.forward(z, None))
    }

    /// Forward pass that also records the tape needed for [`Self::backprop`].
    pub fn score_with_tape(&self, z: &[f64]) -> Result<(f64, Tape)> {
        self.check_dim(z)?;
        let mut tape = Tape {
            inputs: Vec::new(),
            preacts: Vec::new(),
        };
        let score = self.forward(z, Some(&mut tape));
        Ok((score, tape))
    }

    fn forward(&self, z: &[f64], mut tape: Option<&mut Tape>) -> f64 {
        let slots = layout(&self.spec, self.feature_dim);
        let n_layers = slots.len();
        let mut activation = z.to_vec();
        for (l, slot) in slots.iter().enumerate() {
            if let Some(t) = tape.as_deref_mut() {
                t.inputs.push(activation.clone());
            }
            let mut pre = vec![0.0; slot.d_out];
            for (o, value) in pre.iter_mut().enumerate() {
                let row = &self.params[slot.w_off + o * slot.d_in..slot.w_off + (o + 1) * slot.d_in];
                let mut acc = self.params[slot.b_off + o];
                for (w, x) in row.iter().zip(&activation) {
                    acc += w * x;
                }
                *value = acc;
            }
            let last = l + 1 == n_layers;
            if last {
                return pre[0];
            }
            if let Some(t) = tape.as_deref_mut() {
                t.preacts.push(pre.clone());
            }
            activation = pre
                .into_iter()
                .map(|x| self.spec.activation.apply(x))
                .collect();
        }
        unreachable!("at least the output layer exists")
    }

    /// Accumulates `d_score * d(score)/d(params)` into `grad`.
    pub fn backprop(&self, tape: &Tape, d_score: f64, grad: &mut [f64]) {
        debug_assert_eq!(grad.len(), self.params.len());
        let slots = layout(&self.spec, self.feature_dim);
        let mut delta = vec![d_score];
        for (l, slot) in slots.iter().enumerate().rev() {
            let input = &tape.inputs[l];
            // Parameter gradients of this layer.
            for o in 0..slot.d_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = &mut grad[slot.w_off + o * slot.d_in..slot.w_off + (o + 1) * slot.d_in];
                for (g, x) in row.iter_mut().zip(input) {
                    *g += d * x;
                }
                grad[slot.b_off + o] += d;
            }
            if l == 0 {
                break;
            }
            // Gradient w.r.t. this layer's input = previous layer's activation.
            let mut d_input = vec![0.0; slot.d_in];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &self.params[slot.w_off + o * slot.d_in..slot.w_off + (o + 1) * slot.d_in];
                for (di, w) in d_input.iter_mut().zip(row) {
                    *di += d * w;
                }
            }
            let pre = &tape.preacts[l - 1];
            delta = d_input
                .iter()
                .zip(pre)
                .map(|(di, p)| di * self.spec.activation.derivative(*p))
                .collect();
        }
    }

    /// Predicted soft label toward the stored pair order:
    /// `sigmoid(score(chosen) - score(rejected))`.
    pub fn confidence(&self, sample: &PreferenceSample) -> Result<f64> {
        let s_c = self.score(&sample.z_chosen)?;
        let s_r = self.score(&sample.z_rejected)?;
        Ok(pair_confidence(s_c - s_r))
    }

    /// Confidence toward the ground-truth order: the raw confidence when the
    /// stored order is correct, its complement otherwise.
    pub fn confidence_toward_correct(&self, sample: &PreferenceSample) -> Result<f64> {
        let conf = self.confidence(sample)?;
        Ok(if sample.gt_order_correct {
            conf
        } else {
            1.0 - conf
        })
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Pair confidence from a score difference, strictly inside (0, 1).
///
/// Evaluated through the positive branch so that swapping the pair gives the
/// exact complement: `pair_confidence(d) + pair_confidence(-d) == 1.0`
/// bit-for-bit (the subtraction `1 - p` is exact for `p` in `[0.5, 1]`).
pub fn pair_confidence(diff: f64) -> f64 {
    let cap = 1.0 - 0.5 * f64::EPSILON;
    let mut p = sigmoid(diff.abs());
    if p > cap {
        p = cap; // NaN fails the comparison and propagates
    }
    if diff >= 0.0 {
        p
    } else {
        1.0 - p
    }
}

/// Numerically stable `ln(1 + exp(x))`.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::Tier;
    use proptest::prelude::*;

    fn linear_spec(seed: u64) -> ScorerSpec {
        ScorerSpec::new(ScorerMode::RewardHead, vec![], seed)
    }

    fn sample_from(z_c: Vec<f64>, z_r: Vec<f64>) -> PreferenceSample {
        PreferenceSample {
            id: 0,
            z_chosen: z_c,
            z_rejected: z_r,
            gt_order_correct: true,
            utility_gap: 1.0,
            tier: Tier::Easy,
        }
    }

    #[test]
    fn zero_params_linear_scorer_scores_zero() {
        let model = ScorerModel::from_params(linear_spec(0), 4, vec![0.0; 5]).unwrap();
        assert_eq!(model.score(&[1.0, -2.0, 3.0, 0.5]).unwrap(), 0.0);
    }

    #[test]
    fn score_is_pure() {
        let model = ScorerModel::new(linear_spec(3), 6);
        let z = vec![0.3, -0.7, 1.1, 0.0, 2.0, -1.0];
        let a = model.score(&z).unwrap();
        let b = model.score(&z).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn hand_set_linear_scorer_is_a_dot_product() {
        let w = vec![0.5, -1.25, 2.0, 0.125];
        let mut params = w.clone();
        params.push(0.0); // bias
        let model = ScorerModel::from_params(linear_spec(0), 4, params).unwrap();
        let z = vec![1.0, 2.0, -0.5, 4.0];
        let expected: f64 = w.iter().zip(&z).map(|(a, b)| a * b).sum();
        assert_eq!(model.score(&z).unwrap(), expected);
    }

    #[test]
    fn score_rejects_wrong_dimension() {
        let model = ScorerModel::new(linear_spec(0), 4);
        assert!(matches!(
            model.score(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { expected: 4, actual: 2 })
        ));
    }

    #[test]
    fn equal_scores_give_half_confidence() {
        let model = ScorerModel::from_params(linear_spec(0), 2, vec![0.0; 3]).unwrap();
        let s = sample_from(vec![1.0, 2.0], vec![-3.0, 0.5]);
        assert_eq!(model.confidence(&s).unwrap(), 0.5);
    }

    #[test]
    fn log3_score_gap_gives_three_quarters_confidence() {
        // score difference ln 3 => sigmoid = 3/4
        let spec = linear_spec(0);
        let model = ScorerModel::from_params(spec, 1, vec![3.0_f64.ln(), 0.0]).unwrap();
        let s = sample_from(vec![1.0], vec![0.0]);
        assert!((model.confidence(&s).unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn param_count_follows_architecture() {
        let spec = ScorerSpec::new(ScorerMode::RewardHead, vec![5, 4], 0);
        // 6*5+5 + 5*4+4 + 4*1+1 = 35 + 24 + 5
        assert_eq!(spec.param_count(6), 64);
        let model = ScorerModel::new(spec, 6);
        assert_eq!(model.param_count(), 64);
    }

    #[test]
    fn role_is_assigned_exactly_once() {
        let model = ScorerModel::new(linear_spec(0), 2);
        let model = model.with_role(RoleTag::WeakGt).unwrap();
        assert_eq!(model.role(), RoleTag::WeakGt);
        let err = model.with_role(RoleTag::StrongGt).unwrap_err();
        assert!(matches!(err, Error::RoleAlreadySet("weak_gt")));
    }

    #[test]
    fn backprop_matches_finite_differences_on_an_mlp() {
        let spec = ScorerSpec::new(ScorerMode::RewardHead, vec![5, 3], 9);
        let model = ScorerModel::new(spec, 4);
        let z = vec![0.4, -1.2, 0.9, 0.1];
        let (_, tape) = model.score_with_tape(&z).unwrap();
        let mut grad = vec![0.0; model.param_count()];
        model.backprop(&tape, 1.0, &mut grad);

        let eps = 1e-6;
        for idx in [0usize, 7, 20, 33, 40, model.param_count() - 1] {
            let mut plus = model.params().to_vec();
            plus[idx] += eps;
            let mut minus = model.params().to_vec();
            minus[idx] -= eps;
            let f_plus = ScorerModel::from_params(model.spec().clone(), 4, plus)
                .unwrap()
                .score(&z)
                .unwrap();
            let f_minus = ScorerModel::from_params(model.spec().clone(), 4, minus)
                .unwrap()
                .score(&z)
                .unwrap();
            let fd = (f_plus - f_minus) / (2.0 * eps);
            assert!(
                (grad[idx] - fd).abs() < 1e-7,
                "param {idx}: analytic {} vs fd {fd}",
                grad[idx]
            );
        }
    }

    proptest! {
        #[test]
        fn confidence_antisymmetry(seed in 0u64..1000, scale in 0.01f64..2.0) {
            let spec = ScorerSpec {
                init_scale: scale,
                ..ScorerSpec::new(ScorerMode::RewardHead, vec![6], seed)
            };
            let model = ScorerModel::new(spec, 5);
            let mut stream = crate::rng::stream_rng(seed, "test/antisym");
            let z_c = crate::rng::normal_vec(&mut stream, 5);
            let z_r = crate::rng::normal_vec(&mut stream, 5);
            let fwd = sample_from(z_c.clone(), z_r.clone());
            let bwd = sample_from(z_r, z_c);
            let cf = model.confidence(&fwd).unwrap();
            let cb = model.confidence(&bwd).unwrap();
            prop_assert!(cf > 0.0 && cf < 1.0);
            prop_assert_eq!(cf + cb, 1.0);
        }
    }
}
