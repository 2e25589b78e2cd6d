//! Experiment configuration: parsing, validation, normalization.
//!
//! The on-disk format is flat TOML with one typed section per component:
//! `[task]`, `[weak]`, `[strong]`, `[[intermediate]]`, `[objective]`,
//! `[schedule]`, `[run]`, `[sweep]`. Every key has a documented default, an
//! empty config is valid, and unknown keys are errors. Validation collects
//! every offending field instead of stopping at the first.
//!
//! Normalization makes all defaults explicit and derives component seeds
//! from the root seed via named streams (`task`, `init/weak`, `init/strong`,
//! `init/intermediate/<i>`, `shuffle`), so nothing that affects results is
//! hidden. The normalized config serializes back to the same TOML schema and
//! its canonical JSON is hashed into the run fingerprint.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, FieldError, Result};
use crate::objective::{BasePoLoss, ConflictMode, ObjectiveSpec, Scenario};
use crate::rng::derive_seed;
use crate::scorer::{Activation, ScorerMode, ScorerSpec};
use crate::task::TaskSpec;
use crate::train::TrainSchedule;

/// One sweep axis: several values of a single knob, everything else fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", rename_all = "snake_case")]
pub enum SweepAxis {
    /// Confidence thresholds re-evaluated from cached dumps; no retraining.
    Threshold { thresholds: Vec<f64> },
    /// Explicit-conflict strengths.
    Alpha { alphas: Vec<f64> },
    /// Strong-model hidden-layer ladders, weak teacher held fixed.
    StrongCapacity { strong_capacity: Vec<Vec<usize>> },
}

/// A fully normalized experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub task: TaskSpec,
    pub weak_spec: ScorerSpec,
    pub strong_spec: ScorerSpec,
    pub intermediate_specs: Vec<ScorerSpec>,
    pub objective: ObjectiveSpec,
    pub schedule: TrainSchedule,
    /// Confidence threshold T for the knowledge partition.
    pub threshold: f64,
    /// When set, keep only weak labels whose confidence toward the correct
    /// label reaches this bound (implicit conflict only).
    pub filter_high_confidence: Option<f64>,
    pub sweep: Option<SweepAxis>,
    /// Root seed all component seeds derive from.
    pub root_seed: u64,
}

pub const DEFAULT_THRESHOLD: f64 = 0.75;
pub const DEFAULT_STRONG_HIDDEN: &[usize] = &[64];

impl PipelineConfig {
    /// The all-defaults config at a given root seed.
    pub fn default_with_seed(seed: u64) -> Self {
        parse_config_with_seed("", Some(seed)).expect("empty config is valid")
    }

    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(&canonical);
        hex::encode(hasher.finalize())
    }

    /// Normalized TOML echo with every default made explicit.
    pub fn to_normalized_toml(&self) -> String {
        toml::to_string(&RawConfig::from(self)).expect("normalized config serializes")
    }

    /// Point config for a threshold-sweep entry: the sweep axis is dropped
    /// so the fingerprint matches a standalone run at that threshold.
    pub fn with_threshold(&self, threshold: f64) -> Self {
        PipelineConfig {
            threshold,
            sweep: None,
            ..self.clone()
        }
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        let mut cfg = self.clone();
        cfg.objective.alpha = alpha;
        cfg.sweep = None;
        cfg
    }

    pub fn with_strong_hidden(&self, hidden_layers: Vec<usize>) -> Self {
        let mut cfg = self.clone();
        cfg.strong_spec.hidden_layers = hidden_layers;
        cfg.sweep = None;
        cfg
    }

    fn validate(&self) -> Vec<FieldError> {
        let mut errors = Vec::new();
        errors.extend(self.task.validate("task"));
        errors.extend(self.weak_spec.validate("weak"));
        errors.extend(self.strong_spec.validate("strong"));
        for (i, spec) in self.intermediate_specs.iter().enumerate() {
            errors.extend(spec.validate(&format!("intermediate[{i}]")));
        }
        errors.extend(self.objective.validate("objective"));
        errors.extend(self.schedule.validate("schedule"));

        if !(self.threshold > 0.5 && self.threshold < 1.0) {
            errors.push(FieldError {
                field: "run.threshold".into(),
                message: format!("must be in (0.5, 1), got {}", self.threshold),
            });
        }
        if let Some(filter) = self.filter_high_confidence {
            if !(filter > 0.5 && filter < 1.0) {
                errors.push(FieldError {
                    field: "run.filter_high_confidence".into(),
                    message: format!("must be in (0.5, 1), got {filter}"),
                });
            }
            if self.objective.conflict != ConflictMode::Implicit {
                errors.push(FieldError {
                    field: "run.filter_high_confidence".into(),
                    message: "high-confidence filtering requires objective.conflict = implicit"
                        .into(),
                });
            }
        }

        // Capability ladder: strictly increasing from weak to strong, with
        // intermediates strictly between. An intermediate equal to the weak
        // spec is allowed as the degenerate direct-supervision rung.
        let dim = self.task.feature_dim;
        if dim > 0 {
            let weak_params = self.weak_spec.param_count(dim);
            let strong_params = self.strong_spec.param_count(dim);
            if weak_params >= strong_params {
                errors.push(FieldError {
                    field: "strong.hidden_layers".into(),
                    message: format!(
                        "strong model must have more parameters than the weak model \
                         ({strong_params} vs {weak_params})"
                    ),
                });
            }
            let mut last = weak_params;
            for (i, spec) in self.intermediate_specs.iter().enumerate() {
                let p = spec.param_count(dim);
                let degenerate = spec == &self.weak_spec;
                if !degenerate && (p <= weak_params || p >= strong_params) {
                    errors.push(FieldError {
                        field: format!("intermediate[{i}].hidden_layers"),
                        message: format!(
                            "intermediate parameter count {p} must lie strictly between \
                             weak ({weak_params}) and strong ({strong_params})"
                        ),
                    });
                }
                if p < last {
                    errors.push(FieldError {
                        field: format!("intermediate[{i}].hidden_layers"),
                        message: "intermediate chain must be non-decreasing in parameter count"
                            .into(),
                    });
                }
                last = p;
            }
        }

        if let Some(sweep) = &self.sweep {
            self.validate_sweep(sweep, &mut errors);
        }
        errors
    }

    fn validate_sweep(&self, sweep: &SweepAxis, errors: &mut Vec<FieldError>) {
        match sweep {
            SweepAxis::Threshold { thresholds } => {
                if thresholds.is_empty() {
                    errors.push(FieldError {
                        field: "sweep.thresholds".into(),
                        message: "sweep axis must be non-empty".into(),
                    });
                }
                for (i, t) in thresholds.iter().enumerate() {
                    if !(*t > 0.5 && *t < 1.0) {
                        errors.push(FieldError {
                            field: format!("sweep.thresholds[{i}]"),
                            message: format!("must be in (0.5, 1), got {t}"),
                        });
                    }
                }
            }
            SweepAxis::Alpha { alphas } => {
                if alphas.is_empty() {
                    errors.push(FieldError {
                        field: "sweep.alphas".into(),
                        message: "sweep axis must be non-empty".into(),
                    });
                }
                for (i, a) in alphas.iter().enumerate() {
                    if !(*a >= 0.0 && a.is_finite()) {
                        errors.push(FieldError {
                            field: format!("sweep.alphas[{i}]"),
                            message: format!("must be in [0, inf), got {a}"),
                        });
                    }
                }
            }
            SweepAxis::StrongCapacity { strong_capacity } => {
                if strong_capacity.is_empty() {
                    errors.push(FieldError {
                        field: "sweep.strong_capacity".into(),
                        message: "sweep axis must be non-empty".into(),
                    });
                }
                let dim = self.task.feature_dim;
                let weak_params = self.weak_spec.param_count(dim);
                let mut last = weak_params;
                for (i, hidden) in strong_capacity.iter().enumerate() {
                    let spec = ScorerSpec {
                        hidden_layers: hidden.clone(),
                        ..self.strong_spec.clone()
                    };
                    let params = spec.param_count(dim);
                    if params <= weak_params {
                        errors.push(FieldError {
                            field: format!("sweep.strong_capacity[{i}]"),
                            message: format!(
                                "rung must exceed the weak model's {weak_params} parameters"
                            ),
                        });
                    }
                    if params <= last && i > 0 {
                        errors.push(FieldError {
                            field: format!("sweep.strong_capacity[{i}]"),
                            message: "capacity ladder must be strictly increasing in parameter count"
                                .into(),
                        });
                    }
                    last = params;
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Raw TOML schema
// ---------------------------------------------------------------------------

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTask {
    #[serde(skip_serializing_if = "Option::is_none")]
    feature_dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    easy_dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    hard_complexity: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    label_noise: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    helpful_conflict_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    split_sizes: Option<[usize; 4]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tier_mix: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScorer {
    #[serde(skip_serializing_if = "Option::is_none")]
    hidden_layers: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    activation: Option<Activation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    init_scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    /// Echoed by normalization; derived from the scenario when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    mode: Option<ScorerMode>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObjective {
    #[serde(skip_serializing_if = "Option::is_none")]
    scenario: Option<Scenario>,
    #[serde(skip_serializing_if = "Option::is_none")]
    conflict: Option<ConflictMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    base_po_loss: Option<BasePoLoss>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dpo_norm_l: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    helpful_weight: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    #[serde(skip_serializing_if = "Option::is_none")]
    epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sft_epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    learning_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    momentum: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    batch_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    filter_high_confidence: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    task: Option<RawTask>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weak: Option<RawScorer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    strong: Option<RawScorer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    intermediate: Option<Vec<RawScorer>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    objective: Option<RawObjective>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    schedule: Option<RawSchedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    run: Option<RawRun>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sweep: Option<SweepAxis>,
}

impl From<&PipelineConfig> for RawConfig {
    fn from(cfg: &PipelineConfig) -> Self {
        let scorer = |s: &ScorerSpec| RawScorer {
            hidden_layers: Some(s.hidden_layers.clone()),
            activation: Some(s.activation),
            init_scale: Some(s.init_scale),
            seed: Some(s.seed),
            mode: Some(s.mode),
        };
        RawConfig {
            task: Some(RawTask {
                feature_dim: Some(cfg.task.feature_dim),
                easy_dim: Some(cfg.task.easy_dim),
                hard_complexity: Some(cfg.task.hard_complexity),
                label_noise: Some(cfg.task.label_noise),
                helpful_conflict_rate: Some(cfg.task.helpful_conflict_rate),
                split_sizes: Some(cfg.task.split_sizes),
                tier_mix: Some(cfg.task.tier_mix),
                seed: Some(cfg.task.seed),
            }),
            weak: Some(scorer(&cfg.weak_spec)),
            strong: Some(scorer(&cfg.strong_spec)),
            intermediate: if cfg.intermediate_specs.is_empty() {
                None
            } else {
                Some(cfg.intermediate_specs.iter().map(scorer).collect())
            },
            objective: Some(RawObjective {
                scenario: Some(cfg.objective.scenario),
                conflict: Some(cfg.objective.conflict),
                alpha: Some(cfg.objective.alpha),
                base_po_loss: Some(cfg.objective.base_po_loss),
                beta: Some(cfg.objective.beta),
                gamma: Some(cfg.objective.gamma),
                dpo_norm_l: Some(cfg.objective.dpo_norm_l),
                helpful_weight: Some(cfg.objective.helpful_weight),
            }),
            schedule: Some(RawSchedule {
                epochs: Some(cfg.schedule.epochs),
                sft_epochs: Some(cfg.schedule.sft_epochs),
                learning_rate: Some(cfg.schedule.learning_rate),
                momentum: Some(cfg.schedule.momentum),
                batch_size: Some(cfg.schedule.batch_size),
                seed: Some(cfg.schedule.seed),
            }),
            run: Some(RawRun {
                seed: Some(cfg.root_seed),
                threshold: Some(cfg.threshold),
                filter_high_confidence: cfg.filter_high_confidence,
            }),
            sweep: cfg.sweep.clone(),
        }
    }
}

const TOP_KEYS: &[&str] = &[
    "task",
    "weak",
    "strong",
    "intermediate",
    "objective",
    "schedule",
    "run",
    "sweep",
];
const TASK_KEYS: &[&str] = &[
    "feature_dim",
    "easy_dim",
    "hard_complexity",
    "label_noise",
    "helpful_conflict_rate",
    "split_sizes",
    "tier_mix",
    "seed",
];
const SCORER_KEYS: &[&str] = &["hidden_layers", "activation", "init_scale", "seed", "mode"];
const OBJECTIVE_KEYS: &[&str] = &[
    "scenario",
    "conflict",
    "alpha",
    "base_po_loss",
    "beta",
    "gamma",
    "dpo_norm_l",
    "helpful_weight",
];
const SCHEDULE_KEYS: &[&str] = &[
    "epochs",
    "sft_epochs",
    "learning_rate",
    "momentum",
    "batch_size",
    "seed",
];
const RUN_KEYS: &[&str] = &["seed", "threshold", "filter_high_confidence"];
const SWEEP_KEYS: &[&str] = &["axis", "thresholds", "alphas", "strong_capacity"];

fn section_keys(section: &str) -> &'static [&'static str] {
    match section {
        "task" => TASK_KEYS,
        "weak" | "strong" | "intermediate" => SCORER_KEYS,
        "objective" => OBJECTIVE_KEYS,
        "schedule" => SCHEDULE_KEYS,
        "run" => RUN_KEYS,
        "sweep" => SWEEP_KEYS,
        _ => &[],
    }
}

/// Collects every unknown key in the document as its own field error and
/// strips it out, so range validation still reaches the remaining fields
/// and the error list is complete rather than first-failure-only.
fn extract_unknown_keys(table: &mut toml::Table, errors: &mut Vec<FieldError>) {
    let mut drop_sections = Vec::new();
    for (key, value) in table.iter_mut() {
        if !TOP_KEYS.contains(&key.as_str()) {
            errors.push(FieldError {
                field: key.clone(),
                message: "unknown section".into(),
            });
            drop_sections.push(key.clone());
            continue;
        }
        let known = section_keys(key);
        let strip = |section: &mut toml::Table, label: String, errors: &mut Vec<FieldError>| {
            let unknown: Vec<String> = section
                .keys()
                .filter(|k| !known.contains(&k.as_str()))
                .cloned()
                .collect();
            for inner in unknown {
                errors.push(FieldError {
                    field: format!("{label}.{inner}"),
                    message: "unknown key".into(),
                });
                section.remove(&inner);
            }
        };
        match value {
            toml::Value::Table(section) => strip(section, key.clone(), errors),
            toml::Value::Array(items) if key == "intermediate" => {
                for (i, item) in items.iter_mut().enumerate() {
                    if let toml::Value::Table(section) = item {
                        strip(section, format!("{key}[{i}]"), errors);
                    }
                }
            }
            _ => {}
        }
    }
    for key in drop_sections {
        table.remove(&key);
    }
}

/// Parses and normalizes a config document.
pub fn parse_config(text: &str) -> Result<PipelineConfig> {
    parse_config_with_seed(text, None)
}

/// Parses a config, optionally overriding the root seed (the CLI `--seed`).
pub fn parse_config_with_seed(text: &str, seed_override: Option<u64>) -> Result<PipelineConfig> {
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
        Error::Config(vec![FieldError {
            field: "<document>".into(),
            message: e.message().to_string(),
        }])
    })?;

    let mut errors = Vec::new();
    extract_unknown_keys(&mut table, &mut errors);

    let raw: RawConfig = match toml::Table::try_into(table) {
        Ok(raw) => raw,
        Err(e) => {
            errors.push(FieldError {
                field: "<document>".into(),
                message: e.message().to_string(),
            });
            return Err(Error::Config(errors));
        }
    };

    let cfg = normalize(raw, seed_override);
    errors.extend(cfg.validate());
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Config(errors))
    }
}

fn normalize(raw: RawConfig, seed_override: Option<u64>) -> PipelineConfig {
    let run = raw.run.unwrap_or_default();
    let root_seed = seed_override.or(run.seed).unwrap_or(0);

    let objective_raw = raw.objective.unwrap_or_default();
    let scenario = objective_raw.scenario.unwrap_or(Scenario::RewardModeling);
    let base_po_loss = objective_raw.base_po_loss.unwrap_or(BasePoLoss::Simpo);
    let objective = ObjectiveSpec {
        scenario,
        conflict: objective_raw.conflict.unwrap_or(ConflictMode::Explicit),
        alpha: objective_raw.alpha.unwrap_or(0.5),
        base_po_loss,
        beta: objective_raw
            .beta
            .unwrap_or_else(|| base_po_loss.default_beta()),
        gamma: objective_raw.gamma.unwrap_or(1.0),
        dpo_norm_l: objective_raw.dpo_norm_l.unwrap_or(50.0),
        helpful_weight: objective_raw.helpful_weight.unwrap_or(1.0),
    };
    let mode = match scenario {
        Scenario::RewardModeling => ScorerMode::RewardHead,
        Scenario::Preference => ScorerMode::PolicyScorer,
    };

    let task_raw = raw.task.unwrap_or_default();
    let task_defaults = TaskSpec::default();
    let task = TaskSpec {
        feature_dim: task_raw.feature_dim.unwrap_or(task_defaults.feature_dim),
        easy_dim: task_raw.easy_dim.unwrap_or(task_defaults.easy_dim),
        hard_complexity: task_raw
            .hard_complexity
            .unwrap_or(task_defaults.hard_complexity),
        label_noise: task_raw.label_noise.unwrap_or(task_defaults.label_noise),
        helpful_conflict_rate: task_raw
            .helpful_conflict_rate
            .unwrap_or(task_defaults.helpful_conflict_rate),
        split_sizes: task_raw.split_sizes.unwrap_or(task_defaults.split_sizes),
        tier_mix: task_raw.tier_mix.unwrap_or(task_defaults.tier_mix),
        seed: task_raw
            .seed
            .unwrap_or_else(|| derive_seed(root_seed, "task")),
    };

    let scorer = |raw: Option<RawScorer>, default_hidden: &[usize], stream: &str| {
        let raw = raw.unwrap_or_default();
        ScorerSpec {
            mode: raw.mode.unwrap_or(mode),
            hidden_layers: raw.hidden_layers.unwrap_or_else(|| default_hidden.to_vec()),
            activation: raw.activation.unwrap_or(Activation::Tanh),
            init_scale: raw.init_scale.unwrap_or(1.0),
            seed: raw.seed.unwrap_or_else(|| derive_seed(root_seed, stream)),
        }
    };
    let weak_spec = scorer(raw.weak, &[], "init/weak");
    let strong_spec = scorer(raw.strong, DEFAULT_STRONG_HIDDEN, "init/strong");
    let intermediate_specs: Vec<ScorerSpec> = raw
        .intermediate
        .unwrap_or_default()
        .into_iter()
        .enumerate()
        .map(|(i, s)| scorer(Some(s), &[], &format!("init/intermediate/{i}")))
        .collect();

    let schedule_raw = raw.schedule.unwrap_or_default();
    let schedule_defaults = TrainSchedule::default();
    let schedule = TrainSchedule {
        epochs: schedule_raw.epochs.unwrap_or(schedule_defaults.epochs),
        sft_epochs: schedule_raw
            .sft_epochs
            .unwrap_or(schedule_defaults.sft_epochs),
        learning_rate: schedule_raw
            .learning_rate
            .unwrap_or(schedule_defaults.learning_rate),
        momentum: schedule_raw.momentum.unwrap_or(schedule_defaults.momentum),
        batch_size: schedule_raw
            .batch_size
            .unwrap_or(schedule_defaults.batch_size),
        seed: schedule_raw
            .seed
            .unwrap_or_else(|| derive_seed(root_seed, "shuffle")),
    };

    PipelineConfig {
        task,
        weak_spec,
        strong_spec,
        intermediate_specs,
        objective,
        schedule,
        threshold: run.threshold.unwrap_or(DEFAULT_THRESHOLD),
        filter_high_confidence: run.filter_high_confidence,
        sweep: raw.sweep,
        root_seed,
    }
}
