//! Crate-wide error types.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A single invalid field in an experiment configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    /// Dotted path of the offending key, e.g. `objective.alpha`.
    pub field: String,
    /// What was wrong, including the valid range where applicable.
    pub message: String,
}

impl std::fmt::Display for FieldError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected feature length {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("dataset generation failed: {0}")]
    Generation(String),

    #[error("infeasible tier mix: {0}")]
    InfeasibleTierMix(String),

    #[error("model role already assigned as {0}")]
    RoleAlreadySet(&'static str),

    #[error("model role {found} not accepted here: {expected}")]
    RoleMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("rejected configuration: {0}")]
    RejectedConfig(String),

    #[error("non-finite loss at training step {step} ({phase})")]
    NonFiniteLoss { phase: &'static str, step: usize },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("mismatched ids between partition and data: {0}")]
    IdMismatch(String),

    #[error("pipeline failure: {0}")]
    Pipeline(String),

    #[error("invalid config:\n{}", format_field_errors(.0))]
    Config(Vec<FieldError>),

    #[error("missing upstream artifact {artifact:?}: run `{needed_subcommand}` first")]
    Dependency {
        artifact: String,
        needed_subcommand: &'static str,
    },

    #[error("artifact format error in {path}: {message}")]
    Format { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_field_errors(errors: &[FieldError]) -> String {
    errors
        .iter()
        .map(|e| format!("  - {e}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl Error {
    /// Process exit code for the CLI: 0 ok, 2 config error, 3 dependency
    /// error, 4 training failure, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::RejectedConfig(_) => 2,
            Error::Dependency { .. } => 3,
            Error::NonFiniteLoss { .. } => 4,
            _ => 1,
        }
    }

    /// Stable machine-readable error kind used in emitted error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::Generation(_) => "generation",
            Error::InfeasibleTierMix(_) => "infeasible_tier_mix",
            Error::RoleAlreadySet(_) => "role_already_set",
            Error::RoleMismatch { .. } => "role_mismatch",
            Error::RejectedConfig(_) => "rejected_config",
            Error::NonFiniteLoss { .. } => "non_finite_loss",
            Error::EmptyInput(_) => "empty_input",
            Error::IdMismatch(_) => "id_mismatch",
            Error::Pipeline(_) => "pipeline",
            Error::Config(_) => "config",
            Error::Dependency { .. } => "dependency",
            Error::Format { .. } => "format",
            Error::Io(_) => "io",
        }
    }
}
