//! A desk-scale laboratory for studying deception in weak-to-strong alignment.
//!
//! The crate builds a fully synthetic pairwise-preference world with an
//! easy/hard difficulty structure, trains tiny differentiable scorers of
//! different capacities on it, and runs weak-to-strong supervision protocols
//! under conflicting objectives. The analysis side partitions the knowledge
//! space by model confidence and computes deception scores: the fraction of
//! the conflict tax that lands where the strong model is confident but the
//! weak supervisor is not.
//!
//! The main entry points are:
//!
//! - [`task`]: synthetic preference-pair generation ([`task::TaskSpec`],
//!   [`task::generate_bundle`]).
//! - [`scorer`]: reward-head / policy scorers ([`scorer::ScorerModel`]).
//! - [`objective`]: every supported training loss, parameterized by scenario
//!   and conflict mode ([`objective::ObjectiveSpec`]).
//! - [`train`]: deterministic minibatch SGD with exact analytic gradients.
//! - [`analysis`]: knowledge partitions, accuracies, deception scores.
//! - [`pipeline`]: end-to-end protocols (ground-truth training, relabeling,
//!   weak-to-strong runs, bootstrapping chains, sweeps).
//! - [`config`] and [`io`]: the on-disk experiment config and artifact
//!   formats used by the `w2s` command-line tool.
//!
//! Every run is a pure function of its configuration: all randomness flows
//! from a single root seed through named stream derivation, so repeated runs
//! produce bit-identical artifacts.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod objective;
pub mod pipeline;
pub mod rng;
pub mod scorer;
pub mod task;
pub mod train;

pub use analysis::{ExperimentReport, KnowledgePartition, Region};
pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use objective::{BasePoLoss, ConflictMode, ObjectiveSpec, Scenario};
pub use scorer::{Activation, RoleTag, ScorerMode, ScorerModel, ScorerSpec};
pub use task::{DatasetBundle, PreferenceSample, TaskSpec, Tier};
pub use train::TrainSchedule;
