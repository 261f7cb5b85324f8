//! Deterministic interactive economies for long-horizon agent evaluation.
//!
//! Three environments share one episode protocol: a retail business
//! ([`vending`]), a freelancer's survival loop ([`freelance`]) and a content
//! platform ([`operation`]). The [`harness`] drives episodes with scripted
//! or external agents, and [`memory`] provides a three-tier agent memory.

pub mod action;
pub mod config;
pub mod episode;
pub mod freelance;
pub mod harness;
pub mod memory;
pub mod operation;
pub mod rng;
pub mod sim;
pub mod vending;

pub use action::{ActionCall, ActionError, ToolSpec};
pub use config::{ConfigError, EnvKind, EpisodeConfig};
pub use episode::{Episode, StepOutcome, TrajectoryRecord};
pub use rng::RngHub;
pub use sim::{ActionBudget, Clock, FailureReason, TerminationStatus};
