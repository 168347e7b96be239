//! Agent-based simulation of filter-bubble effects in a synthetic online
//! community.
//!
//! Agents with topic-model interests post short messages to their friends in a
//! preferential-attachment network. Each agent's personalisation filter ranks
//! its inbox, shows the top `b` messages, and learns from the agent's relevance
//! ratings. Metrics track how narrow each agent's exposure becomes.

pub mod config;
pub mod engine;
pub mod error;
pub mod filter;
pub mod metrics;
pub mod network;
pub mod report;
pub mod rng;
pub mod sweep;
pub mod topics;

pub use config::SimConfig;
pub use engine::{run_simulation, run_simulation_observed, IterationReport, MetricSeries, Simulation};
pub use error::{ConfigError, Error, FieldError, Result};
pub use filter::{FilterKind, FilterState};
pub use metrics::{AgentMetrics, Metric, MetricRecord, Scope};
pub use network::{AgentId, Network, StratumAssignment};
pub use rng::{CountMode, ProbabilityVector, RngStream};
pub use sweep::{run_sweep, run_sweep_observed, GridPoint, GridRun, SweepOptions, SweepResult};
pub use topics::{AgentProfile, Interest, Message, MessageId, TopicWorld};
