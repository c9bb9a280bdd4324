//! Deterministic, seedable agent-based simulator of a three-level fractal
//! social organization (FSO) that detects, verifies and responds to falls of
//! elderly agents.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is a pure
//! function of the configuration and the seeds; IO, CLI and file formats live
//! in the companion `fso-sim` crate.
//!
//! Layout:
//!
//! - [`world`]: the bounded grid, agents and their kinematics.
//! - [`sensor`]: probabilities, tosses and the single/dual detector models.
//! - [`fso`]: circles, protocols p1..p4, role-flow enrollment, escalation and
//!   cancellation.
//! - [`case`]: alarm case records.
//! - [`scenario`]: the per-tick S1/S2 drivers and [`scenario::Simulation`].
//! - [`metrics`]: confusion counters, cost ledger and derived figures.
//! - [`trace`]: the structured per-event trace and its replay fold.
//! - [`seed`]: counter-based seed derivation for replicated sweeps.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod case;
pub mod fso;
pub mod metrics;
pub mod scenario;
pub mod seed;
pub mod sensor;
pub mod trace;
pub mod world;

pub use case::{CaseId, CaseRecord, GroundTruth, TerminalKind};
pub use fso::{Engine, Level, ProtocolKind, ProtocolState, Role};
pub use metrics::{MetricError, MetricsReport};
pub use scenario::{run_simulation, ConfigError, Scenario, ScenarioConfig, Simulation};
pub use sensor::{Probability, SensorModel};
pub use world::{AgentId, AgentKind, AgentState, AgentStatus, Position, WorldConfig};

/// Discrete simulation time step index.
pub type Tick = u64;
