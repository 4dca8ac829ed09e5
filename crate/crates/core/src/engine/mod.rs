//! Agents, their behaviors, the dense store and the iteration loop.

mod agent;
mod behavior;
mod context;
mod ids;
mod ops;
pub(crate) mod par;
mod report;
pub mod rng;
mod simulation;
mod store;

pub use agent::{divide, sphere_diameter, sphere_volume, Agent, AgentKind, SirState, StaticState};
pub use behavior::{Behavior, BehaviorInstance};
pub use context::{ExecutionContext, ExecutionMode, ExecutionOrder, OpKind, OperationDescriptor};
pub use ids::{GlobalAgentId, GlobalIdAllocator, LocalAgentId};
pub use report::{RunOptions, RunStats, SimulationReport, Timings};
pub use simulation::simulate;
pub use store::{AgentStore, RemovalOutcome};
