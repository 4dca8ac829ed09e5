//! Agent-based simulation engine.
//!
//! The crate is organised around the iteration loop in [`engine`]: agents live in a dense
//! [`engine::AgentStore`], neighbor queries go through the timestamped [`spatial::UniformGrid`],
//! mechanical interaction and boundary handling live in [`physics`], extracellular substances in
//! [`diffusion`], and the multi-rank machinery (partitioning, aura updates, migration, the wire
//! format and delta encoding) in [`exchange`]. [`models`] holds the four benchmark presets and
//! [`analysis`] the time-series plumbing together with the reference solutions used to validate
//! them.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod diffusion;
pub mod engine;
pub mod exchange;
pub mod models;
pub mod physics;
pub mod spatial;
pub mod verify;

mod error;

pub use error::{Error, Result};

/// Three-component real vector used for positions, forces and displacements.
pub type Real3 = nalgebra::Vector3<f64>;

pub use engine::{
    Agent, AgentKind, AgentStore, Behavior, BehaviorInstance, ExecutionMode, ExecutionOrder,
    GlobalAgentId, LocalAgentId, RunOptions, SimulationReport,
};
pub use models::ModelPreset;
