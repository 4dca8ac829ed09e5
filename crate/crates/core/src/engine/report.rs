use std::time::Duration;

use super::agent::Agent;
use super::context::{ExecutionMode, ExecutionOrder};
use crate::analysis::TimeSeries;
use crate::diffusion::DiffusionGrid;
use crate::exchange::ChannelConfig;
use crate::exchange::DEFAULT_BATCH_BYTES;

#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    pub seed: u64,
    /// `None` uses the preset's own step count.
    pub iterations: Option<u64>,
    /// Worker threads per rank; also the number of work blocks.
    pub workers: usize,
    pub ranks: usize,
    pub mode: ExecutionMode,
    pub order: ExecutionOrder,
    /// Morton sorting every this many iterations; 0 disables it.
    pub sort_frequency: u32,
    pub static_detection: bool,
    pub behavior_frequency: u32,
    pub mechanics_frequency: u32,
    pub diffusion_frequency: u32,
    pub partition_factor: u32,
    pub channel: ChannelConfig,
    pub batch_bytes: usize,
    /// Keep the final population in the report.
    pub keep_population: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            iterations: None,
            workers: 1,
            ranks: 1,
            mode: ExecutionMode::Copy,
            order: ExecutionOrder::Column,
            sort_frequency: 0,
            static_detection: false,
            behavior_frequency: 1,
            mechanics_frequency: 1,
            diffusion_frequency: 1,
            partition_factor: 1,
            channel: ChannelConfig::default(),
            batch_bytes: DEFAULT_BATCH_BYTES,
            keep_population: false,
        }
    }
}

/// Wall time per phase, summed over iterations, as measured on rank 0.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Timings {
    pub sorting: Duration,
    pub aura: Duration,
    pub neighbor_grid: Duration,
    pub agent_ops: Duration,
    pub commit: Duration,
    pub diffusion: Duration,
    pub migration: Duration,
    pub observe: Duration,
    pub total: Duration,
}

impl Timings {
    pub fn rows(&self) -> Vec<(&'static str, Duration)> {
        vec![
            ("sorting", self.sorting),
            ("aura", self.aura),
            ("neighbor_grid", self.neighbor_grid),
            ("agent_ops", self.agent_ops),
            ("commit", self.commit),
            ("diffusion", self.diffusion),
            ("migration", self.migration),
            ("observe", self.observe),
            ("total", self.total),
        ]
    }
}

/// Counters summed over all ranks.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunStats {
    pub force_calculations: u64,
    pub static_skips: u64,
    /// Agents visited by the agent operations, per iteration.
    pub agent_visits: Vec<u64>,
    /// Aura bytes put on the wire, per iteration.
    pub aura_bytes: Vec<u64>,
    pub migrated_agents: u64,
    /// Migration messages that carried at least one agent.
    pub migration_messages: u64,
    pub lookups: u64,
    pub global_ids_issued: u64,
    pub operation_runs: Vec<(&'static str, u64)>,
}

#[derive(Clone, Debug)]
pub struct SimulationReport {
    pub preset: &'static str,
    pub iterations: u64,
    pub series: TimeSeries,
    pub timings: Timings,
    /// Wall time of each iteration on rank 0, observation excluded.
    pub iteration_times: Vec<Duration>,
    pub stats: RunStats,
    /// Final population sorted by key, when requested.
    pub population: Option<Vec<Agent>>,
    /// Final substance lattices (replicated on every rank, so rank 0's copy is complete).
    pub substances: Vec<DiffusionGrid>,
}
