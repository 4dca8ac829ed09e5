use std::fmt;
use std::str::FromStr;

use super::agent::Agent;
use super::ids::LocalAgentId;
use super::store::AgentStore;
use crate::{Error, Result};

/// When agent mutations become visible to other agents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ExecutionMode {
    /// Writes are visible to agents processed later in the same iteration. Runs on one worker.
    InPlace,
    /// Neighbor reads observe the state at the start of the iteration.
    #[default]
    Copy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ExecutionOrder {
    /// All ops for one agent, then the next agent.
    #[default]
    Column,
    /// One op over all agents, then the next op.
    Row,
}

impl FromStr for ExecutionMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "copy" => Ok(ExecutionMode::Copy),
            "in-place" | "inplace" => Ok(ExecutionMode::InPlace),
            _ => Err(Error::InvalidParameter(format!("unknown execution mode `{s}`"))),
        }
    }
}

impl FromStr for ExecutionOrder {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "column" => Ok(ExecutionOrder::Column),
            "row" => Ok(ExecutionOrder::Row),
            _ => Err(Error::InvalidParameter(format!("unknown execution order `{s}`"))),
        }
    }
}

impl fmt::Display for ExecutionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExecutionMode::Copy => "copy",
            ExecutionMode::InPlace => "in-place",
        })
    }
}

impl fmt::Display for ExecutionOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExecutionOrder::Column => "column",
            ExecutionOrder::Row => "row",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpKind {
    Agent,
    StandalonePre,
    StandalonePost,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OperationDescriptor {
    pub name: &'static str,
    pub kind: OpKind,
    pub frequency: u32,
}

impl OperationDescriptor {
    pub fn new(name: &'static str, kind: OpKind, frequency: u32) -> Result<Self> {
        if frequency == 0 {
            return Err(Error::InvalidParameter(format!("operation `{name}` has frequency 0")));
        }
        Ok(Self { name, kind, frequency })
    }

    pub fn is_due(&self, iteration: u64) -> bool {
        iteration % u64::from(self.frequency) == 0
    }

    /// Executions over iterations `0..iterations`.
    pub fn executions(&self, iterations: u64) -> u64 {
        iterations.div_ceil(u64::from(self.frequency))
    }
}

/// Worker-private pending additions and removals, committed between iterations.
#[derive(Debug)]
pub struct ExecutionContext {
    pub mode: ExecutionMode,
    pending_additions: Vec<Vec<Agent>>,
    pending_removals: Vec<Vec<LocalAgentId>>,
}

impl ExecutionContext {
    pub fn new(mode: ExecutionMode, workers: usize) -> Self {
        let workers = workers.max(1);
        Self {
            mode,
            pending_additions: (0..workers).map(|_| Vec::new()).collect(),
            pending_removals: (0..workers).map(|_| Vec::new()).collect(),
        }
    }

    pub fn workers(&self) -> usize {
        self.pending_removals.len()
    }

    /// Records a removal for `worker`. The agent stays visible until [`Self::commit`].
    pub fn schedule_removal(&mut self, store: &AgentStore, worker: usize, id: LocalAgentId) -> Result<()> {
        store.check(id)?;
        let list = &mut self.pending_removals[worker];
        if list.contains(&id) {
            return Err(Error::DuplicateRemoval(id));
        }
        list.push(id);
        Ok(())
    }

    pub fn schedule_addition(&mut self, worker: usize, agent: Agent) {
        self.pending_additions[worker].push(agent);
    }

    pub fn pending(&self) -> (usize, usize) {
        (
            self.pending_additions.iter().map(Vec::len).sum(),
            self.pending_removals.iter().map(Vec::len).sum(),
        )
    }

    /// Applies removals, then additions. Returns the removal outcome and the new ids.
    pub fn commit(&mut self, store: &mut AgentStore) -> Result<(super::store::RemovalOutcome, Vec<LocalAgentId>)> {
        let workers = self.workers();
        let removals = std::mem::replace(&mut self.pending_removals, (0..workers).map(|_| Vec::new()).collect());
        let out = store.commit_removals(&removals, workers)?;
        let additions = std::mem::replace(&mut self.pending_additions, (0..workers).map(|_| Vec::new()).collect());
        let ids = store.commit_additions(additions)?;
        Ok((out, ids))
    }
}
