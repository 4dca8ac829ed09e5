use thiserror::Error;

use crate::engine::LocalAgentId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("stale agent handle {0}")]
    StaleHandle(LocalAgentId),

    #[error("agent {0} scheduled for removal more than once")]
    DuplicateRemoval(LocalAgentId),

    #[error("invalid agent record: {0}")]
    InvalidAgent(String),

    #[error("agent kind `{0}` cannot divide")]
    NotVolumetric(&'static str),

    #[error("agent index {0} is not part of the neighbor grid")]
    NotInGrid(usize),

    #[error("ghost agent {0} is read-only")]
    ReadOnlyGhost(usize),

    #[error("morton coordinate {coord} exceeds {bits} bits")]
    MortonOverflow { coord: u64, bits: u32 },

    #[error("unstable diffusion parameters: nu*dt*sum(1/dx^2) = {0} > 0.5")]
    UnstableDiffusion(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{ranks} ranks cannot be laid out as blocks over {boxes} partition boxes")]
    TooManyRanks { ranks: usize, boxes: usize },

    #[error("kind tag {0:#x} is not registered")]
    UnregisteredKind(u32),

    #[error("malformed frame at byte {offset}: {reason}")]
    Decode { offset: usize, reason: String },

    #[error("reference epoch mismatch (frame {frame}, local {local}); full resend required")]
    EpochMismatch { frame: u64, local: u64 },

    #[error("decompression failed: {0}")]
    Codec(String),

    #[error("transport failure on rank {rank}: {reason}")]
    Transport { rank: u32, reason: String },

    #[error("behavior fault on agent with key {agent:#x}: {reason}")]
    BehaviorFault { agent: u64, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
