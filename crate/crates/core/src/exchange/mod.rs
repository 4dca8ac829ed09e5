//! Distributed execution over in-process ranks: partitioning, aura and migration, the agent wire
//! format and delta encoding.

mod aura;
pub mod codec;
pub mod delta;
pub mod frame;
mod init;
mod partition;
mod transport;

pub use aura::{decode_indices, decode_positions, encode_indices, encode_positions, plan_migration, select_aura, GhostSet, MigrationPlan};
pub use codec::{BlockCodec, CodecKind, Identity, Lz4};
pub use delta::{delta_decode, delta_encode, ChannelConfig, DeltaReceiver, DeltaSender, Reference};
pub use frame::{deserialize, serialize, DecodedBatch, NodeClass, TypeRegistry};
pub use init::{owned_subset, uniform_population};
pub use partition::{LocalPartitionView, PartitionMap};
pub use transport::{create_transports, RankTransport, Tag, TransportStats, DEFAULT_BATCH_BYTES};
