//! Neighbor search and spatial ordering.

mod balance;
mod brute;
mod grid;
pub mod morton;

pub use balance::{balance, morton_order, sort_and_balance, PartitionPlan, SortOutcome};
pub use brute::brute_force_neighbors;
pub use grid::{bounding_box, BoxIter, UniformGrid};
pub use morton::{compute_morton_offsets, enumerate_codes, MortonOffsets};
