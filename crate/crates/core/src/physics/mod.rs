//! Sphere mechanics, static-agent detection and boundary conditions.

mod boundary;
mod force;
mod mechanics;
mod static_detect;

pub use boundary::{BoundaryCondition, BoundaryMode};
pub use force::{collision_force, equilibrium_overlap, tie_direction, ForceParams};
pub use mechanics::{displacement, mechanical_step, net_force, MechanicalOutcome, NeighborSphere};
pub use static_detect::{is_static, next_state, IterationFacts};
