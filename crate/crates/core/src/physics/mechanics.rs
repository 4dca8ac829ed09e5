use super::boundary::BoundaryCondition;
use super::force::{collision_force, tie_direction, ForceParams};
use crate::Real3;

/// Neighbor geometry as seen at the start of the iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeighborSphere {
    pub key: u64,
    pub position: Real3,
    pub radius: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MechanicalOutcome {
    pub force: Real3,
    pub displacement: Real3,
    pub new_position: Real3,
    pub nonzero_forces: u32,
}

/// Sum of pair forces on an agent. `neighbors` must be sorted by key so the floating-point
/// sum does not depend on storage order.
pub fn net_force(key: u64, position: &Real3, radius: f64, neighbors: &[NeighborSphere], params: &ForceParams, seed: u64, iteration: u64) -> (Real3, u32) {
    debug_assert!(neighbors.windows(2).all(|w| w[0].key <= w[1].key));
    let mut total = Real3::zeros();
    let mut nonzero = 0;
    for nb in neighbors {
        let tie = if nb.position == *position { tie_direction(seed, key, nb.key, iteration) } else { Real3::x() };
        let f = collision_force(position, radius, &nb.position, nb.radius, params, &tie);
        if f != Real3::zeros() {
            nonzero += 1;
            total += f;
        }
    }
    (total, nonzero)
}

/// Force-to-displacement rule: nothing below the threshold, otherwise scaled and clipped.
pub fn displacement(force: &Real3, params: &ForceParams) -> Real3 {
    let magnitude = force.norm();
    if magnitude <= params.force_threshold || magnitude == 0.0 {
        return Real3::zeros();
    }
    let d = force * params.dt_mech;
    let len = d.norm();
    if len > params.max_displacement {
        d * (params.max_displacement / len)
    } else {
        d
    }
}

#[allow(clippy::too_many_arguments)]
pub fn mechanical_step(
    key: u64,
    position: &Real3,
    radius: f64,
    neighbors: &[NeighborSphere],
    params: &ForceParams,
    bc: &BoundaryCondition,
    seed: u64,
    iteration: u64,
) -> MechanicalOutcome {
    let (force, nonzero_forces) = net_force(key, position, radius, neighbors, params, seed, iteration);
    let displacement = displacement(&force, params);
    let new_position = if displacement == Real3::zeros() { *position } else { bc.apply(position + displacement) };
    MechanicalOutcome { force, displacement, new_position, nonzero_forces }
}
