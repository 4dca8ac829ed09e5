use std::f64::consts::PI;

use super::params::{check, param_set, probability};
use crate::engine::{Agent, AgentKind, Behavior, BehaviorInstance};
use crate::exchange::{uniform_population, PartitionMap};
use crate::physics::ForceParams;
use crate::{Error, Real3, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct TumorParams {
    pub growth_rate: f64,
    pub max_diameter: f64,
    pub initial_diameter: f64,
    pub division_probability: f64,
    pub death_probability: f64,
    pub minimum_cell_age: u32,
    pub displacement_rate: f64,
    /// Upper bound on the mechanical displacement per step.
    pub max_speed: f64,
    /// Net force a cell must exceed before it moves.
    pub adherence: f64,
    pub n_cells: usize,
    /// Side of the cube the initial cells are scattered in.
    pub initial_extent: f64,
    pub space_length: f64,
    pub steps: u64,
}

param_set!(TumorParams {
    growth_rate,
    max_diameter,
    initial_diameter,
    division_probability,
    death_probability,
    minimum_cell_age,
    displacement_rate,
    max_speed,
    adherence,
    n_cells,
    initial_extent,
    space_length,
    steps,
});

impl Default for TumorParams {
    fn default() -> Self {
        Self {
            growth_rate: 42.0,
            max_diameter: 16.0,
            initial_diameter: 14.0,
            division_probability: 0.0215,
            death_probability: 0.033,
            minimum_cell_age: 87,
            displacement_rate: 0.005,
            max_speed: 1.0,
            adherence: 1.8,
            n_cells: 2000,
            initial_extent: 150.0,
            space_length: 600.0,
            steps: 360,
        }
    }
}

impl TumorParams {
    pub fn validate(&self) -> Result<()> {
        probability("division_probability", self.division_probability)?;
        probability("death_probability", self.death_probability)?;
        check(self.growth_rate > 0.0, || "growth_rate must be positive".into())?;
        check(self.initial_diameter > 0.0 && self.max_diameter >= self.initial_diameter, || "need 0 < initial_diameter <= max_diameter".into())?;
        check(self.initial_extent > 0.0 && self.space_length >= self.initial_extent, || "need 0 < initial_extent <= space_length".into())?;
        check(self.max_speed > 0.0 && self.adherence >= 0.0 && self.displacement_rate >= 0.0, || "invalid motility parameters".into())
    }

    pub fn bounds(&self) -> (Real3, Real3) {
        (Real3::repeat(-0.5 * self.space_length), Real3::repeat(0.5 * self.space_length))
    }

    /// Cells never get larger than this between two division checks.
    pub fn interaction_length(&self) -> f64 {
        crate::engine::sphere_diameter(crate::engine::sphere_volume(self.max_diameter) + self.growth_rate)
    }

    pub fn force_params(&self) -> ForceParams {
        ForceParams { force_threshold: self.adherence, max_displacement: self.max_speed, ..ForceParams::default() }
    }

    pub fn initial_agents(&self, map: &PartitionMap, rank: Option<u32>, seed: u64) -> Result<Vec<Agent>> {
        let h = 0.5 * self.initial_extent;
        let behavior = Behavior::TumorGrowth {
            growth_rate: self.growth_rate,
            max_diameter: self.max_diameter,
            division_probability: self.division_probability,
            death_probability: self.death_probability,
            min_age: self.minimum_cell_age,
            displacement_rate: self.displacement_rate,
        };
        uniform_population(map, rank, Real3::repeat(-h), Real3::repeat(h), self.n_cells, seed, |key, p, _| {
            Agent::new(key, p, self.initial_diameter, AgentKind::Cell { age: 0 }).with_behavior(BehaviorInstance::new(behavior.clone()))
        })
    }
}

/// Diameter of the sphere whose volume equals the bounding box of all centers, each side
/// widened by the mean cell diameter.
pub fn spheroid_diameter(agents: &[Agent]) -> Result<f64> {
    if agents.is_empty() {
        return Err(Error::InvalidParameter("spheroid diameter of an empty population".into()));
    }
    let mut lo = Real3::repeat(f64::INFINITY);
    let mut hi = Real3::repeat(f64::NEG_INFINITY);
    let mut radius_sum = 0.0;
    for a in agents {
        lo = lo.inf(&a.position);
        hi = hi.sup(&a.position);
        radius_sum += a.radius();
    }
    let mean_radius = radius_sum / agents.len() as f64;
    let volume: f64 = (hi - lo).iter().map(|e| e + 2.0 * mean_radius).product();
    Ok((6.0 * volume / PI).cbrt())
}
