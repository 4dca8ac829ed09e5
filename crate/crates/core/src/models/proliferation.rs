use super::params::{check, param_set};
use crate::engine::{sphere_diameter, sphere_volume, Agent, AgentKind, Behavior, BehaviorInstance};
use crate::exchange::{owned_subset, PartitionMap};
use crate::physics::ForceParams;
use crate::{Real3, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ProliferationParams {
    pub cells_per_dim: usize,
    pub spacing: f64,
    pub initial_diameter: f64,
    pub target_diameter: f64,
    pub growth_speed: f64,
    /// Daughters do not inherit the growth behavior and the mother drops it, so every initial
    /// cell divides exactly once.
    pub divide_once: bool,
    pub dt_mech: f64,
    pub force_threshold: f64,
    pub steps: u64,
}

param_set!(ProliferationParams { cells_per_dim, spacing, initial_diameter, target_diameter, growth_speed, divide_once, dt_mech, force_threshold, steps });

impl Default for ProliferationParams {
    fn default() -> Self {
        Self {
            cells_per_dim: 3,
            spacing: 20.0,
            initial_diameter: 10.0,
            target_diameter: 14.0,
            growth_speed: 50.0,
            divide_once: true,
            dt_mech: 0.2,
            force_threshold: 0.01,
            steps: 100,
        }
    }
}

impl ProliferationParams {
    pub fn validate(&self) -> Result<()> {
        check(self.cells_per_dim >= 1, || "cells_per_dim must be at least 1".into())?;
        check(self.initial_diameter > 0.0 && self.target_diameter >= self.initial_diameter, || "need 0 < initial_diameter <= target_diameter".into())?;
        check(self.growth_speed > 0.0 && self.spacing > 0.0, || "growth_speed and spacing must be positive".into())?;
        check(self.dt_mech > 0.0 && self.force_threshold >= 0.0, || "invalid mechanics parameters".into())
    }

    /// Lattice extent plus a margin for division and pushing.
    pub fn bounds(&self) -> (Real3, Real3) {
        let margin = 4.0 * self.target_diameter;
        let side = (self.cells_per_dim - 1) as f64 * self.spacing;
        (Real3::repeat(-margin), Real3::repeat(side + margin))
    }

    pub fn interaction_length(&self) -> f64 {
        sphere_diameter(sphere_volume(self.target_diameter) + self.growth_speed)
    }

    pub fn force_params(&self) -> ForceParams {
        ForceParams { dt_mech: self.dt_mech, force_threshold: self.force_threshold, ..ForceParams::default() }
    }

    pub fn growth_cycle_steps(&self) -> u64 {
        ((sphere_volume(self.target_diameter) - sphere_volume(self.initial_diameter)) / self.growth_speed).ceil() as u64
    }

    pub fn initial_agents(&self, map: &PartitionMap, rank: Option<u32>) -> Vec<Agent> {
        let n = self.cells_per_dim;
        let behavior = BehaviorInstance {
            behavior: Behavior::GrowDivide { growth_rate: self.growth_speed, target_diameter: self.target_diameter, volume_ratio: 0.5 },
            copy_on_division: !self.divide_once,
            remove_on_division: self.divide_once,
        };
        let all = (0..n * n * n).map(|k| {
            let (x, y, z) = (k % n, (k / n) % n, k / (n * n));
            let p = Real3::new(x as f64, y as f64, z as f64) * self.spacing;
            Agent::new(k as u64, p, self.initial_diameter, AgentKind::Cell { age: 0 }).with_behavior(behavior.clone())
        });
        owned_subset(map, rank, all)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice() {
        let p = ProliferationParams::default();
        let (lo, hi) = p.bounds();
        let map = PartitionMap::new(lo, hi, 2, p.interaction_length(), 1).unwrap();
        let a = p.initial_agents(&map, None);
        assert_eq!(a.len(), 27);
        let split: usize = (0..2).map(|r| p.initial_agents(&map, Some(r)).len()).sum();
        assert_eq!(split, 27);
        assert!(p.growth_cycle_steps() < p.steps);
    }
}
