use super::params::{check, param_set};
use crate::diffusion::DiffusionGrid;
use crate::engine::{Agent, AgentKind, Behavior, BehaviorInstance};
use crate::exchange::{uniform_population, PartitionMap};
use crate::physics::ForceParams;
use crate::spatial::UniformGrid;
use crate::{Real3, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterParams {
    pub secretion_quantity: f64,
    pub gradient_weight: f64,
    /// Cells per type; there are two types.
    pub n_cells: usize,
    pub cell_diameter: f64,
    pub nu: f64,
    pub mu: f64,
    pub resolution: usize,
    pub diffusion_dt: f64,
    pub space_length: f64,
    pub steps: u64,
}

param_set!(ClusterParams { secretion_quantity, gradient_weight, n_cells, cell_diameter, nu, mu, resolution, diffusion_dt, space_length, steps });

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            secretion_quantity: 1.0,
            gradient_weight: 0.75,
            n_cells: 2000,
            cell_diameter: 8.0,
            nu: 0.4,
            mu: 0.0,
            resolution: 64,
            diffusion_dt: 1.0,
            space_length: 250.0,
            steps: 6000,
        }
    }
}

pub const SUBSTANCES: [&str; 2] = ["substance_0", "substance_1"];
pub const NEAREST: usize = 10;

impl ClusterParams {
    pub fn validate(&self) -> Result<()> {
        check(self.resolution >= 2, || "resolution must be at least 2".into())?;
        check(self.cell_diameter > 0.0 && self.space_length > self.cell_diameter, || "need 0 < cell_diameter < space_length".into())?;
        check(self.nu >= 0.0 && self.mu >= 0.0 && self.diffusion_dt > 0.0, || "invalid diffusion parameters".into())
    }

    pub fn bounds(&self) -> (Real3, Real3) {
        (Real3::zeros(), Real3::repeat(self.space_length))
    }

    pub fn force_params(&self) -> ForceParams {
        ForceParams::default()
    }

    pub fn substances(&self) -> Result<Vec<DiffusionGrid>> {
        let (lo, hi) = self.bounds();
        SUBSTANCES.iter().map(|name| DiffusionGrid::over_domain(*name, lo, hi, self.resolution, self.nu, self.mu, self.diffusion_dt)).collect()
    }

    pub fn initial_agents(&self, map: &PartitionMap, rank: Option<u32>, seed: u64) -> Result<Vec<Agent>> {
        let (lo, hi) = self.bounds();
        uniform_population(map, rank, lo, hi, 2 * self.n_cells, seed, |key, p, rng| {
            let t = rng.below(2) as u16;
            Agent::new(key, p, self.cell_diameter, AgentKind::SomaCell { cell_type: t as u8 })
                .with_behavior(BehaviorInstance::new(Behavior::Secretion { substance: t, quantity: self.secretion_quantity }))
                .with_behavior(BehaviorInstance::new(Behavior::Chemotaxis { substance: t, weight: self.gradient_weight }))
        })
    }
}

fn cell_type(a: &Agent) -> Option<u8> {
    match a.kind {
        AgentKind::SomaCell { cell_type } => Some(cell_type),
        _ => None,
    }
}

/// Mean over cells of the fraction of same-type cells among the `k` nearest other cells.
/// Ties in distance are broken by key, so the value does not depend on storage order.
pub fn same_type_fraction(agents: &[Agent], k: usize) -> Result<f64> {
    if agents.len() <= k || k == 0 {
        return Ok(0.0);
    }
    let positions: Vec<Real3> = agents.iter().map(|a| a.position).collect();
    let (lo, hi) = crate::spatial::bounding_box(&positions);
    let extent = (hi - lo).max().max(1e-9);
    // about k cells per box on average
    let volume: f64 = (hi - lo).iter().map(|e| e.max(extent * 1e-3)).product();
    let box_length = (volume * k as f64 / agents.len() as f64).cbrt().max(extent * 1e-3);
    let grid = UniformGrid::build(&positions, box_length)?;
    let mut total = 0.0;
    let mut found: Vec<(f64, u64, usize)> = Vec::with_capacity(4 * k);
    for (i, a) in agents.iter().enumerate() {
        let mut radius = box_length;
        loop {
            found.clear();
            grid.for_each_within(&a.position, radius, |j, d2| {
                if j != i {
                    found.push((d2, agents[j].key, j));
                }
            });
            if found.len() >= k || radius > 2.0 * extent {
                break;
            }
            radius *= 2.0;
        }
        found.sort_unstable_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        let mine = cell_type(a);
        let same = found.iter().take(k).filter(|&&(_, _, j)| cell_type(&agents[j]) == mine).count();
        total += same as f64 / k as f64;
    }
    Ok(total / agents.len() as f64)
}
