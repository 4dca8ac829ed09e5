//! The benchmark presets: initial populations, behaviors, parameters and observables.

mod clustering;
pub(crate) mod params;
mod proliferation;
mod sir;
mod spheroid;

pub use clustering::{same_type_fraction, ClusterParams, NEAREST, SUBSTANCES};
pub use params::ParamSet;
pub use proliferation::ProliferationParams;
pub use sir::{sir_counts, SirParams};
pub use spheroid::{spheroid_diameter, TumorParams};

use crate::diffusion::DiffusionGrid;
use crate::engine::Agent;
use crate::exchange::PartitionMap;
use crate::physics::{BoundaryCondition, BoundaryMode, ForceParams};
use crate::{Error, Real3, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum ModelPreset {
    Proliferation(ProliferationParams),
    Clustering(ClusterParams),
    Sir(SirParams),
    Spheroid(TumorParams),
}

impl ModelPreset {
    pub const NAMES: [&'static str; 4] = ["proliferation", "clustering", "sir", "spheroid"];

    /// Preset with default parameters. `sir-influenza` selects the second parameter column.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "proliferation" => Ok(Self::Proliferation(ProliferationParams::default())),
            "clustering" => Ok(Self::Clustering(ClusterParams::default())),
            "sir" | "sir-measles" => Ok(Self::Sir(SirParams::measles())),
            "sir-influenza" => Ok(Self::Sir(SirParams::influenza())),
            "spheroid" => Ok(Self::Spheroid(TumorParams::default())),
            _ => Err(Error::InvalidParameter(format!("unknown preset `{name}` (expected one of {})", Self::NAMES.join(", ")))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Proliferation(_) => "proliferation",
            Self::Clustering(_) => "clustering",
            Self::Sir(_) => "sir",
            Self::Spheroid(_) => "spheroid",
        }
    }

    fn params(&self) -> &dyn ParamSet {
        match self {
            Self::Proliferation(p) => p,
            Self::Clustering(p) => p,
            Self::Sir(p) => p,
            Self::Spheroid(p) => p,
        }
    }

    fn params_mut(&mut self) -> &mut dyn ParamSet {
        match self {
            Self::Proliferation(p) => p,
            Self::Clustering(p) => p,
            Self::Sir(p) => p,
            Self::Spheroid(p) => p,
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        self.params_mut().set(key, value)
    }

    pub fn entries(&self) -> Vec<(&'static str, String)> {
        self.params().entries()
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Proliferation(p) => p.validate(),
            Self::Clustering(p) => p.validate(),
            Self::Sir(p) => p.validate(),
            Self::Spheroid(p) => p.validate(),
        }
    }

    pub fn default_iterations(&self) -> u64 {
        match self {
            Self::Proliferation(p) => p.steps,
            Self::Clustering(p) => p.steps,
            Self::Sir(p) => p.steps,
            Self::Spheroid(p) => p.steps,
        }
    }

    pub fn bounds(&self) -> (Real3, Real3) {
        match self {
            Self::Proliferation(p) => p.bounds(),
            Self::Clustering(p) => p.bounds(),
            Self::Sir(p) => (Real3::zeros(), Real3::repeat(p.space_length)),
            Self::Spheroid(p) => p.bounds(),
        }
    }

    pub fn boundary(&self) -> Result<BoundaryCondition> {
        let (lo, hi) = self.bounds();
        let mode = match self {
            Self::Sir(_) => BoundaryMode::Toroidal,
            _ => BoundaryMode::Closed,
        };
        BoundaryCondition::new(mode, lo, hi)
    }

    /// Largest distance at which two agents can affect each other; the neighbor grid box length.
    pub fn interaction_length(&self) -> f64 {
        match self {
            Self::Proliferation(p) => p.interaction_length(),
            Self::Clustering(p) => p.cell_diameter,
            Self::Sir(p) => p.infection_radius,
            Self::Spheroid(p) => p.interaction_length(),
        }
    }

    pub fn force_params(&self) -> Option<ForceParams> {
        match self {
            Self::Proliferation(p) => Some(p.force_params()),
            Self::Clustering(p) => Some(p.force_params()),
            Self::Sir(_) => None,
            Self::Spheroid(p) => Some(p.force_params()),
        }
    }

    pub fn substances(&self) -> Result<Vec<DiffusionGrid>> {
        match self {
            Self::Clustering(p) => p.substances(),
            _ => Ok(Vec::new()),
        }
    }

    pub fn channels(&self) -> Vec<String> {
        let names: &[&str] = match self {
            Self::Proliferation(_) => &["cells", "mean_diameter"],
            Self::Clustering(_) => &["cells", "substance_0_total", "substance_1_total", "same_type_fraction"],
            Self::Sir(_) => &["susceptible", "infected", "recovered"],
            Self::Spheroid(_) => &["cells", "diameter"],
        };
        names.iter().map(|s| s.to_string()).collect()
    }

    /// Agents of the initial population owned by `rank` (all of them for `None`).
    pub fn initial_agents(&self, map: &PartitionMap, rank: Option<u32>, seed: u64) -> Result<Vec<Agent>> {
        match self {
            Self::Proliferation(p) => Ok(p.initial_agents(map, rank)),
            Self::Clustering(p) => p.initial_agents(map, rank, seed),
            Self::Sir(p) => p.initial_agents(map, rank, seed),
            Self::Spheroid(p) => p.initial_agents(map, rank, seed),
        }
    }

    /// One time-series row. `agents` must be sorted by key.
    pub fn observe(&self, agents: &[Agent], substances: &[DiffusionGrid]) -> Result<Vec<f64>> {
        debug_assert!(agents.windows(2).all(|w| w[0].key < w[1].key));
        let n = agents.len() as f64;
        Ok(match self {
            Self::Proliferation(_) => {
                let mean = if agents.is_empty() { 0.0 } else { agents.iter().map(|a| a.diameter).sum::<f64>() / n };
                vec![n, mean]
            }
            Self::Clustering(_) => {
                vec![n, substances[0].total(), substances[1].total(), same_type_fraction(agents, NEAREST)?]
            }
            Self::Sir(_) => sir_counts(agents).to_vec(),
            Self::Spheroid(_) => vec![n, if agents.is_empty() { 0.0 } else { spheroid_diameter(agents)? }],
        })
    }
}
