use std::f64::consts::PI;

use super::behavior::BehaviorInstance;
use super::ids::{GlobalAgentId, LocalAgentId};
use crate::{Error, Real3, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SirState {
    Susceptible,
    Infected,
    Recovered,
}

impl SirState {
    pub fn code(self) -> u8 {
        match self {
            SirState::Susceptible => 0,
            SirState::Infected => 1,
            SirState::Recovered => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(SirState::Susceptible),
            1 => Some(SirState::Infected),
            2 => Some(SirState::Recovered),
            _ => None,
        }
    }
}

/// Concrete agent kind together with its kind-specific state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AgentKind {
    Cell { age: u32 },
    Person { state: SirState },
    SomaCell { cell_type: u8 },
}

impl AgentKind {
    pub const CELL_TAG: u32 = 1;
    pub const PERSON_TAG: u32 = 2;
    pub const SOMA_TAG: u32 = 3;

    pub fn tag(&self) -> u32 {
        match self {
            AgentKind::Cell { .. } => Self::CELL_TAG,
            AgentKind::Person { .. } => Self::PERSON_TAG,
            AgentKind::SomaCell { .. } => Self::SOMA_TAG,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AgentKind::Cell { .. } => "cell",
            AgentKind::Person { .. } => "person",
            AgentKind::SomaCell { .. } => "soma-cell",
        }
    }

    /// Spherical kinds that can grow and divide.
    pub fn is_volumetric(&self) -> bool {
        !matches!(self, AgentKind::Person { .. })
    }
}

/// Bookkeeping for static-agent detection. Every flag describes the last completed iteration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StaticState {
    pub moved: bool,
    pub grew: bool,
    pub is_new: bool,
    pub nonzero_forces: u32,
    pub static_flag: bool,
}

impl StaticState {
    /// True if this agent's change last iteration may alter its neighbors' forces.
    pub fn disturbs_neighbors(&self) -> bool {
        self.moved || self.grew || self.is_new
    }

    pub(crate) fn to_bits(self) -> u8 {
        (self.moved as u8)
            | (self.grew as u8) << 1
            | (self.is_new as u8) << 2
            | (self.static_flag as u8) << 3
    }

    pub(crate) fn from_bits(bits: u8, nonzero_forces: u32) -> Option<Self> {
        if bits >> 4 != 0 {
            return None;
        }
        Some(Self {
            moved: bits & 1 != 0,
            grew: bits & 2 != 0,
            is_new: bits & 4 != 0,
            static_flag: bits & 8 != 0,
            nonzero_forces,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Agent {
    pub local_id: LocalAgentId,
    pub global_id: Option<GlobalAgentId>,
    /// Rank-invariant lineage key. Seeds the agent's random streams and orders reductions.
    pub key: u64,
    pub position: Real3,
    pub diameter: f64,
    pub kind: AgentKind,
    pub behaviors: Vec<BehaviorInstance>,
    pub static_state: StaticState,
}

impl Agent {
    pub fn new(key: u64, position: Real3, diameter: f64, kind: AgentKind) -> Self {
        Self {
            local_id: LocalAgentId::new(0, 0),
            global_id: None,
            key,
            position,
            diameter,
            kind,
            behaviors: Vec::new(),
            // nothing is known about a fresh agent's neighborhood yet
            static_state: StaticState { is_new: true, ..StaticState::default() },
        }
    }

    pub fn with_behavior(mut self, behavior: BehaviorInstance) -> Self {
        self.behaviors.push(behavior);
        self
    }

    pub fn radius(&self) -> f64 {
        0.5 * self.diameter
    }

    pub fn volume(&self) -> f64 {
        sphere_volume(self.diameter)
    }

    pub fn set_volume(&mut self, volume: f64) {
        self.diameter = sphere_diameter(volume);
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.diameter > 0.0 && self.diameter.is_finite()) {
            return Err(Error::InvalidAgent(format!("diameter {} must be positive", self.diameter)));
        }
        if !self.position.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidAgent(format!("non-finite position {:?}", self.position)));
        }
        Ok(())
    }
}

pub fn sphere_volume(diameter: f64) -> f64 {
    PI / 6.0 * diameter * diameter * diameter
}

pub fn sphere_diameter(volume: f64) -> f64 {
    (6.0 * volume / PI).cbrt()
}

/// Splits `parent` into itself and a returned daughter.
///
/// The daughter receives `volume_ratio` of the volume. Both cells are placed on `axis` so that
/// their surfaces touch and the volume-weighted center stays where the parent was.
pub fn divide(parent: &mut Agent, volume_ratio: f64, axis: Real3, daughter_key: u64) -> Result<Agent> {
    if !parent.kind.is_volumetric() {
        return Err(Error::NotVolumetric(parent.kind.name()));
    }
    if !(volume_ratio > 0.0 && volume_ratio < 1.0) {
        return Err(Error::InvalidParameter(format!("volume ratio {volume_ratio} outside (0,1)")));
    }
    let total = parent.volume();
    let daughter_volume = total * volume_ratio;
    let mother_volume = total - daughter_volume;
    let d_m = sphere_diameter(mother_volume);
    let d_d = sphere_diameter(daughter_volume);
    let separation = 0.5 * (d_m + d_d);
    let axis = axis.normalize();
    let center = parent.position;

    let mut daughter = Agent::new(daughter_key, center + axis * (separation * (1.0 - volume_ratio)), d_d, parent.kind);
    if let AgentKind::Cell { .. } = daughter.kind {
        daughter.kind = AgentKind::Cell { age: 0 };
    }
    daughter.behaviors = parent.behaviors.iter().filter(|b| b.copy_on_division).cloned().collect();
    daughter.static_state = StaticState { is_new: true, ..StaticState::default() };

    parent.behaviors.retain(|b| !b.remove_on_division);
    parent.diameter = d_m;
    parent.position = center - axis * (separation * volume_ratio);
    Ok(daughter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{Behavior, BehaviorInstance};

    fn cell(d: f64) -> Agent {
        Agent::new(7, Real3::new(1.0, 2.0, 3.0), d, AgentKind::Cell { age: 4 })
    }

    #[test]
    fn equal_split_diameters() {
        let mut p = cell(10.0);
        let d = divide(&mut p, 0.5, Real3::x(), 99).unwrap();
        let expected = 10.0 * 0.5f64.cbrt();
        assert!((p.diameter - expected).abs() < 1e-12);
        assert!((d.diameter - expected).abs() < 1e-12);
        assert!((expected - 7.937).abs() < 1e-3);
    }

    #[test]
    fn volume_conserved_and_surfaces_touch() {
        for &ratio in &[0.5, 0.3, 0.9] {
            let mut p = cell(12.0);
            let before = p.volume();
            let axis = Real3::new(1.0, -2.0, 0.5);
            let d = divide(&mut p, ratio, axis, 1).unwrap();
            let after = p.volume() + d.volume();
            assert!(((after - before) / before).abs() < 1e-12);
            let gap = (p.position - d.position).norm() - (p.radius() + d.radius());
            assert!(gap.abs() < 1e-12);
            let com = (p.position * p.volume() + d.position * d.volume()) / after;
            assert!((com - Real3::new(1.0, 2.0, 3.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn behavior_copy_and_remove_flags() {
        let grow = Behavior::GrowDivide { growth_rate: 1.0, target_diameter: 2.0, volume_ratio: 0.5 };
        let mut p = cell(10.0)
            .with_behavior(BehaviorInstance { behavior: grow.clone(), copy_on_division: false, remove_on_division: true })
            .with_behavior(BehaviorInstance::new(Behavior::Recovery { probability: 0.1 }));
        let d = divide(&mut p, 0.5, Real3::z(), 5).unwrap();
        assert_eq!(d.behaviors.len(), 1);
        assert_eq!(p.behaviors.len(), 1);
        assert!(matches!(d.behaviors[0].behavior, Behavior::Recovery { .. }));
        assert!(d.static_state.is_new);
        assert_eq!(d.kind, AgentKind::Cell { age: 0 });
    }

    #[test]
    fn persons_cannot_divide() {
        let mut p = Agent::new(0, Real3::zeros(), 1.0, AgentKind::Person { state: SirState::Susceptible });
        assert!(matches!(divide(&mut p, 0.5, Real3::x(), 1), Err(Error::NotVolumetric(_))));
    }

    #[test]
    fn validation() {
        assert!(cell(1.0).validate().is_ok());
        assert!(cell(0.0).validate().is_err());
        let mut a = cell(1.0);
        a.position.x = f64::NAN;
        assert!(a.validate().is_err());
    }
}
