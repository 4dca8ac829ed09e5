use super::params::{check, param_set, probability};
use crate::engine::rng::mix64;
use crate::engine::{Agent, AgentKind, Behavior, BehaviorInstance, SirState};
use crate::exchange::{uniform_population, PartitionMap};
use crate::{Real3, Result};

/// Person diameter; persons have no mechanics, it only has to be positive.
const PERSON_DIAMETER: f64 = 1.0;

#[derive(Clone, Debug, PartialEq)]
pub struct SirParams {
    pub infection_radius: f64,
    pub infection_probability: f64,
    pub recovery_probability: f64,
    pub max_movement: f64,
    pub space_length: f64,
    pub n_susceptible: usize,
    pub n_infected: usize,
    pub steps: u64,
}

param_set!(SirParams { infection_radius, infection_probability, recovery_probability, max_movement, space_length, n_susceptible, n_infected, steps });

impl Default for SirParams {
    fn default() -> Self {
        Self::measles()
    }
}

impl SirParams {
    pub fn measles() -> Self {
        Self {
            infection_radius: 3.24179,
            infection_probability: 0.28510,
            recovery_probability: 0.00521,
            max_movement: 5.78594,
            space_length: 100.0,
            n_susceptible: 2000,
            n_infected: 20,
            steps: 1000,
        }
    }

    pub fn influenza() -> Self {
        Self {
            infection_radius: 3.2123,
            infection_probability: 0.04980,
            recovery_probability: 0.01016,
            max_movement: 4.2942,
            space_length: 215.0,
            n_susceptible: 20000,
            n_infected: 200,
            steps: 2500,
        }
    }

    pub fn population(&self) -> usize {
        self.n_susceptible + self.n_infected
    }

    pub fn validate(&self) -> Result<()> {
        probability("infection_probability", self.infection_probability)?;
        probability("recovery_probability", self.recovery_probability)?;
        check(self.infection_radius > 0.0, || "infection_radius must be positive".into())?;
        check(self.max_movement > 0.0, || "max_movement must be positive".into())?;
        check(self.space_length > 0.0, || "space_length must be positive".into())
    }

    /// Keys of the initially infected persons: the `n_infected` smallest hashes, so the choice is
    /// spread over space and does not depend on the rank layout.
    fn infected_keys(&self, seed: u64) -> Vec<u64> {
        let mut keys: Vec<(u64, u64)> = (0..self.population() as u64).map(|k| (mix64(mix64(seed) ^ k), k)).collect();
        keys.sort_unstable();
        let mut chosen: Vec<u64> = keys.into_iter().take(self.n_infected).map(|(_, k)| k).collect();
        chosen.sort_unstable();
        chosen
    }

    pub fn initial_agents(&self, map: &PartitionMap, rank: Option<u32>, seed: u64) -> Result<Vec<Agent>> {
        let infected = self.infected_keys(seed);
        let behaviors = [
            Behavior::Infection { radius: self.infection_radius, probability: self.infection_probability },
            Behavior::Recovery { probability: self.recovery_probability },
            Behavior::RandomMovement { speed: self.max_movement },
        ];
        uniform_population(map, rank, Real3::zeros(), Real3::repeat(self.space_length), self.population(), seed, |key, p, _| {
            let state = if infected.binary_search(&key).is_ok() { SirState::Infected } else { SirState::Susceptible };
            let mut a = Agent::new(key, p, PERSON_DIAMETER, AgentKind::Person { state });
            a.behaviors = behaviors.iter().cloned().map(BehaviorInstance::new).collect();
            a
        })
    }
}

/// (S, I, R) counts.
pub fn sir_counts(agents: &[Agent]) -> [f64; 3] {
    let mut c = [0usize; 3];
    for a in agents {
        if let AgentKind::Person { state } = a.kind {
            c[state.code() as usize] += 1;
        }
    }
    c.map(|v| v as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ParamSet;

    #[test]
    fn reproduction_number() {
        let p = SirParams::measles();
        let beta = 0.06719;
        let gamma = p.recovery_probability;
        assert!((beta / gamma - 12.9).abs() <= 0.1);
    }

    #[test]
    fn initial_counts() {
        let p = SirParams::measles();
        let map = PartitionMap::new(Real3::zeros(), Real3::repeat(100.0), 1, p.infection_radius, 1).unwrap();
        let a = p.initial_agents(&map, None, 3).unwrap();
        assert_eq!(sir_counts(&a), [2000.0, 20.0, 0.0]);
    }

    #[test]
    fn overrides() {
        let mut p = SirParams::measles();
        p.set("n_infected", "5").unwrap();
        assert_eq!(p.n_infected, 5);
        assert!(p.set("infection_probability", "abc").is_err());
        assert!(p.set("nope", "1").is_err());
        p.set("recovery_probability", "1.5").unwrap();
        assert!(p.validate().is_err());
        assert!(p.entries().iter().any(|(k, v)| *k == "n_infected" && v == "5"));
    }
}
