//! Per-agent operations: the behavior list and the mechanical force step.

use std::ops::Range;

use rayon::prelude::*;

use super::agent::{divide, Agent, AgentKind, SirState};
use super::behavior::Behavior;
use super::context::{ExecutionMode, ExecutionOrder};
use super::rng::{daughter_key, AgentRng, STREAM_BEHAVIOR_BASE, STREAM_DIVISION};
use crate::diffusion::{DiffusionGrid, Secretion};
use crate::physics::{is_static, mechanical_step, next_state, BoundaryCondition, ForceParams, IterationFacts, NeighborSphere};
use crate::spatial::UniformGrid;
use crate::{Error, Result};

/// Geometry and flags of every agent in the grid (owned first, then ghosts) at iteration start.
#[derive(Clone, Debug, Default)]
pub(crate) struct Snapshot {
    pub radius: Vec<f64>,
    pub keys: Vec<u64>,
    pub disturbed: Vec<bool>,
}

impl Snapshot {
    pub fn capture(owned: &[Agent], ghosts: &[Agent]) -> Self {
        let all = || owned.iter().chain(ghosts);
        Self {
            radius: all().map(Agent::radius).collect(),
            keys: all().map(|a| a.key).collect(),
            disturbed: all().map(|a| a.static_state.disturbs_neighbors()).collect(),
        }
    }
}

pub(crate) struct StepEnv<'a> {
    pub seed: u64,
    pub iteration: u64,
    pub grid: &'a UniformGrid,
    pub snapshot: &'a Snapshot,
    pub ghosts: &'a [Agent],
    pub substances: &'a [DiffusionGrid],
    pub bc: &'a BoundaryCondition,
    pub run_behaviors: bool,
    /// `Some` when the force step is due this iteration.
    pub mechanics: Option<&'a ForceParams>,
    pub static_detection: bool,
    pub interaction_length: f64,
}

/// Everything one agent produced during an iteration.
#[derive(Clone, Debug)]
pub(crate) struct AgentWork {
    pub agent: Agent,
    pub removed: bool,
    pub daughters: Vec<Agent>,
    pub secretions: Vec<Secretion>,
    pub moved: bool,
    pub grew: bool,
    pub force_computed: bool,
    pub skipped: bool,
    pub nonzero: u32,
}

impl AgentWork {
    pub fn new(agent: Agent) -> Self {
        let nonzero = agent.static_state.nonzero_forces;
        Self { agent, removed: false, daughters: Vec::new(), secretions: Vec::new(), moved: false, grew: false, force_computed: false, skipped: false, nonzero }
    }

    /// Records the static-detection state for the next iteration.
    pub fn finish(&mut self) {
        self.agent.static_state = next_state(self.moved, self.grew, self.nonzero, self.skipped);
    }
}

fn neighbor<'a>(j: usize, owned: &'a [Agent], ghosts: &'a [Agent]) -> &'a Agent {
    if j < owned.len() {
        &owned[j]
    } else {
        &ghosts[j - owned.len()]
    }
}

fn grow(w: &mut AgentWork, volume: f64) {
    let v = w.agent.volume() + volume;
    w.agent.set_volume(v);
    w.grew = true;
}

fn split(w: &mut AgentWork, ratio: f64, env: &StepEnv<'_>) -> Result<()> {
    let mut rng = AgentRng::new(env.seed, w.agent.key, env.iteration, STREAM_DIVISION);
    let axis = rng.unit_sphere();
    let key = daughter_key(w.agent.key, env.iteration + w.daughters.len() as u64 * (1 << 40));
    let mut d = divide(&mut w.agent, ratio, axis, key)?;
    d.position = env.bc.apply(d.position);
    w.agent.position = env.bc.apply(w.agent.position);
    w.daughters.push(d);
    w.moved = true;
    Ok(())
}

/// Runs the agent's behaviors. `owned` is what neighbor reads see: the iteration-start copy in
/// copy mode, the live store in in-place mode.
pub(crate) fn behaviors_op(w: &mut AgentWork, index: usize, owned: &[Agent], env: &StepEnv<'_>) -> Result<()> {
    let behaviors = w.agent.behaviors.clone();
    for (bi, b) in behaviors.iter().enumerate() {
        let mut rng = AgentRng::new(env.seed, w.agent.key, env.iteration, STREAM_BEHAVIOR_BASE + bi as u64);
        match &b.behavior {
            Behavior::GrowDivide { growth_rate, target_diameter, volume_ratio } => {
                if w.agent.diameter < *target_diameter {
                    grow(w, *growth_rate);
                } else {
                    split(w, *volume_ratio, env)?;
                }
            }
            Behavior::Infection { radius, probability } => {
                if let AgentKind::Person { state: SirState::Susceptible } = w.agent.kind {
                    if rng.uniform() < *probability {
                        let mut exposed = false;
                        env.grid.for_each_neighbor(index, *radius, |j, _| {
                            if !exposed {
                                exposed = matches!(neighbor(j, owned, env.ghosts).kind, AgentKind::Person { state: SirState::Infected });
                            }
                        })?;
                        if exposed {
                            w.agent.kind = AgentKind::Person { state: SirState::Infected };
                        }
                    }
                }
            }
            Behavior::Recovery { probability } => {
                if let AgentKind::Person { state: SirState::Infected } = w.agent.kind {
                    if rng.uniform() < *probability {
                        w.agent.kind = AgentKind::Person { state: SirState::Recovered };
                    }
                }
            }
            Behavior::RandomMovement { speed } => {
                if *speed != 0.0 {
                    let dir = rng.normalized_cube();
                    w.agent.position = env.bc.apply(w.agent.position + dir * *speed);
                    w.moved = true;
                }
            }
            Behavior::Secretion { substance, quantity } => {
                let g = env.substances.get(*substance as usize).ok_or_else(|| Error::BehaviorFault { agent: w.agent.key, reason: format!("no substance {substance}") })?;
                w.secretions.push(Secretion { substance: *substance, node: g.node_of(&w.agent.position) as u32, key: w.agent.key, amount: *quantity });
            }
            Behavior::Chemotaxis { substance, weight } => {
                let g = env.substances.get(*substance as usize).ok_or_else(|| Error::BehaviorFault { agent: w.agent.key, reason: format!("no substance {substance}") })?;
                let step = g.gradient_at(&w.agent.position) * *weight;
                if step.norm_squared() > 0.0 {
                    w.agent.position = env.bc.apply(w.agent.position + step);
                    w.moved = true;
                }
            }
            Behavior::TumorGrowth { growth_rate, max_diameter, division_probability, death_probability, min_age, displacement_rate } => {
                let AgentKind::Cell { age } = w.agent.kind else {
                    return Err(Error::BehaviorFault { agent: w.agent.key, reason: "tumor growth needs a cell".into() });
                };
                if *displacement_rate != 0.0 {
                    let brownian = rng.normalized_cube();
                    w.agent.position = env.bc.apply(w.agent.position + brownian * *displacement_rate);
                    w.moved = true;
                }
                if age >= *min_age && rng.uniform() < *death_probability {
                    w.removed = true;
                    return Ok(());
                }
                w.agent.kind = AgentKind::Cell { age: age + 1 };
                if w.agent.diameter < *max_diameter {
                    grow(w, *growth_rate);
                } else if rng.uniform() < *division_probability {
                    split(w, 0.5, env)?;
                }
            }
        }
    }
    Ok(())
}

/// Force step against the iteration-start geometry.
pub(crate) fn mechanics_op(w: &mut AgentWork, index: usize, env: &StepEnv<'_>) -> Result<()> {
    let Some(params) = env.mechanics else { return Ok(()) };
    if w.removed {
        return Ok(());
    }
    let mut neighbors = Vec::new();
    let mut disturbed = false;
    let snap = env.snapshot;
    env.grid.for_each_neighbor(index, env.interaction_length, |j, _| {
        disturbed |= snap.disturbed[j];
        neighbors.push(NeighborSphere { key: snap.keys[j], position: env.grid.position(j), radius: snap.radius[j] });
    })?;
    let facts = IterationFacts { moved: w.moved, grew: w.grew, neighbor_disturbed: disturbed };
    if env.static_detection && is_static(&w.agent.static_state, &facts) {
        w.skipped = true;
        return Ok(());
    }
    neighbors.sort_unstable_by_key(|n| n.key);
    let out = mechanical_step(w.agent.key, &w.agent.position, w.agent.radius(), &neighbors, params, env.bc, env.seed, env.iteration);
    w.force_computed = true;
    w.nonzero = out.nonzero_forces;
    if out.new_position != w.agent.position {
        w.agent.position = out.new_position;
        w.moved = true;
    }
    Ok(())
}

/// Runs both operations over all owned agents and returns one work record per agent.
///
/// Copy mode reads neighbors from `agents` as they were at iteration start and processes
/// `blocks` in parallel. In-place mode runs sequentially and writes every result back to
/// `agents` immediately, so later agents observe earlier updates.
pub(crate) fn run_agent_ops(agents: &mut [Agent], blocks: &[Range<usize>], mode: ExecutionMode, order: ExecutionOrder, env: &StepEnv<'_>) -> Result<Vec<AgentWork>> {
    match mode {
        ExecutionMode::Copy => {
            let owned: &[Agent] = agents;
            let mut works: Vec<AgentWork> = owned.iter().cloned().map(AgentWork::new).collect();
            let mut chunks: Vec<&mut [AgentWork]> = Vec::with_capacity(blocks.len());
            let mut rest: &mut [AgentWork] = &mut works;
            let mut at = 0;
            for r in blocks {
                debug_assert_eq!(r.start, at);
                let (head, tail) = rest.split_at_mut(r.len());
                chunks.push(head);
                rest = tail;
                at = r.end;
            }
            debug_assert!(rest.is_empty());
            let phases: Vec<u8> = match order {
                ExecutionOrder::Column => vec![0],
                ExecutionOrder::Row => vec![1, 2],
            };
            for phase in phases {
                chunks.par_iter_mut().zip(blocks.par_iter()).try_for_each(|(chunk, r)| -> Result<()> {
                    let s = r.start;
                    for (k, w) in chunk.iter_mut().enumerate() {
                        let i = s + k;
                        if phase != 2 && env.run_behaviors {
                            behaviors_op(w, i, owned, env)?;
                        }
                        if phase != 1 {
                            mechanics_op(w, i, env)?;
                        }
                    }
                    Ok(())
                })?;
            }
            works.iter_mut().for_each(AgentWork::finish);
            Ok(works)
        }
        ExecutionMode::InPlace => {
            let mut works: Vec<AgentWork> = Vec::with_capacity(agents.len());
            match order {
                ExecutionOrder::Column => {
                    for i in 0..agents.len() {
                        let mut w = AgentWork::new(agents[i].clone());
                        if env.run_behaviors {
                            behaviors_op(&mut w, i, agents, env)?;
                        }
                        mechanics_op(&mut w, i, env)?;
                        agents[i] = w.agent.clone();
                        works.push(w);
                    }
                }
                ExecutionOrder::Row => {
                    for i in 0..agents.len() {
                        let mut w = AgentWork::new(agents[i].clone());
                        if env.run_behaviors {
                            behaviors_op(&mut w, i, agents, env)?;
                        }
                        agents[i] = w.agent.clone();
                        works.push(w);
                    }
                    for (i, w) in works.iter_mut().enumerate() {
                        mechanics_op(w, i, env)?;
                        agents[i] = w.agent.clone();
                    }
                }
            }
            works.iter_mut().for_each(AgentWork::finish);
            Ok(works)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{BehaviorInstance, StaticState};
    use crate::physics::BoundaryMode;
    use crate::Real3;

    fn person(key: u64, x: f64, state: SirState) -> Agent {
        Agent::new(key, Real3::new(x, 0.0, 0.0), 1.0, AgentKind::Person { state })
            .with_behavior(BehaviorInstance::new(Behavior::Infection { radius: 3.0, probability: 1.0 }))
    }

    fn run(agents: &mut [Agent], mode: ExecutionMode, mech: Option<&ForceParams>, static_detection: bool) -> Vec<AgentWork> {
        let positions: Vec<Real3> = agents.iter().map(|a| a.position).collect();
        let grid = UniformGrid::build(&positions, 10.0).unwrap();
        let snapshot = Snapshot::capture(agents, &[]);
        let bc = BoundaryCondition::cube(BoundaryMode::Open, 0.0, 1.0).unwrap();
        let env = StepEnv {
            seed: 1,
            iteration: 0,
            grid: &grid,
            snapshot: &snapshot,
            ghosts: &[],
            substances: &[],
            bc: &bc,
            run_behaviors: true,
            mechanics: mech,
            static_detection,
            interaction_length: 10.0,
        };
        let n = agents.len();
        run_agent_ops(agents, std::slice::from_ref(&(0..n)), mode, ExecutionOrder::Column, &env).unwrap()
    }

    #[test]
    fn infection_reads_snapshot_in_copy_mode() {
        // chain: 0 infected, 1 at 2.7, 2 at 5.4: only 1 can be reached this step in copy mode
        let mk = || vec![person(0, 0.0, SirState::Infected), person(1, 2.7, SirState::Susceptible), person(2, 5.4, SirState::Susceptible)];
        let mut a = mk();
        let w = run(&mut a, ExecutionMode::Copy, None, false);
        let states: Vec<_> = w.iter().map(|w| w.agent.kind).collect();
        assert_eq!(states[1], AgentKind::Person { state: SirState::Infected });
        assert_eq!(states[2], AgentKind::Person { state: SirState::Susceptible });
        let mut b = mk();
        let w = run(&mut b, ExecutionMode::InPlace, None, false);
        assert_eq!(w[2].agent.kind, AgentKind::Person { state: SirState::Infected });
    }

    #[test]
    fn recovered_never_reinfected() {
        let mut a = vec![person(0, 0.0, SirState::Infected), person(1, 1.0, SirState::Recovered)];
        let w = run(&mut a, ExecutionMode::Copy, None, false);
        assert_eq!(w[1].agent.kind, AgentKind::Person { state: SirState::Recovered });
    }

    #[test]
    fn overlapping_cells_push_apart_and_settle() {
        let params = ForceParams { k: 2.0, gamma: 1.0, dt_mech: 0.1, force_threshold: 0.0, max_displacement: 3.0 };
        let mut a = vec![Agent::new(0, Real3::zeros(), 10.0, AgentKind::Cell { age: 0 }), Agent::new(1, Real3::new(9.0, 0.0, 0.0), 10.0, AgentKind::Cell { age: 0 })];
        let w = run(&mut a, ExecutionMode::Copy, Some(&params), true);
        assert!(w[0].agent.position.x < 0.0 && w[1].agent.position.x > 9.0);
        assert!(w.iter().all(|w| w.force_computed && w.moved));
    }

    #[test]
    fn isolated_settled_agent_is_skipped() {
        let params = ForceParams::default();
        let mut c = Agent::new(0, Real3::zeros(), 10.0, AgentKind::Cell { age: 0 });
        c.static_state = StaticState::default();
        let w = run(&mut [c.clone()], ExecutionMode::Copy, Some(&params), true);
        assert!(w[0].skipped && !w[0].force_computed);
        let w = run(&mut [c], ExecutionMode::Copy, Some(&params), false);
        assert!(!w[0].skipped && w[0].force_computed);
    }

    #[test]
    fn division_produces_keyed_daughter() {
        let mut a = vec![Agent::new(7, Real3::zeros(), 10.0, AgentKind::Cell { age: 3 })
            .with_behavior(BehaviorInstance::new(Behavior::GrowDivide { growth_rate: 1.0, target_diameter: 10.0, volume_ratio: 0.5 }))];
        let w = run(&mut a, ExecutionMode::Copy, None, false);
        assert_eq!(w[0].daughters.len(), 1);
        let d = &w[0].daughters[0];
        assert_eq!(d.key, daughter_key(7, 0));
        assert!(d.static_state.is_new);
        let v = w[0].agent.volume() + d.volume();
        assert!((v - crate::engine::sphere_volume(10.0)).abs() < 1e-9);
    }
}
