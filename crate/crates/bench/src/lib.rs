//! Shared inputs for the criterion benchmarks in `benches/`.

use agentgrid::verify::random_agent;
use agentgrid::{Agent, Real3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` points uniform in a cube of side `side`.
pub fn uniform_positions(n: usize, side: f64, seed: u64) -> Vec<Real3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| Real3::from_fn(|_, _| rng.random_range(0.0..side))).collect()
}

/// `n` random agents with keys `0..n`, every one carrying a global id.
pub fn random_population(n: usize, seed: u64) -> Vec<Agent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n as u64)
        .map(|k| {
            let mut a = random_agent(&mut rng, k);
            a.global_id.get_or_insert(agentgrid::GlobalAgentId { rank: 0, counter: k });
            a
        })
        .collect()
}

/// The same population with every position nudged by up to `jitter`, as after one quiet step.
pub fn jittered(agents: &[Agent], jitter: f64, seed: u64) -> Vec<Agent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    agents
        .iter()
        .map(|a| {
            let mut b = a.clone();
            b.position += Real3::from_fn(|_, _| rng.random_range(-jitter..=jitter));
            b
        })
        .collect()
}
