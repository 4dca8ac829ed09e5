//! Oracle suites: each one checks a component against an independent reference and reports
//! what it measured. The CLI `verify` command and the acceptance tests both run these.

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::{heat_kernel, sir_ode_oracle};
use crate::diffusion::DiffusionGrid;
use crate::engine::{simulate, Agent, AgentKind, AgentStore, Behavior, BehaviorInstance, GlobalAgentId, LocalAgentId, RunOptions, SirState, StaticState};
use crate::exchange::{delta_decode, delta_encode, deserialize, serialize, CodecKind, Reference, TypeRegistry};
use crate::models::{ModelPreset, SirParams};
use crate::spatial::{brute_force_neighbors, compute_morton_offsets, enumerate_codes, UniformGrid};
use crate::{Error, Real3, Result};

pub const SUITES: [&str; 6] = ["grid", "morton", "removal", "codec", "sir", "diffusion"];

/// Seeds used when a suite is run without an explicit list.
pub const DEFAULT_SEEDS: std::ops::Range<u64> = 0..200;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub limit: f64,
}

impl Check {
    /// Passes when `measured <= limit`.
    pub fn at_most(name: impl Into<String>, measured: f64, limit: f64) -> Self {
        Self { name: name.into(), passed: measured <= limit, measured, limit }
    }

    /// Passes when `measured >= limit`.
    pub fn at_least(name: impl Into<String>, measured: f64, limit: f64) -> Self {
        Self { name: name.into(), passed: measured >= limit, measured, limit }
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Self { name: name.into(), passed: ok, measured: ok as u8 as f64, limit: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }
}

/// One tab-separated line per check: `suite  check  pass|fail  measured=..  limit=..`.
impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{}\t{}\t{}\tmeasured={}\tlimit={}", self.suite, c.name, if c.passed { "pass" } else { "fail" }, c.measured, c.limit)?;
        }
        Ok(())
    }
}

pub fn run_suite(name: &str) -> Result<SuiteReport> {
    let seeds: Vec<u64> = DEFAULT_SEEDS.collect();
    match name {
        "grid" => grid_suite(&seeds),
        "morton" => morton_suite(),
        "removal" => removal_suite(&seeds[..100]),
        "codec" => codec_suite(&seeds[..1]),
        "sir" => sir_suite(&seeds[..10]),
        "diffusion" => diffusion_suite(&[32, 64, 128]),
        _ => Err(Error::InvalidParameter(format!("unknown suite `{name}` (expected one of {})", SUITES.join(", ")))),
    }
}

/// Grid neighbor sets against an O(n²) scan, one random instance per seed.
pub fn grid_suite(seeds: &[u64]) -> Result<SuiteReport> {
    let mut mismatched = 0usize;
    for &seed in seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..=1000);
        let side = rng.random_range(10.0..200.0);
        let box_length = rng.random_range(1.0..side / 2.0);
        let positions: Vec<Real3> = (0..n).map(|_| Real3::from_fn(|_, _| rng.random_range(0.0..side))).collect();
        let grid = UniformGrid::build(&positions, box_length)?;
        let radius = rng.random_range(0.0..=box_length);
        let mut ok = true;
        for i in 0..n {
            let mut got = Vec::new();
            grid.for_each_neighbor(i, radius, |j, _| got.push(j))?;
            got.sort_unstable();
            if got != brute_force_neighbors(&positions, i, radius) {
                ok = false;
                break;
            }
        }
        mismatched += usize::from(!ok);
    }
    Ok(SuiteReport {
        suite: "grid".into(),
        checks: vec![Check::at_least("instances", seeds.len() as f64, 1.0), Check::at_most("mismatched_instances", mismatched as f64, 0.0)],
    })
}

/// Offset-based code sequences against enumerate-and-sort.
pub fn morton_suite() -> Result<SuiteReport> {
    let mut bad3 = 0usize;
    for x in 1..=9 {
        for y in 1..=9 {
            for z in 1..=9 {
                let dims = [x, y, z];
                let got: Vec<u64> = compute_morton_offsets(&dims)?.codes().collect();
                bad3 += usize::from(got != enumerate_codes(&dims)?);
            }
        }
    }
    let mut bad2 = 0usize;
    for x in 1..=17 {
        for y in 1..=17 {
            let got: Vec<u64> = compute_morton_offsets(&[x, y])?.codes().collect();
            bad2 += usize::from(got != enumerate_codes(&[x, y])?);
        }
    }
    let three_by_three: Vec<u64> = compute_morton_offsets(&[3, 3])?.codes().collect();
    Ok(SuiteReport {
        suite: "morton".into(),
        checks: vec![
            Check::at_most("mismatched_3d", bad3 as f64, 0.0),
            Check::at_most("mismatched_2d", bad2 as f64, 0.0),
            Check::flag("3x3_codes", three_by_three == [0, 1, 2, 3, 4, 6, 8, 9, 12]),
        ],
    })
}

/// Auxiliary words per removed agent allowed for a commit.
pub const REMOVAL_AUX_FACTOR: usize = 4;

/// Parallel removal against a serial filter, for 1, 2 and 8 workers per seed.
pub fn removal_suite(seeds: &[u64]) -> Result<SuiteReport> {
    let mut mismatched = 0usize;
    let mut worst_aux = 0.0f64;
    let mut not_dense = 0usize;
    for &seed in seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..=10_000usize);
        let removed = rng.random_range(0..=n);
        let mut victims: Vec<usize> = (0..n).collect();
        victims.shuffle(&mut rng);
        victims.truncate(removed);
        let doomed: BTreeSet<usize> = victims.iter().copied().collect();
        let expected: Vec<u64> = (0..n as u64).filter(|k| !doomed.contains(&(*k as usize))).collect();
        for workers in [1usize, 2, 8] {
            let mut store = AgentStore::new();
            store.commit_additions(vec![(0..n as u64).map(|k| Agent::new(k, Real3::zeros(), 1.0, AgentKind::Cell { age: 0 })).collect()])?;
            let mut per_worker: Vec<Vec<LocalAgentId>> = vec![Vec::new(); workers];
            for (t, &v) in victims.iter().enumerate() {
                per_worker[t % workers].push(store.id_at(v));
            }
            let out = store.commit_removals(&per_worker, workers)?;
            let mut got: Vec<u64> = store.iter().map(|a| a.key).collect();
            got.sort_unstable();
            mismatched += usize::from(got != expected || out.new_count != expected.len());
            not_dense += store.iter().enumerate().filter(|(i, a)| a.local_id.index as usize != *i).count();
            if removed > 0 {
                worst_aux = worst_aux.max(out.aux_words as f64 / removed as f64);
            }
        }
    }
    Ok(SuiteReport {
        suite: "removal".into(),
        checks: vec![
            Check::at_most("mismatched_commits", mismatched as f64, 0.0),
            Check::at_most("misplaced_slots", not_dense as f64, 0.0),
            Check::at_most("aux_words_per_removal", worst_aux, REMOVAL_AUX_FACTOR as f64),
        ],
    })
}

fn random_behavior(rng: &mut impl Rng) -> Behavior {
    let choice = rng.random_range(0..7);
    let mut f = || rng.random_range(0.0..10.0);
    match choice {
        0 => Behavior::GrowDivide { growth_rate: f(), target_diameter: f(), volume_ratio: 0.5 },
        1 => Behavior::Infection { radius: f(), probability: f() / 10.0 },
        2 => Behavior::Recovery { probability: f() / 10.0 },
        3 => Behavior::RandomMovement { speed: f() },
        4 => Behavior::Secretion { substance: rng.random_range(0..4), quantity: rng.random_range(0.0..2.0) },
        5 => Behavior::Chemotaxis { substance: rng.random_range(0..4), weight: rng.random_range(0.0..2.0) },
        _ => Behavior::TumorGrowth {
            growth_rate: f(),
            max_diameter: f(),
            division_probability: rng.random_range(0.0..1.0),
            death_probability: rng.random_range(0.0..1.0),
            min_age: rng.random_range(0..200),
            displacement_rate: rng.random_range(0.0..1.0),
        },
    }
}

/// An agent with random kind, state, behaviors and (usually) a global id. Local ids are left
/// at their default because they never travel.
pub fn random_agent(rng: &mut impl Rng, key: u64) -> Agent {
    let kind = match rng.random_range(0..3) {
        0 => AgentKind::Cell { age: rng.random() },
        1 => AgentKind::Person { state: [SirState::Susceptible, SirState::Infected, SirState::Recovered][rng.random_range(0..3)] },
        _ => AgentKind::SomaCell { cell_type: rng.random() },
    };
    let mut a = Agent::new(key, Real3::from_fn(|_, _| rng.random_range(-1e3..1e3)), rng.random_range(0.1..20.0), kind);
    for _ in 0..rng.random_range(0..4) {
        let b = random_behavior(rng);
        a.behaviors.push(BehaviorInstance { behavior: b, copy_on_division: rng.random(), remove_on_division: rng.random() });
    }
    if rng.random_bool(0.9) {
        a.global_id = Some(GlobalAgentId { rank: rng.random_range(0..8), counter: key });
    }
    a.static_state = StaticState { moved: rng.random(), grew: rng.random(), is_new: rng.random(), nonzero_forces: rng.random_range(0..30), static_flag: rng.random() };
    a
}

fn sorted_by_key(mut v: Vec<Agent>) -> Vec<Agent> {
    v.sort_by_key(|a| a.key);
    v
}

/// Serialization round trips and delta set-equality over random (reference, message) pairs,
/// including the all-new, all-removed, identical and permuted cases.
pub fn codec_suite(seeds: &[u64]) -> Result<SuiteReport> {
    let reg = TypeRegistry::standard();
    let mut frame_failures = 0usize;
    let mut delta_failures = 0usize;
    let mut nonzero_identical = 0usize;
    let mut pairs = 0usize;
    let mut round_trips = 0usize;
    for &seed in seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let agents: Vec<Agent> = (0..1000).map(|k| random_agent(&mut rng, k)).collect();
        let decoded = deserialize(&serialize(&agents, &reg)?, &reg)?.agents;
        frame_failures += usize::from(decoded != agents);
        round_trips += agents.len();

        for p in 0..1000u64 {
            let codec = if p % 2 == 0 { CodecKind::Lz4 } else { CodecKind::Identity };
            // units are matched by global id, which the engine assigns before anything is sent
            let with_id = |mut a: Agent| {
                a.global_id.get_or_insert(GlobalAgentId { rank: 0, counter: a.key });
                a
            };
            let pool: Vec<Agent> = (0..rng.random_range(0..40)).map(|k| with_id(random_agent(&mut rng, p * 1000 + k))).collect();
            let reference_agents = pool.clone();
            let message: Vec<Agent> = match p % 5 {
                // identical
                0 => pool.clone(),
                // all removed
                1 => Vec::new(),
                // all new
                2 => (0..rng.random_range(0..40)).map(|k| with_id(random_agent(&mut rng, 1 << 40 | (p * 1000 + k)))).collect(),
                // permuted
                3 => {
                    let mut m = pool.clone();
                    m.shuffle(&mut rng);
                    m
                }
                // mixed: some kept and mutated, some dropped, some new
                _ => {
                    let mut m: Vec<Agent> = pool.iter().filter(|_| rng.random_bool(0.7)).cloned().collect();
                    for a in &mut m {
                        if rng.random_bool(0.5) {
                            a.position += Real3::from_fn(|_, _| rng.random_range(-1.0..1.0));
                        }
                        if rng.random_bool(0.2) {
                            a.behaviors.push(BehaviorInstance::new(random_behavior(&mut rng)));
                        }
                    }
                    m.extend((0..rng.random_range(0..10)).map(|k| with_id(random_agent(&mut rng, 1 << 41 | (p * 1000 + k)))));
                    m.shuffle(&mut rng);
                    m
                }
            };
            let reference = Reference::new(serialize(&reference_agents, &reg)?, p)?;
            let enc = delta_encode(&serialize(&message, &reg)?, Some(&reference), codec)?;
            let got = delta_decode(&enc.bytes, Some(&reference), &reg)?;
            delta_failures += usize::from(sorted_by_key(got) != sorted_by_key(message.clone()));
            if p % 5 == 0 {
                nonzero_identical += usize::from(enc.raw_body.iter().any(|&b| b != 0));
            }
            pairs += 1;
        }
    }
    Ok(SuiteReport {
        suite: "codec".into(),
        checks: vec![
            Check::at_least("agents_round_tripped", round_trips as f64, 1000.0),
            Check::at_most("frame_mismatches", frame_failures as f64, 0.0),
            Check::at_least("delta_pairs", pairs as f64, 1000.0),
            Check::at_most("delta_mismatches", delta_failures as f64, 0.0),
            Check::at_most("identical_bodies_not_zero", nonzero_identical as f64, 0.0),
        ],
    })
}

/// Contact rate the ODE uses for the measles preset.
pub const SIR_ODE_BETA: f64 = 0.06719;
/// Allowed deviation of the seed-averaged curves from the ODE, as a fraction of the population.
pub const SIR_TOLERANCE: f64 = 0.075;

/// Mean S, I, R curves over `seeds` against the RK4 solution of the SIR equations.
pub fn sir_suite(seeds: &[u64]) -> Result<SuiteReport> {
    let params = SirParams::measles();
    let preset = ModelPreset::Sir(params.clone());
    let steps = params.steps as usize;
    let mut mean = vec![[0.0f64; 3]; steps + 1];
    for &seed in seeds {
        let r = simulate(&preset, &RunOptions { seed, ..RunOptions::default() })?;
        for (m, row) in mean.iter_mut().zip(r.series.rows()) {
            for c in 0..3 {
                m[c] += row[c] / seeds.len() as f64;
            }
        }
    }
    let n = params.population() as f64;
    let ode = sir_ode_oracle(SIR_ODE_BETA, params.recovery_probability, n, params.n_susceptible as f64, params.n_infected as f64, steps, 0.1)?;
    let worst = mean.iter().zip(&ode).flat_map(|(m, o)| (0..3).map(move |c| (m[c] - o[c]).abs())).fold(0.0, f64::max);
    Ok(SuiteReport {
        suite: "sir".into(),
        checks: vec![Check::at_least("seeds", seeds.len() as f64, 1.0), Check::at_most("max_deviation_fraction", worst / n, SIR_TOLERANCE)],
    })
}

/// Distance between the point source and the probe.
pub const PROBE_DISTANCE_SQUARED: f64 = 1000.0;
pub const DIFFUSION_TOLERANCE: f64 = 0.10;

/// Worst absolute error at the probe over the sampled times, and the peak of the exact curve.
pub fn point_source_error(resolution: usize) -> Result<(f64, f64)> {
    const HALF: f64 = 100.0;
    const NU: f64 = 1.0;
    const SAMPLE: f64 = 10.0;
    const SAMPLES: usize = 30;
    let lo = Real3::repeat(-HALF);
    let hi = Real3::repeat(HALF);
    let h = 2.0 * HALF / (resolution - 1) as f64;
    let dt_max = 0.9 * h * h / (6.0 * NU);
    let substeps = (SAMPLE / dt_max).ceil() as usize;
    let dt = SAMPLE / substeps as f64;
    let mut g = DiffusionGrid::over_domain("point-source", lo, hi, resolution, NU, 0.0, dt)?;
    let source = g.node_of(&Real3::zeros());
    g.increase_node(source, 1.0 / (h * h * h));

    let r = PROBE_DISTANCE_SQUARED.sqrt();
    let [si, sj, sk] = g.coords(source);
    let x = r / h;
    let (i0, frac) = (si + x.floor() as usize, x.fract());
    if i0 + 1 >= resolution {
        return Err(Error::InvalidParameter(format!("resolution {resolution} too coarse for the probe")));
    }
    let mut worst = 0.0f64;
    let mut peak = 0.0f64;
    for k in 1..=SAMPLES {
        for _ in 0..substeps {
            g.step();
        }
        let t = k as f64 * SAMPLE;
        let sim = (1.0 - frac) * g.value(i0, sj, sk) + frac * g.value(i0 + 1, sj, sk);
        let exact = heat_kernel(NU, t, r)?;
        worst = worst.max((sim - exact).abs());
        peak = peak.max(exact);
    }
    Ok((worst, peak))
}

/// Point-source release compared with the heat kernel at the probe for each resolution.
pub fn diffusion_suite(resolutions: &[usize]) -> Result<SuiteReport> {
    let mut checks = Vec::new();
    let mut errors = Vec::new();
    let mut last_rel = f64::NAN;
    for &n in resolutions {
        let (err, peak) = point_source_error(n)?;
        checks.push(Check::at_least(format!("linf_error_n{n}"), err, 0.0));
        errors.push(err);
        last_rel = err / peak;
    }
    checks.push(Check::flag("strictly_decreasing", errors.windows(2).all(|w| w[1] < w[0])));
    checks.push(Check::at_most("finest_relative_error", last_rel, DIFFUSION_TOLERANCE));
    Ok(SuiteReport { suite: "diffusion".into(), checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suites_pass() {
        for r in [grid_suite(&[1, 2, 3]).unwrap(), removal_suite(&[5, 6]).unwrap(), morton_suite().unwrap()] {
            assert!(r.passed(), "{r}");
        }
    }

    #[test]
    fn report_lines() {
        let r = SuiteReport { suite: "x".into(), checks: vec![Check::at_most("a", 1.0, 2.0), Check::at_least("b", 1.0, 2.0)] };
        assert!(!r.passed());
        let s = r.to_string();
        assert!(s.contains("x\ta\tpass") && s.contains("x\tb\tfail"));
        assert!(run_suite("nope").is_err());
    }
}
