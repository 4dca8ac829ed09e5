use std::collections::BTreeSet;

use agentgrid::engine::{AgentStore, OpKind, OperationDescriptor};
use agentgrid::exchange::{delta_decode, delta_encode, deserialize, serialize, CodecKind, Reference, TypeRegistry};
use agentgrid::physics::{collision_force, tie_direction, BoundaryCondition, BoundaryMode, ForceParams};
use agentgrid::spatial::{balance, brute_force_neighbors, UniformGrid};
use agentgrid::verify::random_agent;
use agentgrid::{Agent, GlobalAgentId, Real3};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn vec3(range: std::ops::Range<f64>) -> impl Strategy<Value = Real3> {
    (range.clone(), range.clone(), range).prop_map(|(x, y, z)| Real3::new(x, y, z))
}

fn population(seed: u64, n: usize) -> Vec<Agent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n as u64)
        .map(|k| {
            let mut a = random_agent(&mut rng, k);
            a.global_id.get_or_insert(GlobalAgentId { rank: 0, counter: k });
            a
        })
        .collect()
}

fn by_key(mut v: Vec<Agent>) -> Vec<Agent> {
    v.sort_by_key(|a| a.key);
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn collision_forces_are_antisymmetric(
        pa in vec3(-10.0..10.0), pb in vec3(-10.0..10.0),
        ra in 0.1f64..8.0, rb in 0.1f64..8.0,
        k in 0.1f64..5.0, gamma in 0.0f64..3.0,
        seed in any::<u64>(),
    ) {
        let params = ForceParams { k, gamma, ..ForceParams::default() };
        let fab = collision_force(&pa, ra, &pb, rb, &params, &tie_direction(seed, 1, 2, 0));
        let fba = collision_force(&pb, rb, &pa, ra, &params, &tie_direction(seed, 2, 1, 0));
        prop_assert!((fab + fba).amax() <= 1e-12 * (1.0 + fab.amax()));
    }

    #[test]
    fn coincident_centers_push_apart(p in vec3(-10.0..10.0), r in 0.5f64..5.0, seed in any::<u64>()) {
        let params = ForceParams::default();
        let fab = collision_force(&p, r, &p, r, &params, &tie_direction(seed, 3, 9, 4));
        let fba = collision_force(&p, r, &p, r, &params, &tie_direction(seed, 9, 3, 4));
        prop_assert!(fab.norm() > 0.0);
        prop_assert!((fab + fba).amax() <= 1e-12);
    }

    #[test]
    fn boundary_is_idempotent_and_contains(p in vec3(-1e4..1e4), lo in -50.0f64..0.0, width in 1.0f64..100.0) {
        for mode in [BoundaryMode::Closed, BoundaryMode::Toroidal] {
            let bc = BoundaryCondition::cube(mode, lo, lo + width).unwrap();
            let q = bc.apply(p);
            prop_assert_eq!(bc.apply(q), q);
            for d in 0..3 {
                prop_assert!(q[d] >= lo);
                match mode {
                    BoundaryMode::Toroidal => prop_assert!(q[d] < lo + width),
                    _ => prop_assert!(q[d] <= lo + width),
                }
            }
        }
        let open = BoundaryCondition::cube(BoundaryMode::Open, lo, lo + width).unwrap();
        prop_assert_eq!(open.apply(p), p);
    }

    #[test]
    fn toroidal_wrap_preserves_offsets(p in vec3(0.0..100.0), shift in -5i32..5) {
        let bc = BoundaryCondition::cube(BoundaryMode::Toroidal, 0.0, 100.0).unwrap();
        let q = bc.apply(p + Real3::repeat(100.0 * shift as f64));
        prop_assert!((q - p).amax() < 1e-9);
    }

    #[test]
    fn grid_matches_brute_force(points in prop::collection::vec(vec3(-30.0..30.0), 1..150), length in 0.5f64..10.0, frac in 0.1f64..1.0) {
        let radius = length * frac;
        let grid = UniformGrid::build(&points, length).unwrap();
        for i in 0..points.len() {
            let mut got = Vec::new();
            grid.for_each_neighbor(i, radius, |j, _| got.push(j)).unwrap();
            got.sort_unstable();
            let mut want = brute_force_neighbors(&points, i, radius);
            want.sort_unstable();
            prop_assert_eq!(got, want);
        }
    }

    #[test]
    fn balance_covers_every_box(populations in prop::collection::vec(0usize..50, 1..200), workers in 1usize..9) {
        let plan = balance(&populations, workers);
        let sizes = plan.sizes();
        prop_assert_eq!(sizes.len(), workers);
        prop_assert_eq!(sizes.iter().sum::<usize>(), populations.iter().sum::<usize>());
        prop_assert!(plan.ranges.windows(2).all(|w| w[0].end == w[1].start));
        let mut boundaries = BTreeSet::from([0usize]);
        let mut acc = 0;
        for p in &populations {
            acc += p;
            boundaries.insert(acc);
        }
        prop_assert!(plan.ranges.iter().all(|r| boundaries.contains(&r.end)));
        let largest = populations.iter().copied().max().unwrap_or(0);
        let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        prop_assert!(hi - lo <= largest, "sizes {:?} spread beyond {}", sizes, largest);
    }

    #[test]
    fn frames_round_trip(seed in any::<u64>(), n in 0usize..200) {
        let reg = TypeRegistry::standard();
        let agents = population(seed, n);
        let frame = serialize(&agents, &reg).unwrap();
        prop_assert_eq!(deserialize(&frame, &reg).unwrap().agents, agents);
    }

    #[test]
    fn delta_round_trips_as_a_set(seed in any::<u64>(), keep in 0.0f64..1.0, fresh in 0usize..50, lz4 in any::<bool>()) {
        let reg = TypeRegistry::standard();
        let old = population(seed, 120);
        let mut msg: Vec<Agent> = old.iter().filter(|a| (a.key as f64 / 120.0) < keep).cloned().collect();
        for a in msg.iter_mut().step_by(3) {
            a.position.x += 0.5;
        }
        msg.extend(population(seed ^ 1, fresh).into_iter().map(|mut a| {
            a.key += 1_000;
            a.global_id = Some(GlobalAgentId { rank: 1, counter: a.key });
            a
        }));
        msg.reverse();
        let codec = if lz4 { CodecKind::Lz4 } else { CodecKind::Identity };
        let reference = Reference::new(serialize(&old, &reg).unwrap(), 3).unwrap();
        let enc = delta_encode(&serialize(&msg, &reg).unwrap(), Some(&reference), codec).unwrap();
        let got = delta_decode(&enc.bytes, Some(&reference), &reg).unwrap();
        prop_assert_eq!(by_key(got), by_key(msg));
    }

    #[test]
    fn removal_keeps_the_complement_dense(n in 1usize..2000, seed in any::<u64>(), workers in 1usize..9, fraction in 0.0f64..1.0) {
        let agents = population(seed, n);
        let mut store = AgentStore::new();
        store.commit_additions(vec![agents]).unwrap();
        let cut = (n as f64 * fraction) as u64;
        let mut lists = vec![Vec::new(); workers];
        let mut removed = BTreeSet::new();
        for i in 0..n {
            let key = store.as_slice()[i].key;
            if seed.rotate_left(key as u32 % 64) % (n as u64).max(1) < cut {
                lists[i % workers].push(store.id_at(i));
                removed.insert(key);
            }
        }
        let outcome = store.commit_removals(&lists, workers).unwrap();
        prop_assert_eq!(outcome.new_count, n - removed.len());
        prop_assert_eq!(store.len(), n - removed.len());
        let left: BTreeSet<u64> = store.iter().map(|a| a.key).collect();
        prop_assert_eq!(left.len(), store.len());
        prop_assert!(left.is_disjoint(&removed));
        prop_assert_eq!(left.len() + removed.len(), n);
    }

    #[test]
    fn operations_run_on_schedule(frequency in 1u32..50, iterations in 0u64..500) {
        let op = OperationDescriptor::new("op", OpKind::Agent, frequency).unwrap();
        let due = (0..iterations).filter(|&i| op.is_due(i)).count() as u64;
        prop_assert_eq!(op.executions(iterations), due);
        prop_assert_eq!(due, iterations.div_ceil(frequency as u64));
    }
}
