use agentgrid::engine::{simulate, Behavior, BehaviorInstance, SirState, StaticState};
use agentgrid::exchange::{delta_decode, delta_encode, deserialize, serialize, CodecKind, Reference, TypeRegistry};
use agentgrid::{Agent, AgentKind, ExecutionMode, ExecutionOrder, GlobalAgentId, LocalAgentId, ModelPreset, Real3, RunOptions};

fn small(name: &str) -> ModelPreset {
    let mut p = ModelPreset::by_name(name).unwrap();
    let overrides: &[(&str, &str)] = match name {
        "clustering" => &[("n_cells", "300"), ("resolution", "16")],
        "sir" => &[("n_susceptible", "400"), ("n_infected", "20"), ("space_length", "50")],
        _ => &[],
    };
    for (k, v) in overrides {
        p.set(k, v).unwrap();
    }
    p
}

/// Series and final agents. Slot ids and global ids are storage bookkeeping (sorting moves
/// slots, migration issues global ids), so they are cleared before comparing.
fn final_state(preset: &ModelPreset, opts: RunOptions) -> (String, Vec<Agent>) {
    let r = simulate(preset, &RunOptions { keep_population: true, ..opts }).unwrap();
    let mut agents = r.population.unwrap();
    for a in &mut agents {
        a.local_id = LocalAgentId::new(0, 0);
        a.global_id = None;
    }
    (r.series.to_csv_string(), agents)
}

#[test]
fn copy_mode_is_independent_of_worker_count() {
    for name in ModelPreset::NAMES {
        let preset = small(name);
        let base = RunOptions { seed: 3, iterations: Some(25), ..RunOptions::default() };
        let reference = final_state(&preset, RunOptions { workers: 1, ..base.clone() });
        for workers in [2, 8] {
            let other = final_state(&preset, RunOptions { workers, ..base.clone() });
            assert_eq!(other, reference, "{name} with {workers} workers");
        }
    }
}

#[test]
fn sorting_does_not_change_results() {
    for name in ["proliferation", "clustering", "spheroid"] {
        let preset = small(name);
        let base = RunOptions { seed: 4, iterations: Some(20), workers: 4, ..RunOptions::default() };
        let plain = final_state(&preset, base.clone());
        let sorted = final_state(&preset, RunOptions { sort_frequency: 3, ..base });
        assert_eq!(sorted, plain, "{name}");
    }
}

#[test]
fn in_place_matches_copy_for_proliferation() {
    let preset = small("proliferation");
    let base = RunOptions { seed: 5, iterations: Some(40), ..RunOptions::default() };
    let copy = final_state(&preset, base.clone());
    let in_place = final_state(&preset, RunOptions { mode: ExecutionMode::InPlace, ..base });
    assert_eq!(in_place, copy);
}

#[test]
fn row_order_is_deterministic() {
    let preset = small("sir");
    let opts = RunOptions { seed: 6, iterations: Some(30), order: ExecutionOrder::Row, ..RunOptions::default() };
    assert_eq!(final_state(&preset, opts.clone()), final_state(&preset, RunOptions { workers: 4, ..opts }));
}

#[test]
fn operations_run_at_their_frequency() {
    let preset = small("clustering");
    let opts = RunOptions {
        iterations: Some(20),
        sort_frequency: 7,
        behavior_frequency: 2,
        mechanics_frequency: 3,
        diffusion_frequency: 4,
        ..RunOptions::default()
    };
    let r = simulate(&preset, &opts).unwrap();
    assert_eq!(r.stats.operation_runs, vec![("sorting", 3), ("behaviors", 10), ("mechanics", 7), ("diffusion", 5)]);
    assert_eq!(r.iteration_times.len(), 20);
}

#[test]
fn delta_and_compression_do_not_change_results() {
    let preset = small("clustering");
    let base = RunOptions { seed: 8, iterations: Some(15), ranks: 2, ..RunOptions::default() };
    let reference = final_state(&preset, base.clone());
    for (delta, codec, k) in [(false, CodecKind::Identity, 10), (true, CodecKind::Identity, 1), (true, CodecKind::Lz4, 3)] {
        let mut opts = base.clone();
        opts.channel.delta = delta;
        opts.channel.codec = codec;
        opts.channel.reference_update = k;
        assert_eq!(final_state(&preset, opts), reference, "delta={delta} codec={codec:?} k={k}");
    }
}

#[test]
fn partition_factor_does_not_change_results() {
    let preset = small("sir");
    let base = RunOptions { seed: 2, iterations: Some(30), ranks: 4, ..RunOptions::default() };
    let reference = final_state(&preset, RunOptions { ranks: 1, ..base.clone() });
    for factor in [1, 2, 3] {
        assert_eq!(final_state(&preset, RunOptions { partition_factor: factor, ..base.clone() }), reference, "factor {factor}");
    }
}

#[test]
fn static_detection_skips_resting_cells() {
    let preset = small("proliferation");
    let base = RunOptions { iterations: Some(100), ..RunOptions::default() };
    let off = simulate(&preset, &base).unwrap();
    let on = simulate(&preset, &RunOptions { static_detection: true, ..base }).unwrap();
    assert_eq!(off.stats.static_skips, 0);
    assert!(on.stats.static_skips > 0);
    assert!(on.stats.force_calculations < off.stats.force_calculations);
    assert_eq!(on.series, off.series);
}

#[test]
fn invalid_options_are_rejected() {
    let preset = small("sir");
    for opts in [
        RunOptions { workers: 0, ..RunOptions::default() },
        RunOptions { ranks: 0, ..RunOptions::default() },
        RunOptions { partition_factor: 0, ..RunOptions::default() },
        RunOptions { behavior_frequency: 0, ..RunOptions::default() },
    ] {
        assert!(simulate(&preset, &RunOptions { iterations: Some(1), ..opts }).is_err());
    }
}

/// Hand-built agents covering every kind and behavior, so the golden bytes do not depend on an RNG.
fn golden_agents() -> Vec<Agent> {
    let mut cell = Agent::new(7, Real3::new(1.5, -2.25, 3.0), 10.0, AgentKind::Cell { age: 42 });
    cell.global_id = Some(GlobalAgentId { rank: 1, counter: 9 });
    cell.behaviors.push(BehaviorInstance {
        behavior: Behavior::GrowDivide { growth_rate: 300.0, target_diameter: 14.0, volume_ratio: 1.0 },
        copy_on_division: true,
        remove_on_division: false,
    });
    cell.behaviors.push(BehaviorInstance {
        behavior: Behavior::TumorGrowth {
            growth_rate: 0.5,
            max_diameter: 16.0,
            division_probability: 0.25,
            death_probability: 0.125,
            min_age: 3,
            displacement_rate: 0.75,
        },
        copy_on_division: false,
        remove_on_division: true,
    });
    cell.static_state = StaticState { moved: true, grew: false, is_new: false, nonzero_forces: 2, static_flag: false };

    let mut person = Agent::new(0x1_0000_0001, Real3::new(99.0, 0.0, 0.5), 1.0, AgentKind::Person { state: SirState::Infected });
    for behavior in [Behavior::Infection { radius: 3.5, probability: 0.25 }, Behavior::Recovery { probability: 0.0625 }, Behavior::RandomMovement { speed: 5.0 }] {
        person.behaviors.push(BehaviorInstance { behavior, copy_on_division: false, remove_on_division: false });
    }
    person.static_state = StaticState { static_flag: true, ..StaticState::default() };

    let mut soma = Agent::new(3, Real3::new(-1.0, -1.0, -1.0), 8.0, AgentKind::SomaCell { cell_type: 1 });
    soma.global_id = Some(GlobalAgentId { rank: 0, counter: 3 });
    soma.behaviors.push(BehaviorInstance { behavior: Behavior::Secretion { substance: 1, quantity: 2.0 }, copy_on_division: true, remove_on_division: false });
    soma.behaviors.push(BehaviorInstance { behavior: Behavior::Chemotaxis { substance: 1, weight: 0.5 }, copy_on_division: true, remove_on_division: false });
    vec![cell, person, soma]
}

const GOLDEN_FRAME: &[u8] = include_bytes!("golden/frame.bin");
const GOLDEN_DELTA: &[u8] = include_bytes!("golden/delta_identity.bin");

/// Set `AGENTGRID_BLESS=1` to rewrite the golden files after a deliberate format change.
fn bless(name: &str, bytes: &[u8]) {
    if std::env::var_os("AGENTGRID_BLESS").is_some() {
        let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join(name), bytes).unwrap();
    }
}

#[test]
fn frame_bytes_match_golden_file() {
    let reg = TypeRegistry::standard();
    let frame = serialize(&golden_agents(), &reg).unwrap();
    bless("frame.bin", &frame);
    assert_eq!(frame, GOLDEN_FRAME);
    assert_eq!(deserialize(GOLDEN_FRAME, &reg).unwrap().agents, golden_agents());
}

#[test]
fn delta_container_matches_golden_file() {
    let reg = TypeRegistry::standard();
    let old = golden_agents();
    let mut new = old.clone();
    new[0].position.x += 1.0;
    new[1].kind = AgentKind::Person { state: SirState::Recovered };
    new.remove(2);
    let reference = Reference::new(serialize(&old, &reg).unwrap(), 2).unwrap();
    let enc = delta_encode(&serialize(&new, &reg).unwrap(), Some(&reference), CodecKind::Identity).unwrap();
    bless("delta_identity.bin", &enc.bytes);
    assert_eq!(enc.bytes, GOLDEN_DELTA);
    let mut got = delta_decode(GOLDEN_DELTA, Some(&reference), &reg).unwrap();
    got.sort_by_key(|a| a.key);
    new.sort_by_key(|a| a.key);
    assert_eq!(got, new);
}
