//! The iteration loop. Every rank runs on its own thread with its own worker pool and talks to
//! the others only through its [`RankTransport`].

use std::ops::Range;
use std::time::{Duration, Instant};

use super::agent::Agent;
use super::context::{ExecutionContext, OpKind, OperationDescriptor};
use super::ids::GlobalIdAllocator;
use super::ops::{run_agent_ops, Snapshot, StepEnv};
use super::report::{RunOptions, RunStats, SimulationReport, Timings};
use super::store::AgentStore;
use crate::analysis::TimeSeries;
use crate::diffusion::{DiffusionGrid, Secretion};
use crate::exchange::{
    create_transports, decode_indices, decode_positions, deserialize, encode_indices, encode_positions, plan_migration, select_aura, serialize, DeltaReceiver,
    DeltaSender, GhostSet, PartitionMap, RankTransport, Tag, TypeRegistry,
};
use crate::models::ModelPreset;
use crate::physics::{BoundaryCondition, ForceParams};
use crate::spatial::{bounding_box, sort_and_balance, UniformGrid};
use crate::{Error, Real3, Result};

/// Runs `preset` and returns the observable time series: one row for the initial state and
/// one after each iteration.
pub fn simulate(preset: &ModelPreset, opts: &RunOptions) -> Result<SimulationReport> {
    preset.validate()?;
    if opts.workers == 0 || opts.ranks == 0 {
        return Err(Error::InvalidParameter("workers and ranks must be at least 1".into()));
    }
    if opts.partition_factor == 0 {
        return Err(Error::InvalidParameter("partition factor must be at least 1".into()));
    }
    let iterations = opts.iterations.unwrap_or_else(|| preset.default_iterations());
    let (lo, hi) = preset.bounds();
    let map = PartitionMap::new(lo, hi, opts.ranks, preset.interaction_length(), opts.partition_factor)?;
    let start = Instant::now();
    let transports = create_transports(opts.ranks, opts.batch_bytes);

    let results: Vec<Result<RankOutput>> = std::thread::scope(|s| {
        let handles: Vec<_> = transports
            .into_iter()
            .map(|t| {
                let map = &map;
                s.spawn(move || {
                    let rank = t.rank();
                    let pool = rayon::ThreadPoolBuilder::new()
                        .num_threads(opts.workers)
                        .build()
                        .map_err(|e| Error::Transport { rank, reason: format!("worker pool: {e}") })?;
                    pool.install(|| RankState::new(preset, opts, map, t)?.run(iterations))
                })
            })
            .collect();
        handles
            .into_iter()
            .enumerate()
            .map(|(r, h)| h.join().unwrap_or_else(|_| Err(Error::Transport { rank: r as u32, reason: "rank thread panicked".into() })))
            .collect()
    });

    let mut outputs = Vec::with_capacity(results.len());
    let mut first_error: Option<Error> = None;
    for r in results {
        match r {
            Ok(o) => outputs.push(o),
            // a failing rank makes its peers fail with transport errors; report the cause
            Err(e) => match (&first_error, &e) {
                (None, _) => first_error = Some(e),
                (Some(Error::Transport { .. }), err) if !matches!(err, Error::Transport { .. }) => first_error = Some(e),
                _ => {}
            },
        }
    }
    if let Some(e) = first_error {
        return Err(e);
    }

    let mut stats = RunStats::default();
    let mut series = None;
    let mut population = None;
    let mut substances = Vec::new();
    let mut iteration_times = Vec::new();
    let mut timings = Timings::default();
    for (r, o) in outputs.into_iter().enumerate() {
        add_stats(&mut stats, &o.stats);
        if r == 0 {
            series = o.series;
            population = o.population;
            substances = o.substances;
            iteration_times = o.iteration_times;
            timings = o.timings;
        }
    }
    timings.total = start.elapsed();
    Ok(SimulationReport {
        preset: preset.name(),
        iterations,
        series: series.ok_or_else(|| Error::Transport { rank: 0, reason: "rank 0 produced no series".into() })?,
        timings,
        iteration_times,
        stats,
        population,
        substances,
    })
}

fn add_stats(total: &mut RunStats, s: &RunStats) {
    total.force_calculations += s.force_calculations;
    total.static_skips += s.static_skips;
    add_series(&mut total.agent_visits, &s.agent_visits);
    add_series(&mut total.aura_bytes, &s.aura_bytes);
    total.migrated_agents += s.migrated_agents;
    total.migration_messages += s.migration_messages;
    total.lookups += s.lookups;
    total.global_ids_issued += s.global_ids_issued;
    if total.operation_runs.is_empty() {
        total.operation_runs = s.operation_runs.clone();
    }
}

fn add_series(total: &mut Vec<u64>, s: &[u64]) {
    if total.len() < s.len() {
        total.resize(s.len(), 0);
    }
    for (t, v) in total.iter_mut().zip(s) {
        *t += v;
    }
}

struct RankOutput {
    series: Option<TimeSeries>,
    population: Option<Vec<Agent>>,
    substances: Vec<DiffusionGrid>,
    iteration_times: Vec<Duration>,
    timings: Timings,
    stats: RunStats,
}

struct Channel {
    peer: u32,
    sender: DeltaSender,
    receiver: DeltaReceiver,
}

struct RankState<'a> {
    preset: &'a ModelPreset,
    opts: &'a RunOptions,
    map: &'a PartitionMap,
    rank: u32,
    t: RankTransport,
    registry: TypeRegistry,
    store: AgentStore,
    ghosts: GhostSet,
    grid: UniformGrid,
    substances: Vec<DiffusionGrid>,
    ids: GlobalIdAllocator,
    channels: Vec<Channel>,
    bc: BoundaryCondition,
    force: Option<ForceParams>,
    interaction_length: f64,
    behaviors: OperationDescriptor,
    mechanics: OperationDescriptor,
    diffusion: OperationDescriptor,
    sorting: Option<OperationDescriptor>,
    runs: [u64; 4],
    series: Option<TimeSeries>,
    timings: Timings,
    stats: RunStats,
}

fn timed<T>(slot: &mut Duration, f: impl FnOnce() -> T) -> T {
    let t0 = Instant::now();
    let out = f();
    *slot += t0.elapsed();
    out
}

/// `n` agents split into `workers` nearly equal contiguous blocks.
fn equal_blocks(n: usize, workers: usize) -> Vec<Range<usize>> {
    (0..workers).map(|k| k * n / workers..(k + 1) * n / workers).collect()
}

const SECRETION_BYTES: usize = 22;

fn encode_secretions(events: &[Secretion]) -> Vec<u8> {
    let mut out = Vec::with_capacity(events.len() * SECRETION_BYTES);
    for e in events {
        out.extend_from_slice(&e.substance.to_le_bytes());
        out.extend_from_slice(&e.node.to_le_bytes());
        out.extend_from_slice(&e.key.to_le_bytes());
        out.extend_from_slice(&e.amount.to_le_bytes());
    }
    out
}

fn decode_secretions(bytes: &[u8], out: &mut Vec<Secretion>) -> Result<()> {
    if bytes.len() % SECRETION_BYTES != 0 {
        return Err(Error::Decode { offset: bytes.len(), reason: "secretion list length".into() });
    }
    for c in bytes.chunks_exact(SECRETION_BYTES) {
        out.push(Secretion {
            substance: u16::from_le_bytes([c[0], c[1]]),
            node: u32::from_le_bytes(c[2..6].try_into().unwrap()),
            key: u64::from_le_bytes(c[6..14].try_into().unwrap()),
            amount: f64::from_le_bytes(c[14..22].try_into().unwrap()),
        });
    }
    Ok(())
}

impl<'a> RankState<'a> {
    fn new(preset: &'a ModelPreset, opts: &'a RunOptions, map: &'a PartitionMap, t: RankTransport) -> Result<Self> {
        let rank = t.rank();
        let mut store = AgentStore::new();
        store.commit_additions(vec![preset.initial_agents(map, Some(rank), opts.seed)?])?;
        let channels = map
            .neighbor_ranks(rank)
            .into_iter()
            .map(|peer| Channel { peer, sender: DeltaSender::new(opts.channel), receiver: DeltaReceiver::new(opts.channel) })
            .collect();
        let sorting = match opts.sort_frequency {
            0 => None,
            f => Some(OperationDescriptor::new("sorting", OpKind::StandalonePre, f)?),
        };
        Ok(Self {
            preset,
            opts,
            map,
            rank,
            t,
            registry: TypeRegistry::standard(),
            store,
            ghosts: GhostSet::new(),
            grid: UniformGrid::new(),
            substances: preset.substances()?,
            ids: GlobalIdAllocator::new(rank),
            channels,
            bc: preset.boundary()?,
            force: preset.force_params(),
            interaction_length: preset.interaction_length(),
            behaviors: OperationDescriptor::new("behaviors", OpKind::Agent, opts.behavior_frequency)?,
            mechanics: OperationDescriptor::new("mechanics", OpKind::Agent, opts.mechanics_frequency)?,
            diffusion: OperationDescriptor::new("diffusion", OpKind::StandalonePost, opts.diffusion_frequency)?,
            sorting,
            runs: [0; 4],
            series: (rank == 0).then(|| TimeSeries::new(preset.channels())),
            timings: Timings::default(),
            stats: RunStats::default(),
        })
    }

    fn run(mut self, iterations: u64) -> Result<RankOutput> {
        self.observe(0)?;
        let mut iteration_times = Vec::with_capacity(iterations as usize);
        for i in 0..iterations {
            let t0 = Instant::now();
            self.step(i)?;
            iteration_times.push(t0.elapsed());
            self.observe(i + 1)?;
        }
        let population = if self.opts.keep_population { self.gather_population()? } else { None };
        self.stats.global_ids_issued = self.ids.issued();
        self.stats.operation_runs = vec![
            ("sorting", self.runs[0]),
            ("behaviors", self.runs[1]),
            ("mechanics", self.runs[2]),
            ("diffusion", self.runs[3]),
        ];
        Ok(RankOutput {
            series: self.series,
            population,
            substances: self.substances,
            iteration_times,
            timings: self.timings,
            stats: self.stats,
        })
    }

    fn positions(&self) -> Vec<Real3> {
        self.store.iter().map(|a| a.position).collect()
    }

    fn step(&mut self, i: u64) -> Result<()> {
        let workers = self.opts.workers;
        let mut blocks = equal_blocks(self.store.len(), workers);
        if self.sorting.as_ref().is_some_and(|s| s.is_due(i)) && !self.store.is_empty() {
            let t0 = Instant::now();
            let positions = self.positions();
            let (lo, hi) = bounding_box(&positions);
            self.grid.rebuild_in(&positions, self.interaction_length, lo, hi)?;
            blocks = sort_and_balance(&mut self.store, &self.grid, workers)?.plan.ranges;
            self.runs[0] += 1;
            self.timings.sorting += t0.elapsed();
        }

        let mut aura_time = Duration::ZERO;
        let aura_bytes = timed(&mut aura_time, || self.exchange_aura())?;
        self.timings.aura += aura_time;
        self.stats.aura_bytes.push(aura_bytes);

        let run_behaviors = self.behaviors.is_due(i);
        let mechanics = self.force.as_ref().filter(|_| self.mechanics.is_due(i));
        self.runs[1] += u64::from(run_behaviors);
        self.runs[2] += u64::from(mechanics.is_some());
        if !run_behaviors && mechanics.is_none() {
            self.stats.agent_visits.push(0);
        } else {
            let t0 = Instant::now();
            let n = self.store.len();
            let positions = self.positions();
            let (lo, hi) = if positions.is_empty() { self.map.bounds() } else { bounding_box(&positions) };
            let margin = Real3::repeat(self.interaction_length);
            self.grid.rebuild_in(&positions, self.interaction_length, lo - margin, hi + margin)?;
            for (k, g) in self.ghosts.as_slice().iter().enumerate() {
                self.grid.insert(n + k, g.position);
            }
            let snapshot = Snapshot::capture(self.store.as_slice(), self.ghosts.as_slice());
            self.timings.neighbor_grid += t0.elapsed();

            let t0 = Instant::now();
            let env = StepEnv {
                seed: self.opts.seed,
                iteration: i,
                grid: &self.grid,
                snapshot: &snapshot,
                ghosts: self.ghosts.as_slice(),
                substances: &self.substances,
                bc: &self.bc,
                run_behaviors,
                mechanics,
                static_detection: self.opts.static_detection,
                interaction_length: self.interaction_length,
            };
            let works = run_agent_ops(self.store.as_mut_slice(), &blocks, self.opts.mode, self.opts.order, &env)?;
            self.timings.agent_ops += t0.elapsed();
            self.stats.agent_visits.push(n as u64);

            let t0 = Instant::now();
            let mut ctx = ExecutionContext::new(self.opts.mode, workers);
            let mut secretions = Vec::new();
            let mut worker = 0;
            for (idx, w) in works.into_iter().enumerate() {
                while idx >= blocks[worker].end {
                    worker += 1;
                }
                self.stats.force_calculations += u64::from(w.force_computed);
                self.stats.static_skips += u64::from(w.skipped);
                secretions.extend(w.secretions);
                for d in w.daughters {
                    ctx.schedule_addition(worker, d);
                }
                if w.removed {
                    ctx.schedule_removal(&self.store, worker, self.store.id_at(idx))?;
                }
                self.store.as_mut_slice()[idx] = w.agent;
            }
            ctx.commit(&mut self.store)?;
            self.timings.commit += t0.elapsed();

            if !self.substances.is_empty() {
                let t0 = Instant::now();
                self.apply_secretions(secretions)?;
                self.timings.diffusion += t0.elapsed();
            }
        }

        if !self.substances.is_empty() && self.diffusion.is_due(i) {
            let t0 = Instant::now();
            for g in &mut self.substances {
                g.step();
            }
            self.runs[3] += 1;
            self.timings.diffusion += t0.elapsed();
        }

        if self.map.ranks() > 1 {
            let mut migration_time = Duration::ZERO;
            timed(&mut migration_time, || self.migrate())?;
            self.timings.migration += migration_time;
        }
        Ok(())
    }

    /// Sends the aura of every neighbor rank and replaces the ghosts with what arrives.
    /// Returns the bytes put on the wire.
    fn exchange_aura(&mut self) -> Result<u64> {
        if self.channels.is_empty() {
            self.ghosts.clear();
            return Ok(0);
        }
        let positions = self.positions();
        let selection = select_aura(&positions, self.map, self.rank, self.interaction_length);
        let mut sent = 0u64;
        for (peer, indices) in selection {
            let mut batch = Vec::with_capacity(indices.len());
            for i in indices {
                let a = &mut self.store.as_mut_slice()[i];
                self.ids.assign(a);
                batch.push(a.clone());
            }
            let ch = self.channels.iter_mut().find(|c| c.peer == peer).ok_or_else(|| Error::Transport { rank: self.rank, reason: format!("no channel to rank {peer}") })?;
            let msg = ch.sender.encode(&batch, &self.registry)?;
            sent += msg.len() as u64;
            self.t.send(peer, Tag::Aura, &msg)?;
        }
        let mut ghosts = Vec::new();
        for ch in &mut self.channels {
            let msg = self.t.recv(ch.peer, Tag::Aura)?;
            ghosts.extend(ch.receiver.decode(&msg, &self.registry)?);
        }
        self.ghosts.replace(ghosts);
        Ok(sent)
    }

    fn apply_secretions(&mut self, mut local: Vec<Secretion>) -> Result<()> {
        let mut all = if self.map.ranks() > 1 {
            let parts = self.t.all_gather(Tag::Secretion, encode_secretions(&local))?;
            let mut all = Vec::new();
            for p in &parts {
                decode_secretions(p, &mut all)?;
            }
            all
        } else {
            std::mem::take(&mut local)
        };
        DiffusionGrid::apply_secretions(&mut self.substances, &mut all);
        Ok(())
    }

    /// Hands agents that left this rank's region to their new owners.
    fn migrate(&mut self) -> Result<()> {
        let ranks = self.map.ranks();
        let me = self.rank as usize;
        let positions = self.positions();
        let plan = plan_migration(&positions, self.map, self.rank);

        let queries = encode_positions(plan.lookup.iter().map(|&i| positions[i]));
        let asked = self.t.all_gather(Tag::Lookup, queries)?;
        let mut replies = vec![Vec::new(); ranks];
        for (from, q) in asked.iter().enumerate() {
            if from == me {
                continue;
            }
            let mine: Vec<u32> = decode_positions(q)?
                .iter()
                .enumerate()
                .filter(|(_, p)| self.map.owner_of(p) == self.rank)
                .map(|(k, _)| k as u32)
                .collect();
            replies[from] = encode_indices(&mine);
        }
        let answers = self.t.all_to_all(Tag::LookupReply, replies)?;
        let mut resolved: Vec<Option<u32>> = vec![None; plan.lookup.len()];
        for (from, a) in answers.iter().enumerate() {
            if from == me {
                continue;
            }
            for k in decode_indices(a)? {
                let slot = resolved.get_mut(k as usize).ok_or_else(|| Error::Transport { rank: self.rank, reason: format!("lookup reply index {k} out of range") })?;
                if slot.replace(from as u32).is_some() {
                    return Err(Error::Transport { rank: self.rank, reason: format!("two owners claim lookup {k}") });
                }
            }
        }
        self.stats.lookups += plan.lookup.len() as u64;
        let mut dest = plan.direct;
        for (k, r) in resolved.into_iter().enumerate() {
            let r = r.ok_or_else(|| Error::Transport { rank: self.rank, reason: "no rank owns a migrating agent".into() })?;
            dest.push((plan.lookup[k], r));
        }
        dest.sort_unstable();

        let mut outgoing: Vec<Vec<Agent>> = vec![Vec::new(); ranks];
        for &(i, r) in &dest {
            let a = &mut self.store.as_mut_slice()[i];
            self.ids.assign(a);
            outgoing[r as usize].push(a.clone());
        }
        self.stats.migrated_agents += dest.len() as u64;
        self.stats.migration_messages += outgoing.iter().filter(|v| !v.is_empty()).count() as u64;
        let frames = outgoing.iter().map(|v| if v.is_empty() { Ok(Vec::new()) } else { serialize(v, &self.registry) }).collect::<Result<Vec<_>>>()?;
        let incoming = self.t.all_to_all(Tag::Migration, frames)?;

        if !dest.is_empty() {
            let departed: Vec<_> = dest.iter().map(|&(i, _)| self.store.id_at(i)).collect();
            self.store.commit_removals(&[departed], 1)?;
        }
        let mut arrived = Vec::new();
        for (from, frame) in incoming.iter().enumerate() {
            if from != me && !frame.is_empty() {
                arrived.extend(deserialize(frame, &self.registry)?.agents);
            }
        }
        if !arrived.is_empty() {
            self.store.commit_additions(vec![arrived])?;
        }
        Ok(())
    }

    /// All agents sorted by key on rank 0, `None` elsewhere.
    fn gather_sorted(&mut self) -> Result<Option<Vec<Agent>>> {
        let mut all = if self.map.ranks() == 1 {
            self.store.as_slice().to_vec()
        } else {
            let frame = serialize(self.store.as_slice(), &self.registry)?;
            match self.t.gather(Tag::Observation, frame)? {
                None => return Ok(None),
                Some(frames) => {
                    let mut all = Vec::new();
                    for f in &frames {
                        all.extend(deserialize(f, &self.registry)?.agents);
                    }
                    all
                }
            }
        };
        all.sort_unstable_by_key(|a| a.key);
        Ok(Some(all))
    }

    fn observe(&mut self, iteration: u64) -> Result<()> {
        let t0 = Instant::now();
        if let Some(all) = self.gather_sorted()? {
            let row = self.preset.observe(&all, &self.substances)?;
            if let Some(s) = &mut self.series {
                s.push(iteration, row)?;
            }
        }
        self.timings.observe += t0.elapsed();
        Ok(())
    }

    fn gather_population(&mut self) -> Result<Option<Vec<Agent>>> {
        self.gather_sorted()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_sir() -> ModelPreset {
        let mut p = ModelPreset::by_name("sir").unwrap();
        p.set("n_susceptible", "300").unwrap();
        p.set("n_infected", "10").unwrap();
        p.set("space_length", "40").unwrap();
        p
    }

    #[test]
    fn series_has_a_row_per_iteration_plus_one() {
        let opts = RunOptions { iterations: Some(5), ..RunOptions::default() };
        let r = simulate(&small_sir(), &opts).unwrap();
        assert_eq!(r.series.len(), 6);
        assert_eq!(r.series.rows()[0], vec![300.0, 10.0, 0.0]);
        for row in r.series.rows() {
            assert_eq!(row.iter().sum::<f64>(), 310.0);
        }
    }

    #[test]
    fn equal_blocks_cover() {
        let b = equal_blocks(10, 3);
        assert_eq!(b, vec![0..3, 3..6, 6..10]);
        assert_eq!(equal_blocks(0, 2), vec![0..0, 0..0]);
    }

    #[test]
    fn secretions_round_trip() {
        let e = vec![Secretion { substance: 1, node: 7, key: 99, amount: 0.5 }];
        let mut out = Vec::new();
        decode_secretions(&encode_secretions(&e), &mut out).unwrap();
        assert_eq!(out, e);
        assert!(decode_secretions(&[0; 5], &mut out).is_err());
    }

    #[test]
    fn ranks_agree_on_sir() {
        let base = RunOptions { iterations: Some(20), seed: 3, ..RunOptions::default() };
        let one = simulate(&small_sir(), &base).unwrap();
        let two = simulate(&small_sir(), &RunOptions { ranks: 2, ..base.clone() }).unwrap();
        assert_eq!(one.series, two.series);
        assert!(two.stats.aura_bytes.iter().sum::<u64>() > 0);
    }

    #[test]
    fn zero_workers_rejected() {
        let opts = RunOptions { workers: 0, ..RunOptions::default() };
        assert!(simulate(&small_sir(), &opts).is_err());
    }
}
