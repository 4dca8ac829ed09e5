use std::ops::Range;

use rayon::prelude::*;

use super::grid::UniformGrid;
use super::morton::{compute_morton_offsets, decode3};
use crate::engine::par::exclusive_prefix_sum;
use crate::engine::AgentStore;
use crate::Result;

/// Contiguous per-worker ranges over the sorted agent sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionPlan {
    pub ranges: Vec<Range<usize>>,
}

impl PartitionPlan {
    pub fn sizes(&self) -> Vec<usize> {
        self.ranges.iter().map(|r| r.len()).collect()
    }
}

#[derive(Clone, Debug)]
pub struct SortOutcome {
    pub plan: PartitionPlan,
    /// `old_to_new[i]` is the new slot of the agent formerly in slot `i`.
    pub old_to_new: Vec<u32>,
    /// Agent counts of the non-empty boxes in Morton order.
    pub box_populations: Vec<usize>,
}

/// Agent order that visits boxes in Morton order, keeping each box's agents contiguous and in
/// ascending slot order. `grid` must have been built over the same agent sequence.
pub fn morton_order(grid: &UniformGrid, agents: usize, workers: usize) -> Result<(Vec<u32>, Vec<usize>)> {
    let dims = grid.dims();
    let offsets = compute_morton_offsets(&dims)?;
    let entries = &offsets.entries;
    let nboxes = offsets.boxes as usize;
    let workers = workers.max(1);
    let chunk = nboxes.div_ceil(workers).max(1);

    // box index for every Morton rank, computed block-parallel
    let box_of_rank: Vec<u32> = (0..nboxes)
        .into_par_iter()
        .chunks(chunk)
        .flat_map_iter(|ranks| {
            let mut e = entries.partition_point(|&(c, _)| c <= ranks[0] as u64) - 1;
            ranks.into_iter().map(move |r| {
                while e + 1 < entries.len() && entries[e + 1].0 <= r as u64 {
                    e += 1;
                }
                let [x, y, z] = decode3(r as u64 + entries[e].1);
                grid.box_index([x as usize, y as usize, z as usize]) as u32
            })
        })
        .collect();

    let mut start: Vec<u64> = box_of_rank.par_iter().map(|&b| grid.box_population(b as usize) as u64).collect();
    let populations: Vec<usize> = start.iter().filter(|&&c| c > 0).map(|&c| c as usize).collect();
    let total = exclusive_prefix_sum(&mut start, workers);
    debug_assert_eq!(total as usize, agents);

    let mut order = vec![0u32; agents];
    {
        let out = crate::engine::par::UnsafeSlice::new(&mut order);
        box_of_rank.par_iter().zip(start.par_iter()).for_each(|(&b, &s)| {
            let n = grid.box_population(b as usize);
            // chains run newest first; fill backwards to restore ascending order
            for (k, i) in grid.box_agents(b as usize).enumerate() {
                // SAFETY: each box writes only its own [s, s + n) range.
                unsafe { out.write(s as usize + n - 1 - k, i as u32) };
            }
        });
    }
    Ok((order, populations))
}

/// Reorders `store` into Morton order and splits it into balanced worker ranges.
pub fn sort_and_balance(store: &mut AgentStore, grid: &UniformGrid, workers: usize) -> Result<SortOutcome> {
    let (order, populations) = morton_order(grid, store.len(), workers)?;
    let old_to_new = store.reorder(&order);
    let plan = balance(&populations, workers);
    Ok(SortOutcome { plan, old_to_new, box_populations: populations })
}

/// Splits a sequence of box populations into `workers` contiguous ranges cut at box boundaries,
/// such that the largest and smallest range differ by at most the largest box population.
///
/// For a lower bound `l` the set of box boundaries reachable with `k` ranges whose sizes lie in
/// `[l, l + m]` is exactly the set of boundaries inside one interval, because consecutive
/// boundaries are never more than `m` apart. That makes each candidate `l` an O(workers log n)
/// check; candidates are tried from the ideal share downwards.
pub fn balance(populations: &[usize], workers: usize) -> PartitionPlan {
    let workers = workers.max(1);
    let mut prefix = Vec::with_capacity(populations.len() + 1);
    prefix.push(0usize);
    for &p in populations {
        prefix.push(prefix.last().unwrap() + p);
    }
    let n = *prefix.last().unwrap();
    let m = populations.iter().copied().max().unwrap_or(0);
    let first_at_least = |v: usize| prefix.partition_point(|&p| p < v);
    let last_at_most = |v: usize| prefix.partition_point(|&p| p <= v) - 1;

    let to_plan = |cuts: &[usize]| {
        let mut ranges = Vec::with_capacity(workers);
        let mut lo = 0;
        for &c in cuts.iter().chain(std::iter::once(&n)) {
            ranges.push(lo..c);
            lo = c;
        }
        PartitionPlan { ranges }
    };

    let ideal = n / workers;
    for l in (ideal.saturating_sub(m)..=ideal).rev() {
        // reachable[k] = (lowest, highest) boundary value after k ranges
        let mut reachable = vec![(0usize, 0usize)];
        let mut ok = true;
        for _ in 1..workers {
            let (a, b) = *reachable.last().unwrap();
            let lo = first_at_least(a + l);
            if lo >= prefix.len() {
                ok = false;
                break;
            }
            let hi = last_at_most(b + l + m);
            if lo > hi {
                ok = false;
                break;
            }
            reachable.push((prefix[lo], prefix[hi]));
        }
        if !ok {
            continue;
        }
        let (a, b) = *reachable.last().unwrap();
        let lo_v = a.max(n.saturating_sub(l + m));
        let hi_v = if n >= l { b.min(n - l) } else { continue };
        let i = first_at_least(lo_v);
        if i >= prefix.len() || prefix[i] > hi_v {
            continue;
        }
        let mut cuts = vec![prefix[i]];
        let mut r = prefix[i];
        for k in (1..workers - 1).rev() {
            let (a, b) = reachable[k];
            let j = first_at_least(a.max(r.saturating_sub(l + m)));
            debug_assert!(prefix[j] <= b.min(r.saturating_sub(l)));
            r = prefix[j];
            cuts.push(r);
        }
        cuts.reverse();
        if workers == 1 {
            cuts.clear();
        }
        return to_plan(&cuts);
    }

    // Not reached for any input tried; kept as a safe fallback.
    let cuts: Vec<usize> = (1..workers)
        .map(|k| {
            let target = k * n / workers;
            let j = first_at_least(target);
            if j > 0 && j < prefix.len() && target - prefix[j - 1] < prefix[j] - target {
                prefix[j - 1]
            } else {
                prefix[j.min(prefix.len() - 1)]
            }
        })
        .collect();
    to_plan(&cuts)
}
