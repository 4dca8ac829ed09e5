//! Rank-local population setup that avoids an initial mass migration.

use super::partition::PartitionMap;
use crate::engine::rng::{AgentRng, STREAM_INIT};
use crate::engine::Agent;
use crate::{Error, Real3, Result};

/// Independent uniform placement of `count` agents in `[lo, hi)`.
///
/// Agent `k` draws its position from its own init stream, so the population is the same for
/// every rank count. Each rank walks all keys but builds only the agents it owns; `make`
/// receives the stream positioned after the three coordinate draws.
pub fn uniform_population(
    map: &PartitionMap,
    rank: Option<u32>,
    lo: Real3,
    hi: Real3,
    count: usize,
    seed: u64,
    mut make: impl FnMut(u64, Real3, &mut AgentRng) -> Agent,
) -> Result<Vec<Agent>> {
    if !(0..3).all(|d| hi[d] > lo[d]) {
        return Err(Error::InvalidParameter(format!("empty placement region {lo:?}..{hi:?}")));
    }
    let mut out = Vec::new();
    for k in 0..count as u64 {
        let mut rng = AgentRng::new(seed, k, 0, STREAM_INIT);
        let p = Real3::from_fn(|d, _| {
            let v = rng.uniform_range(lo[d], hi[d]);
            if v >= hi[d] { hi[d].next_down() } else { v }
        });
        if rank.is_none_or(|r| map.owner_of(&p) == r) {
            out.push(make(k, p, &mut rng));
        }
    }
    Ok(out)
}

/// Keeps only the agents `rank` owns from a geometric layout.
pub fn owned_subset(map: &PartitionMap, rank: Option<u32>, agents: impl IntoIterator<Item = Agent>) -> Vec<Agent> {
    agents.into_iter().filter(|a| rank.is_none_or(|r| map.owner_of(&a.position) == r)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::AgentKind;

    fn make(k: u64, p: Real3, _: &mut AgentRng) -> Agent {
        Agent::new(k, p, 1.0, AgentKind::Cell { age: 0 })
    }

    #[test]
    fn rank_count_does_not_change_population() {
        let (lo, hi) = (Real3::zeros(), Real3::repeat(100.0));
        let reference = {
            let m = PartitionMap::new(lo, hi, 1, 10.0, 1).unwrap();
            uniform_population(&m, None, lo, hi, 1000, 5, make).unwrap()
        };
        assert_eq!(reference.len(), 1000);
        for ranks in [1, 2, 4] {
            let m = PartitionMap::new(lo, hi, ranks, 10.0, 1).unwrap();
            let mut all: Vec<Agent> = (0..ranks as u32).flat_map(|r| uniform_population(&m, Some(r), lo, hi, 1000, 5, make).unwrap()).collect();
            all.sort_by_key(|a| a.key);
            assert_eq!(all, reference);
            for r in 0..ranks as u32 {
                let mine = uniform_population(&m, Some(r), lo, hi, 1000, 5, make).unwrap();
                assert!(mine.iter().all(|a| m.owner_of(&a.position) == r));
            }
        }
    }

    #[test]
    fn sparse_population_is_spread_out() {
        // far fewer agents than partition boxes: every octant still gets its share
        let (lo, hi) = (Real3::zeros(), Real3::repeat(100.0));
        let m = PartitionMap::new(lo, hi, 1, 3.0, 1).unwrap();
        let a = uniform_population(&m, None, lo, hi, 2000, 9, make).unwrap();
        let mut octants = [0usize; 8];
        for x in &a {
            let o = (0..3).map(|d| usize::from(x.position[d] >= 50.0) << d).sum::<usize>();
            octants[o] += 1;
        }
        assert!(octants.iter().all(|&c| (200..=300).contains(&c)), "{octants:?}");
    }

    #[test]
    fn sub_region_placement() {
        let m = PartitionMap::new(Real3::zeros(), Real3::repeat(100.0), 2, 10.0, 1).unwrap();
        let (lo, hi) = (Real3::repeat(45.0), Real3::repeat(55.0));
        let a = uniform_population(&m, None, lo, hi, 333, 1, make).unwrap();
        assert_eq!(a.len(), 333);
        assert!(a.iter().all(|a| (0..3).all(|d| a.position[d] >= 45.0 && a.position[d] < 55.0)));
        assert!(uniform_population(&m, None, hi, lo, 1, 1, make).is_err());
    }
}
