use super::partition::{LocalPartitionView, PartitionMap};
use crate::engine::Agent;
use crate::{Error, Real3, Result};

/// For each neighbor rank, indices of the agents within `interaction_length` of its region.
pub fn select_aura(positions: &[Real3], map: &PartitionMap, rank: u32, interaction_length: f64) -> Vec<(u32, Vec<usize>)> {
    map.neighbor_ranks(rank)
        .into_iter()
        .map(|n| {
            let picked = positions.iter().enumerate().filter(|(_, p)| map.distance_to_region(p, n) <= interaction_length).map(|(i, _)| i).collect();
            (n, picked)
        })
        .collect()
}

/// Read-only copies of agents owned by other ranks, rebuilt every iteration.
#[derive(Clone, Debug, Default)]
pub struct GhostSet {
    agents: Vec<Agent>,
}

impl GhostSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Discards the previous ghosts.
    pub fn replace(&mut self, agents: Vec<Agent>) {
        self.agents = agents;
    }

    pub fn clear(&mut self) {
        self.agents.clear();
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&Agent> {
        self.agents.get(i)
    }

    pub fn get_mut(&mut self, i: usize) -> Result<&mut Agent> {
        Err(Error::ReadOnlyGhost(i))
    }

    pub fn as_slice(&self) -> &[Agent] {
        &self.agents
    }
}

/// Where each departing agent goes, as far as the local view can tell.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MigrationPlan {
    pub direct: Vec<(usize, u32)>,
    pub lookup: Vec<usize>,
}

impl MigrationPlan {
    pub fn is_empty(&self) -> bool {
        self.direct.is_empty() && self.lookup.is_empty()
    }
}

pub fn plan_migration(positions: &[Real3], map: &PartitionMap, rank: u32) -> MigrationPlan {
    let view = LocalPartitionView::new(map, rank);
    let mut plan = MigrationPlan::default();
    for (i, p) in positions.iter().enumerate() {
        match view.lookup(p) {
            Some(r) if r == rank => {}
            Some(r) => plan.direct.push((i, r)),
            None => {
                if map.owner_of(p) != rank {
                    plan.lookup.push(i);
                }
            }
        }
    }
    plan
}

pub fn encode_positions(ps: impl IntoIterator<Item = Real3>) -> Vec<u8> {
    let mut out = Vec::new();
    for p in ps {
        for c in p.iter() {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    out
}

pub fn decode_positions(bytes: &[u8]) -> Result<Vec<Real3>> {
    if bytes.len() % 24 != 0 {
        return Err(Error::Decode { offset: bytes.len() - bytes.len() % 24, reason: "position list not a multiple of 24 bytes".into() });
    }
    Ok(bytes
        .chunks_exact(24)
        .map(|c| Real3::from_fn(|d, _| f64::from_le_bytes(c[d * 8..d * 8 + 8].try_into().unwrap())))
        .collect())
}

pub fn encode_indices(ix: &[u32]) -> Vec<u8> {
    ix.iter().flat_map(|i| i.to_le_bytes()).collect()
}

pub fn decode_indices(bytes: &[u8]) -> Result<Vec<u32>> {
    if bytes.len() % 4 != 0 {
        return Err(Error::Decode { offset: bytes.len() - bytes.len() % 4, reason: "index list not a multiple of 4 bytes".into() });
    }
    Ok(bytes.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::AgentKind;

    fn slabs() -> PartitionMap {
        PartitionMap::new(Real3::zeros(), Real3::repeat(100.0), 4, 10.0, 1).unwrap()
    }

    #[test]
    fn border_agent_is_included() {
        let m = PartitionMap::new(Real3::zeros(), Real3::repeat(100.0), 2, 10.0, 1).unwrap();
        let ps = [Real3::new(40.0, 5.0, 5.0), Real3::new(39.999, 5.0, 5.0), Real3::new(10.0, 5.0, 5.0)];
        assert_eq!(select_aura(&ps, &m, 0, 10.0), vec![(1, vec![0])]);
    }

    #[test]
    fn ghosts_are_read_only() {
        let mut g = GhostSet::new();
        g.replace(vec![Agent::new(1, Real3::zeros(), 1.0, AgentKind::Cell { age: 0 })]);
        assert!(matches!(g.get_mut(0), Err(Error::ReadOnlyGhost(0))));
        assert_eq!(g.len(), 1);
    }

    #[test]
    fn migration_routes() {
        let m = slabs();
        assert_eq!(m.blocks(), [2, 2, 1]);
        let ps = [Real3::new(10.0, 10.0, 5.0), Real3::new(55.0, 10.0, 5.0), Real3::new(95.0, 95.0, 5.0)];
        let plan = plan_migration(&ps, &m, 0);
        assert_eq!(plan.direct, vec![(1, 1)]);
        assert_eq!(plan.lookup, vec![2]);
        assert!(plan_migration(&ps[..1], &m, 0).is_empty());
    }

    #[test]
    fn wire_helpers_round_trip() {
        let ps = vec![Real3::new(1.0, -2.0, 3.5), Real3::new(f64::MAX, 0.0, -0.0)];
        assert_eq!(decode_positions(&encode_positions(ps.clone())).unwrap(), ps);
        assert_eq!(decode_indices(&encode_indices(&[1, 2, u32::MAX])).unwrap(), vec![1, 2, u32::MAX]);
        assert!(decode_indices(&[1, 2, 3]).is_err());
    }
}
