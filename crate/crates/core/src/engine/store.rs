use std::collections::HashSet;

use rayon::prelude::*;

use super::agent::Agent;
use super::ids::LocalAgentId;
use super::par::UnsafeSlice;
use crate::{Error, Result};

/// Dense agent storage. Slot `i` always holds the agent with `local_id.index == i`; there are
/// never holes below `len()`.
#[derive(Clone, Debug, Default)]
pub struct AgentStore {
    agents: Vec<Agent>,
    /// One counter per slot ever used, including currently vacant ones.
    reuse: Vec<u32>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RemovalOutcome {
    pub new_count: usize,
    /// (old id, new id) for every survivor that was moved into a freed slot.
    pub moves: Vec<(LocalAgentId, LocalAgentId)>,
    /// Number of auxiliary words allocated by the commit.
    pub aux_words: usize,
}

impl AgentStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn as_slice(&self) -> &[Agent] {
        &self.agents
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Agent> {
        self.agents.iter()
    }

    /// Mutable access for in-place updates. Ids and slot positions must not be changed.
    pub fn as_mut_slice(&mut self) -> &mut [Agent] {
        &mut self.agents
    }

    pub fn id_at(&self, index: usize) -> LocalAgentId {
        LocalAgentId::new(index as u32, self.reuse[index])
    }

    pub fn check(&self, id: LocalAgentId) -> Result<usize> {
        let i = id.index as usize;
        if i < self.agents.len() && self.reuse[i] == id.reuse {
            Ok(i)
        } else {
            Err(Error::StaleHandle(id))
        }
    }

    pub fn get(&self, id: LocalAgentId) -> Result<&Agent> {
        let i = self.check(id)?;
        Ok(&self.agents[i])
    }

    pub fn get_mut(&mut self, id: LocalAgentId) -> Result<&mut Agent> {
        let i = self.check(id)?;
        Ok(&mut self.agents[i])
    }

    /// Appends agents in worker order and returns their ids.
    pub fn commit_additions(&mut self, per_worker: Vec<Vec<Agent>>) -> Result<Vec<LocalAgentId>> {
        for a in per_worker.iter().flatten() {
            a.validate()?;
        }
        let total: usize = per_worker.iter().map(Vec::len).sum();
        self.agents.reserve(total);
        let mut ids = Vec::with_capacity(total);
        for mut a in per_worker.into_iter().flatten() {
            let index = self.agents.len();
            if index == self.reuse.len() {
                self.reuse.push(0);
            }
            a.local_id = LocalAgentId::new(index as u32, self.reuse[index]);
            ids.push(a.local_id);
            self.agents.push(a);
        }
        Ok(ids)
    }

    /// Removes the scheduled agents and keeps the store dense.
    ///
    /// Survivors stored at or beyond the new size move into the holes left by removed agents
    /// below it. The work is split into `blocks` independent pieces; auxiliary memory is two
    /// arrays of the removal count plus two arrays of the block count.
    pub fn commit_removals(&mut self, per_worker: &[Vec<LocalAgentId>], blocks: usize) -> Result<RemovalOutcome> {
        let total: usize = per_worker.iter().map(Vec::len).sum();
        let n = self.agents.len();
        if total == 0 {
            return Ok(RemovalOutcome { new_count: n, moves: Vec::new(), aux_words: 0 });
        }
        {
            let mut seen = HashSet::with_capacity(total);
            for &id in per_worker.iter().flatten() {
                self.check(id)?;
                if !seen.insert(id.index) {
                    return Err(Error::DuplicateRemoval(id));
                }
            }
        }
        let new_size = n - total;
        let blocks = blocks.clamp(1, total);
        let chunk = total.div_ceil(blocks);

        // Removed slots below new_size need an occupant; their indices go to `to_right`.
        // `tail[k]` describes slot new_size + k: 0 if it holds a survivor, MAX if removed.
        let mut to_right = vec![u32::MAX; total];
        let mut tail = vec![0u32; total];
        {
            let tail_view = UnsafeSlice::new(&mut tail);
            let mut segments = Vec::with_capacity(per_worker.len());
            let mut rest = to_right.as_mut_slice();
            for list in per_worker {
                let (head, tail_part) = rest.split_at_mut(list.len());
                segments.push(head);
                rest = tail_part;
            }
            segments.into_par_iter().zip(per_worker.par_iter()).for_each(|(seg, list)| {
                for (slot, id) in seg.iter_mut().zip(list) {
                    let idx = id.index as usize;
                    if idx < new_size {
                        *slot = idx as u32;
                    } else {
                        // SAFETY: removal indices are distinct, so each tail slot has one writer.
                        unsafe { tail_view.write(idx - new_size, u32::MAX) };
                    }
                }
            });
        }

        // Block-local compaction of both arrays.
        let left_counts: Vec<usize> = to_right
            .par_chunks_mut(chunk)
            .map(|c| {
                let mut w = 0;
                for r in 0..c.len() {
                    if c[r] != u32::MAX {
                        c[w] = c[r];
                        w += 1;
                    }
                }
                w
            })
            .collect();
        let right_counts: Vec<usize> = tail
            .par_chunks_mut(chunk)
            .enumerate()
            .map(|(b, c)| {
                let base = new_size + b * chunk;
                let mut w = 0;
                for r in 0..c.len() {
                    if c[r] == 0 {
                        c[w] = (base + r) as u32;
                        w += 1;
                    }
                }
                w
            })
            .collect();
        let prefix = |counts: &[usize]| {
            let mut acc = 0;
            counts
                .iter()
                .map(|&c| {
                    let p = acc;
                    acc += c;
                    p
                })
                .collect::<Vec<_>>()
        };
        let left_prefix = prefix(&left_counts);
        let right_prefix = prefix(&right_counts);
        debug_assert_eq!(left_counts.iter().sum::<usize>(), right_counts.iter().sum::<usize>());

        // The g-th hole receives the g-th surviving tail agent.
        let moves_per_block: Vec<Vec<(u32, u32)>> = {
            let agents = UnsafeSlice::new(&mut self.agents);
            to_right
                .par_chunks(chunk)
                .enumerate()
                .map(|(b, c)| {
                    let mut moves = Vec::with_capacity(left_counts[b]);
                    for (j, &dst) in c[..left_counts[b]].iter().enumerate() {
                        let g = left_prefix[b] + j;
                        let rb = right_prefix.partition_point(|&p| p <= g) - 1;
                        let src = tail[rb * chunk + (g - right_prefix[rb])];
                        // SAFETY: destinations are distinct holes below new_size, sources are
                        // distinct survivors at or above it.
                        unsafe { agents.swap(dst as usize, src as usize) };
                        moves.push((src, dst));
                    }
                    moves
                })
                .collect()
        };
        let aux_words = to_right.len() + tail.len() + left_counts.len() + right_counts.len();

        self.agents.truncate(new_size);
        for r in &mut self.reuse[new_size..n] {
            *r += 1;
        }
        let mut moves = Vec::new();
        for (src, dst) in moves_per_block.into_iter().flatten() {
            let old = LocalAgentId::new(src, self.reuse[src as usize] - 1);
            self.reuse[dst as usize] += 1;
            let new = LocalAgentId::new(dst, self.reuse[dst as usize]);
            self.agents[dst as usize].local_id = new;
            moves.push((old, new));
        }
        Ok(RemovalOutcome { new_count: new_size, moves, aux_words })
    }

    /// Physically permutes the store so that slot `i` receives the agent formerly at
    /// `order[i]`. Returns the old-to-new index table.
    pub fn reorder(&mut self, order: &[u32]) -> Vec<u32> {
        assert_eq!(order.len(), self.agents.len());
        let mut old_to_new = vec![u32::MAX; order.len()];
        for (new, &old) in order.iter().enumerate() {
            assert_eq!(old_to_new[old as usize], u32::MAX, "order is not a permutation");
            old_to_new[old as usize] = new as u32;
        }
        let mut slots: Vec<Option<Agent>> = std::mem::take(&mut self.agents).into_iter().map(Some).collect();
        let mut agents = Vec::with_capacity(order.len());
        for (new, &old) in order.iter().enumerate() {
            let mut a = slots[old as usize].take().expect("permutation");
            if old as usize != new {
                self.reuse[new] += 1;
            }
            a.local_id = LocalAgentId::new(new as u32, self.reuse[new]);
            agents.push(a);
        }
        self.agents = agents;
        old_to_new
    }

    pub fn take_all(&mut self) -> Vec<Agent> {
        for r in &mut self.reuse[..self.agents.len()] {
            *r += 1;
        }
        std::mem::take(&mut self.agents)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::AgentKind;
    use crate::Real3;

    fn agent(key: u64) -> Agent {
        Agent::new(key, Real3::new(key as f64, 0.0, 0.0), 1.0, AgentKind::Cell { age: 0 })
    }

    fn store_of(n: u64) -> AgentStore {
        let mut s = AgentStore::new();
        s.commit_additions(vec![(0..n).map(agent).collect()]).unwrap();
        s
    }

    fn keys(s: &AgentStore) -> Vec<u64> {
        let mut k: Vec<u64> = s.iter().map(|a| a.key).collect();
        k.sort();
        k
    }

    #[test]
    fn first_addition_gets_zero_id() {
        let mut s = AgentStore::new();
        let ids = s.commit_additions(vec![vec![agent(0)]]).unwrap();
        assert_eq!(ids, vec![LocalAgentId::new(0, 0)]);
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn seven_agents_remove_three() {
        let mut s = store_of(7);
        let ids: Vec<_> = [1, 3, 6].iter().map(|&i| s.id_at(i)).collect();
        let out = s.commit_removals(&[vec![ids[0]], vec![ids[1], ids[2]]], 2).unwrap();
        assert_eq!(out.new_count, 4);
        assert_eq!(keys(&s), vec![0, 2, 4, 5]);
        for (i, a) in s.iter().enumerate() {
            assert_eq!(a.local_id, s.id_at(i));
        }
        // only agents formerly beyond the new size may move
        for (old, new) in &out.moves {
            assert!(old.index >= 4 && new.index < 4);
        }
    }

    #[test]
    fn removing_nothing_preserves_order() {
        let mut s = store_of(5);
        let out = s.commit_removals(&[vec![], vec![]], 2).unwrap();
        assert_eq!(out.new_count, 5);
        assert_eq!(s.iter().map(|a| a.key).collect::<Vec<_>>(), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn stale_handle_after_reuse() {
        let mut s = store_of(4);
        let old = s.id_at(3);
        assert_eq!(old, LocalAgentId::new(3, 0));
        s.commit_removals(&[vec![old]], 1).unwrap();
        let ids = s.commit_additions(vec![vec![agent(10)]]).unwrap();
        assert_eq!(ids[0], LocalAgentId::new(3, 1));
        assert!(matches!(s.commit_removals(&[vec![old]], 1), Err(Error::StaleHandle(_))));
        assert!(matches!(s.get(old), Err(Error::StaleHandle(_))));
    }

    #[test]
    fn reused_slot_increments_counter() {
        let mut s = store_of(3);
        s.commit_removals(&[vec![s.id_at(2)]], 1).unwrap();
        let ids = s.commit_additions(vec![vec![agent(9)]]).unwrap();
        assert_eq!(ids[0], LocalAgentId::new(2, 1));
    }

    #[test]
    fn duplicate_detected_before_mutation() {
        let mut s = store_of(5);
        let id = s.id_at(1);
        let err = s.commit_removals(&[vec![id], vec![id]], 2);
        assert!(matches!(err, Err(Error::DuplicateRemoval(_))));
        assert_eq!(s.len(), 5);
        assert_eq!(keys(&s), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn parallel_additions_distinct() {
        let mut s = AgentStore::new();
        let batches = (0..4).map(|w| (0..250).map(|i| agent(w * 1000 + i)).collect()).collect();
        let ids = s.commit_additions(batches).unwrap();
        assert_eq!(s.len(), 1000);
        let set: HashSet<_> = ids.iter().collect();
        assert_eq!(set.len(), 1000);
    }

    #[test]
    fn remove_everything() {
        let mut s = store_of(6);
        let all: Vec<_> = (0..6).map(|i| s.id_at(i)).collect();
        let out = s.commit_removals(&[all], 3).unwrap();
        assert_eq!(out.new_count, 0);
        assert!(s.is_empty());
    }

    #[test]
    fn moved_agent_resolves_through_new_id() {
        let mut s = store_of(5);
        let out = s.commit_removals(&[vec![s.id_at(0)]], 1).unwrap();
        assert_eq!(out.moves.len(), 1);
        let (old, new) = out.moves[0];
        assert!(s.get(old).is_err());
        assert_eq!(s.get(new).unwrap().key, 4);
    }

    #[test]
    fn reorder_applies_permutation() {
        let mut s = store_of(4);
        let table = s.reorder(&[2, 0, 3, 1]);
        assert_eq!(s.iter().map(|a| a.key).collect::<Vec<_>>(), vec![2, 0, 3, 1]);
        assert_eq!(table, vec![1, 3, 0, 2]);
        for (i, a) in s.iter().enumerate() {
            assert_eq!(a.local_id, s.id_at(i));
        }
    }

    #[test]
    fn invalid_addition_rejected() {
        let mut s = AgentStore::new();
        let mut bad = agent(0);
        bad.diameter = -1.0;
        assert!(s.commit_additions(vec![vec![bad]]).is_err());
    }
}
