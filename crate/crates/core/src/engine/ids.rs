use std::fmt;

use super::agent::Agent;

/// Handle to a slot in an [`AgentStore`](super::AgentStore).
///
/// `reuse` is bumped every time the slot is vacated or receives a different occupant, so a
/// handle captured before a removal no longer resolves afterwards.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LocalAgentId {
    pub index: u32,
    pub reuse: u32,
}

impl LocalAgentId {
    pub const fn new(index: u32, reuse: u32) -> Self {
        Self { index, reuse }
    }
}

impl fmt::Display for LocalAgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.index, self.reuse)
    }
}

/// Identifier that stays valid across ranks. Only materialised when an agent first crosses
/// a serialization boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GlobalAgentId {
    pub rank: u32,
    pub counter: u64,
}

impl fmt::Display for GlobalAgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.rank, self.counter)
    }
}

/// Per-rank source of global ids.
#[derive(Clone, Debug)]
pub struct GlobalIdAllocator {
    rank: u32,
    next: u64,
}

impl GlobalIdAllocator {
    pub fn new(rank: u32) -> Self {
        Self { rank, next: 0 }
    }

    pub fn issued(&self) -> u64 {
        self.next
    }

    /// Returns the agent's global id, creating it on first use.
    pub fn assign(&mut self, agent: &mut Agent) -> GlobalAgentId {
        if let Some(id) = agent.global_id {
            return id;
        }
        let id = GlobalAgentId { rank: self.rank, counter: self.next };
        self.next += 1;
        agent.global_id = Some(id);
        id
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::AgentKind;
    use crate::Real3;
    use std::collections::HashSet;

    #[test]
    fn assignment_is_lazy_and_stable() {
        let mut alloc = GlobalIdAllocator::new(3);
        let mut a = Agent::new(0, Real3::zeros(), 1.0, AgentKind::Cell { age: 0 });
        assert!(a.global_id.is_none());
        let first = alloc.assign(&mut a);
        let second = alloc.assign(&mut a);
        assert_eq!(first, second);
        assert_eq!(first, GlobalAgentId { rank: 3, counter: 0 });
        assert_eq!(alloc.issued(), 1);
    }

    #[test]
    fn concurrent_ranks_never_collide() {
        let mut seen = HashSet::new();
        let mut allocs: Vec<_> = (0..2).map(GlobalIdAllocator::new).collect();
        let mut a = Agent::new(0, Real3::zeros(), 1.0, AgentKind::Cell { age: 0 });
        for _ in 0..500_000 {
            for alloc in allocs.iter_mut() {
                a.global_id = None;
                assert!(seen.insert(alloc.assign(&mut a)));
            }
        }
        assert_eq!(seen.len(), 1_000_000);
    }
}
