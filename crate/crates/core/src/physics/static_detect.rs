use crate::engine::StaticState;

/// What happened to an agent during the current iteration before its force calculation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IterationFacts {
    pub moved: bool,
    pub grew: bool,
    /// Some neighbor moved, grew or was created during the previous iteration.
    pub neighbor_disturbed: bool,
}

/// True if the force calculation can be skipped: the agent and its neighborhood are unchanged
/// since the last calculation, that calculation moved nothing, and at most one neighbor exerted
/// a nonzero force (so a departing or shrinking neighbor cannot unbalance cancelling forces).
pub fn is_static(last: &StaticState, now: &IterationFacts) -> bool {
    !last.moved
        && !last.grew
        && !last.is_new
        && last.nonzero_forces <= 1
        && !now.moved
        && !now.grew
        && !now.neighbor_disturbed
}

/// State recorded at the end of an iteration.
pub fn next_state(moved: bool, grew: bool, nonzero_forces: u32, skipped: bool) -> StaticState {
    StaticState { moved, grew, is_new: false, nonzero_forces, static_flag: skipped }
}
