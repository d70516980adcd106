//! Exhaustive search over every dwell sequence, for small instances.
//!
//! A failed prefix fails for every extension, so whole subtrees are pruned
//! without changing the result.

use crate::instance::Minutes;
use crate::sim::{SimState, Simulator, Status};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Optimum {
    /// Lexicographically smallest sequence reaching `objective`.
    pub actions: Vec<Minutes>,
    pub objective: u64,
    /// Number of complete sequences that succeed.
    pub feasible_sequences: u64,
}

/// Minimum total travel time over all `(v_max + 1)^|V|` sequences, or `None`
/// when none succeeds.
pub fn exhaustive_optimum(sim: &Simulator) -> Option<Optimum> {
    let root = sim.init_state();
    let mut best: Option<Optimum> = None;
    let mut feasible = 0u64;
    let mut prefix = Vec::with_capacity(sim.decision_count());
    walk(sim, &root, &mut prefix, &mut best, &mut feasible);
    best.map(|mut b| {
        b.feasible_sequences = feasible;
        b
    })
}

fn walk(
    sim: &Simulator,
    state: &SimState,
    prefix: &mut Vec<Minutes>,
    best: &mut Option<Optimum>,
    feasible: &mut u64,
) {
    match state.status() {
        Status::Failed(_) => return,
        Status::Success => {
            *feasible += 1;
            let obj = state.travel_time();
            if best.as_ref().is_none_or(|b| obj < b.objective) {
                *best = Some(Optimum {
                    actions: prefix.clone(),
                    objective: obj,
                    feasible_sequences: 0,
                });
            }
            return;
        }
        Status::Running => {}
    }
    for a in 0..=sim.max_action() {
        let next = sim.step(state, a).expect("action within range on a running state");
        prefix.push(a);
        walk(sim, &next, prefix, best, feasible);
        prefix.pop();
    }
}
