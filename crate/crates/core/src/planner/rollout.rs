//! Rollout policies.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::Minutes;
use crate::sim::{SimState, Simulator, Status};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RolloutKind {
    /// Terminal reward only.
    #[default]
    Plain,
    /// Terminal reward mixed with progress: conflict-free steps and travel.
    Csav,
}

/// Scores a terminal state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Valuer {
    pub kind: RolloutKind,
    pub alpha: f64,
    pub beta: f64,
}

impl Valuer {
    pub fn plain() -> Self {
        Valuer {
            kind: RolloutKind::Plain,
            alpha: 0.0,
            beta: 0.0,
        }
    }

    pub fn csav(alpha: f64, beta: f64) -> Self {
        Valuer {
            kind: RolloutKind::Csav,
            alpha,
            beta,
        }
    }

    pub fn value(&self, sim: &Simulator, state: &SimState) -> Result<f64> {
        let r = sim.reward(state)?;
        Ok(match self.kind {
            RolloutKind::Plain => r,
            RolloutKind::Csav => {
                let cs = state.cursor();
                let partial = sim.normalized_travel(state.travel_time());
                csav_value(r, cs, partial, self.alpha, self.beta)
            }
        })
    }
}

/// `(1 - alpha - beta) * r + alpha * cs + beta * partial`.
pub fn csav_value(r: f64, cs: usize, partial: f64, alpha: f64, beta: f64) -> f64 {
    (1.0 - alpha - beta) * r + alpha * cs as f64 + beta * partial
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RolloutOutcome {
    pub value: f64,
    pub status: Status,
    /// Decisions applied without conflict over the whole episode.
    pub conflict_free_steps: usize,
    pub travel_time: u64,
}

/// Draws every remaining dwell uniformly from `[0, v_max]` up front, then
/// plays them until the state is terminal. `state` ends terminal.
pub fn default_policy<R: Rng + ?Sized>(
    sim: &Simulator,
    state: &mut SimState,
    rng: &mut R,
    valuer: &Valuer,
) -> Result<RolloutOutcome> {
    if state.is_terminal() {
        return Err(Error::Contract("rollout from a terminal state".into()));
    }
    let v_max = sim.max_action();
    let remaining = sim.decision_count() - state.cursor();
    let actions: Vec<Minutes> = (0..remaining).map(|_| rng.random_range(0..=v_max)).collect();
    sim.run_from(state, &actions)?;
    debug_assert!(state.is_terminal());
    Ok(RolloutOutcome {
        value: valuer.value(sim, state)?,
        status: state.status(),
        conflict_free_steps: state.cursor(),
        travel_time: state.travel_time(),
    })
}
