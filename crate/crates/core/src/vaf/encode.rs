//! State encoding for the value network.
//!
//! Three channels stack the current state and its parent and grandparent.
//! Cells map to `{0, 1/3, 2/3, 1}`: free, blocked, another train, the focus
//! train. The full frame keeps the first `full_cols` minutes; the local
//! window keeps `local_cols` minutes centered on the focus time.

use serde::{Deserialize, Serialize};

use super::arch::{InputShape, CHANNELS};
use crate::error::{Error, Result};
use crate::instance::Minutes;
use crate::sim::matrix::OccupancyMatrix;
use crate::sim::{SimState, Simulator};

pub const ENCODER_VERSION: u32 = 1;

/// Train, station and minute the local window follows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Focus {
    pub train_id: u32,
    pub station: usize,
    pub time: Minutes,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncodedState {
    pub shape: InputShape,
    /// `3 x rows x full_cols`, row-major.
    pub full: Vec<f32>,
    /// `3 x rows x local_cols`, row-major.
    pub local: Vec<f32>,
    pub focus: Focus,
}

/// Focus of a state: the decision at its cursor, or the last decision for a
/// completed state. The time is the arrival at that station: the first
/// departure for an origin, otherwise the earliest possible arrival (the
/// pending departure plus running and acceleration time, before any
/// deceleration that depends on the dwell still to be chosen).
pub fn focus(sim: &Simulator, state: &SimState) -> Focus {
    let n = sim.decision_count();
    if n == 0 {
        return Focus {
            train_id: 0,
            station: 0,
            time: 0,
        };
    }
    let idx = state.cursor().min(n - 1);
    let (train, station, is_origin) = sim.step_train(idx);
    let spec = &sim.instance().trains[train];
    let time = if idx < state.cursor() {
        state.visits()[idx].arrival
    } else if is_origin {
        spec.first_departure
    } else {
        let (departure, dwelled) = state
            .pending_departure()
            .expect("non-origin decision follows a departure");
        let acc = if dwelled { sim.instance().params.t_acc } else { 0 };
        departure + sim.step_incoming_nominal(idx).unwrap_or(0) + acc
    };
    Focus {
        train_id: spec.id,
        station,
        time,
    }
}

#[inline]
fn cell_value(raw: u16, focus_code: u16) -> f32 {
    match raw {
        0 => 0.0,
        1 => 1.0 / 3.0,
        c if c == focus_code => 1.0,
        _ => 2.0 / 3.0,
    }
}

fn write_full(m: &OccupancyMatrix, focus_code: u16, cols: usize, out: &mut [f32]) {
    let take = cols.min(m.cols());
    for r in 0..m.rows() {
        let src = m.raw_row(r);
        let dst = &mut out[r * cols..(r + 1) * cols];
        for (d, &c) in dst[..take].iter_mut().zip(src) {
            *d = cell_value(c, focus_code);
        }
        dst[take..].fill(0.0);
    }
}

fn write_local(m: &OccupancyMatrix, focus_code: u16, center: Minutes, cols: usize, out: &mut [f32]) {
    let start = i64::from(center) - (cols / 2) as i64;
    for r in 0..m.rows() {
        let src = m.raw_row(r);
        let dst = &mut out[r * cols..(r + 1) * cols];
        for (c, d) in dst.iter_mut().enumerate() {
            let t = start + c as i64;
            *d = if t >= 0 && (t as usize) < src.len() {
                cell_value(src[t as usize], focus_code)
            } else {
                0.0
            };
        }
    }
}

/// Encodes `state` with its ancestors. A missing ancestor is replaced by the
/// nearest available state.
pub fn encode(
    sim: &Simulator,
    shape: InputShape,
    state: &SimState,
    parent: Option<&SimState>,
    grandparent: Option<&SimState>,
) -> Result<EncodedState> {
    let rows = state.matrix().rows();
    if rows != shape.rows {
        return Err(Error::Shape {
            layer: "encoder".into(),
            expected: format!("{} matrix rows", shape.rows),
            actual: format!("{rows} rows"),
        });
    }
    let parent = parent.unwrap_or(state);
    let grandparent = grandparent.unwrap_or(parent);
    let f = focus(sim, state);
    let code = crate::sim::matrix::occupied(f.train_id);

    let mut full = vec![0f32; shape.full_len()];
    let mut local = vec![0f32; shape.local_len()];
    let full_plane = shape.rows * shape.full_cols;
    let local_plane = shape.rows * shape.local_cols;
    for (ch, s) in [state, parent, grandparent].into_iter().enumerate() {
        write_full(
            s.matrix(),
            code,
            shape.full_cols,
            &mut full[ch * full_plane..(ch + 1) * full_plane],
        );
        write_local(
            s.matrix(),
            code,
            f.time,
            shape.local_cols,
            &mut local[ch * local_plane..(ch + 1) * local_plane],
        );
    }
    debug_assert_eq!(full.len(), CHANNELS * full_plane);
    Ok(EncodedState {
        shape,
        full,
        local,
        focus: f,
    })
}
