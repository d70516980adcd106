//! Platforming: moving every station visit onto a single track.
//!
//! Dwells may have been split across tracks when a train was relocated
//! mid-dwell. Because every minute held at most `C_j` trains, first-fit
//! assignment in arrival order (optimal for interval graphs) always finds a
//! track. Station rows are rebuilt from the visit list: headway bands first,
//! then the unified occupations on top.

use super::matrix::{blocked_cell, free_cell, occupied};
use super::{SimState, Simulator};

pub(super) fn unify_tracks(sim: &Simulator, state: &mut SimState) {
    let inst = sim.instance();
    let layout = sim.layout();
    let n_stations = inst.line.stations.len();

    // (arrival, departure, train id, visit index) per station.
    let mut per_station: Vec<Vec<(u32, u32, u32, usize)>> = vec![Vec::new(); n_stations];
    for (i, v) in state.visits.iter().enumerate() {
        let (train, station, _) = sim.step_train(i);
        per_station[station].push((v.arrival, v.departure, inst.trains[train].id, i));
    }

    for (station, visits) in per_station.iter_mut().enumerate() {
        let tracks = layout.station_tracks(station);
        for k in 0..tracks {
            state.matrix.raw_row_mut(layout.station_row(station, k)).fill(free_cell());
        }
        for &(arrival, ..) in visits.iter() {
            for k in 0..tracks {
                let row = layout.station_row(station, k);
                for x in sim.band(arrival) {
                    state.matrix.raw_set(row, x, blocked_cell());
                }
            }
        }

        visits.sort_unstable();
        let mut busy_until: Vec<Option<u32>> = vec![None; tracks as usize];
        for &(arrival, departure, id, visit) in visits.iter() {
            let k = busy_until
                .iter()
                .position(|b| b.is_none_or(|end| end < arrival))
                .expect("per-minute track capacity held, so first-fit cannot run out of tracks");
            busy_until[k] = Some(departure);
            let row = layout.station_row(station, k as u16);
            state.matrix.raw_row_mut(row)[arrival as usize..=departure as usize].fill(occupied(id));
            state.visits[visit].track = k as u16;
        }
    }
}
