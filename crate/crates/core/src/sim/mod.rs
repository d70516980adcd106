//! The occupancy-matrix train operation simulator.
//!
//! A state is the full track-by-minute matrix plus the progress of the
//! decision cursor. Applying a dwell-time action for `(train, station)`
//! first completes the train's run into `station` (the run time depends on
//! whether the train stops there, which the action decides), then writes
//! the dwell. Every write doubles as a constraint check: hitting a cell that
//! cannot be written ends the simulation in the failed terminal state.

pub(crate) mod matrix;
mod platform;

use std::fmt;
use std::sync::Arc;

pub use matrix::{Cell, OccupancyMatrix, RowKind, RowLayout};

use crate::error::{Error, Result};
use crate::instance::{Instance, Minutes};
use crate::timetable::{Stop, Timetable, TrainSchedule};
use matrix::{blocked_cell, is_blocked, is_free, occupied};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FailureCause {
    /// No free track at the origin at the first departure time.
    OriginNoTrack,
    /// Another train inside the arrival headway band written at an origin.
    OriginHeadway,
    /// No track available to continue a dwell.
    DwellNoTrack,
    /// Departure band before entering a section hit a train.
    SectionHeadway,
    /// Section run hit a blocked or occupied cell.
    SectionConflict,
    /// No free track at the arrival minute.
    ArrivalNoTrack,
    /// A train would need a column past `t_max`.
    BeyondHorizon,
}

impl fmt::Display for FailureCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FailureCause::OriginNoTrack => "no free track at origin",
            FailureCause::OriginHeadway => "arrival headway violated at origin",
            FailureCause::DwellNoTrack => "no track free for dwell",
            FailureCause::SectionHeadway => "departure headway violated",
            FailureCause::SectionConflict => "section already blocked or occupied",
            FailureCause::ArrivalNoTrack => "no free track on arrival",
            FailureCause::BeyondHorizon => "beyond planning horizon",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Status {
    Running,
    /// Conflict-free completion.
    Success,
    Failed(FailureCause),
}

impl Status {
    pub fn is_terminal(self) -> bool {
        !matches!(self, Status::Running)
    }
}

/// Realized arrival, departure and track (0-based) of one decision.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Visit {
    pub arrival: Minutes,
    pub departure: Minutes,
    pub track: u16,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct PendingDeparture {
    departure: Minutes,
    dwelled: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SimState {
    matrix: OccupancyMatrix,
    cursor: usize,
    status: Status,
    visits: Vec<Visit>,
    pending: Option<PendingDeparture>,
    origin_tracks: Vec<u16>,
    travel_time: u64,
}

impl SimState {
    pub fn matrix(&self) -> &OccupancyMatrix {
        &self.matrix
    }

    /// Index of the next decision to apply.
    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn is_terminal(&self) -> bool {
        self.status.is_terminal()
    }

    /// One entry per applied decision.
    pub fn visits(&self) -> &[Visit] {
        &self.visits
    }

    /// Total travel time of the trains completed so far.
    pub fn travel_time(&self) -> u64 {
        self.travel_time
    }

    pub(crate) fn pending_departure(&self) -> Option<(Minutes, bool)> {
        self.pending.map(|p| (p.departure, p.dwelled))
    }
}

#[derive(Clone, Copy, Debug)]
struct Step {
    train: usize,
    cell: u16,
    station: usize,
    is_origin: bool,
    is_destination: bool,
    /// Section row and nominal run time of the section into `station`.
    incoming: Option<(usize, Minutes)>,
    first_step_of_train: usize,
}

/// Dynamics for one instance. Cheap to share; states are plain data.
#[derive(Clone, Debug)]
pub struct Simulator {
    instance: Arc<Instance>,
    layout: RowLayout,
    steps: Vec<Step>,
}

impl Simulator {
    pub fn new(instance: impl Into<Arc<Instance>>) -> Self {
        let instance: Arc<Instance> = instance.into();
        let layout = RowLayout::new(&instance.line);
        let mut steps = Vec::with_capacity(instance.decision_count());
        for (idx, train) in instance.trains.iter().enumerate() {
            let stations = train.stations();
            let first = steps.len();
            for (pos, &station) in stations.iter().enumerate() {
                let incoming = (pos > 0).then(|| {
                    let section = train.section_after(stations[pos - 1]);
                    (
                        layout.section_row(section),
                        train.nominal_run_time(&instance.line, section),
                    )
                });
                steps.push(Step {
                    train: idx,
                    cell: occupied(train.id),
                    station,
                    is_origin: pos == 0,
                    is_destination: pos + 1 == stations.len(),
                    incoming,
                    first_step_of_train: first,
                });
            }
        }
        Simulator {
            instance,
            layout,
            steps,
        }
    }

    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    pub fn shared_instance(&self) -> Arc<Instance> {
        Arc::clone(&self.instance)
    }

    pub fn layout(&self) -> &RowLayout {
        &self.layout
    }

    /// `|V|`.
    pub fn decision_count(&self) -> usize {
        self.steps.len()
    }

    pub fn max_action(&self) -> Minutes {
        self.instance.params.v_max
    }

    /// Train id and station of decision `index`.
    pub fn decision(&self, index: usize) -> (u32, usize) {
        let s = &self.steps[index];
        (self.instance.trains[s.train].id, s.station)
    }

    /// Writes every train at its origin and the arrival headway bands around
    /// those first departures. All origin writes happen before any band, so
    /// two origins inside one band always collide on the band write.
    pub fn init_state(&self) -> SimState {
        let inst = &*self.instance;
        let t_max = inst.params.t_max;
        let mut state = SimState {
            matrix: OccupancyMatrix::new(self.layout.row_count(), t_max),
            cursor: 0,
            status: Status::Running,
            visits: Vec::with_capacity(self.steps.len()),
            pending: None,
            origin_tracks: vec![0; inst.trains.len()],
            travel_time: 0,
        };

        for (idx, train) in inst.trains.iter().enumerate() {
            let t = train.first_departure;
            if t > t_max {
                state.status = Status::Failed(FailureCause::BeyondHorizon);
                return state;
            }
            match self.free_track(&state.matrix, train.origin, t) {
                Some(k) => {
                    let row = self.layout.station_row(train.origin, k);
                    state.matrix.raw_set(row, t as usize, occupied(train.id));
                    state.origin_tracks[idx] = k;
                }
                None => {
                    state.status = Status::Failed(FailureCause::OriginNoTrack);
                    return state;
                }
            }
        }

        for (idx, train) in inst.trains.iter().enumerate() {
            let own = (state.origin_tracks[idx], train.first_departure);
            if !self.write_origin_band(&mut state.matrix, train.origin, own) {
                state.status = Status::Failed(FailureCause::OriginHeadway);
                return state;
            }
        }

        if self.steps.is_empty() {
            state.status = Status::Success;
        }
        state
    }

    /// Applies dwell `action` at the cursor's decision, mutating `state`.
    /// Precondition failures return an error and leave `state` untouched;
    /// conflicts are reported through `state.status()`.
    pub fn apply(&self, state: &mut SimState, action: Minutes) -> Result<()> {
        if state.status.is_terminal() {
            return Err(Error::Contract(format!(
                "cannot act on terminal state ({:?})",
                state.status
            )));
        }
        let p = &self.instance.params;
        if action > p.v_max {
            return Err(Error::Contract(format!(
                "dwell {action} exceeds v_max {}",
                p.v_max
            )));
        }
        let step = self.steps[state.cursor];
        if let Err(cause) = self.advance(state, step, action) {
            state.status = Status::Failed(cause);
            return Ok(());
        }
        state.cursor += 1;
        if state.cursor == self.steps.len() {
            platform::unify_tracks(self, state);
            state.status = Status::Success;
        }
        Ok(())
    }

    /// Pure form of [`Simulator::apply`].
    pub fn step(&self, state: &SimState, action: Minutes) -> Result<SimState> {
        let mut next = state.clone();
        self.apply(&mut next, action)?;
        Ok(next)
    }

    /// Runs `actions` from the initial state, stopping early on a terminal
    /// state.
    pub fn run(&self, actions: &[Minutes]) -> Result<SimState> {
        let mut state = self.init_state();
        self.run_from(&mut state, actions)?;
        Ok(state)
    }

    pub fn run_from(&self, state: &mut SimState, actions: &[Minutes]) -> Result<()> {
        for &a in actions {
            if state.is_terminal() {
                break;
            }
            self.apply(state, a)?;
        }
        Ok(())
    }

    fn advance(&self, state: &mut SimState, step: Step, action: Minutes) -> Result<(), FailureCause> {
        let p = &self.instance.params;
        let t_max = p.t_max;
        let dwelled = action > 0;

        let (arrival, track) = if step.is_origin {
            let train = &self.instance.trains[step.train];
            (train.first_departure, state.origin_tracks[step.train])
        } else {
            let pending = state
                .pending
                .expect("a non-origin decision always follows a recorded departure");
            let (section_row, nominal) = step.incoming.expect("non-origin step has a section");
            let depart = pending.departure;
            let arrive = depart
                + nominal
                + if pending.dwelled { p.t_acc } else { 0 }
                + if dwelled { p.t_dec } else { 0 };

            // Departure headway band on the section, half-open before departure.
            let m = &mut state.matrix;
            for x in depart.saturating_sub(p.tau_d)..depart {
                let c = m.raw(section_row, x as usize);
                if is_free(c) {
                    m.raw_set(section_row, x as usize, blocked_cell());
                } else if !is_blocked(c) {
                    return Err(FailureCause::SectionHeadway);
                }
            }
            if arrive > t_max {
                return Err(FailureCause::BeyondHorizon);
            }
            for x in depart..=arrive {
                if !is_free(m.raw(section_row, x as usize)) {
                    return Err(FailureCause::SectionConflict);
                }
                m.raw_set(section_row, x as usize, step.cell);
            }
            let k = self
                .free_track(m, step.station, arrive)
                .ok_or(FailureCause::ArrivalNoTrack)?;
            m.raw_set(self.layout.station_row(step.station, k), arrive as usize, step.cell);
            self.write_arrival_band(m, step.station, arrive);
            (arrive, k)
        };

        let departure = arrival + action;
        if departure > t_max {
            return Err(FailureCause::BeyondHorizon);
        }
        let row = self.layout.station_row(step.station, track);
        for x in arrival + 1..=departure {
            let c = state.matrix.raw(row, x as usize);
            if is_free(c) || is_blocked(c) {
                state.matrix.raw_set(row, x as usize, step.cell);
            } else {
                let k = self
                    .free_track(&state.matrix, step.station, x)
                    .ok_or(FailureCause::DwellNoTrack)?;
                state
                    .matrix
                    .raw_set(self.layout.station_row(step.station, k), x as usize, step.cell);
            }
        }

        state.visits.push(Visit {
            arrival,
            departure,
            track,
        });
        if step.is_destination {
            let origin_arrival = state.visits[step.first_step_of_train].arrival;
            state.travel_time += u64::from(departure - origin_arrival);
            state.pending = None;
        } else {
            state.pending = Some(PendingDeparture { departure, dwelled });
        }
        Ok(())
    }

    /// Lowest-index track of `station` whose cell at `t` is free.
    fn free_track(&self, m: &OccupancyMatrix, station: usize, t: Minutes) -> Option<u16> {
        (0..self.layout.station_tracks(station))
            .find(|&k| is_free(m.raw(self.layout.station_row(station, k), t as usize)))
    }

    fn band(&self, t: Minutes) -> std::ops::RangeInclusive<usize> {
        let p = &self.instance.params;
        let lo = t.saturating_sub(p.tau_no) as usize;
        let hi = (t + p.tau_no).min(p.t_max) as usize;
        lo..=hi
    }

    /// Origin band: fails on any train id other than the band owner's own
    /// cell.
    fn write_origin_band(&self, m: &mut OccupancyMatrix, station: usize, own: (u16, Minutes)) -> bool {
        for k in 0..self.layout.station_tracks(station) {
            let row = self.layout.station_row(station, k);
            for x in self.band(own.1) {
                if k == own.0 && x == own.1 as usize {
                    continue;
                }
                let c = m.raw(row, x);
                if is_free(c) {
                    m.raw_set(row, x, blocked_cell());
                } else if !is_blocked(c) {
                    return false;
                }
            }
        }
        true
    }

    /// Arrival band: blocks free cells, leaves everything else alone.
    fn write_arrival_band(&self, m: &mut OccupancyMatrix, station: usize, t: Minutes) {
        for k in 0..self.layout.station_tracks(station) {
            let row = self.layout.station_row(station, k);
            for x in self.band(t) {
                if is_free(m.raw(row, x)) {
                    m.raw_set(row, x, blocked_cell());
                }
            }
        }
    }

    /// Terminal reward: `(T' - T) / T'` on success with `T' = V_max * |V|`,
    /// zero on failure. Not clamped, so very slow feasible timetables score
    /// below zero.
    pub fn reward(&self, state: &SimState) -> Result<f64> {
        match state.status {
            Status::Running => Err(Error::Contract("reward of a nonterminal state".into())),
            Status::Failed(_) => Ok(0.0),
            Status::Success => Ok(self.normalized_travel(state.travel_time)),
        }
    }

    /// `(T' - travel) / T'`.
    pub fn normalized_travel(&self, travel: u64) -> f64 {
        let cap = self.instance.max_travel_time();
        if cap == 0 {
            return if travel == 0 { 1.0 } else { f64::NEG_INFINITY };
        }
        (cap as f64 - travel as f64) / cap as f64
    }

    /// Timetable of a successfully completed state.
    pub fn timetable(&self, state: &SimState) -> Option<Timetable> {
        if state.status != Status::Success {
            return None;
        }
        let inst = &*self.instance;
        let mut trains: Vec<TrainSchedule> = inst
            .trains
            .iter()
            .map(|t| TrainSchedule {
                id: t.id,
                stops: Vec::with_capacity(t.station_count()),
            })
            .collect();
        for (step, visit) in self.steps.iter().zip(&state.visits) {
            trains[step.train].stops.push(Stop {
                station: step.station,
                arrival: visit.arrival,
                departure: visit.departure,
                track: visit.track + 1,
            });
        }
        Some(Timetable::new(trains))
    }

    /// Station a decision refers to plus its train index, for encoders.
    pub(crate) fn step_train(&self, index: usize) -> (usize, usize, bool) {
        let s = &self.steps[index];
        (s.train, s.station, s.is_origin)
    }

    pub(crate) fn step_incoming_nominal(&self, index: usize) -> Option<Minutes> {
        self.steps[index].incoming.map(|(_, n)| n)
    }
}
