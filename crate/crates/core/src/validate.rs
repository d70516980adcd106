//! Constraint checker for timetables, independent of the occupancy matrix.
//!
//! Works directly on arrival/departure times and checks the model's
//! constraints pairwise or by sweeping minutes. The simulator's writes are a
//! stricter realization of the same constraints, so every timetable the
//! simulator completes must come back clean here.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use crate::instance::{Direction, Instance, Minutes};
use crate::timetable::{Stop, Timetable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Constraint {
    /// Train set or station sequence does not match the instance.
    Structure,
    /// Origin arrival differs from the planned first departure.
    FirstDeparture,
    NonNegativeArrival,
    Horizon,
    /// Departure earlier than arrival.
    DwellDefinition,
    MaxDwell,
    ArrivalHeadway,
    OpposingHeadway,
    RunningTime,
    StationCapacity,
    SectionCapacity,
    TrackRange,
    TrackOverlap,
}

impl Constraint {
    pub fn name(self) -> &'static str {
        match self {
            Constraint::Structure => "structure",
            Constraint::FirstDeparture => "first-departure",
            Constraint::NonNegativeArrival => "non-negative-arrival",
            Constraint::Horizon => "horizon",
            Constraint::DwellDefinition => "dwell-definition",
            Constraint::MaxDwell => "max-dwell",
            Constraint::ArrivalHeadway => "arrival-headway",
            Constraint::OpposingHeadway => "opposing-headway",
            Constraint::RunningTime => "running-time",
            Constraint::StationCapacity => "station-capacity",
            Constraint::SectionCapacity => "section-capacity",
            Constraint::TrackRange => "track-range",
            Constraint::TrackOverlap => "track-overlap",
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub constraint: Constraint,
    pub trains: Vec<u32>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] trains {:?}: {}", self.constraint, self.trains, self.detail)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Total travel time recomputed from the stops.
    pub objective: u64,
}

impl ValidationReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, c: Constraint) -> bool {
        self.violations.iter().any(|v| v.constraint == c)
    }
}

struct Event<'a> {
    train: u32,
    direction: Direction,
    stop: &'a Stop,
    first: bool,
    last: bool,
}

pub fn validate_timetable(instance: &Instance, tt: &Timetable) -> ValidationReport {
    let p = &instance.params;
    let line = &instance.line;
    let mut out = Vec::new();
    let mut push = |constraint, trains: Vec<u32>, detail: String| {
        out.push(Violation {
            constraint,
            trains,
            detail,
        })
    };

    let by_id: HashMap<u32, usize> = instance.trains.iter().enumerate().map(|(i, t)| (t.id, i)).collect();
    let mut seen = vec![false; instance.trains.len()];
    // Trains whose stop lists are structurally sound; only these feed the
    // pairwise checks.
    let mut sound = Vec::new();

    for sched in &tt.trains {
        let Some(&idx) = by_id.get(&sched.id) else {
            push(Constraint::Structure, vec![sched.id], "train not in instance".into());
            continue;
        };
        if std::mem::replace(&mut seen[idx], true) {
            push(Constraint::Structure, vec![sched.id], "train listed twice".into());
            continue;
        }
        let spec = &instance.trains[idx];
        let expected = spec.stations();
        let actual: Vec<usize> = sched.stops.iter().map(|s| s.station).collect();
        if actual != expected {
            push(
                Constraint::Structure,
                vec![sched.id],
                format!("stations {actual:?}, expected {expected:?}"),
            );
            continue;
        }
        sound.push((spec, sched));

        let first = &sched.stops[0];
        if first.arrival != spec.first_departure {
            push(
                Constraint::FirstDeparture,
                vec![sched.id],
                format!("starts at {} instead of {}", first.arrival, spec.first_departure),
            );
        }
        for s in &sched.stops {
            let name = &line.stations[s.station].name;
            // Minutes are unsigned; a negative arrival cannot be represented,
            // so the non-negativity check is structural.
            if s.departure > p.t_max || s.arrival > p.t_max {
                push(
                    Constraint::Horizon,
                    vec![sched.id],
                    format!("at {name}: departs {} after t_max {}", s.departure, p.t_max),
                );
            }
            match s.dwell() {
                None => push(
                    Constraint::DwellDefinition,
                    vec![sched.id],
                    format!("at {name}: departs {} before arriving {}", s.departure, s.arrival),
                ),
                Some(v) if v > p.v_max => push(
                    Constraint::MaxDwell,
                    vec![sched.id],
                    format!("at {name}: dwell {v} exceeds {}", p.v_max),
                ),
                Some(_) => {}
            }
            if s.track == 0 || s.track > line.stations[s.station].tracks {
                push(
                    Constraint::TrackRange,
                    vec![sched.id],
                    format!("at {name}: track {} outside 1..={}", s.track, line.stations[s.station].tracks),
                );
            }
        }
        for w in sched.stops.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let section = spec.section_after(a.station);
            let nominal = spec.nominal_run_time(line, section);
            let dwells = |s: &Stop| s.departure > s.arrival;
            let expected = u64::from(a.departure)
                + u64::from(nominal)
                + if dwells(a) { u64::from(p.t_acc) } else { 0 }
                + if dwells(b) { u64::from(p.t_dec) } else { 0 };
            if u64::from(b.arrival) != expected {
                push(
                    Constraint::RunningTime,
                    vec![sched.id],
                    format!(
                        "{} -> {}: arrives {} but departure {} implies {expected}",
                        line.stations[a.station].name, line.stations[b.station].name, b.arrival, a.departure
                    ),
                );
            }
        }
    }
    for (idx, seen) in seen.iter().enumerate() {
        if !seen {
            push(
                Constraint::Structure,
                vec![instance.trains[idx].id],
                "train missing from timetable".into(),
            );
        }
    }

    // Per-station events.
    let mut at_station: Vec<Vec<Event>> = (0..line.stations.len()).map(|_| Vec::new()).collect();
    for (spec, sched) in &sound {
        let n = sched.stops.len();
        for (k, stop) in sched.stops.iter().enumerate() {
            at_station[stop.station].push(Event {
                train: sched.id,
                direction: spec.direction(),
                stop,
                first: k == 0,
                last: k + 1 == n,
            });
        }
    }

    for (j, events) in at_station.iter().enumerate() {
        let name = &line.stations[j].name;
        for (x, a) in events.iter().enumerate() {
            for b in &events[x + 1..] {
                let gap = a.stop.arrival.abs_diff(b.stop.arrival);
                if gap <= p.tau_no {
                    push(
                        Constraint::ArrivalHeadway,
                        vec![a.train, b.train],
                        format!("at {name}: arrivals {} and {} are {gap} min apart", a.stop.arrival, b.stop.arrival),
                    );
                }
                if a.stop.track == b.stop.track && overlaps(a.stop, b.stop) {
                    push(
                        Constraint::TrackOverlap,
                        vec![a.train, b.train],
                        format!("at {name}: both on track {}", a.stop.track),
                    );
                }
            }
            for b in events {
                // a departs into the section b arrives from.
                if a.direction != b.direction && !a.last && !b.first {
                    let gap = a.stop.departure.abs_diff(b.stop.arrival);
                    if gap <= p.tau_d {
                        push(
                            Constraint::OpposingHeadway,
                            vec![a.train, b.train],
                            format!(
                                "at {name}: departure {} and opposing arrival {} are {gap} min apart",
                                a.stop.departure, b.stop.arrival
                            ),
                        );
                    }
                }
            }
        }

        let cap = usize::from(line.stations[j].tracks);
        if let Some((t, trains)) = first_overload(
            events.iter().map(|e| (e.stop.arrival, e.stop.departure, e.train)),
            cap,
        ) {
            push(
                Constraint::StationCapacity,
                trains,
                format!("at {name}: more than {cap} trains at minute {t}"),
            );
        }
    }

    let mut in_section: Vec<Vec<(Minutes, Minutes, u32)>> = vec![Vec::new(); line.section_count()];
    for (spec, sched) in &sound {
        for w in sched.stops.windows(2) {
            in_section[spec.section_after(w[0].station)].push((w[0].departure, w[1].arrival, sched.id));
        }
    }
    for (s, runs) in in_section.iter().enumerate() {
        if let Some((t, trains)) = first_overload(runs.iter().copied(), 1) {
            push(
                Constraint::SectionCapacity,
                trains,
                format!(
                    "section {}-{}: more than one train at minute {t}",
                    line.stations[s].name,
                    line.stations[s + 1].name
                ),
            );
        }
    }

    let objective = tt.trains.iter().map(|t| t.travel_time()).sum();
    ValidationReport {
        violations: out,
        objective,
    }
}

fn overlaps(a: &Stop, b: &Stop) -> bool {
    a.arrival <= b.departure && b.arrival <= a.departure
}

/// First minute where more than `cap` closed intervals overlap, with the
/// trains present at that minute.
fn first_overload(
    intervals: impl Iterator<Item = (Minutes, Minutes, u32)>,
    cap: usize,
) -> Option<(Minutes, Vec<u32>)> {
    let intervals: Vec<_> = intervals.filter(|(a, b, _)| a <= b).collect();
    let mut starts: Vec<Minutes> = intervals.iter().map(|i| i.0).collect();
    starts.sort_unstable();
    starts.dedup();
    // The occupancy count only rises at interval starts.
    for t in starts {
        let present: Vec<u32> = intervals
            .iter()
            .filter(|(a, b, _)| *a <= t && t <= *b)
            .map(|i| i.2)
            .collect();
        if present.len() > cap {
            return Some((t, present));
        }
    }
    None
}
