//! Timetables: per-train stop lists, CSV exchange and time-distance plots.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{Instance, Minutes};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stop {
    pub station: usize,
    pub arrival: Minutes,
    pub departure: Minutes,
    /// 1-based track index.
    pub track: u16,
}

impl Stop {
    pub fn dwell(&self) -> Option<Minutes> {
        self.departure.checked_sub(self.arrival)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainSchedule {
    pub id: u32,
    pub stops: Vec<Stop>,
}

impl TrainSchedule {
    /// Departure from the last stop minus arrival at the first.
    pub fn travel_time(&self) -> u64 {
        match (self.stops.first(), self.stops.last()) {
            (Some(a), Some(b)) => u64::from(b.departure).saturating_sub(u64::from(a.arrival)),
            _ => 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timetable {
    pub trains: Vec<TrainSchedule>,
    /// Total travel time over all trains.
    pub objective: u64,
}

pub const CSV_HEADER: &str = "train,station,arrive_min,depart_min,track";

impl Timetable {
    pub fn new(trains: Vec<TrainSchedule>) -> Self {
        let objective = trains.iter().map(TrainSchedule::travel_time).sum();
        Timetable { trains, objective }
    }

    pub fn to_csv(&self, instance: &Instance) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for t in &self.trains {
            for s in &t.stops {
                let name = instance
                    .line
                    .stations
                    .get(s.station)
                    .map(|st| st.name.as_str())
                    .unwrap_or("?");
                writeln!(out, "{},{},{},{},{}", t.id, name, s.arrival, s.departure, s.track)
                    .expect("writing to a String");
            }
        }
        out
    }

    /// Parses the CSV export. Station names resolve against `instance`; rows
    /// of one train must be contiguous and in travel order.
    pub fn from_csv(text: &str, instance: &Instance) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let header = lines
            .by_ref()
            .find(|(_, l)| !l.trim().is_empty())
            .ok_or_else(|| Error::Parse {
                at: "line 1".into(),
                message: "empty timetable".into(),
            })?;
        if header.1.trim() != CSV_HEADER {
            return Err(Error::Parse {
                at: format!("line {}", header.0 + 1),
                message: format!("expected header `{CSV_HEADER}`"),
            });
        }

        let mut trains: Vec<TrainSchedule> = Vec::new();
        for (no, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let at = |field: &str| format!("line {}, field `{field}`", no + 1);
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 5 {
                return Err(Error::Parse {
                    at: format!("line {}", no + 1),
                    message: format!("expected 5 fields, found {}", fields.len()),
                });
            }
            let num = |i: usize, name: &str| -> Result<u64> {
                fields[i].parse::<u64>().map_err(|e| Error::Parse {
                    at: at(name),
                    message: format!("`{}`: {e}", fields[i]),
                })
            };
            let id = u32::try_from(num(0, "train")?).map_err(|_| Error::Parse {
                at: at("train"),
                message: "train id out of range".into(),
            })?;
            let station = instance
                .line
                .station_index(fields[1])
                .ok_or_else(|| Error::Parse {
                    at: at("station"),
                    message: format!("unknown station `{}`", fields[1]),
                })?;
            let minutes = |i: usize, name: &str| -> Result<Minutes> {
                Minutes::try_from(num(i, name)?).map_err(|_| Error::Parse {
                    at: at(name),
                    message: "value out of range".into(),
                })
            };
            let stop = Stop {
                station,
                arrival: minutes(2, "arrive_min")?,
                departure: minutes(3, "depart_min")?,
                track: u16::try_from(num(4, "track")?).map_err(|_| Error::Parse {
                    at: at("track"),
                    message: "track out of range".into(),
                })?,
            };
            match trains.last_mut() {
                Some(t) if t.id == id => t.stops.push(stop),
                _ => {
                    if trains.iter().any(|t| t.id == id) {
                        return Err(Error::Parse {
                            at: at("train"),
                            message: format!("rows of train {id} are not contiguous"),
                        });
                    }
                    trains.push(TrainSchedule {
                        id,
                        stops: vec![stop],
                    })
                }
            }
        }
        Ok(Timetable::new(trains))
    }
}

/// Summary written next to an exported timetable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimetableSummary {
    pub feasible: bool,
    pub objective: Option<u64>,
    pub trains: usize,
    pub decisions: usize,
    pub actions: Vec<Minutes>,
}

/// Time-distance polyline of one train: `(minute, meters from first station)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Polyline {
    pub train: u32,
    pub points: Vec<(Minutes, u64)>,
}

pub fn polylines(instance: &Instance, tt: &Timetable) -> Vec<Polyline> {
    let mileage = instance.line.mileages();
    tt.trains
        .iter()
        .map(|t| Polyline {
            train: t.id,
            points: t
                .stops
                .iter()
                .flat_map(|s| {
                    let m = mileage[s.station];
                    [(s.arrival, m), (s.departure, m)]
                })
                .collect(),
        })
        .collect()
}

pub fn polylines_csv(lines: &[Polyline]) -> String {
    let mut out = String::from("train,time_min,mileage_m\n");
    for l in lines {
        for (t, m) in &l.points {
            writeln!(out, "{},{},{}", l.train, t, m).expect("writing to a String");
        }
    }
    out
}

/// Standalone SVG time-distance diagram: time on the horizontal axis,
/// stations at their mileage on the vertical axis.
pub fn render_svg(instance: &Instance, tt: &Timetable) -> String {
    const W: f64 = 1200.0;
    const H: f64 = 600.0;
    const LEFT: f64 = 80.0;
    const RIGHT: f64 = 20.0;
    const TOP: f64 = 20.0;
    const BOTTOM: f64 = 40.0;
    const PALETTE: [&str; 8] = [
        "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
    ];

    let mileage = instance.line.mileages();
    let total = (*mileage.last().unwrap_or(&1)).max(1) as f64;
    let lines = polylines(instance, tt);
    let (t0, t1) = lines
        .iter()
        .flat_map(|l| l.points.iter().map(|p| p.0))
        .fold((u32::MAX, 0u32), |(lo, hi), t| (lo.min(t), hi.max(t)));
    let (t0, t1) = if t0 > t1 { (0, 1) } else { (t0, t1.max(t0 + 1)) };
    let x = |t: Minutes| LEFT + (f64::from(t - t0) / f64::from(t1 - t0)) * (W - LEFT - RIGHT);
    let y = |m: u64| TOP + (m as f64 / total) * (H - TOP - BOTTOM);

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    for (st, &m) in instance.line.stations.iter().zip(&mileage) {
        let yy = y(m);
        writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{yy:.1}" x2="{:.1}" y2="{yy:.1}" stroke="#ccc"/><text x="4" y="{:.1}">{}</text>"##,
            W - RIGHT,
            yy + 4.0,
            escape(&st.name)
        )
        .unwrap();
    }
    let step = ((t1 - t0) / 10).max(1);
    let mut t = t0;
    while t <= t1 {
        writeln!(
            svg,
            r##"<line x1="{0:.1}" y1="{TOP}" x2="{0:.1}" y2="{1:.1}" stroke="#eee"/><text x="{0:.1}" y="{2:.1}" text-anchor="middle">{t}</text>"##,
            x(t),
            H - BOTTOM,
            H - BOTTOM + 16.0
        )
        .unwrap();
        t += step;
    }
    for (i, l) in lines.iter().enumerate() {
        let pts: Vec<String> = l
            .points
            .iter()
            .map(|&(t, m)| format!("{:.1},{:.1}", x(t), y(m)))
            .collect();
        writeln!(
            svg,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"><title>train {}</title></polyline>"#,
            PALETTE[i % PALETTE.len()],
            pts.join(" "),
            l.train
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::bundled_instance;

    fn sample() -> Timetable {
        Timetable::new(vec![
            TrainSchedule {
                id: 1,
                stops: vec![
                    Stop { station: 0, arrival: 0, departure: 2, track: 1 },
                    Stop { station: 1, arrival: 13, departure: 13, track: 2 },
                ],
            },
            TrainSchedule {
                id: 2,
                stops: vec![Stop { station: 9, arrival: 5, departure: 5, track: 7 }],
            },
        ])
    }

    #[test]
    fn objective_sums_travel_times() {
        assert_eq!(sample().objective, 13);
    }

    #[test]
    fn csv_round_trip() {
        let inst = bundled_instance();
        let tt = sample();
        let csv = tt.to_csv(&inst);
        assert!(csv.starts_with(CSV_HEADER));
        assert!(csv.contains("1,CC,13,13,2"));
        assert_eq!(Timetable::from_csv(&csv, &inst).unwrap(), tt);
    }

    #[test]
    fn csv_errors_name_the_line() {
        let inst = bundled_instance();
        let bad = format!("{CSV_HEADER}\n1,SJX,0,2,1\n1,XXX,3,4,1\n");
        let err = Timetable::from_csv(&bad, &inst).unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains("station"), "{err}");
        let bad = format!("{CSV_HEADER}\n1,SJX,-1,2,1\n");
        assert!(Timetable::from_csv(&bad, &inst).is_err());
        assert!(Timetable::from_csv("nope", &inst).is_err());
        let bad = format!("{CSV_HEADER}\n1,SJX,0,2,1\n2,RA,0,2,1\n1,CC,9,9,1\n");
        assert!(Timetable::from_csv(&bad, &inst).is_err());
    }

    #[test]
    fn polylines_follow_mileage() {
        let inst = bundled_instance();
        let lines = polylines(&inst, &sample());
        assert_eq!(lines[0].points, vec![(0, 0), (2, 0), (13, 10300), (13, 10300)]);
        assert_eq!(lines[1].points, vec![(5, 80500), (5, 80500)]);
        let svg = render_svg(&inst, &sample());
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
    }
}
