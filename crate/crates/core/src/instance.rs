//! Problem instances: line topology, trains, timing parameters and the
//! dwell-time decision sequence.

use std::fmt;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Whole minutes. The simulator discretizes time to one-minute units.
pub type Minutes = u32;

/// Largest train id a matrix cell can hold.
pub const MAX_TRAIN_ID: u32 = u16::MAX as u32 - 2;

pub const PASSENGER_SPEED: Speed = Speed { num: 1250, den: 1 };
/// 50 km/h, kept as an exact fraction so run times do not drift.
pub const FREIGHT_SPEED: Speed = Speed { num: 2500, den: 3 };

pub const DEFAULT_DEPARTURE_WINDOW: Minutes = 240;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Station {
    pub name: String,
    pub tracks: u16,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RailwayLine {
    pub stations: Vec<Station>,
    /// One entry per adjacent station pair, in line order.
    #[serde(rename = "section_lengths_m")]
    pub section_lengths: Vec<u32>,
}

impl RailwayLine {
    pub fn validate(&self) -> Result<()> {
        if self.stations.len() < 2 {
            return Err(Error::InvalidInstance(
                "a line needs at least two stations".into(),
            ));
        }
        if self.section_lengths.len() + 1 != self.stations.len() {
            return Err(Error::InvalidInstance(format!(
                "{} stations need {} sections, found {}",
                self.stations.len(),
                self.stations.len() - 1,
                self.section_lengths.len()
            )));
        }
        if let Some(st) = self.stations.iter().find(|s| s.tracks == 0) {
            return Err(Error::InvalidInstance(format!(
                "station `{}` has no tracks",
                st.name
            )));
        }
        if let Some(s) = self.section_lengths.iter().position(|&len| len == 0) {
            return Err(Error::InvalidInstance(format!(
                "section {s} has zero length"
            )));
        }
        Ok(())
    }

    pub fn section_count(&self) -> usize {
        self.section_lengths.len()
    }

    /// Cumulative distance of every station from the first one, in meters.
    pub fn mileages(&self) -> Vec<u64> {
        let mut acc = 0u64;
        let mut out = Vec::with_capacity(self.stations.len());
        out.push(0);
        for &len in &self.section_lengths {
            acc += u64::from(len);
            out.push(acc);
        }
        out
    }

    pub fn station_index(&self, name: &str) -> Option<usize> {
        self.stations.iter().position(|s| s.name == name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Towards higher station indices.
    Up,
    Down,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainKind {
    Passenger,
    Freight,
}

impl TrainKind {
    pub fn speed(self) -> Speed {
        match self {
            TrainKind::Passenger => PASSENGER_SPEED,
            TrainKind::Freight => FREIGHT_SPEED,
        }
    }
}

/// A speed in meters per minute, stored as a reduced fraction `num / den`.
///
/// Serialized as a plain integer when `den == 1` and as the string
/// `"num/den"` otherwise. Decimal numbers are accepted on input and
/// converted to the nearest fraction with a denominator of at most 10^6.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Speed {
    num: u64,
    den: u64,
}

impl Speed {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(Error::InvalidInstance(format!(
                "speed {num}/{den} must be positive"
            )));
        }
        let g = gcd(num, den);
        Ok(Speed {
            num: num / g,
            den: den / g,
        })
    }

    pub fn numerator(self) -> u64 {
        self.num
    }

    pub fn denominator(self) -> u64 {
        self.den
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    fn from_f64(v: f64) -> Option<Self> {
        if !v.is_finite() || v <= 0.0 {
            return None;
        }
        // Stern-Brocot style best rational approximation.
        const MAX_DEN: u64 = 1_000_000;
        let (mut p0, mut q0, mut p1, mut q1) = (0u64, 1u64, 1u64, 0u64);
        let mut x = v;
        loop {
            let a = x.floor();
            if a > 1e12 {
                break;
            }
            let a = a as u64;
            let p2 = a.checked_mul(p1)?.checked_add(p0)?;
            let q2 = a.checked_mul(q1)?.checked_add(q0)?;
            if q2 > MAX_DEN {
                break;
            }
            (p0, q0, p1, q1) = (p1, q1, p2, q2);
            let frac = x - a as f64;
            if frac.abs() < 1e-12 || (p1 as f64 / q1 as f64 - v).abs() <= 1e-12 * v {
                break;
            }
            x = 1.0 / frac;
        }
        Speed::new(p1, q1).ok()
    }
}

impl fmt::Display for Speed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl Serialize for Speed {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.den == 1 {
            s.serialize_u64(self.num)
        } else {
            s.serialize_str(&self.to_string())
        }
    }
}

impl<'de> Deserialize<'de> for Speed {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;

        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Float(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(n) => Speed::new(n, 1).map_err(D::Error::custom),
            Raw::Float(v) => Speed::from_f64(v)
                .ok_or_else(|| D::Error::custom(format!("speed {v} must be positive"))),
            Raw::Text(t) => {
                let (a, b) = t
                    .split_once('/')
                    .ok_or_else(|| D::Error::custom(format!("speed `{t}` is not `num/den`")))?;
                let num = a.trim().parse().map_err(D::Error::custom)?;
                let den = b.trim().parse().map_err(D::Error::custom)?;
                Speed::new(num, den).map_err(D::Error::custom)
            }
        }
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSpec {
    pub id: u32,
    /// Station index of the first departure.
    pub origin: usize,
    pub destination: usize,
    #[serde(rename = "depart_min")]
    pub first_departure: Minutes,
    #[serde(rename = "speed_m_per_min")]
    pub speed: Speed,
    pub kind: TrainKind,
}

impl TrainSpec {
    pub fn direction(&self) -> Direction {
        if self.origin < self.destination {
            Direction::Up
        } else {
            Direction::Down
        }
    }

    /// Stations visited, in travel order, origin and destination included.
    pub fn stations(&self) -> Vec<usize> {
        if self.origin < self.destination {
            (self.origin..=self.destination).collect()
        } else {
            (self.destination..=self.origin).rev().collect()
        }
    }

    pub fn station_count(&self) -> usize {
        self.origin.abs_diff(self.destination) + 1
    }

    /// Section entered when leaving `station` in the travel direction.
    pub fn section_after(&self, station: usize) -> usize {
        match self.direction() {
            Direction::Up => station,
            Direction::Down => station - 1,
        }
    }

    pub fn nominal_run_time(&self, line: &RailwayLine, section: usize) -> Minutes {
        nominal_run_time(line.section_lengths[section], self.speed)
    }
}

/// `ceil(length / speed)` in whole minutes, computed exactly.
pub fn nominal_run_time(length_m: u32, speed: Speed) -> Minutes {
    let scaled = u64::from(length_m) * speed.den;
    scaled.div_ceil(speed.num) as Minutes
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingParams {
    /// Minimum separation between two arrivals at one station.
    pub tau_no: Minutes,
    /// Minimum separation between a departure into a section and an
    /// opposing arrival out of it.
    pub tau_d: Minutes,
    pub t_acc: Minutes,
    pub t_dec: Minutes,
    pub v_max: Minutes,
    pub t_max: Minutes,
}

impl Default for TimingParams {
    fn default() -> Self {
        TimingParams {
            tau_no: 2,
            tau_d: 2,
            t_acc: 1,
            t_dec: 1,
            v_max: 59,
            t_max: 800,
        }
    }
}

impl TimingParams {
    pub fn validate(&self) -> Result<()> {
        if self.v_max < 1 {
            return Err(Error::InvalidInstance("v_max must be at least 1".into()));
        }
        if self.t_max == 0 {
            return Err(Error::InvalidInstance("t_max must be positive".into()));
        }
        Ok(())
    }
}

/// One dwell-time decision: train `train` (index into `Instance::trains`)
/// at station `station`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Decision {
    pub train: usize,
    pub train_id: u32,
    pub station: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    pub line: RailwayLine,
    pub trains: Vec<TrainSpec>,
    pub params: TimingParams,
}

impl Instance {
    pub fn new(line: RailwayLine, trains: Vec<TrainSpec>, params: TimingParams) -> Result<Self> {
        let instance = Instance {
            line,
            trains,
            params,
        };
        instance.validate()?;
        Ok(instance)
    }

    pub fn validate(&self) -> Result<()> {
        self.line.validate()?;
        self.params.validate()?;
        let n = self.line.stations.len();
        let mut prev: Option<&TrainSpec> = None;
        for t in &self.trains {
            if t.id == 0 || t.id > MAX_TRAIN_ID {
                return Err(Error::InvalidInstance(format!(
                    "train id {} outside 1..={MAX_TRAIN_ID}",
                    t.id
                )));
            }
            if t.origin >= n || t.destination >= n {
                return Err(Error::InvalidInstance(format!(
                    "train {} references a station outside 0..{n}",
                    t.id
                )));
            }
            if t.origin == t.destination {
                return Err(Error::InvalidInstance(format!(
                    "train {} has identical origin and destination",
                    t.id
                )));
            }
            if let Some(p) = prev {
                if t.id <= p.id {
                    return Err(Error::InvalidInstance(format!(
                        "train ids must increase: {} follows {}",
                        t.id, p.id
                    )));
                }
                if t.first_departure < p.first_departure {
                    return Err(Error::InvalidInstance(format!(
                        "trains must be ordered by first departure: train {} departs before train {}",
                        t.id, p.id
                    )));
                }
            }
            prev = Some(t);
        }
        Ok(())
    }

    /// The dwell-time decision sequence: every station of train 1 in travel
    /// order, then train 2, and so on.
    pub fn decision_sequence(&self) -> Vec<Decision> {
        self.trains
            .iter()
            .enumerate()
            .flat_map(|(idx, t)| {
                t.stations().into_iter().map(move |station| Decision {
                    train: idx,
                    train_id: t.id,
                    station,
                })
            })
            .collect()
    }

    pub fn decision_count(&self) -> usize {
        self.trains.iter().map(TrainSpec::station_count).sum()
    }

    /// `V_max * |V|`, the normalizer of the terminal reward.
    pub fn max_travel_time(&self) -> u64 {
        u64::from(self.params.v_max) * self.decision_count() as u64
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let instance: Instance = serde_path_to_error::deserialize(de).map_err(Error::from_json)?;
        instance.validate()?;
        Ok(instance)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Random instances on a fixed line.
#[derive(Clone, Debug)]
pub struct InstanceGenerator {
    pub line: RailwayLine,
    pub params: TimingParams,
    /// First departures are drawn uniformly from `0..=departure_window`.
    pub departure_window: Minutes,
}

impl InstanceGenerator {
    pub fn new(line: RailwayLine) -> Self {
        InstanceGenerator {
            line,
            params: TimingParams::default(),
            departure_window: DEFAULT_DEPARTURE_WINDOW,
        }
    }

    pub fn with_params(mut self, params: TimingParams) -> Self {
        self.params = params;
        self
    }

    pub fn with_window(mut self, window: Minutes) -> Self {
        self.departure_window = window;
        self
    }

    pub fn generate(&self, n_trains: usize, seed: u64) -> Result<Instance> {
        if n_trains == 0 {
            return Err(Error::InvalidInstance(
                "a random instance needs at least one train".into(),
            ));
        }
        self.line.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_stations = self.line.stations.len();
        let mut trains: Vec<TrainSpec> = (0..n_trains)
            .map(|_| {
                let up = rng.random_bool(0.5);
                let a = rng.random_range(0..n_stations);
                let mut b = rng.random_range(0..n_stations - 1);
                if b >= a {
                    b += 1;
                }
                let (lo, hi) = (a.min(b), a.max(b));
                let (origin, destination) = if up { (lo, hi) } else { (hi, lo) };
                let kind = *[TrainKind::Passenger, TrainKind::Freight]
                    .choose(&mut rng)
                    .expect("non-empty");
                TrainSpec {
                    id: 0,
                    origin,
                    destination,
                    first_departure: rng.random_range(0..=self.departure_window),
                    speed: kind.speed(),
                    kind,
                }
            })
            .collect();
        trains.sort_by_key(|t| t.first_departure);
        for (i, t) in trains.iter_mut().enumerate() {
            t.id = i as u32 + 1;
        }
        Instance::new(self.line.clone(), trains, self.params)
    }
}

/// Random instance with default timing parameters.
pub fn generate_random_instance(
    line: &RailwayLine,
    n_trains: usize,
    seed: u64,
    departure_window: Minutes,
) -> Result<Instance> {
    InstanceGenerator::new(line.clone())
        .with_window(departure_window)
        .generate(n_trains, seed)
}

const BUNDLED_LINE: &str = include_str!("../data/jiaozhou_liuzhou.json");

/// The ten-station corridor shipped with the crate, with no trains and the
/// default timing parameters.
pub fn bundled_instance() -> Instance {
    Instance::from_json(BUNDLED_LINE).expect("bundled instance is valid")
}

pub fn bundled_line() -> RailwayLine {
    bundled_instance().line
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_station_line() -> RailwayLine {
        RailwayLine {
            stations: vec![
                Station { name: "A".into(), tracks: 2 },
                Station { name: "B".into(), tracks: 2 },
                Station { name: "C".into(), tracks: 2 },
            ],
            section_lengths: vec![1250, 1250],
        }
    }

    fn train(id: u32, origin: usize, destination: usize, dep: Minutes) -> TrainSpec {
        TrainSpec {
            id,
            origin,
            destination,
            first_departure: dep,
            speed: PASSENGER_SPEED,
            kind: TrainKind::Passenger,
        }
    }

    #[test]
    fn bundled_line_matches_corridor_table() {
        let inst = bundled_instance();
        assert_eq!(inst.line.stations.len(), 10);
        assert_eq!(inst.line.stations[9].name, "RA");
        assert_eq!(inst.line.stations[9].tracks, 7);
        assert!(inst.line.stations[..9].iter().all(|s| s.tracks == 3));
        assert_eq!(
            inst.line.section_lengths,
            vec![10300, 7500, 6700, 7300, 10300, 11100, 9000, 10200, 8100]
        );
        assert_eq!(inst.params, TimingParams::default());
        assert!(inst.trains.is_empty());
        assert_eq!(inst.decision_count(), 0);
    }

    #[test]
    fn single_train_sequence() {
        let inst = Instance::new(three_station_line(), vec![train(1, 0, 2, 0)], TimingParams::default())
            .unwrap();
        let seq: Vec<_> = inst
            .decision_sequence()
            .iter()
            .map(|d| (d.train_id, d.station))
            .collect();
        assert_eq!(seq, vec![(1, 0), (1, 1), (1, 2)]);
    }

    #[test]
    fn two_full_length_trains_on_corridor() {
        let line = bundled_line();
        let trains = vec![train(1, 0, 9, 0), train(2, 9, 0, 5)];
        let inst = Instance::new(line, trains, TimingParams::default()).unwrap();
        assert_eq!(inst.decision_count(), 20);
        let seq = inst.decision_sequence();
        assert_eq!(seq.len(), 20);
        assert_eq!(seq[10].station, 9);
        assert_eq!(seq[19].station, 0);
    }

    #[test]
    fn nominal_run_times_round_up() {
        assert_eq!(nominal_run_time(10300, PASSENGER_SPEED), 9);
        assert_eq!(nominal_run_time(7500, PASSENGER_SPEED), 6);
        assert_eq!(nominal_run_time(7500, FREIGHT_SPEED), 9);
        assert_eq!(nominal_run_time(10300, FREIGHT_SPEED), 13);
    }

    #[test]
    fn speed_serialization() {
        assert_eq!(serde_json::to_string(&FREIGHT_SPEED).unwrap(), "\"2500/3\"");
        assert_eq!(serde_json::to_string(&PASSENGER_SPEED).unwrap(), "1250");
        let s: Speed = serde_json::from_str("\"5000/6\"").unwrap();
        assert_eq!(s, FREIGHT_SPEED);
        let s: Speed = serde_json::from_str("833.3").unwrap();
        assert_eq!((s.numerator(), s.denominator()), (8333, 10));
        let s: Speed = serde_json::from_str("1250.0").unwrap();
        assert_eq!(s, PASSENGER_SPEED);
        assert!(serde_json::from_str::<Speed>("0").is_err());
        assert!(serde_json::from_str::<Speed>("\"3/0\"").is_err());
    }

    #[test]
    fn negative_section_length_is_a_parse_error() {
        let text = BUNDLED_LINE.replacen("10300", "-10300", 1);
        match Instance::from_json(&text) {
            Err(Error::Parse { at, .. }) => assert!(at.contains("section_lengths_m"), "{at}"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn invariant_violations_are_rejected() {
        let line = three_station_line();
        let p = TimingParams::default();
        assert!(Instance::new(line.clone(), vec![train(1, 1, 1, 0)], p).is_err());
        assert!(Instance::new(line.clone(), vec![train(1, 0, 5, 0)], p).is_err());
        assert!(Instance::new(line.clone(), vec![train(2, 0, 2, 5), train(1, 2, 0, 6)], p).is_err());
        assert!(Instance::new(line.clone(), vec![train(1, 0, 2, 5), train(2, 2, 0, 4)], p).is_err());
        let mut bad = line.clone();
        bad.section_lengths.pop();
        assert!(Instance::new(bad, vec![], p).is_err());
        let mut bad = line;
        bad.stations[1].tracks = 0;
        assert!(Instance::new(bad, vec![], p).is_err());
    }

    #[test]
    fn generator_orders_and_numbers_trains() {
        let inst = generate_random_instance(&bundled_line(), 6, 1, DEFAULT_DEPARTURE_WINDOW).unwrap();
        assert_eq!(inst.trains.len(), 6);
        for (i, t) in inst.trains.iter().enumerate() {
            assert_eq!(t.id, i as u32 + 1);
            assert!(t.first_departure <= DEFAULT_DEPARTURE_WINDOW);
            assert_eq!(t.speed, t.kind.speed());
        }
        assert!(inst
            .trains
            .windows(2)
            .all(|w| w[0].first_departure <= w[1].first_departure));
    }

    #[test]
    fn generator_rejects_zero_trains() {
        assert!(generate_random_instance(&bundled_line(), 0, 1, 10).is_err());
    }

    #[test]
    fn generator_is_deterministic() {
        let a = generate_random_instance(&bundled_line(), 9, 42, 120).unwrap();
        let b = generate_random_instance(&bundled_line(), 9, 42, 120).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let c = generate_random_instance(&bundled_line(), 9, 43, 120).unwrap();
        assert_ne!(a, c);
    }
}
