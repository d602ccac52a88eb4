//! Flight-log domain types, the canonical CSV log format, packet trimming and
//! validation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nominal logger cadence.
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 100.0;

/// Canonical column order of a flight log.
pub const LOG_COLUMNS: [&str; 10] = [
    "timestamp",
    "gyro.x",
    "gyro.y",
    "gyro.z",
    "acc.x",
    "acc.y",
    "acc.z",
    "stab.roll",
    "stab.pitch",
    "stab.yaw",
];

/// One 3-axis sensor group of an [`ImuSample`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensorKind {
    Gyro,
    Accel,
    Stab,
}

impl SensorKind {
    pub const ALL: [SensorKind; 3] = [SensorKind::Gyro, SensorKind::Accel, SensorKind::Stab];

    pub fn axis_names(self) -> [&'static str; 3] {
        match self {
            SensorKind::Gyro => ["gyro.x", "gyro.y", "gyro.z"],
            SensorKind::Accel => ["acc.x", "acc.y", "acc.z"],
            SensorKind::Stab => ["stab.roll", "stab.pitch", "stab.yaw"],
        }
    }
}

impl fmt::Display for SensorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SensorKind::Gyro => "gyro",
            SensorKind::Accel => "accel",
            SensorKind::Stab => "stab",
        })
    }
}

impl FromStr for SensorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gyro" | "gyroscope" => Ok(SensorKind::Gyro),
            "accel" | "acc" | "accelerometer" => Ok(SensorKind::Accel),
            "stab" | "stabilizer" => Ok(SensorKind::Stab),
            other => Err(Error::InvalidArgument(format!("unknown sensor `{other}`"))),
        }
    }
}

/// One timestamped 100 Hz reading.
///
/// Gyro in degrees/s, accelerometer in g, stabilizer angles (roll, pitch, yaw)
/// in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    pub timestamp_ms: i64,
    pub gyro: [f64; 3],
    pub accel: [f64; 3],
    pub stab: [f64; 3],
}

impl ImuSample {
    pub fn sensor(&self, sensor: SensorKind) -> [f64; 3] {
        match sensor {
            SensorKind::Gyro => self.gyro,
            SensorKind::Accel => self.accel,
            SensorKind::Stab => self.stab,
        }
    }

    /// All nine channels in canonical log order.
    pub fn channels(&self) -> [f64; 9] {
        let mut out = [0.0; 9];
        out[..3].copy_from_slice(&self.gyro);
        out[3..6].copy_from_slice(&self.accel);
        out[6..].copy_from_slice(&self.stab);
        out
    }

    pub fn from_channels(timestamp_ms: i64, ch: [f64; 9]) -> Self {
        ImuSample {
            timestamp_ms,
            gyro: [ch[0], ch[1], ch[2]],
            accel: [ch[3], ch[4], ch[5]],
            stab: [ch[6], ch[7], ch[8]],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.channels().iter().all(|v| v.is_finite())
    }

    /// Parses one canonical-order CSV row (timestamp plus nine channels).
    pub fn parse_row(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.trim().split(',').map(str::trim).collect();
        if fields.len() != LOG_COLUMNS.len() {
            return Err(Error::Parse {
                row: 0,
                msg: format!("expected {} fields, found {}", LOG_COLUMNS.len(), fields.len()),
            });
        }
        let timestamp_ms = parse_timestamp(fields[0]).map_err(|msg| Error::Parse { row: 0, msg })?;
        let mut ch = [0.0; 9];
        for (slot, field) in ch.iter_mut().zip(&fields[1..]) {
            *slot = field.parse::<f64>().map_err(|_| Error::Parse {
                row: 0,
                msg: format!("non-numeric value `{field}`"),
            })?;
        }
        Ok(ImuSample::from_channels(timestamp_ms, ch))
    }

    /// Canonical CSV row; values use the shortest exact decimal form.
    pub fn to_row(&self) -> String {
        let mut row = self.timestamp_ms.to_string();
        for v in self.channels() {
            row.push(',');
            row.push_str(&v.to_string());
        }
        row
    }
}

fn parse_timestamp(field: &str) -> std::result::Result<i64, String> {
    if let Ok(t) = field.parse::<i64>() {
        return Ok(t);
    }
    // Some loggers write integral milliseconds as `1234.0`.
    match field.parse::<f64>() {
        Ok(t) if t.is_finite() && t.fract() == 0.0 => Ok(t as i64),
        _ => Err(format!("invalid timestamp `{field}`")),
    }
}

/// Wind speed classes of the hovering study, in m/s.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WindSpeed {
    Calm,
    One,
    Two,
    Three,
}

impl WindSpeed {
    pub const ALL: [WindSpeed; 4] = [WindSpeed::Calm, WindSpeed::One, WindSpeed::Two, WindSpeed::Three];

    pub fn mps(self) -> f64 {
        self.index() as f64
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Hovering-study wind directions, relative to the drone's heading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HoverDirection {
    Front,
    Back,
    Left,
    Right,
}

impl HoverDirection {
    pub const ALL: [HoverDirection; 4] = [
        HoverDirection::Front,
        HoverDirection::Back,
        HoverDirection::Left,
        HoverDirection::Right,
    ];
}

/// In-motion study directions, including the no-wind baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MotionDirection {
    NoWind,
    Front,
    Back,
    Left,
    Right,
}

impl MotionDirection {
    pub const ALL: [MotionDirection; 5] = [
        MotionDirection::NoWind,
        MotionDirection::Front,
        MotionDirection::Back,
        MotionDirection::Left,
        MotionDirection::Right,
    ];
}

/// Classification task; each task owns a closed class set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Speed,
    DirectionHover,
    DirectionMotion,
}

impl Task {
    pub fn class_count(self) -> usize {
        match self {
            Task::Speed | Task::DirectionHover => 4,
            Task::DirectionMotion => 5,
        }
    }

    /// Display names, in class-index order.
    pub fn class_names(self) -> Vec<String> {
        let names: &[&str] = match self {
            Task::Speed => &["0 m/s", "1 m/s", "2 m/s", "3 m/s"],
            Task::DirectionHover => &["front", "back", "left", "right"],
            Task::DirectionMotion => &["No wind", "front", "back", "left", "right"],
        };
        names.iter().map(|s| s.to_string()).collect()
    }

    /// Numeric regression targets, in class-index order. Speed classes map to
    /// their m/s value; direction classes to their index.
    pub fn class_values(self) -> Vec<f64> {
        (0..self.class_count()).map(|i| i as f64).collect()
    }

    pub fn conditions(self) -> Vec<WindCondition> {
        match self {
            Task::Speed => WindSpeed::ALL.iter().map(|&s| WindCondition::Speed(s)).collect(),
            Task::DirectionHover => HoverDirection::ALL
                .iter()
                .map(|&d| WindCondition::Direction(d))
                .collect(),
            Task::DirectionMotion => MotionDirection::ALL
                .iter()
                .map(|&d| WindCondition::DirectionInMotion(d))
                .collect(),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Speed => "speed",
            Task::DirectionHover => "direction_hover",
            Task::DirectionMotion => "direction_motion",
        })
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "speed" => Ok(Task::Speed),
            "direction_hover" | "hover" => Ok(Task::DirectionHover),
            "direction_motion" | "motion" => Ok(Task::DirectionMotion),
            other => Err(Error::InvalidArgument(format!("unknown task `{other}`"))),
        }
    }
}

/// The labeled wind condition of a flight. Exactly one class set applies per
/// task, which the enum shape enforces.
///
/// Serialized as a short tag: `speed-0` .. `speed-3`, `hover-front`, ...,
/// `motion-nowind`, `motion-left`, ...
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum WindCondition {
    Speed(WindSpeed),
    Direction(HoverDirection),
    DirectionInMotion(MotionDirection),
}

impl WindCondition {
    pub fn task(self) -> Task {
        match self {
            WindCondition::Speed(_) => Task::Speed,
            WindCondition::Direction(_) => Task::DirectionHover,
            WindCondition::DirectionInMotion(_) => Task::DirectionMotion,
        }
    }

    /// Index within the task's class set.
    pub fn class_index(self) -> usize {
        match self {
            WindCondition::Speed(s) => s as usize,
            WindCondition::Direction(d) => d as usize,
            WindCondition::DirectionInMotion(d) => d as usize,
        }
    }

    pub fn from_class_index(task: Task, index: usize) -> Option<Self> {
        task.conditions().get(index).copied()
    }

    pub fn class_name(self) -> String {
        self.task().class_names()[self.class_index()].clone()
    }

    pub fn tag(self) -> &'static str {
        use HoverDirection as H;
        use MotionDirection as M;
        match self {
            WindCondition::Speed(WindSpeed::Calm) => "speed-0",
            WindCondition::Speed(WindSpeed::One) => "speed-1",
            WindCondition::Speed(WindSpeed::Two) => "speed-2",
            WindCondition::Speed(WindSpeed::Three) => "speed-3",
            WindCondition::Direction(H::Front) => "hover-front",
            WindCondition::Direction(H::Back) => "hover-back",
            WindCondition::Direction(H::Left) => "hover-left",
            WindCondition::Direction(H::Right) => "hover-right",
            WindCondition::DirectionInMotion(M::NoWind) => "motion-nowind",
            WindCondition::DirectionInMotion(M::Front) => "motion-front",
            WindCondition::DirectionInMotion(M::Back) => "motion-back",
            WindCondition::DirectionInMotion(M::Left) => "motion-left",
            WindCondition::DirectionInMotion(M::Right) => "motion-right",
        }
    }
}

impl fmt::Display for WindCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for WindCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Task::Speed, Task::DirectionHover, Task::DirectionMotion]
            .iter()
            .flat_map(|t| t.conditions())
            .find(|c| c.tag() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown wind condition `{s}`")))
    }
}

impl TryFrom<String> for WindCondition {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<WindCondition> for String {
    fn from(c: WindCondition) -> String {
        c.tag().to_string()
    }
}

/// One flight's labeled sample sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct FlightPacket {
    pub drone_id: u32,
    pub condition: WindCondition,
    pub samples: Vec<ImuSample>,
    pub sample_rate_hz: f64,
    pub trimmed: bool,
    /// Set at collection time when the drone drifted out of its hover box;
    /// never inferred from the samples.
    pub deviation_flag: bool,
}

impl FlightPacket {
    pub fn new(drone_id: u32, condition: WindCondition, samples: Vec<ImuSample>) -> Self {
        FlightPacket {
            drone_id,
            condition,
            samples,
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            trimmed: false,
            deviation_flag: false,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    /// One axis of one sensor as a contiguous series.
    pub fn axis(&self, sensor: SensorKind, axis: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.sensor(sensor)[axis]).collect()
    }

    pub fn meta(&self) -> PacketMeta {
        PacketMeta {
            drone_id: self.drone_id,
            condition: self.condition,
            sample_rate_hz: self.sample_rate_hz,
            trimmed: self.trimmed,
            deviation_flag: self.deviation_flag,
        }
    }
}

/// JSON sidecar stored next to each CSV log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketMeta {
    pub drone_id: u32,
    pub condition: WindCondition,
    #[serde(default = "default_rate")]
    pub sample_rate_hz: f64,
    #[serde(default)]
    pub trimmed: bool,
    #[serde(default)]
    pub deviation_flag: bool,
}

fn default_rate() -> f64 {
    DEFAULT_SAMPLE_RATE_HZ
}

/// Parses a CSV flight log. Columns are located by header name, so their
/// order is free; extra columns are ignored.
pub fn parse_log(text: &str, drone_id: u32, condition: WindCondition) -> Result<FlightPacket> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::Parse { row: 1, msg: e.to_string() })?
        .clone();
    let width = header.len();
    let mut index = [0usize; 10];
    for (slot, name) in index.iter_mut().zip(LOG_COLUMNS) {
        *slot = header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(name.to_string()))?;
    }

    let mut samples = Vec::new();
    for (i, record) in reader.records().enumerate() {
        // header is line 1
        let row = i + 2;
        let record = record.map_err(|e| Error::Parse { row, msg: e.to_string() })?;
        if record.len() != width {
            return Err(Error::Parse {
                row,
                msg: format!("expected {width} fields, found {}", record.len()),
            });
        }
        let timestamp_ms = parse_timestamp(&record[index[0]]).map_err(|msg| Error::Parse { row, msg })?;
        let mut ch = [0.0; 9];
        for (c, &col) in index[1..].iter().enumerate() {
            let field = &record[col];
            ch[c] = field.parse::<f64>().map_err(|_| Error::Parse {
                row,
                msg: format!("non-numeric value `{field}` in column `{}`", LOG_COLUMNS[c + 1]),
            })?;
        }
        samples.push(ImuSample::from_channels(timestamp_ms, ch));
    }
    Ok(FlightPacket::new(drone_id, condition, samples))
}

/// Canonical CSV writer; the inverse of [`parse_log`].
pub fn write_log(packet: &FlightPacket) -> String {
    let mut out = LOG_COLUMNS.join(",");
    out.push('\n');
    for s in &packet.samples {
        out.push_str(&s.to_row());
        out.push('\n');
    }
    out
}

/// Removes `trim_seconds` of samples from both ends of an untrimmed packet.
pub fn trim_packet(packet: FlightPacket, trim_seconds: f64) -> Result<FlightPacket> {
    if packet.trimmed {
        return Err(Error::AlreadyTrimmed);
    }
    if !(trim_seconds >= 0.0) || !trim_seconds.is_finite() {
        return Err(Error::InvalidArgument(format!("trim_seconds must be >= 0, got {trim_seconds}")));
    }
    let cut = (trim_seconds * packet.sample_rate_hz + 1e-9).floor() as usize;
    let n = packet.samples.len();
    if n <= 2 * cut {
        return Err(Error::PacketTooShort {
            samples: n,
            trim_seconds,
            min_duration_s: 2.0 * trim_seconds,
        });
    }
    let FlightPacket { mut samples, .. } = packet;
    samples.truncate(n - cut);
    samples.drain(..cut);
    Ok(FlightPacket {
        samples,
        trimmed: true,
        ..packet
    })
}

/// One finding of [`validate_packet`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonFinite { index: usize, channel: &'static str },
    NonMonotonicTimestamp { index: usize, previous_ms: i64, timestamp_ms: i64 },
    Cadence { median_gap_ms: f64, expected_gap_ms: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonFinite { index, channel } => {
                write!(f, "sample {index}: non-finite value in {channel}")
            }
            Violation::NonMonotonicTimestamp { index, previous_ms, timestamp_ms } => write!(
                f,
                "sample {index}: timestamp {timestamp_ms} ms does not increase past {previous_ms} ms"
            ),
            Violation::Cadence { median_gap_ms, expected_gap_ms } => write!(
                f,
                "median sample gap {median_gap_ms} ms deviates more than 20% from {expected_gap_ms} ms"
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Maximum relative deviation of the median sample gap from the nominal one.
pub const CADENCE_TOLERANCE: f64 = 0.2;

pub fn validate_packet(packet: &FlightPacket) -> ValidationReport {
    let mut violations = Vec::new();
    for (i, s) in packet.samples.iter().enumerate() {
        for (v, name) in s.channels().iter().zip(&LOG_COLUMNS[1..]) {
            if !v.is_finite() {
                violations.push(Violation::NonFinite { index: i, channel: name });
            }
        }
    }
    for (i, pair) in packet.samples.windows(2).enumerate() {
        if pair[1].timestamp_ms <= pair[0].timestamp_ms {
            violations.push(Violation::NonMonotonicTimestamp {
                index: i + 1,
                previous_ms: pair[0].timestamp_ms,
                timestamp_ms: pair[1].timestamp_ms,
            });
        }
    }
    if packet.samples.len() >= 2 {
        let mut gaps: Vec<f64> = packet
            .samples
            .windows(2)
            .map(|p| (p[1].timestamp_ms - p[0].timestamp_ms) as f64)
            .collect();
        gaps.sort_by(f64::total_cmp);
        let mid = gaps.len() / 2;
        let median = if gaps.len().is_multiple_of(2) {
            0.5 * (gaps[mid - 1] + gaps[mid])
        } else {
            gaps[mid]
        };
        let expected = 1000.0 / packet.sample_rate_hz;
        if (median - expected).abs() > CADENCE_TOLERANCE * expected {
            violations.push(Violation::Cadence {
                median_gap_ms: median,
                expected_gap_ms: expected,
            });
        }
    }
    ValidationReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> String {
        LOG_COLUMNS.join(",")
    }

    fn ramp_packet(n: usize) -> FlightPacket {
        let samples = (0..n)
            .map(|i| {
                let v = i as f64;
                ImuSample::from_channels(10 * i as i64, [v, v, v, 0.0, 0.0, 1.0, v, -v, 0.5])
            })
            .collect();
        FlightPacket::new(1, WindCondition::Speed(WindSpeed::Calm), samples)
    }

    #[test]
    fn parses_first_gyro_row() {
        let text = format!(
            "{}\n0,-1.589356,12.612753,-0.499988,-0.053416,-0.027197,1.036873,-0.188750,0.301978,0.158213\n",
            header()
        );
        let p = parse_log(&text, 1, WindCondition::Speed(WindSpeed::Calm)).unwrap();
        assert_eq!(p.samples.len(), 1);
        assert_eq!(p.samples[0].gyro, [-1.589356, 12.612753, -0.499988]);
        assert_eq!(p.samples[0].accel, [-0.053416, -0.027197, 1.036873]);
        assert_eq!(p.samples[0].stab, [-0.188750, 0.301978, 0.158213]);
        assert!(!p.trimmed);
    }

    #[test]
    fn header_lookup_is_order_insensitive() {
        let text = "stab.yaw,stab.pitch,stab.roll,acc.z,acc.y,acc.x,gyro.z,gyro.y,gyro.x,timestamp\n9,8,7,6,5,4,3,2,1,40\n";
        let p = parse_log(text, 2, WindCondition::Direction(HoverDirection::Left)).unwrap();
        let s = p.samples[0];
        assert_eq!(s.timestamp_ms, 40);
        assert_eq!(s.channels(), [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
    }

    #[test]
    fn empty_data_section_gives_empty_packet() {
        let p = parse_log(&format!("{}\n", header()), 1, WindCondition::Speed(WindSpeed::One)).unwrap();
        assert!(p.is_empty());
    }

    #[test]
    fn short_row_is_a_parse_error_with_row_number() {
        let text = format!("{}\n0,1,2,3,4,5,6,7,8,9\n10,1,2,3,4,5,6,7,8\n", header());
        match parse_log(&text, 1, WindCondition::Speed(WindSpeed::One)) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn non_numeric_value_is_a_parse_error() {
        let text = format!("{}\n0,1,2,x,4,5,6,7,8,9\n", header());
        assert!(matches!(
            parse_log(&text, 1, WindCondition::Speed(WindSpeed::One)),
            Err(Error::Parse { row: 2, .. })
        ));
    }

    #[test]
    fn missing_column_is_a_schema_error() {
        let text = "timestamp,gyro.x,gyro.y,gyro.z\n0,1,2,3\n";
        match parse_log(text, 1, WindCondition::Speed(WindSpeed::One)) {
            Err(Error::Schema(col)) => assert_eq!(col, "acc.x"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn trim_64s_packet_to_6000_samples() {
        let p = trim_packet(ramp_packet(6400), 2.0).unwrap();
        assert_eq!(p.len(), 6000);
        assert!(p.trimmed);
        assert_eq!(p.samples[0].gyro[0], 200.0);
        assert_eq!(p.samples[5999].gyro[0], 6199.0);
    }

    #[test]
    fn zero_trim_is_identity() {
        let original = ramp_packet(50);
        let p = trim_packet(original.clone(), 0.0).unwrap();
        assert_eq!(p.samples, original.samples);
        assert!(p.trimmed);
    }

    #[test]
    fn too_short_packet_fails_to_trim() {
        match trim_packet(ramp_packet(300), 2.0) {
            Err(Error::PacketTooShort { min_duration_s, .. }) => assert_eq!(min_duration_s, 4.0),
            other => panic!("expected too-short error, got {other:?}"),
        }
        assert!(trim_packet(ramp_packet(400), 2.0).is_err());
        assert_eq!(trim_packet(ramp_packet(401), 2.0).unwrap().len(), 1);
    }

    #[test]
    fn trimming_twice_is_rejected() {
        let p = trim_packet(ramp_packet(1000), 1.0).unwrap();
        assert!(matches!(trim_packet(p, 1.0), Err(Error::AlreadyTrimmed)));
    }

    #[test]
    fn well_formed_packet_validates() {
        assert!(validate_packet(&ramp_packet(500)).is_valid());
    }

    #[test]
    fn nan_value_is_reported_with_index() {
        let mut p = ramp_packet(100);
        p.samples[42].accel[1] = f64::NAN;
        let report = validate_packet(&p);
        assert_eq!(
            report.violations,
            vec![Violation::NonFinite { index: 42, channel: "acc.y" }]
        );
    }

    #[test]
    fn duplicate_timestamp_breaks_monotonicity() {
        let mut p = ramp_packet(100);
        p.samples[10].timestamp_ms = p.samples[9].timestamp_ms;
        let report = validate_packet(&p);
        assert_eq!(report.violations.len(), 1);
        assert!(matches!(
            report.violations[0],
            Violation::NonMonotonicTimestamp { index: 10, .. }
        ));
    }

    #[test]
    fn slow_cadence_is_reported() {
        let mut p = ramp_packet(100);
        for (i, s) in p.samples.iter_mut().enumerate() {
            s.timestamp_ms = 13 * i as i64;
        }
        assert!(matches!(
            validate_packet(&p).violations.as_slice(),
            [Violation::Cadence { .. }]
        ));
    }

    #[test]
    fn condition_tags_round_trip() {
        for task in [Task::Speed, Task::DirectionHover, Task::DirectionMotion] {
            let conds = task.conditions();
            assert_eq!(conds.len(), task.class_count());
            for (i, c) in conds.into_iter().enumerate() {
                assert_eq!(c.class_index(), i);
                assert_eq!(c.tag().parse::<WindCondition>().unwrap(), c);
                let json = serde_json::to_string(&c).unwrap();
                assert_eq!(serde_json::from_str::<WindCondition>(&json).unwrap(), c);
            }
        }
        assert!("speed-4".parse::<WindCondition>().is_err());
    }

    #[test]
    fn row_parser_matches_writer() {
        let s = ImuSample::from_channels(1234, [0.1, -2.5, 3.0, 1e-7, 0.0, 1.0, 5.5, -6.25, 7.0]);
        assert_eq!(ImuSample::parse_row(&s.to_row()).unwrap(), s);
        assert!(ImuSample::parse_row("1,2,3").is_err());
    }
}
