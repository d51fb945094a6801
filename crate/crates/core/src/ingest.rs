//! Raw sensor logs and behavior-event labels.
//!
//! A recording session is a directory holding one delimited text file per
//! sensor kind (`timestamp,x,y,z`) and one `events.csv` label file
//! (`behavior,start_us,end_us`). All timestamps are normalized to integer
//! microseconds on load; the unit of a sensor file is taken from the suffix
//! of its first header column (`_s`, `_ms`, `_us`, `_ns`, bare = `_us`).

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of axes per sensor file.
pub const AXES: usize = 3;
/// Number of (sensor, axis) channels in a complete session.
pub const NUM_CHANNELS: usize = 12;
pub const EVENTS_FILE: &str = "events.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SensorKind {
    Acceleration,
    LinearAcceleration,
    Magnetometer,
    Gyroscope,
}

impl SensorKind {
    pub const ALL: [SensorKind; 4] = [
        SensorKind::Acceleration,
        SensorKind::LinearAcceleration,
        SensorKind::Magnetometer,
        SensorKind::Gyroscope,
    ];

    /// File stem used inside a session directory.
    pub fn file_stem(self) -> &'static str {
        match self {
            SensorKind::Acceleration => "acceleration",
            SensorKind::LinearAcceleration => "linear_acceleration",
            SensorKind::Magnetometer => "magnetometer",
            SensorKind::Gyroscope => "gyroscope",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.csv", self.file_stem())
    }

    fn short(self) -> &'static str {
        match self {
            SensorKind::Acceleration => "acc",
            SensorKind::LinearAcceleration => "linacc",
            SensorKind::Magnetometer => "mag",
            SensorKind::Gyroscope => "gyro",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

/// One (sensor, axis) pair. Ordering follows the canonical feature order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Channel {
    pub sensor: SensorKind,
    pub axis: Axis,
}

impl Channel {
    pub const fn new(sensor: SensorKind, axis: Axis) -> Self {
        Self { sensor, axis }
    }

    /// Feature order of a frame: acceleration, linear acceleration,
    /// magnetometer, gyroscope; x, y, z within each.
    pub const ALL: [Channel; NUM_CHANNELS] = [
        Channel::new(SensorKind::Acceleration, Axis::X),
        Channel::new(SensorKind::Acceleration, Axis::Y),
        Channel::new(SensorKind::Acceleration, Axis::Z),
        Channel::new(SensorKind::LinearAcceleration, Axis::X),
        Channel::new(SensorKind::LinearAcceleration, Axis::Y),
        Channel::new(SensorKind::LinearAcceleration, Axis::Z),
        Channel::new(SensorKind::Magnetometer, Axis::X),
        Channel::new(SensorKind::Magnetometer, Axis::Y),
        Channel::new(SensorKind::Magnetometer, Axis::Z),
        Channel::new(SensorKind::Gyroscope, Axis::X),
        Channel::new(SensorKind::Gyroscope, Axis::Y),
        Channel::new(SensorKind::Gyroscope, Axis::Z),
    ];

    /// Column of this channel in a frame.
    pub fn index(self) -> usize {
        let s = SensorKind::ALL
            .iter()
            .position(|&k| k == self.sensor)
            .unwrap();
        let a = Axis::ALL.iter().position(|&k| k == self.axis).unwrap();
        s * AXES + a
    }

    pub fn name(self) -> String {
        format!("{}_{}", self.sensor.short(), self.axis.name())
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Behavior {
    Normal,
    AggrBrake,
    AggrAcceleration,
    AggrLeftTurn,
    AggrRightTurn,
    AggrLaneChangeRight,
    AggrLaneChangeLeft,
}

impl Behavior {
    pub const ALL: [Behavior; 7] = [
        Behavior::Normal,
        Behavior::AggrBrake,
        Behavior::AggrAcceleration,
        Behavior::AggrLeftTurn,
        Behavior::AggrRightTurn,
        Behavior::AggrLaneChangeRight,
        Behavior::AggrLaneChangeLeft,
    ];

    /// The six aggressive classes, in report row order.
    pub const AGGRESSIVE: [Behavior; 6] = [
        Behavior::AggrRightTurn,
        Behavior::AggrLeftTurn,
        Behavior::AggrLaneChangeRight,
        Behavior::AggrLaneChangeLeft,
        Behavior::AggrBrake,
        Behavior::AggrAcceleration,
    ];

    pub fn is_aggressive(self) -> bool {
        self != Behavior::Normal
    }

    /// Identifier used in label files and delimited reports.
    pub fn name(self) -> &'static str {
        match self {
            Behavior::Normal => "normal",
            Behavior::AggrBrake => "aggressive_brake",
            Behavior::AggrAcceleration => "aggressive_acceleration",
            Behavior::AggrLeftTurn => "aggressive_left_turn",
            Behavior::AggrRightTurn => "aggressive_right_turn",
            Behavior::AggrLaneChangeRight => "aggressive_right_lane_change",
            Behavior::AggrLaneChangeLeft => "aggressive_left_lane_change",
        }
    }

    /// Human-readable name used in rendered tables.
    pub fn title(self) -> &'static str {
        match self {
            Behavior::Normal => "Normal",
            Behavior::AggrBrake => "Aggressive Brake",
            Behavior::AggrAcceleration => "Aggressive Acceleration",
            Behavior::AggrLeftTurn => "Aggressive Left Turn",
            Behavior::AggrRightTurn => "Aggressive Right Turn",
            Behavior::AggrLaneChangeRight => "Aggressive Right Lane Change",
            Behavior::AggrLaneChangeLeft => "Aggressive Left Lane Change",
        }
    }
}

impl fmt::Display for Behavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Behavior {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        let found = match key.as_str() {
            "normal" => Behavior::Normal,
            "aggressive_brake" => Behavior::AggrBrake,
            "aggressive_acceleration" => Behavior::AggrAcceleration,
            "aggressive_left_turn" => Behavior::AggrLeftTurn,
            "aggressive_right_turn" => Behavior::AggrRightTurn,
            "aggressive_right_lane_change" => Behavior::AggrLaneChangeRight,
            "aggressive_left_lane_change" => Behavior::AggrLaneChangeLeft,
            // Event names used by the public smartphone driving dataset.
            "evento_nao_agressivo" => Behavior::Normal,
            "freada_agressiva" => Behavior::AggrBrake,
            "aceleracao_agressiva" => Behavior::AggrAcceleration,
            "curva_esquerda_agressiva" => Behavior::AggrLeftTurn,
            "curva_direita_agressiva" => Behavior::AggrRightTurn,
            "troca_faixa_direita_agressiva" => Behavior::AggrLaneChangeRight,
            "troca_faixa_esquerda_agressiva" => Behavior::AggrLaneChangeLeft,
            _ => {
                return Err(Error::InvalidLabel(format!(
                    "unknown behavior {:?}",
                    s.trim()
                )))
            }
        };
        Ok(found)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub timestamp_us: i64,
    pub value: f64,
}

/// Samples of one channel at its native rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorTrace {
    channel: Channel,
    samples: Vec<Sample>,
}

impl SensorTrace {
    /// Fails on an empty sample list or a timestamp that does not strictly
    /// increase.
    pub fn new(channel: Channel, samples: Vec<Sample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::NoSamples);
        }
        check_monotonic(samples.iter().map(|s| s.timestamp_us))?;
        Ok(Self { channel, samples })
    }

    pub fn channel(&self) -> Channel {
        self.channel
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn first_timestamp(&self) -> i64 {
        self.samples[0].timestamp_us
    }

    pub fn last_timestamp(&self) -> i64 {
        self.samples[self.samples.len() - 1].timestamp_us
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

fn check_monotonic(timestamps: impl Iterator<Item = i64>) -> Result<()> {
    let mut previous: Option<i64> = None;
    for (index, timestamp) in timestamps.enumerate() {
        if let Some(previous) = previous {
            if timestamp <= previous {
                return Err(Error::NonMonotonic {
                    index,
                    timestamp,
                    previous,
                });
            }
        }
        previous = Some(timestamp);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventLabel {
    pub behavior: Behavior,
    pub start_us: i64,
    pub end_us: i64,
}

impl EventLabel {
    pub fn new(behavior: Behavior, start_us: i64, end_us: i64) -> Result<Self> {
        if start_us >= end_us {
            return Err(Error::InvalidLabel(format!(
                "{behavior}: start {start_us} is not before end {end_us}"
            )));
        }
        Ok(Self {
            behavior,
            start_us,
            end_us,
        })
    }

    /// Half-open containment `start <= t < end`.
    pub fn contains(&self, timestamp_us: i64) -> bool {
        self.start_us <= timestamp_us && timestamp_us < self.end_us
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TimeUnit {
    Seconds,
    Millis,
    Micros,
    Nanos,
}

impl TimeUnit {
    fn from_header(name: &str) -> Self {
        let name = name.trim().to_ascii_lowercase();
        if name.ends_with("_ns") {
            TimeUnit::Nanos
        } else if name.ends_with("_ms") {
            TimeUnit::Millis
        } else if name.ends_with("_s") {
            TimeUnit::Seconds
        } else {
            TimeUnit::Micros
        }
    }

    fn to_micros(self, raw: &str) -> Option<i64> {
        if let Ok(v) = raw.parse::<i64>() {
            return match self {
                TimeUnit::Micros => Some(v),
                TimeUnit::Millis => v.checked_mul(1_000),
                TimeUnit::Seconds => v.checked_mul(1_000_000),
                TimeUnit::Nanos => Some((v + 500).div_euclid(1_000)),
            };
        }
        let v: f64 = raw.parse().ok()?;
        let scaled = match self {
            TimeUnit::Micros => v,
            TimeUnit::Millis => v * 1e3,
            TimeUnit::Seconds => v * 1e6,
            TimeUnit::Nanos => v * 1e-3,
        };
        if scaled.is_finite() && scaled.abs() < 9.0e18 {
            Some(scaled.round() as i64)
        } else {
            None
        }
    }
}

fn reader(raw_text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(raw_text.as_bytes())
}

fn record_line(record: &csv::StringRecord, fallback: u64) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(fallback)
}

fn csv_error(err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    Error::parse(line, err.to_string())
}

fn parse_value(raw: &str, line: u64, column: &str) -> Result<f64> {
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::parse(
            line,
            format!("invalid {column} value {raw:?}"),
        )),
    }
}

/// Parses one sensor file into three traces, one per axis.
pub fn parse_sensor_file(raw_text: &str, sensor: SensorKind) -> Result<Vec<SensorTrace>> {
    let mut rdr = reader(raw_text);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    if headers.len() != 1 + AXES {
        return Err(Error::parse(
            1,
            format!(
                "expected {} header columns, found {}",
                1 + AXES,
                headers.len()
            ),
        ));
    }
    let unit = TimeUnit::from_header(&headers[0]);

    let mut timestamps = Vec::new();
    let mut columns: [Vec<f64>; AXES] = Default::default();
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let line = record_line(&record, row as u64 + 2);
        if record.len() != 1 + AXES {
            return Err(Error::parse(
                line,
                format!("expected {} fields, found {}", 1 + AXES, record.len()),
            ));
        }
        let ts = unit
            .to_micros(&record[0])
            .ok_or_else(|| Error::parse(line, format!("invalid timestamp {:?}", &record[0])))?;
        timestamps.push(ts);
        for (axis, column) in columns.iter_mut().enumerate() {
            column.push(parse_value(&record[axis + 1], line, &headers[axis + 1])?);
        }
    }
    if timestamps.is_empty() {
        return Err(Error::NoSamples);
    }
    check_monotonic(timestamps.iter().copied())?;

    Axis::ALL
        .iter()
        .zip(columns)
        .map(|(&axis, values)| {
            let samples = timestamps
                .iter()
                .zip(values)
                .map(|(&timestamp_us, value)| Sample {
                    timestamp_us,
                    value,
                })
                .collect();
            SensorTrace::new(Channel::new(sensor, axis), samples)
        })
        .collect()
}

/// Serializes the three axis traces of one sensor. The traces must share
/// timestamps and be given in x, y, z order.
pub fn write_sensor_file(traces: &[SensorTrace]) -> Result<String> {
    if traces.len() != AXES {
        return Err(Error::Shape(format!(
            "expected {AXES} traces, got {}",
            traces.len()
        )));
    }
    let sensor = traces[0].channel.sensor;
    for (trace, axis) in traces.iter().zip(Axis::ALL) {
        if trace.channel != Channel::new(sensor, axis) {
            return Err(Error::Shape(format!(
                "trace {} out of place in {} file",
                trace.channel,
                sensor.file_stem()
            )));
        }
        if trace.samples.len() != traces[0].samples.len()
            || trace
                .samples
                .iter()
                .zip(&traces[0].samples)
                .any(|(a, b)| a.timestamp_us != b.timestamp_us)
        {
            return Err(Error::Shape(format!(
                "trace {} has different timestamps",
                trace.channel
            )));
        }
    }
    let mut out = String::from("timestamp_us,x,y,z\n");
    for i in 0..traces[0].samples.len() {
        out.push_str(&traces[0].samples[i].timestamp_us.to_string());
        for trace in traces {
            out.push(',');
            // `Display` for f64 is the shortest representation that parses
            // back to the same bits.
            out.push_str(&trace.samples[i].value.to_string());
        }
        out.push('\n');
    }
    Ok(out)
}

/// Parses a label file; the result is sorted by start time (stable).
pub fn parse_event_file(raw_text: &str) -> Result<Vec<EventLabel>> {
    let mut rdr = reader(raw_text);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    if headers.len() != 3 {
        return Err(Error::parse(1, "expected header behavior,start_us,end_us"));
    }
    let mut labels = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let line = record_line(&record, row as u64 + 2);
        if record.len() != 3 {
            return Err(Error::parse(
                line,
                format!("expected 3 fields, found {}", record.len()),
            ));
        }
        let behavior: Behavior = record[0].parse().map_err(|e: Error| match e {
            Error::InvalidLabel(msg) => Error::InvalidLabel(format!("line {line}: {msg}")),
            other => other,
        })?;
        let bound = |i: usize| {
            record[i]
                .parse::<i64>()
                .map_err(|_| Error::parse(line, format!("invalid timestamp {:?}", &record[i])))
        };
        let label = EventLabel::new(behavior, bound(1)?, bound(2)?)
            .map_err(|e| Error::InvalidLabel(format!("line {line}: {e}")))?;
        labels.push(label);
    }
    labels.sort_by_key(|l| l.start_us);
    Ok(labels)
}

pub fn write_event_file(labels: &[EventLabel]) -> String {
    let mut out = String::from("behavior,start_us,end_us\n");
    for l in labels {
        out.push_str(&format!("{},{},{}\n", l.behavior, l.start_us, l.end_us));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSummary {
    pub channel: Channel,
    pub samples: usize,
    pub first_us: i64,
    pub last_us: i64,
    pub median_interval_us: Option<f64>,
    pub native_rate_hz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    /// One entry per channel, in canonical order.
    pub channels: Vec<ChannelSummary>,
    /// From the earliest to the latest sample over all channels.
    pub duration_us: i64,
    pub label_counts: BTreeMap<Behavior, usize>,
}

impl SessionSummary {
    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }
}

impl fmt::Display for SessionSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "channels: {}  duration: {:.3} s",
            self.channels.len(),
            self.duration_us as f64 / 1e6
        )?;
        for c in &self.channels {
            let rate = c
                .native_rate_hz
                .map(|r| format!("{r:.3} Hz"))
                .unwrap_or_else(|| "n/a".into());
            writeln!(
                f,
                "  {:<10} samples={:<8} rate={}",
                c.channel.name(),
                c.samples,
                rate
            )?;
        }
        for (behavior, count) in &self.label_counts {
            writeln!(f, "  events {:<30} {}", behavior.name(), count)?;
        }
        Ok(())
    }
}

fn median(values: &mut [i64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_unstable();
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2] as f64
    } else {
        (values[n / 2 - 1] as f64 + values[n / 2] as f64) / 2.0
    })
}

/// Checks that exactly the twelve canonical channels are present and
/// reports per-channel sampling statistics. Independent of trace order.
pub fn validate_session(traces: &[SensorTrace], labels: &[EventLabel]) -> Result<SessionSummary> {
    let mut by_channel: BTreeMap<Channel, &SensorTrace> = BTreeMap::new();
    for trace in traces {
        if by_channel.insert(trace.channel, trace).is_some() {
            return Err(Error::Session(format!(
                "duplicate channel {}",
                trace.channel
            )));
        }
    }
    let missing: Vec<String> = Channel::ALL
        .iter()
        .filter(|c| !by_channel.contains_key(c))
        .map(|c| c.name())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Session(format!(
            "missing channels: {}",
            missing.join(", ")
        )));
    }

    let channels: Vec<ChannelSummary> = Channel::ALL
        .iter()
        .map(|c| {
            let trace = by_channel[c];
            let mut intervals: Vec<i64> = trace
                .samples
                .windows(2)
                .map(|w| w[1].timestamp_us - w[0].timestamp_us)
                .collect();
            let median_interval_us = median(&mut intervals);
            ChannelSummary {
                channel: *c,
                samples: trace.len(),
                first_us: trace.first_timestamp(),
                last_us: trace.last_timestamp(),
                median_interval_us,
                native_rate_hz: median_interval_us.map(|m| 1e6 / m),
            }
        })
        .collect();
    let first = channels.iter().map(|c| c.first_us).min().unwrap_or(0);
    let last = channels.iter().map(|c| c.last_us).max().unwrap_or(0);
    let mut label_counts = BTreeMap::new();
    for l in labels {
        *label_counts.entry(l.behavior).or_insert(0) += 1;
    }
    Ok(SessionSummary {
        channels,
        duration_us: last - first,
        label_counts,
    })
}

/// A complete recording: twelve traces in canonical channel order plus
/// event labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub name: String,
    pub traces: Vec<SensorTrace>,
    pub labels: Vec<EventLabel>,
}

impl Session {
    /// Validates and reorders `traces` canonically.
    pub fn new(
        name: impl Into<String>,
        mut traces: Vec<SensorTrace>,
        mut labels: Vec<EventLabel>,
    ) -> Result<Self> {
        validate_session(&traces, &labels)?;
        traces.sort_by_key(|t| t.channel);
        labels.sort_by_key(|l| l.start_us);
        Ok(Self {
            name: name.into(),
            traces,
            labels,
        })
    }

    pub fn summary(&self) -> SessionSummary {
        validate_session(&self.traces, &self.labels).expect("session validated on construction")
    }

    pub fn has_aggressive_events(&self) -> bool {
        self.labels.iter().any(|l| l.behavior.is_aggressive())
    }

    pub fn trace(&self, channel: Channel) -> &SensorTrace {
        &self.traces[channel.index()]
    }
}

/// Loads the files of a session directory. A missing sensor file surfaces
/// as missing channels; a missing label file means no events.
pub fn load_session_dir(dir: &Path) -> Result<Session> {
    let mut traces = Vec::with_capacity(NUM_CHANNELS);
    for sensor in SensorKind::ALL {
        let path = dir.join(sensor.file_name());
        if !path.exists() {
            continue;
        }
        let text = fs::read_to_string(&path)?;
        let parsed = parse_sensor_file(&text, sensor).map_err(|e| annotate(e, &path))?;
        traces.extend(parsed);
    }
    let events = dir.join(EVENTS_FILE);
    let labels = if events.exists() {
        parse_event_file(&fs::read_to_string(&events)?).map_err(|e| annotate(e, &events))?
    } else {
        Vec::new()
    };
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    Session::new(name, traces, labels)
}

fn annotate(err: Error, path: &Path) -> Error {
    match err {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        Error::NoSamples => Error::Session(format!("{}: no samples", path.display())),
        Error::NonMonotonic { .. } => Error::Session(format!("{}: {err}", path.display())),
        other => other,
    }
}

pub fn write_session_dir(session: &Session, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (k, sensor) in SensorKind::ALL.iter().enumerate() {
        let text = write_sensor_file(&session.traces[k * AXES..(k + 1) * AXES])?;
        fs::write(dir.join(sensor.file_name()), text)?;
    }
    fs::write(dir.join(EVENTS_FILE), write_event_file(&session.labels))?;
    Ok(())
}

/// Loads every session subdirectory of `dir`, ordered by directory name.
pub fn load_dataset_dir(dir: &Path) -> Result<Vec<Session>> {
    let mut dirs: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    let sessions = dirs
        .iter()
        .map(|d| load_session_dir(d))
        .collect::<Result<Vec<_>>>()?;
    if sessions.is_empty() {
        return Err(Error::Session(format!(
            "no session directories in {}",
            dir.display()
        )));
    }
    Ok(sessions)
}
