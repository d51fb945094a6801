//! Deterministic multi-rate sensor sessions: sum-of-sinusoid baselines,
//! Gaussian noise, and injected aggressive events.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{
    write_session_dir, Behavior, Channel, EventLabel, Sample, SensorKind, SensorTrace, Session,
    NUM_CHANNELS,
};
use crate::pipeline::derive_seed;

const ROUGHNESS_SALT: u64 = 0x005E_ED0F_E7E7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NativeRates {
    pub acceleration: u32,
    pub linear_acceleration: u32,
    pub magnetometer: u32,
    pub gyroscope: u32,
}

impl Default for NativeRates {
    fn default() -> Self {
        Self {
            acceleration: 100,
            linear_acceleration: 25,
            magnetometer: 10,
            gyroscope: 50,
        }
    }
}

impl NativeRates {
    pub fn get(&self, sensor: SensorKind) -> u32 {
        match sensor {
            SensorKind::Acceleration => self.acceleration,
            SensorKind::LinearAcceleration => self.linear_acceleration,
            SensorKind::Magnetometer => self.magnetometer,
            SensorKind::Gyroscope => self.gyroscope,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sinusoid {
    pub amplitude: f64,
    pub frequency_hz: f64,
    /// Radians.
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelBaseline {
    #[serde(default)]
    pub offset: f64,
    #[serde(default)]
    pub components: Vec<Sinusoid>,
}

impl ChannelBaseline {
    /// Value at absolute time `t` in seconds.
    pub fn value(&self, t: f64) -> f64 {
        self.offset
            + self
                .components
                .iter()
                .map(|s| s.amplitude * (2.0 * PI * s.frequency_hz * t + s.phase).sin())
                .sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventShape {
    /// `sin^2(pi u)`: a single bump, as in braking or a turn.
    Pulse,
    /// `sin(2 pi u)`: out and back, as in a lane change.
    Swing,
}

impl EventShape {
    fn at(self, u: f64) -> f64 {
        match self {
            EventShape::Pulse => (PI * u).sin().powi(2),
            EventShape::Swing => (2.0 * PI * u).sin(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthEvent {
    pub behavior: Behavior,
    /// Seconds from session start.
    pub start_s: f64,
    pub duration_s: f64,
    /// Multiplier on the whole perturbation; zero leaves the traces
    /// untouched while keeping the label.
    pub amplitude: f64,
    /// Channel name (`acc_y`, `gyro_z`, ...) to gain.
    pub gains: BTreeMap<String, f64>,
    pub shape: EventShape,
    /// Std of the Gaussian jitter added on top of the profile, relative to
    /// the profile peak.
    #[serde(default)]
    pub roughness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub name: String,
    pub duration_s: f64,
    /// Timestamp of the first sample.
    #[serde(default)]
    pub start_us: i64,
    #[serde(default)]
    pub rates_hz: NativeRates,
    /// One entry per channel in canonical order.
    #[serde(default = "default_baseline")]
    pub baseline: Vec<ChannelBaseline>,
    #[serde(default)]
    pub noise_std: f64,
    #[serde(default)]
    pub events: Vec<SynthEvent>,
    #[serde(default)]
    pub seed: u64,
}

/// A set of specs, as read from and written to a spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSuite {
    pub sessions: Vec<SynthSpec>,
}

impl SynthSuite {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("synth spec: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("suite serializes")
    }
}

fn channel_by_name(name: &str) -> Option<Channel> {
    Channel::ALL.into_iter().find(|c| c.name() == name)
}

fn sin(amplitude: f64, frequency_hz: f64, phase: f64) -> Sinusoid {
    Sinusoid {
        amplitude,
        frequency_hz,
        phase,
    }
}

/// Baseline used when a spec gives none: gravity on acc_z, an earth-field
/// offset on the magnetometer, slow oscillations everywhere.
pub fn default_baseline() -> Vec<ChannelBaseline> {
    let ch = |offset, components| ChannelBaseline { offset, components };
    vec![
        ch(0.0, vec![sin(0.5, 0.21, 0.0), sin(0.2, 0.83, 1.0)]),
        ch(0.0, vec![sin(0.6, 0.17, 0.5), sin(0.15, 0.71, 2.0)]),
        ch(9.81, vec![sin(0.3, 0.29, 1.3), sin(0.1, 1.10, 0.2)]),
        ch(0.0, vec![sin(0.4, 0.23, 0.7), sin(0.1, 0.91, 2.5)]),
        ch(0.0, vec![sin(0.5, 0.19, 1.9), sin(0.1, 0.67, 0.3)]),
        ch(0.0, vec![sin(0.2, 0.31, 2.2), sin(0.05, 1.30, 1.1)]),
        ch(20.0, vec![sin(2.0, 0.05, 0.4), sin(0.5, 0.13, 1.7)]),
        ch(-15.0, vec![sin(1.5, 0.07, 2.9), sin(0.4, 0.11, 0.6)]),
        ch(40.0, vec![sin(1.0, 0.09, 1.2), sin(0.3, 0.15, 2.4)]),
        ch(0.0, vec![sin(0.15, 0.37, 0.9), sin(0.05, 1.20, 0.1)]),
        ch(0.0, vec![sin(0.12, 0.41, 1.6), sin(0.04, 0.97, 2.8)]),
        ch(0.0, vec![sin(0.2, 0.27, 0.2), sin(0.05, 0.89, 1.4)]),
    ]
}

impl SynthSpec {
    /// A pure-baseline spec with default rates and no events.
    pub fn normal(name: impl Into<String>, duration_s: f64, seed: u64) -> Self {
        Self {
            name: name.into(),
            duration_s,
            start_us: 0,
            rates_hz: NativeRates::default(),
            baseline: default_baseline(),
            noise_std: 0.0,
            events: Vec::new(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("synth spec {:?}: {msg}", self.name)));
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return bad(format!("duration {} must be positive", self.duration_s));
        }
        for sensor in SensorKind::ALL {
            let rate = self.rates_hz.get(sensor);
            if rate == 0 || 1_000_000 % rate != 0 {
                return bad(format!(
                    "{} rate {rate} Hz must divide 1e6",
                    sensor.file_stem()
                ));
            }
        }
        if self.baseline.len() != NUM_CHANNELS {
            return bad(format!(
                "baseline has {} channels, expected {NUM_CHANNELS}",
                self.baseline.len()
            ));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return bad(format!("noise_std {} must be non-negative", self.noise_std));
        }
        for (k, e) in self.events.iter().enumerate() {
            if !e.behavior.is_aggressive() {
                return bad(format!(
                    "event {k}: {} is not an aggressive behavior",
                    e.behavior
                ));
            }
            if !(e.start_s >= 0.0
                && e.duration_s > 0.0
                && e.start_s + e.duration_s <= self.duration_s)
            {
                return bad(format!(
                    "event {k}: [{}, {}) s outside [0, {}] s",
                    e.start_s,
                    e.start_s + e.duration_s,
                    self.duration_s
                ));
            }
            if !(e.amplitude.is_finite() && e.amplitude >= 0.0)
                || !(e.roughness.is_finite() && e.roughness >= 0.0)
            {
                return bad(format!(
                    "event {k}: amplitude and roughness must be non-negative"
                ));
            }
            if let Some(name) = e.gains.keys().find(|n| channel_by_name(n).is_none()) {
                return bad(format!("event {k}: unknown channel {name:?}"));
            }
        }
        Ok(())
    }

    fn event_label(&self, e: &SynthEvent) -> Result<EventLabel> {
        let start = self.start_us + (e.start_s * 1e6).round() as i64;
        let end = self.start_us + ((e.start_s + e.duration_s) * 1e6).round() as i64;
        EventLabel::new(e.behavior, start, end)
    }
}

/// Generates traces at their native rates plus one label per event.
pub fn generate(spec: &SynthSpec) -> Result<Session> {
    spec.validate()?;
    let duration_us = (spec.duration_s * 1e6).round() as i64;
    let labels = spec
        .events
        .iter()
        .map(|e| spec.event_label(e))
        .collect::<Result<Vec<_>>>()?;
    let gains: Vec<[f64; NUM_CHANNELS]> = spec
        .events
        .iter()
        .map(|e| {
            let mut g = [0.0; NUM_CHANNELS];
            for (name, &gain) in &e.gains {
                g[channel_by_name(name).unwrap().index()] = gain;
            }
            g
        })
        .collect();

    let mut traces = Vec::with_capacity(NUM_CHANNELS);
    for channel in Channel::ALL {
        let ci = channel.index();
        let period = 1_000_000 / spec.rates_hz.get(channel.sensor) as i64;
        let n = ((duration_us + period - 1) / period) as usize;
        let base = &spec.baseline[ci];
        let mut noise = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, ci as u64));
        // One jitter stream per (event, channel), so events never shift the
        // baseline noise.
        let mut jitter: Vec<ChaCha8Rng> = (0..spec.events.len())
            .map(|e| {
                ChaCha8Rng::seed_from_u64(derive_seed(
                    spec.seed ^ ROUGHNESS_SALT,
                    (e * NUM_CHANNELS + ci) as u64,
                ))
            })
            .collect();
        let mut samples = Vec::with_capacity(n);
        for k in 0..n {
            let ts = spec.start_us + k as i64 * period;
            let mut value = base.value(ts as f64 / 1e6);
            if spec.noise_std > 0.0 {
                let z: f64 = noise.sample(StandardNormal);
                value += spec.noise_std * z;
            }
            for (e, event) in spec.events.iter().enumerate() {
                let gain = gains[e][ci];
                let label = &labels[e];
                if gain == 0.0 || !label.contains(ts) {
                    continue;
                }
                let u = (ts - label.start_us) as f64 / (label.end_us - label.start_us) as f64;
                let z: f64 = jitter[e].sample(StandardNormal);
                value += event.amplitude * gain * (event.shape.at(u) + event.roughness * z);
            }
            samples.push(Sample {
                timestamp_us: ts,
                value,
            });
        }
        traces.push(SensorTrace::new(channel, samples)?);
    }
    Session::new(spec.name.clone(), traces, labels)
}

pub fn generate_suite(specs: &[SynthSpec]) -> Result<Vec<Session>> {
    specs.iter().map(generate).collect()
}

/// Writes each session into `dir/<name>/`.
pub fn write_suite(sessions: &[Session], dir: &Path) -> Result<()> {
    for s in sessions {
        write_session_dir(s, &dir.join(&s.name))?;
    }
    Ok(())
}

/// Noise std of every standard-suite session.
pub const SUITE_NOISE_STD: f64 = 0.03;
/// Event onsets (seconds) in each single-class suite session.
pub const SUITE_EVENT_STARTS: [f64; 5] = [6.0, 17.0, 28.0, 39.0, 50.0];
pub const SUITE_EVENT_DURATION_S: f64 = 3.0;

/// Perturbation profile of one aggressive class in the standard suite:
/// shape, amplitude, roughness, and channel gains.
pub fn class_profile(behavior: Behavior) -> (EventShape, f64, f64, Vec<(&'static str, f64)>) {
    match behavior {
        Behavior::AggrBrake => (
            EventShape::Pulse,
            3.0,
            0.3,
            vec![("acc_y", -1.0), ("linacc_y", -1.0), ("gyro_x", -0.2)],
        ),
        Behavior::AggrAcceleration => (
            EventShape::Pulse,
            0.6,
            0.3,
            vec![("acc_y", 1.0), ("linacc_y", 1.0)],
        ),
        Behavior::AggrLeftTurn => (
            EventShape::Pulse,
            3.0,
            0.3,
            vec![
                ("gyro_z", 1.0),
                ("acc_x", 0.8),
                ("linacc_x", 0.8),
                ("mag_x", 0.5),
            ],
        ),
        Behavior::AggrRightTurn => (
            EventShape::Pulse,
            3.0,
            0.3,
            vec![
                ("gyro_z", -1.0),
                ("acc_x", -0.8),
                ("linacc_x", -0.8),
                ("mag_x", -0.5),
            ],
        ),
        Behavior::AggrLaneChangeLeft => (
            EventShape::Swing,
            2.5,
            0.3,
            vec![("gyro_z", 1.0), ("acc_x", 0.6), ("linacc_x", 0.6)],
        ),
        Behavior::AggrLaneChangeRight => (
            EventShape::Swing,
            2.5,
            0.3,
            vec![("gyro_z", -1.0), ("acc_x", -0.6), ("linacc_x", -0.6)],
        ),
        Behavior::Normal => (EventShape::Pulse, 0.0, 0.0, Vec::new()),
    }
}

fn class_event(behavior: Behavior, start_s: f64, amplitude_scale: f64) -> SynthEvent {
    let (shape, amplitude, roughness, gains) = class_profile(behavior);
    SynthEvent {
        behavior,
        start_s,
        duration_s: SUITE_EVENT_DURATION_S,
        amplitude: amplitude * amplitude_scale,
        gains: gains.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        shape,
        roughness,
    }
}

/// The canonical suite: a 90 s normal session, then one 60 s session per
/// aggressive class holding five 3 s events. Sessions start 100 s apart
/// so their baselines differ in phase.
pub fn standard_suite(seed: u64) -> Vec<SynthSpec> {
    let mut specs = vec![SynthSpec {
        noise_std: SUITE_NOISE_STD,
        ..SynthSpec::normal("normal", 90.0, derive_seed(seed, 0))
    }];
    for (k, behavior) in Behavior::AGGRESSIVE.into_iter().enumerate() {
        specs.push(SynthSpec {
            start_us: (k as i64 + 1) * 100_000_000,
            noise_std: SUITE_NOISE_STD,
            events: SUITE_EVENT_STARTS
                .iter()
                .map(|&s| class_event(behavior, s, 1.0))
                .collect(),
            ..SynthSpec::normal(behavior.name(), 60.0, derive_seed(seed, k as u64 + 1))
        });
    }
    specs
}

/// A 90 s session whose twelve labeled events (two per class) carry zero
/// amplitude: labels without any signal change.
pub fn null_spec(seed: u64) -> SynthSpec {
    let events = (0..12)
        .map(|k| class_event(Behavior::AGGRESSIVE[k % 6], 5.0 + 7.0 * k as f64, 0.0))
        .collect();
    SynthSpec {
        start_us: 1_000_000_000,
        noise_std: SUITE_NOISE_STD,
        events,
        ..SynthSpec::normal("null", 90.0, derive_seed(seed, 99))
    }
}
