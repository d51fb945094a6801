//! Multi-rate traces to a uniform frame grid, MinMax scaling, and window
//! slicing.

use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::digest::sha256_hex;
use crate::error::{Error, Result};
use crate::ingest::{Behavior, Channel, EventLabel, SensorTrace, Session, NUM_CHANNELS};
use crate::scalar::Scalar;

/// Frame rate of the uniform grid.
pub const TARGET_RATE_HZ: u32 = 50;

/// One feature vector on the uniform grid.
pub type Frame<T> = [T; NUM_CHANNELS];

/// Width of one grid bin in microseconds. The rate must divide one second.
pub fn bin_width_us(rate_hz: u32) -> Result<i64> {
    if rate_hz == 0 || 1_000_000 % rate_hz != 0 {
        return Err(Error::Config(format!(
            "frame rate {rate_hz} Hz does not divide one second in microseconds"
        )));
    }
    Ok(1_000_000 / rate_hz as i64)
}

/// Half-open time interval `[start_us, end_us)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub start_us: i64,
    pub end_us: i64,
}

impl Span {
    pub fn bins(&self, bin_us: i64) -> usize {
        if self.end_us <= self.start_us {
            0
        } else {
            ((self.end_us - self.start_us) / bin_us) as usize
        }
    }
}

/// Common span of a session's channels: from the latest first sample to one
/// bin past the earliest last sample, so a bin-aligned channel keeps its
/// final sample.
pub fn session_span(traces: &[SensorTrace], rate_hz: u32) -> Result<Span> {
    let bin = bin_width_us(rate_hz)?;
    let start_us = traces
        .iter()
        .map(SensorTrace::first_timestamp)
        .max()
        .ok_or(Error::NoSamples)?;
    let end_us = traces
        .iter()
        .map(SensorTrace::last_timestamp)
        .min()
        .ok_or(Error::NoSamples)?
        + bin;
    Ok(Span { start_us, end_us })
}

/// Resamples one trace onto the bins of `span`.
///
/// A bin holding at least one native sample takes its first sample; an
/// empty bin repeats the latest sample before it (zero-order hold).
pub fn resample_channel(trace: &SensorTrace, rate_hz: u32, span: Span) -> Result<Vec<f64>> {
    let bin = bin_width_us(rate_hz)?;
    if span.start_us < trace.first_timestamp() {
        return Err(Error::Session(format!(
            "{}: span starts at {} before first sample at {}; no value to hold",
            trace.channel(),
            span.start_us,
            trace.first_timestamp()
        )));
    }
    let samples = trace.samples();
    let n = span.bins(bin);
    let mut out = Vec::with_capacity(n);
    // Number of samples strictly before the current bin.
    let mut before = 0usize;
    for k in 0..n {
        let lo = span.start_us + k as i64 * bin;
        let hi = lo + bin;
        while before < samples.len() && samples[before].timestamp_us < lo {
            before += 1;
        }
        let value = if before < samples.len() && samples[before].timestamp_us < hi {
            samples[before].value
        } else {
            samples[before - 1].value
        };
        out.push(value);
    }
    Ok(out)
}

/// Uniform frame matrix with per-frame behavior labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSeries<T> {
    start_us: i64,
    rate_hz: u32,
    frames: Vec<Frame<T>>,
    labels: Vec<Behavior>,
}

impl<T: Scalar> FrameSeries<T> {
    pub fn new(
        start_us: i64,
        rate_hz: u32,
        frames: Vec<Frame<T>>,
        labels: Vec<Behavior>,
    ) -> Result<Self> {
        bin_width_us(rate_hz)?;
        if frames.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} frames but {} frame labels",
                frames.len(),
                labels.len()
            )));
        }
        Ok(Self {
            start_us,
            rate_hz,
            frames,
            labels,
        })
    }

    pub fn start_us(&self) -> i64 {
        self.start_us
    }

    pub fn rate_hz(&self) -> u32 {
        self.rate_hz
    }

    pub fn frames(&self) -> &[Frame<T>] {
        &self.frames
    }

    pub fn labels(&self) -> &[Behavior] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn timestamp_us(&self, index: usize) -> i64 {
        self.start_us + index as i64 * (1_000_000 / self.rate_hz as i64)
    }

    pub fn label_counts(&self) -> [usize; 7] {
        let mut counts = [0; 7];
        for l in &self.labels {
            counts[behavior_index(*l)] += 1;
        }
        counts
    }

    /// Copy restricted to the frame range.
    pub fn slice(&self, range: Range<usize>) -> Self {
        Self {
            start_us: self.timestamp_us(range.start),
            rate_hz: self.rate_hz,
            frames: self.frames[range.clone()].to_vec(),
            labels: self.labels[range].to_vec(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> FrameSeries<U> {
        FrameSeries {
            start_us: self.start_us,
            rate_hz: self.rate_hz,
            frames: self
                .frames
                .iter()
                .map(|f| f.map(|v| U::from_f64_lossy(v.to_f64_lossy())))
                .collect(),
            labels: self.labels.clone(),
        }
    }
}

fn behavior_index(b: Behavior) -> usize {
    Behavior::ALL.iter().position(|&x| x == b).unwrap()
}

fn div_ceil(a: i64, b: i64) -> i64 {
    -((-a).div_euclid(b))
}

/// Stacks twelve resampled channels (canonical order) into frames and
/// labels each frame from the event intervals.
///
/// A frame takes the behavior of the interval containing its timestamp,
/// Normal otherwise. Aggressive intervals take precedence over Normal
/// ones; among overlapping intervals of the same kind the later-starting
/// one wins.
pub fn assemble_frames(
    start_us: i64,
    rate_hz: u32,
    channels: &[Vec<f64>],
    labels: &[EventLabel],
) -> Result<FrameSeries<f64>> {
    let bin = bin_width_us(rate_hz)?;
    if channels.len() != NUM_CHANNELS {
        return Err(Error::Shape(format!(
            "expected {NUM_CHANNELS} channels, got {}",
            channels.len()
        )));
    }
    let n = channels[0].len();
    if let Some((i, c)) = channels.iter().enumerate().find(|(_, c)| c.len() != n) {
        return Err(Error::Shape(format!(
            "channel {} has {} values, expected {n}",
            Channel::ALL[i],
            c.len()
        )));
    }
    let frames: Vec<Frame<f64>> = (0..n)
        .map(|i| std::array::from_fn(|j| channels[j][i]))
        .collect();

    let mut ordered: Vec<&EventLabel> = labels.iter().collect();
    // Stable: equal starts keep file order, so the later row wins.
    ordered.sort_by_key(|l| (l.behavior.is_aggressive(), l.start_us));
    let mut frame_labels = vec![Behavior::Normal; n];
    for label in ordered {
        let lo = div_ceil(label.start_us - start_us, bin).clamp(0, n as i64) as usize;
        let hi = div_ceil(label.end_us - start_us, bin).clamp(0, n as i64) as usize;
        for slot in &mut frame_labels[lo..hi] {
            *slot = label.behavior;
        }
    }
    FrameSeries::new(start_us, rate_hz, frames, frame_labels)
}

/// Resamples all channels of a session to `rate_hz` and assembles frames.
pub fn frames_from_session(session: &Session, rate_hz: u32) -> Result<FrameSeries<f64>> {
    let span = session_span(&session.traces, rate_hz)?;
    let channels = Channel::ALL
        .iter()
        .map(|&c| resample_channel(session.trace(c), rate_hz, span))
        .collect::<Result<Vec<_>>>()?;
    assemble_frames(span.start_us, rate_hz, &channels, &session.labels)
}

/// Per-feature extrema of the Normal frames a scaler was fitted on.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalerParams<T> {
    pub min: Frame<T>,
    pub max: Frame<T>,
    /// Number of Normal frames used in the fit.
    pub fit_frames: usize,
    /// Hash of the fitted frame values.
    pub fit_hash: String,
}

impl<T: Scalar> ScalerParams<T> {
    /// Fits on the Normal frames of `frames`; other labels are skipped.
    pub fn fit<'a, I>(frames: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a Frame<T>, Behavior)>,
    {
        let mut min = [T::infinity(); NUM_CHANNELS];
        let mut max = [T::neg_infinity(); NUM_CHANNELS];
        let mut count = 0usize;
        let mut bytes = Vec::new();
        for (frame, label) in frames {
            if label != Behavior::Normal {
                continue;
            }
            for (j, &v) in frame.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::Numeric(format!(
                        "non-finite value in feature {}",
                        Channel::ALL[j]
                    )));
                }
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
                v.write_le(&mut bytes);
            }
            count += 1;
        }
        if count < 2 {
            return Err(Error::Session(format!(
                "scaler needs at least 2 normal frames, found {count}"
            )));
        }
        Ok(Self {
            min,
            max,
            fit_frames: count,
            fit_hash: sha256_hex(&bytes),
        })
    }

    /// True for a feature that was constant over the fit.
    pub fn is_degenerate(&self, feature: usize) -> bool {
        self.min[feature] == self.max[feature]
    }

    pub fn degenerate_features(&self) -> Vec<Channel> {
        (0..NUM_CHANNELS)
            .filter(|&j| self.is_degenerate(j))
            .map(|j| Channel::ALL[j])
            .collect()
    }

    /// `(x - min) / (max - min)`, unclamped; degenerate features map to 0.
    pub fn scale_frame(&self, frame: &Frame<T>) -> Frame<T> {
        std::array::from_fn(|j| {
            if self.is_degenerate(j) {
                T::zero()
            } else {
                (frame[j] - self.min[j]) / (self.max[j] - self.min[j])
            }
        })
    }

    /// Inverse affine map; degenerate features map back to their constant.
    pub fn unscale_frame(&self, frame: &Frame<T>) -> Frame<T> {
        std::array::from_fn(|j| frame[j] * (self.max[j] - self.min[j]) + self.min[j])
    }

    /// Key-value text artifact, reloadable with [`ScalerParams::from_artifact`].
    pub fn to_artifact(&self) -> String {
        let artifact = ScalerArtifact {
            format: SCALER_FORMAT.to_string(),
            dtype: T::DTYPE.to_string(),
            channels: Channel::ALL.iter().map(|c| c.name()).collect(),
            fit_frames: self.fit_frames,
            fit_hash: self.fit_hash.clone(),
            min: self.min.iter().map(|v| v.to_f64_lossy()).collect(),
            max: self.max.iter().map(|v| v.to_f64_lossy()).collect(),
        };
        toml::to_string(&artifact).expect("scaler artifact serializes")
    }

    pub fn from_artifact(text: &str) -> Result<Self> {
        let artifact: ScalerArtifact =
            toml::from_str(text).map_err(|e| Error::Artifact(format!("scaler: {e}")))?;
        if artifact.format != SCALER_FORMAT {
            return Err(Error::Artifact(format!(
                "unknown scaler format {:?}",
                artifact.format
            )));
        }
        let expected: Vec<String> = Channel::ALL.iter().map(|c| c.name()).collect();
        if artifact.channels != expected {
            return Err(Error::Artifact(
                "scaler channel order differs from canonical order".into(),
            ));
        }
        let read = |v: &[f64], what: &str| -> Result<Frame<T>> {
            if v.len() != NUM_CHANNELS {
                return Err(Error::Artifact(format!(
                    "scaler {what} has {} entries",
                    v.len()
                )));
            }
            Ok(std::array::from_fn(|j| T::from_f64_lossy(v[j])))
        };
        let params = Self {
            min: read(&artifact.min, "min")?,
            max: read(&artifact.max, "max")?,
            fit_frames: artifact.fit_frames,
            fit_hash: artifact.fit_hash,
        };
        if (0..NUM_CHANNELS).any(|j| !(params.min[j] <= params.max[j])) {
            return Err(Error::Artifact("scaler min exceeds max".into()));
        }
        Ok(params)
    }

    /// Hash of the artifact text; identifies the scaler in run manifests.
    pub fn artifact_hash(&self) -> String {
        sha256_hex(self.to_artifact().as_bytes())
    }
}

const SCALER_FORMAT: &str = "driveprof-scaler/1";

#[derive(Serialize, Deserialize)]
struct ScalerArtifact {
    format: String,
    dtype: String,
    channels: Vec<String>,
    fit_frames: usize,
    fit_hash: String,
    min: Vec<f64>,
    max: Vec<f64>,
}

/// Fits a scaler on the Normal frames of `series`.
pub fn fit_scaler<T: Scalar>(series: &FrameSeries<T>) -> Result<ScalerParams<T>> {
    ScalerParams::fit(series.frames.iter().zip(series.labels.iter().copied()))
}

pub fn apply_scaler<T: Scalar>(
    series: &FrameSeries<T>,
    params: &ScalerParams<T>,
) -> FrameSeries<T> {
    FrameSeries {
        start_us: series.start_us,
        rate_hz: series.rate_hz,
        frames: series
            .frames
            .iter()
            .map(|f| params.scale_frame(f))
            .collect(),
        labels: series.labels.clone(),
    }
}

/// How a window's label is derived from its frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowLabeling {
    /// Label of the target frame; windows may span event boundaries.
    #[default]
    Target,
    /// Keep only windows whose input and target frames share one label.
    Strict,
}

/// An input sequence of `window` frames and the frame right after it.
///
/// Pairs cut from one series share its frame buffer.
#[derive(Debug, Clone)]
pub struct WindowPair<T> {
    frames: Arc<[Frame<T>]>,
    start: usize,
    window: usize,
    label: Behavior,
    origin: usize,
    session: usize,
}

impl<T: Scalar> WindowPair<T> {
    /// Standalone pair owning its frames.
    pub fn from_parts(
        input: Vec<Frame<T>>,
        target: Frame<T>,
        label: Behavior,
        origin: usize,
    ) -> Result<Self> {
        if input.is_empty() {
            return Err(Error::Shape("window input is empty".into()));
        }
        let window = input.len();
        let mut frames = input;
        frames.push(target);
        Ok(Self {
            frames: frames.into(),
            start: 0,
            window,
            label,
            origin,
            session: 0,
        })
    }

    pub fn input(&self) -> &[Frame<T>] {
        &self.frames[self.start..self.start + self.window]
    }

    pub fn target(&self) -> &Frame<T> {
        &self.frames[self.start + self.window]
    }

    pub fn label(&self) -> Behavior {
        self.label
    }

    /// Frame index of the target within its series.
    pub fn origin(&self) -> usize {
        self.origin
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Index of the session the pair was cut from (0 when standalone).
    pub fn session(&self) -> usize {
        self.session
    }

    pub fn with_session(mut self, session: usize) -> Self {
        self.session = session;
        self
    }

    pub fn with_label(mut self, label: Behavior) -> Self {
        self.label = label;
        self
    }

    /// Copy with a different target frame.
    pub fn with_target(&self, target: Frame<T>) -> Self {
        let mut frames = self.input().to_vec();
        frames.push(target);
        Self {
            frames: frames.into(),
            start: 0,
            window: self.window,
            label: self.label,
            origin: self.origin,
            session: self.session,
        }
    }
}

/// Stride-1 windows labeled by their target frame.
pub fn slide_windows<T: Scalar>(
    series: &FrameSeries<T>,
    window: usize,
) -> Result<Vec<WindowPair<T>>> {
    slide_windows_with(series, window, WindowLabeling::Target)
}

pub fn slide_windows_with<T: Scalar>(
    series: &FrameSeries<T>,
    window: usize,
    labeling: WindowLabeling,
) -> Result<Vec<WindowPair<T>>> {
    slide_range(series, window, labeling, 0..series.len())
}

/// Windows whose frames all lie in `range`. Origins are series indices.
pub fn slide_range<T: Scalar>(
    series: &FrameSeries<T>,
    window: usize,
    labeling: WindowLabeling,
    range: Range<usize>,
) -> Result<Vec<WindowPair<T>>> {
    if window == 0 {
        return Err(Error::Config("window size must be positive".into()));
    }
    let n = series.len();
    if n <= window {
        return Err(Error::Shape(format!(
            "series shorter than window: {n} frames, window {window}"
        )));
    }
    let range = range.start.min(n)..range.end.min(n);
    let frames: Arc<[Frame<T>]> = series.frames.clone().into();
    // run[i]: length of the constant-label run ending at frame i.
    let mut run = vec![1usize; n];
    for i in 1..n {
        if series.labels[i] == series.labels[i - 1] {
            run[i] = run[i - 1] + 1;
        }
    }
    let mut pairs = Vec::with_capacity(range.len().saturating_sub(window));
    for start in range.start..range.end.saturating_sub(window) {
        let origin = start + window;
        if labeling == WindowLabeling::Strict && run[origin] < window + 1 {
            continue;
        }
        pairs.push(WindowPair {
            frames: frames.clone(),
            start,
            window,
            label: series.labels[origin],
            origin,
            session: 0,
        });
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{Axis, Sample, SensorKind};

    fn trace(interval_us: i64, values: &[f64]) -> SensorTrace {
        let samples = values
            .iter()
            .enumerate()
            .map(|(i, &value)| Sample {
                timestamp_us: i as i64 * interval_us,
                value,
            })
            .collect();
        SensorTrace::new(Channel::new(SensorKind::Acceleration, Axis::X), samples).unwrap()
    }

    fn ramp_series(n: usize, labels: Vec<Behavior>) -> FrameSeries<f64> {
        let frames = (0..n)
            .map(|i| std::array::from_fn(|j| (i * 12 + j) as f64))
            .collect();
        FrameSeries::new(0, TARGET_RATE_HZ, frames, labels).unwrap()
    }

    #[test]
    fn downsample_takes_first_sample_per_bin() {
        let values: Vec<f64> = (0..10).map(|v| v as f64).collect();
        let t = trace(10_000, &values);
        let span = Span {
            start_us: 0,
            end_us: 100_000,
        };
        assert_eq!(
            resample_channel(&t, 50, span).unwrap(),
            vec![0.0, 2.0, 4.0, 6.0, 8.0]
        );
    }

    #[test]
    fn upsample_holds_each_value_five_bins() {
        let t = trace(100_000, &[1.0, 2.0, 3.0]);
        let span = Span {
            start_us: 0,
            end_us: 300_000,
        };
        let out = resample_channel(&t, 50, span).unwrap();
        assert_eq!(out.len(), 15);
        for (k, v) in out.iter().enumerate() {
            assert_eq!(*v, (k / 5 + 1) as f64);
        }
    }

    #[test]
    fn aligned_input_is_unchanged() {
        let values = [0.5, -1.0, 2.25, 7.0];
        let t = trace(20_000, &values);
        let span = session_span(std::slice::from_ref(&t), 50).unwrap();
        assert_eq!(resample_channel(&t, 50, span).unwrap(), values.to_vec());
    }

    #[test]
    fn span_before_first_sample_is_rejected() {
        let t = trace(20_000, &[1.0, 2.0]);
        let span = Span {
            start_us: -1,
            end_us: 40_000,
        };
        assert!(resample_channel(&t, 50, span).is_err());
    }

    #[test]
    fn unsupported_rate_is_rejected() {
        assert!(bin_width_us(7).is_err());
        assert_eq!(bin_width_us(50).unwrap(), 20_000);
    }

    #[test]
    fn assemble_shape_and_default_labels() {
        let channels = vec![vec![0.0; 100]; 12];
        let series = assemble_frames(0, 50, &channels, &[]).unwrap();
        assert_eq!(series.len(), 100);
        assert!(series.labels().iter().all(|&l| l == Behavior::Normal));
    }

    #[test]
    fn assemble_rejects_length_mismatch() {
        let mut channels = vec![vec![0.0; 10]; 12];
        channels[5].pop();
        assert!(matches!(
            assemble_frames(0, 50, &channels, &[]),
            Err(Error::Shape(_))
        ));
        assert!(assemble_frames(0, 50, &channels[..11], &[]).is_err());
    }

    #[test]
    fn event_covering_ten_bins_labels_ten_frames() {
        let channels = vec![vec![0.0; 40]; 12];
        let start = 1_000_000;
        let label = EventLabel::new(
            Behavior::AggrBrake,
            start + 10 * 20_000,
            start + 20 * 20_000,
        )
        .unwrap();
        let series = assemble_frames(start, 50, &channels, &[label]).unwrap();
        let labeled: Vec<usize> = (0..40)
            .filter(|&i| series.labels()[i] == Behavior::AggrBrake)
            .collect();
        assert_eq!(labeled, (10..20).collect::<Vec<_>>());
    }

    #[test]
    fn later_event_wins_on_overlap() {
        let channels = vec![vec![0.0; 20]; 12];
        let a = EventLabel::new(Behavior::AggrBrake, 0, 10 * 20_000).unwrap();
        let b = EventLabel::new(Behavior::AggrLeftTurn, 5 * 20_000, 15 * 20_000).unwrap();
        let n = EventLabel::new(Behavior::Normal, 0, 20 * 20_000).unwrap();
        let series = assemble_frames(0, 50, &channels, &[b, n, a]).unwrap();
        assert_eq!(series.labels()[4], Behavior::AggrBrake);
        assert_eq!(series.labels()[5], Behavior::AggrLeftTurn);
        assert_eq!(series.labels()[14], Behavior::AggrLeftTurn);
        assert_eq!(series.labels()[15], Behavior::Normal);
    }

    #[test]
    fn scaler_extrema() {
        let frames: Vec<Frame<f64>> = [2.0, 6.0, 10.0].iter().map(|&v| [v; 12]).collect();
        let series = FrameSeries::new(0, 50, frames, vec![Behavior::Normal; 3]).unwrap();
        let p = fit_scaler(&series).unwrap();
        assert_eq!(p.min[0], 2.0);
        assert_eq!(p.max[0], 10.0);
        assert!(p.degenerate_features().is_empty());
        assert_eq!(p.fit_frames, 3);
    }

    #[test]
    fn constant_column_is_degenerate() {
        let frames: Vec<Frame<f64>> = (0..3)
            .map(|i| {
                let mut f = [i as f64; 12];
                f[4] = 5.0;
                f
            })
            .collect();
        let series = FrameSeries::new(0, 50, frames, vec![Behavior::Normal; 3]).unwrap();
        let p = fit_scaler(&series).unwrap();
        assert_eq!(p.degenerate_features(), vec![Channel::ALL[4]]);
        let scaled = apply_scaler(&series, &p);
        assert!(scaled.frames().iter().all(|f| f[4] == 0.0));
    }

    #[test]
    fn aggressive_outlier_excluded_from_fit() {
        let mut frames: Vec<Frame<f64>> = (0..10).map(|i| [i as f64; 12]).collect();
        frames[5] = [1e6; 12];
        frames[6] = [-1e6; 12];
        let mut labels = vec![Behavior::Normal; 10];
        labels[5] = Behavior::AggrAcceleration;
        labels[6] = Behavior::AggrBrake;
        let series = FrameSeries::new(0, 50, frames, labels).unwrap();
        let p = fit_scaler(&series).unwrap();
        assert_eq!(p.min, [0.0; 12]);
        assert_eq!(p.max, [9.0; 12]);
        assert_eq!(p.fit_frames, 8);
    }

    #[test]
    fn scaler_needs_two_normal_frames() {
        let series = FrameSeries::new(
            0,
            50,
            vec![[1.0; 12]; 2],
            vec![Behavior::Normal, Behavior::AggrBrake],
        )
        .unwrap();
        assert!(fit_scaler(&series).is_err());
    }

    #[test]
    fn scaling_endpoints_midpoint_and_outlier() {
        let p = ScalerParams::<f64> {
            min: [2.0; 12],
            max: [10.0; 12],
            fit_frames: 2,
            fit_hash: String::new(),
        };
        assert_eq!(p.scale_frame(&[2.0; 12])[0], 0.0);
        assert_eq!(p.scale_frame(&[10.0; 12])[0], 1.0);
        assert_eq!(p.scale_frame(&[6.0; 12])[0], 0.5);
        assert_eq!(p.scale_frame(&[14.0; 12])[0], 1.5);
    }

    #[test]
    fn scaler_artifact_roundtrip() {
        let series = ramp_series(5, vec![Behavior::Normal; 5]);
        let p = fit_scaler(&series).unwrap();
        let text = p.to_artifact();
        assert!(text.contains("acc_x"));
        let back = ScalerParams::<f64>::from_artifact(&text).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.artifact_hash(), p.artifact_hash());
        assert!(ScalerParams::<f64>::from_artifact("format = \"other\"").is_err());
    }

    #[test]
    fn window_counts_and_shapes() {
        let series = ramp_series(100, vec![Behavior::Normal; 100]);
        let pairs = slide_windows(&series, 25).unwrap();
        assert_eq!(pairs.len(), 75);
        assert_eq!(pairs[0].input().len(), 25);
        assert_eq!(pairs[0].input()[0].len(), 12);
        assert_eq!(pairs[0].target().len(), 12);
        assert_eq!(pairs[3].origin(), 28);
        assert_eq!(pairs[3].target(), &series.frames()[28]);
        assert_eq!(pairs[3].input()[0], series.frames()[3]);
    }

    #[test]
    fn single_pair_when_one_frame_longer_than_window() {
        let series = ramp_series(26, vec![Behavior::Normal; 26]);
        let pairs = slide_windows(&series, 25).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].origin(), 25);
    }

    #[test]
    fn short_series_rejected() {
        let series = ramp_series(25, vec![Behavior::Normal; 25]);
        let err = slide_windows(&series, 25).unwrap_err();
        assert!(err.to_string().contains("series shorter than window"));
    }

    #[test]
    fn window_label_follows_target_and_strict_drops_mixed() {
        let mut labels = vec![Behavior::Normal; 20];
        for l in &mut labels[10..15] {
            *l = Behavior::AggrBrake;
        }
        let series = ramp_series(20, labels);
        let pairs = slide_windows(&series, 3).unwrap();
        let brake: Vec<usize> = pairs
            .iter()
            .filter(|p| p.label() == Behavior::AggrBrake)
            .map(|p| p.origin())
            .collect();
        assert_eq!(brake, vec![10, 11, 12, 13, 14]);

        let strict = slide_windows_with(&series, 3, WindowLabeling::Strict).unwrap();
        let origins: Vec<usize> = strict.iter().map(|p| p.origin()).collect();
        // Normal runs 0..10 and 15..20, brake run 10..15.
        assert_eq!(origins, vec![3, 4, 5, 6, 7, 8, 9, 13, 14, 18, 19]);
    }
}
