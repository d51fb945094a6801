//! Training on normal-only windows and residual scoring.

use std::fmt;

use log::{debug, info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Behavior;
use crate::model::{LstmModel, ModelShape};
use crate::optim::{
    adam_step, add_regularization_gradient, clip_gradients, mse_loss, AdamState, OptimConfig,
};
use crate::preprocess::{
    apply_scaler, slide_windows_with, FrameSeries, ScalerParams, WindowLabeling, WindowPair,
};
use crate::scalar::Scalar;

/// Everything that determines one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub window_size: usize,
    pub hidden_size: usize,
    pub num_layers: usize,
    /// Optional tanh dense layer before the output layer.
    pub head_hidden: Option<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Leading share of the normal windows used for training; the rest is
    /// held out as the normal class for evaluation.
    pub train_fraction: f64,
    pub shuffle: bool,
    /// Labeling of evaluation windows.
    pub labeling: WindowLabeling,
    pub optimizer: OptimConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            window_size: 50,
            hidden_size: 64,
            num_layers: 2,
            head_hidden: None,
            epochs: 30,
            batch_size: 64,
            seed: 0,
            train_fraction: 0.7,
            shuffle: true,
            labeling: WindowLabeling::Target,
            optimizer: OptimConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_size == 0 {
            return Err(Error::Config("window_size must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "train_fraction must lie in (0, 1], got {}",
                self.train_fraction
            )));
        }
        self.model_shape().validate()?;
        self.optimizer.validate()
    }

    pub fn model_shape(&self) -> ModelShape {
        ModelShape::new(self.hidden_size, self.num_layers).with_head_hidden(self.head_hidden)
    }
}

/// Mixes a salt into a base seed (SplitMix64 finalizer). The result keeps
/// 63 bits so it fits a signed TOML integer in configs and manifests.
pub fn derive_seed(base: u64, salt: u64) -> u64 {
    let mut z = base ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    (z ^ (z >> 31)) >> 1
}

const SHUFFLE_SALT: u64 = 0x5348_5546;

/// Residual of one window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreRecord<T> {
    pub session: usize,
    /// Frame index of the target.
    pub origin: usize,
    pub error: T,
    pub label: Behavior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Normal,
    Aggressive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Normal => "normal",
            Verdict::Aggressive => "aggressive",
        })
    }
}

/// Aggressive iff the residual strictly exceeds the threshold.
pub fn classify<T: Scalar>(record: &ScoreRecord<T>, threshold: T) -> Verdict {
    if record.error > threshold {
        Verdict::Aggressive
    } else {
        Verdict::Normal
    }
}

/// A trained model together with the window size it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct Detector<T> {
    pub model: LstmModel<T>,
    pub window_size: usize,
}

impl<T: Scalar> Detector<T> {
    pub fn new(model: LstmModel<T>, window_size: usize) -> Self {
        Self { model, window_size }
    }

    /// MSE between the predicted and the observed next frame.
    pub fn score_window(&self, pair: &WindowPair<T>) -> Result<ScoreRecord<T>> {
        if pair.window() != self.window_size {
            return Err(Error::Shape(format!(
                "window of {} frames given to a model trained on {}",
                pair.window(),
                self.window_size
            )));
        }
        let prediction = self.model.predict(pair.input())?;
        let (error, _) = mse_loss(&prediction, pair.target())?;
        Ok(ScoreRecord {
            session: pair.session(),
            origin: pair.origin(),
            error,
            label: pair.label(),
        })
    }

    /// One record per pair, in input order.
    pub fn score_dataset(&self, pairs: &[WindowPair<T>]) -> Result<Vec<ScoreRecord<T>>> {
        pairs.iter().map(|p| self.score_window(p)).collect()
    }

    pub fn cast<U: Scalar>(&self) -> Detector<U> {
        let mut model = LstmModel::<U>::zeros(*self.model.shape()).expect("valid shape");
        let flat: Vec<U> = self
            .model
            .flatten()
            .into_iter()
            .map(|v| U::from_f64_lossy(v.to_f64_lossy()))
            .collect();
        model.load_flat(&flat).expect("same layout");
        Detector::new(model, self.window_size)
    }
}

/// Provenance of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainManifest {
    pub config: TrainConfig,
    pub dtype: String,
    pub param_count: usize,
    pub train_windows: usize,
    /// Always zero: training refuses non-normal windows.
    pub non_normal_windows: usize,
    pub optimizer_steps: u64,
    pub loss_history: Vec<f64>,
    pub final_loss: f64,
    pub model_hash: String,
    pub scaler_hash: Option<String>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub detector: Detector<T>,
    pub loss_history: Vec<f64>,
    pub manifest: TrainManifest,
}

/// Fits a model on normal windows with seeded mini-batch Adam.
///
/// Each epoch visits every pair once in a seeded shuffled order; the final
/// partial batch is kept. `loss_history[e]` is the mean data MSE over
/// epoch `e`, measured before each batch's update.
pub fn train<T: Scalar>(config: &TrainConfig, pairs: &[WindowPair<T>]) -> Result<TrainOutcome<T>> {
    config.validate()?;
    if pairs.is_empty() {
        return Err(Error::Session("no training windows".into()));
    }
    let impure: Vec<&WindowPair<T>> = pairs
        .iter()
        .filter(|p| p.label() != Behavior::Normal)
        .collect();
    if let Some(first) = impure.first() {
        return Err(Error::ImpureTraining(format!(
            "{} window(s) not labeled normal, first is {} at frame {}",
            impure.len(),
            first.label(),
            first.origin()
        )));
    }
    if let Some(p) = pairs.iter().find(|p| p.window() != config.window_size) {
        return Err(Error::Shape(format!(
            "training window of {} frames, config window_size is {}",
            p.window(),
            config.window_size
        )));
    }

    let mut model = LstmModel::<T>::new(config.model_shape(), config.seed)?;
    let mut state = AdamState::new(&model);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, SHUFFLE_SALT));
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut loss_history = Vec::with_capacity(config.epochs);
    let clip = config.optimizer.clip_norm.map(T::from_f64_lossy);

    for epoch in 0..config.epochs {
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        let mut epoch_loss = 0.0f64;
        for batch in order.chunks(config.batch_size) {
            let inv = T::one() / T::from_usize(batch.len()).unwrap();
            let mut grads = model.zeros_like();
            for &idx in batch {
                let pair = &pairs[idx];
                let (prediction, cache) = model.forward(pair.input())?;
                let (loss, mut grad_out) = mse_loss(&prediction, pair.target())?;
                epoch_loss += loss.to_f64_lossy();
                for g in &mut grad_out {
                    *g = *g * inv;
                }
                model.backward_into(&cache, &grad_out, &mut grads)?;
            }
            add_regularization_gradient(&model, &mut grads, &config.optimizer);
            if let Some(max_norm) = clip {
                clip_gradients(&mut grads, max_norm);
            }
            adam_step(&mut model, &grads, &mut state, &config.optimizer)?;
        }
        let mean = epoch_loss / pairs.len() as f64;
        debug!("epoch {epoch}: mean mse {mean:.6e}");
        loss_history.push(mean);
    }
    let final_loss = loss_history.last().copied().unwrap_or(f64::NAN);
    info!(
        "trained W={} on {} windows for {} epochs, final mse {final_loss:.6e}",
        config.window_size,
        pairs.len(),
        config.epochs
    );
    let manifest = TrainManifest {
        config: config.clone(),
        dtype: T::DTYPE.to_string(),
        param_count: model.param_count(),
        train_windows: pairs.len(),
        non_normal_windows: 0,
        optimizer_steps: state.t,
        loss_history: loss_history.clone(),
        final_loss,
        model_hash: model.fingerprint(),
        scaler_hash: None,
    };
    Ok(TrainOutcome {
        detector: Detector::new(model, config.window_size),
        loss_history,
        manifest,
    })
}

/// Which sessions feed the normal training pool.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum TrainPool {
    /// Normal windows of every session.
    #[default]
    All,
    /// Only these sessions (by index); each must contain no aggressive
    /// frames. All other sessions are evaluation-only.
    Sessions(Vec<usize>),
}

/// Position of the last training window: session index and target frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPoint {
    pub session: usize,
    pub frame: usize,
}

/// Scaled windows split into a training set and an evaluation set.
#[derive(Debug, Clone)]
pub struct ExperimentData<T> {
    pub scaler: ScalerParams<T>,
    /// Normal windows whose frames are all normal, from the leading part of
    /// the pool timeline.
    pub train: Vec<WindowPair<T>>,
    /// Normal windows after the split (no frame shared with training) and
    /// all aggressive windows.
    pub eval: Vec<WindowPair<T>>,
    pub split: SplitPoint,
}

impl<T: Scalar> ExperimentData<T> {
    pub fn eval_normal(&self) -> Vec<WindowPair<T>> {
        self.eval
            .iter()
            .filter(|p| p.label() == Behavior::Normal)
            .cloned()
            .collect()
    }

    pub fn eval_of(&self, label: Behavior) -> Vec<WindowPair<T>> {
        self.eval
            .iter()
            .filter(|p| p.label() == label)
            .cloned()
            .collect()
    }
}

/// Splits the normal timeline, fits the scaler on the training part only,
/// and cuts windows.
///
/// Pool sessions are walked in order and their normal-target windows are
/// counted; the first `ceil(train_fraction * count)` of them define the
/// training region, a contiguous prefix of the timeline. Normal windows
/// overlapping that region are never evaluated.
pub fn prepare_experiment<T: Scalar>(
    sessions: &[FrameSeries<f64>],
    config: &TrainConfig,
    pool: &TrainPool,
) -> Result<ExperimentData<T>> {
    config.validate()?;
    let w = config.window_size;
    let in_pool: Vec<bool> = match pool {
        TrainPool::All => vec![true; sessions.len()],
        TrainPool::Sessions(ids) => {
            let mut mask = vec![false; sessions.len()];
            for &i in ids {
                let s = sessions.get(i).ok_or_else(|| {
                    Error::Config(format!("training session index {i} out of range"))
                })?;
                if let Some(pos) = s.labels().iter().position(|l| l.is_aggressive()) {
                    return Err(Error::ImpureTraining(format!(
                        "training session {i} has {} at frame {pos}",
                        s.labels()[pos]
                    )));
                }
                mask[i] = true;
            }
            mask
        }
    };

    // Normal-target windows of the pool, in timeline order.
    let mut pool_normal: Vec<(usize, usize)> = Vec::new();
    for (s, series) in sessions.iter().enumerate() {
        if !in_pool[s] {
            continue;
        }
        if series.len() <= w {
            warn!(
                "session {s} has {} frames, not more than window {w}; skipped",
                series.len()
            );
            continue;
        }
        for origin in w..series.len() {
            if series.labels()[origin] == Behavior::Normal {
                pool_normal.push((s, origin));
            }
        }
    }
    if pool_normal.is_empty() {
        return Err(Error::Session(
            "no normal windows available for training".into(),
        ));
    }
    let n_train = ((config.train_fraction * pool_normal.len() as f64).ceil() as usize)
        .clamp(1, pool_normal.len());
    let (split_session, split_frame) = pool_normal[n_train - 1];
    let split = SplitPoint {
        session: split_session,
        frame: split_frame,
    };
    let in_train_region = |s: usize, frame: usize| {
        in_pool[s] && (s < split.session || (s == split.session && frame <= split.frame))
    };

    let normal_train_frames = sessions.iter().enumerate().flat_map(|(s, series)| {
        series
            .frames()
            .iter()
            .zip(series.labels().iter().copied())
            .enumerate()
            .filter(move |(i, _)| in_train_region(s, *i))
            .map(|(_, fl)| fl)
    });
    let scaler = ScalerParams::fit(normal_train_frames)?;
    let scaler = ScalerParams::<T> {
        min: scaler.min.map(T::from_f64_lossy),
        max: scaler.max.map(T::from_f64_lossy),
        fit_frames: scaler.fit_frames,
        fit_hash: scaler.fit_hash,
    };

    let mut train = Vec::new();
    let mut eval = Vec::new();
    for (s, series) in sessions.iter().enumerate() {
        if series.len() <= w {
            if !in_pool[s] {
                warn!(
                    "session {s} has {} frames, not more than window {w}; skipped",
                    series.len()
                );
            }
            continue;
        }
        let scaled = apply_scaler(&series.cast::<T>(), &scaler);
        let strict = slide_windows_with(&scaled, w, WindowLabeling::Strict)?;
        for pair in strict {
            if pair.label() == Behavior::Normal && in_train_region(s, pair.origin()) {
                train.push(pair.with_session(s));
            }
        }
        for pair in slide_windows_with(&scaled, w, config.labeling)? {
            let start = pair.origin() - w;
            let keep = if pair.label().is_aggressive() {
                true
            } else {
                !in_train_region(s, start)
            };
            if keep {
                eval.push(pair.with_session(s));
            }
        }
    }
    if train.is_empty() {
        return Err(Error::Session(
            "training region holds no fully normal window".into(),
        ));
    }
    info!(
        "W={w}: {} training windows, {} evaluation windows, split at session {} frame {}",
        train.len(),
        eval.len(),
        split.session,
        split.frame
    );
    Ok(ExperimentData {
        scaler,
        train,
        eval,
        split,
    })
}

/// Scores as delimited text with columns `session,origin,error,label`.
pub fn scores_to_csv<T: Scalar>(records: &[ScoreRecord<T>]) -> String {
    let mut out = String::from("session,origin,error,label\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.session, r.origin, r.error, r.label
        ));
    }
    out
}

pub fn scores_from_csv<T: Scalar>(text: &str) -> Result<Vec<ScoreRecord<T>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            Error::parse(e.position().map(|p| p.line()).unwrap_or(0), e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 4 {
            return Err(Error::parse(line, "expected session,origin,error,label"));
        }
        let bad = |what: &str| Error::parse(line, format!("invalid {what}"));
        let error: f64 = record[2].parse().map_err(|_| bad("error"))?;
        out.push(ScoreRecord {
            session: record[0].parse().map_err(|_| bad("session"))?,
            origin: record[1].parse().map_err(|_| bad("origin"))?,
            error: T::from_f64_lossy(error),
            label: record[3].parse()?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::Frame;

    fn pair(value: f64, window: usize, label: Behavior) -> WindowPair<f64> {
        WindowPair::from_parts(vec![[value; 12]; window], [value; 12], label, window).unwrap()
    }

    fn small_config(window: usize) -> TrainConfig {
        TrainConfig {
            window_size: window,
            hidden_size: 4,
            num_layers: 1,
            epochs: 3,
            batch_size: 2,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn training_rejects_aggressive_window() {
        let pairs = vec![
            pair(0.1, 3, Behavior::Normal),
            pair(0.2, 3, Behavior::AggrBrake),
        ];
        let err = train(&small_config(3), &pairs).unwrap_err();
        assert!(
            err.to_string().contains("non-normal data in training set"),
            "{err}"
        );
    }

    #[test]
    fn training_rejects_empty_and_mismatched() {
        assert!(train::<f64>(&small_config(3), &[]).is_err());
        assert!(matches!(
            train(&small_config(4), &[pair(0.1, 3, Behavior::Normal)]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn seeded_training_is_reproducible() {
        let pairs: Vec<_> = (0..7)
            .map(|i| pair(i as f64 / 7.0, 3, Behavior::Normal))
            .collect();
        let a = train(&small_config(3), &pairs).unwrap();
        let b = train(&small_config(3), &pairs).unwrap();
        assert_eq!(a.loss_history, b.loss_history);
        assert_eq!(a.manifest, b.manifest);
        assert_eq!(a.loss_history.len(), 3);
        assert_eq!(a.manifest.optimizer_steps, 3 * 4);
        assert_eq!(a.manifest.non_normal_windows, 0);
    }

    #[test]
    fn constant_series_is_learned() {
        let pairs: Vec<_> = (0..16).map(|_| pair(0.5, 5, Behavior::Normal)).collect();
        let config = TrainConfig {
            window_size: 5,
            hidden_size: 4,
            num_layers: 1,
            epochs: 400,
            batch_size: 16,
            optimizer: OptimConfig {
                learning_rate: 1e-2,
                ..OptimConfig::default()
            },
            ..TrainConfig::default()
        };
        let out = train(&config, &pairs).unwrap();
        let last = *out.loss_history.last().unwrap();
        assert!(last < 1e-6, "final loss {last}");
    }

    #[test]
    fn scoring_is_deterministic_and_exact_when_predicted() {
        let mut model = LstmModel::<f64>::zeros(ModelShape::new(3, 1)).unwrap();
        model.head_mut()[0].bias.iter_mut().for_each(|b| *b = 0.25);
        let det = Detector::new(model, 4);
        let p = pair(0.25, 4, Behavior::Normal);
        let r = det.score_window(&p).unwrap();
        assert_eq!(r.error, 0.0);
        assert_eq!(det.score_window(&p).unwrap(), r);
        assert!(det.score_window(&pair(0.25, 5, Behavior::Normal)).is_err());
    }

    #[test]
    fn perturbed_target_scores_higher() {
        let det = Detector::new(crate::model::init_model::<f64>(4, 1, 3).unwrap(), 4);
        let clean = pair(0.3, 4, Behavior::Normal);
        let mut target: Frame<f64> = *clean.target();
        target[1] += 5.0 * 0.2;
        let anomalous = clean.with_target(target);
        let a = det.score_window(&clean).unwrap().error;
        let b = det.score_window(&anomalous).unwrap().error;
        assert!(b > a);
    }

    #[test]
    fn dataset_scoring_matches_single_scoring() {
        let det = Detector::new(crate::model::init_model::<f64>(4, 1, 9).unwrap(), 3);
        assert!(det.score_dataset(&[]).unwrap().is_empty());
        let pairs: Vec<_> = (0..5)
            .map(|i| pair(i as f64 * 0.1, 3, Behavior::Normal))
            .collect();
        let batch = det.score_dataset(&pairs).unwrap();
        assert_eq!(batch.len(), 5);
        for (p, r) in pairs.iter().zip(&batch) {
            assert_eq!(det.score_window(p).unwrap(), *r);
        }
    }

    #[test]
    fn classify_is_strict() {
        let r = |e: f64| ScoreRecord {
            session: 0,
            origin: 0,
            error: e,
            label: Behavior::Normal,
        };
        assert_eq!(classify(&r(0.5), 0.5), Verdict::Normal);
        assert_eq!(classify(&r(0.6), 0.5), Verdict::Aggressive);
        assert_eq!(classify(&r(0.0), -1.0), Verdict::Aggressive);
    }

    #[test]
    fn scores_csv_roundtrip() {
        let records = vec![
            ScoreRecord {
                session: 1,
                origin: 60,
                error: 0.123456789f64,
                label: Behavior::AggrLeftTurn,
            },
            ScoreRecord {
                session: 0,
                origin: 51,
                error: 1e-9,
                label: Behavior::Normal,
            },
        ];
        let back: Vec<ScoreRecord<f64>> = scores_from_csv(&scores_to_csv(&records)).unwrap();
        assert_eq!(back, records);
    }

    #[test]
    fn seeds_are_mixed() {
        assert_ne!(derive_seed(1, 25), derive_seed(1, 50));
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
        assert!((0..1000).all(|k| derive_seed(u64::MAX, k) <= i64::MAX as u64));
    }

    fn labeled_series(labels: Vec<Behavior>) -> FrameSeries<f64> {
        let frames = (0..labels.len())
            .map(|i| std::array::from_fn(|j| ((i + j) as f64 * 0.37).sin()))
            .collect();
        FrameSeries::new(0, 50, frames, labels).unwrap()
    }

    #[test]
    fn split_keeps_training_and_evaluation_disjoint() {
        let mut labels = vec![Behavior::Normal; 100];
        for l in &mut labels[70..80] {
            *l = Behavior::AggrBrake;
        }
        let sessions = vec![
            labeled_series(vec![Behavior::Normal; 60]),
            labeled_series(labels),
        ];
        let config = TrainConfig {
            window_size: 5,
            train_fraction: 0.5,
            ..small_config(5)
        };
        let data: ExperimentData<f64> =
            prepare_experiment(&sessions, &config, &TrainPool::All).unwrap();
        assert!(data.train.iter().all(|p| p.label() == Behavior::Normal));
        let last_train = data
            .train
            .iter()
            .map(|p| (p.session(), p.origin()))
            .max()
            .unwrap();
        assert_eq!((data.split.session, data.split.frame), last_train);
        for p in data.eval.iter().filter(|p| p.label() == Behavior::Normal) {
            let start = (p.session(), p.origin() - 5);
            assert!(
                start > last_train,
                "evaluation window {start:?} overlaps training"
            );
        }
        assert_eq!(data.eval_of(Behavior::AggrBrake).len(), 10);
        // Scaled training targets stay inside the unit box.
        for p in &data.train {
            assert!(p.target().iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn explicit_pool_must_be_pure() {
        let mut labels = vec![Behavior::Normal; 40];
        labels[30] = Behavior::AggrRightTurn;
        let sessions = vec![
            labeled_series(labels),
            labeled_series(vec![Behavior::Normal; 40]),
        ];
        let config = small_config(5);
        let err = prepare_experiment::<f64>(&sessions, &config, &TrainPool::Sessions(vec![0]))
            .unwrap_err();
        assert!(matches!(err, Error::ImpureTraining(_)));
        let data =
            prepare_experiment::<f64>(&sessions, &config, &TrainPool::Sessions(vec![1])).unwrap();
        assert!(data.train.iter().all(|p| p.session() == 1));
        assert!(data
            .eval
            .iter()
            .any(|p| p.label() == Behavior::AggrRightTurn));
    }
}
