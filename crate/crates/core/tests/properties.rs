use proptest::prelude::*;

use driveprof_core::checkpoint::{load_checkpoint, save_checkpoint};
use driveprof_core::eval::{
    grid_from_csv, grid_to_csv, mann_whitney_auc, roc_from_scores, GridResult,
};
use driveprof_core::ingest::{Behavior, Channel, EventLabel, Sample, SensorTrace, Session};
use driveprof_core::model::{LstmModel, ModelShape};
use driveprof_core::optim::{
    finite_diff_gradients, objective_gradients, regularization_penalty, OptimConfig,
};
use driveprof_core::pipeline::{scores_from_csv, scores_to_csv, Detector, ScoreRecord};
use driveprof_core::preprocess::{
    apply_scaler, assemble_frames, frames_from_session, resample_channel, session_span,
    slide_windows, FrameSeries, ScalerParams,
};

fn brute(pos: &[f64], neg: &[f64]) -> f64 {
    let mut s = 0.0;
    for p in pos {
        for n in neg {
            s += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    s / (pos.len() * neg.len()) as f64
}

fn scores() -> impl Strategy<Value = Vec<f64>> {
    prop_oneof![
        prop::collection::vec(-10.0f64..10.0, 1..60),
        prop::collection::vec((0u8..4).prop_map(|k| k as f64), 1..60),
    ]
}

fn series_from(values: &[[f64; 12]], labels: &[Behavior]) -> FrameSeries<f64> {
    FrameSeries::new(0, 50, values.to_vec(), labels.to_vec()).unwrap()
}

fn frames(n: impl Into<prop::collection::SizeRange>) -> impl Strategy<Value = Vec<[f64; 12]>> {
    prop::collection::vec(prop::array::uniform12(-100.0f64..100.0), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn auc_matches_pair_counting(pos in scores(), neg in scores()) {
        let r = roc_from_scores(&pos, &neg).unwrap();
        prop_assert!((r.auc - brute(&pos, &neg)).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&r.auc));
    }

    #[test]
    fn auc_complement(pos in scores(), neg in scores()) {
        let a = mann_whitney_auc(&pos, &neg).unwrap();
        let b = mann_whitney_auc(&neg, &pos).unwrap();
        prop_assert!((a + b - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn auc_invariant_under_monotone_transform(pos in scores(), neg in scores(), scale in 0.1f64..10.0, shift in -5.0f64..5.0) {
        let f = |v: &[f64]| v.iter().map(|x| (x * scale + shift).atan()).collect::<Vec<_>>();
        let before = mann_whitney_auc(&pos, &neg).unwrap();
        let after = mann_whitney_auc(&f(&pos), &f(&neg)).unwrap();
        prop_assert_eq!(before, after);
    }

    #[test]
    fn aligned_resampling_is_identity(values in prop::collection::vec(-50.0f64..50.0, 2..200), offset in 0i64..1000) {
        let start = offset * 20_000;
        let traces: Vec<SensorTrace> = Channel::ALL.iter().map(|&c| {
            SensorTrace::new(c, values.iter().enumerate().map(|(i, &value)| Sample {
                timestamp_us: start + i as i64 * 20_000,
                value,
            }).collect()).unwrap()
        }).collect();
        let span = session_span(&traces, 50).unwrap();
        for t in &traces {
            prop_assert_eq!(&resample_channel(t, 50, span).unwrap(), &values);
        }
    }

    #[test]
    fn resampled_values_come_from_the_trace(
        gaps in prop::collection::vec(1i64..60_000, 2..100),
    ) {
        let mut ts = 0;
        let samples: Vec<Sample> = gaps.iter().enumerate().map(|(i, g)| {
            ts += g;
            Sample { timestamp_us: ts, value: i as f64 }
        }).collect();
        let first = samples[0].timestamp_us;
        let trace = SensorTrace::new(Channel::ALL[0], samples).unwrap();
        let span = session_span(std::slice::from_ref(&trace), 50).unwrap();
        prop_assert_eq!(span.start_us, first);
        let out = resample_channel(&trace, 50, span).unwrap();
        // Sample indices are non-decreasing: resampling never reorders.
        prop_assert!(out.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(out[0], 0.0);
    }

    #[test]
    fn window_count_is_n_minus_w(n in 2usize..120, w in 1usize..120) {
        prop_assume!(w < n);
        let s = series_from(&vec![[0.0; 12]; n], &vec![Behavior::Normal; n]);
        let pairs = slide_windows(&s, w).unwrap();
        prop_assert_eq!(pairs.len(), n - w);
        for (k, p) in pairs.iter().enumerate() {
            prop_assert_eq!(p.origin(), k + w);
            prop_assert_eq!(p.input().len(), w);
        }
    }

    #[test]
    fn scaled_normal_frames_lie_in_unit_interval(values in frames(2..80)) {
        let s = series_from(&values, &vec![Behavior::Normal; values.len()]);
        let scaler = ScalerParams::fit(s.frames().iter().zip(s.labels().iter().copied())).unwrap();
        let scaled = apply_scaler(&s, &scaler);
        for (frame, raw) in scaled.frames().iter().zip(&values) {
            for (j, v) in frame.iter().enumerate() {
                prop_assert!((0.0..=1.0).contains(v));
                if !scaler.is_degenerate(j) {
                    let back = scaler.unscale_frame(frame)[j];
                    prop_assert!((back - raw[j]).abs() <= 1e-9 * (1.0 + raw[j].abs()));
                }
            }
        }
    }

    #[test]
    fn aggressive_frames_never_move_the_scaler(values in frames(4..60), spikes in frames(1..10), factor in 2.0f64..1e6) {
        let n = values.len();
        let mut all = values.clone();
        all.extend(spikes.iter().map(|f| f.map(|v| v * factor)));
        let mut labels = vec![Behavior::Normal; n];
        labels.extend(std::iter::repeat_n(Behavior::AggrBrake, spikes.len()));
        let clean = ScalerParams::fit(values.iter().map(|f| (f, Behavior::Normal))).unwrap();
        let mixed = ScalerParams::fit(all.iter().zip(labels.iter().copied())).unwrap();
        prop_assert_eq!(clean, mixed);
    }

    #[test]
    fn aggressive_labels_override_normal(start in 0i64..40, len in 1i64..40, n in 50usize..100) {
        let channels = vec![vec![0.0; n]; 12];
        let labels = [
            EventLabel::new(Behavior::AggrLeftTurn, start * 20_000, (start + len) * 20_000).unwrap(),
            EventLabel::new(Behavior::Normal, 0, n as i64 * 20_000).unwrap(),
        ];
        let s = assemble_frames(0, 50, &channels, &labels).unwrap();
        let turned = s.labels().iter().filter(|&&l| l == Behavior::AggrLeftTurn).count();
        prop_assert_eq!(turned as i64, len.min(n as i64 - start));
    }

    #[test]
    fn scores_csv_roundtrip(errs in prop::collection::vec(0.0f64..5.0, 0..40)) {
        let records: Vec<ScoreRecord<f64>> = errs.iter().enumerate().map(|(i, &error)| ScoreRecord {
            session: i % 3,
            origin: i,
            error,
            label: Behavior::ALL[i % 7],
        }).collect();
        prop_assert_eq!(scores_from_csv::<f64>(&scores_to_csv(&records)).unwrap(), records);
    }

    #[test]
    fn grid_csv_roundtrip(cells in prop::collection::vec(prop::option::of(0.0f64..1.0), 24)) {
        let mut g = GridResult::new(vec![200, 100, 50, 25], Behavior::AGGRESSIVE.to_vec());
        for (k, c) in cells.iter().enumerate() {
            if let Some(v) = c {
                g.cells.insert((g.windows[k / 6], g.labels[k % 6]), *v);
            }
        }
        prop_assert_eq!(grid_from_csv(&grid_to_csv(&g)).unwrap(), g);
    }

    #[test]
    fn penalty_is_non_negative(seed in any::<u64>(), l1 in 0.0f64..1.0, l2 in 0.0f64..1.0) {
        let m = LstmModel::<f64>::new(ModelShape::new(3, 1), seed).unwrap();
        let cfg = OptimConfig { l1_coeff: l1, l2_coeff: l2, ..OptimConfig::default() };
        prop_assert!(regularization_penalty(&m, &cfg) >= 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn bptt_matches_finite_differences(
        seed in any::<u64>(),
        hidden in 1usize..5,
        layers in 1usize..3,
        head in prop::option::of(1usize..4),
        input in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 12), 1..5),
        target in prop::collection::vec(-1.0f64..1.0, 12),
    ) {
        let shape = ModelShape::new(hidden, layers).with_head_hidden(head);
        let model = LstmModel::<f64>::new(shape, seed).unwrap();
        let cfg = OptimConfig::default().unregularized();
        let (_, analytic) = objective_gradients(&model, &input, &target, &cfg).unwrap();
        let numeric = finite_diff_gradients(&model, &input, &target, &cfg, 1e-6).unwrap();
        for (a, n) in analytic.flatten().iter().zip(numeric.flatten()) {
            prop_assert!((a - n).abs() <= 1e-6 + 1e-4 * a.abs().max(n.abs()), "{a} vs {n}");
        }
    }

    #[test]
    fn checkpoint_roundtrip_any_shape(
        seed in any::<u64>(),
        hidden in 1usize..6,
        layers in 1usize..3,
        head in prop::option::of(1usize..5),
        window in 1usize..300,
    ) {
        let shape = ModelShape::new(hidden, layers).with_head_hidden(head);
        let det = Detector::new(LstmModel::<f32>::new(shape, seed).unwrap(), window);
        let bytes = save_checkpoint(&det).unwrap();
        let loaded: Detector<f32> = load_checkpoint(&bytes).unwrap();
        prop_assert_eq!(&loaded, &det);
        prop_assert_eq!(save_checkpoint(&loaded).unwrap(), bytes);
    }
}

#[test]
fn session_frames_follow_slowest_sensor() {
    // 100 Hz and 10 Hz channels mixed: the span ends one bin after the
    // earliest last sample.
    let traces: Vec<SensorTrace> = Channel::ALL
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let period = if k < 3 { 10_000 } else { 100_000 };
            let n = 1_000_000 / period;
            SensorTrace::new(
                c,
                (0..n)
                    .map(|i| Sample {
                        timestamp_us: i * period,
                        value: i as f64,
                    })
                    .collect(),
            )
            .unwrap()
        })
        .collect();
    let session = Session::new("mixed", traces, Vec::new()).unwrap();
    let s = frames_from_session(&session, 50).unwrap();
    assert_eq!(s.len(), 46);
    // 10 Hz channel held for five bins per sample.
    assert_eq!(s.frames()[4][5], 0.0);
    assert_eq!(s.frames()[5][5], 1.0);
    // 100 Hz channel takes the first of two samples per bin.
    assert_eq!(s.frames()[3][0], 6.0);
}
