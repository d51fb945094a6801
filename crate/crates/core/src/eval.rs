//! ROC-AUC over residuals, per-label evaluation, and the window x label
//! experiment grid.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Behavior;
use crate::pipeline::{
    derive_seed, prepare_experiment, train, Detector, ScoreRecord, TrainConfig, TrainManifest,
    TrainPool,
};
use crate::preprocess::{FrameSeries, ScalerParams, WindowPair};
use crate::scalar::Scalar;

/// Window sizes of the experiment grid, in table column order.
pub const DEFAULT_WINDOWS: [usize; 4] = [200, 100, 50, 25];

/// Maximum allowed gap between the pair-count AUC and the curve area.
pub const AUC_AGREEMENT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Windows with error strictly above this are flagged aggressive.
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocResult {
    pub auc: f64,
    /// From (0, 0) to (1, 1), both coordinates non-decreasing.
    pub curve: Vec<RocPoint>,
    pub n_pos: usize,
    pub n_neg: usize,
}

fn check_scores(scores: &[f64], what: &str) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::DegenerateRoc(format!("no {what} scores")));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Numeric(format!("NaN among {what} scores")));
    }
    Ok(())
}

/// Mann-Whitney AUC: `(#(pos > neg) + #(pos == neg) / 2) / (n_pos n_neg)`.
pub fn mann_whitney_auc(positives: &[f64], negatives: &[f64]) -> Result<f64> {
    check_scores(positives, "positive")?;
    check_scores(negatives, "negative")?;
    let mut neg = negatives.to_vec();
    neg.sort_by(|a, b| a.total_cmp(b));
    // Twice the U statistic, kept integral.
    let mut twice_u: u128 = 0;
    for &p in positives {
        let below = neg.partition_point(|&n| n < p) as u128;
        let at_or_below = neg.partition_point(|&n| n <= p) as u128;
        twice_u += 2 * below + (at_or_below - below);
    }
    let pairs = 2 * positives.len() as u128 * negatives.len() as u128;
    Ok(twice_u as f64 / pairs as f64)
}

/// ROC curve from a sweep over every distinct score, plus the `+inf` and
/// `-inf` endpoints.
pub fn roc_curve(positives: &[f64], negatives: &[f64]) -> Result<Vec<RocPoint>> {
    check_scores(positives, "positive")?;
    check_scores(negatives, "negative")?;
    let desc = |v: &[f64]| {
        let mut v = v.to_vec();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    };
    let pos = desc(positives);
    let neg = desc(negatives);
    let mut thresholds: Vec<f64> = pos.iter().chain(&neg).copied().collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();

    let (np, nn) = (pos.len() as f64, neg.len() as f64);
    let mut curve = Vec::with_capacity(thresholds.len() + 2);
    curve.push(RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    });
    let (mut ip, mut ineg) = (0usize, 0usize);
    for &t in &thresholds {
        while ip < pos.len() && pos[ip] > t {
            ip += 1;
        }
        while ineg < neg.len() && neg[ineg] > t {
            ineg += 1;
        }
        curve.push(RocPoint {
            threshold: t,
            fpr: ineg as f64 / nn,
            tpr: ip as f64 / np,
        });
    }
    curve.push(RocPoint {
        threshold: f64::NEG_INFINITY,
        fpr: 1.0,
        tpr: 1.0,
    });
    Ok(curve)
}

/// Trapezoidal area under a curve ordered by increasing FPR.
pub fn trapezoid_auc(curve: &[RocPoint]) -> f64 {
    curve
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) / 2.0)
        .sum()
}

/// AUC and curve for raw positive/negative scores. The pair-count AUC and
/// the curve area must agree within [`AUC_AGREEMENT_TOL`].
pub fn roc_from_scores(positives: &[f64], negatives: &[f64]) -> Result<RocResult> {
    let auc = mann_whitney_auc(positives, negatives)?;
    let curve = roc_curve(positives, negatives)?;
    let area = trapezoid_auc(&curve);
    if (area - auc).abs() > AUC_AGREEMENT_TOL {
        return Err(Error::Numeric(format!(
            "curve area {area} disagrees with pair-count AUC {auc}"
        )));
    }
    Ok(RocResult {
        auc,
        curve,
        n_pos: positives.len(),
        n_neg: negatives.len(),
    })
}

/// Normal records against records of one aggressive class; records of
/// other classes are ignored.
pub fn roc_auc<T: Scalar>(records: &[ScoreRecord<T>], positive: Behavior) -> Result<RocResult> {
    if !positive.is_aggressive() {
        return Err(Error::Config(
            "positive class must be an aggressive behavior".into(),
        ));
    }
    let pick = |label: Behavior| -> Vec<f64> {
        records
            .iter()
            .filter(|r| r.label == label)
            .map(|r| r.error.to_f64_lossy())
            .collect()
    };
    roc_from_scores(&pick(positive), &pick(Behavior::Normal)).map_err(|e| match e {
        Error::DegenerateRoc(msg) => Error::DegenerateRoc(format!("{positive}: {msg}")),
        other => other,
    })
}

/// Normal records against all aggressive records pooled. Not one of the
/// per-label grid cells.
pub fn roc_auc_pooled<T: Scalar>(records: &[ScoreRecord<T>]) -> Result<RocResult> {
    let (pos, neg): (Vec<&ScoreRecord<T>>, Vec<&ScoreRecord<T>>) =
        records.iter().partition(|r| r.label.is_aggressive());
    let f = |v: Vec<&ScoreRecord<T>>| v.iter().map(|r| r.error.to_f64_lossy()).collect::<Vec<_>>();
    roc_from_scores(&f(pos), &f(neg))
}

/// Scores both sets and treats `aggressive_pairs` as the positive class.
pub fn evaluate_label<T: Scalar>(
    detector: &Detector<T>,
    normal_pairs: &[WindowPair<T>],
    aggressive_pairs: &[WindowPair<T>],
) -> Result<RocResult> {
    let errors = |pairs: &[WindowPair<T>]| -> Result<Vec<f64>> {
        Ok(detector
            .score_dataset(pairs)?
            .iter()
            .map(|r| r.error.to_f64_lossy())
            .collect())
    };
    roc_from_scores(&errors(aggressive_pairs)?, &errors(normal_pairs)?)
}

/// Per-label ROC for each aggressive class present in `records`, plus the
/// pooled ROC. Classes without windows are skipped with a warning.
pub fn evaluate_records<T: Scalar>(
    records: &[ScoreRecord<T>],
    window: usize,
) -> (BTreeMap<Behavior, RocResult>, Option<RocResult>) {
    let mut rocs = BTreeMap::new();
    for label in Behavior::AGGRESSIVE {
        match roc_auc(records, label) {
            Ok(r) => {
                rocs.insert(label, r);
            }
            Err(e) => warn!("W={window}: cell {label} absent: {e}"),
        }
    }
    let pooled = roc_auc_pooled(records).ok();
    (rocs, pooled)
}

/// AUC per (window, aggressive label) with marginal means.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GridResult {
    /// Column order.
    pub windows: Vec<usize>,
    /// Row order.
    pub labels: Vec<Behavior>,
    /// Missing keys are absent cells.
    pub cells: BTreeMap<(usize, Behavior), f64>,
    /// Pooled all-aggressive AUC per window (extra metric).
    pub pooled: BTreeMap<usize, f64>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

impl GridResult {
    pub fn new(windows: Vec<usize>, labels: Vec<Behavior>) -> Self {
        Self {
            windows,
            labels,
            ..Self::default()
        }
    }

    pub fn cell(&self, window: usize, label: Behavior) -> Option<f64> {
        self.cells.get(&(window, label)).copied()
    }

    /// Mean over the windows of one label row.
    pub fn label_mean(&self, label: Behavior) -> Option<f64> {
        mean(self.windows.iter().filter_map(|&w| self.cell(w, label)))
    }

    /// Mean over the labels of one window column.
    pub fn window_mean(&self, window: usize) -> Option<f64> {
        mean(self.labels.iter().filter_map(|&l| self.cell(window, l)))
    }

    /// Mean of all present cells.
    pub fn grand_mean(&self) -> Option<f64> {
        mean(
            self.windows
                .iter()
                .flat_map(|&w| self.labels.iter().map(move |&l| (w, l)))
                .filter_map(|(w, l)| self.cell(w, l)),
        )
    }

    pub fn present_cells(&self) -> usize {
        self.cells.len()
    }
}

/// One trained window size of a grid run.
#[derive(Debug, Clone)]
pub struct WindowRun<T> {
    pub window: usize,
    pub detector: Detector<T>,
    pub scaler: ScalerParams<T>,
    pub manifest: TrainManifest,
    pub rocs: BTreeMap<Behavior, RocResult>,
    pub pooled: Option<RocResult>,
}

#[derive(Debug, Clone)]
pub struct GridRun<T> {
    pub grid: GridResult,
    pub runs: Vec<WindowRun<T>>,
}

/// Config for one window size of a grid, with a seed derived from the base
/// seed and the window size.
pub fn window_config(template: &TrainConfig, window: usize) -> TrainConfig {
    TrainConfig {
        window_size: window,
        seed: derive_seed(template.seed, window as u64),
        ..template.clone()
    }
}

/// Trains one model per window size on normal windows and evaluates every
/// aggressive label against held-out normal windows.
pub fn run_grid<T: Scalar>(
    sessions: &[FrameSeries<f64>],
    windows: &[usize],
    template: &TrainConfig,
    pool: &TrainPool,
) -> Result<GridRun<T>> {
    let mut grid = GridResult::new(windows.to_vec(), Behavior::AGGRESSIVE.to_vec());
    let mut runs = Vec::with_capacity(windows.len());
    for &window in windows {
        let config = window_config(template, window);
        let data = prepare_experiment::<T>(sessions, &config, pool)?;
        let mut outcome = train(&config, &data.train)?;
        outcome.manifest.scaler_hash = Some(data.scaler.artifact_hash());
        let records = outcome.detector.score_dataset(&data.eval)?;
        let (rocs, pooled) = evaluate_records(&records, window);
        record_window(&mut grid, window, &rocs, pooled.as_ref());
        runs.push(WindowRun {
            window,
            detector: outcome.detector,
            scaler: data.scaler,
            manifest: outcome.manifest,
            rocs,
            pooled,
        });
    }
    Ok(GridRun { grid, runs })
}

/// Copies one window's results into the grid.
pub fn record_window(
    grid: &mut GridResult,
    window: usize,
    rocs: &BTreeMap<Behavior, RocResult>,
    pooled: Option<&RocResult>,
) {
    for (&label, roc) in rocs {
        grid.cells.insert((window, label), roc.auc);
    }
    if let Some(p) = pooled {
        grid.pooled.insert(window, p.auc);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    /// `window,label,auc` rows; absent cells as `n/a`.
    Csv,
    /// Aligned plain-text table with marginal means.
    Table,
}

const POOLED_LABEL: &str = "pooled_aggressive";
const ABSENT: &str = "n/a";

/// Renders the grid. `provenance` pairs are appended to the table format
/// only.
pub fn emit_report(
    grid: &GridResult,
    format: ReportFormat,
    provenance: &[(String, String)],
) -> String {
    match format {
        ReportFormat::Csv => grid_to_csv(grid),
        ReportFormat::Table => render_table(grid, provenance),
    }
}

pub fn grid_to_csv(grid: &GridResult) -> String {
    let mut out = String::from("window,label,auc\n");
    for &w in &grid.windows {
        for &l in &grid.labels {
            let v = grid
                .cell(w, l)
                .map(|v| v.to_string())
                .unwrap_or_else(|| ABSENT.into());
            let _ = writeln!(out, "{w},{l},{v}");
        }
    }
    for (&w, v) in &grid.pooled {
        let _ = writeln!(out, "{w},{POOLED_LABEL},{v}");
    }
    out
}

pub fn grid_from_csv(text: &str) -> Result<GridResult> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut grid = GridResult::default();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            Error::parse(e.position().map(|p| p.line()).unwrap_or(0), e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 3 {
            return Err(Error::parse(line, "expected window,label,auc"));
        }
        let window: usize = record[0]
            .parse()
            .map_err(|_| Error::parse(line, format!("invalid window {:?}", &record[0])))?;
        let value = match &record[2] {
            ABSENT => None,
            raw => Some(
                raw.parse::<f64>()
                    .map_err(|_| Error::parse(line, format!("invalid auc {raw:?}")))?,
            ),
        };
        if &record[1] == POOLED_LABEL {
            if let Some(v) = value {
                grid.pooled.insert(window, v);
            }
            continue;
        }
        let label: Behavior = record[1].parse()?;
        if !grid.windows.contains(&window) {
            grid.windows.push(window);
        }
        if !grid.labels.contains(&label) {
            grid.labels.push(label);
        }
        if let Some(v) = value {
            grid.cells.insert((window, label), v);
        }
    }
    Ok(grid)
}

fn fmt_auc(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.4}"))
        .unwrap_or_else(|| ABSENT.into())
}

pub fn render_table(grid: &GridResult, provenance: &[(String, String)]) -> String {
    const NAME: usize = 32;
    const COL: usize = 9;
    let mut out = String::new();
    let _ = write!(out, "{:<NAME$}", "");
    let _ = writeln!(
        out,
        "{:^width$}",
        "window",
        width = COL * grid.windows.len()
    );
    let _ = write!(out, "{:<NAME$}", "Label");
    for w in &grid.windows {
        let _ = write!(out, "{:>COL$}", w);
    }
    let _ = writeln!(out, "   Avg of AUC by label");
    let rule = "-".repeat(NAME + COL * grid.windows.len() + 22);
    let _ = writeln!(out, "{rule}");
    for &l in &grid.labels {
        let _ = write!(out, "{:<NAME$}", l.title());
        for &w in &grid.windows {
            let _ = write!(out, "{:>COL$}", fmt_auc(grid.cell(w, l)));
        }
        let _ = writeln!(out, "   {:>8}", fmt_auc(grid.label_mean(l)));
    }
    let _ = writeln!(out, "{rule}");
    let _ = write!(out, "{:<NAME$}", "Average of AUC by window");
    for &w in &grid.windows {
        let _ = write!(out, "{:>COL$}", fmt_auc(grid.window_mean(w)));
    }
    let _ = writeln!(out);
    let _ = write!(out, "{:<NAME$}", "Average of AUC");
    let _ = write!(out, "{:>width$}", "", width = COL * grid.windows.len());
    let _ = writeln!(out, "   {:>8}", fmt_auc(grid.grand_mean()));
    if !grid.pooled.is_empty() {
        let _ = writeln!(out, "{rule}");
        let _ = write!(out, "{:<NAME$}", "Pooled aggressive (extra)");
        for &w in &grid.windows {
            let _ = write!(out, "{:>COL$}", fmt_auc(grid.pooled.get(&w).copied()));
        }
        let _ = writeln!(out);
    }
    if !provenance.is_empty() {
        let _ = writeln!(out, "\nprovenance:");
        for (k, v) in provenance {
            let _ = writeln!(out, "  {k} = {v}");
        }
    }
    out
}

/// ROC points as `threshold,fpr,tpr` rows for plotting.
pub fn curve_to_csv(roc: &RocResult) -> String {
    let mut out = String::from("threshold,fpr,tpr\n");
    for p in &roc.curve {
        let _ = writeln!(out, "{},{},{}", p.threshold, p.fpr, p.tpr);
    }
    out
}
