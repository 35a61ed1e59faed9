//! Evaluation protocol: repeated normal-DIMM subsampling, DIMM-grouped
//! stratified k-fold cross-validation, held-out normal scoring and the
//! CE-rate threshold baseline.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::celog::{CeRecord, DimmId, FailureRecord};
use crate::fengine::{Mode, WindowConfig, CATALOG_VERSION};
use crate::forest::{predict_dimm, Classifier, ForestError, Learner};
use crate::labeling::{build_series, sample_splits, DatasetSplit, DimmSeries, LabelError};

pub const REPORT_FORMAT: &str = "memfail-report/1";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("normal test set is empty")]
    EmptyNormalTest,
    #[error("relative improvement undefined for a zero reference value")]
    ZeroReference,
    #[error("invalid evaluation setting: {0}")]
    Config(String),
    #[error("fold {fold} has no failed DIMM ({failed} failed DIMMs over {k} folds); use a smaller k")]
    FoldWithoutFailures { fold: usize, failed: usize, k: usize },
    #[error("no training samples for fold {0}")]
    EmptyTraining(usize),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error(transparent)]
    Label(#[from] LabelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn record(&mut self, failed: bool, predicted_fail: bool) {
        match (failed, predicted_fail) {
            (true, true) => self.tp += 1,
            (true, false) => self.fn_ += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn merge(&mut self, other: &ConfusionCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.tn += other.tn;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    /// Set when nothing was flagged (precision reported as 0).
    pub precision_undefined: bool,
    /// Set when there were no failed DIMMs (recall reported as 0).
    pub recall_undefined: bool,
}

pub fn metrics(c: &ConfusionCounts) -> Metrics {
    let ratio = |num: u64, den: u64| if den == 0 { (0.0, true) } else { (num as f64 / den as f64, false) };
    let (precision, precision_undefined) = ratio(c.tp, c.tp + c.fp);
    let (recall, recall_undefined) = ratio(c.tp, c.tp + c.fn_);
    Metrics { precision, recall, precision_undefined, recall_undefined }
}

/// Fraction of held-out normal DIMMs flagged as failing.
pub fn error_rate_normal(flags: &[bool]) -> Result<f64, EvalError> {
    if flags.is_empty() {
        return Err(EvalError::EmptyNormalTest);
    }
    Ok(flags.iter().filter(|&&f| f).count() as f64 / flags.len() as f64)
}

/// `(a - b) / b`.
pub fn relative_improvement(a: f64, b: f64) -> Result<f64, EvalError> {
    if b == 0.0 {
        return Err(EvalError::ZeroReference);
    }
    Ok((a - b) / b)
}

/// Partitions DIMMs into `k` folds, stratified by class: each class is
/// shuffled with `seed` and dealt round-robin.
pub fn assign_folds(
    failed: &[DimmId],
    normal: &[DimmId],
    k: usize,
    seed: u64,
) -> Result<Vec<Vec<DimmId>>, EvalError> {
    if k < 2 {
        return Err(EvalError::Config(format!("need at least 2 folds, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = failed.to_vec();
    let mut n = normal.to_vec();
    f.shuffle(&mut rng);
    n.shuffle(&mut rng);
    let mut folds = vec![Vec::new(); k];
    for (i, d) in f.into_iter().enumerate() {
        folds[i % k].push(d);
    }
    if let Some(fold) = (0..k).find(|&i| folds[i].is_empty()) {
        return Err(EvalError::FoldWithoutFailures { fold, failed: failed.len(), k });
    }
    let offset = failed.len();
    for (i, d) in n.into_iter().enumerate() {
        folds[(offset + i) % k].push(d);
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimmPrediction {
    pub dimm: DimmId,
    pub failed: bool,
    pub fail: bool,
    pub first_alarm_ts: Option<i64>,
    pub max_proba: f64,
}

/// Scores each DIMM's chronological samples with the alarm rule. DIMMs
/// without samples are never flagged.
pub fn score_dimms<C: Classifier + ?Sized>(
    model: &C,
    series: &BTreeMap<DimmId, DimmSeries>,
    dimms: &[DimmId],
    threshold: f64,
) -> Result<Vec<DimmPrediction>, EvalError> {
    dimms
        .iter()
        .map(|d| {
            let (failed, samples) = match series.get(d) {
                Some(s) => (s.failed(), s.samples.as_slice()),
                None => (false, &[][..]),
            };
            let v = predict_dimm(model, samples.iter().map(|s| (s.ts, s.features.values())), threshold)?;
            Ok(DimmPrediction {
                dimm: d.clone(),
                failed,
                fail: v.fail,
                first_alarm_ts: v.first_alarm_ts,
                max_proba: v.max_proba,
            })
        })
        .collect()
}

fn tally(preds: &[DimmPrediction]) -> ConfusionCounts {
    let mut c = ConfusionCounts::default();
    for p in preds {
        c.record(p.failed, p.fail);
    }
    c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub train_samples: usize,
    pub counts: ConfusionCounts,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub folds: Vec<FoldResult>,
    /// Counts summed over folds; every training DIMM is scored once.
    pub pooled: ConfusionCounts,
    pub metrics: Metrics,
    pub predictions: Vec<DimmPrediction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub folds: usize,
    pub threshold: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { folds: 10, threshold: 0.5 }
    }
}

/// k-fold cross-validation over the split's training DIMMs. Folds are
/// seeded with the split's sampling seed.
pub fn cross_validate<L: Learner>(
    series: &BTreeMap<DimmId, DimmSeries>,
    split: &DatasetSplit,
    learner: &L,
    cfg: &EvalConfig,
) -> Result<CvResult, EvalError> {
    let folds = assign_folds(&split.failed, &split.train_normal, cfg.folds, split.meta.seed)?;
    let mut results = Vec::with_capacity(folds.len());
    let mut predictions = Vec::new();
    for (i, held_out) in folds.iter().enumerate() {
        let held: BTreeSet<&DimmId> = held_out.iter().collect();
        let train: Vec<_> = split
            .train_dimms()
            .filter(|d| !held.contains(d))
            .filter_map(|d| series.get(d))
            .flat_map(|s| &s.samples)
            .collect();
        if train.is_empty() {
            return Err(EvalError::EmptyTraining(i));
        }
        let model = learner.fit(&train)?;
        let preds = score_dimms(&model, series, held_out, cfg.threshold)?;
        let counts = tally(&preds);
        results.push(FoldResult { fold: i, train_samples: train.len(), counts, metrics: metrics(&counts) });
        predictions.extend(preds);
    }
    let mut pooled = ConfusionCounts::default();
    for r in &results {
        pooled.merge(&r.counts);
    }
    Ok(CvResult { folds: results, pooled, metrics: metrics(&pooled), predictions })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatResult {
    pub repeat: usize,
    pub seed: u64,
    pub cv: CvResult,
    /// `None` when every normal DIMM was sampled for training.
    pub error_rate_normal_test: Option<f64>,
    pub normal_test_dimms: usize,
}

/// Cross-validation plus a model fit on the whole split, scored on the
/// held-out normal DIMMs.
pub fn evaluate_split<L: Learner>(
    series: &BTreeMap<DimmId, DimmSeries>,
    split: &DatasetSplit,
    learner: &L,
    cfg: &EvalConfig,
) -> Result<RepeatResult, EvalError> {
    let cv = cross_validate(series, split, learner, cfg)?;
    let error_rate_normal_test = if split.normal_test_dimms.is_empty() {
        warn!("repeat {}: no held-out normal DIMMs, normal-test error rate not computed", split.meta.repeat);
        None
    } else {
        let model = learner.fit(&split.train_samples(series))?;
        let preds = score_dimms(&model, series, &split.normal_test_dimms, cfg.threshold)?;
        Some(error_rate_normal(&preds.iter().map(|p| p.fail).collect::<Vec<_>>())?)
    };
    Ok(RepeatResult {
        repeat: split.meta.repeat,
        seed: split.meta.seed,
        cv,
        error_rate_normal_test,
        normal_test_dimms: split.normal_test_dimms.len(),
    })
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // rounding can push the mean of identical values off by an ulp
        Some(Stat { mean: mean.clamp(min, max), std: var.sqrt(), min, max })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineInput {
    pub dimm: DimmId,
    pub failed: bool,
    /// Sorted CE timestamps the operator would have seen.
    pub timestamps: Vec<i64>,
}

/// Per-DIMM baseline inputs: failed DIMMs only see CEs up to
/// `failure_time - lead_hours`.
pub fn baseline_inputs(
    streams: &BTreeMap<DimmId, Vec<CeRecord>>,
    failures: &[FailureRecord],
    lead_hours: f64,
) -> Vec<BaselineInput> {
    let failed: BTreeMap<&DimmId, i64> = failures.iter().map(|f| (&f.dimm, f.failure_time)).collect();
    let lead = (lead_hours * 3600.0).round() as i64;
    streams
        .iter()
        .map(|(dimm, recs)| {
            let cutoff = failed.get(dimm).map(|ft| ft - lead);
            let mut timestamps: Vec<i64> =
                recs.iter().map(|r| r.ts).filter(|&t| cutoff.is_none_or(|c| t <= c)).collect();
            timestamps.sort_unstable();
            BaselineInput { dimm: dimm.clone(), failed: cutoff.is_some(), timestamps }
        })
        .collect()
}

/// Largest CE count in any window `(t - w, t]`, divided by `w` hours.
pub fn max_window_rate(timestamps: &[i64], window_hours: f64) -> f64 {
    let w = (window_hours * 3600.0).round() as i64;
    let mut best = 0usize;
    let mut lo = 0;
    for hi in 0..timestamps.len() {
        while timestamps[lo] <= timestamps[hi] - w {
            lo += 1;
        }
        best = best.max(hi - lo + 1);
    }
    best as f64 / window_hours
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub error_rate: f64,
    pub precision_undefined: bool,
    pub counts: ConfusionCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSweep {
    pub window_hours: f64,
    pub sweep: Vec<SweepPoint>,
    pub best_precision: Option<SweepPoint>,
    pub best_recall: Option<SweepPoint>,
}

/// Flags a DIMM when its maximum windowed CE rate reaches the threshold,
/// for every distinct observed rate in ascending order.
pub fn threshold_baseline(inputs: &[BaselineInput], window_hours: f64) -> Result<BaselineSweep, EvalError> {
    if !(window_hours.is_finite() && window_hours > 0.0) {
        return Err(EvalError::Config(format!("window must be positive, got {window_hours}")));
    }
    let rated: Vec<(f64, bool)> =
        inputs.iter().map(|i| (max_window_rate(&i.timestamps, window_hours), i.failed)).collect();
    let mut thresholds: Vec<f64> = rated.iter().map(|r| r.0).collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let n_normal = rated.iter().filter(|r| !r.1).count();
    let sweep: Vec<SweepPoint> = thresholds
        .into_iter()
        .map(|t| {
            let mut c = ConfusionCounts::default();
            for &(rate, failed) in &rated {
                c.record(failed, rate >= t);
            }
            let m = metrics(&c);
            SweepPoint {
                threshold: t,
                precision: m.precision,
                recall: m.recall,
                error_rate: if n_normal == 0 { 0.0 } else { c.fp as f64 / n_normal as f64 },
                precision_undefined: m.precision_undefined,
                counts: c,
            }
        })
        .collect();
    let defined: Vec<&SweepPoint> = sweep.iter().filter(|p| !p.precision_undefined).collect();
    // first maximum in ascending-threshold order wins remaining ties
    let pick = |key: &dyn Fn(&SweepPoint) -> (f64, f64)| {
        defined.iter().fold(None::<SweepPoint>, |best, p| match best {
            Some(b) if key(&b).partial_cmp(&key(p)) != Some(std::cmp::Ordering::Less) => Some(b),
            _ => Some(**p),
        })
    };
    let best_precision = pick(&|p| (p.precision, p.recall));
    let best_recall = pick(&|p| (p.recall, p.precision));
    Ok(BaselineSweep { window_hours, sweep, best_precision, best_recall })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatSummary {
    pub repeat: usize,
    pub seed: u64,
    pub counts: ConfusionCounts,
    pub metrics: Metrics,
    pub error_rate_normal_test: Option<f64>,
    pub normal_test_dimms: usize,
    pub folds: Vec<FoldResult>,
}

impl From<&RepeatResult> for RepeatSummary {
    fn from(r: &RepeatResult) -> Self {
        RepeatSummary {
            repeat: r.repeat,
            seed: r.seed,
            counts: r.cv.pooled,
            metrics: r.cv.metrics,
            error_rate_normal_test: r.error_rate_normal_test,
            normal_test_dimms: r.normal_test_dimms,
            folds: r.cv.folds.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub mode: Mode,
    pub window_hours: f64,
    pub n_normal: usize,
    pub lead_hours: f64,
    pub precision: Stat,
    pub recall: Stat,
    pub error_rate_normal_test: Option<Stat>,
    pub repeats: Vec<RepeatSummary>,
}

impl ReportRow {
    pub fn from_repeats(mode: Mode, window_hours: f64, n_normal: usize, lead_hours: f64, repeats: &[RepeatResult]) -> Self {
        let p: Vec<f64> = repeats.iter().map(|r| r.cv.metrics.precision).collect();
        let r: Vec<f64> = repeats.iter().map(|r| r.cv.metrics.recall).collect();
        let e: Vec<f64> = repeats.iter().filter_map(|r| r.error_rate_normal_test).collect();
        ReportRow {
            mode,
            window_hours,
            n_normal,
            lead_hours,
            precision: Stat::of(&p).expect("at least one repeat"),
            recall: Stat::of(&r).expect("at least one repeat"),
            error_rate_normal_test: Stat::of(&e),
            repeats: repeats.iter().map(RepeatSummary::from).collect(),
        }
    }
}

/// Overall-mode gain over fixed mode for one `(w, n_normal)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub window_hours: f64,
    pub n_normal: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub format: String,
    pub catalog_version: String,
    pub rows: Vec<ReportRow>,
    pub baselines: Vec<BaselineSweep>,
    pub improvements: Vec<Improvement>,
}

impl EvalReport {
    pub fn row(&self, mode: Mode, window_hours: f64, n_normal: usize) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.mode == mode && r.window_hours == window_hours && r.n_normal == n_normal)
    }

    pub fn baseline(&self, window_hours: f64) -> Option<&BaselineSweep> {
        self.baselines.iter().find(|b| b.window_hours == window_hours)
    }

    fn compute_improvements(&mut self) {
        self.improvements.clear();
        for over in self.rows.iter().filter(|r| r.mode == Mode::Overall) {
            let Some(fixed) = self.row(Mode::Fixed, over.window_hours, over.n_normal) else { continue };
            self.improvements.push(Improvement {
                window_hours: over.window_hours,
                n_normal: over.n_normal,
                precision: relative_improvement(over.precision.mean, fixed.precision.mean).ok(),
                recall: relative_improvement(over.recall.mean, fixed.recall.mean).ok(),
            });
        }
    }

    /// Plain-text table in the layout of the published comparison.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<8} {:>6} {:>8}  {:<15} {:<15} {:<15}",
            "mode", "w(h)", "n_normal", "precision", "recall", "error_rate"
        );
        let cell = |s: &Stat| format!("{:.3} ± {:.3}", s.mean, s.std);
        for r in &self.rows {
            let err = r.error_rate_normal_test.as_ref().map_or_else(|| "n/a".to_string(), cell);
            let _ = writeln!(
                out,
                "{:<8} {:>6} {:>8}  {:<15} {:<15} {:<15}",
                r.mode.as_str(),
                r.window_hours,
                r.n_normal,
                cell(&r.precision),
                cell(&r.recall),
                err
            );
        }
        for b in &self.baselines {
            for (name, p) in [("best precision", b.best_precision), ("best recall", b.best_recall)] {
                if let Some(p) = p {
                    let _ = writeln!(
                        out,
                        "baseline {:>6} {name:<15} threshold {:.4}/h  precision {:.3}  recall {:.3}  error_rate {:.3}",
                        b.window_hours, p.threshold, p.precision, p.recall, p.error_rate
                    );
                }
            }
        }
        let pct = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{:+.1}%", x * 100.0));
        for i in &self.improvements {
            let _ = writeln!(
                out,
                "overall vs fixed  w={} n_normal={}: precision {}  recall {}",
                i.window_hours,
                i.n_normal,
                pct(i.precision),
                pct(i.recall)
            );
        }
        out
    }
}

/// Baseline sweep CSV: `threshold,precision,recall,error_rate`.
pub fn write_sweep_csv<W: std::io::Write>(sweep: &BaselineSweep, out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["threshold", "precision", "recall", "error_rate"])?;
    for p in &sweep.sweep {
        w.write_record([
            p.threshold.to_string(),
            p.precision.to_string(),
            p.recall.to_string(),
            p.error_rate.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub windows: Vec<f64>,
    pub modes: Vec<Mode>,
    pub n_normals: Vec<usize>,
    pub lead_hours: f64,
    pub repeats: usize,
    /// Repeat `r` samples with seed `seed + r`.
    pub seed: u64,
    pub eval: EvalConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            windows: vec![168.0],
            modes: vec![Mode::Overall, Mode::Fixed],
            n_normals: vec![1000],
            lead_hours: 3.0,
            repeats: 5,
            seed: 0,
            eval: EvalConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: &str| Err(EvalError::Config(m.to_string()));
        if self.windows.is_empty() || self.modes.is_empty() || self.n_normals.is_empty() {
            return bad("windows, modes and n_normals must be non-empty");
        }
        if self.repeats == 0 {
            return bad("repeats must be at least 1");
        }
        if self.eval.folds < 2 {
            return bad("folds must be at least 2");
        }
        if !(self.eval.threshold > 0.0 && self.eval.threshold < 1.0) {
            return bad("threshold must lie in (0, 1)");
        }
        if !(self.lead_hours.is_finite() && self.lead_hours >= 0.0) {
            return bad("lead time must be a non-negative number of hours");
        }
        for &w in &self.windows {
            WindowConfig::new(w, Mode::Overall).map_err(|e| EvalError::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn repeat_seeds(&self) -> Vec<u64> {
        (0..self.repeats as u64).map(|r| self.seed.wrapping_add(r)).collect()
    }
}

/// Runs every `(mode, w, n_normal)` cell plus one baseline sweep per `w`.
/// Repeats run in parallel; results are assembled in a fixed order.
pub fn run_experiment<L: Learner>(
    streams: &BTreeMap<DimmId, Vec<CeRecord>>,
    failures: &[FailureRecord],
    learner: &L,
    cfg: &ExperimentConfig,
) -> Result<EvalReport, EvalError> {
    cfg.validate()?;
    let seeds = cfg.repeat_seeds();
    let mut report = EvalReport {
        format: REPORT_FORMAT.to_string(),
        catalog_version: CATALOG_VERSION.to_string(),
        rows: Vec::new(),
        baselines: Vec::new(),
        improvements: Vec::new(),
    };
    for &w in &cfg.windows {
        for &mode in &cfg.modes {
            let window = WindowConfig::new(w, mode).map_err(|e| EvalError::Config(e.to_string()))?;
            let series = build_series(streams, failures, &window, cfg.lead_hours)?;
            for &n_normal in &cfg.n_normals {
                let splits = sample_splits(&series, n_normal, &seeds, &window, cfg.lead_hours)?;
                let repeats: Vec<RepeatResult> = splits
                    .par_iter()
                    .map(|s| evaluate_split(&series, s, learner, &cfg.eval))
                    .collect::<Result<_, _>>()?;
                let row = ReportRow::from_repeats(mode, w, n_normal, cfg.lead_hours, &repeats);
                info!(
                    "{mode} w={w} n_normal={n_normal}: precision {:.3} recall {:.3}",
                    row.precision.mean, row.recall.mean
                );
                report.rows.push(row);
            }
        }
        let inputs = baseline_inputs(streams, failures, cfg.lead_hours);
        report.baselines.push(threshold_baseline(&inputs, w)?);
    }
    report.compute_improvements();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(prefix: &str, n: usize) -> Vec<DimmId> {
        (0..n).map(|i| DimmId::new(format!("{prefix}{i}")).unwrap()).collect()
    }

    #[test]
    fn metric_formulas() {
        let m = metrics(&ConfusionCounts { tp: 3, fp: 1, fn_: 2, tn: 0 });
        assert_eq!((m.precision, m.recall), (0.75, 0.6));
        assert!(!m.precision_undefined && !m.recall_undefined);
        let m = metrics(&ConfusionCounts { tp: 0, fp: 0, fn_: 4, tn: 0 });
        assert_eq!(m.precision, 0.0);
        assert!(m.precision_undefined);
        let m = metrics(&ConfusionCounts { tp: 0, fp: 0, fn_: 0, tn: 9 });
        assert!(m.precision_undefined && m.recall_undefined);
        assert_eq!((m.precision, m.recall), (0.0, 0.0));
        assert_eq!(error_rate_normal(&[false; 9]).unwrap(), 0.0);
    }

    #[test]
    fn normal_error_rate() {
        let mut flags = vec![false; 100];
        for f in flags.iter_mut().take(4) {
            *f = true;
        }
        assert_eq!(error_rate_normal(&flags).unwrap(), 0.04);
        assert_eq!(error_rate_normal(&[false; 10]).unwrap(), 0.0);
        assert_eq!(error_rate_normal(&[true; 10]).unwrap(), 1.0);
        assert!(matches!(error_rate_normal(&[]), Err(EvalError::EmptyNormalTest)));
    }

    #[test]
    fn relative_improvement_examples() {
        let sig3 = |x: f64| format!("{:.2e}", x);
        assert_eq!(sig3(relative_improvement(0.48, 0.44).unwrap()), "9.09e-2");
        assert_eq!(sig3(relative_improvement(0.41, 0.37).unwrap()), "1.08e-1");
        assert_eq!(relative_improvement(0.3, 0.3).unwrap(), 0.0);
        assert!(matches!(relative_improvement(0.3, 0.0), Err(EvalError::ZeroReference)));
    }

    #[test]
    fn folds_are_stratified_and_deterministic() {
        let failed = ids("f", 360);
        let normal = ids("n", 5000);
        let folds = assign_folds(&failed, &normal, 10, 1).unwrap();
        for fold in &folds {
            let nf = fold.iter().filter(|d| d.as_str().starts_with('f')).count();
            assert!((35..=37).contains(&nf), "{nf}");
        }
        assert_eq!(folds, assign_folds(&failed, &normal, 10, 1).unwrap());
        let all: BTreeSet<&DimmId> = folds.iter().flatten().collect();
        assert_eq!(all.len(), 5360);
        assert_eq!(folds.iter().map(|f| f.len()).sum::<usize>(), 5360);
    }

    #[test]
    fn too_many_folds_is_an_error() {
        let err = assign_folds(&ids("f", 3), &ids("n", 50), 5, 0).unwrap_err();
        assert!(matches!(err, EvalError::FoldWithoutFailures { failed: 3, k: 5, .. }));
        assert!(err.to_string().contains("smaller k"));
    }

    #[test]
    fn stats_are_population_moments() {
        let s = Stat::of(&[0.5, 0.5, 0.5]).unwrap();
        assert_eq!((s.mean, s.std), (0.5, 0.0));
        let s = Stat::of(&[1.0, 3.0]).unwrap();
        assert_eq!((s.mean, s.std, s.min, s.max), (2.0, 1.0, 1.0, 3.0));
        assert!(Stat::of(&[]).is_none());
    }

    #[test]
    fn max_window_rate_counts_the_densest_window() {
        let h = 3600;
        // three events within 2h, window 2h: (t-2h, t] holds at most 2 of 0,1h,2h
        assert_eq!(max_window_rate(&[0, h, 2 * h], 2.0), 1.0);
        assert_eq!(max_window_rate(&[0, h, 2 * h], 3.0), 1.0);
        assert_eq!(max_window_rate(&[0, 0, 0, 10 * h], 1.0), 3.0);
        assert_eq!(max_window_rate(&[], 5.0), 0.0);
    }

    fn input(name: &str, failed: bool, n: usize) -> BaselineInput {
        BaselineInput { dimm: DimmId::new(name).unwrap(), failed, timestamps: (0..n as i64).collect() }
    }

    #[test]
    fn baseline_sweep_extremes() {
        let inputs = vec![input("a", true, 5), input("b", true, 1), input("c", false, 3), input("d", false, 1)];
        let s = threshold_baseline(&inputs, 1.0).unwrap();
        assert_eq!(s.sweep.len(), 3);
        let lowest = s.sweep[0];
        assert_eq!(lowest.recall, 1.0);
        assert_eq!(lowest.error_rate, 1.0);
        let bp = s.best_precision.unwrap();
        assert_eq!((bp.threshold, bp.precision, bp.recall), (5.0, 1.0, 0.5));
        let br = s.best_recall.unwrap();
        assert_eq!((br.recall, br.precision), (1.0, 0.5));
        // above every observed rate nothing is flagged
        let mut c = ConfusionCounts::default();
        for i in &inputs {
            c.record(i.failed, max_window_rate(&i.timestamps, 1.0) >= 6.0);
        }
        let m = metrics(&c);
        assert_eq!(m.recall, 0.0);
        assert!(m.precision_undefined);
    }

    #[test]
    fn sweep_csv_layout() {
        let s = threshold_baseline(&[input("a", true, 2), input("b", false, 1)], 1.0).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("threshold,precision,recall,error_rate"));
        assert_eq!(text.lines().count(), 3);
    }

    proptest! {
        #[test]
        fn baseline_recall_never_rises_with_threshold(
            dimms in proptest::collection::vec((any::<bool>(), proptest::collection::vec(0i64..50_000, 0..30)), 1..40),
            w in 0.5f64..20.0,
        ) {
            let inputs: Vec<BaselineInput> = dimms
                .into_iter()
                .enumerate()
                .map(|(i, (failed, mut ts))| {
                    ts.sort_unstable();
                    BaselineInput { dimm: DimmId::new(format!("d{i}")).unwrap(), failed, timestamps: ts }
                })
                .collect();
            let s = threshold_baseline(&inputs, w).unwrap();
            let distinct: BTreeSet<u64> =
                inputs.iter().map(|i| max_window_rate(&i.timestamps, w).to_bits()).collect();
            prop_assert_eq!(s.sweep.len(), distinct.len());
            for pair in s.sweep.windows(2) {
                prop_assert!(pair[0].threshold < pair[1].threshold);
                prop_assert!(pair[1].recall <= pair[0].recall);
                prop_assert!(pair[1].error_rate <= pair[0].error_rate);
            }
        }

        #[test]
        fn folds_partition_the_dimm_set(nf in 2usize..30, nn in 0usize..200, k in 2usize..6, seed in any::<u64>()) {
            prop_assume!(nf >= k);
            let failed = ids("f", nf);
            let normal = ids("n", nn);
            let folds = assign_folds(&failed, &normal, k, seed).unwrap();
            let mut seen = BTreeSet::new();
            for f in &folds {
                for d in f {
                    prop_assert!(seen.insert(d.clone()), "duplicate {}", d);
                }
            }
            prop_assert_eq!(seen.len(), nf + nn);
        }
    }
}
