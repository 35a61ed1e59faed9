//! Degradation labels for failed DIMMs, lead-time exclusion, and
//! construction of the repeated train/test splits.

use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::celog::{CeRecord, DimmId, FailureRecord};
use crate::fengine::{extract_stream, FeatureError, FeatureVector, Mode, WindowConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabelError {
    #[error("cannot split an empty CE sequence")]
    EmptySequence,
    #[error("requested {requested} normal DIMMs for training but only {available} are available")]
    NotEnoughNormals { requested: usize, available: usize },
    #[error("at least one repeat seed is required")]
    NoRepeats,
    #[error("lead time must be a non-negative number of hours, got {0}")]
    BadLeadTime(f64),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// A feature vector of one CE event with its degradation label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub dimm: DimmId,
    pub ts: i64,
    pub features: FeatureVector,
    pub label: u8,
}

/// Index `k` of the first CE after the largest inter-arrival gap: events
/// `[0, k)` are healthy, `[k, n)` degraded. Ties go to the earliest gap and
/// a lone event is degraded (`k = 0`).
pub fn largest_gap_split(timestamps: &[i64]) -> Result<usize, LabelError> {
    if timestamps.is_empty() {
        return Err(LabelError::EmptySequence);
    }
    let mut best = 0;
    let mut best_gap = i64::MIN;
    for k in 1..timestamps.len() {
        let gap = timestamps[k] - timestamps[k - 1];
        if gap > best_gap {
            best_gap = gap;
            best = k;
        }
    }
    Ok(best)
}

/// Per-event labels of a failed DIMM's stream.
pub fn gap_labels(timestamps: &[i64]) -> Result<Vec<u8>, LabelError> {
    let k = largest_gap_split(timestamps)?;
    Ok((0..timestamps.len()).map(|i| u8::from(i >= k)).collect())
}

pub(crate) fn lead_secs(lead_hours: f64) -> f64 {
    lead_hours * 3600.0
}

/// Drops samples inside the lead window `(failure_time - m, ...)`.
pub fn exclude_lead_time(samples: Vec<LabeledSample>, failure_time: i64, lead_hours: f64) -> Vec<LabeledSample> {
    let cutoff = failure_time as f64 - lead_secs(lead_hours);
    let dimm = samples.first().map(|s| s.dimm.clone());
    let kept: Vec<_> = samples.into_iter().filter(|s| s.ts as f64 <= cutoff).collect();
    if let (Some(dimm), true) = (dimm, kept.is_empty()) {
        warn!("{dimm}: every sample falls inside the lead window before failure at {failure_time}");
    }
    kept
}

/// Labeled, lead-time-filtered samples of one DIMM in time order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimmSeries {
    pub dimm: DimmId,
    pub failure_time: Option<i64>,
    pub samples: Vec<LabeledSample>,
    /// Samples removed by lead-time exclusion.
    pub excluded: usize,
}

impl DimmSeries {
    pub fn failed(&self) -> bool {
        self.failure_time.is_some()
    }
}

/// Labels the chronological feature rows of one DIMM. Failed DIMMs get gap
/// labels computed on the full sequence, then lose their lead-window rows;
/// normal DIMMs are all label 0.
pub fn label_series(
    dimm: DimmId,
    rows: Vec<(i64, FeatureVector)>,
    failure_time: Option<i64>,
    lead_hours: f64,
) -> Result<DimmSeries, LabelError> {
    let labels = match failure_time {
        Some(_) if !rows.is_empty() => gap_labels(&rows.iter().map(|r| r.0).collect::<Vec<_>>())?,
        _ => vec![0; rows.len()],
    };
    let samples: Vec<LabeledSample> = rows
        .into_iter()
        .zip(labels)
        .map(|((ts, features), label)| LabeledSample { dimm: dimm.clone(), ts, features, label })
        .collect();
    let total = samples.len();
    let samples = match failure_time {
        Some(ft) => exclude_lead_time(samples, ft, lead_hours),
        None => samples,
    };
    Ok(DimmSeries { excluded: total - samples.len(), dimm, failure_time, samples })
}

/// Groups records by DIMM, keeping file order within each DIMM.
pub fn group_by_dimm(records: &[CeRecord]) -> BTreeMap<DimmId, Vec<CeRecord>> {
    let mut out: BTreeMap<DimmId, Vec<CeRecord>> = BTreeMap::new();
    for r in records {
        out.entry(r.dimm.clone()).or_default().push(r.clone());
    }
    out
}

/// Extracts features for every DIMM stream and labels them. DIMMs listed
/// in `failures` but absent from `streams` have no samples and are skipped.
pub fn build_series(
    streams: &BTreeMap<DimmId, Vec<CeRecord>>,
    failures: &[FailureRecord],
    window: &WindowConfig,
    lead_hours: f64,
) -> Result<BTreeMap<DimmId, DimmSeries>, LabelError> {
    if !(lead_hours.is_finite() && lead_hours >= 0.0) {
        return Err(LabelError::BadLeadTime(lead_hours));
    }
    let failed: BTreeMap<&DimmId, i64> = failures.iter().map(|f| (&f.dimm, f.failure_time)).collect();
    for f in failures {
        if !streams.contains_key(&f.dimm) {
            warn!("failed DIMM {} has no CEs after filtering; skipped", f.dimm);
        }
    }
    let entries: Vec<(&DimmId, &Vec<CeRecord>)> = streams.iter().collect();
    let series: Result<Vec<DimmSeries>, LabelError> = entries
        .par_iter()
        .map(|(dimm, events)| {
            let rows = extract_stream(dimm, events, window)?;
            label_series((*dimm).clone(), rows, failed.get(dimm).copied(), lead_hours)
        })
        .collect();
    Ok(series?.into_iter().map(|s| (s.dimm.clone(), s)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitMeta {
    pub lead_hours: f64,
    pub window_hours: f64,
    pub mode: Mode,
    pub n_normal: usize,
    pub repeat: usize,
    pub seed: u64,
}

/// One sampling repeat: every failed DIMM plus `n_normal` sampled normal
/// DIMMs for cross-validation; the remaining normal DIMMs are held out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub failed: Vec<DimmId>,
    pub train_normal: Vec<DimmId>,
    pub normal_test_dimms: Vec<DimmId>,
    pub meta: SplitMeta,
}

impl DatasetSplit {
    /// DIMMs whose samples form the training/CV set, failed first.
    pub fn train_dimms(&self) -> impl Iterator<Item = &DimmId> {
        self.failed.iter().chain(&self.train_normal)
    }

    pub fn train_samples<'a>(&self, series: &'a BTreeMap<DimmId, DimmSeries>) -> Vec<&'a LabeledSample> {
        self.train_dimms().filter_map(|d| series.get(d)).flat_map(|s| &s.samples).collect()
    }
}

/// Draws the per-repeat normal-DIMM subsamples. Deterministic in the seeds.
pub fn sample_splits(
    series: &BTreeMap<DimmId, DimmSeries>,
    n_normal: usize,
    seeds: &[u64],
    window: &WindowConfig,
    lead_hours: f64,
) -> Result<Vec<DatasetSplit>, LabelError> {
    if seeds.is_empty() {
        return Err(LabelError::NoRepeats);
    }
    let failed: Vec<DimmId> = series.values().filter(|s| s.failed()).map(|s| s.dimm.clone()).collect();
    let normal: Vec<DimmId> = series.values().filter(|s| !s.failed()).map(|s| s.dimm.clone()).collect();
    if n_normal > normal.len() {
        return Err(LabelError::NotEnoughNormals { requested: n_normal, available: normal.len() });
    }
    if n_normal == normal.len() {
        warn!("n_normal equals the normal population ({n_normal}); the normal test set is empty");
    }
    Ok(seeds
        .iter()
        .enumerate()
        .map(|(repeat, &seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let chosen: BTreeSet<&DimmId> = normal.choose_multiple(&mut rng, n_normal).collect();
            let train_normal: Vec<DimmId> = chosen.iter().map(|d| (*d).clone()).collect();
            let normal_test_dimms = normal.iter().filter(|d| !chosen.contains(d)).cloned().collect();
            DatasetSplit {
                failed: failed.clone(),
                train_normal,
                normal_test_dimms,
                meta: SplitMeta {
                    lead_hours,
                    window_hours: window.window_hours,
                    mode: window.mode,
                    n_normal,
                    repeat,
                    seed,
                },
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssembleConfig {
    pub window: WindowConfig,
    pub lead_hours: f64,
    pub n_normal: usize,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub series: BTreeMap<DimmId, DimmSeries>,
    pub splits: Vec<DatasetSplit>,
}

/// Feature extraction, labeling and repeated normal-DIMM sampling.
pub fn assemble(
    streams: &BTreeMap<DimmId, Vec<CeRecord>>,
    failures: &[FailureRecord],
    cfg: &AssembleConfig,
) -> Result<Dataset, LabelError> {
    let series = build_series(streams, failures, &cfg.window, cfg.lead_hours)?;
    let splits = sample_splits(&series, cfg.n_normal, &cfg.seeds, &cfg.window, cfg.lead_hours)?;
    Ok(Dataset { series, splits })
}
