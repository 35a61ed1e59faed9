use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use memfail::celog::{
    filter_records, parse_stream, read_failures, write_failures, write_stream, CeRecord, DimmId, FailureRecord,
    FilterOptions, ParseOptions,
};
use memfail::evalharness::{run_experiment, write_sweep_csv, EvalConfig, ExperimentConfig};
use memfail::featfile::{read_feature_file, write_header, FeatureFile, FeatureFileMeta, RowWriter, SplitManifest};
use memfail::fengine::{catalog_document, extract_stream, Mode, WindowConfig};
use memfail::forest::{predict_dimm, train as fit_forest, Classifier, ForestParams, TrainedForest};
use memfail::labeling::{group_by_dimm, label_series, sample_splits, DimmSeries, LabeledSample};
use memfail::simgen::{generate, FleetConfig};
use rayon::prelude::*;

use crate::output::{io_err, Staged};
use crate::params::*;
use crate::{CliError, CliResult};

fn required<T>(v: Option<T>, flag: &str) -> CliResult<T> {
    v.ok_or_else(|| CliError::Usage(format!("missing required parameter --{flag}")))
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn data(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| io_err(path, e))
}

fn repeat_seeds(seed: u64, repeats: usize) -> Vec<u64> {
    (0..repeats as u64).map(|r| seed.wrapping_add(r)).collect()
}

/// Parses a CE log and applies the default preprocessing filter.
fn load_log(path: &Path) -> CliResult<Vec<CeRecord>> {
    let report = parse_stream(open(path)?, &ParseOptions::default()).map_err(|e| io_err(path, e))?;
    if let Some(first) = report.errors.first() {
        warn!(
            "{}: skipped {} malformed line(s); first at line {}: {}",
            path.display(),
            report.errors.len(),
            first.line,
            first.message
        );
    }
    let kept = filter_records(&report.records, &FilterOptions::default());
    info!("{}: {} records, {} after filtering", path.display(), report.records.len(), kept.len());
    Ok(kept)
}

fn load_failures(path: &Path) -> CliResult<Vec<FailureRecord>> {
    read_failures(open(path)?).map_err(|e| io_err(path, e))
}

fn load_features(path: &Path) -> CliResult<FeatureFile> {
    read_feature_file(open(path)?).map_err(|e| io_err(path, e))
}

fn forest_params(f: ForestFlags) -> CliResult<ForestParams> {
    let d = ForestParams::default();
    let p = ForestParams {
        n_trees: f.n_trees.unwrap_or(d.n_trees),
        max_depth: f.max_depth,
        min_samples_split: f.min_samples_split.unwrap_or(d.min_samples_split),
        features_per_split: f.features_per_split,
        seed: f.forest_seed.unwrap_or(d.seed),
    };
    p.validate().map_err(usage)?;
    Ok(p)
}

fn to_json<T: serde::Serialize>(value: &T, w: &mut impl Write, dest: &Path) -> CliResult<()> {
    serde_json::to_writer_pretty(&mut *w, value).map_err(|e| CliError::Internal(e.to_string()))?;
    w.write_all(b"\n").map_err(|e| io_err(dest, e))
}

pub fn simulate(p: SimulateParams) -> CliResult<()> {
    let log = required(p.log, "log")?;
    let failures = required(p.failures, "failures")?;
    let manifest = required(p.manifest, "manifest")?;
    let mut cfg = p.fleet.unwrap_or_else(FleetConfig::default);
    cfg.n_normal = p.n_normal.unwrap_or(cfg.n_normal);
    cfg.n_failing = p.n_failing.unwrap_or(cfg.n_failing);
    cfg.duration_hours = p.duration_hours.unwrap_or(cfg.duration_hours);
    cfg.benign_burst_fraction = p.benign_burst_fraction.unwrap_or(cfg.benign_burst_fraction);
    cfg.seed = p.seed.unwrap_or(cfg.seed);
    cfg.validate().map_err(usage)?;

    let fleet = generate(&cfg).map_err(usage)?;
    info!("simulated {} records, {} failures", fleet.records.len(), fleet.failures.len());
    let mut out = Staged::new();
    out.write(&log, |w| write_stream(&fleet.records, w).map_err(|e| io_err(&log, e)))?;
    out.write(&failures, |w| write_failures(&fleet.failures, w).map_err(|e| io_err(&failures, e)))?;
    out.write(&manifest, |w| to_json(&fleet.manifest, w, &manifest))?;
    out.commit()
}

pub fn extract(p: ExtractParams) -> CliResult<()> {
    let log = required(p.log, "log")?;
    let dest = required(p.out, "out")?;
    let window = WindowConfig::new(required(p.window_hours, "window-hours")?, p.mode.unwrap_or(Mode::Overall))
        .map_err(usage)?;

    let records = load_log(&log)?;
    let streams = group_by_dimm(&records);
    let entries: Vec<(&DimmId, &Vec<CeRecord>)> = streams.iter().collect();
    let rows: Vec<_> = entries
        .par_iter()
        .map(|(dimm, events)| extract_stream(dimm, events, &window).map(|rows| (*dimm, rows)))
        .collect::<Result<_, _>>()
        .map_err(data)?;

    let meta = FeatureFileMeta::new(&window, None);
    let mut out = Staged::new();
    out.write(&dest, |w| {
        write_header(&meta, w).map_err(|e| io_err(&dest, e))?;
        let mut rw = RowWriter::new(w);
        for (dimm, rows) in &rows {
            for (ts, fv) in rows {
                rw.write(dimm, *ts, None, fv.values()).map_err(|e| io_err(&dest, e))?;
            }
        }
        rw.finish().map_err(|e| io_err(&dest, e))?;
        Ok(())
    })?;
    out.commit()
}

pub fn label(p: LabelParams) -> CliResult<()> {
    let features = required(p.features, "features")?;
    let failures_path = required(p.failures, "failures")?;
    let dest = required(p.out, "out")?;
    let splits_path = required(p.splits, "splits")?;
    let lead = p.lead_hours.unwrap_or(3.0);
    if !(lead.is_finite() && lead >= 0.0) {
        return Err(CliError::Usage(format!("--lead-hours must be non-negative, got {lead}")));
    }
    let n_normal = required(p.n_normal, "n-normal")?;
    let repeats = p.repeats.unwrap_or(5);
    if repeats == 0 {
        return Err(CliError::Usage("--repeats must be at least 1".into()));
    }
    let seeds = repeat_seeds(p.seed.unwrap_or(0), repeats);

    let file = load_features(&features)?;
    let window = file.meta.window().map_err(data)?;
    let failures = load_failures(&failures_path)?;
    let failed: BTreeMap<&DimmId, i64> = failures.iter().map(|f| (&f.dimm, f.failure_time)).collect();
    let grouped = file.by_dimm();
    for f in &failures {
        if !grouped.contains_key(&f.dimm) {
            warn!("failed DIMM {} has no feature rows", f.dimm);
        }
    }
    let mut series: BTreeMap<DimmId, DimmSeries> = BTreeMap::new();
    for (dimm, rows) in grouped {
        if rows.windows(2).any(|w| w[0].ts > w[1].ts) {
            return Err(CliError::Data(format!("{}: rows of {dimm} are not in time order", features.display())));
        }
        let rows = rows.into_iter().map(|r| (r.ts, r.features.clone())).collect();
        let s = label_series(dimm.clone(), rows, failed.get(&dimm).copied(), lead).map_err(data)?;
        series.insert(dimm, s);
    }
    let splits = sample_splits(&series, n_normal, &seeds, &window, lead).map_err(data)?;

    let meta = FeatureFileMeta::new(&window, Some(lead));
    let mut out = Staged::new();
    out.write(&dest, |w| {
        write_header(&meta, w).map_err(|e| io_err(&dest, e))?;
        let mut rw = RowWriter::new(w);
        for s in series.values().flat_map(|s| &s.samples) {
            rw.write(&s.dimm, s.ts, Some(s.label), s.features.values()).map_err(|e| io_err(&dest, e))?;
        }
        rw.finish().map_err(|e| io_err(&dest, e))?;
        Ok(())
    })?;
    out.write(&splits_path, |w| to_json(&SplitManifest::new(splits), w, &splits_path))?;
    out.commit()
}

pub fn train(p: TrainParams, forest: ForestFlags) -> CliResult<()> {
    let features = required(p.features, "features")?;
    let dest = required(p.model, "model")?;
    let params = forest_params(forest)?;

    let file = load_features(&features)?;
    let mut samples: Vec<LabeledSample> = file.labeled_samples().map_err(|e| io_err(&features, e))?;
    if let Some(splits_path) = &p.splits {
        let text = std::fs::read_to_string(splits_path).map_err(|e| io_err(splits_path, e))?;
        let manifest: SplitManifest = serde_json::from_str(&text).map_err(|e| io_err(splits_path, e))?;
        if manifest.catalog != file.meta.catalog {
            return Err(CliError::Data(format!(
                "split manifest catalog {} does not match feature catalog {}",
                manifest.catalog, file.meta.catalog
            )));
        }
        let repeat = p.repeat.unwrap_or(0);
        let split = manifest
            .splits
            .iter()
            .find(|s| s.meta.repeat == repeat)
            .ok_or_else(|| CliError::Usage(format!("split manifest has no repeat {repeat}")))?;
        let keep: BTreeSet<&DimmId> = split.train_dimms().collect();
        samples.retain(|s| keep.contains(&s.dimm));
    }
    let refs: Vec<&LabeledSample> = samples.iter().collect();
    let model = fit_forest(&refs, &params).map_err(data)?;
    let json = model.to_json().map_err(|e| CliError::Internal(e.to_string()))?;
    let mut out = Staged::new();
    out.write(&dest, |w| w.write_all(json.as_bytes()).map_err(|e| io_err(&dest, e)))?;
    out.commit()
}

pub fn predict(p: PredictParams) -> CliResult<()> {
    let model_path = required(p.model, "model")?;
    let features = required(p.features, "features")?;
    let dest = required(p.out, "out")?;
    let threshold = p.threshold.unwrap_or(0.5);
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(CliError::Usage(format!("--threshold must lie in (0, 1), got {threshold}")));
    }

    let text = std::fs::read_to_string(&model_path).map_err(|e| io_err(&model_path, e))?;
    let model = TrainedForest::from_json(&text).map_err(|e| io_err(&model_path, e))?;
    let file = load_features(&features)?;
    model.check_catalog(&file.meta.catalog).map_err(data)?;
    if model.n_features() != memfail::fengine::FEATURE_COUNT {
        return Err(CliError::Data(format!(
            "model expects {} features, catalog has {}",
            model.n_features(),
            memfail::fengine::FEATURE_COUNT
        )));
    }
    let grouped = file.by_dimm();
    let mut verdicts = Vec::with_capacity(grouped.len());
    for (dimm, rows) in &grouped {
        let v = predict_dimm(&model, rows.iter().map(|r| (r.ts, r.features.values())), threshold).map_err(data)?;
        verdicts.push((dimm, v));
    }
    let mut out = Staged::new();
    out.write(&dest, |w| {
        writeln!(w, "dimm,fail,first_alarm_ts,max_proba").map_err(|e| io_err(&dest, e))?;
        for (dimm, v) in &verdicts {
            let alarm = v.first_alarm_ts.map(|t| t.to_string()).unwrap_or_default();
            writeln!(w, "{},{},{},{}", csv_field(dimm.as_str()), u8::from(v.fail), alarm, v.max_proba)
                .map_err(|e| io_err(&dest, e))?;
        }
        Ok(())
    })?;
    out.commit()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn evaluate(p: EvaluateParams, forest: ForestFlags) -> CliResult<()> {
    let log = required(p.log, "log")?;
    let failures_path = required(p.failures, "failures")?;
    let out_dir = required(p.out_dir, "out-dir")?;
    let defaults = ExperimentConfig::default();
    let modes = match p.mode.as_deref().unwrap_or("both") {
        "overall" => vec![Mode::Overall],
        "fixed" => vec![Mode::Fixed],
        "both" => vec![Mode::Overall, Mode::Fixed],
        other => return Err(CliError::Usage(format!("unknown mode {other:?}"))),
    };
    let cfg = ExperimentConfig {
        windows: p.windows.filter(|w| !w.is_empty()).unwrap_or(defaults.windows),
        modes,
        n_normals: p.n_normals.filter(|n| !n.is_empty()).unwrap_or(defaults.n_normals),
        lead_hours: p.lead_hours.unwrap_or(defaults.lead_hours),
        repeats: p.repeats.unwrap_or(defaults.repeats),
        seed: p.seed.unwrap_or(defaults.seed),
        eval: EvalConfig {
            folds: p.folds.unwrap_or(defaults.eval.folds),
            threshold: p.threshold.unwrap_or(defaults.eval.threshold),
        },
    };
    cfg.validate().map_err(usage)?;
    let params = forest_params(forest)?;
    if !out_dir.is_dir() {
        return Err(CliError::Data(format!("{}: not a directory", out_dir.display())));
    }

    let records = load_log(&log)?;
    let failures = load_failures(&failures_path)?;
    let streams = group_by_dimm(&records);
    let report = run_experiment(&streams, &failures, &params, &cfg).map_err(data)?;

    let mut out = Staged::new();
    let json_path = out_dir.join("report.json");
    out.write(&json_path, |w| to_json(&report, w, &json_path))?;
    let table_path = out_dir.join("report.txt");
    out.write(&table_path, |w| w.write_all(report.render_table().as_bytes()).map_err(|e| io_err(&table_path, e)))?;
    for b in &report.baselines {
        let path: PathBuf = out_dir.join(format!("baseline_w{}.csv", b.window_hours));
        out.write(&path, |w| write_sweep_csv(b, w).map_err(|e| io_err(&path, e)))?;
    }
    out.commit()
}

pub fn catalog(p: CatalogParams) -> CliResult<()> {
    let doc = catalog_document();
    match p.out {
        Some(dest) => {
            let mut out = Staged::new();
            out.write(&dest, |w| w.write_all(doc.as_bytes()).map_err(|e| io_err(&dest, e)))?;
            out.commit()
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(doc.as_bytes()).map_err(|e| CliError::Internal(e.to_string()))
        }
    }
}
