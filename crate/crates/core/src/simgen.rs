//! Seeded synthetic fleet: CE logs, failure records and a ground-truth
//! manifest from two-phase (precursor, burst) fault models.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::celog::{CeRecord, DimmId, FailureRecord, Geometry, CE_READ, CE_SCRUB, UCE_READ};

pub const MANIFEST_FORMAT: &str = "memfail-manifest/1";
const HOUR: f64 = 3600.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid fleet config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    Transient,
    StuckCell,
    FaultyRow,
    FaultyColumn,
    FaultyBank,
}

impl FaultKind {
    pub const LOCALIZED: [FaultKind; 4] =
        [FaultKind::StuckCell, FaultKind::FaultyRow, FaultKind::FaultyColumn, FaultKind::FaultyBank];
}

/// Two-phase schedule: precursor CEs at `precursor_rate` for
/// `precursor_hours`, then burst CEs at `burst_rate` for `burst_hours`
/// ending at the failure time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FaultModel {
    pub precursor_rate: f64,
    pub precursor_hours: f64,
    pub burst_rate: f64,
    pub burst_hours: f64,
    /// Per-DIMM burst rates are log-uniform in
    /// `[burst_rate_min_factor * burst_rate, burst_rate]`.
    pub burst_rate_min_factor: f64,
    /// Chance that a fault CE lands next to the locus instead of on it.
    pub p_adj: f64,
}

impl Default for FaultModel {
    fn default() -> Self {
        FaultModel {
            precursor_rate: 0.01,
            precursor_hours: 500.0,
            burst_rate: 1.0,
            burst_hours: 48.0,
            burst_rate_min_factor: 1.0,
            p_adj: 0.1,
        }
    }
}

/// Shares of the failing population per fault kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Mixture {
    pub stuck_cell: f64,
    pub faulty_row: f64,
    pub faulty_column: f64,
    pub faulty_bank: f64,
}

impl Default for Mixture {
    fn default() -> Self {
        Mixture { stuck_cell: 0.40, faulty_row: 0.25, faulty_column: 0.25, faulty_bank: 0.10 }
    }
}

impl Mixture {
    fn weights(&self) -> [f64; 4] {
        [self.stuck_cell, self.faulty_row, self.faulty_column, self.faulty_bank]
    }

    /// Exact per-kind counts for `n` DIMMs (largest remainder rounding).
    fn apportion(&self, n: usize) -> Vec<FaultKind> {
        let w = self.weights();
        let total: f64 = w.iter().sum();
        let quotas: Vec<f64> = w.iter().map(|x| x / total * n as f64).collect();
        let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
        let mut order: Vec<usize> = (0..4).collect();
        order.sort_by(|&a, &b| (quotas[b] - quotas[b].floor()).total_cmp(&(quotas[a] - quotas[a].floor())));
        let short = n - counts.iter().sum::<usize>();
        for &i in order.iter().take(short) {
            counts[i] += 1;
        }
        FaultKind::LOCALIZED.iter().zip(counts).flat_map(|(k, c)| std::iter::repeat_n(*k, c)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FleetConfig {
    pub n_normal: usize,
    pub n_failing: usize,
    pub duration_hours: f64,
    pub geometry: Geometry,
    /// Transient CE rate of normal and benign DIMMs, per hour.
    pub normal_rate: f64,
    pub fault: FaultModel,
    pub mixture: Mixture,
    /// Fraction of normal DIMMs that go through a burst which is not
    /// followed by a failure.
    pub benign_burst_fraction: f64,
    pub read_fraction: f64,
    /// Fraction of records emitted as `uce.read` or without an address.
    pub junk_fraction: f64,
    pub start_ts: i64,
    pub seed: u64,
}

impl Default for FleetConfig {
    fn default() -> Self {
        FleetConfig {
            n_normal: 2000,
            n_failing: 60,
            duration_hours: 180.0 * 24.0,
            geometry: Geometry::default(),
            normal_rate: 0.02,
            fault: FaultModel::default(),
            mixture: Mixture::default(),
            benign_burst_fraction: 0.0,
            read_fraction: 0.8,
            junk_fraction: 0.01,
            start_ts: 0,
            seed: 7,
        }
    }
}

impl FleetConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        let f = &self.fault;
        if !(self.duration_hours.is_finite() && self.duration_hours > 0.0) {
            return bad(format!("duration must be positive, got {}", self.duration_hours));
        }
        self.geometry.validate().map_err(|e| SimError::Config(e.to_string()))?;
        for (name, v) in [
            ("normal_rate", self.normal_rate),
            ("precursor_rate", f.precursor_rate),
            ("precursor_hours", f.precursor_hours),
            ("burst_rate", f.burst_rate),
            ("burst_hours", f.burst_hours),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be a non-negative number, got {v}"));
            }
        }
        for (name, v) in [
            ("p_adj", f.p_adj),
            ("benign_burst_fraction", self.benign_burst_fraction),
            ("read_fraction", self.read_fraction),
            ("junk_fraction", self.junk_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if self.n_failing > 0 || self.benign_burst_fraction > 0.0 {
            if !(f.burst_rate_min_factor > 0.0 && f.burst_rate_min_factor <= 1.0) {
                return bad(format!("burst_rate_min_factor must lie in (0, 1], got {}", f.burst_rate_min_factor));
            }
            if f.burst_rate * f.burst_rate_min_factor <= f.precursor_rate {
                return bad(format!(
                    "burst rate {} (lowest {}) must exceed precursor rate {}",
                    f.burst_rate,
                    f.burst_rate * f.burst_rate_min_factor,
                    f.precursor_rate
                ));
            }
            if f.burst_hours <= 0.0 {
                return bad("burst_hours must be positive".into());
            }
            if f.precursor_hours + f.burst_hours > self.duration_hours {
                return bad(format!(
                    "precursor_hours + burst_hours = {} exceeds duration {}",
                    f.precursor_hours + f.burst_hours,
                    self.duration_hours
                ));
            }
            let w = self.mixture.weights();
            if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
                return bad("mixture weights must be non-negative with a positive sum".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Normal,
    /// Normal DIMM with one burst that does not end in failure.
    Benign,
    Failing,
}

/// Faulty location. Unset coordinates are free (e.g. a faulty row leaves
/// `col` unset).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Locus {
    pub bank: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub row: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub col: Option<u32>,
}

impl Locus {
    /// True when `(bank, row, col)` is on the locus or one step off it.
    pub fn covers(&self, bank: u32, row: u32, col: u32) -> bool {
        let near = |fixed: Option<u32>, v: u32| fixed.is_none_or(|f| f.abs_diff(v) <= 1);
        bank == self.bank && near(self.row, row) && near(self.col, col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Phases {
    pub precursor_start: i64,
    pub burst_start: i64,
    pub end: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PhaseCounts {
    pub total: u64,
    /// Locus records in `[precursor_start, burst_start)`.
    pub precursor: u64,
    /// Locus records in `[burst_start, end]`.
    pub burst: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimmTruth {
    pub dimm: DimmId,
    pub role: Role,
    pub kind: FaultKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub locus: Option<Locus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phases: Option<Phases>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_time: Option<i64>,
    pub counts: PhaseCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub config: FleetConfig,
    pub dimms: Vec<DimmTruth>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fleet {
    pub records: Vec<CeRecord>,
    pub failures: Vec<FailureRecord>,
    pub manifest: Manifest,
}

pub fn dimm_name(i: usize) -> DimmId {
    DimmId::new(format!("dimm-{i:05}")).expect("non-empty")
}

/// Generates the fleet. Identical configs give identical output regardless
/// of thread count.
pub fn generate(config: &FleetConfig) -> Result<Fleet, SimError> {
    config.validate()?;
    let n = config.n_normal + config.n_failing;
    let mut plan_rng = ChaCha8Rng::seed_from_u64(config.seed);
    plan_rng.set_stream(u64::MAX);
    let n_benign = (config.benign_burst_fraction * config.n_normal as f64).round() as usize;
    let mut roles: Vec<(Role, FaultKind)> = config
        .mixture
        .apportion(config.n_failing)
        .into_iter()
        .map(|k| (Role::Failing, k))
        .chain(config.mixture.apportion(n_benign).into_iter().map(|k| (Role::Benign, k)))
        .collect();
    roles.resize(n, (Role::Normal, FaultKind::Transient));
    roles.shuffle(&mut plan_rng);

    let per_dimm: Vec<(DimmTruth, Vec<CeRecord>)> = roles
        .par_iter()
        .enumerate()
        .map(|(i, &(role, kind))| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(i as u64);
            simulate_dimm(config, dimm_name(i), role, kind, &mut rng)
        })
        .collect();

    let mut keyed: Vec<(i64, usize, usize, CeRecord)> = Vec::new();
    let mut dimms = Vec::with_capacity(n);
    let mut failures = Vec::new();
    for (i, (truth, recs)) in per_dimm.into_iter().enumerate() {
        if let Some(ft) = truth.failure_time {
            failures.push(FailureRecord { dimm: truth.dimm.clone(), failure_time: ft });
        }
        keyed.extend(recs.into_iter().enumerate().map(|(seq, r)| (r.ts, i, seq, r)));
        dimms.push(truth);
    }
    keyed.sort_by_key(|k| (k.0, k.1, k.2));
    Ok(Fleet {
        records: keyed.into_iter().map(|k| k.3).collect(),
        failures,
        manifest: Manifest { format: MANIFEST_FORMAT.to_string(), config: config.clone(), dimms },
    })
}

/// Poisson arrival times in `[from, to)` seconds.
fn arrivals(rng: &mut ChaCha8Rng, rate_per_hour: f64, from: f64, to: f64) -> Vec<f64> {
    let mut out = Vec::new();
    if rate_per_hour <= 0.0 || to <= from {
        return out;
    }
    let exp = Exp::new(rate_per_hour / HOUR).expect("positive rate");
    let mut t = from + exp.sample(rng);
    while t < to {
        out.push(t);
        t += exp.sample(rng);
    }
    out
}

fn shift(rng: &mut ChaCha8Rng, v: u32, max: u32) -> u32 {
    if v == 0 {
        1.min(max - 1)
    } else if v + 1 >= max || rng.random_bool(0.5) {
        v - 1
    } else {
        v + 1
    }
}

fn fault_address(rng: &mut ChaCha8Rng, g: &Geometry, locus: &Locus, p_adj: f64) -> (u32, u32, u32) {
    let mut row = locus.row.unwrap_or_else(|| rng.random_range(0..g.rows));
    let mut col = locus.col.unwrap_or_else(|| rng.random_range(0..g.columns));
    if rng.random_bool(p_adj) {
        match (locus.row.is_some(), locus.col.is_some()) {
            (true, true) => {
                if rng.random_bool(0.5) {
                    row = shift(rng, row, g.rows);
                } else {
                    col = shift(rng, col, g.columns);
                }
            }
            (true, false) => row = shift(rng, row, g.rows),
            (false, true) => col = shift(rng, col, g.columns),
            (false, false) => {}
        }
    }
    (locus.bank, row, col)
}

fn simulate_dimm(
    cfg: &FleetConfig,
    dimm: DimmId,
    role: Role,
    kind: FaultKind,
    rng: &mut ChaCha8Rng,
) -> (DimmTruth, Vec<CeRecord>) {
    let g = &cfg.geometry;
    let f = &cfg.fault;
    let start = cfg.start_ts as f64;
    let end_all = start + cfg.duration_hours * HOUR;

    let (locus, phases) = match role {
        Role::Normal => (None, None),
        _ => {
            let bank = rng.random_range(0..g.banks);
            let row = rng.random_range(0..g.rows);
            let col = rng.random_range(0..g.columns);
            let locus = match kind {
                FaultKind::StuckCell => Locus { bank, row: Some(row), col: Some(col) },
                FaultKind::FaultyRow => Locus { bank, row: Some(row), col: None },
                FaultKind::FaultyColumn => Locus { bank, row: None, col: Some(col) },
                _ => Locus { bank, row: None, col: None },
            };
            let (precursor_hours, lo) = match role {
                Role::Failing => (f.precursor_hours, f.precursor_hours + f.burst_hours),
                _ => (0.0, f.burst_hours),
            };
            let end_h = rng.random_range(lo..=cfg.duration_hours);
            let end = (start + end_h * HOUR).round() as i64;
            let burst_start = end - (f.burst_hours * HOUR).round() as i64;
            let precursor_start = burst_start - (precursor_hours * HOUR).round() as i64;
            (Some(locus), Some(Phases { precursor_start, burst_start, end }))
        }
    };

    let mut events: Vec<(i64, Option<(u32, u32, u32)>)> = Vec::new();
    // failing DIMMs only emit fault CEs
    let background = if role == Role::Failing { 0.0 } else { cfg.normal_rate };
    for t in arrivals(rng, background, start, end_all) {
        let addr = (rng.random_range(0..g.banks), rng.random_range(0..g.rows), rng.random_range(0..g.columns));
        events.push((t.floor() as i64, Some(addr)));
    }
    if let (Some(locus), Some(p)) = (locus, phases) {
        let precursor = arrivals(rng, f.precursor_rate, p.precursor_start as f64, p.burst_start as f64);
        let rate = f.burst_rate * f.burst_rate_min_factor.powf(rng.random::<f64>());
        // a burst phase always holds at least one CE
        let burst = loop {
            let b = arrivals(rng, rate, p.burst_start as f64, p.end as f64);
            if !b.is_empty() {
                break b;
            }
        };
        for t in precursor.into_iter().chain(burst) {
            events.push((t.floor() as i64, Some(fault_address(rng, g, &locus, f.p_adj))));
        }
    }
    events.sort_by_key(|e| e.0);

    let records: Vec<CeRecord> = events
        .into_iter()
        .map(|(ts, addr)| {
            let (bank, row, col) = addr.expect("address");
            let mut rec = CeRecord {
                ts,
                dimm: dimm.clone(),
                error_type: if rng.random_bool(cfg.read_fraction) { CE_READ } else { CE_SCRUB }.to_string(),
                rank: Some(0),
                bank: Some(bank),
                row: Some(row),
                col: Some(col),
            };
            if rng.random_bool(cfg.junk_fraction) {
                if rng.random_bool(0.5) {
                    rec.error_type = UCE_READ.to_string();
                } else {
                    rec.row = None;
                    rec.col = None;
                }
            }
            rec
        })
        .collect();

    let counts = count_phases(records.iter(), locus.as_ref(), phases.as_ref());
    let failure_time = match role {
        Role::Failing => phases.map(|p| p.end),
        _ => None,
    };
    (DimmTruth { dimm, role, kind, locus, phases, failure_time, counts }, records)
}

fn count_phases<'a>(
    records: impl Iterator<Item = &'a CeRecord>,
    locus: Option<&Locus>,
    phases: Option<&Phases>,
) -> PhaseCounts {
    let mut c = PhaseCounts::default();
    for r in records {
        c.total += 1;
        let (Some(l), Some(p)) = (locus, phases) else { continue };
        let on_locus = match (r.bank, r.row, r.col) {
            (Some(b), Some(row), Some(col)) => l.covers(b, row, col),
            _ => false,
        };
        if !on_locus {
            continue;
        }
        if r.ts >= p.precursor_start && r.ts < p.burst_start {
            c.precursor += 1;
        } else if r.ts >= p.burst_start && r.ts <= p.end {
            c.burst += 1;
        }
    }
    c
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checked_dimms: usize,
    pub failures: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Recounts the stream against the manifest: per-DIMM totals, phase counts,
/// failure times and the burst-faster-than-precursor signature.
pub fn validate_manifest(records: &[CeRecord], manifest: &Manifest) -> ValidationReport {
    let mut report = ValidationReport::default();
    if manifest.format != MANIFEST_FORMAT {
        report.failures.push(format!("unexpected manifest format {:?}", manifest.format));
    }
    if records.windows(2).any(|w| w[0].ts > w[1].ts) {
        report.failures.push("stream is not time-sorted".into());
    }
    let mut by_dimm: BTreeMap<&DimmId, Vec<&CeRecord>> = BTreeMap::new();
    for r in records {
        by_dimm.entry(&r.dimm).or_default().push(r);
    }
    let known: BTreeMap<&DimmId, &DimmTruth> = manifest.dimms.iter().map(|d| (&d.dimm, d)).collect();
    for d in by_dimm.keys() {
        if !known.contains_key(d) {
            report.failures.push(format!("{d}: present in stream but not in manifest"));
        }
    }
    let f = &manifest.config.fault;
    for truth in &manifest.dimms {
        report.checked_dimms += 1;
        let id = &truth.dimm;
        let recs = by_dimm.get(id).map(|v| v.as_slice()).unwrap_or(&[]);
        let got = count_phases(recs.iter().copied(), truth.locus.as_ref(), truth.phases.as_ref());
        if got.total != truth.counts.total {
            report.failures.push(format!("{id}: {} records, manifest says {}", got.total, truth.counts.total));
        }
        if got.precursor != truth.counts.precursor {
            report.failures.push(format!(
                "{id}: {} precursor-phase locus CEs, manifest says {}",
                got.precursor, truth.counts.precursor
            ));
        }
        if got.burst != truth.counts.burst {
            report
                .failures
                .push(format!("{id}: {} burst-phase locus CEs, manifest says {}", got.burst, truth.counts.burst));
        }
        if truth.role != Role::Failing {
            if truth.failure_time.is_some() {
                report.failures.push(format!("{id}: non-failing DIMM carries a failure time"));
            }
            continue;
        }
        let (Some(p), Some(ft)) = (truth.phases, truth.failure_time) else {
            report.failures.push(format!("{id}: failing DIMM without phases or failure time"));
            continue;
        };
        if ft != p.end {
            report.failures.push(format!("{id}: failure time {ft} differs from burst end {}", p.end));
        }
        if let Some(late) = recs.iter().find(|r| r.ts > ft) {
            report.failures.push(format!("{id}: CE at {} after failure at {ft}", late.ts));
        }
        let burst_rate = got.burst as f64 / f.burst_hours;
        let precursor_rate = if f.precursor_hours > 0.0 { got.precursor as f64 / f.precursor_hours } else { 0.0 };
        if burst_rate <= precursor_rate {
            report.failures.push(format!(
                "{id}: burst rate {burst_rate:.4}/h does not exceed precursor rate {precursor_rate:.4}/h"
            ));
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n_normal: usize, n_failing: usize) -> FleetConfig {
        FleetConfig { n_normal, n_failing, duration_hours: 1000.0, seed: 3, ..Default::default() }
    }

    #[test]
    fn same_seed_same_fleet() {
        let cfg = small(30, 5);
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        let other = generate(&FleetConfig { seed: 4, ..cfg.clone() }).unwrap();
        assert_ne!(generate(&cfg).unwrap().records, other.records);
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let cfg = small(40, 6);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        assert_eq!(one.install(|| generate(&cfg)), four.install(|| generate(&cfg)));
    }

    #[test]
    fn stuck_cell_concentrates_on_one_cell() {
        let cfg = FleetConfig {
            normal_rate: 0.0,
            junk_fraction: 0.0,
            mixture: Mixture { stuck_cell: 1.0, faulty_row: 0.0, faulty_column: 0.0, faulty_bank: 0.0 },
            ..small(0, 1)
        };
        let fleet = generate(&cfg).unwrap();
        let truth = &fleet.manifest.dimms[0];
        assert_eq!(truth.kind, FaultKind::StuckCell);
        let l = truth.locus.unwrap();
        assert!(!fleet.records.is_empty());
        let exact = fleet
            .records
            .iter()
            .filter(|r| (r.bank, r.row, r.col) == (Some(l.bank), l.row, l.col))
            .count();
        assert!(fleet.records.iter().all(|r| l.covers(r.bank.unwrap(), r.row.unwrap(), r.col.unwrap())));
        // p_adj = 0.1: the bulk sits on the cell itself
        assert!(exact as f64 >= 0.7 * fleet.records.len() as f64);
    }

    #[test]
    fn no_failing_dimms_means_no_failures() {
        let fleet = generate(&small(20, 0)).unwrap();
        assert!(fleet.failures.is_empty());
        assert!(fleet.manifest.dimms.iter().all(|d| d.role == Role::Normal && d.locus.is_none()));
        let banks: std::collections::BTreeSet<u32> = fleet.records.iter().filter_map(|r| r.bank).collect();
        assert!(banks.len() > 8);
    }

    #[test]
    fn default_fleet_class_balance() {
        let cfg = FleetConfig::default();
        let fleet = generate(&cfg).unwrap();
        assert_eq!(fleet.failures.len(), 60);
        assert_eq!(fleet.manifest.dimms.len(), 2060);
        let frac = fleet.failures.len() as f64 / fleet.manifest.dimms.len() as f64;
        assert!((frac - 0.029).abs() < 0.0005);
        let kinds: Vec<FaultKind> =
            fleet.manifest.dimms.iter().filter(|d| d.role == Role::Failing).map(|d| d.kind).collect();
        let count = |k| kinds.iter().filter(|&&x| x == k).count();
        assert_eq!(
            [count(FaultKind::StuckCell), count(FaultKind::FaultyRow), count(FaultKind::FaultyColumn), count(FaultKind::FaultyBank)],
            [24, 15, 15, 6]
        );
        assert!(validate_manifest(&fleet.records, &fleet.manifest).passed());
    }

    #[test]
    fn untouched_output_validates_and_tampering_is_caught() {
        let fleet = generate(&small(30, 8)).unwrap();
        let report = validate_manifest(&fleet.records, &fleet.manifest);
        assert!(report.passed(), "{:?}", report.failures);
        assert_eq!(report.checked_dimms, 38);

        let mut tampered = fleet.records.clone();
        let removed = tampered.remove(tampered.len() / 2);
        let report = validate_manifest(&tampered, &fleet.manifest);
        assert!(!report.passed());
        assert!(report.failures.iter().any(|f| f.starts_with(removed.dimm.as_str())));
    }

    #[test]
    fn equal_burst_and_precursor_rates_are_rejected() {
        let mut cfg = small(1, 1);
        cfg.fault.burst_rate = cfg.fault.precursor_rate;
        assert!(matches!(generate(&cfg), Err(SimError::Config(_))));
        let mut cfg = small(1, 1);
        cfg.fault.precursor_hours = 2000.0;
        assert!(generate(&cfg).is_err());
    }

    #[test]
    fn apportion_is_exact() {
        let m = Mixture::default();
        for n in 0..50 {
            assert_eq!(m.apportion(n).len(), n);
        }
    }

    #[test]
    fn precursors_precede_the_default_window() {
        // expected precursor count older than 168h before failure is
        // positive under the defaults
        let f = FaultModel::default();
        let older = f.precursor_rate * (f.precursor_hours - (168.0 - f.burst_hours).max(0.0));
        assert!(older > 0.0);
    }
}
