//! Incremental CE feature engine.
//!
//! Each DIMM's event stream is split into two disjoint intervals relative to
//! the current observation time `t0`: the observation window
//! `W = (t0 - w, t0]` and the history `H = (-inf, t0 - w]`. Window
//! aggregates support removal; history and lifetime aggregates are
//! append-only. Every catalog feature is read from these aggregates, so a
//! snapshot never rescans old events.

mod catalog;
pub mod oracle;
mod state;

pub use catalog::{
    catalog, catalog_document, feature_index, feature_names, FeatureSpec, Scope, ValueKind, CATALOG_VERSION,
    FEATURE_COUNT,
};
pub use oracle::batch_recompute;
pub use state::DimmState;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::celog::DimmId;

/// Smallest denominator used by relative-change features.
pub const REL_CHANGE_EPS: f64 = 1e-9;

/// Default per-set key cap for the append-only aggregates.
pub const DEFAULT_KEY_CAP: usize = 65_536;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("out-of-order event for DIMM {dimm}: timestamp {got} precedes previous timestamp {previous}")]
    OutOfOrder { dimm: DimmId, previous: i64, got: i64 },
    #[error("event for DIMM {got} ingested into state of DIMM {expected}")]
    WrongDimm { expected: DimmId, got: DimmId },
    #[error("event at {ts} for DIMM {dimm} lacks a full bank/row/column address")]
    MissingAddress { dimm: DimmId, ts: i64 },
    #[error("DIMM {0} has no ingested events; snapshot undefined")]
    Empty(DimmId),
    #[error("invalid window config: {0}")]
    InvalidConfig(String),
}

/// Feature calculation strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Window, history, lifetime and delta features are all active.
    Overall,
    /// Only window features; everything else reads as zero.
    Fixed,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Overall => "overall",
            Mode::Fixed => "fixed",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "overall" => Ok(Mode::Overall),
            "fixed" => Ok(Mode::Fixed),
            other => Err(format!("unknown mode {other:?} (expected overall|fixed)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowConfig {
    /// Window length `w` in hours.
    pub window_hours: f64,
    pub mode: Mode,
    /// CEs on one key needed to count it as repeating.
    pub repeat_min: u32,
    /// Neighbourhood radius for rows, columns and (Chebyshev) cells.
    pub radius: u32,
    /// Cap on distinct keys per append-only aggregate set.
    pub key_cap: usize,
}

impl WindowConfig {
    pub fn new(window_hours: f64, mode: Mode) -> Result<Self, FeatureError> {
        let cfg = WindowConfig {
            window_hours,
            mode,
            repeat_min: 2,
            radius: 1,
            key_cap: DEFAULT_KEY_CAP,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        if !(self.window_hours.is_finite() && self.window_hours > 0.0) {
            return Err(FeatureError::InvalidConfig(format!(
                "window_hours must be positive, got {}",
                self.window_hours
            )));
        }
        if self.window_secs() < 1 {
            return Err(FeatureError::InvalidConfig("window shorter than one second".into()));
        }
        if self.repeat_min < 1 {
            return Err(FeatureError::InvalidConfig("repeat_min must be at least 1".into()));
        }
        if self.key_cap < 1 {
            return Err(FeatureError::InvalidConfig("key_cap must be at least 1".into()));
        }
        Ok(())
    }

    pub fn window_secs(&self) -> i64 {
        (self.window_hours * 3600.0).round() as i64
    }
}

/// One evaluation of the catalog, in catalog order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    /// Wraps raw values; the length must equal [`FEATURE_COUNT`].
    pub fn from_values(values: Vec<f64>) -> Result<Self, String> {
        if values.len() != FEATURE_COUNT {
            return Err(format!("expected {FEATURE_COUNT} feature values, got {}", values.len()));
        }
        Ok(FeatureVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        feature_index(name).map(|i| self.0[i])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub(crate) fn rate_per_hour(count: u64, first: Option<i64>, last: Option<i64>) -> f64 {
    match (first, last) {
        (Some(a), Some(b)) if count > 0 && b > a => count as f64 / ((b - a) as f64 / 3600.0),
        _ => 0.0,
    }
}

pub(crate) fn rel_change(window: f64, history: f64) -> f64 {
    (window - history) / history.max(REL_CHANGE_EPS)
}

/// Zeroes every slot that is not window-scoped.
pub(crate) fn apply_mode(values: &mut [f64], mode: Mode) {
    if mode == Mode::Fixed {
        for (v, spec) in values.iter_mut().zip(catalog()) {
            if spec.scope != Scope::W {
                *v = 0.0;
            }
        }
    }
}

/// Runs the engine over a time-ordered stream of one DIMM and returns the
/// snapshot taken after each event.
pub fn extract_stream(
    dimm: &DimmId,
    events: &[crate::celog::CeRecord],
    config: &WindowConfig,
) -> Result<Vec<(i64, FeatureVector)>, FeatureError> {
    let mut state = DimmState::new(dimm.clone(), *config)?;
    let mut out = Vec::with_capacity(events.len());
    for ev in events {
        state.ingest(ev)?;
        out.push((ev.ts, state.snapshot()?));
    }
    Ok(out)
}
