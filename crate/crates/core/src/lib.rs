//! Memory failure prediction from DIMM correctable-error logs.
//!
//! The pipeline: parse and filter CE logs ([`celog`]), maintain incremental
//! per-DIMM features over a sliding window and the full history
//! ([`fengine`]), label failed DIMMs' streams ([`labeling`]), train a random
//! forest ([`forest`]) and score it against a CE-rate threshold baseline
//! ([`evalharness`]). [`simgen`] generates synthetic fleets with known
//! ground truth.

pub mod celog;
pub mod evalharness;
pub mod featfile;
pub mod fengine;
pub mod forest;
pub mod labeling;
pub mod simgen;
