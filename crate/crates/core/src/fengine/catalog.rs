use serde::Serialize;

/// Version stamp embedded in feature files, models and the catalog document.
pub const CATALOG_VERSION: &str = "memfail-catalog/1";

/// Number of features in the catalog.
pub const FEATURE_COUNT: usize = 46;

/// Interval a feature reads from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    /// Observation window `(t0 - w, t0]`.
    W,
    /// History `(-inf, t0 - w]`.
    H,
    /// Whole stream.
    Lifetime,
    /// Contrast between window and history.
    Delta,
}

impl Scope {
    pub fn as_str(self) -> &'static str {
        match self {
            Scope::W => "W",
            Scope::H => "H",
            Scope::Lifetime => "lifetime",
            Scope::Delta => "delta",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueKind {
    /// Integer-valued (counts, cardinalities).
    Count,
    Real,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FeatureSpec {
    pub name: &'static str,
    pub taxonomy: &'static str,
    pub scope: Scope,
    pub kind: ValueKind,
    pub description: &'static str,
}

const fn f(
    name: &'static str,
    taxonomy: &'static str,
    scope: Scope,
    kind: ValueKind,
    description: &'static str,
) -> FeatureSpec {
    FeatureSpec { name, taxonomy, scope, kind, description }
}

use Scope::{Delta, Lifetime, H, W};
use ValueKind::{Count, Real};

static CATALOG: [FeatureSpec; FEATURE_COUNT] = [
    // general DIMM
    f("general.ce_count_W", "general", W, Count, "CEs in the window"),
    f("general.ce_count_H", "general", H, Count, "CEs in the history"),
    f("general.ce_rate_W", "general", W, Real, "window CEs per hour of window event span"),
    f("general.ce_rate_H", "general", H, Real, "history CEs per hour of history event span"),
    f("general.rel_change_ce_rate", "general", Delta, Real, "(rate_W - rate_H) / max(rate_H, eps)"),
    f("general.ce_read_count_W", "general", W, Count, "ce.read CEs in the window"),
    f("general.ce_read_count_H", "general", H, Count, "ce.read CEs in the history"),
    f("general.ce_scrub_count_W", "general", W, Count, "ce.scrub CEs in the window"),
    f("general.ce_scrub_count_H", "general", H, Count, "ce.scrub CEs in the history"),
    f("general.rel_change_ce_read", "general", Delta, Real, "(read_W - read_H) / max(read_H, eps)"),
    f("general.rel_change_ce_scrub", "general", Delta, Real, "(scrub_W - scrub_H) / max(scrub_H, eps)"),
    f("general.time_since_first_ce", "general", Lifetime, Real, "hours from the first CE to t0"),
    f("general.time_since_prev_ce", "general", Lifetime, Real, "hours between the latest CE and the one before it"),
    // bank
    f("bank.distinct_banks_W", "bank", W, Count, "banks with CEs in the window"),
    f("bank.distinct_banks_H", "bank", H, Count, "banks with CEs in the history"),
    f("bank.distinct_banks_lifetime", "bank", Lifetime, Count, "banks with CEs ever"),
    f("bank.new_banks_W", "bank", Delta, Count, "window banks absent from the history"),
    f("bank.max_ce_per_bank_W", "bank", W, Count, "largest per-bank CE count in the window"),
    f("bank.mean_ce_per_bank_W", "bank", W, Real, "window CEs divided by window banks"),
    // row
    f("row.rows_with_ce_W", "row/repeating", W, Count, "(bank,row) keys with CEs in the window"),
    f("row.rows_with_repeat_W", "row/repeating", W, Count, "(bank,row) keys with >= r_min window CEs"),
    f("row.rows_with_repeat_lifetime", "row/repeating", Lifetime, Count, "(bank,row) keys with >= r_min CEs ever"),
    f("row.max_ce_per_row_W", "row/repeating", W, Count, "largest per-(bank,row) CE count in the window"),
    f("row.new_rows_W", "row/repeating", Delta, Count, "window (bank,row) keys absent from the history"),
    f("row.adjacent_row_pairs_W", "row/neighbourhood", W, Count, "window (bank,row) key pairs in one bank with |drow| <= radius"),
    f("row.rows_with_neighbour_lifetime", "row/neighbourhood", Lifetime, Count, "(bank,row) keys with another key within radius, ever"),
    f("row.row_multibank_W", "row/bank_agnostic", W, Count, "row indices with window CEs in >= 2 banks"),
    f("row.row_multibank_lifetime", "row/bank_agnostic", Lifetime, Count, "row indices with CEs in >= 2 banks, ever"),
    // column
    f("column.columns_with_ce_W", "column/repeating", W, Count, "(bank,col) keys with CEs in the window"),
    f("column.columns_with_repeat_W", "column/repeating", W, Count, "(bank,col) keys with >= r_min window CEs"),
    f("column.columns_with_repeat_lifetime", "column/repeating", Lifetime, Count, "(bank,col) keys with >= r_min CEs ever"),
    f("column.max_ce_per_column_W", "column/repeating", W, Count, "largest per-(bank,col) CE count in the window"),
    f("column.new_columns_W", "column/repeating", Delta, Count, "window (bank,col) keys absent from the history"),
    f("column.adjacent_column_pairs_W", "column/neighbourhood", W, Count, "window (bank,col) key pairs in one bank with |dcol| <= radius"),
    f("column.columns_with_neighbour_lifetime", "column/neighbourhood", Lifetime, Count, "(bank,col) keys with another key within radius, ever"),
    f("column.column_multibank_W", "column/bank_agnostic", W, Count, "column indices with window CEs in >= 2 banks"),
    f("column.column_multibank_lifetime", "column/bank_agnostic", Lifetime, Count, "column indices with CEs in >= 2 banks, ever"),
    // cell
    f("cell.cells_with_ce_W", "cell/repeating", W, Count, "(bank,row,col) cells with CEs in the window"),
    f("cell.cells_with_repeat_W", "cell/repeating", W, Count, "cells with >= r_min window CEs"),
    f("cell.cells_with_repeat_lifetime", "cell/repeating", Lifetime, Count, "cells with >= r_min CEs ever"),
    f("cell.max_ce_per_cell_W", "cell/repeating", W, Count, "largest per-cell CE count in the window"),
    f("cell.new_cells_W", "cell/repeating", Delta, Count, "window cells absent from the history"),
    f("cell.adjacent_cells_W", "cell/neighbourhood", W, Count, "window cell pairs in one bank within Chebyshev radius"),
    f("cell.cells_with_neighbour_lifetime", "cell/neighbourhood", Lifetime, Count, "cells with another cell within Chebyshev radius, ever"),
    f("cell.cell_multibank_W", "cell/bank_agnostic", W, Count, "(row,col) positions with window CEs in >= 2 banks"),
    f("cell.cell_multibank_lifetime", "cell/bank_agnostic", Lifetime, Count, "(row,col) positions with CEs in >= 2 banks, ever"),
];

/// The ordered feature catalog. Feature vectors follow this order exactly.
pub fn catalog() -> &'static [FeatureSpec] {
    &CATALOG
}

pub fn feature_names() -> impl Iterator<Item = &'static str> {
    CATALOG.iter().map(|s| s.name)
}

pub fn feature_index(name: &str) -> Option<usize> {
    CATALOG.iter().position(|s| s.name == name)
}

/// Renders the catalog reference document (Markdown).
pub fn catalog_document() -> String {
    let mut out = String::new();
    out.push_str("# CE feature catalog\n\n");
    out.push_str(&format!("version: {CATALOG_VERSION}\n\n"));
    out.push_str(&format!("features: {FEATURE_COUNT}\n\n"));
    out.push_str("| # | name | taxonomy | scope | kind | description |\n");
    out.push_str("|---|------|----------|-------|------|-------------|\n");
    for (i, s) in CATALOG.iter().enumerate() {
        let kind = match s.kind {
            Count => "count",
            Real => "real",
        };
        out.push_str(&format!(
            "| {i} | `{}` | {} | {} | {kind} | {} |\n",
            s.name,
            s.taxonomy,
            s.scope.as_str(),
            s.description
        ));
    }
    out
}
