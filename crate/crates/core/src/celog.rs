//! Correctable-error log records: schema, line-delimited JSON codec,
//! failure lists, and the preprocessing filters applied before feature
//! extraction.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CE_READ: &str = "ce.read";
pub const CE_SCRUB: &str = "ce.scrub";
pub const UCE_READ: &str = "uce.read";

#[derive(Debug, Error)]
pub enum CelogError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("failure list line {line}: {message}")]
    FailureList { line: usize, message: String },
}

/// Opaque DIMM identifier. Never empty.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct DimmId(String);

impl DimmId {
    pub fn new(id: impl Into<String>) -> Result<Self, String> {
        let id = id.into();
        if id.is_empty() {
            return Err("dimm id must not be empty".to_string());
        }
        Ok(DimmId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for DimmId {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        DimmId::new(s)
    }
}

impl From<DimmId> for String {
    fn from(d: DimmId) -> String {
        d.0
    }
}

impl fmt::Display for DimmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Declared address space of a DIMM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Geometry {
    pub banks: u32,
    pub rows: u32,
    pub columns: u32,
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry {
            banks: 16,
            rows: 131_072,
            columns: 1024,
        }
    }
}

impl Geometry {
    pub fn validate(&self) -> Result<(), CelogError> {
        if self.banks == 0 || self.rows == 0 || self.columns == 0 {
            return Err(CelogError::Geometry(format!(
                "banks={}, rows={}, columns={} must all be positive",
                self.banks, self.rows, self.columns
            )));
        }
        Ok(())
    }

    fn check(&self, rec: &CeRecord) -> Result<(), String> {
        let checks = [
            ("bank", rec.bank, self.banks),
            ("row", rec.row, self.rows),
            ("col", rec.col, self.columns),
        ];
        for (name, value, bound) in checks {
            if let Some(v) = value {
                if v >= bound {
                    return Err(format!("{name}={v} out of range (geometry allows < {bound})"));
                }
            }
        }
        Ok(())
    }
}

/// One correctable-error log event.
///
/// Serialized as a single JSON object with the fields `ts`, `dimm`, `type`,
/// `rank`, `bank`, `row`, `col`; absent address fields are omitted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CeRecord {
    pub ts: i64,
    pub dimm: DimmId,
    #[serde(rename = "type")]
    pub error_type: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bank: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub row: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub col: Option<u32>,
}

impl CeRecord {
    pub fn has_full_address(&self) -> bool {
        self.bank.is_some() && self.row.is_some() && self.col.is_some()
    }
}

/// Ground-truth failure of one DIMM.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub dimm: DimmId,
    pub failure_time: i64,
}

#[derive(Debug, Clone)]
pub struct ParseOptions {
    /// Error-type tokens accepted by the parser.
    pub known_types: BTreeSet<String>,
    pub geometry: Option<Geometry>,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            known_types: [CE_READ, CE_SCRUB, UCE_READ].iter().map(|s| s.to_string()).collect(),
            geometry: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LineError {
    /// 1-based line number in the input.
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct ParseReport {
    pub records: Vec<CeRecord>,
    pub errors: Vec<LineError>,
}

/// Parses a line-delimited JSON CE log. Blank lines are skipped; malformed
/// lines are collected in the report and do not abort parsing.
pub fn parse_stream<R: BufRead>(reader: R, opts: &ParseOptions) -> Result<ParseReport, CelogError> {
    let mut report = ParseReport::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        match parse_line(trimmed, opts) {
            Ok(rec) => report.records.push(rec),
            Err(message) => report.errors.push(LineError { line: i + 1, message }),
        }
    }
    Ok(report)
}

fn parse_line(line: &str, opts: &ParseOptions) -> Result<CeRecord, String> {
    let rec: CeRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    if rec.ts < 0 {
        return Err(format!("negative timestamp {}", rec.ts));
    }
    if !opts.known_types.contains(&rec.error_type) {
        return Err(format!("unknown error type {:?}", rec.error_type));
    }
    if let Some(geo) = &opts.geometry {
        geo.check(&rec)?;
    }
    Ok(rec)
}

pub fn write_stream<W: Write>(records: &[CeRecord], mut out: W) -> Result<(), CelogError> {
    for rec in records {
        serde_json::to_writer(&mut out, rec).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterOptions {
    pub drop_types: BTreeSet<String>,
    /// Require bank, row and column to all be present.
    pub require_address: bool,
}

impl Default for FilterOptions {
    fn default() -> Self {
        FilterOptions {
            drop_types: [UCE_READ.to_string()].into_iter().collect(),
            require_address: true,
        }
    }
}

/// Drops records of excluded types and, optionally, records lacking a full
/// bank/row/column address. Order is preserved.
pub fn filter_records(records: &[CeRecord], opts: &FilterOptions) -> Vec<CeRecord> {
    records
        .iter()
        .filter(|r| !opts.drop_types.contains(&r.error_type))
        .filter(|r| !opts.require_address || r.has_full_address())
        .cloned()
        .collect()
}

pub fn read_failures<R: Read>(input: R) -> Result<Vec<FailureRecord>, CelogError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["dimm", "failure_time"] {
        return Err(CelogError::FailureList {
            line: 1,
            message: format!("expected header `dimm,failure_time`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = row?;
        let dimm = DimmId::new(row.get(0).unwrap_or_default())
            .map_err(|message| CelogError::FailureList { line, message })?;
        let failure_time: i64 = row
            .get(1)
            .unwrap_or_default()
            .parse()
            .map_err(|e| CelogError::FailureList { line, message: format!("bad failure_time: {e}") })?;
        if !seen.insert(dimm.clone()) {
            return Err(CelogError::FailureList { line, message: format!("duplicate failure record for {dimm}") });
        }
        out.push(FailureRecord { dimm, failure_time });
    }
    Ok(out)
}

pub fn write_failures<W: Write>(failures: &[FailureRecord], out: W) -> Result<(), CelogError> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["dimm", "failure_time"])?;
    for f in failures {
        writer.write_record([f.dimm.as_str(), &f.failure_time.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}
