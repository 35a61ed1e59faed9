//! Feature CSV files. The first line is a `#key=value;...` comment carrying
//! the catalog version and extraction settings, followed by a header
//! `dimm,ts,label,<feature names>`. The label column is empty for
//! unlabeled files.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::celog::DimmId;
use crate::fengine::{feature_names, FeatureVector, Mode, WindowConfig, CATALOG_VERSION, FEATURE_COUNT};
use crate::labeling::{DatasetSplit, LabeledSample};

pub const SPLITS_FORMAT: &str = "memfail-splits/1";

#[derive(Debug, Error)]
pub enum FeatFileError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("feature file catalog {found} does not match {expected}")]
    CatalogMismatch { found: String, expected: String },
    #[error("feature file line {line}: {message}")]
    Format { line: u64, message: String },
}

fn format_err(line: u64, message: impl Into<String>) -> FeatFileError {
    FeatFileError::Format { line, message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureFileMeta {
    pub catalog: String,
    pub window_hours: f64,
    pub mode: Mode,
    /// Present on labeled files.
    pub lead_hours: Option<f64>,
}

impl FeatureFileMeta {
    pub fn new(window: &WindowConfig, lead_hours: Option<f64>) -> Self {
        FeatureFileMeta {
            catalog: CATALOG_VERSION.to_string(),
            window_hours: window.window_hours,
            mode: window.mode,
            lead_hours,
        }
    }

    pub fn window(&self) -> Result<WindowConfig, FeatFileError> {
        WindowConfig::new(self.window_hours, self.mode).map_err(|e| format_err(1, e.to_string()))
    }

    fn to_line(&self) -> String {
        let mut s = format!("#catalog={};window_hours={};mode={}", self.catalog, self.window_hours, self.mode);
        if let Some(m) = self.lead_hours {
            s.push_str(&format!(";lead_hours={m}"));
        }
        s
    }

    fn parse(line: &str) -> Result<Self, FeatFileError> {
        let body = line
            .trim_end()
            .strip_prefix('#')
            .ok_or_else(|| format_err(1, "missing '#catalog=...' metadata line"))?;
        let fields: BTreeMap<&str, &str> = body.split(';').filter_map(|kv| kv.split_once('=')).collect();
        let get = |k: &str| fields.get(k).copied().ok_or_else(|| format_err(1, format!("metadata lacks {k}")));
        let catalog = get("catalog")?.to_string();
        if catalog != CATALOG_VERSION {
            return Err(FeatFileError::CatalogMismatch { found: catalog, expected: CATALOG_VERSION.to_string() });
        }
        let num = |k: &str, v: &str| v.parse::<f64>().map_err(|_| format_err(1, format!("bad {k}: {v:?}")));
        let window_hours = num("window_hours", get("window_hours")?)?;
        let mode = get("mode")?.parse::<Mode>().map_err(|e| format_err(1, e))?;
        let lead_hours = fields.get("lead_hours").map(|v| num("lead_hours", v)).transpose()?;
        Ok(FeatureFileMeta { catalog, window_hours, mode, lead_hours })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub dimm: DimmId,
    pub ts: i64,
    pub label: Option<u8>,
    pub features: FeatureVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFile {
    pub meta: FeatureFileMeta,
    pub rows: Vec<FeatureRow>,
}

impl FeatureFile {
    /// Rows grouped by DIMM, file order kept within each DIMM.
    pub fn by_dimm(&self) -> BTreeMap<DimmId, Vec<&FeatureRow>> {
        let mut out: BTreeMap<DimmId, Vec<&FeatureRow>> = BTreeMap::new();
        for r in &self.rows {
            out.entry(r.dimm.clone()).or_default().push(r);
        }
        out
    }

    /// Labeled samples; errors on the first unlabeled row.
    pub fn labeled_samples(&self) -> Result<Vec<LabeledSample>, FeatFileError> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let label = r.label.ok_or_else(|| format_err(i as u64 + 3, "row has no label"))?;
                Ok(LabeledSample { dimm: r.dimm.clone(), ts: r.ts, features: r.features.clone(), label })
            })
            .collect()
    }
}

pub fn write_header<W: Write>(meta: &FeatureFileMeta, out: &mut W) -> Result<(), FeatFileError> {
    writeln!(out, "{}", meta.to_line())?;
    let mut header = vec!["dimm", "ts", "label"];
    header.extend(feature_names());
    writeln!(out, "{}", header.join(","))?;
    Ok(())
}

/// Streams rows after a header written by [`write_header`].
pub struct RowWriter<W: Write> {
    inner: csv::Writer<W>,
    buf: Vec<String>,
}

impl<W: Write> RowWriter<W> {
    pub fn new(out: W) -> Self {
        RowWriter { inner: csv::WriterBuilder::new().has_headers(false).from_writer(out), buf: Vec::new() }
    }

    pub fn write(&mut self, dimm: &DimmId, ts: i64, label: Option<u8>, features: &[f64]) -> Result<(), FeatFileError> {
        self.buf.clear();
        self.buf.push(dimm.to_string());
        self.buf.push(ts.to_string());
        self.buf.push(label.map(|l| l.to_string()).unwrap_or_default());
        self.buf.extend(features.iter().map(|v| v.to_string()));
        self.inner.write_record(&self.buf)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W, FeatFileError> {
        self.inner.flush()?;
        self.inner.into_inner().map_err(|e| FeatFileError::Io(e.into_error()))
    }
}

pub fn read_feature_file<R: BufRead>(mut input: R) -> Result<FeatureFile, FeatFileError> {
    let mut first = String::new();
    input.read_line(&mut first)?;
    let meta = FeatureFileMeta::parse(&first)?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = reader.headers()?.clone();
    let mut expected = vec!["dimm", "ts", "label"];
    expected.extend(feature_names());
    if header.iter().ne(expected.iter().copied()) {
        return Err(format_err(2, "column header does not match the feature catalog"));
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i as u64 + 3;
        let rec = rec?;
        let dimm = DimmId::new(&rec[0]).map_err(|e| format_err(line, e))?;
        let ts = rec[1].parse::<i64>().map_err(|_| format_err(line, format!("bad timestamp {:?}", &rec[1])))?;
        let label = match &rec[2] {
            "" => None,
            "0" => Some(0),
            "1" => Some(1),
            other => return Err(format_err(line, format!("bad label {other:?}"))),
        };
        let mut values = Vec::with_capacity(FEATURE_COUNT);
        for (j, field) in rec.iter().skip(3).enumerate() {
            let v = field
                .parse::<f64>()
                .map_err(|_| format_err(line, format!("bad value {field:?} for {}", expected[j + 3])))?;
            values.push(v);
        }
        let features = FeatureVector::from_values(values).map_err(|e| format_err(line, e))?;
        rows.push(FeatureRow { dimm, ts, label, features });
    }
    Ok(FeatureFile { meta, rows })
}

/// Per-repeat DIMM role lists written by the `label` step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub format: String,
    pub catalog: String,
    pub splits: Vec<DatasetSplit>,
}

impl SplitManifest {
    pub fn new(splits: Vec<DatasetSplit>) -> Self {
        SplitManifest { format: SPLITS_FORMAT.to_string(), catalog: CATALOG_VERSION.to_string(), splits }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(x: f64) -> FeatureVector {
        let mut v = vec![0.0; FEATURE_COUNT];
        v[0] = x;
        v[2] = 1.0 / 3.0;
        FeatureVector::from_values(v).unwrap()
    }

    fn write(meta: &FeatureFileMeta, rows: &[FeatureRow]) -> Vec<u8> {
        let mut out = Vec::new();
        write_header(meta, &mut out).unwrap();
        let mut w = RowWriter::new(out);
        for r in rows {
            w.write(&r.dimm, r.ts, r.label, r.features.values()).unwrap();
        }
        w.finish().unwrap()
    }

    #[test]
    fn round_trip_keeps_values_exactly() {
        let meta = FeatureFileMeta::new(&WindowConfig::new(168.0, Mode::Fixed).unwrap(), Some(3.0));
        let rows = vec![
            FeatureRow { dimm: DimmId::new("a").unwrap(), ts: 5, label: Some(1), features: fv(2.5) },
            FeatureRow { dimm: DimmId::new("b").unwrap(), ts: 9, label: None, features: fv(1e-300) },
        ];
        let bytes = write(&meta, &rows);
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("#catalog=memfail-catalog/1;window_hours=168;mode=fixed;lead_hours=3\n"));
        let back = read_feature_file(&bytes[..]).unwrap();
        assert_eq!(back.meta, meta);
        assert_eq!(back.rows, rows);
    }

    #[test]
    fn header_only_file_is_valid() {
        let meta = FeatureFileMeta::new(&WindowConfig::new(3.0, Mode::Overall).unwrap(), None);
        let bytes = write(&meta, &[]);
        let back = read_feature_file(&bytes[..]).unwrap();
        assert!(back.rows.is_empty());
        assert_eq!(back.meta.lead_hours, None);
    }

    #[test]
    fn foreign_catalog_is_rejected_with_both_versions() {
        let meta = FeatureFileMeta::new(&WindowConfig::new(3.0, Mode::Overall).unwrap(), None);
        let text = String::from_utf8(write(&meta, &[])).unwrap().replace("memfail-catalog/1", "memfail-catalog/0");
        let err = read_feature_file(text.as_bytes()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("memfail-catalog/0") && msg.contains("memfail-catalog/1"), "{msg}");
    }

    #[test]
    fn unlabeled_rows_cannot_become_samples() {
        let meta = FeatureFileMeta::new(&WindowConfig::new(3.0, Mode::Overall).unwrap(), None);
        let rows = vec![FeatureRow { dimm: DimmId::new("a").unwrap(), ts: 1, label: None, features: fv(0.0) }];
        let file = read_feature_file(&write(&meta, &rows)[..]).unwrap();
        assert!(file.labeled_samples().is_err());
    }
}
