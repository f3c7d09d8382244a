//! CSV and JSON file formats.
//!
//! P-value files have the header `index,p_value[,label]` with 1-based
//! indices and labels `null` / `alt`. Dataset files have a header row and one
//! numeric row per individual; the null model lives in a JSON sidecar
//! `{n, m, B, mu, sigma}`.

use std::collections::HashSet;
use std::io::{Read, Write};

use dpfdr_core::pvalues::{NullModel, StatisticDataset};
use dpfdr_core::{Label, PValueVector, RejectionReport};
use serde::{Deserialize, Serialize};

use crate::format::fmt_f64;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("{0}")]
    Invalid(String),
}

fn malformed(line: u64, message: impl Into<String>) -> FormatError {
    FormatError::Malformed {
        line,
        message: message.into(),
    }
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

/// P-values read from a file, with the file's own indices.
#[derive(Debug, Clone, PartialEq)]
pub struct PValueTable {
    /// 1-based indices as written in the file, in row order.
    pub indices: Vec<u64>,
    pub pvalues: PValueVector,
}

impl PValueTable {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

pub fn read_pvalues<R: Read>(reader: R) -> Result<PValueTable, FormatError> {
    let mut csv = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let header = csv.headers()?.clone();
    let cols: Vec<&str> = header.iter().collect();
    let labelled = match cols.as_slice() {
        ["index", "p_value"] => false,
        ["index", "p_value", "label"] => true,
        _ => {
            return Err(malformed(
                1,
                format!(
                    "expected header index,p_value[,label], found {}",
                    cols.join(",")
                ),
            ))
        }
    };
    let width = cols.len();
    let mut indices = Vec::new();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut seen = HashSet::new();
    for record in csv.records() {
        let record = record?;
        let line = line_of(&record);
        if record.len() != width {
            return Err(malformed(
                line,
                format!("expected {width} fields, found {}", record.len()),
            ));
        }
        let index: u64 = record[0].parse().ok().filter(|&i| i >= 1).ok_or_else(|| {
            malformed(
                line,
                format!("index {:?} is not a positive integer", &record[0]),
            )
        })?;
        if !seen.insert(index) {
            return Err(malformed(line, format!("duplicate index {index}")));
        }
        let p: f64 = record[1]
            .parse()
            .map_err(|_| malformed(line, format!("p_value {:?} is not a number", &record[1])))?;
        if !(0.0..=1.0).contains(&p) {
            return Err(malformed(line, format!("p_value {p} is outside [0, 1]")));
        }
        if labelled {
            labels.push(match &record[2] {
                "null" => Label::TrueNull,
                "alt" => Label::FalseNull,
                other => {
                    return Err(malformed(
                        line,
                        format!("label {other:?} is neither null nor alt"),
                    ))
                }
            });
        }
        indices.push(index);
        values.push(p);
    }
    if values.is_empty() {
        return Err(malformed(1, "no p-values"));
    }
    let pvalues = if labelled {
        PValueVector::with_labels(values, labels)
    } else {
        PValueVector::new(values)
    }
    .map_err(|e| FormatError::Invalid(e.to_string()))?;
    Ok(PValueTable { indices, pvalues })
}

/// Writes `index,p_value[,label]` rows with indices `1..=m`.
pub fn write_pvalues<W: Write>(writer: W, p: &PValueVector) -> Result<(), FormatError> {
    let mut csv = csv::Writer::from_writer(writer);
    match p.labels() {
        Some(labels) => {
            csv.write_record(["index", "p_value", "label"])?;
            for (i, (v, l)) in p.values().iter().zip(labels).enumerate() {
                let label = if *l == Label::TrueNull { "null" } else { "alt" };
                csv.write_record([(i + 1).to_string(), fmt_f64(*v), label.to_string()])?;
            }
        }
        None => {
            csv.write_record(["index", "p_value"])?;
            for (i, v) in p.values().iter().enumerate() {
                csv.write_record([(i + 1).to_string(), fmt_f64(*v)])?;
            }
        }
    }
    csv.flush()?;
    Ok(())
}

/// Writes one `index,rejected[,released_log_p]` row per input row, keeping
/// the input's indices and order. The released column is empty for
/// hypotheses that were not rejected.
pub fn write_rejections<W: Write>(
    writer: W,
    table: &PValueTable,
    report: &RejectionReport,
    with_released: bool,
) -> Result<(), FormatError> {
    let mut csv = csv::Writer::from_writer(writer);
    if with_released {
        csv.write_record(["index", "rejected", "released_log_p"])?;
    } else {
        csv.write_record(["index", "rejected"])?;
    }
    for (pos, index) in table.indices.iter().enumerate() {
        let rejected = if report.is_rejected(pos) { "1" } else { "0" };
        if with_released {
            let released = report
                .released()
                .get(&pos)
                .map(|v| fmt_f64(*v))
                .unwrap_or_default();
            csv.write_record([index.to_string(), rejected.to_string(), released])?;
        } else {
            csv.write_record([index.to_string(), rejected.to_string()])?;
        }
    }
    csv.flush()?;
    Ok(())
}

/// Sidecar describing a dataset file and its null model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "B")]
    pub bound: f64,
    pub mu: f64,
    pub sigma: f64,
}

impl ModelSpec {
    pub fn from_json<R: Read>(reader: R) -> Result<Self, FormatError> {
        Ok(serde_json::from_reader(reader)?)
    }

    pub fn null_model(&self) -> dpfdr_core::Result<NullModel> {
        NullModel::new(self.bound, self.mu, self.sigma)
    }
}

/// Reads a dataset whose shape must agree with `spec`.
pub fn read_dataset<R: Read>(
    reader: R,
    spec: &ModelSpec,
    model: NullModel,
) -> Result<StatisticDataset, FormatError> {
    let mut csv = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let m = csv.headers()?.len();
    if m != spec.m {
        return Err(malformed(
            1,
            format!("header has {m} columns, the model declares m = {}", spec.m),
        ));
    }
    let mut data = Vec::with_capacity(spec.n.saturating_mul(m));
    let mut n = 0usize;
    for record in csv.records() {
        let record = record?;
        let line = line_of(&record);
        if record.len() != m {
            return Err(malformed(
                line,
                format!("ragged row: expected {m} entries, found {}", record.len()),
            ));
        }
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| {
                    malformed(
                        line,
                        format!("column {}: missing or non-numeric entry {cell:?}", c + 1),
                    )
                })?;
            if v.abs() > model.bound {
                return Err(malformed(
                    line,
                    format!("column {}: entry {v} exceeds B = {}", c + 1, model.bound),
                ));
            }
            data.push(v);
        }
        n += 1;
    }
    if n != spec.n {
        return Err(malformed(
            0,
            format!("found {n} rows, the model declares n = {}", spec.n),
        ));
    }
    StatisticDataset::from_flat(n, m, data, model).map_err(|e| FormatError::Invalid(e.to_string()))
}
