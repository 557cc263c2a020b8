//! CSV ingestion and the serialisable run report.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::BaselineRecord;
use crate::error::{Error, Result};
use crate::geometry::DataMatrix;
use crate::index::IndexCurve;
use crate::partition::PartitionerConfig;
use crate::synthgen::LabeledSample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub dataset_id: String,
    pub k_max: usize,
    pub partitioner: PartitionerConfig,
    pub curve: IndexCurve,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baselines: Option<Vec<BaselineRecord>>,
    /// Only recorded on request, so that default output is reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<u64>,
}

pub fn load_csv(path: impl AsRef<Path>, has_header: bool, drop_columns: &[String]) -> Result<DataMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_csv(file, has_header, drop_columns)
}

/// True when the first record contains a cell that is not a number.
pub fn sniff_header(path: impl AsRef<Path>) -> Result<bool> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut rdr = reader(file, false);
    match rdr.records().next() {
        Some(rec) => {
            let rec = rec.map_err(|e| Error::Io(e.to_string()))?;
            Ok(rec.iter().any(|c| c.parse::<f64>().is_err()))
        }
        None => Ok(false),
    }
}

fn reader<R: Read>(src: R, has_header: bool) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(src)
}

pub fn read_csv<R: Read>(src: R, has_header: bool, drop_columns: &[String]) -> Result<DataMatrix> {
    let mut rdr = reader(src, has_header);
    let names: Vec<String> = if has_header {
        rdr.headers()
            .map_err(|e| Error::Io(e.to_string()))?
            .iter()
            .map(str::to_owned)
            .collect()
    } else {
        Vec::new()
    };

    let mut dropped = Vec::new();
    for name in drop_columns {
        match names.iter().position(|h| h == name) {
            Some(i) => dropped.push(i),
            None if has_header => {
                return Err(Error::InvalidParameter(format!("no column named {name:?}")))
            }
            None => {
                return Err(Error::InvalidParameter(format!(
                    "cannot drop column {name:?} from a file without a header"
                )))
            }
        }
    }

    let first_line = if has_header { 2 } else { 1 };
    let mut values = Vec::new();
    let mut width: Option<usize> = None;
    let mut n = 0;
    for (r, rec) in rdr.records().enumerate() {
        let line = first_line + r;
        let rec = rec.map_err(|e| Error::Io(e.to_string()))?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        let expected = *width.get_or_insert(rec.len());
        if rec.len() != expected || (has_header && rec.len() != names.len()) {
            return Err(Error::Parse {
                row: line,
                column: "-".into(),
                message: format!(
                    "expected {} fields, found {}",
                    if has_header { names.len() } else { expected },
                    rec.len()
                ),
            });
        }
        for (c, cell) in rec.iter().enumerate() {
            if dropped.contains(&c) {
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: line,
                column: names.get(c).cloned().unwrap_or_else(|| (c + 1).to_string()),
                message: format!("non-numeric value {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: line,
                    column: names.get(c).cloned().unwrap_or_else(|| (c + 1).to_string()),
                    message: format!("non-finite value {cell:?}"),
                });
            }
            values.push(v);
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::Io("no data rows".into()));
    }
    let d = values.len() / n;
    if d == 0 {
        return Err(Error::InvalidParameter("no numeric columns left".into()));
    }
    DataMatrix::from_flat(values, n, d)
}

/// Writes the sample with columns `x1..xd,label`, floats at full precision.
pub fn write_labeled_csv<W: Write>(sample: &LabeledSample, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let d = sample.data.d();
    let mut header: Vec<String> = (1..=d).map(|j| format!("x{j}")).collect();
    header.push("label".into());
    w.write_record(&header).map_err(|e| Error::Io(e.to_string()))?;
    for (row, label) in sample.data.rows().zip(&sample.labels) {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(label.to_string());
        w.write_record(&rec).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Formats `x` with `digits` significant digits, trailing zeros removed.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    let exp = x.abs().log10().floor() as i32;
    if !(-5..=15).contains(&exp) {
        let s = format!("{:.*e}", digits - 1, x);
        let (mantissa, e) = s.split_once('e').expect("exponent form");
        return format!("{}e{}", trim_zeros(mantissa), e);
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, x)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
