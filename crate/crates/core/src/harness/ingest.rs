//! CSV input and output of datasets.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Matrix, Provenance};
use crate::error::{Error, Result};
use crate::harness::synthetic::label_range;

/// Which column holds the label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
}

/// How the label bound `M` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "policy")]
pub enum BoundPolicy {
    /// `M = max |y|`, so nothing is clipped.
    #[default]
    Observed,
    /// A promised bound; labels beyond it are clipped and counted.
    Fixed { bound: f64 },
}

fn parse_cell(raw: &str, row: usize, column: &str) -> Result<f64> {
    let v: f64 = raw.trim().parse().map_err(|_| Error::Parse {
        row,
        column: column.to_string(),
        message: format!("not a number: {raw:?}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            row,
            column: column.to_string(),
            message: format!("non-finite value {raw:?}"),
        });
    }
    Ok(v)
}

/// Reads a numeric CSV with a header row, min-max scales every feature
/// column to `[0,1]` (constant columns become 0) and bounds the labels.
/// Row numbers in errors count data rows from 1.
pub fn ingest_csv(
    path: impl AsRef<Path>,
    label: &LabelColumn,
    policy: BoundPolicy,
) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let label_idx = match label {
        LabelColumn::Index(i) if *i < headers.len() => *i,
        LabelColumn::Name(n) => {
            headers
                .iter()
                .position(|h| h == n)
                .ok_or_else(|| Error::Parse {
                    row: 0,
                    column: n.clone(),
                    message: "no such column".into(),
                })?
        }
        LabelColumn::Index(i) => {
            return Err(Error::Parse {
                row: 0,
                column: i.to_string(),
                message: "no such column".into(),
            })
        }
    };
    let d = headers.len() - 1;
    let mut features = Vec::new();
    let mut y = Vec::new();
    for (r, rec) in reader.records().enumerate() {
        let rec = rec?;
        if rec.len() != headers.len() {
            return Err(Error::Parse {
                row: r + 1,
                column: String::new(),
                message: format!("expected {} fields, found {}", headers.len(), rec.len()),
            });
        }
        for (c, raw) in rec.iter().enumerate() {
            let v = parse_cell(raw, r + 1, &headers[c])?;
            if c == label_idx {
                y.push(v);
            } else {
                features.push(v);
            }
        }
    }
    if y.is_empty() {
        return Err(Error::EmptyData(format!(
            "{} has no data rows",
            path.display()
        )));
    }
    let n = y.len();
    let mut x = Matrix::new(features, n, d)?;
    for c in 0..d {
        let (lo, hi) = (0..n).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| {
            (lo.min(x.get(i, c)), hi.max(x.get(i, c)))
        });
        for i in 0..n {
            let v = &mut x.row_mut(i)[c];
            *v = if hi > lo {
                ((*v - lo) / (hi - lo)).clamp(0.0, 1.0)
            } else {
                0.0
            };
        }
    }
    let mut clipped = 0;
    let bound = match policy {
        BoundPolicy::Observed => {
            let m = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if m > 0.0 {
                m
            } else {
                1.0
            }
        }
        BoundPolicy::Fixed { bound } => {
            for v in &mut y {
                if v.abs() > bound {
                    clipped += 1;
                    *v = v.clamp(-bound, bound);
                }
            }
            bound
        }
    };
    let range = label_range(&y);
    let mut data = Dataset::new(
        x,
        y,
        bound,
        range,
        Provenance::Csv {
            path: path.display().to_string(),
        },
    )?;
    data.clipped = clipped;
    Ok(data)
}

/// Writes features as `x0..x{d-1}` followed by the label column `y`.
pub fn write_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header: Vec<String> = (0..data.dim()).map(|c| format!("x{c}")).collect();
    header.push("y".into());
    w.write_record(&header)?;
    for i in 0..data.len() {
        let rec: Vec<String> = data
            .x
            .row(i)
            .iter()
            .chain(std::iter::once(&data.y[i]))
            .map(f64::to_string)
            .collect();
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
