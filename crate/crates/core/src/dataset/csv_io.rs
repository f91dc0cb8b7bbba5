use std::io::{Read, Write};
use std::path::Path;

use log::warn;
use nalgebra::{DMatrix, DVector};

use super::{ColumnKind, Dataset};
use crate::error::{Error, Result};

/// Reserved header name; when present its values become [`Dataset::row_ids`]
/// instead of a feature.
pub const ID_COLUMN: &str = "point_id";

/// Load a CSV file with a header row. `target_column` must be present.
pub fn load_csv(path: impl AsRef<Path>, target_column: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    load_csv_reader(file, dataset_name(path), Some(target_column), true)
}

/// Like [`load_csv`] but a missing target column is allowed; the target is
/// then filled with `NaN`.
pub fn load_csv_unlabeled(path: impl AsRef<Path>, target_column: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    load_csv_reader(file, dataset_name(path), Some(target_column), false)
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string())
}

enum Parsed {
    Numeric(Vec<f64>),
    Categorical(Vec<String>, Vec<f64>),
}

fn parse_column(name: &str, cells: &[String]) -> Parsed {
    let non_empty = cells.iter().filter(|c| !c.is_empty()).count();
    let numeric: Vec<Option<f64>> = cells
        .iter()
        .map(|c| c.parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect();
    let parsed = numeric.iter().filter(|v| v.is_some()).count();
    if non_empty == 0 || 2 * parsed > non_empty {
        let bad = non_empty - parsed;
        if bad > 0 {
            warn!("column `{name}`: {bad} non-numeric cell(s) treated as missing");
        }
        return Parsed::Numeric(numeric.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect());
    }
    let mut levels: Vec<String> = cells.iter().filter(|c| !c.is_empty()).cloned().collect();
    levels.sort();
    levels.dedup();
    let codes = cells
        .iter()
        .map(|c| {
            if c.is_empty() {
                f64::NAN
            } else {
                levels.binary_search(c).map(|i| i as f64).unwrap_or(f64::NAN)
            }
        })
        .collect();
    Parsed::Categorical(levels, codes)
}

/// Parse RFC-4180 CSV from any reader. Empty cells are missing values;
/// a column is numeric when more than half of its non-empty cells parse as
/// reals, otherwise it is categorical with lexicographically ordered levels.
pub fn load_csv_reader(
    reader: impl Read,
    name: impl Into<String>,
    target_column: Option<&str>,
    require_target: bool,
) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err(Error::EmptyFile);
    }
    let mut cols: Vec<Vec<String>> = vec![Vec::new(); header.len()];
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::RaggedRows {
                row: row + 1,
                expected: header.len(),
                found: record.len(),
            });
        }
        for (col, cell) in cols.iter_mut().zip(record.iter()) {
            col.push(cell.to_string());
        }
    }
    let n = cols[0].len();
    if n == 0 {
        return Err(Error::EmptyFile);
    }

    let target_idx = target_column.and_then(|t| header.iter().position(|h| h == t));
    if target_idx.is_none() && require_target {
        return Err(Error::MissingTarget(target_column.unwrap_or("").to_string()));
    }
    let id_idx = header.iter().position(|h| h == ID_COLUMN);

    let target: Vec<f64> = match target_idx {
        Some(t) => match parse_column(&header[t], &cols[t]) {
            Parsed::Numeric(v) => v,
            Parsed::Categorical(..) => {
                return Err(Error::SchemaMismatch(format!(
                    "target column `{}` is not numeric",
                    header[t]
                )))
            }
        },
        None => vec![f64::NAN; n],
    };
    let row_ids: Vec<usize> = match id_idx {
        Some(c) => cols[c]
            .iter()
            .enumerate()
            .map(|(i, s)| {
                s.parse::<usize>().map_err(|_| {
                    Error::SchemaMismatch(format!("row {}: `{ID_COLUMN}` value `{s}` is not an integer", i + 1))
                })
            })
            .collect::<Result<_>>()?,
        None => (0..n).collect(),
    };

    let mut names = Vec::new();
    let mut kinds = Vec::new();
    let mut data: Vec<Vec<f64>> = Vec::new();
    for (j, h) in header.iter().enumerate() {
        if Some(j) == target_idx || Some(j) == id_idx {
            continue;
        }
        names.push(h.clone());
        match parse_column(h, &cols[j]) {
            Parsed::Numeric(v) => {
                kinds.push(ColumnKind::Numeric);
                data.push(v);
            }
            Parsed::Categorical(levels, codes) => {
                kinds.push(ColumnKind::Categorical { levels });
                data.push(codes);
            }
        }
    }

    // Rows without a target cannot be used for supervised evaluation.
    let keep: Vec<usize> = if target_idx.is_some() {
        (0..n).filter(|&i| target[i].is_finite()).collect()
    } else {
        (0..n).collect()
    };
    if keep.len() < n {
        warn!("dropped {} row(s) with a missing target", n - keep.len());
    }
    if keep.is_empty() {
        return Err(Error::EmptyFile);
    }
    let p = names.len();
    let features = DMatrix::from_fn(keep.len(), p, |i, j| data[j][keep[i]]);
    Ok(Dataset {
        name: name.into(),
        features,
        target: DVector::from_iterator(keep.len(), keep.iter().map(|&i| target[i])),
        feature_names: names,
        target_name: target_column.unwrap_or("target").to_string(),
        columns: kinds,
        row_ids: keep.iter().map(|&i| row_ids[i]).collect(),
    })
}

/// Write a dataset as CSV (features then target). Reals use the shortest
/// representation that parses back to the same `f64`; categorical cells are
/// written as their level names.
pub fn write_csv(d: &Dataset, out: impl Write, with_ids: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = Vec::new();
    if with_ids {
        header.push(ID_COLUMN);
    }
    header.extend(d.feature_names.iter().map(String::as_str));
    header.push(&d.target_name);
    w.write_record(&header)?;
    for i in 0..d.n_rows() {
        let mut rec: Vec<String> = Vec::with_capacity(header.len());
        if with_ids {
            rec.push(d.row_ids[i].to_string());
        }
        for (j, kind) in d.columns.iter().enumerate() {
            let v = d.features[(i, j)];
            rec.push(match kind {
                _ if v.is_nan() => String::new(),
                ColumnKind::Numeric => format!("{v}"),
                ColumnKind::Categorical { levels } => levels[v as usize].clone(),
            });
        }
        let t = d.target[i];
        rec.push(if t.is_nan() { String::new() } else { format!("{t}") });
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
