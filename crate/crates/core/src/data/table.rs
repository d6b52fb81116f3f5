use std::io::Read;
use std::path::Path;

use super::schema::{ColumnKind, Schema};
use crate::error::{Error, Result};

/// One parsed feature column. `None` marks a missing cell.
#[derive(Clone, Debug, PartialEq)]
pub enum RawColumn {
    Numeric(Vec<Option<f64>>),
    Categorical(Vec<Option<String>>),
}

impl RawColumn {
    pub fn len(&self) -> usize {
        match self {
            RawColumn::Numeric(v) => v.len(),
            RawColumn::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Parsed rows with validated time/event columns.
#[derive(Clone, Debug, PartialEq)]
pub struct RawTable {
    pub schema: Schema,
    pub time: Vec<f64>,
    pub event: Vec<bool>,
    pub columns: Vec<RawColumn>,
    /// Rows dropped because time or event was missing.
    pub dropped_missing: usize,
    /// Rows dropped because the time was not strictly positive.
    pub dropped_nonpositive: usize,
}

impl RawTable {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    /// Rows in the given order.
    pub fn select(&self, idx: &[usize]) -> RawTable {
        let columns = self
            .columns
            .iter()
            .map(|c| match c {
                RawColumn::Numeric(v) => RawColumn::Numeric(idx.iter().map(|&i| v[i]).collect()),
                RawColumn::Categorical(v) => {
                    RawColumn::Categorical(idx.iter().map(|&i| v[i].clone()).collect())
                }
            })
            .collect();
        RawTable {
            schema: self.schema.clone(),
            time: idx.iter().map(|&i| self.time[i]).collect(),
            event: idx.iter().map(|&i| self.event[i]).collect(),
            columns,
            dropped_missing: 0,
            dropped_nonpositive: 0,
        }
    }
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "NA" | "na" | "NaN" | "nan" | "null" | "?")
}

/// Reads a headered CSV file against a schema.
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<RawTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
    read_csv(file, schema)
}

pub fn read_csv<R: Read>(reader: R, schema: &Schema) -> Result<RawTable> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let time_col = find(&schema.time)?;
    let event_col = find(&schema.event)?;
    let feature_cols = schema
        .columns
        .iter()
        .map(|c| find(&c.name))
        .collect::<Result<Vec<_>>>()?;

    let mut table = RawTable {
        schema: schema.clone(),
        time: Vec::new(),
        event: Vec::new(),
        columns: schema
            .columns
            .iter()
            .map(|c| match c.kind {
                ColumnKind::Numeric => RawColumn::Numeric(Vec::new()),
                ColumnKind::Categorical => RawColumn::Categorical(Vec::new()),
            })
            .collect(),
        dropped_missing: 0,
        dropped_nonpositive: 0,
    };

    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        // 1-based data row numbering, header excluded
        let row = r + 1;
        let cell = |c: usize| record.get(c).unwrap_or("");
        let (t_raw, e_raw) = (cell(time_col), cell(event_col));
        if is_missing(t_raw) || is_missing(e_raw) {
            table.dropped_missing += 1;
            continue;
        }
        let t: f64 = t_raw.parse().map_err(|_| Error::Cell {
            row,
            column: schema.time.clone(),
            message: format!("`{t_raw}` is not a number"),
        })?;
        if !t.is_finite() {
            return Err(Error::Cell {
                row,
                column: schema.time.clone(),
                message: format!("time must be finite, got `{t_raw}`"),
            });
        }
        let e = match e_raw.parse::<f64>() {
            Ok(v) if v == 0.0 => false,
            Ok(v) if v == 1.0 => true,
            _ => {
                return Err(Error::Cell {
                    row,
                    column: schema.event.clone(),
                    message: format!("event must be 0 or 1, got `{e_raw}`"),
                })
            }
        };
        if t <= 0.0 {
            table.dropped_nonpositive += 1;
            continue;
        }
        for ((spec, &c), col) in schema.columns.iter().zip(&feature_cols).zip(&mut table.columns) {
            let raw = cell(c);
            match col {
                RawColumn::Numeric(v) => {
                    if is_missing(raw) {
                        v.push(None);
                    } else {
                        let x: f64 = raw.parse().ok().filter(|x: &f64| x.is_finite()).ok_or_else(|| {
                            Error::Cell {
                                row,
                                column: spec.name.clone(),
                                message: format!("`{raw}` is not a finite number"),
                            }
                        })?;
                        v.push(Some(x));
                    }
                }
                RawColumn::Categorical(v) => {
                    v.push(if is_missing(raw) { None } else { Some(raw.to_string()) });
                }
            }
        }
        table.time.push(t);
        table.event.push(e);
    }

    if table.dropped_missing > 0 {
        log::warn!("dropped {} rows with missing time or event", table.dropped_missing);
    }
    if table.dropped_nonpositive > 0 {
        log::warn!("dropped {} rows with non-positive time", table.dropped_nonpositive);
    }
    if table.is_empty() {
        return Err(Error::Data("no usable rows".into()));
    }
    Ok(table)
}
