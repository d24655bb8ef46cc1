//! Column-major tabular datasets.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n_rows: usize,
    n_features: usize,
    /// `columns[f * n_rows + i]` is feature `f` of row `i`.
    columns: Vec<f64>,
    names: Option<Vec<String>>,
}

impl Dataset {
    pub fn from_rows(rows: &[Vec<f64>], names: Option<Vec<String>>) -> Result<Self> {
        let n_features = match (rows.first(), &names) {
            (Some(r), _) => r.len(),
            (None, Some(n)) => n.len(),
            (None, None) => 0,
        };
        if let Some(i) = rows.iter().position(|r| r.len() != n_features) {
            return Err(Error::Invalid(format!(
                "row {i} has {} values, expected {n_features}",
                rows[i].len()
            )));
        }
        if names.as_ref().is_some_and(|n| n.len() != n_features) {
            return Err(Error::Invalid("header width does not match rows".into()));
        }
        let n_rows = rows.len();
        let mut columns = vec![0.0; n_rows * n_features];
        for (i, row) in rows.iter().enumerate() {
            for (f, &v) in row.iter().enumerate() {
                columns[f * n_rows + i] = v;
            }
        }
        Ok(Self {
            n_rows,
            n_features,
            columns,
            names,
        })
    }

    /// Read a CSV file with a header row; column order is feature order.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
        let names: Vec<String> = reader
            .headers()
            .map_err(|e| csv_error(path, e))?
            .iter()
            .map(|h| h.trim().to_owned())
            .collect();
        let mut rows = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| csv_error(path, e))?;
            let row = record
                .iter()
                .enumerate()
                .map(|(j, cell)| {
                    cell.trim().parse::<f64>().map_err(|_| {
                        Error::Parse(format!(
                            "{}: row {i}, column {}: cannot parse {cell:?} as a number",
                            path.display(),
                            names.get(j).map_or("?", String::as_str)
                        ))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::from_rows(&rows, Some(names))
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    pub fn column(&self, feature: usize) -> &[f64] {
        &self.columns[feature * self.n_rows..(feature + 1) * self.n_rows]
    }

    pub fn get(&self, row: usize, feature: usize) -> f64 {
        self.columns[feature * self.n_rows + row]
    }

    /// Gather row `i` into `out`.
    pub fn read_row(&self, i: usize, out: &mut [f64]) {
        for (f, slot) in out.iter_mut().enumerate().take(self.n_features) {
            *slot = self.columns[f * self.n_rows + i];
        }
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_features];
        self.read_row(i, &mut out);
        out
    }

    /// Error on the first NaN, reporting its row and column.
    pub fn check_finite(&self) -> Result<()> {
        for f in 0..self.n_features {
            if let Some(i) = self.column(f).iter().position(|v| v.is_nan()) {
                let column = self
                    .names
                    .as_ref()
                    .map_or_else(|| f.to_string(), |n| n[f].clone());
                return Err(Error::NaNInput { row: i, column });
            }
        }
        Ok(())
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Parse(format!("{}: {e}", path.display()))
}
