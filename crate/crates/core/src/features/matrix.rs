use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Provenance class of a feature column.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnTag {
    /// Room sensors (indoor temperature, humidity, illuminance).
    Iot,
    /// Outdoor weather and other exogenous covariates.
    External,
    /// Game engagement: points, surveys, rank, portal visits.
    Engagement,
    /// One-hot calendar indicators.
    Dummy,
    /// Lagged device states and usage relative to baseline.
    Resource,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    pub tag: ColumnTag,
}

impl ColumnMeta {
    pub fn new(name: impl Into<String>, tag: ColumnTag) -> Self {
        Self {
            name: name.into(),
            tag,
        }
    }
}

/// Dense row-major design matrix with column metadata and optional binary target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    values: Vec<f64>,
    n_rows: usize,
    columns: Vec<ColumnMeta>,
    target: Option<Vec<u8>>,
}

impl FeatureMatrix {
    /// Validates shape, finiteness and the `{0, 1}` domain of dummy columns.
    pub fn new(
        values: Vec<f64>,
        columns: Vec<ColumnMeta>,
        target: Option<Vec<u8>>,
    ) -> Result<Self> {
        let n_cols = columns.len();
        if n_cols == 0 {
            if !values.is_empty() {
                return Err(Error::Schema(
                    "values given for a matrix without columns".into(),
                ));
            }
        } else if !values.len().is_multiple_of(n_cols) {
            return Err(Error::Schema(format!(
                "{} values do not fill rows of {n_cols} columns",
                values.len()
            )));
        }
        let n_rows = values
            .len()
            .checked_div(n_cols)
            .unwrap_or_else(|| target.as_ref().map_or(0, Vec::len));
        if let Some(t) = &target {
            if t.len() != n_rows {
                return Err(Error::LengthMismatch {
                    left: n_rows,
                    right: t.len(),
                });
            }
            if t.iter().any(|&l| l > 1) {
                return Err(Error::Schema("target must be binary".into()));
            }
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Schema(format!(
                "non-finite value in column `{}`",
                columns[pos % n_cols].name
            )));
        }
        for (j, col) in columns.iter().enumerate() {
            if col.tag == ColumnTag::Dummy
                && (0..n_rows).any(|i| !matches!(values[i * n_cols + j], 0.0 | 1.0))
            {
                return Err(Error::Schema(format!(
                    "dummy column `{}` is not 0/1",
                    col.name
                )));
            }
        }
        Ok(Self {
            values,
            n_rows,
            columns,
            target,
        })
    }

    /// Builds a matrix from column vectors.
    pub fn from_columns(
        cols: Vec<Vec<f64>>,
        columns: Vec<ColumnMeta>,
        target: Option<Vec<u8>>,
    ) -> Result<Self> {
        if cols.len() != columns.len() {
            return Err(Error::LengthMismatch {
                left: cols.len(),
                right: columns.len(),
            });
        }
        let n = cols.first().map_or(0, Vec::len);
        if let Some(c) = cols.iter().find(|c| c.len() != n) {
            return Err(Error::LengthMismatch {
                left: n,
                right: c.len(),
            });
        }
        let mut values = Vec::with_capacity(n * cols.len());
        for i in 0..n {
            values.extend(cols.iter().map(|c| c[i]));
        }
        Self::new(values, columns, target)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn columns(&self) -> &[ColumnMeta] {
        &self.columns
    }

    pub fn names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn target(&self) -> Option<&[u8]> {
        self.target.as_deref()
    }

    /// The target, or a schema error when none was attached.
    pub fn require_target(&self) -> Result<&[u8]> {
        self.target
            .as_deref()
            .ok_or_else(|| Error::Schema("feature matrix has no target".into()))
    }

    pub fn with_target(self, target: Vec<u8>) -> Result<Self> {
        Self::new(self.values, self.columns, Some(target))
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_cols();
        &self.values[i * p..(i + 1) * p]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_cols() + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.get(i, j)).collect()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let p = self.n_cols();
        let mut values = Vec::with_capacity(rows.len() * p);
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        Self {
            values,
            n_rows: rows.len(),
            columns: self.columns.clone(),
            target: self
                .target
                .as_ref()
                .map(|t| rows.iter().map(|&r| t[r]).collect()),
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let mut values = Vec::with_capacity(self.n_rows * cols.len());
        for i in 0..self.n_rows {
            let row = self.row(i);
            values.extend(cols.iter().map(|&j| row[j]));
        }
        Self {
            values,
            n_rows: self.n_rows,
            columns: cols.iter().map(|&j| self.columns[j].clone()).collect(),
            target: self.target.clone(),
        }
    }

    pub fn select_names(&self, names: &[impl AsRef<str>]) -> Result<Self> {
        let idx = names
            .iter()
            .map(|n| self.column_index(n.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.select_columns(&idx))
    }

    /// Drops every column whose values are all equal, returning the names removed.
    pub fn drop_constant_columns(&self) -> (Self, Vec<String>) {
        let mut keep = Vec::new();
        let mut dropped = Vec::new();
        for j in 0..self.n_cols() {
            let first = if self.n_rows > 0 { self.get(0, j) } else { 0.0 };
            if (0..self.n_rows).any(|i| self.get(i, j) != first) {
                keep.push(j);
            } else {
                dropped.push(self.columns[j].name.clone());
            }
        }
        (self.select_columns(&keep), dropped)
    }

    pub(crate) fn from_parts_unchecked(
        values: Vec<f64>,
        n_rows: usize,
        columns: Vec<ColumnMeta>,
        target: Option<Vec<u8>>,
    ) -> Self {
        debug_assert_eq!(values.len(), n_rows * columns.len());
        Self {
            values,
            n_rows,
            columns,
            target,
        }
    }

    /// Writes the matrix with a header row, target last when present.
    pub fn write_csv<W: std::io::Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        let mut header: Vec<&str> = self.names();
        if self.target.is_some() {
            header.push("target");
        }
        w.write_record(&header)?;
        for i in 0..self.n_rows {
            let mut rec: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            if let Some(t) = &self.target {
                rec.push(t[i].to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}
