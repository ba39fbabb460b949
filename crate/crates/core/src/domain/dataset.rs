use std::collections::HashSet;
use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_atomic;

/// Default response column name.
pub const RESPONSE: &str = "time_seconds";

/// Named features plus the response column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSchema {
    feature_names: Vec<String>,
    response_name: String,
}

impl DatasetSchema {
    pub fn new<S: Into<String>>(
        features: impl IntoIterator<Item = S>,
        response: impl Into<String>,
    ) -> Result<Self> {
        let feature_names: Vec<String> = features.into_iter().map(Into::into).collect();
        let response_name = response.into();
        if feature_names.is_empty() {
            return Err(Error::Schema("at least one feature is required".into()));
        }
        let mut seen = HashSet::new();
        for name in feature_names.iter().chain(std::iter::once(&response_name)) {
            if name.is_empty() {
                return Err(Error::Schema("empty column name".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::Schema(format!("duplicate column name {name:?}")));
            }
        }
        Ok(DatasetSchema {
            feature_names,
            response_name,
        })
    }

    fn preset(features: &[&str]) -> Self {
        Self::new(features.iter().copied(), RESPONSE).expect("preset schema is valid")
    }

    /// Grid-size stencil vector `(I, J, K)`.
    pub fn stencil_grid() -> Self {
        Self::preset(&["I", "J", "K"])
    }

    /// Grid size plus spatial blocking `(I, J, K, b_i, b_j, b_k)`.
    pub fn stencil_blocked() -> Self {
        Self::preset(&["I", "J", "K", "b_i", "b_j", "b_k"])
    }

    /// Grid size plus thread count `(I, J, K, t)`.
    pub fn stencil_threads() -> Self {
        Self::preset(&["I", "J", "K", "t"])
    }

    /// Full stencil vector `(I, J, K, b_i, b_j, b_k, u, t)`.
    pub fn stencil_full() -> Self {
        Self::preset(&["I", "J", "K", "b_i", "b_j", "b_k", "u", "t"])
    }

    /// FMM vector `(t, N, q, k)`.
    pub fn fmm() -> Self {
        Self::preset(&["t", "N", "q", "k"])
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn response_name(&self) -> &str {
        &self.response_name
    }

    pub fn len(&self) -> usize {
        self.feature_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.feature_names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    /// Schema with one more feature column appended.
    pub fn with_feature(&self, name: &str) -> Result<Self> {
        let mut names = self.feature_names.clone();
        names.push(name.to_string());
        Self::new(names, self.response_name.clone())
    }
}

/// Feature rows with strictly positive responses.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: DatasetSchema,
    features: Vec<Vec<f64>>,
    responses: Vec<f64>,
}

impl Dataset {
    pub fn new(schema: DatasetSchema, features: Vec<Vec<f64>>, responses: Vec<f64>) -> Result<Self> {
        if features.len() != responses.len() {
            return Err(Error::Schema(format!(
                "{} feature rows but {} responses",
                features.len(),
                responses.len()
            )));
        }
        for (i, (row, &y)) in features.iter().zip(&responses).enumerate() {
            if row.len() != schema.len() {
                return Err(Error::Row {
                    row: i + 1,
                    reason: format!("expected {} features, found {}", schema.len(), row.len()),
                });
            }
            if let Some(f) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::Row {
                    row: i + 1,
                    reason: format!("feature {:?} is not finite", schema.feature_names()[f]),
                });
            }
            if !(y.is_finite() && y > 0.0) {
                return Err(Error::Row {
                    row: i + 1,
                    reason: format!("response must be positive, found {y}"),
                });
            }
        }
        Ok(Dataset {
            schema,
            features,
            responses,
        })
    }

    pub fn schema(&self) -> &DatasetSchema {
        &self.schema
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.features
            .iter()
            .map(Vec::as_slice)
            .zip(self.responses.iter().copied())
    }

    /// Rows at `indices`, in the given order (repeats allowed).
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            responses: indices.iter().map(|&i| self.responses[i]).collect(),
        }
    }

    /// Same rows with `values` appended as a new feature column.
    pub fn with_feature_column(&self, name: &str, values: &[f64]) -> Result<Dataset> {
        if values.len() != self.len() {
            return Err(Error::Schema(format!(
                "column {name:?} has {} values for {} rows",
                values.len(),
                self.len()
            )));
        }
        let schema = self.schema.with_feature(name)?;
        let features = self
            .features
            .iter()
            .zip(values)
            .map(|(row, &v)| {
                let mut row = row.clone();
                row.push(v);
                row
            })
            .collect();
        Dataset::new(schema, features, self.responses.clone())
    }

    /// Same rows with every feature row replaced by `f(row)`.
    pub fn map_features(&self, schema: DatasetSchema, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Dataset> {
        let features = self.features.iter().map(|r| f(r)).collect();
        Dataset::new(schema, features, self.responses.clone())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<&str> = self.schema.feature_names().iter().map(String::as_str).collect();
        header.push(self.schema.response_name());
        w.write_record(&header)?;
        for (row, y) in self.rows() {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(y.to_string());
            w.write_record(&rec)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Internal(format!("csv flush: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::Internal(e.to_string()))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), self.to_csv_string()?.as_bytes())
    }
}

/// A parsed CSV: header plus numeric cells.
#[derive(Debug, Clone)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

pub fn read_table(path: impl AsRef<Path>) -> Result<Table> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_table(&text)
}

pub fn parse_table(text: &str) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row_no = i + 1;
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::Row {
                row: row_no,
                reason: format!("expected {} cells, found {}", header.len(), record.len()),
            });
        }
        let mut values = Vec::with_capacity(record.len());
        for (cell, name) in record.iter().zip(&header) {
            let v: f64 = cell.parse().map_err(|_| Error::Row {
                row: row_no,
                reason: format!("non-numeric value {cell:?} in column {name:?}"),
            })?;
            values.push(v);
        }
        rows.push(values);
    }
    Ok(Table { header, rows })
}

impl Table {
    /// Binds the table to `schema`; column order in the file is free but the
    /// set of columns must match exactly.
    pub fn into_dataset(self, schema: &DatasetSchema) -> Result<Dataset> {
        let mut expected: Vec<String> = schema.feature_names().to_vec();
        expected.push(schema.response_name().to_string());
        let found_set: HashSet<&str> = self.header.iter().map(String::as_str).collect();
        let expected_set: HashSet<&str> = expected.iter().map(String::as_str).collect();
        if found_set != expected_set || self.header.len() != expected.len() {
            return Err(Error::HeaderMismatch {
                expected,
                found: self.header,
            });
        }
        let cols: Vec<usize> = schema
            .feature_names()
            .iter()
            .map(|n| self.column(n).expect("checked above"))
            .collect();
        let ycol = self.column(schema.response_name()).expect("checked above");
        let mut features = Vec::with_capacity(self.rows.len());
        let mut responses = Vec::with_capacity(self.rows.len());
        for (i, row) in self.rows.iter().enumerate() {
            let y = row[ycol];
            if !(y > 0.0 && y.is_finite()) {
                return Err(Error::Row {
                    row: i + 1,
                    reason: format!("response must be positive, found {y}"),
                });
            }
            features.push(cols.iter().map(|&c| row[c]).collect());
            responses.push(y);
        }
        Dataset::new(schema.clone(), features, responses)
    }

    /// Every column except `response` becomes a feature, in file order.
    pub fn into_dataset_inferred(self, response: &str) -> Result<Dataset> {
        if self.column(response).is_none() {
            return Err(Error::Schema(format!("no response column {response:?} in header")));
        }
        let features: Vec<&String> = self.header.iter().filter(|h| *h != response).collect();
        let schema = DatasetSchema::new(features.into_iter().cloned(), response)?;
        self.into_dataset(&schema)
    }
}

pub fn load_dataset(path: impl AsRef<Path>, schema: &DatasetSchema) -> Result<Dataset> {
    read_table(path)?.into_dataset(schema)
}

/// Number of training rows drawn for `fraction` of `n` rows: floor with a
/// clamp to at least one. A tiny slack absorbs products like `0.29 * 100`
/// landing just under an integer.
pub fn train_size(n: usize, fraction: f64) -> usize {
    (((fraction * n as f64) + 1e-9).floor() as usize).clamp(1, n.max(1))
}

/// Uniform sample without replacement of `train_size(|ds|, fraction)` rows;
/// the test set is the complement. Both keep the original row order.
pub fn split_uniform(ds: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(ds.len(), fraction, seed)?;
    Ok((ds.subset(&train), ds.subset(&test)))
}

/// Index form of [`split_uniform`].
pub fn split_indices(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::config(format!("fraction must be in (0, 1), found {fraction}")));
    }
    let k = train_size(n, fraction);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![false; n];
    for i in index::sample(&mut rng, n, k) {
        chosen[i] = true;
    }
    let (train, test): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| chosen[i]);
    Ok((train, test))
}
