use serde::{Deserialize, Serialize};

use crate::domain::Dataset;
use crate::error::{Error, Result};

/// Per-feature affine map to zero mean and unit variance. Constant columns
/// get a unit scale and map to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(ds: &Dataset) -> Result<Self> {
        Self::fit_rows(ds.features())
    }

    pub fn fit_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyDataset)?;
        let d = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        let mut std = vec![1.0; d];
        for f in 0..d {
            let x0 = rows[0][f];
            if rows.iter().all(|r| r[f] == x0) {
                mean[f] = x0;
                continue;
            }
            let m = rows.iter().map(|r| r[f]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[f] - m).powi(2)).sum::<f64>() / n;
            mean[f] = m;
            if var > 0.0 {
                std[f] = var.sqrt();
            }
        }
        Ok(Standardizer { mean, std })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn inverse(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| v * s + m)
            .collect()
    }

    pub fn transform(&self, ds: &Dataset) -> Result<Dataset> {
        ds.map_features(ds.schema().clone(), |r| self.apply(r))
    }
}
