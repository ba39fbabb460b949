//! Core data types shared by every model.

mod dataset;
mod machine;

pub use dataset::{
    load_dataset, parse_table, read_table, split_indices, split_uniform, train_size, Dataset,
    DatasetSchema, Table, RESPONSE,
};
pub use machine::{load_machine_spec, CacheLevel, MachineSpec};

use crate::error::Result;

/// Uniform prediction interface. Implementations are pure: the same input
/// always yields the same output.
pub trait Predict {
    fn predict(&self, x: &[f64]) -> Result<f64>;

    fn predict_many(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        rows.iter().map(|r| self.predict(r)).collect()
    }
}
