//! Analytical models evaluated on dataset feature rows.
//!
//! Stencil rows are read by column name: `I`, `J`, `K` are required, the
//! block sizes `b_i`, `b_j`, `b_k` are optional (all or none). `t` and `u`
//! never enter the formulas. FMM rows need `N`, `q`, `k`; `t` is optional.

use serde::{Deserialize, Serialize};

use crate::domain::{DatasetSchema, MachineSpec};
use crate::error::{Error, Result};
use crate::fmm::{fmm_time, FmmConfig};
use crate::stencil::{stencil_time, CachePolicy, StencilConfig};

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StencilModel {
    pub machine: MachineSpec,
    #[serde(default = "one")]
    pub order: u64,
    #[serde(default)]
    pub cache_policy: CachePolicy,
    #[serde(default = "one")]
    pub timesteps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FmmModel {
    pub machine: MachineSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum AnalyticalModel {
    Stencil(StencilModel),
    Fmm(FmmModel),
}

/// Column positions of the features an analytical model reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureBinding {
    Stencil {
        i: usize,
        j: usize,
        k: usize,
        blocks: Option<[usize; 3]>,
        threads: Option<usize>,
    },
    Fmm {
        n: usize,
        q: usize,
        k: usize,
        threads: Option<usize>,
    },
}

fn require(schema: &DatasetSchema, name: &str, model: &str) -> Result<usize> {
    schema.index_of(name).ok_or_else(|| {
        Error::Schema(format!(
            "{model} model needs feature {name:?}; schema has {:?}",
            schema.feature_names()
        ))
    })
}

fn positive_int(x: &[f64], col: usize, name: &str) -> Result<u64> {
    let v = x[col];
    if v >= 1.0 && v.fract() == 0.0 && v < u64::MAX as f64 {
        Ok(v as u64)
    } else {
        Err(Error::config(format!("feature {name} must be a positive integer, found {v}")))
    }
}

impl AnalyticalModel {
    pub fn kind_name(&self) -> &'static str {
        match self {
            AnalyticalModel::Stencil(_) => "analytical-stencil",
            AnalyticalModel::Fmm(_) => "analytical-fmm",
        }
    }

    pub fn machine(&self) -> &MachineSpec {
        match self {
            AnalyticalModel::Stencil(m) => &m.machine,
            AnalyticalModel::Fmm(m) => &m.machine,
        }
    }

    pub fn bind(&self, schema: &DatasetSchema) -> Result<FeatureBinding> {
        match self {
            AnalyticalModel::Stencil(_) => {
                let m = "stencil";
                let blocks = match (schema.index_of("b_i"), schema.index_of("b_j"), schema.index_of("b_k")) {
                    (Some(a), Some(b), Some(c)) => Some([a, b, c]),
                    (None, None, None) => None,
                    _ => {
                        return Err(Error::Schema(
                            "block features b_i, b_j, b_k must appear together".into(),
                        ))
                    }
                };
                Ok(FeatureBinding::Stencil {
                    i: require(schema, "I", m)?,
                    j: require(schema, "J", m)?,
                    k: require(schema, "K", m)?,
                    blocks,
                    threads: schema.index_of("t"),
                })
            }
            AnalyticalModel::Fmm(_) => {
                let m = "FMM";
                Ok(FeatureBinding::Fmm {
                    n: require(schema, "N", m)?,
                    q: require(schema, "q", m)?,
                    k: require(schema, "k", m)?,
                    threads: schema.index_of("t"),
                })
            }
        }
    }

    /// Stencil config described by a feature row. A block equal to the whole
    /// grid is treated as unblocked.
    pub fn stencil_config(model: &StencilModel, binding: &FeatureBinding, x: &[f64]) -> Result<StencilConfig> {
        let FeatureBinding::Stencil { i, j, k, blocks, threads } = *binding else {
            return Err(Error::Internal("stencil model with FMM binding".into()));
        };
        let (gi, gj, gk) = (positive_int(x, i, "I")?, positive_int(x, j, "J")?, positive_int(x, k, "K")?);
        let mut cfg = StencilConfig::grid(gi, gj, gk, model.order)?.with_policy(model.cache_policy);
        if let Some(t) = threads {
            cfg = cfg.with_threads(positive_int(x, t, "t")?)?;
        }
        if let Some([bi, bj, bk]) = blocks {
            let b = (positive_int(x, bi, "b_i")?, positive_int(x, bj, "b_j")?, positive_int(x, bk, "b_k")?);
            if b != (gi, gj, gk) {
                cfg = cfg.with_blocking(b.0, b.1, b.2)?;
            }
        }
        Ok(cfg)
    }

    pub fn fmm_config(binding: &FeatureBinding, x: &[f64]) -> Result<FmmConfig> {
        let FeatureBinding::Fmm { n, q, k, threads } = *binding else {
            return Err(Error::Internal("FMM model with stencil binding".into()));
        };
        let mut cfg = FmmConfig::new(positive_int(x, n, "N")?, positive_int(x, q, "q")?, positive_int(x, k, "k")?)?;
        if let Some(t) = threads {
            cfg.threads = positive_int(x, t, "t")?;
        }
        Ok(cfg)
    }

    /// Predicted seconds for one feature row.
    pub fn evaluate(&self, binding: &FeatureBinding, x: &[f64]) -> Result<f64> {
        match self {
            AnalyticalModel::Stencil(m) => {
                let cfg = Self::stencil_config(m, binding, x)?;
                Ok(stencil_time(&cfg, &m.machine, m.timesteps)?.0)
            }
            AnalyticalModel::Fmm(m) => {
                let cfg = Self::fmm_config(binding, x)?;
                Ok(fmm_time(&cfg, &m.machine)?.0)
            }
        }
    }

    /// Predictions for every row; a failure names its 1-based row.
    pub fn evaluate_rows(&self, schema: &DatasetSchema, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        let binding = self.bind(schema)?;
        rows.iter()
            .enumerate()
            .map(|(i, x)| {
                self.evaluate(&binding, x).map_err(|e| Error::Row {
                    row: i + 1,
                    reason: e.to_string(),
                })
            })
            .collect()
    }
}
