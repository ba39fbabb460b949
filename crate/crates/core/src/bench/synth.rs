//! Synthetic ground truth: an analytical model times a smooth
//! multiplicative perturbation times relative Gaussian noise.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::analytical::{AnalyticalModel, FmmModel, StencilModel};
use crate::domain::{Dataset, DatasetSchema, MachineSpec, RESPONSE};
use crate::error::{Error, Result};
use crate::ml::Standardizer;
use crate::stencil::CachePolicy;

/// Smallest noise factor `1 + eps` allowed.
const NOISE_FLOOR: f64 = 0.01;

/// One axis of the feature grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Values {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl Values {
    pub fn expand(&self) -> Result<Vec<f64>> {
        let v = match self {
            Values::List(v) => v.clone(),
            Values::Range { start, stop, step } => {
                if step.is_nan() || *step <= 0.0 {
                    return Err(Error::config("range step must be positive"));
                }
                let n = ((stop - start) / step + 1e-9).floor();
                if n < 0.0 {
                    return Err(Error::config("range stop is below start"));
                }
                (0..=n as usize).map(|i| start + i as f64 * step).collect()
            }
        };
        if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
            return Err(Error::config("grid axes must hold finite values"));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticTerm {
    pub a: String,
    pub b: String,
    pub coef: f64,
}

/// `exp(constant + sum linear[f] z_f + sum coef z_a z_b)` over features
/// standardized across the generated grid.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Perturbation {
    pub constant: f64,
    pub linear: BTreeMap<String, f64>,
    pub quadratic: Vec<QuadraticTerm>,
}

impl Perturbation {
    pub fn is_identity(&self) -> bool {
        self.constant == 0.0 && self.linear.values().all(|&c| c == 0.0) && self.quadratic.iter().all(|q| q.coef == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseModel {
    Stencil,
    Fmm,
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticOracleSpec {
    pub model: BaseModel,
    /// Machine in the on-disk machine-spec form.
    pub machine: serde_json::Value,
    #[serde(default = "one")]
    pub order: u64,
    #[serde(default)]
    pub cache_policy: CachePolicy,
    #[serde(default = "one")]
    pub timesteps: u64,
    /// Feature columns, in output order; each needs a grid axis.
    pub features: Vec<String>,
    pub grid: BTreeMap<String, Values>,
    /// Drop grid points the analytical model rejects instead of failing.
    #[serde(default)]
    pub skip_invalid: bool,
    #[serde(default)]
    pub perturbation: Perturbation,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SyntheticOracleSpec {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let spec: SyntheticOracleSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::config(format!("sigma must be non-negative, found {}", self.sigma)));
        }
        let schema = self.schema()?;
        for name in self.perturbation.linear.keys() {
            if schema.index_of(name).is_none() {
                return Err(Error::config(format!("perturbation names unknown feature {name:?}")));
            }
        }
        for q in &self.perturbation.quadratic {
            for name in [&q.a, &q.b] {
                if schema.index_of(name).is_none() {
                    return Err(Error::config(format!("perturbation names unknown feature {name:?}")));
                }
            }
        }
        for f in &self.features {
            if !self.grid.contains_key(f) {
                return Err(Error::config(format!("grid has no axis for feature {f:?}")));
            }
        }
        self.analytical()?.bind(&schema)?;
        Ok(())
    }

    pub fn schema(&self) -> Result<DatasetSchema> {
        DatasetSchema::new(self.features.clone(), RESPONSE)
    }

    pub fn analytical(&self) -> Result<AnalyticalModel> {
        let machine = MachineSpec::from_json_str(&self.machine.to_string())?;
        Ok(match self.model {
            BaseModel::Stencil => AnalyticalModel::Stencil(StencilModel {
                machine,
                order: self.order,
                cache_policy: self.cache_policy,
                timesteps: self.timesteps,
            }),
            BaseModel::Fmm => AnalyticalModel::Fmm(FmmModel { machine }),
        })
    }

    /// Cartesian product of the grid axes, last feature fastest.
    pub fn grid_points(&self) -> Result<Vec<Vec<f64>>> {
        let mut points = vec![Vec::new()];
        for f in &self.features {
            let axis = self.grid[f].expand()?;
            points = points
                .into_iter()
                .flat_map(|p| {
                    axis.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.push(v);
                        q
                    })
                })
                .collect();
        }
        Ok(points)
    }
}

/// Generates the oracle dataset over its own grid.
pub fn synthesize(oracle: &SyntheticOracleSpec) -> Result<Dataset> {
    oracle.validate()?;
    gen_synthetic(&oracle.schema()?, &oracle.grid_points()?, oracle)
}

/// Responses `analytical(x) * perturbation(x) * max(1 + eps, 0.01)` with
/// `eps ~ N(0, sigma)` drawn in row order from the oracle seed.
pub fn gen_synthetic(schema: &DatasetSchema, points: &[Vec<f64>], oracle: &SyntheticOracleSpec) -> Result<Dataset> {
    if !(oracle.sigma.is_finite() && oracle.sigma >= 0.0) {
        return Err(Error::config(format!("sigma must be non-negative, found {}", oracle.sigma)));
    }
    let model = oracle.analytical()?;
    let binding = model.bind(schema)?;
    let mut rows = Vec::with_capacity(points.len());
    let mut base = Vec::with_capacity(points.len());
    for (n, x) in points.iter().enumerate() {
        match model.evaluate(&binding, x) {
            Ok(t) => {
                rows.push(x.clone());
                base.push(t);
            }
            Err(_) if oracle.skip_invalid => {}
            Err(e) => {
                return Err(Error::Row {
                    row: n + 1,
                    reason: e.to_string(),
                })
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let factors = perturbation_factors(schema, &rows, &oracle.perturbation)?;
    let mut rng = ChaCha8Rng::seed_from_u64(oracle.seed);
    let noise = Normal::new(0.0, oracle.sigma).map_err(|e| Error::config(e.to_string()))?;
    let responses = base
        .iter()
        .zip(&factors)
        .map(|(&t, &f)| {
            let eps = if oracle.sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            t * f * (1.0 + eps).max(NOISE_FLOOR)
        })
        .collect();
    Dataset::new(schema.clone(), rows, responses)
}

fn perturbation_factors(schema: &DatasetSchema, rows: &[Vec<f64>], p: &Perturbation) -> Result<Vec<f64>> {
    if p.is_identity() {
        return Ok(vec![1.0; rows.len()]);
    }
    let col = |name: &str| {
        schema
            .index_of(name)
            .ok_or_else(|| Error::config(format!("perturbation names unknown feature {name:?}")))
    };
    let linear = p
        .linear
        .iter()
        .map(|(n, &c)| Ok((col(n)?, c)))
        .collect::<Result<Vec<_>>>()?;
    let quadratic = p
        .quadratic
        .iter()
        .map(|q| Ok((col(&q.a)?, col(&q.b)?, q.coef)))
        .collect::<Result<Vec<_>>>()?;
    let st = Standardizer::fit_rows(rows)?;
    Ok(rows
        .iter()
        .map(|x| {
            let z = st.apply(x);
            let mut s = p.constant;
            for &(i, c) in &linear {
                s += c * z[i];
            }
            for &(a, b, c) in &quadratic {
                s += c * z[a] * z[b];
            }
            s.exp()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oracle(sigma: f64) -> SyntheticOracleSpec {
        SyntheticOracleSpec::from_json_str(&format!(
            r#"{{
                "model": "fmm",
                "machine": {{"element_bytes": 8, "W": 8, "t_c": 1e-10, "beta_mem": 2e-9,
                            "cache_levels": [{{"size_bytes": 65536, "beta": 1e-10}}]}},
                "features": ["t", "N", "q", "k"],
                "grid": {{"t": {{"start": 1, "stop": 16, "step": 1}}, "N": [4096, 8192],
                          "q": [16, 64, 256], "k": {{"start": 2, "stop": 12, "step": 1}}}},
                "sigma": {sigma},
                "seed": 11
            }}"#
        ))
        .unwrap()
    }

    #[test]
    fn degenerate_oracle_is_analytical() {
        let o = oracle(0.0);
        let ds = synthesize(&o).unwrap();
        assert_eq!(ds.len(), 16 * 2 * 3 * 11);
        let a = o.analytical().unwrap().evaluate_rows(ds.schema(), ds.features()).unwrap();
        assert_eq!(a, ds.responses());
    }

    #[test]
    fn seeded_and_noisy() {
        let o = oracle(0.05);
        let a = synthesize(&o).unwrap();
        assert_eq!(a, synthesize(&o).unwrap());
        let base = o.analytical().unwrap().evaluate_rows(a.schema(), a.features()).unwrap();
        let rel: Vec<f64> = a.responses().iter().zip(&base).map(|(y, b)| y / b - 1.0).collect();
        let mean = rel.iter().sum::<f64>() / rel.len() as f64;
        let sd = (rel.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / rel.len() as f64).sqrt();
        assert!((0.03..=0.07).contains(&sd), "{sd}");
    }

    #[test]
    fn perturbation_depends_on_named_feature() {
        let mut o = oracle(0.0);
        o.perturbation.linear.insert("t".into(), -0.5);
        let ds = synthesize(&o).unwrap();
        let base = o.analytical().unwrap().evaluate_rows(ds.schema(), ds.features()).unwrap();
        let f: Vec<f64> = ds.responses().iter().zip(&base).map(|(y, b)| y / b).collect();
        assert!(f[0] > f[f.len() - 1]);
        assert!(f.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn validation() {
        let mut o = oracle(0.0);
        o.sigma = -0.1;
        assert!(o.validate().is_err());
        let mut o = oracle(0.0);
        o.perturbation.linear.insert("zz".into(), 1.0);
        assert!(o.validate().is_err());
        let mut o = oracle(0.0);
        o.grid.remove("k");
        assert!(o.validate().is_err());
    }

    #[test]
    fn invalid_points_fail_or_skip() {
        let mut o = oracle(0.0);
        o.grid.insert("q".into(), Values::List(vec![16.0, 10000.0]));
        assert!(matches!(synthesize(&o), Err(Error::Row { .. })));
        o.skip_invalid = true;
        assert_eq!(synthesize(&o).unwrap().len(), 16 * 2 * 11);
    }
}
