//! Fitted models behind one prediction interface, and their JSON bundles.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analytical::{AnalyticalModel, FmmModel, StencilModel};
use crate::domain::{Dataset, DatasetSchema, MachineSpec, Predict};
use crate::error::{Error, Result};
use crate::hybrid::{fit_hybrid, Aggregate, BagWeights, HybridConfig, HybridModel};
use crate::ml::{Learner, LearnerKind, Standardizer, TreeParams};
use crate::stencil::CachePolicy;

/// Format tag written into every bundle.
pub const FORMAT: &str = "perfweld-model/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum FittedModel {
    Analytical {
        schema: DatasetSchema,
        model: AnalyticalModel,
    },
    Ml {
        kind: LearnerKind,
        schema: DatasetSchema,
        standardizer: Standardizer,
        learner: Learner,
    },
    Hybrid(HybridModel),
}

impl FittedModel {
    pub fn kind(&self) -> &'static str {
        match self {
            FittedModel::Analytical { model, .. } => model.kind_name(),
            FittedModel::Ml { kind, .. } => kind.name(),
            FittedModel::Hybrid(h) => match h.aggregate() {
                Aggregate::StackedOnly => "stacked",
                Aggregate::Bagged => "bagged-hybrid",
            },
        }
    }

    pub fn schema(&self) -> &DatasetSchema {
        match self {
            FittedModel::Analytical { schema, .. } | FittedModel::Ml { schema, .. } => schema,
            FittedModel::Hybrid(h) => h.schema(),
        }
    }

    pub fn analytical(schema: &DatasetSchema, model: AnalyticalModel) -> Result<Self> {
        model.bind(schema)?;
        Ok(FittedModel::Analytical {
            schema: schema.clone(),
            model,
        })
    }

    /// Standardizes `train` and fits a tree learner on it.
    pub fn fit_ml(kind: LearnerKind, train: &Dataset, params: &TreeParams) -> Result<Self> {
        let standardizer = Standardizer::fit(train)?;
        let learner = Learner::fit(kind, &standardizer.transform(train)?, params)?;
        Ok(FittedModel::Ml {
            kind,
            schema: train.schema().clone(),
            standardizer,
            learner,
        })
    }

    pub fn fit_hybrid(train: &Dataset, cfg: &HybridConfig) -> Result<Self> {
        Ok(FittedModel::Hybrid(fit_hybrid(train, cfg)?))
    }

    fn raw_predict(&self, x: &[f64]) -> Result<f64> {
        match self {
            FittedModel::Analytical { schema, model } => model.evaluate(&model.bind(schema)?, x),
            FittedModel::Ml { standardizer, learner, .. } => learner.predict(&standardizer.apply(x)),
            FittedModel::Hybrid(h) => h.predict(x),
        }
    }
}

impl Predict for FittedModel {
    fn predict(&self, x: &[f64]) -> Result<f64> {
        let n = self.schema().len();
        if x.len() != n {
            return Err(Error::Schema(format!("expected {n} features, found {}", x.len())));
        }
        let y = self.raw_predict(x)?;
        if y.is_finite() && y > 0.0 {
            Ok(y)
        } else {
            Err(Error::Eval(format!("{} model produced non-positive prediction {y}", self.kind())))
        }
    }
}

#[derive(Serialize)]
struct BundleOut<'a> {
    format: &'a str,
    kind: &'a str,
    model: &'a FittedModel,
}

#[derive(Deserialize)]
struct BundleIn {
    format: String,
    kind: String,
    model: serde_json::Value,
}

pub fn to_json(model: &FittedModel) -> Result<String> {
    let bundle = BundleOut {
        format: FORMAT,
        kind: model.kind(),
        model,
    };
    Ok(serde_json::to_string_pretty(&bundle)?)
}

pub fn from_json(text: &str) -> Result<FittedModel> {
    let bundle: BundleIn = serde_json::from_str(text)?;
    if bundle.format != FORMAT {
        return Err(Error::Version {
            expected: FORMAT.into(),
            found: bundle.format,
        });
    }
    let model: FittedModel = serde_json::from_value(bundle.model)?;
    if model.kind() != bundle.kind {
        return Err(Error::KindMismatch {
            expected: bundle.kind,
            found: model.kind().into(),
        });
    }
    Ok(model)
}

pub fn save_model(model: &FittedModel, path: impl AsRef<Path>) -> Result<()> {
    crate::io::write_atomic(path.as_ref(), to_json(model)?.as_bytes())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<FittedModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text)
}

/// Loads a bundle and requires it to hold a hybrid model.
pub fn load_hybrid(path: impl AsRef<Path>) -> Result<FittedModel> {
    let model = load_model(path)?;
    match model {
        FittedModel::Hybrid(_) => Ok(model),
        other => Err(Error::KindMismatch {
            expected: "stacked or bagged-hybrid".into(),
            found: other.kind().into(),
        }),
    }
}

/// How to build a model from a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ModelSpec {
    Analytical { model: AnalyticalModel },
    Ml { learner: LearnerKind, params: TreeParams },
    Hybrid(HybridConfig),
}

impl ModelSpec {
    pub fn min_train_rows(&self) -> usize {
        match self {
            ModelSpec::Hybrid(cfg) => cfg.min_train_rows(),
            _ => 1,
        }
    }

    /// Fits on `train`; `seed` replaces the configured learner seed.
    pub fn fit(&self, train: &Dataset, seed: u64) -> Result<FittedModel> {
        if train.len() < self.min_train_rows() {
            return Err(Error::Eval(format!(
                "training split has {} rows, model needs {}",
                train.len(),
                self.min_train_rows()
            )));
        }
        match self {
            ModelSpec::Analytical { model } => FittedModel::analytical(train.schema(), model.clone()),
            ModelSpec::Ml { learner, params } => {
                FittedModel::fit_ml(*learner, train, &params.clone().with_seed(seed))
            }
            ModelSpec::Hybrid(cfg) => {
                let cfg = HybridConfig {
                    params: cfg.params.clone().with_seed(seed),
                    ..cfg.clone()
                };
                FittedModel::fit_hybrid(train, &cfg)
            }
        }
    }
}

/// A model description with a report label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedModel {
    pub name: String,
    pub spec: ModelSpec,
}

impl NamedModel {
    pub fn new(name: impl Into<String>, spec: ModelSpec) -> Self {
        NamedModel {
            name: name.into(),
            spec,
        }
    }
}

/// Names accepted by [`ModelContext::spec`].
pub const MODEL_NAMES: &[&str] = &[
    "cart",
    "rf",
    "extra",
    "analytical-stencil",
    "analytical-fmm",
    "hybrid-stencil",
    "hybrid-fmm",
    "bagged-stencil",
    "bagged-fmm",
];

/// Shared settings for building models from short names.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelContext {
    pub machine: Option<MachineSpec>,
    pub order: u64,
    pub cache_policy: CachePolicy,
    pub timesteps: u64,
    pub params: TreeParams,
    pub bag_weights: BagWeights,
}

impl Default for ModelContext {
    fn default() -> Self {
        ModelContext {
            machine: None,
            order: 1,
            cache_policy: CachePolicy::WriteAllocate,
            timesteps: 1,
            params: TreeParams::default(),
            bag_weights: BagWeights::Uniform,
        }
    }
}

impl ModelContext {
    fn machine(&self, name: &str) -> Result<MachineSpec> {
        self.machine
            .clone()
            .ok_or_else(|| Error::config(format!("model {name} needs a machine spec")))
    }

    fn stencil(&self, name: &str) -> Result<AnalyticalModel> {
        Ok(AnalyticalModel::Stencil(StencilModel {
            machine: self.machine(name)?,
            order: self.order,
            cache_policy: self.cache_policy,
            timesteps: self.timesteps,
        }))
    }

    fn fmm(&self, name: &str) -> Result<AnalyticalModel> {
        Ok(AnalyticalModel::Fmm(FmmModel { machine: self.machine(name)? }))
    }

    /// Builds the spec behind one of [`MODEL_NAMES`].
    pub fn spec(&self, name: &str) -> Result<ModelSpec> {
        let ml = |learner| ModelSpec::Ml {
            learner,
            params: self.params.clone(),
        };
        let hybrid = |a| HybridConfig::new(a, self.params.clone());
        Ok(match name {
            "cart" => ml(LearnerKind::Cart),
            "rf" => ml(LearnerKind::RandomForest),
            "extra" => ml(LearnerKind::ExtraTrees),
            "analytical-stencil" => ModelSpec::Analytical { model: self.stencil(name)? },
            "analytical-fmm" => ModelSpec::Analytical { model: self.fmm(name)? },
            "hybrid-stencil" => ModelSpec::Hybrid(hybrid(self.stencil(name)?)),
            "hybrid-fmm" => ModelSpec::Hybrid(hybrid(self.fmm(name)?)),
            "bagged-stencil" => ModelSpec::Hybrid(hybrid(self.stencil(name)?).bagged(self.bag_weights)),
            "bagged-fmm" => ModelSpec::Hybrid(hybrid(self.fmm(name)?).bagged(self.bag_weights)),
            other => {
                return Err(Error::config(format!(
                    "unknown model {other:?}; expected one of {}",
                    MODEL_NAMES.join(", ")
                )))
            }
        })
    }

    pub fn named(&self, name: &str) -> Result<NamedModel> {
        Ok(NamedModel::new(name, self.spec(name)?))
    }
}
