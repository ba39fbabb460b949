//! Hybrid analytical + tree-ensemble predictor.
//!
//! The analytical prediction of each row is appended as an extra feature,
//! the augmented rows are standardized, and a tree learner is fit on them
//! (stacking). Optionally the final prediction is a weighted mean of the
//! analytical and stacked predictions (bagging of the two).

use serde::{Deserialize, Serialize};

use crate::analytical::AnalyticalModel;
use crate::domain::{split_indices, Dataset, DatasetSchema, Predict};
use crate::error::{Error, Result};
use crate::eval::mape;
use crate::ml::{Learner, LearnerKind, Standardizer, TreeParams};

/// Name of the stacked feature column.
pub const ANALYTICAL_FEATURE: &str = "analytical_prediction";

/// Share of the training rows used to fit the stacked model when bag
/// weights are estimated on a held-out fold.
const WEIGHT_FIT_FRACTION: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregate {
    #[default]
    StackedOnly,
    Bagged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BagWeights {
    #[default]
    Uniform,
    ValidationMape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridConfig {
    pub analytical: AnalyticalModel,
    #[serde(default = "default_learner")]
    pub learner: LearnerKind,
    #[serde(default)]
    pub params: TreeParams,
    #[serde(default)]
    pub aggregate: Aggregate,
    #[serde(default)]
    pub bag_weights: BagWeights,
}

fn default_learner() -> LearnerKind {
    LearnerKind::ExtraTrees
}

impl HybridConfig {
    pub fn new(analytical: AnalyticalModel, params: TreeParams) -> Self {
        HybridConfig {
            analytical,
            learner: LearnerKind::ExtraTrees,
            params,
            aggregate: Aggregate::StackedOnly,
            bag_weights: BagWeights::Uniform,
        }
    }

    pub fn bagged(mut self, weights: BagWeights) -> Self {
        self.aggregate = Aggregate::Bagged;
        self.bag_weights = weights;
        self
    }

    pub fn min_train_rows(&self) -> usize {
        match (self.aggregate, self.bag_weights) {
            (Aggregate::Bagged, BagWeights::ValidationMape) => 2,
            _ => 1,
        }
    }
}

/// A learner stacked on an analytical model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackedModel<P = Learner> {
    analytical: AnalyticalModel,
    schema: DatasetSchema,
    standardizer: Standardizer,
    learner: P,
}

/// Training rows with the analytical column appended.
pub fn augment(train: &Dataset, analytical: &AnalyticalModel) -> Result<Dataset> {
    let preds = analytical.evaluate_rows(train.schema(), train.features())?;
    train.with_feature_column(ANALYTICAL_FEATURE, &preds)
}

/// Stacks the learner produced by `fit` on `analytical`. `fit` receives the
/// augmented, standardized training set and the fitted standardizer.
pub fn fit_stacked_with<P, F>(train: &Dataset, analytical: &AnalyticalModel, fit: F) -> Result<StackedModel<P>>
where
    F: FnOnce(&Dataset, &Standardizer) -> Result<P>,
{
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let augmented = augment(train, analytical)?;
    let standardizer = Standardizer::fit(&augmented)?;
    let scaled = standardizer.transform(&augmented)?;
    let learner = fit(&scaled, &standardizer)?;
    Ok(StackedModel {
        analytical: analytical.clone(),
        schema: train.schema().clone(),
        standardizer,
        learner,
    })
}

impl<P: Predict> StackedModel<P> {
    pub fn schema(&self) -> &DatasetSchema {
        &self.schema
    }

    pub fn analytical(&self) -> &AnalyticalModel {
        &self.analytical
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    pub fn learner(&self) -> &P {
        &self.learner
    }

    pub fn analytical_prediction(&self, x: &[f64]) -> Result<f64> {
        let binding = self.analytical.bind(&self.schema)?;
        self.analytical.evaluate(&binding, x)
    }

    /// `(analytical, stacked)` predictions for `x`.
    pub fn predict_parts(&self, x: &[f64]) -> Result<(f64, f64)> {
        if x.len() != self.schema.len() {
            return Err(Error::Schema(format!(
                "expected {} features, found {}",
                self.schema.len(),
                x.len()
            )));
        }
        let a = self.analytical_prediction(x)?;
        let mut row = x.to_vec();
        row.push(a);
        let s = self.learner.predict(&self.standardizer.apply(&row))?;
        Ok((a, s))
    }
}

impl<P: Predict> Predict for StackedModel<P> {
    fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(self.predict_parts(x)?.1)
    }
}

/// Normalized inverse-MAPE weights `(analytical, stacked)`. A zero-error
/// model takes all the weight.
pub fn inverse_mape_weights(mape_analytical: f64, mape_stacked: f64) -> (f64, f64) {
    match (mape_analytical == 0.0, mape_stacked == 0.0) {
        (true, true) => (0.5, 0.5),
        (true, false) => (1.0, 0.0),
        (false, true) => (0.0, 1.0),
        (false, false) => {
            let (a, s) = (1.0 / mape_analytical, 1.0 / mape_stacked);
            (a / (a + s), s / (a + s))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridModel {
    stacked: StackedModel<Learner>,
    aggregate: Aggregate,
    /// `(analytical, stacked)` weights, used only when bagged.
    weights: (f64, f64),
}

impl HybridModel {
    /// Assembles a model from parts; `weights` must be non-negative and sum
    /// to one.
    pub fn from_parts(stacked: StackedModel<Learner>, aggregate: Aggregate, weights: (f64, f64)) -> Result<Self> {
        let (a, s) = weights;
        if !(a >= 0.0 && s >= 0.0 && ((a + s) - 1.0).abs() < 1e-12) {
            return Err(Error::config(format!("bag weights {weights:?} must be non-negative and sum to 1")));
        }
        Ok(HybridModel {
            stacked,
            aggregate,
            weights,
        })
    }

    pub fn stacked(&self) -> &StackedModel<Learner> {
        &self.stacked
    }

    pub fn aggregate(&self) -> Aggregate {
        self.aggregate
    }

    pub fn weights(&self) -> (f64, f64) {
        self.weights
    }

    pub fn schema(&self) -> &DatasetSchema {
        &self.stacked.schema
    }
}

impl Predict for HybridModel {
    fn predict(&self, x: &[f64]) -> Result<f64> {
        match self.aggregate {
            Aggregate::StackedOnly => self.stacked.predict(x),
            Aggregate::Bagged => {
                let (a, s) = self.stacked.predict_parts(x)?;
                let (wa, ws) = self.weights;
                Ok(wa * a + ws * s)
            }
        }
    }
}

fn fit_stacked(train: &Dataset, cfg: &HybridConfig) -> Result<StackedModel<Learner>> {
    fit_stacked_with(train, &cfg.analytical, |scaled, _| {
        Learner::fit(cfg.learner, scaled, &cfg.params)
    })
}

pub fn fit_hybrid(train: &Dataset, cfg: &HybridConfig) -> Result<HybridModel> {
    if train.len() < cfg.min_train_rows() {
        return Err(Error::Eval(format!(
            "hybrid model needs at least {} training rows, got {}",
            cfg.min_train_rows(),
            train.len()
        )));
    }
    let stacked = fit_stacked(train, cfg)?;
    let weights = match (cfg.aggregate, cfg.bag_weights) {
        (Aggregate::StackedOnly, _) => (0.0, 1.0),
        (Aggregate::Bagged, BagWeights::Uniform) => (0.5, 0.5),
        (Aggregate::Bagged, BagWeights::ValidationMape) => validation_weights(train, cfg)?,
    };
    HybridModel::from_parts(stacked, cfg.aggregate, weights)
}

/// Weights from MAPE on a held-out fold; the stacked model used for the
/// estimate is discarded afterwards.
fn validation_weights(train: &Dataset, cfg: &HybridConfig) -> Result<(f64, f64)> {
    let (fit_idx, hold_idx) = split_indices(train.len(), WEIGHT_FIT_FRACTION, cfg.params.seed)?;
    let probe = fit_stacked(&train.subset(&fit_idx), cfg)?;
    let held = train.subset(&hold_idx);
    let mut analytical = Vec::with_capacity(held.len());
    let mut stacked = Vec::with_capacity(held.len());
    for (x, _) in held.rows() {
        let (a, s) = probe.predict_parts(x)?;
        analytical.push(a);
        stacked.push(s);
    }
    Ok(inverse_mape_weights(
        mape(held.responses(), &analytical)?,
        mape(held.responses(), &stacked)?,
    ))
}
