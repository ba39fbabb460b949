//! Tree-ensemble regression learners and input standardization.

mod ensemble;
mod params;
mod standardize;
mod tree;

pub use ensemble::{fit_bagged, fit_extra_trees, fit_random_forest, BaseLearner, Ensemble};
pub use params::{MaxFeatures, MaxFeaturesRule, TreeParams};
pub use standardize::Standardizer;
pub use tree::{fit_cart, Node, RegressionTree};

use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, Predict};
use crate::error::Result;

/// The three learner families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearnerKind {
    Cart,
    RandomForest,
    ExtraTrees,
}

impl LearnerKind {
    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::Cart => "cart",
            LearnerKind::RandomForest => "random-forest",
            LearnerKind::ExtraTrees => "extra-trees",
        }
    }
}

/// A fitted tree or tree ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "kebab-case")]
pub enum Learner {
    Tree(RegressionTree),
    Ensemble(Ensemble),
}

impl Learner {
    pub fn fit(kind: LearnerKind, train: &Dataset, params: &TreeParams) -> Result<Self> {
        Ok(match kind {
            LearnerKind::Cart => Learner::Tree(fit_cart(train, params)?),
            LearnerKind::RandomForest => Learner::Ensemble(fit_random_forest(train, params)?),
            LearnerKind::ExtraTrees => Learner::Ensemble(fit_extra_trees(train, params)?),
        })
    }
}

impl Predict for Learner {
    fn predict(&self, x: &[f64]) -> Result<f64> {
        match self {
            Learner::Tree(t) => t.predict(x),
            Learner::Ensemble(e) => e.predict(x),
        }
    }
}
