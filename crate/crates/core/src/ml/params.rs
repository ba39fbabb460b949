use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of candidate features examined per split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MaxFeatures {
    Count(usize),
    Rule(MaxFeaturesRule),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeaturesRule {
    /// Every feature.
    All,
    /// `max(1, floor(d / 3))`.
    Third,
}

impl MaxFeatures {
    pub const ALL: MaxFeatures = MaxFeatures::Rule(MaxFeaturesRule::All);
    pub const THIRD: MaxFeatures = MaxFeatures::Rule(MaxFeaturesRule::Third);

    pub fn resolve(self, n_features: usize) -> Result<usize> {
        let m = match self {
            MaxFeatures::Count(m) => m,
            MaxFeatures::Rule(MaxFeaturesRule::All) => n_features,
            MaxFeatures::Rule(MaxFeaturesRule::Third) => (n_features / 3).max(1),
        };
        if m == 0 || m > n_features {
            return Err(Error::config(format!(
                "max_features={m} must be in 1..={n_features}"
            )));
        }
        Ok(m)
    }
}

impl std::str::FromStr for MaxFeatures {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(MaxFeatures::ALL),
            "third" => Ok(MaxFeatures::THIRD),
            _ => s
                .parse()
                .map(MaxFeatures::Count)
                .map_err(|_| Error::config(format!("max_features {s:?}: expected all, third or a count"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Ensemble size; ignored by a single CART tree.
    pub n_trees: usize,
    /// Split candidates for random forests and extra trees.
    pub max_features: MaxFeatures,
    pub seed: u64,
    /// Bootstrap resampling for bagging and random forests.
    pub bootstrap: bool,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_leaf: 1,
            n_trees: 100,
            max_features: MaxFeatures::THIRD,
            seed: 0,
            bootstrap: true,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_samples_leaf == 0 {
            return Err(Error::config("min_samples_leaf must be at least 1"));
        }
        if self.n_trees == 0 {
            return Err(Error::config("n_trees must be at least 1"));
        }
        if self.max_depth == Some(0) {
            return Err(Error::config("max_depth must be positive"));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_trees(mut self, n_trees: usize) -> Self {
        self.n_trees = n_trees;
        self
    }

    pub fn with_max_features(mut self, max_features: MaxFeatures) -> Self {
        self.max_features = max_features;
        self
    }

    pub fn with_max_depth(mut self, max_depth: Option<usize>) -> Self {
        self.max_depth = max_depth;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolves_rules() {
        assert_eq!(MaxFeatures::THIRD.resolve(8).unwrap(), 2);
        assert_eq!(MaxFeatures::THIRD.resolve(2).unwrap(), 1);
        assert_eq!(MaxFeatures::ALL.resolve(5).unwrap(), 5);
        assert!(MaxFeatures::Count(6).resolve(5).is_err());
    }

    #[test]
    fn serde_forms() {
        let p: TreeParams = serde_json::from_str(r#"{"max_features": "all", "n_trees": 3}"#).unwrap();
        assert_eq!(p.max_features, MaxFeatures::ALL);
        assert_eq!(p.min_samples_leaf, 1);
        let p: TreeParams = serde_json::from_str(r#"{"max_features": 2}"#).unwrap();
        assert_eq!(p.max_features, MaxFeatures::Count(2));
    }
}
