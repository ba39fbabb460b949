//! Averaging ensembles of regression trees: bagging, random forests and
//! extremely randomized trees.
//!
//! Member `i` draws from its own generator seeded with `seed + i`, so
//! members can be grown in parallel and the result is independent of the
//! schedule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::params::TreeParams;
use super::tree::{grow, RegressionTree, Splitter};
use crate::domain::{Dataset, Predict};
use crate::error::{Error, Result};

/// Split rule of the ensemble members.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseLearner {
    Cart,
    /// Best split over a random feature subset.
    RandomSubset,
    /// One random threshold per sampled feature.
    ExtraRandom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    base: BaseLearner,
    members: Vec<RegressionTree>,
}

impl Ensemble {
    pub fn members(&self) -> &[RegressionTree] {
        &self.members
    }

    pub fn base(&self) -> BaseLearner {
        self.base
    }

    pub fn member_predictions(&self, x: &[f64]) -> Vec<f64> {
        self.members.iter().map(|t| t.predict_row(x)).collect()
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.members.iter().map(|t| t.predict_row(x)).sum::<f64>() / self.members.len() as f64
    }
}

impl Predict for Ensemble {
    fn predict(&self, x: &[f64]) -> Result<f64> {
        let d = self.members[0].n_features();
        if x.len() != d {
            return Err(Error::Schema(format!("expected {d} features, found {}", x.len())));
        }
        Ok(self.predict_row(x))
    }
}

fn fit_members(train: &Dataset, params: &TreeParams, base: BaseLearner, bootstrap: bool) -> Result<Ensemble> {
    params.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let d = train.schema().len();
    let splitter = match base {
        BaseLearner::Cart => Splitter::Best,
        BaseLearner::RandomSubset => Splitter::RandomSubset(params.max_features.resolve(d)?),
        BaseLearner::ExtraRandom => Splitter::ExtraRandom(params.max_features.resolve(d)?),
    };
    let n = train.len();
    let members = (0..params.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(i as u64));
            let idx: Vec<usize> = if bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow(train.features(), train.responses(), idx, params, splitter, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Ensemble { base, members })
}

/// `n_trees` copies of `base`, each on a bootstrap resample of
/// `|train|` rows unless `params.bootstrap` is off.
pub fn fit_bagged(train: &Dataset, params: &TreeParams, base: BaseLearner) -> Result<Ensemble> {
    fit_members(train, params, base, params.bootstrap)
}

pub fn fit_random_forest(train: &Dataset, params: &TreeParams) -> Result<Ensemble> {
    fit_members(train, params, BaseLearner::RandomSubset, params.bootstrap)
}

/// Extra trees always see the full training set.
pub fn fit_extra_trees(train: &Dataset, params: &TreeParams) -> Result<Ensemble> {
    fit_members(train, params, BaseLearner::ExtraRandom, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DatasetSchema;
    use crate::ml::{fit_cart, MaxFeatures};

    fn synthetic(n: usize, constant: bool) -> Dataset {
        let schema = DatasetSchema::new(["a", "b", "c"], "y").unwrap();
        let features: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let t = i as f64;
                vec![(t * 0.37).sin(), (t * 0.11).cos() * 3.0, (i % 7) as f64]
            })
            .collect();
        let responses = features
            .iter()
            .map(|r| if constant { 2.5 } else { 1.0 + r[0] * r[0] + 0.3 * r[1] + 0.1 * r[2] + 1.0 })
            .collect();
        Dataset::new(schema, features, responses).unwrap()
    }

    #[test]
    fn single_unbootstrapped_member_equals_base() {
        let ds = synthetic(60, false);
        let p = TreeParams {
            n_trees: 1,
            bootstrap: false,
            ..TreeParams::default()
        };
        let e = fit_bagged(&ds, &p, BaseLearner::Cart).unwrap();
        let t = fit_cart(&ds, &p).unwrap();
        assert_eq!(e.members()[0], t);
        for (x, _) in ds.rows() {
            assert_eq!(e.predict(x).unwrap(), t.predict(x).unwrap());
        }
    }

    #[test]
    fn constant_response_everywhere() {
        let ds = synthetic(40, true);
        let p = TreeParams::default().with_trees(10);
        for e in [
            fit_bagged(&ds, &p, BaseLearner::Cart).unwrap(),
            fit_random_forest(&ds, &p).unwrap(),
            fit_extra_trees(&ds, &p).unwrap(),
        ] {
            assert!(e.member_predictions(&[0.3, 0.2, 1.0]).iter().all(|&v| v == 2.5));
            assert!((e.predict(&[0.3, 0.2, 1.0]).unwrap() - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn mean_within_member_range() {
        let ds = synthetic(80, false);
        let e = fit_bagged(&ds, &TreeParams::default().with_trees(15), BaseLearner::Cart).unwrap();
        for (x, _) in ds.rows().take(20) {
            let m = e.member_predictions(x);
            let lo = m.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = m.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let p = e.predict(x).unwrap();
            assert!(p >= lo - 1e-12 && p <= hi + 1e-12);
        }
    }

    #[test]
    fn forest_with_all_features_and_no_bootstrap_is_cart() {
        let ds = synthetic(50, false);
        let p = TreeParams {
            n_trees: 4,
            bootstrap: false,
            max_features: MaxFeatures::ALL,
            ..TreeParams::default()
        };
        let f = fit_random_forest(&ds, &p).unwrap();
        let t = fit_cart(&ds, &p).unwrap();
        assert!(f.members().iter().all(|m| *m == t));
    }

    #[test]
    fn forest_seeds_differ() {
        let ds = synthetic(80, false);
        let p = TreeParams::default().with_trees(5);
        let a = fit_random_forest(&ds, &p.clone().with_seed(1)).unwrap();
        let b = fit_random_forest(&ds, &p.with_seed(2)).unwrap();
        let differs = ds.rows().any(|(x, _)| a.predict_row(x) != b.predict_row(x));
        assert!(differs);
    }

    #[test]
    fn max_features_checked() {
        let ds = synthetic(10, false);
        let p = TreeParams::default().with_max_features(MaxFeatures::Count(4));
        assert!(fit_random_forest(&ds, &p).is_err());
        assert!(fit_extra_trees(&ds, &p).is_err());
    }

    #[test]
    fn extra_trees_deterministic() {
        let ds = synthetic(50, false);
        let p = TreeParams::default().with_trees(8).with_seed(11);
        assert_eq!(fit_extra_trees(&ds, &p).unwrap(), fit_extra_trees(&ds, &p).unwrap());
    }

    #[test]
    fn extra_trees_leaf_when_features_constant() {
        let schema = DatasetSchema::new(["a"], "y").unwrap();
        let ds = Dataset::new(schema, vec![vec![1.0]; 5], vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let e = fit_extra_trees(&ds, &TreeParams::default().with_trees(3)).unwrap();
        for m in e.members() {
            assert_eq!(m.nodes().len(), 1);
            assert_eq!(m.predict_row(&[1.0]), 3.0);
        }
    }
}
