mod common;

use common::{blocked_dataset, fmm_model, stencil_model};
use perfweld_core::domain::{split_uniform, Dataset, DatasetSchema, Predict};
use perfweld_core::eval::score;
use perfweld_core::hybrid::{fit_stacked_with, BagWeights, HybridConfig, ANALYTICAL_FEATURE};
use perfweld_core::ml::{LearnerKind, MaxFeatures, TreeParams};
use perfweld_core::model::{load_hybrid, load_model, save_model, FittedModel, ModelSpec};
use perfweld_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct AnalyticalColumn {
    mean: f64,
    std: f64,
}

impl Predict for AnalyticalColumn {
    fn predict(&self, z: &[f64]) -> perfweld_core::Result<f64> {
        Ok(z[z.len() - 1] * self.std + self.mean)
    }
}

#[test]
fn stub_learner_on_analytical_column_reproduces_analytical_model() {
    let ds = blocked_dataset(|r| 1.0 + r[3] / 100.0);
    let stacked = fit_stacked_with(&ds, &stencil_model(), |aug, st| {
        assert_eq!(aug.schema().feature_names().last().unwrap(), ANALYTICAL_FEATURE);
        let c = st.dim() - 1;
        Ok(AnalyticalColumn { mean: st.mean()[c], std: st.std()[c] })
    })
    .unwrap();
    let analytical = FittedModel::analytical(ds.schema(), stencil_model()).unwrap();
    for (x, _) in ds.rows() {
        let a = analytical.predict(x).unwrap();
        let s = stacked.predict(x).unwrap();
        assert!((s - a).abs() <= 1e-13 * a, "{s} vs {a}");
    }
}

#[test]
fn stacking_helps_when_responses_are_analytical() {
    let ds = blocked_dataset(|_| 1.0);
    let params = TreeParams::default().with_trees(20).with_seed(4).with_max_depth(Some(3)).with_max_features(MaxFeatures::ALL);
    let stacked = ModelSpec::Hybrid(HybridConfig::new(stencil_model(), params.clone())).fit(&ds, 4).unwrap();
    let ml = ModelSpec::Ml { learner: LearnerKind::ExtraTrees, params }.fit(&ds, 4).unwrap();
    let (a, b) = (score(&stacked, &ds).unwrap(), score(&ml, &ds).unwrap());
    assert!(a < b, "stacked {a} vs ml {b}");
}

#[test]
fn bagged_prediction_lies_between_parts() {
    let ds = blocked_dataset(|r| 1.2 + r[0] / 200.0);
    let (train, test) = split_uniform(&ds, 0.3, 1).unwrap();
    for w in [BagWeights::Uniform, BagWeights::ValidationMape] {
        let cfg = HybridConfig::new(stencil_model(), TreeParams::default().with_trees(10)).bagged(w);
        let FittedModel::Hybrid(h) = FittedModel::fit_hybrid(&train, &cfg).unwrap() else { unreachable!() };
        for (x, _) in test.rows() {
            let (a, s) = h.stacked().predict_parts(x).unwrap();
            let b = h.predict(x).unwrap();
            assert!(b >= a.min(s) - 1e-18 && b <= a.max(s) + 1e-18);
        }
    }
}

#[test]
fn fit_is_deterministic() {
    let ds = blocked_dataset(|r| 1.0 + r[4] / 64.0);
    let cfg = HybridConfig::new(stencil_model(), TreeParams::default().with_trees(10).with_seed(3));
    assert_eq!(FittedModel::fit_hybrid(&ds, &cfg).unwrap(), FittedModel::fit_hybrid(&ds, &cfg).unwrap());
}

#[test]
fn round_trip_is_bit_exact_on_random_probes() {
    let ds = blocked_dataset(|r| 1.0 + r[3] / 50.0);
    let dir = tempfile::tempdir().unwrap();
    let cfg = HybridConfig::new(stencil_model(), TreeParams::default().with_trees(15).with_max_features(MaxFeatures::ALL))
        .bagged(BagWeights::ValidationMape);
    let model = FittedModel::fit_hybrid(&ds, &cfg).unwrap();
    let path = dir.path().join("hybrid.json");
    save_model(&model, &path).unwrap();
    let back = load_hybrid(&path).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let b = [4.0, 8.0, 16.0, 32.0];
        let x = [
            32.0 * rng.random_range(1..5) as f64,
            32.0 * rng.random_range(1..5) as f64,
            32.0 * rng.random_range(1..5) as f64,
            b[rng.random_range(0..4)],
            b[rng.random_range(0..4)],
            b[rng.random_range(0..4)],
        ];
        assert_eq!(model.predict(&x).unwrap().to_bits(), back.predict(&x).unwrap().to_bits());
    }
}

#[test]
fn loader_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    let ds = blocked_dataset(|_| 1.0);
    let ml = ModelSpec::Ml { learner: LearnerKind::ExtraTrees, params: TreeParams::default().with_trees(2) };
    save_model(&ml.fit(&ds, 0).unwrap(), &path).unwrap();
    assert!(matches!(load_hybrid(&path), Err(Error::KindMismatch { .. })));
    std::fs::write(&path, "{\"format\": \"other/7\", \"kind\": \"cart\", \"model\": {}}").unwrap();
    assert!(matches!(load_model(&path), Err(Error::Version { .. })));
    std::fs::write(&path, "{\"format\": \"perfweld-mo").unwrap();
    assert!(matches!(load_model(&path), Err(Error::Json(_))));
}

#[test]
fn fmm_hybrid_on_stencil_schema_is_a_schema_error() {
    let ds = blocked_dataset(|_| 1.0);
    let cfg = HybridConfig::new(fmm_model(), TreeParams::default());
    assert!(matches!(FittedModel::fit_hybrid(&ds, &cfg), Err(Error::Schema(_))));
}

#[test]
fn augmented_schema_has_one_more_column() {
    let ds: Dataset = blocked_dataset(|_| 1.0);
    let aug = perfweld_core::hybrid::augment(&ds, &stencil_model()).unwrap();
    let mut expected: Vec<String> = DatasetSchema::stencil_blocked().feature_names().to_vec();
    expected.push(ANALYTICAL_FEATURE.into());
    assert_eq!(aug.schema().feature_names(), expected.as_slice());
}
