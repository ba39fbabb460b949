#![allow(dead_code)]

use perfweld_core::analytical::{AnalyticalModel, FmmModel, StencilModel};
use perfweld_core::domain::{CacheLevel, Dataset, DatasetSchema, MachineSpec};
use perfweld_core::stencil::CachePolicy;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Three-level machine with 8-element lines.
pub fn machine() -> MachineSpec {
    MachineSpec::new(
        vec![
            CacheLevel { size_elements: 2048, beta: 2.5e-10 },
            CacheLevel { size_elements: 262_144, beta: 5e-10 },
            CacheLevel { size_elements: 1_048_576, beta: 1e-9 },
        ],
        2.5e-9,
        1e-10,
        8,
    )
    .unwrap()
}

pub fn stencil_model() -> AnalyticalModel {
    AnalyticalModel::Stencil(StencilModel {
        machine: machine(),
        order: 1,
        cache_policy: CachePolicy::WriteAllocate,
        timesteps: 1,
    })
}

pub fn fmm_model() -> AnalyticalModel {
    AnalyticalModel::Fmm(FmmModel { machine: machine() })
}

/// Blocked-stencil grid with responses from `scale * analytical`.
pub fn blocked_dataset(scale: impl Fn(&[f64]) -> f64) -> Dataset {
    let schema = DatasetSchema::stencil_blocked();
    let mut rows = Vec::new();
    for n in [32.0, 64.0, 96.0] {
        for m in [32.0, 64.0] {
            for b in [4.0, 8.0, 16.0, 32.0] {
                for c in [8.0, 16.0, 32.0] {
                    rows.push(vec![n, m, 64.0, b, c, 16.0]);
                }
            }
        }
    }
    let a = stencil_model().evaluate_rows(&schema, &rows).unwrap();
    let y = rows.iter().zip(a).map(|(r, a)| a * scale(r)).collect();
    Dataset::new(schema, rows, y).unwrap()
}

/// Integer-valued dataset so split quality can be compared exactly.
pub fn random_dataset(rng: &mut ChaCha8Rng) -> Dataset {
    let n = rng.random_range(2..=100);
    let d = rng.random_range(1..=4);
    let names: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
    let spread = rng.random_range(2..30);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(0..spread) as f64).collect())
        .collect();
    let y = (0..n).map(|_| rng.random_range(1..50) as f64).collect();
    Dataset::new(DatasetSchema::new(names, "y").unwrap(), rows, y).unwrap()
}

/// `sl^2 / nl + sr^2 / nr` as an exact fraction `(num, den)`. Child SSE is
/// `sum y^2` minus this, so a larger value is a better split.
pub fn gain(left: &[i128], right: &[i128]) -> (i128, i128) {
    let (sl, sr): (i128, i128) = (left.iter().sum(), right.iter().sum());
    let (nl, nr) = (left.len() as i128, right.len() as i128);
    (sl * sl * nr + sr * sr * nl, nl * nr)
}

pub fn greater(a: (i128, i128), b: (i128, i128)) -> bool {
    a.0 * b.1 > b.0 * a.1
}

pub fn partition(ds: &Dataset, feature: usize, threshold: f64) -> (Vec<i128>, Vec<i128>) {
    let mut l = Vec::new();
    let mut r = Vec::new();
    for (x, y) in ds.rows() {
        if x[feature] <= threshold { l.push(y as i128) } else { r.push(y as i128) }
    }
    (l, r)
}

/// Best gain over every (feature, midpoint) split, by brute force.
pub fn exhaustive_best(ds: &Dataset) -> Option<(i128, i128)> {
    let mut best: Option<(i128, i128)> = None;
    for f in 0..ds.schema().len() {
        let mut v: Vec<f64> = ds.features().iter().map(|r| r[f]).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        for w in v.windows(2) {
            let (l, r) = partition(ds, f, 0.5 * (w[0] + w[1]));
            let g = gain(&l, &r);
            if best.is_none_or(|b| greater(g, b)) {
                best = Some(g);
            }
        }
    }
    best
}

/// Removes rows whose feature vector repeats an earlier one.
pub fn distinct_rows(ds: &Dataset) -> Dataset {
    let mut seen = std::collections::HashSet::new();
    let keep: Vec<usize> = (0..ds.len())
        .filter(|&i| seen.insert(ds.features()[i].iter().map(|v| v.to_bits()).collect::<Vec<_>>()))
        .collect();
    ds.subset(&keep)
}
