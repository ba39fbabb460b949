mod common;

use perfweld_core::bench::kernel::run;
use perfweld_core::bench::{simulate, simulate_misses, stencil_step, synthesize, Coefficients, Grid, SyntheticOracleSpec};
use perfweld_core::domain::{CacheLevel, MachineSpec};
use perfweld_core::stencil::{misses, CachePolicy, StencilConfig};
use proptest::prelude::*;

fn big_cache_machine() -> MachineSpec {
    MachineSpec::new(
        vec![
            CacheLevel { size_elements: 1 << 17, beta: 1e-10 },
            CacheLevel { size_elements: 1 << 20, beta: 2e-10 },
        ],
        1e-9,
        1e-10,
        8,
    )
    .unwrap()
}

#[test]
fn compulsory_regime_matches_plane_model() {
    let m = big_cache_machine();
    for (i, j, k) in [(8, 12, 12), (16, 16, 16), (32, 32, 32), (20, 24, 12), (9, 13, 30)] {
        for policy in [CachePolicy::WriteAllocate, CachePolicy::NoWriteAllocate] {
            let cfg = StencilConfig::grid(i, j, k, 1).unwrap().with_policy(policy);
            for (lvl, level) in m.cache_levels().iter().enumerate() {
                let model = misses(lvl, &cfg, &m).unwrap();
                let sim = simulate_misses(&cfg, level, &m).unwrap() as f64;
                assert!((model - sim).abs() / sim <= 0.05, "{i}x{j}x{k}: {model} vs {sim}");
            }
        }
    }
}

#[test]
fn small_caches_miss_more() {
    let m = big_cache_machine();
    let cfg = StencilConfig::grid(32, 32, 16, 1).unwrap();
    let big = simulate(&cfg, &m.cache_levels()[1], &m).unwrap();
    let small = simulate(&cfg, &CacheLevel { size_elements: 256, beta: 1e-10 }, &m).unwrap();
    assert!(small.read_misses > big.read_misses);
    assert_eq!(small.reads, big.reads);
    let nwa = simulate(&cfg.clone().with_policy(CachePolicy::NoWriteAllocate), &m.cache_levels()[1], &m).unwrap();
    assert_eq!(nwa.write_misses, nwa.writes);
}

#[test]
fn kernel_probes_hold_exactly() {
    let mut src = Grid::new(3, 3, 3, 1, 1.0).unwrap();
    src.fill_interior(|i, j, k| 0.1 * (i + 2 * j + 5 * k) as f64 + 1.0);
    let mut dst = src.clone();
    stencil_step(&src, &mut dst, 1, Coefficients { c0: 1.0, c1: 0.0 }, None, 1).unwrap();
    assert_eq!(src, dst);

    let ones = Grid::new(3, 3, 3, 1, 1.0).unwrap();
    let out = run(ones.clone(), 1, Coefficients { c0: 0.0, c1: 1.0 / 6.0 }, None, 2, 4).unwrap();
    assert_eq!(out, ones);
}

fn oracle(sigma: f64, seed: u64) -> SyntheticOracleSpec {
    let mut o = SyntheticOracleSpec::from_json_str(
        r#"{
            "model": "stencil",
            "machine": {"element_bytes": 8, "W": 8, "t_c": 1e-10, "beta_mem": 2.5e-9,
                        "cache_levels": [{"size_bytes": 16384, "beta": 2.5e-10}, {"size_bytes": 2097152, "beta": 5e-10}]},
            "features": ["I", "J", "K", "b_i", "b_j", "b_k"],
            "grid": {"I": [32, 64], "J": [32, 64, 96, 128], "K": [16, 32, 64, 96],
                     "b_i": [4, 8, 16, 32], "b_j": [4, 8, 16], "b_k": [8, 16, 32]},
            "skip_invalid": true,
            "perturbation": {"constant": 0.3, "linear": {"I": 0.1}, "quadratic": [{"a": "b_i", "b": "b_i", "coef": 0.05}]}
        }"#,
    )
    .unwrap();
    o.sigma = sigma;
    o.seed = seed;
    o
}

#[test]
fn synthetic_noise_level_matches_sigma() {
    let noisy = oracle(0.05, 8);
    let clean = oracle(0.0, 8);
    let a = synthesize(&noisy).unwrap();
    let b = synthesize(&clean).unwrap();
    assert!(a.len() >= 1000);
    let rel: Vec<f64> = a.responses().iter().zip(b.responses()).map(|(y, t)| y / t - 1.0).collect();
    let mean = rel.iter().sum::<f64>() / rel.len() as f64;
    let sd = (rel.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / rel.len() as f64).sqrt();
    assert!((0.03..=0.07).contains(&sd), "{sd}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn synthetic_responses_positive_and_seeded(seed in 0u64..10_000, sigma in 0.0f64..2.0) {
        let o = oracle(sigma, seed);
        let a = synthesize(&o).unwrap();
        prop_assert!(a.responses().iter().all(|&y| y > 0.0 && y.is_finite()));
        prop_assert_eq!(a, synthesize(&o).unwrap());
    }

    #[test]
    fn simulation_is_deterministic(i in 1u64..10, j in 1u64..10, k in 1u64..10, lines in 1u64..64) {
        let m = big_cache_machine();
        let cfg = StencilConfig::grid(i, j, k, 1).unwrap();
        let level = CacheLevel { size_elements: 8 * lines, beta: 1e-10 };
        prop_assert_eq!(simulate(&cfg, &level, &m).unwrap(), simulate(&cfg, &level, &m).unwrap());
    }
}
