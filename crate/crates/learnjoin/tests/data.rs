use std::collections::HashMap;
use std::fs;

use learnjoin::datagen::{generate, generate_pair, zipf_pmf, GenConfig, KeyMode, Multiplicity};
use learnjoin::rosl::{EstimatorState, Weighting};
use learnjoin::storage::{load_relation, write_relation, StorageError};
use learnjoin::BernoulliJoin;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn hottest_key_frequency_is_binomial() {
    let cfg = GenConfig { multiplicity: Multiplicity::ManyToMany, ..GenConfig::new(10, 10_000, 1000, 1.5, 21) };
    let g = generate(&cfg).unwrap();
    let mut freq: HashMap<u64, u64> = HashMap::new();
    for t in &g.s {
        *freq.entry(t.key).or_default() += 1;
    }
    let top = *freq.values().max().unwrap() as f64;
    let p = zipf_pmf::<f64>(1000, 1.5).unwrap()[0];
    let n = 10_000.0;
    let sigma = (n * p * (1.0 - p)).sqrt();
    assert!((top - n * p).abs() <= 3.0 * sigma, "top={top} expected={}", n * p);
}

#[test]
fn uniform_one_to_many_spreads_s_evenly() {
    let g = generate(&GenConfig::new(50, 20_000, 50, 0.0, 4)).unwrap();
    assert_eq!(g.summary.join_size, 20_000);
    let mut freq = vec![0u64; 50];
    for t in &g.s {
        freq[t.key as usize] += 1;
    }
    let (n, p) = (20_000.0_f64, 1.0 / 50.0);
    let sigma = (n * p * (1.0 - p)).sqrt();
    // 4σ per key keeps the family-wise false alarm rate small over 50 keys
    assert!(freq.iter().all(|&f| (f as f64 - n * p).abs() <= 4.0 * sigma));
}

#[test]
fn same_seed_same_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = GenConfig { key_mode: KeyMode::StringWithEdits, edit_rate: 0.2, ..GenConfig::new(300, 900, 400, 1.0, 7) };
    let paths: Vec<_> = ["r1", "s1", "r2", "s2"].iter().map(|n| dir.path().join(n)).collect();
    let a = generate_pair(&cfg, &paths[0], &paths[1]).unwrap();
    let b = generate_pair(&cfg, &paths[2], &paths[3]).unwrap();
    assert_eq!(a, b);
    assert_eq!(fs::read(&paths[0]).unwrap(), fs::read(&paths[2]).unwrap());
    assert_eq!(fs::read(&paths[1]).unwrap(), fs::read(&paths[3]).unwrap());
    assert_eq!(a.to_string(), format!("r=300 s=900 keys={} join={}", a.keys_used, a.join_size));
}

#[test]
fn generator_rejects_bad_configs() {
    assert!(generate(&GenConfig::new(10, 10, 10, -1.0, 0)).is_err());
    assert!(generate(&GenConfig::new(11, 10, 10, 1.0, 0)).is_err());
    assert!(generate(&GenConfig::new(10, 10, 0, 1.0, 0)).is_err());
    let cfg = GenConfig { key_mode: KeyMode::StringWithEdits, oracle_cap: 10, ..GenConfig::new(100, 100, 100, 0.0, 0) };
    assert!(generate(&cfg).is_err());
}

#[test]
fn relation_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate(&GenConfig { key_mode: KeyMode::StringWithEdits, ..GenConfig::new(640, 5, 700, 0.5, 1) }).unwrap();
    let path = dir.path().join("r.rel");
    write_relation(&path, &g.r).unwrap();
    let store = load_relation(&path, 320).unwrap();
    assert_eq!(store.partition_count(), 2);
    assert_eq!(store.tuple_count, 640);
    let back: Vec<_> = store.partitions.iter().flat_map(|p| p.tuples.clone()).collect();
    assert_eq!(back, g.r);

    let empty = dir.path().join("e.rel");
    fs::write(&empty, "").unwrap();
    let store = load_relation(&empty, 4).unwrap();
    assert_eq!((store.partition_count(), store.tuple_count), (0, 0));

    let bad = dir.path().join("b.rel");
    fs::write(&bad, "1,,3\nx,,1\n").unwrap();
    assert!(matches!(load_relation(&bad, 4), Err(StorageError::Malformed { row: 2, .. })));
}

#[test]
fn bernoulli_success_rates_average_to_midpoint() {
    let m = BernoulliJoin::new(100_000, 10, 0.0, 1.0, 3).unwrap();
    let mean = m.p.iter().sum::<f64>() / m.p.len() as f64;
    assert!((mean - 0.5).abs() < 0.01);
}

#[test]
fn fixed_propensity_estimate_is_unbiased() {
    for w in [Weighting::Constant, Weighting::Adaptive] {
        let mut est = EstimatorState::<f64>::new(1);
        est.weighting = w;
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let t = 10_000;
        for _ in 0..t {
            let y = if rng.gen_bool(0.5) { 1.0 } else { 0.0 };
            est.record_step(0, y, &[(0, 0.5)]);
        }
        let (q, _) = est.per_tuple_estimate(0).unwrap();
        // Y/e takes values 0 and 2 with equal odds: standard deviation 1
        let sigma = 1.0 / (t as f64).sqrt();
        assert!((q - 1.0).abs() <= 3.0 * sigma, "{w:?}: {q}");
    }
}

#[test]
fn single_precision_agrees_with_double() {
    use learnjoin::engine::discounted_average;
    use learnjoin::osl::theoretical_bounds;
    let d32 = discounted_average::<f32>(&[1, 2], 0.99);
    assert!((d32 - 2.9502).abs() < 1e-5);
    let (b32, b64) =
        (theoretical_bounds(0.0_f32, 1.0, 10_000).unwrap(), theoretical_bounds(0.0_f64, 1.0, 10_000).unwrap());
    assert!((b32.upper as f64 - b64.upper).abs() < 1e-7);
    assert_eq!(b32.m_star, b64.m_star);
    let p32 = zipf_pmf::<f32>(3, 1.0).unwrap();
    assert!((p32[0] - 6.0 / 11.0).abs() < 1e-6);
}
