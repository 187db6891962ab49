//! Skewed synthetic relation pairs and an abstract Bernoulli reward model.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::engine::within_one_edit;
use crate::scalar::Real;
use crate::storage::{write_relation, StorageError, Tuple};

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("oracle too large: {pairs} distinct string pairs exceeds cap {cap}")]
    OracleTooLarge { pairs: u64, cap: u64 },
    #[error(transparent)]
    Storage(#[from] StorageError),
}

/// P(rank i) ∝ 1/i^z for i = 1..=n.
pub fn zipf_pmf<T: Real>(n: usize, z: T) -> Result<Vec<T>, DatagenError> {
    if n == 0 {
        return Err(DatagenError::Domain("zipf over an empty domain".into()));
    }
    if z.is_nan() || z < T::zero() {
        return Err(DatagenError::Domain(format!("zipf exponent must be >= 0, got {z}")));
    }
    let w: Vec<T> = (1..=n).map(|i| T::count(i as u64).powf(z).recip()).collect();
    // smallest terms first keeps the sum tight
    let total = w.iter().rev().fold(T::zero(), |a, &x| a + x);
    Ok(w.into_iter().map(|x| x / total).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Multiplicity {
    OneToMany,
    ManyToMany,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyMode {
    Integer,
    StringWithEdits,
}

#[derive(Debug, Clone)]
pub struct GenConfig {
    pub r_tuples: usize,
    pub s_tuples: usize,
    pub key_domain: usize,
    pub z: f64,
    pub multiplicity: Multiplicity,
    pub key_mode: KeyMode,
    pub edit_rate: f64,
    pub seed: u64,
    /// Largest distinct-string pair count the string-mode oracle will brute force.
    pub oracle_cap: u64,
}

impl GenConfig {
    pub fn new(r_tuples: usize, s_tuples: usize, key_domain: usize, z: f64, seed: u64) -> Self {
        GenConfig {
            r_tuples,
            s_tuples,
            key_domain,
            z,
            multiplicity: Multiplicity::OneToMany,
            key_mode: KeyMode::Integer,
            edit_rate: 0.0,
            seed,
            oracle_cap: 25_000_000,
        }
    }

    fn validate(&self) -> Result<(), DatagenError> {
        let bad = |m: String| Err(DatagenError::Domain(m));
        if self.key_domain == 0 {
            return bad("key_domain must be at least 1".into());
        }
        if !(self.z.is_finite() && self.z >= 0.0) {
            return bad(format!("z must be a finite value >= 0, got {}", self.z));
        }
        if !(0.0..=1.0).contains(&self.edit_rate) {
            return bad(format!("edit_rate must lie in [0,1], got {}", self.edit_rate));
        }
        if self.multiplicity == Multiplicity::OneToMany && self.r_tuples > self.key_domain {
            return bad(format!("one_to_many needs r_tuples <= key_domain ({} > {})", self.r_tuples, self.key_domain));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenSummary {
    pub r_tuples: usize,
    pub s_tuples: usize,
    pub keys_used: usize,
    pub join_size: u64,
}

impl fmt::Display for GenSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r={} s={} keys={} join={}", self.r_tuples, self.s_tuples, self.keys_used, self.join_size)
    }
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub r: Vec<Tuple>,
    pub s: Vec<Tuple>,
    pub summary: GenSummary,
}

/// Builds both relations in memory, shuffled, with the exact join size.
pub fn generate(cfg: &GenConfig) -> Result<Generated, DatagenError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pmf = zipf_pmf::<f64>(cfg.key_domain, cfg.z)?;
    let sampler = WeightedIndex::new(&pmf).map_err(|e| DatagenError::Domain(e.to_string()))?;

    // rank -> key, so popularity is not tied to key order
    let mut by_rank: Vec<u64> = (0..cfg.key_domain as u64).collect();
    by_rank.shuffle(&mut rng);

    let s_keys: Vec<u64> = (0..cfg.s_tuples).map(|_| by_rank[sampler.sample(&mut rng)]).collect();
    let r_keys: Vec<u64> = match cfg.multiplicity {
        Multiplicity::OneToMany => (0..cfg.r_tuples as u64).collect(),
        Multiplicity::ManyToMany => (0..cfg.r_tuples).map(|_| by_rank[sampler.sample(&mut rng)]).collect(),
    };

    let width = digits(cfg.key_domain as u64 - 1);
    let build = |keys: &[u64], rng: &mut ChaCha8Rng| -> Vec<Tuple> {
        keys.iter()
            .map(|&key| {
                let skey = match cfg.key_mode {
                    KeyMode::Integer => None,
                    KeyMode::StringWithEdits => Some(encode_key(key, width, cfg.edit_rate, rng)),
                };
                Tuple { key, skey, payload: vec![0; rng.gen_range(1..=16)] }
            })
            .collect()
    };
    let mut r = build(&r_keys, &mut rng);
    let mut s = build(&s_keys, &mut rng);
    r.shuffle(&mut rng);
    s.shuffle(&mut rng);

    let join_size = match cfg.key_mode {
        KeyMode::Integer => equi_join_size(&r, &s),
        KeyMode::StringWithEdits => edit_join_size(&r, &s, cfg.oracle_cap)?,
    };
    let mut used: Vec<u64> = r.iter().chain(&s).map(|t| t.key).collect();
    used.sort_unstable();
    used.dedup();
    let summary = GenSummary { r_tuples: r.len(), s_tuples: s.len(), keys_used: used.len(), join_size };
    Ok(Generated { r, s, summary })
}

/// Writes both relation files and returns the summary.
pub fn generate_pair(cfg: &GenConfig, out_r: &Path, out_s: &Path) -> Result<GenSummary, DatagenError> {
    let g = generate(cfg)?;
    write_relation(out_r, &g.r)?;
    write_relation(out_s, &g.s)?;
    Ok(g.summary)
}

fn digits(mut x: u64) -> usize {
    let mut d = 1;
    while x >= 10 {
        x /= 10;
        d += 1;
    }
    d
}

fn encode_key(key: u64, width: usize, edit_rate: f64, rng: &mut ChaCha8Rng) -> String {
    let mut bytes = format!("{key:0width$}").into_bytes();
    if edit_rate > 0.0 && rng.gen_bool(edit_rate) {
        let pos = rng.gen_range(0..bytes.len());
        let old = bytes[pos] - b'0';
        let new = (old + rng.gen_range(1..10)) % 10;
        bytes[pos] = b'0' + new;
    }
    String::from_utf8(bytes).expect("ascii digits")
}

/// Σ_k freq_R(k)·freq_S(k).
pub fn equi_join_size(r: &[Tuple], s: &[Tuple]) -> u64 {
    let mut freq: HashMap<u64, u64> = HashMap::new();
    for t in r {
        *freq.entry(t.key).or_default() += 1;
    }
    s.iter().map(|t| freq.get(&t.key).copied().unwrap_or(0)).sum()
}

/// Pairs within edit distance one, counted over distinct string keys.
pub fn edit_join_size(r: &[Tuple], s: &[Tuple], cap: u64) -> Result<u64, DatagenError> {
    fn count(rel: &[Tuple]) -> Vec<(&str, u64)> {
        let mut m: HashMap<&str, u64> = HashMap::new();
        for t in rel {
            *m.entry(t.skey.as_deref().unwrap_or("")).or_default() += 1;
        }
        let mut v: Vec<(&str, u64)> = m.into_iter().collect();
        v.sort_unstable();
        v
    }
    let (rc, sc) = (count(r), count(s));
    let pairs = rc.len() as u64 * sc.len() as u64;
    if pairs > cap {
        return Err(DatagenError::OracleTooLarge { pairs, cap });
    }
    let mut total = 0;
    for (a, na) in &rc {
        for (b, nb) in &sc {
            if within_one_edit(a.as_bytes(), b.as_bytes()) {
                total += na * nb;
            }
        }
    }
    Ok(total)
}

/// Actions whose probes succeed independently with a fixed probability drawn from U[a, b].
#[derive(Debug, Clone)]
pub struct BernoulliMatrix<T: Real> {
    pub p: Vec<T>,
    pub s_trials: usize,
    rng: ChaCha8Rng,
}

impl<T: Real> BernoulliMatrix<T> {
    pub fn new(r_actions: usize, s_trials: usize, a: T, b: T, seed: u64) -> Result<Self, DatagenError> {
        if !(T::zero() <= a && a <= b && b <= T::one()) {
            return Err(DatagenError::Domain(format!("need 0 <= a <= b <= 1, got a={a} b={b}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = (0..r_actions).map(|_| a + (b - a) * T::of(rng.gen::<f64>())).collect();
        Ok(BernoulliMatrix { p, s_trials, rng })
    }

    pub fn actions(&self) -> usize {
        self.p.len()
    }

    pub fn probe(&mut self, action: usize) -> bool {
        let p = self.p[action].to_f64().unwrap_or(0.0);
        p >= 1.0 || (p > 0.0 && self.rng.gen::<f64>() < p)
    }
}
