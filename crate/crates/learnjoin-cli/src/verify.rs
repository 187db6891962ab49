//! Built-in self checks: failure-proportion bounds, estimator calibration and
//! oracle equivalence.

use std::collections::BTreeMap;
use std::fmt;

use clap::ValueEnum;
use learnjoin::datagen::{generate, GenConfig, KeyMode, Multiplicity};
use learnjoin::engine::{CostWeights, Join};
use learnjoin::osl::{simulate_super_rounds, theoretical_bounds, OslParams};
use learnjoin::rosl::{count_estimate, run_rosl, Scoring};
use learnjoin::storage::{RelationStore, Tuple};
use learnjoin::RoslConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{Method, PredicateKind, RunConfig};
use crate::exec::execute;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CheckKind {
    Bounds,
    Estimator,
    Oracle,
}

/// Deliberate defects for negative controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Injection {
    /// Score observations without dividing by their selection probability.
    OmitWeight,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    /// Human-readable bound or tolerance.
    pub tolerance: String,
    pub pass: bool,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {} measured={} {}", self.name, self.measured, self.tolerance)
    }
}

pub fn run_checks(only: Option<CheckKind>, inject: Option<Injection>) -> Vec<Check> {
    let wanted = |k| only.is_none_or(|o| o == k);
    let mut out = Vec::new();
    if wanted(CheckKind::Bounds) {
        out.push(bounds_check());
    }
    if wanted(CheckKind::Estimator) {
        out.extend(estimator_checks(inject));
    }
    if wanted(CheckKind::Oracle) {
        out.push(oracle_check());
    }
    out
}

pub fn bounds_check() -> Check {
    let s_count = 10_000;
    let b = theoretical_bounds(0.0_f64, 1.0, s_count).expect("valid bounds");
    let (lo, hi) = (b.lower - 0.01, b.upper + 0.02);
    let sim = simulate_super_rounds(0.0_f64, 1.0, s_count, 1, 100, 500, true, 1).expect("valid simulation");
    let m = sim.mean_failure;
    Check {
        name: "failure_proportion".into(),
        measured: m,
        tolerance: format!("lower={:.5} upper={:.5} range=[{lo:.5},{hi:.5}]", b.lower, b.upper),
        pass: (lo..=hi).contains(&m),
    }
}

/// Desk-scale COUNT instance and the ROSL configuration used against it.
pub struct EstimatorSetup {
    pub r: RelationStore,
    pub s: RelationStore,
    pub truth: f64,
    pub params: RoslConfig,
}

pub fn estimator_setup(scoring: Scoring) -> EstimatorSetup {
    let g = generate(&GenConfig::new(320, 8000, 320, 0.5, 1)).expect("valid instance");
    let ps = 16;
    EstimatorSetup {
        truth: g.summary.join_size as f64,
        r: RelationStore::from_tuples("R", g.r, ps).expect("partition size"),
        s: RelationStore::from_tuples("S", g.s, ps).expect("partition size"),
        params: RoslConfig { max_steps: Some(800), scoring, ..RoslConfig::default() },
    }
}

/// Final COUNT estimate and interval of one ROSL run.
pub fn estimate_once(setup: &EstimatorSetup, seed: u64) -> (f64, (f64, f64)) {
    let pred = learnjoin::engine::JoinPredicate::KeyEquality;
    let mut join = Join::new(&setup.r, &setup.s, &pred, usize::MAX, CostWeights::for_partition_size(16));
    let params = RoslConfig { osl: OslParams { seed, ..OslParams::default() }, ..setup.params };
    let out = run_rosl(&mut join, &params, 0);
    let p = out.last().expect("at least one step");
    let pairs = setup.r.mean_partition_len() * setup.s.mean_partition_len();
    let count = |q| count_estimate(q, setup.r.tuple_count, setup.s.tuple_count, pairs).expect("nonempty partitions");
    (p.count_est, (count(p.estimate.ci.0), count(p.estimate.ci.1)))
}

pub fn estimator_checks(inject: Option<Injection>) -> Vec<Check> {
    let scoring = match inject {
        Some(Injection::OmitWeight) => Scoring::Raw,
        None => Scoring::InversePropensity,
    };
    let setup = estimator_setup(scoring);
    let runs = 200;
    let results: Vec<(f64, (f64, f64))> = (0..runs).map(|seed| estimate_once(&setup, seed)).collect();
    let n = runs as f64;
    let mean = results.iter().map(|r| r.0).sum::<f64>() / n;
    let var = results.iter().map(|r| (r.0 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    let covered = results.iter().filter(|(_, (lo, hi))| (*lo..=*hi).contains(&setup.truth)).count() as f64 / n;
    let bias = (mean - setup.truth).abs();
    vec![
        Check {
            name: "count_bias".into(),
            measured: bias,
            tolerance: format!("truth={} mean={mean:.2} limit=3se={:.2}", setup.truth, 3.0 * se),
            pass: bias <= 3.0 * se,
        },
        Check {
            name: "ci_coverage".into(),
            measured: covered,
            tolerance: "range=[0.90,0.98]".into(),
            pass: (0.90..=0.98).contains(&covered),
        },
    ]
}

fn levenshtein(a: &[u8], b: &[u8]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, &ca) in a.iter().enumerate() {
        let mut cur = vec![i + 1; b.len() + 1];
        for (j, &cb) in b.iter().enumerate() {
            cur[j + 1] = (prev[j] + (ca != cb) as usize).min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

type Identity = (u32, u32, u32, u32);

fn brute_force(r: &[Tuple], s: &[Tuple], ps: usize, edit: bool) -> BTreeMap<Identity, usize> {
    let mut out = BTreeMap::new();
    for (i, a) in r.iter().enumerate() {
        for (j, b) in s.iter().enumerate() {
            let hit = match (edit, &a.skey, &b.skey) {
                (true, Some(x), Some(y)) => levenshtein(x.as_bytes(), y.as_bytes()) <= 1,
                _ => a.key == b.key,
            };
            if hit {
                let id = ((i / ps) as u32, (i % ps) as u32, (j / ps) as u32, (j % ps) as u32);
                *out.entry(id).or_default() += 1;
            }
        }
    }
    out
}

/// Every method run to exhaustion on small random instances must emit the
/// brute-force join exactly once. Measured value is the number of mismatching runs.
pub fn oracle_check() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let instances = 12;
    let mut mismatches = 0;
    let mut runs = 0;
    for i in 0..instances {
        let edit = i % 2 == 1;
        let ps = [1, 4, 16][i % 3];
        let (nr, ns) = (rng.gen_range(1..=60), rng.gen_range(1..=60));
        let cfg = GenConfig {
            multiplicity: Multiplicity::ManyToMany,
            key_mode: if edit { KeyMode::StringWithEdits } else { KeyMode::Integer },
            edit_rate: 0.3,
            ..GenConfig::new(nr, ns, rng.gen_range(1..=20), rng.gen_range(0.0..2.0), rng.gen())
        };
        let g = generate(&cfg).expect("valid instance");
        let want = brute_force(&g.r, &g.s, ps, edit);
        let r = RelationStore::from_tuples("R", g.r, ps).expect("partition size");
        let s = RelationStore::from_tuples("S", g.s, ps).expect("partition size");
        for m in Method::ALL {
            let run = RunConfig {
                predicate: if edit { PredicateKind::Edit } else { PredicateKind::Eq },
                partition_size: ps,
                mem_cap: r.partition_count() + s.partition_count() + 2,
                seed: Some(i as u64),
                weights: CostWeights::for_partition_size(ps),
                ..RunConfig::new(m)
            };
            runs += 1;
            let got = execute(&run, &r, &s).map(|o| {
                let mut seen = BTreeMap::new();
                for row in &o.stream.rows {
                    *seen.entry(row.identity()).or_default() += 1;
                }
                seen
            });
            if !matches!(&got, Ok(m) if *m == want) {
                mismatches += 1;
            }
        }
    }
    Check {
        name: "oracle_equivalence".into(),
        measured: mismatches as f64,
        tolerance: format!("runs={runs} limit=0"),
        pass: mismatches == 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levenshtein_examples() {
        assert_eq!(levenshtein(b"kitten", b"sitting"), 3);
        assert_eq!(levenshtein(b"", b"ab"), 2);
        assert_eq!(levenshtein(b"ab", b"ba"), 2);
    }

    #[test]
    fn bounds_report_mentions_both_bounds() {
        let c = bounds_check();
        assert!(c.tolerance.contains("lower=0.01414 upper=0.02000"), "{}", c.tolerance);
        assert!(c.pass, "{c}");
    }
}
