#![allow(dead_code)]

use std::collections::BTreeMap;

use learnjoin::baselines::{run_bnl, run_nl, run_ripple, run_ucb_scan};
use learnjoin::collab::{run_cl, run_icl};
use learnjoin::engine::{CostWeights, Join, JoinPredicate, RunOutput};
use learnjoin::osl::{run_osl, OslParams};
use learnjoin::rosl::{run_rosl, RoslParams};
use learnjoin::storage::{RelationStore, Tuple};

pub const METHODS: [&str; 8] = ["nl", "bnl", "ripple", "ucb", "osl", "rosl", "cl", "icl"];

pub type Identity = (u32, u32, u32, u32);

pub fn keyed(keys: &[u64]) -> Vec<Tuple> {
    keys.iter().map(|&k| Tuple::new(k)).collect()
}

pub fn store(name: &str, tuples: Vec<Tuple>, ps: usize) -> RelationStore {
    RelationStore::from_tuples(name, tuples, ps).unwrap()
}

/// Classic dynamic-programming Levenshtein distance.
pub fn levenshtein(a: &[u8], b: &[u8]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, &ca) in a.iter().enumerate() {
        let mut cur = vec![i + 1; b.len() + 1];
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + (ca != cb) as usize;
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

/// Every matching tuple pair, addressed by position in file order.
pub fn brute_force(r: &[Tuple], s: &[Tuple], ps: usize, edit: bool) -> BTreeMap<Identity, usize> {
    brute_force_sized(r, ps, s, ps, edit)
}

pub fn brute_force_sized(r: &[Tuple], rps: usize, s: &[Tuple], sps: usize, edit: bool) -> BTreeMap<Identity, usize> {
    let mut out = BTreeMap::new();
    for (i, rt) in r.iter().enumerate() {
        for (j, st) in s.iter().enumerate() {
            let hit = if edit {
                let (a, b) = (rt.skey.as_deref().unwrap(), st.skey.as_deref().unwrap());
                levenshtein(a.as_bytes(), b.as_bytes()) <= 1
            } else {
                rt.key == st.key
            };
            if hit {
                let id = ((i / rps) as u32, (i % rps) as u32, (j / sps) as u32, (j % sps) as u32);
                *out.entry(id).or_default() += 1;
            }
        }
    }
    out
}

pub fn multiset(out: &RunOutput) -> BTreeMap<Identity, usize> {
    let mut m = BTreeMap::new();
    for row in &out.stream.rows {
        *m.entry(row.identity()).or_default() += 1;
    }
    m
}

/// Runs `method` with default parameters and `seed` until `k` results or exhaustion.
pub fn run(method: &str, r: &RelationStore, s: &RelationStore, pred: &JoinPredicate, k: usize, seed: u64) -> RunOutput {
    let weights = CostWeights::for_partition_size(r.partition_size);
    let mut join = Join::new(r, s, pred, k, weights);
    let osl = OslParams { seed, ..OslParams::default() };
    match method {
        "nl" => run_nl(&mut join),
        "bnl" => run_bnl(&mut join, 3),
        "ripple" => run_ripple(&mut join, r.partition_count() + s.partition_count()).unwrap(),
        "ucb" => {
            run_ucb_scan(&mut join);
        }
        "osl" => {
            run_osl(&mut join, &osl);
        }
        "rosl" => {
            let params = RoslParams::<f64> { osl, ..RoslParams::default() };
            run_rosl(&mut join, &params, 0);
        }
        "cl" => {
            run_cl(&mut join, &osl);
        }
        "icl" => {
            run_icl(&mut join, &osl);
        }
        other => panic!("unknown method {other}"),
    }
    join.into()
}
