//! Randomized OSL: every probe is chosen with a known probability, so the
//! results it produces support unbiased aggregate estimates.

mod estimator;

pub use estimator::{
    count_estimate, normal_quantile, Estimate, EstimateError, EstimatorState, Observation, Scoring, Weighting,
};

use std::fmt::Write as _;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{Join, Phase, Probe, Side};
use crate::osl::{OslParams, RewardEntry};
use crate::scalar::Real;
use crate::storage::random_access;

/// Which per-probe value the estimator targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregate {
    /// Results per probe.
    #[default]
    Count,
    /// Sum of the S-side payload lengths over results.
    PayloadSum,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoslParams<T> {
    pub osl: OslParams,
    /// Pseudo-reward of entries without results when drawing.
    pub eps0: T,
    pub p_conf: T,
    pub weighting: Weighting,
    pub scoring: Scoring,
    pub aggregate: Aggregate,
    /// Stop after this many logged steps.
    pub max_steps: Option<usize>,
}

impl<T: Real> Default for RoslParams<T> {
    fn default() -> Self {
        RoslParams {
            osl: OslParams::default(),
            eps0: T::of(0.5),
            p_conf: T::of(0.95),
            weighting: Weighting::default(),
            scoring: Scoring::default(),
            aggregate: Aggregate::default(),
            max_steps: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SelectionContext<T> {
    FreshPick { unexplored: usize },
    ContinueAfterN { p_hat: T, n: usize },
    ExploitDraw { weight: T, total: T },
}

/// Probability that the chosen action was selected in the given situation,
/// floored at `floor` so no logged probability is zero.
pub fn selection_probability<T: Real>(ctx: SelectionContext<T>, floor: T) -> T {
    let p = match ctx {
        SelectionContext::FreshPick { unexplored } => T::count(unexplored.max(1) as u64).recip(),
        SelectionContext::ContinueAfterN { p_hat, n } => T::one() - (T::one() - p_hat).powi(n as i32),
        SelectionContext::ExploitDraw { weight, total } => weight / total,
    };
    p.max(floor)
}

/// Laplace-smoothed fraction of probes that produced a result.
pub fn smoothed_hit_rate<T: Real>(entry: &RewardEntry) -> T {
    T::count(entry.hits + 1) / T::count(entry.trials + 2)
}

/// Draw weights max(successes, eps0) over open entries.
pub fn draw_weights<T: Real>(table: &[RewardEntry], eps0: T) -> Vec<(usize, T)> {
    table.iter().enumerate().filter(|(_, e)| !e.exploited).map(|(i, e)| (i, T::count(e.successes).max(eps0))).collect()
}

/// Samples an open entry with probability ∝ max(successes, eps0).
/// Returns the table index and every open entry's probability.
pub fn rosl_exploit_draw<T: Real>(
    table: &[RewardEntry],
    eps0: T,
    rng: &mut impl Rng,
) -> Option<(usize, Vec<(usize, T)>)> {
    let w = draw_weights(table, eps0);
    if w.is_empty() {
        return None;
    }
    let total = w.iter().fold(T::zero(), |a, &(_, x)| a + x);
    let probs: Vec<(usize, T)> = w.iter().map(|&(i, x)| (i, x / total)).collect();
    let dist = WeightedIndex::new(w.iter().map(|&(_, x)| x.to_f64().unwrap_or(0.0))).ok()?;
    Some((w[dist.sample(rng)].0, probs))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionRecord<T> {
    pub step: usize,
    pub chosen: usize,
    pub e: T,
    pub y: T,
    pub report: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint<T> {
    pub step: usize,
    pub estimate: Estimate<T>,
    pub count_est: T,
}

/// `step,q_hat,ci_low,ci_high,count_est,samples` per line.
pub fn export_estimates<T: Real>(trace: &[TracePoint<T>]) -> String {
    let mut out = String::new();
    for p in trace {
        let e = &p.estimate;
        let _ = writeln!(out, "{},{},{},{},{},{}", p.step, e.q_hat, e.ci.0, e.ci.1, p.count_est, e.samples);
    }
    out
}

#[derive(Debug, Clone)]
pub struct RoslOutput<T> {
    pub log: Vec<SelectionRecord<T>>,
    pub trace: Vec<TracePoint<T>>,
    pub estimator: EstimatorState<T>,
    pub table: Vec<RewardEntry>,
}

impl<T: Real> RoslOutput<T> {
    pub fn last(&self) -> Option<&TracePoint<T>> {
        self.trace.last()
    }
}

struct Run<'j, 'a, T: Real> {
    join: &'j mut Join<'a>,
    params: RoslParams<T>,
    rng: ChaCha8Rng,
    est: EstimatorState<T>,
    log: Vec<SelectionRecord<T>>,
    trace: Vec<TracePoint<T>>,
    report_every: usize,
    resident: Option<usize>,
    pairs_per_probe: T,
}

impl<T: Real> Run<'_, '_, T> {
    fn stopped(&self) -> bool {
        self.join.done() || self.params.max_steps.is_some_and(|m| self.est.steps() >= m)
    }

    fn estimate_now(&self) -> TracePoint<T> {
        let estimate = self.est.population_estimate(self.params.p_conf).expect("valid confidence");
        let count_est =
            count_estimate(estimate.q_hat, self.join.r.tuple_count, self.join.s.tuple_count, self.pairs_per_probe)
                .unwrap_or_else(|_| T::zero());
        TracePoint { step: self.est.steps(), estimate, count_est }
    }

    /// Probes `entry` against a uniformly drawn S partition it has not met and logs the step.
    fn probe_random_s(&mut self, entry: &mut RewardEntry, eligible: &[(usize, T)], phase: Phase) -> Option<usize> {
        let ns = self.join.s.partition_count();
        let open = ns - entry.joined.len();
        if open == 0 {
            return None;
        }
        let s = entry.joined.nth_gap(self.rng.gen_range(0..open), ns).expect("open S partition");
        if self.resident != Some(entry.address) {
            random_access(self.join.r, entry.address, &mut self.join.clock).expect("R address in range");
            self.resident = Some(entry.address);
        }
        random_access(self.join.s, s, &mut self.join.clock).expect("S address in range");
        let before = self.join.sink.len();
        let Probe::Done { results } = self.join.probe(entry.address, s, phase) else {
            return None;
        };
        entry.joined.insert(s);
        entry.trials += 1;
        entry.successes += results as u64;
        entry.hits += (results > 0) as u64;
        let y = match self.params.aggregate {
            Aggregate::Count => T::count(results as u64),
            Aggregate::PayloadSum => {
                let rows = &self.join.sink.stream.rows[before..];
                let sum: usize = rows
                    .iter()
                    .map(|row| self.join.s.partition(row.s_addr as usize).tuples[row.s_off as usize].payload.len())
                    .sum();
                T::count(sum as u64)
            }
        };
        let e = eligible.iter().find(|(a, _)| *a == entry.address).map(|&(_, e)| e).unwrap_or(T::one());
        let step = self.est.steps();
        self.est.record_step(entry.address, y, eligible);
        let report = self.report_every > 0 && self.est.steps().is_multiple_of(self.report_every);
        self.log.push(SelectionRecord { step, chosen: entry.address, e, y, report });
        if report {
            let point = self.estimate_now();
            self.trace.push(point);
        }
        Some(results)
    }
}

/// Runs ROSL until `k` results, the step budget, or join completion.
///
/// Fresh partitions are drawn uniformly from the unexplored ones; the first
/// probe of an exploration is logged against every unexplored address with
/// probability 1/unexplored, later probes of the same exploration with
/// probability 1. Exploitation redraws an open entry ∝ reward at every step.
pub fn run_rosl<T: Real>(join: &mut Join<'_>, params: &RoslParams<T>, report_every: usize) -> RoslOutput<T> {
    let nr = join.r.partition_count();
    let ns = join.s.partition_count();
    let pairs_per_probe = T::of(join.r.mean_partition_len() * join.s.mean_partition_len());
    let mut run = Run {
        join,
        params: *params,
        rng: ChaCha8Rng::seed_from_u64(params.osl.seed),
        est: EstimatorState::new(nr).with(params.weighting, params.scoring),
        log: Vec::new(),
        trace: Vec::new(),
        report_every,
        resident: None,
        pairs_per_probe,
    };
    let mut table: Vec<RewardEntry> = Vec::new();
    let mut unexplored: Vec<usize> = (0..nr).collect();
    let m = params.osl.window(ns);
    let mut round = 0;

    'rounds: while !run.stopped() && ns > 0 {
        round += 1;
        let want = if round == 1 { m } else { 1 };
        for _ in 0..want {
            if unexplored.is_empty() || run.stopped() {
                break;
            }
            let u = unexplored.len();
            let e_fresh = selection_probability(SelectionContext::FreshPick { unexplored: u }, T::zero());
            let mut eligible: Vec<(usize, T)> = unexplored.iter().map(|&a| (a, e_fresh)).collect();
            let addr = unexplored.swap_remove(run.rng.gen_range(0..u));
            let mut entry = RewardEntry::new(addr);
            let mut failures = 0;
            while failures < params.osl.n && !run.stopped() {
                let Some(results) = run.probe_random_s(&mut entry, &eligible, Phase::Explore(Side::R)) else {
                    break;
                };
                if results == 0 {
                    failures += 1;
                }
                eligible = vec![(addr, T::one())];
            }
            if entry.joined.covers(ns) {
                entry.exploited = true;
            }
            table.push(entry);
        }
        // exploitation phase: ends when one entry completes
        loop {
            if run.stopped() {
                break 'rounds;
            }
            let Some((idx, probs)) = rosl_exploit_draw(&table, params.eps0, &mut run.rng) else {
                if unexplored.is_empty() {
                    break 'rounds;
                }
                break;
            };
            let eligible: Vec<(usize, T)> = probs.iter().map(|&(i, p)| (table[i].address, p)).collect();
            let mut entry = std::mem::replace(&mut table[idx], RewardEntry::new(usize::MAX));
            run.probe_random_s(&mut entry, &eligible, Phase::Exploit(Side::R));
            let finished = entry.joined.covers(ns);
            entry.exploited = finished;
            table[idx] = entry;
            if finished {
                break;
            }
        }
    }
    if run.est.steps() > 0 && run.trace.last().is_none_or(|p| p.step != run.est.steps()) {
        let point = run.estimate_now();
        run.trace.push(point);
    }
    if let Some(last) = run.log.last_mut() {
        last.report = true;
    }
    RoslOutput { log: run.log, trace: run.trace, estimator: run.est, table }
}
