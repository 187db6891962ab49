//! Two learning scans cooperating on one join.
//!
//! CL alternates which side explores each super-round. ICL lets R explore as
//! in OSL while S learns from R's first probes of each exploration, for free.

use crate::engine::{IntervalSet, Join, Phase, Probe, Side};
use crate::osl::{Learner, OslParams, RewardEntry, RoundTrace};
use crate::storage::{random_access, ScanCursor};

/// Interleaved collaborative learning.
pub fn run_cl(join: &mut Join<'_>, params: &OslParams) -> Vec<RoundTrace> {
    let mut trace = Vec::new();
    let mut learners = [Learner::new(Side::R), Learner::new(Side::S)];
    let mut idle = 0;
    let mut round = 0;
    while !join.done() && !join.complete() && idle < 2 {
        round += 1;
        let side = if round % 2 == 1 { Side::R } else { Side::S };
        let learner = &mut learners[(side == Side::S) as usize];
        let window = params.window(join.store(side.other()).partition_count());
        let want = if learner.explorations == 0 { window } else { 1 };
        let explored = learner.explore_window(join, params, want);
        let exploited = if join.done() { None } else { learner.exploit_best(join, params.swap_enabled) };
        idle = if explored.is_empty() && exploited.is_none() { idle + 1 } else { 0 };
        trace.push(RoundTrace {
            round,
            explorer: side,
            explored,
            exploited,
            results_so_far: join.sink.len(),
            cost: join.clock.total(),
        });
    }
    trace
}

/// S partitions eligible for reuse during R's explorations, with what S has
/// learned about each from R's uniform-draw probes.
#[derive(Debug, Clone)]
pub struct IclPool {
    pub members: Vec<usize>,
    pub ledgers: Vec<PoolLedger>,
    pub extension: usize,
    next_fresh: usize,
    s_partitions: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PoolLedger {
    pub successes: u64,
    pub failures: u64,
    pub observed_r: IntervalSet,
    pub complete: bool,
    pub exploited: bool,
}

impl IclPool {
    pub fn new(initial: usize, extension: usize, s_partitions: usize) -> Self {
        let n = initial.min(s_partitions);
        IclPool {
            members: (0..n).collect(),
            ledgers: vec![PoolLedger::default(); s_partitions],
            extension,
            next_fresh: n,
            s_partitions,
        }
    }

    pub fn contains(&self, s_addr: usize) -> bool {
        self.members.contains(&s_addr)
    }

    /// Adds the next `extension` S partitions; returns how many were added.
    pub fn extend(&mut self) -> usize {
        let end = (self.next_fresh + self.extension).min(self.s_partitions);
        let added = end - self.next_fresh;
        self.members.extend(self.next_fresh..end);
        self.next_fresh = end;
        added
    }

    pub fn is_full(&self) -> bool {
        self.next_fresh >= self.s_partitions
    }
}

/// Folds one probe into the pool. Only probes R made as uniform draws count,
/// and only for addresses inside the pool.
pub fn harvest_observation(
    pool: &mut IclPool,
    s_addr: usize,
    r_addr: usize,
    r_was_uniform_draw: bool,
    successes: u64,
    probes: u64,
    nonzero: u64,
) {
    if !r_was_uniform_draw || !pool.contains(s_addr) {
        return;
    }
    let l = &mut pool.ledgers[s_addr];
    l.successes += successes;
    l.failures += probes - nonzero;
    l.observed_r.insert(r_addr);
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IclStats {
    /// Probes spent on S-side learning; zero by construction.
    pub s_learning_probes: u64,
    pub s_exploitations: usize,
    pub harvested: u64,
}

/// Implicit collaborative learning.
pub fn run_icl(join: &mut Join<'_>, params: &OslParams) -> (Vec<RoundTrace>, IclStats) {
    let mut trace = Vec::new();
    let mut stats = IclStats::default();
    if join.done() {
        return (trace, stats);
    }
    let nr = join.r.partition_count();
    let ns = join.s.partition_count();
    let target = ((nr as f64).sqrt().ceil() as usize).max(1);
    let mut pool = IclPool::new(target, 2 * params.n, ns);
    let mut pool_pos = 0;
    let mut completions = 0;
    let m = params.window(ns);
    let commit_run = params.early_commit.then_some(m as u64);
    let mut learner = Learner::new(Side::R);
    let mut s_resident: Option<usize> = None;
    let mut round = 0;

    while !join.done() && !join.complete() {
        round += 1;
        let want = if round == 1 { m } else { 1 };
        let mut explored = Vec::new();
        for _ in 0..want {
            if join.done() {
                break;
            }
            let Some(pr) = crate::storage::sequential_next(join.r, &mut learner.own, &mut join.clock) else {
                break;
            };
            let r = pr.index;
            learner.resident = Some(r);
            let (entry, committed) =
                explore_in_pool(join, r, params.n, commit_run, &mut pool, &mut pool_pos, &mut stats);
            explored.push((r, entry.successes));
            learner.table.push(entry);
            learner.last_explored = Some(learner.table.len() - 1);
            learner.explorations += 1;
            if committed {
                learner.committed = learner.last_explored;
                break;
            }
        }
        let exploited = if join.done() { None } else { learner.exploit_best(join, params.swap_enabled) };
        trace.push(RoundTrace {
            round,
            explorer: Side::R,
            explored: explored.clone(),
            exploited,
            results_so_far: join.sink.len(),
            cost: join.clock.total(),
        });

        // S learns only from what R just did
        for &s in &pool.members {
            let l = &mut pool.ledgers[s];
            if !l.complete && (l.failures >= params.n as u64 || l.observed_r.covers(nr)) {
                l.complete = true;
                completions += 1;
            }
        }
        let open_incomplete = pool.members.iter().any(|&s| !pool.ledgers[s].complete);
        let ready = completions >= target || (!open_incomplete && completions > 0);
        if ready && !join.done() {
            let best = pool
                .members
                .iter()
                .copied()
                .filter(|&s| pool.ledgers[s].complete && !pool.ledgers[s].exploited)
                .max_by(|&a, &b| pool.ledgers[a].successes.cmp(&pool.ledgers[b].successes).then(b.cmp(&a)));
            if let Some(s) = best {
                if s_resident != Some(s) {
                    random_access(join.s, s, &mut join.clock).expect("pool address in range");
                    s_resident = Some(s);
                }
                exploit_s_partition(join, s);
                pool.ledgers[s].exploited = true;
                stats.s_exploitations += 1;
                trace.push(RoundTrace {
                    round,
                    explorer: Side::S,
                    explored: Vec::new(),
                    exploited: Some(s),
                    results_so_far: join.sink.len(),
                    cost: join.clock.total(),
                });
            }
            completions = 0;
            pool.extend();
        }
        if exploited.is_none() && explored.is_empty() && learner.exhausted(join) {
            break;
        }
    }
    (trace, stats)
}

/// N-Failure for R partition `r` with S partitions drawn round-robin from the pool.
/// The flag is set when `r` earns a commit: a full run, or the whole pool met
/// with fewer than `n` failures.
fn explore_in_pool(
    join: &mut Join<'_>,
    r: usize,
    n: usize,
    commit_run: Option<u64>,
    pool: &mut IclPool,
    pos: &mut usize,
    stats: &mut IclStats,
) -> (RewardEntry, bool) {
    let mut entry = RewardEntry::new(r);
    let mut failures = 0;
    let mut probes = 0;
    let mut since_progress = 0;
    while failures < n && !join.done() && since_progress < pool.members.len() {
        if commit_run.is_some_and(|c| entry.run >= c) {
            break;
        }
        let s = pool.members[*pos % pool.members.len()];
        *pos = (*pos + 1) % pool.members.len();
        if entry.joined.contains(s) {
            since_progress += 1;
            continue;
        }
        entry.joined.insert(s);
        since_progress = 0;
        join.clock.seq_pages += 1;
        let Probe::Done { results } = join.probe(r, s, Phase::Explore(Side::R)) else { continue };
        entry.record(results);
        if results == 0 {
            failures += 1;
        }
        harvest_observation(pool, s, r, probes < n, results as u64, 1, (results > 0) as u64);
        stats.harvested += (probes < n) as u64;
        probes += 1;
    }
    let committed = failures < n && !join.done() && entry.trials > 0;
    (entry, committed)
}

/// Joins S partition `s` with every R partition it has not met, scanning R in order.
fn exploit_s_partition(join: &mut Join<'_>, s: usize) {
    let mut cursor = ScanCursor::new();
    while cursor.position < join.r.partition_count() {
        let r = cursor.position;
        cursor.position += 1;
        if join.probed(r, s) {
            continue;
        }
        join.clock.seq_pages += 1;
        join.probe(r, s, Phase::Exploit(Side::S));
        if join.done() {
            return;
        }
    }
}
