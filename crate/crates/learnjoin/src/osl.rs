//! Online sequential learning: N-Failure exploration over sequentially scanned
//! partitions, exploitation of the best explored partition, and the failure
//! proportion bounds for the Bernoulli reward model.

use std::fmt::Write as _;

use crate::datagen::{BernoulliMatrix, DatagenError};
use crate::engine::{IntervalSet, Join, Phase, Probe, Side};
use crate::scalar::Real;
use crate::storage::{random_access, sequential_next, ScanCursor};

/// What the learner knows about one explored partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewardEntry {
    pub address: usize,
    /// Results produced by probes of this partition.
    pub successes: u64,
    /// Partner partitions probed.
    pub trials: u64,
    /// Probes that produced at least one result.
    pub hits: u64,
    /// Result-producing probes since the last empty one.
    pub run: u64,
    pub joined: IntervalSet,
    pub exploited: bool,
}

impl RewardEntry {
    pub fn new(address: usize) -> Self {
        RewardEntry { address, successes: 0, trials: 0, hits: 0, run: 0, joined: IntervalSet::new(), exploited: false }
    }

    /// Laplace-smoothed results per probe.
    pub fn smoothed_rate(&self) -> f64 {
        (self.successes as f64 + 1.0) / (self.trials as f64 + 2.0)
    }

    pub fn record(&mut self, results: usize) {
        self.trials += 1;
        self.successes += results as u64;
        self.hits += (results > 0) as u64;
        self.run = if results > 0 { self.run + 1 } else { 0 };
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OslParams {
    /// Failure budget per exploration.
    pub n: usize,
    /// Exploration window; `None` means ⌈√(partner partitions)⌉.
    pub m: Option<usize>,
    pub swap_enabled: bool,
    /// Stop exploring once a partition produces results in `window` consecutive probes.
    pub early_commit: bool,
    pub seed: u64,
}

impl Default for OslParams {
    fn default() -> Self {
        OslParams { n: 10, m: None, swap_enabled: true, early_commit: true, seed: 0 }
    }
}

impl OslParams {
    pub fn window(&self, partner_partitions: usize) -> usize {
        self.m.unwrap_or_else(|| (partner_partitions as f64).sqrt().ceil() as usize).max(1)
    }
}

/// Explores `actor` by probing it against partitions from `partner_cursor`
/// until `n` probes have produced nothing or the partner relation is covered.
///
/// Failures are cumulative and never reset by a success. Pairs already probed
/// by someone else are marked joined but are neither a success nor a failure.
pub fn n_failure(
    join: &mut Join<'_>,
    side: Side,
    actor: usize,
    partner_cursor: &mut ScanCursor,
    n: usize,
) -> RewardEntry {
    n_failure_until(join, side, actor, partner_cursor, n, None)
}

/// [`n_failure`] that also stops once the entry's run of result-producing
/// probes reaches `commit_run`.
pub fn n_failure_until(
    join: &mut Join<'_>,
    side: Side,
    actor: usize,
    partner_cursor: &mut ScanCursor,
    n: usize,
    commit_run: Option<u64>,
) -> RewardEntry {
    let partner = join.store(side.other());
    let np = partner.partition_count();
    let mut entry = RewardEntry::new(actor);
    let mut failures = 0;
    while failures < n && !entry.joined.covers(np) && !join.done() {
        if commit_run.is_some_and(|c| entry.run >= c) {
            break;
        }
        let Some(p) = sequential_next(partner, partner_cursor, &mut join.clock) else { break };
        if !entry.joined.insert(p.index) {
            continue;
        }
        let (r, s) = side.pair(actor, p.index);
        if let Probe::Done { results } = join.probe(r, s, Phase::Explore(side)) {
            entry.record(results);
            if results == 0 {
                failures += 1;
            }
        }
    }
    entry
}

/// Index of the unexploited entry with the most successes; ties go to the lowest address.
pub fn argmax_reward(table: &[RewardEntry]) -> Option<usize> {
    table
        .iter()
        .enumerate()
        .filter(|(_, e)| !e.exploited)
        .max_by(|(_, a), (_, b)| a.successes.cmp(&b.successes).then(b.address.cmp(&a.address)))
        .map(|(i, _)| i)
}

/// Exploitation choice: the argmax, or the most recently explored open entry
/// when nothing has produced a result yet.
pub fn choose_exploit(table: &[RewardEntry], last_explored: Option<usize>) -> Option<usize> {
    let best = argmax_reward(table)?;
    if table[best].successes > 0 {
        return Some(best);
    }
    match last_explored {
        Some(i) if !table[i].exploited => Some(i),
        _ => table.iter().rposition(|e| !e.exploited),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExploitOutcome {
    Completed,
    /// Paused in favour of the table entry at this index.
    Swapped(usize),
    /// The sink filled.
    Stopped,
}

fn best_other_rate(table: &[RewardEntry], skip: usize) -> Option<usize> {
    table
        .iter()
        .enumerate()
        .filter(|(i, e)| *i != skip && !e.exploited)
        .max_by(|(_, a), (_, b)| a.smoothed_rate().total_cmp(&b.smoothed_rate()).then(b.address.cmp(&a.address)))
        .map(|(i, _)| i)
}

/// Joins `table[idx]` with every partner partition it has not met yet, scanning
/// the partner relation from its start. Only partitions actually probed are
/// charged as sequential reads.
pub fn exploit(
    join: &mut Join<'_>,
    side: Side,
    table: &mut [RewardEntry],
    idx: usize,
    swap_enabled: bool,
) -> ExploitOutcome {
    let np = join.store(side.other()).partition_count();
    let actor = table[idx].address;
    let mut pos = 0;
    loop {
        if join.done() {
            return ExploitOutcome::Stopped;
        }
        let Some(p) = table[idx].joined.next_gap(pos, np) else {
            table[idx].exploited = true;
            return ExploitOutcome::Completed;
        };
        pos = p + 1;
        let (r, s) = side.pair(actor, p);
        if join.probed(r, s) {
            table[idx].joined.insert(p);
            continue;
        }
        join.clock.seq_pages += 1;
        let probe = join.probe(r, s, Phase::Exploit(side));
        let Probe::Done { results } = probe else { return ExploitOutcome::Stopped };
        if join.done() && !join.probed(r, s) {
            return ExploitOutcome::Stopped;
        }
        table[idx].joined.insert(p);
        table[idx].record(results);
        if swap_enabled {
            if let Some(other) = best_other_rate(table, idx) {
                if table[idx].smoothed_rate() < table[other].smoothed_rate() {
                    return ExploitOutcome::Swapped(other);
                }
            }
        }
    }
}

/// One line of a super-round trace.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrace {
    pub round: usize,
    pub explorer: Side,
    /// (address, reward) of partitions explored this round.
    pub explored: Vec<(usize, u64)>,
    pub exploited: Option<usize>,
    pub results_so_far: usize,
    pub cost: u64,
}

/// `round,explorer,explored_addr,reward,exploited_addr,results_so_far,cost`;
/// several explorations in one round are `;`-separated.
pub fn export_trace(trace: &[RoundTrace]) -> String {
    let mut out = String::new();
    for t in trace {
        let addrs: Vec<String> = t.explored.iter().map(|(a, _)| a.to_string()).collect();
        let rewards: Vec<String> = t.explored.iter().map(|(_, r)| r.to_string()).collect();
        let exploited = t.exploited.map(|a| a.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            t.round,
            t.explorer.label(),
            addrs.join(";"),
            rewards.join(";"),
            exploited,
            t.results_so_far,
            t.cost
        );
    }
    out
}

/// One agent's learning state: its reward table plus scan positions.
#[derive(Debug, Clone)]
pub struct Learner {
    pub side: Side,
    pub table: Vec<RewardEntry>,
    /// Sequential scan over the learner's own relation (no wrap).
    pub own: ScanCursor,
    /// Sequential scan over the partner relation for exploration (wraps).
    pub partner: ScanCursor,
    /// Address of the own-side partition currently in memory.
    pub resident: Option<usize>,
    pub last_explored: Option<usize>,
    pub explorations: usize,
    /// Entry that earned an early commit and is exploited next.
    pub committed: Option<usize>,
}

impl Learner {
    pub fn new(side: Side) -> Self {
        Learner {
            side,
            table: Vec::new(),
            own: ScanCursor::new(),
            partner: ScanCursor::wrapping(),
            resident: None,
            last_explored: None,
            explorations: 0,
            committed: None,
        }
    }

    /// Reads the next fresh partition and explores it. `None` once the own relation is exhausted.
    pub fn explore_next(&mut self, join: &mut Join<'_>, n: usize) -> Option<(usize, u64)> {
        self.explore_next_until(join, n, None)
    }

    /// Like [`Learner::explore_next`]; an entry whose run reaches `commit_run`
    /// becomes the next exploitation.
    pub fn explore_next_until(
        &mut self,
        join: &mut Join<'_>,
        n: usize,
        commit_run: Option<u64>,
    ) -> Option<(usize, u64)> {
        let store = join.store(self.side);
        let addr = sequential_next(store, &mut self.own, &mut join.clock)?.index;
        self.resident = Some(addr);
        let entry = n_failure_until(join, self.side, addr, &mut self.partner, n, commit_run);
        let reward = entry.successes;
        let committed = commit_run.is_some_and(|c| entry.run >= c);
        self.table.push(entry);
        self.last_explored = Some(self.table.len() - 1);
        if committed {
            self.committed = self.last_explored;
        }
        self.explorations += 1;
        Some((addr, reward))
    }

    /// Explores up to `want` fresh partitions, stopping early on a commit.
    pub fn explore_window(&mut self, join: &mut Join<'_>, params: &OslParams, want: usize) -> Vec<(usize, u64)> {
        let window = params.window(join.store(self.side.other()).partition_count());
        let commit_run = params.early_commit.then_some(window as u64);
        let mut explored = Vec::new();
        for _ in 0..want {
            if join.done() {
                break;
            }
            match self.explore_next_until(join, params.n, commit_run) {
                Some(x) => explored.push(x),
                None => break,
            }
            if self.committed.is_some() {
                break;
            }
        }
        explored
    }

    pub fn exhausted(&self, join: &Join<'_>) -> bool {
        self.own.position >= join.store(self.side).partition_count()
    }

    pub fn has_open_entries(&self) -> bool {
        self.table.iter().any(|e| !e.exploited)
    }

    /// Exploits the current choice, following swaps until one entry completes.
    /// Returns the address first chosen, or `None` if nothing was open.
    pub fn exploit_best(&mut self, join: &mut Join<'_>, swap_enabled: bool) -> Option<usize> {
        let committed = self.committed.take().filter(|&i| !self.table[i].exploited);
        let mut idx = committed.or_else(|| choose_exploit(&self.table, self.last_explored))?;
        let first = self.table[idx].address;
        loop {
            let addr = self.table[idx].address;
            if self.resident != Some(addr) {
                random_access(join.store(self.side), addr, &mut join.clock).expect("table address in range");
                self.resident = Some(addr);
            }
            match exploit(join, self.side, &mut self.table, idx, swap_enabled) {
                ExploitOutcome::Completed | ExploitOutcome::Stopped => return Some(first),
                ExploitOutcome::Swapped(next) => idx = next,
            }
        }
    }
}

/// Runs OSL until the sink holds `k` results or the join is complete.
pub fn run_osl(join: &mut Join<'_>, params: &OslParams) -> Vec<RoundTrace> {
    let mut trace = Vec::new();
    if join.done() {
        return trace;
    }
    let m = params.window(join.s.partition_count());
    let mut learner = Learner::new(Side::R);
    let mut round = 0;
    while !join.done() && !join.complete() {
        round += 1;
        let want = if round == 1 { m } else { 1 };
        let explored = learner.explore_window(join, params, want);
        let exploited = if join.done() { None } else { learner.exploit_best(join, params.swap_enabled) };
        trace.push(RoundTrace {
            round,
            explorer: Side::R,
            explored,
            exploited,
            results_so_far: join.sink.len(),
            cost: join.clock.total(),
        });
        if exploited.is_none() && learner.exhausted(join) {
            break;
        }
    }
    trace
}

/// Failure proportion bounds for success probabilities drawn from U[a, b].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds<T> {
    pub lower: T,
    pub upper: T,
    /// Exploration window that attains the upper bound.
    pub m_star: usize,
    /// Join operations per super-round for a = 0, b = 1.
    pub probe_bound: T,
}

pub fn theoretical_bounds<T: Real>(a: T, b: T, s_count: usize) -> Result<Bounds<T>, DatagenError> {
    if !(T::zero() <= a && a <= b && b <= T::one()) {
        return Err(DatagenError::Domain(format!("need 0 <= a <= b <= 1, got a={a} b={b}")));
    }
    if s_count == 0 {
        return Err(DatagenError::Domain("s_count must be at least 1".into()));
    }
    let s = T::count(s_count as u64);
    let two = T::of(2.0);
    let spread = b - a;
    let base = T::one() - b;
    let m = (s * spread).sqrt().ceil().to_usize().unwrap_or(0).max(1);
    Ok(Bounds {
        lower: base + spread * (two / s).sqrt(),
        upper: base + two * (spread / s).sqrt(),
        m_star: m,
        probe_bound: s - s.sqrt(),
    })
}

/// Outcome of the super-round simulation on the Bernoulli model.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundSimulation<T> {
    pub rounds: usize,
    /// Mean over super-rounds of failed probes / probes.
    pub mean_failure: T,
    /// Same, counting only exploitation probes.
    pub mean_exploit_failure: T,
    pub mean_probes: T,
}

/// Each super-round explores `m` fresh actions with N-Failure, then exploits
/// the argmax for the rest of a `s_count`-probe horizon.
#[allow(clippy::too_many_arguments)]
pub fn simulate_super_rounds<T: Real>(
    a: T,
    b: T,
    s_count: usize,
    n: usize,
    m: usize,
    rounds: usize,
    early_commit: bool,
    seed: u64,
) -> Result<BoundSimulation<T>, DatagenError> {
    let mut model = BernoulliMatrix::new(rounds * m, s_count, a, b, seed)?;
    let (mut fail_sum, mut exploit_sum, mut probe_sum) = (T::zero(), T::zero(), T::zero());
    for round in 0..rounds {
        let mut probes = 0usize;
        let mut failures = 0usize;
        let mut table: Vec<(usize, u64, usize)> = Vec::with_capacity(m);
        let mut committed = None;
        for j in 0..m {
            let action = round * m + j;
            let (mut succ, mut fails, mut trials, mut run) = (0u64, 0usize, 0usize, 0usize);
            while fails < n && trials < s_count && probes < s_count && !(early_commit && run >= m) {
                trials += 1;
                probes += 1;
                if model.probe(action) {
                    succ += 1;
                    run += 1;
                } else {
                    fails += 1;
                    run = 0;
                }
            }
            failures += fails;
            table.push((action, succ, trials));
            if early_commit && run >= m {
                committed = Some(j);
                break;
            }
            if probes >= s_count {
                break;
            }
        }
        let best = committed.unwrap_or_else(|| {
            let best = table
                .iter()
                .enumerate()
                .max_by(|(i, x), (j, y)| x.1.cmp(&y.1).then(j.cmp(i)))
                .map(|(i, _)| i)
                .expect("m >= 1");
            if table[best].1 == 0 {
                table.len() - 1
            } else {
                best
            }
        });
        let (action, _, trials) = table[best];
        let remaining = s_count.saturating_sub(trials).min(s_count - probes);
        let mut exploit_fail = 0usize;
        for _ in 0..remaining {
            if !model.probe(action) {
                exploit_fail += 1;
            }
        }
        probes += remaining;
        failures += exploit_fail;
        fail_sum = fail_sum + T::count(failures as u64) / T::count(probes as u64);
        if remaining > 0 {
            exploit_sum = exploit_sum + T::count(exploit_fail as u64) / T::count(remaining as u64);
        }
        probe_sum = probe_sum + T::count(probes as u64);
    }
    let r = T::count(rounds as u64);
    Ok(BoundSimulation {
        rounds,
        mean_failure: fail_sum / r,
        mean_exploit_failure: exploit_sum / r,
        mean_probes: probe_sum / r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn entry(address: usize, successes: u64) -> RewardEntry {
        RewardEntry { successes, ..RewardEntry::new(address) }
    }

    #[test]
    fn argmax_examples() {
        assert_eq!(argmax_reward(&[entry(0, 3), entry(1, 5)]), Some(1));
        assert_eq!(argmax_reward(&[entry(2, 3), entry(0, 3)]), Some(1));
        let mut done = entry(0, 9);
        done.exploited = true;
        assert_eq!(argmax_reward(&[done]), None);
        assert_eq!(argmax_reward(&[]), None);
    }

    #[test]
    fn zero_reward_falls_back_to_last_explored() {
        let t = [entry(4, 0), entry(7, 0), entry(9, 0)];
        assert_eq!(choose_exploit(&t, Some(1)), Some(1));
        assert_eq!(choose_exploit(&t, None), Some(2));
    }

    #[test]
    fn bound_examples() {
        let b = theoretical_bounds(0.0_f64, 1.0, 8).unwrap();
        assert_relative_eq!(b.lower, 0.5, epsilon = 1e-12);
        let b = theoretical_bounds(0.3_f64, 0.3, 100).unwrap();
        assert_relative_eq!(b.lower, 0.7, epsilon = 1e-12);
        assert_relative_eq!(b.upper, 0.7, epsilon = 1e-12);
        assert_eq!(b.m_star, 1);
        let b = theoretical_bounds(0.0_f64, 1.0, 10_000).unwrap();
        assert_relative_eq!(b.upper, 0.02, epsilon = 1e-12);
        assert_relative_eq!(b.lower, 0.014_142_135_623_730_95, epsilon = 1e-12);
        assert_eq!(b.m_star, 100);
        assert_relative_eq!(b.probe_bound, 9900.0);
        assert!(theoretical_bounds(0.6_f64, 0.5, 10).is_err());
    }
}
