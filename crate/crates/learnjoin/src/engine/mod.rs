//! Shared join machinery: predicates, probing, dedup, cost and result streams.

mod clock;
mod dedup;
mod metrics;
mod predicate;
mod stream;

pub use clock::{CostClock, CostWeights};
pub use dedup::{DedupLedger, IntervalSet};
pub use metrics::{discounted_average, failure_proportion};
pub use predicate::{within_one_edit, JoinPredicate, PredicateError};
pub use stream::{ResultRow, ResultSink, ResultStream};

use crate::storage::{Partition, RelationStore};

/// Nested-loop probe of one partition pair. Skips pairs already in the ledger.
///
/// Stops evaluating as soon as the sink fills; a pair cut short that way is
/// not recorded, so the ledger only ever holds fully probed pairs.
pub fn probe_partitions(
    pr: &Partition,
    ps: &Partition,
    pred: &JoinPredicate,
    ledger: &mut DedupLedger,
    clock: &mut CostClock,
    sink: &mut ResultSink,
) -> usize {
    if ledger.contains(pr.index, ps.index) || sink.is_full() {
        return 0;
    }
    let mut emitted = 0;
    for (ro, rt) in pr.tuples.iter().enumerate() {
        for (so, st) in ps.tuples.iter().enumerate() {
            clock.probes += 1;
            if pred.matches(rt, st) {
                sink.push(ResultRow {
                    r_addr: pr.index as u32,
                    r_off: ro as u32,
                    s_addr: ps.index as u32,
                    s_off: so as u32,
                    cost_stamp: clock.total(),
                });
                emitted += 1;
                if sink.is_full() {
                    let last = ro + 1 == pr.len() && so + 1 == ps.len();
                    if last {
                        ledger.insert(pr.index, ps.index);
                    }
                    return emitted;
                }
            }
        }
    }
    ledger.insert(pr.index, ps.index);
    emitted
}

/// Which relation an agent scans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    R,
    S,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::R => Side::S,
            Side::S => Side::R,
        }
    }

    /// Orders an (actor, partner) address pair as (r, s).
    pub fn pair(self, actor: usize, partner: usize) -> (usize, usize) {
        match self {
            Side::R => (actor, partner),
            Side::S => (partner, actor),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Side::R => "R",
            Side::S => "S",
        }
    }
}

/// Tuple probes split by what the strategy was doing when it made them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PhaseProbes {
    pub explore_r: u64,
    pub explore_s: u64,
    pub exploit_r: u64,
    pub exploit_s: u64,
    pub scan: u64,
}

impl PhaseProbes {
    pub fn exploration(&self) -> u64 {
        self.explore_r + self.explore_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Explore(Side),
    Exploit(Side),
    Scan,
}

/// Result of one partition-pair probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Probe {
    /// Pair was already probed (or the sink is full); nothing evaluated.
    Skipped,
    Done {
        results: usize,
    },
}

impl Probe {
    pub fn results(self) -> usize {
        match self {
            Probe::Skipped => 0,
            Probe::Done { results } => results,
        }
    }
}

/// Mutable state of one join run over two relations.
#[derive(Debug)]
pub struct Join<'a> {
    pub r: &'a RelationStore,
    pub s: &'a RelationStore,
    pub pred: &'a JoinPredicate,
    pub clock: CostClock,
    pub ledger: DedupLedger,
    pub sink: ResultSink,
    pub phases: PhaseProbes,
}

impl<'a> Join<'a> {
    pub fn new(
        r: &'a RelationStore,
        s: &'a RelationStore,
        pred: &'a JoinPredicate,
        k: usize,
        weights: CostWeights,
    ) -> Self {
        Join {
            r,
            s,
            pred,
            clock: CostClock::new(weights),
            ledger: DedupLedger::new(r.partition_count()),
            sink: ResultSink::new(k),
            phases: PhaseProbes::default(),
        }
    }

    pub fn store(&self, side: Side) -> &'a RelationStore {
        match side {
            Side::R => self.r,
            Side::S => self.s,
        }
    }

    pub fn done(&self) -> bool {
        self.sink.is_full()
    }

    pub fn total_pairs(&self) -> usize {
        self.r.partition_count() * self.s.partition_count()
    }

    pub fn complete(&self) -> bool {
        self.ledger.pairs() >= self.total_pairs()
    }

    pub fn probed(&self, r_addr: usize, s_addr: usize) -> bool {
        self.ledger.contains(r_addr, s_addr)
    }

    /// Probes R partition `r_addr` against S partition `s_addr`. Page reads are
    /// charged by the caller, which knows how each partition was fetched.
    pub fn probe(&mut self, r_addr: usize, s_addr: usize, phase: Phase) -> Probe {
        if self.ledger.contains(r_addr, s_addr) || self.sink.is_full() {
            return Probe::Skipped;
        }
        let before = self.clock.probes;
        let results = probe_partitions(
            self.r.partition(r_addr),
            self.s.partition(s_addr),
            self.pred,
            &mut self.ledger,
            &mut self.clock,
            &mut self.sink,
        );
        let spent = self.clock.probes - before;
        let slot = match phase {
            Phase::Explore(Side::R) => &mut self.phases.explore_r,
            Phase::Explore(Side::S) => &mut self.phases.explore_s,
            Phase::Exploit(Side::R) => &mut self.phases.exploit_r,
            Phase::Exploit(Side::S) => &mut self.phases.exploit_s,
            Phase::Scan => &mut self.phases.scan,
        };
        *slot += spent;
        Probe::Done { results }
    }

    pub fn into_stream(self) -> ResultStream {
        self.sink.stream
    }
}

/// Summary of a finished run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub stream: ResultStream,
    pub clock: CostClock,
    pub phases: PhaseProbes,
}

impl From<Join<'_>> for RunOutput {
    fn from(j: Join<'_>) -> Self {
        RunOutput { stream: j.sink.stream, clock: j.clock, phases: j.phases }
    }
}
