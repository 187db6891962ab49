//! Reference strategies: nested loop, block nested loop, square ripple join
//! with a memory cap, and UCB-Scan.

use thiserror::Error;

use crate::engine::{Join, Phase, Probe};
use crate::storage::{random_access, sequential_next, ScanCursor};

pub fn run_nl(join: &mut Join<'_>) {
    run_bnl(join, 1);
}

/// Outer loop over R in blocks of `b` partitions, one scan of S per block.
pub fn run_bnl(join: &mut Join<'_>, b: usize) {
    let b = b.max(1);
    let mut r_cursor = ScanCursor::new();
    let mut block = Vec::with_capacity(b);
    loop {
        block.clear();
        while block.len() < b {
            match sequential_next(join.r, &mut r_cursor, &mut join.clock) {
                Some(p) => block.push(p.index),
                None => break,
            }
        }
        if block.is_empty() {
            return;
        }
        let mut s_cursor = ScanCursor::new();
        while let Some(ps) = sequential_next(join.s, &mut s_cursor, &mut join.clock) {
            let s = ps.index;
            for &r in &block {
                join.probe(r, s, Phase::Scan);
                if join.done() {
                    return;
                }
            }
        }
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("ripple join out of memory: {retained} partitions retained, cap {mem_cap}")]
pub struct OutOfMemory {
    pub retained: usize,
    pub mem_cap: usize,
}

/// Square nested-loop ripple join. Step n reads the n-th partition of each
/// relation and probes it against everything retained from the other side.
///
/// On `OutOfMemory` the join keeps whatever it produced so far.
pub fn run_ripple(join: &mut Join<'_>, mem_cap: usize) -> Result<(), OutOfMemory> {
    let mut r_cursor = ScanCursor::new();
    let mut s_cursor = ScanCursor::new();
    let mut held_r: Vec<usize> = Vec::new();
    let mut held_s: Vec<usize> = Vec::new();
    loop {
        if join.done() {
            return Ok(());
        }
        let nr = sequential_next(join.r, &mut r_cursor, &mut join.clock).map(|p| p.index);
        let ns = sequential_next(join.s, &mut s_cursor, &mut join.clock).map(|p| p.index);
        if nr.is_none() && ns.is_none() {
            return Ok(());
        }
        let retained = held_r.len() + held_s.len() + nr.is_some() as usize + ns.is_some() as usize;
        if retained > mem_cap {
            return Err(OutOfMemory { retained, mem_cap });
        }
        if let Some(r) = nr {
            for &s in &held_s {
                join.probe(r, s, Phase::Scan);
                if join.done() {
                    return Ok(());
                }
            }
            held_r.push(r);
        }
        if let Some(s) = ns {
            for &r in &held_r {
                join.probe(r, s, Phase::Scan);
                if join.done() {
                    return Ok(());
                }
            }
            held_s.push(s);
        }
    }
}

/// Per-partition statistics of UCB-Scan.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UcbArm {
    pub results: u64,
    pub trials: u64,
    /// S address of the first probe; the arm walks S from there, wrapping.
    pub start: usize,
}

impl UcbArm {
    pub fn mean(&self) -> f64 {
        self.results as f64 / self.trials.max(1) as f64
    }
}

#[derive(Debug, Clone, Default)]
pub struct UcbState {
    pub arms: Vec<UcbArm>,
    pub t: u64,
}

/// UCB1 index: mean + √(2 ln t / n).
pub fn ucb1_index(mean: f64, t: u64, n: u64) -> f64 {
    mean + (2.0 * (t.max(1) as f64).ln() / n as f64).sqrt()
}

/// One pass over R probing each partition against the next S partition, then
/// UCB1 selection with each chosen partition walking its own S cursor.
pub fn run_ucb_scan(join: &mut Join<'_>) -> UcbState {
    let ns = join.s.partition_count();
    let mut state = UcbState::default();
    if ns == 0 || join.done() {
        return state;
    }
    let mut r_cursor = ScanCursor::new();
    let mut s_cursor = ScanCursor::wrapping();
    while let Some(pr) = sequential_next(join.r, &mut r_cursor, &mut join.clock) {
        let r = pr.index;
        let s = sequential_next(join.s, &mut s_cursor, &mut join.clock).expect("S nonempty").index;
        let results = join.probe(r, s, Phase::Scan).results();
        state.arms.push(UcbArm { results: results as u64, trials: 1, start: s });
        state.t += 1;
        if join.done() {
            return state;
        }
    }
    let mut resident = state.arms.len().checked_sub(1);
    loop {
        let mut best: Option<(usize, f64)> = None;
        for (i, arm) in state.arms.iter().enumerate() {
            if arm.trials as usize >= ns {
                continue;
            }
            let idx = ucb1_index(arm.mean(), state.t, arm.trials);
            if best.is_none_or(|(_, b)| idx > b) {
                best = Some((i, idx));
            }
        }
        let Some((r, _)) = best else { return state };
        if resident != Some(r) {
            random_access(join.r, r, &mut join.clock).expect("arm address in range");
            resident = Some(r);
        }
        let arm = &state.arms[r];
        let s = (arm.start + arm.trials as usize) % ns;
        random_access(join.s, s, &mut join.clock).expect("wrapped address in range");
        let probe = join.probe(r, s, Phase::Scan);
        let arm = &mut state.arms[r];
        arm.trials += 1;
        if let Probe::Done { results } = probe {
            arm.results += results as u64;
        }
        state.t += 1;
        if join.done() {
            return state;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ucb_index_prefers_fewer_trials_at_equal_mean() {
        assert!(ucb1_index(0.5, 100, 2) > ucb1_index(0.5, 100, 20));
        assert_eq!(ucb1_index(1.0, 1, 1), 1.0);
    }
}
