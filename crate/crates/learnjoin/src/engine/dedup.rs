/// Set of partition addresses stored as sorted, merged half-open intervals.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IntervalSet {
    spans: Vec<(usize, usize)>,
    count: usize,
}

impl IntervalSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn spans(&self) -> &[(usize, usize)] {
        &self.spans
    }

    pub fn contains(&self, x: usize) -> bool {
        let i = self.spans.partition_point(|&(lo, _)| lo <= x);
        i > 0 && self.spans[i - 1].1 > x
    }

    /// Returns false if `x` was already present.
    pub fn insert(&mut self, x: usize) -> bool {
        let i = self.spans.partition_point(|&(lo, _)| lo <= x);
        if i > 0 && self.spans[i - 1].1 > x {
            return false;
        }
        let left = i > 0 && self.spans[i - 1].1 == x;
        let right = i < self.spans.len() && self.spans[i].0 == x + 1;
        match (left, right) {
            (true, true) => {
                self.spans[i - 1].1 = self.spans[i].1;
                self.spans.remove(i);
            }
            (true, false) => self.spans[i - 1].1 = x + 1,
            (false, true) => self.spans[i].0 = x,
            (false, false) => self.spans.insert(i, (x, x + 1)),
        }
        self.count += 1;
        true
    }

    /// Smallest member-free address in `[from, end)`.
    pub fn next_gap(&self, from: usize, end: usize) -> Option<usize> {
        let mut x = from;
        let mut i = self.spans.partition_point(|&(_, hi)| hi <= x);
        while x < end {
            match self.spans.get(i) {
                Some(&(lo, hi)) if lo <= x => {
                    x = hi;
                    i += 1;
                }
                _ => return Some(x),
            }
        }
        None
    }

    /// The `n`-th address in `[0, end)` not in the set.
    pub fn nth_gap(&self, mut n: usize, end: usize) -> Option<usize> {
        let mut prev = 0;
        for &(lo, hi) in &self.spans {
            if lo >= end {
                break;
            }
            let gap = lo - prev;
            if n < gap {
                return Some(prev + n);
            }
            n -= gap;
            prev = hi;
        }
        (prev + n < end).then_some(prev + n)
    }

    pub fn covers(&self, end: usize) -> bool {
        self.next_gap(0, end).is_none()
    }
}

/// Partition pairs already probed, keyed by R address.
#[derive(Debug, Clone, Default)]
pub struct DedupLedger {
    by_r: Vec<IntervalSet>,
    pairs: usize,
}

impl DedupLedger {
    pub fn new(r_partitions: usize) -> Self {
        DedupLedger { by_r: vec![IntervalSet::new(); r_partitions], pairs: 0 }
    }

    pub fn contains(&self, r: usize, s: usize) -> bool {
        self.by_r.get(r).is_some_and(|set| set.contains(s))
    }

    pub fn insert(&mut self, r: usize, s: usize) -> bool {
        if r >= self.by_r.len() {
            self.by_r.resize(r + 1, IntervalSet::new());
        }
        let fresh = self.by_r[r].insert(s);
        self.pairs += fresh as usize;
        fresh
    }

    pub fn pairs(&self) -> usize {
        self.pairs
    }

    pub fn row(&self, r: usize) -> Option<&IntervalSet> {
        self.by_r.get(r)
    }
}
