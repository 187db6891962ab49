use crate::storage::DEFAULT_PARTITION_SIZE;

/// Cost units charged per event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostWeights {
    pub c_probe: u64,
    pub c_seq: u64,
    pub c_rand: u64,
}

impl CostWeights {
    /// One unit per probe; a sequential page costs a partition's worth of probes,
    /// a random page four times that.
    pub fn for_partition_size(partition_size: usize) -> Self {
        let p = partition_size.max(1) as u64;
        CostWeights { c_probe: 1, c_seq: p, c_rand: 4 * p }
    }
}

impl Default for CostWeights {
    fn default() -> Self {
        Self::for_partition_size(DEFAULT_PARTITION_SIZE)
    }
}

/// Deterministic stand-in for elapsed time.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CostClock {
    pub probes: u64,
    pub seq_pages: u64,
    pub rand_pages: u64,
    pub weights: CostWeights,
}

impl CostClock {
    pub fn new(weights: CostWeights) -> Self {
        CostClock { weights, ..Self::default() }
    }

    pub fn total(&self) -> u64 {
        let w = &self.weights;
        w.c_probe * self.probes + w.c_seq * self.seq_pages + w.c_rand * self.rand_pages
    }
}
