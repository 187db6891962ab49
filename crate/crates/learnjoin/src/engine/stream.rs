use std::io::{self, Write};

/// One join result: tuple identities on both sides plus the cost at emission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ResultRow {
    pub r_addr: u32,
    pub r_off: u32,
    pub s_addr: u32,
    pub s_off: u32,
    pub cost_stamp: u64,
}

impl ResultRow {
    pub fn identity(&self) -> (u32, u32, u32, u32) {
        (self.r_addr, self.r_off, self.s_addr, self.s_off)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ResultStream {
    pub rows: Vec<ResultRow>,
}

impl ResultStream {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn stamps(&self) -> Vec<u64> {
        self.rows.iter().map(|r| r.cost_stamp).collect()
    }

    /// `r_addr,r_off,s_addr,s_off,cost_stamp` per line.
    pub fn export(&self, mut w: impl Write) -> io::Result<()> {
        for r in &self.rows {
            writeln!(w, "{},{},{},{},{}", r.r_addr, r.r_off, r.s_addr, r.s_off, r.cost_stamp)?;
        }
        Ok(())
    }
}

/// Collects results until `limit` is reached.
#[derive(Debug, Clone)]
pub struct ResultSink {
    pub stream: ResultStream,
    pub limit: usize,
}

impl ResultSink {
    pub fn new(limit: usize) -> Self {
        ResultSink { stream: ResultStream::default(), limit }
    }

    pub fn unbounded() -> Self {
        Self::new(usize::MAX)
    }

    pub fn is_full(&self) -> bool {
        self.stream.len() >= self.limit
    }

    pub fn len(&self) -> usize {
        self.stream.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stream.is_empty()
    }

    /// Returns false when the row was refused because the sink is full.
    pub fn push(&mut self, row: ResultRow) -> bool {
        if self.is_full() {
            return false;
        }
        self.stream.rows.push(row);
        true
    }
}
