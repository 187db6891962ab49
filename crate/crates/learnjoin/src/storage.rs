//! Partitioned relations with modeled I/O.
//!
//! Relations live fully in memory; every read goes through a [`ScanCursor`]
//! or [`random_access`] so the [`CostClock`] sees it.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::engine::CostClock;

pub const DEFAULT_PARTITION_SIZE: usize = 320;

#[derive(Debug, Error)]
pub enum StorageError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("row {row}: {reason}")]
    Malformed { row: usize, reason: String },
    #[error("partition address {address} out of range (count {count})")]
    Address { address: usize, count: usize },
    #[error("partition size must be at least 1")]
    PartitionSize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tuple {
    pub key: u64,
    pub skey: Option<String>,
    pub payload: Vec<u8>,
}

impl Tuple {
    pub fn new(key: u64) -> Self {
        Tuple { key, skey: None, payload: Vec::new() }
    }

    pub fn with_skey(key: u64, skey: impl Into<String>) -> Self {
        Tuple { key, skey: Some(skey.into()), payload: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub index: usize,
    pub tuples: Vec<Tuple>,
}

impl Partition {
    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }
}

/// Immutable partitioned relation.
#[derive(Debug, Clone)]
pub struct RelationStore {
    pub name: String,
    pub partitions: Vec<Partition>,
    pub partition_size: usize,
    pub tuple_count: usize,
}

impl RelationStore {
    /// Groups consecutive tuples into partitions of `partition_size`.
    pub fn from_tuples(
        name: impl Into<String>,
        tuples: Vec<Tuple>,
        partition_size: usize,
    ) -> Result<Self, StorageError> {
        if partition_size == 0 {
            return Err(StorageError::PartitionSize);
        }
        let tuple_count = tuples.len();
        let mut partitions = Vec::with_capacity(tuple_count.div_ceil(partition_size));
        let mut it = tuples.into_iter().peekable();
        while it.peek().is_some() {
            let chunk: Vec<Tuple> = it.by_ref().take(partition_size).collect();
            partitions.push(Partition { index: partitions.len(), tuples: chunk });
        }
        Ok(RelationStore { name: name.into(), partitions, partition_size, tuple_count })
    }

    pub fn partition_count(&self) -> usize {
        self.partitions.len()
    }

    pub fn partition(&self, address: usize) -> &Partition {
        &self.partitions[address]
    }

    pub fn has_skeys(&self) -> bool {
        self.partitions.iter().flat_map(|p| &p.tuples).all(|t| t.skey.is_some())
    }

    /// Mean number of tuples per partition.
    pub fn mean_partition_len(&self) -> f64 {
        if self.partitions.is_empty() {
            0.0
        } else {
            self.tuple_count as f64 / self.partitions.len() as f64
        }
    }
}

/// Sequential reader over one relation.
#[derive(Debug, Clone, Default)]
pub struct ScanCursor {
    pub position: usize,
    pub wrap_enabled: bool,
    pub wraps: u64,
}

impl ScanCursor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn wrapping() -> Self {
        ScanCursor { wrap_enabled: true, ..Self::default() }
    }

    pub fn starting_at(position: usize, wrap_enabled: bool) -> Self {
        ScanCursor { position, wrap_enabled, wraps: 0 }
    }
}

/// Returns the partition under the cursor and advances it; charges one sequential page.
pub fn sequential_next<'a>(
    store: &'a RelationStore,
    cursor: &mut ScanCursor,
    clock: &mut CostClock,
) -> Option<&'a Partition> {
    let n = store.partition_count();
    if n == 0 {
        return None;
    }
    if cursor.position >= n {
        if !cursor.wrap_enabled {
            return None;
        }
        cursor.position = 0;
        cursor.wraps += 1;
    }
    let p = &store.partitions[cursor.position];
    cursor.position += 1;
    clock.seq_pages += 1;
    Some(p)
}

/// Reads a partition by address; charges one random page.
pub fn random_access<'a>(
    store: &'a RelationStore,
    address: usize,
    clock: &mut CostClock,
) -> Result<&'a Partition, StorageError> {
    let count = store.partition_count();
    let p = store.partitions.get(address).ok_or(StorageError::Address { address, count })?;
    clock.rand_pages += 1;
    Ok(p)
}

/// Parses `key,skey,payload_len` rows.
pub fn parse_relation(reader: impl BufRead) -> Result<Vec<Tuple>, StorageError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let row = i + 1;
        if line.is_empty() {
            continue;
        }
        let bad = |reason: &str| StorageError::Malformed { row, reason: reason.to_string() };
        let mut fields = line.split(',');
        let (Some(k), Some(sk), Some(pl), None) = (fields.next(), fields.next(), fields.next(), fields.next()) else {
            return Err(bad("expected 3 comma-separated fields"));
        };
        let key = k.parse::<u64>().map_err(|_| bad("key is not a non-negative integer"))?;
        if !sk.chars().all(|c| c.is_ascii_alphanumeric()) {
            return Err(bad("skey must be alphanumeric"));
        }
        let payload_len = pl.parse::<usize>().map_err(|_| bad("payload_len is not a count"))?;
        out.push(Tuple { key, skey: (!sk.is_empty()).then(|| sk.to_string()), payload: vec![0; payload_len] });
    }
    Ok(out)
}

pub fn load_relation(path: &Path, partition_size: usize) -> Result<RelationStore, StorageError> {
    if partition_size == 0 {
        return Err(StorageError::PartitionSize);
    }
    let tuples = parse_relation(BufReader::new(File::open(path)?))?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    RelationStore::from_tuples(name, tuples, partition_size)
}

pub fn write_relation(path: &Path, tuples: &[Tuple]) -> Result<(), StorageError> {
    let mut w = BufWriter::new(File::create(path)?);
    for t in tuples {
        writeln!(w, "{},{},{}", t.key, t.skey.as_deref().unwrap_or(""), t.payload.len())?;
    }
    w.flush()?;
    Ok(())
}
