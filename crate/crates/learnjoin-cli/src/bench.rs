//! Benchmark grids: method × z × k, repeated over freshly generated data.
//!
//! Grid files hold one `key=value` per line; list values are comma separated.
//! Blank lines and lines starting with `#` are ignored.
//!
//! ```text
//! methods=osl,nl
//! z=0,1.5
//! k=100,1000,all
//! reps=3
//! r=1000
//! s=10000
//! ```

use std::collections::HashMap;

use learnjoin::datagen::{generate, GenConfig, KeyMode, Multiplicity};
use learnjoin::engine::CostWeights;
use learnjoin::storage::RelationStore;
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{Method, PredicateKind, RunConfig};
use crate::exec::execute;
use crate::record::RunRecord;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("line {line}: expected key=value")]
    Syntax { line: usize },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value {value:?} for {key}")]
    Value { line: usize, key: String, value: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub methods: Vec<Method>,
    pub z: Vec<f64>,
    pub k: Vec<Option<usize>>,
    pub reps: usize,
    pub r_tuples: usize,
    pub s_tuples: usize,
    /// Defaults to `r_tuples`.
    pub keys: Option<usize>,
    pub multiplicity: Multiplicity,
    pub edit_rate: f64,
    /// Repetition `i` uses data and run seed `seed + i`.
    pub seed: u64,
    /// Method parameters shared by every cell.
    pub base: RunConfig,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            methods: Vec::new(),
            z: Vec::new(),
            k: Vec::new(),
            reps: 3,
            r_tuples: 1000,
            s_tuples: 10_000,
            keys: None,
            multiplicity: Multiplicity::OneToMany,
            edit_rate: 0.0,
            seed: 0,
            base: RunConfig::new(Method::Nl),
        }
    }
}

fn list<T>(v: &str, f: impl Fn(&str) -> Option<T>) -> Option<Vec<T>> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(f).collect()
}

pub fn parse_k(s: &str) -> Option<Option<usize>> {
    if s == "all" {
        Some(None)
    } else {
        s.parse().ok().map(Some)
    }
}

pub fn parse_multiplicity(s: &str) -> Option<Multiplicity> {
    match s {
        "1n" => Some(Multiplicity::OneToMany),
        "mn" => Some(Multiplicity::ManyToMany),
        _ => None,
    }
}

impl Grid {
    pub fn parse(text: &str) -> Result<Grid, GridError> {
        let mut g = Grid::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let l = raw.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            let (key, value) = l.split_once('=').ok_or(GridError::Syntax { line })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = || GridError::Value { line, key: key.to_string(), value: value.to_string() };
            let one = |v: &str| v.parse::<usize>().ok();
            let b = &mut g.base;
            match key {
                "methods" => g.methods = list(value, Method::parse).ok_or_else(bad)?,
                "z" => g.z = list(value, |s| s.parse().ok()).ok_or_else(bad)?,
                "k" => g.k = list(value, parse_k).ok_or_else(bad)?,
                "reps" => g.reps = one(value).ok_or_else(bad)?,
                "r" => g.r_tuples = one(value).ok_or_else(bad)?,
                "s" => g.s_tuples = one(value).ok_or_else(bad)?,
                "keys" => g.keys = Some(one(value).ok_or_else(bad)?),
                "mult" => g.multiplicity = parse_multiplicity(value).ok_or_else(bad)?,
                "edit_rate" => g.edit_rate = value.parse().map_err(|_| bad())?,
                "seed" => g.seed = value.parse().map_err(|_| bad())?,
                "pred" => {
                    b.predicate = match value {
                        "eq" => PredicateKind::Eq,
                        "edit" => PredicateKind::Edit,
                        _ => return Err(bad()),
                    }
                }
                "partition_size" => b.partition_size = one(value).ok_or_else(bad)?,
                "gamma" => b.gamma = value.parse().map_err(|_| bad())?,
                "n" => b.n = one(value).ok_or_else(bad)?,
                "m" => b.m = Some(one(value).ok_or_else(bad)?),
                "b" => b.b = one(value).ok_or_else(bad)?,
                "mem_cap" => b.mem_cap = one(value).ok_or_else(bad)?,
                "eps0" => b.eps0 = value.parse().map_err(|_| bad())?,
                "max_steps" => b.max_steps = Some(one(value).ok_or_else(bad)?),
                _ => return Err(GridError::UnknownKey { line, key: key.to_string() }),
            }
        }
        Ok(g)
    }

    pub fn cells(&self) -> Vec<(Method, f64, Option<usize>)> {
        let mut out = Vec::new();
        for &m in &self.methods {
            for &z in &self.z {
                for &k in &self.k {
                    out.push((m, z, k));
                }
            }
        }
        out
    }

    fn gen_config(&self, z: f64, rep: usize) -> GenConfig {
        let key_mode = match self.base.predicate {
            PredicateKind::Eq => KeyMode::Integer,
            PredicateKind::Edit => KeyMode::StringWithEdits,
        };
        GenConfig {
            multiplicity: self.multiplicity,
            key_mode,
            edit_rate: self.edit_rate,
            ..GenConfig::new(self.r_tuples, self.s_tuples, self.keys.unwrap_or(self.r_tuples), z, self.rep_seed(rep))
        }
    }

    pub fn rep_seed(&self, rep: usize) -> u64 {
        self.seed.wrapping_add(rep as u64)
    }
}

type Dataset = Result<(RelationStore, RelationStore), String>;

/// Runs every cell and repetition. For each cell the output holds its raw
/// records (query `rep=i`) followed by their average (query `avg`).
///
/// Cells run on the current rayon pool; output order does not depend on it.
pub fn run_grid(grid: &Grid) -> Vec<RunRecord> {
    let cells = grid.cells();
    if cells.is_empty() || grid.reps == 0 {
        return Vec::new();
    }
    let ps = grid.base.partition_size;
    let mut zs: Vec<f64> = grid.z.clone();
    zs.dedup_by(|a, b| a.to_bits() == b.to_bits());
    let keys: Vec<(u64, usize)> = zs.iter().flat_map(|z| (0..grid.reps).map(move |rep| (z.to_bits(), rep))).collect();
    let data: HashMap<(u64, usize), Dataset> = keys
        .par_iter()
        .map(|&(zb, rep)| {
            let built = generate(&grid.gen_config(f64::from_bits(zb), rep)).map_err(|e| e.to_string()).and_then(|g| {
                let r = RelationStore::from_tuples("R", g.r, ps).map_err(|e| e.to_string())?;
                let s = RelationStore::from_tuples("S", g.s, ps).map_err(|e| e.to_string())?;
                Ok((r, s))
            });
            ((zb, rep), built)
        })
        .collect();

    let jobs: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..grid.reps).map(move |rep| (c, rep))).collect();
    let raw: Vec<RunRecord> = jobs
        .par_iter()
        .map(|&(c, rep)| {
            let (method, z, k) = cells[c];
            let query = format!("rep={rep}");
            let cfg = RunConfig {
                method,
                k,
                z: Some(z),
                query: query.clone(),
                seed: Some(grid.rep_seed(rep)),
                weights: CostWeights::for_partition_size(ps),
                ..grid.base.clone()
            };
            match &data[&(z.to_bits(), rep)] {
                Ok((r, s)) => execute(&cfg, r, s).map(|o| o.record).ok(),
                Err(_) => None,
            }
            .unwrap_or_else(|| RunRecord::failed(method.name(), Some(z), &query, k))
        })
        .collect();

    let mut out = Vec::with_capacity(raw.len() + cells.len());
    for chunk in raw.chunks(grid.reps) {
        out.extend_from_slice(chunk);
        out.extend(RunRecord::average(chunk, "avg"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_lists_and_defaults() {
        let g = Grid::parse("# demo\nmethods=osl, nl\nz=0,1.5\nk=100,all\n\nmult=mn\nm=7\n").unwrap();
        assert_eq!(g.methods, vec![Method::Osl, Method::Nl]);
        assert_eq!(g.k, vec![Some(100), None]);
        assert_eq!(g.multiplicity, Multiplicity::ManyToMany);
        assert_eq!(g.base.m, Some(7));
        assert_eq!(g.reps, 3);
        assert_eq!(g.cells().len(), 8);
    }

    #[test]
    fn rejects_bad_lines() {
        assert_eq!(Grid::parse("methods").unwrap_err(), GridError::Syntax { line: 1 });
        assert!(matches!(Grid::parse("\nfoo=1").unwrap_err(), GridError::UnknownKey { line: 2, .. }));
        assert!(matches!(Grid::parse("methods=osl,hash").unwrap_err(), GridError::Value { .. }));
        assert!(matches!(Grid::parse("k=ten").unwrap_err(), GridError::Value { .. }));
    }

    #[test]
    fn empty_grid_has_no_cells() {
        let g = Grid::parse("").unwrap();
        assert!(run_grid(&g).is_empty());
    }

    #[test]
    fn bad_data_marks_cells_failed() {
        // one_to_many needs r <= keys
        let g = Grid::parse("methods=nl\nz=0\nk=10\nreps=2\nr=50\ns=50\nkeys=10\n").unwrap();
        let out = run_grid(&g);
        assert_eq!(out.len(), 3);
        assert!(out.iter().all(|r| r.status == crate::record::Status::Failed));
    }
}
