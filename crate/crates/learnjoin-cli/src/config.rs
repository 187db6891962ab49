//! Run configuration shared by `run` and `bench`.

use std::fmt;
use std::path::PathBuf;

use clap::ValueEnum;
use learnjoin::engine::{CostWeights, JoinPredicate};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, ValueEnum)]
pub enum Method {
    Nl,
    Bnl,
    Ripple,
    Ucb,
    Osl,
    Rosl,
    Cl,
    Icl,
}

impl Method {
    pub const ALL: [Method; 8] =
        [Method::Nl, Method::Bnl, Method::Ripple, Method::Ucb, Method::Osl, Method::Rosl, Method::Cl, Method::Icl];

    pub fn name(self) -> &'static str {
        match self {
            Method::Nl => "nl",
            Method::Bnl => "bnl",
            Method::Ripple => "ripple",
            Method::Ucb => "ucb",
            Method::Osl => "osl",
            Method::Rosl => "rosl",
            Method::Cl => "cl",
            Method::Icl => "icl",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.name() == s)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum PredicateKind {
    #[default]
    Eq,
    Edit,
}

impl PredicateKind {
    pub fn predicate(self) -> JoinPredicate {
        match self {
            PredicateKind::Eq => JoinPredicate::KeyEquality,
            PredicateKind::Edit => JoinPredicate::EditDistanceLe1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum TimingMode {
    /// Deterministic cost units; wall time is reported as 0.
    #[default]
    Cost,
    Wall,
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("--seed is required in cost mode")]
    MissingSeed,
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub method: Method,
    pub r_path: Option<PathBuf>,
    pub s_path: Option<PathBuf>,
    pub predicate: PredicateKind,
    /// `None` runs to exhaustion.
    pub k: Option<usize>,
    pub gamma: f64,
    pub partition_size: usize,
    pub n: usize,
    pub m: Option<usize>,
    pub b: usize,
    pub mem_cap: usize,
    pub eps0: f64,
    pub max_steps: Option<usize>,
    pub seed: Option<u64>,
    pub weights: CostWeights,
    pub mode: TimingMode,
    /// Labels copied into the record.
    pub z: Option<f64>,
    pub query: String,
}

impl RunConfig {
    pub fn new(method: Method) -> Self {
        RunConfig {
            method,
            r_path: None,
            s_path: None,
            predicate: PredicateKind::Eq,
            k: None,
            gamma: 0.99,
            partition_size: learnjoin::storage::DEFAULT_PARTITION_SIZE,
            n: 10,
            m: None,
            b: 4,
            mem_cap: 64,
            eps0: 0.5,
            max_steps: None,
            seed: None,
            weights: CostWeights::default(),
            mode: TimingMode::Cost,
            z: None,
            query: String::new(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.mode == TimingMode::Cost && self.seed.is_none() {
            return Err(ConfigError::MissingSeed);
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("--gamma must lie in (0, 1)");
        }
        if self.partition_size == 0 {
            return bad("--partition-size must be at least 1");
        }
        match self.method {
            Method::Bnl if self.b == 0 => bad("--b must be at least 1"),
            Method::Ripple if self.mem_cap < 2 => bad("--mem-cap must be at least 2"),
            Method::Osl | Method::Rosl | Method::Cl | Method::Icl if self.n == 0 => bad("--n must be at least 1"),
            Method::Osl | Method::Rosl | Method::Cl | Method::Icl if self.m == Some(0) => bad("--m must be at least 1"),
            Method::Rosl if !(self.eps0 > 0.0 && self.eps0.is_finite()) => bad("--eps0 must be positive"),
            Method::Rosl if self.max_steps == Some(0) => bad("--max-steps must be at least 1"),
            _ => Ok(()),
        }
    }

    pub fn limit(&self) -> usize {
        self.k.unwrap_or(usize::MAX)
    }
}
