//! Executes one configured run and turns it into a record.

use std::time::Instant;

use learnjoin::baselines::{run_bnl, run_nl, run_ripple, run_ucb_scan};
use learnjoin::collab::{run_cl, run_icl};
use learnjoin::engine::{discounted_average, Join, PredicateError, ResultStream};
use learnjoin::osl::{export_trace, run_osl, OslParams};
use learnjoin::rosl::{count_estimate, export_estimates, run_rosl};
use learnjoin::storage::{load_relation, RelationStore, StorageError};
use learnjoin::RoslConfig;
use thiserror::Error;

use crate::config::{ConfigError, Method, RunConfig, TimingMode};
use crate::record::{RunRecord, Status};

#[derive(Debug, Error)]
pub enum ExecError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Predicate(#[from] PredicateError),
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error("missing --{0}")]
    MissingInput(&'static str),
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub record: RunRecord,
    pub stream: ResultStream,
    /// Per-round trace for the learning methods, estimate trace for rosl.
    pub trace: String,
}

impl RunOutcome {
    pub fn stream_text(&self) -> String {
        let mut buf = Vec::new();
        self.stream.export(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("ascii export")
    }
}

/// Loads the relations named in `cfg`.
pub fn load(cfg: &RunConfig) -> Result<(RelationStore, RelationStore), ExecError> {
    let r = cfg.r_path.as_deref().ok_or(ExecError::MissingInput("r"))?;
    let s = cfg.s_path.as_deref().ok_or(ExecError::MissingInput("s"))?;
    Ok((load_relation(r, cfg.partition_size)?, load_relation(s, cfg.partition_size)?))
}

pub fn execute(cfg: &RunConfig, r: &RelationStore, s: &RelationStore) -> Result<RunOutcome, ExecError> {
    cfg.validate()?;
    let pred = cfg.predicate.predicate();
    pred.validate(r, s)?;
    let osl = OslParams { n: cfg.n, m: cfg.m, seed: cfg.seed.unwrap_or(0), ..OslParams::default() };

    let started = Instant::now();
    let mut join = Join::new(r, s, &pred, cfg.limit(), cfg.weights);
    let mut status = Status::Ok;
    let mut trace = String::new();
    let mut estimate = None;
    match cfg.method {
        Method::Nl => run_nl(&mut join),
        Method::Bnl => run_bnl(&mut join, cfg.b),
        Method::Ripple => {
            if run_ripple(&mut join, cfg.mem_cap).is_err() {
                status = Status::Oom;
            }
        }
        Method::Ucb => {
            run_ucb_scan(&mut join);
        }
        Method::Osl => trace = export_trace(&run_osl(&mut join, &osl)),
        Method::Cl => trace = export_trace(&run_cl(&mut join, &osl)),
        Method::Icl => trace = export_trace(&run_icl(&mut join, &osl).0),
        Method::Rosl => {
            let params = RoslConfig { osl, eps0: cfg.eps0, max_steps: cfg.max_steps, ..RoslConfig::default() };
            let out = run_rosl(&mut join, &params, 0);
            trace = export_estimates(&out.trace);
            estimate = out.last().map(|p| (p.count_est, p.estimate.ci));
        }
    }
    let elapsed = started.elapsed();

    let clock = join.clock.clone();
    let stream = join.into_stream();
    // the interval on Q̂ scales to COUNT like the point estimate
    let pairs = r.mean_partition_len() * s.mean_partition_len();
    let scale = |q: f64| count_estimate(q, r.tuple_count, s.tuple_count, pairs).ok();
    let record = RunRecord {
        method: cfg.method.name().to_string(),
        z: cfg.z,
        query: cfg.query.clone(),
        k: cfg.k,
        cost_units: clock.total() as f64,
        wall_ms: match cfg.mode {
            TimingMode::Cost => 0.0,
            TimingMode::Wall => elapsed.as_secs_f64() * 1e3,
        },
        probes: clock.probes as f64,
        seq_pages: clock.seq_pages as f64,
        rand_pages: clock.rand_pages as f64,
        discounted_avg: discounted_average::<f64>(&stream.stamps(), cfg.gamma),
        results: stream.len() as f64,
        status,
        count_est: estimate.map(|e| e.0),
        ci_low: estimate.and_then(|e| scale(e.1 .0)),
        ci_high: estimate.and_then(|e| scale(e.1 .1)),
    };
    Ok(RunOutcome { record, stream, trace })
}
