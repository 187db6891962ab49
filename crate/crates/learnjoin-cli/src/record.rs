//! One line of benchmark output.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use thiserror::Error;

pub const HEADER: [&str; 15] = [
    "method",
    "z",
    "query",
    "k",
    "cost_units",
    "wall_ms",
    "probes",
    "seq_pages",
    "rand_pages",
    "discounted_avg",
    "results",
    "status",
    "count_est",
    "ci_low",
    "ci_high",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Ok,
    Oom,
    Failed,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Ok => "ok",
            Status::Oom => "oom",
            Status::Failed => "failed",
        })
    }
}

impl FromStr for Status {
    type Err = RecordError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ok" => Ok(Status::Ok),
            "oom" => Ok(Status::Oom),
            "failed" => Ok(Status::Failed),
            other => Err(RecordError::Field("status", other.to_string())),
        }
    }
}

#[derive(Debug, Error)]
pub enum RecordError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("bad {0} field: {1:?}")]
    Field(&'static str, String),
    #[error("expected header {expected:?}")]
    Header { expected: String },
}

/// Numeric fields are `f64` so averaged records share the type.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub method: String,
    pub z: Option<f64>,
    pub query: String,
    /// `None` means run to exhaustion, printed as `all`.
    pub k: Option<usize>,
    pub cost_units: f64,
    pub wall_ms: f64,
    pub probes: f64,
    pub seq_pages: f64,
    pub rand_pages: f64,
    pub discounted_avg: f64,
    pub results: f64,
    pub status: Status,
    pub count_est: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

impl RunRecord {
    pub fn failed(method: &str, z: Option<f64>, query: &str, k: Option<usize>) -> Self {
        RunRecord {
            method: method.to_string(),
            z,
            query: query.to_string(),
            k,
            cost_units: 0.0,
            wall_ms: 0.0,
            probes: 0.0,
            seq_pages: 0.0,
            rand_pages: 0.0,
            discounted_avg: 0.0,
            results: 0.0,
            status: Status::Failed,
            count_est: None,
            ci_low: None,
            ci_high: None,
        }
    }

    pub fn fields(&self) -> Vec<String> {
        vec![
            self.method.clone(),
            opt(self.z),
            self.query.clone(),
            self.k.map(|k| k.to_string()).unwrap_or_else(|| "all".into()),
            self.cost_units.to_string(),
            self.wall_ms.to_string(),
            self.probes.to_string(),
            self.seq_pages.to_string(),
            self.rand_pages.to_string(),
            self.discounted_avg.to_string(),
            self.results.to_string(),
            self.status.to_string(),
            opt(self.count_est),
            opt(self.ci_low),
            opt(self.ci_high),
        ]
    }

    pub fn from_fields(f: &csv::StringRecord) -> Result<Self, RecordError> {
        let get = |i: usize| f.get(i).unwrap_or("");
        let num = |i: usize| get(i).parse::<f64>().map_err(|_| RecordError::Field(HEADER[i], get(i).to_string()));
        let maybe = |i: usize| if get(i).is_empty() { Ok(None) } else { num(i).map(Some) };
        if f.len() != HEADER.len() {
            return Err(RecordError::Field("row", format!("{} fields", f.len())));
        }
        let k = match get(3) {
            "all" => None,
            s => Some(s.parse().map_err(|_| RecordError::Field("k", s.to_string()))?),
        };
        Ok(RunRecord {
            method: get(0).to_string(),
            z: maybe(1)?,
            query: get(2).to_string(),
            k,
            cost_units: num(4)?,
            wall_ms: num(5)?,
            probes: num(6)?,
            seq_pages: num(7)?,
            rand_pages: num(8)?,
            discounted_avg: num(9)?,
            results: num(10)?,
            status: get(11).parse()?,
            count_est: maybe(12)?,
            ci_low: maybe(13)?,
            ci_high: maybe(14)?,
        })
    }

    /// Field-wise mean of `raw`; the status is the worst one seen.
    pub fn average(raw: &[RunRecord], query: &str) -> Option<RunRecord> {
        let first = raw.first()?;
        let n = raw.len() as f64;
        let mean = |f: fn(&RunRecord) -> f64| raw.iter().map(f).sum::<f64>() / n;
        let mean_opt = |f: fn(&RunRecord) -> Option<f64>| {
            raw.iter().map(f).collect::<Option<Vec<f64>>>().map(|v| v.iter().sum::<f64>() / n)
        };
        Some(RunRecord {
            method: first.method.clone(),
            z: first.z,
            query: query.to_string(),
            k: first.k,
            cost_units: mean(|r| r.cost_units),
            wall_ms: mean(|r| r.wall_ms),
            probes: mean(|r| r.probes),
            seq_pages: mean(|r| r.seq_pages),
            rand_pages: mean(|r| r.rand_pages),
            discounted_avg: mean(|r| r.discounted_avg),
            results: mean(|r| r.results),
            status: raw.iter().map(|r| r.status).max().unwrap_or(Status::Ok),
            count_est: mean_opt(|r| r.count_est),
            ci_low: mean_opt(|r| r.ci_low),
            ci_high: mean_opt(|r| r.ci_high),
        })
    }
}

/// Writes the header and `records`.
pub fn write_records<'a>(w: impl Write, records: impl IntoIterator<Item = &'a RunRecord>) -> Result<(), RecordError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(HEADER)?;
    for r in records {
        out.write_record(r.fields())?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_records(r: impl Read) -> Result<Vec<RunRecord>, RecordError> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    if rd.headers()?.iter().ne(HEADER) {
        return Err(RecordError::Header { expected: HEADER.join(",") });
    }
    rd.records().map(|row| RunRecord::from_fields(&row?)).collect()
}
