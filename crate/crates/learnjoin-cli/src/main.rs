use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use learnjoin::datagen::{generate_pair, GenConfig, KeyMode};
use learnjoin::engine::CostWeights;
use learnjoin_cli::bench::{parse_k, parse_multiplicity, run_grid, Grid};
use learnjoin_cli::config::{ConfigError, Method, PredicateKind, RunConfig, TimingMode};
use learnjoin_cli::exec::{execute, load, ExecError};
use learnjoin_cli::record::{write_records, Status};
use learnjoin_cli::verify::{run_checks, CheckKind, Injection};

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_OOM: u8 = 3;

#[derive(Parser)]
#[command(name = "learnjoin", version, about = "Progressive joins with learning scan operators")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a pair of relation files.
    Gen(GenArgs),
    /// Run one method and print its record.
    Run(RunArgs),
    /// Run a method × z × k grid and write all records.
    Bench(BenchArgs),
    /// Run the built-in self checks.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum KeyKind {
    Int,
    Str,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    r: usize,
    #[arg(long)]
    s: usize,
    #[arg(long, allow_negative_numbers = true)]
    z: f64,
    /// 1n or mn
    #[arg(long, value_parser = mult_parser)]
    mult: learnjoin::datagen::Multiplicity,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out_r: PathBuf,
    #[arg(long)]
    out_s: PathBuf,
    /// Key domain size; defaults to --r.
    #[arg(long)]
    keys: Option<usize>,
    #[arg(long, value_enum, default_value = "int")]
    key_mode: KeyKind,
    #[arg(long, default_value_t = 0.0)]
    edit_rate: f64,
}

fn mult_parser(s: &str) -> Result<learnjoin::datagen::Multiplicity, String> {
    parse_multiplicity(s).ok_or_else(|| format!("expected 1n or mn, got {s:?}"))
}

/// Result limit; `None` runs to exhaustion.
#[derive(Clone, Copy)]
struct Limit(Option<usize>);

fn k_parser(s: &str) -> Result<Limit, String> {
    parse_k(s).map(Limit).ok_or_else(|| format!("expected a count or `all`, got {s:?}"))
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum)]
    method: Method,
    #[arg(long)]
    r: PathBuf,
    #[arg(long)]
    s: PathBuf,
    /// Result count to stop at, or `all`.
    #[arg(long, value_parser = k_parser, default_value = "all")]
    k: Limit,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "eq")]
    pred: PredicateKind,
    #[arg(long, default_value_t = learnjoin::storage::DEFAULT_PARTITION_SIZE)]
    partition_size: usize,
    #[arg(long, default_value_t = 0.99)]
    gamma: f64,
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 4)]
    b: usize,
    /// Ripple memory budget in partitions.
    #[arg(long, default_value_t = 64)]
    mem_cap: usize,
    #[arg(long, default_value_t = 0.5)]
    eps0: f64,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long, value_enum, default_value = "cost")]
    mode: TimingMode,
    /// Label copied into the record.
    #[arg(long, allow_negative_numbers = true)]
    z: Option<f64>,
    /// Label copied into the record.
    #[arg(long, default_value = "")]
    query: String,
    #[arg(long)]
    c_probe: Option<u64>,
    #[arg(long)]
    c_seq: Option<u64>,
    #[arg(long)]
    c_rand: Option<u64>,
    /// Write the result stream here.
    #[arg(long)]
    stream: Option<PathBuf>,
    /// Write the per-round or estimate trace here.
    #[arg(long)]
    trace: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self) -> RunConfig {
        let base = CostWeights::for_partition_size(self.partition_size);
        RunConfig {
            method: self.method,
            r_path: Some(self.r.clone()),
            s_path: Some(self.s.clone()),
            predicate: self.pred,
            k: self.k.0,
            gamma: self.gamma,
            partition_size: self.partition_size,
            n: self.n,
            m: self.m,
            b: self.b,
            mem_cap: self.mem_cap,
            eps0: self.eps0,
            max_steps: self.max_steps,
            seed: self.seed,
            weights: CostWeights {
                c_probe: self.c_probe.unwrap_or(base.c_probe),
                c_seq: self.c_seq.unwrap_or(base.c_seq),
                c_rand: self.c_rand.unwrap_or(base.c_rand),
            },
            mode: self.mode,
            z: self.z,
            query: self.query.clone(),
        }
    }
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    grid: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    only: Option<CheckKind>,
    #[arg(long, value_enum)]
    inject: Option<Injection>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Command::Gen(a) => cmd_gen(a),
        Command::Run(a) => cmd_run(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = matches!(e.downcast_ref::<ExecError>(), Some(ExecError::Config(_)))
                || e.downcast_ref::<ConfigError>().is_some();
            ExitCode::from(if usage { EXIT_USAGE } else { EXIT_FAILURE })
        }
    }
}

fn cmd_gen(a: GenArgs) -> Result<u8> {
    let cfg = GenConfig {
        multiplicity: a.mult,
        key_mode: match a.key_mode {
            KeyKind::Int => KeyMode::Integer,
            KeyKind::Str => KeyMode::StringWithEdits,
        },
        edit_rate: a.edit_rate,
        ..GenConfig::new(a.r, a.s, a.keys.unwrap_or(a.r), a.z, a.seed)
    };
    let summary = generate_pair(&cfg, &a.out_r, &a.out_s)?;
    println!("{summary}");
    Ok(0)
}

fn cmd_run(a: RunArgs) -> Result<u8> {
    let cfg = a.config();
    cfg.validate()?;
    let (r, s) = load(&cfg)?;
    let out = execute(&cfg, &r, &s)?;
    if let Some(p) = &a.stream {
        let mut w = BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?);
        out.stream.export(&mut w)?;
        w.flush()?;
    }
    if let Some(p) = &a.trace {
        fs::write(p, &out.trace).with_context(|| format!("writing {}", p.display()))?;
    }
    write_records(io::stdout().lock(), [&out.record])?;
    Ok(match out.record.status {
        Status::Oom => EXIT_OOM,
        _ => 0,
    })
}

fn cmd_bench(a: BenchArgs) -> Result<u8> {
    let text = fs::read_to_string(&a.grid).with_context(|| format!("reading {}", a.grid.display()))?;
    let grid = Grid::parse(&text)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = a.jobs {
        pool = pool.num_threads(j.max(1));
    }
    let records = pool.build()?.install(|| run_grid(&grid));
    let file = File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_records(BufWriter::new(file), &records)?;
    let failed = records.iter().filter(|r| r.query != "avg" && r.status == Status::Failed).count();
    eprintln!("{} records written, {failed} failed runs", records.len());
    Ok(0)
}

fn cmd_verify(a: VerifyArgs) -> Result<u8> {
    let checks = run_checks(a.only, a.inject);
    for c in &checks {
        println!("{c}");
    }
    Ok(if checks.iter().all(|c| c.pass) { 0 } else { EXIT_FAILURE })
}
