//! `fcp-lab`: batch experiments on first contact percolation.
//!
//! Every command reads a JSON experiment file of the form
//! `{"seed": .., "replicas": .., "params": {..}}` and writes CSV (default) or
//! JSON. Outputs carry the fully resolved config and its SHA-256, so any
//! result can be regenerated by feeding the embedded config back in.

mod commands;
mod config;
mod exit;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use config::{load, resolve, Resolved};
use exit::Failure;
use output::{render_csv, render_json, write_to, Format, Report};

const EXIT_CODES: &str = "\
Exit codes: 0 ok, 1 I/O, 2 usage or config, 3 domain, 4 engine, 5 budget, \
6 precondition, 7 claim violation, 8 verify failure.
The seed is taken from --seed, then the config file, then FCP_LAB_SEED, then 0.";

#[derive(Parser)]
#[command(name = "fcp-lab", version, about = "First contact percolation experiments", after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Replica count; overrides the config file.
    #[arg(long, global = true)]
    replicas: Option<usize>,
    /// Output file (stdout if omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the spread and export the infection trace.
    #[command(after_help = "CSV columns: replica,x0..x{d-1},time,event (event is infected or stalled).\n\
        With --patterns PATH, meeting times go to PATH as replica,x0..x{d-1},axis,time, \
        keyed by the lower endpoint and axis of each edge.\n\
        params: spec, region (default half_line), horizon {time, max_vertices}, start, pattern_window.\n\
        Default replicas: 1.")]
    Simulate {
        #[arg(long)]
        patterns: Option<PathBuf>,
    },
    /// Estimate time constants on the half-line.
    #[command(after_help = "CSV columns: spec_json,n,replicas,mean,lo,hi,regime (lo/hi bound a 95% CI; \
        inf marks the infinite-stall regime).\nparams: specs, n (number or list, default 10000).\nDefault replicas: 100.")]
    EstimateTc,
    /// Test convex ordering between two processes.
    #[command(after_help = "CSV columns: direction,collection,function,mean_a,mean_b,std_err,verdict,refuted.\n\
        params: a, b, collections, functions, significance (0.01), both_directions (true).\nDefault replicas: 100000.")]
    OrderTest,
    /// Search for a speed-up certificate and run the block checks.
    #[command(
        after_help = "CSV columns: field,value.\nparams: strong, weak, grid {starts, lengths}, empirical, certificate (re-check instead of search).\n\
        Default replicas: 1000. A violated block claim writes a reproducer JSON and exits with 7."
    )]
    SpeedupCheck,
    /// Drive both coupled recursions with shared uniforms.
    #[command(after_help = "CSV columns: replica,k,uniform,tau_strong,tau_weak; \
        with params.properties: item,name,checks,status,detail.\n\
        params: strong, weak, start, steps, properties, tolerances.\nDefault replicas: 1.")]
    Couple,
    /// Count permitted paths between two vertices.
    #[command(after_help = "CSV columns: replica,count,reached,exact_subdivision,discretized_<n>...\n\
        params: spec, region, x, y, t, limits, witnesses, subdivisions.\nDefault replicas: 1.")]
    Paths,
    /// Run the acceptance battery.
    #[command(after_help = "CSV columns: id,passed,elapsed_s,title,detail. Exit code 8 if any criterion fails.")]
    Verify {
        /// Run only these criteria.
        #[arg(long)]
        only: Vec<String>,
    },
}

fn emit<P: Serialize>(cli: &Cli, name: &str, resolved: &Resolved<P>, report: Report) -> Result<(), Failure> {
    let bytes = match cli.format {
        Format::Csv => render_csv(name, resolved, &report.table)?,
        Format::Json => render_json(name, resolved, &report.body)?,
    };
    write_to(cli.out.as_deref(), &bytes)?;
    report.status.map_or(Ok(()), Err)
}

fn prepare<P: DeserializeOwned>(cli: &Cli, default_replicas: usize) -> Result<Resolved<P>, Failure> {
    resolve(load(cli.config.as_deref())?, cli.seed, cli.replicas, default_replicas)
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(Failure::usage("--workers must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| Failure::new(exit::ENGINE, e.to_string()))?;
    }
    match &cli.command {
        Command::Simulate { patterns } => {
            let r = prepare(cli, 1)?;
            let report = commands::simulate(&r, patterns.as_deref())?;
            emit(cli, "simulate", &r, report)
        }
        Command::EstimateTc => {
            let r = prepare(cli, 100)?;
            let report = commands::estimate_tc(&r)?;
            emit(cli, "estimate-tc", &r, report)
        }
        Command::OrderTest => {
            let r = prepare(cli, 100_000)?;
            let report = commands::order_test(&r)?;
            emit(cli, "order-test", &r, report)
        }
        Command::SpeedupCheck => {
            let r = prepare(cli, 1000)?;
            let report = commands::speedup_check(&r, cli.out.as_deref())?;
            emit(cli, "speedup-check", &r, report)
        }
        Command::Couple => {
            let r = prepare(cli, 1)?;
            let report = commands::couple(&r)?;
            emit(cli, "couple", &r, report)
        }
        Command::Paths => {
            let r = prepare(cli, 1)?;
            let report = commands::paths(&r)?;
            emit(cli, "paths", &r, report)
        }
        Command::Verify { only } => {
            let seed = config::resolve_seed(cli.seed, None)?;
            let r = Resolved { seed, replicas: None, params: commands::VerifyParams { only: only.clone() } };
            let report = commands::verify(&r)?;
            emit(cli, "verify", &r, report)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(f) => {
            eprintln!("fcp-lab: {f}");
            ExitCode::from(f.code as u8)
        }
    }
}
