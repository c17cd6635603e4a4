//! Command-line front end: scenario-file ingestion, sweep orchestration, and
//! CSV emission.
//!
//! Subcommands: `ser1`, `ser2`, `rate`, `mass-ratio`, `adaptive`, `run`,
//! `thresholds`. Flags `--config`, `--out`, `--seed`, `--threads`; flags
//! override config-file keys. Exit codes: 0 success, 1 usage error, 2
//! runtime error. Output is CSV (stdout unless `--out` is given) with a
//! fixed, documented schema; identical seeds produce byte-identical files
//! for any `--threads` value.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use rand::Rng;

use crate::adaptive::{ExtensionThreshold, UpdatePolicy};
use crate::config::{ConfigFile, DistSpec};
use crate::perceptual::build_thresholds;
use crate::sim::{adaptive_extension_analysis, sweep, SweepMode};
use crate::table::{Cell, SweepTable};
use crate::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "opsk",
    about = "Odor Perceptual Shift Keying link simulator and analysis sweeps",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Scenario file (key=value lines; see the crate docs for the grammar).
    #[arg(long)]
    config: PathBuf,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config-file seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for grid evaluation (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Type-1 (wrong-odor selection) SER sweep; needs a noise-free processor.
    Ser1(CommonArgs),
    /// Type-2 (wrong-region decode) SER sweep; needs a noise-free channel.
    Ser2(CommonArgs),
    /// Symbol-rate sweep from the optimized absorption time.
    Rate(CommonArgs),
    /// Closed-form expected mass-ratio sweep.
    MassRatio(CommonArgs),
    /// Operation-time extension study over symbol distributions.
    Adaptive(CommonArgs),
    /// One end-to-end scenario (no sweep axes).
    Run(CommonArgs),
    /// Print the threshold set of a dimension carrying N bits.
    Thresholds {
        /// Bits in the dimension (0..=8).
        #[arg(long)]
        n: u32,
    },
}

/// Entry point behind the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            2
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Thresholds { n } => {
            let set = build_thresholds(n)?;
            let line: Vec<String> = set.values().iter().map(|v| v.to_string()).collect();
            println!("{}", line.join(","));
            Ok(())
        }
        Command::Ser1(args) => run_sweep(args, Some(SweepMode::Type1)),
        Command::Ser2(args) => run_sweep(args, Some(SweepMode::Type2)),
        Command::Rate(args) => run_sweep(args, Some(SweepMode::Rate)),
        Command::MassRatio(args) => run_sweep(args, Some(SweepMode::MassRatio)),
        Command::Run(args) => run_sweep(args, None),
        Command::Adaptive(args) => run_adaptive(args),
    }
}

fn with_thread_pool<F: FnOnce() -> Result<SweepTable> + Send>(
    threads: Option<usize>,
    job: F,
) -> Result<SweepTable> {
    match threads {
        None => job(),
        Some(0) => Err(Error::InvalidInput("--threads must be >= 1".into())),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
            pool.install(job)
        }
    }
}

fn emit(table: &SweepTable, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(path) => {
            let mut file = std::fs::File::create(path)?;
            table.write_csv(&mut file)?;
            file.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            table.write_csv(stdout.lock())?;
        }
    }
    Ok(())
}

/// `mode: None` is the `run` subcommand: a single unconstrained scenario.
fn run_sweep(args: CommonArgs, mode: Option<SweepMode>) -> Result<()> {
    let file = ConfigFile::parse_file(&args.config)?;
    if mode.is_none() && !file.axes.is_empty() {
        return Err(Error::InvalidInput(
            "`run` takes no sweep axes; use ser1/ser2/rate/mass-ratio".into(),
        ));
    }
    let grid = file.scenario_grid(args.seed)?;
    let table = with_thread_pool(args.threads, || match mode {
        Some(mode) => sweep(&grid, mode),
        None => crate::sim::run_table(&grid),
    })?;
    emit(&table, args.out.as_ref())
}

fn run_adaptive(args: CommonArgs) -> Result<()> {
    let file = ConfigFile::parse_file(&args.config)?;
    if !file.axes.is_empty() {
        return Err(Error::InvalidInput(
            "the adaptive study takes no sweep axes".into(),
        ));
    }
    let defaults = crate::sim::ScenarioConfig::default();
    let allocation = file.allocation.unwrap_or(defaults.allocation);
    let mass = file.mass.unwrap_or(defaults.mass);
    let seed = args.seed.or(file.seed).unwrap_or(defaults.seed);
    let policy = UpdatePolicy::new(
        file.adaptive.window.unwrap_or(100),
        file.adaptive
            .min_extension
            .unwrap_or(ExtensionThreshold::Symbols(0.0)),
        file.adaptive.silence_len.unwrap_or(2),
        file.adaptive.repeat.unwrap_or(3),
    )?;
    let bank_mass = file.adaptive.bank_mass.unwrap_or(1_000.0 * mass);

    let total_classes = allocation.total_classes() as usize;
    let mut dist_rng = crate::sim::stream(seed, 4);
    let distributions: Vec<(String, Vec<f64>)> = if file.adaptive.distributions.is_empty() {
        // Uniform plus three random mixes, the study's default line-up.
        let mut list = vec![("dist1-uniform".to_string(), vec![1.0; total_classes])];
        for idx in 2..=4 {
            let weights: Vec<f64> = (0..total_classes)
                .map(|_| dist_rng.random_range(0.05..1.0))
                .collect();
            list.push((format!("dist{idx}-random"), weights));
        }
        list
    } else {
        file.adaptive
            .distributions
            .iter()
            .map(|(idx, spec)| {
                let weights = match spec {
                    DistSpec::Uniform => vec![1.0; total_classes],
                    DistSpec::Weights(w) => w.clone(),
                };
                (format!("dist{idx}"), weights)
            })
            .collect()
    };

    let mut analysis_rng = crate::sim::stream(seed, 5);
    let weight_lists: Vec<Vec<f64>> = distributions.iter().map(|(_, w)| w.clone()).collect();
    let outcomes = adaptive_extension_analysis(
        allocation,
        &weight_lists,
        &policy,
        bank_mass,
        mass,
        &mut analysis_rng,
    )?;

    let mut table = SweepTable::new(
        [
            "distribution",
            "allocation",
            "window",
            "bank_mass",
            "initial_runtime",
            "total_symbols",
            "updates",
            "extension_percent",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect(),
    );
    for ((name, _), outcome) in distributions.iter().zip(&outcomes) {
        table.push_row(vec![
            Cell::Text(name.clone()),
            Cell::Text(allocation.to_string()),
            Cell::Int(policy.window as i64),
            Cell::Float(bank_mass),
            Cell::Int(outcome.initial_runtime as i64),
            Cell::Int(outcome.total_symbols as i64),
            Cell::Int(outcome.updates_applied as i64),
            Cell::Float(outcome.extension_percent),
        ])?;
    }
    emit(&table, args.out.as_ref())
}
