use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use lensloc::config::{Config, ConfigError};
use lensloc::experiments::{self, ExperimentConfig, ExperimentId, ResultTable, SweepError};
use lensloc::io;

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "lensloc", version, about = "Lens-array AoA estimation and cooperative vehicle localization experiments")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for CSV and JSON artifacts.
    #[arg(long, global = true, env = "LENSLOC_OUTPUT_DIR", default_value = "out")]
    output_dir: PathBuf,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-angle lens and ULA bounds for the configured array.
    CrlbSweep,
    /// Single-target AoA estimator benchmark.
    AoaBench,
    /// Localize random scenes, or a scene read from a CSV file.
    Localize {
        /// `id,x,y,omega` file with the vehicle poses.
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Separation probability over antenna counts and densities.
    SepProb,
    /// Outage probability versus SNR.
    Outage,
    /// Regenerate one figure or table (fig2 .. fig11, table1).
    Reproduce { id: String },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<io::IoError> for Failure {
    fn from(e: io::IoError) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<SweepError> for Failure {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::Config(c) => c.into(),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

#[derive(Serialize)]
struct Sidecar<'a> {
    command: &'a str,
    seed: u64,
    experiment: &'a ExperimentConfig,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("runtime error: {msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.experiment.seed = seed;
    }
    if cli.threads == Some(0) {
        return Err(Failure::Config("--threads must be at least 1".into()));
    }
    let out = &cli.output_dir;
    std::fs::create_dir_all(out)
        .map_err(|e| Failure::Config(format!("cannot create output directory {} (--output-dir): {e}", out.display())))?;

    match &cli.command {
        Command::CrlbSweep => {
            let exp = ExperimentConfig::resolve(ExperimentId::Fig2, &cfg)?;
            let rows = threaded(cli, || experiments::crlb_sweep(&exp, cfg.experiment.focal_ratios.as_deref()))?;
            finish(out, "crlb_sweep", "crlb-sweep", &exp, rows, |p, r: &Vec<_>| io::write_crlb(p, r))
        }
        Command::AoaBench => {
            let mut exp = ExperimentConfig::resolve(ExperimentId::Fig3, &cfg)?;
            if cfg.experiment.antennas.is_none() {
                exp.antennas = vec![cfg.array.n];
            }
            let rows = threaded(cli, || experiments::aoa_bench(&exp))?;
            finish(out, "aoa_bench", "aoa-bench", &exp, rows, |p, r: &Vec<_>| io::write_bench(p, r))
        }
        Command::Localize { scenario } => {
            let mut exp = ExperimentConfig::resolve(ExperimentId::Fig6, &cfg)?;
            exp.antennas = vec![cfg.array.n];
            let scene = match scenario {
                Some(p) => Some(io::read_scenario(p, cfg.scenario.comm_radius).map_err(|e| Failure::Config(format!("--scenario: {e}")))?),
                None => None,
            };
            let result = threaded(cli, || experiments::localize_scenes(&exp, scene.as_ref()));
            let (scenes, table) = match result {
                Ok(v) => v,
                Err(e) => return sweep_failure(out, "localize", "localize", &exp, e),
            };
            io::write_poses(&out.join("poses.csv"), &scenes)?;
            finish(out, "localize", "localize", &exp, table, io::write_table)
        }
        Command::SepProb => sweep(cli, out, "sep_prob", "sep-prob", ExperimentConfig::resolve(ExperimentId::Table1, &cfg)?),
        Command::Outage => sweep(cli, out, "outage", "outage", ExperimentConfig::resolve(ExperimentId::Fig10, &cfg)?),
        Command::Reproduce { id } => {
            let id: ExperimentId = id.parse()?;
            let exp = ExperimentConfig::resolve(id, &cfg)?;
            sweep(cli, out, id.as_str(), "reproduce", exp)
        }
    }
}

fn threaded<T: Send>(cli: &Cli, f: impl FnOnce() -> Result<T, SweepError> + Send) -> Result<T, SweepError> {
    experiments::with_threads(cli.threads, f)?
}

fn sweep(cli: &Cli, out: &Path, stem: &str, command: &str, exp: ExperimentConfig) -> Result<(), Failure> {
    match threaded(cli, || experiments::run_sweep(&exp)) {
        Ok(table) => finish(out, stem, command, &exp, table, io::write_table),
        Err(e) => sweep_failure(out, stem, command, &exp, e),
    }
}

fn finish<T>(
    out: &Path,
    stem: &str,
    command: &str,
    exp: &ExperimentConfig,
    data: T,
    write: impl FnOnce(&Path, &T) -> Result<(), io::IoError>,
) -> Result<(), Failure> {
    write(&out.join(format!("{stem}.csv")), &data)?;
    io::write_json(&out.join(format!("{stem}.json")), &Sidecar { command, seed: exp.seed, experiment: exp })?;
    println!("wrote {}", out.join(format!("{stem}.csv")).display());
    Ok(())
}

/// Keeps whatever rows were finished before a runtime failure.
fn sweep_failure(out: &Path, stem: &str, command: &str, exp: &ExperimentConfig, e: SweepError) -> Result<(), Failure> {
    match e {
        SweepError::Config(c) => Err(c.into()),
        SweepError::Pool(msg) => Err(Failure::Runtime(msg)),
        SweepError::Runtime { experiment, partial, source } => {
            let table: ResultTable = *partial;
            if !table.rows.is_empty() {
                finish(out, &format!("{stem}.partial"), command, exp, table, io::write_table)?;
            }
            Err(Failure::Runtime(format!("{experiment}: {source}")))
        }
    }
}
