#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use commands::CliError;
use config::{apply_assignment, set_key, Config};
use std::path::PathBuf;
use std::process::ExitCode;

/// Confidence sets for divergence projections of misspecified models.
#[derive(Parser)]
#[command(name = "divset", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Projection of the truth onto the model, with the nu-approximate set.
    Project(Common),
    /// Confidence set for a single dataset.
    Confset {
        #[command(flatten)]
        common: Common,
        /// Data file with one observation per line (overrides confset.data).
        data: Option<PathBuf>,
        /// Write per-parameter statistic, threshold and decision rows as CSV.
        #[arg(long, value_name = "PATH")]
        emit_grid: Option<PathBuf>,
    },
    /// Monte Carlo coverage experiment; writes report.csv and summary.json.
    Simulate(Common),
    /// Runs the two-point regression examples.
    Regress(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(short, long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Miscoverage level.
    #[arg(long)]
    alpha: Option<f64>,
    /// Monte Carlo replicates (simulate.replicates).
    #[arg(long)]
    replicates: Option<usize>,
    /// Sample size per replicate (simulate.n).
    #[arg(long)]
    n: Option<usize>,
    /// Worker threads; 0 uses all cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory (output.dir).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Override any key, e.g. --set statistic.divergence=tv.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    assignments: Vec<String>,
}

impl Common {
    fn load(&self) -> Result<Config, CliError> {
        let mut table = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                toml::from_str::<toml::Table>(&text)
                    .map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))?
            }
            None => toml::Table::new(),
        };
        let seed = match self.seed {
            Some(s) => Some(i64::try_from(s).map_err(|_| CliError::Config(format!("seed {s} exceeds the TOML integer range")))?),
            None => None,
        };
        let flags: [(&str, Option<toml::Value>); 6] = [
            ("seed", seed.map(toml::Value::Integer)),
            ("alpha", self.alpha.map(toml::Value::Float)),
            ("simulate.replicates", self.replicates.map(|v| toml::Value::Integer(v as i64))),
            ("simulate.n", self.n.map(|v| toml::Value::Integer(v as i64))),
            ("threads", self.threads.map(|v| toml::Value::Integer(v as i64))),
            ("output.dir", self.out.as_ref().map(|p| toml::Value::String(p.display().to_string()))),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                set_key(&mut table, key, v).map_err(CliError::Config)?;
            }
        }
        for a in &self.assignments {
            apply_assignment(&mut table, a).map_err(CliError::Config)?;
        }
        Config::from_table(table).map_err(CliError::Config)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let common = match &cli.command {
        Command::Project(c) | Command::Simulate(c) | Command::Regress(c) => c,
        Command::Confset { common, .. } => common,
    };
    let cfg = common.load()?;
    eprint!("# effective configuration\n{}", cfg.echo());
    if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    match &cli.command {
        Command::Project(_) => commands::project_cmd(&cfg),
        Command::Confset { data, emit_grid, .. } => {
            let emit = emit_grid.clone().or(cfg.confset.emit_grid.clone());
            commands::confset_cmd(&cfg, data.as_deref(), emit.as_deref())
        }
        Command::Simulate(_) => commands::simulate_cmd(&cfg),
        Command::Regress(_) => commands::regress_cmd(&cfg),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code() as u8)
        }
    }
}
