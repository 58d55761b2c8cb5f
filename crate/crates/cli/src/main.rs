//! `risnoma`: single runs, parameter sweeps and scheme comparisons.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ris_noma::experiments::{
    emit_report, parse_schemes, parse_values, run_cell, sweep, Format, RunRecord, SweepParam, SweepSpec, SweepTable,
};
use ris_noma::{Scheme, SystemConfig};

#[derive(Parser)]
#[command(name = "risnoma", version, about = "Min-max decoding error for RIS-aided hybrid TDMA-NOMA uplinks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write a JSON report.
    Run {
        #[command(flatten)]
        base: BaseArgs,
        #[arg(long, default_value = "proposed")]
        scheme: Scheme,
        /// Report path; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep one parameter over a list of values.
    Sweep {
        #[command(flatten)]
        base: BaseArgs,
        /// One of N, E0, Nt, p_max, K.
        #[arg(long)]
        param: SweepParam,
        /// Comma-separated grid, e.g. `16,32,48`.
        #[arg(long)]
        values: String,
        #[command(flatten)]
        cells: CellArgs,
    },
    /// Run several schemes on the base configuration.
    Compare {
        #[command(flatten)]
        base: BaseArgs,
        #[command(flatten)]
        cells: CellArgs,
    },
}

#[derive(Args)]
struct BaseArgs {
    /// TOML configuration; built-in defaults otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Channel seed for `run`, root seed for sweeps.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct CellArgs {
    #[arg(long, default_value_t = 50)]
    seeds: usize,
    /// Comma-separated scheme ids.
    #[arg(long, default_value = "proposed")]
    schemes: String,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Reuse one placement and channel draw per seed index across the grid.
    #[arg(long)]
    fix_placement: bool,
    /// Record wall-clock runtimes (output is then no longer byte-stable).
    #[arg(long)]
    timing: bool,
    /// `.json` for JSON, CSV otherwise.
    #[arg(long)]
    out: PathBuf,
}

impl BaseArgs {
    fn load(&self) -> Result<SystemConfig> {
        let mut cfg = match &self.config {
            Some(path) => SystemConfig::load(path).with_context(|| format!("reading {}", path.display()))?,
            None => SystemConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

impl CellArgs {
    fn spec(&self, param: Option<SweepParam>, values: Vec<f64>) -> Result<SweepSpec> {
        if self.seeds == 0 {
            bail!("--seeds must be at least 1");
        }
        Ok(SweepSpec {
            param,
            values,
            seeds: self.seeds,
            schemes: parse_schemes(&self.schemes)?,
            jobs: self.jobs,
            fix_placement: self.fix_placement,
            timing: self.timing,
        })
    }
}

fn write_table(table: &SweepTable, path: &Path) -> Result<()> {
    emit_report(table, Format::from_path(path), path).with_context(|| format!("writing {}", path.display()))?;
    let failed = table.rows.iter().filter(|r| r.error.is_some()).count();
    eprintln!("{} rows written to {} ({failed} failed runs)", table.rows.len(), path.display());
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { base, scheme, out } => {
            let cfg = base.load()?;
            let result = run_cell(scheme, &cfg)?;
            let text = RunRecord::new(scheme, &cfg, &result).to_json()?;
            match out {
                Some(path) => std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{text}"),
            }
        }
        Command::Sweep { base, param, values, cells } => {
            let cfg = base.load()?;
            let table = sweep(&cfg, &cells.spec(Some(param), parse_values(&values)?)?)?;
            write_table(&table, &cells.out)?;
        }
        Command::Compare { base, cells } => {
            let cfg = base.load()?;
            let table = sweep(&cfg, &cells.spec(None, Vec::new())?)?;
            write_table(&table, &cells.out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
