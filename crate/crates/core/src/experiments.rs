//! Monte-Carlo harness: parameter grids, seed streams, parallel cells and
//! CSV/JSON output.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::baselines::{run_scheme, Scheme};
use crate::channel::{place_users, realize_at};
use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use crate::model::{AllocationRecord, Audit, SystemConfig};
use crate::orchestrator::{RunOutput, RunTrace};
use crate::seeds::derive;

/// Column order of the CSV output.
pub const CSV_HEADER: [&str; 12] =
    ["scheme", "seed", "K", "Nt", "N", "E0_J", "p_max_W", "m", "chi", "worst_eps", "energy_J", "runtime_s"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepParam {
    #[serde(rename = "N")]
    Elements,
    #[serde(rename = "E0")]
    Energy,
    #[serde(rename = "Nt")]
    Antennas,
    #[serde(rename = "p_max")]
    PowerCap,
    #[serde(rename = "K")]
    Users,
}

impl SweepParam {
    pub fn id(self) -> &'static str {
        match self {
            SweepParam::Elements => "N",
            SweepParam::Energy => "E0",
            SweepParam::Antennas => "Nt",
            SweepParam::PowerCap => "p_max",
            SweepParam::Users => "K",
        }
    }

    /// `cfg` with this parameter set to `value`; counts must be whole.
    pub fn apply(self, cfg: &SystemConfig, value: f64) -> Result<SystemConfig> {
        let count = || -> Result<usize> {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::Config(format!("{} must be a positive integer, got {value}", self.id())))
            }
        };
        let mut out = cfg.clone();
        match self {
            SweepParam::Elements => out.ris_elements = count()?,
            SweepParam::Antennas => out.bs_antennas = count()?,
            SweepParam::Users => out = out.with_users(count()?),
            SweepParam::Energy => out.energy_budget_j = value,
            SweepParam::PowerCap => out.p_max_w = vec![value; out.users],
        }
        out.validate()
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [SweepParam::Elements, SweepParam::Energy, SweepParam::Antennas, SweepParam::PowerCap, SweepParam::Users]
            .into_iter()
            .find(|p| p.id().eq_ignore_ascii_case(s) || (s == "pmax" && *p == SweepParam::PowerCap))
            .ok_or_else(|| Error::Config(format!("unknown sweep parameter `{s}` (expected N, E0, Nt, p_max or K)")))
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    /// `None` runs the base configuration only.
    pub param: Option<SweepParam>,
    pub values: Vec<f64>,
    pub seeds: usize,
    pub schemes: Vec<Scheme>,
    pub jobs: usize,
    /// Reuse one realization per seed index across the grid.
    pub fix_placement: bool,
    /// Fill the runtime column; otherwise it is zero and output is
    /// byte-stable.
    pub timing: bool,
}

impl SweepSpec {
    pub fn grid(&self, base: &SystemConfig) -> Result<Vec<SystemConfig>> {
        match self.param {
            None => Ok(vec![base.clone()]),
            Some(p) if self.values.is_empty() => Err(Error::Config(format!("no values given for {p}"))),
            Some(p) => self.values.iter().map(|&v| p.apply(base, v)).collect(),
        }
    }
}

/// Root seed of one cell.
pub fn cell_seed(root: u64, grid_index: usize, seed_index: usize, fix_placement: bool) -> u64 {
    if fix_placement {
        derive(root, &[seed_index as u64])
    } else {
        derive(root, &[grid_index as u64, seed_index as u64])
    }
}

/// One (scheme, grid point, seed) result. Failed runs keep their
/// configuration columns and carry the error instead of metrics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub scheme: Scheme,
    pub grid_index: usize,
    pub seed: u64,
    #[serde(rename = "K")]
    pub users: usize,
    #[serde(rename = "Nt")]
    pub antennas: usize,
    #[serde(rename = "N")]
    pub elements: usize,
    #[serde(rename = "E0_J")]
    pub energy_budget_j: f64,
    #[serde(rename = "p_max_W")]
    pub p_max_w: f64,
    pub m: Option<f64>,
    pub chi: Option<f64>,
    pub worst_eps: Option<f64>,
    #[serde(rename = "energy_J")]
    pub energy_j: Option<f64>,
    pub runtime_s: f64,
    /// Constraint violations of the emitted allocation (empty when clean).
    pub violations: Vec<String>,
    pub error: Option<String>,
}

/// Mean and standard deviation over the successful seeds of one scheme at
/// one grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub scheme: Scheme,
    pub grid_index: usize,
    #[serde(rename = "K")]
    pub users: usize,
    #[serde(rename = "Nt")]
    pub antennas: usize,
    #[serde(rename = "N")]
    pub elements: usize,
    #[serde(rename = "E0_J")]
    pub energy_budget_j: f64,
    #[serde(rename = "p_max_W")]
    pub p_max_w: f64,
    pub runs: usize,
    pub failures: usize,
    pub m_mean: f64,
    pub chi_mean: f64,
    pub chi_std: f64,
    pub worst_eps_mean: f64,
    pub worst_eps_std: f64,
    pub energy_j_mean: f64,
    pub runtime_s_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub param: Option<SweepParam>,
    pub values: Vec<f64>,
    pub rows: Vec<Row>,
    pub aggregates: Vec<Aggregate>,
}

/// Runs one scheme on the realization drawn from `cfg.seed`.
pub fn run_cell(scheme: Scheme, cfg: &SystemConfig) -> Result<RunOutput> {
    let positions = place_users(cfg, cfg.seed)?;
    let ch = realize_at(cfg, positions, cfg.seed)?;
    run_scheme(scheme, cfg, &ch)
}

fn make_row(scheme: Scheme, grid_index: usize, cfg: &SystemConfig, timing: bool) -> Row {
    let start = Instant::now();
    let outcome = run_cell(scheme, cfg);
    let runtime = if timing { start.elapsed().as_secs_f64() } else { 0.0 };
    let mut row = Row {
        scheme,
        grid_index,
        seed: cfg.seed,
        users: cfg.users,
        antennas: cfg.bs_antennas,
        elements: cfg.ris_elements,
        energy_budget_j: cfg.energy_budget_j,
        p_max_w: cfg.p_max_w.iter().copied().fold(0.0, f64::max),
        m: None,
        chi: None,
        worst_eps: None,
        energy_j: None,
        runtime_s: runtime,
        violations: Vec::new(),
        error: None,
    };
    match outcome {
        Ok(out) => {
            row.m = Some(out.allocation.blocklength);
            row.chi = Some(out.report.chi);
            row.worst_eps = Some(out.report.worst_eps);
            row.energy_j = Some(out.report.energy_j);
            row.violations = out.allocation.violations(cfg, Audit::default());
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

fn aggregate(rows: &[&Row]) -> Aggregate {
    let first = rows[0];
    let ok: Vec<&&Row> = rows.iter().filter(|r| r.error.is_none()).collect();
    let pick = |f: fn(&Row) -> Option<f64>| ok.iter().filter_map(|r| f(r)).collect::<Vec<f64>>();
    let (chi_mean, chi_std) = mean_std(&pick(|r| r.chi));
    let (worst_eps_mean, worst_eps_std) = mean_std(&pick(|r| r.worst_eps));
    Aggregate {
        scheme: first.scheme,
        grid_index: first.grid_index,
        users: first.users,
        antennas: first.antennas,
        elements: first.elements,
        energy_budget_j: first.energy_budget_j,
        p_max_w: first.p_max_w,
        runs: ok.len(),
        failures: rows.len() - ok.len(),
        m_mean: mean_std(&pick(|r| r.m)).0,
        chi_mean,
        chi_std,
        worst_eps_mean,
        worst_eps_std,
        energy_j_mean: mean_std(&pick(|r| r.energy_j)).0,
        runtime_s_mean: mean_std(&rows.iter().map(|r| r.runtime_s).collect::<Vec<_>>()).0,
    }
}

/// Every (grid point, seed, scheme) cell, run on `spec.jobs` threads. Rows
/// come back grouped by grid point, then scheme, then seed.
pub fn sweep(base: &SystemConfig, spec: &SweepSpec) -> Result<SweepTable> {
    if spec.seeds == 0 || spec.schemes.is_empty() {
        return Err(Error::Config("a sweep needs at least one seed and one scheme".into()));
    }
    let grid = spec.grid(base)?;
    let mut cells = Vec::new();
    for (g, cfg) in grid.iter().enumerate() {
        for &scheme in &spec.schemes {
            for s in 0..spec.seeds {
                let seed = cell_seed(base.seed, g, s, spec.fix_placement);
                cells.push((scheme, g, SystemConfig { seed, ..cfg.clone() }));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let rows: Vec<Row> =
        pool.install(|| cells.par_iter().map(|(scheme, g, cfg)| make_row(*scheme, *g, cfg, spec.timing)).collect());
    let aggregates = rows.chunks(spec.seeds).map(|chunk| aggregate(&chunk.iter().collect::<Vec<_>>())).collect();
    Ok(SweepTable { param: spec.param, values: spec.values.clone(), rows, aggregates })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    /// `json` for a `.json` extension, CSV otherwise.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV text: one line per row followed by one `mean` line per aggregate.
/// Single-seed tables skip the `mean` lines, which would only repeat the rows.
pub fn to_csv(table: &SweepTable) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in &table.rows {
        w.write_record([
            r.scheme.id().to_string(),
            r.seed.to_string(),
            r.users.to_string(),
            r.antennas.to_string(),
            r.elements.to_string(),
            r.energy_budget_j.to_string(),
            r.p_max_w.to_string(),
            cell(r.m),
            cell(r.chi),
            cell(r.worst_eps),
            cell(r.energy_j),
            r.runtime_s.to_string(),
        ])?;
    }
    let single_seed = table.rows.len() == table.aggregates.len();
    for a in table.aggregates.iter().filter(|_| !single_seed) {
        w.write_record([
            a.scheme.id().to_string(),
            "mean".to_string(),
            a.users.to_string(),
            a.antennas.to_string(),
            a.elements.to_string(),
            a.energy_budget_j.to_string(),
            a.p_max_w.to_string(),
            a.m_mean.to_string(),
            a.chi_mean.to_string(),
            a.worst_eps_mean.to_string(),
            a.energy_j_mean.to_string(),
            a.runtime_s_mean.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn to_json(table: &SweepTable) -> Result<String> {
    Ok(serde_json::to_string_pretty(table)? + "\n")
}

pub fn emit_report(table: &SweepTable, format: Format, path: &Path) -> Result<()> {
    if table.rows.is_empty() {
        return Err(Error::Config("nothing to write".into()));
    }
    let text = match format {
        Format::Csv => to_csv(table)?,
        Format::Json => to_json(table)?,
    };
    std::fs::write(path, text)?;
    Ok(())
}

/// What a single scenario run writes out.
#[derive(Debug, Serialize)]
pub struct RunRecord<'a> {
    pub scheme: Scheme,
    pub seed: u64,
    pub config: &'a SystemConfig,
    pub report: &'a MetricsReport,
    pub allocation: AllocationRecord,
    pub trace: &'a RunTrace,
    pub violations: Vec<String>,
}

impl<'a> RunRecord<'a> {
    pub fn new(scheme: Scheme, cfg: &'a SystemConfig, out: &'a RunOutput) -> Self {
        Self {
            scheme,
            seed: cfg.seed,
            config: cfg,
            report: &out.report,
            allocation: out.allocation.record(),
            trace: &out.trace,
            violations: out.allocation.violations(cfg, Audit::default()),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Parses a comma-separated value list such as `16,32,48`.
pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Error::Config(format!("`{t}` is not a number"))))
        .collect()
}

pub fn parse_schemes(text: &str) -> Result<Vec<Scheme>> {
    text.split(',').map(|t| t.trim().parse()).collect()
}
