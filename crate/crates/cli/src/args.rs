use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use subnav_core::DensityBand;

/// Submarine navigation under hidden currents: charts, value functions,
/// single rollouts and parameter sweeps.
#[derive(Debug, Parser)]
#[command(name = "subnav", version)]
pub struct Cli {
    /// Output root; every subcommand writes below it.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// Worker threads for solves and sweeps (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a chart and write it in text form.
    GenChart(GenChartArgs),
    /// Run value iteration for a chart and write the grid, a CSV and a PGM.
    Solve(SolveArgs),
    /// Run the sensing policy once and write a line-delimited log.
    Rollout(RolloutArgs),
    /// Sweep growth rate against current strength over chart ensembles.
    Sweep(SweepArgs),
    /// Convert charts, value grids and rollout logs to CSV/PGM.
    Render(RenderArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Band {
    Low,
    Medium,
    High,
}

impl From<Band> for DensityBand {
    fn from(b: Band) -> Self {
        match b {
            Band::Low => DensityBand::Low,
            Band::Medium => DensityBand::Medium,
            Band::High => DensityBand::High,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    NoCurrent,
    KnownCurrent,
}

#[derive(Debug, Args)]
pub struct GenChartArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "medium")]
    pub band: Band,
    /// File name under the output root (default: chart-<band>-<seed>.chart).
    #[arg(long)]
    pub name: Option<String>,
}

/// Target placement shared by `solve` and `rollout`.
#[derive(Debug, Args)]
pub struct TargetArgs {
    /// Target centre x (default: drawn from --seed).
    #[arg(long, requires = "target_y")]
    pub target_x: Option<f64>,
    /// Target centre y (default: drawn from --seed).
    #[arg(long, requires = "target_x")]
    pub target_y: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub target_radius: f64,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Chart file written by gen-chart.
    #[arg(long)]
    pub chart: PathBuf,
    #[command(flatten)]
    pub target: TargetArgs,
    /// Seed for the target draw when no centre is given.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.95)]
    pub gamma: f64,
    /// Grid nodes per axis.
    #[arg(long, default_value_t = 152)]
    pub resolution: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long, value_enum, default_value = "no-current")]
    pub variant: VariantArg,
    /// Current strength for the known-current variant.
    #[arg(long, default_value_t = 0.0)]
    pub w_max: f64,
    /// Clamp the current magnitude to --w-max (known-current variant).
    #[arg(long, default_value_t = false)]
    pub clamp_current: bool,
}

#[derive(Debug, Args)]
pub struct RolloutArgs {
    /// Chart file; without it the chart is the sweep's chart for
    /// --band/--chart-index/--base-seed.
    #[arg(long)]
    pub chart: Option<PathBuf>,
    /// Placement seed for target and starts on a --chart file.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "medium")]
    pub band: Band,
    #[arg(long, default_value_t = 0)]
    pub chart_index: usize,
    #[arg(long, default_value_t = 0)]
    pub start_index: usize,
    /// Starts drawn per chart; must match the sweep being replayed.
    #[arg(long, default_value_t = 5)]
    pub starts_per_chart: usize,
    #[arg(long, default_value_t = 2024)]
    pub base_seed: u64,
    /// Growth rate of the current uncertainty per action.
    #[arg(long, default_value_t = 0.0)]
    pub growth_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    pub w_max: f64,
    #[arg(long, default_value_t = 0.95)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.5)]
    pub target_radius: f64,
    #[arg(long, default_value_t = 5)]
    pub quadrature_resolution: usize,
    #[arg(long, default_value_t = 0.5)]
    pub gps_current_decay: f64,
    #[arg(long, default_value_t = 25)]
    pub step_cap: usize,
    /// Clamp the true current magnitude to --w-max.
    #[arg(long, default_value_t = false)]
    pub clamp_current: bool,
    /// Log file name under the output root.
    #[arg(long, default_value = "rollout.jsonl")]
    pub log: String,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// TOML config; unset fields take the preset's values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Starting point when no config file is given: desk, paper or fine.
    #[arg(long, default_value = "desk")]
    pub preset: String,
    /// Overrides, applied after the config file.
    #[command(flatten)]
    pub overrides: SweepOverrides,
}

#[derive(Debug, Default, Args)]
pub struct SweepOverrides {
    /// Comma-separated bands (default: from config).
    #[arg(long, value_enum, value_delimiter = ',')]
    pub bands: Option<Vec<Band>>,
    /// Charts in the low band (default: from config).
    #[arg(long)]
    pub charts_low: Option<usize>,
    /// Charts in the medium band (default: from config).
    #[arg(long)]
    pub charts_medium: Option<usize>,
    /// Charts in the high band (default: from config).
    #[arg(long)]
    pub charts_high: Option<usize>,
    /// (default: from config)
    #[arg(long)]
    pub starts_per_chart: Option<usize>,
    /// Comma-separated growth rates (default: from config).
    #[arg(long, value_delimiter = ',')]
    pub g_values: Option<Vec<f64>>,
    /// Comma-separated current strengths (default: from config).
    #[arg(long, value_delimiter = ',')]
    pub wmax_values: Option<Vec<f64>>,
    /// (default: from config)
    #[arg(long)]
    pub step_cap: Option<usize>,
    /// Alternate cap, 0 to disable (default: from config).
    #[arg(long)]
    pub alt_cap_report: Option<usize>,
    /// (default: from config)
    #[arg(long)]
    pub base_seed: Option<u64>,
    /// (default: from config)
    #[arg(long)]
    pub gamma: Option<f64>,
    /// (default: from config)
    #[arg(long)]
    pub target_radius: Option<f64>,
    /// (default: from config)
    #[arg(long)]
    pub quadrature_resolution: Option<usize>,
    /// (default: from config)
    #[arg(long)]
    pub gps_current_decay: Option<f64>,
    /// (default: from config)
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Directory for solved value grids (default: from config).
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Clamp the true current magnitude to w_max (default: from config).
    #[arg(long)]
    pub clamp_current: Option<bool>,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("input").required(true).multiple(true))]
pub struct RenderArgs {
    /// Chart file to draw as a land-height PGM.
    #[arg(long, group = "input")]
    pub chart: Option<PathBuf>,
    /// Value grid to write as CSV and PGM.
    #[arg(long, group = "input")]
    pub value: Option<PathBuf>,
    /// Rollout log to flatten into a CSV.
    #[arg(long, group = "input")]
    pub log: Option<PathBuf>,
    /// Pixels per axis for chart images.
    #[arg(long, default_value_t = 256)]
    pub size: usize,
}
