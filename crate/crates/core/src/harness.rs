//! Parameter sweeps over growth rate and current strength.
//!
//! Each density band gets its own chart ensemble. A chart is solved once,
//! and the same target and start set is reused in every `(g, w_max)` cell,
//! so neighbouring cells are paired comparisons. All randomness comes from
//! stable hashes of the sweep indices, and reduction happens in index order,
//! so results do not depend on the worker count.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::{debug, info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::belief::{run_trajectory, Outcome, PolicyContext, PolicyParams, TrajectoryLog};
use crate::chart::{sample_chart, sample_free_position, sample_free_position_where, Chart, DensityBand};
use crate::clearance::Terrain;
use crate::currents::CurrentSpec;
use crate::dynamics::TargetRegion;
use crate::error::{Error, Result};
use crate::export::{create, fmt_exact, gray, write_pgm};
use crate::geom::{Domain, Vec2};
use crate::valueiter::{argmin, greedy_q_values, value_iteration, SolveConfig, ValueGrid};

/// Charts generated per density band.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BandCounts {
    pub low: usize,
    pub medium: usize,
    pub high: usize,
}

impl BandCounts {
    pub fn get(&self, band: DensityBand) -> usize {
        match band {
            DensityBand::Low => self.low,
            DensityBand::Medium => self.medium,
            DensityBand::High => self.high,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub bands: Vec<DensityBand>,
    pub charts_per_band: BandCounts,
    pub starts_per_chart: usize,
    pub g_values: Vec<f64>,
    pub wmax_values: Vec<f64>,
    pub step_cap: usize,
    /// Second cap to classify outcomes at, reported alongside.
    pub alt_cap_report: Option<usize>,
    pub base_seed: u64,
    pub gamma: f64,
    pub target_radius: f64,
    pub quadrature_resolution: usize,
    pub gps_current_decay: f64,
    /// Value-grid nodes per axis.
    pub resolution: usize,
    /// Where solved value grids are kept between runs, if anywhere.
    pub cache_dir: Option<PathBuf>,
    /// Clamp the true current magnitude to `w_max`.
    pub clamp_current: bool,
}

fn grid_values(step: f64) -> Vec<f64> {
    let n = (1.0 / step).round() as usize;
    (0..=n).map(|k| k as f64 / n as f64).collect()
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig::desk()
    }
}

impl SweepConfig {
    /// Small ensembles, `0.1` grid spacing.
    pub fn desk() -> Self {
        SweepConfig {
            bands: DensityBand::ALL.to_vec(),
            charts_per_band: BandCounts {
                low: 10,
                medium: 15,
                high: 25,
            },
            starts_per_chart: 5,
            g_values: grid_values(0.1),
            wmax_values: grid_values(0.1),
            step_cap: 25,
            alt_cap_report: Some(20),
            base_seed: 2024,
            gamma: 0.95,
            target_radius: TargetRegion::DEFAULT_RADIUS,
            quadrature_resolution: 5,
            gps_current_decay: 0.5,
            resolution: crate::valueiter::DEFAULT_RESOLUTION,
            cache_dir: None,
            clamp_current: false,
        }
    }

    /// Full-size ensembles; hours of compute.
    pub fn paper() -> Self {
        SweepConfig {
            charts_per_band: BandCounts {
                low: 100,
                medium: 150,
                high: 250,
            },
            starts_per_chart: 10,
            ..SweepConfig::desk()
        }
    }

    /// Desk ensembles on a `0.05` grid.
    pub fn fine() -> Self {
        SweepConfig {
            g_values: grid_values(0.05),
            wmax_values: grid_values(0.05),
            ..SweepConfig::desk()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "paper" => Ok(Self::paper()),
            "fine" => Ok(Self::fine()),
            other => Err(Error::Config(format!("unknown preset `{other}` (desk, paper, fine)"))),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SweepConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.bands.is_empty() {
            return bad("no density bands selected".into());
        }
        for band in &self.bands {
            if self.charts_per_band.get(*band) == 0 {
                return bad(format!("charts_per_band.{band} must be at least 1"));
            }
        }
        if self.starts_per_chart == 0 || self.step_cap == 0 || self.alt_cap_report == Some(0) {
            return bad("starts_per_chart, step_cap and alt_cap_report must be at least 1".into());
        }
        for (name, values) in [("g_values", &self.g_values), ("wmax_values", &self.wmax_values)] {
            if values.is_empty() {
                return bad(format!("{name} is empty"));
            }
            if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return bad(format!("{name} must lie in [0, 1]"));
            }
            if values.windows(2).any(|w| w[0] >= w[1]) {
                return bad(format!("{name} must be strictly increasing"));
            }
        }
        if !(self.target_radius > 0.0) {
            return bad("target_radius must be positive".into());
        }
        if self.resolution < 2 {
            return bad("resolution must be at least 2".into());
        }
        self.policy(0.0).validate().or_else(|e| bad(e.to_string()))
    }

    /// Policy parameters for growth rate `g`. Trajectories run to the larger
    /// of the two caps so both classifications come from one rollout.
    pub fn policy(&self, g: f64) -> PolicyParams {
        PolicyParams {
            growth_rate: g,
            gamma: self.gamma,
            quadrature_resolution: self.quadrature_resolution,
            step_cap: self.step_cap.max(self.alt_cap_report.unwrap_or(0)),
            gps_current_decay: self.gps_current_decay,
            ..PolicyParams::default()
        }
    }

    pub fn current(&self, w_max: f64) -> CurrentSpec {
        CurrentSpec {
            clamp_magnitude: self.clamp_current,
            ..CurrentSpec::new(w_max)
        }
    }

    pub fn solve_config(&self) -> SolveConfig {
        SolveConfig {
            resolution: self.resolution,
            gamma: self.gamma,
            ..SolveConfig::default()
        }
    }

    pub fn episodes_per_cell(&self, band: DensityBand) -> usize {
        self.charts_per_band.get(band) * self.starts_per_chart
    }
}

/// Stable 64-bit seed from a list of integers.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.to_le_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

fn band_code(band: DensityBand) -> u64 {
    band as u64
}

/// A chart with its target, solved value grid and start positions.
pub struct ChartCase {
    pub band: DensityBand,
    pub index: usize,
    /// Placement attempts that were discarded before this one.
    pub attempt: u64,
    pub terrain: Terrain,
    pub target: TargetRegion,
    pub grid: ValueGrid,
    pub starts: Vec<Vec2>,
}

const MAX_ATTEMPTS: u64 = 64;

/// A start is usable when the one-step lookahead under the agent's model
/// already expects to reach the target.
pub fn admissible_start(grid: &ValueGrid, terrain: &Terrain, target: &TargetRegion, p: Vec2) -> bool {
    !target.contains(terrain, p) && argmin(&greedy_q_values(grid, terrain, target, p)).1 < 0.0
}

/// Draws a target and start set on `chart` from `seed`, and solves it.
/// `Ok(None)` means the chart has no room for them.
pub fn place_on_chart(cfg: &SweepConfig, chart: Chart, seed: u64) -> Result<Option<(Terrain, TargetRegion, ValueGrid, Vec<Vec2>)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let Ok(center) = sample_free_position(&chart, &mut rng, None) else {
        return Ok(None);
    };
    let target = TargetRegion::new(center, cfg.target_radius);
    let terrain = Terrain::new(chart);
    let grid = solve_cached(cfg, &terrain, &target)?;
    let mut starts = Vec::with_capacity(cfg.starts_per_chart);
    for _ in 0..cfg.starts_per_chart {
        match sample_free_position_where(terrain.chart(), &mut rng, Some((center, cfg.target_radius)), |p| {
            admissible_start(&grid, &terrain, &target, p)
        }) {
            Ok(p) => starts.push(p),
            Err(_) => return Ok(None),
        }
    }
    Ok(Some((terrain, target, grid, starts)))
}

/// Builds chart `index` of `band`; a chart whose target or starts cannot
/// be placed is redrawn from the next attempt seed.
pub fn build_case(cfg: &SweepConfig, band: DensityBand, index: usize) -> Result<ChartCase> {
    for attempt in 0..MAX_ATTEMPTS {
        let seed = derive_seed(&[cfg.base_seed, band_code(band), index as u64, attempt]);
        let chart = sample_chart(seed, band, Domain::default());
        match place_on_chart(cfg, chart, derive_seed(&[seed, 1]))? {
            Some((terrain, target, grid, starts)) => {
                return Ok(ChartCase {
                    band,
                    index,
                    attempt,
                    terrain,
                    target,
                    grid,
                    starts,
                })
            }
            None => warn!("{band} chart {index}: no room for target and starts, redrawing (attempt {attempt})"),
        }
    }
    Err(Error::Placement {
        attempts: MAX_ATTEMPTS as usize,
    })
}

fn cache_path(dir: &Path, chart: &Chart, target: &TargetRegion, cfg: &SolveConfig) -> PathBuf {
    let key = derive_seed(&[
        chart.chart_hash(),
        target.center.x.to_bits(),
        target.center.y.to_bits(),
        target.radius.to_bits(),
        cfg.gamma.to_bits(),
        cfg.resolution as u64,
    ]);
    dir.join(format!("{key:016x}.vgrid"))
}

/// Solves the no-current model, reusing a cached grid when every key field
/// matches.
pub fn solve_cached(cfg: &SweepConfig, terrain: &Terrain, target: &TargetRegion) -> Result<ValueGrid> {
    let solve = cfg.solve_config();
    let Some(dir) = &cfg.cache_dir else {
        return value_iteration(terrain, target, &solve);
    };
    let path = cache_path(dir, terrain.chart(), target, &solve);
    if let Ok(grid) = ValueGrid::load(&path) {
        if grid.matches(terrain.chart_hash(), solve.gamma, target, solve.variant, solve.resolution) {
            debug!("value cache hit {}", path.display());
            return Ok(grid);
        }
        warn!("stale value cache {}, re-solving", path.display());
    }
    let grid = value_iteration(terrain, target, &solve)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    grid.save(&path)?;
    Ok(grid)
}

/// Outcome of `log` as if the episode had been cut off after `cap` actions.
pub fn classify_outcome(log: &TrajectoryLog, cap: usize) -> Outcome {
    match log.terminal() {
        Some((step, c)) if step <= cap => {
            if c < 0.0 {
                Outcome::Success
            } else {
                Outcome::Crash
            }
        }
        _ => Outcome::Timeout,
    }
}

/// Total measurement cost over total actions.
///
/// # Panics
/// If `logs` is empty.
pub fn aggregate_measurement_cost<'a, I>(logs: I) -> f64
where
    I: IntoIterator<Item = &'a TrajectoryLog>,
{
    let mut cost = 0.0;
    let mut actions = 0usize;
    let mut episodes = 0usize;
    for log in logs {
        cost += log.measurement_cost;
        actions += log.actions();
        episodes += 1;
    }
    assert!(episodes > 0, "no episodes to aggregate");
    if actions == 0 {
        0.0
    } else {
        cost / actions as f64
    }
}

/// What the sweep keeps from one trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeSummary {
    pub outcome: Outcome,
    pub alt_outcome: Option<Outcome>,
    /// Actions taken within the primary cap.
    pub actions: usize,
    pub measurement_cost: f64,
}

impl EpisodeSummary {
    pub fn from_log(log: &TrajectoryLog, cap: usize, alt_cap: Option<usize>) -> Self {
        let within = &log.steps[..log.steps.len().min(cap)];
        EpisodeSummary {
            outcome: classify_outcome(log, cap),
            alt_outcome: alt_cap.map(|c| classify_outcome(log, c)),
            actions: within.len(),
            measurement_cost: within.iter().fold(0.0, |acc, s| acc + s.cost.measurement),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OutcomeCounts {
    pub success: usize,
    pub crash: usize,
    pub timeout: usize,
}

impl OutcomeCounts {
    fn add(&mut self, o: Outcome) {
        match o {
            Outcome::Success => self.success += 1,
            Outcome::Crash => self.crash += 1,
            Outcome::Timeout => self.timeout += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.success + self.crash + self.timeout
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellStats {
    pub band: DensityBand,
    pub g: f64,
    pub w_max: f64,
    pub n: usize,
    pub success_rate: f64,
    pub crash_rate: f64,
    pub timeout_rate: f64,
    pub mean_meas_cost: f64,
    pub mean_steps: f64,
    /// Rates at the alternate cap, when one is configured.
    pub alt: Option<AltStats>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AltStats {
    pub cap: usize,
    pub success_rate: f64,
    pub crash_rate: f64,
    pub timeout_rate: f64,
}

fn rates(c: &OutcomeCounts) -> (f64, f64, f64) {
    let n = c.total() as f64;
    (c.success as f64 / n, c.crash as f64 / n, c.timeout as f64 / n)
}

impl CellStats {
    fn from_episodes(band: DensityBand, g: f64, w_max: f64, alt_cap: Option<usize>, eps: &[EpisodeSummary]) -> Self {
        let mut main = OutcomeCounts::default();
        let mut alt = OutcomeCounts::default();
        let (mut cost, mut actions) = (0.0, 0usize);
        for e in eps {
            main.add(e.outcome);
            if let Some(o) = e.alt_outcome {
                alt.add(o);
            }
            cost += e.measurement_cost;
            actions += e.actions;
        }
        let (success_rate, crash_rate, timeout_rate) = rates(&main);
        CellStats {
            band,
            g,
            w_max,
            n: eps.len(),
            success_rate,
            crash_rate,
            timeout_rate,
            mean_meas_cost: if actions == 0 { 0.0 } else { cost / actions as f64 },
            mean_steps: actions as f64 / eps.len() as f64,
            alt: alt_cap.map(|cap| {
                let (s, c, t) = rates(&alt);
                AltStats {
                    cap,
                    success_rate: s,
                    crash_rate: c,
                    timeout_rate: t,
                }
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub config: SweepConfig,
    /// Band-major, then `g`, then `w_max`, in config order.
    pub cells: Vec<CellStats>,
}

impl SweepResult {
    pub fn cell(&self, band: DensityBand, g: f64, w_max: f64) -> Option<&CellStats> {
        self.cells.iter().find(|c| c.band == band && c.g == g && c.w_max == w_max)
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.config.bands.len(), self.config.g_values.len(), self.config.wmax_values.len())
    }
}

/// Index of the growth rate whose episodes stand in for `g_values[gi]` at
/// `w_max`. Once `g >= w_max` the growth step always lands on the cap, so
/// every such rate yields the same trajectory.
fn representative_g(g_values: &[f64], gi: usize, w_max: f64) -> usize {
    if g_values[gi] < w_max {
        gi
    } else {
        g_values.iter().position(|&g| g >= w_max).unwrap()
    }
}

/// Runs every episode of one chart; output is indexed `[g][w][start]`.
fn run_case(cfg: &SweepConfig, case: &ChartCase) -> Vec<EpisodeSummary> {
    let (ng, nw, ns) = (cfg.g_values.len(), cfg.wmax_values.len(), case.starts.len());
    let slot = |gi: usize, wi: usize, si: usize| (gi * nw + wi) * ns + si;
    let jobs: Vec<(usize, usize, usize)> = (0..ng)
        .flat_map(|gi| (0..nw).flat_map(move |wi| (0..ns).map(move |si| (gi, wi, si))))
        .filter(|&(gi, wi, _)| representative_g(&cfg.g_values, gi, cfg.wmax_values[wi]) == gi)
        .collect();
    let done: Vec<EpisodeSummary> = jobs
        .par_iter()
        .map(|&(gi, wi, si)| {
            let params = cfg.policy(cfg.g_values[gi]);
            let spec = cfg.current(cfg.wmax_values[wi]);
            let ctx = PolicyContext::new(&case.terrain, &case.grid, &case.target, &spec, &params);
            let log = run_trajectory(&ctx, case.starts[si]);
            EpisodeSummary::from_log(&log, cfg.step_cap, cfg.alt_cap_report)
        })
        .collect();
    let mut by_slot = vec![None; ng * nw * ns];
    for (&(gi, wi, si), e) in jobs.iter().zip(done) {
        by_slot[slot(gi, wi, si)] = Some(e);
    }
    (0..ng * nw * ns)
        .map(|k| {
            let (gi, wi, si) = (k / (nw * ns), k / ns % nw, k % ns);
            by_slot[slot(representative_g(&cfg.g_values, gi, cfg.wmax_values[wi]), wi, si)].unwrap()
        })
        .collect()
}

/// Runs the whole sweep on the current rayon pool.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let (ng, nw) = (cfg.g_values.len(), cfg.wmax_values.len());
    let mut cells = Vec::with_capacity(cfg.bands.len() * ng * nw);
    for &band in &cfg.bands {
        let charts = cfg.charts_per_band.get(band);
        info!("{band}: {charts} charts x {} starts x {ng} x {nw} cells", cfg.starts_per_chart);
        let per_chart: Vec<Vec<EpisodeSummary>> = (0..charts)
            .into_par_iter()
            .map(|index| {
                let case = build_case(cfg, band, index)?;
                debug!("{band} chart {index} ready after {} redraws", case.attempt);
                Ok(run_case(cfg, &case))
            })
            .collect::<Result<_>>()?;
        let s = cfg.starts_per_chart;
        for gi in 0..ng {
            for wi in 0..nw {
                let eps: Vec<EpisodeSummary> = per_chart
                    .iter()
                    .flat_map(|chart| chart[(gi * nw + wi) * s..(gi * nw + wi + 1) * s].iter().copied())
                    .collect();
                cells.push(CellStats::from_episodes(band, cfg.g_values[gi], cfg.wmax_values[wi], cfg.alt_cap_report, &eps));
            }
        }
    }
    Ok(SweepResult {
        config: cfg.clone(),
        cells,
    })
}

/// [`run_sweep`] on a dedicated pool of `threads` workers.
pub fn run_sweep_with_threads(cfg: &SweepConfig, threads: usize) -> Result<SweepResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_sweep(cfg))
}

pub const RESULTS_HEADER: &str = "band,g,w_max,n,success_rate,crash_rate,timeout_rate,mean_meas_cost,mean_steps";

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = create(path)?;
    f.write_all(bytes)
        .and_then(|_| f.flush())
        .map_err(|e| Error::io(path, e))
}

fn matrix_csv(cfg: &SweepConfig, value: impl Fn(usize, usize) -> f64) -> String {
    let mut s = String::from("g\\w_max");
    for w in &cfg.wmax_values {
        write!(s, ",{}", fmt_exact(*w)).unwrap();
    }
    s.push('\n');
    for (gi, g) in cfg.g_values.iter().enumerate() {
        s.push_str(&fmt_exact(*g));
        for wi in 0..cfg.wmax_values.len() {
            write!(s, ",{}", fmt_exact(value(gi, wi))).unwrap();
        }
        s.push('\n');
    }
    s
}

/// Writes `results.csv`, `alt_cap.csv` (when configured), the config used,
/// and per-band success/crash matrices as CSV and PGM. Returns the paths.
pub fn emit_results(result: &SweepResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let cfg = &result.config;
    let mut written = Vec::new();

    let mut main = format!("{RESULTS_HEADER}\n");
    let mut alt = String::from("band,g,w_max,n,cap,success_rate,crash_rate,timeout_rate\n");
    for c in &result.cells {
        writeln!(
            main,
            "{},{},{},{},{},{},{},{},{}",
            c.band,
            fmt_exact(c.g),
            fmt_exact(c.w_max),
            c.n,
            fmt_exact(c.success_rate),
            fmt_exact(c.crash_rate),
            fmt_exact(c.timeout_rate),
            fmt_exact(c.mean_meas_cost),
            fmt_exact(c.mean_steps)
        )
        .unwrap();
        if let Some(a) = &c.alt {
            writeln!(
                alt,
                "{},{},{},{},{},{},{},{}",
                c.band,
                fmt_exact(c.g),
                fmt_exact(c.w_max),
                c.n,
                a.cap,
                fmt_exact(a.success_rate),
                fmt_exact(a.crash_rate),
                fmt_exact(a.timeout_rate)
            )
            .unwrap();
        }
    }
    let mut put = |name: String, bytes: &[u8]| -> Result<()> {
        let path = dir.join(name);
        write_bytes(&path, bytes)?;
        written.push(path);
        Ok(())
    };
    put("results.csv".into(), main.as_bytes())?;
    if cfg.alt_cap_report.is_some() {
        put("alt_cap.csv".into(), alt.as_bytes())?;
    }
    put("sweep_config.toml".into(), cfg.to_toml().as_bytes())?;

    let (ng, nw) = (cfg.g_values.len(), cfg.wmax_values.len());
    for (bi, band) in cfg.bands.iter().enumerate() {
        let block = &result.cells[bi * ng * nw..(bi + 1) * ng * nw];
        let metrics: [(&str, fn(&CellStats) -> f64); 2] = [("success", |c| c.success_rate), ("crash", |c| c.crash_rate)];
        for (name, pick) in metrics {
            put(format!("{band}_{name}.csv"), matrix_csv(cfg, |gi, wi| pick(&block[gi * nw + wi])).as_bytes())?;
            // one pixel per cell, g down the rows
            let pixels: Vec<u8> = block.iter().map(|c| gray(pick(c), 0.0, 1.0, 255)).collect();
            let mut pgm = Vec::new();
            write_pgm(&mut pgm, nw, ng, &pixels).expect("writing to memory");
            put(format!("{band}_{name}.pgm"), &pgm)?;
        }
    }
    Ok(written)
}

/// One parsed row of `results.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub band: DensityBand,
    pub g: f64,
    pub w_max: f64,
    pub n: usize,
    pub success_rate: f64,
    pub crash_rate: f64,
    pub timeout_rate: f64,
    pub mean_meas_cost: f64,
    pub mean_steps: f64,
}

impl From<&CellStats> for ResultRow {
    fn from(c: &CellStats) -> Self {
        ResultRow {
            band: c.band,
            g: c.g,
            w_max: c.w_max,
            n: c.n,
            success_rate: c.success_rate,
            crash_rate: c.crash_rate,
            timeout_rate: c.timeout_rate,
            mean_meas_cost: c.mean_meas_cost,
            mean_steps: c.mean_steps,
        }
    }
}

pub fn parse_results_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == RESULTS_HEADER => {}
        _ => return Err(Error::parse(1, "missing results header")),
    }
    lines
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let err = |m: String| Error::parse(i + 1, m);
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 9 {
                return Err(err(format!("expected 9 fields, found {}", f.len())));
            }
            let num = |k: usize| f[k].parse::<f64>().map_err(|e| err(format!("field {}: {e}", k + 1)));
            Ok(ResultRow {
                band: f[0].parse().map_err(|e: Error| err(e.to_string()))?,
                g: num(1)?,
                w_max: num(2)?,
                n: f[3].parse().map_err(|e| err(format!("field 4: {e}")))?,
                success_rate: num(4)?,
                crash_rate: num(5)?,
                timeout_rate: num(6)?,
                mean_meas_cost: num(7)?,
                mean_steps: num(8)?,
            })
        })
        .collect()
}

pub fn load_results_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_results_csv(&text)
}
