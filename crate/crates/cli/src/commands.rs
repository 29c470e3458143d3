use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use subnav_core::chart::sample_free_position;
use subnav_core::export::{fmt_exact, write_pgm_file};
use subnav_core::harness::{self, emit_results, run_sweep, SweepConfig};
use subnav_core::{
    run_trajectory, sample_chart, value_iteration, Chart, CurrentSpec, DensityBand, Domain, PolicyContext, SolveConfig,
    TargetRegion, Terrain, ValueGrid, Variant, Vec2,
};

use crate::args::{GenChartArgs, RenderArgs, RolloutArgs, SolveArgs, SweepArgs, SweepOverrides, VariantArg};

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn read_chart(path: &Path) -> Result<Chart> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Chart::from_text(&text).with_context(|| format!("parsing chart {}", path.display()))
}

pub fn gen_chart(out: &Path, a: &GenChartArgs) -> Result<PathBuf> {
    let band: DensityBand = a.band.into();
    let chart = sample_chart(a.seed, band, Domain::default());
    ensure_dir(out)?;
    let name = a.name.clone().unwrap_or_else(|| format!("chart-{band}-{}.chart", a.seed));
    let path = out.join(name);
    write_file(&path, chart.to_text().as_bytes())?;
    println!("{}: {} islands ({band}, seed {})", path.display(), chart.islands.len(), a.seed);
    Ok(path)
}

fn target_from(chart: &Chart, x: Option<f64>, y: Option<f64>, radius: f64, seed: u64) -> Result<TargetRegion> {
    ensure!(radius > 0.0, "--target-radius must be positive");
    let center = match (x, y) {
        (Some(x), Some(y)) => Vec2::new(x, y),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            sample_free_position(chart, &mut rng, None).with_context(|| format!("placing target with seed {seed}"))?
        }
    };
    Ok(TargetRegion::new(center, radius))
}

pub fn solve(out: &Path, a: &SolveArgs) -> Result<()> {
    let chart = read_chart(&a.chart)?;
    let target = target_from(&chart, a.target.target_x, a.target.target_y, a.target.target_radius, a.seed)?;
    let variant = match a.variant {
        VariantArg::NoCurrent => Variant::NoCurrent,
        VariantArg::KnownCurrent => Variant::KnownCurrent,
    };
    ensure!((0.0..=1.0).contains(&a.w_max), "--w-max must lie in [0, 1]");
    let cfg = SolveConfig {
        resolution: a.resolution,
        gamma: a.gamma,
        tol: a.tol,
        max_iter: a.max_iter,
        variant,
        current: CurrentSpec {
            clamp_magnitude: a.clamp_current,
            ..CurrentSpec::new(a.w_max)
        },
        ..SolveConfig::default()
    };
    let terrain = Terrain::new(chart);
    let grid = value_iteration(&terrain, &target, &cfg)
        .with_context(|| format!("solving {} (target seed {})", a.chart.display(), a.seed))?;
    ensure_dir(out)?;
    grid.save(&out.join("value.vgrid"))?;
    grid.write_pgm(&out.join("value.pgm"))?;
    let csv = out.join("value.csv");
    let mut w = BufWriter::new(fs::File::create(&csv).with_context(|| format!("creating {}", csv.display()))?);
    grid.write_csv(&mut w)
        .and_then(|_| w.flush())
        .with_context(|| format!("writing {}", csv.display()))?;
    println!(
        "solved in {} sweeps (final residual {:e}); target ({:.4}, {:.4}) r {}",
        grid.iterations,
        grid.final_residual(),
        target.center.x,
        target.center.y,
        target.radius
    );
    Ok(())
}

pub fn rollout(out: &Path, a: &RolloutArgs) -> Result<()> {
    ensure!(
        a.start_index < a.starts_per_chart,
        "--start-index {} is out of range for {} starts per chart",
        a.start_index,
        a.starts_per_chart
    );
    let cfg = SweepConfig {
        starts_per_chart: a.starts_per_chart,
        base_seed: a.base_seed,
        gamma: a.gamma,
        target_radius: a.target_radius,
        quadrature_resolution: a.quadrature_resolution,
        gps_current_decay: a.gps_current_decay,
        step_cap: a.step_cap,
        clamp_current: a.clamp_current,
        ..SweepConfig::desk()
    };
    ensure!((0.0..=1.0).contains(&a.w_max), "--w-max must lie in [0, 1]");
    let mut params = cfg.policy(a.growth_rate);
    params.step_cap = a.step_cap;
    params.validate()?;

    let (terrain, target, grid, starts, origin) = match &a.chart {
        Some(path) => {
            let chart = read_chart(path)?;
            let placed = harness::place_on_chart(&cfg, chart, a.seed)?
                .with_context(|| format!("no room for target and start on {} (seed {})", path.display(), a.seed))?;
            (placed.0, placed.1, placed.2, placed.3, format!("{} seed {}", path.display(), a.seed))
        }
        None => {
            let band: DensityBand = a.band.into();
            let case = harness::build_case(&cfg, band, a.chart_index)
                .with_context(|| format!("building {band} chart {} (base seed {})", a.chart_index, a.base_seed))?;
            let origin = format!("{band} chart {} base seed {}", a.chart_index, a.base_seed);
            (case.terrain, case.target, case.grid, case.starts, origin)
        }
    };
    let start = starts[a.start_index];
    let spec = cfg.current(a.w_max);
    let ctx = PolicyContext::new(&terrain, &grid, &target, &spec, &params);
    let log = run_trajectory(&ctx, start);

    ensure_dir(out)?;
    let path = out.join(&a.log);
    let mut w = BufWriter::new(fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?);
    log.write_jsonl(&mut w)
        .and_then(|_| w.flush())
        .with_context(|| format!("writing {}", path.display()))?;
    println!(
        "{origin}, start {}: {:?} after {} actions, cost {:.4} (measurement {:.2}); log {}",
        a.start_index,
        log.outcome,
        log.actions(),
        log.total_cost,
        log.measurement_cost,
        path.display()
    );
    Ok(())
}

fn apply_overrides(cfg: &mut SweepConfig, o: &SweepOverrides) {
    if let Some(b) = &o.bands {
        cfg.bands = b.iter().map(|&b| b.into()).collect();
    }
    macro_rules! set {
        ($($field:ident).+ <- $value:expr) => {
            if let Some(v) = $value.clone() {
                cfg.$($field).+ = v;
            }
        };
    }
    set!(charts_per_band.low <- o.charts_low);
    set!(charts_per_band.medium <- o.charts_medium);
    set!(charts_per_band.high <- o.charts_high);
    set!(starts_per_chart <- o.starts_per_chart);
    set!(g_values <- o.g_values);
    set!(wmax_values <- o.wmax_values);
    set!(step_cap <- o.step_cap);
    set!(base_seed <- o.base_seed);
    set!(gamma <- o.gamma);
    set!(target_radius <- o.target_radius);
    set!(quadrature_resolution <- o.quadrature_resolution);
    set!(gps_current_decay <- o.gps_current_decay);
    set!(resolution <- o.resolution);
    set!(clamp_current <- o.clamp_current);
    if let Some(c) = o.alt_cap_report {
        cfg.alt_cap_report = (c > 0).then_some(c);
    }
    if let Some(d) = &o.cache_dir {
        cfg.cache_dir = Some(d.clone());
    }
}

pub fn sweep(out: &Path, a: &SweepArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(path) => SweepConfig::load(path)?,
        None => SweepConfig::preset(&a.preset)?,
    };
    apply_overrides(&mut cfg, &a.overrides);
    cfg.validate()?;
    info!("sweep config:\n{}", cfg.to_toml());
    let result = run_sweep(&cfg)?;
    let files = emit_results(&result, out)?;
    for c in &result.cells {
        println!(
            "{:<6} g {:.2} w_max {:.2}: success {:.3} crash {:.3} timeout {:.3} meas/action {:.3}",
            c.band.as_str(),
            c.g,
            c.w_max,
            c.success_rate,
            c.crash_rate,
            c.timeout_rate,
            c.mean_meas_cost
        );
    }
    println!("wrote {} files under {}", files.len(), out.display());
    Ok(())
}

const LOG_COLUMNS: [&str; 18] = [
    "step",
    "x",
    "y",
    "est_x",
    "est_y",
    "sigma_p",
    "est_wx",
    "est_wy",
    "sigma_w",
    "heading",
    "throttle",
    "measurements",
    "cost_position",
    "cost_fuel",
    "cost_measurement",
    "end_x",
    "end_y",
    "t_prime",
];

fn log_to_csv(path: &Path) -> Result<String> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut csv = LOG_COLUMNS.join(",");
    csv.push('\n');
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.with_context(|| format!("reading {}", path.display()))?;
        let row: serde_json::Value =
            serde_json::from_str(&line).with_context(|| format!("{}:{}: not JSON", path.display(), n + 1))?;
        if row.get("outcome").is_some() {
            continue;
        }
        let mut fields = Vec::with_capacity(LOG_COLUMNS.len());
        for col in LOG_COLUMNS {
            let v = row
                .get(col)
                .with_context(|| format!("{}:{}: missing `{col}`", path.display(), n + 1))?;
            fields.push(match v {
                serde_json::Value::Array(items) => items
                    .iter()
                    .map(|i| i.as_str().unwrap_or_default().to_string())
                    .collect::<Vec<_>>()
                    .join("+"),
                serde_json::Value::Number(x) if x.is_f64() => fmt_exact(x.as_f64().unwrap()),
                other => other.to_string(),
            });
        }
        csv.push_str(&fields.join(","));
        csv.push('\n');
    }
    Ok(csv)
}

pub fn render(out: &Path, a: &RenderArgs) -> Result<()> {
    ensure_dir(out)?;
    if let Some(path) = &a.chart {
        if a.size == 0 {
            bail!("--size must be positive");
        }
        let chart = read_chart(path)?;
        let png = out.join(format!("{}.pgm", stem(path)));
        write_pgm_file(&png, a.size, a.size, &chart.heightmap_pixels(a.size))?;
        println!("{}", png.display());
    }
    if let Some(path) = &a.value {
        let grid = ValueGrid::load(path)?;
        let base = stem(path);
        let pgm = out.join(format!("{base}.pgm"));
        grid.write_pgm(&pgm)?;
        let mut csv = Vec::new();
        grid.write_csv(&mut csv)?;
        let csv_path = out.join(format!("{base}.csv"));
        write_file(&csv_path, &csv)?;
        println!("{}\n{}", pgm.display(), csv_path.display());
    }
    if let Some(path) = &a.log {
        let csv_path = out.join(format!("{}.csv", stem(path)));
        write_file(&csv_path, log_to_csv(path)?.as_bytes())?;
        println!("{}", csv_path.display());
    }
    Ok(())
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into())
}
