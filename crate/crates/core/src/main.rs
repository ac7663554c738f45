use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use sonoloc::dop::dop_average;
use sonoloc::geometry::Point3;
use sonoloc::harness::output::{write_dopmap_csv, write_history_csv, write_json, write_rangetest_csv, write_sweep_csv, write_trials_csv};
use sonoloc::harness::{dop_map, random_trajectories, sweep_snr, ErrorSummary, LayoutSpec, Pipeline, SimConfig};
use sonoloc::placement::optimize;
use sonoloc::seeds::split_seed;
use sonoloc::{Error, Result};

#[derive(Parser)]
#[command(name = "sonoloc", version, about = "Ultrasonic FH-CDMA drone localization simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Localize random (or configured) positions at the configured SNR.
    Simulate(Common),
    /// Mean and spread of localization error per SNR.
    Sweep(Common),
    /// Fly seeded random trajectories and localize every fix.
    Trajectory(Common),
    /// Search for a beacon layout with low averaged VDOP.
    Optimize(Common),
    /// HDOP/VDOP/GDOP over the drone domain lattice.
    Dopmap(Common),
    /// Per-beacon ranging diagnostics against the clean single-path lag.
    Rangetest(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum LayoutArg {
    Original,
    Optimized,
    File,
}

#[derive(Args)]
struct Common {
    /// TOML configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overriding `[run] seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Trials per point, overriding `[run] trials`.
    #[arg(long)]
    trials: Option<usize>,
    /// Beacon layout, overriding `[scene] layout`.
    #[arg(long, value_enum)]
    layout: Option<LayoutArg>,
    /// Layout JSON for `--layout file`: an `optimize` result or a list of four points.
    #[arg(long)]
    layout_file: Option<PathBuf>,
}

fn read_layout_file(path: &Path) -> Result<Vec<[f64; 3]>> {
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let list = v.get("layout").cloned().unwrap_or(v);
    if let Ok(points) = serde_json::from_value::<Vec<Point3<f64>>>(list.clone()) {
        return Ok(points.into_iter().map(Point3::to_array).collect());
    }
    Ok(serde_json::from_value::<Vec<[f64; 3]>>(list)?)
}

fn load(common: &Common) -> Result<(SimConfig, String)> {
    let mut cfg = match &common.config {
        Some(p) => SimConfig::from_file(p)?,
        None => SimConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.run.seed = s;
    }
    if let Some(t) = common.trials {
        cfg.run.trials = t;
    }
    match (common.layout, &common.layout_file) {
        (Some(LayoutArg::Original), _) => cfg.scene.layout = LayoutSpec::Named("original".into()),
        (Some(LayoutArg::Optimized), _) => cfg.scene.layout = LayoutSpec::Named("optimized".into()),
        (Some(LayoutArg::File), Some(p)) => cfg.scene.layout = LayoutSpec::Coords(read_layout_file(p)?),
        (Some(LayoutArg::File), None) => return Err(Error::InvalidArgument("--layout file requires --layout-file".into())),
        (None, Some(_)) => return Err(Error::InvalidArgument("--layout-file requires --layout file".into())),
        (None, None) => {}
    }
    cfg.validate()?;
    let tag = match &cfg.scene.layout {
        LayoutSpec::Named(n) => n.clone(),
        LayoutSpec::Coords(_) => "custom".into(),
    };
    if cfg.run.threads > 0 {
        // Ignore the error if a pool already exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.run.threads).build_global();
    }
    std::fs::create_dir_all(&common.out)?;
    Ok((cfg, tag))
}

fn summary_line(s: &ErrorSummary) -> String {
    format!(
        "snr {:>6} dB  trials {:>4}  failed {:>3}  err_xy {:.3} mm  err_z {:.3} mm  err_3d {:.3} mm",
        s.snr_db,
        s.trials,
        s.failed,
        s.err_xy.mean * 1e3,
        s.err_z.mean * 1e3,
        s.err_3d.mean * 1e3
    )
}

#[derive(Serialize)]
struct RunSummary<'a, T: Serialize> {
    command: &'a str,
    seed: u64,
    layout: &'a str,
    beacons: Vec<[f64; 3]>,
    result: T,
}

fn beacons(cfg: &SimConfig) -> Result<Vec<[f64; 3]>> {
    Ok(cfg.layout()?.positions().iter().map(|p| p.to_array()).collect())
}

fn simulate(common: &Common) -> Result<()> {
    let (cfg, tag) = load(common)?;
    let p = Pipeline::new(&cfg)?;
    let snr = cfg.channel.snr_db;
    let records = match cfg.run.position {
        Some(pos) => p.fixes_at(Point3::from_array(pos), cfg.run.trials, snr, cfg.run.seed),
        None => p.random_fixes(cfg.run.trials, snr, cfg.run.seed),
    };
    write_trials_csv(&common.out.join("trials.csv"), &records, &tag)?;
    let s = ErrorSummary::of(snr, &records);
    write_json(&common.out.join("summary.json"), &RunSummary { command: "simulate", seed: cfg.run.seed, layout: &tag, beacons: beacons(&cfg)?, result: s })?;
    println!("{}", summary_line(&s));
    Ok(())
}

fn sweep(common: &Common) -> Result<()> {
    let (cfg, tag) = load(common)?;
    let result = sweep_snr(&cfg, &cfg.run.snr_list, cfg.run.trials)?;
    write_trials_csv(&common.out.join("trials.csv"), &result.records, &tag)?;
    write_sweep_csv(&common.out.join("sweep.csv"), &result.rows)?;
    write_json(&common.out.join("summary.json"), &RunSummary { command: "sweep", seed: cfg.run.seed, layout: &tag, beacons: beacons(&cfg)?, result: &result.rows })?;
    for r in &result.rows {
        println!("{}", summary_line(r));
    }
    Ok(())
}

fn trajectory(common: &Common) -> Result<()> {
    let (cfg, tag) = load(common)?;
    let p = Pipeline::new(&cfg)?;
    let paths = random_trajectories(&cfg, cfg.run.trajectories, cfg.run.seed)?;
    let mut runs = Vec::with_capacity(paths.len());
    for (k, t) in paths.iter().enumerate() {
        let run = p.trajectory(t, cfg.channel.snr_db, split_seed(cfg.run.seed, 1_000 + k as u64))?;
        write_trials_csv(&common.out.join(format!("trajectory_{k}.csv")), &run.records, &tag)?;
        println!(
            "trajectory {k}: {} fixes  err_z {:.3} mm  err_3d {:.3} mm",
            run.summary.fixes,
            run.summary.mean_err_z * 1e3,
            run.summary.mean_err_3d * 1e3
        );
        runs.push(run);
    }
    write_json(&common.out.join("summary.json"), &RunSummary { command: "trajectory", seed: cfg.run.seed, layout: &tag, beacons: beacons(&cfg)?, result: &runs })?;
    Ok(())
}

fn optimize_cmd(common: &Common) -> Result<()> {
    let (cfg, _) = load(common)?;
    let problem = cfg.placement_problem()?;
    let result = optimize(&problem)?;
    write_json(&common.out.join("placement.json"), &result)?;
    write_history_csv(&common.out.join("history.csv"), &result.history)?;
    println!(
        "{} layout after {} restarts: vdop_avg {:.4}  hdop_avg {:.4}",
        if result.feasible { "feasible" } else { "INFEASIBLE" },
        result.restarts,
        result.vdop_avg,
        result.hdop_avg
    );
    for b in result.layout.positions() {
        println!("  ({}, {}, {})", b.x, b.y, b.z);
    }
    Ok(())
}

fn dopmap(common: &Common) -> Result<()> {
    let (cfg, tag) = load(common)?;
    let layout = cfg.layout()?;
    let domain = cfg.drone_domain()?;
    write_dopmap_csv(&common.out.join("dopmap.csv"), &dop_map(&layout, &domain))?;
    let avg = dop_average(layout.positions(), &domain)?;
    write_json(&common.out.join("summary.json"), &RunSummary { command: "dopmap", seed: cfg.run.seed, layout: &tag, beacons: beacons(&cfg)?, result: avg })?;
    println!("{tag}: hdop_avg {:.4}  vdop_avg {:.4}  over {} points", avg.hdop_avg, avg.vdop_avg, domain.points.len());
    Ok(())
}

fn rangetest(common: &Common) -> Result<()> {
    use rayon::prelude::*;
    let (cfg, tag) = load(common)?;
    let p = Pipeline::new(&cfg)?;
    let snr = cfg.channel.snr_db;
    let per_trial = (0..cfg.run.trials as u64)
        .into_par_iter()
        .map(|i| {
            let seed = split_seed(cfg.run.seed, i);
            p.range_check(p.trial_position(seed), snr, seed).map(|c| c.into_iter().map(|c| (i, c)).collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<_> = per_trial.into_iter().flatten().collect();
    write_rangetest_csv(&common.out.join("rangetest.csv"), &rows)?;
    let n_beacons = p.layout.len();
    let per_beacon: Vec<Value> = (0..n_beacons)
        .map(|b| {
            let mine: Vec<_> = rows.iter().filter(|(_, c)| c.beacon == b).collect();
            let matched = mine.iter().filter(|(_, c)| c.matched()).count() as f64 / mine.len().max(1) as f64;
            let mae = mine.iter().map(|(_, c)| (c.estimated_distance - c.true_distance).abs()).sum::<f64>() / mine.len().max(1) as f64;
            println!("beacon {b}: lag match {:.1}%  mean |range error| {:.3} mm", matched * 100.0, mae * 1e3);
            json!({ "beacon": b, "lag_match_fraction": matched, "mean_abs_range_error": mae })
        })
        .collect();
    write_json(&common.out.join("summary.json"), &RunSummary { command: "rangetest", seed: cfg.run.seed, layout: &tag, beacons: beacons(&cfg)?, result: json!({ "snr_db": snr, "beacons": per_beacon }) })?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Simulate(c) => simulate(c),
        Command::Sweep(c) => sweep(c),
        Command::Trajectory(c) => trajectory(c),
        Command::Optimize(c) => optimize_cmd(c),
        Command::Dopmap(c) => dopmap(c),
        Command::Rangetest(c) => rangetest(c),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config { .. } | Error::InvalidArgument(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
