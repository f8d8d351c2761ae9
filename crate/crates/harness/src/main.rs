use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};
use splinetrack_harness::bench::{run_bench, write_rows, BenchConfig};
use splinetrack_harness::catalog::{builtin_records, records_json};
use splinetrack_harness::classify::{run_classification, write_report};
use splinetrack_harness::config::ScenarioConfig;
use splinetrack_harness::track::{run_tracking, write_outputs};

const CONFIG_HELP: &str = "\
Scenario config (JSON). Fields and defaults:
  seed            0
  dictionary      \"builtin\", or a dictionary file relative to the config
  true_class      required, a class name from the dictionary
  sensors         required, one or two of
                    {kind: contour|surface, sigma | r: [[..],[..]],
                     resolution, eta: 0.9, period: 0.1}
  trajectory      {initial: {x, y, heading, speed, acceleration, turn_rate},
                   segments: [{duration, acceleration, turn_rate}]}
                  required for track; gives the static pose for classify
  tracker         {q_std: [1, 1, 0.05, 10, 0.1, 0.1],
                   e_std: [10, 10, 5],
                   p0_std: e_std on the pose, q_std on the rates}
  shaper          {delta: 0.95, delta_r: 1.0, particles: 1000}
  scans           required, at least 1
  runs            1
  convergence     {runs, horizon: 20, threshold: 0.95}, classify only
  metrics         {iou_cells: 512, chamfer_samples: 1024}";

const BENCH_HELP: &str = "\
Benchmark config (JSON). Fields and defaults:
  seed 0, dictionary \"builtin\", class \"swept_wing\", sigma 1.0,
  m [1, 10, 100, 1000], particles [250, 1000, 4000, 16000],
  fixed_particles 1000, fixed_m 10, min_ms 20, repeats 3";

#[derive(Parser)]
#[command(name = "splinetrack", version, about = "Linear-spline extended object tracking experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-scan maximum-likelihood classification of a static object.
    #[command(after_help = CONFIG_HELP)]
    Classify {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for summary.json and scans.csv.
        #[arg(long, default_value = "out/classify")]
        out: PathBuf,
    },
    /// Chained tracking and classification on a simulated trajectory.
    #[command(after_help = CONFIG_HELP)]
    Track {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config run count.
        #[arg(long)]
        runs: Option<usize>,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for run_NNN.csv and summary.json.
        #[arg(long, default_value = "out/track")]
        out: PathBuf,
    },
    /// Likelihood timing; CSV rows (m, n, N, kind, nanoseconds) on stdout.
    #[command(after_help = BENCH_HELP)]
    Bench {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Writes the built-in dictionary as JSON.
    Dictionary {
        #[arg(long, default_value = "data/dictionary.json")]
        out: PathBuf,
    },
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Classify { config, seed, out } => {
            let mut cfg = ScenarioConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let report = run_classification(&cfg)?;
            for s in &report.sensors {
                println!("{:?}: accuracy {:.3} ({}/{})", s.kind, s.accuracy, s.correct, s.scans);
            }
            for c in &report.convergence {
                println!(
                    "{:?}: p(true) > {} within {} scans in {}/{} runs",
                    c.kind,
                    c.threshold,
                    c.horizon,
                    c.converged,
                    c.runs.len()
                );
            }
            write_report(&report, &out)?;
            log::info!("wrote {}", out.display());
        }
        Command::Track { config, runs, seed, out } => {
            let mut cfg = ScenarioConfig::load(&config)?;
            if let Some(r) = runs {
                cfg.runs = r;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let output = run_tracking(&cfg)?;
            let s = &output.summary;
            println!(
                "{} runs ({} diverged): NPE {:.4}, IOU {:.4}, CHD {:.4} m",
                s.runs.len(),
                s.diverged_runs,
                s.mean_npe,
                s.mean_iou,
                s.mean_chd
            );
            write_outputs(&output, &out)?;
            log::info!("wrote {}", out.display());
        }
        Command::Bench { config } => {
            let cfg = match config {
                Some(path) => BenchConfig::load(&path)?,
                None => BenchConfig::default(),
            };
            let report = run_bench(&cfg)?;
            write_rows(&report.rows, std::io::stdout().lock())?;
            eprintln!(
                "slopes: contour vs m {:.3}, surface vs m {:.3}, surface vs N {:.3}",
                report.contour_slope_m, report.surface_slope_m, report.surface_slope_n
            );
        }
        Command::Dictionary { out } => {
            let text = records_json(&builtin_records()?)?;
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(&out, text).with_context(|| format!("writing {}", out.display()))?;
            log::info!("wrote {}", out.display());
        }
    }
    Ok(())
}
