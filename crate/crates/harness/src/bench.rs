//! Wall-clock timing of the dataset likelihoods.

use std::hint::black_box;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{ensure, Context};
use serde::{Deserialize, Serialize};
use splinetrack::geometry::Point;
use splinetrack::likelihood::{build_particles, dataset_loglik, NoiseModel, SpatialModel};
use splinetrack::scattering::{stream_rng, CardinalityParams, NoiseSampler, ScatterDomain, SensorKind};
use splinetrack::shaper::DictionaryEntry;

use crate::config::{read_config, resolve_dictionary, BUILTIN};
use crate::{experiment, stream_id};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "builtin_name")]
    pub dictionary: String,
    #[serde(default = "default_class")]
    pub class: String,
    /// Isotropic noise standard deviation [m].
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Dataset sizes for the scaling in m.
    #[serde(default = "default_m")]
    pub m: Vec<usize>,
    /// Particle counts for the scaling in N.
    #[serde(default = "default_particles")]
    pub particles: Vec<usize>,
    /// Particle count used for the scaling in m.
    #[serde(default = "default_fixed_particles")]
    pub fixed_particles: usize,
    /// Dataset size used for the scaling in N.
    #[serde(default = "default_fixed_m")]
    pub fixed_m: usize,
    /// Minimum measured time per timing sample [ms].
    #[serde(default = "default_min_ms")]
    pub min_ms: u64,
    /// Timing samples per row; the fastest is reported.
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn builtin_name() -> String {
    BUILTIN.to_string()
}

fn default_class() -> String {
    "swept_wing".into()
}

fn default_sigma() -> f64 {
    1.0
}

fn default_m() -> Vec<usize> {
    vec![1, 10, 100, 1000]
}

fn default_particles() -> Vec<usize> {
    vec![250, 1000, 4000, 16000]
}

fn default_fixed_particles() -> usize {
    1000
}

fn default_fixed_m() -> usize {
    10
}

fn default_min_ms() -> u64 {
    20
}

fn default_repeats() -> usize {
    3
}

impl Default for BenchConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("every field has a default")
    }
}

impl BenchConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let (mut cfg, base): (Self, PathBuf) = read_config(path)?;
        cfg.base_dir = base;
        Ok(cfg)
    }
}

/// One timing row: nanoseconds per dataset likelihood evaluation.
#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub m: usize,
    pub n: usize,
    #[serde(rename = "N")]
    pub particles: usize,
    pub kind: SensorKind,
    pub nanoseconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Log-log slope of the exact contour time against m.
    pub contour_slope_m: f64,
    /// Log-log slope of the Monte Carlo time against m at fixed N.
    pub surface_slope_m: f64,
    /// Log-log slope of the Monte Carlo time against N at fixed m.
    pub surface_slope_n: f64,
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn time_per_call(min: Duration, repeats: usize, mut f: impl FnMut() -> f64) -> f64 {
    let mut best = f64::INFINITY;
    for _ in 0..repeats.max(1) {
        let start = Instant::now();
        let mut calls = 0u64;
        while start.elapsed() < min || calls == 0 {
            black_box(f());
            calls += 1;
        }
        best = best.min(start.elapsed().as_nanos() as f64 / calls as f64);
    }
    best
}

fn draw(entry: &DictionaryEntry, kind: SensorKind, sigma: f64, m: usize, seed: u64, slot: usize) -> anyhow::Result<Vec<Point>> {
    let domain = ScatterDomain::new(&entry.shape, kind)?;
    let noise = NoiseSampler::new(&(nalgebra::Matrix2::identity() * (sigma * sigma)))?;
    let mut rng = stream_rng(seed, stream_id(experiment::BENCH, 0, slot, m));
    Ok((0..m).map(|_| domain.sample(&mut rng) + noise.sample(&mut rng)).collect())
}

/// Times both likelihood kinds over the configured grids.
pub fn run_bench(cfg: &BenchConfig) -> anyhow::Result<BenchReport> {
    ensure!(cfg.m.len() >= 2 && cfg.particles.len() >= 2, "need at least two grid points per sweep");
    ensure!(cfg.m.iter().chain(&cfg.particles).all(|&v| v >= 1), "grid values must be positive");
    let dict = resolve_dictionary(&cfg.dictionary, &cfg.base_dir)?;
    let entry = dict
        .find(&cfg.class)
        .with_context(|| format!("class `{}` is not in the dictionary", cfg.class))?;
    let noise = NoiseModel::isotropic(cfg.sigma)?;
    let min = Duration::from_millis(cfg.min_ms);
    let n = entry.shape.len();
    let mut rows = Vec::new();

    // any binomial covering the largest dataset; its cost does not depend on m
    let largest = cfg.m.iter().copied().chain([cfg.fixed_m]).max().unwrap_or(1);
    let card = CardinalityParams::new(2 * largest as u64, 0.5)?;
    let fixed = build_particles(&entry.name, &entry.triangulation, cfg.fixed_particles, cfg.seed)?;
    for &m in &cfg.m {
        for (slot, kind) in [SensorKind::Contour, SensorKind::Surface].into_iter().enumerate() {
            let y = draw(entry, kind, cfg.sigma, m, cfg.seed, slot)?;
            let (spatial, particles) = match kind {
                SensorKind::Contour => (SpatialModel::Contour(&entry.partition), 0),
                SensorKind::Surface => (SpatialModel::Surface(&fixed), cfg.fixed_particles),
            };
            let ns = time_per_call(min, cfg.repeats, || dataset_loglik(&y, &card, spatial, &noise));
            rows.push(BenchRow {
                m,
                n,
                particles,
                kind,
                nanoseconds: ns,
            });
        }
    }
    let y = draw(entry, SensorKind::Surface, cfg.sigma, cfg.fixed_m, cfg.seed, 1)?;
    for &count in &cfg.particles {
        let set = build_particles(&entry.name, &entry.triangulation, count, cfg.seed)?;
        let ns = time_per_call(min, cfg.repeats, || dataset_loglik(&y, &card, SpatialModel::Surface(&set), &noise));
        rows.push(BenchRow {
            m: cfg.fixed_m,
            n,
            particles: count,
            kind: SensorKind::Surface,
            nanoseconds: ns,
        });
    }

    let sweep_m = rows.len() - cfg.particles.len();
    let (by_m, by_n) = rows.split_at(sweep_m);
    let m_slope = |kind: SensorKind| {
        loglog_slope(&by_m.iter().filter(|r| r.kind == kind).map(|r| (r.m as f64, r.nanoseconds)).collect::<Vec<_>>())
    };
    let report = BenchReport {
        contour_slope_m: m_slope(SensorKind::Contour),
        surface_slope_m: m_slope(SensorKind::Surface),
        surface_slope_n: loglog_slope(&by_n.iter().map(|r| (r.particles as f64, r.nanoseconds)).collect::<Vec<_>>()),
        rows,
    };
    Ok(report)
}

/// Writes the rows as CSV with a header.
pub fn write_rows<W: std::io::Write>(rows: &[BenchRow], out: W) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [1.0, 10.0, 100.0].iter().map(|&x: &f64| (x, 3.0 * x.powf(0.8))).collect();
        assert!((loglog_slope(&pts) - 0.8).abs() < 1e-12);
    }
}
