//! Acceptance checks. Runs every check, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{ensure, Context};
use nalgebra::{Matrix2, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use splinetrack::geometry::{barycenter_area, triangulate, Frame, Point, ShapeVector};
use splinetrack::likelihood::{
    binomial_logpmf, build_particles, contour_loglik, dataset_loglik, edge_loglik, mc_loglik, NoiseModel,
    SpatialModel,
};
use splinetrack::motion::{jacobians, step_vector, KinematicState};
use splinetrack::scattering::{
    sample_cardinality, sample_contour_point, sample_surface_point, stream_rng, CardinalityParams, SensorKind,
};
use splinetrack::shaper::{load_dictionary, Dictionary};
use splinetrack_harness::bench::{run_bench, BenchConfig};
use splinetrack_harness::classify::{run_classification, write_report};
use splinetrack_harness::config::ScenarioConfig;
use splinetrack_harness::track::{run_tracking, write_outputs};
use splinetrack_oracles as oracle;

type Check = fn() -> anyhow::Result<String>;

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn shipped_dictionary() -> anyhow::Result<Dictionary> {
    Ok(load_dictionary(&repo().join("data/dictionary.json"))?)
}

fn random_spd(rng: &mut ChaCha8Rng) -> Matrix2<f64> {
    let l1 = 10f64.powf(rng.random_range(-2.0..1.0));
    let l2 = l1 / 10f64.powf(rng.random_range(0.0..4.0));
    let (s, c) = rng.random_range(0.0..std::f64::consts::PI).sin_cos();
    let u = Matrix2::new(c, -s, s, c);
    let r = u * Matrix2::new(l1, 0.0, 0.0, l2) * u.transpose();
    (r + r.transpose()) * 0.5
}

fn edge_against_quadrature() -> anyhow::Result<String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let mut worst: f64 = 0.0;
    let mut worst_density: f64 = 0.0;
    for _ in 0..1000 {
        let v0 = Point::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
        let v1 = Point::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
        let along: f64 = rng.random_range(-0.5..1.5);
        let scale = 10f64.powf(rng.random_range(-2.0..1.5));
        let offset = Point::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale;
        let y = v0 + (v1 - v0) * along + offset;
        let r = random_spd(&mut rng);
        let got = edge_loglik(&y, &v0, &v1, &NoiseModel::new(r)?);
        let want = oracle::edge_loglik(&y, &v0, &v1, &r);
        // relative error of the density while |log L| <= 1, of log L beyond
        let err = (got - want).abs();
        worst = worst.max(err / want.abs().max(1.0));
        if want.abs() < 700.0 {
            worst_density = worst_density.max(err);
        }
    }
    let elapsed = start.elapsed();
    ensure!(worst < 1e-8, "worst relative error {worst:e}");
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!(
        "1000 cases, worst relative error {worst:.1e}, worst density error {worst_density:.1e} where representable, {elapsed:.2?}"
    ))
}

fn mc_against_grid() -> anyhow::Result<String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1002);
    let mut worst: f64 = 0.0;
    for case in 0..20 {
        let n = rng.random_range(5..12);
        let raw = oracle::star_polygon(&mut rng, n, 0.5, 1.5);
        let shape = ShapeVector::new(raw, Frame::World)?;
        let (g, _) = barycenter_area(&shape)?;
        let shape = shape.translated(-g);
        let set = build_particles("poly", &triangulate(&shape)?, 100_000, case)?;
        // keeps the Monte Carlo standard error near 0.3%
        let sd = rng.random_range(0.6..1.0);
        let r = Matrix2::new(sd * sd, 0.3 * sd * sd, 0.3 * sd * sd, 0.7 * sd * sd);
        let noise = NoiseModel::new(r)?;
        let cells = oracle::grid_cells(shape.vertices(), 400);
        for _ in 0..3 {
            let y = Point::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let got = mc_loglik(&y, &set, &noise);
            let want = oracle::surface_loglik(&y, &cells, &r);
            worst = worst.max(((got - want).exp() - 1.0).abs());
        }
    }
    let elapsed = start.elapsed();
    ensure!(worst < 0.01, "worst relative error {worst:.4}");
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!("20 polygons, worst relative error {worst:.4}, {elapsed:.2?}"))
}

fn point_object_limit() -> anyhow::Result<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1003);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let r = random_spd(&mut rng);
        let noise = NoiseModel::new(r)?;
        let v0 = Point::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let dir = Point::new(t.cos(), t.sin());
        let y = v0 + Point::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let target = noise.log_density(&(y - v0));
        let mut last = f64::INFINITY;
        for e in 2..=8 {
            let got = edge_loglik(&y, &v0, &(v0 + dir * 10f64.powi(-e)), &noise);
            let err = (got - target).abs() / target.abs().max(f64::MIN_POSITIVE);
            ensure!(err <= last * (1.0 + 1e-9) + 1e-15, "error grew at length 1e-{e}: {err:e} after {last:e}");
            last = err;
        }
        worst = worst.max(last);
    }
    ensure!(worst < 1e-6, "relative error {worst:e} at length 1e-8");
    Ok(format!("50 edges, relative error at length 1e-8 at most {worst:.1e}"))
}

fn unresolvable_limit() -> anyhow::Result<String> {
    let dict = shipped_dictionary()?;
    let a = dict.find("delta_wing").context("delta_wing")?;
    let b = dict.find("cross").context("cross")?;
    let sigma = 100.0 * a.rho_max().max(b.rho_max());
    let noise = NoiseModel::isotropic(sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1004);
    let ys: Vec<Point> = (0..20)
        .map(|_| Point::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)) * sigma)
        .collect();
    let mut worst: f64 = 0.0;
    for y in &ys {
        let la = contour_loglik(y, &a.partition, &noise);
        let lb = contour_loglik(y, &b.partition, &noise);
        worst = worst.max((la - lb).abs() / la.abs());
    }
    ensure!(worst < 0.01, "per-measurement relative difference {worst:.2e}");

    // same contour, different detection probability: only the binomial term differs
    let ca = CardinalityParams::from_measure(a.length, 1.0, 1.0, 0.9)?;
    let cb = CardinalityParams::from_measure(a.length, 1.0, 0.6, 0.9)?;
    let spatial = SpatialModel::Contour(&a.partition);
    let m = ys.len();
    let diff = dataset_loglik(&ys, &ca, spatial, &noise) - dataset_loglik(&ys, &cb, spatial, &noise);
    let ratio = binomial_logpmf(m, &ca) - binomial_logpmf(m, &cb);
    let gap = (diff - ratio).abs();
    ensure!(gap < 1e-10, "dataset difference misses the binomial log-ratio by {gap:e}");

    // distinct shapes: what is left after the binomial log-ratio is the small spatial part
    let cd = CardinalityParams::from_measure(b.length, 1.0, 1.0, 0.9)?;
    let full = dataset_loglik(&ys, &ca, spatial, &noise)
        - dataset_loglik(&ys, &cd, SpatialModel::Contour(&b.partition), &noise);
    let rest = full - (binomial_logpmf(m, &ca) - binomial_logpmf(m, &cd));
    let scale = dataset_loglik(&ys, &ca, spatial, &noise).abs();
    ensure!(rest.abs() / scale < 0.01, "spatial residual {rest:e} of {scale:e}");
    Ok(format!(
        "σ = {sigma:.0} m: per-measurement difference {worst:.1e}, binomial gap {gap:.1e}, distinct-shape residual {:.1e}",
        rest.abs() / scale
    ))
}

fn sampler_uniformity() -> anyhow::Result<String> {
    let dict = shipped_dictionary()?;
    let e = dict.find("swept_wing").context("swept_wing")?;
    let n = 100_000;
    let mut rng = stream_rng(1005, 1);

    let mut counts = vec![0u64; e.partition.len()];
    for _ in 0..n {
        let z = sample_contour_point(&e.partition, &mut rng);
        let (i, _) = e
            .partition
            .edges
            .iter()
            .enumerate()
            .map(|(i, (a, b))| (i, oracle::contour_distance(&z, &[*a, *b])))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .context("no edges")?;
        counts[i] += 1;
    }
    let expected: Vec<f64> = e.partition.weights.iter().map(|w| w * n as f64).collect();
    let p_edge = oracle::chi_square_p(&counts, &expected);
    ensure!(p_edge > 0.01, "edge occupancy p = {p_edge}");

    let v = e.shape.vertices();
    let (x0, x1) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.x), b.max(p.x)));
    let (y0, y1) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.y), b.max(p.y)));
    let cells = 20;
    let (wx, wy) = ((x1 - x0) / cells as f64, (y1 - y0) / cells as f64);
    let mut grid = vec![0u64; cells * cells];
    for _ in 0..n {
        let z = sample_surface_point(&e.triangulation, &mut rng);
        let i = (((z.x - x0) / wx) as usize).min(cells - 1);
        let j = (((z.y - y0) / wy) as usize).min(cells - 1);
        grid[i * cells + j] += 1;
    }
    let (mut observed, mut expected) = (Vec::new(), Vec::new());
    for i in 0..cells {
        for j in 0..cells {
            let (cx, cy) = (x0 + i as f64 * wx, y0 + j as f64 * wy);
            let piece = oracle::clip_to_rect(v, cx, cx + wx, cy, cy + wy);
            let area = if piece.len() >= 3 { oracle::area_centroid(&piece).0.abs() } else { 0.0 };
            if area > 1e-9 {
                observed.push(grid[i * cells + j]);
                expected.push(area / e.area * n as f64);
            }
        }
    }
    let p_grid = oracle::chi_square_p(&observed, &expected);
    ensure!(p_grid > 0.01, "surface grid p = {p_grid}");

    let mut means = Vec::new();
    for (measure, kind) in [(83.0, "contour"), (122.0, "surface")] {
        let params = CardinalityParams::from_measure(measure, 5.0, 1.0, 0.9)?;
        let mean = (0..n).map(|_| sample_cardinality(&params, &mut rng) as f64).sum::<f64>() / n as f64;
        let rel = (mean - params.mean()).abs() / params.mean();
        ensure!(rel < 0.01, "{kind} cardinality mean {mean} vs {}", params.mean());
        means.push(format!("{kind} {mean:.2} vs {:.1}", params.mean()));
    }
    Ok(format!("edge p = {p_edge:.3}, grid p = {p_grid:.3}, mean counts {}", means.join(", ")))
}

fn jacobian_check() -> anyhow::Result<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1006);
    let t = 0.1;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let x = KinematicState::new(
            Point::new(rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0)),
            rng.random_range(0.0..std::f64::consts::TAU),
            rng.random_range(0.0..400.0),
            rng.random_range(-20.0..20.0),
            rng.random_range(-1.0..1.0),
        );
        let (jx, jw) = jacobians(&x, t);
        let xv = x.to_vector();
        let fx = oracle::jacobian6(|v| step_vector(v, &Vector6::zeros(), t), &xv, 1e-6);
        let fw = oracle::jacobian6(|v| step_vector(&xv, v, t), &Vector6::zeros(), 1e-6);
        worst = worst.max((jx - fx).abs().max()).max((jw - fw).abs().max());
    }
    ensure!(worst < 1e-6, "worst absolute difference {worst:e}");
    Ok(format!("100 states, worst absolute difference {worst:.1e}"))
}

fn classification_config() -> anyhow::Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::load(&repo().join("configs/classify.json"))?;
    cfg.convergence = None;
    Ok(cfg)
}

fn classification_accuracy() -> anyhow::Result<String> {
    let start = Instant::now();
    let base = classification_config()?;
    ensure!(base.scans == 100, "config runs {} scans", base.scans);
    let names: Vec<String> = shipped_dictionary()?.entries.iter().map(|e| e.name.clone()).collect();
    let mut lines = Vec::new();
    for name in &names {
        let mut cfg = base.clone();
        cfg.true_class = name.clone();
        let report = run_classification(&cfg)?;
        let acc = |kind| report.sensors.iter().find(|s| s.kind == kind).map(|s| s.accuracy).context("sensor missing");
        let (ec, mc) = (acc(SensorKind::Contour)?, acc(SensorKind::Surface)?);
        // both thresholds sit above the 1/5 chance level
        ensure!(ec >= 0.8, "{name}: exact contour accuracy {ec}");
        ensure!(mc >= 0.7, "{name}: Monte Carlo surface accuracy {mc}");
        lines.push(format!("{name} {ec:.2}/{mc:.2}"));
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
    Ok(format!("contour/surface accuracy: {}, {elapsed:.2?}", lines.join(", ")))
}

fn recursive_convergence() -> anyhow::Result<String> {
    let cfg = ScenarioConfig::load(&repo().join("configs/classify.json"))?;
    let spec = cfg.convergence.as_ref().context("config has no convergence block")?;
    ensure!(spec.runs == 100 && spec.horizon == 20 && spec.threshold == 0.95, "unexpected convergence settings");
    let report = run_classification(&cfg)?;
    let truth = report.classes.iter().position(|c| *c == report.true_class).context("true class")?;
    let mut lines = Vec::new();
    for c in &report.convergence {
        ensure!(c.converged >= 95, "{:?}: {}/100 runs converged", c.kind, c.converged);
        let mut worst_iou: f64 = 0.0;
        let mut worst_chd: f64 = 0.0;
        for r in c.runs.iter().filter(|r| r.final_modal == truth) {
            worst_iou = worst_iou.max((r.iou - 1.0).abs());
            worst_chd = worst_chd.max(r.chd);
        }
        ensure!(worst_iou <= 0.01, "{:?}: |IOU - 1| = {worst_iou}", c.kind);
        ensure!(worst_chd < 0.05, "{:?}: CHD = {worst_chd}", c.kind);
        lines.push(format!("{:?} {}/100 (|IOU-1| ≤ {worst_iou:.1e}, CHD ≤ {worst_chd:.1e} m)", c.kind, c.converged));
    }
    Ok(lines.join(", "))
}

fn tracking_sanity() -> anyhow::Result<String> {
    let cfg = ScenarioConfig::load(&repo().join("configs/track.json"))?;
    ensure!(cfg.runs == 10, "config runs {} runs", cfg.runs);
    let s = run_tracking(&cfg)?.summary;
    ensure!(s.diverged_runs == 0, "{} runs diverged", s.diverged_runs);
    ensure!(s.mean_npe < 0.3, "mean NPE {}", s.mean_npe);
    ensure!(s.mean_iou > 0.4, "mean IOU {}", s.mean_iou);
    Ok(format!("10 runs on {}: NPE {:.3}, IOU {:.3}, CHD {:.3} m", s.true_class, s.mean_npe, s.mean_iou, s.mean_chd))
}

fn complexity_scaling() -> anyhow::Result<String> {
    let cfg = BenchConfig::load(&repo().join("configs/bench.json"))?;
    let report = run_bench(&cfg)?;
    let contour: Vec<f64> = report
        .rows
        .iter()
        .filter(|r| r.kind == SensorKind::Contour)
        .map(|r| r.nanoseconds)
        .collect();
    ensure!(contour.windows(2).all(|w| w[1] > w[0]), "contour time not increasing in m");
    for (what, slope) in [("contour vs m", report.contour_slope_m), ("surface vs N", report.surface_slope_n)] {
        ensure!((slope - 1.0).abs() <= 0.3, "{what} slope {slope:.3}");
    }
    Ok(format!(
        "slopes: contour vs m {:.3}, surface vs N {:.3} (surface vs m {:.3})",
        report.contour_slope_m, report.surface_slope_n, report.surface_slope_m
    ))
}

fn read_tree(dir: &Path) -> anyhow::Result<Vec<(String, Vec<u8>)>> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)?
        .map(|entry| {
            let path = entry?.path();
            Ok((path.file_name().unwrap_or_default().to_string_lossy().into_owned(), std::fs::read(&path)?))
        })
        .collect::<anyhow::Result<_>>()?;
    files.sort();
    Ok(files)
}

fn determinism() -> anyhow::Result<String> {
    let tmp = tempfile::tempdir()?;
    let mut classify = ScenarioConfig::load(&repo().join("configs/classify.json"))?;
    classify.scans = 30;
    if let Some(c) = classify.convergence.as_mut() {
        c.runs = 8;
    }
    let mut track = ScenarioConfig::load(&repo().join("configs/track.json"))?;
    track.scans = 60;
    track.runs = 3;
    track.sensors.push(splinetrack_harness::config::SensorSpec {
        kind: SensorKind::Surface,
        sigma: Some(0.1),
        r: None,
        resolution: 1.0,
        eta: 0.9,
        period: track.sensors[0].period,
    });
    let mut trees = Vec::new();
    for (i, threads) in [1, 4, 1].into_iter().enumerate() {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
        let dir = tmp.path().join(format!("pass{i}"));
        pool.install(|| -> anyhow::Result<()> {
            write_report(&run_classification(&classify)?, &dir.join("classify"))?;
            write_outputs(&run_tracking(&track)?, &dir.join("track"))?;
            Ok(())
        })?;
        trees.push((read_tree(&dir.join("classify"))?, read_tree(&dir.join("track"))?));
    }
    ensure!(trees[0] == trees[1], "outputs differ between 1 and 4 worker threads");
    ensure!(trees[0] == trees[2], "outputs differ between identical runs");
    let files = trees[0].0.len() + trees[0].1.len();
    Ok(format!("{files} output files byte-identical across 3 passes (1, 4, 1 threads)"))
}

fn main() {
    let checks: [(&str, Check); 11] = [
        ("exact edge likelihood matches quadrature", edge_against_quadrature),
        ("Monte Carlo likelihood matches grid quadrature", mc_against_grid),
        ("point-object limit", point_object_limit),
        ("unresolvable limit", unresolvable_limit),
        ("sampler uniformity and cardinality", sampler_uniformity),
        ("motion Jacobians match finite differences", jacobian_check),
        ("classification accuracy", classification_accuracy),
        ("recursive shaper convergence", recursive_convergence),
        ("tracking sanity", tracking_sanity),
        ("complexity scaling", complexity_scaling),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let start = Instant::now();
        let outcome = match catch_unwind(AssertUnwindSafe(check)) {
            Ok(r) => r,
            Err(_) => Err(anyhow::anyhow!("panicked")),
        };
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} [{secs:.1} s]"),
            Err(e) => {
                failed += 1;
                println!("FAIL  {name}: {e:#} [{secs:.1} s]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
