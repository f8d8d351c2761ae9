//! Static classification experiment: per-scan maximum likelihood and the
//! recursive posterior over repeated scans.

use anyhow::Context;
use nalgebra::Matrix2;
use rayon::prelude::*;
use serde::Serialize;
use splinetrack::geometry::{dewhiten, Pose};
use splinetrack::metrics::{chamfer, iou};
use splinetrack::scattering::{generate_scan_at, stream_rng, ScatterDomain, SensorConfig, SensorKind};
use splinetrack::shaper::{shaper_step, whiten_dataset, whitened_noise, ClassDistribution, Dictionary};

use crate::config::ScenarioConfig;
use crate::{argmax, experiment, stream_id};

/// Verdict on a single scan.
#[derive(Clone, Debug, Serialize)]
pub struct ScanVerdict {
    pub kind: SensorKind,
    pub k: usize,
    pub m: usize,
    pub mle: usize,
    pub correct: bool,
    pub logliks: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SensorAccuracy {
    pub kind: SensorKind,
    pub scans: usize,
    pub correct: usize,
    pub accuracy: f64,
    /// How often each class won.
    pub mle_counts: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRun {
    pub run: usize,
    /// First scan after which the true class exceeded the threshold.
    pub first_hit: Option<usize>,
    pub final_p_true: f64,
    pub final_modal: usize,
    /// Scores of the final modal shape at the true pose.
    pub iou: f64,
    pub chd: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub kind: SensorKind,
    pub horizon: usize,
    pub threshold: f64,
    pub converged: usize,
    pub rate: f64,
    pub runs: Vec<ConvergenceRun>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassificationReport {
    pub seed: u64,
    pub true_class: String,
    pub classes: Vec<String>,
    pub sensors: Vec<SensorAccuracy>,
    pub convergence: Vec<ConvergenceReport>,
    #[serde(skip)]
    pub verdicts: Vec<ScanVerdict>,
}

fn static_pose(cfg: &ScenarioConfig) -> Pose {
    cfg.trajectory
        .as_ref()
        .map_or_else(Pose::identity, |t| t.initial.state().pose())
}

/// Runs the per-scan maximum-likelihood test for every configured sensor and,
/// when requested, the recursive convergence test.
pub fn run_classification(cfg: &ScenarioConfig) -> anyhow::Result<ClassificationReport> {
    cfg.validate()?;
    let sensors = cfg.sensor_configs()?;
    let (dict, truth) = cfg.prepare_dictionary(&sensors)?;
    let pose = static_pose(cfg);
    let truth_domain = |kind| ScatterDomain::new(&dict.entries[truth].shape, kind);

    let mut accuracies = Vec::new();
    let mut verdicts = Vec::new();
    for (slot, sensor) in sensors.iter().enumerate() {
        let domain = truth_domain(sensor.kind)?;
        let card = *dict.entries[truth].cardinality(sensor.kind)?;
        let noise = whitened_noise(&sensor.r, pose.h, &Matrix2::zeros())?;
        let mut counts = vec![0; dict.len()];
        let mut correct = 0;
        for k in 1..=cfg.scans {
            let mut rng = stream_rng(cfg.seed, stream_id(experiment::CLASSIFY, 0, slot, k));
            let y = generate_scan_at(&domain, &pose, sensor, &card, &mut rng, k)?;
            let logliks = dict.logliks(&whiten_dataset(&y, &pose), sensor.kind, &noise)?;
            let mle = argmax(&logliks);
            counts[mle] += 1;
            correct += usize::from(mle == truth);
            verdicts.push(ScanVerdict {
                kind: sensor.kind,
                k,
                m: y.len(),
                mle,
                correct: mle == truth,
                logliks,
            });
        }
        accuracies.push(SensorAccuracy {
            kind: sensor.kind,
            scans: cfg.scans,
            correct,
            accuracy: correct as f64 / cfg.scans as f64,
            mle_counts: counts,
        });
    }

    let mut convergence = Vec::new();
    if let Some(spec) = &cfg.convergence {
        for (slot, sensor) in sensors.iter().enumerate() {
            let runs: Vec<ConvergenceRun> = (0..spec.runs)
                .into_par_iter()
                .map(|run| converge_once(cfg, &dict, truth, &pose, sensor, slot, run, spec.horizon, spec.threshold))
                .collect::<anyhow::Result<_>>()?;
            let converged = runs.iter().filter(|r| r.first_hit.is_some()).count();
            convergence.push(ConvergenceReport {
                kind: sensor.kind,
                horizon: spec.horizon,
                threshold: spec.threshold,
                converged,
                rate: converged as f64 / spec.runs.max(1) as f64,
                runs,
            });
        }
    }

    Ok(ClassificationReport {
        seed: cfg.seed,
        true_class: cfg.true_class.clone(),
        classes: dict.entries.iter().map(|e| e.name.clone()).collect(),
        sensors: accuracies,
        convergence,
        verdicts,
    })
}

#[allow(clippy::too_many_arguments)]
fn converge_once(
    cfg: &ScenarioConfig,
    dict: &Dictionary,
    truth: usize,
    pose: &Pose,
    sensor: &SensorConfig,
    slot: usize,
    run: usize,
    horizon: usize,
    threshold: f64,
) -> anyhow::Result<ConvergenceRun> {
    let entry = &dict.entries[truth];
    let domain = ScatterDomain::new(&entry.shape, sensor.kind)?;
    let card = *entry.cardinality(sensor.kind)?;
    let shaper = cfg.shaper.config();
    let mut dist = ClassDistribution::uniform(dict.len());
    let mut first_hit = None;
    for k in 1..=horizon {
        let mut rng = stream_rng(cfg.seed, stream_id(experiment::CONVERGE, run, slot, k));
        let y = generate_scan_at(&domain, pose, sensor, &card, &mut rng, k)?;
        dist = shaper_step(&y, pose, &dist, dict, sensor, &shaper)
            .with_context(|| format!("run {run}, scan {k}"))?
            .distribution;
        if first_hit.is_none() && dist.probs()[truth] > threshold {
            first_hit = Some(k);
        }
    }
    let modal = dist.modal();
    let estimate = dewhiten(&dict.entries[modal].shape, pose);
    let actual = dewhiten(&entry.shape, pose);
    let cell = estimate.diameter().min(actual.diameter()) / cfg.metrics.iou_cells;
    Ok(ConvergenceRun {
        run,
        first_hit,
        final_p_true: dist.probs()[truth],
        final_modal: modal,
        iou: iou(&estimate, &actual, cell)?,
        chd: chamfer(&estimate, &actual, cfg.metrics.chamfer_samples)?,
    })
}

/// Writes `summary.json` and `scans.csv` into `dir`.
pub fn write_report(report: &ClassificationReport, dir: &std::path::Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("scans.csv"))?;
    let mut header = vec!["kind".to_string(), "k".into(), "m".into(), "mle_class".into(), "correct".into()];
    header.extend(report.classes.iter().map(|c| format!("loglik_{c}")));
    w.write_record(&header)?;
    for v in &report.verdicts {
        let mut row = vec![
            serde_json::to_value(v.kind)?.as_str().unwrap_or_default().to_string(),
            v.k.to_string(),
            v.m.to_string(),
            report.classes[v.mle].clone(),
            u8::from(v.correct).to_string(),
        ];
        row.extend(v.logliks.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(report)? + "\n")?;
    Ok(())
}
