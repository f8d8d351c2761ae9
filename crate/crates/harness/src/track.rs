//! Tracking experiment: the tracker and the shaper chained scan by scan on a
//! simulated trajectory.

use std::path::Path;

use anyhow::{ensure, Context};
use rayon::prelude::*;
use serde::Serialize;
use splinetrack::geometry::{dewhiten, ShapeVector};
use splinetrack::metrics::{chamfer, iou, npe, ScanScore};
use splinetrack::motion::{simulate_trajectory, KinematicState};
use splinetrack::scattering::{generate_scan_at, stream_rng, ScatterDomain, SensorConfig};
use splinetrack::shaper::{shaper_step, ClassDistribution, Dictionary};
use splinetrack::tracker::TrackerState;
use splinetrack::Error;

use crate::config::ScenarioConfig;
use crate::{experiment, stream_id};

/// State of one scan instant after every sensor has been processed.
#[derive(Clone, Debug, Serialize)]
pub struct ScanRecord {
    pub k: usize,
    pub t: f64,
    pub truth: KinematicState,
    pub estimate: KinematicState,
    pub probs: Vec<f64>,
    pub modal: usize,
    pub score: ScanScore,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunRecord {
    pub run: usize,
    pub scans: Vec<ScanRecord>,
    /// Reason the run stopped early.
    pub diverged: Option<String>,
}

impl RunRecord {
    fn mean(&self, f: impl Fn(&ScanScore) -> f64) -> f64 {
        if self.scans.is_empty() {
            return f64::NAN;
        }
        self.scans.iter().map(|s| f(&s.score)).sum::<f64>() / self.scans.len() as f64
    }

    pub fn mean_npe(&self) -> f64 {
        self.mean(|s| s.npe)
    }

    pub fn mean_iou(&self) -> f64 {
        self.mean(|s| s.iou)
    }

    pub fn mean_chd(&self) -> f64 {
        self.mean(|s| s.chd)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub run: usize,
    pub first_stream: u64,
    pub scans: usize,
    pub mean_npe: f64,
    pub mean_iou: f64,
    pub mean_chd: f64,
    pub final_modal_class: Option<String>,
    pub diverged: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrackingSummary {
    pub seed: u64,
    pub true_class: String,
    pub classes: Vec<String>,
    pub period: f64,
    pub runs: Vec<RunSummary>,
    pub diverged_runs: usize,
    /// Averages over completed runs.
    pub mean_npe: f64,
    pub mean_iou: f64,
    pub mean_chd: f64,
}

pub struct TrackingOutput {
    pub records: Vec<RunRecord>,
    pub summary: TrackingSummary,
}

struct Scene<'a> {
    cfg: &'a ScenarioConfig,
    sensors: Vec<SensorConfig>,
    dict: Dictionary,
    truth: usize,
    domains: Vec<ScatterDomain>,
    truth_path: Vec<KinematicState>,
}

/// Runs `cfg.runs` independent tracking runs in parallel.
pub fn run_tracking(cfg: &ScenarioConfig) -> anyhow::Result<TrackingOutput> {
    cfg.validate()?;
    let trajectory = cfg.trajectory.as_ref().context("tracking needs a trajectory")?;
    ensure!(cfg.runs >= 1, "at least one run");
    let sensors = cfg.sensor_configs()?;
    let (dict, truth) = cfg.prepare_dictionary(&sensors)?;
    let domains = sensors
        .iter()
        .map(|s| ScatterDomain::new(&dict.entries[truth].shape, s.kind))
        .collect::<splinetrack::Result<Vec<_>>>()?;
    let truth_path = simulate_trajectory(&trajectory.initial.state(), &trajectory.segments(), cfg.period(), cfg.scans);
    let scene = Scene {
        cfg,
        sensors,
        dict,
        truth,
        domains,
        truth_path,
    };
    let records: Vec<RunRecord> = (0..cfg.runs)
        .into_par_iter()
        .map(|run| run_once(&scene, run))
        .collect::<anyhow::Result<_>>()?;
    let summary = summarize(&scene, &records);
    Ok(TrackingOutput { records, summary })
}

fn run_once(scene: &Scene, run: usize) -> anyhow::Result<RunRecord> {
    let cfg = scene.cfg;
    let t = cfg.period();
    let true_entry = &scene.dict.entries[scene.truth];
    let rho_min = true_entry.rho_min();
    let shaper = cfg.shaper.config();
    let mut tracker = TrackerState::new(scene.truth_path[0], cfg.tracker.p0(), cfg.tracker.q(), cfg.tracker.e());
    let mut dist = ClassDistribution::uniform(scene.dict.len());
    let mut scans = Vec::with_capacity(cfg.scans);
    let mut diverged = None;

    'scan: for k in 1..=cfg.scans {
        let truth = scene.truth_path[k];
        let anchor = tracker.x.g;
        tracker = tracker.predict(t);
        let mut shape = None;
        for (slot, (sensor, domain)) in scene.sensors.iter().zip(&scene.domains).enumerate() {
            let card = true_entry.cardinality(sensor.kind)?;
            let mut rng = stream_rng(cfg.seed, stream_id(experiment::TRACK, run, slot, k));
            let y = generate_scan_at(domain, &truth.pose(), sensor, card, &mut rng, k)?;
            tracker = match tracker.update(&y, &anchor) {
                Ok(next) => next,
                Err(e) => {
                    diverged = Some(format!("scan {k}, {:?} sensor: {e}", sensor.kind));
                    break 'scan;
                }
            };
            match shaper_step(&y, &tracker.x.pose(), &dist, &scene.dict, sensor, &shaper) {
                Ok(out) => {
                    dist = out.distribution;
                    shape = Some(out.shape);
                }
                Err(Error::DegenerateUpdate) => {
                    log::debug!("run {run}, scan {k}: every class ruled out, keeping the prior");
                }
                Err(e) => {
                    diverged = Some(format!("scan {k}, {:?} sensor: {e}", sensor.kind));
                    break 'scan;
                }
            }
        }
        let modal = dist.modal();
        let estimate: ShapeVector = match shape {
            Some(s) => s,
            None => dewhiten(&scene.dict.entries[modal].shape, &tracker.x.pose()),
        };
        let actual = dewhiten(&true_entry.shape, &truth.pose());
        let cell = estimate.diameter().min(actual.diameter()) / cfg.metrics.iou_cells;
        let score = ScanScore {
            k,
            npe: npe(&truth.g, &tracker.x.g, rho_min),
            iou: iou(&estimate, &actual, cell)?,
            chd: chamfer(&estimate, &actual, cfg.metrics.chamfer_samples)?,
        };
        scans.push(ScanRecord {
            k,
            t: k as f64 * t,
            truth,
            estimate: tracker.x,
            probs: dist.probs(),
            modal,
            score,
        });
    }
    if let Some(reason) = &diverged {
        log::warn!("run {run} aborted: {reason}");
    }
    Ok(RunRecord { run, scans, diverged })
}

fn summarize(scene: &Scene, records: &[RunRecord]) -> TrackingSummary {
    let cfg = scene.cfg;
    let runs: Vec<RunSummary> = records
        .iter()
        .map(|r| RunSummary {
            run: r.run,
            first_stream: stream_id(experiment::TRACK, r.run, 0, 1),
            scans: r.scans.len(),
            mean_npe: r.mean_npe(),
            mean_iou: r.mean_iou(),
            mean_chd: r.mean_chd(),
            final_modal_class: r.scans.last().map(|s| scene.dict.entries[s.modal].name.clone()),
            diverged: r.diverged.clone(),
        })
        .collect();
    let done: Vec<&RunSummary> = runs.iter().filter(|r| r.diverged.is_none()).collect();
    let avg = |f: fn(&RunSummary) -> f64| {
        if done.is_empty() {
            f64::NAN
        } else {
            done.iter().map(|r| f(r)).sum::<f64>() / done.len() as f64
        }
    };
    TrackingSummary {
        seed: cfg.seed,
        true_class: cfg.true_class.clone(),
        classes: scene.dict.entries.iter().map(|e| e.name.clone()).collect(),
        period: cfg.period(),
        diverged_runs: runs.len() - done.len(),
        mean_npe: avg(|r| r.mean_npe),
        mean_iou: avg(|r| r.mean_iou),
        mean_chd: avg(|r| r.mean_chd),
        runs,
    }
}

/// Writes one score file per run plus `summary.json` into `dir`.
pub fn write_outputs(out: &TrackingOutput, dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)?;
    let classes = &out.summary.classes;
    let truth = classes
        .iter()
        .position(|c| *c == out.summary.true_class)
        .context("true class missing from summary")?;
    for r in &out.records {
        let mut w = csv::Writer::from_path(dir.join(format!("run_{:03}.csv", r.run)))?;
        w.write_record(["k", "t", "npe", "iou", "chd", "modal_class", "p_true_class"])?;
        for s in &r.scans {
            w.write_record([
                s.k.to_string(),
                s.t.to_string(),
                s.score.npe.to_string(),
                s.score.iou.to_string(),
                s.score.chd.to_string(),
                classes[s.modal].clone(),
                s.probs[truth].to_string(),
            ])?;
        }
        w.flush()?;
    }
    std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&out.summary)? + "\n")?;
    Ok(())
}
