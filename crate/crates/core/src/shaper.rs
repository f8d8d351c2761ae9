//! Shape dictionary and recursive Bayesian classification.

use std::collections::HashSet;
use std::path::Path;

use nalgebra::Matrix2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    barycenter_area, contour_length, dewhiten, edge_partition, rotation, triangulate, validate,
    EdgePartition, Frame, Point, Pose, ShapeVector, Triangulation,
};
use crate::likelihood::{build_particles, dataset_loglik, logaddexp, logsumexp, NoiseModel, ParticleSet, SpatialModel};
use crate::scattering::{CardinalityParams, Dataset, SensorConfig, SensorKind};

/// One shape as stored in a dictionary file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeRecord {
    pub name: String,
    /// Barycentric vertices [m].
    pub vertices: Vec<[f64; 2]>,
    #[serde(default = "default_reflectivity")]
    pub reflectivity: f64,
}

fn default_reflectivity() -> f64 {
    1.0
}

/// Precomputed class information.
#[derive(Clone, Debug)]
pub struct DictionaryEntry {
    pub id: usize,
    pub name: String,
    pub shape: ShapeVector,
    pub length: f64,
    pub area: f64,
    pub partition: EdgePartition,
    pub triangulation: Triangulation,
    pub reflectivity: f64,
    pub contour_cardinality: Option<CardinalityParams>,
    pub surface_cardinality: Option<CardinalityParams>,
    pub particles: Option<ParticleSet>,
}

impl DictionaryEntry {
    pub fn from_record(id: usize, record: &ShapeRecord) -> Result<Self> {
        let load_err = |reason: String| Error::Load {
            entry: record.name.clone(),
            reason,
        };
        if !(0.0..=1.0).contains(&record.reflectivity) {
            return Err(load_err(format!("reflectivity {} outside [0, 1]", record.reflectivity)));
        }
        let pts = record.vertices.iter().map(|v| Point::new(v[0], v[1])).collect();
        let shape = ShapeVector::counter_clockwise(pts, Frame::Barycentric).map_err(|e| load_err(e.to_string()))?;
        let report = validate(&shape);
        let failures = report.failures();
        if !failures.is_empty() {
            let detail: Vec<String> = failures
                .iter()
                .map(|(name, defect)| format!("{name} (defect {defect:e})"))
                .collect();
            return Err(load_err(format!("failed {}", detail.join(", "))));
        }
        if !report.is_symmetric() {
            log::warn!(
                "dictionary entry `{}` is not reflection-symmetric (defect {:e} m)",
                record.name,
                report.symmetry.map_or(0.0, |c| c.defect)
            );
        }
        let (_, area) = barycenter_area(&shape).map_err(|e| load_err(e.to_string()))?;
        let partition = edge_partition(&shape).map_err(|e| load_err(e.to_string()))?;
        let triangulation = triangulate(&shape).map_err(|e| load_err(e.to_string()))?;
        Ok(Self {
            id,
            name: record.name.clone(),
            length: contour_length(&shape),
            area,
            shape,
            partition,
            triangulation,
            reflectivity: record.reflectivity,
            contour_cardinality: None,
            surface_cardinality: None,
            particles: None,
        })
    }

    /// Stores the cardinality parameters for `sensor`'s kind.
    pub fn configure_sensor(&mut self, sensor: &SensorConfig) -> Result<()> {
        let (measure, slot) = match sensor.kind {
            SensorKind::Contour => (self.length, &mut self.contour_cardinality),
            SensorKind::Surface => (self.area, &mut self.surface_cardinality),
        };
        *slot = Some(CardinalityParams::from_measure(
            measure,
            sensor.resolution,
            self.reflectivity,
            sensor.eta,
        )?);
        Ok(())
    }

    /// Draws and caches `n` surface particles.
    pub fn build_particles(&mut self, n: usize, seed: u64) -> Result<()> {
        self.particles = Some(build_particles(&self.name, &self.triangulation, n, seed)?);
        Ok(())
    }

    pub fn cardinality(&self, kind: SensorKind) -> Result<&CardinalityParams> {
        let slot = match kind {
            SensorKind::Contour => &self.contour_cardinality,
            SensorKind::Surface => &self.surface_cardinality,
        };
        slot.as_ref().ok_or_else(|| {
            Error::Precondition(format!("class `{}` has no {kind:?} sensor configured", self.name))
        })
    }

    /// Dataset log-likelihood of barycentric-frame measurements.
    pub fn dataset_loglik(&self, measurements: &[Point], kind: SensorKind, noise: &NoiseModel) -> Result<f64> {
        let card = self.cardinality(kind)?;
        let spatial = match kind {
            SensorKind::Contour => SpatialModel::Contour(&self.partition),
            SensorKind::Surface => SpatialModel::Surface(self.particles.as_ref().ok_or_else(|| {
                Error::Precondition(format!("class `{}` has no particle set", self.name))
            })?),
        };
        Ok(dataset_loglik(measurements, card, spatial, noise))
    }

    /// Outer radius of the barycentric shape.
    pub fn rho_max(&self) -> f64 {
        self.shape.outer_radius()
    }

    /// Inner radius of the barycentric shape.
    pub fn rho_min(&self) -> f64 {
        self.shape.inner_radius()
    }
}

#[derive(Clone, Debug)]
pub struct Dictionary {
    pub entries: Vec<DictionaryEntry>,
}

impl Dictionary {
    pub fn from_records(records: &[ShapeRecord]) -> Result<Self> {
        if records.len() < 2 {
            return Err(Error::Parameter(format!(
                "a dictionary needs at least 2 classes, got {}",
                records.len()
            )));
        }
        let mut seen = HashSet::new();
        let mut entries = Vec::with_capacity(records.len());
        for (id, r) in records.iter().enumerate() {
            if !seen.insert(r.name.as_str()) {
                return Err(Error::Load {
                    entry: r.name.clone(),
                    reason: "duplicate class name".into(),
                });
            }
            entries.push(DictionaryEntry::from_record(id, r)?);
        }
        Ok(Self { entries })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let records: Vec<ShapeRecord> = serde_json::from_str(text)?;
        Self::from_records(&records)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total vertex count.
    pub fn complexity(&self) -> usize {
        self.entries.iter().map(|e| e.shape.len()).sum()
    }

    pub fn average_complexity(&self) -> f64 {
        self.complexity() as f64 / self.len() as f64
    }

    pub fn find(&self, name: &str) -> Option<&DictionaryEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn configure_sensor(&mut self, sensor: &SensorConfig) -> Result<()> {
        self.entries.iter_mut().try_for_each(|e| e.configure_sensor(sensor))
    }

    /// Builds `n` particles per class; class `i` uses seed `seed + i`.
    pub fn build_particles(&mut self, n: usize, seed: u64) -> Result<()> {
        self.entries
            .iter_mut()
            .try_for_each(|e| e.build_particles(n, seed.wrapping_add(e.id as u64)))
    }

    /// Per-class dataset log-likelihoods, evaluated in parallel.
    pub fn logliks(&self, measurements: &[Point], kind: SensorKind, noise: &NoiseModel) -> Result<Vec<f64>> {
        self.entries
            .par_iter()
            .map(|e| e.dataset_loglik(measurements, kind, noise))
            .collect()
    }

    /// Sequential counterpart of [`Dictionary::logliks`].
    pub fn logliks_sequential(&self, measurements: &[Point], kind: SensorKind, noise: &NoiseModel) -> Result<Vec<f64>> {
        self.entries
            .iter()
            .map(|e| e.dataset_loglik(measurements, kind, noise))
            .collect()
    }
}

/// Reads a dictionary file: a JSON array of `{name, vertices, reflectivity}`.
pub fn load_dictionary(path: &Path) -> Result<Dictionary> {
    Dictionary::from_json(&std::fs::read_to_string(path)?)
}

/// Probability vector over classes, stored as log-probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassDistribution {
    log_p: Vec<f64>,
}

impl ClassDistribution {
    pub fn uniform(n: usize) -> Self {
        Self {
            log_p: vec![-(n as f64).ln(); n],
        }
    }

    /// Normalizes arbitrary log-weights.
    pub fn from_log_weights(w: Vec<f64>) -> Result<Self> {
        let z = logsumexp(&w);
        if !z.is_finite() {
            return Err(Error::Parameter("class weights do not normalize".into()));
        }
        Ok(Self {
            log_p: w.into_iter().map(|x| x - z).collect(),
        })
    }

    pub fn from_probs(p: &[f64]) -> Result<Self> {
        Self::from_log_weights(p.iter().map(|v| v.ln()).collect())
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_p
    }

    pub fn probs(&self) -> Vec<f64> {
        self.log_p.iter().map(|v| v.exp()).collect()
    }

    pub fn len(&self) -> usize {
        self.log_p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_p.is_empty()
    }

    /// Most probable class; ties go to the lowest id.
    pub fn modal(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.log_p.iter().enumerate() {
            if v > self.log_p[best] {
                best = i;
            }
        }
        best
    }
}

/// Markov prediction with self-transition probability `delta`:
/// `p-(i) = (I δ - 1)/(I - 1) p(i) + (1 - δ)/(I - 1)`.
pub fn predict_class(p: &ClassDistribution, delta: f64) -> Result<ClassDistribution> {
    let n = p.len() as f64;
    if !(delta > 1.0 / n && delta <= 1.0) {
        return Err(Error::Parameter(format!(
            "class persistence {delta} outside (1/{n}, 1]"
        )));
    }
    let ln_keep = ((n * delta - 1.0) / (n - 1.0)).ln();
    let ln_jump = ((1.0 - delta) / (n - 1.0)).ln();
    let w: Vec<f64> = p.log_p.iter().map(|lp| logaddexp(ln_keep + lp, ln_jump)).collect();
    ClassDistribution::from_log_weights(w)
}

/// Bayes update `p(i) ∝ exp(loglik_i) p-(i)`.
pub fn update_class(prior: &ClassDistribution, logliks: &[f64]) -> Result<ClassDistribution> {
    if logliks.len() != prior.len() {
        return Err(Error::Parameter(format!(
            "{} log-likelihoods for {} classes",
            logliks.len(),
            prior.len()
        )));
    }
    if logliks.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(Error::Numerical("class log-likelihood is NaN or +inf".into()));
    }
    let top = logliks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return Err(Error::DegenerateUpdate);
    }
    // subtracting the maximum makes a common offset cancel exactly
    let w: Vec<f64> = prior
        .log_p
        .iter()
        .zip(logliks)
        .map(|(lp, ll)| lp + (ll - top))
        .collect();
    ClassDistribution::from_log_weights(w)
}

/// Shaper parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ShaperConfig {
    /// Class persistence δ.
    pub delta: f64,
    /// Covariance inflation ΔR [m^2].
    pub delta_r: Matrix2<f64>,
}

impl Default for ShaperConfig {
    fn default() -> Self {
        Self {
            delta: 0.95,
            delta_r: Matrix2::identity(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ShaperOutput {
    pub distribution: ClassDistribution,
    pub logliks: Vec<f64>,
    pub modal: usize,
    /// Modal shape placed at the tracked pose.
    pub shape: ShapeVector,
}

/// Maps world measurements into the barycentric frame of `pose`.
pub fn whiten_dataset(y: &Dataset, pose: &Pose) -> Vec<Point> {
    y.measurements.iter().map(|z| pose.to_local(z)).collect()
}

/// Noise covariance seen in the barycentric frame of heading `h`, inflated
/// by `delta_r`.
pub fn whitened_noise(r: &Matrix2<f64>, h: f64, delta_r: &Matrix2<f64>) -> Result<NoiseModel> {
    let u = rotation(h);
    let rotated = u.transpose() * r * u;
    let sym = (rotated + rotated.transpose()) * 0.5;
    NoiseModel::new(sym + delta_r)
}

/// One classification cycle: whiten the scan, score every class, predict and
/// update the class distribution, and place the modal shape at `pose`.
pub fn shaper_step(
    y: &Dataset,
    pose: &Pose,
    prior: &ClassDistribution,
    dict: &Dictionary,
    sensor: &SensorConfig,
    config: &ShaperConfig,
) -> Result<ShaperOutput> {
    let local = whiten_dataset(y, pose);
    let noise = whitened_noise(&sensor.r, pose.h, &config.delta_r)?;
    let logliks = dict.logliks(&local, sensor.kind, &noise)?;
    let predicted = predict_class(prior, config.delta)?;
    let distribution = update_class(&predicted, &logliks)?;
    let modal = distribution.modal();
    Ok(ShaperOutput {
        shape: dewhiten(&dict.entries[modal].shape, pose),
        modal,
        distribution,
        logliks,
    })
}
