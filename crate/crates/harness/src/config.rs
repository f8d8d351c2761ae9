//! Scenario configuration documents.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context};
use nalgebra::{Matrix2, Matrix3, Matrix6, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use splinetrack::geometry::Point;
use splinetrack::motion::{KinematicState, Segment};
use splinetrack::scattering::{SensorConfig, SensorKind};
use splinetrack::shaper::{load_dictionary, Dictionary, ShaperConfig};

use crate::catalog::builtin_records;

/// Name that selects the built-in dictionary instead of a file.
pub const BUILTIN: &str = "builtin";

/// A full experiment description.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub seed: u64,
    /// Dictionary file, relative to the config file, or `builtin`.
    #[serde(default = "builtin_name")]
    pub dictionary: String,
    pub true_class: String,
    pub sensors: Vec<SensorSpec>,
    #[serde(default)]
    pub trajectory: Option<TrajectorySpec>,
    #[serde(default)]
    pub tracker: TrackerSpec,
    #[serde(default)]
    pub shaper: ShaperSpec,
    pub scans: usize,
    /// Independent Monte Carlo runs of the tracking experiment.
    #[serde(default = "one")]
    pub runs: usize,
    /// Recursive classification runs reported by the classification experiment.
    #[serde(default)]
    pub convergence: Option<ConvergenceSpec>,
    #[serde(default)]
    pub metrics: MetricSpec,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn builtin_name() -> String {
    BUILTIN.to_string()
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSpec {
    pub kind: SensorKind,
    /// Isotropic standard deviation [m]; ignored when `r` is given.
    #[serde(default)]
    pub sigma: Option<f64>,
    /// Full noise covariance [m^2].
    #[serde(default)]
    pub r: Option<[[f64; 2]; 2]>,
    /// Resolution: metres for contour sensors, square metres for surface ones.
    pub resolution: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_period")]
    pub period: f64,
}

fn default_eta() -> f64 {
    0.9
}

fn default_period() -> f64 {
    0.1
}

impl SensorSpec {
    pub fn build(&self) -> anyhow::Result<SensorConfig> {
        let r = match (self.r, self.sigma) {
            (Some(r), _) => Matrix2::new(r[0][0], r[0][1], r[1][0], r[1][1]),
            (None, Some(s)) => Matrix2::identity() * (s * s),
            (None, None) => bail!("{:?} sensor needs `sigma` or `r`", self.kind),
        };
        Ok(SensorConfig::new(self.kind, r, self.resolution, self.eta, self.period)?)
    }
}

/// Initial kinematic state in world coordinates.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    #[serde(default)]
    pub x: f64,
    #[serde(default)]
    pub y: f64,
    /// [rad]
    #[serde(default)]
    pub heading: f64,
    /// [m/s]
    #[serde(default)]
    pub speed: f64,
    /// [m/s^2]
    #[serde(default)]
    pub acceleration: f64,
    /// [rad/s]
    #[serde(default)]
    pub turn_rate: f64,
}

impl InitialState {
    pub fn state(&self) -> KinematicState {
        KinematicState::new(Point::new(self.x, self.y), self.heading, self.speed, self.acceleration, self.turn_rate)
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    /// [s]
    pub duration: f64,
    /// [m/s^2]
    #[serde(default)]
    pub acceleration: f64,
    /// [rad/s]
    #[serde(default)]
    pub turn_rate: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySpec {
    pub initial: InitialState,
    #[serde(default)]
    pub segments: Vec<SegmentSpec>,
}

impl TrajectorySpec {
    pub fn segments(&self) -> Vec<Segment> {
        self.segments
            .iter()
            .map(|s| Segment {
                duration: s.duration,
                s_dot: s.acceleration,
                omega: s.turn_rate,
            })
            .collect()
    }
}

/// Filter covariances, given as standard deviations per component.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackerSpec {
    /// Process noise: x, y [m], h [rad], s [m/s], ṡ [m/s^2], ω [rad/s].
    #[serde(default = "default_q")]
    pub q_std: [f64; 6],
    /// Static-estimate noise: x, y [m], h [rad].
    #[serde(default = "default_e")]
    pub e_std: [f64; 3],
    /// Initial covariance; defaults to the static-estimate scale on the pose
    /// and the process scale on the rates.
    #[serde(default)]
    pub p0_std: Option<[f64; 6]>,
}

fn default_q() -> [f64; 6] {
    [1.0, 1.0, 0.05, 10.0, 0.1, 0.1]
}

fn default_e() -> [f64; 3] {
    [10.0, 10.0, 5.0]
}

impl Default for TrackerSpec {
    fn default() -> Self {
        Self {
            q_std: default_q(),
            e_std: default_e(),
            p0_std: None,
        }
    }
}

fn squares<const N: usize>(v: &[f64; N]) -> [f64; N] {
    v.map(|s| s * s)
}

impl TrackerSpec {
    pub fn q(&self) -> Matrix6<f64> {
        Matrix6::from_diagonal(&Vector6::from(squares(&self.q_std)))
    }

    pub fn e(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::from(squares(&self.e_std)))
    }

    pub fn p0(&self) -> Matrix6<f64> {
        let std = self.p0_std.unwrap_or([
            self.e_std[0],
            self.e_std[1],
            self.e_std[2],
            self.q_std[3],
            self.q_std[4],
            self.q_std[5],
        ]);
        Matrix6::from_diagonal(&Vector6::from(squares(&std)))
    }
}

/// Covariance inflation, either isotropic [m^2] or a full matrix.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Inflation {
    Isotropic(f64),
    Full([[f64; 2]; 2]),
}

impl Inflation {
    pub fn matrix(&self) -> Matrix2<f64> {
        match *self {
            Inflation::Isotropic(v) => Matrix2::identity() * v,
            Inflation::Full(m) => Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1]),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShaperSpec {
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_inflation")]
    pub delta_r: Inflation,
    /// Surface particles per class.
    #[serde(default = "default_particles")]
    pub particles: usize,
}

fn default_delta() -> f64 {
    0.95
}

fn default_inflation() -> Inflation {
    Inflation::Isotropic(1.0)
}

fn default_particles() -> usize {
    1000
}

impl Default for ShaperSpec {
    fn default() -> Self {
        Self {
            delta: default_delta(),
            delta_r: default_inflation(),
            particles: default_particles(),
        }
    }
}

impl ShaperSpec {
    pub fn config(&self) -> ShaperConfig {
        ShaperConfig {
            delta: self.delta,
            delta_r: self.delta_r.matrix(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSpec {
    pub runs: usize,
    /// Scans allowed to reach the threshold.
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_horizon() -> usize {
    20
}

fn default_threshold() -> f64 {
    0.95
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    /// IOU raster cells across the smaller diameter.
    #[serde(default = "default_cells")]
    pub iou_cells: f64,
    #[serde(default = "default_samples")]
    pub chamfer_samples: usize,
}

fn default_cells() -> f64 {
    splinetrack::metrics::IOU_CELLS_PER_DIAMETER
}

fn default_samples() -> usize {
    splinetrack::metrics::CHAMFER_SAMPLES
}

impl Default for MetricSpec {
    fn default() -> Self {
        Self {
            iou_cells: default_cells(),
            chamfer_samples: default_samples(),
        }
    }
}

/// Reads a JSON document and resolves relative paths against its directory.
pub fn read_config<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<(T, PathBuf)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((value, base))
}

/// Loads the dictionary named by `source`.
pub fn resolve_dictionary(source: &str, base_dir: &Path) -> anyhow::Result<Dictionary> {
    if source == BUILTIN {
        return Ok(Dictionary::from_records(&builtin_records()?)?);
    }
    let path = base_dir.join(source);
    load_dictionary(&path).with_context(|| format!("loading dictionary {}", path.display()))
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let (mut cfg, base): (Self, PathBuf) = read_config(path)?;
        cfg.base_dir = base;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Checks the parts of the document that do not need the dictionary.
    pub fn validate(&self) -> anyhow::Result<()> {
        ensure!(self.scans >= 1, "scan count must be at least 1");
        ensure!(
            (1..=2).contains(&self.sensors.len()),
            "one or two sensors expected, got {}",
            self.sensors.len()
        );
        if let [a, b] = self.sensors.as_slice() {
            ensure!(a.kind != b.kind, "two sensors must be of different kinds");
            ensure!(a.period == b.period, "fused sensors must share the scan period");
        }
        if let Some(c) = &self.convergence {
            ensure!(c.horizon >= 1, "convergence horizon must be at least 1");
            ensure!(c.threshold > 0.0 && c.threshold < 1.0, "convergence threshold must lie in (0, 1)");
        }
        ensure!(self.shaper.particles >= 1, "at least one particle per class");
        ensure!(self.metrics.iou_cells > 0.0, "iou_cells must be positive");
        Ok(())
    }

    /// Sensors ordered contour first.
    pub fn sensor_configs(&self) -> anyhow::Result<Vec<SensorConfig>> {
        let mut s: Vec<SensorConfig> = self.sensors.iter().map(SensorSpec::build).collect::<anyhow::Result<_>>()?;
        s.sort_by_key(|c| c.kind != SensorKind::Contour);
        Ok(s)
    }

    pub fn period(&self) -> f64 {
        self.sensors.first().map_or(0.1, |s| s.period)
    }

    /// Loads the dictionary, configures cardinalities for every sensor and
    /// draws surface particles when a surface sensor is present. Returns the
    /// dictionary and the index of the true class.
    pub fn prepare_dictionary(&self, sensors: &[SensorConfig]) -> anyhow::Result<(Dictionary, usize)> {
        let mut dict = resolve_dictionary(&self.dictionary, &self.base_dir)?;
        let truth = dict
            .find(&self.true_class)
            .map(|e| e.id)
            .with_context(|| format!("true class `{}` is not in the dictionary", self.true_class))?;
        for s in sensors {
            dict.configure_sensor(s)?;
        }
        if sensors.iter().any(|s| s.kind == SensorKind::Surface) {
            dict.build_particles(self.shaper.particles, particle_seed(self.seed))?;
        }
        Ok((dict, truth))
    }
}

/// Seed of the per-class particle sets, kept apart from the scan streams.
pub fn particle_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"true_class": "arrow", "sensors": [{"kind": "contour", "sigma": 1.0, "resolution": 5.0}], "scans": 3}"#;

    #[test]
    fn defaults_fill_in() {
        let c = ScenarioConfig::from_json(MINIMAL).unwrap();
        c.validate().unwrap();
        assert_eq!(c.dictionary, BUILTIN);
        assert_eq!(c.shaper.delta, 0.95);
        assert_eq!(c.sensors[0].eta, 0.9);
        assert_eq!(c.tracker.q()[(0, 0)], 1.0);
        assert_eq!(c.tracker.p0()[(0, 0)], 100.0);
        let (dict, truth) = c.prepare_dictionary(&c.sensor_configs().unwrap()).unwrap();
        assert_eq!(dict.entries[truth].name, "arrow");
    }

    #[test]
    fn rejects_bad_documents() {
        let unknown = MINIMAL.replace("\"scans\"", "\"scnas\"");
        assert!(ScenarioConfig::from_json(&unknown).is_err());
        let zero = ScenarioConfig::from_json(&MINIMAL.replace("3}", "0}")).unwrap();
        assert!(zero.validate().is_err());
        let missing = ScenarioConfig::from_json(&MINIMAL.replace("arrow", "blimp")).unwrap();
        assert!(missing.prepare_dictionary(&missing.sensor_configs().unwrap()).is_err());
        let no_noise = ScenarioConfig::from_json(&MINIMAL.replace("\"sigma\": 1.0, ", "")).unwrap();
        assert!(no_noise.sensor_configs().is_err());
    }

    #[test]
    fn inflation_accepts_scalar_or_matrix() {
        let s: ShaperSpec = serde_json::from_str(r#"{"delta_r": [[2.0, 0.0], [0.0, 3.0]]}"#).unwrap();
        assert_eq!(s.delta_r.matrix()[(1, 1)], 3.0);
        let s: ShaperSpec = serde_json::from_str(r#"{"delta_r": 0.5}"#).unwrap();
        assert_eq!(s.delta_r.matrix()[(0, 0)], 0.5);
    }

    #[test]
    fn sensors_sorted_contour_first() {
        let text = r#"{"true_class": "arrow", "scans": 1, "sensors": [
            {"kind": "surface", "sigma": 1.0, "resolution": 5.0},
            {"kind": "contour", "sigma": 1.0, "resolution": 5.0}]}"#;
        let c = ScenarioConfig::from_json(text).unwrap();
        c.validate().unwrap();
        let s = c.sensor_configs().unwrap();
        assert_eq!(s[0].kind, SensorKind::Contour);
        assert_eq!(s[1].kind, SensorKind::Surface);
    }
}
