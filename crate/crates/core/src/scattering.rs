//! Scattering-point generation and sensor scan simulation.

use nalgebra::Matrix2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    barycenter_area, contour_length, edge_partition, triangulate, EdgePartition, Point, Pose,
    ShapeVector, Triangulation,
};

/// Generator used for every simulation stream.
pub type SimRng = ChaCha8Rng;

/// Independent generator for sub-stream `stream` of the master `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensorKind {
    Contour,
    Surface,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SensorConfig {
    pub kind: SensorKind,
    /// Measurement noise covariance [m^2].
    pub r: Matrix2<f64>,
    /// Contour resolution [m] or surface resolution [m^2].
    pub resolution: f64,
    /// Lighting power in `[0, 1]`.
    pub eta: f64,
    /// Scan period [s].
    pub period: f64,
}

impl SensorConfig {
    pub fn new(kind: SensorKind, r: Matrix2<f64>, resolution: f64, eta: f64, period: f64) -> Result<Self> {
        check_spd(&r)?;
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::Parameter(format!("sensor resolution {resolution} must be > 0")));
        }
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::Parameter(format!("lighting power {eta} outside [0, 1]")));
        }
        if !(period > 0.0) {
            return Err(Error::Parameter(format!("scan period {period} must be > 0")));
        }
        Ok(Self {
            kind,
            r,
            resolution,
            eta,
            period,
        })
    }

    /// Sensor with isotropic noise `sigma^2 I`.
    pub fn isotropic(kind: SensorKind, sigma: f64, resolution: f64, eta: f64, period: f64) -> Result<Self> {
        Self::new(kind, Matrix2::identity() * (sigma * sigma), resolution, eta, period)
    }
}

pub(crate) fn check_spd(r: &Matrix2<f64>) -> Result<()> {
    let finite = r.iter().all(|v| v.is_finite());
    let symmetric = (r[(0, 1)] - r[(1, 0)]).abs() <= 1e-12 * r.abs().max();
    if !finite || !symmetric || r.cholesky().is_none() {
        return Err(Error::Parameter(format!(
            "noise covariance is not symmetric positive definite: {:?}",
            r.as_slice()
        )));
    }
    Ok(())
}

/// Binomial cardinality model: `trials` scattering opportunities, each
/// detected with probability `success`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CardinalityParams {
    pub trials: u64,
    pub success: f64,
}

impl CardinalityParams {
    pub fn new(trials: u64, success: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&success) {
            return Err(Error::Parameter(format!("detection probability {success} outside [0, 1]")));
        }
        Ok(Self { trials, success })
    }

    /// `trials = round(measure / resolution)`, `success = reflectivity * eta`.
    pub fn from_measure(measure: f64, resolution: f64, reflectivity: f64, eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&reflectivity) {
            return Err(Error::Parameter(format!("reflectivity {reflectivity} outside [0, 1]")));
        }
        if !(resolution > 0.0) {
            return Err(Error::Parameter(format!("resolution {resolution} must be > 0")));
        }
        let trials = (measure.abs() / resolution).round() as u64;
        let params = Self::new(trials, reflectivity * eta)?;
        if params.below_resolution() {
            log::warn!("object measure {measure} is below the sensor resolution {resolution}");
        }
        Ok(params)
    }

    pub fn mean(&self) -> f64 {
        self.trials as f64 * self.success
    }

    pub fn variance(&self) -> f64 {
        self.mean() * (1.0 - self.success)
    }

    /// The object is smaller than one resolution cell and never detected.
    pub fn below_resolution(&self) -> bool {
        self.trials == 0
    }
}

/// Cardinality parameters of `shape` as seen by `sensor`.
pub fn cardinality_params(shape: &ShapeVector, sensor: &SensorConfig, reflectivity: f64) -> Result<CardinalityParams> {
    let measure = match sensor.kind {
        SensorKind::Contour => contour_length(shape),
        SensorKind::Surface => barycenter_area(shape)?.1,
    };
    CardinalityParams::from_measure(measure, sensor.resolution, reflectivity, sensor.eta)
}

pub fn sample_cardinality<R: Rng + ?Sized>(params: &CardinalityParams, rng: &mut R) -> usize {
    if params.trials == 0 || params.success == 0.0 {
        return 0;
    }
    if params.success == 1.0 {
        return params.trials as usize;
    }
    Binomial::new(params.trials, params.success)
        .expect("success probability validated on construction")
        .sample(rng) as usize
}

/// Uniform variate in `(0, 1]`.
fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Uniform point on the contour: an edge drawn by inverse-transform sampling
/// of the length weights, then a uniform position along it.
pub fn sample_contour_point<R: Rng + ?Sized>(partition: &EdgePartition, rng: &mut R) -> Point {
    let i = partition.select(open_unit(rng));
    let (a, b) = partition.edges[i];
    let t: f64 = rng.random();
    a + (b - a) * t
}

/// Maps `(a1, a2) ∈ [0, 1]^2` to a triangle point; uniform inputs give a
/// uniform point.
pub fn triangle_point(tri: &[Point; 3], a1: f64, a2: f64) -> Point {
    let r = a1.sqrt();
    tri[0] * (1.0 - r) + tri[1] * (r * (1.0 - a2)) + tri[2] * (r * a2)
}

pub fn sample_triangle_point<R: Rng + ?Sized>(tri: &[Point; 3], rng: &mut R) -> Point {
    let a1: f64 = rng.random();
    let a2: f64 = rng.random();
    triangle_point(tri, a1, a2)
}

/// Uniform point on the surface: a triangle drawn in proportion to its area,
/// then a uniform point inside it.
pub fn sample_surface_point<R: Rng + ?Sized>(tri: &Triangulation, rng: &mut R) -> Point {
    let i = tri.select(open_unit(rng));
    sample_triangle_point(&tri.triangles[i], rng)
}

/// One sensor scan.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub measurements: Vec<Point>,
    pub k: usize,
}

impl Dataset {
    pub fn new(measurements: Vec<Point>, k: usize) -> Self {
        Self { measurements, k }
    }

    pub fn len(&self) -> usize {
        self.measurements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measurements.is_empty()
    }

    /// Mean measurement, `None` when empty.
    pub fn mean(&self) -> Option<Point> {
        if self.measurements.is_empty() {
            return None;
        }
        let sum: Point = self.measurements.iter().sum();
        Some(sum / self.measurements.len() as f64)
    }
}

/// Zero-mean Gaussian sampler built from the Cholesky factor of `R`.
#[derive(Clone, Debug)]
pub struct NoiseSampler {
    l: Matrix2<f64>,
}

impl NoiseSampler {
    pub fn new(r: &Matrix2<f64>) -> Result<Self> {
        check_spd(r)?;
        let l = r.cholesky().expect("checked above").l();
        Ok(Self { l })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let z = Point::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        self.l * z
    }
}

/// Precomputed sampling domain of one shape for one sensor kind.
#[derive(Clone, Debug)]
pub enum ScatterDomain {
    Contour(EdgePartition),
    Surface(Triangulation),
}

impl ScatterDomain {
    pub fn new(shape: &ShapeVector, kind: SensorKind) -> Result<Self> {
        Ok(match kind {
            SensorKind::Contour => Self::Contour(edge_partition(shape)?),
            SensorKind::Surface => Self::Surface(triangulate(shape)?),
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        match self {
            Self::Contour(p) => sample_contour_point(p, rng),
            Self::Surface(t) => sample_surface_point(t, rng),
        }
    }
}

/// Simulates a scan of a world-frame shape.
pub fn generate_scan<R: Rng + ?Sized>(
    shape_world: &ShapeVector,
    sensor: &SensorConfig,
    params: &CardinalityParams,
    rng: &mut R,
    k: usize,
) -> Result<Dataset> {
    let domain = ScatterDomain::new(shape_world, sensor.kind)?;
    generate_scan_at(&domain, &Pose::identity(), sensor, params, rng, k)
}

/// Simulates a scan of the shape behind `domain` (barycentric frame) placed
/// at `pose`.
pub fn generate_scan_at<R: Rng + ?Sized>(
    domain: &ScatterDomain,
    pose: &Pose,
    sensor: &SensorConfig,
    params: &CardinalityParams,
    rng: &mut R,
    k: usize,
) -> Result<Dataset> {
    let noise = NoiseSampler::new(&sensor.r)?;
    let m = sample_cardinality(params, rng);
    let measurements = (0..m)
        .map(|_| {
            let z = pose.to_world(&domain.sample(rng));
            z + noise.sample(rng)
        })
        .collect();
    Ok(Dataset::new(measurements, k))
}
