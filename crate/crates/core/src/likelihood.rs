//! Measurement likelihoods in log space.
//!
//! The contour likelihood of a measurement is a length-weighted mixture of
//! single-edge likelihoods, each available in closed form as a difference of
//! normal CDFs. The surface likelihood is approximated by averaging Gaussian
//! kernels centred on uniformly drawn particles.

use std::f64::consts::LN_2;

use nalgebra::Matrix2;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{EdgePartition, Point, Triangulation};
use crate::scattering::{check_spd, sample_surface_point, CardinalityParams, SimRng};

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Edges shorter than this fraction of `max(|v0|, |v1|, 1)` are treated as
/// points.
pub const DEGENERATE_EDGE_REL: f64 = 1e-9;

/// Gaussian noise covariance with its inverse and log-determinant.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseModel {
    r: Matrix2<f64>,
    r_inv: Matrix2<f64>,
    log_det: f64,
}

impl NoiseModel {
    pub fn new(r: Matrix2<f64>) -> Result<Self> {
        check_spd(&r)?;
        let det = r.determinant();
        let r_inv = Matrix2::new(r[(1, 1)], -r[(0, 1)], -r[(1, 0)], r[(0, 0)]) / det;
        Ok(Self {
            r,
            r_inv,
            log_det: det.ln(),
        })
    }

    pub fn isotropic(sigma: f64) -> Result<Self> {
        Self::new(Matrix2::identity() * (sigma * sigma))
    }

    pub fn covariance(&self) -> &Matrix2<f64> {
        &self.r
    }

    pub fn precision(&self) -> &Matrix2<f64> {
        &self.r_inv
    }

    /// `d' R^-1 d`.
    #[inline]
    pub fn mahalanobis2(&self, d: &Point) -> f64 {
        let ri = &self.r_inv;
        d.x * (ri[(0, 0)] * d.x + ri[(0, 1)] * d.y) + d.y * (ri[(1, 0)] * d.x + ri[(1, 1)] * d.y)
    }

    /// `log N(d; 0, R)`.
    #[inline]
    pub fn log_density(&self, d: &Point) -> f64 {
        -0.5 * self.mahalanobis2(d) - LN_2PI - 0.5 * self.log_det
    }
}

/// `log(1 - exp(x))` for `x <= 0`.
fn log1mexp(x: f64) -> f64 {
    if x > -LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// `log(exp(a) + exp(b))`.
pub fn logaddexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + (-(a - b).abs()).exp().ln_1p()
}

/// `log Σ exp(x_i)`; `-inf` for an empty or all `-inf` input.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `log N(x; 0, 1)`.
#[inline]
fn log_phi(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// `log Q(x)`, the log upper-tail probability of the standard normal.
pub fn log_normal_sf(x: f64) -> f64 {
    if x < 37.0 {
        (0.5 * libm::erfc(x / SQRT_2)).ln()
    } else {
        // asymptotic expansion Q(x) ~ φ(x)/x · Σ (-1)^k (2k-1)!! / x^2k
        let inv2 = 1.0 / (x * x);
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..8 {
            term *= -((2 * k - 1) as f64) * inv2;
            sum += term;
        }
        log_phi(x) - x.ln() + sum.ln()
    }
}

/// `log Φ(x)`.
pub fn log_normal_cdf(x: f64) -> f64 {
    log_normal_sf(-x)
}

/// Nodes and weights of 8-point Gauss-Legendre on `[-1, 1]`.
const GL8: [(f64, f64); 4] = [
    (0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_3),
];

/// `log(Φ(u) - Φ(l))` for `l <= u`.
pub fn log_normal_cdf_diff(l: f64, u: f64) -> f64 {
    if l >= u {
        return f64::NEG_INFINITY;
    }
    let width = u - l;
    if width * (1.0 + l.abs().max(u.abs())) < 1.0 {
        // narrow interval: integrate the density directly, relative to its
        // value at the midpoint
        let mid = 0.5 * (l + u);
        let half = 0.5 * width;
        let lm = log_phi(mid);
        let mut acc = 0.0;
        for (node, weight) in GL8 {
            for t in [mid - half * node, mid + half * node] {
                acc += weight * (log_phi(t) - lm).exp();
            }
        }
        return lm + (half * acc).ln();
    }
    if l >= 0.0 {
        let ql = log_normal_sf(l);
        ql + log1mexp(log_normal_sf(u) - ql)
    } else if u <= 0.0 {
        let cu = log_normal_cdf(u);
        cu + log1mexp(log_normal_cdf(l) - cu)
    } else {
        (0.5 * (libm::erf(u / SQRT_2) - libm::erf(l / SQRT_2))).ln()
    }
}

/// Quadratic-form coefficients of the single-edge likelihood with
/// `A = v0 - v1` and `B = y - v0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeQuadratics {
    /// `A' R^-1 A`
    pub a: f64,
    /// `B' R^-1 A`
    pub b: f64,
    /// `log N(B; 0, R)`
    pub gauss_b: f64,
}

impl EdgeQuadratics {
    pub fn new(y: &Point, v0: &Point, v1: &Point, noise: &NoiseModel) -> Self {
        let a_vec = v0 - v1;
        let b_vec = y - v0;
        let ri = noise.precision();
        let ra = ri * a_vec;
        Self {
            a: a_vec.dot(&ra),
            b: b_vec.dot(&ra),
            gauss_b: noise.log_density(&b_vec),
        }
    }
}

fn is_degenerate_edge(v0: &Point, v1: &Point) -> bool {
    let scale = v0.norm().max(v1.norm()).max(1.0);
    (v1 - v0).norm() < DEGENERATE_EDGE_REL * scale
}

/// Log-likelihood of `y` for a scattering point uniform on the segment
/// `v0 -> v1`: `log ∫_0^1 N(y; v0 + α(v1 - v0), R) dα`.
pub fn edge_loglik(y: &Point, v0: &Point, v1: &Point, noise: &NoiseModel) -> f64 {
    if is_degenerate_edge(v0, v1) {
        return noise.log_density(&(y - v0));
    }
    let a_vec = v0 - v1;
    let b_vec = y - v0;
    let ra = noise.precision() * a_vec;
    let a = a_vec.dot(&ra);
    let b = b_vec.dot(&ra);
    // residual at the closest point of the supporting line, in the R metric;
    // equals gauss_b + b^2/(2a) without the cancellation
    let e = b_vec - a_vec * (b / a);
    let sa = a.sqrt();
    -0.5 * noise.mahalanobis2(&e) - LN_SQRT_2PI - 0.5 * noise.log_det - sa.ln()
        + log_normal_cdf_diff(b / sa, (a + b) / sa)
}

/// Log-likelihood of `y` for a scattering point uniform on the contour.
pub fn contour_loglik(y: &Point, partition: &EdgePartition, noise: &NoiseModel) -> f64 {
    let terms: Vec<f64> = partition
        .edges
        .iter()
        .zip(&partition.weights)
        .map(|((v0, v1), w)| w.ln() + edge_loglik(y, v0, v1, noise))
        .collect();
    logsumexp(&terms)
}

/// Uniform surface samples used by the Monte Carlo likelihood.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleSet {
    pub particles: Vec<Point>,
    /// Identifier of the shape the particles were drawn from.
    pub source: String,
    pub seed: u64,
}

impl ParticleSet {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }
}

/// Draws `n` uniform surface particles, deterministically from `seed`.
pub fn build_particles(source: &str, tri: &Triangulation, n: usize, seed: u64) -> Result<ParticleSet> {
    if n == 0 {
        return Err(Error::Parameter("particle count must be >= 1".into()));
    }
    let mut rng = SimRng::seed_from_u64(seed);
    let particles = (0..n).map(|_| sample_surface_point(tri, &mut rng)).collect();
    Ok(ParticleSet {
        particles,
        source: source.to_owned(),
        seed,
    })
}

/// Fixed-point scale for the kernel sum (`2^100`).
const FIXED_SCALE: f64 = 1_267_650_600_228_229_401_496_703_205_376.0;
const LN_FIXED_SCALE: f64 = 100.0 * LN_2;

/// Monte Carlo log-likelihood `log (1/N) Σ N(y; z_i, R)`.
///
/// Kernel values are normalized by their maximum and accumulated in integer
/// fixed point, so the result does not depend on particle order.
pub fn mc_loglik(y: &Point, particles: &ParticleSet, noise: &NoiseModel) -> f64 {
    let pts = &particles.particles;
    let mut exps = Vec::with_capacity(pts.len());
    let mut top = f64::NEG_INFINITY;
    for z in pts {
        let q = -0.5 * noise.mahalanobis2(&(y - z));
        top = top.max(q);
        exps.push(q);
    }
    if top == f64::NEG_INFINITY {
        return top;
    }
    let total: u128 = exps
        .iter()
        .map(|q| ((q - top).exp() * FIXED_SCALE) as u128)
        .sum();
    top + (total as f64).ln() - LN_FIXED_SCALE - (pts.len() as f64).ln() - LN_2PI - 0.5 * noise.log_det
}

/// `ln C(n, k)`.
fn ln_choose(n: u64, k: u64) -> f64 {
    if k == 0 || k == n {
        return 0.0;
    }
    libm::lgamma(n as f64 + 1.0) - libm::lgamma(k as f64 + 1.0) - libm::lgamma((n - k) as f64 + 1.0)
}

/// Binomial log-probability of `m` detections.
pub fn binomial_logpmf(m: usize, params: &CardinalityParams) -> f64 {
    let (n, k, p) = (params.trials, m as u64, params.success);
    if k > n {
        return f64::NEG_INFINITY;
    }
    let hits = if k == 0 {
        0.0
    } else if p == 0.0 {
        return f64::NEG_INFINITY;
    } else {
        k as f64 * p.ln()
    };
    let misses = if k == n {
        0.0
    } else if p == 1.0 {
        return f64::NEG_INFINITY;
    } else {
        (n - k) as f64 * (-p).ln_1p()
    };
    ln_choose(n, k) + hits + misses
}

/// Spatial part of a dataset likelihood.
#[derive(Clone, Copy, Debug)]
pub enum SpatialModel<'a> {
    Contour(&'a EdgePartition),
    Surface(&'a ParticleSet),
}

impl SpatialModel<'_> {
    pub fn loglik(&self, y: &Point, noise: &NoiseModel) -> f64 {
        match self {
            Self::Contour(p) => contour_loglik(y, p, noise),
            Self::Surface(z) => mc_loglik(y, z, noise),
        }
    }
}

/// Dataset log-likelihood: the binomial cardinality term plus the sum of
/// per-measurement spatial log-likelihoods.
pub fn dataset_loglik(
    measurements: &[Point],
    cardinality: &CardinalityParams,
    spatial: SpatialModel<'_>,
    noise: &NoiseModel,
) -> f64 {
    let card = binomial_logpmf(measurements.len(), cardinality);
    if card == f64::NEG_INFINITY {
        return card;
    }
    card + measurements.iter().map(|y| spatial.loglik(y, noise)).sum::<f64>()
}
