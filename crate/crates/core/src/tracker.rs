//! Extended Kalman tracker driven by a virtual pose measurement.
//!
//! Each scan is summarized by its mean measurement (position) and by the
//! direction of displacement from the previous position estimate (heading).
//! The pair is fused with the EKF prediction of the kinematic state.

use nalgebra::{Matrix3, Matrix3x6, Matrix6, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, wrap_residual, Point};
use crate::motion::{jacobians, step, KinematicState, IH};
use crate::scattering::Dataset;

/// Displacement below which the heading is unobservable [m].
pub const HEADING_EPS: f64 = 1e-3;

/// Pose summary of one scan.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StaticEstimate {
    Pose { g: Point, h: f64 },
    /// The mean measurement barely moved; only the position is usable.
    HeadingUnobservable { g: Point },
    /// No measurements.
    Empty,
}

/// Mean measurement and direction of travel from `g_prev`.
pub fn static_estimates(y: &Dataset, g_prev: &Point) -> StaticEstimate {
    let Some(g) = y.mean() else {
        return StaticEstimate::Empty;
    };
    let d = g - g_prev;
    if d.norm() <= HEADING_EPS {
        return StaticEstimate::HeadingUnobservable { g };
    }
    StaticEstimate::Pose {
        g,
        h: wrap_angle(d.y.atan2(d.x)),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackerState {
    pub x: KinematicState,
    pub p: Matrix6<f64>,
    pub q: Matrix6<f64>,
    pub e: Matrix3<f64>,
}

fn symmetrize(p: &Matrix6<f64>) -> Matrix6<f64> {
    (p + p.transpose()) * 0.5
}

fn pose_selector() -> Matrix3x6<f64> {
    let mut c = Matrix3x6::zeros();
    c[(0, 0)] = 1.0;
    c[(1, 1)] = 1.0;
    c[(2, 2)] = 1.0;
    c
}

impl TrackerState {
    pub fn new(x: KinematicState, p: Matrix6<f64>, q: Matrix6<f64>, e: Matrix3<f64>) -> Self {
        Self { x, p, q, e }
    }

    /// EKF prediction over `t` seconds.
    pub fn predict(&self, t: f64) -> Self {
        let (jx, jw) = jacobians(&self.x, t);
        let p = jx * self.p * jx.transpose() + jw * self.q * jw.transpose();
        Self {
            x: step(&self.x, &nalgebra::Vector6::zeros(), t),
            p: symmetrize(&p),
            q: self.q,
            e: self.e,
        }
    }

    /// Kalman correction with the virtual measurement `(g, h)`. The heading
    /// residual is wrapped to `(-π, π]`.
    pub fn correct(&self, yv: &Vector3<f64>) -> Result<Self> {
        let c = pose_selector();
        let s = c * self.p * c.transpose() + self.e;
        let s_inv = s
            .try_inverse()
            .ok_or_else(|| Error::Numerical("singular innovation covariance".into()))?;
        let gain = self.p * c.transpose() * s_inv;
        let xv = self.x.to_vector();
        let mut innovation = yv - c * xv;
        innovation[IH] = wrap_residual(innovation[IH]);
        let mut x = KinematicState::from_vector(&(xv + gain * innovation));
        x.h = wrap_angle(x.h);
        let p = (Matrix6::identity() - gain * c) * self.p;
        if !x.is_finite() {
            return Err(Error::Numerical("non-finite state after correction".into()));
        }
        Ok(Self {
            x,
            p: symmetrize(&p),
            q: self.q,
            e: self.e,
        })
    }

    /// Corrects with the static estimates of `y`, using `g_prev` as the
    /// heading anchor. Empty scans leave the state unchanged; when the
    /// heading is unobservable the current heading estimate is reused.
    pub fn update(&self, y: &Dataset, g_prev: &Point) -> Result<Self> {
        match static_estimates(y, g_prev) {
            StaticEstimate::Empty => Ok(self.clone()),
            StaticEstimate::HeadingUnobservable { g } => self.correct(&Vector3::new(g.x, g.y, self.x.h)),
            StaticEstimate::Pose { g, h } => self.correct(&Vector3::new(g.x, g.y, h)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;

    fn state(x: KinematicState) -> TrackerState {
        TrackerState::new(x, Matrix6::identity(), Matrix6::identity() * 0.01, Matrix3::identity())
    }

    #[test]
    fn static_estimate_examples() {
        let y = Dataset::new(vec![Point::new(1.0, 0.0), Point::new(3.0, 0.0)], 0);
        assert_eq!(
            static_estimates(&y, &Point::zeros()),
            StaticEstimate::Pose { g: Point::new(2.0, 0.0), h: 0.0 }
        );
        let y = Dataset::new(vec![Point::new(0.0, 2.0)], 0);
        match static_estimates(&y, &Point::zeros()) {
            StaticEstimate::Pose { h, .. } => assert!((h - std::f64::consts::FRAC_PI_2).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
        assert_eq!(static_estimates(&Dataset::default(), &Point::zeros()), StaticEstimate::Empty);
        let y = Dataset::new(vec![Point::new(1e-4, 0.0)], 0);
        assert!(matches!(static_estimates(&y, &Point::zeros()), StaticEstimate::HeadingUnobservable { .. }));
    }

    #[test]
    fn stationary_predict_without_noise() {
        let mut t = state(KinematicState::new(Point::new(1.0, 2.0), 0.5, 0.0, 0.0, 0.0));
        t.q = Matrix6::zeros();
        t.p = Matrix6::from_diagonal(&nalgebra::Vector6::new(1.0, 2.0, 3.0, 4.0, 5.0, 6.0));
        let p = t.predict(0.1);
        assert_eq!(p.x, t.x);
        let (jx, _) = jacobians(&t.x, 0.1);
        assert!((p.p - jx * t.p * jx.transpose()).norm() < 1e-12);
    }

    #[test]
    fn predict_moves_and_grows() {
        let t = state(KinematicState::new(Point::zeros(), 0.0, 100.0, 0.0, 0.0));
        let p = t.predict(0.1);
        assert!((p.x.g - Point::new(10.0, 0.0)).norm() < 1e-12);
        let (jx, _) = jacobians(&t.x, 0.1);
        assert!(p.p.trace() >= (jx * t.p * jx.transpose()).trace());
    }

    #[test]
    fn huge_e_keeps_prediction() {
        let mut t = state(KinematicState::new(Point::new(1.0, 1.0), 1.0, 3.0, 0.0, 0.0));
        t.e = Matrix3::identity() * 1e12;
        let c = t.correct(&Vector3::new(5.0, 5.0, 2.0)).unwrap();
        assert!((c.x.to_vector() - t.x.to_vector()).norm() < 1e-9);
    }

    #[test]
    fn equal_covariances_fuse_to_midpoint() {
        let t = state(KinematicState::new(Point::new(0.0, 0.0), 1.0, 3.0, 0.0, 0.0));
        let c = t.correct(&Vector3::new(2.0, -4.0, 1.4)).unwrap();
        assert!((c.x.g - Point::new(1.0, -2.0)).norm() < 1e-12);
        assert!((c.x.h - 1.2).abs() < 1e-12);
    }

    #[test]
    fn heading_residual_wraps() {
        for i in 0..50 {
            for j in 0..50 {
                let hp = i as f64 * 0.1257;
                let hm = j as f64 * 0.1257;
                let t = state(KinematicState::new(Point::zeros(), hp, 1.0, 0.0, 0.0));
                let c = t.correct(&Vector3::new(0.0, 0.0, hm)).unwrap();
                // equal weights: halfway along the short arc
                let expected = wrap_angle(hp + wrap_residual(hm - hp) / 2.0);
                let d = wrap_residual(c.x.h - expected).abs();
                assert!(d < 1e-9, "{hp} {hm} {} {expected}", c.x.h);
            }
        }
        let t = state(KinematicState::new(Point::zeros(), std::f64::consts::TAU - 0.1, 1.0, 0.0, 0.0));
        let c = t.correct(&Vector3::new(0.0, 0.0, 0.1)).unwrap();
        assert!(wrap_residual(c.x.h).abs() < 1e-12);
    }

    #[test]
    fn correction_shrinks_pose_covariance() {
        let mut t = state(KinematicState::new(Point::zeros(), 0.0, 10.0, 0.0, 0.1));
        t = t.predict(0.1).predict(0.1);
        let c = t.correct(&Vector3::new(0.5, 0.1, 0.0)).unwrap();
        let sel = pose_selector();
        let diff = sel * t.p * sel.transpose() - sel * c.p * sel.transpose();
        let eig = SymmetricEigen::new(diff);
        assert!(eig.eigenvalues.iter().all(|&l| l >= -1e-10));
    }

    #[test]
    fn exact_measurement_with_tiny_e() {
        let mut t = state(KinematicState::new(Point::new(3.0, 3.0), 0.2, 10.0, 0.0, 0.0));
        t.e = Matrix3::identity() * 1e-14;
        let c = t.correct(&Vector3::new(4.0, 2.0, 0.6)).unwrap();
        assert!((c.x.g - Point::new(4.0, 2.0)).norm() < 1e-6);
        assert!((c.x.h - 0.6).abs() < 1e-6);
    }

    #[test]
    fn empty_scan_keeps_state() {
        let t = state(KinematicState::new(Point::zeros(), 0.0, 1.0, 0.0, 0.0));
        assert_eq!(t.update(&Dataset::default(), &Point::zeros()).unwrap(), t);
    }
}
