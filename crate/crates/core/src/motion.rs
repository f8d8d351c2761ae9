//! 2:1 kinematic model (speed rate and turn rate) with a Tustin position
//! update.
//!
//! State layout: `[g_x, g_y, h, s, ṡ, ω]`. Process noise has the same layout
//! and enters both additively and through the heading and speed used by the
//! Tustin term.

use nalgebra::{Matrix6, Vector2, Vector6};
use serde::{Deserialize, Serialize};

use crate::geometry::{wrap_angle, Point, Pose};

pub const IX: usize = 0;
pub const IY: usize = 1;
pub const IH: usize = 2;
pub const IS: usize = 3;
pub const ISD: usize = 4;
pub const IW: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KinematicState {
    /// Position [m].
    pub g: Point,
    /// Heading [rad].
    pub h: f64,
    /// Speed [m/s].
    pub s: f64,
    /// Speed rate [m/s^2].
    pub s_dot: f64,
    /// Turn rate [rad/s].
    pub omega: f64,
}

impl KinematicState {
    pub fn new(g: Point, h: f64, s: f64, s_dot: f64, omega: f64) -> Self {
        Self { g, h, s, s_dot, omega }
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self::new(Point::new(v[IX], v[IY]), v[IH], v[IS], v[ISD], v[IW])
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(self.g.x, self.g.y, self.h, self.s, self.s_dot, self.omega)
    }

    pub fn pose(&self) -> Pose {
        Pose::new(self.g, self.h)
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|v| v.is_finite())
    }
}

fn heading(h: f64) -> Vector2<f64> {
    Vector2::new(h.cos(), h.sin())
}

fn heading_prime(h: f64) -> Vector2<f64> {
    Vector2::new(-h.sin(), h.cos())
}

/// Raw propagation on the state vector (no angle wrapping).
pub fn step_vector(x: &Vector6<f64>, w: &Vector6<f64>, t: f64) -> Vector6<f64> {
    let (h, s) = (x[IH], x[IS]);
    let h_next = h + t * x[IW] + w[IH];
    let s_next = s + t * x[ISD] + w[IS];
    let f = (heading(h_next) * s_next + heading(h) * s) * 0.5;
    let drift = Vector6::new(f.x, f.y, x[IW], x[ISD], 0.0, 0.0);
    x + drift * t + w
}

/// One step of the motion model: `x + T F(x, w) + w`. The heading of the
/// result is reduced to `[0, 2π)`.
pub fn step(x: &KinematicState, w: &Vector6<f64>, t: f64) -> KinematicState {
    let mut next = KinematicState::from_vector(&step_vector(&x.to_vector(), w, t));
    next.h = wrap_angle(next.h);
    next
}

/// Analytic Jacobians of [`step`] at `w = 0` with respect to the state and
/// to the process noise.
pub fn jacobians(x: &KinematicState, t: f64) -> (Matrix6<f64>, Matrix6<f64>) {
    let h_next = x.h + t * x.omega;
    let s_next = x.s + t * x.s_dot;
    let u0 = heading(x.h);
    let u1 = heading(h_next);
    let du0 = heading_prime(x.h);
    let du1 = heading_prime(h_next);

    // partials of the Tustin term f
    let df_dh = (du1 * s_next + du0 * x.s) * 0.5;
    let df_ds = (u1 + u0) * 0.5;
    let df_dsd = u1 * (0.5 * t);
    let df_dw = du1 * (0.5 * s_next * t);
    let df_dnh = du1 * (0.5 * s_next);
    let df_dns = u1 * 0.5;

    let mut jx = Matrix6::identity();
    for r in 0..2 {
        jx[(r, IH)] += t * df_dh[r];
        jx[(r, IS)] += t * df_ds[r];
        jx[(r, ISD)] += t * df_dsd[r];
        jx[(r, IW)] += t * df_dw[r];
    }
    jx[(IH, IW)] += t;
    jx[(IS, ISD)] += t;

    let mut jw = Matrix6::identity();
    for r in 0..2 {
        jw[(r, IH)] += t * df_dnh[r];
        jw[(r, IS)] += t * df_dns[r];
    }
    (jx, jw)
}

/// Piece of a ground-truth schedule: constant speed rate and turn rate for
/// `duration` seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub duration: f64,
    pub s_dot: f64,
    pub omega: f64,
}

/// Noise-free trajectory sampled every `t` seconds for `scans` steps after
/// the initial state. The `(ṡ, ω)` of the segment active at each step
/// start overrides the state's own; the last segment persists.
pub fn simulate_trajectory(
    initial: &KinematicState,
    segments: &[Segment],
    t: f64,
    scans: usize,
) -> Vec<KinematicState> {
    let zero = Vector6::zeros();
    let mut out = Vec::with_capacity(scans + 1);
    let mut x = *initial;
    out.push(x);
    for k in 0..scans {
        let now = k as f64 * t;
        let mut elapsed = 0.0;
        for seg in segments {
            if now < elapsed + seg.duration - 1e-9 * t {
                x.s_dot = seg.s_dot;
                x.omega = seg.omega;
                break;
            }
            elapsed += seg.duration;
            x.s_dot = seg.s_dot;
            x.omega = seg.omega;
        }
        x = step(&x, &zero, t);
        out.push(x);
    }
    out
}
