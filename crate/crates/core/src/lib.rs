//! Extended-object tracking and shape classification with linear splines.
//!
//! Objects are modelled as closed polygonal contours. Sensor scans scatter
//! points uniformly on the contour or on the enclosed surface and add
//! Gaussian noise. The crate provides exact (contour) and Monte Carlo
//! (surface) dataset likelihoods, an extended Kalman tracker on a 2:1
//! kinematic model, and a recursive Bayesian classifier over a dictionary of
//! candidate shapes.

pub mod error;
pub mod geometry;
pub mod likelihood;
pub mod metrics;
pub mod motion;
pub mod scattering;
pub mod shaper;
pub mod tracker;

pub use error::{Error, Result};
pub use geometry::{Frame, Point, Pose, ShapeVector};
