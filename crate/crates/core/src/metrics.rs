//! Shape-estimation scores: normalized position error, intersection over
//! union and symmetric chamfer distance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{point_segment_distance, Point, ShapeVector};

/// Default number of raster cells across the smaller shape diameter.
pub const IOU_CELLS_PER_DIAMETER: f64 = 512.0;
/// Default contour sample count for the chamfer distance.
pub const CHAMFER_SAMPLES: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanScore {
    pub k: usize,
    pub npe: f64,
    pub iou: f64,
    pub chd: f64,
}

/// Position error normalized by the object's inner radius.
pub fn npe(g_true: &Point, g_est: &Point, rho_min: f64) -> f64 {
    (g_true - g_est).norm() / rho_min
}

/// Intersection over union of two polygon surfaces, rasterized row by row at
/// `cell` spacing. Within each row the covered x-intervals are computed
/// exactly.
pub fn iou(a: &ShapeVector, b: &ShapeVector, cell: f64) -> Result<f64> {
    if !(cell > 0.0) {
        return Err(Error::Parameter(format!("raster cell {cell} must be > 0")));
    }
    for s in [a, b] {
        if s.signed_area().abs() < crate::geometry::AREA_TOL {
            return Err(Error::DegenerateShape(s.signed_area()));
        }
    }
    let (lo, hi) = joint_y_range(a, b);
    let rows = ((hi - lo) / cell).ceil().max(1.0) as usize;
    let dy = (hi - lo) / rows as f64;
    let mut inter = 0.0;
    let mut union = 0.0;
    for r in 0..rows {
        let y = lo + (r as f64 + 0.5) * dy;
        let ia = row_intervals(a.vertices(), y);
        let ib = row_intervals(b.vertices(), y);
        let la = total_length(&ia);
        let lb = total_length(&ib);
        let li = overlap_length(&ia, &ib);
        inter += li;
        union += la + lb - li;
    }
    if union <= 0.0 {
        return Ok(0.0);
    }
    Ok((inter / union).clamp(0.0, 1.0))
}

/// IOU with the default cell size (smaller diameter / 512).
pub fn iou_default(a: &ShapeVector, b: &ShapeVector) -> Result<f64> {
    let cell = a.diameter().min(b.diameter()) / IOU_CELLS_PER_DIAMETER;
    iou(a, b, cell)
}

fn joint_y_range(a: &ShapeVector, b: &ShapeVector) -> (f64, f64) {
    let ys = a.vertices().iter().chain(b.vertices()).map(|p| p.y);
    let lo = ys.clone().fold(f64::INFINITY, f64::min);
    let hi = ys.fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Sorted disjoint x-intervals inside the polygon on the line `y` (even-odd).
fn row_intervals(v: &[Point], y: f64) -> Vec<(f64, f64)> {
    let n = v.len();
    let mut xs = Vec::new();
    for i in 0..n {
        let (p, q) = (v[i], v[(i + 1) % n]);
        if (p.y > y) != (q.y > y) {
            xs.push(p.x + (y - p.y) * (q.x - p.x) / (q.y - p.y));
        }
    }
    xs.sort_by(f64::total_cmp);
    xs.chunks_exact(2).map(|c| (c[0], c[1])).collect()
}

fn total_length(iv: &[(f64, f64)]) -> f64 {
    iv.iter().map(|(a, b)| b - a).sum()
}

fn overlap_length(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let (mut i, mut j, mut acc) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        let lo = a[i].0.max(b[j].0);
        let hi = a[i].1.min(b[j].1);
        if hi > lo {
            acc += hi - lo;
        }
        if a[i].1 < b[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    acc
}

/// `k` points equally spaced in arc length (cell midpoints) along the
/// contour.
pub fn contour_samples(shape: &ShapeVector, k: usize) -> Vec<Point> {
    let lengths: Vec<f64> = shape.edges().map(|(a, b)| (b - a).norm()).collect();
    let total: f64 = lengths.iter().sum();
    let mut out = Vec::with_capacity(k);
    let mut edges = shape.edges().zip(&lengths).peekable();
    let mut start = 0.0;
    for i in 0..k {
        let target = (i as f64 + 0.5) / k as f64 * total;
        while let Some(((_, _), &len)) = edges.peek() {
            if target <= start + len {
                break;
            }
            start += len;
            edges.next();
        }
        let p = match edges.peek() {
            Some(((a, b), &len)) => {
                let t = if len > 0.0 { ((target - start) / len).clamp(0.0, 1.0) } else { 0.0 };
                a + (b - a) * t
            }
            None => shape.vertex(0),
        };
        out.push(p);
    }
    out
}

fn mean_distance_to_contour(samples: &[Point], shape: &ShapeVector) -> f64 {
    let edges: Vec<(Point, Point)> = shape.edges().collect();
    let total: f64 = samples
        .iter()
        .map(|p| {
            edges
                .iter()
                .map(|(a, b)| point_segment_distance(p, a, b))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    total / samples.len() as f64
}

/// Symmetric chamfer distance: the average of the two one-sided mean
/// point-to-contour distances, each from `k` arc-length-uniform samples.
pub fn chamfer(a: &ShapeVector, b: &ShapeVector, k: usize) -> Result<f64> {
    if k < 16 {
        return Err(Error::Parameter(format!("chamfer needs at least 16 samples, got {k}")));
    }
    let ab = mean_distance_to_contour(&contour_samples(a, k), b);
    let ba = mean_distance_to_contour(&contour_samples(b, k), a);
    // sum in a fixed order so that swapping the arguments is exact
    let (lo, hi) = if ab <= ba { (ab, ba) } else { (ba, ab) };
    Ok((lo + hi) / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{decimate, dewhiten, Frame, Pose};

    fn square(cx: f64, cy: f64, side: f64) -> ShapeVector {
        let h = side / 2.0;
        ShapeVector::from_xy(
            &[[cx + h, cy + h], [cx - h, cy + h], [cx - h, cy - h], [cx + h, cy - h]],
            Frame::World,
        )
        .unwrap()
    }

    #[test]
    fn npe_examples() {
        assert_eq!(npe(&Point::new(1.0, 2.0), &Point::new(1.0, 2.0), 3.0), 0.0);
        assert!((npe(&Point::new(3.0, 4.0), &Point::zeros(), 5.0) - 1.0).abs() < 1e-15);
        let a = npe(&Point::new(0.3, 0.1), &Point::zeros(), 2.0);
        let b = npe(&Point::new(3.0, 1.0), &Point::zeros(), 20.0);
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn iou_examples() {
        let a = square(0.0, 0.0, 1.0);
        assert!((iou_default(&a, &a).unwrap() - 1.0).abs() < 0.01);
        assert_eq!(iou_default(&a, &square(5.0, 0.0, 1.0)).unwrap(), 0.0);
        let half = iou_default(&a, &square(0.5, 0.0, 1.0)).unwrap();
        assert!((half - 1.0 / 3.0).abs() < 0.01, "{half}");
    }

    #[test]
    fn iou_converges_on_nonconvex_pair() {
        let l = ShapeVector::from_xy(
            &[[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]],
            Frame::World,
        )
        .unwrap();
        let other = dewhiten(&l.clone().with_frame(Frame::Barycentric), &Pose::new(Point::new(0.3, 0.2), 0.4));
        let coarse = iou(&l, &other, 0.02).unwrap();
        let fine = iou(&l, &other, 0.01).unwrap();
        assert!((coarse - fine).abs() / fine < 0.005);
    }

    #[test]
    fn iou_rejects_degenerate() {
        let flat = ShapeVector::from_xy(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]], Frame::World).unwrap();
        assert!(iou_default(&flat, &square(0.0, 0.0, 1.0)).is_err());
    }

    #[test]
    fn chamfer_examples() {
        let a = square(0.0, 0.0, 2.0);
        assert!(chamfer(&a, &a, 1024).unwrap() < 1e-9);
        let b = square(0.0, 0.0, 2.4);
        let c = chamfer(&a, &b, 1024).unwrap();
        assert!((c - 0.2).abs() < 0.01, "{c}");
        let dense = chamfer(&a, &b, 100_000).unwrap();
        assert!((dense - c).abs() < 1e-3);
        assert_eq!(chamfer(&a, &b, 200).unwrap(), chamfer(&b, &a, 200).unwrap());
        assert!(chamfer(&a, &b, 8).is_err());
    }

    #[test]
    fn chamfer_is_rigid_invariant() {
        let a = square(0.0, 0.0, 2.0).with_frame(Frame::Barycentric);
        let b = ShapeVector::from_xy(&[[1.5, 0.0], [-1.0, 1.2], [-1.0, -1.2]], Frame::Barycentric).unwrap();
        let pose = Pose::new(Point::new(30.0, -4.0), 1.1);
        let c0 = chamfer(&a, &b, 512).unwrap();
        let c1 = chamfer(&dewhiten(&a, &pose), &dewhiten(&b, &pose), 512).unwrap();
        assert!((c0 - c1).abs() < 1e-9);
    }

    #[test]
    fn chamfer_against_decimation_is_bounded() {
        let n = 80;
        let v: Vec<Point> = (0..n)
            .map(|i| {
                let t = std::f64::consts::TAU * i as f64 / n as f64;
                Point::new(3.0 * t.cos(), 2.0 * t.sin())
            })
            .collect();
        let s = ShapeVector::new(v, Frame::World).unwrap();
        let tol = 0.1;
        let d = decimate(&s, tol).unwrap();
        assert!(chamfer(&s, &d, 1024).unwrap() <= tol);
    }

    #[test]
    fn arc_length_samples_are_uniform() {
        let s = contour_samples(&square(0.0, 0.0, 1.0), 8);
        assert_eq!(s.len(), 8);
        assert!((s[0] - Point::new(0.25, 0.5)).norm() < 1e-12);
        assert!((s[1] - Point::new(-0.25, 0.5)).norm() < 1e-12);
    }
}
