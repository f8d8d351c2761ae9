//! Polygonal contours (closed linear splines) and their integral properties.
//!
//! A [`ShapeVector`] is an ordered list of vertices describing a closed
//! polygonal chain. In the barycentric frame the shape is centred on its area
//! barycenter and its symmetry line coincides with the horizontal axis; the
//! world-frame version is obtained with [`dewhiten`].

use std::f64::consts::TAU;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = Vector2<f64>;

/// Relative collinearity tolerance (scaled by the shape diameter).
pub const COLLINEAR_REL_TOL: f64 = 1e-9;
/// Maximum barycenter offset accepted in the barycentric frame [m].
pub const BARYCENTER_TOL: f64 = 1e-6;
/// Smallest accepted |area| [m^2].
pub const AREA_TOL: f64 = 1e-12;
/// Relative tolerance of the vertex-wise reflection check.
pub const SYMMETRY_REL_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    Barycentric,
    World,
}

/// Ordered vertices of a closed polygonal chain.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeVector {
    vertices: Vec<Point>,
    frame: Frame,
}

impl ShapeVector {
    /// Wraps raw vertices. Only the vertex count and finiteness are checked;
    /// use [`validate`] for the full set of shape properties.
    pub fn new(vertices: Vec<Point>, frame: Frame) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidShape(format!(
                "a shape needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().any(|v| !v.x.is_finite() || !v.y.is_finite()) {
            return Err(Error::InvalidShape("non-finite vertex coordinate".into()));
        }
        Ok(Self { vertices, frame })
    }

    pub fn from_xy(xy: &[[f64; 2]], frame: Frame) -> Result<Self> {
        Self::new(xy.iter().map(|p| Point::new(p[0], p[1])).collect(), frame)
    }

    /// Like [`ShapeVector::new`], but clockwise input is reversed in place
    /// while keeping the first vertex first: `V1, Vn, ..., V2`.
    pub fn counter_clockwise(vertices: Vec<Point>, frame: Frame) -> Result<Self> {
        let mut shape = Self::new(vertices, frame)?;
        if signed_area(&shape.vertices) < 0.0 {
            shape.vertices[1..].reverse();
        }
        Ok(shape)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn into_vertices(self) -> Vec<Point> {
        self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    /// Vertex `i` with the wrapping convention `V_{n+i} = V_i`.
    pub fn vertex(&self, i: usize) -> Point {
        self.vertices[i % self.vertices.len()]
    }

    /// Edges `(V_i, V_{i+1})`, including the closing edge `(V_n, V_1)`.
    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Largest pairwise vertex distance.
    pub fn diameter(&self) -> f64 {
        let mut d2: f64 = 0.0;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                d2 = d2.max((a - b).norm_squared());
            }
        }
        d2.sqrt()
    }

    /// Largest vertex distance from the frame origin (the outer radius of a
    /// barycentric shape).
    pub fn outer_radius(&self) -> f64 {
        self.vertices.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Smallest distance from the frame origin to the contour.
    pub fn inner_radius(&self) -> f64 {
        let origin = Point::zeros();
        self.edges()
            .map(|(a, b)| point_segment_distance(&origin, &a, &b))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn signed_area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            vertices: self.vertices.iter().map(|v| v * factor).collect(),
            frame: self.frame,
        }
    }

    pub fn translated(&self, offset: Point) -> Self {
        Self {
            vertices: self.vertices.iter().map(|v| v + offset).collect(),
            frame: self.frame,
        }
    }

    /// Same vertices, different frame tag.
    pub fn with_frame(mut self, frame: Frame) -> Self {
        self.frame = frame;
        self
    }

    /// Point-in-polygon test (even-odd rule).
    pub fn contains(&self, p: &Point) -> bool {
        point_in_polygon(p, &self.vertices)
    }
}

/// Object position and heading.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub g: Point,
    /// Heading [rad] in `[0, 2π)`.
    pub h: f64,
}

impl Pose {
    pub fn new(g: Point, h: f64) -> Self {
        Self {
            g,
            h: wrap_angle(h),
        }
    }

    pub fn identity() -> Self {
        Self::new(Point::zeros(), 0.0)
    }

    /// Barycentric to world coordinates: `U(h) p + g`.
    pub fn to_world(&self, p: &Point) -> Point {
        rotation(self.h) * p + self.g
    }

    /// World to barycentric coordinates: `U(h)' (p - g)`.
    pub fn to_local(&self, p: &Point) -> Point {
        rotation(self.h).transpose() * (p - self.g)
    }
}

/// Counter-clockwise rotation matrix `U(h)`.
pub fn rotation(h: f64) -> Matrix2<f64> {
    let (s, c) = h.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// Reduces an angle to `[0, 2π)`.
pub fn wrap_angle(h: f64) -> f64 {
    let w = h.rem_euclid(TAU);
    // rem_euclid can round up to TAU itself for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Reduces an angle difference to `(-π, π]`.
pub fn wrap_residual(d: f64) -> f64 {
    let w = wrap_angle(d);
    if w > std::f64::consts::PI {
        w - TAU
    } else {
        w
    }
}

/// 2-D cross product `a × b`.
#[inline]
pub fn cross(a: &Point, b: &Point) -> f64 {
    a.x * b.y - a.y * b.x
}

pub fn signed_area(vertices: &[Point]) -> f64 {
    let n = vertices.len();
    (0..n)
        .map(|i| cross(&vertices[i], &vertices[(i + 1) % n]))
        .sum::<f64>()
        / 2.0
}

pub fn point_segment_distance(p: &Point, a: &Point, b: &Point) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Even-odd point-in-polygon test.
pub fn point_in_polygon(p: &Point, vertices: &[Point]) -> bool {
    let n = vertices.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (vertices[i], vertices[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn orientation(a: &Point, b: &Point, c: &Point) -> f64 {
    cross(&(b - a), &(c - a))
}

fn on_segment(p: &Point, a: &Point, b: &Point) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test (touching counts).
pub fn segments_intersect(a: &Point, b: &Point, c: &Point, d: &Point) -> bool {
    let d1 = orientation(c, d, a);
    let d2 = orientation(c, d, b);
    let d3 = orientation(a, b, c);
    let d4 = orientation(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(a, c, d))
        || (d2 == 0.0 && on_segment(b, c, d))
        || (d3 == 0.0 && on_segment(c, a, b))
        || (d4 == 0.0 && on_segment(d, a, b))
}

/// Evaluates the closed linear spline at `alpha`.
///
/// For `alpha` in `[(i-1)/n, i/n]` the point moves along the edge
/// `V_i -> V_{i+1}`; `alpha = 0` and `alpha = 1` both return `V_1`.
pub fn interpolate(alpha: f64, shape: &ShapeVector) -> Result<Point> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain(alpha));
    }
    let n = shape.len();
    let s = alpha * n as f64;
    let r = s.round();
    // snap knots so that alpha = (i-1)/n returns V_i bit-exactly
    if (s - r).abs() <= 4.0 * f64::EPSILON * n as f64 {
        return Ok(shape.vertex(r as usize));
    }
    let i = (s.floor() as usize).min(n - 1);
    let t = s - i as f64;
    Ok(shape.vertex(i) * (1.0 - t) + shape.vertex(i + 1) * t)
}

/// Area barycenter and signed area via the shoelace formula.
pub fn barycenter_area(shape: &ShapeVector) -> Result<(Point, f64)> {
    let mut area = 0.0;
    let mut moment = Point::zeros();
    for (a, b) in shape.edges() {
        let ai = cross(&a, &b) / 2.0;
        area += ai;
        moment += (a + b) * (ai / 3.0);
    }
    if area.abs() < AREA_TOL {
        return Err(Error::DegenerateShape(area));
    }
    Ok((moment / area, area))
}

pub fn contour_length(shape: &ShapeVector) -> f64 {
    shape.edges().map(|(a, b)| (b - a).norm()).sum()
}

/// Index `i` such that `cumulative[i-1] < u <= cumulative[i]`.
pub(crate) fn inverse_transform(cumulative: &[f64], u: f64) -> usize {
    cumulative
        .partition_point(|&c| c < u)
        .min(cumulative.len() - 1)
}

fn normalized_weights(measures: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let total: f64 = measures.iter().sum();
    let weights: Vec<f64> = measures.iter().map(|m| m / total).collect();
    let mut acc = 0.0;
    let mut cumulative: Vec<f64> = weights
        .iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect();
    if let Some(last) = cumulative.last_mut() {
        *last = 1.0;
    }
    (weights, cumulative)
}

/// Contour split into its edges, weighted by length.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgePartition {
    pub edges: Vec<(Point, Point)>,
    pub lengths: Vec<f64>,
    pub weights: Vec<f64>,
    pub cumulative: Vec<f64>,
}

impl EdgePartition {
    /// Builds a partition from an explicit list of segments (not necessarily
    /// closed).
    pub fn from_edges(edges: Vec<(Point, Point)>) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::InvalidShape("edge partition needs at least one edge".into()));
        }
        let lengths: Vec<f64> = edges.iter().map(|(a, b)| (b - a).norm()).collect();
        if let Some(i) = lengths.iter().position(|&l| !(l > 0.0)) {
            return Err(Error::InvalidShape(format!("edge {} has zero length", i + 1)));
        }
        let (weights, cumulative) = normalized_weights(&lengths);
        Ok(Self {
            edges,
            lengths,
            weights,
            cumulative,
        })
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn total_length(&self) -> f64 {
        self.lengths.iter().sum()
    }

    /// Edge selected by inverse-transform sampling of `u ∈ (0, 1]`.
    pub fn select(&self, u: f64) -> usize {
        inverse_transform(&self.cumulative, u)
    }
}

pub fn edge_partition(shape: &ShapeVector) -> Result<EdgePartition> {
    EdgePartition::from_edges(shape.edges().collect())
}

/// Ear-clipping triangulation of a simple polygon.
#[derive(Clone, Debug, PartialEq)]
pub struct Triangulation {
    pub triangles: Vec<[Point; 3]>,
    /// Vertex indices into the source shape.
    pub indices: Vec<[usize; 3]>,
    pub areas: Vec<f64>,
    pub weights: Vec<f64>,
    pub cumulative: Vec<f64>,
}

impl Triangulation {
    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Triangle selected by inverse-transform sampling of `u ∈ (0, 1]`.
    pub fn select(&self, u: f64) -> usize {
        inverse_transform(&self.cumulative, u)
    }
}

fn triangle_area(t: &[Point; 3]) -> f64 {
    (orientation(&t[0], &t[1], &t[2]) / 2.0).abs()
}

fn point_in_triangle(p: &Point, a: &Point, b: &Point, c: &Point, inclusive: bool) -> bool {
    let d1 = orientation(a, b, p);
    let d2 = orientation(b, c, p);
    let d3 = orientation(c, a, p);
    if inclusive {
        d1 >= 0.0 && d2 >= 0.0 && d3 >= 0.0
    } else {
        d1 > 0.0 && d2 > 0.0 && d3 > 0.0
    }
}

/// Triangulates a simple polygon by ear clipping (`O(n^3)` worst case).
///
/// Produces exactly `n - 2` counter-clockwise triangles whose vertices are
/// shape vertices.
pub fn triangulate(shape: &ShapeVector) -> Result<Triangulation> {
    let crossings = count_crossings(shape);
    if crossings > 0 {
        return Err(Error::InvalidShape(format!(
            "self-intersecting contour ({crossings} crossing edge pairs)"
        )));
    }
    let pts = shape.vertices();
    let mut ring: Vec<usize> = (0..pts.len()).collect();
    if signed_area(pts) < 0.0 {
        ring.reverse();
    }
    let mut indices = Vec::with_capacity(pts.len() - 2);
    while ring.len() > 3 {
        let ear = find_ear(pts, &ring, true)
            .or_else(|| find_ear(pts, &ring, false))
            .ok_or_else(|| Error::InvalidShape("ear clipping found no ear".into()))?;
        let m = ring.len();
        indices.push([ring[(ear + m - 1) % m], ring[ear], ring[(ear + 1) % m]]);
        ring.remove(ear);
    }
    indices.push([ring[0], ring[1], ring[2]]);

    let triangles: Vec<[Point; 3]> = indices
        .iter()
        .map(|t| [pts[t[0]], pts[t[1]], pts[t[2]]])
        .collect();
    let areas: Vec<f64> = triangles.iter().map(triangle_area).collect();
    let (weights, cumulative) = normalized_weights(&areas);
    Ok(Triangulation {
        triangles,
        indices,
        areas,
        weights,
        cumulative,
    })
}

fn find_ear(pts: &[Point], ring: &[usize], inclusive: bool) -> Option<usize> {
    let m = ring.len();
    (0..m).find(|&k| {
        let a = &pts[ring[(k + m - 1) % m]];
        let b = &pts[ring[k]];
        let c = &pts[ring[(k + 1) % m]];
        if orientation(a, b, c) <= 0.0 {
            return false;
        }
        !ring.iter().enumerate().any(|(j, &idx)| {
            j != k
                && j != (k + m - 1) % m
                && j != (k + 1) % m
                && point_in_triangle(&pts[idx], a, b, c, inclusive)
        })
    })
}

fn count_crossings(shape: &ShapeVector) -> usize {
    let n = shape.len();
    let v = shape.vertices();
    let mut count = 0;
    for i in 0..n {
        for j in i + 1..n {
            // adjacent edges share a vertex by construction
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_intersect(&v[i], &v[(i + 1) % n], &v[j], &v[(j + 1) % n]) {
                count += 1;
            }
        }
    }
    count
}

/// Outcome of one validity check. `defect` is the measured quantity the
/// check thresholds (see [`ValidityReport`]).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Check {
    pub passed: bool,
    pub defect: f64,
}

impl Check {
    fn new(passed: bool, defect: f64) -> Self {
        Self { passed, defect }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidityReport {
    /// Smallest pairwise vertex distance [m].
    pub distinct: Check,
    /// Smallest distance of a vertex from the chord joining its neighbours [m].
    pub non_collinear: Check,
    /// Number of crossing or touching non-adjacent edge pairs.
    pub simple: Check,
    /// Signed shoelace area [m^2]; passes when positive.
    pub counter_clockwise: Check,
    /// Distance of the barycenter from the origin [m] (barycentric frame only).
    pub barycenter: Option<Check>,
    /// Vertex-wise reflection mismatch [m] (barycentric frame only).
    pub symmetry: Option<Check>,
}

impl ValidityReport {
    /// Whether every mandatory property holds. Symmetry is reported but not
    /// required.
    pub fn is_valid(&self) -> bool {
        self.failures().is_empty()
    }

    pub fn failures(&self) -> Vec<(&'static str, f64)> {
        let mut out = Vec::new();
        let checks = [
            ("distinct vertices", Some(self.distinct)),
            ("non-collinear vertices", Some(self.non_collinear)),
            ("non-self-intersecting", Some(self.simple)),
            ("counter-clockwise", Some(self.counter_clockwise)),
            ("barycenter at origin", self.barycenter),
        ];
        for (name, check) in checks {
            if let Some(c) = check {
                if !c.passed {
                    out.push((name, c.defect));
                }
            }
        }
        out
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetry.is_none_or(|c| c.passed)
    }
}

/// Checks every shape-vector property and reports the measured defects.
pub fn validate(shape: &ShapeVector) -> ValidityReport {
    let v = shape.vertices();
    let n = v.len();
    let diameter = shape.diameter();
    let eps_col = COLLINEAR_REL_TOL * diameter.max(f64::MIN_POSITIVE);

    let mut min_dist = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            min_dist = min_dist.min((v[i] - v[j]).norm());
        }
    }
    let min_dev = (0..n)
        .map(|i| {
            let (a, b, c) = (v[i], v[(i + 1) % n], v[(i + 2) % n]);
            let chord = (c - a).norm();
            if chord == 0.0 {
                (b - a).norm()
            } else {
                orientation(&a, &c, &b).abs() / chord
            }
        })
        .fold(f64::INFINITY, f64::min);
    let crossings = count_crossings(shape) as f64;
    let area = signed_area(v);

    let (barycenter, symmetry) = match shape.frame() {
        Frame::World => (None, None),
        Frame::Barycentric => {
            let offset = barycenter_area(shape)
                .map(|(g, _)| g.norm())
                .unwrap_or(f64::INFINITY);
            let mismatch = reflection_mismatch(shape).0;
            (
                Some(Check::new(offset <= BARYCENTER_TOL, offset)),
                Some(Check::new(
                    mismatch <= SYMMETRY_REL_TOL * diameter,
                    mismatch,
                )),
            )
        }
    };

    ValidityReport {
        distinct: Check::new(min_dist > eps_col, min_dist),
        non_collinear: Check::new(min_dev > eps_col, min_dev),
        simple: Check::new(crossings == 0.0, crossings),
        counter_clockwise: Check::new(area > 0.0, area),
        barycenter,
        symmetry,
    }
}

/// Smallest vertex-wise mismatch between the shape and its reflection across
/// the horizontal axis, over all index reversals `j -> (k - j) mod n`.
/// Returns the mismatch and the best `k`.
pub fn reflection_mismatch(shape: &ShapeVector) -> (f64, usize) {
    let v = shape.vertices();
    let n = v.len();
    (0..n)
        .map(|k| {
            let worst = (0..n)
                .map(|j| {
                    let m = v[(k + n - j) % n];
                    (v[j] - Point::new(m.x, -m.y)).norm()
                })
                .fold(0.0, f64::max);
            (worst, k)
        })
        .fold((f64::INFINITY, 0), |best, cur| {
            if cur.0 < best.0 {
                cur
            } else {
                best
            }
        })
}

/// Places a barycentric shape at `pose`: `V_i <- U(h) V_i + g`.
pub fn dewhiten(shape: &ShapeVector, pose: &Pose) -> ShapeVector {
    let u = rotation(pose.h);
    ShapeVector {
        vertices: shape.vertices().iter().map(|v| u * v + pose.g).collect(),
        frame: Frame::World,
    }
}

/// Inverse of [`dewhiten`]: `V_i <- U(h)' (V_i - g)`.
pub fn whiten(shape: &ShapeVector, pose: &Pose) -> ShapeVector {
    let ut = rotation(pose.h).transpose();
    ShapeVector {
        vertices: shape
            .vertices()
            .iter()
            .map(|v| ut * (v - pose.g))
            .collect(),
        frame: Frame::Barycentric,
    }
}

/// Ramer-Douglas-Peucker keep-mask for an open chain; endpoints are kept.
fn rdp_mask(chain: &[Point], tol: f64) -> Vec<bool> {
    let mut keep = vec![false; chain.len()];
    if chain.is_empty() {
        return keep;
    }
    keep[0] = true;
    keep[chain.len() - 1] = true;
    let mut stack = vec![(0usize, chain.len() - 1)];
    while let Some((first, last)) = stack.pop() {
        if last <= first + 1 {
            continue;
        }
        let (mut far, mut far_d) = (first, -1.0);
        for (i, p) in chain.iter().enumerate().take(last).skip(first + 1) {
            let d = point_segment_distance(p, &chain[first], &chain[last]);
            if d > far_d {
                far = i;
                far_d = d;
            }
        }
        if far_d > tol {
            keep[far] = true;
            stack.push((first, far));
            stack.push((far, last));
        }
    }
    keep
}

/// Simplifies the closed contour with the Ramer-Douglas-Peucker method.
///
/// Removed vertices lie within `tol` of the simplified contour. Barycentric
/// shapes that are reflection-symmetric are decimated one half at a time so
/// the mirror pairs stay matched.
pub fn decimate(shape: &ShapeVector, tol: f64) -> Result<ShapeVector> {
    if !(tol >= 0.0) {
        return Err(Error::Parameter(format!("decimation tolerance {tol} < 0")));
    }
    let v = shape.vertices();
    let n = v.len();
    let symmetric = shape.frame() == Frame::Barycentric && {
        let (mismatch, _) = reflection_mismatch(shape);
        mismatch <= SYMMETRY_REL_TOL * shape.diameter()
    };

    let keep = if symmetric {
        symmetric_keep_mask(shape, tol)
    } else {
        // split at the vertex farthest from V_1 and simplify both halves
        let split = (1..n)
            .max_by(|&a, &b| {
                (v[a] - v[0])
                    .norm_squared()
                    .total_cmp(&(v[b] - v[0]).norm_squared())
                    .then(b.cmp(&a))
            })
            .unwrap_or(1);
        let mut keep = vec![false; n];
        let forward: Vec<usize> = (0..=split).collect();
        let backward: Vec<usize> = std::iter::once(0).chain((split..n).rev()).collect();
        for chain in [forward, backward] {
            let pts: Vec<Point> = chain.iter().map(|&i| v[i]).collect();
            for (i, k) in chain.iter().zip(rdp_mask(&pts, tol)) {
                keep[*i] |= k;
            }
        }
        keep
    };

    let kept: Vec<Point> = v
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(p, _)| *p)
        .collect();
    if kept.len() < 3 {
        return Err(Error::DecimationFailed(format!(
            "only {} vertices survive at tolerance {tol}",
            kept.len()
        )));
    }
    let out = ShapeVector::new(kept, shape.frame())?;
    let report = validate(&out);
    if !report.simple.passed {
        return Err(Error::DecimationFailed(
            "simplified contour intersects itself".into(),
        ));
    }
    if symmetric && !report.is_symmetric() {
        return Err(Error::DecimationFailed(
            "simplified contour lost its reflection symmetry".into(),
        ));
    }
    Ok(out)
}

fn symmetric_keep_mask(shape: &ShapeVector, tol: f64) -> Vec<bool> {
    let v = shape.vertices();
    let n = v.len();
    let (_, k) = reflection_mismatch(shape);
    let mirror = |j: usize| (k + n - j) % n;
    // start the half chain on the symmetry axis: at a self-mirrored vertex
    // when one exists, otherwise just after an axis-crossing edge
    let start = (0..n).find(|&j| mirror(j) == j);
    let (first, len) = match start {
        Some(s) => (s, n / 2 + 1),
        None => {
            let s = (0..n).find(|&j| mirror(j) == (j + 1) % n).unwrap_or(0);
            ((s + 1) % n, n / 2)
        }
    };
    let half: Vec<usize> = (0..len).map(|t| (first + t) % n).collect();
    let pts: Vec<Point> = half.iter().map(|&i| v[i]).collect();
    let mut keep = vec![false; n];
    for (&i, k) in half.iter().zip(rdp_mask(&pts, tol)) {
        if k {
            keep[i] = true;
            keep[mirror(i)] = true;
        }
    }
    // the chain ends sit on the axis and RDP always keeps them; drop an end
    // (with its mirror) when the segment joining its inner neighbour to that
    // neighbour's mirror stays within tol of everything it replaces
    for (end, inward, dir) in [(half[0], &half[1..], n - 1), (half[len - 1], &half[..len - 1], 1)] {
        let inner: Vec<usize> = if dir == 1 {
            inward.iter().rev().copied().collect()
        } else {
            inward.to_vec()
        };
        let Some(&p) = inner.iter().find(|&&i| keep[i]) else {
            continue;
        };
        let q = mirror(p);
        let removed = if mirror(end) == end { 1 } else { 2 };
        if p == q || keep.iter().filter(|&&k| k).count() < 3 + removed {
            continue;
        }
        let mut j = (p + dir) % n;
        let mut covered = true;
        while j != q {
            if point_segment_distance(&v[j], &v[p], &v[q]) > tol {
                covered = false;
                break;
            }
            j = (j + dir) % n;
        }
        if covered {
            keep[end] = false;
            keep[mirror(end)] = false;
        }
    }
    keep
}
