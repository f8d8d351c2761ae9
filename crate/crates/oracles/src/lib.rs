//! Brute-force reference computations for testing.
//!
//! Nothing here depends on the library under test: polygons are plain vertex
//! lists and every quantity is computed from its defining integral or by
//! direct enumeration.

use nalgebra::{Matrix2, Matrix6, Vector2, Vector6};
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

pub type P = Vector2<f64>;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One Gauss-Kronrod 7/15 panel: (Kronrod estimate, |Kronrod - Gauss|).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Globally adaptive Gauss-Kronrod quadrature of `f` over `[a, b]`: the
/// panel with the largest error estimate is bisected until the summed
/// estimate drops below `rel_tol` times the integral.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    let mut panels: Vec<(f64, f64, f64, f64)> = Vec::new();
    let (v, e) = gk15(&f, a, b);
    panels.push((a, b, v, e));
    for _ in 0..10_000 {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if err <= rel_tol.max(50.0 * f64::EPSILON) * total.abs() || err < f64::MIN_POSITIVE {
            break;
        }
        let (idx, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = panels.swap_remove(idx);
        let m = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, m);
        let (v2, e2) = gk15(&f, m, hi);
        panels.push((lo, m, v1, e1));
        panels.push((m, hi, v2, e2));
    }
    let mut values: Vec<f64> = panels.iter().map(|p| p.2).collect();
    values.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
    values.iter().sum()
}

fn quad_form(r_inv: &Matrix2<f64>, d: &P) -> f64 {
    d.dot(&(r_inv * d))
}

/// `log ∫_0^1 N(y; v0 + α(v1 - v0), R) dα` by adaptive quadrature, with the
/// exponent shifted by its minimum over the segment.
pub fn edge_loglik(y: &P, v0: &P, v1: &P, r: &Matrix2<f64>) -> f64 {
    let r_inv = r.try_inverse().expect("invertible covariance");
    let d = v1 - v0;
    let expo = |alpha: f64| -0.5 * quad_form(&r_inv, &(y - v0 - d * alpha));
    // exponent maximum over [0, 1]
    let a = quad_form(&r_inv, &d);
    let star = if a > 0.0 {
        ((y - v0).dot(&(r_inv * d)) / a).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let top = expo(star);
    // exponent relative to its value at the peak, expanded around the peak
    // to avoid subtracting two large numbers
    let r0 = y - v0 - d * star;
    let lin = r0.dot(&(r_inv * d));
    let f = |alpha: f64| {
        let delta = alpha - star;
        (lin * delta - 0.5 * a * delta * delta).exp()
    };
    // break the interval at multiples of the kernel width around the peak so
    // that no panel hides it
    let slope = (y - v0 - d * star).dot(&(r_inv * d)).abs();
    let width = if a > 0.0 { (1.0 / a.sqrt()).min(1.0 / slope) } else { 1.0 };
    let mut cuts = vec![0.0, 1.0, star];
    for k in 0..60 {
        let off = width * 2f64.powi(k - 2);
        cuts.push(star - off);
        cuts.push(star + off);
    }
    let mut cuts: Vec<f64> = cuts.into_iter().filter(|c| (0.0..=1.0).contains(c)).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut value = 0.0;
    for w in cuts.windows(2) {
        value += integrate(f, w[0], w[1], 1e-12);
    }
    top + value.ln() - (2.0 * std::f64::consts::PI).ln() - 0.5 * r.determinant().ln()
}

/// Contour log-likelihood by summing per-edge quadratures with length
/// weights.
pub fn contour_loglik(y: &P, vertices: &[P], r: &Matrix2<f64>) -> f64 {
    let n = vertices.len();
    let lengths: Vec<f64> = (0..n).map(|i| (vertices[(i + 1) % n] - vertices[i]).norm()).collect();
    let total: f64 = lengths.iter().sum();
    let terms: Vec<f64> = (0..n)
        .map(|i| (lengths[i] / total).ln() + edge_loglik(y, &vertices[i], &vertices[(i + 1) % n], r))
        .collect();
    log_sum_exp(&terms)
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn log_gauss(d: &P, r: &Matrix2<f64>) -> f64 {
    let r_inv = r.try_inverse().expect("invertible covariance");
    -0.5 * quad_form(&r_inv, d) - (2.0 * std::f64::consts::PI).ln() - 0.5 * r.determinant().ln()
}

/// Signed area and area centroid of a polygon (shoelace).
pub fn area_centroid(poly: &[P]) -> (f64, P) {
    let n = poly.len();
    let mut a = 0.0;
    let mut c = P::zeros();
    for i in 0..n {
        let (p, q) = (poly[i], poly[(i + 1) % n]);
        let w = p.x * q.y - q.x * p.y;
        a += w;
        c += (p + q) * w;
    }
    (a / 2.0, c / (3.0 * a))
}

/// Clips a polygon against an axis-aligned rectangle (Sutherland-Hodgman).
pub fn clip_to_rect(poly: &[P], x0: f64, x1: f64, y0: f64, y1: f64) -> Vec<P> {
    let mut out = poly.to_vec();
    let planes: [(usize, f64, bool); 4] = [(0, x0, true), (0, x1, false), (1, y0, true), (1, y1, false)];
    for (axis, bound, keep_above) in planes {
        if out.is_empty() {
            break;
        }
        let inside = |p: &P| if keep_above { p[axis] >= bound } else { p[axis] <= bound };
        let input = std::mem::take(&mut out);
        let n = input.len();
        for i in 0..n {
            let cur = input[i];
            let prev = input[(i + n - 1) % n];
            let cross_pt = |a: &P, b: &P| {
                let t = (bound - a[axis]) / (b[axis] - a[axis]);
                a + (b - a) * t
            };
            match (inside(&prev), inside(&cur)) {
                (true, true) => out.push(cur),
                (true, false) => out.push(cross_pt(&prev, &cur)),
                (false, true) => {
                    out.push(cross_pt(&prev, &cur));
                    out.push(cur);
                }
                (false, false) => {}
            }
        }
    }
    out
}

fn bounds(poly: &[P]) -> (f64, f64, f64, f64) {
    let mut b = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in poly {
        b.0 = b.0.min(p.x);
        b.1 = b.1.max(p.x);
        b.2 = b.2.min(p.y);
        b.3 = b.3.max(p.y);
    }
    b
}

/// Area of the polygon inside each cell of a `cells × cells` grid over its
/// bounding box, with the centroid of each clipped piece.
pub fn grid_cells(poly: &[P], cells: usize) -> Vec<(f64, P)> {
    let (x0, x1, y0, y1) = bounds(poly);
    let (dx, dy) = ((x1 - x0) / cells as f64, (y1 - y0) / cells as f64);
    let mut out = Vec::new();
    for i in 0..cells {
        for j in 0..cells {
            let (cx0, cy0) = (x0 + dx * i as f64, y0 + dy * j as f64);
            let piece = clip_to_rect(poly, cx0, cx0 + dx, cy0, cy0 + dy);
            if piece.len() < 3 {
                continue;
            }
            let (a, c) = area_centroid(&piece);
            if a.abs() > 0.0 {
                out.push((a.abs(), c));
            }
        }
    }
    out
}

/// Surface log-likelihood `log (1/|S|) ∫_S N(y; z, R) dz` by grid quadrature.
pub fn surface_loglik(y: &P, cells: &[(f64, P)], r: &Matrix2<f64>) -> f64 {
    let area: f64 = cells.iter().map(|(a, _)| a).sum();
    let terms: Vec<f64> = cells.iter().map(|(a, c)| a.ln() + log_gauss(&(y - c), r)).collect();
    log_sum_exp(&terms) - area.ln()
}

/// Random star-shaped polygon around the origin, counter-clockwise, with
/// radii in `[r_min, r_max]`.
pub fn star_polygon<R: Rng>(rng: &mut R, n: usize, r_min: f64, r_max: f64) -> Vec<P> {
    let mut angles: Vec<f64> = (0..n)
        .map(|i| (i as f64 + rng.random_range(0.1..0.9)) * std::f64::consts::TAU / n as f64)
        .collect();
    angles.sort_by(f64::total_cmp);
    angles
        .into_iter()
        .map(|t| {
            let r = rng.random_range(r_min..r_max);
            P::new(r * t.cos(), r * t.sin())
        })
        .collect()
}

/// Pearson chi-square goodness-of-fit p-value.
pub fn chi_square_p(observed: &[u64], expected: &[f64]) -> f64 {
    let stat: f64 = observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum();
    let dist = ChiSquared::new((observed.len() - 1) as f64).expect("positive degrees of freedom");
    1.0 - dist.cdf(stat)
}

/// Central-difference Jacobian of a map on 6-vectors.
pub fn jacobian6<F: Fn(&Vector6<f64>) -> Vector6<f64>>(f: F, x: &Vector6<f64>, step: f64) -> Matrix6<f64> {
    let mut j = Matrix6::zeros();
    for c in 0..6 {
        let mut e = Vector6::zeros();
        e[c] = step;
        let col = (f(&(x + e)) - f(&(x - e))) / (2.0 * step);
        j.set_column(c, &col);
    }
    j
}

fn seg_dist(p: &P, a: &P, b: &P) -> f64 {
    let ab = b - a;
    let l2 = ab.norm_squared();
    let t = if l2 > 0.0 { ((p - a).dot(&ab) / l2).clamp(0.0, 1.0) } else { 0.0 };
    (p - (a + ab * t)).norm()
}

/// Distance from `p` to the closed polygonal chain.
pub fn contour_distance(p: &P, poly: &[P]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| seg_dist(p, &poly[i], &poly[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}

/// Hausdorff distance between two closed chains, sampling each edge densely.
pub fn hausdorff(a: &[P], b: &[P], per_edge: usize) -> f64 {
    let one_way = |p: &[P], q: &[P]| {
        let n = p.len();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let (s, e) = (p[i], p[(i + 1) % n]);
            for k in 0..=per_edge {
                let x = s + (e - s) * (k as f64 / per_edge as f64);
                worst = worst.max(contour_distance(&x, q));
            }
        }
        worst
    };
    one_way(a, b).max(one_way(b, a))
}

/// Even-odd point-in-polygon test.
pub fn inside(p: &P, poly: &[P]) -> bool {
    let n = poly.len();
    let mut c = false;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + n - 1) % n]);
        if (a.y > p.y) != (b.y > p.y) && p.x < a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y) {
            c = !c;
        }
    }
    c
}

/// Area and centroid by rejection sampling over the bounding box.
pub fn mc_area_centroid<R: Rng>(poly: &[P], n: usize, rng: &mut R) -> (f64, P) {
    let (x0, x1, y0, y1) = bounds(poly);
    let mut hits = 0usize;
    let mut sum = P::zeros();
    for _ in 0..n {
        let p = P::new(rng.random_range(x0..x1), rng.random_range(y0..y1));
        if inside(&p, poly) {
            hits += 1;
            sum += p;
        }
    }
    ((x1 - x0) * (y1 - y0) * hits as f64 / n as f64, sum / hits as f64)
}
