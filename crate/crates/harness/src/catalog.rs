//! Built-in synthetic dictionary of aircraft-like silhouettes.

use splinetrack::geometry::{barycenter_area, Frame, Point, ShapeVector};
use splinetrack::shaper::ShapeRecord;
use splinetrack::Result;

/// Outer radius every built-in silhouette is scaled to [m].
pub const OUTER_RADIUS: f64 = 13.0;

/// Upper half-profiles, nose first on the symmetry axis, in units of the half
/// length. The lower half is the mirror image.
const PROFILES: [(&str, &[[f64; 2]]); 5] = [
    ("delta_wing", &[[1.0, 0.0], [-0.7, 0.75], [-0.7, 0.1], [-0.85, 0.1]]),
    (
        "swept_wing",
        &[
            [1.0, 0.0],
            [0.6, 0.15],
            [0.3, 0.19],
            [-0.2, 0.68],
            [-0.38, 0.68],
            [-0.3, 0.19],
            [-0.6, 0.16],
            [-0.84, 0.42],
            [-1.0, 0.42],
            [-0.96, 0.12],
        ],
    ),
    (
        "rect_fuselage",
        &[[1.0, 0.0], [0.85, 0.15], [0.2, 0.15], [0.2, 0.75], [-0.05, 0.75], [-0.05, 0.15], [-1.0, 0.15]],
    ),
    (
        "cross",
        &[[1.0, 0.0], [0.9, 0.14], [0.1, 0.14], [0.1, 0.9], [-0.12, 0.9], [-0.12, 0.14], [-0.9, 0.14], [-0.95, 0.06]],
    ),
    ("arrow", &[[1.0, 0.0], [0.2, 0.6], [0.2, 0.25], [-1.0, 0.25]]),
];

/// Names of the built-in classes in dictionary order.
pub fn class_names() -> Vec<&'static str> {
    PROFILES.iter().map(|(name, _)| *name).collect()
}

fn mirrored(half: &[[f64; 2]]) -> Vec<Point> {
    let mut v: Vec<Point> = half.iter().map(|p| Point::new(p[0], p[1])).collect();
    v.extend(half[1..].iter().rev().map(|p| Point::new(p[0], -p[1])));
    v
}

/// Closes a half-profile, moves the area barycenter to the origin and scales
/// the outer radius to `radius`.
pub fn silhouette(half: &[[f64; 2]], radius: f64) -> Result<ShapeVector> {
    let raw = ShapeVector::counter_clockwise(mirrored(half), Frame::World)?;
    let (g, _) = barycenter_area(&raw)?;
    let centred = raw.translated(-g);
    Ok(centred.scaled(radius / centred.outer_radius()).with_frame(Frame::Barycentric))
}

fn round_nm(x: f64) -> f64 {
    // adding zero turns -0.0 into 0.0
    (x * 1e9).round() / 1e9 + 0.0
}

/// The five built-in classes as dictionary records, rounded to the nanometre.
pub fn builtin_records() -> Result<Vec<ShapeRecord>> {
    PROFILES
        .iter()
        .map(|(name, half)| {
            let shape = silhouette(half, OUTER_RADIUS)?;
            let vertices = shape.vertices().iter().map(|p| [round_nm(p.x), round_nm(p.y)]).collect();
            Ok(ShapeRecord {
                name: (*name).to_string(),
                vertices,
                reflectivity: 1.0,
            })
        })
        .collect()
}

/// Dictionary file text with one vertex per line.
pub fn records_json(records: &[ShapeRecord]) -> serde_json::Result<String> {
    let mut out = String::from("[\n");
    for (i, r) in records.iter().enumerate() {
        out += &format!("  {{\n    \"name\": {},\n", serde_json::to_string(&r.name)?);
        out += &format!("    \"reflectivity\": {},\n    \"vertices\": [\n", serde_json::to_string(&r.reflectivity)?);
        for (j, v) in r.vertices.iter().enumerate() {
            let sep = if j + 1 < r.vertices.len() { "," } else { "" };
            out += &format!("      {}{sep}\n", serde_json::to_string(v)?);
        }
        out += if i + 1 < records.len() { "    ]\n  },\n" } else { "    ]\n  }\n" };
    }
    out += "]\n";
    Ok(out)
}
