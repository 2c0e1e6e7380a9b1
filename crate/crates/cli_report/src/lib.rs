//! Report and figure-data generation for capacity runs.
//!
//! Three artifact families back the `qcap` binary:
//!
//! * capacity reports: a short human-readable block at four decimal
//!   places, or a full-precision JSON document, for one [`CapacityResult`],
//! * relative-entropy contours: marching-squares polylines of the level
//!   sets of `D(. || v)` on a coordinate plane, masked to the unit disk,
//! * angular scans: `(theta, D)` rows around the channel image in a
//!   plane, the raw data behind capacity-versus-angle plots.
//!
//! Everything here is deterministic: the same request produces the same
//! bytes, so CSV and JSON outputs diff cleanly across runs.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt::Write as _;

use bloch_core::{relative_entropy, BlochError, BlochVector};
use capacity_solvers::{CapacityResult, SolverMethod};
use channel_model::{apply_channel, ChannelError, ChannelParams};
use serde::Serialize;
use thiserror::Error;

/// Ways a report request can be malformed or fail while evaluating.
#[derive(Debug, Error)]
pub enum ReportError {
    #[error("contour level must be a positive number of bits, got {0}")]
    BadLevel(f64),
    #[error("grid resolution must be at least 8 points per axis, got {0}")]
    BadResolution(usize),
    #[error("reference state must lie strictly inside the Bloch ball, got norm {0}")]
    CenterNotInterior(f64),
    #[error("angular scan needs at least 8 samples, got {0}")]
    TooFewSamples(usize),
    #[error(transparent)]
    Entropy(#[from] BlochError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// Coordinate plane through the origin of the Bloch ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Plane {
    XY,
    XZ,
    YZ,
}

impl Plane {
    /// Lifts in-plane coordinates to a Bloch vector (third component 0).
    pub fn embed(self, c1: f64, c2: f64) -> BlochVector {
        match self {
            Plane::XY => BlochVector::new(c1, c2, 0.0),
            Plane::XZ => BlochVector::new(c1, 0.0, c2),
            Plane::YZ => BlochVector::new(0.0, c1, c2),
        }
    }

    /// Drops the out-of-plane component.
    pub fn project(self, w: BlochVector) -> (f64, f64) {
        match self {
            Plane::XY => (w.x, w.y),
            Plane::XZ => (w.x, w.z),
            Plane::YZ => (w.y, w.z),
        }
    }
}

/// Level-set extraction request: the fixed second argument `v` of the
/// relative entropy, the contour heights in bits, the plane, and the
/// grid resolution per axis.
#[derive(Debug, Clone)]
pub struct ContourRequest {
    pub v: BlochVector,
    pub levels: Vec<f64>,
    pub plane: Plane,
    pub resolution: usize,
}

/// One connected piece of a level set, in plane coordinates. Closed
/// contours repeat their first point at the end.
#[derive(Debug, Clone)]
pub struct Polyline {
    pub level: f64,
    pub id: usize,
    pub points: Vec<(f64, f64)>,
}

/// Sweep request for the relative entropy around the channel image in
/// one plane.
#[derive(Debug, Clone)]
pub struct AngularScanRequest {
    pub channel: ChannelParams,
    pub v: BlochVector,
    pub plane: Plane,
    pub samples: usize,
}

/// Identifies one grid edge: `H(ix, iy)` joins node `(ix, iy)` to
/// `(ix + 1, iy)`, `V(ix, iy)` joins it to `(ix, iy + 1)`. Neighbouring
/// cells share these keys, so each crossing point is interpolated once
/// and chained contours meet bitwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EdgeKey {
    H(usize, usize),
    V(usize, usize),
}

/// Samples of `D(. || v)` on a square grid over `[-1, 1]^2` in the
/// requested plane; nodes outside the unit disk carry no value.
struct PlaneGrid {
    n: usize,
    coords: Vec<f64>,
    values: Vec<Option<f64>>,
}

impl PlaneGrid {
    fn evaluate(req: &ContourRequest) -> Result<Self, ReportError> {
        let n = req.resolution;
        let coords: Vec<f64> = (0..n)
            .map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64)
            .collect();
        let mut values = Vec::with_capacity(n * n);
        for iy in 0..n {
            for ix in 0..n {
                let (c1, c2) = (coords[ix], coords[iy]);
                if c1 * c1 + c2 * c2 <= 1.0 {
                    values.push(Some(relative_entropy(req.plane.embed(c1, c2), req.v)?));
                } else {
                    values.push(None);
                }
            }
        }
        Ok(PlaneGrid { n, coords, values })
    }

    fn value(&self, ix: usize, iy: usize) -> Option<f64> {
        self.values[iy * self.n + ix]
    }
}

/// Crossing points interpolated once per grid edge.
type Crossings = BTreeMap<EdgeKey, (f64, f64)>;

/// A contour segment joining the crossings on two edges of one cell.
type Segment = (EdgeKey, EdgeKey);

/// Marching squares over one level: crossing points per grid edge plus
/// the segments connecting them. Cells with a corner outside the disk
/// are skipped, which clips contours at the disk boundary.
fn level_segments(grid: &PlaneGrid, level: f64) -> (Crossings, Vec<Segment>) {
    let n = grid.n;
    let mut crossings: Crossings = BTreeMap::new();
    let mut segments: Vec<Segment> = Vec::new();
    for iy in 0..n - 1 {
        for ix in 0..n - 1 {
            let (Some(f00), Some(f10), Some(f11), Some(f01)) = (
                grid.value(ix, iy),
                grid.value(ix + 1, iy),
                grid.value(ix + 1, iy + 1),
                grid.value(ix, iy + 1),
            ) else {
                continue;
            };
            let case = usize::from(f00 > level)
                | usize::from(f10 > level) << 1
                | usize::from(f11 > level) << 2
                | usize::from(f01 > level) << 3;
            if case == 0 || case == 15 {
                continue;
            }
            let mut cross = |key: EdgeKey| -> EdgeKey {
                crossings.entry(key).or_insert_with(|| {
                    let ((xa, ya, fa), (xb, yb, fb)) = match key {
                        EdgeKey::H(i, j) => (
                            (grid.coords[i], grid.coords[j], grid.value(i, j).unwrap()),
                            (grid.coords[i + 1], grid.coords[j], grid.value(i + 1, j).unwrap()),
                        ),
                        EdgeKey::V(i, j) => (
                            (grid.coords[i], grid.coords[j], grid.value(i, j).unwrap()),
                            (grid.coords[i], grid.coords[j + 1], grid.value(i, j + 1).unwrap()),
                        ),
                    };
                    let t = (level - fa) / (fb - fa);
                    (xa + t * (xb - xa), ya + t * (yb - ya))
                });
                key
            };
            let s = EdgeKey::H(ix, iy);
            let e = EdgeKey::V(ix + 1, iy);
            let nn = EdgeKey::H(ix, iy + 1);
            let w = EdgeKey::V(ix, iy);
            let mut put = |a: EdgeKey, b: EdgeKey| segments.push((cross(a), cross(b)));
            match case {
                1 | 14 => put(w, s),
                2 | 13 => put(s, e),
                3 | 12 => put(w, e),
                4 | 11 => put(e, nn),
                6 | 9 => put(s, nn),
                7 | 8 => put(w, nn),
                // Saddles: the cell centre decides which diagonal pair of
                // corners the two contour arcs wrap around.
                5 | 10 => {
                    let centre_above = (f00 + f10 + f11 + f01) / 4.0 > level;
                    if (case == 5) == centre_above {
                        put(s, e);
                        put(w, nn);
                    } else {
                        put(w, s);
                        put(e, nn);
                    }
                }
                _ => unreachable!(),
            }
        }
    }
    (crossings, segments)
}

/// Follows unused segments from `start` as far as they go. Every
/// crossing touches at most two segments, so the walk traces a simple
/// path; a loop closes by returning to its starting point.
fn trace_path(
    start: EdgeKey,
    segments: &[Segment],
    adjacency: &BTreeMap<EdgeKey, Vec<usize>>,
    crossings: &Crossings,
    used: &mut [bool],
) -> Option<Vec<(f64, f64)>> {
    let mut path = vec![crossings[&start]];
    let mut node = start;
    while let Some(&seg) = adjacency[&node].iter().find(|&&i| !used[i]) {
        used[seg] = true;
        let (a, b) = segments[seg];
        node = if a == node { b } else { a };
        path.push(crossings[&node]);
    }
    (path.len() > 1).then_some(path)
}

fn chain_segments(crossings: &Crossings, segments: &[Segment]) -> Vec<Vec<(f64, f64)>> {
    let mut adjacency: BTreeMap<EdgeKey, Vec<usize>> = BTreeMap::new();
    for (i, &(a, b)) in segments.iter().enumerate() {
        adjacency.entry(a).or_default().push(i);
        adjacency.entry(b).or_default().push(i);
    }
    let mut used = vec![false; segments.len()];
    let mut paths = Vec::new();
    // Open curves first, so a later loop pass never starts mid-path.
    for (&key, incident) in &adjacency {
        if incident.len() == 1 {
            if let Some(p) = trace_path(key, segments, &adjacency, crossings, &mut used) {
                paths.push(p);
            }
        }
    }
    for &key in adjacency.keys() {
        if let Some(p) = trace_path(key, segments, &adjacency, crossings, &mut used) {
            paths.push(p);
        }
    }
    paths
}

/// Extracts the level sets of `D(. || v)` in the requested plane as
/// polylines, clipped to the unit disk. Levels whose contour lies
/// entirely outside the attainable range simply produce no polylines.
pub fn contour_polylines(req: &ContourRequest) -> Result<Vec<Polyline>, ReportError> {
    if req.resolution < 8 {
        return Err(ReportError::BadResolution(req.resolution));
    }
    let q = req.v.norm();
    if q >= 1.0 {
        return Err(ReportError::CenterNotInterior(q));
    }
    for &level in &req.levels {
        if !level.is_finite() || level <= 0.0 {
            return Err(ReportError::BadLevel(level));
        }
    }
    let grid = PlaneGrid::evaluate(req)?;
    let mut out = Vec::new();
    let mut id = 0;
    for &level in &req.levels {
        let (crossings, segments) = level_segments(&grid, level);
        for points in chain_segments(&crossings, &segments) {
            out.push(Polyline { level, id, points });
            id += 1;
        }
    }
    Ok(out)
}

/// Walks the channel image of the in-plane equator and records, for
/// each output point, its angle about the origin within the plane and
/// its distance `D(point || v)`. When `v` is the optimal output, the
/// row maxima sit at the capacity.
pub fn angular_scan(req: &AngularScanRequest) -> Result<Vec<(f64, f64)>, ReportError> {
    if req.samples < 8 {
        return Err(ReportError::TooFewSamples(req.samples));
    }
    let q = req.v.norm();
    if q >= 1.0 {
        return Err(ReportError::CenterNotInterior(q));
    }
    let mut rows = Vec::with_capacity(req.samples);
    for k in 0..req.samples {
        let phi = TAU * k as f64 / req.samples as f64;
        let w = apply_channel(&req.channel, req.plane.embed(phi.cos(), phi.sin()));
        let (c1, c2) = req.plane.project(w);
        rows.push((c2.atan2(c1), relative_entropy(w, req.v)?));
    }
    Ok(rows)
}

/// CSV for contour polylines: one row per vertex, LF line endings,
/// full float precision.
pub fn contour_csv(polylines: &[Polyline]) -> String {
    let mut out = String::from("level,polyline_id,c1,c2\n");
    for p in polylines {
        for &(c1, c2) in &p.points {
            let _ = writeln!(out, "{},{},{},{}", p.level, p.id, c1, c2);
        }
    }
    out
}

/// CSV for angular scan rows.
pub fn scan_csv(rows: &[(f64, f64)]) -> String {
    let mut out = String::from("theta,d_bits\n");
    for &(theta, d) in rows {
        let _ = writeln!(out, "{theta},{d}");
    }
    out
}

/// CSV for capacity sweep rows.
pub fn sweep_csv(rows: &[(f64, f64)]) -> String {
    let mut out = String::from("x,c1_bits\n");
    for &(x, c) in rows {
        let _ = writeln!(out, "{x},{c}");
    }
    out
}

/// Stable lowercase tag for each solver route.
pub fn method_name(method: SolverMethod) -> &'static str {
    match method {
        SolverMethod::Unital => "unital",
        SolverMethod::LinearClosedForm => "linear_closed_form",
        SolverMethod::LinearTranscendental => "linear_transcendental",
        SolverMethod::Iterative => "iterative",
    }
}

fn fmt_vec4(w: BlochVector) -> String {
    format!("({:.4}, {:.4}, {:.4})", w.x, w.y, w.z)
}

/// Human-readable report at four decimal places; appends the oracle
/// comparison when a verification run is supplied.
pub fn capacity_report(result: &CapacityResult, oracle: Option<&CapacityResult>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "C1 = {:.4} bits", result.capacity_bits);
    let _ = writeln!(out, "V = {}", fmt_vec4(result.average_output));
    let _ = writeln!(out, "method = {}", method_name(result.method));
    let _ = writeln!(out, "iterations = {}", result.iterations);
    let _ = writeln!(out, "max |D_i - C1| = {:.1e}", result.max_equal_distance_residual);
    let _ = writeln!(out, "signals:");
    let _ = writeln!(out, "  i     p_i  input                        output");
    for (i, m) in result.ensemble.items.iter().enumerate() {
        let _ = writeln!(
            out,
            "  {}  {:.4}  {:27}  {}",
            i + 1,
            m.probability,
            fmt_vec4(m.input),
            fmt_vec4(m.output),
        );
    }
    if let Some(o) = oracle {
        let _ = writeln!(
            out,
            "oracle C = {:.4} bits (gap = {:.1e})",
            o.capacity_bits,
            (result.capacity_bits - o.capacity_bits).abs(),
        );
    }
    out
}

#[derive(Serialize)]
struct MemberJson {
    probability: f64,
    input: [f64; 3],
    output: [f64; 3],
}

#[derive(Serialize)]
struct VerifyJson {
    oracle_bits: f64,
    gap: f64,
}

#[derive(Serialize)]
struct ReportJson<'a> {
    capacity_bits: f64,
    average_output: [f64; 3],
    method: &'a str,
    iterations: usize,
    max_equal_distance_residual: f64,
    ensemble: Vec<MemberJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    verify: Option<VerifyJson>,
}

/// Machine-readable report at full float precision.
pub fn capacity_json(result: &CapacityResult, oracle: Option<&CapacityResult>) -> String {
    let doc = ReportJson {
        capacity_bits: result.capacity_bits,
        average_output: result.average_output.to_array(),
        method: method_name(result.method),
        iterations: result.iterations,
        max_equal_distance_residual: result.max_equal_distance_residual,
        ensemble: result
            .ensemble
            .items
            .iter()
            .map(|m| MemberJson {
                probability: m.probability,
                input: m.input.to_array(),
                output: m.output.to_array(),
            })
            .collect(),
        verify: oracle.map(|o| VerifyJson {
            oracle_bits: o.capacity_bits,
            gap: (result.capacity_bits - o.capacity_bits).abs(),
        }),
    };
    // Plain numbers and strings cannot fail to serialize.
    serde_json::to_string_pretty(&doc).expect("report serialization")
}

#[cfg(test)]
mod tests {
    use super::*;
    use bloch_core::von_neumann_entropy;
    use capacity_solvers::{solve_auto, IterConfig};
    use channel_model::{named_channel, NamedChannelSpec, NamedKind};

    fn params(t: [f64; 3], lambda: [f64; 3]) -> ChannelParams {
        ChannelParams::new(t, lambda).expect("valid channel")
    }

    #[test]
    fn origin_contours_are_circles() {
        let radii = [0.3, 0.6, 0.9];
        let levels: Vec<f64> = radii
            .iter()
            .map(|&r| 1.0 - von_neumann_entropy(r).unwrap())
            .collect();
        let req = ContourRequest {
            v: BlochVector::ZERO,
            levels: levels.clone(),
            plane: Plane::XZ,
            resolution: 256,
        };
        let polys = contour_polylines(&req).unwrap();
        for (&r, &level) in radii.iter().zip(&levels) {
            let rings: Vec<&Polyline> = polys.iter().filter(|p| p.level == level).collect();
            assert!(!rings.is_empty(), "no contour at radius {r}");
            for ring in rings {
                let (first, last) = (ring.points[0], *ring.points.last().unwrap());
                assert_eq!(first, last, "origin contours close on themselves");
                for &(c1, c2) in &ring.points {
                    let dev = (c1.hypot(c2) - r).abs();
                    assert!(dev <= 2.0 / 256.0, "radial deviation {dev} at radius {r}");
                }
            }
        }
    }

    #[test]
    fn off_centre_contour_wraps_the_reference_state() {
        let v = BlochVector::new(0.0, 0.5, 0.0);
        let req = ContourRequest {
            v,
            levels: vec![0.1],
            plane: Plane::XY,
            resolution: 192,
        };
        let polys = contour_polylines(&req).unwrap();
        assert_eq!(polys.len(), 1, "one closed contour around v");
        let points = &polys[0].points;
        assert_eq!(points[0], *points.last().unwrap());
        let (lo1, hi1) = points
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                (lo.min(p.0), hi.max(p.0))
            });
        let (lo2, hi2) = points
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                (lo.min(p.1), hi.max(p.1))
            });
        assert!(lo1 < 0.0 && hi1 > 0.0, "contour straddles c1 = 0");
        assert!(lo2 < 0.5 && hi2 > 0.5, "contour straddles c2 = 0.5");
    }

    #[test]
    fn unattainable_level_yields_no_polylines() {
        let req = ContourRequest {
            v: BlochVector::ZERO,
            levels: vec![1.5],
            plane: Plane::XY,
            resolution: 64,
        };
        assert!(contour_polylines(&req).unwrap().is_empty());
    }

    #[test]
    fn requests_are_validated() {
        let base = ContourRequest {
            v: BlochVector::ZERO,
            levels: vec![0.5],
            plane: Plane::XY,
            resolution: 64,
        };
        let bad_level = ContourRequest { levels: vec![-0.1], ..base.clone() };
        assert!(matches!(contour_polylines(&bad_level), Err(ReportError::BadLevel(_))));
        let bad_res = ContourRequest { resolution: 4, ..base.clone() };
        assert!(matches!(contour_polylines(&bad_res), Err(ReportError::BadResolution(4))));
        let bad_v = ContourRequest { v: BlochVector::new(0.0, 0.0, 1.0), ..base };
        assert!(matches!(contour_polylines(&bad_v), Err(ReportError::CenterNotInterior(_))));
        let scan = AngularScanRequest {
            channel: params([0.0; 3], [0.5, 0.5, 0.5]),
            v: BlochVector::ZERO,
            plane: Plane::XY,
            samples: 4,
        };
        assert!(matches!(angular_scan(&scan), Err(ReportError::TooFewSamples(4))));
    }

    #[test]
    fn unital_scan_is_antipodally_symmetric() {
        let depol = named_channel(NamedChannelSpec { kind: NamedKind::Depolarizing, x: 0.8 })
            .unwrap();
        let req = AngularScanRequest {
            channel: depol,
            v: BlochVector::ZERO,
            plane: Plane::XY,
            samples: 360,
        };
        let rows = angular_scan(&req).unwrap();
        for k in 0..180 {
            let d = (rows[k].1 - rows[k + 180].1).abs();
            assert!(d <= 1e-12, "antipodal pair {k} differs by {d}");
        }
    }

    #[test]
    fn csv_emitters_are_deterministic_with_lf_endings() {
        let req = ContourRequest {
            v: BlochVector::new(0.1, 0.0, 0.2),
            levels: vec![0.05, 0.2],
            plane: Plane::XZ,
            resolution: 96,
        };
        let a = contour_csv(&contour_polylines(&req).unwrap());
        let b = contour_csv(&contour_polylines(&req).unwrap());
        assert_eq!(a, b);
        assert!(a.starts_with("level,polyline_id,c1,c2\n"));
        assert!(!a.contains('\r'));
        assert!(scan_csv(&[(0.5, 0.25)]).starts_with("theta,d_bits\n"));
        assert!(sweep_csv(&[(0.5, 0.25)]).starts_with("x,c1_bits\n"));
    }

    #[test]
    fn report_shows_reference_capacity_lines() {
        let p = params([0.1, 0.2, 0.3], [0.0, 0.0, 0.4]);
        let r = solve_auto(&p, &IterConfig::default()).unwrap();
        let text = capacity_report(&r, None);
        assert!(text.contains("C1 = 0.1365"), "report was:\n{text}");
        assert!(text.contains("method = linear_transcendental"));
        let json = capacity_json(&r, Some(&r));
        let doc: serde_json::Value = serde_json::from_str(&json).unwrap();
        let bits = doc["capacity_bits"].as_f64().unwrap();
        assert!((bits - r.capacity_bits).abs() < 1e-15, "full precision round-trip");
        assert_eq!(doc["verify"]["gap"].as_f64().unwrap(), 0.0);
    }
}
