//! Flight traces: geodetic ingestion, local projection, and waypoint mobility.
//!
//! Positions are projected onto a flat east/north plane with a fixed
//! 111 km per degree of latitude and the longitude spacing taken at the
//! reference latitude. Over the few hundred meters a mission spans, the
//! distortion of this equirectangular approximation is negligible.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec3::Vec3;

/// Distance between consecutive latitude lines.
pub const METERS_PER_DEGREE: f64 = 111_000.0;

/// Default minimum time spacing used by [`decimate`].
pub const DEFAULT_DECIMATION_SPACING_S: f64 = 1.0;

/// A timestamped GPS fix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    /// Seconds since trace start.
    pub t: f64,
    pub lat: f64,
    pub lon: f64,
    /// Meters above ground.
    pub alt: f64,
}

impl GeoPoint {
    pub fn new(t: f64, lat: f64, lon: f64, alt: f64) -> Result<Self> {
        let p = Self { t, lat, lon, alt };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t.is_finite() && self.t >= 0.0) {
            return Err(Error::validation(format!("time {} must be finite and >= 0", self.t)));
        }
        if !(-90.0..=90.0).contains(&self.lat) {
            return Err(Error::validation(format!("latitude {} outside [-90, 90]", self.lat)));
        }
        if !(-180.0..=180.0).contains(&self.lon) {
            return Err(Error::validation(format!("longitude {} outside [-180, 180]", self.lon)));
        }
        if !(self.alt.is_finite() && self.alt >= 0.0) {
            return Err(Error::validation(format!("altitude {} must be finite and >= 0", self.alt)));
        }
        Ok(())
    }
}

/// A 4-D waypoint in the local frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Waypoint {
    pub fn new(t: f64, x: f64, y: f64, z: f64) -> Self {
        Self { t, x, y, z }
    }

    pub fn position(&self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }
}

/// Kinematic state of the UAV at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobilityState {
    pub position: Vec3,
    pub velocity: Vec3,
}

/// Projects `p` onto the local plane centred at `reference`.
pub fn latlon_to_xy(p: &GeoPoint, reference: &GeoPoint) -> (f64, f64) {
    let y = (p.lat - reference.lat) * METERS_PER_DEGREE;
    let x = (p.lon - reference.lon) * METERS_PER_DEGREE * reference.lat.to_radians().cos();
    (x, y)
}

/// Inverse of [`latlon_to_xy`] for the same reference. Returns `(lat, lon)`.
pub fn xy_to_latlon(x: f64, y: f64, reference: &GeoPoint) -> (f64, f64) {
    let lat = reference.lat + y / METERS_PER_DEGREE;
    let lon = reference.lon + x / (METERS_PER_DEGREE * reference.lat.to_radians().cos());
    (lat, lon)
}

/// Ordered waypoints plus the geodetic reference they were projected from.
///
/// Immutable once built; timestamps are strictly increasing and there are
/// always at least two waypoints.
#[derive(Debug, Clone, PartialEq)]
pub struct FlightTrace {
    origin: GeoPoint,
    points: Vec<Waypoint>,
}

impl FlightTrace {
    pub fn new(origin: GeoPoint, points: Vec<Waypoint>) -> Result<Self> {
        origin.validate()?;
        if points.len() < 2 {
            return Err(Error::validation(format!("a flight trace needs at least 2 waypoints, got {}", points.len())));
        }
        for (i, w) in points.iter().enumerate() {
            if !(w.t.is_finite() && w.x.is_finite() && w.y.is_finite() && w.z.is_finite()) {
                return Err(Error::validation(format!("waypoint {i} has non-finite fields")));
            }
            if w.z < 0.0 {
                return Err(Error::validation(format!("waypoint {i} is below ground (z = {})", w.z)));
            }
        }
        if let Some(i) = points.windows(2).position(|w| w[1].t <= w[0].t) {
            return Err(Error::validation(format!(
                "timestamps must be strictly increasing: t[{}] = {} follows t[{}] = {}",
                i + 1,
                points[i + 1].t,
                i,
                points[i].t
            )));
        }
        Ok(Self { origin, points })
    }

    pub fn origin(&self) -> &GeoPoint {
        &self.origin
    }

    pub fn points(&self) -> &[Waypoint] {
        &self.points
    }

    pub fn start_time(&self) -> f64 {
        self.points[0].t
    }

    pub fn end_time(&self) -> f64 {
        self.points[self.points.len() - 1].t
    }

    /// Centre of the horizontal bounding box of the trace, at ground level.
    pub fn area_centroid(&self) -> Vec3 {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for w in &self.points {
            x0 = x0.min(w.x);
            x1 = x1.max(w.x);
            y0 = y0.min(w.y);
            y1 = y1.max(w.y);
        }
        Vec3::new(0.5 * (x0 + x1), 0.5 * (y0 + y1), 0.0)
    }

    /// Piecewise-linear position and the velocity of the active segment.
    /// Outside the trace's time span the position is held and velocity is zero.
    pub fn state_at(&self, t: f64) -> MobilityState {
        let pts = &self.points;
        let first = pts[0];
        let last = pts[pts.len() - 1];
        if t <= first.t {
            return MobilityState { position: first.position(), velocity: Vec3::ZERO };
        }
        if t >= last.t {
            return MobilityState { position: last.position(), velocity: Vec3::ZERO };
        }
        // First index with w.t > t; always in 1..len here.
        let hi = pts.partition_point(|w| w.t <= t);
        let (a, b) = (pts[hi - 1], pts[hi]);
        let dt = b.t - a.t;
        let velocity = (b.position() - a.position()) * (1.0 / dt);
        let position = a.position() + velocity * (t - a.t);
        MobilityState { position, velocity }
    }

    /// Writes the trace as `t_s,lat_deg,lon_deg,alt_m`, inverting the projection.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for p in &self.points {
            let (lat, lon) = xy_to_latlon(p.x, p.y, &self.origin);
            w.serialize(TraceRow { t_s: p.t, lat_deg: lat, lon_deg: lon, alt_m: p.z })?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One row of the input trace CSV.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TraceRow {
    pub t_s: f64,
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub alt_m: f64,
}

/// Reads a `t_s,lat_deg,lon_deg,alt_m` CSV and projects every fix against the first row.
pub fn parse_trace<R: Read>(input: R) -> Result<FlightTrace> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers().map_err(|e| Error::Parse { line: 1, message: e.to_string() })?;
    let expected = ["t_s", "lat_deg", "lon_deg", "alt_m"];
    if headers.iter().ne(expected.iter().copied()) {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "expected header {}, got {}",
                expected.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let mut fixes = Vec::new();
    for result in reader.deserialize::<TraceRow>() {
        let row =
            result.map_err(|e| Error::Parse { line: e.position().map_or(0, |p| p.line()), message: e.to_string() })?;
        let line = fixes.len() as u64 + 2;
        let fix = GeoPoint::new(row.t_s, row.lat_deg, row.lon_deg, row.alt_m)
            .map_err(|e| Error::Parse { line, message: e.to_string() })?;
        fixes.push(fix);
    }
    let origin = *fixes.first().ok_or_else(|| Error::validation("trace has no rows"))?;

    let points = fixes
        .iter()
        .map(|p| {
            let (x, y) = latlon_to_xy(p, &origin);
            Waypoint::new(p.t, x, y, p.alt)
        })
        .collect();
    FlightTrace::new(origin, points)
}

/// Greedy time-based thinning: keeps the endpoints and every waypoint at
/// least `min_spacing` seconds after the previously kept one.
pub fn decimate(trace: &FlightTrace, min_spacing: f64) -> FlightTrace {
    assert!(min_spacing > 0.0, "min_spacing must be positive");
    let pts = trace.points();
    let last = pts.len() - 1;
    let mut kept = vec![pts[0]];
    for w in &pts[1..last] {
        if w.t - kept[kept.len() - 1].t >= min_spacing {
            kept.push(*w);
        }
    }
    kept.push(pts[last]);
    FlightTrace { origin: trace.origin, points: kept }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geo(t: f64, lat: f64, lon: f64, alt: f64) -> GeoPoint {
        GeoPoint::new(t, lat, lon, alt).unwrap()
    }

    fn line_trace(n: usize, dt: f64) -> FlightTrace {
        let pts = (0..n).map(|i| Waypoint::new(i as f64 * dt, i as f64, 0.0, 10.0)).collect();
        FlightTrace::new(geo(0.0, 30.0, -97.0, 10.0), pts).unwrap()
    }

    #[test]
    fn projection_identity_at_reference() {
        let r = geo(0.0, 30.0, -97.7, 20.0);
        assert_eq!(latlon_to_xy(&r, &r), (0.0, 0.0));
    }

    #[test]
    fn projection_latitude_step() {
        let r = geo(0.0, 30.0, -97.7, 20.0);
        let p = geo(1.0, 30.001, -97.7, 20.0);
        let (x, y) = latlon_to_xy(&p, &r);
        assert!(x.abs() < 1e-12);
        assert!((y - 111.0).abs() < 1e-6, "y = {y}");
    }

    #[test]
    fn projection_longitude_step_scaled_by_reference_latitude() {
        let r = geo(0.0, 30.0, -97.7, 20.0);
        let p = geo(1.0, 30.0, -97.699, 20.0);
        let (x, _) = latlon_to_xy(&p, &r);
        assert!((x - 96.13).abs() < 5e-3, "x = {x}");
    }

    #[test]
    fn inverse_projection_round_trips() {
        let r = geo(0.0, 30.27, -97.74, 0.0);
        let (lat, lon) = xy_to_latlon(-123.4, 456.7, &r);
        let (x, y) = latlon_to_xy(&geo(0.0, lat, lon, 0.0), &r);
        assert!((x + 123.4).abs() < 1e-6 && (y - 456.7).abs() < 1e-6);
    }

    #[test]
    fn geopoint_rejects_out_of_range() {
        assert!(GeoPoint::new(0.0, 91.0, 0.0, 0.0).is_err());
        assert!(GeoPoint::new(0.0, 0.0, -181.0, 0.0).is_err());
        assert!(GeoPoint::new(0.0, 0.0, 0.0, -1.0).is_err());
        assert!(GeoPoint::new(-1.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn trace_needs_two_increasing_points() {
        let o = geo(0.0, 30.0, -97.0, 0.0);
        assert!(FlightTrace::new(o, vec![Waypoint::new(0.0, 0.0, 0.0, 0.0)]).is_err());
        let dup = vec![Waypoint::new(0.0, 0.0, 0.0, 0.0), Waypoint::new(0.0, 1.0, 0.0, 0.0)];
        assert!(FlightTrace::new(o, dup).is_err());
    }

    #[test]
    fn parse_two_rows() {
        let csv = "t_s,lat_deg,lon_deg,alt_m\n0,30.0,-97.0,12.5\n1,30.0001,-97.0,13\n";
        let trace = parse_trace(csv.as_bytes()).unwrap();
        assert_eq!(trace.points().len(), 2);
        assert_eq!(trace.points()[0], Waypoint::new(0.0, 0.0, 0.0, 12.5));
    }

    #[test]
    fn parse_rejects_duplicate_timestamp() {
        let csv = "t_s,lat_deg,lon_deg,alt_m\n0,30.0,-97.0,10\n0,30.0001,-97.0,10\n";
        assert!(matches!(parse_trace(csv.as_bytes()), Err(Error::Validation(_))));
    }

    #[test]
    fn parse_reports_line_of_malformed_row() {
        let csv = "t_s,lat_deg,lon_deg,alt_m\n0,30.0,-97.0,10\n1,abc,-97.0,10\n";
        match parse_trace(csv.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        let csv = "t_s,lat_deg,lon_deg,alt_m\n0,30.0,-97.0,10\n1,95.0,-97.0,10\n";
        match parse_trace(csv.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn parse_rejects_wrong_header() {
        let csv = "time,lat,lon,alt\n0,30.0,-97.0,10\n1,30.0,-97.0,10\n";
        assert!(matches!(parse_trace(csv.as_bytes()), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn parse_three_rows_matches_projection() {
        let csv = "t_s,lat_deg,lon_deg,alt_m\n0,30.0,-97.0,10\n1,30.001,-97.0,11\n2,30.001,-96.999,12\n";
        let trace = parse_trace(csv.as_bytes()).unwrap();
        // Independent evaluation of the projection: 111 km/deg, cos(30°) = √3/2.
        let expected = [(0.0, 0.0, 10.0), (0.0, 111.0, 11.0), (111.0 * 3f64.sqrt() / 2.0, 111.0, 12.0)];
        for (w, (x, y, z)) in trace.points().iter().zip(expected) {
            assert!((w.x - x).abs() < 1e-6 && (w.y - y).abs() < 1e-6 && w.z == z, "{w:?}");
        }
    }

    #[test]
    fn decimate_small_spacing_is_identity() {
        let t = line_trace(11, 1.0);
        assert_eq!(decimate(&t, 0.5), t);
    }

    #[test]
    fn decimate_keeps_every_other_second() {
        let d = decimate(&line_trace(11, 1.0), 2.0);
        let ts: Vec<f64> = d.points().iter().map(|w| w.t).collect();
        assert_eq!(ts, vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
    }

    #[test]
    fn decimate_preserves_two_point_trace() {
        let t = line_trace(2, 1.0);
        assert_eq!(decimate(&t, 100.0), t);
    }

    #[test]
    fn decimate_always_keeps_last_point() {
        let d = decimate(&line_trace(10, 1.0), 2.0);
        let ts: Vec<f64> = d.points().iter().map(|w| w.t).collect();
        assert_eq!(ts, vec![0.0, 2.0, 4.0, 6.0, 8.0, 9.0]);
    }

    #[test]
    fn state_at_interpolates_segment() {
        let o = geo(0.0, 30.0, -97.0, 10.0);
        let t = FlightTrace::new(o, vec![Waypoint::new(0.0, 0.0, 0.0, 10.0), Waypoint::new(10.0, 100.0, 0.0, 10.0)])
            .unwrap();
        let s = t.state_at(5.0);
        assert_eq!(s.position, Vec3::new(50.0, 0.0, 10.0));
        assert_eq!(s.velocity, Vec3::new(10.0, 0.0, 0.0));
        assert_eq!(t.state_at(0.0).position, Vec3::new(0.0, 0.0, 10.0));
        let after = t.state_at(12.0);
        assert_eq!(after.position, Vec3::new(100.0, 0.0, 10.0));
        assert_eq!(after.velocity, Vec3::ZERO);
    }

    #[test]
    fn state_at_waypoint_time_returns_waypoint() {
        let t = line_trace(5, 2.0);
        for w in t.points() {
            assert_eq!(t.state_at(w.t).position, w.position());
        }
    }

    #[test]
    fn centroid_of_bounding_box() {
        let o = geo(0.0, 30.0, -97.0, 10.0);
        let pts = vec![
            Waypoint::new(0.0, -10.0, 5.0, 10.0),
            Waypoint::new(1.0, 30.0, -15.0, 10.0),
            Waypoint::new(2.0, 0.0, 25.0, 10.0),
        ];
        let t = FlightTrace::new(o, pts).unwrap();
        assert_eq!(t.area_centroid(), Vec3::new(10.0, 5.0, 0.0));
    }
}
