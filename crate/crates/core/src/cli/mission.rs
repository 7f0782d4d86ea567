//! Synthetic mission traces standing in for recorded flight logs.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geo_mobility::{FlightTrace, GeoPoint, Waypoint};

/// Upper speed bound for small multirotor UAVs.
pub const MAX_UAV_SPEED: f64 = 20.0;

/// Geodetic anchor of synthetic traces (Austin, TX).
pub const SYNTHETIC_ORIGIN_LAT: f64 = 30.2672;
pub const SYNTHETIC_ORIGIN_LON: f64 = -97.7431;

/// Time offset of the duplicated point in a zero-duration trace.
pub const DEGENERATE_TRACE_EPSILON_S: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MissionKind {
    /// Circle around the area centroid (crowd overwatch).
    OverwatchOrbit,
    /// Boustrophedon sweep (missing-person search).
    SearchLawnmower,
    /// Closed polygon loop along the perimeter (prescribed burn).
    PerimeterPatrol,
    /// Smoothed pursuit of a randomly wandering target (boat escort).
    TargetFollow,
}

impl MissionKind {
    pub const ALL: [MissionKind; 4] = [
        MissionKind::OverwatchOrbit,
        MissionKind::SearchLawnmower,
        MissionKind::PerimeterPatrol,
        MissionKind::TargetFollow,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MissionKind::OverwatchOrbit => "overwatch_orbit",
            MissionKind::SearchLawnmower => "search_lawnmower",
            MissionKind::PerimeterPatrol => "perimeter_patrol",
            MissionKind::TargetFollow => "target_follow",
        }
    }
}

impl fmt::Display for MissionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MissionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        MissionKind::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| Error::Config(format!("unknown mission {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MissionArchetype {
    pub kind: MissionKind,
    /// Square mission area, m².
    pub area_m2: f64,
    pub speed: f64,
    pub altitude: f64,
    pub duration: f64,
}

impl MissionArchetype {
    /// 300 m × 300 m area, 5 m/s at 30 m for 10 minutes.
    pub fn new(kind: MissionKind) -> Self {
        Self { kind, area_m2: 300.0 * 300.0, speed: 5.0, altitude: 30.0, duration: 600.0 }
    }

    pub fn side(&self) -> f64 {
        self.area_m2.sqrt()
    }

    /// Orbit radius: a third of the area side (100 m by default).
    pub fn orbit_radius(&self) -> f64 {
        self.side() / 3.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.area_m2 > 0.0 && self.area_m2.is_finite()) {
            return Err(Error::validation(format!("mission area must be positive, got {}", self.area_m2)));
        }
        if !(self.speed > 0.0 && self.speed <= MAX_UAV_SPEED) {
            return Err(Error::validation(format!("speed {} outside (0, {MAX_UAV_SPEED}] m/s", self.speed)));
        }
        if !(self.altitude > 0.0 && self.altitude.is_finite()) {
            return Err(Error::validation(format!("altitude must be positive, got {}", self.altitude)));
        }
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(Error::validation(format!("duration must be >= 0, got {}", self.duration)));
        }
        Ok(())
    }
}

/// Point at arc length `s` along a polyline (clamped to its ends).
fn point_along(poly: &[(f64, f64)], mut s: f64) -> (f64, f64) {
    for w in poly.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = (b.0 - a.0).hypot(b.1 - a.1);
        if s <= len {
            let f = if len > 0.0 { s / len } else { 0.0 };
            return (a.0 + f * (b.0 - a.0), a.1 + f * (b.1 - a.1));
        }
        s -= len;
    }
    poly[poly.len() - 1]
}

fn polyline_length(poly: &[(f64, f64)]) -> f64 {
    poly.windows(2).map(|w| (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1)).sum()
}

fn lawnmower_path(side: f64) -> Vec<(f64, f64)> {
    const LANES: usize = 6;
    let half = 0.45 * side;
    let mut path = Vec::with_capacity(2 * LANES);
    for i in 0..LANES {
        let y = -half + 2.0 * half * i as f64 / (LANES - 1) as f64;
        let (x0, x1) = if i % 2 == 0 { (-half, half) } else { (half, -half) };
        path.push((x0, y));
        path.push((x1, y));
    }
    path
}

fn perimeter_path(side: f64) -> Vec<(f64, f64)> {
    let h = 0.4 * side;
    vec![(-h, -h), (h, -h), (h, h), (-h, h), (-h, -h)]
}

/// Horizontal positions at each sample time, centred on the area centroid.
fn horizontal_track(arch: &MissionArchetype, times: &[f64], seed: u64) -> Vec<(f64, f64)> {
    let side = arch.side();
    match arch.kind {
        MissionKind::OverwatchOrbit => {
            let r = arch.orbit_radius();
            let omega = arch.speed / r;
            times.iter().map(|&t| (r * (omega * t).cos(), r * (omega * t).sin())).collect()
        }
        MissionKind::SearchLawnmower => {
            // Sweep, then retrace the sweep backwards, and repeat.
            let path = lawnmower_path(side);
            let len = polyline_length(&path);
            times
                .iter()
                .map(|&t| {
                    let d = (arch.speed * t) % (2.0 * len);
                    point_along(&path, if d <= len { d } else { 2.0 * len - d })
                })
                .collect()
        }
        MissionKind::PerimeterPatrol => {
            let path = perimeter_path(side);
            let len = polyline_length(&path);
            times.iter().map(|&t| point_along(&path, (arch.speed * t) % len)).collect()
        }
        MissionKind::TargetFollow => follow_track(arch, times, seed),
    }
}

fn follow_track(arch: &MissionArchetype, times: &[f64], seed: u64) -> Vec<(f64, f64)> {
    const SMOOTHING: f64 = 0.3;
    let half = 0.45 * arch.side();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let turn = Normal::new(0.0, 0.3).expect("valid sigma");
    let target_speed = 0.6 * arch.speed;
    let mut heading = rng.gen_range(-PI..PI);
    let (mut tx, mut ty) = (0.0f64, 0.0f64);
    let (mut ux, mut uy) = (0.0f64, 0.0f64);
    let mut out = Vec::with_capacity(times.len());
    let mut prev_t = times.first().copied().unwrap_or(0.0);
    for &t in times {
        let dt = t - prev_t;
        prev_t = t;
        if dt > 0.0 {
            heading += turn.sample(&mut rng) * dt.sqrt();
            tx += target_speed * heading.cos() * dt;
            ty += target_speed * heading.sin() * dt;
            // Reflect off the area boundary.
            if tx.abs() > half {
                tx = tx.signum() * (2.0 * half - tx.abs());
                heading = PI - heading;
            }
            if ty.abs() > half {
                ty = ty.signum() * (2.0 * half - ty.abs());
                heading = -heading;
            }
            let (mut dx, mut dy) = (SMOOTHING * (tx - ux), SMOOTHING * (ty - uy));
            let step = dx.hypot(dy);
            let max_step = arch.speed * dt;
            if step > max_step {
                dx *= max_step / step;
                dy *= max_step / step;
            }
            ux += dx;
            uy += dy;
        }
        out.push((ux, uy));
    }
    out
}

/// Deterministic 1 Hz waypoint trace for `arch`. The local origin is the
/// area centroid; `seed` only affects [`MissionKind::TargetFollow`].
pub fn synth_trace(arch: &MissionArchetype, seed: u64) -> Result<FlightTrace> {
    arch.validate()?;
    let mut times: Vec<f64> = (0..=arch.duration.floor() as u64).map(|s| s as f64).collect();
    if arch.duration > times[times.len() - 1] {
        times.push(arch.duration);
    }
    if times.len() < 2 {
        times.push(DEGENERATE_TRACE_EPSILON_S);
    }
    let mut track = horizontal_track(arch, &times, seed);
    if arch.duration == 0.0 {
        track[1] = track[0];
    }
    let points = times.iter().zip(track).map(|(&t, (x, y))| Waypoint::new(t, x, y, arch.altitude)).collect();
    let origin = GeoPoint::new(0.0, SYNTHETIC_ORIGIN_LAT, SYNTHETIC_ORIGIN_LON, arch.altitude)?;
    FlightTrace::new(origin, points)
}
