//! Uniform planar arrays, DFT codebooks, and periodic beam tracking.
//!
//! Element `(p, q)` sits at column `p` (horizontal axis) and row `q`
//! (vertical axis) and is stored at flat index `q * n_h + p`. Beam `(k, l)`
//! of the DFT codebook is stored at index `l * n_h + k`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::vec3::Vec3;

pub const DEFAULT_ELEMENT_SPACING: f64 = 0.5;

/// Gain reported for beams with (numerically) zero response.
pub const GAIN_FLOOR_DB: f64 = -200.0;

/// Period between genie-aided beam-pair refreshes.
pub const DEFAULT_UPDATE_PERIOD_S: f64 = 5e-3;

/// Planar array geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayConfig {
    pub n_h: usize,
    pub n_v: usize,
    /// Element spacing in wavelengths.
    pub spacing: f64,
}

impl ArrayConfig {
    pub fn new(n_h: usize, n_v: usize) -> Result<Self> {
        if n_h == 0 || n_v == 0 {
            return Err(Error::validation(format!("array dimensions must be >= 1, got {n_h}x{n_v}")));
        }
        Ok(Self { n_h, n_v, spacing: DEFAULT_ELEMENT_SPACING })
    }

    /// Most nearly square `n_h × n_v` factorization with `n_h >= n_v`
    /// (64 → 8×8, 16 → 4×4, 4 → 2×2, 8 → 4×2).
    pub fn from_total(elements: usize) -> Result<Self> {
        if elements == 0 {
            return Err(Error::validation("array needs at least one element"));
        }
        let mut n_v = (elements as f64).sqrt().floor() as usize;
        while !elements.is_multiple_of(n_v) {
            n_v -= 1;
        }
        Self::new(elements / n_v, n_v)
    }

    pub fn len(&self) -> usize {
        self.n_h * self.n_v
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// LOS direction in an array's local frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    /// Radians in (−π, π], measured from boresight towards the horizontal axis.
    pub azimuth: f64,
    /// Radians in [−π/2, π/2], towards the vertical axis.
    pub elevation: f64,
}

impl Geometry {
    pub fn new(azimuth: f64, elevation: f64) -> Result<Self> {
        if !(azimuth > -PI && azimuth <= PI) {
            return Err(Error::validation(format!("azimuth {azimuth} outside (-pi, pi]")));
        }
        if !(-PI / 2.0..=PI / 2.0).contains(&elevation) {
            return Err(Error::validation(format!("elevation {elevation} outside [-pi/2, pi/2]")));
        }
        Ok(Self { azimuth, elevation })
    }

    pub const BORESIGHT: Geometry = Geometry { azimuth: 0.0, elevation: 0.0 };

    /// Direction cosines along the horizontal and vertical array axes.
    fn axis_cosines(&self) -> (f64, f64) {
        (self.azimuth.sin() * self.elevation.cos(), self.elevation.sin())
    }
}

/// Orientation of an array in the world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayFrame {
    pub boresight: Vec3,
    pub horizontal: Vec3,
    pub vertical: Vec3,
}

impl ArrayFrame {
    /// Right-handed frame around `boresight`. The horizontal axis lies in the
    /// ground plane; a vertical boresight uses world +x.
    pub fn facing(boresight: Vec3) -> Result<Self> {
        let b = boresight.normalized().ok_or_else(|| Error::validation("array boresight must be non-zero"))?;
        let up = Vec3::new(0.0, 0.0, 1.0);
        let horizontal = up.cross(b).normalized().unwrap_or(Vec3::new(1.0, 0.0, 0.0));
        let vertical = b.cross(horizontal);
        Ok(Self { boresight: b, horizontal, vertical })
    }

    /// Array pointing straight down at the ground.
    pub fn nadir() -> Self {
        Self::facing(Vec3::new(0.0, 0.0, -1.0)).expect("non-zero boresight")
    }

    /// Local angles of the world-frame direction `towards`.
    pub fn geometry_of(&self, towards: Vec3) -> Geometry {
        let Some(d) = towards.normalized() else {
            return Geometry::BORESIGHT;
        };
        let (ub, uh, uv) = (d.dot(self.boresight), d.dot(self.horizontal), d.dot(self.vertical));
        let mut azimuth = uh.atan2(ub);
        if azimuth <= -PI {
            azimuth = PI;
        }
        Geometry { azimuth, elevation: uv.clamp(-1.0, 1.0).asin() }
    }
}

/// One codebook entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Beam {
    pub index: usize,
    pub weights: Vec<Complex64>,
}

/// Beams in use on the uplink: the UAV transmits and the BS receives.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamPair {
    pub tx_beam: Beam,
    pub rx_beam: Beam,
    pub selected_at: f64,
}

/// `BS×UAV` element totals, written `64x16`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AntennaCombo {
    pub bs_elements: usize,
    pub uav_elements: usize,
}

impl AntennaCombo {
    pub const fn new(bs_elements: usize, uav_elements: usize) -> Self {
        Self { bs_elements, uav_elements }
    }

    pub fn bs_array(&self) -> Result<ArrayConfig> {
        ArrayConfig::from_total(self.bs_elements)
    }

    pub fn uav_array(&self) -> Result<ArrayConfig> {
        ArrayConfig::from_total(self.uav_elements)
    }
}

impl fmt::Display for AntennaCombo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.bs_elements, self.uav_elements)
    }
}

impl FromStr for AntennaCombo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("antenna combination must look like 64x16, got {s:?}"));
        let (bs, uav) = s.trim().split_once(['x', 'X', '×']).ok_or_else(bad)?;
        let bs: usize = bs.trim().parse().map_err(|_| bad())?;
        let uav: usize = uav.trim().parse().map_err(|_| bad())?;
        if bs == 0 || uav == 0 {
            return Err(bad());
        }
        Ok(Self::new(bs, uav))
    }
}

/// Unit-norm array response towards `geom`.
pub fn steering_vector(array: &ArrayConfig, geom: &Geometry) -> Vec<Complex64> {
    let (uh, uv) = geom.axis_cosines();
    let scale = 1.0 / (array.len() as f64).sqrt();
    let mut v = Vec::with_capacity(array.len());
    for q in 0..array.n_v {
        for p in 0..array.n_h {
            let phase = 2.0 * PI * array.spacing * (p as f64 * uh + q as f64 * uv);
            v.push(Complex64::from_polar(scale, phase));
        }
    }
    v
}

/// Orthonormal 2-D DFT beams, one per element.
pub fn dft_codebook(array: &ArrayConfig) -> Vec<Beam> {
    let scale = 1.0 / (array.len() as f64).sqrt();
    let mut beams = Vec::with_capacity(array.len());
    for l in 0..array.n_v {
        for k in 0..array.n_h {
            let mut weights = Vec::with_capacity(array.len());
            for q in 0..array.n_v {
                for p in 0..array.n_h {
                    let phase = 2.0 * PI * ((p * k) as f64 / array.n_h as f64 + (q * l) as f64 / array.n_v as f64);
                    weights.push(Complex64::from_polar(scale, phase));
                }
            }
            beams.push(Beam { index: l * array.n_h + k, weights });
        }
    }
    beams
}

/// `Σ conj(w_i)·v_i`.
pub fn inner_product(w: &[Complex64], v: &[Complex64]) -> Complex64 {
    w.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

fn gain_db_from_response(elements: usize, weights: &[Complex64], steering: &[Complex64]) -> f64 {
    let linear = elements as f64 * inner_product(weights, steering).norm_sqr();
    if linear > 0.0 {
        (10.0 * linear.log10()).max(GAIN_FLOOR_DB)
    } else {
        GAIN_FLOOR_DB
    }
}

/// Array gain of `beam` towards `geom`, in dB relative to one element.
pub fn beam_gain_db(array: &ArrayConfig, beam: &Beam, geom: &Geometry) -> f64 {
    gain_db_from_response(array.len(), &beam.weights, &steering_vector(array, geom))
}

/// An array together with its DFT codebook.
#[derive(Debug, Clone)]
pub struct Codebook {
    array: ArrayConfig,
    beams: Vec<Beam>,
}

impl Codebook {
    pub fn dft(array: ArrayConfig) -> Self {
        Self { beams: dft_codebook(&array), array }
    }

    pub fn array(&self) -> &ArrayConfig {
        &self.array
    }

    pub fn beams(&self) -> &[Beam] {
        &self.beams
    }

    /// Gain of every beam towards `geom`, indexed like [`Self::beams`].
    pub fn gains_db(&self, geom: &Geometry) -> Vec<f64> {
        let steering = steering_vector(&self.array, geom);
        self.beams.iter().map(|b| gain_db_from_response(self.array.len(), &b.weights, &steering)).collect()
    }
}

/// Exhaustive search over all `N_BS·N_UAV` pairs for the largest combined
/// gain. Exact ties go to the lowest `(tx index, rx index)`.
pub fn best_beam_pair(bs: &Codebook, uav: &Codebook, bs_geom: &Geometry, uav_geom: &Geometry, t: f64) -> BeamPair {
    let rx_gains = bs.gains_db(bs_geom);
    let tx_gains = uav.gains_db(uav_geom);
    let mut best = (0usize, 0usize, f64::NEG_INFINITY);
    for (tx, g_tx) in tx_gains.iter().enumerate() {
        for (rx, g_rx) in rx_gains.iter().enumerate() {
            let combined = g_tx + g_rx;
            if combined > best.2 {
                best = (tx, rx, combined);
            }
        }
    }
    BeamPair { tx_beam: uav.beams[best.0].clone(), rx_beam: bs.beams[best.1].clone(), selected_at: t }
}

/// Periodic beam tracking: the pair is refreshed at every multiple of the
/// update period and held (possibly misaligned) in between.
#[derive(Debug, Clone)]
pub struct BeamTracker {
    bs: Codebook,
    uav: Codebook,
    period: f64,
    pair: BeamPair,
    epoch: u64,
    refreshes: u64,
}

impl BeamTracker {
    /// Selects the initial pair at `t = 0`.
    pub fn new(bs: Codebook, uav: Codebook, period: f64, bs_geom: &Geometry, uav_geom: &Geometry) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::validation(format!("beam update period must be positive, got {period}")));
        }
        let pair = best_beam_pair(&bs, &uav, bs_geom, uav_geom, 0.0);
        Ok(Self { bs, uav, period, pair, epoch: 0, refreshes: 1 })
    }

    pub fn pair(&self) -> &BeamPair {
        &self.pair
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Number of beam-pair selections performed so far, including the initial one.
    pub fn refreshes(&self) -> u64 {
        self.refreshes
    }

    pub fn bs_codebook(&self) -> &Codebook {
        &self.bs
    }

    pub fn uav_codebook(&self) -> &Codebook {
        &self.uav
    }

    /// `(tx_gain, rx_gain)` in dB at time `t` for the true geometry.
    pub fn tracked_gains(&mut self, t: f64, bs_geom: &Geometry, uav_geom: &Geometry) -> (f64, f64) {
        // Tolerance keeps t = k·period on the k-th epoch despite rounding.
        let epoch = (t / self.period + 1e-9).floor().max(0.0) as u64;
        if epoch > self.epoch {
            self.epoch = epoch;
            self.pair = best_beam_pair(&self.bs, &self.uav, bs_geom, uav_geom, epoch as f64 * self.period);
            self.refreshes += 1;
        }
        let tx = gain_db_from_response(
            self.uav.array.len(),
            &self.pair.tx_beam.weights,
            &steering_vector(&self.uav.array, uav_geom),
        );
        let rx = gain_db_from_response(
            self.bs.array.len(),
            &self.pair.rx_beam.weights,
            &steering_vector(&self.bs.array, bs_geom),
        );
        (tx, rx)
    }
}
