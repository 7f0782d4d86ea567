//! Single-ray line-of-sight channel: free-space pathloss, correlated
//! log-normal shadowing, Doppler, and the uplink SNR budget.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geo_mobility::MobilityState;
use crate::vec3::Vec3;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Thermal noise power spectral density at 290 K, dBm/Hz.
pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;

/// Distances below this are clamped before evaluating pathloss.
pub const MIN_DISTANCE_M: f64 = 1.0;

pub const DEFAULT_TX_POWER_DBM: f64 = 30.0;
pub const DEFAULT_NOISE_FIGURE_DB: f64 = 5.0;
pub const DEFAULT_SHADOWING_SIGMA_DB: f64 = 4.0;
pub const DEFAULT_DECORRELATION_DISTANCE_M: f64 = 10.0;

/// Radio parameters of one end-to-end link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkProfile {
    pub carrier_freq_ghz: f64,
    pub bandwidth_hz: f64,
    pub tx_power_dbm: f64,
    pub noise_figure_db: f64,
}

impl LinkProfile {
    pub fn new(carrier_freq_ghz: f64, bandwidth_hz: f64, tx_power_dbm: f64, noise_figure_db: f64) -> Result<Self> {
        if !(carrier_freq_ghz > 0.0 && carrier_freq_ghz.is_finite()) {
            return Err(Error::validation(format!("carrier frequency must be positive, got {carrier_freq_ghz} GHz")));
        }
        if !(bandwidth_hz > 0.0 && bandwidth_hz.is_finite()) {
            return Err(Error::validation(format!("bandwidth must be positive, got {bandwidth_hz} Hz")));
        }
        Ok(Self { carrier_freq_ghz, bandwidth_hz, tx_power_dbm, noise_figure_db })
    }

    /// 28 GHz carrier, 1 GHz bandwidth.
    pub fn mmwave() -> Self {
        Self {
            carrier_freq_ghz: 28.0,
            bandwidth_hz: 1e9,
            tx_power_dbm: DEFAULT_TX_POWER_DBM,
            noise_figure_db: DEFAULT_NOISE_FIGURE_DB,
        }
    }

    /// 2.1 GHz carrier, 20 MHz bandwidth.
    pub fn lte() -> Self {
        Self {
            carrier_freq_ghz: 2.1,
            bandwidth_hz: 20e6,
            tx_power_dbm: DEFAULT_TX_POWER_DBM,
            noise_figure_db: DEFAULT_NOISE_FIGURE_DB,
        }
    }

    pub fn noise_floor_dbm(&self) -> f64 {
        noise_floor_dbm(self.bandwidth_hz, self.noise_figure_db)
    }
}

/// Receiver noise power in dBm.
pub fn noise_floor_dbm(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    THERMAL_NOISE_DBM_PER_HZ + 10.0 * bandwidth_hz.log10() + noise_figure_db
}

/// Free-space pathloss in dB for a 3-D distance in meters and a carrier in GHz.
pub fn fspl_db(distance_3d: f64, carrier_freq_ghz: f64) -> f64 {
    let d = distance_3d.max(MIN_DISTANCE_M);
    32.4 + 20.0 * d.log10() + 20.0 * carrier_freq_ghz.log10()
}

/// Doppler shift in Hz. Positive `radial_speed` means the terminals are closing.
pub fn doppler_shift(radial_speed: f64, carrier_freq_ghz: f64) -> f64 {
    radial_speed * carrier_freq_ghz * 1e9 / SPEED_OF_LIGHT
}

/// Spatially correlated log-normal shadowing along the flight path.
///
/// Realized as a first-order Gauss-Markov process indexed by travelled
/// distance: moving `Δd` meters from the previous query gives correlation
/// `exp(-Δd / decorrelation_distance)`. Values depend on the seed and on the
/// sequence of queried positions, so a run owns exactly one field.
#[derive(Debug, Clone)]
pub struct ShadowingField {
    sigma_db: f64,
    decorrelation_distance: f64,
    seed: u64,
    rng: ChaCha8Rng,
    last: Option<(Vec3, f64)>,
}

impl ShadowingField {
    pub fn new(sigma_db: f64, decorrelation_distance: f64, seed: u64) -> Result<Self> {
        if !(sigma_db >= 0.0 && sigma_db.is_finite()) {
            return Err(Error::validation(format!("shadowing sigma must be >= 0, got {sigma_db}")));
        }
        if !(decorrelation_distance > 0.0 && decorrelation_distance.is_finite()) {
            return Err(Error::validation(format!(
                "decorrelation distance must be positive, got {decorrelation_distance}"
            )));
        }
        Ok(Self { sigma_db, decorrelation_distance, seed, rng: ChaCha8Rng::seed_from_u64(seed), last: None })
    }

    /// A field that always returns 0 dB.
    pub fn disabled() -> Self {
        Self::new(0.0, DEFAULT_DECORRELATION_DISTANCE_M, 0).expect("valid constants")
    }

    pub fn sigma_db(&self) -> f64 {
        self.sigma_db
    }

    pub fn decorrelation_distance(&self) -> f64 {
        self.decorrelation_distance
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Shadowing loss in dB at `position`, advancing the process.
    pub fn shadowing_at(&mut self, position: Vec3) -> f64 {
        if self.sigma_db == 0.0 {
            return 0.0;
        }
        let value = match self.last {
            None => self.sigma_db * self.gaussian(),
            Some((prev_pos, prev)) => {
                let moved = (position - prev_pos).norm();
                if moved == 0.0 {
                    prev
                } else {
                    let rho = (-moved / self.decorrelation_distance).exp();
                    rho * prev + (1.0 - rho * rho).sqrt() * self.sigma_db * self.gaussian()
                }
            }
        };
        self.last = Some((position, value));
        value
    }

    fn gaussian(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}

/// Link state at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSample {
    pub t: f64,
    pub distance_3d: f64,
    pub pathloss_db: f64,
    pub shadowing_db: f64,
    pub doppler_shift_hz: f64,
    pub tx_gain_db: f64,
    pub rx_gain_db: f64,
    pub tx_power_dbm: f64,
    pub noise_floor_dbm: f64,
    pub snr_db: f64,
    /// Narrowband single-ray coefficient; Doppler enters only its phase.
    pub coefficient: Complex64,
}

impl ChannelSample {
    /// SNR re-derived from the sample's own budget terms.
    pub fn budget_snr_db(&self) -> f64 {
        link_budget_snr_db(
            self.tx_power_dbm,
            self.tx_gain_db,
            self.rx_gain_db,
            self.pathloss_db,
            self.shadowing_db,
            self.noise_floor_dbm,
        )
    }
}

pub fn link_budget_snr_db(
    tx_power_dbm: f64,
    tx_gain_db: f64,
    rx_gain_db: f64,
    pathloss_db: f64,
    shadowing_db: f64,
    noise_floor_dbm: f64,
) -> f64 {
    tx_power_dbm + tx_gain_db + rx_gain_db - pathloss_db - shadowing_db - noise_floor_dbm
}

/// Evaluates the channel between the UAV and the base station.
pub fn sample_channel(
    profile: &LinkProfile,
    ue_state: &MobilityState,
    bs_position: Vec3,
    tx_gain_db: f64,
    rx_gain_db: f64,
    field: &mut ShadowingField,
    t: f64,
) -> ChannelSample {
    let offset = ue_state.position - bs_position;
    let distance_3d = offset.norm();
    // Range rate is d|r|/dt; closing speed is its negative.
    let radial_speed = match offset.normalized() {
        Some(dir) => -ue_state.velocity.dot(dir),
        None => 0.0,
    };
    let pathloss_db = fspl_db(distance_3d, profile.carrier_freq_ghz);
    let shadowing_db = field.shadowing_at(ue_state.position);
    let doppler_shift_hz = doppler_shift(radial_speed, profile.carrier_freq_ghz);
    let noise_floor_dbm = profile.noise_floor_dbm();
    let snr_db =
        link_budget_snr_db(profile.tx_power_dbm, tx_gain_db, rx_gain_db, pathloss_db, shadowing_db, noise_floor_dbm);

    let amplitude = 10f64.powf((tx_gain_db + rx_gain_db - pathloss_db - shadowing_db) / 20.0);
    let wavelength = SPEED_OF_LIGHT / (profile.carrier_freq_ghz * 1e9);
    let phase = 2.0 * PI * doppler_shift_hz * t - 2.0 * PI * distance_3d.max(MIN_DISTANCE_M) / wavelength;
    let coefficient = Complex64::from_polar(amplitude, phase);

    ChannelSample {
        t,
        distance_3d,
        pathloss_db,
        shadowing_db,
        doppler_shift_hz,
        tx_gain_db,
        rx_gain_db,
        tx_power_dbm: profile.tx_power_dbm,
        noise_floor_dbm,
        snr_db,
        coefficient,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn still(position: Vec3) -> MobilityState {
        MobilityState { position, velocity: Vec3::ZERO }
    }

    #[test]
    fn fspl_reference_values() {
        assert!((fspl_db(1.0, 28.0) - 61.3431).abs() < 1e-3);
        assert!((fspl_db(100.0, 28.0) - 101.3431).abs() < 1e-3);
        assert!((fspl_db(100.0, 2.1) - 78.8443).abs() < 1e-3);
    }

    #[test]
    fn fspl_clamps_below_one_meter() {
        assert_eq!(fspl_db(0.2, 28.0), fspl_db(1.0, 28.0));
        assert_eq!(fspl_db(0.0, 28.0), fspl_db(1.0, 28.0));
    }

    #[test]
    fn fspl_doubling_adds_six_db() {
        let delta = fspl_db(400.0, 28.0) - fspl_db(200.0, 28.0);
        assert!((delta - 20.0 * 2f64.log10()).abs() < 1e-12);
        assert!((delta - 6.02).abs() < 5e-3);
    }

    #[test]
    fn doppler_reference_values() {
        assert_eq!(doppler_shift(0.0, 28.0), 0.0);
        assert!((doppler_shift(10.0, 28.0) - 933.96).abs() < 0.05);
        assert_eq!(doppler_shift(-10.0, 28.0), -doppler_shift(10.0, 28.0));
    }

    #[test]
    fn noise_floor_reference_values() {
        assert!((noise_floor_dbm(1e9, 5.0) - (-79.0)).abs() < 1e-9);
        assert!((noise_floor_dbm(20e6, 5.0) - (-95.9897)).abs() < 1e-3);
    }

    #[test]
    fn link_budget_example() {
        let profile = LinkProfile::mmwave();
        let bs = Vec3::new(0.0, 0.0, 25.0);
        let ue = still(Vec3::new(100.0, 0.0, 25.0));
        let mut field = ShadowingField::disabled();
        let s = sample_channel(&profile, &ue, bs, 18.0618, 12.0412, &mut field, 0.0);
        // 30 + 30.103 - 101.343 - 0 + 79.0
        assert!((s.snr_db - 37.76).abs() < 0.01, "snr = {}", s.snr_db);
        assert_eq!(s.snr_db, s.budget_snr_db());
    }

    #[test]
    fn degenerate_budget_is_tx_power_over_noise() {
        let profile = LinkProfile::lte();
        let snr = link_budget_snr_db(profile.tx_power_dbm, 0.0, 0.0, 0.0, 0.0, profile.noise_floor_dbm());
        assert!((snr - (30.0 + 95.9897)).abs() < 1e-3);
    }

    #[test]
    fn radial_speed_sign_follows_approach() {
        let profile = LinkProfile::mmwave();
        let bs = Vec3::ZERO;
        let mut field = ShadowingField::disabled();
        let approaching = MobilityState { position: Vec3::new(100.0, 0.0, 0.0), velocity: Vec3::new(-10.0, 0.0, 0.0) };
        let s = sample_channel(&profile, &approaching, bs, 0.0, 0.0, &mut field, 0.0);
        assert!((s.doppler_shift_hz - doppler_shift(10.0, 28.0)).abs() < 1e-9);
        let tangential = MobilityState { position: Vec3::new(100.0, 0.0, 0.0), velocity: Vec3::new(0.0, 10.0, 0.0) };
        let s = sample_channel(&profile, &tangential, bs, 0.0, 0.0, &mut field, 0.0);
        assert!(s.doppler_shift_hz.abs() < 1e-9);
    }

    #[test]
    fn doppler_rotates_phase_only() {
        let profile = LinkProfile::mmwave();
        let mut f1 = ShadowingField::new(4.0, 10.0, 3).unwrap();
        let mut f2 = ShadowingField::new(4.0, 10.0, 3).unwrap();
        let p = Vec3::new(80.0, 30.0, 30.0);
        let a = sample_channel(&profile, &still(p), Vec3::ZERO, 10.0, 5.0, &mut f1, 0.37);
        let moving = MobilityState { position: p, velocity: Vec3::new(-15.0, 2.0, 0.0) };
        let b = sample_channel(&profile, &moving, Vec3::ZERO, 10.0, 5.0, &mut f2, 0.37);
        assert_eq!(a.snr_db, b.snr_db);
        assert!((a.coefficient.norm() - b.coefficient.norm()).abs() < 1e-18);
        assert!(b.doppler_shift_hz != 0.0);
    }

    #[test]
    fn shadowing_repeat_query_is_stable() {
        let mut f = ShadowingField::new(4.0, 10.0, 7).unwrap();
        let p = Vec3::new(1.0, 2.0, 3.0);
        let a = f.shadowing_at(p);
        assert_eq!(a, f.shadowing_at(p));
    }

    #[test]
    fn shadowing_reproducible_per_seed() {
        let path: Vec<Vec3> = (0..200).map(|i| Vec3::new(i as f64 * 0.7, 0.0, 30.0)).collect();
        let run = |seed| {
            let mut f = ShadowingField::new(4.0, 10.0, seed).unwrap();
            path.iter().map(|&p| f.shadowing_at(p)).collect::<Vec<_>>()
        };
        assert_eq!(run(11), run(11));
        assert_ne!(run(11), run(12));
    }

    #[test]
    fn shadowing_invalid_parameters() {
        assert!(ShadowingField::new(-1.0, 10.0, 0).is_err());
        assert!(ShadowingField::new(4.0, 0.0, 0).is_err());
    }

    #[test]
    fn link_profile_validation() {
        assert!(LinkProfile::new(0.0, 1e9, 30.0, 5.0).is_err());
        assert!(LinkProfile::new(28.0, -1.0, 30.0, 5.0).is_err());
        assert!(LinkProfile::new(28.0, 1e9, 30.0, 5.0).is_ok());
    }
}
