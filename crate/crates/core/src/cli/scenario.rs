//! Scenario parameters shared by the `simulate` and `matrix` verbs.

use std::fmt;
use std::str::FromStr;

use crate::beamforming::{AntennaCombo, ArrayConfig, DEFAULT_UPDATE_PERIOD_S};
use crate::channel::{
    DEFAULT_DECORRELATION_DISTANCE_M, DEFAULT_NOISE_FIGURE_DB, DEFAULT_SHADOWING_SIGMA_DB, DEFAULT_TX_POWER_DBM,
};
use crate::error::{Error, Result};
use crate::geo_mobility::FlightTrace;
use crate::phy_mac::{Rat, RatProfile};
use crate::stack_sim::{
    boresight_towards, ScenarioConfig, DEFAULT_BS_HEIGHT_M, DEFAULT_BUFFER_LIMIT_BYTES, DEFAULT_HEADER_BYTES,
    DEFAULT_PAYLOAD_BYTES, DEFAULT_SNR_LOG_INTERVAL_S,
};
use crate::vec3::Vec3;

/// Horizontal offset of the distant base station from the mission area.
pub const DISTANT_BS_OFFSET_M: f64 = 2000.0;

pub const DEFAULT_WINDOW_S: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BsPlacement {
    /// Above the centre of the mission area.
    OnPremise,
    /// 2 km east of the centre.
    Distant2km,
}

impl BsPlacement {
    pub fn name(&self) -> &'static str {
        match self {
            BsPlacement::OnPremise => "on-premise",
            BsPlacement::Distant2km => "distant-2km",
        }
    }

    /// BS position and array boresight for a trace.
    pub fn locate(&self, trace: &FlightTrace) -> (Vec3, Vec3) {
        let centroid = trace.area_centroid();
        let offset = match self {
            BsPlacement::OnPremise => 0.0,
            BsPlacement::Distant2km => DISTANT_BS_OFFSET_M,
        };
        let position = Vec3::new(centroid.x + offset, centroid.y, DEFAULT_BS_HEIGHT_M);
        (position, boresight_towards(position, centroid))
    }
}

impl fmt::Display for BsPlacement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BsPlacement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "on-premise" => Ok(BsPlacement::OnPremise),
            "distant-2km" => Ok(BsPlacement::Distant2km),
            other => Err(Error::Config(format!("unknown BS placement {other:?}, expected on-premise or distant-2km"))),
        }
    }
}

/// Knobs of one simulated scenario, minus the trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioParams {
    pub rat: Rat,
    /// Ignored by the LTE profile, which uses single-element antennas.
    pub antennas: AntennaCombo,
    pub rate_mbps: f64,
    pub placement: BsPlacement,
    pub window_s: f64,
    pub seed: u64,
    pub tx_power_dbm: f64,
    pub noise_figure_db: f64,
    pub shadowing_sigma_db: f64,
    pub decorrelation_m: f64,
    pub buffer_bytes: u64,
    pub payload_bytes: u32,
    pub header_bytes: u32,
    pub beam_period_s: f64,
    pub snr_log_interval_s: f64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            rat: Rat::Mmwave,
            antennas: AntennaCombo::new(64, 16),
            rate_mbps: 1000.0,
            placement: BsPlacement::OnPremise,
            window_s: DEFAULT_WINDOW_S,
            seed: 1,
            tx_power_dbm: DEFAULT_TX_POWER_DBM,
            noise_figure_db: DEFAULT_NOISE_FIGURE_DB,
            shadowing_sigma_db: DEFAULT_SHADOWING_SIGMA_DB,
            decorrelation_m: DEFAULT_DECORRELATION_DISTANCE_M,
            buffer_bytes: DEFAULT_BUFFER_LIMIT_BYTES,
            payload_bytes: DEFAULT_PAYLOAD_BYTES,
            header_bytes: DEFAULT_HEADER_BYTES,
            beam_period_s: DEFAULT_UPDATE_PERIOD_S,
            snr_log_interval_s: DEFAULT_SNR_LOG_INTERVAL_S,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

impl ScenarioParams {
    /// The antenna combination actually simulated for this profile.
    pub fn effective_antennas(&self) -> AntennaCombo {
        match self.rat {
            Rat::Mmwave => self.antennas,
            Rat::Lte => AntennaCombo::new(1, 1),
        }
    }

    /// Applies one `key = value` setting. Returns `false` for keys this type
    /// does not own so callers can handle them.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "profile" => self.rat = value.parse()?,
            "antennas" => self.antennas = value.parse()?,
            "rate_mbps" => self.rate_mbps = parse_num(key, value)?,
            "bs" | "placement" => self.placement = value.parse()?,
            "window_s" => self.window_s = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "tx_power_dbm" => self.tx_power_dbm = parse_num(key, value)?,
            "noise_figure_db" => self.noise_figure_db = parse_num(key, value)?,
            "shadowing_sigma_db" => self.shadowing_sigma_db = parse_num(key, value)?,
            "decorrelation_m" => self.decorrelation_m = parse_num(key, value)?,
            "buffer_bytes" => self.buffer_bytes = parse_num(key, value)?,
            "payload_bytes" => self.payload_bytes = parse_num(key, value)?,
            "header_bytes" => self.header_bytes = parse_num(key, value)?,
            "beam_period_s" => self.beam_period_s = parse_num(key, value)?,
            "snr_log_interval_s" => self.snr_log_interval_s = parse_num(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn build(&self, trace: FlightTrace) -> Result<ScenarioConfig> {
        let combo = self.effective_antennas();
        let mut profile = RatProfile::for_rat(self.rat);
        profile.link.tx_power_dbm = self.tx_power_dbm;
        profile.link.noise_figure_db = self.noise_figure_db;
        let (bs_position, bs_boresight) = self.placement.locate(&trace);
        let mut cfg = ScenarioConfig::new(trace, profile, combo.bs_array()?, combo.uav_array()?);
        cfg.bs_position = bs_position;
        cfg.bs_boresight = bs_boresight;
        cfg.source_rate_bps = self.rate_mbps * 1e6;
        cfg.sim_window = self.window_s;
        cfg.seed = self.seed;
        cfg.shadowing_sigma_db = self.shadowing_sigma_db;
        cfg.shadowing_decorrelation_m = self.decorrelation_m;
        cfg.buffer_limit_bytes = self.buffer_bytes;
        cfg.payload_bytes = self.payload_bytes;
        cfg.header_bytes = self.header_bytes;
        cfg.beam_update_period = self.beam_period_s;
        cfg.snr_log_interval = self.snr_log_interval_s;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Arrays for an antenna combination string, e.g. `64x16` → (8×8, 4×4).
pub fn arrays_for(combo: &str) -> Result<(ArrayConfig, ArrayConfig)> {
    let c: AntennaCombo = combo.parse()?;
    Ok((c.bs_array()?, c.uav_array()?))
}
