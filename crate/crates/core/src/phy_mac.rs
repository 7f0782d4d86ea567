//! Link adaptation, transport-block sizing, block errors, and HARQ.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::LinkProfile;
use crate::error::{Error, Result};

/// Margin added to the Shannon-gap threshold of every MCS.
pub const IMPLEMENTATION_MARGIN_DB: f64 = 3.0;

/// Slope of the logistic BLER curve.
pub const BLER_SLOPE_DB: f64 = 0.5;

/// Distance of the BLER = 0.5 point below the MCS threshold, chosen so that
/// BLER(threshold) ≈ 0.1.
pub const BLER_MIDPOINT_OFFSET_DB: f64 = 1.1;

pub const BLER_FLOOR: f64 = 1e-6;

/// Peak PHY rates the per-profile efficiency factors are calibrated against.
pub const MMWAVE_PEAK_RATE_BPS: f64 = 3.2e9;
pub const LTE_PEAK_RATE_BPS: f64 = 75.2e6;

/// `(modulation order, code rate × 1024)` rows of the default table: the
/// lowest-rate QPSK entry followed by the 64-QAM NR table without its one
/// non-monotone 64-QAM row.
const DEFAULT_MCS_ROWS: [(u32, u32); 29] = [
    (2, 78),
    (2, 120),
    (2, 157),
    (2, 193),
    (2, 251),
    (2, 308),
    (2, 379),
    (2, 449),
    (2, 526),
    (2, 602),
    (2, 679),
    (4, 340),
    (4, 378),
    (4, 434),
    (4, 490),
    (4, 553),
    (4, 616),
    (4, 658),
    (6, 466),
    (6, 517),
    (6, 567),
    (6, 616),
    (6, 666),
    (6, 719),
    (6, 772),
    (6, 822),
    (6, 873),
    (6, 910),
    (6, 948),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McsEntry {
    pub index: usize,
    #[serde(rename = "mod_order")]
    pub modulation_order: u32,
    pub code_rate: f64,
    #[serde(rename = "se")]
    pub spectral_efficiency: f64,
    /// Lowest SNR at which BLER ≤ 0.1.
    #[serde(rename = "snr_threshold_db")]
    pub snr_threshold: f64,
}

impl McsEntry {
    /// Entry with the Shannon-gap threshold `10·log10(2^SE − 1) + margin`.
    pub fn with_shannon_threshold(index: usize, modulation_order: u32, code_rate: f64) -> Self {
        let spectral_efficiency = modulation_order as f64 * code_rate;
        let snr_threshold = 10.0 * (2f64.powf(spectral_efficiency) - 1.0).log10() + IMPLEMENTATION_MARGIN_DB;
        Self { index, modulation_order, code_rate, spectral_efficiency, snr_threshold }
    }
}

/// Non-empty MCS table with strictly increasing thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct McsTable {
    entries: Vec<McsEntry>,
}

impl McsTable {
    pub fn new(entries: Vec<McsEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::validation("MCS table is empty"));
        }
        for (i, e) in entries.iter().enumerate() {
            if e.index != i {
                return Err(Error::validation(format!("MCS row {i} has index {}", e.index)));
            }
            if !(e.spectral_efficiency >= 0.0 && e.spectral_efficiency.is_finite()) || e.snr_threshold.is_nan() {
                return Err(Error::validation(format!("MCS {i} has invalid efficiency or threshold")));
            }
            if (e.spectral_efficiency - e.modulation_order as f64 * e.code_rate).abs() > 1e-9 {
                return Err(Error::validation(format!(
                    "MCS {i}: spectral efficiency {} != {} x {}",
                    e.spectral_efficiency, e.modulation_order, e.code_rate
                )));
            }
        }
        if let Some(i) = entries.windows(2).position(|w| w[1].snr_threshold <= w[0].snr_threshold) {
            return Err(Error::validation(format!("MCS thresholds not strictly increasing at index {}", i + 1)));
        }
        Ok(Self { entries })
    }

    /// 29 entries from QPSK (SE 0.152) to 64-QAM r = 0.926 (SE 5.5547).
    pub fn standard() -> Self {
        let entries = DEFAULT_MCS_ROWS
            .iter()
            .enumerate()
            .map(|(i, &(m, r))| McsEntry::with_shannon_threshold(i, m, r as f64 / 1024.0))
            .collect();
        Self::new(entries).expect("default table is valid")
    }

    pub fn entries(&self) -> &[McsEntry] {
        &self.entries
    }

    pub fn top(&self) -> &McsEntry {
        &self.entries[self.entries.len() - 1]
    }

    pub fn lowest(&self) -> &McsEntry {
        &self.entries[0]
    }

    /// Highest entry whose threshold is at or below `snr_db`; `None` is outage.
    pub fn select(&self, snr_db: f64) -> Option<&McsEntry> {
        select_mcs(&self.entries, snr_db)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for e in &self.entries {
            w.serialize(e)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut entries = Vec::new();
        for row in r.deserialize::<McsEntry>() {
            let row =
                row.map_err(|e| Error::Parse { line: e.position().map_or(0, |p| p.line()), message: e.to_string() })?;
            entries.push(row);
        }
        Self::new(entries)
    }
}

/// Highest-index entry with `snr_threshold <= snr_db` from a table sorted by threshold.
pub fn select_mcs(table: &[McsEntry], snr_db: f64) -> Option<&McsEntry> {
    let n = table.partition_point(|e| e.snr_threshold <= snr_db);
    n.checked_sub(1).map(|i| &table[i])
}

/// Block error probability of `mcs` at `snr_db`.
pub fn bler(mcs: &McsEntry, snr_db: f64) -> f64 {
    let midpoint = mcs.snr_threshold - BLER_MIDPOINT_OFFSET_DB;
    let p = 1.0 / (1.0 + ((snr_db - midpoint) / BLER_SLOPE_DB).exp());
    p.clamp(BLER_FLOOR, 1.0 - BLER_FLOOR)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rat {
    Mmwave,
    Lte,
}

impl fmt::Display for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rat::Mmwave => "mmwave",
            Rat::Lte => "lte",
        })
    }
}

impl FromStr for Rat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mmwave" => Ok(Rat::Mmwave),
            "lte" => Ok(Rat::Lte),
            other => Err(Error::Config(format!("unknown profile {other:?}, expected mmwave or lte"))),
        }
    }
}

/// Radio access technology parameters driving the MAC.
#[derive(Debug, Clone, PartialEq)]
pub struct RatProfile {
    pub rat: Rat,
    pub link: LinkProfile,
    pub slot_duration: f64,
    /// Fraction of `SE × B` left after control and reference-signal overhead.
    pub efficiency_factor: f64,
    pub harq_rtt_slots: u64,
    pub max_harq_tx: u32,
    /// Access delay added before a packet's first transmission.
    pub scheduling_delay: f64,
    pub mcs_table: McsTable,
}

impl RatProfile {
    /// 125 µs slots, efficiency calibrated to a 3.2 Gbps peak.
    pub fn mmwave() -> Self {
        let link = LinkProfile::mmwave();
        let mcs_table = McsTable::standard();
        Self {
            rat: Rat::Mmwave,
            efficiency_factor: calibrated_efficiency(&mcs_table, link.bandwidth_hz, MMWAVE_PEAK_RATE_BPS),
            link,
            slot_duration: 125e-6,
            harq_rtt_slots: 4,
            max_harq_tx: 3,
            scheduling_delay: 0.0,
            mcs_table,
        }
    }

    /// 1 ms TTI, 4 ms request/grant delay, efficiency calibrated to a 75.2 Mbps peak.
    pub fn lte() -> Self {
        let link = LinkProfile::lte();
        let mcs_table = McsTable::standard();
        Self {
            rat: Rat::Lte,
            efficiency_factor: calibrated_efficiency(&mcs_table, link.bandwidth_hz, LTE_PEAK_RATE_BPS),
            link,
            slot_duration: 1e-3,
            harq_rtt_slots: 4,
            max_harq_tx: 3,
            scheduling_delay: 4e-3,
            mcs_table,
        }
    }

    pub fn for_rat(rat: Rat) -> Self {
        match rat {
            Rat::Mmwave => Self::mmwave(),
            Rat::Lte => Self::lte(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.efficiency_factor > 0.0 && self.efficiency_factor <= 1.0) {
            return Err(Error::validation(format!("efficiency factor {} outside (0, 1]", self.efficiency_factor)));
        }
        if !(self.slot_duration > 0.0 && self.slot_duration.is_finite()) {
            return Err(Error::validation(format!("slot duration must be positive, got {}", self.slot_duration)));
        }
        if self.max_harq_tx == 0 {
            return Err(Error::validation("max_harq_tx must be >= 1"));
        }
        if !(self.scheduling_delay >= 0.0 && self.scheduling_delay.is_finite()) {
            return Err(Error::validation("scheduling delay must be >= 0"));
        }
        LinkProfile::new(
            self.link.carrier_freq_ghz,
            self.link.bandwidth_hz,
            self.link.tx_power_dbm,
            self.link.noise_figure_db,
        )?;
        Ok(())
    }

    /// Highest PHY rate the profile can deliver, bits/s.
    pub fn peak_rate_bps(&self) -> f64 {
        tb_bits(self, self.mcs_table.top()) as f64 / self.slot_duration
    }
}

/// Efficiency factor that makes the top MCS deliver `peak_rate_bps`.
pub fn calibrated_efficiency(table: &McsTable, bandwidth_hz: f64, peak_rate_bps: f64) -> f64 {
    peak_rate_bps / (table.top().spectral_efficiency * bandwidth_hz)
}

/// Transport-block capacity of one slot at `mcs`.
pub fn tb_bits(profile: &RatProfile, mcs: &McsEntry) -> u64 {
    let bits = mcs.spectral_efficiency * profile.link.bandwidth_hz * profile.slot_duration * profile.efficiency_factor;
    // Absorb representation error so calibrated products land on whole bits.
    (bits + 1e-6).floor().max(0.0) as u64
}

/// PHY payload unit of one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransportBlock {
    pub bits: u64,
    pub mcs: usize,
    pub created_slot: u64,
    pub tx_count: u32,
}

impl TransportBlock {
    pub fn new(bits: u64, mcs: usize, created_slot: u64) -> Self {
        Self { bits, mcs, created_slot, tx_count: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HarqOutcome {
    /// Decoded in this slot.
    Delivered { slot: u64 },
    /// Failed; try again in `slot`.
    Retransmit { slot: u64 },
    /// Failed for the `max_harq_tx`-th time.
    Dropped,
}

/// One transmission attempt of `tb` in `current_slot`. Succeeds iff `draw >= bler`.
pub fn harq_step(
    tb: &mut TransportBlock,
    block_error_rate: f64,
    draw: f64,
    current_slot: u64,
    profile: &RatProfile,
) -> HarqOutcome {
    debug_assert!(tb.tx_count < profile.max_harq_tx, "transport block already exhausted its attempts");
    tb.tx_count += 1;
    if draw >= block_error_rate {
        HarqOutcome::Delivered { slot: current_slot }
    } else if tb.tx_count >= profile.max_harq_tx {
        HarqOutcome::Dropped
    } else {
        HarqOutcome::Retransmit { slot: current_slot + profile.harq_rtt_slots }
    }
}
