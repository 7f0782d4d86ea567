//! Summary rows: machine CSV and an aligned text table.

use std::fmt::{self, Display};
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::beamforming::AntennaCombo;
use crate::error::{Error, Result};
use crate::phy_mac::Rat;
use crate::stack_sim::Summary;

use super::scenario::BsPlacement;

pub const CSV_HEADER: &str =
    "mission,profile,antennas,rate_mbps,placement,throughput_mbps,mean_latency_ms,p99_latency_ms,loss_frac";

fn as_string<T: Display, S: Serializer>(v: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

fn from_string<'de, T, D>(d: D) -> std::result::Result<T, D::Error>
where
    T: FromStr,
    T::Err: Display,
    D: Deserializer<'de>,
{
    let s = String::deserialize(d)?;
    s.parse().map_err(serde::de::Error::custom)
}

/// One line of the mission × profile × antennas result grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub mission: String,
    pub profile: Rat,
    #[serde(serialize_with = "as_string", deserialize_with = "from_string")]
    pub antennas: AntennaCombo,
    pub rate_mbps: f64,
    #[serde(serialize_with = "as_string", deserialize_with = "from_string")]
    pub placement: BsPlacement,
    pub throughput_mbps: f64,
    pub mean_latency_ms: f64,
    pub p99_latency_ms: f64,
    pub loss_frac: f64,
}

impl SummaryRow {
    pub fn new(
        mission: impl Into<String>,
        profile: Rat,
        antennas: AntennaCombo,
        rate_mbps: f64,
        placement: BsPlacement,
        summary: &Summary,
    ) -> Self {
        Self {
            mission: mission.into(),
            profile,
            antennas,
            rate_mbps,
            placement,
            throughput_mbps: summary.throughput_bps / 1e6,
            mean_latency_ms: summary.mean_latency * 1e3,
            p99_latency_ms: summary.p99_latency * 1e3,
            loss_frac: summary.loss_fraction,
        }
    }
}

pub fn write_csv<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<SummaryRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::Parse { line: 1, message: format!("unexpected summary header {:?}", header.join(",")) });
    }
    let mut rows = Vec::new();
    for r in rdr.deserialize() {
        rows.push(r?);
    }
    Ok(rows)
}

/// Aligned human-readable rendering of `rows`.
pub struct Table<'a>(pub &'a [SummaryRow]);

impl Display for Table<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let head =
            ["mission", "profile", "antennas", "rate Mbps", "placement", "thr Mbps", "mean ms", "p99 ms", "loss"];
        let cells: Vec<[String; 9]> = self
            .0
            .iter()
            .map(|r| {
                [
                    r.mission.clone(),
                    r.profile.to_string(),
                    r.antennas.to_string(),
                    format!("{}", r.rate_mbps),
                    r.placement.to_string(),
                    format!("{:.1}", r.throughput_mbps),
                    format!("{:.3}", r.mean_latency_ms),
                    format!("{:.3}", r.p99_latency_ms),
                    format!("{:.4}", r.loss_frac),
                ]
            })
            .collect();
        let mut width = head.map(str::len);
        for row in &cells {
            for (w, c) in width.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        // Text columns left-aligned, numbers right-aligned.
        let line = |f: &mut fmt::Formatter<'_>, row: &[&str]| -> fmt::Result {
            let mut parts = Vec::with_capacity(row.len());
            for (i, (c, w)) in row.iter().zip(width).enumerate() {
                parts.push(match i {
                    0 | 1 | 2 | 4 => format!("{c:<w$}"),
                    _ => format!("{c:>w$}"),
                });
            }
            writeln!(f, "{}", parts.join("  ").trim_end())
        };
        line(f, &head)?;
        let rule: Vec<String> = width.iter().map(|w| "-".repeat(*w)).collect();
        writeln!(f, "{}", rule.join("  "))?;
        for row in &cells {
            let refs: Vec<&str> = row.iter().map(String::as_str).collect();
            line(f, &refs)?;
        }
        Ok(())
    }
}
