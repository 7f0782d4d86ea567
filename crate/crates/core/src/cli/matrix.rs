//! Batch execution over missions × profiles × antennas × rates × placements × seeds.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::beamforming::AntennaCombo;
use crate::error::{Error, Result};
use crate::phy_mac::Rat;
use crate::stack_sim::{latency_series, pdcp_throughput, run, MetricsLog};

use super::config::{split_list, ConfigFile};
use super::mission::{synth_trace, MissionArchetype, MissionKind};
use super::report::{self, SummaryRow, Table};
use super::scenario::{BsPlacement, ScenarioParams};

pub const THROUGHPUT_BIN_S: f64 = 1.0;
pub const LATENCY_BIN_S: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RunMatrix {
    pub missions: Vec<MissionArchetype>,
    pub profiles: Vec<Rat>,
    pub antenna_combos: Vec<AntennaCombo>,
    pub source_rates_mbps: Vec<f64>,
    pub bs_placements: Vec<BsPlacement>,
    pub seeds: Vec<u64>,
    /// Settings shared by every cell; the axes above override its fields.
    pub base: ScenarioParams,
    /// Also write one CSV row per packet. Large at high rates.
    pub packet_logs: bool,
}

impl Default for RunMatrix {
    fn default() -> Self {
        Self {
            missions: MissionKind::ALL.iter().map(|k| MissionArchetype::new(*k)).collect(),
            profiles: vec![Rat::Mmwave, Rat::Lte],
            antenna_combos: vec![AntennaCombo::new(16, 4), AntennaCombo::new(64, 16)],
            source_rates_mbps: vec![1000.0],
            bs_placements: vec![BsPlacement::OnPremise],
            seeds: vec![1],
            base: ScenarioParams::default(),
            packet_logs: false,
        }
    }
}

/// One point of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub mission: MissionArchetype,
    pub params: ScenarioParams,
}

impl Cell {
    /// File-system friendly identifier, unique within a matrix.
    pub fn id(&self) -> String {
        let p = &self.params;
        format!(
            "{}_{}_{}_{}mbps_{}_s{}",
            self.mission.kind,
            p.rat,
            p.effective_antennas(),
            p.rate_mbps,
            p.placement,
            p.seed
        )
    }

    pub fn run(&self) -> Result<MetricsLog> {
        let trace = synth_trace(&self.mission, self.params.seed)?;
        run(&self.params.build(trace)?)
    }

    pub fn summary_row(&self, log: &MetricsLog) -> SummaryRow {
        let p = &self.params;
        SummaryRow::new(self.mission.kind.name(), p.rat, p.effective_antennas(), p.rate_mbps, p.placement, &log.summary)
    }
}

impl RunMatrix {
    pub fn validate(&self) -> Result<()> {
        let axes = [
            ("missions", self.missions.len()),
            ("profiles", self.profiles.len()),
            ("antenna_combos", self.antenna_combos.len()),
            ("source_rates", self.source_rates_mbps.len()),
            ("bs_placements", self.bs_placements.len()),
            ("seeds", self.seeds.len()),
        ];
        if let Some((name, _)) = axes.iter().find(|(_, n)| *n == 0) {
            return Err(Error::Validation(format!("matrix axis {name} is empty")));
        }
        for m in &self.missions {
            m.validate()?;
        }
        Ok(())
    }

    /// Grid cells in a fixed order. LTE ignores the antenna axis, so it
    /// contributes one cell per remaining combination.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        self.validate()?;
        let mut out = Vec::new();
        for mission in &self.missions {
            for &rat in &self.profiles {
                let combos = match rat {
                    Rat::Mmwave => &self.antenna_combos[..],
                    Rat::Lte => &self.antenna_combos[..1],
                };
                for &antennas in combos {
                    for &rate_mbps in &self.source_rates_mbps {
                        for &placement in &self.bs_placements {
                            for &seed in &self.seeds {
                                let params =
                                    ScenarioParams { rat, antennas, rate_mbps, placement, seed, ..self.base.clone() };
                                out.push(Cell { mission: *mission, params });
                            }
                        }
                    }
                }
            }
        }
        let mut ids: Vec<String> = out.iter().map(Cell::id).collect();
        ids.sort();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Validation(format!("duplicate matrix cell {}", w[0])));
        }
        Ok(out)
    }

    /// Builds a matrix from the `[matrix]` section of a config file, with
    /// global entries as shared scenario settings.
    pub fn from_config(cfg: &ConfigFile) -> Result<Self> {
        let mut m = RunMatrix::default();
        let mut shape = Vec::new();
        for e in cfg.global().entries.iter().chain(cfg.section("matrix").into_iter().flat_map(|s| &s.entries)) {
            let wrap = |err: Error| Error::Parse { line: e.line, message: err.to_string() };
            let items = split_list(&e.value);
            match e.key.as_str() {
                "missions" => {
                    m.missions = items
                        .iter()
                        .map(|s| s.parse::<MissionKind>().map(MissionArchetype::new))
                        .collect::<Result<_>>()
                        .map_err(wrap)?
                }
                "profiles" => m.profiles = parse_all(&items).map_err(wrap)?,
                "antennas" => m.antenna_combos = parse_all(&items).map_err(wrap)?,
                "rates_mbps" => m.source_rates_mbps = parse_all(&items).map_err(wrap)?,
                "placements" => m.bs_placements = parse_all(&items).map_err(wrap)?,
                "seeds" => m.seeds = parse_all(&items).map_err(wrap)?,
                "packet_logs" => m.packet_logs = parse_one(&e.value).map_err(wrap)?,
                "area_m2" | "speed" | "altitude" | "duration" => {
                    shape.push((e.key.as_str(), parse_one::<f64>(&e.value).map_err(wrap)?))
                }
                key => {
                    if !m.base.set(key, &e.value).map_err(wrap)? {
                        return Err(Error::Parse { line: e.line, message: format!("unknown matrix key {key:?}") });
                    }
                }
            }
        }
        // Archetype overrides apply whether they come before or after `missions`.
        for (key, v) in shape {
            for a in &mut m.missions {
                match key {
                    "area_m2" => a.area_m2 = v,
                    "speed" => a.speed = v,
                    "altitude" => a.altitude = v,
                    _ => a.duration = v,
                }
            }
        }
        m.validate()?;
        Ok(m)
    }
}

fn parse_one<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.trim().parse().map_err(|_| Error::Config(format!("invalid value {s:?}")))
}

fn parse_all<T>(items: &[&str]) -> Result<Vec<T>>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    items.iter().map(|s| s.parse::<T>().map_err(|e| Error::Config(format!("invalid list item {s:?}: {e}")))).collect()
}

#[derive(Debug)]
pub struct CellFailure {
    pub cell: String,
    pub error: Error,
}

#[derive(Debug, Default)]
pub struct MatrixOutcome {
    /// Rows of the cells that completed, in grid order.
    pub rows: Vec<SummaryRow>,
    pub failures: Vec<CellFailure>,
}

/// Writes the SNR, binned throughput and binned latency CSVs of one run into `dir`.
pub fn write_cell(dir: &Path, log: &MetricsLog, packet_logs: bool) -> Result<()> {
    fs::create_dir_all(dir)?;
    log.write_snr_csv(BufWriter::new(File::create(dir.join("snr.csv"))?))?;
    if packet_logs {
        log.write_packets_csv(BufWriter::new(File::create(dir.join("packets.csv"))?))?;
    }
    let mut w = BufWriter::new(File::create(dir.join("throughput.csv"))?);
    writeln!(w, "t_s,throughput_mbps")?;
    for (i, bps) in pdcp_throughput(log, THROUGHPUT_BIN_S).iter().enumerate() {
        writeln!(w, "{},{}", i as f64 * THROUGHPUT_BIN_S, bps / 1e6)?;
    }
    w.flush()?;
    let mut w = BufWriter::new(File::create(dir.join("latency.csv"))?);
    writeln!(w, "t_s,mean_latency_ms")?;
    for (i, lat) in latency_series(log, LATENCY_BIN_S).iter().enumerate() {
        match lat {
            Some(l) => writeln!(w, "{},{}", i as f64 * LATENCY_BIN_S, l * 1e3)?,
            None => writeln!(w, "{},", i as f64 * LATENCY_BIN_S)?,
        }
    }
    w.flush()?;
    Ok(())
}

/// Runs `cells` on a pool of `jobs` workers (0 picks the CPU count) and
/// writes `cells/<id>/` logs plus `summary.csv` and `summary.txt` under
/// `out_dir`. A failing cell is reported and skipped.
pub fn run_cells(cells: &[Cell], out_dir: &Path, jobs: usize, packet_logs: bool) -> Result<MatrixOutcome> {
    fs::create_dir_all(out_dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let results: Vec<(String, Result<SummaryRow>)> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let res = cell.run().and_then(|log| {
                    write_cell(&cell_dir(out_dir, cell), &log, packet_logs)?;
                    Ok(cell.summary_row(&log))
                });
                (cell.id(), res)
            })
            .collect()
    });
    let mut outcome = MatrixOutcome::default();
    for (cell, res) in results {
        match res {
            Ok(row) => outcome.rows.push(row),
            Err(error) => outcome.failures.push(CellFailure { cell, error }),
        }
    }
    report::write_csv(&outcome.rows, BufWriter::new(File::create(out_dir.join("summary.csv"))?))?;
    fs::write(out_dir.join("summary.txt"), Table(&outcome.rows).to_string())?;
    Ok(outcome)
}

pub fn run_matrix(matrix: &RunMatrix, out_dir: &Path, jobs: usize) -> Result<MatrixOutcome> {
    run_cells(&matrix.cells()?, out_dir, jobs, matrix.packet_logs)
}

/// Directory holding the per-cell logs of `cell`.
pub fn cell_dir(out_dir: &Path, cell: &Cell) -> PathBuf {
    out_dir.join("cells").join(cell.id())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_has_twelve_cells() {
        let cells = RunMatrix::default().cells().unwrap();
        assert_eq!(cells.len(), 12);
        let lte: Vec<_> = cells.iter().filter(|c| c.params.rat == Rat::Lte).collect();
        assert_eq!(lte.len(), 4);
        assert!(lte.iter().all(|c| c.id().contains("_lte_1x1_")));
    }

    #[test]
    fn empty_axis_is_rejected() {
        let m = RunMatrix { seeds: vec![], ..RunMatrix::default() };
        assert!(matches!(m.cells(), Err(Error::Validation(_))));
        let m = RunMatrix { missions: vec![], ..RunMatrix::default() };
        assert!(m.validate().is_err());
    }

    #[test]
    fn duplicate_cells_rejected() {
        let m = RunMatrix { seeds: vec![3, 3], ..RunMatrix::default() };
        assert!(m.cells().is_err());
    }

    #[test]
    fn from_config_reads_axes() {
        let cfg = ConfigFile::parse(
            "window_s = 2\nduration = 30\n[matrix]\nmissions = [\"overwatch-orbit\", \"target_follow\"]\n\
             profiles = \"mmwave\"\nantennas = [\"64x16\"]\nrates_mbps = [10, 100]\n\
             placements = \"on-premise,distant-2km\"\nseeds = [4]\n",
        )
        .unwrap();
        let m = RunMatrix::from_config(&cfg).unwrap();
        assert_eq!(m.cells().unwrap().len(), 2 * 2 * 2);
        assert_eq!(m.base.window_s, 2.0);
        assert!(m.missions.iter().all(|a| a.duration == 30.0));
        let bad = ConfigFile::parse("[matrix]\nseeds = 1\nwibble = 2\n").unwrap();
        match RunMatrix::from_config(&bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let empty = ConfigFile::parse("[matrix]\nseeds = []\n").unwrap();
        assert!(RunMatrix::from_config(&empty).is_err());
    }
}
