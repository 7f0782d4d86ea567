//! Discrete-event uplink simulation and PDCP-level metrics.
//!
//! A constant-bit-rate source feeds a byte-counted tail-drop queue at the
//! UAV. At every slot the link is re-evaluated (mobility, channel, tracked
//! beams), an MCS is chosen, pending HARQ retransmissions are served, and
//! the rest of the slot capacity is filled FIFO from the queue with
//! byte-granular segmentation. A packet is delivered once every transport
//! block carrying one of its bytes has been decoded.
//!
//! Time is kept in integer nanoseconds so runs are bit-for-bit reproducible.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::fmt;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::beamforming::{ArrayConfig, ArrayFrame, BeamTracker, Codebook, DEFAULT_UPDATE_PERIOD_S};
use crate::channel::{
    sample_channel, ChannelSample, ShadowingField, DEFAULT_DECORRELATION_DISTANCE_M, DEFAULT_SHADOWING_SIGMA_DB,
};
use crate::error::{Error, Result};
use crate::geo_mobility::FlightTrace;
use crate::phy_mac::{bler, harq_step, tb_bits, HarqOutcome, RatProfile, TransportBlock};
use crate::vec3::Vec3;

pub const DEFAULT_BS_HEIGHT_M: f64 = 25.0;
pub const DEFAULT_PAYLOAD_BYTES: u32 = 1500;
/// IP + UDP headers carried with every payload.
pub const DEFAULT_HEADER_BYTES: u32 = 28;
pub const DEFAULT_BUFFER_LIMIT_BYTES: u64 = 1_090_000;
pub const DEFAULT_SNR_LOG_INTERVAL_S: f64 = 1e-3;

const NS_PER_S: f64 = 1e9;

/// Stream ids keep the shadowing and HARQ draws independent of each other.
const SHADOWING_STREAM: u64 = 1;
const HARQ_STREAM: u64 = 2;

/// Everything a single run needs.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub trace: FlightTrace,
    pub bs_position: Vec3,
    /// Direction the BS array faces; the UAV array always faces nadir.
    pub bs_boresight: Vec3,
    pub profile: RatProfile,
    pub bs_array: ArrayConfig,
    pub uav_array: ArrayConfig,
    pub beam_update_period: f64,
    pub source_rate_bps: f64,
    pub payload_bytes: u32,
    pub header_bytes: u32,
    pub sim_window: f64,
    pub buffer_limit_bytes: u64,
    pub shadowing_sigma_db: f64,
    pub shadowing_decorrelation_m: f64,
    /// Spacing of logged channel samples; 0 logs every slot.
    pub snr_log_interval: f64,
    pub seed: u64,
}

impl ScenarioConfig {
    /// Defaults with the BS 25 m above the centre of the mission area,
    /// its array facing the ground.
    pub fn new(trace: FlightTrace, profile: RatProfile, bs_array: ArrayConfig, uav_array: ArrayConfig) -> Self {
        let centroid = trace.area_centroid();
        let bs_position = Vec3::new(centroid.x, centroid.y, DEFAULT_BS_HEIGHT_M);
        Self {
            bs_boresight: boresight_towards(bs_position, centroid),
            bs_position,
            trace,
            profile,
            bs_array,
            uav_array,
            beam_update_period: DEFAULT_UPDATE_PERIOD_S,
            source_rate_bps: 10e6,
            payload_bytes: DEFAULT_PAYLOAD_BYTES,
            header_bytes: DEFAULT_HEADER_BYTES,
            sim_window: 60.0,
            buffer_limit_bytes: DEFAULT_BUFFER_LIMIT_BYTES,
            shadowing_sigma_db: DEFAULT_SHADOWING_SIGMA_DB,
            shadowing_decorrelation_m: DEFAULT_DECORRELATION_DISTANCE_M,
            snr_log_interval: DEFAULT_SNR_LOG_INTERVAL_S,
            seed: 1,
        }
    }

    pub fn packet_bytes(&self) -> u32 {
        self.payload_bytes + self.header_bytes
    }

    /// Seconds between packet generations: payload bits over source rate.
    pub fn inter_arrival(&self) -> f64 {
        self.payload_bytes as f64 * 8.0 / self.source_rate_bps
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.source_rate_bps > 0.0 && self.source_rate_bps.is_finite()) {
            return Err(Error::validation(format!("source rate must be positive, got {}", self.source_rate_bps)));
        }
        if self.payload_bytes == 0 {
            return Err(Error::validation("payload must be at least one byte"));
        }
        if self.buffer_limit_bytes == 0 {
            return Err(Error::validation("buffer limit must be positive"));
        }
        if !(self.sim_window >= 0.0 && self.sim_window.is_finite()) {
            return Err(Error::validation(format!("simulation window must be >= 0, got {}", self.sim_window)));
        }
        if !(self.beam_update_period > 0.0 && self.beam_update_period.is_finite()) {
            return Err(Error::validation("beam update period must be positive"));
        }
        if !(self.snr_log_interval >= 0.0 && self.snr_log_interval.is_finite()) {
            return Err(Error::validation("SNR log interval must be >= 0"));
        }
        if !self.bs_position.is_finite() {
            return Err(Error::validation("BS position must be finite"));
        }
        ArrayFrame::facing(self.bs_boresight)?;
        self.profile.validate()?;
        ShadowingField::new(self.shadowing_sigma_db, self.shadowing_decorrelation_m, 0)?;
        Ok(())
    }
}

/// Unit vector from `from` to `target`, or straight down when they are
/// (nearly) vertically aligned.
pub fn boresight_towards(from: Vec3, target: Vec3) -> Vec3 {
    let d = target - from;
    if (d.x * d.x + d.y * d.y).sqrt() < 1e-6 {
        return Vec3::new(0.0, 0.0, -1.0);
    }
    d.normalized().unwrap_or(Vec3::new(0.0, 0.0, -1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PacketOutcome {
    Delivered,
    DroppedBuffer,
    DroppedHarq,
    /// Still queued or in HARQ when the window closed.
    InFlight,
}

impl fmt::Display for PacketOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PacketOutcome::Delivered => "delivered",
            PacketOutcome::DroppedBuffer => "dropped_buffer",
            PacketOutcome::DroppedHarq => "dropped_harq",
            PacketOutcome::InFlight => "in_flight",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketRecord {
    pub seq: u64,
    /// Payload plus headers.
    pub size_bits: u64,
    pub t_gen: f64,
    pub t_deliver: Option<f64>,
    pub outcome: PacketOutcome,
}

impl PacketRecord {
    pub fn latency(&self) -> Option<f64> {
        self.t_deliver.map(|d| d - self.t_gen)
    }
}

/// Mission-level statistics. Latencies are in seconds, rates in bits/s.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Summary {
    pub empty: bool,
    pub generated: u64,
    pub delivered: u64,
    pub dropped_buffer: u64,
    pub dropped_harq: u64,
    pub in_flight: u64,
    pub throughput_bps: f64,
    pub mean_latency: f64,
    pub median_latency: f64,
    pub p99_latency: f64,
    /// Dropped packets over packets whose fate is known.
    pub loss_fraction: f64,
    pub min_snr_db: f64,
    pub mean_snr_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsLog {
    pub sim_window: f64,
    pub packets: Vec<PacketRecord>,
    pub snr_series: Vec<ChannelSample>,
    pub summary: Summary,
    pub slots: u64,
    pub outage_slots: u64,
    pub beam_refreshes: u64,
}

impl MetricsLog {
    /// Builds a log and derives its summary from the records.
    pub fn new(sim_window: f64, packets: Vec<PacketRecord>, snr_series: Vec<ChannelSample>) -> Self {
        let mut log = Self {
            sim_window,
            packets,
            snr_series,
            summary: Summary::default(),
            slots: 0,
            outage_slots: 0,
            beam_refreshes: 0,
        };
        log.summary = summarize(&log);
        log
    }

    pub fn write_packets_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["seq", "t_gen_s", "t_deliver_s", "size_bits", "outcome"])?;
        for p in &self.packets {
            w.write_record([
                p.seq.to_string(),
                p.t_gen.to_string(),
                p.t_deliver.map(|t| t.to_string()).unwrap_or_default(),
                p.size_bits.to_string(),
                p.outcome.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_snr_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t_s", "distance_m", "snr_db", "tx_gain_db", "rx_gain_db"])?;
        for s in &self.snr_series {
            w.write_record([
                s.t.to_string(),
                s.distance_3d.to_string(),
                s.snr_db.to_string(),
                s.tx_gain_db.to_string(),
                s.rx_gain_db.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Mean latency of an ordered list; `None` when empty.
fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Nearest-rank percentile of sorted data, `q` in (0, 1].
fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Recomputes the mission-level statistics of `log` from its records.
pub fn summarize(log: &MetricsLog) -> Summary {
    if log.packets.is_empty() && log.snr_series.is_empty() {
        return Summary { empty: true, ..Summary::default() };
    }
    let mut s = Summary { generated: log.packets.len() as u64, ..Summary::default() };
    let mut latencies = Vec::with_capacity(log.packets.len());
    let mut delivered_bits = 0u64;
    for p in &log.packets {
        match p.outcome {
            PacketOutcome::Delivered => {
                s.delivered += 1;
                delivered_bits += p.size_bits;
                latencies.extend(p.latency());
            }
            PacketOutcome::DroppedBuffer => s.dropped_buffer += 1,
            PacketOutcome::DroppedHarq => s.dropped_harq += 1,
            PacketOutcome::InFlight => s.in_flight += 1,
        }
    }
    if log.sim_window > 0.0 {
        s.throughput_bps = delivered_bits as f64 / log.sim_window;
    }
    let resolved = s.generated - s.in_flight;
    if resolved > 0 {
        s.loss_fraction = (s.dropped_buffer + s.dropped_harq) as f64 / resolved as f64;
    }
    if let Some(m) = mean(&latencies) {
        s.mean_latency = m;
        latencies.sort_unstable_by(f64::total_cmp);
        s.median_latency = median_sorted(&latencies);
        s.p99_latency = percentile_sorted(&latencies, 0.99);
    }
    if !log.snr_series.is_empty() {
        s.min_snr_db = log.snr_series.iter().map(|c| c.snr_db).fold(f64::INFINITY, f64::min);
        s.mean_snr_db = log.snr_series.iter().map(|c| c.snr_db).sum::<f64>() / log.snr_series.len() as f64;
    }
    s
}

fn bucket_count(total: f64, width: f64) -> usize {
    ((total / width) - 1e-9).ceil().max(0.0) as usize
}

/// Delivered PDCP bits (headers included) per `window`, divided by `window`.
/// Buckets are keyed on delivery time.
pub fn pdcp_throughput(log: &MetricsLog, window: f64) -> Vec<f64> {
    assert!(window > 0.0, "throughput window must be positive");
    let mut bits = vec![0u64; bucket_count(log.sim_window, window)];
    for p in &log.packets {
        if let (PacketOutcome::Delivered, Some(t)) = (p.outcome, p.t_deliver) {
            let i = ((t / window) as usize).min(bits.len().saturating_sub(1));
            if let Some(b) = bits.get_mut(i) {
                *b += p.size_bits;
            }
        }
    }
    bits.into_iter().map(|b| b as f64 / window).collect()
}

/// Mean one-way latency of packets delivered in each `interval`; `None`
/// marks intervals without deliveries.
pub fn latency_series(log: &MetricsLog, interval: f64) -> Vec<Option<f64>> {
    assert!(interval > 0.0, "latency interval must be positive");
    let n = bucket_count(log.sim_window, interval);
    let mut sums = vec![(0.0f64, 0u64); n];
    for p in &log.packets {
        if let (PacketOutcome::Delivered, Some(t)) = (p.outcome, p.t_deliver) {
            let i = ((t / interval) as usize).min(n.saturating_sub(1));
            if let Some(slot) = sums.get_mut(i) {
                slot.0 += t - p.t_gen;
                slot.1 += 1;
            }
        }
    }
    sums.into_iter().map(|(sum, k)| (k > 0).then(|| sum / k as f64)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    // Variant order breaks ties at equal timestamps.
    Arrival(u64),
    HarqDue(u64),
    Slot(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Event {
    time_ns: u64,
    kind: EventKind,
}

#[derive(Debug)]
struct QueuedPacket {
    seq: u64,
    remaining_bytes: u64,
    t_gen_ns: u64,
}

#[derive(Debug, Default)]
struct PacketProgress {
    outstanding: u32,
    fully_sent: bool,
    dropped: bool,
}

#[derive(Debug)]
struct InFlightBlock {
    tb: TransportBlock,
    segments: Vec<u64>,
}

struct Engine<'a> {
    cfg: &'a ScenarioConfig,
    slot_ns: u64,
    window_ns: u64,
    arrival_interval_ns: f64,
    scheduling_delay_ns: u64,
    packet_bytes: u64,
    bs_frame: ArrayFrame,
    uav_frame: ArrayFrame,
    tracker: BeamTracker,
    shadowing: ShadowingField,
    harq_rng: ChaCha8Rng,
    events: BinaryHeap<Reverse<Event>>,
    queue: VecDeque<QueuedPacket>,
    queued_bytes: u64,
    progress: HashMap<u64, PacketProgress>,
    blocks: HashMap<u64, InFlightBlock>,
    next_block_id: u64,
    ready_retx: VecDeque<u64>,
    records: Vec<PacketRecord>,
    snr_series: Vec<ChannelSample>,
    next_log_ns: u64,
    log_interval_ns: u64,
    outage_slots: u64,
    slots: u64,
}

fn seconds_to_ns(s: f64) -> u64 {
    (s * NS_PER_S).round() as u64
}

fn ns_to_seconds(ns: u64) -> f64 {
    ns as f64 / NS_PER_S
}

impl<'a> Engine<'a> {
    fn new(cfg: &'a ScenarioConfig) -> Result<Self> {
        let bs_frame = ArrayFrame::facing(cfg.bs_boresight)?;
        let uav_frame = ArrayFrame::nadir();
        let ue0 = cfg.trace.state_at(cfg.trace.start_time()).position;
        let tracker = BeamTracker::new(
            Codebook::dft(cfg.bs_array),
            Codebook::dft(cfg.uav_array),
            cfg.beam_update_period,
            &bs_frame.geometry_of(ue0 - cfg.bs_position),
            &uav_frame.geometry_of(cfg.bs_position - ue0),
        )?;
        let mut shadow_rng_seed = ChaCha8Rng::seed_from_u64(cfg.seed);
        shadow_rng_seed.set_stream(SHADOWING_STREAM);
        let shadowing =
            ShadowingField::new(cfg.shadowing_sigma_db, cfg.shadowing_decorrelation_m, shadow_rng_seed.gen())?;
        let mut harq_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        harq_rng.set_stream(HARQ_STREAM);

        let slot_ns = seconds_to_ns(cfg.profile.slot_duration).max(1);
        Ok(Self {
            cfg,
            slot_ns,
            window_ns: seconds_to_ns(cfg.sim_window),
            arrival_interval_ns: cfg.inter_arrival() * NS_PER_S,
            scheduling_delay_ns: seconds_to_ns(cfg.profile.scheduling_delay),
            packet_bytes: cfg.packet_bytes() as u64,
            bs_frame,
            uav_frame,
            tracker,
            shadowing,
            harq_rng,
            events: BinaryHeap::new(),
            queue: VecDeque::new(),
            queued_bytes: 0,
            progress: HashMap::new(),
            blocks: HashMap::new(),
            next_block_id: 0,
            ready_retx: VecDeque::new(),
            records: Vec::new(),
            snr_series: Vec::new(),
            next_log_ns: 0,
            log_interval_ns: seconds_to_ns(cfg.snr_log_interval),
            outage_slots: 0,
            slots: 0,
        })
    }

    fn arrival_time_ns(&self, seq: u64) -> u64 {
        (seq as f64 * self.arrival_interval_ns).round() as u64
    }

    fn schedule(&mut self, time_ns: u64, kind: EventKind) {
        self.events.push(Reverse(Event { time_ns, kind }));
    }

    fn run(mut self) -> MetricsLog {
        if self.window_ns > 0 {
            self.schedule(0, EventKind::Arrival(0));
        }
        if self.slot_ns <= self.window_ns {
            self.schedule(0, EventKind::Slot(0));
        }
        while let Some(Reverse(ev)) = self.events.pop() {
            match ev.kind {
                EventKind::Arrival(seq) => self.on_arrival(seq, ev.time_ns),
                EventKind::HarqDue(id) => self.ready_retx.push_back(id),
                EventKind::Slot(n) => self.on_slot(n, ev.time_ns),
            }
        }
        let mut log = MetricsLog::new(self.cfg.sim_window, self.records, self.snr_series);
        log.slots = self.slots;
        log.outage_slots = self.outage_slots;
        log.beam_refreshes = self.tracker.refreshes();
        log
    }

    fn on_arrival(&mut self, seq: u64, now: u64) {
        let size = self.packet_bytes;
        let outcome = if self.queued_bytes + size > self.cfg.buffer_limit_bytes {
            PacketOutcome::DroppedBuffer
        } else {
            self.queued_bytes += size;
            self.queue.push_back(QueuedPacket { seq, remaining_bytes: size, t_gen_ns: now });
            PacketOutcome::InFlight
        };
        self.records.push(PacketRecord {
            seq,
            size_bits: size * 8,
            t_gen: ns_to_seconds(now),
            t_deliver: None,
            outcome,
        });
        let next = self.arrival_time_ns(seq + 1);
        if next < self.window_ns {
            self.schedule(next, EventKind::Arrival(seq + 1));
        }
    }

    fn on_slot(&mut self, n: u64, now: u64) {
        self.slots += 1;
        let t = ns_to_seconds(now);
        let cfg = self.cfg;
        let ue = cfg.trace.state_at(cfg.trace.start_time() + t);
        let bs_geom = self.bs_frame.geometry_of(ue.position - cfg.bs_position);
        let uav_geom = self.uav_frame.geometry_of(cfg.bs_position - ue.position);
        let (tx_gain, rx_gain) = self.tracker.tracked_gains(t, &bs_geom, &uav_geom);
        let sample = sample_channel(&cfg.profile.link, &ue, cfg.bs_position, tx_gain, rx_gain, &mut self.shadowing, t);
        if now >= self.next_log_ns {
            self.snr_series.push(sample);
            self.next_log_ns = now + self.log_interval_ns.max(1);
        }

        let snr = sample.snr_db;
        let delivered_at = now + self.slot_ns;
        if let Some(mcs) = cfg.profile.mcs_table.select(snr) {
            let mut capacity = tb_bits(&cfg.profile, mcs);

            let mut deferred = VecDeque::new();
            while let Some(id) = self.ready_retx.pop_front() {
                let bits = self.blocks[&id].tb.bits;
                if bits <= capacity {
                    capacity -= bits;
                    self.attempt(id, n, snr, delivered_at);
                } else {
                    deferred.push_back(id);
                }
            }
            self.ready_retx = deferred;

            let segments = self.fill(capacity / 8, now);
            if !segments.is_empty() {
                let bytes: u64 = segments.iter().map(|(_, b)| b).sum();
                let id = self.next_block_id;
                self.next_block_id += 1;
                self.blocks.insert(
                    id,
                    InFlightBlock {
                        tb: TransportBlock::new(bytes * 8, mcs.index, n),
                        segments: segments.into_iter().map(|(seq, _)| seq).collect(),
                    },
                );
                self.attempt(id, n, snr, delivered_at);
            }
        } else {
            self.outage_slots += 1;
        }

        let next = now + self.slot_ns;
        if next + self.slot_ns <= self.window_ns {
            self.schedule(next, EventKind::Slot(n + 1));
        }
    }

    /// Takes up to `budget` bytes FIFO from eligible queued packets.
    fn fill(&mut self, mut budget: u64, now: u64) -> Vec<(u64, u64)> {
        let mut segments = Vec::new();
        while budget > 0 {
            let Some(front) = self.queue.front_mut() else { break };
            if front.t_gen_ns + self.scheduling_delay_ns > now {
                break;
            }
            let take = front.remaining_bytes.min(budget);
            front.remaining_bytes -= take;
            budget -= take;
            self.queued_bytes -= take;
            let seq = front.seq;
            let done = front.remaining_bytes == 0;
            if done {
                self.queue.pop_front();
            }
            let p = self.progress.entry(seq).or_default();
            p.outstanding += 1;
            p.fully_sent = done;
            segments.push((seq, take));
        }
        segments
    }

    fn attempt(&mut self, id: u64, slot: u64, snr: f64, delivered_at: u64) {
        let table = &self.cfg.profile.mcs_table;
        let block = self.blocks.get_mut(&id).expect("known block");
        let p = bler(&table.entries()[block.tb.mcs], snr);
        let draw: f64 = self.harq_rng.gen();
        match harq_step(&mut block.tb, p, draw, slot, &self.cfg.profile) {
            HarqOutcome::Delivered { .. } => {
                let block = self.blocks.remove(&id).expect("known block");
                for seq in block.segments {
                    self.segment_done(seq, Some(delivered_at));
                }
            }
            HarqOutcome::Retransmit { slot: due } => {
                self.schedule(due * self.slot_ns, EventKind::HarqDue(id));
            }
            HarqOutcome::Dropped => {
                let block = self.blocks.remove(&id).expect("known block");
                for seq in block.segments {
                    self.segment_done(seq, None);
                }
            }
        }
    }

    /// Resolves one segment of `seq`: decoded at `delivered_at`, or lost.
    fn segment_done(&mut self, seq: u64, delivered_at: Option<u64>) {
        let p = self.progress.get_mut(&seq).expect("segment of a sent packet");
        p.outstanding -= 1;
        let record = &mut self.records[seq as usize];
        if delivered_at.is_none() && !p.dropped {
            p.dropped = true;
            record.outcome = PacketOutcome::DroppedHarq;
            // Discard whatever part of the packet is still waiting to be sent.
            if let Some(front) = self.queue.front() {
                if front.seq == seq {
                    self.queued_bytes -= front.remaining_bytes;
                    self.queue.pop_front();
                    p.fully_sent = true;
                }
            }
        }
        if p.outstanding == 0 && p.fully_sent {
            if !p.dropped {
                let at = delivered_at.expect("delivery time of a successful segment");
                record.outcome = PacketOutcome::Delivered;
                record.t_deliver = Some(ns_to_seconds(at));
            }
            self.progress.remove(&seq);
        }
    }
}

/// Runs one scenario to completion.
pub fn run(config: &ScenarioConfig) -> Result<MetricsLog> {
    config.validate()?;
    Ok(Engine::new(config)?.run())
}
