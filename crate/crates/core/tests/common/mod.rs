//! Checks shared by the property, oracle and acceptance test targets. Each
//! returns `Err` with a description of the first counterexample.

#![allow(dead_code)]

use std::f64::consts::PI;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use uavlink::beamforming::{
    dft_codebook, inner_product, steering_vector, ArrayConfig, BeamTracker, Codebook, Geometry,
};
use uavlink::channel::{doppler_shift, fspl_db, sample_channel, LinkProfile, ShadowingField};
use uavlink::cli::mission::{synth_trace, MissionArchetype, MissionKind};
use uavlink::cli::scenario::{BsPlacement, ScenarioParams};
use uavlink::geo_mobility::MobilityState;
use uavlink::phy_mac::{bler, McsTable, Rat};
use uavlink::stack_sim::{run, PacketOutcome, ScenarioConfig};
use uavlink::Vec3;

pub type Check = Result<(), String>;

const C: f64 = 299_792_458.0;

pub fn scenario(
    kind: MissionKind,
    rat: Rat,
    antennas: &str,
    placement: BsPlacement,
    rate_mbps: f64,
    window_s: f64,
    seed: u64,
) -> ScenarioConfig {
    let params = ScenarioParams {
        rat,
        antennas: antennas.parse().unwrap(),
        rate_mbps,
        placement,
        window_s,
        seed,
        ..ScenarioParams::default()
    };
    params.build(synth_trace(&MissionArchetype::new(kind), seed).unwrap()).unwrap()
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() })
}

fn finish(name: &str, r: Result<(), proptest::test_runner::TestError<impl std::fmt::Debug>>) -> Check {
    r.map_err(|e| format!("{name}: {e}"))
}

fn kind_strategy() -> impl Strategy<Value = MissionKind> {
    prop::sample::select(MissionKind::ALL.to_vec())
}

fn geometry_strategy() -> impl Strategy<Value = Geometry> {
    (-PI..PI, -PI / 2.0..PI / 2.0).prop_map(|(az, el)| Geometry::new(az, el).unwrap())
}

// Oracles

/// Free-space pathloss from first principles through natural logs.
pub fn fspl_oracle(d: f64, fc_ghz: f64) -> f64 {
    let d = d.max(1.0);
    32.4 + 10.0 * (d * d * fc_ghz * fc_ghz).ln() / std::f64::consts::LN_10
}

pub fn doppler_oracle(v: f64, fc_ghz: f64) -> f64 {
    let wavelength = C / (fc_ghz * 1e9);
    v / wavelength
}

pub fn oracle_fspl_doppler(samples: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0xF5);
    for _ in 0..samples {
        let d = 10f64.powf(rng.gen_range(-1.0..4.5));
        let fc = rng.gen_range(0.5..100.0);
        let v = rng.gen_range(-50.0..50.0);
        let (got, want) = (fspl_db(d, fc), fspl_oracle(d, fc));
        if (got - want).abs() > 1e-9 {
            return Err(format!("fspl_db({d}, {fc}) = {got}, oracle {want}"));
        }
        let (got, want) = (doppler_shift(v, fc), doppler_oracle(v, fc));
        if (got - want).abs() > 1e-6 {
            return Err(format!("doppler_shift({v}, {fc}) = {got}, oracle {want}"));
        }
    }
    Ok(())
}

/// Orthonormal beams, and received power summed over the codebook equal to N.
pub fn oracle_codebook() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0xCB);
    for (h, v) in [(1, 1), (2, 1), (2, 2), (4, 2), (4, 4), (8, 4), (8, 8)] {
        let array = ArrayConfig::new(h, v).unwrap();
        let n = array.len();
        let beams = dft_codebook(&array);
        if beams.len() != n {
            return Err(format!("{h}x{v}: {} beams", beams.len()));
        }
        for (i, a) in beams.iter().enumerate() {
            for (j, b) in beams.iter().enumerate() {
                let ip = inner_product(&a.weights, &b.weights);
                let want = if i == j { 1.0 } else { 0.0 };
                if (ip.norm() - want).abs() > 1e-9 {
                    return Err(format!("{h}x{v}: |<w{i},w{j}>| = {}", ip.norm()));
                }
            }
        }
        for _ in 0..200 {
            let g = Geometry::new(rng.gen_range(-PI..PI), rng.gen_range(-PI / 2.0..PI / 2.0)).unwrap();
            let a = steering_vector(&array, &g);
            let total: f64 = beams.iter().map(|b| n as f64 * inner_product(&b.weights, &a).norm_sqr()).sum();
            if (total - n as f64).abs() > 1e-9 {
                return Err(format!("{h}x{v}: codebook power {total} at {g:?}"));
            }
        }
    }
    Ok(())
}

// Properties

pub fn prop_link_budget(cases: u32) -> Check {
    let r = runner(cases).run(
        &(kind_strategy(), prop::bool::ANY, prop::bool::ANY, 0u64..1000),
        |(kind, lte, far, seed)| {
            let rat = if lte { Rat::Lte } else { Rat::Mmwave };
            let placement = if far { BsPlacement::Distant2km } else { BsPlacement::OnPremise };
            let cfg = scenario(kind, rat, "16x4", placement, 1.0, 0.5, seed);
            let log = run(&cfg).unwrap();
            prop_assert!(!log.snr_series.is_empty());
            for s in &log.snr_series {
                let identity =
                    s.tx_power_dbm + s.tx_gain_db + s.rx_gain_db - s.pathloss_db - s.shadowing_db - s.noise_floor_dbm;
                prop_assert!((s.snr_db - identity).abs() <= 1e-9, "snr {} vs budget {}", s.snr_db, identity);
                prop_assert!(
                    (s.pathloss_db - fspl_oracle(s.distance_3d, cfg.profile.link.carrier_freq_ghz)).abs() < 1e-9
                );
            }
            Ok(())
        },
    );
    finish("link-budget identity", r)
}

pub fn prop_doppler_invariance(cases: u32) -> Check {
    let r = runner(cases).run(
        &(
            (-500.0..500.0f64, -500.0..500.0f64, 1.0..200.0f64),
            (-20.0..20.0f64, -20.0..20.0f64, -5.0..5.0f64),
            prop::bool::ANY,
            any::<u64>(),
        ),
        |((x, y, z), (vx, vy, vz), lte, seed)| {
            let link = if lte { LinkProfile::lte() } else { LinkProfile::mmwave() };
            let bs = Vec3::new(0.0, 0.0, 25.0);
            let position = Vec3::new(x, y, z);
            let mut f1 = ShadowingField::new(4.0, 10.0, seed).unwrap();
            let mut f2 = ShadowingField::new(4.0, 10.0, seed).unwrap();
            let still = MobilityState { position, velocity: Vec3::ZERO };
            let moving = MobilityState { position, velocity: Vec3::new(vx, vy, vz) };
            let a = sample_channel(&link, &still, bs, 3.0, 9.0, &mut f1, 1.5);
            let b = sample_channel(&link, &moving, bs, 3.0, 9.0, &mut f2, 1.5);
            prop_assert_eq!(a.snr_db, b.snr_db);
            prop_assert!(
                (a.coefficient.norm() - b.coefficient.norm()).abs() <= 1e-12 * a.coefficient.norm().max(1e-300)
            );
            prop_assert_eq!(a.doppler_shift_hz, 0.0);
            Ok(())
        },
    );
    finish("doppler invariance", r)
}

/// Between refreshes the held pair can only lose gain against the pair a
/// fresh exhaustive search would pick.
pub fn prop_tracked_le_refreshed(cases: u32) -> Check {
    let r = runner(cases).run(
        &(
            prop::sample::select(vec![(1usize, 1usize), (2, 2), (4, 4), (8, 8)]),
            prop::sample::select(vec![(1usize, 1usize), (2, 2), (4, 4)]),
            prop::collection::vec((geometry_strategy(), geometry_strategy(), 0.0..3e-3f64), 1..40),
        ),
        |((bh, bv), (uh, uv), steps)| {
            let bs = Codebook::dft(ArrayConfig::new(bh, bv).unwrap());
            let uav = Codebook::dft(ArrayConfig::new(uh, uv).unwrap());
            let (g0b, g0u) = (steps[0].0, steps[0].1);
            let mut tracker = BeamTracker::new(bs.clone(), uav.clone(), 5e-3, &g0b, &g0u).unwrap();
            let mut t = 0.0;
            for (gb, gu, dt) in steps {
                t += dt;
                let (tx, rx) = tracker.tracked_gains(t, &gb, &gu);
                let best_rx = bs.gains_db(&gb).into_iter().fold(f64::NEG_INFINITY, f64::max);
                let best_tx = uav.gains_db(&gu).into_iter().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(
                    tx + rx <= best_tx + best_rx + 1e-9,
                    "t={t}: tracked {} > best {}",
                    tx + rx,
                    best_tx + best_rx
                );
                prop_assert!(tx <= 10.0 * ((uh * uv) as f64).log10() + 1e-9);
                prop_assert!(rx <= 10.0 * ((bh * bv) as f64).log10() + 1e-9);
            }
            Ok(())
        },
    );
    finish("tracked gain <= refreshed gain", r)
}

pub fn prop_conservation(cases: u32) -> Check {
    let r = runner(cases).run(
        &(kind_strategy(), prop::bool::ANY, prop::bool::ANY, 1.0..400.0f64, 0.05..0.6f64, 0u64..1000),
        |(kind, lte, far, rate, window, seed)| {
            let rat = if lte { Rat::Lte } else { Rat::Mmwave };
            let placement = if far { BsPlacement::Distant2km } else { BsPlacement::OnPremise };
            let cfg = scenario(kind, rat, "16x4", placement, rate, window, seed);
            let log = run(&cfg).unwrap();
            let s = &log.summary;
            prop_assert_eq!(s.generated as usize, log.packets.len());
            prop_assert_eq!(s.generated, s.delivered + s.dropped_buffer + s.dropped_harq + s.in_flight);
            let expected = window / cfg.inter_arrival();
            prop_assert!(
                (s.generated as f64 - expected).abs() <= 1.0 + 1e-9,
                "{} arrivals, expected {expected}",
                s.generated
            );
            let mut bits = 0u64;
            for (i, p) in log.packets.iter().enumerate() {
                prop_assert_eq!(p.seq, i as u64);
                prop_assert_eq!(p.size_bits, 8 * cfg.packet_bytes() as u64);
                match (p.outcome, p.t_deliver) {
                    (PacketOutcome::Delivered, Some(t)) => {
                        prop_assert!(t >= p.t_gen && t <= window + 1e-9);
                        bits += p.size_bits;
                    }
                    (PacketOutcome::Delivered, None) => prop_assert!(false, "delivered without time"),
                    (_, d) => prop_assert!(d.is_none()),
                }
            }
            prop_assert!((s.throughput_bps - bits as f64 / window).abs() <= 1e-6 * s.throughput_bps.max(1.0));
            // Delivered rate is bounded by the offered PDCP rate plus one packet.
            let offered = cfg.source_rate_bps * cfg.packet_bytes() as f64 / cfg.payload_bytes as f64;
            prop_assert!(s.throughput_bps <= offered + cfg.packet_bytes() as f64 * 8.0 / window + 1e-6);
            prop_assert!(s.throughput_bps <= cfg.profile.peak_rate_bps() + 1e-6);
            Ok(())
        },
    );
    finish("packet conservation", r)
}

pub fn prop_mcs_monotone(cases: u32) -> Check {
    let table = McsTable::standard();
    let r = runner(cases).run(&(-30.0..40.0f64, 0.0..20.0f64), |(a, gap)| {
        let b = a + gap;
        let lo = table.select(a).map(|m| m.index);
        let hi = table.select(b).map(|m| m.index);
        prop_assert!(lo <= hi, "select({a}) = {lo:?} > select({b}) = {hi:?}");
        for m in table.entries() {
            prop_assert!(bler(m, b) <= bler(m, a));
        }
        if let Some(m) = table.select(a) {
            prop_assert!(m.snr_threshold <= a);
        }
        Ok(())
    });
    finish("monotone MCS selection", r)
}

pub fn prop_determinism(cases: u32) -> Check {
    let r =
        runner(cases).run(&(kind_strategy(), prop::bool::ANY, 1.0..300.0f64, 0u64..1000), |(kind, lte, rate, seed)| {
            let rat = if lte { Rat::Lte } else { Rat::Mmwave };
            let cfg = scenario(kind, rat, "64x16", BsPlacement::Distant2km, rate, 0.3, seed);
            let (a, b) = (run(&cfg).unwrap(), run(&cfg).unwrap());
            let bytes = |log: &uavlink::stack_sim::MetricsLog| {
                let (mut p, mut s) = (Vec::new(), Vec::new());
                log.write_packets_csv(&mut p).unwrap();
                log.write_snr_csv(&mut s).unwrap();
                (p, s)
            };
            prop_assert!(bytes(&a) == bytes(&b), "CSV output differs between identical runs");
            prop_assert_eq!(a.summary.mean_latency.to_bits(), b.summary.mean_latency.to_bits());
            prop_assert_eq!(a.summary.throughput_bps.to_bits(), b.summary.throughput_bps.to_bits());
            Ok(())
        });
    finish("bit-identical reruns", r)
}

pub fn property_suite() -> Vec<(&'static str, Check)> {
    vec![
        ("link-budget identity", prop_link_budget(32)),
        ("doppler invariance", prop_doppler_invariance(512)),
        ("tracked <= refreshed", prop_tracked_le_refreshed(128)),
        ("packet conservation", prop_conservation(32)),
        ("monotone MCS", prop_mcs_monotone(1024)),
        ("determinism", prop_determinism(16)),
    ]
}
