mod common;

use common::{detail_field, sweep};
use trackwatch::channel::ChannelParams;
use trackwatch::controller::target_speed;
use trackwatch::sim::{self, EventKind, InjectedFrame, Scenario};

const V_PROFILE: f64 = 27.78;

fn damaged() -> Scenario {
    Scenario::reference().with_damage_at(10_000.0, 40)
}

#[test]
fn healthy_noiseless_run_reaches_end_at_profile_speed() {
    let mut s = Scenario::reference();
    s.channel = ChannelParams::noiseless();
    let out = sim::run(&s).unwrap();
    let m = &out.metrics;
    assert_eq!((m.alarms, m.warns), (0, 0));
    assert_eq!(m.decode_failures, 0);
    assert_eq!(m.frames_corrected, 0);
    assert!(m.final_pos_m >= 20_000.0);
    assert_eq!(m.final_speed_mps, V_PROFILE);
    assert_eq!(m.stop_pos_m, None);
}

#[test]
fn damaged_section_triggers_early_alarm_and_stop() {
    let out = sim::run(&damaged().with_seed(3)).unwrap();
    let m = &out.metrics;
    assert_eq!(m.alarms, 1);
    let alarm_pos = m.alarm_pos_m.unwrap();
    // node 5 first hears the train 1600 m out
    assert!((8_400.0..8_450.0).contains(&alarm_pos), "{alarm_pos}");
    let stop = m.stop_pos_m.unwrap();
    // braking distance v²/(2a) = 385.86 m, less discretization
    assert!(
        (stop - alarm_pos - 385.864).abs() < 1.0,
        "{}",
        stop - alarm_pos
    );
    assert!(m.min_clearance_m.unwrap() > 1_000.0);
    assert_eq!(out.log.count(EventKind::BrakeApplied), 1);
    assert_eq!(out.log.count(EventKind::TrainStopped), 1);
    // alarm is raised on the second failure frame from the damaged node
    let alarm = out.log.first(EventKind::DecisionAlarm).unwrap();
    assert_eq!(detail_field(&alarm.detail, "addr"), Some("5"));
}

#[test]
fn identical_seed_identical_artifacts() {
    let a = sim::run(&damaged().with_seed(11)).unwrap();
    let b = sim::run(&damaged().with_seed(11)).unwrap();
    assert_eq!(a.log.to_csv(), b.log.to_csv());
    assert_eq!(a.metrics.to_csv(), b.metrics.to_csv());
    let c = sim::run(&damaged().with_seed(12)).unwrap();
    assert_ne!(a.log.to_csv(), c.log.to_csv());
}

#[test]
fn frame_counts_are_conserved() {
    let mut s = Scenario::line(8_000.0, 400.0, 25.0);
    for n in &mut s.nodes {
        // wake before the radio can reach so some frames fall out of range
        n.activation_range_m = 2_000.0;
    }
    let outs = sweep(0..8, |seed| s.clone().with_seed(seed));
    for o in &outs {
        let m = &o.metrics;
        assert!(m.frames_lost_range > 0);
        assert_eq!(
            m.frames_sent,
            m.frames_delivered + m.frames_lost_range + m.frames_lost_doppler
        );
        assert_eq!(m.frames_sent as usize, o.log.count(EventKind::FrameTx));
        assert_eq!(
            m.decode_failures as usize,
            o.log.count(EventKind::DecodeFailure)
        );
    }
}

#[test]
fn doppler_miscompensation_loses_frames() {
    let mut s = Scenario::reference().with_damage_at(10_000.0, 40);
    s.speed_estimate_error_mps = 100.0;
    let m = sim::run(&s).unwrap().metrics;
    assert!(m.frames_sent > 0);
    assert_eq!(m.frames_lost_doppler, m.frames_sent);
    assert_eq!(m.alarms, 0);

    s.speed_estimate_error_mps = 30.0;
    let m = sim::run(&s).unwrap().metrics;
    assert_eq!(m.frames_lost_doppler, 0);
    assert_eq!(m.alarms, 1);
}

#[test]
fn nodes_transmit_only_within_activation_range() {
    let out = sim::run(&damaged().with_seed(5)).unwrap();
    for e in out
        .log
        .events
        .iter()
        .filter(|e| e.kind == EventKind::FrameTx)
    {
        let d: f64 = detail_field(&e.detail, "dist").unwrap().parse().unwrap();
        assert!(d <= 1_600.0, "{}", e.detail);
    }
}

#[test]
fn goodness_flag_is_zero_only_for_damaged_section() {
    let out = sim::run(&damaged().with_seed(1)).unwrap();
    let mut failures = 0;
    for e in out
        .log
        .events
        .iter()
        .filter(|e| e.kind == EventKind::FrameTx)
    {
        let payload = u16::from_str_radix(
            detail_field(&e.detail, "payload")
                .unwrap()
                .trim_start_matches("0x"),
            16,
        )
        .unwrap();
        let node = detail_field(&e.detail, "node").unwrap();
        if payload & 1 == 0 {
            failures += 1;
            assert_eq!(node, "20");
        } else {
            assert_ne!(node, "20");
        }
    }
    assert!(failures >= 2);
}

#[test]
fn active_node_emits_ten_frames_per_second() {
    let mut s = Scenario::reference();
    s.channel = ChannelParams::noiseless();
    let out = sim::run(&s).unwrap();
    let tx_times: Vec<f64> = out
        .log
        .events
        .iter()
        .filter(|e| e.kind == EventKind::FrameTx && detail_field(&e.detail, "node") == Some("20"))
        .map(|e| e.t_s)
        .collect();
    let span = tx_times.last().unwrap() - tx_times[0];
    let expected = span / 0.1 + 1.0;
    assert!((tx_times.len() as f64 - expected).abs() <= 1.0);
    // activation window is 3200 m wide
    assert!((span - 3_200.0 / V_PROFILE).abs() < 0.2, "{span}");
}

#[test]
fn speed_follows_track_grade_and_stays_bounded() {
    let mut s = Scenario::reference();
    s.channel = ChannelParams::noiseless();
    for sec in &mut s.sections {
        sec.quality_q = 64;
    }
    let m = sim::run(&s).unwrap().metrics;
    assert!(m.max_speed_mps <= V_PROFILE);
    assert!((m.final_speed_mps - target_speed(64, V_PROFILE)).abs() < 1e-9);
    assert_eq!(m.alarms, 0);
}

#[test]
fn unconfirmed_failure_times_out_to_alarm() {
    let mut s = Scenario::reference();
    s.channel = ChannelParams::noiseless();
    // node with addr 9 sits at 4000 m, out of range at t = 10 s
    s.injected_frames.push(InjectedFrame {
        t_s: 10.0,
        addr: 9,
        vib: 127,
        good: 0,
    });
    let out = sim::run(&s).unwrap();
    let alarm = out.log.first(EventKind::DecisionAlarm).unwrap();
    assert!((alarm.t_s - 12.01).abs() < 1e-6, "{}", alarm.t_s);
    assert_eq!(detail_field(&alarm.detail, "timeout"), Some("1"));

    s.confirm_timeout_s = None;
    let m = sim::run(&s).unwrap().metrics;
    assert_eq!(m.alarms, 0);
    assert_eq!(m.warns, 1);
}

#[test]
fn sensor_noise_is_reproducible() {
    let mut s = Scenario::reference().with_seed(4);
    s.sensor_noise = true;
    let a = sim::run(&s).unwrap();
    let b = sim::run(&s).unwrap();
    assert_eq!(a.log.to_csv(), b.log.to_csv());
    assert!(a.metrics.max_speed_mps <= V_PROFILE);
}

#[test]
fn event_timestamps_non_decreasing_and_single_alarm() {
    let outs = sweep(0..16, |seed| damaged().with_seed(seed));
    for o in outs {
        assert!(o.log.events.windows(2).all(|w| w[0].t_s <= w[1].t_s));
        assert!(o.log.count(EventKind::DecisionAlarm) <= 1);
    }
}

/// Train stops short of the damage across a spread of line parameters
/// satisfying spacing ≤ 500 m, v ≤ 30 m/s, braking ≥ 1 m/s² and per-frame
/// delivery ≥ 0.5.
#[test]
fn safety_holds_across_parameter_grid() {
    let grid = [
        (500.0, 30.0, 1.0, 0.06),
        (400.0, 20.0, 1.2, 0.03),
        (300.0, 30.0, 1.0, 0.02),
    ];
    for (spacing, v, brake, ber_far) in grid {
        // frame survives with ≤ 2 bit errors at the range limit
        let p: f64 = ber_far;
        let delivery: f64 = (0..=2)
            .map(|i| {
                let c = [1.0, 29.0, 406.0][i];
                c * p.powi(i as i32) * (1.0 - p).powi(29 - i as i32)
            })
            .sum();
        assert!(delivery >= 0.5);

        let mut base = Scenario::line(12_000.0, spacing, v);
        base.train.brake_decel_mps2 = brake;
        base.channel.ber_far = ber_far;
        let damage_at = base.nodes[base.nodes.len() * 3 / 4].position_m;
        let base = base.with_damage_at(damage_at, 10);
        let outs = sweep(0..100, |seed| base.clone().with_seed(seed));
        let safe = outs
            .iter()
            .filter(|o| o.metrics.stopped_before_damage())
            .count();
        assert!(safe >= 99, "spacing {spacing} v {v}: {safe}/100");
    }
}
