//! Fixed-step simulation of one train running past a line of sensor nodes.
//!
//! Each tick: move the train, step every node, push emitted frames through
//! the channel, decode and hand them to the controller, then apply the
//! resulting decision. Randomness comes from named substreams of
//! `master_seed` (see [`crate::rng`]), so a scenario and seed fully
//! determine the event log.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{self, ChannelParams, TxOutcome};
use crate::codec::{self, CodecError, LinearCode, Payload12};
use crate::controller::{Controller, ControllerConfig, Decision, TravelDirection};
use crate::rng;
use crate::sensor::{self, NodeConfig, NodeMode, NodeState, TrackSection};

const TIME_EPS: f64 = 1e-9;

fn default_accel() -> f64 {
    0.3
}
fn default_brake() -> f64 {
    1.0
}
fn default_dt() -> f64 {
    0.01
}
fn default_confirm_timeout() -> Option<f64> {
    Some(crate::controller::DEFAULT_CONFIRM_TIMEOUT_S)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainParams {
    pub initial_pos_m: f64,
    pub initial_speed_mps: f64,
    pub v_profile_mps: f64,
    #[serde(default = "default_accel")]
    pub accel_mps2: f64,
    #[serde(default = "default_brake")]
    pub brake_decel_mps2: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeParams {
    pub n: usize,
    pub k: usize,
    pub t: usize,
    pub seed: u64,
}

impl Default for CodeParams {
    fn default() -> Self {
        CodeParams {
            n: codec::DEFAULT_N,
            k: codec::PAYLOAD_BITS,
            t: codec::DEFAULT_T,
            seed: codec::DEFAULT_CODE_SEED,
        }
    }
}

/// A frame handed straight to the controller at `t_s`, bypassing the radio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectedFrame {
    pub t_s: f64,
    pub addr: u8,
    pub vib: u8,
    pub good: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub track_length_m: f64,
    pub nodes: Vec<NodeConfig>,
    /// One section per node, in the same order.
    pub sections: Vec<TrackSection>,
    pub train: TrainParams,
    #[serde(default)]
    pub channel: ChannelParams,
    #[serde(default)]
    pub code: CodeParams,
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    pub duration_s: f64,
    pub master_seed: u64,
    /// Confirmation deadline; `null` waits forever.
    #[serde(default = "default_confirm_timeout")]
    pub confirm_timeout_s: Option<f64>,
    /// Constant error added to the true speed when compensating Doppler.
    #[serde(default)]
    pub speed_estimate_error_mps: f64,
    /// ±1 quantization noise on the 7-bit reading.
    #[serde(default)]
    pub sensor_noise: bool,
    #[serde(default)]
    pub injected_frames: Vec<InjectedFrame>,
}

impl Scenario {
    /// Healthy straight line with a node every `spacing_m` starting at 0.
    ///
    /// Node `i` has address `(i + 1) mod 16`. The train starts at 0 at
    /// profile speed and the duration allows it to cover the whole line.
    pub fn line(track_length_m: f64, spacing_m: f64, v_profile_mps: f64) -> Self {
        let count = (track_length_m / spacing_m + TIME_EPS).floor() as usize + 1;
        let nodes: Vec<NodeConfig> = (0..count)
            .map(|i| NodeConfig::new(((i + 1) % 16) as u8, i as f64 * spacing_m))
            .collect();
        let sections = nodes
            .iter()
            .map(|n| TrackSection::healthy(n.addr))
            .collect();
        Scenario {
            track_length_m,
            nodes,
            sections,
            train: TrainParams {
                initial_pos_m: 0.0,
                initial_speed_mps: v_profile_mps,
                v_profile_mps,
                accel_mps2: default_accel(),
                brake_decel_mps2: default_brake(),
            },
            channel: ChannelParams::default(),
            code: CodeParams::default(),
            dt_s: default_dt(),
            duration_s: (track_length_m / v_profile_mps * 1.25).ceil() + 10.0,
            master_seed: 0,
            confirm_timeout_s: default_confirm_timeout(),
            speed_estimate_error_mps: 0.0,
            sensor_noise: false,
            injected_frames: Vec::new(),
        }
    }

    /// 20 km line, 500 m spacing, 27.78 m/s (100 km/h) profile.
    pub fn reference() -> Self {
        Scenario::line(20_000.0, 500.0, 27.78)
    }

    /// Marks the section of the node at `position_m` as damaged.
    ///
    /// # Panics
    ///
    /// If no node sits at that position.
    pub fn with_damage_at(mut self, position_m: f64, quality_q: u8) -> Self {
        let i = self
            .nodes
            .iter()
            .position(|n| (n.position_m - position_m).abs() < 1e-6)
            .unwrap_or_else(|| panic!("no node at {position_m} m"));
        self.sections[i].damaged = true;
        self.sections[i].quality_q = quality_q;
        self
    }

    pub fn with_seed(mut self, master_seed: u64) -> Self {
        self.master_seed = master_seed;
        self
    }

    /// Start positions of damaged sections, in node order.
    pub fn damaged_positions(&self) -> Vec<f64> {
        self.nodes
            .iter()
            .zip(&self.sections)
            .filter(|(_, s)| s.damaged)
            .map(|(n, _)| n.position_m)
            .collect()
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

/// Every violated scenario constraint, in a fixed order. Empty means valid.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn validate(scenario: &Scenario) -> Vec<String> {
    let mut v = Vec::new();
    let s = scenario;
    if !(s.dt_s > 0.0) {
        v.push(format!("dt_s must be > 0, got {}", s.dt_s));
    }
    if !(s.duration_s > 0.0) {
        v.push(format!("duration_s must be > 0, got {}", s.duration_s));
    }
    if !(s.track_length_m > 0.0) {
        v.push(format!(
            "track_length_m must be > 0, got {}",
            s.track_length_m
        ));
    }
    if s.nodes.is_empty() {
        v.push("at least one node is required".into());
    }
    for w in s.nodes.windows(2) {
        if !(w[1].position_m > w[0].position_m) {
            v.push(format!(
                "node positions must be strictly increasing ({} m then {} m)",
                w[0].position_m, w[1].position_m
            ));
        }
    }
    for n in &s.nodes {
        if n.addr > 15 {
            v.push(format!(
                "node at {} m: addr {} does not fit 4 bits",
                n.position_m, n.addr
            ));
        }
        if !(n.activation_range_m > 0.0) {
            v.push(format!(
                "node at {} m: activation_range_m must be > 0",
                n.position_m
            ));
        }
        if !(n.tx_period_s > 0.0) {
            v.push(format!(
                "node at {} m: tx_period_s must be > 0",
                n.position_m
            ));
        }
        if !(0.0..1.0).contains(&n.comparator_threshold) {
            v.push(format!(
                "node at {} m: comparator_threshold must be in [0, 1)",
                n.position_m
            ));
        }
    }
    if s.sections.len() != s.nodes.len() {
        v.push(format!(
            "every node needs exactly one section ({} nodes, {} sections)",
            s.nodes.len(),
            s.sections.len()
        ));
    }
    for (n, sec) in s.nodes.iter().zip(&s.sections) {
        if sec.addr != n.addr {
            v.push(format!(
                "section addr {} does not match node addr {} at {} m",
                sec.addr, n.addr, n.position_m
            ));
        }
        if sec.quality_q > 127 {
            v.push(format!(
                "section {}: quality_q {} exceeds 127",
                sec.addr, sec.quality_q
            ));
        }
    }
    let reach = 2.0 * s.channel.max_range_m;
    for (i, a) in s.nodes.iter().enumerate() {
        for b in &s.nodes[i + 1..] {
            if a.addr == b.addr && (a.position_m - b.position_m).abs() <= reach {
                v.push(format!(
                    "duplicate address within radio range: addr {} at {} m and {} m",
                    a.addr, a.position_m, b.position_m
                ));
            }
        }
    }
    let t = &s.train;
    if !(t.v_profile_mps > 0.0) {
        v.push(format!(
            "train: v_profile_mps must be > 0, got {}",
            t.v_profile_mps
        ));
    }
    if !(t.initial_speed_mps >= 0.0 && t.initial_speed_mps <= t.v_profile_mps) {
        v.push(format!(
            "train: initial_speed_mps must be in [0, v_profile_mps], got {}",
            t.initial_speed_mps
        ));
    }
    if !(t.accel_mps2 > 0.0) {
        v.push(format!(
            "train: accel_mps2 must be > 0, got {}",
            t.accel_mps2
        ));
    }
    if !(t.brake_decel_mps2 > 0.0) {
        v.push(format!(
            "train: brake_decel_mps2 must be > 0, got {}",
            t.brake_decel_mps2
        ));
    }
    if !t.initial_pos_m.is_finite() {
        v.push("train: initial_pos_m must be finite".into());
    }
    v.extend(s.channel.violations());
    let c = &s.code;
    if c.k != codec::PAYLOAD_BITS {
        v.push(format!(
            "code: k must be {} to carry the payload, got {}",
            codec::PAYLOAD_BITS,
            c.k
        ));
    }
    if c.n <= c.k {
        v.push(format!("code: need n > k, got n={} k={}", c.n, c.k));
    }
    if let Some(timeout) = s.confirm_timeout_s {
        if !(timeout > 0.0) {
            v.push(format!(
                "confirm_timeout_s must be > 0 or null, got {timeout}"
            ));
        }
    }
    if !s.speed_estimate_error_mps.is_finite() {
        v.push("speed_estimate_error_mps must be finite".into());
    }
    for f in &s.injected_frames {
        if Payload12::pack(f.addr, f.vib, f.good).is_err() {
            v.push(format!(
                "injected frame at {} s has out-of-range fields",
                f.t_s
            ));
        }
    }
    v
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {}", .0.join("; "))]
    InvalidScenario(Vec<String>),
    #[error(transparent)]
    Code(#[from] CodecError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainState {
    pub pos_m: f64,
    pub speed_mps: f64,
    pub target_speed_mps: f64,
    pub braking: bool,
}

impl TrainState {
    fn advance(&mut self, params: &TrainParams, dt: f64) {
        if self.braking {
            self.speed_mps = (self.speed_mps - params.brake_decel_mps2 * dt).max(0.0);
        } else if self.speed_mps < self.target_speed_mps {
            self.speed_mps = (self.speed_mps + params.accel_mps2 * dt).min(self.target_speed_mps);
        } else if self.speed_mps > self.target_speed_mps {
            self.speed_mps = (self.speed_mps - params.accel_mps2 * dt).max(self.target_speed_mps);
        }
        self.pos_m += self.speed_mps * dt;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    NodeActivated,
    FrameTx,
    FrameLost,
    FrameCorrected,
    DecodeFailure,
    FrameInjected,
    DecisionContinue,
    DecisionWarn,
    DecisionAlarm,
    BrakeApplied,
    TrainStopped,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::NodeActivated => "NodeActivated",
            EventKind::FrameTx => "FrameTx",
            EventKind::FrameLost => "FrameLost",
            EventKind::FrameCorrected => "FrameCorrected",
            EventKind::DecodeFailure => "DecodeFailure",
            EventKind::FrameInjected => "FrameInjected",
            EventKind::DecisionContinue => "DecisionContinue",
            EventKind::DecisionWarn => "DecisionWarn",
            EventKind::DecisionAlarm => "DecisionAlarm",
            EventKind::BrakeApplied => "BrakeApplied",
            EventKind::TrainStopped => "TrainStopped",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub t_s: f64,
    pub kind: EventKind,
    /// Space-separated `key=value` pairs, never containing commas.
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    pub events: Vec<Event>,
}

impl EventLog {
    fn push(&mut self, t_s: f64, kind: EventKind, detail: String) {
        self.events.push(Event { t_s, kind, detail });
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    pub fn first(&self, kind: EventKind) -> Option<&Event> {
        self.events.iter().find(|e| e.kind == kind)
    }

    /// `t_s,kind,detail` with timestamps to the millisecond.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.events.len() * 40 + 16);
        out.push_str("t_s,kind,detail\n");
        for e in &self.events {
            let _ = writeln!(out, "{:.3},{},{}", e.t_s, e.kind, e.detail);
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metrics {
    pub frames_sent: u64,
    pub frames_delivered: u64,
    pub frames_lost_range: u64,
    pub frames_lost_doppler: u64,
    pub frames_corrected: u64,
    pub decode_failures: u64,
    pub frames_injected: u64,
    pub warns: u64,
    pub alarms: u64,
    pub alarm_pos_m: Option<f64>,
    pub stop_pos_m: Option<f64>,
    /// Damaged-section start minus stop position; negative means overrun.
    pub min_clearance_m: Option<f64>,
    pub final_pos_m: f64,
    pub final_speed_mps: f64,
    pub max_speed_mps: f64,
    pub end_time_s: f64,
}

impl Metrics {
    pub fn stopped_before_damage(&self) -> bool {
        self.min_clearance_m.is_some_and(|c| c > 0.0)
    }

    pub fn to_csv(&self) -> String {
        fn opt(v: Option<f64>) -> String {
            v.map(|x| format!("{x:.3}")).unwrap_or_default()
        }
        let rows: [(&str, String); 16] = [
            ("frames_sent", self.frames_sent.to_string()),
            ("frames_delivered", self.frames_delivered.to_string()),
            ("frames_lost_range", self.frames_lost_range.to_string()),
            ("frames_lost_doppler", self.frames_lost_doppler.to_string()),
            ("frames_corrected", self.frames_corrected.to_string()),
            ("decode_failures", self.decode_failures.to_string()),
            ("frames_injected", self.frames_injected.to_string()),
            ("warns", self.warns.to_string()),
            ("alarms", self.alarms.to_string()),
            ("alarm_pos_m", opt(self.alarm_pos_m)),
            ("stop_pos_m", opt(self.stop_pos_m)),
            ("min_clearance_m", opt(self.min_clearance_m)),
            ("final_pos_m", format!("{:.3}", self.final_pos_m)),
            ("final_speed_mps", format!("{:.3}", self.final_speed_mps)),
            ("max_speed_mps", format!("{:.3}", self.max_speed_mps)),
            ("end_time_s", format!("{:.3}", self.end_time_s)),
        ];
        let mut out = String::from("key,value\n");
        for (k, v) in rows {
            let _ = writeln!(out, "{k},{v}");
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub log: EventLog,
    pub metrics: Metrics,
}

pub fn run(scenario: &Scenario) -> Result<SimOutput, SimError> {
    let violations = validate(scenario);
    if !violations.is_empty() {
        return Err(SimError::InvalidScenario(violations));
    }
    let c = &scenario.code;
    let code = codec::build_code(c.k, c.n, c.t, c.seed)?;
    Ok(Engine::new(scenario, code).run())
}

/// What triggered a decision.
#[derive(Debug, Clone, Copy)]
enum Source {
    Addr(u8),
    Timeout,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Addr(a) => write!(f, "addr={a}"),
            Source::Timeout => f.write_str("timeout=1"),
        }
    }
}

struct Engine<'a> {
    scenario: &'a Scenario,
    code: LinearCode,
    controller: Controller,
    train: TrainState,
    node_states: Vec<NodeState>,
    log: EventLog,
    metrics: Metrics,
}

impl<'a> Engine<'a> {
    fn new(scenario: &'a Scenario, code: LinearCode) -> Self {
        let t = &scenario.train;
        let controller = Controller::new(ControllerConfig {
            v_profile_mps: t.v_profile_mps,
            confirm_timeout_s: scenario.confirm_timeout_s,
            direction: TravelDirection::Forward,
        });
        let train = TrainState {
            pos_m: t.initial_pos_m,
            speed_mps: t.initial_speed_mps,
            target_speed_mps: controller.target_speed(),
            braking: false,
        };
        Engine {
            scenario,
            code,
            controller,
            train,
            node_states: vec![NodeState::default(); scenario.nodes.len()],
            log: EventLog::default(),
            metrics: Metrics {
                max_speed_mps: t.initial_speed_mps,
                ..Metrics::default()
            },
        }
    }

    fn run(mut self) -> SimOutput {
        let s = self.scenario;
        let mut channel_rng = rng::substream(s.master_seed, rng::STREAM_CHANNEL);
        let mut noise_rng = rng::substream(s.master_seed, rng::STREAM_SENSOR_NOISE);
        let mut injected: Vec<&InjectedFrame> = s.injected_frames.iter().collect();
        injected.sort_by(|a, b| a.t_s.total_cmp(&b.t_s));
        let mut injected = injected.into_iter().peekable();

        let ticks = (s.duration_s / s.dt_s - TIME_EPS).ceil().max(0.0) as u64;
        let mut frames = Vec::new();
        let mut now = 0.0;
        for tick in 1..=ticks {
            if self.train.pos_m >= s.track_length_m {
                break;
            }
            now = tick as f64 * s.dt_s;

            let prev_speed = self.train.speed_mps;
            self.train.advance(&s.train, s.dt_s);
            self.metrics.max_speed_mps = self.metrics.max_speed_mps.max(self.train.speed_mps);
            if prev_speed > 0.0 && self.train.speed_mps == 0.0 {
                self.metrics.stop_pos_m = Some(self.train.pos_m);
                self.log.push(
                    now,
                    EventKind::TrainStopped,
                    format!("pos={:.3}", self.train.pos_m),
                );
                break;
            }

            frames.clear();
            for (i, node) in s.nodes.iter().enumerate() {
                let state = &mut self.node_states[i];
                let was_dormant = state.mode == NodeMode::Dormant;
                let noise = if s.sensor_noise {
                    Some(&mut noise_rng)
                } else {
                    None
                };
                let frame = sensor::node_step(
                    node,
                    state,
                    &s.sections[i],
                    self.train.pos_m,
                    now,
                    &self.code,
                    noise,
                );
                if was_dormant && state.mode == NodeMode::Active {
                    self.log.push(
                        now,
                        EventKind::NodeActivated,
                        format!("node={i} addr={} pos={:.3}", node.addr, node.position_m),
                    );
                }
                if let Some(f) = frame {
                    frames.push((i, f));
                }
            }

            for &(i, frame) in &frames {
                let node = &s.nodes[i];
                self.metrics.frames_sent += 1;
                self.log.push(
                    now,
                    EventKind::FrameTx,
                    format!(
                        "node={i} addr={} payload={:#05x} dist={:.3}",
                        frame.addr,
                        frame.payload.bits(),
                        (node.position_m - self.train.pos_m).abs()
                    ),
                );
                let estimate = self.train.speed_mps + s.speed_estimate_error_mps;
                let outcome = channel::transmit(
                    &frame.codeword,
                    node.position_m,
                    self.train.pos_m,
                    self.train.speed_mps,
                    estimate,
                    &s.channel,
                    &mut channel_rng,
                );
                match outcome {
                    TxOutcome::Lost(reason) => {
                        match reason {
                            channel::LossReason::OutOfRange => self.metrics.frames_lost_range += 1,
                            channel::LossReason::DopplerFailure => {
                                self.metrics.frames_lost_doppler += 1
                            }
                        }
                        self.log.push(
                            now,
                            EventKind::FrameLost,
                            format!("node={i} reason={}", reason.as_str()),
                        );
                    }
                    TxOutcome::Delivered { bits, .. } => {
                        self.metrics.frames_delivered += 1;
                        match self.code.decode_payload(&bits) {
                            Ok((payload, corrected)) => {
                                if corrected > 0 {
                                    self.metrics.frames_corrected += 1;
                                    self.log.push(
                                        now,
                                        EventKind::FrameCorrected,
                                        format!("node={i} bits={corrected}"),
                                    );
                                }
                                let decision = self.controller.on_frame(payload, now);
                                self.apply(now, Source::Addr(payload.addr()), decision);
                            }
                            Err(_) => {
                                self.metrics.decode_failures += 1;
                                self.log
                                    .push(now, EventKind::DecodeFailure, format!("node={i}"));
                            }
                        }
                    }
                }
            }

            while let Some(f) = injected.next_if(|f| f.t_s <= now + TIME_EPS) {
                let payload =
                    Payload12::pack(f.addr, f.vib, f.good).expect("validated injected frame");
                self.metrics.frames_injected += 1;
                self.log.push(
                    now,
                    EventKind::FrameInjected,
                    format!("addr={} payload={:#05x}", f.addr, payload.bits()),
                );
                let decision = self.controller.on_frame(payload, now);
                self.apply(now, Source::Addr(f.addr), decision);
            }

            let decision = self.controller.on_timeout(now);
            self.apply(now, Source::Timeout, decision);
        }

        self.metrics.end_time_s = now;
        self.metrics.final_pos_m = self.train.pos_m;
        self.metrics.final_speed_mps = self.train.speed_mps;
        if let Some(stop) = self.metrics.stop_pos_m {
            let start = s.train.initial_pos_m;
            self.metrics.min_clearance_m = s
                .damaged_positions()
                .into_iter()
                .filter(|&p| p >= start)
                .map(|p| p - stop)
                .min_by(f64::total_cmp);
        }
        SimOutput {
            log: self.log,
            metrics: self.metrics,
        }
    }

    fn apply(&mut self, now: f64, source: Source, decision: Option<Decision>) {
        match decision {
            None => {}
            Some(Decision::Continue(v)) => {
                self.train.target_speed_mps = v;
                self.log.push(
                    now,
                    EventKind::DecisionContinue,
                    format!("{source} target={v:.3}"),
                );
            }
            Some(Decision::Warn) => {
                self.metrics.warns += 1;
                self.train.target_speed_mps = self.controller.target_speed();
                self.log
                    .push(now, EventKind::DecisionWarn, source.to_string());
            }
            Some(Decision::Alarm) => {
                self.metrics.alarms += 1;
                self.metrics.alarm_pos_m = Some(self.train.pos_m);
                self.log.push(
                    now,
                    EventKind::DecisionAlarm,
                    format!("{source} pos={:.3}", self.train.pos_m),
                );
                if !self.train.braking {
                    self.train.braking = true;
                    self.log.push(
                        now,
                        EventKind::BrakeApplied,
                        format!(
                            "pos={:.3} speed={:.3}",
                            self.train.pos_m, self.train.speed_mps
                        ),
                    );
                }
            }
        }
    }
}
