//! Trackside sensor nodes.
//!
//! A node sleeps until the approaching train is within its activation range,
//! then samples its track section and transmits a frame every `tx_period_s`.
//! It falls asleep again once the train is beyond that range.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{Codeword, LinearCode, Payload12};

/// Distance at which the vibration amplitude equals the reference amplitude.
pub const REFERENCE_DISTANCE_M: f64 = 1000.0;
/// Distances below this are clamped so the amplitude stays finite.
pub const DISTANCE_FLOOR_M: f64 = 10.0;

pub const DEFAULT_ACTIVATION_RANGE_M: f64 = 1600.0;
pub const DEFAULT_TX_PERIOD_S: f64 = 0.1;
pub const DEFAULT_COMPARATOR_THRESHOLD: f64 = 0.2;

/// Slack for comparing accumulated tick times against the period.
const TIME_EPS: f64 = 1e-9;

fn default_activation_range() -> f64 {
    DEFAULT_ACTIVATION_RANGE_M
}

fn default_tx_period() -> f64 {
    DEFAULT_TX_PERIOD_S
}

fn default_comparator_threshold() -> f64 {
    DEFAULT_COMPARATOR_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeConfig {
    pub addr: u8,
    pub position_m: f64,
    #[serde(default = "default_activation_range")]
    pub activation_range_m: f64,
    #[serde(default = "default_tx_period")]
    pub tx_period_s: f64,
    #[serde(default = "default_comparator_threshold")]
    pub comparator_threshold: f64,
}

impl NodeConfig {
    pub fn new(addr: u8, position_m: f64) -> Self {
        NodeConfig {
            addr,
            position_m,
            activation_range_m: DEFAULT_ACTIVATION_RANGE_M,
            tx_period_s: DEFAULT_TX_PERIOD_S,
            comparator_threshold: DEFAULT_COMPARATOR_THRESHOLD,
        }
    }
}

/// Ground truth for the stretch of track a node watches.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrackSection {
    pub addr: u8,
    /// Track/soil grade, 0..=127, 127 being perfect.
    pub quality_q: u8,
    pub damaged: bool,
}

impl TrackSection {
    pub fn healthy(addr: u8) -> Self {
        TrackSection {
            addr,
            quality_q: 127,
            damaged: false,
        }
    }

    /// Normalized difference between the two rail vibration levels.
    pub fn rail_asymmetry(&self) -> f64 {
        if self.damaged {
            1.0
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeMode {
    Dormant,
    Active,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub mode: NodeMode,
    pub last_tx_time_s: Option<f64>,
}

impl Default for NodeState {
    fn default() -> Self {
        NodeState {
            mode: NodeMode::Dormant,
            last_tx_time_s: None,
        }
    }
}

/// An encoded frame leaving a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub addr: u8,
    pub payload: Payload12,
    pub codeword: Codeword,
}

/// Inverse-square fall-off of train-induced vibration with distance.
pub fn vibration_amplitude(distance_m: f64, reference_amplitude: f64) -> f64 {
    let d = distance_m.max(DISTANCE_FLOOR_M);
    let ratio = REFERENCE_DISTANCE_M / d;
    reference_amplitude * ratio * ratio
}

/// Reads the section: `(vib7, good)`.
///
/// With `noise` set the reading is perturbed by -1, 0 or +1 and clamped to
/// the 7-bit range.
pub fn sense<R: Rng + ?Sized>(
    node: &NodeConfig,
    section: &TrackSection,
    noise: Option<&mut R>,
) -> (u8, u8) {
    let mut vib = i16::from(section.quality_q.min(127));
    if let Some(rng) = noise {
        vib += rng.random_range(-1i16..=1);
    }
    let vib = vib.clamp(0, 127) as u8;
    let good = if section.rail_asymmetry() > node.comparator_threshold {
        0
    } else {
        1
    };
    (vib, good)
}

/// Whether a train at `train_pos_m` is close enough to wake the node.
pub fn in_activation_range(node: &NodeConfig, train_pos_m: f64) -> bool {
    (train_pos_m - node.position_m).abs() <= node.activation_range_m
}

/// Advances one node by one tick, returning a frame if one is due.
pub fn node_step<R: Rng + ?Sized>(
    node: &NodeConfig,
    state: &mut NodeState,
    section: &TrackSection,
    train_pos_m: f64,
    now_s: f64,
    code: &LinearCode,
    noise: Option<&mut R>,
) -> Option<Frame> {
    if !in_activation_range(node, train_pos_m) {
        state.mode = NodeMode::Dormant;
        return None;
    }
    if state.mode == NodeMode::Dormant {
        state.mode = NodeMode::Active;
        state.last_tx_time_s = None;
    }
    let due = match state.last_tx_time_s {
        None => true,
        Some(last) => now_s - last + TIME_EPS >= node.tx_period_s,
    };
    if !due {
        return None;
    }
    state.last_tx_time_s = Some(now_s);
    let (vib, good) = sense(node, section, noise);
    let payload =
        Payload12::pack(node.addr & 0x0F, vib, good).expect("fields are masked to their widths");
    Some(Frame {
        addr: payload.addr(),
        payload,
        codeword: code.encode_payload(payload),
    })
}
