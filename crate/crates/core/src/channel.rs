//! RF link between a trackside node and the train.
//!
//! Frames beyond `max_range_m` never arrive. Within range the receiver must
//! cancel the carrier Doppler offset using its own speed estimate; if the
//! leftover offset exceeds `doppler_tol_hz` the frame is lost. Surviving
//! frames see independent bit flips whose probability grows linearly from
//! `ber_near` at zero distance to `ber_far` at the range limit.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::codec::Codeword;

pub const SPEED_OF_LIGHT_MPS: f64 = 299_792_458.0;

fn default_carrier() -> f64 {
    915e6
}
fn default_max_range() -> f64 {
    1600.0
}
fn default_ber_near() -> f64 {
    0.001
}
fn default_ber_far() -> f64 {
    0.02
}
fn default_doppler_tol() -> f64 {
    200.0
}
fn default_c() -> f64 {
    SPEED_OF_LIGHT_MPS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    #[serde(default = "default_carrier")]
    pub carrier_hz: f64,
    #[serde(default = "default_max_range")]
    pub max_range_m: f64,
    #[serde(default = "default_ber_near")]
    pub ber_near: f64,
    #[serde(default = "default_ber_far")]
    pub ber_far: f64,
    #[serde(default = "default_doppler_tol")]
    pub doppler_tol_hz: f64,
    #[serde(default = "default_c")]
    pub c_mps: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            carrier_hz: default_carrier(),
            max_range_m: default_max_range(),
            ber_near: default_ber_near(),
            ber_far: default_ber_far(),
            doppler_tol_hz: default_doppler_tol(),
            c_mps: default_c(),
        }
    }
}

impl ChannelParams {
    /// Constant bit-flip probability regardless of distance.
    pub fn with_constant_ber(p: f64) -> Self {
        ChannelParams {
            ber_near: p,
            ber_far: p,
            ..ChannelParams::default()
        }
    }

    pub fn noiseless() -> Self {
        Self::with_constant_ber(0.0)
    }

    /// Every violated invariant, as human-readable text.
    // negated comparisons so that NaN fields are reported
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(0.0 <= self.ber_near && self.ber_near <= self.ber_far && self.ber_far < 0.5) {
            v.push(format!(
                "channel: need 0 <= ber_near <= ber_far < 0.5, got {} and {}",
                self.ber_near, self.ber_far
            ));
        }
        if !(self.max_range_m > 0.0) {
            v.push(format!(
                "channel: max_range_m must be > 0, got {}",
                self.max_range_m
            ));
        }
        if !(self.doppler_tol_hz >= 0.0) {
            v.push(format!(
                "channel: doppler_tol_hz must be >= 0, got {}",
                self.doppler_tol_hz
            ));
        }
        if !(self.carrier_hz > 0.0) {
            v.push(format!(
                "channel: carrier_hz must be > 0, got {}",
                self.carrier_hz
            ));
        }
        if !(self.c_mps > 0.0) {
            v.push(format!("channel: c_mps must be > 0, got {}", self.c_mps));
        }
        v
    }

    /// Per-bit flip probability at distance `d`.
    pub fn bit_error_prob(&self, distance_m: f64) -> f64 {
        let frac = (distance_m / self.max_range_m).clamp(0.0, 1.0);
        self.ber_near + (self.ber_far - self.ber_near) * frac
    }

    pub fn doppler_shift(&self, radial_speed_mps: f64) -> f64 {
        doppler_shift_with(self.carrier_hz, radial_speed_mps, self.c_mps)
    }
}

/// Carrier offset seen by a receiver closing at `radial_speed_mps`.
pub fn doppler_shift(carrier_hz: f64, radial_speed_mps: f64) -> f64 {
    doppler_shift_with(carrier_hz, radial_speed_mps, SPEED_OF_LIGHT_MPS)
}

fn doppler_shift_with(carrier_hz: f64, radial_speed_mps: f64, c_mps: f64) -> f64 {
    carrier_hz * radial_speed_mps / c_mps
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossReason {
    OutOfRange,
    DopplerFailure,
}

impl LossReason {
    pub fn as_str(self) -> &'static str {
        match self {
            LossReason::OutOfRange => "OutOfRange",
            LossReason::DopplerFailure => "DopplerFailure",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TxOutcome {
    Delivered { bits: Codeword, flipped: u32 },
    Lost(LossReason),
}

/// Sends one frame from `tx_pos_m` to a receiver at `rx_pos_m`.
///
/// Range and Doppler checks happen before any randomness is drawn, so lost
/// frames leave the rng untouched.
pub fn transmit<R: Rng + ?Sized>(
    frame: &Codeword,
    tx_pos_m: f64,
    rx_pos_m: f64,
    true_speed_mps: f64,
    speed_estimate_mps: f64,
    params: &ChannelParams,
    rng: &mut R,
) -> TxOutcome {
    let distance = (tx_pos_m - rx_pos_m).abs();
    if distance > params.max_range_m {
        return TxOutcome::Lost(LossReason::OutOfRange);
    }
    let residual =
        (params.doppler_shift(true_speed_mps) - params.doppler_shift(speed_estimate_mps)).abs();
    if residual > params.doppler_tol_hz {
        return TxOutcome::Lost(LossReason::DopplerFailure);
    }
    let p = params.bit_error_prob(distance);
    let mut bits = *frame;
    let mut flipped = 0;
    for i in 0..bits.len() {
        if rng.random::<f64>() < p {
            bits.flip(i);
            flipped += 1;
        }
    }
    TxOutcome::Delivered { bits, flipped }
}
