//! Onboard decision engine.
//!
//! A failure indication (goodness flag 0) never stops the train on its own.
//! It opens a pending record that is resolved by the next frame from the
//! same node or from the next node in the direction of travel: another
//! failure confirms it and raises the alarm, a healthy frame downgrades it to
//! a warning. A record left unresolved past its deadline is treated as
//! confirmed.

use crate::codec::Payload12;

pub const DEFAULT_CONFIRM_TIMEOUT_S: f64 = 2.0;

/// Number of distinct node addresses.
const ADDR_SPACE: u8 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TravelDirection {
    /// Node addresses increase along the direction of travel.
    #[default]
    Forward,
    Backward,
}

impl TravelDirection {
    /// Address of the node after `addr` in this direction.
    pub fn next_addr(self, addr: u8) -> u8 {
        match self {
            TravelDirection::Forward => (addr + 1) % ADDR_SPACE,
            TravelDirection::Backward => (addr + ADDR_SPACE - 1) % ADDR_SPACE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Normal,
    Pending,
    Warned,
    Alarmed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decision {
    Continue(f64),
    Warn,
    Alarm,
}

/// An unconfirmed failure report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendingFailure {
    pub addr: u8,
    pub deadline_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub v_profile_mps: f64,
    /// `None` waits indefinitely for confirmation.
    pub confirm_timeout_s: Option<f64>,
    pub direction: TravelDirection,
}

impl ControllerConfig {
    pub fn new(v_profile_mps: f64) -> Self {
        ControllerConfig {
            v_profile_mps,
            confirm_timeout_s: Some(DEFAULT_CONFIRM_TIMEOUT_S),
            direction: TravelDirection::Forward,
        }
    }
}

/// Maps a 7-bit track grade to a target speed, linear from 0 to `v_profile`.
pub fn target_speed(vib7: u8, v_profile_mps: f64) -> f64 {
    v_profile_mps * f64::from(vib7.min(127)) / 127.0
}

#[derive(Debug, Clone)]
pub struct Controller {
    config: ControllerConfig,
    mode: Mode,
    pending: Vec<PendingFailure>,
    target_mps: f64,
    last_good_quality: Option<u8>,
}

impl Controller {
    pub fn new(config: ControllerConfig) -> Self {
        Controller {
            target_mps: config.v_profile_mps,
            config,
            mode: Mode::Normal,
            pending: Vec::new(),
            last_good_quality: None,
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Oldest unresolved failure, if any.
    pub fn pending_addr(&self) -> Option<u8> {
        self.pending.first().map(|p| p.addr)
    }

    pub fn pending(&self) -> &[PendingFailure] {
        &self.pending
    }

    pub fn target_speed(&self) -> f64 {
        self.target_mps
    }

    pub fn last_good_quality(&self) -> Option<u8> {
        self.last_good_quality
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.config
    }

    fn resolves(&self, record: &PendingFailure, addr: u8) -> bool {
        addr == record.addr || addr == self.config.direction.next_addr(record.addr)
    }

    /// Feeds one error-corrected payload. Returns `None` once alarmed.
    pub fn on_frame(&mut self, payload: Payload12, now_s: f64) -> Option<Decision> {
        if self.mode == Mode::Alarmed {
            return None;
        }
        let addr = payload.addr();
        if payload.is_safe() {
            self.last_good_quality = Some(payload.vib());
            self.target_mps = target_speed(payload.vib(), self.config.v_profile_mps);
            let before = self.pending.len();
            let pending = std::mem::take(&mut self.pending);
            self.pending = pending
                .into_iter()
                .filter(|p| !self.resolves(p, addr))
                .collect();
            if self.pending.len() < before {
                if self.pending.is_empty() {
                    self.mode = Mode::Warned;
                }
                return Some(Decision::Warn);
            }
            return Some(Decision::Continue(self.target_mps));
        }

        if self.pending.iter().any(|p| self.resolves(p, addr)) {
            self.mode = Mode::Alarmed;
            self.pending.clear();
            return Some(Decision::Alarm);
        }
        let deadline_s = self
            .config
            .confirm_timeout_s
            .map_or(f64::INFINITY, |t| now_s + t);
        self.pending.push(PendingFailure { addr, deadline_s });
        self.mode = Mode::Pending;
        Some(Decision::Continue(self.target_mps))
    }

    /// Escalates to an alarm if any pending record is past its deadline.
    pub fn on_timeout(&mut self, now_s: f64) -> Option<Decision> {
        if self.mode != Mode::Pending {
            return None;
        }
        if self.pending.iter().any(|p| now_s > p.deadline_s) {
            self.mode = Mode::Alarmed;
            self.pending.clear();
            return Some(Decision::Alarm);
        }
        None
    }
}
