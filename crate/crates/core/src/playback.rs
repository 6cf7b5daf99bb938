//! Client playback buffer with adaptive pre-buffering.
//!
//! Playback starts once the buffer holds `xi * E_t` chunks, where `E_t` is
//! the largest delivery delay observed over the last `window` slots. A stall
//! sends the client back to buffering, and the same rule decides when to
//! resume. Playback of chunk-slot `t` consumes one chunk from slot
//! `T_u + 1` on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::queueing::Completed;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BufferingParams {
    /// Threshold multiplier ξ.
    pub xi: f64,
    /// Sliding window Δ, in slots.
    pub window: u32,
}

impl Default for BufferingParams {
    fn default() -> Self {
        BufferingParams { xi: 2.0, window: 20 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    /// Waiting for the start threshold; `rebuffering` once playback has
    /// started at least once.
    Buffering {
        rebuffering: bool,
    },
    Playing,
    Finished,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Delivery {
    pub index: u32,
    pub request_slot: u32,
    pub arrival_slot: u32,
    /// `arrival_slot - request_slot`.
    pub delay: u32,
}

/// Largest delay among chunks that arrived in `[t - window + 1, t]`.
/// Falls back to `previous` when nothing arrived; never below one slot.
pub fn window_max_delay(log: &[Delivery], t: u32, window: u32, previous: u32) -> u32 {
    let earliest = t.saturating_sub(window) + 1;
    log.iter()
        .rev()
        .skip_while(|d| d.arrival_slot > t)
        .take_while(|d| d.arrival_slot >= earliest)
        .map(|d| d.delay)
        .max()
        .unwrap_or(previous)
        .max(1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlaybackState {
    params: BufferingParams,
    total_chunks: u32,
    /// Ψ.
    buffer: u32,
    phase: Phase,
    start_slot: Option<u32>,
    log: Vec<Delivery>,
    estimate: u32,
    played: u32,
    stall_events: u32,
    stall_slots: u32,
}

impl PlaybackState {
    pub fn new(total_chunks: u32, params: BufferingParams) -> Self {
        PlaybackState {
            params,
            total_chunks,
            buffer: 0,
            phase: Phase::Buffering { rebuffering: false },
            start_slot: None,
            log: Vec::new(),
            estimate: 1,
            played: 0,
            stall_events: 0,
            stall_slots: 0,
        }
    }

    pub fn buffer(&self) -> u32 {
        self.buffer
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// T_u, the slot at which playback was first released.
    pub fn start_slot(&self) -> Option<u32> {
        self.start_slot
    }

    pub fn deliveries(&self) -> &[Delivery] {
        &self.log
    }

    pub fn delivered(&self) -> u32 {
        self.log.len() as u32
    }

    pub fn played(&self) -> u32 {
        self.played
    }

    pub fn stall_events(&self) -> u32 {
        self.stall_events
    }

    pub fn stall_slots(&self) -> u32 {
        self.stall_slots
    }

    /// Last computed E_t.
    pub fn delay_estimate(&self) -> u32 {
        self.estimate
    }

    /// Stall time as a percentage of the video duration.
    pub fn rebuffer_pct(&self) -> f64 {
        100.0 * self.stall_slots as f64 / self.total_chunks as f64
    }

    /// Advances playback through slot `t`, given the chunks completed in it.
    pub fn step(&mut self, arrivals: &[Completed], t: u32) -> Result<()> {
        for c in arrivals {
            let expected = self.delivered() + 1;
            if c.index != expected {
                return Err(Error::Domain(format!(
                    "playback expected chunk {expected}, got chunk {}",
                    c.index
                )));
            }
            if c.request_slot > t {
                return Err(Error::Domain(format!(
                    "chunk {} delivered at slot {t} before its request slot {}",
                    c.index, c.request_slot
                )));
            }
            self.log.push(Delivery {
                index: c.index,
                request_slot: c.request_slot,
                arrival_slot: t,
                delay: t - c.request_slot,
            });
        }
        let arrived = arrivals.len() as u32;

        match self.phase {
            Phase::Playing => {
                if self.buffer > 0 {
                    self.buffer -= 1;
                    self.played += 1;
                } else {
                    self.stall_events += 1;
                    self.stall_slots += 1;
                    self.phase = Phase::Buffering { rebuffering: true };
                }
                self.buffer += arrived;
                if self.played == self.total_chunks {
                    self.phase = Phase::Finished;
                }
            }
            Phase::Buffering { rebuffering } => {
                if rebuffering {
                    self.stall_slots += 1;
                }
                self.buffer += arrived;
            }
            Phase::Finished => self.buffer += arrived,
        }

        self.estimate = window_max_delay(&self.log, t, self.params.window, self.estimate);
        if let Phase::Buffering { .. } = self.phase {
            let threshold = self.params.xi * self.estimate as f64;
            let all_in = self.delivered() == self.total_chunks;
            if self.buffer > 0 && (self.buffer as f64 >= threshold || all_in) {
                self.phase = Phase::Playing;
                self.start_slot.get_or_insert(t);
            }
        }
        Ok(())
    }
}
