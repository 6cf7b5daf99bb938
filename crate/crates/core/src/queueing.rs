//! Request and virtual queues.
//!
//! The request queue is a bit counter plus an in-order ledger of the chunks
//! it accounts for. Service always drains the head of the ledger, so chunks
//! complete strictly in playback order.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// One requested chunk.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChunkRecord {
    pub file: usize,
    /// 1-based chunk index.
    pub index: u32,
    /// 1-based quality level.
    pub level: usize,
    pub total_bits: u64,
    pub remaining_bits: u64,
    pub request_slot: u32,
}

impl ChunkRecord {
    pub fn new(file: usize, index: u32, level: usize, total_bits: u64, request_slot: u32) -> Self {
        ChunkRecord {
            file,
            index,
            level,
            total_bits,
            remaining_bits: total_bits,
            request_slot,
        }
    }
}

/// A chunk whose last bit was served.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Completed {
    pub index: u32,
    pub level: usize,
    pub request_slot: u32,
}

/// `max{q - served + arrived, 0}`.
pub fn next_backlog(q: u64, served: u64, arrived: u64) -> u64 {
    (q + arrived).saturating_sub(served)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RequestQueue {
    user: usize,
    backlog: u64,
    ledger: VecDeque<ChunkRecord>,
    last_index: u32,
    bits_arrived: u64,
    bits_served: u64,
}

impl RequestQueue {
    pub fn new(user: usize) -> Self {
        RequestQueue {
            user,
            ..Default::default()
        }
    }

    /// Q_u in bits.
    pub fn backlog(&self) -> u64 {
        self.backlog
    }

    pub fn ledger(&self) -> &VecDeque<ChunkRecord> {
        &self.ledger
    }

    pub fn last_index(&self) -> u32 {
        self.last_index
    }

    pub fn bits_arrived(&self) -> u64 {
        self.bits_arrived
    }

    pub fn bits_served(&self) -> u64 {
        self.bits_served
    }

    /// Appends the next chunk in playback order.
    pub fn enqueue_chunk(&mut self, rec: ChunkRecord) -> Result<()> {
        let expected = self.last_index + 1;
        if rec.index != expected {
            return Err(Error::Sequencing {
                user: self.user,
                expected,
                got: rec.index,
            });
        }
        if rec.total_bits == 0 || rec.remaining_bits != rec.total_bits {
            return Err(Error::Domain(format!(
                "chunk {} must arrive whole with a positive size",
                rec.index
            )));
        }
        self.backlog += rec.total_bits;
        self.bits_arrived += rec.total_bits;
        self.last_index = rec.index;
        self.ledger.push_back(rec);
        Ok(())
    }

    /// Serves `bits` from the head of line. Fully drained chunks are returned
    /// in order; service beyond the ledger is discarded.
    pub fn serve_bits(&mut self, bits: u64) -> Vec<Completed> {
        let mut left = bits;
        let mut done = Vec::new();
        while left > 0 {
            let Some(head) = self.ledger.front_mut() else {
                break;
            };
            let take = left.min(head.remaining_bits);
            head.remaining_bits -= take;
            left -= take;
            if head.remaining_bits == 0 {
                let rec = self.ledger.pop_front().expect("head exists");
                done.push(Completed {
                    index: rec.index,
                    level: rec.level,
                    request_slot: rec.request_slot,
                });
            }
        }
        let used = self.backlog.min(bits);
        self.bits_served += used;
        self.backlog = next_backlog(self.backlog, bits, 0);
        debug_assert_eq!(self.backlog, self.ledger.iter().map(|r| r.remaining_bits).sum::<u64>());
        done
    }
}

/// Θ_u, in quality units.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct VirtualQueue(f64);

impl VirtualQueue {
    pub fn new(value: f64) -> Self {
        VirtualQueue(value.max(0.0))
    }

    pub fn value(&self) -> f64 {
        self.0
    }

    /// `Θ <- max{Θ + γ - D, 0}`.
    pub fn update(&mut self, gamma: f64, delivered_quality: f64) {
        self.0 = (self.0 + gamma - delivered_quality).max(0.0);
    }
}
