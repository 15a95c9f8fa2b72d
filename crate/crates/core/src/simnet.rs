//! Simulated synchronous parameter server with bit accounting.
//!
//! A round broadcasts `x^k` (counted only if [`CostModel::count_broadcast`])
//! and gathers one encoded payload per worker, folded in ascending worker id.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantize::{encode_wire_with, FloatWidth, QuantizedVector, ScalePolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct CostModel {
    /// Width `b` of a transmitted float (32 or 64).
    #[serde(default)]
    pub float_bits: FloatWidth,
    /// Count the broadcast of `x^k` as `d·b` bits.
    #[serde(default)]
    pub count_broadcast: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Server to workers.
    Broadcast,
    /// Workers to server.
    Gather,
}

/// One logged transfer. Broadcasts are logged once per round with
/// `worker = None`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub iteration: usize,
    pub direction: Direction,
    pub worker: Option<usize>,
    pub bits: u64,
}

/// Bit counters per direction and an optional message log.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Channel {
    uplink_bits: u64,
    downlink_bits: u64,
    rounds: usize,
    keep_log: bool,
    log: Vec<Message>,
}

/// Bits moved in one round.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RoundDelta {
    pub broadcast_bits: u64,
    /// Encoded payload size per worker, in worker order.
    pub gather_bits: Vec<u64>,
}

impl RoundDelta {
    pub fn uplink(&self) -> u64 {
        self.gather_bits.iter().sum()
    }
}

impl Channel {
    pub fn new(keep_log: bool) -> Self {
        Channel {
            keep_log,
            ..Default::default()
        }
    }

    pub fn uplink_bits(&self) -> u64 {
        self.uplink_bits
    }

    pub fn downlink_bits(&self) -> u64 {
        self.downlink_bits
    }

    pub fn total_bits(&self) -> u64 {
        self.uplink_bits + self.downlink_bits
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn log(&self) -> &[Message] {
        &self.log
    }

    pub fn keeps_log(&self) -> bool {
        self.keep_log
    }

    fn record(&mut self, msg: Message) {
        match msg.direction {
            Direction::Broadcast => self.downlink_bits += msg.bits,
            Direction::Gather => self.uplink_bits += msg.bits,
        }
        if self.keep_log {
            self.log.push(msg);
        }
    }

    /// Recomputes `(uplink, downlink)` from the log.
    pub fn replay(&self) -> (u64, u64) {
        self.log
            .iter()
            .fold((0, 0), |(up, down), m| match m.direction {
                Direction::Gather => (up + m.bits, down),
                Direction::Broadcast => (up, down + m.bits),
            })
    }

    /// Writes the log as JSON lines.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for m in &self.log {
            serde_json::to_writer(&mut out, m).map_err(|e| Error::Io(e.to_string()))?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// A channel together with its cost model.
#[derive(Debug, Clone, Default)]
pub struct Network {
    pub cost: CostModel,
    pub channel: Channel,
}

impl Network {
    pub fn new(cost: CostModel, keep_log: bool) -> Self {
        Network {
            cost,
            channel: Channel::new(keep_log),
        }
    }

    /// One synchronous round at iteration `k` for an iterate of dimension
    /// `dim`. Every payload is encoded (scales rounded to the header width)
    /// and its actual length is charged to the uplink.
    pub fn round_trip(
        &mut self,
        k: usize,
        dim: usize,
        payloads: &[QuantizedVector],
    ) -> Result<RoundDelta> {
        let width = self.cost.float_bits;
        self.round_trip_with(k, dim, payloads.len(), |i| {
            encode_wire_with(&payloads[i], width, ScalePolicy::Nearest).map(|b| b.len() as u64)
        })
    }

    /// As [`Network::round_trip`] with a caller-supplied encoder returning
    /// the payload size of worker `i`. Encoder errors carry the worker id.
    pub fn round_trip_with<F>(
        &mut self,
        k: usize,
        dim: usize,
        workers: usize,
        mut encoder: F,
    ) -> Result<RoundDelta>
    where
        F: FnMut(usize) -> Result<u64>,
    {
        let mut gather_bits = Vec::with_capacity(workers);
        for i in 0..workers {
            let bits = encoder(i).map_err(|e| Error::Worker {
                worker: i,
                source: Box::new(e),
            })?;
            gather_bits.push(bits);
        }
        let broadcast_bits = if self.cost.count_broadcast {
            (dim as u64) * self.cost.float_bits.bits() as u64
        } else {
            0
        };
        if self.cost.count_broadcast {
            self.channel.record(Message {
                iteration: k,
                direction: Direction::Broadcast,
                worker: None,
                bits: broadcast_bits,
            });
        }
        for (i, &bits) in gather_bits.iter().enumerate() {
            self.channel.record(Message {
                iteration: k,
                direction: Direction::Gather,
                worker: Some(i),
                bits,
            });
        }
        self.channel.rounds += 1;
        Ok(RoundDelta {
            broadcast_bits,
            gather_bits,
        })
    }
}

/// Ratio of a reference cost to the bits actually counted.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressionRatio {
    /// One entry per logged round, in iteration order (empty without a log).
    pub per_round: Vec<f64>,
    pub cumulative: f64,
}

/// `baseline_bits_per_round / actual`, per round and over the whole run.
/// A typical baseline is `n · d · b`, the cost of sending dense floats.
pub fn compression_ratio(
    channel: &Channel,
    baseline_bits_per_round: f64,
) -> Result<CompressionRatio> {
    if !(baseline_bits_per_round > 0.0) {
        return Err(Error::InvalidParameter("baseline bits must be > 0".into()));
    }
    let mut per_round = Vec::new();
    let mut current: Option<(usize, u64)> = None;
    for m in channel.log() {
        match current {
            Some((k, ref mut bits)) if k == m.iteration => *bits += m.bits,
            _ => {
                if let Some((_, bits)) = current {
                    per_round.push(ratio(baseline_bits_per_round, bits));
                }
                current = Some((m.iteration, m.bits));
            }
        }
    }
    if let Some((_, bits)) = current {
        per_round.push(ratio(baseline_bits_per_round, bits));
    }
    let cumulative = ratio(
        baseline_bits_per_round * channel.rounds() as f64,
        channel.total_bits(),
    );
    Ok(CompressionRatio {
        per_round,
        cumulative,
    })
}

fn ratio(baseline: f64, actual: u64) -> f64 {
    if actual == 0 {
        f64::INFINITY
    } else {
        baseline / actual as f64
    }
}
