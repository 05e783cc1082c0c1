//! Message trace and payload accounting. The trace is the only inter-site
//! channel in the simulation, so every cross-site data movement shows up
//! here with its serialized byte and element counts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Length prefix added to every simulated wire payload (4-byte big-endian
/// frame length, as used by the knowledge-map daemon protocol).
pub const FRAME_PREFIX_BYTES: usize = 4;

/// Encodes a payload as a length-prefixed JSON frame.
pub fn encode_frame<T: Serialize>(payload: &T) -> Result<Vec<u8>> {
    let body = serde_json::to_vec(payload)?;
    let mut frame = Vec::with_capacity(body.len() + FRAME_PREFIX_BYTES);
    frame.extend_from_slice(&(body.len() as u32).to_be_bytes());
    frame.extend_from_slice(&body);
    Ok(frame)
}

/// Decodes a length-prefixed JSON frame.
pub fn decode_frame<T: for<'de> Deserialize<'de>>(frame: &[u8]) -> Result<T> {
    if frame.len() < FRAME_PREFIX_BYTES {
        return Err(Error::Parse("frame shorter than length prefix".into()));
    }
    let len = u32::from_be_bytes(frame[..4].try_into().unwrap()) as usize;
    if frame.len() != FRAME_PREFIX_BYTES + len {
        return Err(Error::Parse(format!(
            "frame length mismatch: prefix says {len}, body has {}",
            frame.len() - FRAME_PREFIX_BYTES
        )));
    }
    Ok(serde_json::from_slice(&frame[FRAME_PREFIX_BYTES..])?)
}

/// Serialized size a payload would occupy on the simulated wire.
pub fn frame_bytes<T: Serialize>(payload: &T) -> usize {
    serde_json::to_vec(payload).map(|b| b.len()).unwrap_or(0) + FRAME_PREFIX_BYTES
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MsgRecord {
    pub round: u64,
    pub from: String,
    pub to: String,
    pub kind: String,
    pub bytes: usize,
    pub elements: usize,
}

/// Append-only record of simulated messages with monotone rounds.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MessageTrace {
    records: Vec<MsgRecord>,
}

impl MessageTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(
        &mut self,
        round: u64,
        from: impl Into<String>,
        to: impl Into<String>,
        kind: impl Into<String>,
        bytes: usize,
        elements: usize,
    ) {
        if let Some(last) = self.records.last() {
            assert!(round >= last.round, "trace rounds must be monotone");
        }
        self.records.push(MsgRecord {
            round,
            from: from.into(),
            to: to.into(),
            kind: kind.into(),
            bytes,
            elements,
        });
    }

    pub fn records(&self) -> &[MsgRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last_round(&self) -> u64 {
        self.records.last().map_or(0, |r| r.round)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round: u64,
    pub messages: usize,
    pub bytes: usize,
    pub elements: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccountSummary {
    pub total_bytes: usize,
    pub total_elements: usize,
    pub per_round: Vec<RoundSummary>,
}

/// Exact totals and a per-round breakdown of a trace.
pub fn account(trace: &MessageTrace) -> AccountSummary {
    let mut per_round: Vec<RoundSummary> = Vec::new();
    let mut total_bytes = 0;
    let mut total_elements = 0;
    for r in trace.records() {
        total_bytes += r.bytes;
        total_elements += r.elements;
        match per_round.last_mut() {
            Some(summary) if summary.round == r.round => {
                summary.messages += 1;
                summary.bytes += r.bytes;
                summary.elements += r.elements;
            }
            _ => per_round.push(RoundSummary {
                round: r.round,
                messages: 1,
                bytes: r.bytes,
                elements: r.elements,
            }),
        }
    }
    AccountSummary {
        total_bytes,
        total_elements,
        per_round,
    }
}
