//! Authenticated keystroke ingestion and behavioral feature extraction.
//!
//! Events cross the trust boundary in constant-size batches: every 100 ms
//! frame produces exactly one batch of [`BATCH_CAPACITY`] slots, real
//! events first, padding after, MACed under the session channel key. An
//! observer of the (encrypted or not) batch stream learns only the frame
//! rate; replay is stopped by a strictly increasing sequence watermark.
//!
//! Features are computed over inter-keystroke intervals quantized to 5 ms
//! bins with a 2000 ms overflow cap, so the evidence record never carries
//! more timing precision than the quantization budget allows. Every
//! exported statistic derives from the quantized histogram.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{self, domains, mac, mac_verify, Digest, MacTag};
use crate::wire::{self, Reader, WireError};

/// Slots per batch (real + padding), one batch per 100 ms frame.
pub const BATCH_CAPACITY: usize = 32;
/// Frame length for batching.
pub const FRAME_MS: u64 = 100;
/// Quantization bin width.
pub const IKI_BIN_MS: u64 = 5;
/// Intervals at or above this cap land in the overflow bin.
pub const IKI_CAP_MS: u64 = 2000;
/// Overflow bin index; valid bins are `0..=IKI_OVERFLOW_BIN`.
pub const IKI_OVERFLOW_BIN: u16 = (IKI_CAP_MS / IKI_BIN_MS) as u16;
/// Total number of histogram bins.
pub const IKI_BIN_COUNT: usize = IKI_OVERFLOW_BIN as usize + 1;
/// IKIs at or above this count as pauses for the cognitive-load proxies.
pub const PAUSE_THRESHOLD_MS: u64 = 1000;

const EVENT_ENCODED_LEN: usize = 8 + 8 + 1 + 1;
/// Encoded batch length: index + slot count + slots + tag. Constant by
/// construction.
pub const BATCH_ENCODED_LEN: usize = 8 + 1 + BATCH_CAPACITY * EVENT_ENCODED_LEN + 32;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChannelError {
    /// Tag did not verify: batch modified in transit. Whole batch rejected.
    #[error("batch MAC verification failed")]
    BadMac,
    /// A sequence number at or below the watermark: replayed or reordered
    /// input. Whole batch rejected.
    #[error("replay detected: sequence {seq} not above watermark {watermark}")]
    ReplayDetected { seq: u64, watermark: u64 },
    #[error("batch holds {0} events, capacity is {BATCH_CAPACITY}")]
    Overflow(usize),
    #[error("malformed batch: {0}")]
    Malformed(#[from] WireError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[repr(u8)]
pub enum KeyClass {
    Printable = 0,
    Edit = 1,
    Navigation = 2,
    Pad = 3,
}

impl KeyClass {
    fn from_u8(v: u8) -> Result<KeyClass, WireError> {
        match v {
            0 => Ok(KeyClass::Printable),
            1 => Ok(KeyClass::Edit),
            2 => Ok(KeyClass::Navigation),
            3 => Ok(KeyClass::Pad),
            _ => Err(WireError::InvalidValue { field: "key_class", value: v as u64 }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeystrokeEvent {
    /// Strictly increasing across the whole session, padding included.
    pub sequence_number: u64,
    /// Microseconds since session start.
    pub timestamp_us: u64,
    pub key_class: KeyClass,
    pub is_padding: bool,
}

impl KeystrokeEvent {
    fn encode_into(&self, buf: &mut Vec<u8>) {
        wire::put_u64(buf, self.sequence_number);
        wire::put_u64(buf, self.timestamp_us);
        wire::put_u8(buf, self.key_class as u8);
        wire::put_u8(buf, self.is_padding as u8);
    }

    fn decode(r: &mut Reader<'_>) -> Result<KeystrokeEvent, WireError> {
        let sequence_number = r.u64()?;
        let timestamp_us = r.u64()?;
        let key_class = KeyClass::from_u8(r.u8()?)?;
        let is_padding = match r.u8()? {
            0 => false,
            1 => true,
            v => return Err(WireError::InvalidValue { field: "is_padding", value: v as u64 }),
        };
        Ok(KeystrokeEvent { sequence_number, timestamp_us, key_class, is_padding })
    }
}

/// One frame's worth of slots plus its authentication tag.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventBatch {
    pub batch_index: u64,
    pub events: Vec<KeystrokeEvent>,
    pub tag: MacTag,
}

impl EventBatch {
    /// Assemble the frame's batch: real events first, then padding slots
    /// stamped at `frame_end_us`, consuming sequence numbers from
    /// `next_seq`. Real events must already carry their sequence numbers.
    pub fn build(
        batch_index: u64,
        real: &[KeystrokeEvent],
        next_seq: &mut u64,
        frame_end_us: u64,
        channel_key: &[u8; 32],
    ) -> Result<EventBatch, ChannelError> {
        if real.len() > BATCH_CAPACITY {
            return Err(ChannelError::Overflow(real.len()));
        }
        let mut events = real.to_vec();
        while events.len() < BATCH_CAPACITY {
            let sequence_number = *next_seq;
            *next_seq += 1;
            events.push(KeystrokeEvent {
                sequence_number,
                timestamp_us: frame_end_us,
                key_class: KeyClass::Pad,
                is_padding: true,
            });
        }
        let mut batch = EventBatch { batch_index, events, tag: MacTag([0; 32]) };
        batch.tag = batch.compute_tag(channel_key);
        Ok(batch)
    }

    fn signed_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(BATCH_ENCODED_LEN - 32 + domains::BATCH_MAC.len());
        buf.extend_from_slice(domains::BATCH_MAC);
        wire::put_u64(&mut buf, self.batch_index);
        wire::put_u8(&mut buf, self.events.len() as u8);
        for e in &self.events {
            e.encode_into(&mut buf);
        }
        buf
    }

    fn compute_tag(&self, channel_key: &[u8; 32]) -> MacTag {
        mac(channel_key, &self.signed_bytes())
    }

    /// Constant-length canonical encoding.
    pub fn encode(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(BATCH_ENCODED_LEN);
        wire::put_u64(&mut buf, self.batch_index);
        wire::put_u8(&mut buf, self.events.len() as u8);
        for e in &self.events {
            e.encode_into(&mut buf);
        }
        buf.extend_from_slice(&self.tag.0);
        debug_assert_eq!(buf.len(), BATCH_ENCODED_LEN);
        buf
    }

    pub fn decode(bytes: &[u8]) -> Result<EventBatch, ChannelError> {
        let mut r = Reader::new(bytes);
        let batch_index = r.u64()?;
        let n = r.u8()? as usize;
        if n != BATCH_CAPACITY {
            return Err(ChannelError::Malformed(WireError::InvalidValue {
                field: "slot_count",
                value: n as u64,
            }));
        }
        let mut events = Vec::with_capacity(n);
        for _ in 0..n {
            events.push(KeystrokeEvent::decode(&mut r)?);
        }
        let tag = MacTag(r.array()?);
        r.finish().map_err(ChannelError::Malformed)?;
        Ok(EventBatch { batch_index, events, tag })
    }
}

/// Receiving end of the Tier-1 input channel: authenticates batches,
/// enforces the replay watermark, queues accepted real events for the next
/// checkpoint window.
pub struct Channel {
    key: [u8; 32],
    watermark: u64,
    pending: Vec<KeystrokeEvent>,
}

/// Open the channel under the session channel key.
pub fn channel_open(session_key: [u8; 32]) -> Channel {
    Channel { key: session_key, watermark: 0, pending: Vec::new() }
}

impl Channel {
    /// Validate one batch. Accepts iff the tag verifies and every slot's
    /// sequence number exceeds the watermark; on acceptance the watermark
    /// advances to the batch's maximum sequence number and the real events
    /// join the pending window. Returns the number of real events accepted.
    pub fn submit(&mut self, batch: &EventBatch) -> Result<usize, ChannelError> {
        if batch.events.len() != BATCH_CAPACITY {
            return Err(ChannelError::Overflow(batch.events.len()));
        }
        if !mac_verify(&self.key, &batch.signed_bytes(), &batch.tag) {
            return Err(ChannelError::BadMac);
        }
        let mut prev = self.watermark;
        for e in &batch.events {
            if e.sequence_number <= prev {
                return Err(ChannelError::ReplayDetected {
                    seq: e.sequence_number,
                    watermark: self.watermark,
                });
            }
            prev = e.sequence_number;
        }
        self.watermark = prev;
        let accepted = batch.events.iter().filter(|e| !e.is_padding).count();
        self.pending.extend(batch.events.iter().filter(|e| !e.is_padding));
        Ok(accepted)
    }

    /// Drain the accepted events for the closing checkpoint window.
    pub fn take_window(&mut self) -> Vec<KeystrokeEvent> {
        std::mem::take(&mut self.pending)
    }

    pub fn watermark(&self) -> u64 {
        self.watermark
    }

    /// Restore replay state from a sealed snapshot after recovery.
    pub fn restore_watermark(&mut self, watermark: u64) {
        self.watermark = watermark;
    }
}

/// 5 ms quantization with a 2000 ms overflow cap.
pub fn quantize_iki(raw_interval_us: u64) -> u16 {
    let ms = raw_interval_us / 1000;
    if ms >= IKI_CAP_MS {
        IKI_OVERFLOW_BIN
    } else {
        (ms / IKI_BIN_MS) as u16
    }
}

/// Per-checkpoint behavioral summary. Histogram bins are 5 ms wide; all
/// derived statistics are computed from the quantized bins, never from raw
/// timestamps, so the record reveals nothing beyond the histogram.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BehavioralFeatures {
    pub keystroke_count: u32,
    /// Sparse (bin, count) pairs, sorted by bin, zero counts omitted.
    pub iki_histogram: Vec<(u16, u32)>,
    pub shannon_entropy_bits: f64,
    /// Mean of quantized bin lower edges, ms.
    pub mean_iki_ms: f64,
    /// Fraction of IKIs at or above the 1 s pause threshold.
    pub pause_rate: f64,
    /// Mean typing-burst length in keystrokes (bursts split at pauses).
    pub mean_burst_len: f64,
    pub longest_burst: u32,
    /// Always true: features are computed post-quantization.
    pub quantized: bool,
}

impl BehavioralFeatures {
    pub fn empty() -> BehavioralFeatures {
        BehavioralFeatures {
            keystroke_count: 0,
            iki_histogram: Vec::new(),
            shannon_entropy_bits: 0.0,
            mean_iki_ms: 0.0,
            pause_rate: 0.0,
            mean_burst_len: 0.0,
            longest_burst: 0,
            quantized: true,
        }
    }

    pub fn interval_total(&self) -> u64 {
        self.iki_histogram.iter().map(|(_, c)| *c as u64).sum()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        wire::put_u32(&mut buf, self.keystroke_count);
        wire::put_u16(&mut buf, self.iki_histogram.len() as u16);
        for (bin, count) in &self.iki_histogram {
            wire::put_u16(&mut buf, *bin);
            wire::put_u32(&mut buf, *count);
        }
        wire::put_f64(&mut buf, self.shannon_entropy_bits);
        wire::put_f64(&mut buf, self.mean_iki_ms);
        wire::put_f64(&mut buf, self.pause_rate);
        wire::put_f64(&mut buf, self.mean_burst_len);
        wire::put_u32(&mut buf, self.longest_burst);
        wire::put_u8(&mut buf, self.quantized as u8);
        buf
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<BehavioralFeatures, WireError> {
        let keystroke_count = r.u32()?;
        let nbins = r.u16()? as usize;
        let mut iki_histogram = Vec::with_capacity(nbins);
        let mut prev_bin: Option<u16> = None;
        for _ in 0..nbins {
            let bin = r.u16()?;
            let count = r.u32()?;
            if bin as usize >= IKI_BIN_COUNT || prev_bin.is_some_and(|p| p >= bin) || count == 0 {
                return Err(WireError::InvalidValue { field: "iki_histogram", value: bin as u64 });
            }
            prev_bin = Some(bin);
            iki_histogram.push((bin, count));
        }
        let shannon_entropy_bits = r.f64()?;
        let mean_iki_ms = r.f64()?;
        let pause_rate = r.f64()?;
        let mean_burst_len = r.f64()?;
        let longest_burst = r.u32()?;
        let quantized = r.u8()? != 0;
        Ok(BehavioralFeatures {
            keystroke_count,
            iki_histogram,
            shannon_entropy_bits,
            mean_iki_ms,
            pause_rate,
            mean_burst_len,
            longest_burst,
            quantized,
        })
    }

    pub fn digest(&self) -> Digest {
        crypto::hash(&self.encode())
    }
}

/// Compute the window's features from its accepted events.
///
/// Events must be sorted by sequence number; padding is skipped defensively
/// even though the channel already filters it. An empty window yields
/// zero-count features.
pub fn extract_features(events: &[KeystrokeEvent]) -> BehavioralFeatures {
    let real: Vec<&KeystrokeEvent> = events.iter().filter(|e| !e.is_padding).collect();
    debug_assert!(real.windows(2).all(|w| w[0].sequence_number < w[1].sequence_number));

    let count = real.len() as u32;
    if real.len() < 2 {
        return BehavioralFeatures { keystroke_count: count, ..BehavioralFeatures::empty() };
    }

    let mut bins = [0u32; IKI_BIN_COUNT];
    let mut burst_len = 1u32;
    let mut bursts: Vec<u32> = Vec::new();
    for pair in real.windows(2) {
        let raw = pair[1].timestamp_us.saturating_sub(pair[0].timestamp_us);
        let bin = quantize_iki(raw);
        bins[bin as usize] += 1;
        if (bin as u64) * IKI_BIN_MS >= PAUSE_THRESHOLD_MS {
            bursts.push(burst_len);
            burst_len = 1;
        } else {
            burst_len += 1;
        }
    }
    bursts.push(burst_len);

    let total: u64 = bins.iter().map(|&c| c as u64).sum();
    let mut entropy = 0.0f64;
    let mut mean_weighted = 0.0f64;
    let mut pauses = 0u64;
    let mut iki_histogram = Vec::new();
    for (bin, &c) in bins.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let p = c as f64 / total as f64;
        entropy -= p * p.log2();
        mean_weighted += p * (bin as u64 * IKI_BIN_MS) as f64;
        if (bin as u64) * IKI_BIN_MS >= PAUSE_THRESHOLD_MS {
            pauses += c as u64;
        }
        iki_histogram.push((bin as u16, c));
    }

    BehavioralFeatures {
        keystroke_count: count,
        iki_histogram,
        shannon_entropy_bits: entropy.max(0.0),
        mean_iki_ms: mean_weighted,
        pause_rate: pauses as f64 / total as f64,
        mean_burst_len: real.len() as f64 / bursts.len() as f64,
        longest_burst: bursts.iter().copied().max().unwrap_or(0),
        quantized: true,
    }
}

/// Total raw entropy bits contributed by a window: count × bits-per-IKI,
/// rounded down. The epsilon guard keeps exact decimal products (such as
/// 300 × 7.6 = 2280) from landing one below their value in binary floating
/// point.
pub fn entropy_budget(keystroke_count: u64, bits_per_iki: f64) -> u64 {
    if bits_per_iki <= 0.0 {
        return 0;
    }
    (keystroke_count as f64 * bits_per_iki + 1e-9).floor() as u64
}
