//! Checkpoint construction: the CDCE payload, its canonical encoding, the
//! chain hash, and the signed record format.
//!
//! The chain hash is h_i = hash(h_{i-1} ‖ encode(δ_i) ‖ marker), with the
//! marker encoded separately as a 1-byte tag plus 8-byte gap field. The
//! CDCE tag entangles the three evidence domains: it MACs content hash,
//! behavioral digest, and SWF output under a key derived from the SWF
//! output itself, so forging any domain after the fact requires redoing the
//! sequential work.

use serde::{Deserialize, Serialize};

use crate::behavior::BehavioralFeatures;
use crate::crypto::{
    self, domains, mac, AttestationQuote, Digest, MacTag, SignatureBytes,
};
use crate::swf::SwfProof;
use crate::wire::{self, Reader, WireError};

pub const SESSION_ID_LEN: usize = 16;
pub const MARKER_ENCODED_LEN: usize = 9;

/// Checkpoint provenance marker, hashed into the chain alongside the
/// payload.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Marker {
    /// Produced on the normal cadence while online.
    Normal,
    /// First checkpoint after a crash recovery; `gap_us` is the claimed
    /// time since the last completed checkpoint (spans stacked crashes).
    Recovery { gap_us: u64 },
    /// Produced while partitioned from the verifier and buffered locally.
    OfflineBuffered,
}

impl Marker {
    pub fn encode(&self) -> [u8; MARKER_ENCODED_LEN] {
        let mut out = [0u8; MARKER_ENCODED_LEN];
        match self {
            Marker::Normal => {}
            Marker::Recovery { gap_us } => {
                out[0] = 1;
                out[1..].copy_from_slice(&gap_us.to_be_bytes());
            }
            Marker::OfflineBuffered => out[0] = 2,
        }
        out
    }

    pub fn decode(bytes: [u8; MARKER_ENCODED_LEN]) -> Result<Marker, WireError> {
        let gap = u64::from_be_bytes(bytes[1..].try_into().unwrap());
        match (bytes[0], gap) {
            (0, 0) => Ok(Marker::Normal),
            (1, g) if g > 0 => Ok(Marker::Recovery { gap_us: g }),
            (2, 0) => Ok(Marker::OfflineBuffered),
            (tag, _) => Err(WireError::InvalidValue { field: "marker", value: tag as u64 }),
        }
    }

    pub fn is_normal(&self) -> bool {
        matches!(self, Marker::Normal)
    }
}

/// δ_i: everything the checkpoint claims, minus the marker (which is
/// hashed separately) and the derived fields (tag, hash, signature).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointPayload {
    #[serde(with = "crate::crypto::hex_array")]
    pub session_id: [u8; SESSION_ID_LEN],
    pub index: u64,
    pub content_hash: Digest,
    pub behavioral: BehavioralFeatures,
    pub swf: SwfProof,
    pub local_time_us: u64,
    pub marker: Marker,
    /// Periodic re-attestation at the configured cadence; its freshness
    /// value is derived from the predecessor chain hash.
    pub requote: Option<AttestationQuote>,
}

impl CheckpointPayload {
    /// Canonical bytes of δ_i (marker excluded).
    pub fn delta_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(256);
        buf.extend_from_slice(&self.session_id);
        wire::put_u64(&mut buf, self.index);
        buf.extend_from_slice(&self.content_hash.0);
        wire::put_var_bytes(&mut buf, &self.behavioral.encode());
        self.swf.encode_into(&mut buf);
        wire::put_u64(&mut buf, self.local_time_us);
        match &self.requote {
            None => wire::put_u8(&mut buf, 0),
            Some(q) => {
                wire::put_u8(&mut buf, 1);
                wire::put_var_bytes(&mut buf, &q.encode());
            }
        }
        buf
    }

    fn decode_delta(r: &mut Reader<'_>, marker: Marker) -> Result<CheckpointPayload, WireError> {
        let session_id: [u8; SESSION_ID_LEN] = r.array()?;
        let index = r.u64()?;
        let content_hash = Digest(r.array()?);
        let feat_bytes = r.var_bytes()?;
        let mut fr = Reader::new(feat_bytes);
        let behavioral = BehavioralFeatures::decode(&mut fr)?;
        fr.finish()?;
        let swf = SwfProof::decode(r)?;
        let local_time_us = r.u64()?;
        let requote = match r.u8()? {
            0 => None,
            1 => {
                let qb = r.var_bytes()?;
                let mut qr = Reader::new(qb);
                let q = AttestationQuote::decode(&mut qr)
                    .map_err(|_| WireError::InvalidValue { field: "requote", value: 1 })?;
                qr.finish()?;
                Some(q)
            }
            v => return Err(WireError::InvalidValue { field: "requote_flag", value: v as u64 }),
        };
        Ok(CheckpointPayload {
            session_id,
            index,
            content_hash,
            behavioral,
            swf,
            local_time_us,
            marker,
            requote,
        })
    }

    /// h_i from the predecessor chain hash.
    pub fn chain_hash(&self, h_prev: &Digest) -> Digest {
        crypto::hash_parts(&[&h_prev.0, &self.delta_bytes(), &self.marker.encode()])
    }
}

/// Key for the cross-domain entanglement MAC, derived from the SWF output.
pub fn cdce_key(swf_output: &[u8; 32]) -> [u8; 32] {
    crypto::hash_parts(&[domains::CDCE_KEY, swf_output]).0
}

/// MAC binding content, behavioral, and temporal evidence.
pub fn cdce_tag(payload: &CheckpointPayload) -> MacTag {
    let key = cdce_key(&payload.swf.output);
    let mut msg = Vec::with_capacity(96);
    msg.extend_from_slice(&payload.content_hash.0);
    msg.extend_from_slice(&payload.behavioral.digest().0);
    msg.extend_from_slice(&payload.swf.output);
    mac(&key, &msg)
}

/// C_i: payload plus derived authentication fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub payload: CheckpointPayload,
    pub cdce_tag: MacTag,
    pub chain_hash: Digest,
    pub signature: SignatureBytes,
}

impl Checkpoint {
    /// Length-prefixed record: u32 length, then δ ‖ marker ‖ cdce_tag ‖
    /// h_i ‖ signature.
    pub fn encode_record(&self) -> Vec<u8> {
        let delta = self.payload.delta_bytes();
        let body_len = delta.len() + MARKER_ENCODED_LEN + 32 + 32 + 64;
        let mut buf = Vec::with_capacity(4 + body_len);
        wire::put_u32(&mut buf, body_len as u32);
        buf.extend_from_slice(&delta);
        buf.extend_from_slice(&self.payload.marker.encode());
        buf.extend_from_slice(&self.cdce_tag.0);
        buf.extend_from_slice(&self.chain_hash.0);
        buf.extend_from_slice(&self.signature.0);
        buf
    }

    pub fn decode_record(r: &mut Reader<'_>) -> Result<Checkpoint, WireError> {
        let body = r.var_bytes()?;
        if body.len() < MARKER_ENCODED_LEN + 32 + 32 + 64 {
            return Err(WireError::UnexpectedEof(body.len()));
        }
        let delta_len = body.len() - (MARKER_ENCODED_LEN + 32 + 32 + 64);
        let mut br = Reader::new(body);
        let delta = br.take(delta_len)?;
        let marker = Marker::decode(br.array()?)?;
        let cdce_tag = MacTag(br.array()?);
        let chain_hash = Digest(br.array()?);
        let signature = SignatureBytes(br.array()?);
        br.finish()?;

        let mut dr = Reader::new(delta);
        let payload = CheckpointPayload::decode_delta(&mut dr, marker)?;
        dr.finish()?;
        Ok(Checkpoint { payload, cdce_tag, chain_hash, signature })
    }

    pub fn index(&self) -> u64 {
        self.payload.index
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::behavior::extract_features;
    use crate::crypto::{KeyPair, MemoryHardParams};
    use crate::swf::{swf_step, SwfParams};

    fn sample_payload(marker: Marker) -> CheckpointPayload {
        let params = SwfParams {
            mh: MemoryHardParams::test_scale(),
            chain_length: 8,
            merkle_stride: 2,
            sample_count: 1,
        };
        let (proof, _) = swf_step(&params, &[1u8; 32], 1, b"sid-0123456789ab").unwrap();
        CheckpointPayload {
            session_id: *b"sid-0123456789ab",
            index: 1,
            content_hash: crypto::hash(b"document"),
            behavioral: extract_features(&[]),
            swf: proof,
            local_time_us: 30_000_000,
            marker,
            requote: None,
        }
    }

    #[test]
    fn marker_encoding_round_trips() {
        for m in [Marker::Normal, Marker::Recovery { gap_us: 12345 }, Marker::OfflineBuffered] {
            assert_eq!(Marker::decode(m.encode()).unwrap(), m);
        }
        // Recovery with zero gap and unknown tags are malformed.
        let mut zero_gap = [0u8; MARKER_ENCODED_LEN];
        zero_gap[0] = 1;
        assert!(Marker::decode(zero_gap).is_err());
        let mut unknown = [0u8; MARKER_ENCODED_LEN];
        unknown[0] = 9;
        assert!(Marker::decode(unknown).is_err());
        // Non-recovery markers must carry a zero gap field.
        let mut normal_with_gap = [0u8; MARKER_ENCODED_LEN];
        normal_with_gap[8] = 1;
        assert!(Marker::decode(normal_with_gap).is_err());
    }

    #[test]
    fn chain_hash_depends_on_marker_and_predecessor() {
        let p = sample_payload(Marker::Normal);
        let h0 = crypto::hash(b"h0");
        let h1 = crypto::hash(b"h1");
        assert_ne!(p.chain_hash(&h0), p.chain_hash(&h1));

        let recovery = CheckpointPayload { marker: Marker::Recovery { gap_us: 1 }, ..p.clone() };
        assert_ne!(p.chain_hash(&h0), recovery.chain_hash(&h0));
    }

    #[test]
    fn cdce_tag_changes_with_every_domain() {
        let p = sample_payload(Marker::Normal);
        let base = cdce_tag(&p);

        let mut content = p.clone();
        content.content_hash = crypto::hash(b"other document");
        assert_ne!(cdce_tag(&content), base);

        let mut behavioral = p.clone();
        behavioral.behavioral.keystroke_count = 42;
        assert_ne!(cdce_tag(&behavioral), base);

        let mut temporal = p.clone();
        temporal.swf.output[0] ^= 1;
        assert_ne!(cdce_tag(&temporal), base);
    }

    #[test]
    fn record_round_trips_through_encoding() {
        let payload = sample_payload(Marker::Recovery { gap_us: 61_000_000 });
        let kp = KeyPair::from_seed(&[4u8; 32]);
        let chain_hash = payload.chain_hash(&crypto::hash(b"prev"));
        let ckpt = Checkpoint {
            cdce_tag: cdce_tag(&payload),
            signature: kp.sign(&chain_hash.0),
            chain_hash,
            payload,
        };
        let bytes = ckpt.encode_record();
        let mut r = Reader::new(&bytes);
        let back = Checkpoint::decode_record(&mut r).unwrap();
        r.finish().unwrap();
        assert_eq!(back, ckpt);
    }
}
