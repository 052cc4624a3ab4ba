//! Evidence chain session engine.
//!
//! Drives the checkpoint lifecycle: init binds a fresh session keypair and
//! SWF chain to a verifier nonce under an attestation quote; each tick
//! drains the behavioral window, runs one SWF step, entangles the three
//! evidence domains, extends the hash chain, signs, and seals the updated
//! state against the monotonic counter. Recovery unseals, checks the
//! counter, and precomputes the next memory-hard seed; the first tick after
//! recovery carries a Recovery marker whose gap spans all time since the
//! last completed checkpoint (stacked crashes collapse into one marker).
//!
//! Seal protocol: state is sealed against counter value c+1, then the
//! counter is incremented. Recovery accepts a sealed value of live or
//! live+1 (the latter completes an interrupted increment); anything else is
//! a rollback.

pub mod checkpoint;
pub mod file;
pub mod store;

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::behavior::{channel_open, extract_features, Channel, ChannelError, EventBatch};
use crate::crypto::seal::{counter_nonce, seal, unseal};
use crate::crypto::{
    self, domains, AttestationQuote, CryptoError, Digest, KeyPair, MonotonicCounter,
    PlatformRoot, SealKey,
};
use crate::swf::{
    derive_seed, swf_init, swf_step_from_seed, SwfError, SwfParams,
};
use crate::wire::{self, Reader, WireError};

pub use checkpoint::{Checkpoint, CheckpointPayload, Marker, SESSION_ID_LEN};
pub use file::{ChainFileError, ChainHeader, EvidenceChainFile, LeafArchiveEntry};
pub use store::SealedStore;

use checkpoint::cdce_tag;
use store::{StoreError, StoredState};

#[derive(Debug, thiserror::Error)]
pub enum ChainError {
    #[error("invalid session config: {0}")]
    Config(&'static str),
    #[error("tick time {now_us} does not advance past {last_us}")]
    NonMonotonicTime { now_us: u64, last_us: u64 },
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Swf(#[from] SwfError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, thiserror::Error)]
pub enum RecoverError {
    #[error("no sealed state present")]
    StateMissing,
    #[error("sealed state fails authentication")]
    SealCorrupted,
    #[error("monotonic counter fails authentication")]
    CounterCorrupted,
    #[error("sealed counter {sealed_counter} vs live counter {live_counter}: stale seal")]
    RollbackDetected { sealed_counter: u64, live_counter: u64 },
    #[error("sealed state decodes to malformed content")]
    Malformed,
    #[error("storage failure: {0}")]
    Storage(#[from] std::io::Error),
}

/// Session parameters, echoed in the chain header and bound into both the
/// enclave measurement and h_0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub swf: SwfParams,
    pub checkpoint_interval_us: u64,
    /// Behavioral entropy below this raises a soft flag; never a hard
    /// rejection.
    pub entropy_threshold_bits: f64,
    pub assurance_tier: u8,
    /// Re-attestation cadence: a fresh quote is embedded every n-th
    /// checkpoint.
    pub quote_every_n: u32,
    /// Superseded seals kept in the store archive.
    pub retained_seals: u32,
}

impl Default for SessionConfig {
    fn default() -> SessionConfig {
        SessionConfig {
            swf: SwfParams::default(),
            checkpoint_interval_us: 30_000_000,
            entropy_threshold_bits: 1.5,
            assurance_tier: 1,
            quote_every_n: 10,
            retained_seals: 8,
        }
    }
}

impl SessionConfig {
    /// Interactive-latency profile: 1 MiB seed derivation, 2^16 hash
    /// iterations.
    pub fn desk_scale() -> SessionConfig {
        SessionConfig {
            swf: SwfParams::desk_scale(),
            assurance_tier: 2,
            ..SessionConfig::default()
        }
    }

    /// Small parameters for fast tests.
    pub fn test_scale() -> SessionConfig {
        SessionConfig {
            swf: SwfParams::test_scale(),
            assurance_tier: 3,
            quote_every_n: 4,
            ..SessionConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), ChainError> {
        self.swf.validate()?;
        if self.checkpoint_interval_us == 0 {
            return Err(ChainError::Config("checkpoint interval must be positive"));
        }
        if !(1..=3).contains(&self.assurance_tier) {
            return Err(ChainError::Config("assurance tier must be 1..=3"));
        }
        if self.quote_every_n == 0 {
            return Err(ChainError::Config("quote cadence must be at least 1"));
        }
        if self.retained_seals == 0 {
            return Err(ChainError::Config("must retain at least one superseded seal"));
        }
        if !self.entropy_threshold_bits.is_finite() || self.entropy_threshold_bits < 0.0 {
            return Err(ChainError::Config("entropy threshold must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn encode_into(&self, buf: &mut Vec<u8>) {
        self.swf.encode_into(buf);
        wire::put_u64(buf, self.checkpoint_interval_us);
        wire::put_f64(buf, self.entropy_threshold_bits);
        wire::put_u8(buf, self.assurance_tier);
        wire::put_u32(buf, self.quote_every_n);
        wire::put_u32(buf, self.retained_seals);
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<SessionConfig, WireError> {
        Ok(SessionConfig {
            swf: SwfParams::decode(r)?,
            checkpoint_interval_us: r.u64()?,
            entropy_threshold_bits: r.f64()?,
            assurance_tier: r.u8()?,
            quote_every_n: r.u32()?,
            retained_seals: r.u32()?,
        })
    }

    /// Code/config identity measured by the attestation layer.
    pub fn identity_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(64);
        wire::put_u16(&mut buf, file::FILE_VERSION);
        self.encode_into(&mut buf);
        buf
    }
}

/// Quote freshness value: verifier nonce concatenated with the session id,
/// so the quote binds the session identity even before any checkpoint
/// exists.
pub fn quote_binding(verifier_nonce: &[u8], session_id: &[u8; SESSION_ID_LEN]) -> Vec<u8> {
    let mut buf = Vec::with_capacity(verifier_nonce.len() + SESSION_ID_LEN);
    buf.extend_from_slice(verifier_nonce);
    buf.extend_from_slice(session_id);
    buf
}

/// Freshness value for the periodic re-quote at checkpoint i: derived from
/// h_{i-1}, so the verifier can recompute it from chain position alone.
pub fn requote_nonce(h_prev: &Digest) -> Vec<u8> {
    let mut buf = Vec::with_capacity(domains::REQUOTE_NONCE.len() + 32);
    buf.extend_from_slice(domains::REQUOTE_NONCE);
    buf.extend_from_slice(&h_prev.0);
    buf
}

/// A checkpoint released to the verifier together with its committed
/// leaves (the verifier archives the leaves for sampled re-verification).
#[derive(Clone, Debug, PartialEq)]
pub struct TransmittedCheckpoint {
    pub checkpoint: Checkpoint,
    pub leaves: Vec<[u8; 32]>,
}

/// Result of one checkpoint tick.
#[derive(Clone, Debug)]
pub struct TickOutcome {
    pub checkpoint: Checkpoint,
    /// Checkpoints released this tick: one when online, none while
    /// partitioned (the checkpoint is buffered instead).
    pub transmitted: Vec<TransmittedCheckpoint>,
}

#[derive(Clone, Copy, Debug)]
pub struct RecoveredInfo {
    /// Index of the last completed checkpoint before the crash.
    pub last_index: u64,
    pub last_checkpoint_time_us: u64,
    /// Checkpoints still buffered from an interrupted partition.
    pub buffered: usize,
}

const STATE_VERSION: u16 = 1;

/// Everything needed to resume a session, sealed as one blob.
struct SealedSessionState {
    session_id: [u8; SESSION_ID_LEN],
    keypair_seed: [u8; 32],
    channel_key: [u8; 32],
    verifier_nonce: Vec<u8>,
    swf_prev_output: [u8; 32],
    next_index: u64,
    h_prev: Digest,
    watermark: u64,
    last_checkpoint_time_us: u64,
    offline: bool,
    counter_value: u64,
    config: SessionConfig,
    quote: AttestationQuote,
    last_checkpoint: Option<Checkpoint>,
    buffer: Vec<TransmittedCheckpoint>,
}

impl SealedSessionState {
    fn encode(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(512);
        wire::put_u16(&mut buf, STATE_VERSION);
        buf.extend_from_slice(&self.session_id);
        buf.extend_from_slice(&self.keypair_seed);
        buf.extend_from_slice(&self.channel_key);
        wire::put_var_bytes(&mut buf, &self.verifier_nonce);
        buf.extend_from_slice(&self.swf_prev_output);
        wire::put_u64(&mut buf, self.next_index);
        buf.extend_from_slice(&self.h_prev.0);
        wire::put_u64(&mut buf, self.watermark);
        wire::put_u64(&mut buf, self.last_checkpoint_time_us);
        wire::put_u8(&mut buf, self.offline as u8);
        wire::put_u64(&mut buf, self.counter_value);
        self.config.encode_into(&mut buf);
        wire::put_var_bytes(&mut buf, &self.quote.encode());
        match &self.last_checkpoint {
            None => wire::put_u8(&mut buf, 0),
            Some(c) => {
                wire::put_u8(&mut buf, 1);
                buf.extend_from_slice(&c.encode_record());
            }
        }
        wire::put_u32(&mut buf, self.buffer.len() as u32);
        for item in &self.buffer {
            buf.extend_from_slice(&item.checkpoint.encode_record());
            wire::put_u32(&mut buf, item.leaves.len() as u32);
            for leaf in &item.leaves {
                buf.extend_from_slice(leaf);
            }
        }
        buf
    }

    fn decode(bytes: &[u8]) -> Result<SealedSessionState, WireError> {
        let mut r = Reader::new(bytes);
        let version = r.u16()?;
        if version != STATE_VERSION {
            return Err(WireError::InvalidValue { field: "state_version", value: version as u64 });
        }
        let session_id: [u8; SESSION_ID_LEN] = r.array()?;
        let keypair_seed: [u8; 32] = r.array()?;
        let channel_key: [u8; 32] = r.array()?;
        let verifier_nonce = r.var_bytes()?.to_vec();
        let swf_prev_output: [u8; 32] = r.array()?;
        let next_index = r.u64()?;
        let h_prev = Digest(r.array()?);
        let watermark = r.u64()?;
        let last_checkpoint_time_us = r.u64()?;
        let offline = match r.u8()? {
            0 => false,
            1 => true,
            v => return Err(WireError::InvalidValue { field: "offline", value: v as u64 }),
        };
        let counter_value = r.u64()?;
        let config = SessionConfig::decode(&mut r)?;
        let quote_bytes = r.var_bytes()?;
        let mut qr = Reader::new(quote_bytes);
        let quote = AttestationQuote::decode(&mut qr)
            .map_err(|_| WireError::InvalidValue { field: "quote", value: 0 })?;
        qr.finish()?;
        let last_checkpoint = match r.u8()? {
            0 => None,
            1 => Some(Checkpoint::decode_record(&mut r)?),
            v => return Err(WireError::InvalidValue { field: "last_checkpoint", value: v as u64 }),
        };
        let n_buffered = r.u32()? as usize;
        let mut buffer = Vec::with_capacity(n_buffered.min(1 << 12));
        for _ in 0..n_buffered {
            let checkpoint = Checkpoint::decode_record(&mut r)?;
            let n_leaves = r.u32()? as usize;
            let mut leaves = Vec::with_capacity(n_leaves.min(1 << 16));
            for _ in 0..n_leaves {
                leaves.push(r.array()?);
            }
            buffer.push(TransmittedCheckpoint { checkpoint, leaves });
        }
        r.finish()?;
        Ok(SealedSessionState {
            session_id,
            keypair_seed,
            channel_key,
            verifier_nonce,
            swf_prev_output,
            next_index,
            h_prev,
            watermark,
            last_checkpoint_time_us,
            offline,
            counter_value,
            config,
            quote,
            last_checkpoint,
            buffer,
        })
    }
}

/// A live attestation session.
pub struct Session {
    config: SessionConfig,
    platform: PlatformRoot,
    measurement: Digest,
    seal_key: SealKey,
    keypair: KeyPair,
    session_id: [u8; SESSION_ID_LEN],
    verifier_nonce: Vec<u8>,
    quote: AttestationQuote,
    channel: Channel,
    channel_key: [u8; 32],
    swf_prev_output: [u8; 32],
    next_index: u64,
    h_prev: Digest,
    last_checkpoint: Option<Checkpoint>,
    last_checkpoint_time_us: u64,
    recovery_pending: bool,
    offline: bool,
    buffer: Vec<TransmittedCheckpoint>,
    store: SealedStore,
    counter: MonotonicCounter,
    nonce_prefix: [u8; 4],
    precomputed_seed: Option<[u8; 32]>,
}

impl Session {
    /// Start a fresh session: new identity, new SWF chain bound to the
    /// verifier nonce, initial quote, and an initial seal so a crash before
    /// the first checkpoint is still recoverable.
    pub fn session_init<R: Rng>(
        config: SessionConfig,
        platform: &PlatformRoot,
        verifier_nonce: &[u8],
        store_dir: &Path,
        rng: &mut R,
    ) -> Result<Session, ChainError> {
        config.validate()?;
        let mut session_id = [0u8; SESSION_ID_LEN];
        rng.fill_bytes(&mut session_id);
        let mut keypair_seed = [0u8; 32];
        rng.fill_bytes(&mut keypair_seed);
        let mut nonce_prefix = [0u8; 4];
        rng.fill_bytes(&mut nonce_prefix);

        let swf_prev_output = swf_init(verifier_nonce, &session_id)?;
        let keypair = KeyPair::from_seed(&keypair_seed);
        let channel_key =
            crypto::hash_parts(&[domains::CHANNEL_KEY, &keypair_seed, &session_id]).0;
        let measurement = crypto::platform::measurement(&config.identity_bytes());
        let seal_key = platform.seal_key(&measurement);
        let quote = platform.issue_quote(
            measurement,
            keypair.public(),
            &quote_binding(verifier_nonce, &session_id),
        );

        let store = SealedStore::create(store_dir, config.retained_seals as usize)?;
        let counter = store.create_counter(&seal_key)?;

        let mut session = Session {
            h_prev: Digest::ZERO,
            channel: channel_open(channel_key),
            config,
            platform: platform.clone(),
            measurement,
            seal_key,
            keypair,
            session_id,
            verifier_nonce: verifier_nonce.to_vec(),
            quote,
            channel_key,
            swf_prev_output,
            next_index: 1,
            last_checkpoint: None,
            last_checkpoint_time_us: 0,
            recovery_pending: false,
            offline: false,
            buffer: Vec::new(),
            store,
            counter,
            nonce_prefix,
            precomputed_seed: None,
        };
        session.h_prev = session.header().genesis_hash();
        session.seal_state()?;
        Ok(session)
    }

    /// Resume from sealed state after a crash. Checks the monotonic
    /// counter, restores the replay watermark, and precomputes the next
    /// memory-hard seed (the dominant mechanical recovery cost). The first
    /// subsequent tick carries a Recovery marker.
    ///
    /// Partition state is environmental: the caller re-applies
    /// [`Session::go_offline`] after recovery if the partition is still
    /// active.
    pub fn recover(
        config: &SessionConfig,
        platform: &PlatformRoot,
        store_dir: &Path,
    ) -> Result<(Session, RecoveredInfo), RecoverError> {
        let retained = config.retained_seals as usize;
        let store = match SealedStore::open(store_dir, retained) {
            Ok(s) => s,
            Err(StoreError::StateMissing) => return Err(RecoverError::StateMissing),
            Err(StoreError::Io(e)) => return Err(RecoverError::Storage(e)),
            Err(_) => return Err(RecoverError::Malformed),
        };
        let stored = match store.read_state() {
            Ok(s) => s,
            Err(StoreError::StateMissing) => return Err(RecoverError::StateMissing),
            Err(StoreError::Malformed(_)) => return Err(RecoverError::Malformed),
            Err(StoreError::Io(e)) => return Err(RecoverError::Storage(e)),
            Err(StoreError::Counter(_)) => return Err(RecoverError::CounterCorrupted),
        };

        let measurement = crypto::platform::measurement(&config.identity_bytes());
        let seal_key = platform.seal_key(&measurement);
        // The counter file authenticates under the identity-derived key, so a
        // MAC failure here means tampering or a mismatched identity, exactly
        // like a failed unseal.
        let mut counter = store
            .open_counter(&seal_key)
            .map_err(|_| RecoverError::SealCorrupted)?;

        let live = counter.value();
        if stored.counter_value == live + 1 {
            // The crash landed between seal and increment; complete the
            // interrupted increment.
            counter.increment().map_err(|_| RecoverError::CounterCorrupted)?;
        } else if stored.counter_value != live {
            return Err(RecoverError::RollbackDetected {
                sealed_counter: stored.counter_value,
                live_counter: live,
            });
        }

        let plaintext = unseal(&seal_key, &stored.blob, &stored.counter_value.to_be_bytes())
            .map_err(|_| RecoverError::SealCorrupted)?;
        let state = SealedSessionState::decode(&plaintext).map_err(|_| RecoverError::Malformed)?;
        if state.counter_value != stored.counter_value || state.session_id != stored.session_id {
            return Err(RecoverError::SealCorrupted);
        }
        // Unsealing under a key derived from `config` already proves the
        // sealed config matches.
        debug_assert_eq!(&state.config, config);

        let keypair = KeyPair::from_seed(&state.keypair_seed);
        let mut channel = channel_open(state.channel_key);
        channel.restore_watermark(state.watermark);
        let precomputed_seed = derive_seed(
            &state.config.swf,
            &state.swf_prev_output,
            state.next_index,
            &state.session_id,
        )
        .map_err(|_| RecoverError::Malformed)?;

        let info = RecoveredInfo {
            last_index: state.next_index - 1,
            last_checkpoint_time_us: state.last_checkpoint_time_us,
            buffered: state.buffer.len(),
        };
        let session = Session {
            config: state.config,
            platform: platform.clone(),
            measurement,
            seal_key,
            keypair,
            session_id: state.session_id,
            verifier_nonce: state.verifier_nonce,
            quote: state.quote,
            channel,
            channel_key: state.channel_key,
            swf_prev_output: state.swf_prev_output,
            next_index: state.next_index,
            h_prev: state.h_prev,
            last_checkpoint: state.last_checkpoint,
            last_checkpoint_time_us: state.last_checkpoint_time_us,
            recovery_pending: true,
            offline: state.offline,
            buffer: state.buffer,
            store,
            counter,
            nonce_prefix: stored.nonce_prefix,
            precomputed_seed: Some(precomputed_seed),
        };
        Ok((session, info))
    }

    /// Abandon any sealed state and start over: fresh identity, fresh
    /// nonce, fresh chain. Used when recovery fails.
    pub fn cold_restart<R: Rng>(
        config: SessionConfig,
        platform: &PlatformRoot,
        verifier_nonce: &[u8],
        store_dir: &Path,
        rng: &mut R,
    ) -> Result<Session, ChainError> {
        Session::session_init(config, platform, verifier_nonce, store_dir, rng)
    }

    /// Drop the session without sealing, as a crash would.
    pub fn crash(self) {}

    pub fn header(&self) -> ChainHeader {
        ChainHeader {
            session_id: self.session_id,
            public_key: self.keypair.public(),
            verifier_nonce: self.verifier_nonce.clone(),
            quote: self.quote.clone(),
            config: self.config.clone(),
        }
    }

    pub fn session_id(&self) -> [u8; SESSION_ID_LEN] {
        self.session_id
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn channel_key(&self) -> [u8; 32] {
        self.channel_key
    }

    pub fn next_index(&self) -> u64 {
        self.next_index
    }

    pub fn last_checkpoint_time_us(&self) -> u64 {
        self.last_checkpoint_time_us
    }

    pub fn is_offline(&self) -> bool {
        self.offline
    }

    /// Feed one authenticated event batch into the behavioral channel.
    pub fn submit_batch(&mut self, batch: &EventBatch) -> Result<usize, ChannelError> {
        self.channel.submit(batch)
    }

    /// Highest sequence number accepted so far. After recovery this is
    /// the watermark at the last seal; event sources resume above it.
    pub fn channel_watermark(&self) -> u64 {
        self.channel.watermark()
    }

    /// Produce checkpoint i over the current document snapshot and the
    /// drained behavioral window, then seal the updated state.
    pub fn checkpoint_tick(
        &mut self,
        now_us: u64,
        document: &[u8],
    ) -> Result<TickOutcome, ChainError> {
        if now_us <= self.last_checkpoint_time_us {
            return Err(ChainError::NonMonotonicTime {
                now_us,
                last_us: self.last_checkpoint_time_us,
            });
        }
        let index = self.next_index;
        let events = self.channel.take_window();
        let behavioral = extract_features(&events);
        let content_hash = crypto::hash(document);

        let seed = match self.precomputed_seed.take() {
            Some(s) => s,
            None => derive_seed(&self.config.swf, &self.swf_prev_output, index, &self.session_id)?,
        };
        let (swf, leaves) = swf_step_from_seed(
            &self.config.swf,
            &seed,
            &self.swf_prev_output,
            index,
            &self.session_id,
        )?;

        let marker = if self.recovery_pending {
            Marker::Recovery { gap_us: (now_us - self.last_checkpoint_time_us).max(1) }
        } else if self.offline {
            Marker::OfflineBuffered
        } else {
            Marker::Normal
        };
        let requote = if index % self.config.quote_every_n as u64 == 0 {
            Some(self.platform.issue_quote(
                self.measurement,
                self.keypair.public(),
                &requote_nonce(&self.h_prev),
            ))
        } else {
            None
        };

        let payload = CheckpointPayload {
            session_id: self.session_id,
            index,
            content_hash,
            behavioral,
            swf,
            local_time_us: now_us,
            marker,
            requote,
        };
        let chain_hash = payload.chain_hash(&self.h_prev);
        let checkpoint = Checkpoint {
            cdce_tag: cdce_tag(&payload),
            signature: self.keypair.sign(&chain_hash.0),
            chain_hash,
            payload,
        };

        self.swf_prev_output = checkpoint.payload.swf.output;
        self.h_prev = chain_hash;
        self.next_index += 1;
        self.last_checkpoint_time_us = now_us;
        self.recovery_pending = false;
        self.last_checkpoint = Some(checkpoint.clone());

        let item = TransmittedCheckpoint { checkpoint: checkpoint.clone(), leaves };
        let transmitted = if self.offline {
            self.buffer.push(item);
            Vec::new()
        } else {
            vec![item]
        };
        self.seal_state()?;
        Ok(TickOutcome { checkpoint, transmitted })
    }

    /// Enter a partition: subsequent checkpoints are buffered locally.
    pub fn go_offline(&mut self) {
        self.offline = true;
    }

    /// Leave a partition: returns buffered checkpoints in production
    /// order and reseals so a later crash cannot double-release them.
    pub fn go_online(&mut self) -> Result<Vec<TransmittedCheckpoint>, ChainError> {
        self.offline = false;
        let drained = std::mem::take(&mut self.buffer);
        self.seal_state()?;
        Ok(drained)
    }

    fn seal_state(&mut self) -> Result<(), ChainError> {
        let counter_value = self
            .counter
            .value()
            .checked_add(1)
            .ok_or(CryptoError::InvalidParams("monotonic counter exhausted"))?;
        let state = SealedSessionState {
            session_id: self.session_id,
            keypair_seed: self.keypair.secret_seed(),
            channel_key: self.channel_key,
            verifier_nonce: self.verifier_nonce.clone(),
            swf_prev_output: self.swf_prev_output,
            next_index: self.next_index,
            h_prev: self.h_prev,
            watermark: self.channel.watermark(),
            last_checkpoint_time_us: self.last_checkpoint_time_us,
            offline: self.offline,
            counter_value,
            config: self.config.clone(),
            quote: self.quote.clone(),
            last_checkpoint: self.last_checkpoint.clone(),
            buffer: self.buffer.clone(),
        };
        let blob = seal(
            &self.seal_key,
            counter_nonce(self.nonce_prefix, counter_value),
            &state.encode(),
            &counter_value.to_be_bytes(),
        );
        self.store.write_state(&StoredState {
            session_id: self.session_id,
            nonce_prefix: self.nonce_prefix,
            counter_value,
            blob,
        })?;
        self.counter.increment()?;
        Ok(())
    }

    /// Store access for tests that stage rollback attacks.
    pub fn store(&self) -> &SealedStore {
        &self.store
    }

    /// Signing key access for tests that forge consistently re-signed
    /// records (modeling full session-key compromise).
    #[cfg(test)]
    pub(crate) fn test_keypair(&self) -> &KeyPair {
        &self.keypair
    }
}
