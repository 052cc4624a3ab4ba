//! Chain verification.
//!
//! Hard checks run in a fixed order and the first failure decides the
//! verdict: (1) attestation quote, (2) a linkage walk over every
//! checkpoint (index, session id, time monotonicity, marker consistency,
//! chain hash, signature, entanglement tag, SWF predecessor binding,
//! re-quote pattern), (3) leaf archive binding against the committed
//! Merkle roots, then (4) SWF work re-verification in the configured
//! mode. Behavioral entropy and cadence gaps are soft findings: they flag
//! and degrade fidelity but never flip a Valid verdict.
//!
//! Evidence fidelity: a checkpoint covering gap d gets weight 1 when d is
//! within interval + tolerance, otherwise clamp(1 - alpha*d/t_max, beta, 1).
//! Session fidelity is the gap-weighted mean of checkpoint weights.

use std::collections::BTreeSet;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use crate::chain::checkpoint::{cdce_tag, Checkpoint, Marker};
use crate::chain::file::{ChainHeader, EvidenceChainFile, LeafArchiveEntry};
use crate::chain::{quote_binding, requote_nonce, TransmittedCheckpoint};
use crate::crypto::{self, Digest, PublicKey};
use crate::swf::merkle::MerkleTree;
use crate::swf::{
    challenge_seed, derive_seed, seed_input_digest, step_salt, swf_init, swf_open,
    swf_verify_full, swf_verify_sampled,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SwfCheckMode {
    /// Recompute every checkpoint's full derivation and hash chain.
    Full,
    /// Re-derive seeds and sample segments for a subset of checkpoints.
    Sampled,
}

#[derive(Clone, Debug)]
pub struct VerificationPolicy {
    pub swf_mode: SwfCheckMode,
    /// Sampled mode: fraction of checkpoints independently re-verified
    /// (first, last, and recovery-adjacent checkpoints are always
    /// included).
    pub sample_fraction: f64,
    /// Seed for the pseudorandom sample pick; fixed seed gives a
    /// reproducible report.
    pub sampling_seed: u64,
    /// Checkpoint lateness tolerated before a gap degrades fidelity.
    pub gap_tolerance_us: u64,
    /// Expected verifier nonce when verifying online; None accepts the
    /// header's (still bound by the root-signed quote).
    pub expected_verifier_nonce: Option<Vec<u8>>,
    /// Fidelity decay slope.
    pub alpha: f64,
    /// Gap at which full-slope decay would reach zero.
    pub t_max_us: u64,
    /// Fidelity floor.
    pub beta: f64,
}

impl Default for VerificationPolicy {
    fn default() -> VerificationPolicy {
        VerificationPolicy {
            swf_mode: SwfCheckMode::Sampled,
            sample_fraction: 0.1,
            sampling_seed: 0,
            gap_tolerance_us: 2_000_000,
            expected_verifier_nonce: None,
            alpha: 1.0,
            t_max_us: 86_400_000_000,
            beta: 0.3,
        }
    }
}

impl VerificationPolicy {
    pub fn full() -> VerificationPolicy {
        VerificationPolicy { swf_mode: SwfCheckMode::Full, ..VerificationPolicy::default() }
    }

    pub fn sampled(sampling_seed: u64) -> VerificationPolicy {
        VerificationPolicy { sampling_seed, ..VerificationPolicy::default() }
    }

    fn assert_sane(&self) {
        assert!(
            (0.0..=1.0).contains(&self.sample_fraction),
            "sample fraction must be in [0, 1]"
        );
        assert!((0.0..=1.0).contains(&self.beta), "fidelity floor must be in [0, 1]");
        assert!(self.alpha >= 0.0, "decay slope must be non-negative");
        assert!(self.t_max_us > 0, "decay horizon must be positive");
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, thiserror::Error)]
#[serde(tag = "kind")]
pub enum FailureReason {
    #[error("structural: {detail}")]
    Structural { detail: String },
    #[error("attestation quote rejected: {detail}")]
    QuoteRejected { detail: &'static str },
    #[error("checkpoint {index}: expected index {expected}")]
    IndexMismatch { index: u64, expected: u64 },
    #[error("checkpoint {index}: session id differs from header")]
    SessionIdMismatch { index: u64 },
    #[error("checkpoint {index}: local time does not advance")]
    TimeNotMonotonic { index: u64 },
    #[error("checkpoint {index}: recovery marker gap disagrees with timestamps")]
    MarkerInconsistent { index: u64 },
    #[error("checkpoint {index}: chain hash does not extend predecessor")]
    LinkageBroken { index: u64 },
    #[error("checkpoint {index}: signature invalid")]
    SignatureInvalid { index: u64 },
    #[error("checkpoint {index}: cross-domain entanglement tag mismatch")]
    EntanglementMismatch { index: u64 },
    #[error("checkpoint {index}: sequential-work chain broken: {detail}")]
    SwfChainBroken { index: u64, detail: &'static str },
    #[error("checkpoint {index}: sequential-work proof rejected: {detail}")]
    SwfProofRejected { index: u64, detail: &'static str },
    #[error("checkpoint {index}: no archived leaves for sampled verification")]
    LeafArchiveMissing { index: u64 },
    #[error("checkpoint {index}: re-attestation quote missing")]
    RequoteMissing { index: u64 },
    #[error("checkpoint {index}: re-attestation quote off cadence")]
    RequoteUnexpected { index: u64 },
    #[error("checkpoint {index}: re-attestation quote rejected: {detail}")]
    RequoteRejected { index: u64, detail: &'static str },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Valid,
    /// All hard checks passed, but the chain carries recovery or offline
    /// markers; fidelity may be degraded.
    ValidWithGaps,
    Invalid,
}

/// One non-Normal marker in an otherwise verified chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct GapRecord {
    pub index: u64,
    pub gap_us: u64,
    pub marker: Marker,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FidelityLevel {
    Full,
    Degraded,
    Minimal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SwfCoverage {
    FullyVerified,
    SampledVerified,
    LinkageOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum SoftFlag {
    LowEntropy { bits: f64 },
    UnexplainedGap { gap_us: u64 },
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckpointAssessment {
    pub index: u64,
    pub gap_us: u64,
    pub weight: f64,
    pub level: FidelityLevel,
    pub swf_coverage: SwfCoverage,
    pub flags: Vec<SoftFlag>,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub verdict: Verdict,
    pub failure: Option<FailureReason>,
    pub checkpoint_count: u64,
    pub session_fidelity: f64,
    pub recovery_count: u64,
    pub offline_count: u64,
    pub total_span_us: u64,
    /// Nonempty exactly when any checkpoint carries a non-Normal marker.
    pub gaps: Vec<GapRecord>,
    pub assessments: Vec<CheckpointAssessment>,
}

impl VerificationReport {
    pub fn is_valid(&self) -> bool {
        self.verdict != Verdict::Invalid
    }

    pub fn flagged(&self) -> impl Iterator<Item = (u64, &SoftFlag)> {
        self.assessments
            .iter()
            .flat_map(|a| a.flags.iter().map(move |f| (a.index, f)))
    }

    fn invalid(failure: FailureReason) -> VerificationReport {
        VerificationReport {
            verdict: Verdict::Invalid,
            failure: Some(failure),
            checkpoint_count: 0,
            session_fidelity: 0.0,
            recovery_count: 0,
            offline_count: 0,
            total_span_us: 0,
            gaps: Vec::new(),
            assessments: Vec::new(),
        }
    }
}

/// Verify raw file bytes; a parse failure is a rejection.
pub fn verify_bytes(
    bytes: &[u8],
    root: &PublicKey,
    policy: &VerificationPolicy,
) -> VerificationReport {
    match EvidenceChainFile::decode(bytes) {
        Ok(file) => verify_chain(&file, root, policy),
        Err(e) => VerificationReport::invalid(FailureReason::Structural {
            detail: format!("parse: {e}"),
        }),
    }
}

/// Verify a parsed chain against the platform root public key.
pub fn verify_chain(
    file: &EvidenceChainFile,
    root: &PublicKey,
    policy: &VerificationPolicy,
) -> VerificationReport {
    policy.assert_sane();
    let inner = || -> Result<VerificationReport, FailureReason> {
        check_quote(&file.header, root, policy)?;
        let walk = walk_checkpoints(file, root)?;
        check_archive_structure(file)?;
        check_swf(file, policy, &walk)?;
        Ok(assess(file, policy, &walk))
    };
    match inner() {
        Ok(report) => report,
        Err(failure) => VerificationReport::invalid(failure),
    }
}

fn check_quote(
    header: &ChainHeader,
    root: &PublicKey,
    policy: &VerificationPolicy,
) -> Result<(), FailureReason> {
    header.config.validate().map_err(|e| FailureReason::Structural {
        detail: format!("config: {e}"),
    })?;
    if let Some(expected) = &policy.expected_verifier_nonce {
        if *expected != header.verifier_nonce {
            return Err(FailureReason::QuoteRejected { detail: "verifier nonce not the one issued" });
        }
    }
    let quote = &header.quote;
    if quote.bound_public_key != header.public_key {
        return Err(FailureReason::QuoteRejected { detail: "bound key differs from header key" });
    }
    let expected_measurement =
        crypto::platform::measurement(&header.config.identity_bytes());
    if quote.enclave_measurement != expected_measurement {
        return Err(FailureReason::QuoteRejected { detail: "measurement differs from config identity" });
    }
    if quote.nonce != quote_binding(&header.verifier_nonce, &header.session_id) {
        return Err(FailureReason::QuoteRejected { detail: "freshness value does not bind session" });
    }
    if !quote.verify(root) {
        return Err(FailureReason::QuoteRejected { detail: "root signature invalid" });
    }
    Ok(())
}

fn check_archive_structure(file: &EvidenceChainFile) -> Result<(), FailureReason> {
    let n = file.checkpoints.len() as u64;
    let expected_leaves = file.header.config.swf.segments() + 1;
    for entry in &file.leaf_archive {
        if entry.checkpoint_index == 0 || entry.checkpoint_index > n {
            return Err(FailureReason::Structural {
                detail: format!("leaf archive references checkpoint {}", entry.checkpoint_index),
            });
        }
        if entry.leaves.len() as u64 != expected_leaves {
            return Err(FailureReason::Structural {
                detail: format!(
                    "leaf archive entry {} holds {} leaves, expected {expected_leaves}",
                    entry.checkpoint_index,
                    entry.leaves.len()
                ),
            });
        }
        // Archived leaves are committed data: they must rebuild the very
        // root the checkpoint signed, or the archive has been tampered
        // with regardless of verification mode.
        let committed =
            &file.checkpoints[(entry.checkpoint_index - 1) as usize].payload.swf.merkle_root;
        if MerkleTree::build(&entry.leaves).root() != *committed {
            return Err(FailureReason::Structural {
                detail: format!(
                    "leaf archive entry {} does not rebuild its committed root",
                    entry.checkpoint_index
                ),
            });
        }
    }
    Ok(())
}

struct WalkData {
    /// h_{i-1} for checkpoint i (index i-1), starting with h_0.
    h_prevs: Vec<Digest>,
    /// SWF predecessor output for checkpoint i, starting with out_0.
    prev_outputs: Vec<[u8; 32]>,
    /// d_i = t_i - t_{i-1} with t_0 = 0.
    gaps: Vec<u64>,
    recovery_indices: Vec<u64>,
}

fn walk_checkpoints(
    file: &EvidenceChainFile,
    root: &PublicKey,
) -> Result<WalkData, FailureReason> {
    let header = &file.header;
    let sid = header.session_id;
    let out0 = swf_init(&header.verifier_nonce, &sid).map_err(|e| FailureReason::Structural {
        detail: format!("chain init: {e}"),
    })?;
    let expected_measurement =
        crypto::platform::measurement(&header.config.identity_bytes());
    let quote_cadence = header.config.quote_every_n as u64;

    let mut walk = WalkData {
        h_prevs: Vec::with_capacity(file.checkpoints.len()),
        prev_outputs: Vec::with_capacity(file.checkpoints.len()),
        gaps: Vec::with_capacity(file.checkpoints.len()),
        recovery_indices: Vec::new(),
    };
    let mut h_prev = header.genesis_hash();
    let mut prev_output = out0;
    let mut prev_time = 0u64;

    for (pos, c) in file.checkpoints.iter().enumerate() {
        let index = pos as u64 + 1;
        let p = &c.payload;
        if p.index != index {
            return Err(FailureReason::IndexMismatch { index: p.index, expected: index });
        }
        if p.session_id != sid {
            return Err(FailureReason::SessionIdMismatch { index });
        }
        if p.local_time_us <= prev_time {
            return Err(FailureReason::TimeNotMonotonic { index });
        }
        let gap = p.local_time_us - prev_time;
        if let Marker::Recovery { gap_us } = p.marker {
            if gap_us != gap {
                return Err(FailureReason::MarkerInconsistent { index });
            }
            walk.recovery_indices.push(index);
        }
        if p.chain_hash(&h_prev) != c.chain_hash {
            return Err(FailureReason::LinkageBroken { index });
        }
        if !header.public_key.verify(&c.chain_hash.0, &c.signature) {
            return Err(FailureReason::SignatureInvalid { index });
        }
        if cdce_tag(p) != c.cdce_tag {
            return Err(FailureReason::EntanglementMismatch { index });
        }

        let proof = &p.swf;
        if proof.checkpoint_index != index {
            return Err(FailureReason::SwfChainBroken { index, detail: "proof index" });
        }
        if proof.chain_length != header.config.swf.chain_length
            || proof.mh_params_echo != header.config.swf.mh
        {
            return Err(FailureReason::SwfChainBroken { index, detail: "parameter echo" });
        }
        if proof.seed_input_digest != seed_input_digest(&prev_output, &step_salt(&sid, index)) {
            return Err(FailureReason::SwfChainBroken { index, detail: "predecessor binding" });
        }

        let due = index % quote_cadence == 0;
        match (&p.requote, due) {
            (None, false) => {}
            (None, true) => return Err(FailureReason::RequoteMissing { index }),
            (Some(_), false) => return Err(FailureReason::RequoteUnexpected { index }),
            (Some(q), true) => {
                if q.bound_public_key != header.public_key {
                    return Err(FailureReason::RequoteRejected { index, detail: "bound key" });
                }
                if q.enclave_measurement != expected_measurement {
                    return Err(FailureReason::RequoteRejected { index, detail: "measurement" });
                }
                if q.nonce != requote_nonce(&h_prev) {
                    return Err(FailureReason::RequoteRejected { index, detail: "freshness value" });
                }
                if !q.verify(root) {
                    return Err(FailureReason::RequoteRejected { index, detail: "root signature" });
                }
            }
        }

        walk.h_prevs.push(h_prev);
        walk.prev_outputs.push(prev_output);
        walk.gaps.push(gap);
        h_prev = c.chain_hash;
        prev_output = proof.output;
        prev_time = p.local_time_us;
    }
    Ok(walk)
}

fn check_swf(
    file: &EvidenceChainFile,
    policy: &VerificationPolicy,
    walk: &WalkData,
) -> Result<(), FailureReason> {
    let header = &file.header;
    let params = &header.config.swf;
    let sid = header.session_id;
    match policy.swf_mode {
        SwfCheckMode::Full => {
            for (pos, c) in file.checkpoints.iter().enumerate() {
                let index = pos as u64 + 1;
                let ok = swf_verify_full(params, &c.payload.swf, &walk.prev_outputs[pos], index, &sid)
                    .map_err(|_| FailureReason::SwfProofRejected {
                        index,
                        detail: "recomputation failed",
                    })?;
                if !ok {
                    return Err(FailureReason::SwfProofRejected { index, detail: "full recompute" });
                }
            }
        }
        SwfCheckMode::Sampled => {
            for index in sampled_indices(file.checkpoints.len() as u64, policy, walk) {
                let pos = (index - 1) as usize;
                let proof = &file.checkpoints[pos].payload.swf;
                let leaves = file
                    .leaves_for(index)
                    .ok_or(FailureReason::LeafArchiveMissing { index })?;
                if MerkleTree::build(leaves).root() != proof.merkle_root {
                    return Err(FailureReason::SwfProofRejected {
                        index,
                        detail: "leaf commitment",
                    });
                }
                let seed = derive_seed(params, &walk.prev_outputs[pos], index, &sid).map_err(
                    |_| FailureReason::SwfProofRejected { index, detail: "seed derivation" },
                )?;
                if leaves[0] != seed {
                    return Err(FailureReason::SwfProofRejected { index, detail: "seed binding" });
                }
                if leaves[leaves.len() - 1] != proof.output {
                    return Err(FailureReason::SwfProofRejected { index, detail: "output binding" });
                }
                let challenge =
                    challenge_seed(&proof.merkle_root, &walk.h_prevs[pos], &header.verifier_nonce);
                let openings = swf_open(leaves, params, &challenge).map_err(|_| {
                    FailureReason::SwfProofRejected { index, detail: "segment opening" }
                })?;
                let ok = swf_verify_sampled(params, proof, &openings, &challenge).map_err(|_| {
                    FailureReason::SwfProofRejected { index, detail: "challenge mismatch" }
                })?;
                if !ok {
                    return Err(FailureReason::SwfProofRejected {
                        index,
                        detail: "sampled segments",
                    });
                }
            }
        }
    }
    Ok(())
}

/// Checkpoints chosen for independent re-verification: first, last,
/// recovery checkpoints and their predecessors, plus pseudorandom picks up
/// to the policy fraction.
fn sampled_indices(n: u64, policy: &VerificationPolicy, walk: &WalkData) -> BTreeSet<u64> {
    let mut set = BTreeSet::new();
    if n == 0 {
        return set;
    }
    set.insert(1);
    set.insert(n);
    for &i in &walk.recovery_indices {
        set.insert(i);
        if i > 1 {
            set.insert(i - 1);
        }
    }
    let target = ((policy.sample_fraction * n as f64).ceil() as u64).min(n);
    let mut rng = ChaCha12Rng::seed_from_u64(policy.sampling_seed);
    while (set.len() as u64) < target {
        set.insert(rng.random_range(1..=n));
    }
    set
}

fn gap_weight(policy: &VerificationPolicy, gap_us: u64) -> f64 {
    let decayed = 1.0 - policy.alpha * (gap_us as f64 / policy.t_max_us as f64);
    decayed.clamp(policy.beta, 1.0)
}

fn assess(
    file: &EvidenceChainFile,
    policy: &VerificationPolicy,
    walk: &WalkData,
) -> VerificationReport {
    let config = &file.header.config;
    let n = file.checkpoints.len() as u64;
    let expected_gap = config.checkpoint_interval_us + policy.gap_tolerance_us;
    let sampled = match policy.swf_mode {
        SwfCheckMode::Full => BTreeSet::new(),
        SwfCheckMode::Sampled => sampled_indices(n, policy, walk),
    };

    let mut assessments = Vec::with_capacity(file.checkpoints.len());
    let mut gaps = Vec::new();
    let mut weighted = 0.0f64;
    let mut total_gap = 0.0f64;
    let mut recovery_count = 0u64;
    let mut offline_count = 0u64;

    for (pos, c) in file.checkpoints.iter().enumerate() {
        let index = pos as u64 + 1;
        let p = &c.payload;
        let gap = walk.gaps[pos];
        let mut flags = Vec::new();

        match p.marker {
            Marker::Recovery { .. } => recovery_count += 1,
            Marker::OfflineBuffered => offline_count += 1,
            Marker::Normal => {}
        }
        if p.marker != Marker::Normal {
            gaps.push(GapRecord { index, gap_us: gap, marker: p.marker });
        }
        let late = gap > expected_gap;
        if late && !matches!(p.marker, Marker::Recovery { .. }) {
            flags.push(SoftFlag::UnexplainedGap { gap_us: gap });
        }
        if p.behavioral.keystroke_count >= 2
            && p.behavioral.shannon_entropy_bits < config.entropy_threshold_bits
        {
            flags.push(SoftFlag::LowEntropy { bits: p.behavioral.shannon_entropy_bits });
        }

        let weight = if late { gap_weight(policy, gap) } else { 1.0 };
        let level = if weight >= 1.0 {
            FidelityLevel::Full
        } else if weight > policy.beta {
            FidelityLevel::Degraded
        } else {
            FidelityLevel::Minimal
        };
        let swf_coverage = match policy.swf_mode {
            SwfCheckMode::Full => SwfCoverage::FullyVerified,
            SwfCheckMode::Sampled if sampled.contains(&index) => SwfCoverage::SampledVerified,
            SwfCheckMode::Sampled => SwfCoverage::LinkageOnly,
        };

        weighted += weight * gap as f64;
        total_gap += gap as f64;
        assessments.push(CheckpointAssessment { index, gap_us: gap, weight, level, swf_coverage, flags });
    }

    VerificationReport {
        verdict: if gaps.is_empty() { Verdict::Valid } else { Verdict::ValidWithGaps },
        failure: None,
        checkpoint_count: n,
        session_fidelity: if total_gap > 0.0 { weighted / total_gap } else { 1.0 },
        recovery_count,
        offline_count,
        total_span_us: file.checkpoints.last().map_or(0, |c| c.payload.local_time_us),
        gaps,
        assessments,
    }
}

/// Verifier-side accumulation of released checkpoints into a chain file.
pub struct ChainCollector {
    header: ChainHeader,
    checkpoints: Vec<Checkpoint>,
    leaf_archive: Vec<LeafArchiveEntry>,
}

impl ChainCollector {
    pub fn new(header: ChainHeader) -> ChainCollector {
        ChainCollector { header, checkpoints: Vec::new(), leaf_archive: Vec::new() }
    }

    pub fn receive(&mut self, item: &TransmittedCheckpoint) {
        self.leaf_archive.push(LeafArchiveEntry {
            checkpoint_index: item.checkpoint.index(),
            leaves: item.leaves.clone(),
        });
        self.checkpoints.push(item.checkpoint.clone());
    }

    pub fn len(&self) -> usize {
        self.checkpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.checkpoints.is_empty()
    }

    pub fn into_file(mut self) -> EvidenceChainFile {
        self.checkpoints.sort_by_key(|c| c.index());
        self.leaf_archive.sort_by_key(|e| e.checkpoint_index);
        EvidenceChainFile {
            header: self.header,
            checkpoints: self.checkpoints,
            leaf_archive: self.leaf_archive,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    use crate::behavior::{EventBatch, KeyClass, KeystrokeEvent};
    use crate::chain::{Session, SessionConfig};
    use crate::crypto::{KeyPair, PlatformRoot};

    const NONCE: &[u8] = b"verifier-nonce-0001";
    const TICK: u64 = 30_000_000;

    fn platform() -> PlatformRoot {
        PlatformRoot::new([1u8; 32], None)
    }

    fn new_session(dir: &Path) -> Session {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        Session::session_init(SessionConfig::test_scale(), &platform(), NONCE, dir, &mut rng)
            .unwrap()
    }

    /// Feed one frame of keystrokes with the given inter-key intervals.
    fn type_events(s: &mut Session, next_seq: &mut u64, start_us: u64, ikis_ms: &[u64]) {
        let mut events = Vec::new();
        let mut t = start_us;
        events.push(KeystrokeEvent {
            sequence_number: *next_seq,
            timestamp_us: t,
            key_class: KeyClass::Printable,
            is_padding: false,
        });
        *next_seq += 1;
        for &iki in ikis_ms {
            t += iki * 1000;
            events.push(KeystrokeEvent {
                sequence_number: *next_seq,
                timestamp_us: t,
                key_class: KeyClass::Printable,
                is_padding: false,
            });
            *next_seq += 1;
        }
        let key = s.channel_key();
        let batch = EventBatch::build(start_us / 100_000, &events, next_seq, start_us + 100_000, &key)
            .unwrap();
        s.submit_batch(&batch).unwrap();
    }

    /// Honest run: 2 online ticks, crash + recovery, an offline stretch,
    /// then back online. Returns the collected file.
    fn eventful_file(dir: &Path) -> EvidenceChainFile {
        let mut s = new_session(dir);
        let mut collector = ChainCollector::new(s.header());
        let mut seq = 1u64;

        type_events(&mut s, &mut seq, 1_000_000, &[80, 120, 95, 210, 150]);
        for item in &s.checkpoint_tick(TICK, b"draft v1").unwrap().transmitted {
            collector.receive(item);
        }
        type_events(&mut s, &mut seq, TICK + 1_000_000, &[60, 60, 300, 90]);
        for item in &s.checkpoint_tick(2 * TICK, b"draft v2").unwrap().transmitted {
            collector.receive(item);
        }
        s.crash();

        let cfg = SessionConfig::test_scale();
        let (mut s, _) = Session::recover(&cfg, &platform(), dir).unwrap();
        let recovery_at = 2 * TICK + 95_000_000;
        for item in &s.checkpoint_tick(recovery_at, b"draft v3").unwrap().transmitted {
            collector.receive(item);
        }

        s.go_offline();
        assert!(s.checkpoint_tick(recovery_at + TICK, b"draft v4").unwrap().transmitted.is_empty());
        for item in &s.go_online().unwrap() {
            collector.receive(item);
        }
        for item in &s.checkpoint_tick(recovery_at + 2 * TICK, b"draft v5").unwrap().transmitted {
            collector.receive(item);
        }
        collector.into_file()
    }

    /// Recompute tags, chain hashes, and signatures from `from_pos`
    /// onward, as a forger holding the session key would.
    fn refit(file: &mut EvidenceChainFile, from_pos: usize, kp: &KeyPair) {
        let mut h_prev = if from_pos == 0 {
            file.header.genesis_hash()
        } else {
            file.checkpoints[from_pos - 1].chain_hash
        };
        for c in &mut file.checkpoints[from_pos..] {
            c.cdce_tag = cdce_tag(&c.payload);
            c.chain_hash = c.payload.chain_hash(&h_prev);
            c.signature = kp.sign(&c.chain_hash.0);
            h_prev = c.chain_hash;
        }
    }

    #[test]
    fn honest_session_verifies_in_both_modes() {
        let tmp = tempfile::tempdir().unwrap();
        let file = eventful_file(tmp.path());
        let root = platform().root_public();

        for policy in [VerificationPolicy::full(), VerificationPolicy::sampled(3)] {
            let report = verify_chain(&file, &root, &policy);
            assert_eq!(report.verdict, Verdict::ValidWithGaps, "{:?}", report.failure);
            assert_eq!(report.checkpoint_count, 5);
            assert_eq!(report.recovery_count, 1);
            assert_eq!(report.offline_count, 1);
            assert_eq!(report.gaps.len(), 2);
            assert!(report.session_fidelity > 0.9 && report.session_fidelity < 1.0);
            // The recovery gap degrades exactly that checkpoint.
            let r = &report.assessments[2];
            assert_eq!(r.level, FidelityLevel::Degraded);
            assert!(report.assessments[0].level == FidelityLevel::Full);
        }
    }

    #[test]
    fn sampled_mode_anchors_recovery_and_endpoints() {
        let tmp = tempfile::tempdir().unwrap();
        let file = eventful_file(tmp.path());
        let policy = VerificationPolicy::sampled(0);
        let report = verify_chain(&file, &platform().root_public(), &policy);
        let covered: Vec<u64> = report
            .assessments
            .iter()
            .filter(|a| a.swf_coverage == SwfCoverage::SampledVerified)
            .map(|a| a.index)
            .collect();
        // 1 (first), 2 (recovery predecessor), 3 (recovery), 5 (last).
        assert_eq!(covered, vec![1, 2, 3, 5]);
    }

    #[test]
    fn detached_field_mutations_are_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let file = eventful_file(tmp.path());
        let root = platform().root_public();
        let policy = VerificationPolicy::full();

        let mut tag = file.clone();
        tag.checkpoints[1].cdce_tag.0[0] ^= 1;
        assert_eq!(
            verify_chain(&tag, &root, &policy).failure,
            Some(FailureReason::EntanglementMismatch { index: 2 })
        );

        let mut sig = file.clone();
        sig.checkpoints[1].signature.0[0] ^= 1;
        assert_eq!(
            verify_chain(&sig, &root, &policy).failure,
            Some(FailureReason::SignatureInvalid { index: 2 })
        );

        let mut hash = file.clone();
        hash.checkpoints[1].chain_hash.0[0] ^= 1;
        assert_eq!(
            verify_chain(&hash, &root, &policy).failure,
            Some(FailureReason::LinkageBroken { index: 2 })
        );

        let mut content = file.clone();
        content.checkpoints[1].payload.content_hash.0[0] ^= 1;
        assert_eq!(
            verify_chain(&content, &root, &policy).failure,
            Some(FailureReason::LinkageBroken { index: 2 })
        );

        let mut dropped = file.clone();
        dropped.checkpoints.remove(1);
        assert!(matches!(
            verify_chain(&dropped, &root, &policy).failure,
            Some(FailureReason::IndexMismatch { .. })
        ));
    }

    #[test]
    fn mutated_archived_leaf_is_rejected_in_every_mode() {
        let tmp = tempfile::tempdir().unwrap();
        let file = eventful_file(tmp.path());
        let root = platform().root_public();

        let mut tampered = file.clone();
        tampered.leaf_archive[1].leaves[3][7] ^= 1;
        for policy in [VerificationPolicy::full(), VerificationPolicy::sampled(3)] {
            let report = verify_chain(&tampered, &root, &policy);
            assert_eq!(report.verdict, Verdict::Invalid);
            assert!(matches!(report.failure, Some(FailureReason::Structural { .. })));
        }
    }

    #[test]
    fn forged_output_rejected_despite_valid_signature() {
        let tmp = tempfile::tempdir().unwrap();
        let mut s = new_session(tmp.path());
        let mut collector = ChainCollector::new(s.header());
        for i in 1..=3u64 {
            for item in &s.checkpoint_tick(i * TICK, b"d").unwrap().transmitted {
                collector.receive(item);
            }
        }
        let file = collector.into_file();
        let kp = s.test_keypair().clone();
        let root = platform().root_public();

        // Forged mid-chain output: the successor's predecessor binding
        // catches it without any work recomputation.
        let mut mid = file.clone();
        mid.checkpoints[1].payload.swf.output[0] ^= 1;
        refit(&mut mid, 1, &kp);
        assert_eq!(
            verify_chain(&mid, &root, &VerificationPolicy::sampled(0)).failure,
            Some(FailureReason::SwfChainBroken { index: 3, detail: "predecessor binding" })
        );

        // Forged final output: full mode recomputes, sampled mode checks
        // the archived output leaf.
        let mut last = file.clone();
        last.checkpoints[2].payload.swf.output[0] ^= 1;
        refit(&mut last, 2, &kp);
        assert!(matches!(
            verify_chain(&last, &root, &VerificationPolicy::full()).failure,
            Some(FailureReason::SwfProofRejected { index: 3, .. })
        ));
        assert!(matches!(
            verify_chain(&last, &root, &VerificationPolicy::sampled(0)).failure,
            Some(FailureReason::SwfProofRejected { index: 3, .. })
        ));
    }

    #[test]
    fn requote_pattern_is_enforced() {
        let tmp = tempfile::tempdir().unwrap();
        let mut s = new_session(tmp.path());
        let mut collector = ChainCollector::new(s.header());
        for i in 1..=4u64 {
            for item in &s.checkpoint_tick(i * TICK, b"d").unwrap().transmitted {
                collector.receive(item);
            }
        }
        let file = collector.into_file();
        let kp = s.test_keypair().clone();
        let root = platform().root_public();
        let policy = VerificationPolicy::full();
        assert!(verify_chain(&file, &root, &policy).is_valid());

        let mut missing = file.clone();
        missing.checkpoints[3].payload.requote = None;
        refit(&mut missing, 3, &kp);
        assert_eq!(
            verify_chain(&missing, &root, &policy).failure,
            Some(FailureReason::RequoteMissing { index: 4 })
        );

        let mut extra = file.clone();
        extra.checkpoints[0].payload.requote = Some(file.header.quote.clone());
        refit(&mut extra, 0, &kp);
        assert_eq!(
            verify_chain(&extra, &root, &policy).failure,
            Some(FailureReason::RequoteUnexpected { index: 1 })
        );

        let mut stale = file.clone();
        stale.checkpoints[3].payload.requote = Some(file.header.quote.clone());
        refit(&mut stale, 3, &kp);
        assert_eq!(
            verify_chain(&stale, &root, &policy).failure,
            Some(FailureReason::RequoteRejected { index: 4, detail: "freshness value" })
        );
    }

    #[test]
    fn quote_binds_root_nonce_and_key() {
        let tmp = tempfile::tempdir().unwrap();
        let file = eventful_file(tmp.path());
        let policy = VerificationPolicy::full();

        let wrong_root = PlatformRoot::new([2u8; 32], None).root_public();
        assert!(matches!(
            verify_chain(&file, &wrong_root, &policy).failure,
            Some(FailureReason::QuoteRejected { .. })
        ));

        let pinned = VerificationPolicy {
            expected_verifier_nonce: Some(b"some-other-nonce".to_vec()),
            ..VerificationPolicy::full()
        };
        assert!(matches!(
            verify_chain(&file, &platform().root_public(), &pinned).failure,
            Some(FailureReason::QuoteRejected { .. })
        ));

        let mut swapped = file.clone();
        swapped.header.public_key = KeyPair::from_seed(&[9u8; 32]).public();
        assert!(matches!(
            verify_chain(&swapped, &platform().root_public(), &policy).failure,
            Some(FailureReason::QuoteRejected { .. })
        ));
    }

    #[test]
    fn scripted_cadence_flags_but_does_not_reject() {
        let tmp = tempfile::tempdir().unwrap();
        let mut s = new_session(tmp.path());
        let mut collector = ChainCollector::new(s.header());
        let mut seq = 1u64;
        // Perfectly uniform intervals: zero entropy over 9 keystrokes.
        type_events(&mut s, &mut seq, 1_000_000, &[100; 8]);
        for item in &s.checkpoint_tick(TICK, b"d").unwrap().transmitted {
            collector.receive(item);
        }
        let report = verify_chain(
            &collector.into_file(),
            &platform().root_public(),
            &VerificationPolicy::full(),
        );
        assert!(report.is_valid());
        let flags: Vec<_> = report.flagged().collect();
        assert_eq!(flags.len(), 1);
        assert!(matches!(flags[0], (1, SoftFlag::LowEntropy { bits }) if *bits == 0.0));
    }

    #[test]
    fn unexplained_gap_flags_and_degrades() {
        let tmp = tempfile::tempdir().unwrap();
        let mut s = new_session(tmp.path());
        let mut collector = ChainCollector::new(s.header());
        for item in &s.checkpoint_tick(TICK, b"d").unwrap().transmitted {
            collector.receive(item);
        }
        // Ticks stall for 270 s with no crash and no marker.
        for item in &s.checkpoint_tick(10 * TICK, b"d").unwrap().transmitted {
            collector.receive(item);
        }
        let report = verify_chain(
            &collector.into_file(),
            &platform().root_public(),
            &VerificationPolicy::full(),
        );
        assert!(report.is_valid());
        assert!(matches!(
            report.assessments[1].flags[..],
            [SoftFlag::UnexplainedGap { gap_us: 270_000_000 }]
        ));
        assert!(report.assessments[1].weight < 1.0);
        assert!(report.session_fidelity < 1.0);
    }

    #[test]
    fn fidelity_floors_at_beta_for_huge_gaps() {
        let tmp = tempfile::tempdir().unwrap();
        let mut s = new_session(tmp.path());
        let mut collector = ChainCollector::new(s.header());
        for item in &s.checkpoint_tick(TICK, b"d").unwrap().transmitted {
            collector.receive(item);
        }
        s.crash();
        let cfg = SessionConfig::test_scale();
        let (mut s, _) = Session::recover(&cfg, &platform(), tmp.path()).unwrap();
        // 70 000 s outage: decay passes the 0.3 floor.
        for item in &s.checkpoint_tick(TICK + 70_000_000_000, b"d").unwrap().transmitted {
            collector.receive(item);
        }
        let report = verify_chain(
            &collector.into_file(),
            &platform().root_public(),
            &VerificationPolicy::full(),
        );
        assert!(report.is_valid());
        let a = &report.assessments[1];
        assert_eq!(a.level, FidelityLevel::Minimal);
        assert!((a.weight - 0.3).abs() < 1e-12);
    }

    #[test]
    fn sampled_mode_requires_archived_leaves() {
        let tmp = tempfile::tempdir().unwrap();
        let file = eventful_file(tmp.path());
        let root = platform().root_public();

        let mut stripped = file.clone();
        stripped.leaf_archive.clear();
        assert!(matches!(
            verify_chain(&stripped, &root, &VerificationPolicy::sampled(0)).failure,
            Some(FailureReason::LeafArchiveMissing { .. })
        ));
        // Full mode recomputes everything and needs no archive.
        assert!(verify_chain(&stripped, &root, &VerificationPolicy::full()).is_valid());
    }

    #[test]
    fn parse_failure_is_a_rejection() {
        let report = verify_bytes(b"not a chain file", &platform().root_public(), &VerificationPolicy::full());
        assert_eq!(report.verdict, Verdict::Invalid);
        assert!(matches!(report.failure, Some(FailureReason::Structural { .. })));
    }

    #[test]
    fn empty_chain_with_valid_header_verifies() {
        let tmp = tempfile::tempdir().unwrap();
        let s = new_session(tmp.path());
        let file = ChainCollector::new(s.header()).into_file();
        let report = verify_chain(&file, &platform().root_public(), &VerificationPolicy::sampled(0));
        assert!(report.is_valid());
        assert_eq!(report.checkpoint_count, 0);
        assert_eq!(report.session_fidelity, 1.0);
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let tmp = tempfile::tempdir().unwrap();
        let file = eventful_file(tmp.path());
        let root = platform().root_public();
        let a = verify_chain(&file, &root, &VerificationPolicy::sampled(42));
        let b = verify_chain(&file, &root, &VerificationPolicy::sampled(42));
        let cov = |r: &VerificationReport| {
            r.assessments.iter().map(|x| x.swf_coverage).collect::<Vec<_>>()
        };
        assert_eq!(cov(&a), cov(&b));
    }
}
