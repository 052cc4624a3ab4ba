//! Discrete-event session harness: drives the real session engine on a
//! virtual clock, feeding it synthetic typing and injected faults, and
//! returns the evidence chains plus the ground-truth fault log for oracle
//! comparison. No real sleeping; a 10,000-hour run is pure computation.
//!
//! A seal corruption ends the current chain (cold restart under a fresh
//! identity), so one run yields one chain file per session segment.

use std::path::Path;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::behavior::{EventBatch, ChannelError, KeyClass, KeystrokeEvent, BATCH_CAPACITY};
use crate::chain::file::EvidenceChainFile;
use crate::chain::{
    checkpoint::Marker, ChainError, RecoverError, Session, SessionConfig,
};
use crate::crypto::PlatformRoot;
use crate::dependability::CtmcParams;
use crate::verifier::ChainCollector;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid fault profile: {0}")]
    InvalidProfile(&'static str),
    #[error("harness invariant violated: {0}")]
    Harness(&'static str),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Recover(#[from] RecoverError),
    #[error("behavioral channel rejected input: {0}")]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    Crash,
    PartitionStart,
    PartitionEnd,
    /// Sealed state destroyed at crash time: recovery fails and the run
    /// continues under a cold restart.
    SealCorrupt,
}

impl FaultKind {
    fn label(self) -> &'static str {
        match self {
            FaultKind::Crash => "crash",
            FaultKind::PartitionStart => "partition_start",
            FaultKind::PartitionEnd => "partition_end",
            FaultKind::SealCorrupt => "seal_corrupt",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaultEvent {
    pub time_s: f64,
    pub kind: FaultKind,
}

/// Fault injection schedule for one run.
#[derive(Clone, Debug)]
pub enum FaultProfile {
    /// Fixed schedule; times must fall inside the session duration.
    Scripted(Vec<FaultEvent>),
    /// Crashes, seal corruptions, and partitions drawn from the same
    /// per-hour rates the dependability chain uses.
    Stochastic(CtmcParams),
    /// Each crash lands just before a checkpoint completes, destroying a
    /// full interval of progress; crashes are two intervals apart so each
    /// maps to exactly one recovery marker.
    AdversarialWorstCase { n_crashes: u64 },
}

impl FaultProfile {
    pub fn none() -> FaultProfile {
        FaultProfile::Scripted(Vec::new())
    }
}

/// The materialized schedule a run actually executed, in time order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FaultLog {
    pub events: Vec<FaultEvent>,
}

impl FaultLog {
    pub fn crash_times_s(&self) -> Vec<f64> {
        self.times_of(FaultKind::Crash)
    }

    pub fn corruption_times_s(&self) -> Vec<f64> {
        self.times_of(FaultKind::SealCorrupt)
    }

    fn times_of(&self, kind: FaultKind) -> Vec<f64> {
        self.events.iter().filter(|e| e.kind == kind).map(|e| e.time_s).collect()
    }

    /// One line per event: `t=<seconds>s <kind>`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&format!("t={:.3}s {}\n", e.time_s, e.kind.label()));
        }
        out
    }
}

/// Synthetic keystroke source: log-normal inter-key intervals.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TypingModel {
    pub median_iki_ms: f64,
    pub sigma: f64,
    pub session_duration_s: f64,
}

impl TypingModel {
    pub fn new(session_duration_s: f64) -> TypingModel {
        TypingModel { median_iki_ms: 90.0, sigma: 0.5, session_duration_s }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.median_iki_ms.is_finite() && self.median_iki_ms > 0.0) {
            return Err(SimError::InvalidProfile("median inter-key interval must be positive"));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(SimError::InvalidProfile("iki sigma must be positive"));
        }
        if !(self.session_duration_s.is_finite() && self.session_duration_s >= 0.0) {
            return Err(SimError::InvalidProfile("session duration must be non-negative"));
        }
        Ok(())
    }

    /// Keystrokes strictly inside (start, end], timestamps in
    /// microseconds.
    pub fn generate(
        &self,
        rng: &mut ChaCha12Rng,
        start_us: u64,
        end_us: u64,
    ) -> Vec<(u64, KeyClass)> {
        let dist = LogNormal::new(self.median_iki_ms.ln(), self.sigma).expect("validated sigma");
        let mut out = Vec::new();
        let mut t = start_us as f64;
        loop {
            t += dist.sample(rng) * 1000.0;
            if t >= end_us as f64 {
                return out;
            }
            let r: f64 = rng.random();
            let class = if r < 0.85 {
                KeyClass::Printable
            } else if r < 0.93 {
                KeyClass::Edit
            } else {
                KeyClass::Navigation
            };
            out.push((t as u64, class));
        }
    }
}

/// One contiguous session: everything between init (or cold restart) and
/// the end of the run or the next seal corruption.
#[derive(Clone, Debug)]
pub struct SegmentRecord {
    pub file: EvidenceChainFile,
    /// Virtual time at which this session began, seconds.
    pub start_time_s: f64,
    pub verifier_nonce: Vec<u8>,
}

#[derive(Clone, Debug)]
pub struct SessionRun {
    pub segments: Vec<SegmentRecord>,
    pub fault_log: FaultLog,
}

/// Virtual time not covered by evidence: recovery-marked intervals, the
/// destroyed stretch before each cold restart, and any tail after the
/// last checkpoint.
pub fn evidence_time_loss_us(run: &SessionRun, duration_us: u64) -> u64 {
    let mut covered = 0u64;
    for seg in &run.segments {
        let mut prev = 0u64;
        for cp in &seg.file.checkpoints {
            let d = cp.payload.local_time_us - prev;
            if !matches!(cp.payload.marker, Marker::Recovery { .. }) {
                covered += d;
            }
            prev = cp.payload.local_time_us;
        }
    }
    duration_us.saturating_sub(covered)
}

pub fn measured_availability(run: &SessionRun, duration_us: u64) -> f64 {
    1.0 - evidence_time_loss_us(run, duration_us) as f64 / duration_us as f64
}

struct MatEvent {
    time_us: u64,
    kind: FaultKind,
}

fn exp_draw(rng: &mut ChaCha12Rng, rate_per_s: f64) -> f64 {
    let u: f64 = rng.random();
    -(1.0 - u).ln() / rate_per_s
}

/// Resolve a profile into a concrete, sorted schedule.
fn materialize(
    profile: &FaultProfile,
    duration_us: u64,
    delta_us: u64,
    rng: &mut ChaCha12Rng,
) -> Result<Vec<MatEvent>, SimError> {
    let mut events: Vec<MatEvent> = Vec::new();
    match profile {
        FaultProfile::Scripted(list) => {
            for e in list {
                if !(e.time_s.is_finite() && e.time_s >= 0.0) {
                    return Err(SimError::InvalidProfile("scripted fault time must be finite"));
                }
                let t = (e.time_s * 1e6).round() as u64;
                if t >= duration_us {
                    return Err(SimError::InvalidProfile(
                        "scripted fault time beyond session duration",
                    ));
                }
                events.push(MatEvent { time_us: t, kind: e.kind });
            }
        }
        FaultProfile::Stochastic(rates) => {
            rates.validate().map_err(|_| SimError::InvalidProfile("invalid stochastic rates"))?;
            let dur_s = duration_us as f64 / 1e6;
            let mut t = 0.0;
            loop {
                t += exp_draw(rng, rates.lambda_c / 3600.0);
                if t >= dur_s {
                    break;
                }
                let kind = if rng.random::<f64>() < rates.p_f {
                    FaultKind::SealCorrupt
                } else {
                    FaultKind::Crash
                };
                events.push(MatEvent { time_us: (t * 1e6).round() as u64, kind });
            }
            let mut t = 0.0;
            loop {
                t += exp_draw(rng, rates.lambda_p / 3600.0);
                if t >= dur_s {
                    break;
                }
                let start = (t * 1e6).round() as u64;
                t += exp_draw(rng, rates.mu_p / 3600.0);
                let end = ((t.min(dur_s) * 1e6).round() as u64).min(duration_us - 1);
                if end > start {
                    events.push(MatEvent { time_us: start, kind: FaultKind::PartitionStart });
                    events.push(MatEvent { time_us: end, kind: FaultKind::PartitionEnd });
                }
            }
        }
        FaultProfile::AdversarialWorstCase { n_crashes } => {
            if 2 * n_crashes * delta_us > duration_us {
                return Err(SimError::InvalidProfile(
                    "adversarial schedule needs two intervals per crash",
                ));
            }
            for k in 1..=*n_crashes {
                // 1 ms before every other checkpoint completes.
                events.push(MatEvent { time_us: 2 * k * delta_us - 1_000, kind: FaultKind::Crash });
            }
        }
    }
    events.sort_by_key(|e| e.time_us);
    Ok(events)
}

/// Collapse partition events into disjoint (start, end) intervals.
fn partition_intervals(
    events: &[MatEvent],
    duration_us: u64,
) -> Result<Vec<(u64, u64)>, SimError> {
    let mut intervals = Vec::new();
    let mut open: Option<u64> = None;
    for e in events {
        match e.kind {
            FaultKind::PartitionStart => {
                if open.is_some() {
                    return Err(SimError::InvalidProfile("partition started twice"));
                }
                open = Some(e.time_us);
            }
            FaultKind::PartitionEnd => {
                let start = open
                    .take()
                    .ok_or(SimError::InvalidProfile("partition ended without starting"))?;
                if e.time_us > start {
                    intervals.push((start, e.time_us));
                }
            }
            _ => {}
        }
    }
    if let Some(start) = open {
        intervals.push((start, duration_us));
    }
    Ok(intervals)
}

struct Typist {
    model: TypingModel,
    rng: ChaCha12Rng,
    next_seq: u64,
    batch_index: u64,
    total_keys: u64,
}

impl Typist {
    /// Type through (from, to] in session-local time and submit the
    /// batches. Anything submitted since the last seal is lost on crash,
    /// exactly as live input would be.
    fn type_span(&mut self, session: &mut Session, from_us: u64, to_us: u64) -> Result<(), SimError> {
        let events = self.model.generate(&mut self.rng, from_us, to_us);
        self.total_keys += events.len() as u64;
        let key = session.channel_key();
        for chunk in events.chunks(BATCH_CAPACITY) {
            let ks: Vec<KeystrokeEvent> = chunk
                .iter()
                .map(|&(timestamp_us, key_class)| {
                    let sequence_number = self.next_seq;
                    self.next_seq += 1;
                    KeystrokeEvent { sequence_number, timestamp_us, key_class, is_padding: false }
                })
                .collect();
            let frame_end = chunk.last().expect("non-empty chunk").0 + 1_000;
            let batch = EventBatch::build(self.batch_index, &ks, &mut self.next_seq, frame_end, &key)?;
            self.batch_index += 1;
            session.submit_batch(&batch)?;
        }
        Ok(())
    }

    /// After recovery the channel watermark has rolled back to the last
    /// seal; resume numbering above it.
    fn resync(&mut self, session: &Session) {
        self.next_seq = session.channel_watermark() + 1;
    }
}

/// Drive a full session run on a virtual clock. Checkpoints fire every
/// interval; faults strictly before a tick are applied first. A crash
/// drops in-flight state and recovers from the seal; a seal corruption
/// forces a cold restart under a fresh identity and verifier nonce,
/// starting a new chain segment. Deterministic for a fixed seed.
pub fn run_session(
    config: &SessionConfig,
    typing: &TypingModel,
    faults: &FaultProfile,
    seed: u64,
    platform: &PlatformRoot,
    base_dir: &Path,
) -> Result<SessionRun, SimError> {
    config.validate()?;
    typing.validate()?;
    let delta_us = config.checkpoint_interval_us;
    let duration_us = (typing.session_duration_s * 1e6).round() as u64;
    // A duration below one interval yields a header-only chain.
    let n_ticks = duration_us / delta_us;

    let mut fault_rng = ChaCha12Rng::seed_from_u64(seed.wrapping_add(0x0fau64));
    let events = materialize(faults, duration_us, delta_us, &mut fault_rng)?;
    let partitions = partition_intervals(&events, duration_us)?;

    let mut init_rng = ChaCha12Rng::seed_from_u64(seed);
    let mut typist = Typist {
        model: *typing,
        rng: ChaCha12Rng::seed_from_u64(seed.wrapping_add(0x7fu64)),
        next_seq: 1,
        batch_index: 0,
        total_keys: 0,
    };

    let mut seg_index = 0usize;
    let nonce = |seg: usize| format!("sim-nonce-{seed:016x}-seg{seg}").into_bytes();
    let seg_dir = |seg: usize| base_dir.join(format!("seg{seg}"));

    let mut session = Session::session_init(
        config.clone(),
        platform,
        &nonce(seg_index),
        &seg_dir(seg_index),
        &mut init_rng,
    )?;
    let mut collector = ChainCollector::new(session.header());
    let mut seg_start_us = 0u64;
    let mut segments: Vec<SegmentRecord> = Vec::new();
    let mut document = String::new();

    let mut fault_cursor = 0usize;
    let mut typed_to_us = 0u64; // global time typed through so far

    for k in 1..=n_ticks {
        let tick_us = k * delta_us;

        while fault_cursor < events.len() && events[fault_cursor].time_us < tick_us {
            let ev = &events[fault_cursor];
            fault_cursor += 1;
            match ev.kind {
                FaultKind::PartitionStart | FaultKind::PartitionEnd => {}
                FaultKind::Crash => {
                    typist.type_span(
                        &mut session,
                        typed_to_us - seg_start_us,
                        ev.time_us - seg_start_us,
                    )?;
                    typed_to_us = ev.time_us;
                    let dir = seg_dir(seg_index);
                    session.crash();
                    let (recovered, _info) = Session::recover(config, platform, &dir)?;
                    session = recovered;
                    typist.resync(&session);
                }
                FaultKind::SealCorrupt => {
                    typist.type_span(
                        &mut session,
                        typed_to_us - seg_start_us,
                        ev.time_us - seg_start_us,
                    )?;
                    typed_to_us = ev.time_us;
                    let dir = seg_dir(seg_index);
                    corrupt_seal(&dir)?;
                    session.crash();
                    match Session::recover(config, platform, &dir) {
                        Err(RecoverError::SealCorrupted) => {}
                        Err(e) => return Err(e.into()),
                        Ok(_) => return Err(SimError::Harness("corrupted seal still recovered")),
                    }
                    segments.push(SegmentRecord {
                        file: collector.into_file(),
                        start_time_s: seg_start_us as f64 / 1e6,
                        verifier_nonce: nonce(seg_index),
                    });
                    seg_index += 1;
                    seg_start_us = ev.time_us;
                    session = Session::cold_restart(
                        config.clone(),
                        platform,
                        &nonce(seg_index),
                        &seg_dir(seg_index),
                        &mut init_rng,
                    )?;
                    collector = ChainCollector::new(session.header());
                    typist.next_seq = 1;
                    typist.batch_index = 0;
                    document.clear();
                }
            }
        }

        typist.type_span(&mut session, typed_to_us - seg_start_us, tick_us - seg_start_us)?;
        typed_to_us = tick_us;

        let offline_now = partitions
            .iter()
            .any(|&(s, e)| s < tick_us && e > tick_us - delta_us);
        if offline_now && !session.is_offline() {
            session.go_offline();
        } else if !offline_now && session.is_offline() {
            for item in session.go_online()? {
                collector.receive(&item);
            }
        }

        document.push_str(&format!("tick {k}: {} keys\n", typist.total_keys));
        let outcome = session.checkpoint_tick(tick_us - seg_start_us, document.as_bytes())?;
        for item in &outcome.transmitted {
            collector.receive(item);
        }
    }

    if session.is_offline() {
        for item in session.go_online()? {
            collector.receive(&item);
        }
    }
    segments.push(SegmentRecord {
        file: collector.into_file(),
        start_time_s: seg_start_us as f64 / 1e6,
        verifier_nonce: nonce(seg_index),
    });
    Ok(SessionRun { segments, fault_log: to_fault_log(&events) })
}

fn to_fault_log(events: &[MatEvent]) -> FaultLog {
    FaultLog {
        events: events
            .iter()
            .map(|e| FaultEvent { time_s: e.time_us as f64 / 1e6, kind: e.kind })
            .collect(),
    }
}

/// Flip a byte of the live sealed blob so recovery fails authentication.
fn corrupt_seal(dir: &Path) -> Result<(), SimError> {
    let path = dir.join("state.bin");
    let mut bytes = std::fs::read(&path)?;
    let last = bytes.len() - 1;
    bytes[last] ^= 0xff;
    std::fs::write(&path, &bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dependability::worst_case_eca;
    use crate::verifier::{verify_chain, VerificationPolicy};
    use tempfile::tempdir;

    const TICK_S: f64 = 30.0;

    fn platform() -> PlatformRoot {
        PlatformRoot::new([9u8; 32], None)
    }

    fn verify_segment(seg: &SegmentRecord) -> crate::verifier::VerificationReport {
        let mut policy = VerificationPolicy::full();
        policy.expected_verifier_nonce = Some(seg.verifier_nonce.clone());
        verify_chain(&seg.file, &platform().root_public(), &policy)
    }

    fn run(
        duration_s: f64,
        faults: &FaultProfile,
        seed: u64,
    ) -> (SessionRun, tempfile::TempDir) {
        let dir = tempdir().unwrap();
        let run = run_session(
            &SessionConfig::test_scale(),
            &TypingModel::new(duration_s),
            faults,
            seed,
            &platform(),
            dir.path(),
        )
        .unwrap();
        (run, dir)
    }

    #[test]
    fn clean_four_hour_run_yields_480_valid_checkpoints() {
        let (run, _dir) = run(14_400.0, &FaultProfile::none(), 1);
        assert_eq!(run.segments.len(), 1);
        let file = &run.segments[0].file;
        assert_eq!(file.checkpoints.len(), 480);
        assert!(file.checkpoints.iter().all(|c| c.payload.marker == Marker::Normal));

        let report = verify_segment(&run.segments[0]);
        assert!(report.is_valid(), "{:?}", report.failure);
        assert_eq!(report.session_fidelity, 1.0);
        assert_eq!(report.checkpoint_count, 480);
        assert_eq!(evidence_time_loss_us(&run, 14_400_000_000), 0);
        assert!(run.fault_log.events.is_empty());
    }

    #[test]
    fn scripted_crash_yields_one_recovery_marker_with_bounded_gap() {
        let faults = FaultProfile::Scripted(vec![FaultEvent {
            time_s: 3_605.0,
            kind: FaultKind::Crash,
        }]);
        let (run, _dir) = run(7_200.0, &faults, 2);
        assert_eq!(run.segments.len(), 1);
        let file = &run.segments[0].file;

        let recoveries: Vec<_> = file
            .checkpoints
            .iter()
            .filter_map(|c| match c.payload.marker {
                Marker::Recovery { gap_us } => Some((c.payload.index, gap_us)),
                _ => None,
            })
            .collect();
        assert_eq!(recoveries.len(), 1);
        let (index, gap_us) = recoveries[0];
        // Crash at 3605 s: last checkpoint 3600 s, recovery tick 3630 s.
        assert_eq!(index, 121);
        assert!(gap_us <= 30_000_000 + 2_000_000);

        let report = verify_segment(&run.segments[0]);
        assert!(report.is_valid(), "{:?}", report.failure);
        assert_eq!(report.recovery_count, 1);
        assert_eq!(evidence_time_loss_us(&run, 7_200_000_000), 30_000_000);
        assert_eq!(run.fault_log.crash_times_s(), vec![3_605.0]);
    }

    #[test]
    fn partition_buffers_checkpoints_then_flushes_in_order() {
        let faults = FaultProfile::Scripted(vec![
            FaultEvent { time_s: 1_000.0, kind: FaultKind::PartitionStart },
            FaultEvent { time_s: 2_000.0, kind: FaultKind::PartitionEnd },
        ]);
        let (run, _dir) = run(3_600.0, &faults, 3);
        assert_eq!(run.segments.len(), 1);
        let file = &run.segments[0].file;
        assert_eq!(file.checkpoints.len(), 120);

        let offline: Vec<u64> = file
            .checkpoints
            .iter()
            .filter(|c| c.payload.marker == Marker::OfflineBuffered)
            .map(|c| c.payload.index)
            .collect();
        // Every checkpoint whose window (t - interval, t] touches the
        // partition: ticks at 1020 s through 2010 s.
        assert_eq!(offline.len(), 34);
        assert_eq!(offline[0], 34);
        assert_eq!(*offline.last().unwrap(), 67);
        let contiguous: Vec<u64> = (34..=67).collect();
        assert_eq!(offline, contiguous);

        let report = verify_segment(&run.segments[0]);
        assert!(report.is_valid(), "{:?}", report.failure);
        assert_eq!(report.offline_count, 34);
        assert_eq!(evidence_time_loss_us(&run, 3_600_000_000), 0);
    }

    #[test]
    fn seal_corruption_forces_cold_restart_with_fresh_identity() {
        let faults = FaultProfile::Scripted(vec![FaultEvent {
            time_s: 905.0,
            kind: FaultKind::SealCorrupt,
        }]);
        let (run, _dir) = run(1_800.0, &faults, 4);
        assert_eq!(run.segments.len(), 2);

        let first = &run.segments[0].file;
        let second = &run.segments[1].file;
        assert_eq!(first.checkpoints.len(), 30);
        assert_eq!(second.checkpoints.len(), 30);
        assert_ne!(first.header.session_id, second.header.session_id);
        assert_eq!(run.segments[1].start_time_s, 905.0);
        // The new chain restarts numbering and timing from its own start.
        assert_eq!(second.checkpoints[0].payload.index, 1);
        assert_eq!(second.checkpoints[0].payload.local_time_us, 25_000_000);
        assert_eq!(second.checkpoints[0].payload.marker, Marker::Normal);

        for seg in &run.segments {
            let report = verify_segment(seg);
            assert!(report.is_valid(), "{:?}", report.failure);
        }
        // Lost evidence: the 5 s between the last sealed checkpoint at
        // 900 s and the corruption at 905 s.
        assert_eq!(evidence_time_loss_us(&run, 1_800_000_000), 5_000_000);
        assert_eq!(run.fault_log.corruption_times_s(), vec![905.0]);
    }

    #[test]
    fn adversarial_crashes_lose_exactly_one_interval_each() {
        for n in [1u64, 2] {
            let (run, _dir) = run(14_400.0, &FaultProfile::AdversarialWorstCase { n_crashes: n }, 5);
            assert_eq!(run.segments.len(), 1);
            let file = &run.segments[0].file;
            let recoveries = file
                .checkpoints
                .iter()
                .filter(|c| matches!(c.payload.marker, Marker::Recovery { .. }))
                .count();
            assert_eq!(recoveries as u64, n);

            let duration_us = 14_400_000_000;
            let loss = evidence_time_loss_us(&run, duration_us);
            assert_eq!(loss, n * 30_000_000);
            let measured = measured_availability(&run, duration_us);
            let bound = worst_case_eca(n, TICK_S, 14_400.0);
            assert!((measured - bound).abs() <= TICK_S / 14_400.0);
            assert!(verify_segment(&run.segments[0]).is_valid());
        }
    }

    #[test]
    fn typing_rate_stays_within_twenty_percent_of_nominal() {
        let model = TypingModel::new(300.0);
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        for w in 0..10u64 {
            let start = w * 30_000_000;
            let n = model.generate(&mut rng, start, start + 30_000_000).len();
            assert!(
                (240..=360).contains(&n),
                "window {w} generated {n} keystrokes"
            );
        }
    }

    #[test]
    fn stochastic_runs_reproduce_bit_identically_per_seed() {
        let rates = CtmcParams {
            lambda_c: 20.0,
            lambda_p: 40.0,
            mu_r: 3_600.0,
            mu_f: 360.0,
            mu_p: 120.0,
            p_f: 0.1,
        };
        let faults = FaultProfile::Stochastic(rates);
        let (a, _da) = run(1_800.0, &faults, 6);
        let (b, _db) = run(1_800.0, &faults, 6);

        assert_eq!(a.fault_log, b.fault_log);
        assert!(!a.fault_log.events.is_empty());
        assert_eq!(a.segments.len(), b.segments.len());
        for (sa, sb) in a.segments.iter().zip(&b.segments) {
            assert_eq!(sa.file.encode(), sb.file.encode());
        }
        for seg in &a.segments {
            let report = verify_segment(seg);
            assert!(report.is_valid(), "{:?}", report.failure);
        }

        let (c, _dc) = run(1_800.0, &faults, 7);
        assert_ne!(
            a.fault_log, c.fault_log,
            "different seeds must draw different schedules"
        );
    }

    #[test]
    fn crash_during_partition_recovers_and_keeps_buffering() {
        let faults = FaultProfile::Scripted(vec![
            FaultEvent { time_s: 300.0, kind: FaultKind::PartitionStart },
            FaultEvent { time_s: 455.0, kind: FaultKind::Crash },
            FaultEvent { time_s: 700.0, kind: FaultKind::PartitionEnd },
        ]);
        let (run, _dir) = run(1_200.0, &faults, 9);
        let file = &run.segments[0].file;
        let report = verify_segment(&run.segments[0]);
        assert!(report.is_valid(), "{:?}", report.failure);
        assert_eq!(report.recovery_count, 1);
        assert!(report.offline_count > 0);
        // Recovery outranks the partition marker at the first tick back.
        let recovery = file
            .checkpoints
            .iter()
            .find(|c| matches!(c.payload.marker, Marker::Recovery { .. }))
            .unwrap();
        assert_eq!(recovery.payload.index, 16); // tick at 480 s
        assert_eq!(file.checkpoints.len(), 40);
    }

    #[test]
    fn invalid_profiles_are_rejected() {
        let dir = tempdir().unwrap();
        let config = SessionConfig::test_scale();
        let typing = TypingModel::new(600.0);

        let late = FaultProfile::Scripted(vec![FaultEvent {
            time_s: 601.0,
            kind: FaultKind::Crash,
        }]);
        assert!(matches!(
            run_session(&config, &typing, &late, 1, &platform(), dir.path()),
            Err(SimError::InvalidProfile(_))
        ));

        let unbalanced = FaultProfile::Scripted(vec![FaultEvent {
            time_s: 10.0,
            kind: FaultKind::PartitionEnd,
        }]);
        assert!(matches!(
            run_session(&config, &typing, &unbalanced, 1, &platform(), dir.path()),
            Err(SimError::InvalidProfile(_))
        ));

        let too_many = FaultProfile::AdversarialWorstCase { n_crashes: 11 };
        assert!(matches!(
            run_session(&config, &typing, &too_many, 1, &platform(), dir.path()),
            Err(SimError::InvalidProfile(_))
        ));

        let bad_typing = TypingModel { sigma: 0.0, ..TypingModel::new(600.0) };
        assert!(matches!(
            run_session(&config, &bad_typing, &FaultProfile::none(), 1, &platform(), dir.path()),
            Err(SimError::InvalidProfile(_))
        ));
    }

    #[test]
    fn zero_duration_run_yields_header_only_chain() {
        let (run, _dir) = run(0.0, &FaultProfile::none(), 10);
        assert_eq!(run.segments.len(), 1);
        assert!(run.segments[0].file.checkpoints.is_empty());
        let report = verify_segment(&run.segments[0]);
        assert!(report.is_valid());
        assert_eq!(report.session_fidelity, 1.0);
        assert_eq!(report.checkpoint_count, 0);
    }

    #[test]
    fn fault_log_text_is_line_per_event() {
        let log = FaultLog {
            events: vec![
                FaultEvent { time_s: 1_000.0, kind: FaultKind::PartitionStart },
                FaultEvent { time_s: 2_000.0, kind: FaultKind::PartitionEnd },
                FaultEvent { time_s: 3_605.0, kind: FaultKind::Crash },
            ],
        };
        assert_eq!(
            log.to_text(),
            "t=1000.000s partition_start\nt=2000.000s partition_end\nt=3605.000s crash\n"
        );
    }
}
