//! Whole-pipeline runs: simulate a session against the fault harness,
//! persist the evidence chain, reload it, and verify it as a third party
//! holding only the platform root public key.

use procat_core::chain::EvidenceChainFile;
use procat_core::chain::SessionConfig;
use procat_core::crypto::PlatformRoot;
use procat_core::simulator::{
    measured_availability, run_session, FaultEvent, FaultKind, FaultProfile, SessionRun,
    TypingModel,
};
use procat_core::verifier::{
    verify_chain, FailureReason, SwfCheckMode, VerificationPolicy, Verdict,
};

fn platform() -> PlatformRoot {
    PlatformRoot::new([0x21u8; 32], None)
}

fn policy_for(nonce: &[u8]) -> VerificationPolicy {
    let mut p = VerificationPolicy::full();
    p.expected_verifier_nonce = Some(nonce.to_vec());
    p
}

fn eventful_run(dir: &std::path::Path, seed: u64) -> SessionRun {
    run_session(
        &SessionConfig::test_scale(),
        &TypingModel::new(600.0),
        &FaultProfile::Scripted(vec![
            FaultEvent { time_s: 50.0, kind: FaultKind::Crash },
            FaultEvent { time_s: 200.0, kind: FaultKind::PartitionStart },
            FaultEvent { time_s: 290.0, kind: FaultKind::PartitionEnd },
        ]),
        seed,
        &platform(),
        dir,
    )
    .unwrap()
}

#[test]
fn chain_file_survives_disk_round_trip_and_still_verifies() {
    let tmp = tempfile::tempdir().unwrap();
    let run = eventful_run(tmp.path(), 101);
    assert_eq!(run.segments.len(), 1);
    let seg = &run.segments[0];

    let path = tmp.path().join("chain.bin");
    seg.file.write_to(&path).unwrap();
    let reloaded = EvidenceChainFile::read_from(&path).unwrap();
    assert_eq!(reloaded.encode(), seg.file.encode());

    let root = platform().root_public();
    let policy = policy_for(&seg.verifier_nonce);
    let before = verify_chain(&seg.file, &root, &policy);
    let after = verify_chain(&reloaded, &root, &policy);
    assert_eq!(before.verdict, Verdict::ValidWithGaps);
    assert_eq!(after.verdict, Verdict::ValidWithGaps);
    assert_eq!(before.checkpoint_count, after.checkpoint_count);
    assert_eq!(before.recovery_count, 1);
    assert!(before.offline_count > 0);
    // Simulated recovery is instant, so cadence never slips: every gap is
    // marker-explained and fidelity stays full.
    assert_eq!(before.session_fidelity, 1.0);
    assert!(!before.gaps.is_empty());
}

#[test]
fn seal_destruction_splits_the_run_into_fresh_sessions() {
    let tmp = tempfile::tempdir().unwrap();
    let run = run_session(
        &SessionConfig::test_scale(),
        &TypingModel::new(600.0),
        &FaultProfile::Scripted(vec![
            FaultEvent { time_s: 70.0, kind: FaultKind::Crash },
            FaultEvent { time_s: 250.0, kind: FaultKind::SealCorrupt },
            FaultEvent { time_s: 400.0, kind: FaultKind::Crash },
        ]),
        202,
        &platform(),
        tmp.path(),
    )
    .unwrap();

    assert_eq!(run.segments.len(), 2, "seal corruption must force a new session");
    let a = &run.segments[0].file.header;
    let b = &run.segments[1].file.header;
    assert_ne!(a.session_id, b.session_id, "cold restart must mint a fresh identity");
    assert_ne!(a.public_key, b.public_key);
    assert_ne!(
        run.segments[0].verifier_nonce, run.segments[1].verifier_nonce,
        "each attestation round uses its own nonce"
    );

    let root = platform().root_public();
    for seg in &run.segments {
        let report = verify_chain(&seg.file, &root, &policy_for(&seg.verifier_nonce));
        assert!(report.is_valid(), "{:?}", report.failure);
    }
    // Both in-segment recoveries appear: one per ordinary crash.
    let recoveries: u64 = run
        .segments
        .iter()
        .map(|s| verify_chain(&s.file, &root, &policy_for(&s.verifier_nonce)).recovery_count)
        .sum();
    assert_eq!(recoveries, 2);

    // The destroyed interval plus the two crash gaps bound the evidence loss.
    let avail = measured_availability(&run, 600_000_000);
    assert!(avail > 0.7 && avail < 1.0, "availability {avail}");
}

#[test]
fn identical_seeds_reproduce_identical_evidence_bytes() {
    let tmp_a = tempfile::tempdir().unwrap();
    let tmp_b = tempfile::tempdir().unwrap();
    let tmp_c = tempfile::tempdir().unwrap();
    let a = eventful_run(tmp_a.path(), 777);
    let b = eventful_run(tmp_b.path(), 777);
    let c = eventful_run(tmp_c.path(), 778);

    assert_eq!(a.segments.len(), b.segments.len());
    for (sa, sb) in a.segments.iter().zip(&b.segments) {
        assert_eq!(sa.file.encode(), sb.file.encode(), "same seed must be byte-identical");
        assert_eq!(sa.verifier_nonce, sb.verifier_nonce);
    }
    assert_ne!(
        a.segments[0].file.encode(),
        c.segments[0].file.encode(),
        "different seed must change the evidence"
    );
}

#[test]
fn verification_is_bound_to_the_platform_root_and_nonce() {
    let tmp = tempfile::tempdir().unwrap();
    let run = eventful_run(tmp.path(), 303);
    let seg = &run.segments[0];

    let honest = verify_chain(
        &seg.file,
        &platform().root_public(),
        &policy_for(&seg.verifier_nonce),
    );
    assert!(honest.is_valid());

    let wrong_root = PlatformRoot::new([0x5au8; 32], None).root_public();
    let against_wrong_root = verify_chain(&seg.file, &wrong_root, &policy_for(&seg.verifier_nonce));
    assert_eq!(against_wrong_root.verdict, Verdict::Invalid);
    assert!(matches!(
        against_wrong_root.failure,
        Some(FailureReason::QuoteRejected { .. })
    ));

    let wrong_nonce = verify_chain(
        &seg.file,
        &platform().root_public(),
        &policy_for(b"a-nonce-never-issued"),
    );
    assert_eq!(wrong_nonce.verdict, Verdict::Invalid);
    assert!(matches!(wrong_nonce.failure, Some(FailureReason::QuoteRejected { .. })));
}

#[test]
fn sampled_verification_accepts_the_same_disk_image() {
    let tmp = tempfile::tempdir().unwrap();
    let run = eventful_run(tmp.path(), 404);
    let seg = &run.segments[0];
    let path = tmp.path().join("chain.bin");
    seg.file.write_to(&path).unwrap();
    let reloaded = EvidenceChainFile::read_from(&path).unwrap();

    let root = platform().root_public();
    for seed in [1u64, 9, 42] {
        let mut policy = VerificationPolicy::sampled(seed);
        policy.expected_verifier_nonce = Some(seg.verifier_nonce.clone());
        assert_eq!(policy.swf_mode, SwfCheckMode::Sampled);
        let report = verify_chain(&reloaded, &root, &policy);
        assert!(report.is_valid(), "sampled seed {seed}: {:?}", report.failure);
    }
}
