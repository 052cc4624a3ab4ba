//! Continuous process attestation toolkit.
//!
//! Builds tamper-evident evidence chains that bind a document's edit history
//! to fresh behavioral input and elapsed wall-clock time, survives crashes
//! through sealed checkpoint state guarded by a monotonic counter, and
//! quantifies the availability of the whole construction with a four-state
//! continuous-time Markov model plus a Monte Carlo cross-check.
//!
//! Module map:
//!
//! * [`crypto`]: hashing, MACs, authenticated sealing, memory-hard key
//!   derivation, signing keys, the simulated platform root, and the
//!   persistent monotonic counter.
//! * [`behavior`]: keystroke event capture, authenticated constant-size
//!   batching, inter-keystroke-interval features, and entropy accounting.
//! * [`swf`]: the sequential work function with Merkle-committed
//!   intermediate states and probabilistic segment verification.
//! * [`chain`]: checkpoint construction, the hash chain, the chain file
//!   format, sealed session state, and crash recovery.
//! * [`verifier`]: offline chain verification, gap analysis, and the
//!   graduated fidelity score.
//! * [`dependability`]: the four-state availability model, its closed-form
//!   steady state, worst-case loss bounds, and leakage/composition bounds.
//! * [`simulator`]: Monte Carlo runs of the availability model and an
//!   end-to-end session simulator with fault injection.
//! * [`config`]: TOML configuration for the platform root, session
//!   parameters, and fault profiles.

pub mod behavior;
pub mod chain;
pub mod config;
pub mod crypto;
pub mod dependability;
pub mod simulator;
pub mod swf;
pub mod verifier;
pub mod wire;
