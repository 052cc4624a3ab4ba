//! Simulation layer: Monte Carlo availability estimation for the
//! dependability chain, a discrete-event harness that drives real
//! sessions through fault schedules, and a wall-clock recovery benchmark.

pub mod bench;
pub mod mc;
pub mod session;

pub use bench::{bench_recovery, BenchReport, LatencyStats};
pub use mc::{
    mc_simulate, mc_simulate_cold, mc_sweep, sweep_csv, McConfig, McResult, SweepRow,
    SWEEP_CSV_HEADER,
};
pub use session::{
    evidence_time_loss_us, measured_availability, run_session, FaultEvent, FaultKind, FaultLog,
    FaultProfile, SegmentRecord, SessionRun, SimError, TypingModel,
};
