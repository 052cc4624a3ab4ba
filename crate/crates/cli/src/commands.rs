//! Subcommand implementations. Each handler resolves its inputs from
//! flags plus the optional config file, runs the library call, and emits
//! one summary in the selected format.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use serde::Serialize;

use procat_core::chain::{EvidenceChainFile, Marker, SessionConfig};
use procat_core::config::{ConfigError, ToolConfig};
use procat_core::dependability::{
    composition_bound, eca_approximation, eca_closed_form, leakage_bound, mtbeg, steady_state,
    worst_case_eca, CompositionInputs, CompositionMode, CtmcParams,
};
use procat_core::simulator::{
    bench_recovery, evidence_time_loss_us, mc_simulate, mc_sweep, measured_availability,
    run_session, sweep_csv, LatencyStats, McConfig, SimError,
};
use procat_core::verifier::{
    verify_chain, SoftFlag, Verdict, VerificationPolicy, VerificationReport,
};

use crate::{
    file_err, usage, BenchArgs, BoundArgs, CmdError, EcaArgs, Format, RunArgs, SweepArgs,
    VerifyArgs, VerifyMode, EXIT_INVALID,
};

pub fn load_config(flag: Option<&Path>) -> Result<ToolConfig, CmdError> {
    let path = match flag {
        Some(p) => Some(p.to_path_buf()),
        None => std::env::var_os("PROCAT_CONFIG").map(PathBuf::from),
    };
    match path {
        Some(p) => ToolConfig::load(&p).map_err(|e| file_err(format!("{}: {e}", p.display()))),
        None => Ok(ToolConfig::default()),
    }
}

fn config_err(e: ConfigError) -> CmdError {
    file_err(format!("config: {e}"))
}

fn sim_err(e: SimError) -> CmdError {
    match e {
        SimError::InvalidProfile(m) => usage(format!("fault profile: {m}")),
        SimError::Io(e) => file_err(format!("session state: {e}")),
        other => file_err(format!("session failed: {other}")),
    }
}

/// Session parameters from the --scale flag, falling back to the config
/// file's session section.
fn session_profile(
    scale: &Option<String>,
    config: &ToolConfig,
) -> Result<SessionConfig, CmdError> {
    match scale.as_deref() {
        None => config.session_config().map_err(config_err),
        Some("standard") => Ok(SessionConfig::default()),
        Some("desk") => Ok(SessionConfig::desk_scale()),
        Some("test") => Ok(SessionConfig::test_scale()),
        Some(other) => {
            Err(usage(format!("--scale {other}: unknown profile (standard, desk, test)")))
        }
    }
}

/// Print to stdout, treating a closed pipe as a normal early exit.
fn write_stdout(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let result = out.write_all(text.as_bytes()).and_then(|_| out.flush());
    if let Err(e) = result {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("error: stdout: {e}");
        std::process::exit(crate::EXIT_FILE as i32);
    }
}

fn emit<T: Serialize>(format: Format, summary: &T, human: &str) {
    match format {
        Format::Json => {
            let mut text =
                serde_json::to_string_pretty(summary).expect("summary serializes");
            text.push('\n');
            write_stdout(&text);
        }
        _ => write_stdout(human),
    }
}

// run

#[derive(Serialize)]
struct SegmentSummary {
    path: String,
    checkpoints: u64,
    session_id: String,
    start_time_s: f64,
}

#[derive(Serialize)]
struct RunSummary {
    duration_s: f64,
    checkpoint_interval_s: f64,
    seed: u64,
    availability: f64,
    evidence_loss_s: f64,
    fault_events: u64,
    fault_log: String,
    segments: Vec<SegmentSummary>,
}

/// Later segments exist only after seal destruction forced a fresh
/// identity; they get numbered sibling paths.
fn segment_path(out: &Path, index: usize) -> PathBuf {
    if index == 0 {
        return out.to_path_buf();
    }
    let mut name = out.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(format!(".seg{index}"));
    out.with_file_name(name)
}

fn sibling_with_suffix(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(suffix);
    out.with_file_name(name)
}

pub fn run(args: &RunArgs, format: Format, config: &ToolConfig) -> Result<ExitCode, CmdError> {
    let platform = config.platform_root().map_err(config_err)?;
    let mut session = session_profile(&args.scale, config)?;
    if let Some(interval_s) = args.interval {
        session.checkpoint_interval_us = (interval_s * 1e6).round() as u64;
        session.validate().map_err(|e| usage(format!("--interval: {e}")))?;
    }
    let typing = config.typing_model(args.duration).map_err(config_err)?;
    let faults = config.fault_profile().map_err(config_err)?;

    let state_dir = tempfile::tempdir().map_err(|e| file_err(format!("state dir: {e}")))?;
    let outcome = run_session(&session, &typing, &faults, args.seed, &platform, state_dir.path())
        .map_err(sim_err)?;

    let mut segments = Vec::new();
    for (i, seg) in outcome.segments.iter().enumerate() {
        let path = segment_path(&args.out, i);
        seg.file
            .write_to(&path)
            .map_err(|e| file_err(format!("{}: {e}", path.display())))?;
        segments.push(SegmentSummary {
            path: path.display().to_string(),
            checkpoints: seg.file.checkpoints.len() as u64,
            session_id: hex::encode(seg.file.header.session_id),
            start_time_s: seg.start_time_s,
        });
    }
    let log_path =
        args.fault_log.clone().unwrap_or_else(|| sibling_with_suffix(&args.out, ".log"));
    fs::write(&log_path, outcome.fault_log.to_text())
        .map_err(|e| file_err(format!("{}: {e}", log_path.display())))?;

    let duration_us = (args.duration * 1e6).round() as u64;
    let (evidence_loss_s, availability) = if duration_us == 0 {
        (0.0, 1.0)
    } else {
        (
            evidence_time_loss_us(&outcome, duration_us) as f64 / 1e6,
            measured_availability(&outcome, duration_us),
        )
    };

    let summary = RunSummary {
        duration_s: args.duration,
        checkpoint_interval_s: session.checkpoint_interval_us as f64 / 1e6,
        seed: args.seed,
        availability,
        evidence_loss_s,
        fault_events: outcome.fault_log.events.len() as u64,
        fault_log: log_path.display().to_string(),
        segments,
    };

    let mut human = String::new();
    for seg in &summary.segments {
        let _ = writeln!(
            human,
            "wrote {}: {} checkpoints, session {}",
            seg.path,
            seg.checkpoints,
            &seg.session_id[..8]
        );
    }
    let _ = writeln!(human, "fault log: {} ({} events)", summary.fault_log, summary.fault_events);
    let _ = writeln!(
        human,
        "availability: {:.6} ({:.1} s of {:.1} s lost)",
        summary.availability, summary.evidence_loss_s, summary.duration_s
    );
    emit(format, &summary, &human);
    Ok(ExitCode::SUCCESS)
}

// verify

#[derive(Serialize)]
struct GapSummary {
    checkpoint: u64,
    gap_s: f64,
    marker: &'static str,
}

#[derive(Serialize)]
struct FlagSummary {
    checkpoint: u64,
    flag: String,
}

#[derive(Serialize)]
struct VerifySummary {
    chain: String,
    verdict: &'static str,
    failure: Option<String>,
    checkpoints: u64,
    total_span_s: f64,
    session_fidelity: f64,
    recoveries: u64,
    offline_intervals: u64,
    gaps: Vec<GapSummary>,
    soft_flags: Vec<FlagSummary>,
}

fn marker_label(marker: &Marker) -> &'static str {
    match marker {
        Marker::Normal => "normal",
        Marker::Recovery { .. } => "recovery",
        Marker::OfflineBuffered => "offline",
    }
}

fn flag_text(flag: &SoftFlag) -> String {
    match flag {
        SoftFlag::LowEntropy { bits } => format!("low entropy: {bits:.1} bits"),
        SoftFlag::UnexplainedGap { gap_us } => {
            format!("unexplained gap: {:.1} s", *gap_us as f64 / 1e6)
        }
    }
}

impl VerifySummary {
    fn from_report(chain: &Path, report: &VerificationReport) -> VerifySummary {
        VerifySummary {
            chain: chain.display().to_string(),
            verdict: match report.verdict {
                Verdict::Valid => "Valid",
                Verdict::ValidWithGaps => "ValidWithGaps",
                Verdict::Invalid => "Invalid",
            },
            failure: report.failure.as_ref().map(|f| f.to_string()),
            checkpoints: report.checkpoint_count,
            total_span_s: report.total_span_us as f64 / 1e6,
            session_fidelity: report.session_fidelity,
            recoveries: report.recovery_count,
            offline_intervals: report.offline_count,
            gaps: report
                .gaps
                .iter()
                .map(|g| GapSummary {
                    checkpoint: g.index,
                    gap_s: g.gap_us as f64 / 1e6,
                    marker: marker_label(&g.marker),
                })
                .collect(),
            soft_flags: report
                .flagged()
                .map(|(index, flag)| FlagSummary { checkpoint: index, flag: flag_text(flag) })
                .collect(),
        }
    }

    fn human(&self) -> String {
        let mut out = format!("{}: {}\n", self.chain, self.verdict);
        if let Some(failure) = &self.failure {
            let _ = writeln!(out, "  failure: {failure}");
            return out;
        }
        let _ = writeln!(
            out,
            "  checkpoints: {} spanning {:.1} s",
            self.checkpoints, self.total_span_s
        );
        let _ = writeln!(out, "  fidelity: {:.4}", self.session_fidelity);
        let _ = writeln!(
            out,
            "  recoveries: {}, offline intervals: {}",
            self.recoveries, self.offline_intervals
        );
        for gap in &self.gaps {
            let _ = writeln!(
                out,
                "  gap at checkpoint {}: {:.1} s ({})",
                gap.checkpoint, gap.gap_s, gap.marker
            );
        }
        for flag in &self.soft_flags {
            let _ = writeln!(out, "  flag at checkpoint {}: {}", flag.checkpoint, flag.flag);
        }
        out
    }
}

pub fn verify(
    args: &VerifyArgs,
    format: Format,
    config: &ToolConfig,
) -> Result<ExitCode, CmdError> {
    if args.mode == VerifyMode::Full && (args.k.is_some() || args.sample_fraction.is_some()) {
        return Err(usage("--k and --sample-fraction apply only to --mode sampled"));
    }
    if args.k.is_some() && args.sample_fraction.is_some() {
        return Err(usage("--k and --sample-fraction are mutually exclusive"));
    }

    let bytes = fs::read(&args.chain)
        .map_err(|e| file_err(format!("{}: {e}", args.chain.display())))?;
    let file = EvidenceChainFile::decode(&bytes)
        .map_err(|e| file_err(format!("{}: cannot parse chain: {e}", args.chain.display())))?;

    let mut policy = match args.mode {
        VerifyMode::Full => VerificationPolicy::full(),
        VerifyMode::Sampled => VerificationPolicy::sampled(args.sampling_seed),
    };
    if let Some(k) = args.k {
        // First, last, and recovery-adjacent checkpoints are always
        // sampled, so k is a target, not an exact count.
        policy.sample_fraction = (k as f64 / file.checkpoints.len().max(1) as f64).min(1.0);
    }
    if let Some(fraction) = args.sample_fraction {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(usage("--sample-fraction must be in [0, 1]"));
        }
        policy.sample_fraction = fraction;
    }
    if let Some(nonce_hex) = &args.nonce {
        policy.expected_verifier_nonce =
            Some(hex::decode(nonce_hex).map_err(|e| usage(format!("--nonce: {e}")))?);
    }

    let platform = config.platform_root().map_err(config_err)?;
    let report = verify_chain(&file, &platform.root_public(), &policy);
    let summary = VerifySummary::from_report(&args.chain, &report);
    emit(format, &summary, &summary.human());
    Ok(if report.verdict == Verdict::Invalid {
        ExitCode::from(EXIT_INVALID)
    } else {
        ExitCode::SUCCESS
    })
}

// eca

#[derive(Serialize)]
struct StationarySummary {
    available: f64,
    degraded: f64,
    recovering: f64,
    failed: f64,
}

#[derive(Serialize)]
struct McSummary {
    estimate: f64,
    ci_lo: f64,
    ci_hi: f64,
    std_error: f64,
    trials: u64,
    horizon_hours: f64,
    seed: u64,
}

#[derive(Serialize)]
struct EcaSummary {
    params: CtmcParams,
    stationary: StationarySummary,
    eca_solver: f64,
    eca_closed_form: f64,
    eca_first_order: f64,
    mtbeg_hours: f64,
    mc: Option<McSummary>,
}

fn resolve_params(
    preset: &Option<String>,
    config: &ToolConfig,
    overrides: [Option<f64>; 6],
) -> Result<CtmcParams, CmdError> {
    let base = match preset {
        Some(name) => CtmcParams::preset(name).ok_or_else(|| {
            usage(format!("--preset {name}: unknown preset (desktop, server, iot)"))
        })?,
        None => config.ctmc_params().map_err(config_err)?,
    };
    let [lambda_c, lambda_p, mu_r, mu_f, mu_p, p_f] = overrides;
    let params = CtmcParams {
        lambda_c: lambda_c.unwrap_or(base.lambda_c),
        lambda_p: lambda_p.unwrap_or(base.lambda_p),
        mu_r: mu_r.unwrap_or(base.mu_r),
        mu_f: mu_f.unwrap_or(base.mu_f),
        mu_p: mu_p.unwrap_or(base.mu_p),
        p_f: p_f.unwrap_or(base.p_f),
    };
    params.validate().map_err(|e| usage(format!("rates: {e}")))?;
    Ok(params)
}

pub fn eca(args: &EcaArgs, format: Format, config: &ToolConfig) -> Result<ExitCode, CmdError> {
    let params = resolve_params(
        &args.preset,
        config,
        [args.lambda_c, args.lambda_p, args.mu_r, args.mu_f, args.mu_p, args.p_f],
    )?;
    let solution = steady_state(&params).map_err(|e| usage(format!("rates: {e}")))?;
    let mc = if args.trials > 0 {
        let mc_config = McConfig {
            params,
            horizon_hours: args.horizon,
            trials: args.trials,
            rng_seed: args.seed,
        };
        let result = mc_simulate(&mc_config).map_err(|e| usage(format!("monte carlo: {e}")))?;
        Some(McSummary {
            estimate: result.eca_estimate,
            ci_lo: result.confidence_interval_95.0,
            ci_hi: result.confidence_interval_95.1,
            std_error: result.std_error,
            trials: result.trials,
            horizon_hours: args.horizon,
            seed: args.seed,
        })
    } else {
        None
    };

    let summary = EcaSummary {
        params,
        stationary: StationarySummary {
            available: solution.pi_a,
            degraded: solution.pi_d,
            recovering: solution.pi_r,
            failed: solution.pi_f,
        },
        eca_solver: solution.eca,
        eca_closed_form: eca_closed_form(&params),
        eca_first_order: eca_approximation(&params),
        mtbeg_hours: mtbeg(&params, solution.eca),
        mc,
    };

    let mut human = format!(
        "rates per hour: lambda_c={} lambda_p={} mu_r={} mu_f={} mu_p={} p_f={}\n",
        params.lambda_c, params.lambda_p, params.mu_r, params.mu_f, params.mu_p, params.p_f
    );
    let _ = writeln!(
        human,
        "stationary: available={:.8} degraded={:.3e} recovering={:.3e} failed={:.3e}",
        summary.stationary.available,
        summary.stationary.degraded,
        summary.stationary.recovering,
        summary.stationary.failed
    );
    let _ = writeln!(human, "eca (solver):      {:.8}", summary.eca_solver);
    let _ = writeln!(human, "eca (closed form): {:.8}", summary.eca_closed_form);
    let _ = writeln!(human, "eca (first order): {:.8}", summary.eca_first_order);
    if let Some(mc) = &summary.mc {
        let _ = writeln!(
            human,
            "eca (monte carlo): {:.8} in [{:.8}, {:.8}], {} trials of {} h",
            mc.estimate, mc.ci_lo, mc.ci_hi, mc.trials, mc.horizon_hours
        );
    }
    let _ = writeln!(
        human,
        "mean time between evidence gaps: {:.1} h",
        summary.mtbeg_hours
    );
    emit(format, &summary, &human);
    Ok(ExitCode::SUCCESS)
}

// sweep

pub fn sweep(args: &SweepArgs, config: &ToolConfig) -> Result<ExitCode, CmdError> {
    if args.points == 0 {
        return Err(usage("--points must be at least 1"));
    }
    let base = match &args.preset {
        Some(name) => CtmcParams::preset(name).ok_or_else(|| {
            usage(format!("--preset {name}: unknown preset (desktop, server, iot)"))
        })?,
        None => config.ctmc_params().map_err(config_err)?,
    };
    let grid = args.lambda_c.log_grid(args.points);
    let rows = mc_sweep(&base, &grid, args.horizon, args.trials, args.seed)
        .map_err(|e| usage(format!("sweep: {e}")))?;
    let csv = sweep_csv(&rows);
    match &args.out {
        Some(path) => {
            fs::write(path, &csv).map_err(|e| file_err(format!("{}: {e}", path.display())))?;
            eprintln!("wrote {} rows to {}", rows.len(), path.display());
        }
        None => write_stdout(&csv),
    }
    Ok(ExitCode::SUCCESS)
}

// bound

#[derive(Serialize)]
struct CompositionSummary {
    inputs: CompositionInputs,
    multiplicative: f64,
    additive: f64,
}

#[derive(Serialize)]
struct LeakageSummary {
    hidden_bits: u32,
    advantage_bound: f64,
}

#[derive(Serialize)]
struct WorstCaseSummary {
    crashes: u64,
    interval_s: f64,
    horizon_s: f64,
    availability_floor: f64,
}

#[derive(Serialize)]
struct BoundSummary {
    composition: Option<CompositionSummary>,
    leakage: Option<LeakageSummary>,
    worst_case: Option<WorstCaseSummary>,
}

fn require(value: Option<f64>, flag: &str, group: &str) -> Result<f64, CmdError> {
    value.ok_or_else(|| usage(format!("{group} needs {flag}")))
}

pub fn bound(args: &BoundArgs, format: Format) -> Result<ExitCode, CmdError> {
    let composition_group = "composition bound (all five evasion probabilities)";
    let any_composition = [args.eps_sc, args.eps_negl, args.p_beh, args.p_temp, args.p_content]
        .iter()
        .any(Option::is_some);
    let composition = if any_composition {
        let inputs = CompositionInputs {
            eps_sc: require(args.eps_sc, "--eps-sc", composition_group)?,
            eps_negl: require(args.eps_negl, "--eps-negl", composition_group)?,
            p_beh: require(args.p_beh, "--p-beh", composition_group)?,
            p_temp: require(args.p_temp, "--p-temp", composition_group)?,
            p_content: require(args.p_content, "--p-content", composition_group)?,
        };
        inputs.validate().map_err(|e| usage(e.to_string()))?;
        Some(CompositionSummary {
            multiplicative: composition_bound(&inputs, CompositionMode::Multiplicative),
            additive: composition_bound(&inputs, CompositionMode::Additive),
            inputs,
        })
    } else {
        None
    };

    let leakage = args
        .hidden_bits
        .map(|bits| LeakageSummary { hidden_bits: bits, advantage_bound: leakage_bound(bits) });

    let worst_group = "worst-case floor (--crashes, --interval, --horizon)";
    let worst_case = if args.crashes.is_some() || args.interval.is_some() || args.horizon.is_some()
    {
        let crashes =
            args.crashes.ok_or_else(|| usage(format!("{worst_group} needs --crashes")))?;
        let interval_s = require(args.interval, "--interval", worst_group)?;
        let horizon_s = require(args.horizon, "--horizon", worst_group)?;
        if interval_s <= 0.0 || horizon_s <= 0.0 {
            return Err(usage("--interval and --horizon must be positive"));
        }
        if crashes as f64 * interval_s > horizon_s {
            return Err(usage("crash schedule exceeds the horizon"));
        }
        Some(WorstCaseSummary {
            crashes,
            interval_s,
            horizon_s,
            availability_floor: worst_case_eca(crashes, interval_s, horizon_s),
        })
    } else {
        None
    };

    if composition.is_none() && leakage.is_none() && worst_case.is_none() {
        return Err(usage(
            "nothing to compute: pass the composition probabilities, --hidden-bits, \
             or --crashes with --interval and --horizon",
        ));
    }

    let summary = BoundSummary { composition, leakage, worst_case };
    let mut human = String::new();
    if let Some(c) = &summary.composition {
        let _ = writeln!(human, "composition bound (independent domains): {:.3e}", c.multiplicative);
        let _ = writeln!(human, "composition bound (correlated union):    {:.3e}", c.additive);
    }
    if let Some(l) = &summary.leakage {
        let _ = writeln!(
            human,
            "leakage advantage with {} hidden bits: {:.3e}",
            l.hidden_bits, l.advantage_bound
        );
    }
    if let Some(w) = &summary.worst_case {
        let _ = writeln!(
            human,
            "availability floor for {} adversarial crashes over {:.1} s: {:.6}",
            w.crashes, w.horizon_s, w.availability_floor
        );
    }
    emit(format, &summary, &human);
    Ok(ExitCode::SUCCESS)
}

// bench

#[derive(Serialize)]
struct BenchSummary {
    profile: String,
    repetitions: u32,
    sealed: LatencyStats,
    cold: LatencyStats,
}

pub fn bench(args: &BenchArgs, format: Format, config: &ToolConfig) -> Result<ExitCode, CmdError> {
    if args.reps == 0 {
        return Err(usage("--reps must be at least 1"));
    }
    let session = session_profile(&args.scale, config)?;
    let report = bench_recovery(&session, args.reps).map_err(sim_err)?;
    let summary = BenchSummary {
        profile: args.scale.clone().unwrap_or_else(|| "config".into()),
        repetitions: args.reps,
        sealed: report.sealed,
        cold: report.cold,
    };
    let line = |stats: &LatencyStats| {
        format!(
            "mean {:.2} ms, p99 {:.2} ms, range {:.2}..{:.2} ms",
            stats.mean_ms, stats.p99_ms, stats.min_ms, stats.max_ms
        )
    };
    let human = format!(
        "recovery latency, {} repetitions each:\n  sealed recovery: {}\n  cold restart:    {}\n",
        summary.repetitions,
        line(&summary.sealed),
        line(&summary.cold)
    );
    emit(format, &summary, &human);
    Ok(ExitCode::SUCCESS)
}
