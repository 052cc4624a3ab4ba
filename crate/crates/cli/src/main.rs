//! Command-line front end for the attestation toolkit: drive simulated
//! sessions, verify evidence chains, and evaluate the availability model.
//!
//! Exit codes: 0 success or Valid verdict, 1 Invalid verdict, 2 usage
//! error, 3 I/O or parse error.

mod commands;
mod parse;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use parse::RateRange;

pub const EXIT_INVALID: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_FILE: u8 = 3;

/// Errors that abort a subcommand. An Invalid verify verdict is not an
/// error; it is reported output with its own exit code.
#[derive(Debug)]
pub enum CmdError {
    /// Bad flag values or flag combinations.
    Usage(String),
    /// I/O failures and unparseable files, config files included.
    File(String),
}

impl CmdError {
    fn exit_code(&self) -> ExitCode {
        match self {
            CmdError::Usage(_) => ExitCode::from(EXIT_USAGE),
            CmdError::File(_) => ExitCode::from(EXIT_FILE),
        }
    }

    fn message(&self) -> &str {
        match self {
            CmdError::Usage(m) | CmdError::File(m) => m,
        }
    }
}

pub fn usage(msg: impl Into<String>) -> CmdError {
    CmdError::Usage(msg.into())
}

pub fn file_err(msg: impl Into<String>) -> CmdError {
    CmdError::File(msg.into())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Human,
    Json,
    Csv,
}

#[derive(Parser)]
#[command(
    name = "procat",
    version,
    about = "Evidence chains for continuous process attestation",
    propagate_version = true
)]
struct Cli {
    /// TOML configuration file; PROCAT_CONFIG is honored when the flag
    /// is absent.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output format; each subcommand defaults to its natural one.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Drive a simulated session and write its evidence chain.
    Run(RunArgs),
    /// Verify an evidence chain file and report verdict and fidelity.
    Verify(VerifyArgs),
    /// Evaluate steady-state evidence-coverage availability.
    Eca(EcaArgs),
    /// Sweep the crash rate and emit sealed-vs-cold curves as CSV.
    Sweep(SweepArgs),
    /// Analytic bounds: adversary composition, leakage, worst-case loss.
    Bound(BoundArgs),
    /// Benchmark sealed recovery against cold restart.
    Bench(BenchArgs),
}

#[derive(Args)]
pub struct RunArgs {
    /// Session length, e.g. 4h, 90m, 0s.
    #[arg(long, value_parser = parse::duration_s)]
    pub duration: f64,

    /// Checkpoint interval override, e.g. 30s.
    #[arg(long, value_parser = parse::duration_s)]
    pub interval: Option<f64>,

    /// Session profile: standard, desk, or test; defaults to the config
    /// file's session section. The standard profile carries full-cost
    /// sequential work, so simulated hours cost real compute.
    #[arg(long)]
    pub scale: Option<String>,

    /// Seed for typing, fault draws, and identity material.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Chain file destination; a session split by seal destruction writes
    /// later segments to <OUT>.seg1, <OUT>.seg2, and so on.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,

    /// Fault log destination; defaults to <OUT>.log.
    #[arg(long, value_name = "PATH")]
    pub fault_log: Option<PathBuf>,
}

#[derive(Args)]
pub struct VerifyArgs {
    /// Chain file to verify.
    pub chain: PathBuf,

    /// Verification depth for the sequential-work records.
    #[arg(long, value_enum, default_value_t = VerifyMode::Full)]
    pub mode: VerifyMode,

    /// Sampled mode: target number of checkpoints to re-derive.
    #[arg(long)]
    pub k: Option<u32>,

    /// Sampled mode: fraction of checkpoints to re-derive.
    #[arg(long)]
    pub sample_fraction: Option<f64>,

    /// Seed for the pseudorandom checkpoint sample.
    #[arg(long, default_value_t = 0)]
    pub sampling_seed: u64,

    /// Expected verifier nonce, hex; defaults to the header's quoted one.
    #[arg(long, value_name = "HEX")]
    pub nonce: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum VerifyMode {
    Full,
    Sampled,
}

#[derive(Args)]
pub struct EcaArgs {
    /// Rate preset: desktop, server, or iot.
    #[arg(long)]
    pub preset: Option<String>,

    /// Crash rate per hour, scientific notation accepted.
    #[arg(long)]
    pub lambda_c: Option<f64>,

    /// Partition rate per hour.
    #[arg(long)]
    pub lambda_p: Option<f64>,

    /// Sealed recovery rate per hour.
    #[arg(long)]
    pub mu_r: Option<f64>,

    /// Cold restart rate per hour.
    #[arg(long)]
    pub mu_f: Option<f64>,

    /// Partition healing rate per hour.
    #[arg(long)]
    pub mu_p: Option<f64>,

    /// Probability a recovery falls back to cold restart.
    #[arg(long)]
    pub p_f: Option<f64>,

    /// Monte Carlo horizon per trial, e.g. 10000h.
    #[arg(long, value_parser = parse::duration_hours, default_value = "10000h")]
    pub horizon: f64,

    /// Monte Carlo trials; 0 skips the simulation.
    #[arg(long, default_value_t = 200)]
    pub trials: u64,

    /// Monte Carlo seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args)]
pub struct SweepArgs {
    /// Rate preset for the fixed rates: desktop, server, or iot.
    #[arg(long)]
    pub preset: Option<String>,

    /// Crash-rate range, log-spaced: lo..hi (e.g. 1e-5..1e-1) or one rate.
    #[arg(long, value_parser = parse::rate_range)]
    pub lambda_c: RateRange,

    /// Grid points across the range.
    #[arg(long, default_value_t = 13)]
    pub points: u32,

    /// Monte Carlo horizon per trial, e.g. 10000h.
    #[arg(long, value_parser = parse::duration_hours, default_value = "10000h")]
    pub horizon: f64,

    /// Monte Carlo trials per grid point.
    #[arg(long, default_value_t = 100)]
    pub trials: u64,

    /// Monte Carlo seed, shared across grid points.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Write the CSV here instead of stdout.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct BoundArgs {
    /// Side-channel evasion probability (composition bound).
    #[arg(long)]
    pub eps_sc: Option<f64>,

    /// Cryptographic forgery probability (composition bound).
    #[arg(long)]
    pub eps_negl: Option<f64>,

    /// Behavioral mimicry probability (composition bound).
    #[arg(long)]
    pub p_beh: Option<f64>,

    /// Temporal consistency evasion probability (composition bound).
    #[arg(long)]
    pub p_temp: Option<f64>,

    /// Content plausibility evasion probability (composition bound).
    #[arg(long)]
    pub p_content: Option<f64>,

    /// Hidden entropy bits per checkpoint (leakage bound).
    #[arg(long)]
    pub hidden_bits: Option<u32>,

    /// Adversarial crash count (worst-case availability floor).
    #[arg(long)]
    pub crashes: Option<u64>,

    /// Checkpoint interval, e.g. 30s (worst-case availability floor).
    #[arg(long, value_parser = parse::duration_s)]
    pub interval: Option<f64>,

    /// Evaluation horizon, e.g. 4h (worst-case availability floor).
    #[arg(long, value_parser = parse::duration_s)]
    pub horizon: Option<f64>,
}

#[derive(Args)]
pub struct BenchArgs {
    /// Session profile: standard, desk, or test; defaults to the config
    /// file's session section.
    #[arg(long)]
    pub scale: Option<String>,

    /// Repetitions per recovery path.
    #[arg(long, default_value_t = 25)]
    pub reps: u32,
}

/// Formats each subcommand can emit; the first entry is its default.
fn allowed_formats(command: &Command) -> &'static [Format] {
    match command {
        Command::Sweep(_) => &[Format::Csv],
        _ => &[Format::Human, Format::Json],
    }
}

fn format_name(f: Format) -> &'static str {
    match f {
        Format::Human => "human",
        Format::Json => "json",
        Format::Csv => "csv",
    }
}

fn effective_format(cli: &Cli) -> Result<Format, CmdError> {
    let allowed = allowed_formats(&cli.command);
    match cli.format {
        None => Ok(allowed[0]),
        Some(f) if allowed.contains(&f) => Ok(f),
        Some(f) => {
            let names: Vec<&str> = allowed.iter().map(|&a| format_name(a)).collect();
            Err(usage(format!(
                "--format {}: this subcommand emits {}",
                format_name(f),
                names.join(" or ")
            )))
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, CmdError> {
    let format = effective_format(&cli)?;
    let config = commands::load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Run(args) => commands::run(&args, format, &config),
        Command::Verify(args) => commands::verify(&args, format, &config),
        Command::Eca(args) => commands::eca(&args, format, &config),
        Command::Sweep(args) => commands::sweep(&args, &config),
        Command::Bound(args) => commands::bound(&args, format),
        Command::Bench(args) => commands::bench(&args, format, &config),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
