//! Monte Carlo availability estimation for the dependability chain.
//!
//! Each trial walks the embedded jump chain with exponential holding
//! times. Every transition consumes exactly two uniforms (holding time,
//! branch choice) so sealed and cold comparisons under the same seed are
//! coupled by common random numbers. Trial t uses the deterministic
//! stream seeded with rng_seed + t; results are bit-identical per seed.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use crate::dependability::{
    generator_matrix, generator_matrix_cold, CtmcError, CtmcParams, Matrix4, STATE_AVAILABLE,
    STATE_DEGRADED, STATE_FAILED, STATE_RECOVERING,
};

#[derive(Clone, Debug, Serialize)]
pub struct McConfig {
    pub params: CtmcParams,
    pub horizon_hours: f64,
    pub trials: u64,
    pub rng_seed: u64,
}

impl McConfig {
    pub fn new(params: CtmcParams) -> McConfig {
        McConfig { params, horizon_hours: 10_000.0, trials: 1_000, rng_seed: 1 }
    }

    pub fn validate(&self) -> Result<(), CtmcError> {
        self.params.validate()?;
        if !(self.horizon_hours.is_finite() && self.horizon_hours > 0.0) {
            return Err(CtmcError::InvalidParams("horizon must be positive"));
        }
        if self.trials == 0 {
            return Err(CtmcError::InvalidParams("at least one trial required"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct McResult {
    pub eca_estimate: f64,
    pub confidence_interval_95: (f64, f64),
    pub std_error: f64,
    pub dwell_available: f64,
    pub dwell_degraded: f64,
    pub dwell_recovering: f64,
    pub dwell_failed: f64,
    /// Entries into an evidence-gap state, summed over all trials.
    pub gap_count: u64,
    pub trials: u64,
}

/// Estimate availability of the sealed-recovery system.
pub fn mc_simulate(config: &McConfig) -> Result<McResult, CtmcError> {
    config.validate()?;
    Ok(run_generator(&generator_matrix(&config.params), config))
}

/// Estimate availability of the cold-restart comparator.
pub fn mc_simulate_cold(config: &McConfig) -> Result<McResult, CtmcError> {
    config.validate()?;
    Ok(run_generator(&generator_matrix_cold(&config.params), config))
}

fn run_generator(q: &Matrix4, config: &McConfig) -> McResult {
    let horizon = config.horizon_hours;
    let mut ecas = Vec::with_capacity(config.trials as usize);
    let mut dwell_total = [0.0f64; 4];
    let mut gap_count = 0u64;
    for trial in 0..config.trials {
        let mut rng = ChaCha12Rng::seed_from_u64(config.rng_seed.wrapping_add(trial));
        let (dwell, gaps) = simulate_path(q, horizon, &mut rng);
        ecas.push((dwell[STATE_AVAILABLE] + dwell[STATE_DEGRADED]) / horizon);
        for i in 0..4 {
            dwell_total[i] += dwell[i];
        }
        gap_count += gaps;
    }

    let n = config.trials as f64;
    let mean = ecas.iter().sum::<f64>() / n;
    let var = if config.trials > 1 {
        ecas.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let se = (var / n).sqrt();
    let span = horizon * n;
    McResult {
        eca_estimate: mean,
        confidence_interval_95: (mean - 1.96 * se, mean + 1.96 * se),
        std_error: se,
        dwell_available: dwell_total[STATE_AVAILABLE] / span,
        dwell_degraded: dwell_total[STATE_DEGRADED] / span,
        dwell_recovering: dwell_total[STATE_RECOVERING] / span,
        dwell_failed: dwell_total[STATE_FAILED] / span,
        gap_count,
        trials: config.trials,
    }
}

/// One trajectory from the Available state; returns per-state dwell time
/// and the number of entries into Recovering or Failed.
fn simulate_path(q: &Matrix4, horizon: f64, rng: &mut ChaCha12Rng) -> ([f64; 4], u64) {
    let mut dwell = [0.0f64; 4];
    let mut state = STATE_AVAILABLE;
    let mut t = 0.0f64;
    let mut gaps = 0u64;
    while t < horizon {
        let exit = -q[state][state];
        let u_hold: f64 = rng.random();
        let u_branch: f64 = rng.random();
        let hold = -(1.0 - u_hold).ln() / exit;
        if t + hold >= horizon {
            dwell[state] += horizon - t;
            break;
        }
        dwell[state] += hold;
        t += hold;

        let target = u_branch * exit;
        let mut acc = 0.0;
        let mut next = usize::MAX;
        for j in 0..4 {
            if j == state || q[state][j] <= 0.0 {
                continue;
            }
            acc += q[state][j];
            if target < acc {
                next = j;
                break;
            }
        }
        if next == usize::MAX {
            // Rounding pushed the target past the last bucket.
            next = (0..4).rev().find(|&j| j != state && q[state][j] > 0.0).expect("exit exists");
        }
        let producing = state == STATE_AVAILABLE || state == STATE_DEGRADED;
        if producing && (next == STATE_RECOVERING || next == STATE_FAILED) {
            gaps += 1;
        }
        state = next;
    }
    (dwell, gaps)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SweepRow {
    pub lambda_c: f64,
    pub eca_sealed: f64,
    pub eca_cold: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// Sweep crash rate with sealed and cold runs coupled per grid point.
/// The confidence interval covers the sealed estimate.
pub fn mc_sweep(
    base: &CtmcParams,
    lambda_grid: &[f64],
    horizon_hours: f64,
    trials: u64,
    rng_seed: u64,
) -> Result<Vec<SweepRow>, CtmcError> {
    let mut rows = Vec::with_capacity(lambda_grid.len());
    for &lambda_c in lambda_grid {
        let config = McConfig {
            params: CtmcParams { lambda_c, ..*base },
            horizon_hours,
            trials,
            rng_seed,
        };
        let sealed = mc_simulate(&config)?;
        let cold = mc_simulate_cold(&config)?;
        rows.push(SweepRow {
            lambda_c,
            eca_sealed: sealed.eca_estimate,
            eca_cold: cold.eca_estimate,
            ci_lo: sealed.confidence_interval_95.0,
            ci_hi: sealed.confidence_interval_95.1,
        });
    }
    Ok(rows)
}

pub const SWEEP_CSV_HEADER: &str = "lambda_c,eca_sealed,eca_cold,ci_lo,ci_hi";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.lambda_c, row.eca_sealed, row.eca_cold, row.ci_lo, row.ci_hi
        ));
    }
    out
}
