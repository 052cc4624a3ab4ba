//! Analytical dependability model: a four-state continuous-time Markov
//! chain over Available, Degraded (partitioned, still collecting),
//! Recovering (sealed-state recovery), and Failed (cold restart).
//!
//! Evidence-chain availability (ECA) is the steady-state probability of
//! being in an evidence-producing state, pi_A + pi_D. The closed form and
//! the numeric linear solve are independent implementations kept in
//! agreement by tests.
//!
//! All rates are per hour; convert at the boundary.

use serde::{Deserialize, Serialize};

pub type Matrix4 = [[f64; 4]; 4];

/// State indices in the generator matrix.
pub const STATE_AVAILABLE: usize = 0;
pub const STATE_DEGRADED: usize = 1;
pub const STATE_RECOVERING: usize = 2;
pub const STATE_FAILED: usize = 3;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CtmcError {
    #[error("invalid rates: {0}")]
    InvalidParams(&'static str),
    #[error("balance equations are singular")]
    SingularSystem,
}

/// Failure and repair rates, per hour.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CtmcParams {
    /// Crash rate.
    pub lambda_c: f64,
    /// Partition rate.
    pub lambda_p: f64,
    /// Sealed recovery rate.
    pub mu_r: f64,
    /// Cold restart rate.
    pub mu_f: f64,
    /// Partition repair rate.
    pub mu_p: f64,
    /// Probability a recovery finds the seal corrupted and falls back to
    /// cold restart.
    pub p_f: f64,
}

impl CtmcParams {
    /// Desktop deployment parameters.
    pub fn desktop() -> CtmcParams {
        CtmcParams {
            lambda_c: 1e-3,
            lambda_p: 1e-2,
            mu_r: 3600.0,
            mu_f: 360.0,
            mu_p: 6.0,
            p_f: 0.01,
        }
    }

    /// Server deployment: rare crashes.
    pub fn server() -> CtmcParams {
        CtmcParams { lambda_c: 1e-4, ..CtmcParams::desktop() }
    }

    /// Constrained IoT deployment: frequent crashes.
    pub fn iot() -> CtmcParams {
        CtmcParams { lambda_c: 1e-1, ..CtmcParams::desktop() }
    }

    pub fn preset(name: &str) -> Option<CtmcParams> {
        match name {
            "desktop" => Some(CtmcParams::desktop()),
            "server" => Some(CtmcParams::server()),
            "iot" => Some(CtmcParams::iot()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), CtmcError> {
        let rates = [self.lambda_c, self.lambda_p, self.mu_r, self.mu_f, self.mu_p];
        if rates.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(CtmcError::InvalidParams("all rates must be positive and finite"));
        }
        if !(0.0..=1.0).contains(&self.p_f) {
            return Err(CtmcError::InvalidParams("seal-corruption probability must be in [0, 1]"));
        }
        Ok(())
    }
}

/// How the Recovering state's exits are parameterized.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RExitModel {
    /// Exit rate mu_r with branch probabilities (1-p_f, p_f): mean
    /// recovery time stays 1/mu_r regardless of p_f. Default.
    Branching,
    /// Independent rates mu_r to Available and p_f*mu_r to Failed, total
    /// exit (1+p_f)*mu_r. Kept for comparison.
    Literal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CtmcSolution {
    pub pi_a: f64,
    pub pi_d: f64,
    pub pi_r: f64,
    pub pi_f: f64,
    pub eca: f64,
}

/// Generator for the sealed-recovery system (branching R exits).
pub fn generator_matrix(params: &CtmcParams) -> Matrix4 {
    generator_matrix_with(params, RExitModel::Branching)
}

pub fn generator_matrix_with(params: &CtmcParams, model: RExitModel) -> Matrix4 {
    let CtmcParams { lambda_c, lambda_p, mu_r, mu_f, mu_p, p_f } = *params;
    let (r_to_a, r_to_f) = match model {
        RExitModel::Branching => ((1.0 - p_f) * mu_r, p_f * mu_r),
        RExitModel::Literal => (mu_r, p_f * mu_r),
    };
    let mut q = [
        [0.0, lambda_p, lambda_c, 0.0],
        [mu_p, 0.0, 0.0, lambda_c],
        [r_to_a, 0.0, 0.0, r_to_f],
        [mu_f, 0.0, 0.0, 0.0],
    ];
    for (i, row) in q.iter_mut().enumerate() {
        row[i] = -(row.iter().sum::<f64>());
    }
    q
}

/// Comparator without sealed recovery: every crash routes straight to the
/// cold-restart state.
pub fn generator_matrix_cold(params: &CtmcParams) -> Matrix4 {
    let CtmcParams { lambda_c, lambda_p, mu_r, mu_f, mu_p, .. } = *params;
    let mut q = [
        [0.0, lambda_p, 0.0, lambda_c],
        [mu_p, 0.0, 0.0, lambda_c],
        [mu_r, 0.0, 0.0, 0.0],
        [mu_f, 0.0, 0.0, 0.0],
    ];
    for (i, row) in q.iter_mut().enumerate() {
        row[i] = -(row.iter().sum::<f64>());
    }
    q
}

/// Steady state of the sealed-recovery chain.
pub fn steady_state(params: &CtmcParams) -> Result<CtmcSolution, CtmcError> {
    params.validate()?;
    solve_stationary(&generator_matrix(params))
}

pub fn steady_state_with(params: &CtmcParams, model: RExitModel) -> Result<CtmcSolution, CtmcError> {
    params.validate()?;
    solve_stationary(&generator_matrix_with(params, model))
}

/// Steady state of the cold-restart comparator.
pub fn steady_state_cold(params: &CtmcParams) -> Result<CtmcSolution, CtmcError> {
    params.validate()?;
    solve_stationary(&generator_matrix_cold(params))
}

/// Solve pi Q = 0 with sum(pi) = 1 by state elimination (GTH): fold each
/// high state's rates into the lower block, then accumulate visit weights
/// back up. Only nonnegative rates are added, never subtracted, so the
/// result stays accurate when rates span many orders of magnitude.
pub fn solve_stationary(q: &Matrix4) -> Result<CtmcSolution, CtmcError> {
    let mut a = *q;
    for k in (1..4).rev() {
        // Outflow of state k toward lower states; zero would mean the
        // lower block is unreachable from k.
        let s: f64 = a[k][..k].iter().sum();
        if !(s > 0.0) || !s.is_finite() {
            return Err(CtmcError::SingularSystem);
        }
        for i in 0..k {
            a[i][k] /= s;
        }
        for i in 0..k {
            let w = a[i][k];
            if w == 0.0 {
                continue;
            }
            for j in 0..k {
                if j != i {
                    a[i][j] += w * a[k][j];
                }
            }
        }
    }

    // Expected visit weights relative to state 0, then normalize.
    let mut pi = [0.0f64; 4];
    pi[0] = 1.0;
    for k in 1..4 {
        pi[k] = (0..k).map(|i| pi[i] * a[i][k]).sum();
    }
    let total: f64 = pi.iter().sum();
    if !total.is_finite() {
        return Err(CtmcError::SingularSystem);
    }
    for p in &mut pi {
        *p /= total;
    }
    Ok(CtmcSolution {
        pi_a: pi[STATE_AVAILABLE],
        pi_d: pi[STATE_DEGRADED],
        pi_r: pi[STATE_RECOVERING],
        pi_f: pi[STATE_FAILED],
        eca: pi[STATE_AVAILABLE] + pi[STATE_DEGRADED],
    })
}

/// Closed-form ECA, exact for p_f = 0 (p_f is ignored).
pub fn eca_closed_form(params: &CtmcParams) -> f64 {
    let CtmcParams { lambda_c, lambda_p, mu_r, mu_f, mu_p, .. } = *params;
    let lead = mu_r * mu_f * (mu_p + lambda_p + lambda_c);
    lead / (lead + lambda_c * mu_f * (mu_p + lambda_c) + lambda_c * lambda_p * mu_r)
}

/// First-order approximation valid when lambda_c is far below mu_p.
pub fn eca_approximation(params: &CtmcParams) -> f64 {
    params.mu_r / (params.mu_r + params.lambda_c)
}

/// Mean time between evidence gaps, in hours.
pub fn mtbeg(params: &CtmcParams, eca: f64) -> f64 {
    1.0 / (params.lambda_c * eca)
}

/// Availability floor under adversarial crash scheduling: n crashes each
/// costing up to one checkpoint interval of evidence.
pub fn worst_case_eca(n_crashes: u64, delta_s: f64, horizon_s: f64) -> f64 {
    assert!(delta_s > 0.0 && horizon_s > 0.0, "interval and horizon must be positive");
    let lost = n_crashes as f64 * delta_s;
    assert!(lost <= horizon_s, "crash schedule exceeds horizon");
    1.0 - lost / horizon_s
}

/// Side-channel advantage bound for b hidden entropy bits per checkpoint.
pub fn leakage_bound(hidden_bits: u32) -> f64 {
    0.5f64.powi(hidden_bits as i32)
}

/// Per-domain evasion probabilities for the adversary composition bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositionInputs {
    pub eps_sc: f64,
    pub eps_negl: f64,
    pub p_beh: f64,
    pub p_temp: f64,
    pub p_content: f64,
}

impl CompositionInputs {
    pub fn validate(&self) -> Result<(), CtmcError> {
        let all = [self.eps_sc, self.eps_negl, self.p_beh, self.p_temp, self.p_content];
        if all.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(CtmcError::InvalidParams("composition inputs must be in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CompositionMode {
    /// Independent domains: the adversary must evade all three at once.
    Multiplicative,
    /// Correlated worst case: a union bound over the domains.
    Additive,
}

pub fn composition_bound(inputs: &CompositionInputs, mode: CompositionMode) -> f64 {
    debug_assert!(inputs.validate().is_ok());
    match mode {
        CompositionMode::Multiplicative => {
            inputs.eps_negl * inputs.p_beh * inputs.p_temp * inputs.p_content
        }
        CompositionMode::Additive => {
            (inputs.eps_sc + inputs.p_beh + inputs.p_temp + inputs.p_content + inputs.eps_negl)
                .min(1.0)
        }
    }
}
