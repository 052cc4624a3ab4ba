//! TOML configuration: platform root material, session parameters, typing
//! models, fault profiles, and availability-model rates. Every section is
//! optional; absent sections fall back to library defaults. Unknown keys
//! are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chain::SessionConfig;
use crate::crypto::{MemoryHardParams, PlatformRoot};
use crate::dependability::CtmcParams;
use crate::simulator::{FaultEvent, FaultProfile, TypingModel};
use crate::swf::SwfParams;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolConfig {
    pub platform: Option<PlatformSection>,
    pub session: Option<SessionSection>,
    pub typing: Option<TypingSection>,
    pub faults: Option<FaultSection>,
    pub ctmc: Option<CtmcSection>,
}

impl ToolConfig {
    pub fn load(path: &Path) -> Result<ToolConfig, ConfigError> {
        ToolConfig::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<ToolConfig, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn platform_root(&self) -> Result<PlatformRoot, ConfigError> {
        match &self.platform {
            Some(p) => p.to_platform(),
            None => Ok(PlatformSection::default_platform()),
        }
    }

    pub fn session_config(&self) -> Result<SessionConfig, ConfigError> {
        match &self.session {
            Some(s) => s.to_session_config(),
            None => Ok(SessionConfig::default()),
        }
    }

    /// Typing model for a run of `duration_s` seconds; the duration flag
    /// overrides any configured duration.
    pub fn typing_model(&self, duration_s: f64) -> Result<TypingModel, ConfigError> {
        let mut model = match &self.typing {
            Some(t) => t.to_model(),
            None => TypingModel::new(duration_s),
        };
        model.session_duration_s = duration_s;
        Ok(model)
    }

    pub fn fault_profile(&self) -> Result<FaultProfile, ConfigError> {
        match &self.faults {
            Some(f) => f.to_profile(),
            None => Ok(FaultProfile::none()),
        }
    }

    pub fn ctmc_params(&self) -> Result<CtmcParams, ConfigError> {
        match &self.ctmc {
            Some(c) => c.to_params(),
            None => Ok(CtmcParams::desktop()),
        }
    }
}

/// Root-of-trust key material, hex-encoded 32-byte values.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlatformSection {
    pub secret_hex: String,
    pub root_seed_hex: Option<String>,
}

impl PlatformSection {
    /// Fixed development root used when no platform section is given.
    pub fn default_platform() -> PlatformRoot {
        PlatformRoot::new(*b"development-platform-root-secret", None)
    }

    pub fn to_platform(&self) -> Result<PlatformRoot, ConfigError> {
        let secret = decode_key32(&self.secret_hex, "platform.secret_hex")?;
        let root_seed = self
            .root_seed_hex
            .as_ref()
            .map(|h| decode_key32(h, "platform.root_seed_hex"))
            .transpose()?;
        Ok(PlatformRoot::new(secret, root_seed))
    }
}

fn decode_key32(hex_str: &str, field: &str) -> Result<[u8; 32], ConfigError> {
    let bytes = hex::decode(hex_str).map_err(|e| invalid(format!("{field}: {e}")))?;
    bytes
        .as_slice()
        .try_into()
        .map_err(|_| invalid(format!("{field}: need exactly 32 bytes, got {}", bytes.len())))
}

/// Session parameters. `scale` picks a base profile ("standard", "desk",
/// or "test"); explicit fields override it.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionSection {
    pub scale: Option<String>,
    pub checkpoint_interval_s: Option<f64>,
    pub entropy_threshold_bits: Option<f64>,
    pub assurance_tier: Option<u8>,
    pub quote_every_n: Option<u32>,
    pub retained_seals: Option<u32>,
    pub swf: Option<SwfSection>,
}

impl SessionSection {
    pub fn to_session_config(&self) -> Result<SessionConfig, ConfigError> {
        let mut config = match self.scale.as_deref() {
            None | Some("standard") => SessionConfig::default(),
            Some("desk") => SessionConfig::desk_scale(),
            Some("test") => SessionConfig::test_scale(),
            Some(other) => {
                return Err(invalid(format!(
                    "session.scale: unknown profile {other:?} (standard, desk, test)"
                )))
            }
        };
        if let Some(s) = self.checkpoint_interval_s {
            if !(s.is_finite() && s > 0.0) {
                return Err(invalid("session.checkpoint_interval_s must be positive"));
            }
            config.checkpoint_interval_us = (s * 1e6).round() as u64;
        }
        if let Some(bits) = self.entropy_threshold_bits {
            config.entropy_threshold_bits = bits;
        }
        if let Some(tier) = self.assurance_tier {
            config.assurance_tier = tier;
        }
        if let Some(n) = self.quote_every_n {
            config.quote_every_n = n;
        }
        if let Some(n) = self.retained_seals {
            config.retained_seals = n;
        }
        if let Some(swf) = &self.swf {
            config.swf = swf.apply_to(config.swf);
        }
        config.validate().map_err(|e| invalid(e.to_string()))?;
        Ok(config)
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwfSection {
    pub memory_cost_bytes: Option<u64>,
    pub time_cost: Option<u32>,
    pub chain_length: Option<u64>,
    pub merkle_stride: Option<u64>,
    pub sample_count: Option<u32>,
}

impl SwfSection {
    fn apply_to(&self, base: SwfParams) -> SwfParams {
        SwfParams {
            mh: MemoryHardParams {
                memory_cost_bytes: self.memory_cost_bytes.unwrap_or(base.mh.memory_cost_bytes),
                time_cost: self.time_cost.unwrap_or(base.mh.time_cost),
                ..base.mh
            },
            chain_length: self.chain_length.unwrap_or(base.chain_length),
            merkle_stride: self.merkle_stride.unwrap_or(base.merkle_stride),
            sample_count: self.sample_count.unwrap_or(base.sample_count),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypingSection {
    pub median_iki_ms: Option<f64>,
    pub sigma: Option<f64>,
}

impl TypingSection {
    fn to_model(&self) -> TypingModel {
        let base = TypingModel::new(0.0);
        TypingModel {
            median_iki_ms: self.median_iki_ms.unwrap_or(base.median_iki_ms),
            sigma: self.sigma.unwrap_or(base.sigma),
            session_duration_s: 0.0,
        }
    }
}

/// Fault schedule, discriminated by `mode`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum FaultSection {
    Scripted { events: Vec<FaultEvent> },
    Stochastic { rates: CtmcParams },
    Adversarial { n_crashes: u64 },
}

impl FaultSection {
    pub fn to_profile(&self) -> Result<FaultProfile, ConfigError> {
        Ok(match self {
            FaultSection::Scripted { events } => FaultProfile::Scripted(events.clone()),
            FaultSection::Stochastic { rates } => {
                rates.validate().map_err(|e| invalid(e.to_string()))?;
                FaultProfile::Stochastic(*rates)
            }
            FaultSection::Adversarial { n_crashes } => {
                FaultProfile::AdversarialWorstCase { n_crashes: *n_crashes }
            }
        })
    }
}

/// Availability-model rates: a named preset, explicit overrides, or both.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CtmcSection {
    pub preset: Option<String>,
    pub lambda_c: Option<f64>,
    pub lambda_p: Option<f64>,
    pub mu_r: Option<f64>,
    pub mu_f: Option<f64>,
    pub mu_p: Option<f64>,
    pub p_f: Option<f64>,
}

impl CtmcSection {
    pub fn to_params(&self) -> Result<CtmcParams, ConfigError> {
        let base = match self.preset.as_deref() {
            None => CtmcParams::desktop(),
            Some(name) => CtmcParams::preset(name)
                .ok_or_else(|| invalid(format!("ctmc.preset: unknown preset {name:?}")))?,
        };
        let params = CtmcParams {
            lambda_c: self.lambda_c.unwrap_or(base.lambda_c),
            lambda_p: self.lambda_p.unwrap_or(base.lambda_p),
            mu_r: self.mu_r.unwrap_or(base.mu_r),
            mu_f: self.mu_f.unwrap_or(base.mu_f),
            mu_p: self.mu_p.unwrap_or(base.mu_p),
            p_f: self.p_f.unwrap_or(base.p_f),
        };
        params.validate().map_err(|e| invalid(e.to_string()))?;
        Ok(params)
    }
}
