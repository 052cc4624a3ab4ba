//! Memory-hard key derivation (Argon2id).
//!
//! One derivation call is the expensive, sequential seed step of the
//! sequential work function; parallelism is pinned to 1 because lane-level
//! parallelism would weaken the elapsed-time argument.

use argon2::{Algorithm, Argon2, Params, Version};
use serde::{Deserialize, Serialize};

use super::CryptoError;

pub const MHD_OUTPUT_LEN: usize = 32;
pub const MIN_MEMORY_COST_BYTES: u64 = 8 * 1024;

/// Argon2id cost parameters. `memory_cost_bytes` is rounded down to whole
/// KiB blocks when invoking the KDF.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryHardParams {
    pub memory_cost_bytes: u64,
    pub time_cost: u32,
    /// Lanes. Fixed at 1: sequentiality requirement.
    pub parallelism: u32,
    pub output_len: u32,
}

impl Default for MemoryHardParams {
    fn default() -> Self {
        MemoryHardParams {
            memory_cost_bytes: 64 * 1024 * 1024,
            time_cost: 1,
            parallelism: 1,
            output_len: MHD_OUTPUT_LEN as u32,
        }
    }
}

impl MemoryHardParams {
    /// Small parameters for fast tests and desk-scale simulation runs.
    pub fn test_scale() -> Self {
        MemoryHardParams { memory_cost_bytes: 64 * 1024, ..Default::default() }
    }

    pub fn with_memory_cost_bytes(bytes: u64) -> Self {
        MemoryHardParams { memory_cost_bytes: bytes, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), CryptoError> {
        if self.memory_cost_bytes < MIN_MEMORY_COST_BYTES {
            return Err(CryptoError::InvalidParams("memory_cost below 8 KiB"));
        }
        if self.parallelism != 1 {
            return Err(CryptoError::InvalidParams("parallelism must be 1"));
        }
        if self.time_cost == 0 {
            return Err(CryptoError::InvalidParams("time_cost must be >= 1"));
        }
        if self.output_len as usize != MHD_OUTPUT_LEN {
            return Err(CryptoError::InvalidParams("output_len must be 32"));
        }
        Ok(())
    }

    pub(crate) fn memory_cost_kib(&self) -> u32 {
        (self.memory_cost_bytes / 1024).min(u32::MAX as u64) as u32
    }
}

/// Argon2id over (input, salt) with the given cost parameters.
///
/// Deterministic. Salt must be at least 8 bytes (all internal callers pass
/// 32-byte digests).
pub fn memory_hard_derive(
    params: &MemoryHardParams,
    input: &[u8],
    salt: &[u8],
) -> Result<[u8; MHD_OUTPUT_LEN], CryptoError> {
    params.validate()?;
    if salt.len() < 8 {
        return Err(CryptoError::InvalidParams("salt shorter than 8 bytes"));
    }
    let a2_params = Params::new(
        params.memory_cost_kib(),
        params.time_cost,
        params.parallelism,
        Some(MHD_OUTPUT_LEN),
    )
    .map_err(map_argon2_err)?;
    let kdf = Argon2::new(Algorithm::Argon2id, Version::V0x13, a2_params);
    let mut out = [0u8; MHD_OUTPUT_LEN];
    kdf.hash_password_into(input, salt, &mut out).map_err(map_argon2_err)?;
    Ok(out)
}

fn map_argon2_err(e: argon2::Error) -> CryptoError {
    match e {
        argon2::Error::MemoryTooLittle | argon2::Error::MemoryTooMuch => {
            CryptoError::InsufficientMemory
        }
        _ => CryptoError::InvalidParams("argon2 rejected parameters"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::time::Instant;

    #[test]
    fn derivation_is_deterministic() {
        let p = MemoryHardParams::test_scale();
        let a = memory_hard_derive(&p, b"input", b"salt-salt").unwrap();
        let b = memory_hard_derive(&p, b"input", b"salt-salt").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn salt_diffusion() {
        let p = MemoryHardParams::test_scale();
        let a = memory_hard_derive(&p, b"input", b"salt-sal0").unwrap();
        let b = memory_hard_derive(&p, b"input", b"salt-sal1").unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn invalid_params_are_rejected() {
        let mut p = MemoryHardParams::test_scale();
        p.parallelism = 2;
        assert!(memory_hard_derive(&p, b"i", b"salt-salt").is_err());

        let mut p = MemoryHardParams::test_scale();
        p.memory_cost_bytes = 4 * 1024;
        assert!(memory_hard_derive(&p, b"i", b"salt-salt").is_err());

        let p = MemoryHardParams::test_scale();
        assert!(memory_hard_derive(&p, b"i", b"short").is_err());
    }

    // RFC 9106 section 5.3 Argon2id test vector: t=3, m=32 KiB, p=4, with
    // keyed secret and associated data. Exercised through the raw argon2
    // crate because the public wrapper pins parallelism to 1; this pins the
    // backing implementation to the published standard.
    #[test]
    fn argon2id_rfc9106_vector() {
        let params = argon2::ParamsBuilder::new()
            .m_cost(32)
            .t_cost(3)
            .p_cost(4)
            .output_len(32)
            .data(argon2::AssociatedData::new(&[0x04u8; 12]).unwrap())
            .build()
            .unwrap();
        let kdf = Argon2::new_with_secret(
            &[0x03u8; 8],
            Algorithm::Argon2id,
            Version::V0x13,
            params,
        )
        .unwrap();
        let mut out = [0u8; 32];
        kdf.hash_password_into(&[0x01u8; 32], &[0x02u8; 16], &mut out).unwrap();
        assert_eq!(
            hex::encode(out),
            "0d640df58d78766c08c037a34a8b53c9d01ef0452d75b65eb52520e96b01e659"
        );
    }

    // Sequential-hardness smoke check: 64 MiB strictly slower than 1 MiB.
    #[test]
    fn higher_memory_cost_takes_longer() {
        let small = MemoryHardParams::with_memory_cost_bytes(1024 * 1024);
        let large = MemoryHardParams::with_memory_cost_bytes(64 * 1024 * 1024);

        // Warm up allocator paths before timing.
        memory_hard_derive(&small, b"w", b"warm-salt").unwrap();

        let t0 = Instant::now();
        memory_hard_derive(&small, b"x", b"time-salt").unwrap();
        let small_elapsed = t0.elapsed();

        let t1 = Instant::now();
        memory_hard_derive(&large, b"x", b"time-salt").unwrap();
        let large_elapsed = t1.elapsed();

        assert!(
            large_elapsed > small_elapsed,
            "64 MiB ({large_elapsed:?}) should exceed 1 MiB ({small_elapsed:?})"
        );
    }
}
