//! Versioned oracle configuration files.

use std::path::Path;

use mixbo_core::oracles::OracleSpec;
use sha2::{Digest, Sha256};

use crate::error::{AppError, Result};

/// The toxicity oracle shipped with the crate.
pub const TOXICITY_CPA_V1: &str = include_str!("../configs/toxicity-cpa-v1.json");

/// A parsed oracle together with the SHA-256 of the bytes it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedOracle {
    pub spec: OracleSpec,
    pub sha256: String,
}

pub fn parse_oracle(bytes: &[u8]) -> Result<LoadedOracle> {
    let spec: OracleSpec = serde_json::from_slice(bytes)
        .map_err(|e| AppError::Validation(format!("oracle config: {e}")))?;
    spec.validate()?;
    let digest = Sha256::digest(bytes);
    let sha256 = digest.iter().map(|b| format!("{b:02x}")).collect();
    Ok(LoadedOracle { spec, sha256 })
}

pub fn shipped_toxicity() -> LoadedOracle {
    parse_oracle(TOXICITY_CPA_V1.as_bytes()).expect("shipped oracle config is valid")
}

/// Loads `path`, or the shipped toxicity oracle when absent.
pub fn load_oracle(path: Option<&Path>) -> Result<LoadedOracle> {
    match path {
        None => Ok(shipped_toxicity()),
        Some(p) => parse_oracle(&std::fs::read(p).map_err(|e| AppError::io(p, e))?),
    }
}
