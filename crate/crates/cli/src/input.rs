use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use sufficiency_core::model::DiscountFactor;
use sufficiency_core::rational::{parse_q, parse_q_list, Q};

use crate::error::{CliError, Diagnostic, Result};

/// Where an input came from and the SHA-256 of its bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

pub struct Loaded<T> {
    pub value: T,
    pub digest: InputDigest,
    pub path: PathBuf,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Read and parse a JSON input. Syntax and type errors carry line and column.
pub fn load<T: DeserializeOwned>(role: &str, path: &Path) -> Result<Loaded<T>> {
    let bytes = std::fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let value = serde_json::from_slice(&bytes).map_err(|e| {
        let full = e.to_string();
        let suffix = format!(" at line {} column {}", e.line(), e.column());
        CliError::Syntax {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: full.strip_suffix(&suffix).unwrap_or(&full).to_string(),
        }
    })?;
    Ok(Loaded {
        value,
        digest: InputDigest {
            role: role.to_string(),
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        },
        path: path.to_path_buf(),
    })
}

/// Load, then convert into the data model.
pub fn load_with<T: DeserializeOwned, U>(
    role: &str,
    path: &Path,
    convert: impl FnOnce(&T) -> std::result::Result<U, Vec<Diagnostic>>,
) -> Result<(U, InputDigest)> {
    let loaded = load::<T>(role, path)?;
    let value = convert(&loaded.value).map_err(|diagnostics| CliError::Invalid {
        path: loaded.path.clone(),
        diagnostics,
    })?;
    Ok((value, loaded.digest))
}

/// A discount-factor specification as written on the command line.
#[derive(Debug, Clone, PartialEq)]
pub enum DeltaSpec {
    /// Comma-separated weights, e.g. `1/2,1/2`.
    Explicit(Vec<Q>),
    /// `geometric r T`: weights proportional to `r^t`, normalised.
    Geometric(Q, usize),
    /// `uniform T`.
    Uniform(usize),
    /// `degenerate t`: all weight on period `t` of the inputs' horizon.
    Degenerate(usize),
}

impl std::str::FromStr for DeltaSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let words: Vec<&str> = s.split_whitespace().collect();
        let count = |w: &str| -> std::result::Result<usize, String> {
            w.parse().map_err(|_| format!("expected a positive integer, found {w:?}"))
        };
        let err = |e: sufficiency_core::error::Error| e.to_string();
        match words.as_slice() {
            ["geometric", r, t] => Ok(Self::Geometric(parse_q(r).map_err(err)?, count(t)?)),
            ["uniform", t] => Ok(Self::Uniform(count(t)?)),
            ["degenerate", t] => Ok(Self::Degenerate(count(t)?)),
            [word, ..] if ["geometric", "uniform", "degenerate"].contains(word) => Err(format!(
                "malformed discount spec {s:?}; use \"geometric r T\", \"uniform T\" or \"degenerate t\""
            )),
            _ => Ok(Self::Explicit(parse_q_list(s).map_err(err)?)),
        }
    }
}

impl DeltaSpec {
    /// Resolve against the horizon of the inputs.
    pub fn resolve(&self, horizon: usize) -> Result<DiscountFactor> {
        let d = match self {
            Self::Explicit(w) => DiscountFactor::new(w.clone())?,
            Self::Geometric(r, t) => DiscountFactor::geometric(r, *t)?,
            Self::Uniform(t) => DiscountFactor::uniform(*t)?,
            Self::Degenerate(t) => DiscountFactor::degenerate(horizon, *t)?,
        };
        if d.horizon() != horizon {
            return Err(CliError::Usage(format!(
                "discount factor covers {} periods but the inputs have horizon {horizon}",
                d.horizon()
            )));
        }
        Ok(d)
    }
}

/// Parse a comma-separated prior.
pub fn parse_prior(s: &str) -> std::result::Result<Vec<Q>, String> {
    parse_q_list(s).map_err(|e| e.to_string())
}
