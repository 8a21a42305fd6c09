//! Sectioned key/value system files.
//!
//! ```text
//! [functions]
//! f_minus = "-x"
//! f_plus = "x*(1.9 - x)"
//! g = "x - lambda"
//!
//! [parameters]
//! eps = 0.1
//! lambda = 0.0
//!
//! [domain]
//! x_min = -10.0
//! x_max = 10.0
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::system::{SystemDefinition, SystemError, DEFAULT_X_WINDOW};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed system file: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("domain must satisfy x_min < 0 < x_max, got [{x_min}, {x_max}]")]
    Domain { x_min: f64, x_max: f64 },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    functions: RawFunctions,
    parameters: RawParameters,
    #[serde(default)]
    domain: RawDomain,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFunctions {
    f_minus: String,
    f_plus: String,
    g: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParameters {
    eps: f64,
    #[serde(default)]
    lambda: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    #[serde(default = "default_x_min")]
    x_min: f64,
    #[serde(default = "default_x_max")]
    x_max: f64,
}

impl Default for RawDomain {
    fn default() -> Self {
        Self {
            x_min: default_x_min(),
            x_max: default_x_max(),
        }
    }
}

fn default_x_min() -> f64 {
    DEFAULT_X_WINDOW.0
}

fn default_x_max() -> f64 {
    DEFAULT_X_WINDOW.1
}

pub fn parse_system(text: &str) -> Result<SystemDefinition, ConfigError> {
    let raw: RawConfig = toml::from_str(text)?;
    let RawDomain { x_min, x_max } = raw.domain;
    if !(x_min < 0.0 && 0.0 < x_max && x_min.is_finite() && x_max.is_finite()) {
        return Err(ConfigError::Domain { x_min, x_max });
    }
    let sys = SystemDefinition::new(
        &raw.functions.f_minus,
        &raw.functions.f_plus,
        &raw.functions.g,
        raw.parameters.eps,
        raw.parameters.lambda,
    )?;
    Ok(sys.with_window((x_min, x_max)))
}

pub fn load_system(path: &Path) -> Result<SystemDefinition, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_system(&text)
}
