//! Sectioned TOML configuration shared by the subcommands. Every key has a
//! default, printed by `hdts --print-defaults`; command-line flags override
//! the file.

use std::path::Path;

use hdts_core::longrun::EstimateKind;
use hdts_core::{Error, InnovationLaw, ProcessSpec, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CliConfig {
    pub seed: u64,
    pub model: ProcessSpec,
    pub simulate: SimulateSection,
    pub estimate: EstimateSection,
    pub ci: CiSection,
    pub covtest: CovtestSection,
    pub depmeasure: DepmeasureSection,
}

impl Default for CliConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            model: ProcessSpec::iid(3, InnovationLaw::StandardGaussian),
            simulate: SimulateSection::default(),
            estimate: EstimateSection::default(),
            ci: CiSection::default(),
            covtest: CovtestSection::default(),
            depmeasure: DepmeasureSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    pub n: usize,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self { n: 500 }
    }
}

/// A missing `M` means `floor(n^{1/3})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimateSection {
    #[serde(rename = "M", skip_serializing_if = "Option::is_none")]
    pub block_len: Option<usize>,
    pub kind: EstimateKind,
}

impl Default for EstimateSection {
    fn default() -> Self {
        Self {
            block_len: None,
            kind: EstimateKind::Tilde,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CiSection {
    pub theta: f64,
    #[serde(rename = "M", skip_serializing_if = "Option::is_none")]
    pub block_len: Option<usize>,
    #[serde(rename = "B")]
    pub draws: usize,
}

impl Default for CiSection {
    fn default() -> Self {
        Self {
            theta: 0.95,
            block_len: None,
            draws: hdts_core::gboot::DEFAULT_DRAWS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum NullKind {
    /// Off-diagonal covariances are zero.
    ZeroOffDiagonal,
    /// The covariance matrix is the identity.
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CovtestSection {
    pub theta: f64,
    #[serde(rename = "M", skip_serializing_if = "Option::is_none")]
    pub block_len: Option<usize>,
    #[serde(rename = "B")]
    pub draws: usize,
    pub null: NullKind,
    pub max_columns: usize,
}

impl Default for CovtestSection {
    fn default() -> Self {
        Self {
            theta: 0.95,
            block_len: None,
            draws: hdts_core::gboot::DEFAULT_DRAWS,
            null: NullKind::ZeroOffDiagonal,
            max_columns: hdts_core::covinf::DEFAULT_MAX_COLUMNS,
        }
    }
}

/// Profile settings for `check-conditions` when it starts from a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DepmeasureSection {
    pub q: f64,
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    /// Monte Carlo replications when no closed form exists.
    pub replications: usize,
}

impl Default for DepmeasureSection {
    fn default() -> Self {
        Self {
            q: 8.0,
            alpha: 1.0,
            nu: None,
            replications: 2000,
        }
    }
}

/// Parsed configuration plus the raw bytes it came from.
pub struct Loaded<T> {
    pub value: T,
    pub bytes: Vec<u8>,
}

pub fn load<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Loaded<T>> {
    let bytes = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::Missing(format!("config file {} not found", path.display())),
        _ => Error::Io(e),
    })?;
    let text = std::str::from_utf8(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let value = toml::from_str(text).map_err(|e| Error::InvalidSpec(format!("{}: {e}", path.display())))?;
    Ok(Loaded { value, bytes })
}

pub fn defaults_toml() -> String {
    toml::to_string_pretty(&CliConfig::default()).expect("defaults serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip() {
        let text = defaults_toml();
        let back: CliConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, CliConfig::default());
    }

    #[test]
    fn partial_file_fills_defaults() {
        let cfg: CliConfig = toml::from_str("seed = 4\n[ci]\ntheta = 0.9\n").unwrap();
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.ci.theta, 0.9);
        assert_eq!(cfg.ci.draws, 2000);
        assert!(toml::from_str::<CliConfig>("[ci]\nwidth = 1\n").is_err());
    }
}
