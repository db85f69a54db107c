//! TOML experiment configuration.

use serde::{Deserialize, Serialize};

use super::ks::DEFAULT_PERMUTATIONS;
use super::rates::BlockRule;
use crate::error::{invalid_arg, Error, Result};
use crate::gboot::DEFAULT_DRAWS;
use crate::model::ProcessSpec;

pub const MIN_COVERAGE_REPLICATIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Coverage,
    Ga,
    Rate,
    Mdep,
    Counterexample,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Coverage => "coverage",
            ExperimentKind::Ga => "ga",
            ExperimentKind::Rate => "rate",
            ExperimentKind::Mdep => "mdep",
            ExperimentKind::Counterexample => "counterexample",
        }
    }
}

/// Grid axes. Which axes form cells and which form a within-cell trajectory
/// depends on the experiment kind:
///
/// | kind | cells | trajectory |
/// |---|---|---|
/// | coverage | n, p, M, theta | |
/// | ga | n, p | |
/// | rate | p, q, alpha, M | n |
/// | mdep | n, p, q, alpha | m |
/// | counterexample | n, q | p |
///
/// For `rate` and `mdep` an `alpha` value also sets the decay exponent of a linear spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    #[serde(default)]
    pub n: Vec<usize>,
    #[serde(default)]
    pub p: Vec<usize>,
    #[serde(default, rename = "M")]
    pub block_len: Vec<usize>,
    #[serde(default)]
    pub theta: Vec<f64>,
    #[serde(default)]
    pub q: Vec<f64>,
    #[serde(default)]
    pub alpha: Vec<f64>,
    #[serde(default)]
    pub m: Vec<usize>,
    /// Block rule for `rate` cells when `M` is empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_rule: Option<BlockRule>,
}

fn default_draws() -> usize {
    DEFAULT_DRAWS
}

fn default_permutations() -> usize {
    DEFAULT_PERMUTATIONS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    pub replications: usize,
    /// Bootstrap draws `B` for coverage cells.
    #[serde(default = "default_draws")]
    pub draws: usize,
    #[serde(default = "default_permutations")]
    pub permutations: usize,
    /// Allow the long-path covariance estimate for nonlinear specs.
    #[serde(default)]
    pub approximate_oracle: bool,
    /// Grid size of per-cell ECDF dumps (ga kind).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ecdf_points: Option<usize>,
    pub spec: ProcessSpec,
    pub grid: Grid,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidSpec(format!("experiment config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        let g = &self.grid;
        let need = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(invalid_arg(format!("{} experiment: {what}", self.kind.as_str())))
            }
        };
        need(self.replications > 0, "replications must be positive")?;
        need(!g.n.is_empty(), "grid.n must be nonempty")?;
        need(g.n.iter().all(|n| *n > 0), "grid.n entries must be positive")?;
        need(g.p.iter().all(|p| *p > 0), "grid.p entries must be positive")?;
        need(g.theta.iter().all(|t| *t > 0.0 && *t < 1.0), "grid.theta entries must lie in (0, 1)")?;
        match self.kind {
            ExperimentKind::Coverage => need(
                self.replications >= MIN_COVERAGE_REPLICATIONS,
                &format!("coverage runs need replications >= {MIN_COVERAGE_REPLICATIONS}"),
            ),
            ExperimentKind::Ga => Ok(()),
            ExperimentKind::Rate => need(g.n.len() >= 3, "grid.n needs at least 3 sample sizes"),
            ExperimentKind::Mdep => need(g.m.len() >= 3, "grid.m needs at least 3 values"),
            ExperimentKind::Counterexample => need(!g.p.is_empty(), "grid.p must be nonempty"),
        }
    }

    /// Dimensions of the cell grid, falling back to `spec.p`.
    pub fn ps(&self) -> Vec<usize> {
        if self.grid.p.is_empty() {
            vec![self.spec.p]
        } else {
            self.grid.p.clone()
        }
    }
}
