//! Simultaneous coverage of the bootstrap intervals.

use serde::{Deserialize, Serialize};

use super::ga::{gaussian_oracle, OracleKind};
use crate::error::{invalid_arg, Result};
use crate::gboot::simultaneous_ci;
use crate::model::{simulate, ProcessSpec};
use crate::par::map_ordered;
use crate::rng::{Purpose, RngContract};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageCell {
    pub n: usize,
    pub p: usize,
    pub theta: f64,
    #[serde(rename = "M")]
    pub block_len: usize,
    #[serde(rename = "B")]
    pub draws: usize,
    pub replications: usize,
    pub covered: usize,
    pub coverage: f64,
    /// Binomial standard error `sqrt(c (1 - c) / R)`.
    pub se: f64,
    pub mean_chi: f64,
    pub oracle: OracleKind,
}

/// Fraction of `replications` panels whose intervals contain the true mean in
/// every coordinate. Replication `r` simulates from stream `Replication(r)` and
/// bootstraps from a stream derived from it.
pub fn coverage_cell(
    spec: &ProcessSpec,
    n: usize,
    theta: f64,
    block_len: Option<usize>,
    draws: usize,
    replications: usize,
    rng: RngContract,
) -> Result<CoverageCell> {
    if replications == 0 {
        return Err(invalid_arg("coverage needs at least one replication"));
    }
    let oracle = gaussian_oracle(spec, true, rng)?;
    let mu = oracle.mean.to_vec();
    let runs = map_ordered(replications, |r| {
        let stream = rng.derive(Purpose::Replication, r as u64);
        let panel = simulate(spec, n, stream)?;
        let ci = simultaneous_ci(&panel, theta, block_len, draws, stream.derive(Purpose::Auxiliary, 0))?;
        Ok((ci.covers(&mu), ci.sidecar.chi, ci.sidecar.block_len))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let covered = runs.iter().filter(|r| r.0).count();
    let coverage = covered as f64 / replications as f64;
    Ok(CoverageCell {
        n,
        p: spec.p,
        theta,
        block_len: runs[0].2,
        draws,
        replications,
        covered,
        coverage,
        se: (coverage * (1.0 - coverage) / replications as f64).sqrt(),
        mean_chi: runs.iter().map(|r| r.1).sum::<f64>() / replications as f64,
        oracle: oracle.kind,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::InnovationLaw;

    #[test]
    fn median_level_cell() {
        let spec = ProcessSpec::iid(4, InnovationLaw::StandardGaussian);
        let c = coverage_cell(&spec, 200, 0.5, Some(1), 1000, 600, RngContract::new(21)).unwrap();
        assert!((c.coverage - 0.5).abs() < 0.06, "{}", c.coverage);
        assert_eq!(c.block_len, 1);
        assert_eq!(c, coverage_cell(&spec, 200, 0.5, Some(1), 1000, 600, RngContract::new(21)).unwrap());
    }

    #[test]
    fn tiny_blocks_undercover_under_strong_dependence() {
        let spec = ProcessSpec::linear(3, 0.5, 200, 0, 0.0);
        let c = coverage_cell(&spec, 400, 0.9, Some(1), 1000, 300, RngContract::new(2)).unwrap();
        assert!(c.coverage < 0.9 - 3.0 * c.se, "{c:?}");
    }
}
