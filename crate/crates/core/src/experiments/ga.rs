//! Distance between the law of the normalized maximum of the sample mean and
//! its Gaussian counterpart.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::ks::{ecdf_dump, ks_test, EcdfRow, KsResult, DEFAULT_PERMUTATIONS};
use crate::error::{invalid_arg, Error, Result};
use crate::gboot::{max_abs_draws, psd_sqrt};
use crate::longrun::{check_diagonal, default_block_len, sigma_tilde, true_sigma, BlockPlan};
use crate::model::{sample_mean, simulate, Family, ProcessSpec};
use crate::par::map_ordered;
use crate::rng::{Purpose, RngContract};

pub const LONG_PATH_LENGTH: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OracleKind {
    Exact,
    /// Batched-mean estimate from one long path; approximate.
    LongPath {
        length: usize,
        #[serde(rename = "M")]
        block_len: usize,
    },
}

/// Mean and long-run covariance used on the Gaussian side.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianOracle {
    pub mean: Array1<f64>,
    pub sigma: Array2<f64>,
    pub kind: OracleKind,
}

/// Exact oracle for the iid and linear families; the long-path estimate for
/// the threshold family when `approximate` is set.
pub fn gaussian_oracle(spec: &ProcessSpec, approximate: bool, rng: RngContract) -> Result<GaussianOracle> {
    match spec.family {
        Family::Iid | Family::Linear => Ok(GaussianOracle {
            mean: Array1::zeros(spec.p),
            sigma: true_sigma(spec)?,
            kind: OracleKind::Exact,
        }),
        Family::ThresholdAr if approximate => long_path_oracle(spec, LONG_PATH_LENGTH, rng),
        Family::ThresholdAr => Err(Error::Unsupported(
            "no closed-form long-run covariance for the threshold family; \
             enable the approximate long-path oracle"
                .into(),
        )),
    }
}

/// Mean and long-run covariance estimated from one path of `length`
/// observations with `M = floor(length^{1/3})`. Coordinates of the threshold
/// family are independent copies of one scalar process, so a scalar path
/// suffices and the result is `mu 1` and `s Id`.
pub fn long_path_oracle(spec: &ProcessSpec, length: usize, rng: RngContract) -> Result<GaussianOracle> {
    if !spec.is_cross_sectionally_independent() {
        return Err(Error::Unsupported("long-path oracle needs independent coordinates".into()));
    }
    let scalar = spec.clone().with_p(1);
    let path = simulate(&scalar, length, rng.derive(Purpose::Oracle, 0))?;
    let m = default_block_len(length);
    let est = sigma_tilde(&path, &BlockPlan::new(length, m)?)?;
    let mu = path.column_means()[0];
    Ok(GaussianOracle {
        mean: Array1::from_elem(spec.p, mu),
        sigma: Array2::eye(spec.p) * est.sigma[[0, 0]],
        kind: OracleKind::LongPath { length, block_len: m },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaOptions {
    pub permutations: usize,
    pub approximate_oracle: bool,
    /// Number of ECDF grid points to keep; `None` skips the dump.
    pub ecdf_points: Option<usize>,
}

impl Default for GaOptions {
    fn default() -> Self {
        Self {
            permutations: DEFAULT_PERMUTATIONS,
            approximate_oracle: false,
            ecdf_points: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaResult {
    pub n: usize,
    pub p: usize,
    pub replications: usize,
    pub ks: KsResult,
    pub oracle: OracleKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ecdf: Option<Vec<EcdfRow>>,
}

/// The two samples compared by [`ga_distance`]: `sqrt(n) |D0^-1 (Xbar - mu)|_inf`
/// over replications and `|D0^-1 Z|_inf` with `Z ~ N(0, Sigma)`.
pub fn ga_samples(
    spec: &ProcessSpec,
    n: usize,
    replications: usize,
    oracle: &GaussianOracle,
    rng: RngContract,
) -> Result<(Vec<f64>, Vec<f64>)> {
    spec.validate()?;
    if n == 0 || replications == 0 {
        return Err(invalid_arg("n and the number of replications must be positive"));
    }
    check_diagonal(&oracle.sigma)?;
    let scale: Array1<f64> = oracle.sigma.diag().mapv(f64::sqrt);
    let col = scale.view().insert_axis(ndarray::Axis(1));
    let row = scale.view().insert_axis(ndarray::Axis(0));
    let corr = &oracle.sigma / &col / row;
    let root_n = (n as f64).sqrt();
    let sample = map_ordered(replications, |r| {
        sample_mean(spec, n, rng.derive(Purpose::Replication, r as u64)).map(|xbar| {
            xbar.iter()
                .zip(&oracle.mean)
                .zip(&scale)
                .fold(0.0f64, |m, ((x, mu), s)| m.max(root_n * (x - mu).abs() / s))
        })
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    let gauss = max_abs_draws(&psd_sqrt(&corr)?, replications, rng.derive(Purpose::Gaussian, 0));
    Ok((sample, gauss))
}

pub fn ga_distance(spec: &ProcessSpec, n: usize, replications: usize, rng: RngContract) -> Result<GaResult> {
    ga_distance_with(spec, n, replications, GaOptions::default(), rng)
}

pub fn ga_distance_with(
    spec: &ProcessSpec,
    n: usize,
    replications: usize,
    opts: GaOptions,
    rng: RngContract,
) -> Result<GaResult> {
    let oracle = gaussian_oracle(spec, opts.approximate_oracle, rng)?;
    let (sample, gauss) = ga_samples(spec, n, replications, &oracle, rng)?;
    let ks = ks_test(&sample, &gauss, opts.permutations, rng.derive(Purpose::Permutation, 0));
    Ok(GaResult {
        n,
        p: spec.p,
        replications,
        ks,
        oracle: oracle.kind,
        ecdf: opts.ecdf_points.map(|k| ecdf_dump(&sample, &gauss, k)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{InnovationLaw, DEFAULT_PARETO_THRESHOLD};

    fn quick() -> GaOptions {
        GaOptions { permutations: 0, ..Default::default() }
    }

    #[test]
    fn iid_gaussian_samples_share_a_law() {
        let spec = ProcessSpec::iid(5, InnovationLaw::StandardGaussian);
        let r = ga_distance_with(&spec, 10, 5000, quick(), RngContract::new(3)).unwrap();
        // 95% point of the two-sample KS null at R = 5000 is about 1.36 sqrt(2/5000)
        assert!(r.ks.statistic < 0.04, "{}", r.ks.statistic);
    }

    #[test]
    fn single_heavy_tailed_observation_is_far_from_gaussian() {
        let law = InnovationLaw::SymmetricPareto { tail_index: 2.5, threshold: DEFAULT_PARETO_THRESHOLD };
        let spec = ProcessSpec::iid(1, law);
        let r = ga_distance_with(&spec, 1, 4000, quick(), RngContract::new(5)).unwrap();
        assert!(r.ks.statistic > 0.2, "{}", r.ks.statistic);
    }

    #[test]
    fn threshold_family_needs_the_approximate_oracle() {
        let spec = ProcessSpec::threshold_ar(2, 0.5, -0.3);
        assert!(matches!(ga_distance(&spec, 50, 300, RngContract::new(1)), Err(Error::Unsupported(_))));
        let oracle = long_path_oracle(&spec, 200_000, RngContract::new(2)).unwrap();
        assert!(matches!(oracle.kind, OracleKind::LongPath { block_len: 58, .. }));
        assert_eq!(oracle.sigma[[0, 1]], 0.0);
        assert!(oracle.sigma[[0, 0]] > 1.0);
    }

    #[test]
    fn deterministic_with_ecdf() {
        let spec = ProcessSpec::linear(3, 1.0, 20, 1, 0.4);
        let opts = GaOptions { permutations: 19, ecdf_points: Some(50), ..Default::default() };
        let a = ga_distance_with(&spec, 40, 300, opts, RngContract::new(9)).unwrap();
        let b = ga_distance_with(&spec, 40, 300, opts, RngContract::new(9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.ecdf.as_ref().unwrap().len(), 50);
    }
}
