//! Simultaneous inference for covariance entries through the product process
//! `X_ij X_ik - gamma_jk`, stored over the upper triangle `j <= k`.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::depmeasure::{adjusted_norm, tail_sums, ConditionInputs, DependenceProfile};
use crate::error::{invalid_arg, Error, Result};
use crate::gboot::bootstrap_quantile;
use crate::longrun::{sigma_tilde_data, BlockPlan};
use crate::model::{simulate_coupled, Family, Panel, ProcessSpec};
use crate::par::chunked_sum;
use crate::rng::{Purpose, RngContract};

pub const DEFAULT_MAX_COLUMNS: usize = 5000;

/// Number of pairs `j <= k` among `p` coordinates.
pub fn cov_dim(p: usize) -> usize {
    p * (p + 1) / 2
}

/// Flat index of the zero-based pair `(j, k)`, `j <= k`, in row-major upper-triangular order.
pub fn cov_index(j: usize, k: usize, p: usize) -> usize {
    debug_assert!(j <= k && k < p);
    j * (2 * p + 1 - j) / 2 + (k - j)
}

/// Inverse of [`cov_index`].
pub fn cov_pair(index: usize, p: usize) -> (usize, usize) {
    let mut j = 0;
    let mut start = 0;
    while start + (p - j) <= index {
        start += p - j;
        j += 1;
    }
    (j, j + index - start)
}

/// Centered product process over the upper triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct CovPanel {
    pub p: usize,
    /// `n x p(p+1)/2`, entry `(i, a)` equal to `X_ij X_ik - gamma^_jk`.
    pub data: Array2<f64>,
    /// `gamma^_jk = n^-1 sum_i X_ij X_ik` in flat layout.
    pub gamma_hat: Array1<f64>,
}

impl CovPanel {
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..cov_dim(self.p)).map(move |a| cov_pair(a, self.p))
    }
}

pub fn build_cov_panel(panel: &Panel) -> Result<CovPanel> {
    let (n, p) = (panel.n(), panel.p());
    if n < 2 {
        return Err(invalid_arg("covariance panel needs n >= 2"));
    }
    let d = cov_dim(p);
    let mut data = Array2::zeros((n, d));
    for (i, x) in panel.data.rows().into_iter().enumerate() {
        let mut a = 0;
        for j in 0..p {
            for k in j..p {
                data[[i, a]] = x[j] * x[k];
                a += 1;
            }
        }
    }
    let gamma_hat = crate::model::simulate::column_means(data.view());
    for mut row in data.rows_mut() {
        row -= &gamma_hat;
    }
    Ok(CovPanel { p, data, gamma_hat })
}

/// Upper bounds on the dependence-adjusted norms of the product process at
/// moment order `q/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovNormBound {
    pub q_half: f64,
    pub alpha: f64,
    /// `2 ||X_.j||_{q,0} ||X_.k||_{q,a} + 2 ||X_.k||_{q,0} ||X_.j||_{q,a}` per pair, flat layout.
    pub pair_bounds: Vec<f64>,
    /// `4 Psi_{q,0} Psi_{q,a}`.
    pub uniform: f64,
    /// `4 (sum_j ||X_.j||_{q,0}^{q/2})^{2/q} (sum_j ||X_.j||_{q,a}^{q/2})^{2/q}`.
    pub overall: f64,
    /// `4 || |X|_inf ||_{q,0} || |X|_inf ||_{q,a}`.
    pub sup_norm: f64,
}

pub fn cov_dep_norm_bound(profile: &DependenceProfile) -> Result<CovNormBound> {
    let q = profile.q;
    if q < 4.0 {
        return Err(invalid_arg(format!(
            "product process needs q >= 4 so that q/2 >= 2, got q = {q}"
        )));
    }
    let a = profile.alpha;
    let e0 = profile.entry(q, 0.0)?;
    let ea = profile.entry(q, a)?;
    let p = profile.p;
    let mut pair_bounds = Vec::with_capacity(cov_dim(p));
    for j in 0..p {
        for k in j..p {
            pair_bounds.push(
                2.0 * e0.coord_norms[j] * ea.coord_norms[k] + 2.0 * e0.coord_norms[k] * ea.coord_norms[j],
            );
        }
    }
    let agg = |c: &[f64]| c.iter().map(|v| v.powf(q / 2.0)).sum::<f64>().powf(2.0 / q);
    Ok(CovNormBound {
        q_half: q / 2.0,
        alpha: a,
        pair_bounds,
        uniform: 4.0 * e0.psi * ea.psi,
        overall: 4.0 * agg(&e0.coord_norms) * agg(&ea.coord_norms),
        sup_norm: 4.0 * e0.sup_norm * ea.sup_norm,
    })
}

impl CovNormBound {
    /// Condition inputs for the product process, with every norm replaced by its
    /// bound. Lower moment orders are dominated by the order-`q/2` bound, which
    /// therefore needs `q/2 >= 4`.
    pub fn condition_inputs(&self, n: usize, p: usize) -> Result<ConditionInputs> {
        if self.q_half < 4.0 {
            return Err(invalid_arg(format!(
                "bounds at order q/2 = {} do not cover the fourth-moment quantities",
                self.q_half
            )));
        }
        let dim = cov_dim(p) as f64;
        // ||.||_{r,0} <= ||.||_{r,alpha}, so the alpha bound also covers order 0
        let uniform0 = self.uniform;
        Ok(ConditionInputs {
            n: n as f64,
            p: dim,
            q: self.q_half,
            alpha: self.alpha,
            psi_2_alpha: self.uniform,
            psi_2_0: uniform0,
            psi_3_0: uniform0,
            psi_4_0: uniform0,
            theta: self.overall.min(self.sup_norm * dim.ln()),
            nu: None,
            phi_alpha: None,
            phi_0: None,
        })
    }
}

/// Monte Carlo estimate of the product-process adjusted norms, per pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductNormEstimate {
    pub q_half: f64,
    pub alpha: f64,
    pub norms: Vec<f64>,
    pub se: Vec<f64>,
    pub replications: usize,
    pub horizon: usize,
}

const SE_GROUPS: usize = 20;

/// Estimates `||X_.a||_{q/2, alpha}` from coupled paths: the dependence measure
/// of pair `a = (j, k)` at lag `i` is the `L^{q/2}` norm of
/// `X_ij X_ik - X'_ij X'_ik`. Standard errors come from the spread of the
/// estimate over 20 disjoint groups of replications.
pub fn mc_cov_dep_norms(
    spec: &ProcessSpec,
    q: f64,
    alpha: f64,
    replications: usize,
    horizon: Option<usize>,
    rng: RngContract,
) -> Result<ProductNormEstimate> {
    spec.validate()?;
    if q < 4.0 || !spec.innovation.has_moment(q) {
        return Err(invalid_arg(format!("need q >= 4 with a finite q-th moment, got q = {q}")));
    }
    if replications < SE_GROUPS * 10 {
        return Err(invalid_arg(format!("need at least {} replications", SE_GROUPS * 10)));
    }
    let p = spec.p;
    let d = cov_dim(p);
    let h = horizon.unwrap_or(match spec.family {
        Family::Iid => 1,
        Family::Linear => spec.truncation + 1,
        Family::ThresholdAr => crate::depmeasure::profile::DEFAULT_MC_HORIZON,
    });
    let r = q / 2.0;
    let group_size = replications / SE_GROUPS;
    let used = group_size * SE_GROUPS;
    let len = h * d;
    // one chunked sum per group keeps the grouping independent of threading
    let groups: Vec<Vec<f64>> = (0..SE_GROUPS)
        .map(|g| {
            chunked_sum(group_size, len, |item, acc| {
                let rep = (g * group_size + item) as u64;
                let (x, y) = simulate_coupled(spec, h, rng.derive(Purpose::Replication, rep)).expect("validated");
                for i in 0..h {
                    let mut a = 0;
                    for j in 0..p {
                        for k in j..p {
                            let v = x.data[[i, j]] * x.data[[i, k]] - y.data[[i, j]] * y.data[[i, k]];
                            acc[i * d + a] += v.abs().powf(r);
                            a += 1;
                        }
                    }
                }
            })
        })
        .collect();
    let norm_of = |sums: &[f64], count: f64, a: usize| -> Result<f64> {
        let delta: Vec<f64> = (0..h).map(|i| (sums[i * d + a] / count).powf(1.0 / r)).collect();
        adjusted_norm(&tail_sums(&delta), alpha)
    };
    let mut total = vec![0.0; len];
    for g in &groups {
        for (t, v) in total.iter_mut().zip(g) {
            *t += v;
        }
    }
    let mut norms = Vec::with_capacity(d);
    let mut se = Vec::with_capacity(d);
    for a in 0..d {
        norms.push(norm_of(&total, used as f64, a)?);
        let per: Vec<f64> = groups
            .iter()
            .map(|g| norm_of(g, group_size as f64, a))
            .collect::<Result<_>>()?;
        let m = per.iter().sum::<f64>() / SE_GROUPS as f64;
        let var = per.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (SE_GROUPS - 1) as f64;
        se.push((var / SE_GROUPS as f64).sqrt());
    }
    Ok(ProductNormEstimate {
        q_half: r,
        alpha,
        norms,
        se,
        replications: used,
        horizon: h,
    })
}

/// Null hypothesis for the covariance entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CovNull {
    /// Full null matrix `gamma^0`; every pair `j <= k` is tested.
    Matrix { gamma: Vec<Vec<f64>> },
    /// Off-diagonal entries are zero; only pairs `j < k` are tested.
    ZeroOffDiagonal,
}

impl CovNull {
    pub fn identity(p: usize) -> Self {
        CovNull::Matrix {
            gamma: (0..p).map(|j| (0..p).map(|k| f64::from(u8::from(j == k))).collect()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    /// 1-based coordinates.
    pub j: usize,
    pub k: usize,
    pub gamma_hat: f64,
    pub stat: f64,
    pub threshold: f64,
    pub flag: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovTestReport {
    pub theta: f64,
    /// `sqrt(n) max_a |gamma^_a - gamma0_a| / tau~_a`.
    pub statistic: f64,
    pub threshold: f64,
    pub reject: bool,
    pub pairs: Vec<PairResult>,
    #[serde(rename = "M")]
    pub block_len: usize,
    #[serde(rename = "B")]
    pub draws: usize,
    pub clipped_mass: f64,
}

impl CovTestReport {
    pub fn flagged(&self) -> impl Iterator<Item = &PairResult> {
        self.pairs.iter().filter(|r| r.flag)
    }

    /// CSV with columns `j,k,gamma_hat,stat,threshold,flag`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Format(e.to_string()))?;
        w.write_record(["j", "k", "gamma_hat", "stat", "threshold", "flag"])
            .map_err(|e| Error::Format(e.to_string()))?;
        for r in &self.pairs {
            w.write_record([
                r.j.to_string(),
                r.k.to_string(),
                format!("{:?}", r.gamma_hat),
                format!("{:?}", r.stat),
                format!("{:?}", r.threshold),
                r.flag.to_string(),
            ])
            .map_err(|e| Error::Format(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovTestOptions {
    pub block_len: Option<usize>,
    pub draws: usize,
    pub max_columns: usize,
}

impl Default for CovTestOptions {
    fn default() -> Self {
        Self {
            block_len: None,
            draws: crate::gboot::DEFAULT_DRAWS,
            max_columns: DEFAULT_MAX_COLUMNS,
        }
    }
}

/// Max-type simultaneous test of `gamma_a = gamma0_a` over the tested pairs.
/// `tau~_a^2` is the diagonal of the batched-mean long-run covariance of the
/// product process; the threshold is the bootstrap quantile of its normalized maximum.
pub fn cov_simultaneous_test(
    panel: &Panel,
    theta: f64,
    null: &CovNull,
    opts: CovTestOptions,
    rng: RngContract,
) -> Result<CovTestReport> {
    let p = panel.p();
    let tested: Vec<usize> = match null {
        CovNull::Matrix { gamma } => {
            if gamma.len() != p || gamma.iter().any(|r| r.len() != p) {
                return Err(invalid_arg(format!("null matrix must be {p} x {p}")));
            }
            (0..cov_dim(p)).collect()
        }
        CovNull::ZeroOffDiagonal => (0..cov_dim(p)).filter(|&a| {
            let (j, k) = cov_pair(a, p);
            j < k
        }).collect(),
    };
    if tested.is_empty() {
        return Err(invalid_arg("no covariance entries to test (p = 1 with a zero off-diagonal null)"));
    }
    if tested.len() > opts.max_columns {
        return Err(invalid_arg(format!(
            "{} covariance entries exceed the limit of {}; test a subset of coordinates",
            tested.len(),
            opts.max_columns
        )));
    }
    let cov = build_cov_panel(panel)?;
    let n = panel.n();
    let sub = cov.data.select(ndarray::Axis(1), &tested);
    let plan = match opts.block_len {
        Some(m) => BlockPlan::new(n, m)?,
        None => BlockPlan::default_for(n)?,
    };
    let est = sigma_tilde_data(sub.view(), &plan)?;
    let boot = bootstrap_quantile(&est, theta, opts.draws, rng)?;
    let root_n = (n as f64).sqrt();
    let mut pairs = Vec::with_capacity(tested.len());
    let mut statistic: f64 = 0.0;
    for (col, &a) in tested.iter().enumerate() {
        let (j, k) = cov_pair(a, p);
        let g0 = match null {
            CovNull::Matrix { gamma } => gamma[j][k],
            CovNull::ZeroOffDiagonal => 0.0,
        };
        let stat = root_n * (cov.gamma_hat[a] - g0).abs() / est.diag_scale[col];
        statistic = statistic.max(stat);
        pairs.push(PairResult {
            j: j + 1,
            k: k + 1,
            gamma_hat: cov.gamma_hat[a],
            stat,
            threshold: boot.chi,
            flag: stat > boot.chi,
        });
    }
    Ok(CovTestReport {
        theta,
        statistic,
        threshold: boot.chi,
        reject: statistic > boot.chi,
        pairs,
        block_len: plan.block_len,
        draws: opts.draws,
        clipped_mass: boot.clipped_mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depmeasure::closed_form_profile;
    use crate::model::{simulate, InnovationLaw};

    #[test]
    fn index_layout() {
        assert_eq!(cov_dim(2), 3);
        assert_eq!([cov_index(0, 0, 2), cov_index(0, 1, 2), cov_index(1, 1, 2)], [0, 1, 2]);
        for p in 1..12 {
            let mut a = 0;
            for j in 0..p {
                for k in j..p {
                    assert_eq!(cov_index(j, k, p), a);
                    assert_eq!(cov_pair(a, p), (j, k));
                    a += 1;
                }
            }
            assert_eq!(a, cov_dim(p));
        }
    }

    #[test]
    fn alternating_signs_give_zero_column() {
        let x = Array2::from_shape_fn((10, 1), |(i, _)| if i % 2 == 0 { 1.0 } else { -1.0 });
        let c = build_cov_panel(&Panel::from_data(x).unwrap()).unwrap();
        assert_eq!(c.gamma_hat[0], 1.0);
        assert!(c.data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn gamma_hat_and_centering() {
        let spec = ProcessSpec::linear(4, 1.0, 10, 1, 0.5);
        let x = simulate(&spec, 57, RngContract::new(2)).unwrap();
        let c = build_cov_panel(&x).unwrap();
        for j in 0..4 {
            for k in j..4 {
                let direct: f64 = (0..57).map(|i| x.data[[i, j]] * x.data[[i, k]]).sum::<f64>() / 57.0;
                assert!((c.gamma_hat[cov_index(j, k, 4)] - direct).abs() < 1e-12);
            }
        }
        let means = crate::model::simulate::column_means(c.data.view());
        assert!(means.iter().all(|m| m.abs() < 1e-12));
    }

    #[test]
    fn bound_plug_ins() {
        let spec = ProcessSpec::iid(3, InnovationLaw::StandardGaussian);
        let prof = closed_form_profile(&spec, 8.0, 1.0).unwrap();
        let b = cov_dep_norm_bound(&prof).unwrap();
        let u = prof.entry(8.0, 1.0).unwrap().psi;
        assert!((u - prof.entry(8.0, 0.0).unwrap().psi).abs() < 1e-12);
        assert!((b.uniform - 4.0 * u * u).abs() < 1e-12);
        assert!(b.pair_bounds.iter().all(|v| (v - 4.0 * u * u).abs() < 1e-12));

        let two = closed_form_profile(&ProcessSpec::linear(2, 1.0, 20, 1, 0.3), 4.0, 1.0).unwrap();
        let b = cov_dep_norm_bound(&two).unwrap();
        let c0 = &two.entry(4.0, 0.0).unwrap().coord_norms;
        let ca = &two.entry(4.0, 1.0).unwrap().coord_norms;
        let s0 = (c0[0].powi(2) + c0[1].powi(2)).sqrt();
        let sa = (ca[0].powi(2) + ca[1].powi(2)).sqrt();
        assert!((b.overall - 4.0 * s0 * sa).abs() < 1e-12);
        let low = closed_form_profile(&spec, 3.0, 1.0).unwrap();
        assert!(cov_dep_norm_bound(&low).is_err());
    }

    #[test]
    fn mc_product_norms_respect_bound() {
        let spec = ProcessSpec::linear(3, 1.0, 8, 1, 0.5);
        let prof = closed_form_profile(&spec, 4.0, 1.0).unwrap();
        let bound = cov_dep_norm_bound(&prof).unwrap();
        let est = mc_cov_dep_norms(&spec, 4.0, 1.0, 2000, None, RngContract::new(4)).unwrap();
        for (a, (v, se)) in est.norms.iter().zip(&est.se).enumerate() {
            assert!(*v <= bound.pair_bounds[a] + 3.0 * se, "pair {a}: {v} > {}", bound.pair_bounds[a]);
            assert!(*v <= bound.uniform + 3.0 * se);
        }
    }

    #[test]
    fn scalar_reduction_matches_direct_pipeline() {
        let spec = ProcessSpec::iid(1, InnovationLaw::StandardGaussian);
        let x = simulate(&spec, 400, RngContract::new(8)).unwrap();
        let opts = CovTestOptions { block_len: Some(5), ..Default::default() };
        let rep = cov_simultaneous_test(&x, 0.95, &CovNull::identity(1), opts, RngContract::new(1)).unwrap();
        // scalar pipeline: y_i = x_i^2 - mean, batched variance with M = 5
        let v: Vec<f64> = x.data.column(0).iter().map(|a| a * a).collect();
        let g = v.iter().sum::<f64>() / 400.0;
        let y: Vec<f64> = v.iter().map(|a| a - g).collect();
        let ybar = y.iter().sum::<f64>() / 400.0;
        let tau2 = y.chunks(5).map(|c| (c.iter().sum::<f64>() - 5.0 * ybar).powi(2)).sum::<f64>() / 400.0;
        let stat = 20.0 * (g - 1.0).abs() / tau2.sqrt();
        assert!((rep.statistic - stat).abs() < 1e-10);
    }

    #[test]
    fn planted_pair_is_flagged_and_permutation_equivariant() {
        let spec = ProcessSpec::iid(5, InnovationLaw::StandardGaussian);
        let mut x = simulate(&spec, 2000, RngContract::new(12)).unwrap().data;
        for i in 0..2000 {
            x[[i, 3]] = 0.9 * x[[i, 1]] + (1.0f64 - 0.81).sqrt() * x[[i, 3]];
        }
        let panel = Panel::from_data(x.clone()).unwrap();
        let opts = CovTestOptions { block_len: Some(1), ..Default::default() };
        let rep = cov_simultaneous_test(&panel, 0.95, &CovNull::ZeroOffDiagonal, opts, RngContract::new(3)).unwrap();
        assert!(rep.flagged().any(|r| (r.j, r.k) == (2, 4)));
        // swap coordinates 2 and 5
        let perm = [0usize, 4, 2, 3, 1];
        let permuted = Panel::from_data(x.select(ndarray::Axis(1), &perm)).unwrap();
        let rep2 = cov_simultaneous_test(&permuted, 0.95, &CovNull::ZeroOffDiagonal, opts, RngContract::new(3)).unwrap();
        assert!(rep2.flagged().any(|r| (r.j, r.k) == (4, 5)));
        assert!((rep.statistic - rep2.statistic).abs() < 1e-10);
    }

    #[test]
    fn column_guard() {
        let x = Panel::from_data(Array2::from_shape_fn((20, 100), |(i, j)| ((i * 7 + j) % 5) as f64)).unwrap();
        let opts = CovTestOptions { max_columns: 1000, ..Default::default() };
        let err = cov_simultaneous_test(&x, 0.95, &CovNull::ZeroOffDiagonal, opts, RngContract::new(1)).unwrap_err();
        assert!(err.to_string().contains("subset"));
    }
}
