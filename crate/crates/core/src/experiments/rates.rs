//! Empirical decay exponents: the long-run covariance estimator against its
//! theoretical rate, and the m-dependence approximation error.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::depmeasure::{closed_form_profile, mc_profile};
use crate::error::{invalid_arg, Error, Result};
use crate::longrun::{default_block_len, sigma_tilde, theoretical_rate, true_sigma, BlockPlan};
use crate::model::law::gaussian_abs_norm;
use crate::model::{linear_truncation_sums, simulate, Family, InnovationLaw, ProcessSpec};
use crate::par::{chunked_sum, map_ordered};
use crate::rng::{Purpose, RngContract};
use crate::stats::{log_log_slope, median, ols_slope};

/// Block length as a function of `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum BlockRule {
    /// `floor(n^{1/3})`.
    #[default]
    CubeRoot,
    Fixed {
        #[serde(rename = "M")]
        block_len: usize,
    },
    /// `max(1, floor(c n^exponent))`.
    Power { c: f64, exponent: f64 },
}

impl BlockRule {
    pub fn block_len(&self, n: usize) -> usize {
        match *self {
            BlockRule::CubeRoot => default_block_len(n),
            BlockRule::Fixed { block_len } => block_len,
            BlockRule::Power { c, exponent } => ((c * (n as f64).powf(exponent)).floor() as usize).max(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub n: usize,
    #[serde(rename = "M")]
    pub block_len: usize,
    pub median_error: f64,
    pub lower_quartile: f64,
    pub upper_quartile: f64,
    pub r_n: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateResult {
    pub q: f64,
    pub alpha: f64,
    pub replications: usize,
    pub points: Vec<RatePoint>,
    /// Log-log slope of the median error against `n`.
    pub slope: f64,
    /// Log-log slope of `r_n` over the same grid.
    pub theory_slope: f64,
}

fn quartile(sorted: &[f64], level: f64) -> f64 {
    let k = ((level * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[k - 1]
}

/// Median of `|Sigma~ - Sigma|_inf` over `replications` panels per grid
/// point, compared with `r_n` evaluated at the moment order `q` and
/// adjusted-norm exponent `alpha`.
pub fn rate_experiment(
    spec: &ProcessSpec,
    ns: &[usize],
    rule: BlockRule,
    q: f64,
    alpha: f64,
    replications: usize,
    rng: RngContract,
) -> Result<RateResult> {
    if ns.len() < 3 {
        return Err(invalid_arg(format!("rate fits need at least 3 sample sizes, got {}", ns.len())));
    }
    if replications == 0 {
        return Err(invalid_arg("rate experiment needs at least one replication"));
    }
    let sigma = true_sigma(spec)?;
    let profile = match closed_form_profile(spec, q, alpha) {
        Ok(p) => p,
        Err(Error::Unsupported(_)) => mc_profile(spec, q, alpha, 2000, rng.derive(Purpose::Oracle, 1))?,
        Err(e) => return Err(e),
    };
    let mut points = Vec::with_capacity(ns.len());
    for (i, &n) in ns.iter().enumerate() {
        let m = rule.block_len(n);
        let plan = BlockPlan::new(n, m)?;
        let cell = rng.derive(Purpose::Cell, i as u64);
        let mut errors = map_ordered(replications, |r| {
            let panel = simulate(spec, n, cell.derive(Purpose::Replication, r as u64))?;
            let est = sigma_tilde(&panel, &plan)?;
            Ok(sup_distance(&est.sigma, &sigma))
        })
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
        errors.sort_by(f64::total_cmp);
        points.push(RatePoint {
            n,
            block_len: m,
            median_error: median(&errors),
            lower_quartile: quartile(&errors, 0.25),
            upper_quartile: quartile(&errors, 0.75),
            r_n: theoretical_rate(&profile, n, spec.p, m, None)?.r_n,
        });
    }
    let x: Vec<f64> = points.iter().map(|p| p.n as f64).collect();
    let med: Vec<f64> = points.iter().map(|p| p.median_error).collect();
    let rn: Vec<f64> = points.iter().map(|p| p.r_n).collect();
    Ok(RateResult {
        q,
        alpha,
        replications,
        slope: log_log_slope(&x, &med),
        theory_slope: log_log_slope(&x, &rn),
        points,
    })
}

fn sup_distance(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdepResult {
    pub n: usize,
    pub q: f64,
    pub replications: usize,
    pub ms: Vec<usize>,
    /// Monte Carlo `max_j ||S_nj - S_{n,m,j}||_q / sqrt(n)`.
    pub norms: Vec<f64>,
    pub se: Vec<f64>,
    /// Exact values when available (`q = 2`, or Gaussian innovations).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub closed_form: Option<Vec<f64>>,
    /// Slope of `log norm` against `log(m + 1)`; `None` when some norm vanishes.
    pub slope: Option<f64>,
    pub closed_form_slope: Option<f64>,
    pub target_slope: f64,
}

impl MdepResult {
    /// Largest `|mc - exact| / se` over the grid.
    pub fn max_z(&self) -> Option<f64> {
        let cf = self.closed_form.as_ref()?;
        Some(
            self.norms
                .iter()
                .zip(&self.se)
                .zip(cf)
                .map(|((v, s), c)| if *s > 0.0 { (v - c).abs() / s } else if v == c { 0.0 } else { f64::INFINITY })
                .fold(0.0, f64::max),
        )
    }
}

/// Exact `||S_nj - S_{n,m,j}||_2 / sqrt(n)` for each coordinate of a linear
/// spec: `var(eps) |B_j.|^2 sum_t c_t^2 / n` with `c_t` the total weight of
/// `eps_t` in the truncated tail.
pub fn linear_tail_norms(spec: &ProcessSpec, n: usize, m: usize) -> Vec<f64> {
    let k_max = spec.truncation;
    if spec.family == Family::Iid || m >= k_max {
        return vec![0.0; spec.p];
    }
    let a = spec.lag_weights();
    let mut prefix = vec![0.0; a.len() + 1];
    for (k, w) in a.iter().enumerate() {
        prefix[k + 1] = prefix[k] + w;
    }
    let mut ss = 0.0;
    for t in -(k_max as i64)..n as i64 {
        let lo = (m as i64 + 1).max(-t);
        let hi = (k_max as i64).min(n as i64 - 1 - t);
        if lo <= hi {
            let c = prefix[hi as usize + 1] - prefix[lo as usize];
            ss += c * c;
        }
    }
    let b = spec.mixing_matrix();
    let var = spec.innovation.variance();
    b.rows()
        .into_iter()
        .map(|row| (var * row.dot(&row) * ss / n as f64).sqrt())
        .collect()
}

/// Monte Carlo `L^q` norm of the m-dependence approximation error of the sum,
/// scaled by `sqrt(n)`, over the grid `ms`, with its fitted decay against
/// `log(m + 1)` compared to `-alpha`.
pub fn mdep_rate_check(
    spec: &ProcessSpec,
    n: usize,
    q: f64,
    alpha: f64,
    ms: &[usize],
    replications: usize,
    rng: RngContract,
) -> Result<MdepResult> {
    if ms.len() < 3 {
        return Err(invalid_arg(format!("decay fits need at least 3 values of m, got {}", ms.len())));
    }
    if replications < 2 {
        return Err(invalid_arg("need at least 2 replications"));
    }
    if q < 1.0 || !spec.innovation.has_moment(q) {
        return Err(invalid_arg(format!("L^{q} norm is not finite for this innovation law")));
    }
    spec.validate()?;
    let p = spec.p;
    let g = ms.len() * p;
    let (norms, se) = match spec.family {
        Family::Iid => (vec![0.0; ms.len()], vec![0.0; ms.len()]),
        Family::Linear => {
            let root_n = (n as f64).sqrt();
            let sums = chunked_sum(replications, 2 * g, |r, acc| {
                let tails = linear_truncation_sums(spec, n, ms, rng.derive(Purpose::Replication, r as u64))
                    .expect("validated");
                for (i, d) in tails.iter().enumerate() {
                    for j in 0..p {
                        let v = (d[j] / root_n).abs().powf(q);
                        acc[i * p + j] += v;
                        acc[g + i * p + j] += v * v;
                    }
                }
            });
            let rf = replications as f64;
            let mut norms = Vec::with_capacity(ms.len());
            let mut se = Vec::with_capacity(ms.len());
            for i in 0..ms.len() {
                let (mut best, mut best_se) = (0.0, 0.0);
                for j in 0..p {
                    let mean = sums[i * p + j] / rf;
                    let var = ((sums[g + i * p + j] / rf - mean * mean) * rf / (rf - 1.0)).max(0.0);
                    let norm = mean.powf(1.0 / q);
                    if norm > best {
                        best = norm;
                        // delta method for mean^{1/q}; norm > 0 implies mean > 0
                        best_se = norm / (q * mean) * (var / rf).sqrt();
                    }
                }
                norms.push(best);
                se.push(best_se);
            }
            (norms, se)
        }
        Family::ThresholdAr => {
            return Err(Error::Unsupported("the m-dependence check needs a linear or iid spec".into()))
        }
    };
    let closed_form = match (q == 2.0, spec.innovation) {
        (true, _) => Some(1.0),
        (false, InnovationLaw::StandardGaussian) => Some(gaussian_abs_norm(q)),
        _ => None,
    }
    .map(|c| {
        ms.iter()
            .map(|&m| c * linear_tail_norms(spec, n, m).into_iter().fold(0.0, f64::max))
            .collect::<Vec<f64>>()
    });
    let fit = |y: &[f64]| -> Option<f64> {
        if y.iter().any(|v| *v <= 0.0) {
            return None;
        }
        let lx: Vec<f64> = ms.iter().map(|m| ((m + 1) as f64).ln()).collect();
        let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
        Some(ols_slope(&lx, &ly))
    };
    Ok(MdepResult {
        n,
        q,
        replications,
        ms: ms.to_vec(),
        slope: fit(&norms),
        closed_form_slope: closed_form.as_deref().and_then(fit),
        closed_form,
        norms,
        se,
        target_slope: -alpha,
    })
}
