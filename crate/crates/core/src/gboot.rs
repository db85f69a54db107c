//! Gaussian multiplier bootstrap for the normalized maximum and simultaneous
//! confidence intervals for the mean.

use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Error, Result};
use crate::longrun::{check_diagonal, sigma_tilde, BlockPlan, LongRunEstimate};
use crate::model::Panel;
use crate::rng::{Purpose, RngContract};

/// Draws per random stream. Batches are the unit of parallel work.
pub const BATCH: usize = 512;
pub const DEFAULT_DRAWS: usize = 2000;
pub const MIN_DRAWS: usize = 1000;
const SYMMETRY_TOL: f64 = 1e-10;

/// `S` with `S S^T` equal to the input after clipping negative eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdSqrt {
    pub root: Array2<f64>,
    /// Sum of the magnitudes of the clipped negative eigenvalues.
    pub clipped_mass: f64,
    pub diagonal: bool,
}

pub fn psd_sqrt(sigma: &Array2<f64>) -> Result<PsdSqrt> {
    let p = sigma.nrows();
    if p != sigma.ncols() || p == 0 {
        return Err(invalid_arg(format!("psd_sqrt needs a square matrix, got {:?}", sigma.dim())));
    }
    if sigma.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("matrix has non-finite entries".into()));
    }
    let scale = sigma.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let mut diagonal = true;
    for j in 0..p {
        for k in j + 1..p {
            let (a, b) = (sigma[[j, k]], sigma[[k, j]]);
            if (a - b).abs() > SYMMETRY_TOL * scale {
                return Err(invalid_arg(format!("matrix is not symmetric at ({}, {})", j + 1, k + 1)));
            }
            diagonal &= a == 0.0 && b == 0.0;
        }
    }
    if diagonal {
        let mut root = Array2::zeros((p, p));
        let mut clipped = 0.0;
        for j in 0..p {
            let d = sigma[[j, j]];
            if d < 0.0 {
                clipped -= d;
            }
            root[[j, j]] = d.max(0.0).sqrt();
        }
        return Ok(PsdSqrt {
            root,
            clipped_mass: clipped,
            diagonal: true,
        });
    }
    let m = DMatrix::from_fn(p, p, |j, k| 0.5 * (sigma[[j, k]] + sigma[[k, j]]));
    let eig = SymmetricEigen::new(m);
    let mut clipped = 0.0;
    let roots: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&l| {
            if l < 0.0 {
                clipped -= l;
            }
            l.max(0.0).sqrt()
        })
        .collect();
    let v = &eig.eigenvectors;
    let mut root = Array2::zeros((p, p));
    for j in 0..p {
        for k in j..p {
            let mut acc = 0.0;
            for (l, r) in roots.iter().enumerate() {
                acc += v[(j, l)] * r * v[(k, l)];
            }
            root[[j, k]] = acc;
            root[[k, j]] = acc;
        }
    }
    if root.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("eigendecomposition produced non-finite values".into()));
    }
    Ok(PsdSqrt {
        root,
        clipped_mass: clipped,
        diagonal: false,
    })
}

/// `B` draws of `|S eta|_inf`, `eta ~ N(0, Id)`, in draw order. Draw `b` uses
/// the stream of batch `b / BATCH`, so the values do not depend on threading.
pub fn max_abs_draws(root: &PsdSqrt, count: usize, rng: RngContract) -> Vec<f64> {
    let p = root.root.nrows();
    let batches = count.div_ceil(BATCH);
    let per_batch: Vec<Vec<f64>> = crate::par::map_ordered(batches, |b| {
        let len = BATCH.min(count - b * BATCH);
        let mut g = rng.derive(Purpose::Bootstrap, b as u64).rng();
        let eta: Array2<f64> = Array2::from_shape_simple_fn((len, p), || StandardNormal.sample(&mut g));
        if root.diagonal {
            let d = root.root.diag();
            eta.rows()
                .into_iter()
                .map(|row| row.iter().zip(d.iter()).fold(0.0f64, |m, (e, s)| m.max((e * s).abs())))
                .collect()
        } else {
            let z = eta.dot(&root.root.t());
            z.rows()
                .into_iter()
                .map(|row| row.iter().fold(0.0f64, |m, v| m.max(v.abs())))
                .collect()
        }
    });
    per_batch.into_iter().flatten().collect()
}

/// `ceil(theta B)`-th order statistic of sorted draws.
pub fn order_quantile(sorted: &[f64], theta: f64) -> Result<f64> {
    check_theta(theta)?;
    if sorted.is_empty() {
        return Err(invalid_arg("no draws"));
    }
    let k = ((theta * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    Ok(sorted[k - 1])
}

fn check_theta(theta: f64) -> Result<()> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(invalid_arg(format!("coverage level theta must lie in (0, 1), got {theta}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapQuantile {
    pub theta: f64,
    pub chi: f64,
    pub draws: usize,
    /// Bootstrap statistics `|D~^-1 Z~|_inf`, ascending.
    pub sorted: Vec<f64>,
    pub clipped_mass: f64,
}

/// Compact description of the bootstrap law for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawSummary {
    pub theta: f64,
    pub chi: f64,
    #[serde(rename = "B")]
    pub draws: usize,
    pub chi_se: f64,
    pub clipped_mass: f64,
    /// `(level, quantile)` at levels `0.01, 0.02, ..., 0.99`.
    pub ecdf_grid: Vec<(f64, f64)>,
}

impl BootstrapQuantile {
    /// Quantile at another level on the same draws.
    pub fn quantile(&self, theta: f64) -> Result<f64> {
        order_quantile(&self.sorted, theta)
    }

    /// Standard error of `chi` from the spread of neighbouring order statistics,
    /// `(x_(k+s) - x_(k-s)) / 2` with `s = sqrt(B theta (1 - theta))`.
    pub fn standard_error(&self) -> f64 {
        let b = self.sorted.len();
        let k = ((self.theta * b as f64).ceil() as usize).clamp(1, b) - 1;
        let s = (b as f64 * self.theta * (1.0 - self.theta)).sqrt().ceil() as usize;
        let hi = (k + s).min(b - 1);
        let lo = k.saturating_sub(s);
        0.5 * (self.sorted[hi] - self.sorted[lo])
    }

    pub fn summary(&self) -> DrawSummary {
        DrawSummary {
            theta: self.theta,
            chi: self.chi,
            draws: self.draws,
            chi_se: self.standard_error(),
            clipped_mass: self.clipped_mass,
            ecdf_grid: (1..100)
                .map(|k| {
                    let level = k as f64 / 100.0;
                    (level, order_quantile(&self.sorted, level).unwrap())
                })
                .collect(),
        }
    }
}

/// Conditional `theta`-quantile of `|D~^-1 Z~|_inf` with `Z~ ~ N(0, Sigma~)`.
///
/// Draws are generated as `R^{1/2} eta` with `R = D~^-1 Sigma~ D~^-1`, which has
/// exactly the law of `D~^-1 Z~` and makes the statistic invariant to
/// coordinate scaling.
pub fn bootstrap_quantile(est: &LongRunEstimate, theta: f64, draws: usize, rng: RngContract) -> Result<BootstrapQuantile> {
    check_theta(theta)?;
    if draws < MIN_DRAWS {
        return Err(invalid_arg(format!("bootstrap needs B >= {MIN_DRAWS} draws, got {draws}")));
    }
    check_diagonal(&est.sigma)?;
    let corr = est.correlation()?;
    let root = psd_sqrt(&corr)?;
    let mut sorted = max_abs_draws(&root, draws, rng);
    sorted.sort_by(f64::total_cmp);
    let chi = order_quantile(&sorted, theta)?;
    Ok(BootstrapQuantile {
        theta,
        chi,
        draws,
        sorted,
        clipped_mass: root.clipped_mass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub j: usize,
    pub mu_hat: f64,
    pub lo: f64,
    pub hi: f64,
    pub sigma_tilde_jj: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiSidecar {
    pub theta: f64,
    pub chi: f64,
    #[serde(rename = "B")]
    pub draws: usize,
    #[serde(rename = "M")]
    pub block_len: usize,
    pub w: usize,
    pub n: usize,
    pub clipped_mass: f64,
    pub chi_se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CiReport {
    pub intervals: Vec<Interval>,
    pub sidecar: CiSidecar,
    pub quantile: BootstrapQuantile,
}

impl CiReport {
    /// True when every interval contains the matching entry of `mu`.
    pub fn covers(&self, mu: &[f64]) -> bool {
        self.intervals.iter().zip(mu).all(|(iv, m)| iv.lo <= *m && *m <= iv.hi)
    }

    pub fn half_widths(&self) -> Vec<f64> {
        self.intervals.iter().map(|iv| 0.5 * (iv.hi - iv.lo)).collect()
    }

    /// CSV with columns `j,mu_hat,lo,hi,sigma_tilde_jj` (1-based `j`).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Format(e.to_string()))?;
        w.write_record(["j", "mu_hat", "lo", "hi", "sigma_tilde_jj"])
            .map_err(|e| Error::Format(e.to_string()))?;
        for iv in &self.intervals {
            w.write_record([
                iv.j.to_string(),
                format!("{:?}", iv.mu_hat),
                format!("{:?}", iv.lo),
                format!("{:?}", iv.hi),
                format!("{:?}", iv.sigma_tilde_jj),
            ])
            .map_err(|e| Error::Format(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Intervals `mu^_j +/- chi sigma~_jj^{1/2} / sqrt(n)` holding simultaneously
/// with asymptotic probability `theta`. `block_len` defaults to `floor(n^{1/3})`.
pub fn simultaneous_ci(
    panel: &Panel,
    theta: f64,
    block_len: Option<usize>,
    draws: usize,
    rng: RngContract,
) -> Result<CiReport> {
    check_theta(theta)?;
    let n = panel.n();
    let plan = match block_len {
        Some(m) => BlockPlan::new(n, m)?,
        None => BlockPlan::default_for(n)?,
    };
    let est = sigma_tilde(panel, &plan)?;
    let quantile = bootstrap_quantile(&est, theta, draws, rng)?;
    let mu_hat: Array1<f64> = panel.column_means();
    let root_n = (n as f64).sqrt();
    let intervals = (0..panel.p())
        .map(|j| {
            let s = est.sigma[[j, j]];
            let half = quantile.chi * s.sqrt() / root_n;
            Interval {
                j: j + 1,
                mu_hat: mu_hat[j],
                lo: mu_hat[j] - half,
                hi: mu_hat[j] + half,
                sigma_tilde_jj: s,
            }
        })
        .collect();
    let sidecar = CiSidecar {
        theta,
        chi: quantile.chi,
        draws,
        block_len: plan.block_len,
        w: plan.blocks,
        n,
        clipped_mass: quantile.clipped_mass,
        chi_se: quantile.standard_error(),
    };
    Ok(CiReport {
        intervals,
        sidecar,
        quantile,
    })
}
