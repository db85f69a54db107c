use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Error, Result};
use crate::model::law::gaussian_abs_norm;
use crate::model::{simulate_coupled, Family, InnovationLaw, ProcessSpec};
use crate::par::chunked_sum;
use crate::rng::{Purpose, RngContract};

/// Moment orders always tabulated next to the profile's own `q`.
pub const NORM_GRID: [f64; 5] = [2.0, 3.0, 4.0, 6.0, 8.0];
/// Draws used for the maximum-norm quantities of closed-form profiles.
pub const SUP_NORM_DRAWS: usize = 100_000;
const SUP_NORM_SEED: u64 = 0x5EED_0F_0DE9;
/// Default coupled horizon of Monte Carlo profiles for recursive families.
pub const DEFAULT_MC_HORIZON: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProfileSource {
    ClosedForm {
        sup_norm_draws: usize,
    },
    MonteCarlo {
        replications: usize,
        /// Lags simulated explicitly.
        horizon: usize,
        /// Lags beyond the horizon were filled from the linear lag weights.
        extrapolated: bool,
    },
}

/// Per-coordinate adjusted norms and their aggregates at one `(q, alpha)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormEntry {
    pub q: f64,
    pub alpha: f64,
    pub coord_norms: Vec<f64>,
    #[serde(rename = "Psi")]
    pub psi: f64,
    #[serde(rename = "Upsilon")]
    pub upsilon: f64,
    pub sup_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceProfile {
    pub q: f64,
    pub alpha: f64,
    pub p: usize,
    /// `delta[i][j]`.
    pub delta: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub delta_se: Option<Vec<Vec<f64>>>,
    /// `Delta[m][j] = sum_{i >= m} delta[i][j]`.
    #[serde(rename = "Delta")]
    pub tail: Vec<Vec<f64>>,
    pub coord_norms: Vec<f64>,
    #[serde(rename = "Psi_q_alpha")]
    pub psi_q_alpha: f64,
    #[serde(rename = "Upsilon_q_alpha")]
    pub upsilon_q_alpha: f64,
    pub omega: Vec<f64>,
    pub omega_se: Vec<f64>,
    #[serde(rename = "Omega")]
    pub omega_tail: Vec<f64>,
    pub sup_norm: f64,
    #[serde(rename = "Theta_q_alpha")]
    pub theta_q_alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub nu: Option<f64>,
    #[serde(rename = "Phi_psi_nu_alpha", skip_serializing_if = "Option::is_none", default)]
    pub phi_alpha: Option<f64>,
    #[serde(rename = "Phi_psi_nu_0", skip_serializing_if = "Option::is_none", default)]
    pub phi_0: Option<f64>,
    /// `sqrt(2) max_j sup_m (m+1)^a sum_{i>=m} |A_i[j,.]|_2` for `a = 0` and `a = alpha`
    /// (Gaussian linear and iid models), from which `Phi` follows for any `nu`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub phi_base: Option<[f64; 2]>,
    pub norm_table: Vec<NormEntry>,
    pub source: ProfileSource,
}

impl DependenceProfile {
    pub fn entry(&self, q: f64, alpha: f64) -> Result<&NormEntry> {
        self.norm_table
            .iter()
            .find(|e| e.q == q && e.alpha == alpha)
            .ok_or_else(|| {
                Error::Missing(format!(
                    "profile has no norms at (q, alpha) = ({q}, {alpha}); the moment may not exist"
                ))
            })
    }

    pub fn psi_at(&self, q: f64, alpha: f64) -> Result<f64> {
        self.entry(q, alpha).map(|e| e.psi)
    }

    pub fn upsilon_at(&self, q: f64, alpha: f64) -> Result<f64> {
        self.entry(q, alpha).map(|e| e.upsilon)
    }

    pub fn sup_norm_at(&self, q: f64, alpha: f64) -> Result<f64> {
        self.entry(q, alpha).map(|e| e.sup_norm)
    }

    /// `Phi_{psi_nu, a}` for `a` in `{0, alpha}`.
    pub fn phi_at(&self, nu: f64, a: f64) -> Result<f64> {
        let base = self.phi_base.ok_or_else(|| {
            Error::Missing("sub-exponential norm Phi unavailable (Gaussian closed-form profiles only)".into())
        })?;
        let b = if a == 0.0 {
            base[0]
        } else if a == self.alpha {
            base[1]
        } else {
            return Err(invalid_arg(format!("Phi is tabulated for alpha in {{0, {}}}, got {a}", self.alpha)));
        };
        Ok(b * gaussian_moment_growth(nu)?)
    }
}

/// `Delta_m = sum_{i >= m} delta_i` for `m = 0..len`.
pub fn tail_sums(delta: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; delta.len()];
    let mut acc = 0.0;
    for (i, d) in delta.iter().enumerate().rev() {
        acc += d;
        out[i] = acc;
    }
    out
}

/// `sup_{m >= 0} (m+1)^alpha Delta_m` over the stored tail sums. Entries past
/// the end are zero, which is exact for finite-lag models.
pub fn adjusted_norm(tail: &[f64], alpha: f64) -> Result<f64> {
    if tail.is_empty() {
        return Err(invalid_arg("adjusted norm of an empty tail sequence"));
    }
    if !(alpha >= 0.0) {
        return Err(invalid_arg(format!("alpha must be >= 0, got {alpha}")));
    }
    let mut best: f64 = 0.0;
    for (m, w) in tail.windows(2).enumerate() {
        if !(w[0].is_finite() && w[1] <= w[0] * (1.0 + 1e-12) + 1e-300) {
            return Err(invalid_arg(format!("tail sums must be finite and nonincreasing (m = {m})")));
        }
    }
    for (m, d) in tail.iter().enumerate() {
        if !d.is_finite() {
            return Err(invalid_arg("tail sums must be finite"));
        }
        best = best.max(((m + 1) as f64).powf(alpha) * d);
    }
    Ok(best)
}

/// `sup_{q >= 2} ||N(0,1)||_q / q^nu`, finite only for `nu >= 1/2`.
fn gaussian_moment_growth(nu: f64) -> Result<f64> {
    if !(nu >= 0.5) {
        return Err(invalid_arg(format!(
            "Gaussian moments grow like sqrt(q); Phi is infinite for nu = {nu} < 1/2"
        )));
    }
    // the ratio is smooth in q; a dense logarithmic grid locates the sup
    let steps = 4000;
    let mut best: f64 = 0.0;
    for k in 0..=steps {
        let q = 2.0 * (1e6f64 / 2.0).powf(k as f64 / steps as f64);
        best = best.max(gaussian_abs_norm(q) / q.powf(nu));
    }
    // limit of ||N||_q / sqrt(q) as q -> inf
    if nu == 0.5 {
        best = best.max((-1.0f64).exp().sqrt());
    }
    Ok(best)
}

/// One moment level of raw dependence measures before aggregation.
struct Level {
    q: f64,
    /// `H x p`
    delta: Array2<f64>,
    delta_se: Option<Array2<f64>>,
    omega: Vec<f64>,
    omega_se: Vec<f64>,
}

fn moment_grid(law: &InnovationLaw, q: f64) -> Vec<f64> {
    let mut grid: Vec<f64> = NORM_GRID.iter().copied().filter(|&g| law.has_moment(g)).collect();
    if !grid.contains(&q) {
        grid.push(q);
    }
    grid.sort_by(f64::total_cmp);
    grid
}

fn check_args(spec: &ProcessSpec, q: f64, alpha: f64) -> Result<()> {
    spec.validate()?;
    if !(q >= 2.0 && q.is_finite()) {
        return Err(invalid_arg(format!("moment order q must be >= 2, got {q}")));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(invalid_arg(format!("alpha must be >= 0, got {alpha}")));
    }
    if !spec.innovation.has_moment(q) {
        return Err(invalid_arg(format!(
            "moment of order q = {q} does not exist for {:?}",
            spec.innovation
        )));
    }
    Ok(())
}

fn assemble(
    q: f64,
    alpha: f64,
    p: usize,
    levels: Vec<Level>,
    source: ProfileSource,
    phi_base: Option<[f64; 2]>,
    nu: Option<f64>,
) -> Result<DependenceProfile> {
    let mut table = Vec::new();
    let mut main = None;
    for level in &levels {
        let tails: Vec<Vec<f64>> = (0..p).map(|j| tail_sums(&level.delta.column(j).to_vec())).collect();
        let omega_tail = tail_sums(&level.omega);
        let alphas: &[f64] = if alpha == 0.0 { &[0.0] } else { &[0.0, alpha] };
        for &a in alphas {
            let coord: Vec<f64> = tails.iter().map(|t| adjusted_norm(t, a)).collect::<Result<_>>()?;
            let psi = coord.iter().copied().fold(0.0, f64::max);
            let upsilon = coord.iter().map(|c| c.powf(level.q)).sum::<f64>().powf(1.0 / level.q);
            // the estimate of the maximum norm is projected onto [Psi, Upsilon],
            // an interval that contains the exact value
            let sup_norm = adjusted_norm(&omega_tail, a)?.clamp(psi, upsilon.max(psi));
            table.push(NormEntry {
                q: level.q,
                alpha: a,
                coord_norms: coord,
                psi,
                upsilon,
                sup_norm,
            });
        }
        if level.q == q {
            main = Some((level, tails, omega_tail));
        }
    }
    let (level, tails, omega_tail) = main.expect("q is in the grid");
    let entry = table
        .iter()
        .find(|e| e.q == q && e.alpha == alpha)
        .expect("main entry")
        .clone();
    let h = level.delta.nrows();
    let theta = entry.upsilon.min(entry.sup_norm * (p as f64).ln());
    let phi = match (phi_base, nu) {
        (Some(b), Some(nu)) => {
            let g = gaussian_moment_growth(nu)?;
            Some((b[1] * g, b[0] * g))
        }
        _ => None,
    };
    Ok(DependenceProfile {
        q,
        alpha,
        p,
        delta: (0..h).map(|i| level.delta.row(i).to_vec()).collect(),
        delta_se: level
            .delta_se
            .as_ref()
            .map(|se| (0..h).map(|i| se.row(i).to_vec()).collect()),
        tail: (0..h).map(|m| tails.iter().map(|t| t[m]).collect()).collect(),
        coord_norms: entry.coord_norms.clone(),
        psi_q_alpha: entry.psi,
        upsilon_q_alpha: entry.upsilon,
        omega: level.omega.clone(),
        omega_se: level.omega_se.clone(),
        omega_tail,
        sup_norm: entry.sup_norm,
        theta_q_alpha: theta,
        nu: phi.map(|_| nu.unwrap()),
        phi_alpha: phi.map(|v| v.0),
        phi_0: phi.map(|v| v.1),
        phi_base,
        norm_table: table,
        source,
    })
}

/// Exact dependence measures for iid and linear models.
///
/// Gaussian innovations admit any mixing bandwidth; Student-t innovations
/// require a diagonal mixing matrix (a single innovation per coordinate).
/// The maximum-norm quantities `omega` are estimated from
/// [`SUP_NORM_DRAWS`] coupled draws on a fixed stream.
pub fn closed_form_profile(spec: &ProcessSpec, q: f64, alpha: f64) -> Result<DependenceProfile> {
    let nu = matches!(spec.innovation, InnovationLaw::StandardGaussian).then_some(0.5);
    closed_form_profile_with_nu(spec, q, alpha, nu)
}

pub fn closed_form_profile_with_nu(
    spec: &ProcessSpec,
    q: f64,
    alpha: f64,
    nu: Option<f64>,
) -> Result<DependenceProfile> {
    check_args(spec, q, alpha)?;
    if spec.family == Family::ThresholdAr {
        return Err(Error::Unsupported(
            "no closed-form dependence measures for threshold-ar; use mc_profile".into(),
        ));
    }
    let law = spec.innovation;
    let p = spec.p;
    let (weights, b) = match spec.family {
        Family::Iid => (vec![1.0], Array2::eye(p)),
        _ => (spec.lag_weights(), spec.mixing_matrix()),
    };
    let diagonal = spec.family == Family::Iid || spec.is_cross_sectionally_independent();
    let row_norms: Vec<f64> = (0..p).map(|j| b.row(j).dot(&b.row(j)).sqrt()).collect();
    let grid = moment_grid(&law, q);

    // per-coordinate || (B (eps - eps'))_j ||_r
    let coord_scale = |r: f64| -> Result<Vec<f64>> {
        match law {
            InnovationLaw::StandardGaussian => {
                let g = std::f64::consts::SQRT_2 * gaussian_abs_norm(r);
                Ok(row_norms.iter().map(|s| s * g).collect())
            }
            InnovationLaw::StudentT { .. } if diagonal => {
                let c = law.coupled_difference_norm(r)?;
                Ok((0..p).map(|j| b[[j, j]].abs() * c).collect())
            }
            InnovationLaw::StudentT { .. } => Err(Error::Unsupported(
                "closed-form Student-t measures need a diagonal mixing matrix; use mc_profile".into(),
            )),
            InnovationLaw::SymmetricPareto { .. } => Err(Error::Unsupported(
                "no closed form for symmetric-pareto innovations; use mc_profile".into(),
            )),
        }
    };

    let scales: Vec<Vec<f64>> = grid.iter().map(|&r| coord_scale(r)).collect::<Result<_>>()?;
    let (sup_moments, sup_se) = sup_norm_moments(&law, &b, &grid)?;
    let mut levels = Vec::with_capacity(grid.len());
    for (g, &r) in grid.iter().enumerate() {
        let scale = &scales[g];
        let delta = Array2::from_shape_fn((weights.len(), p), |(i, j)| weights[i] * scale[j]);
        let base = sup_moments[g];
        levels.push(Level {
            q: r,
            delta,
            delta_se: None,
            omega: weights.iter().map(|w| w * base).collect(),
            omega_se: weights.iter().map(|w| w * sup_se[g]).collect(),
        });
    }

    let phi_base = match law {
        InnovationLaw::StandardGaussian => {
            let unit = |a: f64| -> Result<f64> {
                let tail = tail_sums(&weights);
                let s = adjusted_norm(&tail, a)?;
                Ok(std::f64::consts::SQRT_2 * s * row_norms.iter().copied().fold(0.0, f64::max))
            };
            Some([unit(0.0)?, unit(alpha)?])
        }
        _ => None,
    };
    let nu = if phi_base.is_some() { nu } else { None };
    assemble(
        q,
        alpha,
        p,
        levels,
        ProfileSource::ClosedForm {
            sup_norm_draws: SUP_NORM_DRAWS,
        },
        phi_base,
        nu,
    )
}

/// `|| |B (eps - eps')|_inf ||_r` for each `r` in `grid`, with standard errors.
fn sup_norm_moments(law: &InnovationLaw, b: &Array2<f64>, grid: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let p = b.nrows();
    if p == 1 {
        let vals: Vec<f64> = grid
            .iter()
            .map(|&r| law.coupled_difference_norm(r).map(|c| c * b[[0, 0]].abs()))
            .collect::<Result<_>>()?;
        return Ok((vals, vec![0.0; grid.len()]));
    }
    let sampler = law.sampler()?;
    let root = RngContract::new(SUP_NORM_SEED);
    let nq = grid.len();
    let bands: Vec<Vec<(usize, f64)>> = (0..p)
        .map(|j| (0..p).filter(|&l| b[[j, l]] != 0.0).map(|l| (l, b[[j, l]])).collect())
        .collect();
    let sums = chunked_sum(SUP_NORM_DRAWS, 2 * nq, |draw, acc| {
        let mut rng = root.derive(Purpose::Oracle, draw as u64).rng();
        let d: Vec<f64> = (0..p).map(|_| sampler.draw(&mut rng) - sampler.draw(&mut rng)).collect();
        let mut mx: f64 = 0.0;
        for band in &bands {
            let v: f64 = band.iter().map(|&(l, w)| w * d[l]).sum();
            mx = mx.max(v.abs());
        }
        for (g, &r) in grid.iter().enumerate() {
            let m = mx.powf(r);
            acc[2 * g] += m;
            acc[2 * g + 1] += m * m;
        }
    });
    Ok(moments_from_sums(&sums, grid, SUP_NORM_DRAWS))
}

/// `(mean^{1/r}, delta-method se)` from sums of `|x|^r` and `|x|^{2r}`.
fn moments_from_sums(sums: &[f64], grid: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let nf = n as f64;
    grid.iter()
        .enumerate()
        .map(|(g, &r)| norm_and_se(sums[2 * g], sums[2 * g + 1], r, nf))
        .unzip()
}

fn norm_and_se(s1: f64, s2: f64, r: f64, n: f64) -> (f64, f64) {
    let mean = s1 / n;
    if mean <= 0.0 {
        return (0.0, 0.0);
    }
    let var = ((s2 / n - mean * mean) * n / (n - 1.0)).max(0.0);
    let est = mean.powf(1.0 / r);
    // d/dm m^{1/r} = m^{1/r - 1} / r
    (est, est / (r * mean) * (var / n).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct McOptions {
    /// Coupled lags simulated; `None` picks `K + 1` (capped at 256) for the
    /// linear family, 1 for iid and [`DEFAULT_MC_HORIZON`] otherwise.
    pub horizon: Option<usize>,
}

pub const MIN_MC_REPLICATIONS: usize = 100;

pub fn mc_profile(spec: &ProcessSpec, q: f64, alpha: f64, replications: usize, rng: RngContract) -> Result<DependenceProfile> {
    mc_profile_with(spec, q, alpha, replications, rng, McOptions::default())
}

/// Monte Carlo dependence measures `(R^-1 sum_r |X_ij - X'_ij|^q)^{1/q}` from
/// coupled simulations, with delta-method standard errors.
pub fn mc_profile_with(
    spec: &ProcessSpec,
    q: f64,
    alpha: f64,
    replications: usize,
    rng: RngContract,
    opts: McOptions,
) -> Result<DependenceProfile> {
    check_args(spec, q, alpha)?;
    if replications < MIN_MC_REPLICATIONS {
        return Err(invalid_arg(format!(
            "mc_profile needs at least {MIN_MC_REPLICATIONS} replications, got {replications}"
        )));
    }
    let p = spec.p;
    let full = match spec.family {
        Family::Iid => 1,
        Family::Linear => spec.truncation + 1,
        Family::ThresholdAr => usize::MAX,
    };
    let horizon = match opts.horizon {
        Some(h) if h >= 1 => h.min(full),
        Some(_) => return Err(invalid_arg("horizon must be >= 1")),
        None => match spec.family {
            Family::Iid => 1,
            Family::Linear => full.min(256),
            Family::ThresholdAr => DEFAULT_MC_HORIZON,
        },
    };
    let grid = moment_grid(&spec.innovation, q);
    let nq = grid.len();
    // layout: per level g, [delta sums (H*p) x2, omega sums (H) x2]
    let stride = 2 * horizon * p + 2 * horizon;
    let sums = chunked_sum(replications, nq * stride, |r, acc| {
        let (x, y) = simulate_coupled(spec, horizon, rng.derive(Purpose::Replication, r as u64))
            .expect("validated spec");
        for i in 0..horizon {
            let mut mx: f64 = 0.0;
            for j in 0..p {
                let d = (x.data[[i, j]] - y.data[[i, j]]).abs();
                mx = mx.max(d);
                for (g, &qq) in grid.iter().enumerate() {
                    let v = d.powf(qq);
                    let base = g * stride + 2 * (i * p + j);
                    acc[base] += v;
                    acc[base + 1] += v * v;
                }
            }
            for (g, &qq) in grid.iter().enumerate() {
                let v = mx.powf(qq);
                let base = g * stride + 2 * horizon * p + 2 * i;
                acc[base] += v;
                acc[base + 1] += v * v;
            }
        }
    });

    let n = replications as f64;
    let extrapolate = spec.family == Family::Linear && horizon < full;
    let rows = if extrapolate { full } else { horizon };
    let weights = spec.lag_weights();
    let mut levels = Vec::with_capacity(nq);
    for (g, &qq) in grid.iter().enumerate() {
        let mut delta = Array2::zeros((rows, p));
        let mut delta_se = Array2::zeros((rows, p));
        let mut omega = vec![0.0; rows];
        let mut omega_se = vec![0.0; rows];
        for i in 0..horizon {
            for j in 0..p {
                let base = g * stride + 2 * (i * p + j);
                let (e, se) = norm_and_se(sums[base], sums[base + 1], qq, n);
                delta[[i, j]] = e;
                delta_se[[i, j]] = se;
            }
            let base = g * stride + 2 * horizon * p + 2 * i;
            (omega[i], omega_se[i]) = norm_and_se(sums[base], sums[base + 1], qq, n);
        }
        // lags past the horizon scale with the lag weights: delta_i = a_i ||(B(eps-eps'))_j||_q
        let last = horizon - 1;
        for i in horizon..rows {
            let ratio = weights[i] / weights[last];
            for j in 0..p {
                delta[[i, j]] = delta[[last, j]] * ratio;
                delta_se[[i, j]] = delta_se[[last, j]] * ratio;
            }
            omega[i] = omega[last] * ratio;
            omega_se[i] = omega_se[last] * ratio;
        }
        levels.push(Level {
            q: qq,
            delta,
            delta_se: Some(delta_se),
            omega,
            omega_se,
        });
    }
    assemble(
        q,
        alpha,
        p,
        levels,
        ProfileSource::MonteCarlo {
            replications,
            horizon,
            extrapolated: extrapolate,
        },
        None,
        None,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adjusted_norm_examples() {
        let geo: Vec<f64> = (0..200).map(|m| 0.5f64.powi(m) / 0.5).collect();
        assert!((adjusted_norm(&geo, 0.0).unwrap() - 2.0).abs() < 1e-15);
        let brute = (0..=100).map(|m| (m + 1) as f64 * 0.5f64.powi(m) * 2.0).fold(0.0, f64::max);
        assert!((adjusted_norm(&geo, 1.0).unwrap() - brute).abs() < 1e-15);
        assert!((brute - 2.0).abs() < 1e-15);
        for alpha in [0.0, 0.3, 1.0, 2.5] {
            let exact: Vec<f64> = (0..500).map(|m| ((m + 1) as f64).powf(-alpha)).collect();
            assert!((adjusted_norm(&exact, alpha).unwrap() - 1.0).abs() < 1e-12);
        }
        assert!(adjusted_norm(&[], 1.0).is_err());
        assert!(adjusted_norm(&[1.0, 2.0], 1.0).is_err());
    }

    #[test]
    fn iid_profile() {
        let spec = ProcessSpec::iid(3, InnovationLaw::StandardGaussian);
        let prof = closed_form_profile(&spec, 4.0, 1.0).unwrap();
        let c = std::f64::consts::SQRT_2 * gaussian_abs_norm(4.0);
        assert_eq!(prof.delta.len(), 1);
        assert!((prof.delta[0][1] - c).abs() < 1e-14);
        assert!((prof.psi_q_alpha - c).abs() < 1e-14);
        // ||X_ij||_q <= ||X_.j||_{q,0} <= 2 ||X_ij||_q
        let x = gaussian_abs_norm(4.0);
        let norm0 = prof.psi_at(4.0, 0.0).unwrap();
        assert!(x <= norm0 && norm0 <= 2.0 * x);
    }

    #[test]
    fn linear_gaussian_delta_and_tail() {
        let spec = ProcessSpec::linear(2, 1.0, 200, 0, 0.0);
        let prof = closed_form_profile(&spec, 2.0, 1.0).unwrap();
        for i in [0usize, 1, 7, 200] {
            let want = ((i + 1) as f64).powi(-2) * std::f64::consts::SQRT_2;
            assert!((prof.delta[i][0] - want).abs() < 1e-13 * want);
        }
        for m in [0usize, 3, 50, 200] {
            let mut direct = 0.0;
            for k in m..=200 {
                direct += ((k + 1) as f64).powi(-2);
            }
            let want = std::f64::consts::SQRT_2 * direct;
            assert!((prof.tail[m][1] - want).abs() < 1e-13, "m={m}");
        }
    }

    #[test]
    fn sandwich_and_theta() {
        for spec in [
            ProcessSpec::linear(6, 1.5, 40, 2, 0.6),
            ProcessSpec::linear(4, 0.5, 40, 0, 0.0).with_innovation(InnovationLaw::StudentT { df: 9.0 }),
            ProcessSpec::iid(5, InnovationLaw::StandardGaussian),
        ] {
            let prof = closed_form_profile(&spec, 4.0, spec.alpha).unwrap();
            for e in &prof.norm_table {
                assert!(e.psi <= e.sup_norm && e.sup_norm <= e.upsilon, "{e:?}");
            }
            let want = prof.upsilon_q_alpha.min(prof.sup_norm * (spec.p as f64).ln());
            assert_eq!(prof.theta_q_alpha, want);
        }
    }

    #[test]
    fn moment_guard_and_unsupported() {
        let t = ProcessSpec::iid(2, InnovationLaw::StudentT { df: 4.0 });
        assert!(closed_form_profile(&t, 4.0, 0.0).is_err());
        let banded_t = ProcessSpec::linear(3, 1.0, 5, 1, 0.5).with_innovation(InnovationLaw::StudentT { df: 9.0 });
        assert!(matches!(closed_form_profile(&banded_t, 2.0, 1.0), Err(Error::Unsupported(_))));
        let tar = ProcessSpec::threshold_ar(1, 0.5, 0.5);
        assert!(matches!(closed_form_profile(&tar, 2.0, 1.0), Err(Error::Unsupported(_))));
        assert!(mc_profile(&tar, 2.0, 1.0, 50, RngContract::new(1)).is_err());
        assert!(mc_profile(&t, 4.0, 0.0, 200, RngContract::new(1)).is_err());
    }

    #[test]
    fn mc_iid_gaussian_q2() {
        let spec = ProcessSpec::iid(3, InnovationLaw::StandardGaussian);
        let prof = mc_profile(&spec, 2.0, 0.0, 20_000, RngContract::new(4)).unwrap();
        let se = prof.delta_se.as_ref().unwrap();
        for j in 0..3 {
            assert!((prof.delta[0][j] - 2f64.sqrt()).abs() < 3.0 * se[0][j]);
        }
    }

    #[test]
    fn mc_threshold_ar_contracts() {
        let spec = ProcessSpec::threshold_ar(1, 0.5, 0.5);
        let prof = mc_profile_with(&spec, 2.0, 0.5, 2000, RngContract::new(6), McOptions { horizon: Some(20) }).unwrap();
        let xs: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let ys: Vec<f64> = (0..20).map(|i| prof.delta[i][0].ln()).collect();
        let slope = crate::stats::ols_slope(&xs, &ys);
        assert!((slope - 0.5f64.ln()).abs() < 0.1, "{slope}");
    }

    #[test]
    fn mc_matches_closed_form_linear() {
        let spec = ProcessSpec::linear(3, 1.0, 12, 1, 0.5);
        let exact = closed_form_profile(&spec, 4.0, 1.0).unwrap();
        let mc = mc_profile(&spec, 4.0, 1.0, 4000, RngContract::new(10)).unwrap();
        let se = mc.delta_se.as_ref().unwrap();
        for i in 0..=12 {
            for j in 0..3 {
                assert!((mc.delta[i][j] - exact.delta[i][j]).abs() < 3.0 * se[i][j] + 1e-12);
            }
        }
    }

    #[test]
    fn mc_extrapolates_linear_tail() {
        let spec = ProcessSpec::linear(2, 2.0, 40, 0, 0.0);
        let mc = mc_profile_with(&spec, 2.0, 2.0, 500, RngContract::new(3), McOptions { horizon: Some(5) }).unwrap();
        assert_eq!(mc.delta.len(), 41);
        let r = mc.delta[40][0] / mc.delta[4][0];
        assert!((r - (5.0f64 / 41.0).powi(3)).abs() < 1e-12);
    }

    #[test]
    fn phi_for_gaussian() {
        let spec = ProcessSpec::iid(2, InnovationLaw::StandardGaussian);
        let prof = closed_form_profile(&spec, 4.0, 1.0).unwrap();
        // sup_q sqrt(2) ||N||_q / sqrt(q) is attained at q = 2: sqrt(2) * 1 / sqrt(2)
        assert!((prof.phi_at(0.5, 0.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(prof.phi_at(0.25, 0.0).is_err());
        let t = ProcessSpec::iid(2, InnovationLaw::StudentT { df: 30.0 });
        assert!(closed_form_profile(&t, 4.0, 1.0).unwrap().phi_at(0.5, 0.0).is_err());
    }

    #[test]
    fn json_field_names() {
        let prof = closed_form_profile(&ProcessSpec::iid(2, InnovationLaw::StandardGaussian), 4.0, 1.0).unwrap();
        let v = serde_json::to_value(&prof).unwrap();
        for key in ["Psi_q_alpha", "Upsilon_q_alpha", "Theta_q_alpha", "Delta", "Omega", "Phi_psi_nu_alpha"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        let back: DependenceProfile = serde_json::from_value(v).unwrap();
        assert_eq!(back, prof);
    }
}
