//! Batched-mean long-run covariance estimation.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::depmeasure::DependenceProfile;
use crate::error::{invalid_arg, Error, Result};
use crate::model::{Family, Panel, ProcessSpec};

/// Split of `1..=n` into `w = floor(n / M)` consecutive blocks of length `M`.
/// Block `b` (1-based) covers `(b-1)M+1 ..= bM`; the last `n - wM` indices are unused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPlan {
    pub n: usize,
    pub block_len: usize,
    pub blocks: usize,
}

impl BlockPlan {
    pub fn new(n: usize, block_len: usize) -> Result<Self> {
        if block_len < 1 || block_len > n {
            return Err(invalid_arg(format!(
                "block length M must satisfy 1 <= M <= n, got M = {block_len}, n = {n}"
            )));
        }
        Ok(Self {
            n,
            block_len,
            blocks: n / block_len,
        })
    }

    /// `M = floor(n^{1/3})`.
    pub fn default_for(n: usize) -> Result<Self> {
        Self::new(n, default_block_len(n))
    }

    pub fn used(&self) -> usize {
        self.blocks * self.block_len
    }

    pub fn unused(&self) -> usize {
        self.n - self.used()
    }

    /// Zero-based row ranges of the blocks.
    pub fn ranges(&self) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        (0..self.blocks).map(move |b| b * self.block_len..(b + 1) * self.block_len)
    }
}

pub fn plan_blocks(n: usize, block_len: usize) -> Result<BlockPlan> {
    BlockPlan::new(n, block_len)
}

/// `floor(n^{1/3})`, guarded against floating-point undershoot at perfect cubes.
pub fn default_block_len(n: usize) -> usize {
    let mut m = (n as f64).cbrt().floor() as usize;
    while (m + 1).pow(3) <= n {
        m += 1;
    }
    while m > 1 && m.pow(3) > n {
        m -= 1;
    }
    m.max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimateKind {
    /// Known zero mean.
    Hat,
    /// Mean-subtracted.
    Tilde,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LongRunEstimate {
    pub sigma: Array2<f64>,
    pub kind: EstimateKind,
    pub plan: BlockPlan,
    /// `sqrt(diag(sigma))`.
    pub diag_scale: Array1<f64>,
    /// Mean of the first `wM` observations (tilde estimates only).
    pub mean: Option<Array1<f64>>,
}

/// Metadata written next to an exported estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateSidecar {
    pub kind: EstimateKind,
    pub n: usize,
    pub p: usize,
    #[serde(rename = "M")]
    pub block_len: usize,
    pub w: usize,
    pub unused: usize,
    pub diag_scale: Vec<f64>,
}

impl LongRunEstimate {
    pub fn p(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn sidecar(&self) -> EstimateSidecar {
        EstimateSidecar {
            kind: self.kind,
            n: self.plan.n,
            p: self.p(),
            block_len: self.plan.block_len,
            w: self.plan.blocks,
            unused: self.plan.unused(),
            diag_scale: self.diag_scale.to_vec(),
        }
    }

    /// Rescales to the correlation matrix `D^-1 sigma D^-1`.
    pub fn correlation(&self) -> Result<Array2<f64>> {
        check_diagonal(&self.sigma)?;
        let d = &self.diag_scale;
        let mut r = self.sigma.clone();
        for ((j, k), v) in r.indexed_iter_mut() {
            *v = if j == k { 1.0 } else { *v / (d[j] * d[k]) };
        }
        Ok(r)
    }
}

/// Smallest admissible diagonal entry before the estimate is treated as degenerate.
pub const MIN_DIAGONAL: f64 = 1e-10;

pub(crate) fn check_diagonal(sigma: &Array2<f64>) -> Result<()> {
    for (j, v) in sigma.diag().iter().enumerate() {
        if !(*v >= MIN_DIAGONAL) {
            return Err(Error::DegenerateVariance(format!(
                "long-run variance of coordinate {} is {v:e} < {MIN_DIAGONAL:e}",
                j + 1
            )));
        }
    }
    Ok(())
}

/// `(Mw)^-1 sum_b Y_b Y_b^T` with `Y_b` the block sums. Assumes mean zero.
pub fn sigma_hat(panel: &Panel, plan: &BlockPlan) -> Result<LongRunEstimate> {
    check_plan(panel, plan)?;
    let y = block_sums(panel.data.view(), plan);
    Ok(finish(y, plan, EstimateKind::Hat, None))
}

/// As [`sigma_hat`] with block sums centred by `M` times the mean of the first `wM` rows.
pub fn sigma_tilde(panel: &Panel, plan: &BlockPlan) -> Result<LongRunEstimate> {
    check_plan(panel, plan)?;
    sigma_tilde_data(panel.data.view(), plan)
}

pub(crate) fn sigma_tilde_data(data: ArrayView2<f64>, plan: &BlockPlan) -> Result<LongRunEstimate> {
    if plan.n != data.nrows() {
        return Err(plan_mismatch(plan.n, data.nrows()));
    }
    let mut y = block_sums(data, plan);
    let mean = y.sum_axis(Axis(0)) / plan.used() as f64;
    let shift = &mean * plan.block_len as f64;
    for mut row in y.rows_mut() {
        row -= &shift;
    }
    Ok(finish(y, plan, EstimateKind::Tilde, Some(mean)))
}

fn check_plan(panel: &Panel, plan: &BlockPlan) -> Result<()> {
    if plan.n != panel.n() {
        return Err(plan_mismatch(plan.n, panel.n()));
    }
    Ok(())
}

fn plan_mismatch(plan_n: usize, n: usize) -> Error {
    invalid_arg(format!("block plan is for n = {plan_n} but the panel has {n} rows"))
}

fn block_sums(data: ArrayView2<f64>, plan: &BlockPlan) -> Array2<f64> {
    let mut y = Array2::zeros((plan.blocks, data.ncols()));
    for (b, range) in plan.ranges().enumerate() {
        let mut row = y.row_mut(b);
        for i in range {
            row += &data.row(i);
        }
    }
    y
}

fn finish(y: Array2<f64>, plan: &BlockPlan, kind: EstimateKind, mean: Option<Array1<f64>>) -> LongRunEstimate {
    let mut sigma = y.t().dot(&y) / plan.used() as f64;
    symmetrize(&mut sigma);
    let diag_scale = sigma.diag().mapv(|v| v.max(0.0).sqrt());
    LongRunEstimate {
        sigma,
        kind,
        plan: *plan,
        diag_scale,
        mean,
    }
}

pub(crate) fn symmetrize(m: &mut Array2<f64>) {
    let p = m.nrows();
    for j in 0..p {
        for k in j + 1..p {
            let v = 0.5 * (m[[j, k]] + m[[k, j]]);
            m[[j, k]] = v;
            m[[k, j]] = v;
        }
    }
}

fn require_closed_form(spec: &ProcessSpec) -> Result<()> {
    spec.validate()?;
    if spec.family == Family::ThresholdAr {
        return Err(Error::Unsupported(
            "no closed-form long-run covariance for threshold-ar; use the long-path oracle in experiments".into(),
        ));
    }
    Ok(())
}

/// Scalar autocovariance factor `c_k` with `Gamma(k) = c_k B B^T`.
fn lag_factor(spec: &ProcessSpec, k: usize) -> f64 {
    let var = spec.innovation.variance();
    match spec.family {
        Family::Iid => {
            if k == 0 {
                var
            } else {
                0.0
            }
        }
        _ => {
            let a = spec.lag_weights();
            if k >= a.len() {
                return 0.0;
            }
            var * a.iter().zip(&a[k..]).map(|(x, y)| x * y).sum::<f64>()
        }
    }
}

fn mixing_gram(spec: &ProcessSpec) -> Array2<f64> {
    match spec.family {
        Family::Iid => Array2::eye(spec.p),
        _ => {
            let b = spec.mixing_matrix();
            b.dot(&b.t())
        }
    }
}

/// Autocovariance `Gamma(k) = Cov(X_{i+k}, X_i)` (symmetric here, so `Gamma(-k) = Gamma(k)`).
pub fn autocovariance(spec: &ProcessSpec, k: usize) -> Result<Array2<f64>> {
    require_closed_form(spec)?;
    Ok(mixing_gram(spec) * lag_factor(spec, k))
}

/// `Sigma = sum_k Gamma(k) = var(eps) (sum_k a_k)^2 B B^T`.
pub fn true_sigma(spec: &ProcessSpec) -> Result<Array2<f64>> {
    require_closed_form(spec)?;
    let var = spec.innovation.variance();
    let scale = match spec.family {
        Family::Iid => var,
        _ => {
            let s: f64 = spec.lag_weights().iter().sum();
            var * s * s
        }
    };
    Ok(mixing_gram(spec) * scale)
}

/// `Sigma_M = sum_{|i| < M} (1 - |i|/M) Gamma(i)`, the mean of `sigma_hat` under zero mean.
pub fn sigma_m_target(spec: &ProcessSpec, block_len: usize) -> Result<Array2<f64>> {
    require_closed_form(spec)?;
    if block_len == 0 {
        return Err(invalid_arg("block length M must be >= 1"));
    }
    let m = block_len as f64;
    let mut c = lag_factor(spec, 0);
    for i in 1..block_len {
        c += 2.0 * (1.0 - i as f64 / m) * lag_factor(spec, i);
    }
    Ok(mixing_gram(spec) * c)
}

/// Dependence quantities entering the rate of `|Sigma~ - Sigma|_inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateInputs {
    pub q: f64,
    pub alpha: f64,
    pub upsilon_q_alpha: f64,
    pub psi_4_alpha: f64,
    pub psi_q_alpha: f64,
    pub psi_2_0: f64,
    pub psi_2_alpha: f64,
    /// `Phi_{psi_nu, 0}` and `nu`, for the sub-exponential rate.
    pub phi_0: Option<f64>,
    pub nu: Option<f64>,
}

impl RateInputs {
    pub fn from_profile(profile: &DependenceProfile, nu: Option<f64>) -> Result<Self> {
        let (q, a) = (profile.q, profile.alpha);
        let phi_0 = match nu {
            Some(nu) => Some(profile.phi_at(nu, 0.0)?),
            None => None,
        };
        Ok(Self {
            q,
            alpha: a,
            upsilon_q_alpha: profile.upsilon_q_alpha,
            psi_4_alpha: profile.psi_at(4.0, a)?,
            psi_q_alpha: profile.psi_q_alpha,
            psi_2_0: profile.psi_at(2.0, 0.0)?,
            psi_2_alpha: profile.psi_at(2.0, a)?,
            phi_0,
            nu,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub r_n: f64,
    pub v_m: f64,
    /// `None` for the sub-exponential rate, which does not involve it.
    pub f_alpha: Option<f64>,
    pub variance_term: f64,
    pub bias_term: f64,
    #[serde(rename = "M")]
    pub block_len: usize,
    pub w: usize,
}

/// Bias order `v(M)`: `1/M` for `alpha > 1`, `log M / M` at `alpha = 1`, `M^-alpha` below.
pub fn v_m(alpha: f64, m: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(invalid_arg(format!("v(M) needs alpha > 0, got {alpha}")));
    }
    if !(m >= 1.0) {
        return Err(invalid_arg(format!("v(M) needs M >= 1, got {m}")));
    }
    Ok(if alpha > 1.0 {
        1.0 / m
    } else if alpha == 1.0 {
        m.ln() / m
    } else {
        m.powf(-alpha)
    })
}

/// Three-branch `F_alpha` (`wM`, `w M^{q/2 - alpha q/2}`, `w^{q/4 - alpha q/2} M^{q/2 - alpha q/2}`).
pub fn f_alpha(q: f64, alpha: f64, w: usize, block_len: usize) -> Result<f64> {
    let (w, m) = (w as f64, block_len as f64);
    let upper = 1.0 - 2.0 / q;
    let lower = 0.5 - 2.0 / q;
    if alpha == upper || alpha == lower {
        return Err(Error::RegimeBoundary(format!(
            "F_alpha is undefined at alpha = {alpha} (boundaries 1 - 2/q = {upper}, 1/2 - 2/q = {lower})"
        )));
    }
    let e = q / 2.0 - alpha * q / 2.0;
    Ok(if alpha > upper {
        w * m
    } else if alpha > lower {
        w * m.powf(e)
    } else {
        w.powf(q / 4.0 - alpha * q / 2.0) * m.powf(e)
    })
}

pub fn theoretical_rate(
    profile: &DependenceProfile,
    n: usize,
    p: usize,
    block_len: usize,
    nu: Option<f64>,
) -> Result<RateReport> {
    rate_from_inputs(&RateInputs::from_profile(profile, nu)?, n, p, block_len)
}

/// `r_n` from the polynomial-moment bound or, when `phi_0` and `nu` are set,
/// the sub-exponential one with `gamma = 1/(1 + 2 nu)`.
pub fn rate_from_inputs(inp: &RateInputs, n: usize, p: usize, block_len: usize) -> Result<RateReport> {
    let plan = BlockPlan::new(n, block_len)?;
    let (nf, pf) = (n as f64, p as f64);
    let w = plan.blocks as f64;
    let m = block_len as f64;
    let v = v_m(inp.alpha, m)?;
    let bias = inp.psi_2_0 * inp.psi_2_alpha * v;
    let (variance_term, f) = match (inp.phi_0, inp.nu) {
        (Some(phi0), Some(nu)) => {
            let gamma = 1.0 / (1.0 + 2.0 * nu);
            (w.sqrt() * m * phi0 * phi0 * pf.ln().powf(1.0 / gamma) / nf, None)
        }
        _ => {
            if !(inp.q > 4.0) {
                return Err(invalid_arg(format!("polynomial rate needs q > 4, got {}", inp.q)));
            }
            let f = f_alpha(inp.q, inp.alpha, plan.blocks, block_len)?;
            let q = inp.q;
            let t1 = pf.powf(2.0 / q) * f.powf(2.0 / q) * inp.upsilon_q_alpha.powi(2);
            let t2 = w.sqrt() * m * inp.psi_4_alpha.powi(2) * pf.ln().sqrt();
            let t3 = w.sqrt() * m * inp.psi_q_alpha.powi(2);
            (t1.max(t2).max(t3) / nf, Some(f))
        }
    };
    Ok(RateReport {
        r_n: variance_term + bias,
        v_m: v,
        f_alpha: f,
        variance_term,
        bias_term: bias,
        block_len,
        w: plan.blocks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{simulate, InnovationLaw};
    use crate::rng::RngContract;
    use ndarray::array;

    fn panel(data: Array2<f64>) -> Panel {
        Panel::from_data(data).unwrap()
    }

    #[test]
    fn block_plans() {
        let p = plan_blocks(10, 3).unwrap();
        assert_eq!((p.blocks, p.unused()), (3, 1));
        assert_eq!(p.ranges().collect::<Vec<_>>(), vec![0..3, 3..6, 6..9]);
        let single = plan_blocks(8, 8).unwrap();
        assert_eq!(single.blocks, 1);
        let big = BlockPlan::default_for(10_000).unwrap();
        assert_eq!((big.block_len, big.blocks), (21, 476));
        assert!(plan_blocks(5, 6).is_err());
        assert!(plan_blocks(5, 0).is_err());
        assert_eq!(default_block_len(1000), 10);
        assert_eq!(default_block_len(999), 9);
    }

    #[test]
    fn zero_and_single_block() {
        let z = panel(Array2::zeros((9, 3)));
        let plan = plan_blocks(9, 2).unwrap();
        assert!(sigma_hat(&z, &plan).unwrap().sigma.iter().all(|v| *v == 0.0));
        let x = panel(array![[1.0, 2.0], [3.0, -1.0], [0.5, 0.5]]);
        let est = sigma_hat(&x, &plan_blocks(3, 3).unwrap()).unwrap();
        let s = array![4.5, 1.5];
        for j in 0..2 {
            for k in 0..2 {
                assert!((est.sigma[[j, k]] - s[j] * s[k] / 3.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn constant_rows_vanish_after_centering() {
        let c = panel(Array2::from_shape_fn((12, 3), |(_, j)| j as f64 + 0.5));
        let est = sigma_tilde(&c, &plan_blocks(12, 4).unwrap()).unwrap();
        assert!(est.sigma.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn hat_minus_tilde_identity_and_shift_invariance() {
        let spec = ProcessSpec::linear(4, 1.0, 10, 1, 0.5);
        let x = simulate(&spec, 103, RngContract::new(5)).unwrap();
        let plan = plan_blocks(103, 7).unwrap();
        let hat = sigma_hat(&x, &plan).unwrap();
        let tilde = sigma_tilde(&x, &plan).unwrap();
        let xbar = tilde.mean.clone().unwrap();
        for j in 0..4 {
            for k in 0..4 {
                let want = 7.0 * xbar[j] * xbar[k];
                assert!((hat.sigma[[j, k]] - tilde.sigma[[j, k]] - want).abs() < 1e-10);
            }
        }
        let mu = array![3.0, -1.0, 0.0, 10.0];
        let shifted = panel(&x.data + &mu);
        let t2 = sigma_tilde(&shifted, &plan).unwrap();
        assert!((&t2.sigma - &tilde.sigma).iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn iid_hat_is_unbiased_for_identity() {
        let spec = ProcessSpec::iid(3, InnovationLaw::StandardGaussian);
        let n = 100_000;
        let x = simulate(&spec, n, RngContract::new(17)).unwrap();
        let plan = plan_blocks(n, 10).unwrap();
        let est = sigma_hat(&x, &plan).unwrap();
        // each entry averages w = 10^4 iid block products: sd 1 (off-diagonal), sqrt 2 (diagonal)
        let se_diag = 2f64.sqrt() / (plan.blocks as f64).sqrt();
        for ((j, k), v) in est.sigma.indexed_iter() {
            let target = if j == k { 1.0 } else { 0.0 };
            assert!((v - target).abs() < 4.0 * se_diag, "({j},{k}) = {v}");
        }
    }

    #[test]
    fn estimates_are_psd() {
        let spec = ProcessSpec::linear(6, 0.8, 30, 2, 0.7);
        let x = simulate(&spec, 80, RngContract::new(3)).unwrap();
        for m in [1, 5, 13, 80] {
            let est = sigma_tilde(&x, &plan_blocks(80, m).unwrap()).unwrap();
            let s = nalgebra::DMatrix::from_fn(6, 6, |j, k| est.sigma[[j, k]]);
            let min = s.clone().symmetric_eigen().eigenvalues.min();
            assert!(min >= -1e-10 * s.trace(), "M={m} min eig {min}");
        }
    }

    #[test]
    fn closed_form_targets() {
        assert_eq!(true_sigma(&ProcessSpec::iid(3, InnovationLaw::StandardGaussian)).unwrap(), Array2::<f64>::eye(3));
        let k0 = ProcessSpec::linear(3, 1.0, 0, 0, 0.0);
        assert_eq!(true_sigma(&k0).unwrap(), Array2::<f64>::eye(3));
        // alpha = 0 makes a_1 = 1/2: A_0 = Id, A_1 = 0.5 Id
        let k1 = ProcessSpec::linear(2, 0.0, 1, 0, 0.0);
        let s = true_sigma(&k1).unwrap();
        assert!((&s - &(Array2::<f64>::eye(2) * 2.25)).iter().all(|v| v.abs() < 1e-15));

        let iid = ProcessSpec::iid(2, InnovationLaw::StudentT { df: 5.0 });
        for m in [1, 4, 50] {
            assert_eq!(sigma_m_target(&iid, m).unwrap(), Array2::<f64>::eye(2) * (5.0 / 3.0));
        }
        assert_eq!(sigma_m_target(&k1, 1).unwrap(), autocovariance(&k1, 0).unwrap());
        // brute force: Gamma(0) = A0 A0' + A1 A1', Gamma(1) = A1 A0'
        let a0 = Array2::<f64>::eye(2);
        let a1 = Array2::<f64>::eye(2) * 0.5;
        let g0 = a0.dot(&a0.t()) + a1.dot(&a1.t());
        let g1 = a1.dot(&a0.t());
        let want = &g0 + &((&g1 + &g1.t()) * 0.9);
        let got = sigma_m_target(&k1, 10).unwrap();
        assert!((&got - &want).iter().all(|v| v.abs() < 1e-15));
        assert!(true_sigma(&ProcessSpec::threshold_ar(1, 0.5, 0.5)).is_err());
    }

    #[test]
    fn rate_branches() {
        assert_eq!(v_m(2.0, 100.0).unwrap(), 0.01);
        let e2 = std::f64::consts::E.powi(2);
        assert!((v_m(1.0, e2).unwrap() - 2.0 / e2).abs() < 1e-15);
        assert_eq!(v_m(0.5, 16.0).unwrap(), 0.25);
        assert_eq!(f_alpha(8.0, 2.0, 100, 50).unwrap(), 5000.0);
        assert!((f_alpha(8.0, 0.5, 100, 50).unwrap() - 100.0 * 50f64.powf(2.0)).abs() < 1e-9);
        assert!((f_alpha(8.0, 0.1, 100, 50).unwrap() - 100f64.powf(1.6) * 50f64.powf(3.6)).abs() < 1e-6);
        assert!(matches!(f_alpha(8.0, 0.75, 10, 10), Err(Error::RegimeBoundary(_))));
    }

    #[test]
    fn rate_formula_by_hand() {
        let inp = RateInputs {
            q: 8.0,
            alpha: 2.0,
            upsilon_q_alpha: 1.5,
            psi_4_alpha: 1.2,
            psi_q_alpha: 1.3,
            psi_2_0: 1.1,
            psi_2_alpha: 1.0,
            phi_0: None,
            nu: None,
        };
        let r = rate_from_inputs(&inp, 1000, 20, 10).unwrap();
        let (w, m, p, n) = (100.0f64, 10.0f64, 20.0f64, 1000.0f64);
        let t1 = p.powf(0.25) * (w * m).powf(0.25) * 2.25;
        let t2 = w.sqrt() * m * 1.44 * p.ln().sqrt();
        let t3 = w.sqrt() * m * 1.69;
        let want = t1.max(t2).max(t3) / n + 1.1 * 0.1;
        assert!((r.r_n - want).abs() < 1e-12);
        let sub = RateInputs { phi_0: Some(2.0), nu: Some(0.5), ..inp };
        let r = rate_from_inputs(&sub, 1000, 20, 10).unwrap();
        let want = w.sqrt() * m * 4.0 * p.ln().powf(2.0) / n + 0.11;
        assert!((r.r_n - want).abs() < 1e-12);
    }
}
