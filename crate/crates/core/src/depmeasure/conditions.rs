//! Explicit quantities and sufficient conditions for the Gaussian
//! approximation of the normalized maximum. All logarithms are natural.

use serde::{Deserialize, Serialize};

use super::profile::DependenceProfile;
use crate::error::{invalid_arg, Error, Result};
use crate::longrun::{default_block_len, f_alpha};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// `alpha > 1/2 - 1/q`
    Weaker,
    /// `alpha < 1/2 - 1/q`
    Stronger,
    SubExponential,
}

/// Scalar inputs of the condition formulas. `n` and `p` are real so the
/// formulas can be evaluated at non-integer plug-in values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionInputs {
    pub n: f64,
    pub p: f64,
    pub q: f64,
    pub alpha: f64,
    pub psi_2_alpha: f64,
    pub psi_2_0: f64,
    pub psi_3_0: f64,
    pub psi_4_0: f64,
    pub theta: f64,
    pub nu: Option<f64>,
    pub phi_alpha: Option<f64>,
    pub phi_0: Option<f64>,
}

impl ConditionInputs {
    pub fn from_profile(profile: &DependenceProfile, n: usize, p: usize, nu: Option<f64>) -> Result<Self> {
        let a = profile.alpha;
        let (phi_alpha, phi_0) = match nu {
            Some(nu) => (Some(profile.phi_at(nu, a)?), Some(profile.phi_at(nu, 0.0)?)),
            None => (None, None),
        };
        Ok(Self {
            n: n as f64,
            p: p as f64,
            q: profile.q,
            alpha: a,
            psi_2_alpha: profile.psi_at(2.0, a)?,
            psi_2_0: profile.psi_at(2.0, 0.0)?,
            psi_3_0: profile.psi_at(3.0, 0.0)?,
            psi_4_0: profile.psi_at(4.0, 0.0)?,
            theta: profile.theta_q_alpha,
            nu,
            phi_alpha,
            phi_0,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionValue {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    /// `lhs < rhs`. The conditions are asymptotic (`o(.)`); at a fixed `(n, p)`
    /// a ratio below one is the only checkable proxy.
    pub satisfied: bool,
}

impl ConditionValue {
    fn new(name: &str, lhs: f64, rhs: f64) -> Self {
        let ratio = lhs / rhs;
        Self {
            name: name.into(),
            lhs,
            rhs,
            ratio,
            satisfied: ratio < 1.0,
        }
    }
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GAConditionReport {
    pub n: f64,
    pub p: f64,
    pub q: f64,
    pub alpha: f64,
    pub nu: Option<f64>,
    pub regime: Regime,
    pub L1: Option<f64>,
    pub L2: f64,
    pub L3: Option<f64>,
    pub W1: f64,
    pub W2: f64,
    pub W3: Option<f64>,
    pub W4: Option<f64>,
    pub N1: f64,
    pub N2: f64,
    pub N3: Option<f64>,
    pub N4: Option<f64>,
    /// At the default block length `M = floor(n^{1/3})`.
    pub F_alpha: Option<f64>,
    pub M: usize,
    pub conditions: Vec<ConditionValue>,
    pub ultra_c: Option<f64>,
    pub notes: Vec<String>,
}

impl GAConditionReport {
    pub fn all_satisfied(&self) -> bool {
        self.conditions.iter().all(|c| c.satisfied)
    }

    pub fn condition(&self, name: &str) -> Option<&ConditionValue> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

pub fn ga_condition_check(profile: &DependenceProfile, n: usize, p: usize, nu: Option<f64>) -> Result<GAConditionReport> {
    evaluate_conditions(&ConditionInputs::from_profile(profile, n, p, nu)?)
}

/// Evaluates every quantity and condition from plain inputs.
#[allow(non_snake_case)]
pub fn evaluate_conditions(inp: &ConditionInputs) -> Result<GAConditionReport> {
    let ConditionInputs { n, p, q, alpha, .. } = *inp;
    if !(n >= 1.0) || !(p > 1.0) {
        return Err(invalid_arg(format!("need n >= 1 and p > 1 (log p > 0), got n = {n}, p = {p}")));
    }
    if !(q > 2.0) || !(alpha > 0.0) {
        return Err(invalid_arg(format!("need q > 2 and alpha > 0, got q = {q}, alpha = {alpha}")));
    }
    let boundary = 0.5 - 1.0 / q;
    if (alpha - boundary).abs() <= 1e-12 * boundary.abs().max(1.0) {
        return Err(Error::RegimeBoundary(format!(
            "alpha = {alpha} equals 1/2 - 1/q = {boundary}; no result covers this case"
        )));
    }
    let lp = p.ln();
    let lpn = (p * n).ln();
    let theta = inp.theta;
    let weaker = alpha > boundary;
    let mut notes = Vec::new();

    let L1 = weaker.then(|| (n.powf(1.0 / q - 0.5) * lp.sqrt() * theta).powf(1.0 / (alpha - 0.5 + 1.0 / q)));
    let L2 = (inp.psi_2_alpha * inp.psi_2_0 * lp * lp).powf(1.0 / alpha);
    let W1 = (inp.psi_3_0.powi(6) + inp.psi_4_0.powi(4)) * lpn.powi(7);
    let W2 = inp.psi_2_alpha.powi(2) * lpn.powi(4);
    let W3 = (!weaker).then(|| (n.powf(-alpha) * lpn.powf(1.5) * theta).powf(1.0 / (0.5 - alpha - 1.0 / q)));
    let N1 = (n / lp).powf(q / 2.0) / theta.powf(q);
    let N2 = n / (lp * lp) / inp.psi_2_alpha.powi(2);
    let N3 = (!weaker).then(|| (n.sqrt() / lp.sqrt() / theta).powf(1.0 / (0.5 - alpha)));

    let mut conditions = Vec::new();
    if q >= 4.0 {
        if weaker {
            conditions.push(ConditionValue::new(
                "weaker-moment",
                theta * n.powf(1.0 / q - 0.5) * lpn.powf(1.5),
                1.0,
            ));
            conditions.push(ConditionValue::new(
                "weaker-dimension",
                L1.unwrap().max(L2) * W1.max(W2),
                N1.min(N2),
            ));
        }
    } else if weaker {
        notes.push(format!("q = {q} < 4: the weaker-dependence conditions need q >= 4 and were not evaluated"));
    }
    if !weaker {
        conditions.push(ConditionValue::new("stronger-moment", theta * lp.sqrt(), n.powf(alpha)));
        conditions.push(ConditionValue::new(
            "stronger-dimension",
            L2 * W1.max(W2).max(W3.unwrap()),
            N2.min(N3.unwrap()),
        ));
    }
    if alpha == 1.0 {
        conditions.push(ConditionValue::new("alpha-one", W1.max(W2), n / (L2 * n.ln())));
    }

    let (mut L3, mut W4, mut N4, mut ultra) = (None, None, None, None);
    let regime = match inp.nu {
        Some(nu) => {
            let phi_a = inp
                .phi_alpha
                .ok_or_else(|| Error::Missing("sub-exponential check needs Phi_{psi_nu, alpha}".into()))?;
            let phi_0 = inp
                .phi_0
                .ok_or_else(|| Error::Missing("sub-exponential check needs Phi_{psi_nu, 0}".into()))?;
            if !(nu >= 0.0) {
                return Err(invalid_arg(format!("nu must be >= 0, got {nu}")));
            }
            let beta = 2.0 / (1.0 + 2.0 * nu);
            let l3 = (lp.powf(1.0 / beta + 0.5) * phi_a).powf(1.0 / alpha);
            let n4 = n * lp.powf(-1.0 - 2.0 / beta) / (phi_0 * phi_0);
            let w4 = lpn.powf(3.0 + 2.0 / beta) * phi_0 * phi_0 + lpn.powi(4);
            conditions.push(ConditionValue::new("subexp-dimension", L2.max(l3) * W1.max(w4), n4));
            conditions.push(ConditionValue::new("subexp-sample", L2.powf(alpha) * W1.max(w4), n));
            if alpha == 1.0 {
                conditions.push(ConditionValue::new("subexp-alpha-one", W1.max(w4), n / (L2 * n.ln())));
            }
            L3 = Some(l3);
            W4 = Some(w4);
            N4 = Some(n4);
            ultra = Some(ultra_c(alpha, beta)?);
            Regime::SubExponential
        }
        None if weaker => Regime::Weaker,
        None => Regime::Stronger,
    };

    let m = default_block_len(n as usize);
    let F = f_alpha(q, alpha, n as usize / m, m).ok();
    if F.is_none() {
        notes.push("F_alpha undefined: alpha sits on 1 - 2/q or 1/2 - 2/q".into());
    }
    Ok(GAConditionReport {
        n,
        p,
        q,
        alpha,
        nu: inp.nu,
        regime,
        L1,
        L2,
        L3,
        W1,
        W2,
        W3,
        W4,
        N1,
        N2,
        N3,
        N4,
        F_alpha: F,
        M: m,
        conditions,
        ultra_c: ultra,
        notes,
    })
}

/// Exponent `c` such that `log p = o(n^c)` is allowed when `Phi ~ 1`,
/// with `beta = 2/(1 + 2 nu)`.
pub fn ultra_c(alpha: f64, beta: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(invalid_arg(format!("alpha must be > 0, got {alpha}")));
    }
    if !(beta > 0.0 && beta <= 2.0) {
        return Err(invalid_arg(format!("beta must lie in (0, 2], got {beta}")));
    }
    let tail = (1.0 / beta + 0.5) * (1.0 / alpha + 2.0);
    Ok(if beta >= 2.0 / 3.0 {
        1.0 / (8.0 + 2.0 / alpha + 2.0 / beta)
    } else if beta >= 0.5 {
        1.0 / (7.0 + tail)
    } else {
        1.0 / (3.0 + 2.0 / beta + tail)
    })
}

/// Smallest `tau` with `p^tau ~ n` sufficient for the conditions when
/// `Psi_{q,alpha} ~ p^kappa1` and `Theta_{q,alpha} ~ p^kappa2`.
pub fn power_law_tau_threshold(kappa1: f64, kappa2: f64, q: f64, alpha: f64) -> Result<f64> {
    if !(0.0 <= kappa1 && kappa1 <= kappa2) {
        return Err(invalid_arg(format!("need 0 <= kappa1 <= kappa2, got {kappa1}, {kappa2}")));
    }
    if !(q > 2.0 && alpha > 0.0) {
        return Err(invalid_arg("need q > 2 and alpha > 0"));
    }
    let boundary = 0.5 - 1.0 / q;
    if alpha == boundary {
        return Err(Error::RegimeBoundary(format!("alpha = 1/2 - 1/q = {boundary}")));
    }
    let core = 2.0 * kappa1 / alpha + 8.0 * kappa1;
    Ok(if alpha > boundary {
        (kappa2 / boundary).max(core).max(2.0 / q * core + 2.0 * kappa2)
    } else {
        (kappa2 / alpha).max(core).max((1.0 - 2.0 * alpha) * core + 2.0 * kappa2)
    })
}
