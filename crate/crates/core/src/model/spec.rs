use serde::{Deserialize, Serialize};

use super::law::InnovationLaw;
use crate::error::{invalid_spec, Result};

pub const DEFAULT_TRUNCATION: usize = 200;
pub const DEFAULT_BURN_IN: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Iid,
    Linear,
    ThresholdAr,
}

/// Generative description of a stationary `p`-dimensional process `X_i = G(F^i)`.
///
/// * `iid`: `X_i = eps_i`.
/// * `linear`: `X_i = sum_{k=0}^K A_k eps_{i-k}` with
///   `A_k[j,l] = (k+1)^-(alpha+1) rho^|j-l| 1{|j-l| <= h}`.
/// * `threshold-ar`: coordinate-wise `X_ij = theta1 max(X_{i-1,j}, 0) + theta2 min(X_{i-1,j}, 0) + eps_ij`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessSpec {
    pub family: Family,
    pub p: usize,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default = "default_truncation")]
    pub truncation: usize,
    #[serde(default)]
    pub bandwidth: usize,
    #[serde(default)]
    pub cross_decay: f64,
    #[serde(default)]
    pub theta1: f64,
    #[serde(default)]
    pub theta2: f64,
    #[serde(default)]
    pub innovation: InnovationLaw,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
}

fn default_truncation() -> usize {
    DEFAULT_TRUNCATION
}

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

impl ProcessSpec {
    pub fn iid(p: usize, innovation: InnovationLaw) -> Self {
        Self {
            family: Family::Iid,
            p,
            alpha: 0.0,
            truncation: DEFAULT_TRUNCATION,
            bandwidth: 0,
            cross_decay: 0.0,
            theta1: 0.0,
            theta2: 0.0,
            innovation,
            burn_in: DEFAULT_BURN_IN,
        }
    }

    pub fn linear(p: usize, alpha: f64, truncation: usize, bandwidth: usize, cross_decay: f64) -> Self {
        Self {
            family: Family::Linear,
            alpha,
            truncation,
            bandwidth,
            cross_decay,
            ..Self::iid(p, InnovationLaw::StandardGaussian)
        }
    }

    pub fn threshold_ar(p: usize, theta1: f64, theta2: f64) -> Self {
        Self {
            family: Family::ThresholdAr,
            theta1,
            theta2,
            ..Self::iid(p, InnovationLaw::StandardGaussian)
        }
    }

    pub fn with_innovation(mut self, innovation: InnovationLaw) -> Self {
        self.innovation = innovation;
        self
    }

    pub fn with_p(mut self, p: usize) -> Self {
        self.p = p;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(invalid_spec("dimension p must be positive"));
        }
        self.innovation.validate()?;
        match self.family {
            Family::Iid => {}
            Family::Linear => {
                if !(self.alpha.is_finite() && self.alpha >= 0.0) {
                    return Err(invalid_spec(format!("alpha must be >= 0, got {}", self.alpha)));
                }
                if !(self.cross_decay >= 0.0 && self.cross_decay < 1.0) {
                    return Err(invalid_spec(format!(
                        "cross-decay rho must lie in [0, 1), got {}",
                        self.cross_decay
                    )));
                }
            }
            Family::ThresholdAr => {
                for (name, v) in [("theta1", self.theta1), ("theta2", self.theta2)] {
                    if !(v.abs() < 1.0) {
                        return Err(invalid_spec(format!(
                            "threshold-ar must be contracting (|theta1| v |theta2| < 1), got {name} = {v}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Number of innovations drawn before time 0.
    pub fn presample(&self) -> usize {
        match self.family {
            Family::Iid => 0,
            Family::Linear => self.truncation,
            Family::ThresholdAr => self.burn_in,
        }
    }

    /// Scalar lag weights `a_k = (k+1)^-(alpha+1)`, `k = 0..=K`.
    pub fn lag_weights(&self) -> Vec<f64> {
        (0..=self.truncation)
            .map(|k| ((k + 1) as f64).powf(-(self.alpha + 1.0)))
            .collect()
    }

    /// Band weights `rho^d`, `d = 0..=h`, of the cross-sectional mixing matrix.
    pub fn band_weights(&self) -> Vec<f64> {
        (0..=self.bandwidth)
            .map(|d| self.cross_decay.powi(d as i32))
            .collect()
    }

    /// Cross-sectional mixing matrix `B` with `A_k = a_k B`.
    pub fn mixing_matrix(&self) -> ndarray::Array2<f64> {
        let band = self.band_weights();
        ndarray::Array2::from_shape_fn((self.p, self.p), |(j, l)| {
            let d = j.abs_diff(l);
            if d <= self.bandwidth {
                band[d]
            } else {
                0.0
            }
        })
    }

    /// Coefficient matrix `A_k` of the linear family.
    pub fn coefficient(&self, k: usize) -> ndarray::Array2<f64> {
        if k > self.truncation {
            return ndarray::Array2::zeros((self.p, self.p));
        }
        self.mixing_matrix() * ((k + 1) as f64).powf(-(self.alpha + 1.0))
    }

    /// True when `B` is diagonal, i.e. coordinates are independent.
    pub fn is_cross_sectionally_independent(&self) -> bool {
        self.family != Family::Linear || self.bandwidth == 0 || self.cross_decay == 0.0
    }
}
