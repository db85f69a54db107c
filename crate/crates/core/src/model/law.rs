//! Innovation laws driving the simulated processes.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid_spec, Error, Result};
use crate::stats::exp_int_e1;

/// Default threshold `u0 = e^2` for the symmetric Pareto tail, so `log u0 = 2`.
pub const DEFAULT_PARETO_THRESHOLD: f64 = std::f64::consts::E * std::f64::consts::E;

const INVERSION_TOL: f64 = 1e-12;

/// Law of the i.i.d. innovations `eps_i`. Every law is symmetric with mean zero.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InnovationLaw {
    #[default]
    StandardGaussian,
    /// Student t with `df > 2` degrees of freedom (not rescaled).
    StudentT { df: f64 },
    /// Symmetric law with `P(eps >= u) = u^-q (log u)^-2` for `u >= u0` and a
    /// uniform body on `[-c, c]`, where `c` is chosen so the variance is one.
    SymmetricPareto {
        tail_index: f64,
        #[serde(default = "default_threshold")]
        threshold: f64,
    },
}

fn default_threshold() -> f64 {
    DEFAULT_PARETO_THRESHOLD
}

impl InnovationLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            InnovationLaw::StandardGaussian => Ok(()),
            InnovationLaw::StudentT { df } => {
                if !(df.is_finite() && df > 2.0) {
                    return Err(invalid_spec(format!(
                        "student-t requires df > 2 for finite variance, got {df}"
                    )));
                }
                Ok(())
            }
            InnovationLaw::SymmetricPareto {
                tail_index,
                threshold,
            } => ParetoShape::new(tail_index, threshold).map(|_| ()),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            InnovationLaw::StandardGaussian => 1.0,
            InnovationLaw::StudentT { df } => df / (df - 2.0),
            InnovationLaw::SymmetricPareto { .. } => 1.0,
        }
    }

    /// Largest `r` with `E|eps|^r < inf` and whether that order itself is finite.
    pub fn moment_limit(&self) -> (f64, bool) {
        match *self {
            InnovationLaw::StandardGaussian => (f64::INFINITY, true),
            InnovationLaw::StudentT { df } => (df, false),
            // the (log u)^-2 factor keeps the q-th moment finite
            InnovationLaw::SymmetricPareto { tail_index, .. } => (tail_index, true),
        }
    }

    pub fn has_moment(&self, order: f64) -> bool {
        let (limit, inclusive) = self.moment_limit();
        order < limit || (inclusive && order == limit)
    }

    /// Sub-exponential laws admit finite `sup_q ||.||_q / q^nu` for some `nu`.
    pub fn is_sub_exponential(&self) -> bool {
        matches!(self, InnovationLaw::StandardGaussian)
    }

    pub fn sampler(&self) -> Result<InnovationSampler> {
        self.validate()?;
        Ok(match *self {
            InnovationLaw::StandardGaussian => InnovationSampler::Gaussian,
            InnovationLaw::StudentT { df } => InnovationSampler::StudentT(
                StudentT::new(df).map_err(|e| invalid_spec(format!("student-t: {e}")))?,
            ),
            InnovationLaw::SymmetricPareto {
                tail_index,
                threshold,
            } => InnovationSampler::Pareto(ParetoShape::new(tail_index, threshold)?),
        })
    }

    /// Distribution function, used by goodness-of-fit checks.
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            InnovationLaw::StandardGaussian => crate::stats::std_normal_cdf(x),
            InnovationLaw::StudentT { df } => {
                use statrs::distribution::{ContinuousCDF, StudentsT};
                StudentsT::new(0.0, 1.0, df)
                    .map(|d| d.cdf(x))
                    .unwrap_or(f64::NAN)
            }
            InnovationLaw::SymmetricPareto {
                tail_index,
                threshold,
            } => ParetoShape::new(tail_index, threshold)
                .map(|s| s.cdf(x))
                .unwrap_or(f64::NAN),
        }
    }

    /// `|| eps - eps' ||_r` for independent copies, where a closed form or a
    /// quadrature is available.
    pub fn coupled_difference_norm(&self, r: f64) -> Result<f64> {
        if !(r >= 1.0) {
            return Err(Error::InvalidArgument(format!("moment order must be >= 1, got {r}")));
        }
        if !self.has_moment(r) {
            return Err(Error::InvalidArgument(format!(
                "moment of order {r} does not exist for {self:?}"
            )));
        }
        match *self {
            InnovationLaw::StandardGaussian => Ok(std::f64::consts::SQRT_2 * gaussian_abs_norm(r)),
            InnovationLaw::StudentT { df } => Ok(student_t_difference_norm(df, r)),
            InnovationLaw::SymmetricPareto { .. } => Err(Error::Unsupported(
                "no closed form for the symmetric-pareto coupled difference; use mc_profile".into(),
            )),
        }
    }
}

#[derive(Debug, Clone)]
pub enum InnovationSampler {
    Gaussian,
    StudentT(StudentT<f64>),
    Pareto(ParetoShape),
}

impl InnovationSampler {
    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            InnovationSampler::Gaussian => StandardNormal.sample(rng),
            InnovationSampler::StudentT(t) => t.sample(rng),
            InnovationSampler::Pareto(shape) => shape.from_uniform(rng.random::<f64>()),
        }
    }

    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = self.draw(rng);
        }
    }
}

/// `||N(0,1)||_r = (2^{r/2} Gamma((r+1)/2) / sqrt(pi))^{1/r}`.
pub fn gaussian_abs_norm(r: f64) -> f64 {
    let log_moment =
        0.5 * r * std::f64::consts::LN_2 + ln_gamma(0.5 * (r + 1.0)) - 0.5 * std::f64::consts::PI.ln();
    (log_moment / r).exp()
}

/// `||t - t'||_r` for independent Student t variables.
///
/// Uses the normal scale-mixture `t = Z / sqrt(V/df)`: given the chi-square
/// mixers the difference is `N(0, df/V + df/V')`, leaving a smooth double
/// integral over `log V`, `log V'` evaluated with the trapezoid rule.
fn student_t_difference_norm(df: f64, r: f64) -> f64 {
    let half = 0.5 * df;
    let log_norm = -(half * std::f64::consts::LN_2 + ln_gamma(half));
    // log-density of x = log V
    let log_g = |x: f64| log_norm + half * x - 0.5 * x.exp();
    let decay = 0.5 * (df - r);
    let lo = -(36.0 / decay).min(400.0) - 2.0;
    let hi = (df + 80.0).ln() + 1.5;
    let steps = 1600usize.max(((hi - lo) / 0.04) as usize);
    let h = (hi - lo) / steps as f64;
    let xs: Vec<f64> = (0..=steps).map(|k| lo + h * k as f64).collect();
    let gs: Vec<f64> = xs.iter().map(|&x| log_g(x).exp()).collect();
    let inv: Vec<f64> = xs.iter().map(|&x| df * (-x).exp()).collect();
    let mut acc = 0.0;
    for a in 0..=steps {
        let wa = if a == 0 || a == steps { 0.5 } else { 1.0 };
        let mut row = 0.0;
        for b in 0..=steps {
            let wb = if b == 0 || b == steps { 0.5 } else { 1.0 };
            row += wb * gs[b] * (inv[a] + inv[b]).powf(0.5 * r);
        }
        acc += wa * gs[a] * row;
    }
    let mixture_moment = acc * h * h;
    gaussian_abs_norm(r) * mixture_moment.powf(1.0 / r)
}

/// Shape of the symmetric Pareto law with slowly varying factor `(log u)^-2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParetoShape {
    pub tail_index: f64,
    pub threshold: f64,
    /// One-sided tail mass `P(eps >= u0)`.
    pub tail_mass: f64,
    /// Half-width `c` of the uniform body.
    pub body_half_width: f64,
}

impl ParetoShape {
    pub fn new(tail_index: f64, threshold: f64) -> Result<Self> {
        if !(tail_index.is_finite() && tail_index > 2.0) {
            return Err(invalid_spec(format!(
                "symmetric-pareto requires tail index q > 2, got {tail_index}"
            )));
        }
        if !(threshold.is_finite() && threshold > 1.0) {
            return Err(invalid_spec(format!(
                "symmetric-pareto requires threshold u0 > 1, got {threshold}"
            )));
        }
        let tail_mass = survival(tail_index, threshold);
        if tail_mass >= 0.5 {
            return Err(invalid_spec(format!(
                "symmetric-pareto tail mass P(eps >= u0) = {tail_mass} must be < 1/2; raise u0"
            )));
        }
        let a = threshold.ln();
        let b = tail_index - 2.0;
        // E[eps^2; eps >= u0] = u0^2 S(u0) + 2 int_{u0}^inf u S(u) du
        let tail_second = threshold * threshold * tail_mass
            + 2.0 * ((-a * b).exp() / a - b * exp_int_e1(a * b));
        let body_var = 1.0 - 2.0 * tail_second;
        if body_var <= 0.0 {
            return Err(invalid_spec(format!(
                "symmetric-pareto tail alone has variance {} >= 1; raise u0",
                2.0 * tail_second
            )));
        }
        let body_half_width = (3.0 * body_var / (1.0 - 2.0 * tail_mass)).sqrt();
        if body_half_width > threshold {
            return Err(invalid_spec(format!(
                "symmetric-pareto body half-width {body_half_width} exceeds u0 = {threshold}"
            )));
        }
        Ok(Self {
            tail_index,
            threshold,
            tail_mass,
            body_half_width,
        })
    }

    /// `P(eps >= u)` for `u >= u0`.
    pub fn survival(&self, u: f64) -> f64 {
        survival(self.tail_index, u)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let ax = x.abs();
        let upper = if ax >= self.threshold {
            self.survival(ax)
        } else if ax >= self.body_half_width {
            self.tail_mass
        } else {
            self.tail_mass + (0.5 - self.tail_mass) * (1.0 - ax / self.body_half_width)
        };
        if x >= 0.0 {
            1.0 - upper
        } else {
            upper
        }
    }

    /// Maps a uniform draw on `[0, 1)` to the law.
    pub fn from_uniform(&self, u: f64) -> f64 {
        let s0 = self.tail_mass;
        if u < s0 {
            self.invert_survival(u)
        } else if u < 2.0 * s0 {
            -self.invert_survival(2.0 * s0 - u)
        } else {
            let t = (u - 2.0 * s0) / (1.0 - 2.0 * s0);
            self.body_half_width * (2.0 * t - 1.0)
        }
    }

    /// Solves `S(u) = v` for `v` in `(0, S(u0)]` by monotone bisection.
    fn invert_survival(&self, v: f64) -> f64 {
        if v >= self.tail_mass {
            return self.threshold;
        }
        // a uniform of exactly 0 would send the draw to infinity
        let v = v.max(f64::EPSILON * f64::EPSILON);
        let mut lo = self.threshold;
        let mut hi = 2.0 * self.threshold;
        while self.survival(hi) > v {
            lo = hi;
            hi *= 2.0;
            if !hi.is_finite() {
                return f64::MAX;
            }
        }
        while hi - lo > INVERSION_TOL * hi {
            let mid = 0.5 * (lo + hi);
            if self.survival(mid) > v {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

fn survival(q: f64, u: f64) -> f64 {
    let l = u.ln();
    u.powf(-q) / (l * l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngContract;

    #[test]
    fn pareto_default_has_unit_variance_by_quadrature() {
        let shape = ParetoShape::new(4.0, DEFAULT_PARETO_THRESHOLD).unwrap();
        // brute-force: body variance + tail second moment via the survival integral
        let c = shape.body_half_width;
        let body = (1.0 - 2.0 * shape.tail_mass) * c * c / 3.0;
        // int_{u0}^{U} 2u S(u) du on a log grid, U large
        let (a, b) = (shape.threshold.ln(), 60.0f64);
        let steps = 400_000;
        let h = (b - a) / steps as f64;
        let mut integral = 0.0;
        for k in 0..steps {
            let t = a + (k as f64 + 0.5) * h;
            let u = t.exp();
            integral += 2.0 * u * shape.survival(u) * u * h;
        }
        let tail = shape.threshold.powi(2) * shape.tail_mass + integral;
        let var = body + 2.0 * tail;
        assert!((var - 1.0).abs() < 1e-6, "variance {var}");
    }

    #[test]
    fn pareto_inversion_hits_tail_formula() {
        let shape = ParetoShape::new(4.0, DEFAULT_PARETO_THRESHOLD).unwrap();
        for &v in &[shape.tail_mass * 0.9, 1e-6, 1e-9] {
            let u = shape.invert_survival(v);
            assert!((shape.survival(u) / v - 1.0).abs() < 1e-9);
        }
        assert!(shape.from_uniform(0.0) > 1e6 && shape.from_uniform(0.0).is_finite());
        assert_eq!(shape.from_uniform(shape.tail_mass), -shape.threshold);
    }

    #[test]
    fn pareto_cdf_is_symmetric_and_monotone() {
        let shape = ParetoShape::new(4.0, DEFAULT_PARETO_THRESHOLD).unwrap();
        let mut prev = 0.0;
        for k in -400..=400 {
            let x = k as f64 * 0.05;
            let f = shape.cdf(x);
            assert!(f >= prev - 1e-15);
            assert!((f + shape.cdf(-x) - 1.0).abs() < 1e-12 || x == 0.0);
            prev = f;
        }
    }

    #[test]
    fn pareto_rejects_infeasible_thresholds() {
        assert!(ParetoShape::new(4.0, 1.5).is_err());
        assert!(ParetoShape::new(2.0, 10.0).is_err());
        assert!(ParetoShape::new(4.0, 0.5).is_err());
    }

    #[test]
    fn pareto_empirical_tail_matches_formula() {
        let law = InnovationLaw::SymmetricPareto {
            tail_index: 4.0,
            threshold: 1.5f64.exp(),
        };
        let sampler = law.sampler().unwrap();
        let InnovationSampler::Pareto(shape) = sampler.clone() else {
            unreachable!()
        };
        let mut rng = RngContract::new(99).rng();
        let n = 1_000_000;
        let u = 2.0 * shape.threshold;
        let hits = (0..n).filter(|_| sampler.draw(&mut rng) >= u).count();
        let p = shape.survival(u);
        let se = (p * (1.0 - p) / n as f64).sqrt();
        let phat = hits as f64 / n as f64;
        assert!((phat - p).abs() < 3.0 * se, "phat {phat} p {p} se {se}");
    }

    #[test]
    fn gaussian_norm_closed_forms() {
        assert!((gaussian_abs_norm(2.0) - 1.0).abs() < 1e-14);
        // E|Z|^4 = 3
        assert!((gaussian_abs_norm(4.0) - 3f64.powf(0.25)).abs() < 1e-13);
        // E|Z| = sqrt(2/pi)
        assert!((gaussian_abs_norm(1.0) - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn student_t_difference_second_moment_exact() {
        for &df in &[3.0, 5.0, 10.0] {
            let law = InnovationLaw::StudentT { df };
            let got = law.coupled_difference_norm(2.0).unwrap();
            let want = (2.0 * df / (df - 2.0)).sqrt();
            assert!((got - want).abs() < 1e-8 * want, "df {df}: {got} vs {want}");
        }
    }

    #[test]
    fn student_t_difference_fourth_moment_exact() {
        // E(t-t')^4 = 2 E t^4 + 6 (E t^2)^2, E t^4 = 3 df^2 / ((df-2)(df-4))
        let df: f64 = 9.0;
        let m2 = df / (df - 2.0);
        let m4 = 3.0 * df * df / ((df - 2.0) * (df - 4.0));
        let want = (2.0 * m4 + 6.0 * m2 * m2).powf(0.25);
        let got = InnovationLaw::StudentT { df }.coupled_difference_norm(4.0).unwrap();
        assert!((got - want).abs() < 1e-7, "{got} vs {want}");
    }

    #[test]
    fn moment_guard() {
        let law = InnovationLaw::StudentT { df: 4.0 };
        assert!(law.coupled_difference_norm(4.0).is_err());
        assert!(law.coupled_difference_norm(3.5).is_ok());
    }
}
