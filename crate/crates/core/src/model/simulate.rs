//! Exact simulation of the three process families, coupled copies and
//! m-dependent approximations.

use ndarray::{s, Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::spec::{Family, ProcessSpec};
use crate::error::{invalid_arg, Error, Result};
use crate::rng::{Purpose, RngContract};

/// Innovations that produced a panel. Row `r` holds `eps` at time `r - start`,
/// so time 0 (the first panel row) sits at row `start`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnovationRecord {
    pub start: usize,
    pub eps: Array2<f64>,
}

impl InnovationRecord {
    pub fn time_row(&self, t: isize) -> Option<usize> {
        let r = self.start as isize + t;
        (r >= 0 && (r as usize) < self.eps.nrows()).then_some(r as usize)
    }
}

/// An `n x p` sample, row `i` being the observation at time `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub data: Array2<f64>,
    pub spec: Option<ProcessSpec>,
    pub rng: Option<RngContract>,
    pub burn_in: usize,
    pub truncation: usize,
    pub innovations: Option<InnovationRecord>,
}

impl Panel {
    /// Wraps observed data with no generation metadata.
    pub fn from_data(data: Array2<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(invalid_arg("panel must have at least one row and one column"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("panel contains non-finite values".into()));
        }
        Ok(Self {
            data: data.as_standard_layout().into_owned(),
            spec: None,
            rng: None,
            burn_in: 0,
            truncation: 0,
            innovations: None,
        })
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn p(&self) -> usize {
        self.data.ncols()
    }

    pub fn column_means(&self) -> Array1<f64> {
        column_means(self.data.view())
    }

    /// Drops the innovation record to save memory.
    pub fn without_innovations(mut self) -> Self {
        self.innovations = None;
        self
    }
}

pub(crate) fn column_means(data: ArrayView2<f64>) -> Array1<f64> {
    let mut acc = Array1::<f64>::zeros(data.ncols());
    for row in data.rows() {
        acc += &row;
    }
    acc / data.nrows() as f64
}

pub fn simulate(spec: &ProcessSpec, n: usize, rng: RngContract) -> Result<Panel> {
    Ok(simulate_recorded(spec, n, rng)?.without_innovations())
}

/// As [`simulate`], keeping the innovations for [`m_dependent_approx`].
pub fn simulate_recorded(spec: &ProcessSpec, n: usize, rng: RngContract) -> Result<Panel> {
    check(spec, n)?;
    let eps = draw_innovations(spec, n, rng)?;
    let data = generate(spec, eps.view(), n);
    Ok(Panel {
        data,
        spec: Some(spec.clone()),
        rng: Some(rng),
        burn_in: if spec.family == Family::ThresholdAr { spec.burn_in } else { 0 },
        truncation: if spec.family == Family::Linear { spec.truncation } else { 0 },
        innovations: Some(InnovationRecord {
            start: spec.presample(),
            eps,
        }),
    })
}

/// Returns `(X, X')` where `X'` replaces the time-0 innovation with an
/// independent copy drawn from the coupling stream.
pub fn simulate_coupled(spec: &ProcessSpec, n: usize, rng: RngContract) -> Result<(Panel, Panel)> {
    let original = simulate_recorded(spec, n, rng)?;
    let record = original.innovations.as_ref().expect("recorded");
    let sampler = spec.innovation.sampler()?;
    let mut coupling_rng = rng.derive(Purpose::Coupling, 0).rng();
    let mut eps = record.eps.clone();
    let origin = record.start;
    for v in eps.row_mut(origin).iter_mut() {
        *v = sampler.draw(&mut coupling_rng);
    }

    let mut data = original.data.clone();
    match spec.family {
        Family::Iid => data.row_mut(0).assign(&eps.row(origin)),
        Family::Linear => {
            let last = spec.truncation.min(n - 1);
            linear_rows(spec, eps.view(), &mut data, 0..last + 1, spec.truncation);
        }
        Family::ThresholdAr => {
            // rows before time 0 are untouched; restart from the stored state
            let mut state: Vec<f64> = if origin == 0 {
                vec![0.0; spec.p]
            } else {
                tar_state_before(spec, eps.view(), origin)
            };
            for i in 0..n {
                for j in 0..spec.p {
                    state[j] = tar_step(spec, state[j]) + eps[[origin + i, j]];
                    data[[i, j]] = state[j];
                }
            }
        }
    }
    let coupled = Panel {
        data,
        innovations: Some(InnovationRecord { start: origin, eps }),
        ..original.clone()
    };
    Ok((original, coupled))
}

/// `X_{i,m} = E(X_i | eps_{i-m}, ..., eps_i)`.
///
/// Exact for the linear family (lags truncated at `min(m, K)`) and trivially
/// so for iid data. For the threshold-AR family the recursion is restarted
/// at zero `m + 1` steps back and driven by `eps_{i-m..=i}`; this is an
/// approximation of the conditional expectation, not the expectation itself.
pub fn m_dependent_approx(panel: &Panel, m: usize) -> Result<Panel> {
    let spec = panel
        .spec
        .as_ref()
        .ok_or_else(|| Error::Missing("panel carries no process specification".into()))?;
    let record = panel.innovations.as_ref().ok_or_else(|| {
        Error::Missing("innovation record unavailable; simulate with simulate_recorded".into())
    })?;
    let n = panel.n();
    let mut data = panel.data.clone();
    match spec.family {
        Family::Iid => {}
        Family::Linear => {
            if m < spec.truncation {
                linear_rows(spec, record.eps.view(), &mut data, 0..n, m);
            }
        }
        Family::ThresholdAr => {
            for i in 0..n {
                let first = (i as isize - m as isize).max(-(record.start as isize));
                for j in 0..spec.p {
                    let mut y = 0.0;
                    for t in first..=i as isize {
                        let r = record.time_row(t).expect("within record");
                        y = tar_step(spec, y) + record.eps[[r, j]];
                    }
                    data[[i, j]] = y;
                }
            }
        }
    }
    Ok(Panel {
        data,
        ..panel.clone()
    })
}

/// Draws the `(presample + n) x p` innovation block in row-major order from
/// the innovation stream of `rng`.
pub fn draw_innovations(spec: &ProcessSpec, n: usize, rng: RngContract) -> Result<Array2<f64>> {
    check(spec, n)?;
    let sampler = spec.innovation.sampler()?;
    let rows = spec.presample() + n;
    let mut buf = vec![0.0; rows * spec.p];
    sampler.fill(&mut rng.derive(Purpose::Innovations, 0).rng(), &mut buf);
    Ok(Array2::from_shape_vec((rows, spec.p), buf).expect("shape"))
}

/// Sample mean of the panel `simulate(spec, n, rng)` would return, without
/// materialising it for the linear family (prefix sums over innovations).
/// Agrees with the explicit column means up to rounding.
pub fn sample_mean(spec: &ProcessSpec, n: usize, rng: RngContract) -> Result<Array1<f64>> {
    match spec.family {
        Family::Iid => {
            let eps = draw_innovations(spec, n, rng)?;
            Ok(column_means(eps.view()))
        }
        Family::Linear => {
            let eps = draw_innovations(spec, n, rng)?;
            let k_max = spec.truncation;
            let a = spec.lag_weights();
            let mut u = Array1::<f64>::zeros(spec.p);
            for l in 0..spec.p {
                let w = window_sums(eps.column(l).iter().copied(), n, k_max);
                u[l] = a.iter().zip(&w).map(|(ak, wk)| ak * wk).sum::<f64>() / n as f64;
            }
            Ok(apply_mixing(spec, &u))
        }
        Family::ThresholdAr => Ok(simulate(spec, n, rng)?.column_means()),
    }
}

/// For the linear family, `S_n - S_{n,m} = sum_i (X_i - X_{i,m})` for each `m`
/// in `ms`, computed from window sums of the innovations that
/// `simulate_recorded(spec, n, rng)` would use.
pub fn linear_truncation_sums(
    spec: &ProcessSpec,
    n: usize,
    ms: &[usize],
    rng: RngContract,
) -> Result<Vec<Array1<f64>>> {
    if spec.family != Family::Linear {
        return Err(Error::Unsupported("truncation sums need the linear family".into()));
    }
    let eps = draw_innovations(spec, n, rng)?;
    let k_max = spec.truncation;
    let a = spec.lag_weights();
    let windows: Vec<Vec<f64>> = (0..spec.p)
        .map(|l| window_sums(eps.column(l).iter().copied(), n, k_max))
        .collect();
    Ok(ms
        .iter()
        .map(|&m| {
            let u = Array1::from_shape_fn(spec.p, |l| {
                (m + 1..=k_max).map(|k| a[k] * windows[l][k]).sum::<f64>()
            });
            apply_mixing(spec, &u)
        })
        .collect())
}

/// `W_k = sum_{i=0}^{n-1} eps_{i-k}`, `k = 0..=K`, for a column stored with `K`
/// presample rows.
fn window_sums(col: impl Iterator<Item = f64>, n: usize, k_max: usize) -> Vec<f64> {
    let mut prefix = Vec::with_capacity(n + k_max + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for v in col {
        acc += v;
        prefix.push(acc);
    }
    (0..=k_max)
        .map(|k| prefix[n + k_max - k] - prefix[k_max - k])
        .collect()
}

fn check(spec: &ProcessSpec, n: usize) -> Result<()> {
    if n == 0 {
        return Err(invalid_arg("sample size n must be >= 1"));
    }
    spec.validate()
}

fn generate(spec: &ProcessSpec, eps: ArrayView2<f64>, n: usize) -> Array2<f64> {
    match spec.family {
        Family::Iid => eps.to_owned(),
        Family::Linear => {
            let mut data = Array2::zeros((n, spec.p));
            linear_rows(spec, eps, &mut data, 0..n, spec.truncation);
            data
        }
        Family::ThresholdAr => {
            let mut data = Array2::zeros((n, spec.p));
            let b0 = spec.burn_in;
            for j in 0..spec.p {
                let mut x = 0.0;
                for r in 0..b0 + n {
                    x = tar_step(spec, x) + eps[[r, j]];
                    if r >= b0 {
                        data[[r - b0, j]] = x;
                    }
                }
            }
            data
        }
    }
}

#[inline]
fn tar_step(spec: &ProcessSpec, x: f64) -> f64 {
    spec.theta1 * x.max(0.0) + spec.theta2 * x.min(0.0)
}

/// State at time -1 obtained by running the recursion through `eps[..origin]`.
fn tar_state_before(spec: &ProcessSpec, eps: ArrayView2<f64>, origin: usize) -> Vec<f64> {
    (0..spec.p)
        .map(|j| {
            let mut x = 0.0;
            for r in 0..origin {
                x = tar_step(spec, x) + eps[[r, j]];
            }
            x
        })
        .collect()
}

/// Fills `rows` of `out` with `B sum_{k=0}^{cap} a_k eps_{i-k}`.
fn linear_rows(
    spec: &ProcessSpec,
    eps: ArrayView2<f64>,
    out: &mut Array2<f64>,
    rows: std::ops::Range<usize>,
    cap: usize,
) {
    let k_max = spec.truncation;
    let cap = cap.min(k_max);
    let a = spec.lag_weights();
    let p = spec.p;
    let mut u = Array1::<f64>::zeros(p);
    for i in rows {
        u.fill(0.0);
        for (k, &ak) in a.iter().enumerate().take(cap + 1) {
            u.scaled_add(ak, &eps.row(i + k_max - k));
        }
        out.slice_mut(s![i, ..]).assign(&apply_mixing(spec, &u));
    }
}

fn apply_mixing(spec: &ProcessSpec, u: &Array1<f64>) -> Array1<f64> {
    if spec.is_cross_sectionally_independent() {
        return u.clone();
    }
    let band = spec.band_weights();
    let h = spec.bandwidth;
    let p = spec.p;
    Array1::from_shape_fn(p, |j| {
        let lo = j.saturating_sub(h);
        let hi = (j + h).min(p - 1);
        (lo..=hi).map(|l| band[j.abs_diff(l)] * u[l]).sum()
    })
}
