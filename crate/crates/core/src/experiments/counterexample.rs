//! Failure of the Gaussian approximation when the dimension outgrows the
//! available moments: iid coordinates with symmetric power-law tails.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::ks::{ks_test, KsResult};
use crate::error::{invalid_arg, Result};
use crate::gboot::{max_abs_draws, psd_sqrt};
use crate::model::{sample_mean, InnovationLaw, ProcessSpec, DEFAULT_PARETO_THRESHOLD};
use crate::par::map_ordered;
use crate::rng::{Purpose, RngContract};
use crate::stats::{monotone_violations, std_normal_cdf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleCell {
    pub p: usize,
    /// `sqrt(2 log p)`.
    pub u: f64,
    pub ks: KsResult,
    /// `p P(|sqrt(n) Xbar_1| >= u)`, estimated by pooling coordinates.
    pub tail_sample: f64,
    /// `p P(|Z_1| >= u)`.
    pub tail_gauss: f64,
    /// `P(sqrt(n) |Xbar|_inf >= u)` and `P(|Z|_inf >= u)`, estimated.
    pub exceed_sample: f64,
    pub exceed_gauss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub q: f64,
    pub n: usize,
    pub threshold: f64,
    pub replications: usize,
    pub cells: Vec<CounterexampleCell>,
    /// Adjacent decreases of KS along the `p` grid.
    pub violations: usize,
}

impl CounterexampleReport {
    pub fn ks(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.ks.statistic).collect()
    }
}

/// KS trajectory along `ps` for `n` iid observations of `p` iid coordinates
/// with tail index `q` (unit variance, so `D0 = Id`). `threshold` is the start
/// of the power-law tail, `e^2` by default.
pub fn counterexample_demo(
    q: f64,
    n: usize,
    ps: &[usize],
    replications: usize,
    threshold: Option<f64>,
    permutations: usize,
    rng: RngContract,
) -> Result<CounterexampleReport> {
    if q <= 2.0 {
        return Err(invalid_arg(format!("tail index must exceed 2 for a finite variance, got {q}")));
    }
    if ps.is_empty() || replications == 0 || n == 0 {
        return Err(invalid_arg("need a nonempty p grid, n >= 1 and at least one replication"));
    }
    let threshold = threshold.unwrap_or(DEFAULT_PARETO_THRESHOLD);
    let law = InnovationLaw::SymmetricPareto { tail_index: q, threshold };
    let root_n = (n as f64).sqrt();
    let mut cells = Vec::with_capacity(ps.len());
    for (c, &p) in ps.iter().enumerate() {
        let spec = ProcessSpec::iid(p, law);
        spec.validate()?;
        let stream = rng.derive(Purpose::Cell, c as u64);
        let u = (2.0 * (p as f64).ln()).sqrt();
        let runs = map_ordered(replications, |r| {
            let xbar = sample_mean(&spec, n, stream.derive(Purpose::Replication, r as u64))?;
            let mut max = 0.0f64;
            let mut hits = 0usize;
            for v in xbar.iter() {
                let s = root_n * v.abs();
                max = max.max(s);
                hits += usize::from(s >= u);
            }
            Ok((max, hits))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let sample: Vec<f64> = runs.iter().map(|r| r.0).collect();
        let root = psd_sqrt(&Array2::eye(p))?;
        let gauss = max_abs_draws(&root, replications, stream.derive(Purpose::Gaussian, 0));
        let rf = replications as f64;
        let hits: usize = runs.iter().map(|r| r.1).sum();
        cells.push(CounterexampleCell {
            p,
            u,
            ks: ks_test(&sample, &gauss, permutations, stream.derive(Purpose::Permutation, 0)),
            tail_sample: hits as f64 / rf,
            tail_gauss: p as f64 * 2.0 * (1.0 - std_normal_cdf(u)),
            exceed_sample: sample.iter().filter(|s| **s >= u).count() as f64 / rf,
            exceed_gauss: gauss.iter().filter(|s| **s >= u).count() as f64 / rf,
        });
    }
    let ks: Vec<f64> = cells.iter().map(|c| c.ks.statistic).collect();
    Ok(CounterexampleReport {
        q,
        n,
        threshold,
        replications,
        violations: monotone_violations(&ks),
        cells,
    })
}
