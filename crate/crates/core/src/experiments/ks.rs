//! Two-sample Kolmogorov statistic, permutation p-values and ECDF dumps.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::par::map_ordered;
use crate::rng::{Purpose, RngContract};

pub const DEFAULT_PERMUTATIONS: usize = 999;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    /// `(1 + #{D_perm >= D}) / (1 + P)`; `None` when no permutations were run.
    pub p_value: Option<f64>,
    pub permutations: usize,
    pub n_a: usize,
    pub n_b: usize,
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// `sup_u |F_a(u) - F_b(u)|` for already sorted samples. Ties across and
/// within samples are consumed together before the gap is measured.
pub fn ks_sorted(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty(), "empty sample");
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    ks_sorted(&sorted(a), &sorted(b))
}

/// KS statistic with a permutation p-value from `permutations` relabelings of
/// the pooled sample. Relabeling `k` uses its own derived stream.
pub fn ks_test(a: &[f64], b: &[f64], permutations: usize, rng: RngContract) -> KsResult {
    let statistic = ks_statistic(a, b);
    let p_value = (permutations > 0).then(|| {
        let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
        let hits: usize = map_ordered(permutations, |k| {
            let mut v = pooled.clone();
            v.shuffle(&mut rng.derive(Purpose::Permutation, k as u64).rng());
            let (x, y) = v.split_at(a.len());
            usize::from(ks_statistic(x, y) >= statistic - 1e-12)
        })
        .into_iter()
        .sum();
        (1 + hits) as f64 / (1 + permutations) as f64
    });
    KsResult {
        statistic,
        p_value,
        permutations,
        n_a: a.len(),
        n_b: b.len(),
    }
}

/// Right-continuous ECDF of a sorted sample at `u`.
pub fn ecdf_at(sorted: &[f64], u: f64) -> f64 {
    sorted.partition_point(|v| *v <= u) as f64 / sorted.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EcdfRow {
    pub u: f64,
    pub ecdf_sample: f64,
    pub ecdf_gauss: f64,
}

/// Both ECDFs on at most `points` pooled order statistics.
pub fn ecdf_dump(sample: &[f64], gauss: &[f64], points: usize) -> Vec<EcdfRow> {
    let (s, g) = (sorted(sample), sorted(gauss));
    let pooled = sorted(&[sample, gauss].concat());
    let count = points.clamp(2, pooled.len().max(2));
    let last = pooled.len() - 1;
    (0..count)
        .map(|k| {
            let u = pooled[(k * last) / (count - 1)];
            EcdfRow {
                u,
                ecdf_sample: ecdf_at(&s, u),
                ecdf_gauss: ecdf_at(&g, u),
            }
        })
        .collect()
}
