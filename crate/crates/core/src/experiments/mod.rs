//! Monte Carlo experiments: Gaussian approximation quality, interval
//! coverage, estimator and approximation rates, and the heavy-tail failure regime.

pub mod config;
pub mod counterexample;
pub mod coverage;
pub mod ga;
pub mod ks;
pub mod rates;
pub mod report;

use std::time::Instant;

pub use config::{ExperimentConfig, ExperimentKind, Grid};
pub use counterexample::{counterexample_demo, CounterexampleCell, CounterexampleReport};
pub use coverage::{coverage_cell, CoverageCell};
pub use ga::{ga_distance, ga_distance_with, ga_samples, gaussian_oracle, long_path_oracle, GaOptions, GaResult, GaussianOracle, OracleKind};
pub use ks::{ecdf_dump, ks_statistic, ks_test, EcdfRow, KsResult};
pub use rates::{linear_tail_norms, mdep_rate_check, rate_experiment, BlockRule, MdepResult, RatePoint, RateResult};
pub use report::{CellDetail, CellRow, ExperimentReport};

use crate::error::Result;
use crate::model::{Family, InnovationLaw, ProcessSpec};
use crate::rng::{Purpose, RngContract};

fn or_default<T: Clone>(v: &[T], d: T) -> Vec<T> {
    if v.is_empty() {
        vec![d]
    } else {
        v.to_vec()
    }
}

fn with_alpha(spec: &ProcessSpec, alpha: f64) -> ProcessSpec {
    let mut s = spec.clone();
    if s.family == Family::Linear {
        s.alpha = alpha;
    }
    s
}

fn default_alpha(spec: &ProcessSpec) -> f64 {
    if spec.family == Family::Linear {
        spec.alpha
    } else {
        1.0
    }
}

/// Runs every cell of `config`. Cell `k` draws from
/// `RngContract::new(seed).derive(Cell, k)`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let base = RngContract::new(config.seed);
    let g = &config.grid;
    let kind = config.kind.as_str().to_string();
    let mut rows = Vec::new();
    let mut details = Vec::new();
    let mut ecdf = Vec::new();
    let mut runtimes_ms = Vec::new();
    let mut cell = 0usize;
    let next = |cell: &mut usize| {
        let c = *cell;
        *cell += 1;
        (c, base.derive(Purpose::Cell, c as u64))
    };
    let r = config.replications;
    match config.kind {
        ExperimentKind::Coverage => {
            let ms: Vec<Option<usize>> = if g.block_len.is_empty() { vec![None] } else { g.block_len.iter().map(|m| Some(*m)).collect() };
            for &n in &g.n {
                for p in config.ps() {
                    for &m in &ms {
                        for &theta in &or_default(&g.theta, 0.95) {
                            let (c, rng) = next(&mut cell);
                            let t = Instant::now();
                            let spec = config.spec.clone().with_p(p);
                            let res = coverage_cell(&spec, n, theta, m, config.draws, r, rng)?;
                            runtimes_ms.push(t.elapsed().as_secs_f64() * 1e3);
                            rows.push(CellRow {
                                cell: c,
                                kind: kind.clone(),
                                n,
                                p,
                                block_len: Some(res.block_len),
                                theta: Some(theta),
                                q: None,
                                alpha: None,
                                replications: r,
                                value: res.coverage,
                                se: Some(res.se),
                                reference: Some(theta),
                                p_value: None,
                                stream_id: rng.stream_id,
                            });
                            details.push(CellDetail::Coverage(res));
                        }
                    }
                }
            }
        }
        ExperimentKind::Ga => {
            for &n in &g.n {
                for p in config.ps() {
                    let (c, rng) = next(&mut cell);
                    let t = Instant::now();
                    let spec = config.spec.clone().with_p(p);
                    let opts = GaOptions {
                        permutations: config.permutations,
                        approximate_oracle: config.approximate_oracle,
                        ecdf_points: config.ecdf_points,
                    };
                    let mut res = ga_distance_with(&spec, n, r, opts, rng)?;
                    runtimes_ms.push(t.elapsed().as_secs_f64() * 1e3);
                    if let Some(dump) = res.ecdf.take() {
                        ecdf.push((c, dump));
                    }
                    rows.push(CellRow {
                        cell: c,
                        kind: kind.clone(),
                        n,
                        p,
                        block_len: None,
                        theta: None,
                        q: None,
                        alpha: None,
                        replications: r,
                        value: res.ks.statistic,
                        se: None,
                        reference: None,
                        p_value: res.ks.p_value,
                        stream_id: rng.stream_id,
                    });
                    details.push(CellDetail::Ga(res));
                }
            }
        }
        ExperimentKind::Rate => {
            let rules: Vec<BlockRule> = if g.block_len.is_empty() {
                vec![g.block_rule.unwrap_or_default()]
            } else {
                g.block_len.iter().map(|&m| BlockRule::Fixed { block_len: m }).collect()
            };
            for p in config.ps() {
                for &q in &or_default(&g.q, 8.0) {
                    for &alpha in &or_default(&g.alpha, default_alpha(&config.spec)) {
                        for rule in &rules {
                            let (c, rng) = next(&mut cell);
                            let t = Instant::now();
                            let spec = with_alpha(&config.spec, alpha).with_p(p);
                            let res = rate_experiment(&spec, &g.n, *rule, q, alpha, r, rng)?;
                            runtimes_ms.push(t.elapsed().as_secs_f64() * 1e3);
                            rows.push(CellRow {
                                cell: c,
                                kind: kind.clone(),
                                n: *g.n.last().expect("validated"),
                                p,
                                block_len: match rule {
                                    BlockRule::Fixed { block_len } => Some(*block_len),
                                    _ => None,
                                },
                                theta: None,
                                q: Some(q),
                                alpha: Some(alpha),
                                replications: r,
                                value: res.slope,
                                se: None,
                                reference: Some(res.theory_slope),
                                p_value: None,
                                stream_id: rng.stream_id,
                            });
                            details.push(CellDetail::Rate(res));
                        }
                    }
                }
            }
        }
        ExperimentKind::Mdep => {
            for &n in &g.n {
                for p in config.ps() {
                    for &q in &or_default(&g.q, 2.0) {
                        for &alpha in &or_default(&g.alpha, default_alpha(&config.spec)) {
                            let (c, rng) = next(&mut cell);
                            let t = Instant::now();
                            let spec = with_alpha(&config.spec, alpha).with_p(p);
                            let res = mdep_rate_check(&spec, n, q, alpha, &g.m, r, rng)?;
                            runtimes_ms.push(t.elapsed().as_secs_f64() * 1e3);
                            rows.push(CellRow {
                                cell: c,
                                kind: kind.clone(),
                                n,
                                p,
                                block_len: None,
                                theta: None,
                                q: Some(q),
                                alpha: Some(alpha),
                                replications: r,
                                value: res.slope.unwrap_or(f64::NAN),
                                se: None,
                                reference: Some(res.target_slope),
                                p_value: None,
                                stream_id: rng.stream_id,
                            });
                            details.push(CellDetail::Mdep(res));
                        }
                    }
                }
            }
        }
        ExperimentKind::Counterexample => {
            let (spec_q, threshold) = match config.spec.innovation {
                InnovationLaw::SymmetricPareto { tail_index, threshold } => (tail_index, Some(threshold)),
                _ => (4.0, None),
            };
            for &n in &g.n {
                for &q in &or_default(&g.q, spec_q) {
                    let (c, rng) = next(&mut cell);
                    let t = Instant::now();
                    let res = counterexample_demo(q, n, &g.p, r, threshold, config.permutations, rng)?;
                    runtimes_ms.push(t.elapsed().as_secs_f64() * 1e3);
                    for cc in &res.cells {
                        rows.push(CellRow {
                            cell: c,
                            kind: kind.clone(),
                            n,
                            p: cc.p,
                            block_len: None,
                            theta: None,
                            q: Some(q),
                            alpha: None,
                            replications: r,
                            value: cc.ks.statistic,
                            se: None,
                            reference: None,
                            p_value: cc.ks.p_value,
                            stream_id: rng.stream_id,
                        });
                    }
                    details.push(CellDetail::Counterexample(res));
                }
            }
        }
    }
    Ok(ExperimentReport {
        config: config.clone(),
        base_seed: config.seed,
        rows,
        details,
        ecdf,
        runtimes_ms,
    })
}
