//! Fixtures shared by the benchmarks.

use hdts_core::model::simulate;
use hdts_core::{Panel, ProcessSpec, RngContract};
use ndarray::Array2;

/// Linear panel with banded cross-dependence.
pub fn linear_panel(n: usize, p: usize) -> Panel {
    let spec = ProcessSpec::linear(p, 1.0, 50, 2, 0.5);
    simulate(&spec, n, RngContract::new(1)).expect("valid spec")
}

/// Well-conditioned dense PSD matrix `F F^T / p + Id`.
pub fn psd_matrix(p: usize) -> Array2<f64> {
    let f = Array2::from_shape_fn((p, p), |(i, j)| (((i * 31 + j * 17) % 23) as f64 - 11.0) / 11.0);
    f.dot(&f.t()) / p as f64 + Array2::<f64>::eye(p)
}
