//! Simultaneous inference for means and covariances of high-dimensional
//! stationary time series.

pub mod depmeasure;
pub mod error;
pub mod experiments;
pub mod gboot;
pub mod io;
pub mod longrun;
pub mod model;
pub mod par;
pub mod rng;
pub mod stats;
pub mod covinf;

pub use error::{Error, Result};
pub use model::{InnovationLaw, Panel, ProcessSpec};
pub use rng::{Purpose, RngContract};
