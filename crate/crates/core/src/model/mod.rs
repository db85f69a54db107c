//! Process specifications, innovation laws and simulation.

pub mod law;
pub mod simulate;
pub mod spec;

pub use law::{InnovationLaw, InnovationSampler, ParetoShape, DEFAULT_PARETO_THRESHOLD};
pub use simulate::{
    draw_innovations, linear_truncation_sums, m_dependent_approx, sample_mean, simulate,
    simulate_coupled, simulate_recorded, InnovationRecord, Panel,
};
pub use spec::{Family, ProcessSpec, DEFAULT_BURN_IN, DEFAULT_TRUNCATION};
