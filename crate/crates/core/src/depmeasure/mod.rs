//! Functional dependence measures, dependence-adjusted norms and the
//! Gaussian-approximation condition quantities.

pub mod conditions;
pub mod profile;

pub use conditions::{
    ga_condition_check, power_law_tau_threshold, ultra_c, ConditionInputs, ConditionValue, GAConditionReport,
    Regime,
};
pub use profile::{
    adjusted_norm, closed_form_profile, closed_form_profile_with_nu, mc_profile, mc_profile_with, tail_sums,
    DependenceProfile, McOptions, NormEntry, ProfileSource,
};
