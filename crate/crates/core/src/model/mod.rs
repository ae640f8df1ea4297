//! Parameters, state space and dynamics of the two-channel disorder model.

pub mod dynamics;
pub mod general;
pub mod params;
pub mod statistic;

pub use dynamics::{
    drift, flow, flow_semigroup_check, flow_signed, generator, generator_linear, jump,
    jump_unchecked, running_cost, Channel, FlowCoefficients,
};
pub use general::{drift_general, flow_general, jump_general, GeneralParams, GeneralState, SourceRates};
pub use params::{DiscountMode, DiscountSpec, ModelParams, ModelSpec};
pub use statistic::{
    init_statistic, odds_to_probability, probability_to_odds, total_odds, Statistic3,
    FEASIBILITY_SLACK,
};
