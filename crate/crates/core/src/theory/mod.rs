//! Exact tools for small instances: stationary laws, feedback-graph update
//! probabilities, graph connectivity numbers and the optimal-cost oracle.

mod graph;
mod stationary;
mod tiny;
mod update_prob;
mod value_iteration;

pub use crate::eval::evaluate_policy;
pub use graph::{
    feedback_graph, graph_numbers, graph_numbers_full_space, GraphNumbers, SmallDigraph,
};
pub use stationary::{stationary, SparseChain};
pub use tiny::{stationary_distribution, TinyMdp, MAX_TINY_PAIRS};
pub use update_prob::{
    monte_carlo_frequencies, reveals_complete_rule, update_probability_fg,
    update_probability_generated, verify_single_demand_factor, verify_update_probability,
    FactorCheck, MonteCarloFrequencies, UpdateProbabilityReport,
};
pub use value_iteration::{
    stationary_average_cost, value_iteration, TabularPolicy, ValueIterationResult,
    DEFAULT_STATE_BUDGET,
};
