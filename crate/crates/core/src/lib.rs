//! Online budgeted truthful matching.
//!
//! A buyer with budget `B` matches sellers (left vertices, arriving in random
//! order, each with a private cost) to known right vertices. The crate
//! provides the offline threshold mechanism, the online mechanism with its
//! payment rule, a sample-and-price baseline, exhaustive oracles, mechanism
//! audits and a seeded experiment harness.

pub mod audit;
pub mod error;
pub mod harness;
pub mod model;
pub mod offline;
pub mod online;
pub mod par;
pub mod rng;
pub mod threshold;

pub use error::{Error, Result};
pub use model::{
    buck_per_bang, prune_graph, restrict_to_left_subset, validate_instance, ArrivalOrder, BipartiteInstance, Edge,
    InstanceStats, LeftVertex, Matching, RightVertex,
};
pub use offline::{greedy_matching, max_weight_matching_bruteforce, opt_budgeted_integral, OracleResult};
pub use online::{make_arrival_order, run_on, sample_and_price, MechanismConfig, OnlineOutcome, Variant};
pub use threshold::{is_gamma_feasible, threshold_bisection, threshold_sweep, ThresholdResult};
