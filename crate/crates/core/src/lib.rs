//! Truthful mechanisms for bounded-length barter exchange.
//!
//! Wish lists induce a digraph on agents; its short directed cycles become nodes of a conflict
//! graph, and feasible exchanges are exactly the independent sets of that graph. Mechanisms
//! are local-search or exact algorithms on the graph, and the [`verification`] module measures
//! their approximation ratios and probes them for profitable misreports.

pub mod cycle_graph;
pub mod error;
pub mod exact;
pub mod instances;
pub mod local_search;
pub mod mechanisms;
pub mod model;
pub mod rational;
pub mod verification;

pub use cycle_graph::{enumerate_cycles, CycleGraph, IndependentSet, Node, NodeId, NodeSet};
pub use error::{BxError, Result};
pub use instances::{InstanceBundle, InstanceSource};
pub use local_search::{
    check_precedes, concatenate, restrict_rule, run_local_search, AlgRun, Algorithm, AllForQ, Expansion,
    ImprovementRule, LengthFilter, LocalSearch, LocalSearchTrace, RunStats,
};
pub use mechanisms::{lambda_profile, LambdaProfile, MechanismReport, MechanismSpec};
pub use model::{
    respects, social_welfare, utility, AgentId, Exchange, LengthFunction, TradingCycle, Utility, WishListVector,
};
pub use rational::{fmt_rational, parse_rational, Rational};
pub use verification::{ManipulationFinding, Ratio, RatioReport};
