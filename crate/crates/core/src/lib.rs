//! Two-stage stochastic bipartite matching and joint matching/pricing.
//!
//! The crate is organised around a [`TwoStageInstance`]: first-stage demand is
//! known when the platform commits a matching, second-stage demand shows up
//! stochastically afterwards and can only use supply left over from the first
//! stage. On top of the instance model sit
//!
//! - [`matching`]: cardinality, supply-weighted, vertex-weighted and
//!   edge-weighted matching kernels plus Birkhoff-von Neumann style rounding of
//!   fractional matchings,
//! - [`balance`]: the balanced-utilization convex program and its level
//!   decomposition,
//! - [`submodular`]: the expected weighted rank function and local search over
//!   the dual transversal matroid,
//! - [`pricing`]: valuations, the ex-ante relaxation and the
//!   simulate-and-discard pricing policy,
//! - [`policies`]: the policy roster behind a single interface,
//! - [`bench`]: offline/online benchmark oracles, factor-revealing program
//!   evaluation, robustness checks and the Monte Carlo comparison harness.

pub mod balance;
pub mod bench;
mod condgrad;
pub mod error;
pub mod instance;
pub mod matching;
pub mod policies;
pub mod pricing;
pub mod rng;
pub mod submodular;

pub use error::{Error, Result};
pub use instance::{
    DemandVertex, Realization, RealizationModel, Scenario, Stage, SupplyVertex, TwoStageInstance,
};
pub use matching::{FractionalMatching, Matching, MatchingDistribution};
pub use pricing::valuation::Valuation;
