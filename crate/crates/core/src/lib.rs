//! Sparse stochastic linear bandits over convex action sets.
//!
//! Modules, from the bottom up: [`geometry`] (action sets and support-restricted
//! maximisation), [`oracles`] (exact and greedy sparse solvers, submodularity
//! ratio), [`estimation`] (exploration bases and least squares), [`algorithms`]
//! (the phased exploration/exploitation policies) and [`harness`] (configs,
//! multi-trial runs, regret ledgers and CSV export).

pub mod algorithms;
pub mod error;
pub mod estimation;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod oracles;
pub mod verify;

pub use algorithms::{Algorithm, AlgorithmState, Environment, Phase, Policy, RunTrace, Selection};
pub use error::{Error, Result};
pub use estimation::{BasisKind, ExplorationBasis, OlsState};
pub use geometry::{ActionSetGeometry, GeometryKind, SupportSet};
pub use linalg::{Matrix, Vector};
