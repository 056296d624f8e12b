//! Exact optimization of `E[max(Z1(x), Z2(x))]` where `Z1`, `Z2` are sums of
//! selected components of a multivariate Gaussian vector and `x` ranges over
//! a linearly constrained set of `2 x n` binary selections.
//!
//! The solver is a cutting-plane loop over relaxed master problems (RMPs)
//! whose optimum bounds the true objective; explored selections are removed
//! with no-good cuts until the bounds meet.

pub mod applications;
pub mod bounding;
pub mod gaussian;
pub mod milp;
pub mod model;
pub mod oracle;
pub mod solver;

pub use gaussian::{expected_max, expected_min, pair_moments, GaussianVector, PairMoments, SelectionPair};
pub use model::{FeasibleRegion, LinearConstraint, ProblemInstance, Relation, Sense};
pub use solver::{solve, SolveResult, SolveStatus, SolverConfig};
