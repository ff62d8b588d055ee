//! GOWA robust counterparts for uncertain single-objective optimization
//! with finitely many scenarios.
//!
//! A problem is a compact box `X ⊂ ℝⁿ` together with `p` nonnegative
//! scenario objectives `f(·, ζ_1), …, f(·, ζ_p)`, each written in a small
//! expression language ([`expr`]). At every point the scenario values are
//! sorted into ordered levels `s_1(x) ≥ … ≥ s_p(x)`, ties going to the lowest
//! scenario index ([`aggregation`]), and the generalized ordered weighted
//! aggregation
//!
//! ```text
//! φ(x) = (Σ w_i s_i(x)^λ)^(1/λ)
//! ```
//!
//! is minimized over the box ([`solver`], [`counterparts`]). The same
//! machinery solves the min-max, min-min and light robust counterparts and
//! classifies points as flimsily or highly robust.
//!
//! The ordered levels are nonsmooth where scenarios cross; [`subdiff`]
//! computes their Clarke subdifferentials in one dimension by tracking which
//! scenario realizes each level on either side of a tie.

// `!(x > 0.0)` style checks are deliberate: they reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aggregation;
pub mod cli;
pub mod counterparts;
pub mod expr;
pub mod interval;
pub mod problem;
pub mod solver;
pub mod subdiff;

pub use aggregation::{gowa_phi, ordered_levels, phi_at, scenario_values, AggregationError, OrderedLevels};
pub use counterparts::{CounterpartError, CounterpartKind, SolutionSet};
pub use expr::{parse_expression, Expr};
pub use interval::Interval;
pub use problem::{GowaConfig, LambdaMode, LightConfig, ProblemFile, SolverConfig, UncertainProblem};
