//! Uncertain problems, aggregation settings and validation of the standing
//! assumptions (finite scenario list, compact box, nonnegative objectives).

mod file;

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

use crate::expr::{parse_expression_in, EvalError, Expr, ParseError};
use crate::interval::Interval;
use crate::solver::grid_axis;

pub use file::{ProblemFile, ProblemFileError};

/// One scenario `ζ_i` and its objective `f(·, ζ_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub id: String,
    pub expr: Expr,
}

impl Scenario {
    pub fn new(id: impl Into<String>, expr: Expr) -> Self {
        Scenario { id: id.into(), expr }
    }
}

/// Feasible box plus an ordered list of scenario objectives.
///
/// The list order is the scenario index used by the tie rule everywhere
/// downstream: index 0 is `ζ_1`.
#[derive(Clone, Debug, PartialEq)]
pub struct UncertainProblem {
    pub name: String,
    pub dim: usize,
    pub bounds: Vec<Interval>,
    pub scenarios: Vec<Scenario>,
}

impl UncertainProblem {
    pub fn new(name: impl Into<String>, bounds: Vec<Interval>, scenarios: Vec<Scenario>) -> Self {
        UncertainProblem {
            name: name.into(),
            dim: bounds.len(),
            bounds,
            scenarios,
        }
    }

    /// Builds a problem from `(id, expression text)` pairs, parsing each
    /// expression against the box dimension.
    pub fn from_sources(
        name: impl Into<String>,
        bounds: Vec<Interval>,
        sources: &[(&str, &str)],
    ) -> Result<Self, ParseError> {
        let dim = bounds.len();
        let scenarios = sources
            .iter()
            .map(|(id, src)| Ok(Scenario::new(*id, parse_expression_in(src, dim)?)))
            .collect::<Result<Vec<_>, ParseError>>()?;
        Ok(UncertainProblem::new(name, bounds, scenarios))
    }

    /// Number of scenarios `p`.
    pub fn scenario_count(&self) -> usize {
        self.scenarios.len()
    }

    pub fn scenario_index(&self, id: &str) -> Option<usize> {
        self.scenarios.iter().position(|s| s.id == id)
    }

    /// Componentwise membership in the closed box.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim && x.iter().zip(&self.bounds).all(|(v, b)| b.contains(*v))
    }

    /// Evaluates a single scenario objective.
    pub fn eval_scenario(&self, index: usize, x: &[f64]) -> Result<f64, EvalError> {
        self.scenarios[index].expr.eval(x)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("problem has dimension 0")]
    ZeroDimension,
    #[error("dimension is {dim} but {bounds} box bounds were given")]
    BoxDimensionMismatch { dim: usize, bounds: usize },
    #[error("empty box on x{}: lower bound {lo} exceeds upper bound {hi}", axis + 1)]
    EmptyBox { axis: usize, lo: f64, hi: f64 },
    #[error("box bound on x{} is not finite", axis + 1)]
    UnboundedBox { axis: usize },
    #[error("problem has no scenarios")]
    NoScenarios,
    #[error("scenario id `{0}` appears more than once")]
    DuplicateScenarioId(String),
    #[error("scenario `{scenario}` uses x{variable} but the problem has dimension {dim}")]
    UnknownVariable { scenario: String, variable: usize, dim: usize },
    #[error("scenario `{scenario}` cannot be evaluated at {point:?}: {source}")]
    SampleDomainError {
        scenario: String,
        point: Vec<f64>,
        source: EvalError,
    },
    /// Warning-grade unless the geometric limit mode is requested.
    #[error("scenario `{scenario}` is negative at {point:?} (value {value})")]
    NegativeObjectiveSample { scenario: String, point: Vec<f64>, value: f64 },
    #[error("scenario `{scenario}` is not strictly positive at {point:?} (value {value}), as the geometric limit requires")]
    NonpositiveObjectiveSample { scenario: String, point: Vec<f64>, value: f64 },
}

/// Outcome of a successful validation: the problem is usable, possibly with
/// warnings about sampled negative values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub warnings: Vec<ProblemError>,
}

/// Samples per axis used for the nonnegativity check.
pub const VALIDATION_SAMPLES_PER_AXIS: usize = 101;
const VALIDATION_MAX_SAMPLES: usize = 1_000_000;
const NEGATIVITY_SLACK: f64 = 1e-9;

/// Validates a problem in the default (positive λ) setting.
pub fn validate_problem(problem: &UncertainProblem) -> Result<ValidationReport, Vec<ProblemError>> {
    validate_problem_for(problem, None)
}

/// Validates a problem, tightening the nonnegativity check to strict
/// positivity when the geometric limit mode is requested.
pub fn validate_problem_for(
    problem: &UncertainProblem,
    mode: Option<LambdaMode>,
) -> Result<ValidationReport, Vec<ProblemError>> {
    let mut errors = Vec::new();
    if problem.dim == 0 {
        errors.push(ProblemError::ZeroDimension);
    }
    if problem.bounds.len() != problem.dim {
        errors.push(ProblemError::BoxDimensionMismatch {
            dim: problem.dim,
            bounds: problem.bounds.len(),
        });
    }
    for (axis, b) in problem.bounds.iter().enumerate() {
        if !b.lo.is_finite() || !b.hi.is_finite() {
            errors.push(ProblemError::UnboundedBox { axis });
        } else if b.is_empty() {
            errors.push(ProblemError::EmptyBox { axis, lo: b.lo, hi: b.hi });
        }
    }
    if problem.scenarios.is_empty() {
        errors.push(ProblemError::NoScenarios);
    }
    let mut seen = HashSet::new();
    for s in &problem.scenarios {
        if !seen.insert(s.id.as_str()) {
            errors.push(ProblemError::DuplicateScenarioId(s.id.clone()));
        }
        let arity = s.expr.arity();
        if arity > problem.dim {
            errors.push(ProblemError::UnknownVariable {
                scenario: s.id.clone(),
                variable: arity,
                dim: problem.dim,
            });
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }

    let geometric = matches!(mode, Some(LambdaMode::GeometricLimit));
    let mut warnings = Vec::new();
    let per_axis = samples_per_axis(problem.dim);
    let axes: Vec<Vec<f64>> = problem.bounds.iter().map(|b| grid_axis(*b, per_axis)).collect();
    let mut flagged = vec![false; problem.scenario_count()];
    let mut point = vec![0.0; problem.dim];
    let total = per_axis.pow(problem.dim as u32);
    for k in 0..total {
        let mut rem = k;
        for (axis, coords) in axes.iter().enumerate() {
            point[axis] = coords[rem % per_axis];
            rem /= per_axis;
        }
        for (i, s) in problem.scenarios.iter().enumerate() {
            if flagged[i] {
                continue;
            }
            match s.expr.eval(&point) {
                Err(source) => {
                    flagged[i] = true;
                    errors.push(ProblemError::SampleDomainError {
                        scenario: s.id.clone(),
                        point: point.clone(),
                        source,
                    });
                }
                Ok(value) if geometric && value <= 0.0 => {
                    flagged[i] = true;
                    errors.push(ProblemError::NonpositiveObjectiveSample {
                        scenario: s.id.clone(),
                        point: point.clone(),
                        value,
                    });
                }
                Ok(value) if value < -NEGATIVITY_SLACK => {
                    flagged[i] = true;
                    warnings.push(ProblemError::NegativeObjectiveSample {
                        scenario: s.id.clone(),
                        point: point.clone(),
                        value,
                    });
                }
                Ok(_) => {}
            }
        }
    }
    if errors.is_empty() {
        Ok(ValidationReport { warnings })
    } else {
        Err(errors)
    }
}

fn samples_per_axis(dim: usize) -> usize {
    let mut n = VALIDATION_SAMPLES_PER_AXIS;
    while n > 3 && n.checked_pow(dim as u32).is_none_or(|t| t > VALIDATION_MAX_SAMPLES) {
        n -= 1;
    }
    n
}

/// How the aggregation exponent λ is applied.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LambdaMode {
    /// Weighted power mean with exponent `λ > 0`.
    Positive(f64),
    /// The `λ → 0+` limit, a weighted geometric mean.
    GeometricLimit,
}

impl fmt::Display for LambdaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LambdaMode::Positive(l) => write!(f, "{l}"),
            LambdaMode::GeometricLimit => f.write_str("geometric"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("expected {expected} weights, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("weight w{} = {value} is negative", index + 1)]
    NegativeWeight { index: usize, value: f64 },
    #[error("weights sum to {sum}, not 1")]
    SumNotOne { sum: f64 },
    #[error("lambda must be a positive real, got {0}")]
    NonPositiveLambda(f64),
    #[error("unknown nominal scenario `{0}`")]
    UnknownNominal(String),
    #[error("epsilon must be a nonnegative real, got {0}")]
    NegativeEpsilon(f64),
    #[error("solver needs at least 3 grid points per axis, got {0}")]
    TooFewGridPoints(usize),
    #[error("solver tolerance `{name}` must be positive, got {value}")]
    NonPositiveTolerance { name: &'static str, value: f64 },
}

/// Absolute tolerance on `Σ w_i = 1`.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Checks a weight vector: length `p`, entries nonnegative, sum one.
pub fn validate_weights(weights: &[f64], p: usize) -> Result<(), ConfigError> {
    if weights.len() != p {
        return Err(ConfigError::LengthMismatch {
            expected: p,
            found: weights.len(),
        });
    }
    if let Some((index, &value)) = weights.iter().enumerate().find(|(_, w)| !(**w >= 0.0)) {
        return Err(ConfigError::NegativeWeight { index, value });
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(ConfigError::SumNotOne { sum });
    }
    Ok(())
}

/// Ordered weights `w_1..w_p` and the exponent mode.
#[derive(Clone, Debug, PartialEq)]
pub struct GowaConfig {
    weights: Vec<f64>,
    mode: LambdaMode,
}

impl GowaConfig {
    /// Validates the weights against `p` scenarios and the exponent.
    pub fn new(weights: Vec<f64>, mode: LambdaMode, p: usize) -> Result<Self, ConfigError> {
        validate_weights(&weights, p)?;
        if let LambdaMode::Positive(l) = mode {
            if !(l > 0.0) || !l.is_finite() {
                return Err(ConfigError::NonPositiveLambda(l));
            }
        }
        Ok(GowaConfig { weights, mode })
    }

    /// Positive-λ configuration.
    pub fn positive(weights: Vec<f64>, lambda: f64) -> Result<Self, ConfigError> {
        let p = weights.len();
        GowaConfig::new(weights, LambdaMode::Positive(lambda), p)
    }

    /// `w = (1, 0, …, 0)`, `λ = 1`: the min-max objective.
    pub fn max_weights(p: usize) -> Self {
        let mut weights = vec![0.0; p];
        weights[0] = 1.0;
        GowaConfig {
            weights,
            mode: LambdaMode::Positive(1.0),
        }
    }

    /// `w = (0, …, 0, 1)`, `λ = 1`: the min-min objective.
    pub fn min_weights(p: usize) -> Self {
        let mut weights = vec![0.0; p];
        weights[p - 1] = 1.0;
        GowaConfig {
            weights,
            mode: LambdaMode::Positive(1.0),
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mode(&self) -> LambdaMode {
        self.mode
    }
}

/// Optimum of the nominal scenario, `(x̂, f(x̂, ζ̂))`.
#[derive(Clone, Debug, PartialEq)]
pub struct NominalOptimum {
    pub point: Vec<f64>,
    pub value: f64,
}

/// Light robustness: nominal scenario and the allowed loss `ε`.
#[derive(Clone, Debug, PartialEq)]
pub struct LightConfig {
    /// Index of the nominal scenario.
    pub nominal: usize,
    pub epsilon: f64,
    /// Cached nominal optimum; solved for when absent.
    pub nominal_optimum: Option<NominalOptimum>,
}

impl LightConfig {
    pub fn new(problem: &UncertainProblem, nominal_id: &str, epsilon: f64) -> Result<Self, ConfigError> {
        let nominal = problem
            .scenario_index(nominal_id)
            .ok_or_else(|| ConfigError::UnknownNominal(nominal_id.to_string()))?;
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(ConfigError::NegativeEpsilon(epsilon));
        }
        Ok(LightConfig {
            nominal,
            epsilon,
            nominal_optimum: None,
        })
    }
}

/// Grid and refinement settings for the box minimizer.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Uniform grid nodes per axis, endpoints included.
    pub grid_points: usize,
    /// Final bracket width (1-D) or step size (n-D) of the local refinement.
    pub refine_tol: f64,
    /// Refined optima closer than this are the same optimum.
    pub optimum_merge_radius: f64,
    /// Refined optima within this of the best value are all reported.
    pub near_optimal_band: f64,
}

impl SolverConfig {
    /// Defaults for a problem of dimension `dim`: 2001 nodes in 1-D,
    /// 201 per axis otherwise.
    pub fn for_dim(dim: usize) -> Self {
        SolverConfig {
            grid_points: if dim <= 1 { 2001 } else { 201 },
            ..SolverConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.grid_points < 3 {
            return Err(ConfigError::TooFewGridPoints(self.grid_points));
        }
        for (name, value) in [
            ("refine_tol", self.refine_tol),
            ("optimum_merge_radius", self.optimum_merge_radius),
            ("near_optimal_band", self.near_optimal_band),
        ] {
            if !(value > 0.0) {
                return Err(ConfigError::NonPositiveTolerance { name, value });
            }
        }
        Ok(())
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            grid_points: 2001,
            refine_tol: 1e-6,
            optimum_merge_radius: 1e-4,
            near_optimal_band: 1e-6,
        }
    }
}
