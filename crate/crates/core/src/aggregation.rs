//! Ordered levels `s_1 ≥ … ≥ s_p` and the aggregated objective `φ`.

use thiserror::Error;

use crate::expr::EvalError;
use crate::problem::{GowaConfig, LambdaMode, UncertainProblem};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AggregationError {
    #[error("point has {found} coordinates, the problem has dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("coordinate x{} = {value} lies outside the box [{lo}, {hi}]", axis + 1)]
    OutOfBox { axis: usize, value: f64, lo: f64, hi: f64 },
    #[error("scenario `{scenario}`: {source}")]
    Eval { scenario: String, source: EvalError },
    #[error("level s_{} = {value} must be positive in the geometric limit", level + 1)]
    NonpositiveLevelInGeometricMode { level: usize, value: f64 },
    #[error("level s_{} = {value} is negative; the power mean needs nonnegative levels", level + 1)]
    NegativeLevel { level: usize, value: f64 },
}

/// Evaluates every scenario objective at `x`, in scenario order.
pub fn scenario_values(problem: &UncertainProblem, x: &[f64]) -> Result<Vec<f64>, AggregationError> {
    if x.len() != problem.dim {
        return Err(AggregationError::DimensionMismatch {
            expected: problem.dim,
            found: x.len(),
        });
    }
    for (axis, (v, b)) in x.iter().zip(&problem.bounds).enumerate() {
        if !b.contains(*v) {
            return Err(AggregationError::OutOfBox {
                axis,
                value: *v,
                lo: b.lo,
                hi: b.hi,
            });
        }
    }
    problem
        .scenarios
        .iter()
        .map(|s| {
            s.expr.eval(x).map_err(|source| AggregationError::Eval {
                scenario: s.id.clone(),
                source,
            })
        })
        .collect()
}

/// Scenario values sorted into levels.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderedLevels {
    /// `s_1(x), …, s_p(x)`, non-increasing.
    pub values: Vec<f64>,
    /// `assignment[i]` is the zero-based scenario index realizing level `i`.
    pub assignment: Vec<usize>,
}

impl OrderedLevels {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Sorts values into non-increasing levels; exact ties go to the lowest
/// scenario index first.
///
/// # Panics
///
/// If any value is NaN.
pub fn ordered_levels(values: &[f64]) -> OrderedLevels {
    assert!(values.iter().all(|v| !v.is_nan()), "ordered_levels: NaN scenario value");
    let mut assignment: Vec<usize> = (0..values.len()).collect();
    // stable: equal values keep ascending index order
    assignment.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).expect("no NaN"));
    OrderedLevels {
        values: assignment.iter().map(|&j| values[j]).collect(),
        assignment,
    }
}

/// The weighted power mean of ordered levels.
///
/// `λ = 1` is evaluated as the plain weighted sum, so the extreme weight
/// vectors reproduce the largest and smallest level bit for bit. Other
/// exponents work with `ln Σ w_i s_i^λ`: near `s_i^λ = 1` through
/// `Σ w_i + Σ w_i (s_i^λ - 1)` with `expm1`/`ln_1p`, which keeps small `λ`
/// accurate, and elsewhere as a shifted log-sum-exp. Zero levels contribute
/// `0^λ = 0`.
pub fn gowa_phi(levels: &[f64], config: &GowaConfig) -> Result<f64, AggregationError> {
    let weights = config.weights();
    debug_assert_eq!(weights.len(), levels.len());
    match config.mode() {
        LambdaMode::Positive(1.0) => {
            Ok(weights.iter().zip(levels).map(|(w, s)| w * s).sum())
        }
        LambdaMode::Positive(lambda) => {
            // (w_i, λ ln s_i) over weighted positive levels; zero levels add 0
            let mut terms = Vec::with_capacity(levels.len());
            for (level, (&w, &s)) in weights.iter().zip(levels).enumerate() {
                if w == 0.0 {
                    continue;
                }
                if s < 0.0 {
                    return Err(AggregationError::NegativeLevel { level, value: s });
                }
                if s > 0.0 {
                    terms.push((w, lambda * s.ln()));
                }
            }
            if terms.is_empty() {
                return Ok(0.0);
            }
            let positive_weight: f64 = terms.iter().map(|(w, _)| w).sum();
            let log_total = if positive_weight >= 0.5 && terms.iter().all(|(_, t)| t.abs() <= 1.0) {
                let excess = (positive_weight - 1.0) + terms.iter().map(|(w, t)| w * t.exp_m1()).sum::<f64>();
                excess.ln_1p()
            } else {
                let top = terms.iter().map(|(_, t)| *t).fold(f64::NEG_INFINITY, f64::max);
                top + terms.iter().map(|(w, t)| w * (t - top).exp()).sum::<f64>().ln()
            };
            Ok((log_total / lambda).exp())
        }
        LambdaMode::GeometricLimit => {
            let mut log_sum = 0.0;
            for (level, (&w, &s)) in weights.iter().zip(levels).enumerate() {
                if w == 0.0 {
                    continue;
                }
                if !(s > 0.0) {
                    return Err(AggregationError::NonpositiveLevelInGeometricMode { level, value: s });
                }
                log_sum += w * s.ln();
            }
            Ok(log_sum.exp())
        }
    }
}

/// `φ(x)`: scenario values, ordered, then aggregated.
pub fn phi_at(problem: &UncertainProblem, config: &GowaConfig, x: &[f64]) -> Result<f64, AggregationError> {
    let levels = ordered_levels(&scenario_values(problem, x)?);
    gowa_phi(&levels.values, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval::Interval;

    fn ex32() -> UncertainProblem {
        UncertainProblem::from_sources(
            "ex32",
            vec![Interval::new(-2.0, 2.0)],
            &[
                ("z1", "sin(x1)+1"),
                ("z2", "exp(x1)/3"),
                ("z3", "(cos(x1)+1)^2"),
                ("z4", "x1^2"),
            ],
        )
        .unwrap()
    }

    #[test]
    fn values_at_origin() {
        let v = scenario_values(&ex32(), &[0.0]).unwrap();
        assert_eq!(v, vec![1.0, 1.0 / 3.0, 4.0, 0.0]);
        let lv = ordered_levels(&v);
        assert_eq!(lv.values, vec![4.0, 1.0, 1.0 / 3.0, 0.0]);
        assert_eq!(lv.assignment, vec![2, 0, 1, 3]);
    }

    #[test]
    fn out_of_box_is_rejected() {
        assert!(matches!(
            scenario_values(&ex32(), &[2.5]),
            Err(AggregationError::OutOfBox { axis: 0, .. })
        ));
        assert!(matches!(
            scenario_values(&ex32(), &[0.0, 1.0]),
            Err(AggregationError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let lv = ordered_levels(&[4.0, 4.0, 4.0, 1.0, 5.0]);
        assert_eq!(lv.values, vec![5.0, 4.0, 4.0, 4.0, 1.0]);
        assert_eq!(lv.assignment, vec![4, 0, 1, 2, 3]);
        let lv = ordered_levels(&[0.0, -0.0]);
        assert_eq!(lv.assignment, vec![0, 1]);
        let lv = ordered_levels(&[-0.0, 0.0]);
        assert_eq!(lv.assignment, vec![0, 1]);
        assert_eq!(ordered_levels(&[7.5]).assignment, vec![0]);
    }

    #[test]
    #[should_panic]
    fn nan_is_a_precondition_violation() {
        ordered_levels(&[1.0, f64::NAN]);
    }

    #[test]
    fn phi_examples() {
        let third = 1.0 / 3.0;
        let cfg = GowaConfig::positive(vec![third, third, third, 0.0], 1.0).unwrap();
        let v = gowa_phi(&[4.0, 1.0, third, 0.0], &cfg).unwrap();
        assert!((v - 16.0 / 9.0).abs() < 1e-15, "{v}");
        assert!((phi_at(&ex32(), &cfg, &[0.0]).unwrap() - 16.0 / 9.0).abs() < 1e-15);

        let cfg = GowaConfig::positive(vec![0.3, 0.7], 0.5).unwrap();
        let v = gowa_phi(&[2.0, 0.0], &cfg).unwrap();
        assert!((v - 0.18).abs() < 1e-14, "{v}");
        let v = gowa_phi(&[1.0, 1.0], &cfg).unwrap();
        assert!((v - 1.0).abs() < 1e-15, "{v}");
    }

    #[test]
    fn all_zero_levels() {
        let cfg = GowaConfig::positive(vec![0.5, 0.5], 2.0).unwrap();
        assert_eq!(gowa_phi(&[0.0, 0.0], &cfg).unwrap(), 0.0);
        // weights whose float sum is not exactly one
        let w = vec![0.11378590254574629, 0.43427445927703034, 0.34089438107429876, 0.11104525710292472];
        let cfg = GowaConfig::positive(w, 3.0).unwrap();
        assert_eq!(gowa_phi(&[0.0; 4], &cfg).unwrap(), 0.0);
    }

    #[test]
    fn tiny_and_huge_levels() {
        let cfg = GowaConfig::positive(vec![0.5, 0.5], 3.0).unwrap();
        let v = gowa_phi(&[1e-10, 1e-10], &cfg).unwrap();
        assert!((v / 1e-10 - 1.0).abs() < 1e-12, "{v}");
        let v = gowa_phi(&[1e200, 1e200], &cfg).unwrap();
        assert!((v / 1e200 - 1.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn geometric_limit() {
        let cfg = GowaConfig::new(vec![0.5, 0.5, 0.0], LambdaMode::GeometricLimit, 3).unwrap();
        let v = gowa_phi(&[4.0, 1.0, 0.0], &cfg).unwrap();
        assert!((v - 2.0).abs() < 1e-15);
        let cfg = GowaConfig::new(vec![0.5, 0.0, 0.5], LambdaMode::GeometricLimit, 3).unwrap();
        assert!(matches!(
            gowa_phi(&[4.0, 1.0, 0.0], &cfg),
            Err(AggregationError::NonpositiveLevelInGeometricMode { level: 2, .. })
        ));
    }

    #[test]
    fn extreme_weights_are_exact() {
        let levels = [3.7, 2.2, 0.9, 0.1];
        assert_eq!(gowa_phi(&levels, &GowaConfig::max_weights(4)).unwrap(), 3.7);
        assert_eq!(gowa_phi(&levels, &GowaConfig::min_weights(4)).unwrap(), 0.1);
    }
}
