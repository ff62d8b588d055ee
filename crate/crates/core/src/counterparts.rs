//! Robust counterparts of an uncertain problem and point classification.

use std::fmt;

use thiserror::Error;

use crate::aggregation::{gowa_phi, ordered_levels, phi_at, scenario_values, AggregationError};
use crate::problem::{ConfigError, GowaConfig, LightConfig, NominalOptimum, SolverConfig, UncertainProblem};
use crate::solver::{minimize, Minimum, SolverError, SolverStats};

/// Which counterpart to solve.
#[derive(Clone, Debug, PartialEq)]
pub enum CounterpartKind {
    /// Minimize the aggregated objective `φ`.
    Gowa(GowaConfig),
    /// Minimize the worst scenario.
    MinMax,
    /// Minimize the best scenario.
    MinMin,
    /// Minimize the worst scenario among points whose nominal value is within
    /// `ε` of the nominal optimum.
    Light(LightConfig),
}

impl CounterpartKind {
    pub fn label(&self) -> &'static str {
        match self {
            CounterpartKind::Gowa(_) => "gowa",
            CounterpartKind::MinMax => "minmax",
            CounterpartKind::MinMin => "minmin",
            CounterpartKind::Light(_) => "light",
        }
    }
}

impl fmt::Display for CounterpartKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CounterpartError {
    #[error(transparent)]
    Aggregation(#[from] AggregationError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("no point satisfies the light robustness constraint f(x, {nominal}) <= {bound}")]
    InfeasibleLightConstraint { nominal: String, bound: f64 },
    #[error("counterpart needs {expected} weights but the problem has {found} scenarios")]
    WeightCount { expected: usize, found: usize },
}

/// Near-optimal points of one counterpart.
#[derive(Clone, Debug, PartialEq)]
pub struct SolutionSet {
    pub points: Vec<Vec<f64>>,
    /// Objective value at each point.
    pub values: Vec<f64>,
    /// Optimal value.
    pub value: f64,
    pub kind: CounterpartKind,
    pub stats: SolverStats,
    /// For light robustness: the nominal optimum the constraint was built from.
    pub nominal_optimum: Option<NominalOptimum>,
}

impl SolutionSet {
    fn from_minimum(m: Minimum, kind: CounterpartKind, nominal_optimum: Option<NominalOptimum>) -> Self {
        SolutionSet {
            points: m.points,
            values: m.values,
            value: m.value,
            kind,
            stats: m.stats,
            nominal_optimum,
        }
    }
}

fn check_weights(problem: &UncertainProblem, config: &GowaConfig) -> Result<(), CounterpartError> {
    if config.weights().len() != problem.scenario_count() {
        return Err(CounterpartError::WeightCount {
            expected: config.weights().len(),
            found: problem.scenario_count(),
        });
    }
    Ok(())
}

/// Objective of a counterpart at `x`. For light robustness this is the
/// worst-case value; the constraint is applied by the solver.
pub fn counterpart_objective(problem: &UncertainProblem, kind: &CounterpartKind, x: &[f64]) -> Result<f64, CounterpartError> {
    let values = scenario_values(problem, x)?;
    let levels = ordered_levels(&values);
    Ok(match kind {
        CounterpartKind::Gowa(config) => {
            check_weights(problem, config)?;
            gowa_phi(&levels.values, config)?
        }
        CounterpartKind::MinMax | CounterpartKind::Light(_) => levels.values[0],
        CounterpartKind::MinMin => levels.values[levels.len() - 1],
    })
}

type NoFilter = fn(&[f64]) -> Result<bool, CounterpartError>;

/// Minimizes one scenario objective over the box.
pub fn solve_scenario(problem: &UncertainProblem, index: usize, config: &SolverConfig) -> Result<Minimum, CounterpartError> {
    let objective = |x: &[f64]| -> Result<f64, CounterpartError> { Ok(scenario_values_one(problem, index, x)?) };
    minimize(objective, &problem.bounds, config, None::<NoFilter>, &[])
}

fn scenario_values_one(problem: &UncertainProblem, index: usize, x: &[f64]) -> Result<f64, AggregationError> {
    problem.eval_scenario(index, x).map_err(|source| AggregationError::Eval {
        scenario: problem.scenarios[index].id.clone(),
        source,
    })
}

/// Nominal optimum `(x̂, f(x̂, ζ̂))`: the cached pair when present, otherwise
/// the lexicographically first minimizer of the nominal scenario.
pub fn nominal_optimum(
    problem: &UncertainProblem,
    light: &LightConfig,
    config: &SolverConfig,
) -> Result<NominalOptimum, CounterpartError> {
    if let Some(cached) = &light.nominal_optimum {
        return Ok(cached.clone());
    }
    let m = solve_scenario(problem, light.nominal, config)?;
    Ok(NominalOptimum {
        point: m.points[0].clone(),
        value: m.values[0],
    })
}

/// Solves a counterpart by grid scan and local refinement.
pub fn solve_counterpart(
    problem: &UncertainProblem,
    kind: &CounterpartKind,
    config: &SolverConfig,
) -> Result<SolutionSet, CounterpartError> {
    if let CounterpartKind::Gowa(gowa) = kind {
        check_weights(problem, gowa)?;
    }
    match kind {
        CounterpartKind::Light(light) => {
            let nominal = nominal_optimum(problem, light, config)?;
            let bound = nominal.value + light.epsilon;
            let filter = |x: &[f64]| -> Result<bool, CounterpartError> {
                Ok(scenario_values_one(problem, light.nominal, x)? <= bound)
            };
            let objective = |x: &[f64]| counterpart_objective(problem, kind, x);
            let seeds = [nominal.point.clone()];
            match minimize(objective, &problem.bounds, config, Some(filter), &seeds) {
                Ok(m) => Ok(SolutionSet::from_minimum(m, kind.clone(), Some(nominal))),
                Err(CounterpartError::Solver(SolverError::AllPointsInfeasible)) => {
                    Err(CounterpartError::InfeasibleLightConstraint {
                        nominal: problem.scenarios[light.nominal].id.clone(),
                        bound,
                    })
                }
                Err(e) => Err(e),
            }
        }
        _ => {
            let objective = |x: &[f64]| counterpart_objective(problem, kind, x);
            let m = minimize(objective, &problem.bounds, config, None::<NoFilter>, &[])?;
            Ok(SolutionSet::from_minimum(m, kind.clone(), None))
        }
    }
}

/// Default tolerance on objective values for flimsily/highly robustness.
pub const CLASSIFY_TOL: f64 = 1e-6;

/// Per-scenario optimality of a point.
#[derive(Clone, Debug, PartialEq)]
pub struct Classification {
    /// `f(x, ζ_i)` for each scenario.
    pub values: Vec<f64>,
    /// Global minimum of each scenario over the box, as found by the solver.
    pub scenario_minima: Vec<f64>,
    /// Whether `x` is within `tol` of each scenario's minimum.
    pub optimal_for: Vec<bool>,
}

impl Classification {
    /// Optimal for at least one scenario.
    pub fn flimsily(&self) -> bool {
        self.optimal_for.iter().any(|b| *b)
    }

    /// Optimal for every scenario.
    pub fn highly(&self) -> bool {
        self.optimal_for.iter().all(|b| *b)
    }
}

/// Compares `f(x, ζ_i)` with each scenario's minimum over the box.
pub fn classify_point(
    problem: &UncertainProblem,
    x: &[f64],
    config: &SolverConfig,
    tol: f64,
) -> Result<Classification, CounterpartError> {
    let values = scenario_values(problem, x)?;
    let scenario_minima = (0..problem.scenario_count())
        .map(|i| solve_scenario(problem, i, config).map(|m| m.value))
        .collect::<Result<Vec<_>, _>>()?;
    let optimal_for = values.iter().zip(&scenario_minima).map(|(v, m)| *v <= m + tol).collect();
    Ok(Classification {
        values,
        scenario_minima,
        optimal_for,
    })
}

pub fn classify_flimsily(problem: &UncertainProblem, x: &[f64], config: &SolverConfig, tol: f64) -> Result<bool, CounterpartError> {
    Ok(classify_point(problem, x, config, tol)?.flimsily())
}

pub fn classify_highly(problem: &UncertainProblem, x: &[f64], config: &SolverConfig, tol: f64) -> Result<bool, CounterpartError> {
    Ok(classify_point(problem, x, config, tol)?.highly())
}

/// Slack allowed in the ordering `minmin ≤ gowa ≤ minmax`.
pub const BOUNDS_SLACK: f64 = 1e-9;

/// Optimal values of the three counterparts and whether they are ordered.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundsReport {
    pub minmin: SolutionSet,
    pub gowa: SolutionSet,
    pub minmax: SolutionSet,
    pub minmin_value: f64,
    pub gowa_value: f64,
    pub minmax_value: f64,
    pub holds: bool,
}

/// Solves min-min, aggregated and min-max counterparts and checks that
/// their optimal values are ordered.
///
/// Each optimal value is the best objective value seen at any of the three
/// solution sets, so a point one solve missed but another found still counts.
pub fn bounds_check(problem: &UncertainProblem, gowa: &GowaConfig, config: &SolverConfig) -> Result<BoundsReport, CounterpartError> {
    let minmin = solve_counterpart(problem, &CounterpartKind::MinMin, config)?;
    let gowa_set = solve_counterpart(problem, &CounterpartKind::Gowa(gowa.clone()), config)?;
    let minmax = solve_counterpart(problem, &CounterpartKind::MinMax, config)?;

    let best_over = |kind: &CounterpartKind, own: f64| -> Result<f64, CounterpartError> {
        let mut best = own;
        for set in [&minmin, &gowa_set, &minmax] {
            for p in &set.points {
                best = best.min(counterpart_objective(problem, kind, p)?);
            }
        }
        Ok(best)
    };
    let minmin_value = best_over(&CounterpartKind::MinMin, minmin.value)?;
    let gowa_value = best_over(&gowa_set.kind, gowa_set.value)?;
    let minmax_value = best_over(&CounterpartKind::MinMax, minmax.value)?;
    let holds = minmin_value <= gowa_value + BOUNDS_SLACK && gowa_value <= minmax_value + BOUNDS_SLACK;
    Ok(BoundsReport {
        minmin,
        gowa: gowa_set,
        minmax,
        minmin_value,
        gowa_value,
        minmax_value,
        holds,
    })
}

/// `φ` at `x` for a configuration, mapped into the counterpart error type.
pub fn gowa_value_at(problem: &UncertainProblem, config: &GowaConfig, x: &[f64]) -> Result<f64, CounterpartError> {
    check_weights(problem, config)?;
    Ok(phi_at(problem, config, x)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval::Interval;

    fn ex41() -> UncertainProblem {
        UncertainProblem::from_sources(
            "ex41",
            vec![Interval::new(-1.0, 1.0)],
            &[("z1", "x1^3+1"), ("z2", "-x1+1")],
        )
        .unwrap()
    }

    #[test]
    fn objectives_at_points() {
        let p = ex41();
        assert_eq!(counterpart_objective(&p, &CounterpartKind::MinMax, &[0.0]).unwrap(), 1.0);
        assert_eq!(counterpart_objective(&p, &CounterpartKind::MinMin, &[1.0]).unwrap(), 0.0);
        let single = UncertainProblem::from_sources("one", vec![Interval::new(0.0, 2.0)], &[("a", "(x1-1)^2+sin(x1)")]).unwrap();
        let gowa = CounterpartKind::Gowa(GowaConfig::positive(vec![1.0], 0.7).unwrap());
        for x in [0.0, 0.4, 1.3, 2.0] {
            let a = counterpart_objective(&single, &CounterpartKind::MinMax, &[x]).unwrap();
            let b = counterpart_objective(&single, &CounterpartKind::MinMin, &[x]).unwrap();
            let c = counterpart_objective(&single, &gowa, &[x]).unwrap();
            assert_eq!(a, b);
            assert!((a - c).abs() <= 1e-14 * a.abs().max(1.0));
        }
    }

    #[test]
    fn weight_count_must_match() {
        let kind = CounterpartKind::Gowa(GowaConfig::positive(vec![1.0], 1.0).unwrap());
        assert!(matches!(
            counterpart_objective(&ex41(), &kind, &[0.0]),
            Err(CounterpartError::WeightCount { .. })
        ));
    }

    #[test]
    fn classification() {
        let p = ex41();
        let cfg = SolverConfig::for_dim(1);
        let c = classify_point(&p, &[1.0], &cfg, CLASSIFY_TOL).unwrap();
        assert!(c.flimsily());
        assert!(!c.highly());
        let same = UncertainProblem::from_sources("same", vec![Interval::new(-1.0, 1.0)], &[("a", "x1^2"), ("b", "x1^2")]).unwrap();
        assert!(classify_highly(&same, &[0.0], &cfg, CLASSIFY_TOL).unwrap());
    }

    #[test]
    fn light_with_a_wrong_cached_optimum_is_infeasible() {
        let p = ex41();
        let mut light = LightConfig::new(&p, "z2", 0.0).unwrap();
        light.nominal_optimum = Some(NominalOptimum {
            point: vec![0.0],
            value: -5.0,
        });
        let err = solve_counterpart(&p, &CounterpartKind::Light(light), &SolverConfig::for_dim(1)).unwrap_err();
        assert!(matches!(err, CounterpartError::InfeasibleLightConstraint { .. }), "{err}");
    }
}

#[cfg(test)]
mod props {
    use proptest::prelude::*;

    use super::*;
    use crate::interval::Interval;

    /// Shifted parabolas `a (x - m)² + c` on `[-2, 2]`.
    fn parabolas(params: &[(f64, f64, f64)]) -> UncertainProblem {
        let ids: Vec<String> = (1..=params.len()).map(|i| format!("z{i}")).collect();
        let sources: Vec<String> = params.iter().map(|(a, m, c)| format!("{a}*(x1 - ({m}))^2 + {c}")).collect();
        let pairs: Vec<(&str, &str)> = ids.iter().map(String::as_str).zip(sources.iter().map(String::as_str)).collect();
        UncertainProblem::from_sources("parabolas", vec![Interval::new(-2.0, 2.0)], &pairs).unwrap()
    }

    fn arb_parabolas() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
        proptest::collection::vec((0.1f64..3.0, -1.5f64..1.5, 0.0f64..2.0), 2..5)
    }

    proptest! {
        #[test]
        fn extreme_weights_reproduce_max_and_min(params in arb_parabolas(), x in -2.0f64..2.0) {
            let problem = parabolas(&params);
            let p = problem.scenario_count();
            let pairs = [
                (GowaConfig::max_weights(p), CounterpartKind::MinMax),
                (GowaConfig::min_weights(p), CounterpartKind::MinMin),
            ];
            for (gowa, plain) in pairs {
                let a = counterpart_objective(&problem, &CounterpartKind::Gowa(gowa), &[x]).unwrap();
                let b = counterpart_objective(&problem, &plain, &[x]).unwrap();
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn scenario_minimizers_are_flimsily_robust(params in arb_parabolas(), pick in 0usize..4) {
            let problem = parabolas(&params);
            let i = pick % params.len();
            let x = [params[i].1];
            let c = classify_point(&problem, &x, &SolverConfig::for_dim(1), CLASSIFY_TOL).unwrap();
            prop_assert!(c.optimal_for[i]);
            prop_assert!(c.flimsily());
            let shared = params.iter().all(|q| q.1 == params[i].1);
            prop_assert_eq!(c.highly(), shared);
        }

        #[test]
        fn light_robustness_is_restricted_min_max(params in arb_parabolas(), eps in 0.0f64..1.0) {
            let problem = parabolas(&params);
            let cfg = SolverConfig::for_dim(1);
            let light = LightConfig::new(&problem, "z1", eps).unwrap();
            let set = solve_counterpart(&problem, &CounterpartKind::Light(light), &cfg).unwrap();
            let minmax = solve_counterpart(&problem, &CounterpartKind::MinMax, &cfg).unwrap();
            let nominal = set.nominal_optimum.clone().unwrap();
            // both values are only as accurate as the refinement on a kink
            prop_assert!(set.value >= minmax.value - 10.0 * cfg.refine_tol);
            for x in &set.points {
                prop_assert!(problem.eval_scenario(0, x).unwrap() <= nominal.value + eps);
            }
        }
    }
}
