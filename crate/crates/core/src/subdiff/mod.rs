//! Clarke subdifferentials of the ordered levels.
//!
//! Where several scenarios share the value of a level, the level switches
//! between them as `x` crosses the point. In one dimension the scenarios
//! realizing each level just left and just right of the point are found by
//! probing, and the subdifferential is assembled from their one-sided slopes:
//!
//! * the first level of a tie group gets the hull of the full subdifferentials
//!   of every tied scenario;
//! * a deeper level gets the hull of the left slope of its left-side realizer
//!   and the right slope of its right-side realizer (the full interval when one
//!   scenario realizes it on both sides).
//!
//! In higher dimensions only the hull of the tied gradients is offered, as an
//! outer enclosure. [`clarke_directional_estimate`] samples difference
//! quotients near the point and serves as an independent check.

use std::ops::Range;

use thiserror::Error;

use crate::aggregation::{ordered_levels, scenario_values, AggregationError, OrderedLevels};
use crate::expr::{jump_at, one_sided_derivative, scenario_subdifferential, DerivError, EvalError, Side, DEFAULT_STEP};
use crate::interval::Interval;
use crate::problem::{GowaConfig, LambdaMode, UncertainProblem};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SubdiffError {
    #[error("this operation needs a one-dimensional problem, got dimension {dim}")]
    NotOneDimensional { dim: usize },
    #[error("level {} does not exist; the problem has {p} scenarios", level + 1)]
    LevelOutOfRange { level: usize, p: usize },
    #[error(transparent)]
    Aggregation(#[from] AggregationError),
    #[error("jump detected in scenario `{scenario}` at {point:?}: left limit {left}, right limit {right}")]
    JumpDetected {
        scenario: String,
        point: Vec<f64>,
        left: f64,
        right: f64,
    },
    #[error("no probe point fits inside the box around {0:?}")]
    ProbeOutsideBox(Vec<f64>),
    #[error("tie group at level {} keeps changing under probing", level + 1)]
    UnstableTieGroup { level: usize },
    #[error("scenario `{scenario}` is not differentiable along x{} (one-sided slopes {left} and {right})", axis + 1)]
    NonsmoothScenarioInND {
        scenario: String,
        axis: usize,
        left: f64,
        right: f64,
    },
    #[error("level s_{} = {value} is not positive, so the power mean has no chain rule there", level + 1)]
    ZeroLevelWithFractionalPower { level: usize, value: f64 },
    #[error("configuration has {found} weights but the problem has {expected} scenarios")]
    WeightCount { expected: usize, found: usize },
}

/// Tolerances and probe sizes.
#[derive(Clone, Debug, PartialEq)]
pub struct SubdiffConfig {
    /// Absolute part of the tie tolerance.
    pub tie_abs: f64,
    /// Relative part of the tie tolerance.
    pub tie_rel: f64,
    /// Side probe offset; defaults to `1e-5` times the box width.
    pub probe_delta: Option<f64>,
    /// How often the probe offset is halved when the tie group changes.
    pub max_probe_halvings: usize,
    /// Finite-difference step for one-sided slopes.
    pub step: f64,
    /// Radius of the base-point sample in [`clarke_directional_estimate`].
    pub clarke_radius: f64,
    /// Base points per ray in [`clarke_directional_estimate`].
    pub clarke_samples: usize,
    /// Largest step in [`clarke_directional_estimate`].
    pub clarke_t0: f64,
    pub clarke_halvings: usize,
}

impl Default for SubdiffConfig {
    fn default() -> Self {
        SubdiffConfig {
            tie_abs: 1e-9,
            tie_rel: 1e-9,
            probe_delta: None,
            max_probe_halvings: 10,
            step: DEFAULT_STEP,
            clarke_radius: 1e-4,
            clarke_samples: 20,
            clarke_t0: 1e-4,
            clarke_halvings: 12,
        }
    }
}

impl SubdiffConfig {
    pub fn tie_tol(&self, value: f64) -> f64 {
        self.tie_abs + self.tie_rel * value.abs()
    }

    fn probe(&self, problem: &UncertainProblem) -> f64 {
        self.probe_delta.unwrap_or_else(|| 1e-5 * problem.bounds[0].width())
    }
}

/// A run of levels sharing one value up to the tie tolerance.
#[derive(Clone, Debug, PartialEq)]
pub struct TieGroup {
    /// Zero-based index of the first level in the run.
    pub first_level: usize,
    /// Scenarios occupying the run, ascending.
    pub scenarios: Vec<usize>,
    /// Value of the first level.
    pub value: f64,
}

impl TieGroup {
    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn levels(&self) -> Range<usize> {
        self.first_level..self.first_level + self.len()
    }

    pub fn contains_level(&self, level: usize) -> bool {
        self.levels().contains(&level)
    }
}

/// Splits ordered levels into maximal runs whose values lie within the tie
/// tolerance of the run's first value.
pub fn tie_groups(levels: &OrderedLevels, config: &SubdiffConfig) -> Vec<TieGroup> {
    let mut groups = Vec::new();
    let mut start = 0;
    while start < levels.len() {
        let head = levels.values[start];
        let tol = config.tie_tol(head);
        let mut end = start + 1;
        while end < levels.len() && head - levels.values[end] <= tol {
            end += 1;
        }
        let mut scenarios = levels.assignment[start..end].to_vec();
        scenarios.sort_unstable();
        groups.push(TieGroup {
            first_level: start,
            scenarios,
            value: head,
        });
        start = end;
    }
    groups
}

/// Which scenario realizes each level of a tie group just to one side of
/// the point.
#[derive(Clone, Debug, PartialEq)]
pub struct SideAssignment {
    pub side: Side,
    /// `realizers[m]` realizes level `first_level + m`.
    pub realizers: Vec<usize>,
    /// Probe offset that produced the assignment.
    pub delta: f64,
}

fn levels_at(problem: &UncertainProblem, x: &[f64]) -> Result<OrderedLevels, SubdiffError> {
    Ok(ordered_levels(&scenario_values(problem, x)?))
}

fn require_1d(problem: &UncertainProblem) -> Result<(), SubdiffError> {
    if problem.dim != 1 {
        return Err(SubdiffError::NotOneDimensional { dim: problem.dim });
    }
    Ok(())
}

/// Probes one side of `x̄` and reads off the realizer of each level in the
/// group. Returns `None` when `x̄` sits on that edge of the box.
///
/// The offset is halved while the probe sees a different set of scenarios
/// in the group's levels.
pub fn side_assignment(
    problem: &UncertainProblem,
    x_bar: f64,
    group: &TieGroup,
    side: Side,
    config: &SubdiffConfig,
) -> Result<Option<SideAssignment>, SubdiffError> {
    require_1d(problem)?;
    let b = problem.bounds[0];
    let mut delta = config.probe(problem);
    for _ in 0..=config.max_probe_halvings {
        let y = (x_bar + side.sign() * delta).clamp(b.lo, b.hi);
        if y == x_bar {
            return Ok(None);
        }
        let levels = levels_at(problem, &[y])?;
        let realizers = levels.assignment[group.levels()].to_vec();
        let mut members = realizers.clone();
        members.sort_unstable();
        if members == group.scenarios {
            return Ok(Some(SideAssignment { side, realizers, delta }));
        }
        delta *= 0.5;
    }
    Err(SubdiffError::UnstableTieGroup {
        level: group.first_level,
    })
}

/// Candidate scenarios for `level` on each side: the group minus the
/// realizers of the shallower levels of the group on that side. `None` for a
/// side outside the box.
#[derive(Clone, Debug, PartialEq)]
pub struct ActiveSets {
    pub left: Option<Vec<usize>>,
    pub right: Option<Vec<usize>>,
}

pub fn level_active_set(
    problem: &UncertainProblem,
    x_bar: f64,
    group: &TieGroup,
    level: usize,
    config: &SubdiffConfig,
) -> Result<ActiveSets, SubdiffError> {
    if !group.contains_level(level) {
        return Err(SubdiffError::LevelOutOfRange {
            level,
            p: problem.scenario_count(),
        });
    }
    let m = level - group.first_level;
    let peel = |a: Option<SideAssignment>| {
        a.map(|a| {
            group
                .scenarios
                .iter()
                .copied()
                .filter(|k| !a.realizers[..m].contains(k))
                .collect::<Vec<_>>()
        })
    };
    let left = side_assignment(problem, x_bar, group, Side::Left, config)?;
    let right = side_assignment(problem, x_bar, group, Side::Right, config)?;
    if left.is_none() && right.is_none() {
        return Err(SubdiffError::ProbeOutsideBox(vec![x_bar]));
    }
    Ok(ActiveSets {
        left: peel(left),
        right: peel(right),
    })
}

/// Subdifferential of one level in one dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelSubdifferential {
    pub interval: Interval,
    /// The point is on the box boundary, so only one side contributed.
    pub boundary: bool,
    pub group: TieGroup,
    pub left_realizer: Option<usize>,
    pub right_realizer: Option<usize>,
}

fn map_deriv(problem: &UncertainProblem, scenario: usize, e: DerivError) -> SubdiffError {
    let id = problem.scenarios[scenario].id.clone();
    match e {
        DerivError::Eval(source) => AggregationError::Eval { scenario: id, source }.into(),
        DerivError::JumpDetected { point, left, right, .. } => SubdiffError::JumpDetected {
            scenario: id,
            point,
            left,
            right,
        },
    }
}

fn map_eval(problem: &UncertainProblem, scenario: usize, source: EvalError) -> SubdiffError {
    AggregationError::Eval {
        scenario: problem.scenarios[scenario].id.clone(),
        source,
    }
    .into()
}

fn slope(problem: &UncertainProblem, scenario: usize, x: f64, side: Side, config: &SubdiffConfig) -> Result<f64, SubdiffError> {
    one_sided_derivative(&problem.scenarios[scenario].expr, &[x], 0, side, config.step)
        .map_err(|e| map_eval(problem, scenario, e))
}

fn full_interval(problem: &UncertainProblem, scenario: usize, x: f64, config: &SubdiffConfig) -> Result<Interval, SubdiffError> {
    scenario_subdifferential(&problem.scenarios[scenario].expr, &[x], 0, config.step)
        .map_err(|e| map_deriv(problem, scenario, e))
}

/// Rejects points where a scenario that can reach the group's value jumps.
fn check_jumps(problem: &UncertainProblem, x: f64, values: &[f64], group: &TieGroup, config: &SubdiffConfig) -> Result<(), SubdiffError> {
    let tol = config.tie_tol(group.value);
    for (j, s) in problem.scenarios.iter().enumerate() {
        let jump = jump_at(&s.expr, &[x], 0).map_err(|e| map_eval(problem, j, e))?;
        if let Some((left, right)) = jump {
            let lo = left.min(right).min(values[j]);
            let hi = left.max(right).max(values[j]);
            if lo - tol <= group.value && group.value <= hi + tol {
                return Err(SubdiffError::JumpDetected {
                    scenario: s.id.clone(),
                    point: vec![x],
                    left,
                    right,
                });
            }
        }
    }
    Ok(())
}

/// Subdifferential interval of the zero-based `level` at `x̄`.
pub fn subdiff_level_1d(
    problem: &UncertainProblem,
    x_bar: f64,
    level: usize,
    config: &SubdiffConfig,
) -> Result<LevelSubdifferential, SubdiffError> {
    require_1d(problem)?;
    let p = problem.scenario_count();
    if level >= p {
        return Err(SubdiffError::LevelOutOfRange { level, p });
    }
    let values = scenario_values(problem, &[x_bar])?;
    let levels = ordered_levels(&values);
    let group = tie_groups(&levels, config)
        .into_iter()
        .find(|g| g.contains_level(level))
        .expect("every level belongs to a group");
    let b = problem.bounds[0];
    let interior = b.lo < x_bar && x_bar < b.hi;
    if interior {
        check_jumps(problem, x_bar, &values, &group, config)?;
    }
    let left = side_assignment(problem, x_bar, &group, Side::Left, config)?;
    let right = side_assignment(problem, x_bar, &group, Side::Right, config)?;
    if left.is_none() && right.is_none() {
        return Err(SubdiffError::ProbeOutsideBox(vec![x_bar]));
    }
    let m = level - group.first_level;
    let left_realizer = left.as_ref().map(|a| a.realizers[m]);
    let right_realizer = right.as_ref().map(|a| a.realizers[m]);

    let interval = if m == 0 && group.len() > 1 {
        let mut parts = Vec::with_capacity(group.len());
        for &k in &group.scenarios {
            parts.push(match (left.is_some(), right.is_some()) {
                (true, true) => full_interval(problem, k, x_bar, config)?,
                (true, false) => Interval::point(slope(problem, k, x_bar, Side::Left, config)?),
                _ => Interval::point(slope(problem, k, x_bar, Side::Right, config)?),
            });
        }
        parts.into_iter().reduce(|a, b| a.hull(b)).expect("group is nonempty")
    } else {
        match (left_realizer, right_realizer) {
            (Some(l), Some(r)) if l == r => full_interval(problem, l, x_bar, config)?,
            (l, r) => {
                let mut ends = Vec::new();
                if let Some(l) = l {
                    ends.push(slope(problem, l, x_bar, Side::Left, config)?);
                }
                if let Some(r) = r {
                    ends.push(slope(problem, r, x_bar, Side::Right, config)?);
                }
                Interval::hull_of(ends).expect("one side is available")
            }
        }
    };
    Ok(LevelSubdifferential {
        interval,
        boundary: !interior,
        group,
        left_realizer,
        right_realizer,
    })
}

const ND_SMOOTHNESS_TOL: f64 = 1e-6;

/// Gradients of the scenarios tied with `level` at `x̄`; their convex hull
/// encloses the level's subdifferential. Every tied scenario must be
/// differentiable at the point.
pub fn subdiff_enclosure_nd(
    problem: &UncertainProblem,
    x_bar: &[f64],
    level: usize,
    config: &SubdiffConfig,
) -> Result<Vec<Vec<f64>>, SubdiffError> {
    let p = problem.scenario_count();
    if level >= p {
        return Err(SubdiffError::LevelOutOfRange { level, p });
    }
    let levels = levels_at(problem, x_bar)?;
    let group = tie_groups(&levels, config)
        .into_iter()
        .find(|g| g.contains_level(level))
        .expect("every level belongs to a group");
    let h = config.step;
    let mut vertices: Vec<Vec<f64>> = Vec::new();
    for &k in &group.scenarios {
        let e = &problem.scenarios[k].expr;
        let eval = |y: &[f64]| e.eval(y).map_err(|err| map_eval(problem, k, err));
        let mut gradient = Vec::with_capacity(problem.dim);
        for axis in 0..problem.dim {
            let left = one_sided_derivative(e, x_bar, axis, Side::Left, h).map_err(|err| map_eval(problem, k, err))?;
            let right = one_sided_derivative(e, x_bar, axis, Side::Right, h).map_err(|err| map_eval(problem, k, err))?;
            if (left - right).abs() > ND_SMOOTHNESS_TOL {
                return Err(SubdiffError::NonsmoothScenarioInND {
                    scenario: problem.scenarios[k].id.clone(),
                    axis,
                    left,
                    right,
                });
            }
            let central = |step: f64| -> Result<f64, SubdiffError> {
                let mut up = x_bar.to_vec();
                let mut down = x_bar.to_vec();
                up[axis] += step;
                down[axis] -= step;
                Ok((eval(&up)? - eval(&down)?) / (2.0 * step))
            };
            gradient.push((4.0 * central(0.5 * h)? - central(h)?) / 3.0);
        }
        let duplicate = vertices
            .iter()
            .any(|v| v.iter().zip(&gradient).all(|(a, b)| (a - b).abs() <= 1e-9));
        if !duplicate {
            vertices.push(gradient);
        }
    }
    Ok(vertices)
}

/// Sampled estimate of the Clarke directional derivative of `level` at `x̄`
/// in direction `d`: the largest quotient `(s(y + t d) - s(y)) / t` over base
/// points `y` near `x̄` and a ladder of small steps `t`. Base points and
/// steps leaving the box are skipped.
pub fn clarke_directional_estimate(
    problem: &UncertainProblem,
    level: usize,
    x_bar: &[f64],
    d: &[f64],
    config: &SubdiffConfig,
) -> Result<f64, SubdiffError> {
    let p = problem.scenario_count();
    if level >= p {
        return Err(SubdiffError::LevelOutOfRange { level, p });
    }
    let n = problem.dim;
    let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut rays: Vec<Vec<f64>> = (0..n)
        .map(|axis| (0..n).map(|k| if k == axis { 1.0 } else { 0.0 }).collect())
        .collect();
    if norm > 0.0 && n > 1 {
        rays.push(d.iter().map(|v| v / norm).collect());
    }
    let mut bases = vec![x_bar.to_vec()];
    let k_max = config.clarke_samples.max(1);
    for ray in &rays {
        for k in 1..=k_max {
            let r = config.clarke_radius * k as f64 / k_max as f64;
            for s in [1.0, -1.0] {
                bases.push(x_bar.iter().zip(ray).map(|(x, u)| x + s * r * u).collect());
            }
        }
    }
    let level_at = |y: &[f64]| -> Result<f64, SubdiffError> { Ok(levels_at(problem, y)?.values[level]) };
    let mut best = f64::NEG_INFINITY;
    for y in bases.iter().filter(|y| problem.contains(y)) {
        let fy = level_at(y)?;
        let mut t = config.clarke_t0;
        for _ in 0..=config.clarke_halvings {
            let z: Vec<f64> = y.iter().zip(d).map(|(a, b)| a + t * b).collect();
            if problem.contains(&z) {
                best = best.max((level_at(&z)? - fy) / t);
            }
            t *= 0.5;
        }
    }
    if best == f64::NEG_INFINITY {
        return Err(SubdiffError::ProbeOutsideBox(x_bar.to_vec()));
    }
    Ok(best)
}

/// Enclosure of the subdifferential of `φ` at `x̄` in one dimension.
///
/// The level intervals are combined through the chain rule of the power
/// mean: `φ^(1-λ) Σ w_i s_i^(λ-1) ∂s_i` for general `λ`, the plain weighted
/// sum `Σ w_i ∂s_i` for `λ = 1`, and `φ Σ w_i ∂s_i / s_i` in the geometric
/// limit. Levels with zero weight are skipped.
pub fn phi_subdiff_1d(
    problem: &UncertainProblem,
    config: &GowaConfig,
    x_bar: f64,
    subdiff: &SubdiffConfig,
) -> Result<Interval, SubdiffError> {
    require_1d(problem)?;
    let p = problem.scenario_count();
    if config.weights().len() != p {
        return Err(SubdiffError::WeightCount {
            expected: p,
            found: config.weights().len(),
        });
    }
    let levels = levels_at(problem, &[x_bar])?;
    let weighted: Vec<(usize, f64)> = config
        .weights()
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, w)| *w > 0.0)
        .collect();
    let (outer, coefficient): (f64, Box<dyn Fn(f64) -> f64>) = match config.mode() {
        LambdaMode::Positive(1.0) => (1.0, Box::new(|_| 1.0)),
        mode => {
            for &(i, _) in &weighted {
                let s = levels.values[i];
                if !(s > 0.0) {
                    return Err(SubdiffError::ZeroLevelWithFractionalPower { level: i, value: s });
                }
            }
            let phi = crate::aggregation::gowa_phi(&levels.values, config)?;
            match mode {
                LambdaMode::Positive(lambda) => (phi.powf(1.0 - lambda), Box::new(move |s: f64| s.powf(lambda - 1.0))),
                LambdaMode::GeometricLimit => (phi, Box::new(|s: f64| 1.0 / s)),
            }
        }
    };
    let mut total = Interval::point(0.0);
    for (i, w) in weighted {
        let level = subdiff_level_1d(problem, x_bar, i, subdiff)?;
        total = total + (w * coefficient(levels.values[i])) * level.interval;
    }
    Ok(outer * total)
}

#[cfg(test)]
mod props;
