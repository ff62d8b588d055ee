//! Deterministic box minimization: a dense grid scan followed by local
//! refinement of every grid local minimum.
//!
//! Objectives and feasibility filters are plain closures returning
//! `Result<_, E>`; evaluation errors abort the search. Grid evaluation and
//! refinement run in parallel, but results are collected in a fixed order so
//! the outcome never depends on scheduling.

use std::cmp::Ordering;
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};

use rayon::prelude::*;
use thiserror::Error;

use crate::interval::Interval;
use crate::problem::{ConfigError, SolverConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("no grid point satisfies the feasibility filter")]
    AllPointsInfeasible,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("box bounds must be finite and ordered")]
    InvalidBox,
}

/// Uniform closed grid of `n` nodes on `b`, endpoints exact.
pub fn grid_axis(b: Interval, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![b.midpoint()];
    }
    let last = n - 1;
    (0..n)
        .map(|k| {
            if k == last {
                b.hi
            } else {
                b.lo + (b.hi - b.lo) * (k as f64 / last as f64)
            }
        })
        .collect()
}

/// A grid node worth refining.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub point: Vec<f64>,
    pub value: f64,
    /// Neighbouring grid nodes around the point (1-D only).
    pub bracket: Option<Interval>,
}

/// Work counters for one minimization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SolverStats {
    /// Total grid nodes scanned.
    pub grid_points: usize,
    /// Nodes that passed the filter.
    pub feasible_points: usize,
    /// Local refinements started.
    pub refinements: usize,
    /// Objective evaluations, grid included.
    pub evaluations: usize,
}

/// Result of [`minimize`]: every near-optimal point, sorted.
#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub points: Vec<Vec<f64>>,
    /// Objective value at each point.
    pub values: Vec<f64>,
    /// Best value found.
    pub value: f64,
    pub stats: SolverStats,
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

fn check_box(bounds: &[Interval]) -> Result<(), SolverError> {
    if bounds.is_empty() || bounds.iter().any(|b| !b.lo.is_finite() || !b.hi.is_finite() || b.is_empty()) {
        return Err(SolverError::InvalidBox);
    }
    Ok(())
}

/// Evaluates `objective` on the full grid and returns the feasible local
/// minima (no worse than any feasible axis neighbour) together with the
/// global best node. Candidates come in grid order.
pub fn grid_scan<E, F, G>(
    objective: F,
    bounds: &[Interval],
    grid_points: usize,
    filter: Option<G>,
) -> Result<Vec<Candidate>, E>
where
    E: From<SolverError> + Send,
    F: Fn(&[f64]) -> Result<f64, E> + Sync,
    G: Fn(&[f64]) -> Result<bool, E> + Sync,
{
    check_box(bounds)?;
    if grid_points < 3 {
        return Err(SolverError::Config(ConfigError::TooFewGridPoints(grid_points)).into());
    }
    let (candidates, _) = scan(&objective, bounds, grid_points, filter.as_ref())?;
    Ok(candidates)
}

fn decode(mut k: usize, axes: &[Vec<f64>], g: usize, point: &mut [f64], index: &mut [usize]) {
    for (axis, coords) in axes.iter().enumerate() {
        index[axis] = k % g;
        point[axis] = coords[index[axis]];
        k /= g;
    }
}

fn scan<E, F, G>(
    objective: &F,
    bounds: &[Interval],
    g: usize,
    filter: Option<&G>,
) -> Result<(Vec<Candidate>, usize), E>
where
    E: From<SolverError> + Send,
    F: Fn(&[f64]) -> Result<f64, E> + Sync,
    G: Fn(&[f64]) -> Result<bool, E> + Sync,
{
    let n = bounds.len();
    let axes: Vec<Vec<f64>> = bounds.iter().map(|b| grid_axis(*b, g)).collect();
    let total = g.pow(n as u32);
    let evaluated: Vec<Result<Option<f64>, E>> = (0..total)
        .into_par_iter()
        .map(|k| {
            let mut point = vec![0.0; n];
            let mut index = vec![0; n];
            decode(k, &axes, g, &mut point, &mut index);
            if let Some(f) = filter {
                if !f(&point)? {
                    return Ok(None);
                }
            }
            objective(&point).map(Some)
        })
        .collect();
    let mut values = Vec::with_capacity(total);
    for r in evaluated {
        values.push(r?);
    }
    let feasible = values.iter().filter(|v| v.is_some()).count();
    if feasible == 0 {
        return Err(SolverError::AllPointsInfeasible.into());
    }

    let mut strides = vec![1usize; n];
    for axis in 1..n {
        strides[axis] = strides[axis - 1] * g;
    }
    let mut best: Option<(usize, f64)> = None;
    let mut minima = Vec::new();
    let mut point = vec![0.0; n];
    let mut index = vec![0; n];
    for k in 0..total {
        let Some(v) = values[k] else { continue };
        if best.is_none_or(|(_, b)| v < b) {
            best = Some((k, v));
        }
        decode(k, &axes, g, &mut point, &mut index);
        let mut is_min = true;
        'axes: for axis in 0..n {
            for (cond, nb) in [
                (index[axis] > 0, k.wrapping_sub(strides[axis])),
                (index[axis] + 1 < g, k + strides[axis]),
            ] {
                if cond {
                    if let Some(u) = values[nb] {
                        if u < v {
                            is_min = false;
                            break 'axes;
                        }
                    }
                }
            }
        }
        if is_min {
            minima.push(k);
        }
    }
    let (best_k, _) = best.expect("at least one feasible node");
    if !minima.contains(&best_k) {
        minima.push(best_k);
        minima.sort_unstable();
    }
    let candidates = minima
        .into_iter()
        .map(|k| {
            decode(k, &axes, g, &mut point, &mut index);
            let bracket = (n == 1).then(|| {
                let i = index[0];
                let lo = axes[0][i.saturating_sub(1)];
                let hi = axes[0][(i + 1).min(g - 1)];
                Interval::new(lo, hi)
            });
            Candidate {
                point: point.clone(),
                value: values[k].expect("feasible"),
                bracket,
            }
        })
        .collect();
    Ok((candidates, feasible))
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search on `bracket` down to width `tol`.
///
/// Comparison based, so kinks are harmless. Returns the midpoint of the
/// final bracket when it is no worse than every probe, otherwise the best
/// probe; the optional `seed` is kept unless strictly beaten. Infeasible
/// probes count as `+∞`.
pub fn refine_1d<E, F, G>(
    objective: F,
    bracket: Interval,
    tol: f64,
    seed: Option<(f64, f64)>,
    filter: Option<G>,
) -> Result<(f64, f64), E>
where
    F: Fn(&[f64]) -> Result<f64, E>,
    G: Fn(&[f64]) -> Result<bool, E>,
{
    let eval = |x: f64| -> Result<f64, E> {
        if let Some(f) = &filter {
            if !f(&[x])? {
                return Ok(f64::INFINITY);
            }
        }
        objective(&[x])
    };
    let mut best = seed.unwrap_or((f64::NAN, f64::INFINITY));
    let note = |x: f64, v: f64, best: &mut (f64, f64)| {
        if v < best.1 || (best.0.is_nan() && v.is_finite()) {
            *best = (x, v);
        }
    };
    let (mut a, mut b) = (bracket.lo, bracket.hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = eval(c)?;
    let mut fd = eval(d)?;
    note(c, fc, &mut best);
    note(d, fd, &mut best);
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c)?;
            note(c, fc, &mut best);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d)?;
            note(d, fd, &mut best);
        }
    }
    let m = 0.5 * (a + b);
    let fm = eval(m)?;
    let found = if fm.is_finite() && fm <= best.1 { (m, fm) } else { best };
    match seed {
        // the seed wins exact ties
        Some(s) if s.1 <= found.1 => Ok(s),
        _ => Ok(found),
    }
}

fn poll_directions(n: usize) -> Vec<Vec<f64>> {
    let mut dirs = Vec::new();
    for axis in 0..n {
        for s in [1.0, -1.0] {
            let mut d = vec![0.0; n];
            d[axis] = s;
            dirs.push(d);
        }
    }
    // diagonal polls let the search slide along ridges such as max(|x1|, |x2|)
    if (2..=6).contains(&n) {
        for mask in 0..(1usize << n) {
            dirs.push((0..n).map(|k| if mask >> k & 1 == 1 { -1.0 } else { 1.0 }).collect());
        }
    }
    dirs
}

const MAX_PATTERN_ITERATIONS: usize = 100_000;

/// Pattern search from `start` with per-axis initial steps `step`.
///
/// Polls `±step_k e_k` (plus the diagonal sign vectors in low dimension),
/// moves to the best strictly improving poll, and halves the steps after a
/// failed poll. Polls outside the box or rejected by the filter fail.
/// Stops once the largest step drops below `tol`.
pub fn pattern_refine_nd<E, F, G>(
    objective: F,
    start: &[f64],
    bounds: &[Interval],
    step: &[f64],
    tol: f64,
    filter: Option<G>,
) -> Result<(Vec<f64>, f64), E>
where
    F: Fn(&[f64]) -> Result<f64, E>,
    G: Fn(&[f64]) -> Result<bool, E>,
{
    let n = start.len();
    let dirs = poll_directions(n);
    let mut x = start.to_vec();
    let mut fx = objective(&x)?;
    let mut scale = 1.0;
    let max_step = step.iter().cloned().fold(0.0, f64::max);
    let mut trial = vec![0.0; n];
    let mut iterations = 0;
    while scale * max_step >= tol && iterations < MAX_PATTERN_ITERATIONS {
        iterations += 1;
        let mut best: Option<(Vec<f64>, f64)> = None;
        for d in &dirs {
            for k in 0..n {
                trial[k] = x[k] + scale * step[k] * d[k];
            }
            if !trial.iter().zip(bounds).all(|(v, b)| b.contains(*v)) {
                continue;
            }
            if let Some(f) = &filter {
                if !f(&trial)? {
                    continue;
                }
            }
            let v = objective(&trial)?;
            if v < fx && best.as_ref().is_none_or(|(_, bv)| v < *bv) {
                best = Some((trial.clone(), v));
            }
        }
        match best {
            Some((p, v)) => {
                x = p;
                fx = v;
            }
            None => scale *= 0.5,
        }
    }
    Ok((x, fx))
}

/// Minimizes `objective` over the box.
///
/// Scans the grid, refines every candidate (and every feasible in-box
/// `seed`), keeps refined points within `near_optimal_band` of the best
/// value, merges points closer than `optimum_merge_radius` in favour of the
/// lower value, and sorts the survivors lexicographically.
pub fn minimize<E, F, G>(
    objective: F,
    bounds: &[Interval],
    config: &SolverConfig,
    filter: Option<G>,
    seeds: &[Vec<f64>],
) -> Result<Minimum, E>
where
    E: From<SolverError> + Send,
    F: Fn(&[f64]) -> Result<f64, E> + Sync,
    G: Fn(&[f64]) -> Result<bool, E> + Sync,
{
    config.validate().map_err(SolverError::from)?;
    check_box(bounds)?;
    let counter = AtomicUsize::new(0);
    let counted = |x: &[f64]| {
        counter.fetch_add(1, AtomicOrdering::Relaxed);
        objective(x)
    };
    let g = config.grid_points;
    let n = bounds.len();
    let spacing: Vec<f64> = bounds.iter().map(|b| b.width() / (g - 1) as f64).collect();

    let scanned = scan(&counted, bounds, g, filter.as_ref());
    let (mut candidates, feasible) = match scanned {
        Ok(c) => c,
        Err(e) => {
            // a feasible seed can still rescue a grid with no feasible node
            if seeds.is_empty() {
                return Err(e);
            }
            (Vec::new(), 0)
        }
    };
    for s in seeds {
        if s.len() != n || !s.iter().zip(bounds).all(|(v, b)| b.contains(*v)) {
            continue;
        }
        if let Some(f) = &filter {
            if !f(s)? {
                continue;
            }
        }
        let value = counted(s)?;
        let bracket = (n == 1)
            .then(|| Interval::new((s[0] - spacing[0]).max(bounds[0].lo), (s[0] + spacing[0]).min(bounds[0].hi)));
        candidates.push(Candidate {
            point: s.clone(),
            value,
            bracket,
        });
    }
    if candidates.is_empty() {
        return Err(SolverError::AllPointsInfeasible.into());
    }

    let refined: Vec<Result<(Vec<f64>, f64), E>> = candidates
        .par_iter()
        .map(|c| {
            if let Some(bracket) = c.bracket {
                let (x, v) = refine_1d(counted, bracket, config.refine_tol, Some((c.point[0], c.value)), filter.as_ref())?;
                Ok((vec![x], v))
            } else {
                pattern_refine_nd(counted, &c.point, bounds, &spacing, config.refine_tol, filter.as_ref())
            }
        })
        .collect();
    let mut found = Vec::with_capacity(refined.len());
    for r in refined {
        found.push(r?);
    }

    let best = found.iter().map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
    let mut near: Vec<(Vec<f64>, f64)> = found
        .into_iter()
        .filter(|(_, v)| *v <= best + config.near_optimal_band)
        .collect();
    near.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| lexicographic(&a.0, &b.0)));
    let mut kept: Vec<(Vec<f64>, f64)> = Vec::new();
    for (p, v) in near {
        let close = kept.iter().any(|(q, _)| distance(&p, q) < config.optimum_merge_radius);
        if !close {
            kept.push((p, v));
        }
    }
    kept.sort_by(|a, b| lexicographic(&a.0, &b.0));

    let stats = SolverStats {
        grid_points: g.pow(n as u32),
        feasible_points: feasible,
        refinements: candidates.len(),
        evaluations: counter.load(AtomicOrdering::Relaxed),
    };
    Ok(Minimum {
        values: kept.iter().map(|(_, v)| *v).collect(),
        points: kept.into_iter().map(|(p, _)| p).collect(),
        value: best,
        stats,
    })
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    type R = Result<f64, SolverError>;
    type NoFilter = fn(&[f64]) -> Result<bool, SolverError>;

    #[test]
    fn grid_axis_hits_endpoints() {
        let g = grid_axis(Interval::new(-2.0, 2.0), 2001);
        assert_eq!(g.len(), 2001);
        assert_eq!(g[0], -2.0);
        assert_eq!(g[1000], 0.0);
        assert_eq!(g[2000], 2.0);
    }

    #[test]
    fn scan_finds_parabola_vertex() {
        let c = grid_scan(|x: &[f64]| -> R { Ok(x[0] * x[0]) }, &[Interval::new(-1.0, 1.0)], 5, None::<NoFilter>).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].point, vec![0.0]);
        assert_eq!(c[0].value, 0.0);
        assert_eq!(c[0].bracket, Some(Interval::new(-0.5, 0.5)));
    }

    #[test]
    fn scan_with_filter() {
        let c = grid_scan(
            |x: &[f64]| -> R { Ok(x[0]) },
            &[Interval::new(-2.0, 2.0)],
            2001,
            Some(|x: &[f64]| -> Result<bool, SolverError> { Ok(x[0].sin() + 1.0 <= 0.5) }),
        )
        .unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].point, vec![-2.0]);
        let err = grid_scan(
            |x: &[f64]| -> R { Ok(x[0]) },
            &[Interval::new(-1.0, 1.0)],
            11,
            Some(|_: &[f64]| -> Result<bool, SolverError> { Ok(false) }),
        )
        .unwrap_err();
        assert_eq!(err, SolverError::AllPointsInfeasible);
    }

    #[test]
    fn golden_section() {
        let (x, _) = refine_1d(|x: &[f64]| -> R { Ok(x[0] * x[0]) }, Interval::new(-0.1, 0.1), 1e-8, None, None::<NoFilter>).unwrap();
        assert!(x.abs() <= 1e-8, "{x}");
        let (x, _) = refine_1d(|x: &[f64]| -> R { Ok((x[0] - 0.3).abs()) }, Interval::new(0.0, 1.0), 1e-6, None, None::<NoFilter>).unwrap();
        assert!((x - 0.3).abs() <= 1e-6, "{x}");
    }

    #[test]
    fn golden_section_keeps_a_better_seed() {
        // minimum at the bracket edge, which the interior probes never reach
        let (x, v) = refine_1d(|x: &[f64]| -> R { Ok(-x[0]) }, Interval::new(0.0, 1.0), 1e-6, Some((1.0, -1.0)), None::<NoFilter>).unwrap();
        assert_eq!((x, v), (1.0, -1.0));
    }

    #[test]
    fn pattern_search() {
        let b = [Interval::new(-1.0, 1.0), Interval::new(-1.0, 1.0)];
        let (x, _) = pattern_refine_nd(|x: &[f64]| -> R { Ok(x[0] * x[0] + x[1] * x[1]) }, &[0.5, 0.5], &b, &[0.1, 0.1], 1e-6, None::<NoFilter>).unwrap();
        assert!(x[0].abs() < 1e-5 && x[1].abs() < 1e-5, "{x:?}");
        let (x, _) = pattern_refine_nd(|x: &[f64]| -> R { Ok(x[0].abs().max(x[1].abs())) }, &[0.3, -0.2], &b, &[0.1, 0.1], 1e-6, None::<NoFilter>).unwrap();
        assert!(x[0].abs() < 1e-4 && x[1].abs() < 1e-4, "{x:?}");
        let (x, v) = pattern_refine_nd(|x: &[f64]| -> R { Ok(x[0] - 2.0 * x[1]) }, &[0.0, 0.0], &b, &[0.25, 0.25], 1e-6, None::<NoFilter>).unwrap();
        assert_eq!(x, vec![-1.0, 1.0]);
        assert_eq!(v, -3.0);
    }

    #[test]
    fn minimize_reports_every_near_optimum() {
        let m = minimize(
            |x: &[f64]| -> R { Ok((x[0] * x[0] - 1.0).powi(2)) },
            &[Interval::new(-2.0, 2.0)],
            &SolverConfig::default(),
            None::<NoFilter>,
            &[],
        )
        .unwrap();
        assert_eq!(m.points.len(), 2);
        assert!((m.points[0][0] + 1.0).abs() < 1e-6 && (m.points[1][0] - 1.0).abs() < 1e-6);
        assert!(m.value < 1e-12);
    }

    #[test]
    fn constant_objective_keeps_spaced_representatives() {
        let cfg = SolverConfig {
            grid_points: 11,
            optimum_merge_radius: 0.15,
            ..SolverConfig::default()
        };
        let m = minimize(|_: &[f64]| -> R { Ok(2.5) }, &[Interval::new(0.0, 1.0)], &cfg, None::<NoFilter>, &[]).unwrap();
        assert_eq!(m.value, 2.5);
        assert!(m.values.iter().all(|v| *v == 2.5));
        for w in m.points.windows(2) {
            assert!(w[1][0] - w[0][0] >= 0.15);
        }
        assert!(m.points.len() >= 5, "{:?}", m.points);
    }

    #[test]
    fn seeds_rescue_an_infeasible_grid() {
        let m = minimize(
            |x: &[f64]| -> R { Ok(x[0]) },
            &[Interval::new(0.0, 1.0)],
            &SolverConfig {
                grid_points: 11,
                ..SolverConfig::default()
            },
            Some(|x: &[f64]| -> Result<bool, SolverError> { Ok((x[0] - 0.333).abs() < 1e-3) }),
            &[vec![0.333]],
        )
        .unwrap();
        assert!((m.points[0][0] - 0.333).abs() < 1e-3, "{:?}", m.points);
        assert!(m.value <= 0.333);
    }
}
