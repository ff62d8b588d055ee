//! One-sided numeric slopes and per-scenario 1-D subdifferentials.

use thiserror::Error;

use super::{EvalError, Expr};
use crate::interval::Interval;

/// Default finite-difference step.
pub const DEFAULT_STEP: f64 = 1e-4;

/// Largest gap between one-sided limits still treated as continuity.
pub const JUMP_TOL: f64 = 1e-6;

/// Slopes closer than this are reported as a degenerate interval.
const SLOPE_AGREEMENT: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Left => -1.0,
            Side::Right => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DerivError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("jump detected along x{} at {point:?}: left limit {left}, right limit {right}", axis + 1)]
    JumpDetected {
        axis: usize,
        point: Vec<f64>,
        left: f64,
        right: f64,
    },
}

fn shifted(point: &[f64], axis: usize, delta: f64) -> Vec<f64> {
    let mut p = point.to_vec();
    p[axis] += delta;
    p
}

fn difference_quotient(e: &Expr, point: &[f64], f0: f64, axis: usize, side: Side, h: f64) -> Result<f64, EvalError> {
    let shifted_point = shifted(point, axis, side.sign() * h);
    // divide by the step actually taken, not the rounded one
    let step = shifted_point[axis] - point[axis];
    let f = e.eval(&shifted_point)?;
    Ok((f - f0) / step)
}

/// One-sided derivative along `axis`, extrapolated from difference
/// quotients `D(h)`, `D(2h)` and `D(4h)`.
///
/// `(8 D(h) - 6 D(2h) + D(4h)) / 3` cancels the first- and second-order
/// error terms, so it is exact (up to rounding) on polynomials of degree
/// three or less. Steps stay on one side of `point`, at most `4h` away.
pub fn one_sided_derivative(e: &Expr, point: &[f64], axis: usize, side: Side, h: f64) -> Result<f64, EvalError> {
    let f0 = e.eval(point)?;
    let d1 = difference_quotient(e, point, f0, axis, side, h)?;
    let d2 = difference_quotient(e, point, f0, axis, side, 2.0 * h)?;
    let d4 = difference_quotient(e, point, f0, axis, side, 4.0 * h)?;
    Ok((8.0 * d1 - 6.0 * d2 + d4) / 3.0)
}

fn limit_step(x: f64) -> f64 {
    1e-6 * x.abs().max(1.0)
}

/// Estimate of the one-sided limit of `e` at `point` along `axis`, by
/// linear extrapolation of two nearby values.
pub fn one_sided_limit(e: &Expr, point: &[f64], axis: usize, side: Side) -> Result<f64, EvalError> {
    let h = limit_step(point[axis]) * side.sign();
    let near = e.eval(&shifted(point, axis, 0.5 * h))?;
    let far = e.eval(&shifted(point, axis, h))?;
    Ok(2.0 * near - far)
}

/// Returns the `(left, right)` limits when they differ by more than
/// [`JUMP_TOL`], `None` when `e` looks continuous along `axis`.
pub fn jump_at(e: &Expr, point: &[f64], axis: usize) -> Result<Option<(f64, f64)>, EvalError> {
    let left = one_sided_limit(e, point, axis, Side::Left)?;
    let right = one_sided_limit(e, point, axis, Side::Right)?;
    Ok(((left - right).abs() > JUMP_TOL).then_some((left, right)))
}

/// Subdifferential of `e` along `axis`: the hull of its two one-sided slopes.
///
/// Exact for piecewise-C¹ functions that are subdifferentially regular at
/// the point. Discontinuities along the axis are rejected.
pub fn scenario_subdifferential(e: &Expr, point: &[f64], axis: usize, h: f64) -> Result<Interval, DerivError> {
    if let Some((left, right)) = jump_at(e, point, axis)? {
        return Err(DerivError::JumpDetected {
            axis,
            point: point.to_vec(),
            left,
            right,
        });
    }
    let dl = one_sided_derivative(e, point, axis, Side::Left, h)?;
    let dr = one_sided_derivative(e, point, axis, Side::Right, h)?;
    if (dl - dr).abs() <= SLOPE_AGREEMENT {
        Ok(Interval::point(0.5 * (dl + dr)))
    } else {
        Ok(Interval::spanning(dl, dr))
    }
}

/// [`scenario_subdifferential`] for a function of one variable.
pub fn scenario_subdifferential_1d(e: &Expr, x: f64) -> Result<Interval, DerivError> {
    scenario_subdifferential(e, &[x], 0, DEFAULT_STEP)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;

    fn p(src: &str) -> Expr {
        parse_expression(src).unwrap()
    }

    #[test]
    fn affine_piece_slopes() {
        let d = one_sided_derivative(&p("abs((x1-4)/2)"), &[4.0], 0, Side::Right, DEFAULT_STEP).unwrap();
        assert!((d - 0.5).abs() < 1e-9, "{d}");
        let d = one_sided_derivative(&p("-(x1-4)/3+5"), &[4.0], 0, Side::Left, DEFAULT_STEP).unwrap();
        assert!((d + 1.0 / 3.0).abs() < 1e-9, "{d}");
        let d = one_sided_derivative(&p("(x1-4)^2+1"), &[4.0], 0, Side::Right, DEFAULT_STEP).unwrap();
        assert!(d.abs() < 1e-6, "{d}");
    }

    #[test]
    fn kinked_scenarios() {
        let iv = scenario_subdifferential_1d(&p("abs((x1-4)/3)+4"), 4.0).unwrap();
        assert!((iv.lo + 1.0 / 3.0).abs() < 1e-9 && (iv.hi - 1.0 / 3.0).abs() < 1e-9, "{iv}");
        let iv = scenario_subdifferential_1d(&p("-abs((x1-4)/2)+4"), 4.0).unwrap();
        assert!((iv.lo + 0.5).abs() < 1e-9 && (iv.hi - 0.5).abs() < 1e-9, "{iv}");
        let iv = scenario_subdifferential_1d(&p("x1"), 4.0).unwrap();
        assert!(iv.is_degenerate() && (iv.lo - 1.0).abs() < 1e-9, "{iv}");
    }

    #[test]
    fn signum_jump_is_rejected() {
        let err = scenario_subdifferential_1d(&p("sgn(x1)+1"), 0.0).unwrap_err();
        match err {
            DerivError::JumpDetected { left, right, .. } => {
                assert_eq!(left, 0.0);
                assert_eq!(right, 2.0);
            }
            other => panic!("{other:?}"),
        }
        // away from the jump the step function is flat
        let iv = scenario_subdifferential_1d(&p("sgn(x1)+1"), 0.5).unwrap();
        assert_eq!(iv, Interval::point(0.0));
    }

    #[test]
    fn smooth_expression_gives_degenerate_derivative() {
        for x in [-1.7, -0.3, 0.0, 0.9, 1.6] {
            let iv = scenario_subdifferential_1d(&p("sin(x1)*exp(x1/2)"), x).unwrap();
            let exact = x.cos() * (x / 2.0).exp() + 0.5 * x.sin() * (x / 2.0).exp();
            assert!(iv.is_degenerate(), "{x}: {iv}");
            assert!((iv.lo - exact).abs() < 1e-6, "{x}: {iv} vs {exact}");
        }
    }

    #[test]
    fn domain_error_propagates() {
        assert!(matches!(
            one_sided_derivative(&p("sqrt(x1)"), &[0.0], 0, Side::Left, DEFAULT_STEP),
            Err(EvalError::Domain { .. })
        ));
    }
}
