//! Closed real intervals.
//!
//! Used both for the per-axis bounds of the feasible box and for
//! one-dimensional Clarke subdifferentials.

use std::fmt;
use std::ops::{Add, Mul};

/// A closed interval `[lo, hi]`.
///
/// The fields are public so that raw (possibly inverted) bounds can be read
/// from input and rejected by validation; intervals produced by this crate
/// always satisfy `lo <= hi`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    /// Degenerate interval `[v, v]`.
    pub const fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    /// Smallest interval containing both values, in either order.
    pub fn spanning(a: f64, b: f64) -> Self {
        Interval {
            lo: a.min(b),
            hi: a.max(b),
        }
    }

    /// Convex hull of a set of values. `None` for an empty iterator.
    pub fn hull_of<I: IntoIterator<Item = f64>>(values: I) -> Option<Self> {
        values.into_iter().fold(None, |acc, v| {
            Some(match acc {
                None => Interval::point(v),
                Some(iv) => Interval::new(iv.lo.min(v), iv.hi.max(v)),
            })
        })
    }

    /// Convex hull of two intervals.
    pub fn hull(self, other: Interval) -> Interval {
        Interval::new(self.lo.min(other.lo), self.hi.max(other.hi))
    }

    pub fn is_empty(&self) -> bool {
        !(self.lo <= self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }

    /// Scales by a real factor, flipping the endpoints for negative factors.
    pub fn scale(self, k: f64) -> Interval {
        Interval::spanning(self.lo * k, self.hi * k)
    }
}

impl Add for Interval {
    type Output = Interval;

    fn add(self, rhs: Interval) -> Interval {
        Interval::new(self.lo + rhs.lo, self.hi + rhs.hi)
    }
}

impl Mul<Interval> for f64 {
    type Output = Interval;

    fn mul(self, rhs: Interval) -> Interval {
        rhs.scale(self)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hull_of_values() {
        let iv = Interval::hull_of([1.0, -0.5, 0.25]).unwrap();
        assert_eq!(iv, Interval::new(-0.5, 1.0));
        assert!(Interval::hull_of(std::iter::empty()).is_none());
    }

    #[test]
    fn arithmetic() {
        let a = Interval::new(1.0 / 3.0, 0.5);
        let b = Interval::new(-0.5, 1.0);
        let s = 0.5 * a + 0.5 * b;
        assert!((s.lo - (-1.0 / 12.0)).abs() < 1e-15);
        assert!((s.hi - 0.75).abs() < 1e-15);
        assert_eq!((-2.0) * b, Interval::new(-2.0, 1.0));
    }

    #[test]
    fn inverted_bounds_are_empty() {
        assert!(Interval::new(1.0, 0.0).is_empty());
        assert!(!Interval::point(3.0).is_empty());
    }
}
