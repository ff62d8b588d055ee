use thiserror::Error;

use super::{BinOp, Expr, Func};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    /// The sub-expression `expr` has no real value at the requested point.
    #[error("domain error in `{expr}`: {reason}")]
    Domain { expr: String, reason: String },
    #[error("variable x{} is not defined for a point of dimension {dim}", index + 1)]
    MissingCoordinate { index: usize, dim: usize },
}

fn domain(e: &Expr, reason: impl Into<String>) -> EvalError {
    EvalError::Domain {
        expr: e.to_string(),
        reason: reason.into(),
    }
}

impl Expr {
    /// Evaluates the expression at `point` in IEEE double precision.
    ///
    /// Any operation leaving the real domain (log or sqrt of a negative,
    /// division by zero, fractional power of a negative base) or producing a
    /// non-finite value is reported with the offending sub-expression.
    pub fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Var(i) => *point.get(*i).ok_or(EvalError::MissingCoordinate {
                index: *i,
                dim: point.len(),
            })?,
            Expr::Neg(e) => -e.eval(point)?,
            Expr::Binary(op, l, r) => {
                let a = l.eval(point)?;
                let b = r.eval(point)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(domain(self, "division by zero"));
                        }
                        a / b
                    }
                    BinOp::Pow => {
                        if a < 0.0 && b.fract() != 0.0 {
                            return Err(domain(self, "fractional power of a negative base"));
                        }
                        if a == 0.0 && b < 0.0 {
                            return Err(domain(self, "negative power of zero"));
                        }
                        a.powf(b)
                    }
                }
            }
            Expr::Call(func, arg) => {
                let a = arg.eval(point)?;
                match func {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Log => {
                        if a <= 0.0 {
                            return Err(domain(self, "logarithm of a non-positive value"));
                        }
                        a.ln()
                    }
                    Func::Sqrt => {
                        if a < 0.0 {
                            return Err(domain(self, "square root of a negative value"));
                        }
                        a.sqrt()
                    }
                    Func::Abs => a.abs(),
                    Func::Sgn => {
                        if a > 0.0 {
                            1.0
                        } else if a < 0.0 {
                            -1.0
                        } else {
                            0.0
                        }
                    }
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(domain(self, "non-finite result"))
        }
    }
}
