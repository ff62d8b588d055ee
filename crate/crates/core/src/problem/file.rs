//! Line-oriented problem files.
//!
//! ```text
//! # comment
//! problem ex41
//! dim 1
//! box -1 1
//! scenario z1 = x1^3 + 1
//! scenario z2 = -x1 + 1
//! weights 0.3 0.7
//! lambda 1/2
//! nominal z1
//! epsilon 0.5
//! ```
//!
//! `box` lines come in dimension order and `scenario` lines in index order.
//! `weights`, `lambda`, `nominal` and `epsilon` are optional; numeric fields
//! also accept simple fractions such as `1/3`.

use std::fmt;
use std::path::Path;

use thiserror::Error;

use super::{validate_weights, ConfigError, GowaConfig, LambdaMode, LightConfig, Scenario, UncertainProblem};
use crate::expr::{parse_expression_in, ParseError};
use crate::interval::Interval;

#[derive(Debug, Error)]
pub enum ProblemFileError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: in scenario `{scenario}`: {source}")]
    Expression {
        line: usize,
        scenario: String,
        source: ParseError,
    },
    #[error("line {line}: duplicate `{directive}` directive")]
    Duplicate { line: usize, directive: &'static str },
    #[error("missing `{0}` directive")]
    Missing(&'static str),
    #[error("line {line}: {source}")]
    Config { line: usize, source: ConfigError },
    #[error(transparent)]
    Settings(ConfigError),
}

/// A parsed problem file: the problem plus whatever aggregation and light
/// robustness settings it declares.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemFile {
    pub problem: UncertainProblem,
    pub weights: Option<Vec<f64>>,
    pub lambda: Option<LambdaMode>,
    pub nominal: Option<String>,
    pub epsilon: Option<f64>,
}

fn syntax(line: usize, message: impl Into<String>) -> ProblemFileError {
    ProblemFileError::Syntax {
        line,
        message: message.into(),
    }
}

/// Parses a real number or a fraction `a/b`.
fn parse_real(token: &str, line: usize) -> Result<f64, ProblemFileError> {
    let bad = || syntax(line, format!("`{token}` is not a number"));
    let v = match token.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.parse().map_err(|_| bad())?;
            let b: f64 = b.parse().map_err(|_| bad())?;
            if b == 0.0 {
                return Err(bad());
            }
            a / b
        }
        None => token.parse().map_err(|_| bad())?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

fn set_once<T>(slot: &mut Option<T>, value: T, line: usize, directive: &'static str) -> Result<(), ProblemFileError> {
    if slot.is_some() {
        return Err(ProblemFileError::Duplicate { line, directive });
    }
    *slot = Some(value);
    Ok(())
}

impl ProblemFile {
    pub fn read(path: impl AsRef<Path>) -> Result<Self, ProblemFileError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ProblemFileError::Io {
            path: path.display().to_string(),
            source,
        })?;
        ProblemFile::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ProblemFileError> {
        let mut name = None;
        let mut dim: Option<(usize, usize)> = None;
        let mut boxes = Vec::new();
        let mut scenario_lines: Vec<(usize, String, String)> = Vec::new();
        let mut weights: Option<(usize, Vec<f64>)> = None;
        let mut lambda = None;
        let mut nominal: Option<(usize, String)> = None;
        let mut epsilon: Option<(usize, f64)> = None;

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (directive, rest) = match content.split_once(char::is_whitespace) {
                Some((d, r)) => (d, r.trim()),
                None => (content, ""),
            };
            let args: Vec<&str> = rest.split_whitespace().collect();
            match directive {
                "problem" => {
                    if rest.is_empty() {
                        return Err(syntax(line, "`problem` needs a name"));
                    }
                    set_once(&mut name, rest.to_string(), line, "problem")?;
                }
                "dim" => {
                    let n = match args.as_slice() {
                        [n] => n
                            .parse::<usize>()
                            .ok()
                            .filter(|n| *n > 0)
                            .ok_or_else(|| syntax(line, format!("`{n}` is not a positive integer")))?,
                        _ => return Err(syntax(line, "`dim` takes one positive integer")),
                    };
                    set_once(&mut dim, (line, n), line, "dim")?;
                }
                "box" => match args.as_slice() {
                    [lo, hi] => boxes.push(Interval::new(parse_real(lo, line)?, parse_real(hi, line)?)),
                    _ => return Err(syntax(line, "`box` takes a lower and an upper bound")),
                },
                "scenario" => {
                    let (id, expr) = rest
                        .split_once('=')
                        .ok_or_else(|| syntax(line, "expected `scenario <id> = <expression>`"))?;
                    let id = id.trim();
                    if id.is_empty() || id.contains(char::is_whitespace) {
                        return Err(syntax(line, format!("invalid scenario id `{id}`")));
                    }
                    scenario_lines.push((line, id.to_string(), expr.trim().to_string()));
                }
                "weights" => {
                    if args.is_empty() {
                        return Err(syntax(line, "`weights` needs at least one value"));
                    }
                    let w = args.iter().map(|t| parse_real(t, line)).collect::<Result<Vec<_>, _>>()?;
                    set_once(&mut weights, (line, w), line, "weights")?;
                }
                "lambda" => {
                    let mode = match args.as_slice() {
                        ["geometric"] => LambdaMode::GeometricLimit,
                        [v] => {
                            let l = parse_real(v, line)?;
                            if !(l > 0.0) {
                                return Err(ProblemFileError::Config {
                                    line,
                                    source: ConfigError::NonPositiveLambda(l),
                                });
                            }
                            LambdaMode::Positive(l)
                        }
                        _ => return Err(syntax(line, "`lambda` takes a positive real or `geometric`")),
                    };
                    set_once(&mut lambda, mode, line, "lambda")?;
                }
                "nominal" => match args.as_slice() {
                    [id] => set_once(&mut nominal, (line, id.to_string()), line, "nominal")?,
                    _ => return Err(syntax(line, "`nominal` takes one scenario id")),
                },
                "epsilon" => match args.as_slice() {
                    [v] => {
                        let e = parse_real(v, line)?;
                        if e < 0.0 {
                            return Err(ProblemFileError::Config {
                                line,
                                source: ConfigError::NegativeEpsilon(e),
                            });
                        }
                        set_once(&mut epsilon, (line, e), line, "epsilon")?;
                    }
                    _ => return Err(syntax(line, "`epsilon` takes one nonnegative real")),
                },
                other => return Err(syntax(line, format!("unknown directive `{other}`"))),
            }
        }

        let name = name.ok_or(ProblemFileError::Missing("problem"))?;
        let (dim_line, dim) = dim.ok_or(ProblemFileError::Missing("dim"))?;
        if boxes.len() != dim {
            return Err(syntax(
                dim_line,
                format!("dimension {dim} needs {dim} `box` lines, found {}", boxes.len()),
            ));
        }
        if scenario_lines.is_empty() {
            return Err(ProblemFileError::Missing("scenario"));
        }
        let scenarios = scenario_lines
            .into_iter()
            .map(|(line, id, src)| match parse_expression_in(&src, dim) {
                Ok(expr) => Ok(Scenario::new(id, expr)),
                Err(source) => Err(ProblemFileError::Expression {
                    line,
                    scenario: id,
                    source,
                }),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let problem = UncertainProblem {
            name,
            dim,
            bounds: boxes,
            scenarios,
        };

        if let Some((line, w)) = &weights {
            validate_weights(w, problem.scenario_count())
                .map_err(|source| ProblemFileError::Config { line: *line, source })?;
        }
        if let Some((line, id)) = &nominal {
            if problem.scenario_index(id).is_none() {
                return Err(ProblemFileError::Config {
                    line: *line,
                    source: ConfigError::UnknownNominal(id.clone()),
                });
            }
        }
        match (&nominal, &epsilon) {
            (Some((line, _)), None) => return Err(syntax(*line, "`nominal` given without `epsilon`")),
            (None, Some((line, _))) => return Err(syntax(*line, "`epsilon` given without `nominal`")),
            _ => {}
        }

        Ok(ProblemFile {
            problem,
            weights: weights.map(|(_, w)| w),
            lambda,
            nominal: nominal.map(|(_, id)| id),
            epsilon: epsilon.map(|(_, e)| e),
        })
    }

    /// The declared aggregation settings.
    pub fn gowa_config(&self) -> Result<GowaConfig, ProblemFileError> {
        let weights = self.weights.clone().ok_or(ProblemFileError::Missing("weights"))?;
        let mode = self.lambda.ok_or(ProblemFileError::Missing("lambda"))?;
        GowaConfig::new(weights, mode, self.problem.scenario_count())
            .map_err(ProblemFileError::Settings)
    }

    /// The declared light robustness settings, if any.
    pub fn light_config(&self) -> Result<Option<LightConfig>, ProblemFileError> {
        match (&self.nominal, self.epsilon) {
            (Some(id), Some(eps)) => LightConfig::new(&self.problem, id, eps)
                .map(Some)
                .map_err(ProblemFileError::Settings),
            _ => Ok(None),
        }
    }
}

/// Canonical form; parsing it back yields an equal [`ProblemFile`].
impl fmt::Display for ProblemFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = &self.problem;
        writeln!(f, "problem {}", p.name)?;
        writeln!(f, "dim {}", p.dim)?;
        for b in &p.bounds {
            writeln!(f, "box {} {}", b.lo, b.hi)?;
        }
        for s in &p.scenarios {
            writeln!(f, "scenario {} = {}", s.id, s.expr)?;
        }
        if let Some(w) = &self.weights {
            let parts: Vec<String> = w.iter().map(|v| v.to_string()).collect();
            writeln!(f, "weights {}", parts.join(" "))?;
        }
        if let Some(l) = &self.lambda {
            writeln!(f, "lambda {l}")?;
        }
        if let Some(id) = &self.nominal {
            writeln!(f, "nominal {id}")?;
        }
        if let Some(e) = self.epsilon {
            writeln!(f, "epsilon {e}")?;
        }
        Ok(())
    }
}
