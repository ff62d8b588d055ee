//! Command-line front end. [`run_command`] does all the work and returns the
//! text to print, so it can be driven from tests without a process.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::aggregation::{gowa_phi, ordered_levels, scenario_values, AggregationError};
use crate::counterparts::{
    bounds_check, classify_point, solve_counterpart, CounterpartError, CounterpartKind, SolutionSet, CLASSIFY_TOL,
};
use crate::problem::{validate_problem_for, ProblemError, ProblemFile, ProblemFileError, SolverConfig, UncertainProblem};
use crate::solver::grid_axis;
use crate::subdiff::{phi_subdiff_1d, subdiff_enclosure_nd, subdiff_level_1d, SubdiffConfig, SubdiffError};

/// Outcome of one invocation.
#[derive(Clone, Debug, PartialEq)]
pub struct CommandResult {
    /// 0 on success, 1 for usage or file errors, 2 for domain and solver errors.
    pub exit_code: i32,
    pub human_text: String,
    /// Present exactly when `--json` was given.
    pub machine_payload: Option<Value>,
}

#[derive(Parser, Debug)]
#[command(name = "gowa", version, about = "Robust counterparts of finite-scenario uncertain problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Problem file.
    #[arg(long)]
    problem: PathBuf,
    /// Print a JSON document instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum CounterpartArg {
    Gowa,
    Minmax,
    Minmin,
    Light,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum What {
    Phi,
    Levels,
    Values,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one counterpart.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        counterpart: CounterpartArg,
        /// Grid nodes per axis.
        #[arg(long)]
        grid: Option<usize>,
        /// Width of the final refinement bracket or pattern step.
        #[arg(long = "refine-tol")]
        refine_tol: Option<f64>,
    },
    /// Evaluate phi, the ordered levels or the scenario values at a point.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Comma-separated coordinates.
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        /// Quantity to print.
        #[arg(long, value_enum, default_value = "phi")]
        what: What,
    },
    /// Subdifferential of a level (1-based) or of phi at a point.
    Subdiff {
        #[command(flatten)]
        common: Common,
        /// Comma-separated coordinates.
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        /// Level number, or `phi`.
        #[arg(long)]
        level: String,
        /// Side probe offset.
        #[arg(long)]
        probe: Option<f64>,
    },
    /// Solve min-min, the aggregated counterpart, min-max and (if configured)
    /// light robustness side by side.
    Compare {
        #[command(flatten)]
        common: Common,
    },
    /// Report whether a point is flimsily or highly robust.
    Classify {
        #[command(flatten)]
        common: Common,
        /// Comma-separated coordinates.
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        /// Allowed gap to a scenario minimum.
        #[arg(long, default_value_t = CLASSIFY_TOL)]
        tol: f64,
    },
    /// Write scenario values, levels and phi on a grid as CSV.
    Sample {
        #[command(flatten)]
        common: Common,
        /// Grid nodes per axis.
        #[arg(long)]
        grid: usize,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
}

struct Failure {
    code: i32,
    kind: &'static str,
    message: String,
}

impl Failure {
    fn usage(kind: &'static str, message: impl ToString) -> Self {
        Failure {
            code: 1,
            kind,
            message: message.to_string(),
        }
    }

    fn domain(kind: &'static str, message: impl ToString) -> Self {
        Failure {
            code: 2,
            kind,
            message: message.to_string(),
        }
    }
}

impl From<ProblemFileError> for Failure {
    fn from(e: ProblemFileError) -> Self {
        Failure::usage("ProblemFileError", e)
    }
}

impl From<AggregationError> for Failure {
    fn from(e: AggregationError) -> Self {
        match e {
            AggregationError::DimensionMismatch { .. } => Failure::usage("DimensionMismatch", e),
            AggregationError::OutOfBox { .. } => Failure::domain("OutOfBox", e),
            AggregationError::Eval { .. } => Failure::domain("DomainError", e),
            AggregationError::NonpositiveLevelInGeometricMode { .. } => Failure::domain("NonpositiveLevelInGeometricMode", e),
            AggregationError::NegativeLevel { .. } => Failure::domain("NegativeLevel", e),
        }
    }
}

impl From<CounterpartError> for Failure {
    fn from(e: CounterpartError) -> Self {
        match e {
            CounterpartError::Aggregation(a) => a.into(),
            CounterpartError::InfeasibleLightConstraint { .. } => Failure::domain("InfeasibleLightConstraint", e),
            CounterpartError::Solver(_) => Failure::domain("SolverError", e),
            CounterpartError::Config(_) | CounterpartError::WeightCount { .. } => Failure::usage("ConfigError", e),
        }
    }
}

impl From<SubdiffError> for Failure {
    fn from(e: SubdiffError) -> Self {
        match e {
            SubdiffError::Aggregation(a) => a.into(),
            SubdiffError::JumpDetected { .. } => Failure::domain("JumpDetected", e),
            SubdiffError::NonsmoothScenarioInND { .. } => Failure::domain("NonsmoothScenarioInND", e),
            SubdiffError::ZeroLevelWithFractionalPower { .. } => Failure::domain("ZeroLevelWithFractionalPower", e),
            SubdiffError::ProbeOutsideBox(_) => Failure::domain("ProbeOutsideBox", e),
            SubdiffError::UnstableTieGroup { .. } => Failure::domain("UnstableTieGroup", e),
            SubdiffError::NotOneDimensional { .. } | SubdiffError::LevelOutOfRange { .. } | SubdiffError::WeightCount { .. } => {
                Failure::usage("UsageError", e)
            }
        }
    }
}

/// `%g`-style formatting with six significant digits.
pub fn fmt_g(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (5 - exp) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn fmt_point(p: &[f64]) -> String {
    if p.len() == 1 {
        fmt_g(p[0])
    } else {
        format!("({})", p.iter().map(|v| fmt_g(*v)).collect::<Vec<_>>().join(", "))
    }
}

fn fmt_points(ps: &[Vec<f64>]) -> String {
    format!("[{}]", ps.iter().map(|p| fmt_point(p)).collect::<Vec<_>>().join(", "))
}

fn fmt_list(vs: &[f64]) -> String {
    format!("[{}]", vs.iter().map(|v| fmt_g(*v)).collect::<Vec<_>>().join(", "))
}

fn parse_point(text: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Failure::usage("UsageError", format!("`{t}` is not a coordinate")))
        })
        .collect()
}

struct Loaded {
    file: ProblemFile,
    warnings: Vec<String>,
}

fn load(path: &Path) -> Result<Loaded, Failure> {
    let file = ProblemFile::read(path)?;
    match validate_problem_for(&file.problem, file.lambda) {
        Ok(report) => Ok(Loaded {
            warnings: report.warnings.iter().map(|w| w.to_string()).collect(),
            file,
        }),
        Err(errors) => {
            let message = errors.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ");
            let domain = errors.iter().any(|e| {
                matches!(
                    e,
                    ProblemError::SampleDomainError { .. } | ProblemError::NonpositiveObjectiveSample { .. }
                )
            });
            Err(if domain {
                Failure::domain("DomainError", message)
            } else {
                Failure::usage("InvalidProblem", message)
            })
        }
    }
}

fn check_dim(problem: &UncertainProblem, point: &[f64]) -> Result<(), Failure> {
    if point.len() != problem.dim {
        return Err(Failure::usage(
            "DimensionMismatch",
            format!("point has {} coordinates, the problem has dimension {}", point.len(), problem.dim),
        ));
    }
    Ok(())
}

struct Output {
    text: String,
    payload: Value,
}

fn with_warnings(mut text: String, warnings: &[String]) -> String {
    for w in warnings {
        text.push_str(&format!("warning: {w}\n"));
    }
    text
}

fn solution_json(s: &SolutionSet) -> Value {
    json!({
        "counterpart": s.kind.label(),
        "points": s.points,
        "values": s.values,
        "value": s.value,
        "nominal_optimum": s.nominal_optimum.as_ref().map(|n| json!({"point": n.point, "value": n.value})),
        "stats": {
            "grid_points": s.stats.grid_points,
            "feasible_points": s.stats.feasible_points,
            "refinements": s.stats.refinements,
            "evaluations": s.stats.evaluations,
        },
    })
}

fn counterpart_kind(file: &ProblemFile, arg: CounterpartArg) -> Result<CounterpartKind, Failure> {
    Ok(match arg {
        CounterpartArg::Gowa => CounterpartKind::Gowa(file.gowa_config()?),
        CounterpartArg::Minmax => CounterpartKind::MinMax,
        CounterpartArg::Minmin => CounterpartKind::MinMin,
        CounterpartArg::Light => CounterpartKind::Light(
            file.light_config()?
                .ok_or(ProblemFileError::Missing("nominal"))?,
        ),
    })
}

fn solve(loaded: &Loaded, arg: CounterpartArg, grid: Option<usize>, refine_tol: Option<f64>) -> Result<Output, Failure> {
    let problem = &loaded.file.problem;
    let kind = counterpart_kind(&loaded.file, arg)?;
    let mut cfg = SolverConfig::for_dim(problem.dim);
    if let Some(g) = grid {
        cfg.grid_points = g;
    }
    if let Some(t) = refine_tol {
        cfg.refine_tol = t;
    }
    cfg.validate().map_err(|e| Failure::usage("UsageError", e))?;
    let s = solve_counterpart(problem, &kind, &cfg)?;
    let mut text = format!(
        "problem: {}\ncounterpart: {}\npoints: {}\nvalue: {}\n",
        problem.name,
        s.kind,
        fmt_points(&s.points),
        fmt_g(s.value)
    );
    if let Some(n) = &s.nominal_optimum {
        text.push_str(&format!("nominal optimum: {} (value {})\n", fmt_point(&n.point), fmt_g(n.value)));
    }
    text.push_str(&format!(
        "grid points: {}, refinements: {}, evaluations: {}\n",
        s.stats.grid_points, s.stats.refinements, s.stats.evaluations
    ));
    let mut payload = solution_json(&s);
    payload["command"] = json!("solve");
    payload["problem"] = json!(problem.name);
    Ok(Output { text, payload })
}

fn eval(loaded: &Loaded, point: &str, what: What) -> Result<Output, Failure> {
    let problem = &loaded.file.problem;
    let x = parse_point(point)?;
    check_dim(problem, &x)?;
    let values = scenario_values(problem, &x)?;
    let levels = ordered_levels(&values);
    let ids: Vec<&str> = problem.scenarios.iter().map(|s| s.id.as_str()).collect();
    let (text, payload) = match what {
        What::Phi => {
            let cfg = loaded.file.gowa_config()?;
            let phi = gowa_phi(&levels.values, &cfg)?;
            (format!("phi({}) = {}\n", fmt_point(&x), fmt_g(phi)), json!({"phi": phi}))
        }
        What::Levels => {
            let by: Vec<&str> = levels.assignment.iter().map(|&j| ids[j]).collect();
            (
                format!("levels: {}\nrealized by: [{}]\n", fmt_list(&levels.values), by.join(", ")),
                json!({"levels": levels.values, "realized_by": by}),
            )
        }
        What::Values => (
            format!("values: {}\nscenarios: [{}]\n", fmt_list(&values), ids.join(", ")),
            json!({"values": values, "scenarios": ids}),
        ),
    };
    let mut payload = payload;
    payload["command"] = json!("eval");
    payload["point"] = json!(x);
    Ok(Output { text, payload })
}

fn subdiff(loaded: &Loaded, point: &str, level: &str, probe: Option<f64>) -> Result<Output, Failure> {
    let problem = &loaded.file.problem;
    let x = parse_point(point)?;
    check_dim(problem, &x)?;
    let cfg = SubdiffConfig {
        probe_delta: probe,
        ..SubdiffConfig::default()
    };
    if let Some(d) = probe {
        if !(d > 0.0) {
            return Err(Failure::usage("UsageError", "--probe must be positive"));
        }
    }
    let id = |j: usize| problem.scenarios[j].id.clone();
    if level == "phi" {
        let gowa = loaded.file.gowa_config()?;
        if problem.dim != 1 {
            return Err(SubdiffError::NotOneDimensional { dim: problem.dim }.into());
        }
        let iv = phi_subdiff_1d(problem, &gowa, x[0], &cfg)?;
        return Ok(Output {
            text: format!("phi at {}: [{}, {}]\n", fmt_point(&x), fmt_g(iv.lo), fmt_g(iv.hi)),
            payload: json!({"command": "subdiff", "level": "phi", "point": x, "interval": [iv.lo, iv.hi]}),
        });
    }
    let number: usize = level
        .parse()
        .ok()
        .filter(|l| *l >= 1)
        .ok_or_else(|| Failure::usage("UsageError", format!("`{level}` is not a level number or `phi`")))?;
    let l = number - 1;
    if problem.dim == 1 {
        let s = subdiff_level_1d(problem, x[0], l, &cfg)?;
        let g = &s.group;
        let members: Vec<String> = g.scenarios.iter().map(|&j| id(j)).collect();
        let mut text = format!(
            "s_{number} at {}: [{}, {}]\ntie group: levels {}-{}, scenarios [{}], value {}\n",
            fmt_point(&x),
            fmt_g(s.interval.lo),
            fmt_g(s.interval.hi),
            g.first_level + 1,
            g.first_level + g.len(),
            members.join(", "),
            fmt_g(g.value)
        );
        let side = |r: Option<usize>| r.map(id).unwrap_or_else(|| "-".into());
        text.push_str(&format!(
            "realized by: left {}, right {}\n",
            side(s.left_realizer),
            side(s.right_realizer)
        ));
        if s.boundary {
            text.push_str("boundary: one-sided\n");
        }
        let payload = json!({
            "command": "subdiff",
            "level": number,
            "point": x,
            "interval": [s.interval.lo, s.interval.hi],
            "boundary": s.boundary,
            "tie_group": {
                "levels": (g.first_level + 1..=g.first_level + g.len()).collect::<Vec<_>>(),
                "scenarios": members,
                "value": g.value,
            },
            "left_realizer": s.left_realizer.map(id),
            "right_realizer": s.right_realizer.map(id),
        });
        Ok(Output { text, payload })
    } else {
        let vertices = subdiff_enclosure_nd(problem, &x, l, &cfg)?;
        Ok(Output {
            text: format!("s_{number} at {}: hull of {}\n", fmt_point(&x), fmt_points(&vertices)),
            payload: json!({"command": "subdiff", "level": number, "point": x, "vertices": vertices}),
        })
    }
}

fn compare(loaded: &Loaded) -> Result<Output, Failure> {
    let problem = &loaded.file.problem;
    let gowa = loaded.file.gowa_config()?;
    let cfg = SolverConfig::for_dim(problem.dim);
    let report = bounds_check(problem, &gowa, &cfg)?;
    let light = match loaded.file.light_config()? {
        Some(l) => Some(solve_counterpart(problem, &CounterpartKind::Light(l), &cfg)?),
        None => None,
    };
    let mut rows = vec![
        ("minmin", report.minmin_value, &report.minmin),
        ("gowa", report.gowa_value, &report.gowa),
        ("minmax", report.minmax_value, &report.minmax),
    ];
    if let Some(l) = &light {
        rows.push(("light", l.value, l));
    }
    let mut text = format!("problem: {}\n{:<12}{:<14}points\n", problem.name, "counterpart", "value");
    for (label, value, set) in &rows {
        text.push_str(&format!("{label:<12}{:<14}{}\n", fmt_g(*value), fmt_points(&set.points)));
    }
    text.push_str(&format!(
        "sandwich: {} <= {} <= {} holds={}\n",
        fmt_g(report.minmin_value),
        fmt_g(report.gowa_value),
        fmt_g(report.minmax_value),
        report.holds
    ));
    let payload = json!({
        "command": "compare",
        "problem": problem.name,
        "rows": rows.iter().map(|(label, value, set)| json!({
            "counterpart": label,
            "value": value,
            "points": set.points,
        })).collect::<Vec<_>>(),
        "minmin_value": report.minmin_value,
        "gowa_value": report.gowa_value,
        "minmax_value": report.minmax_value,
        "holds": report.holds,
    });
    Ok(Output { text, payload })
}

fn classify(loaded: &Loaded, point: &str, tol: f64) -> Result<Output, Failure> {
    let problem = &loaded.file.problem;
    let x = parse_point(point)?;
    check_dim(problem, &x)?;
    if !(tol >= 0.0) {
        return Err(Failure::usage("UsageError", "--tol must be nonnegative"));
    }
    let c = classify_point(problem, &x, &SolverConfig::for_dim(problem.dim), tol)?;
    let mut text = format!(
        "point: {}\nflimsily: {}\nhighly: {}\n",
        fmt_point(&x),
        c.flimsily(),
        c.highly()
    );
    let mut per = Vec::new();
    for (i, s) in problem.scenarios.iter().enumerate() {
        text.push_str(&format!(
            "{}: value {}, minimum {}, optimal {}\n",
            s.id,
            fmt_g(c.values[i]),
            fmt_g(c.scenario_minima[i]),
            c.optimal_for[i]
        ));
        per.push(json!({
            "scenario": s.id,
            "value": c.values[i],
            "minimum": c.scenario_minima[i],
            "optimal": c.optimal_for[i],
        }));
    }
    let payload = json!({
        "command": "classify",
        "point": x,
        "flimsily": c.flimsily(),
        "highly": c.highly(),
        "scenarios": per,
    });
    Ok(Output { text, payload })
}

/// CSV header for a problem of dimension `n` with `p` scenarios.
pub fn sample_header(n: usize, p: usize) -> Vec<String> {
    (1..=n)
        .map(|k| format!("x{k}"))
        .chain((1..=p).map(|i| format!("f_{i}")))
        .chain((1..=p).map(|i| format!("s_{i}")))
        .chain(std::iter::once("phi".to_string()))
        .collect()
}

fn sample(loaded: &Loaded, grid: usize, out: &Path) -> Result<Output, Failure> {
    let problem = &loaded.file.problem;
    let gowa = loaded.file.gowa_config()?;
    if grid < 2 {
        return Err(Failure::usage("UsageError", "--grid must be at least 2"));
    }
    let n = problem.dim;
    let axes: Vec<Vec<f64>> = problem.bounds.iter().map(|b| grid_axis(*b, grid)).collect();
    let rows = grid
        .checked_pow(n as u32)
        .ok_or_else(|| Failure::usage("UsageError", "grid too large"))?;
    let io = |e: csv::Error| Failure::usage("IoError", format!("cannot write {}: {e}", out.display()));
    let mut writer = csv::Writer::from_path(out).map_err(io)?;
    let header = sample_header(n, problem.scenario_count());
    writer.write_record(&header).map_err(io)?;
    let mut x = vec![0.0; n];
    for k in 0..rows {
        let mut rem = k;
        for (axis, coords) in axes.iter().enumerate() {
            x[axis] = coords[rem % grid];
            rem /= grid;
        }
        let values = scenario_values(problem, &x)?;
        let levels = ordered_levels(&values);
        let phi = gowa_phi(&levels.values, &gowa)?;
        let record: Vec<String> = x
            .iter()
            .chain(&values)
            .chain(&levels.values)
            .chain(std::iter::once(&phi))
            .map(|v| v.to_string())
            .collect();
        writer.write_record(&record).map_err(io)?;
    }
    writer.flush().map_err(|e| Failure::usage("IoError", format!("cannot write {}: {e}", out.display())))?;
    Ok(Output {
        text: format!("wrote {rows} rows to {}\n", out.display()),
        payload: json!({"command": "sample", "rows": rows, "out": out.display().to_string(), "columns": header}),
    })
}

/// Parses `args` (without the program name) and runs the sub-command.
pub fn run_command<I, T>(args: I) -> CommandResult
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = std::iter::once(OsString::from("gowa"))
        .chain(args.into_iter().map(Into::into))
        .collect();
    let json_requested = args.iter().any(|a| a == "--json");
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let payload = json_requested.then(|| {
                if code == 0 {
                    json!({"message": text})
                } else {
                    json!({"error": {"kind": "UsageError", "message": text}})
                }
            });
            return CommandResult {
                exit_code: code,
                human_text: text,
                machine_payload: payload,
            };
        }
    };
    let (common, outcome) = match &cli.command {
        Command::Solve {
            common,
            counterpart,
            grid,
            refine_tol,
        } => (common, load(&common.problem).and_then(|l| Ok((solve(&l, *counterpart, *grid, *refine_tol)?, l.warnings)))),
        Command::Eval { common, point, what } => (common, load(&common.problem).and_then(|l| Ok((eval(&l, point, *what)?, l.warnings)))),
        Command::Subdiff {
            common,
            point,
            level,
            probe,
        } => (common, load(&common.problem).and_then(|l| Ok((subdiff(&l, point, level, *probe)?, l.warnings)))),
        Command::Compare { common } => (common, load(&common.problem).and_then(|l| Ok((compare(&l)?, l.warnings)))),
        Command::Classify { common, point, tol } => (common, load(&common.problem).and_then(|l| Ok((classify(&l, point, *tol)?, l.warnings)))),
        Command::Sample { common, grid, out } => (common, load(&common.problem).and_then(|l| Ok((sample(&l, *grid, out)?, l.warnings)))),
    };
    match outcome {
        Ok((out, warnings)) => {
            let mut payload = out.payload;
            payload["warnings"] = json!(warnings);
            CommandResult {
                exit_code: 0,
                human_text: with_warnings(out.text, &warnings),
                machine_payload: common.json.then_some(payload),
            }
        }
        Err(f) => CommandResult {
            exit_code: f.code,
            human_text: format!("error ({}): {}\n", f.kind, f.message),
            machine_payload: common
                .json
                .then(|| json!({"error": {"kind": f.kind, "message": f.message}})),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(fmt_g(-1.2793912), "-1.27939");
        assert_eq!(fmt_g(0.18), "0.18");
        assert_eq!(fmt_g(1.0), "1");
        assert_eq!(fmt_g(-0.5), "-0.5");
        assert_eq!(fmt_g(0.0), "0");
        assert_eq!(fmt_g(-0.0), "0");
        assert_eq!(fmt_g(1.0 / 3.0), "0.333333");
        assert_eq!(fmt_g(123456789.0), "1.23457e+08");
        assert_eq!(fmt_g(1.5e-7), "1.5e-07");
        assert_eq!(fmt_g(999999.5), "1e+06");
        assert_eq!(fmt_g(0.0001), "0.0001");
        assert_eq!(fmt_g(16.0 / 9.0), "1.77778");
    }

    #[test]
    fn usage_errors_exit_with_one() {
        let r = run_command(["solve", "--problem", "nope.prob", "--counterpart", "gowa"]);
        assert_eq!(r.exit_code, 1);
        assert!(r.machine_payload.is_none());
        let r = run_command(["solve", "--counterpart", "gowa"]);
        assert_eq!(r.exit_code, 1);
        let r = run_command(["frobnicate", "--json"]);
        assert_eq!(r.exit_code, 1);
        assert!(r.machine_payload.is_some());
        let r = run_command(["--help"]);
        assert_eq!(r.exit_code, 0);
    }

    fn problem(name: &str) -> String {
        format!("{}/problems/{name}", env!("CARGO_MANIFEST_DIR"))
    }

    fn run(args: &[&str]) -> CommandResult {
        run_command(args.iter().copied())
    }

    #[test]
    fn solve_prints_the_optimum() {
        let r = run(&["solve", "--problem", &problem("ex32.prob"), "--counterpart", "gowa"]);
        assert_eq!(r.exit_code, 0, "{}", r.human_text);
        assert!(r.human_text.contains("points: [-1.27939]"), "{}", r.human_text);
        assert!(r.machine_payload.is_none());

        let r = run(&["solve", "--problem", &problem("ex32.prob"), "--counterpart", "gowa", "--json"]);
        let json = r.machine_payload.unwrap();
        let x = json["points"][0][0].as_f64().unwrap();
        assert!((x + 1.279).abs() < 5e-3);
        assert_eq!(json["counterpart"], "gowa");
    }

    #[test]
    fn light_robustness_reports_the_nominal_optimum() {
        let r = run(&["solve", "--problem", &problem("ex32.prob"), "--counterpart", "light", "--json"]);
        assert_eq!(r.exit_code, 0);
        let json = r.machine_payload.unwrap();
        assert!((json["points"][0][0].as_f64().unwrap() + 1.283).abs() < 5e-3);
        assert!(json["nominal_optimum"].is_object());

        let r = run(&["solve", "--problem", &problem("ex41.prob"), "--counterpart", "light"]);
        assert_eq!(r.exit_code, 1);
        assert!(r.human_text.contains("nominal"), "{}", r.human_text);
    }

    #[test]
    fn subdiff_at_the_triple_tie() {
        let r = run(&["subdiff", "--problem", &problem("ex53.prob"), "--point", "4", "--level", "2"]);
        assert_eq!(r.exit_code, 0, "{}", r.human_text);
        assert!(r.human_text.contains("s_2 at 4: [-0.5, 1]"), "{}", r.human_text);
        assert!(r.human_text.contains("left z2, right z1"), "{}", r.human_text);

        let r = run(&["subdiff", "--problem", &problem("ex53.prob"), "--point", "4", "--level", "phi", "--json"]);
        let iv = &r.machine_payload.unwrap()["interval"];
        assert!((iv[0].as_f64().unwrap() + 0.5).abs() < 1e-6 && (iv[1].as_f64().unwrap() - 1.0).abs() < 1e-6);

        let r = run(&["subdiff", "--problem", &problem("ex53.prob"), "--point", "4", "--level", "6"]);
        assert_eq!(r.exit_code, 1);
        let r = run(&["subdiff", "--problem", &problem("ex53.prob"), "--point", "7", "--level", "1"]);
        assert_eq!(r.exit_code, 2);
    }

    #[test]
    fn jumps_are_domain_errors() {
        let r = run(&["subdiff", "--problem", &problem("ex34.prob"), "--point", "0", "--level", "1", "--json"]);
        assert_eq!(r.exit_code, 2);
        assert_eq!(r.machine_payload.unwrap()["error"]["kind"], "JumpDetected");
    }

    #[test]
    fn compare_reports_the_sandwich() {
        let r = run(&["compare", "--problem", &problem("ex41.prob")]);
        assert_eq!(r.exit_code, 0);
        assert!(r.human_text.contains("holds=true"), "{}", r.human_text);
        let r = run(&["compare", "--problem", &problem("ex41.prob"), "--json"]);
        let json = r.machine_payload.unwrap();
        assert_eq!(json["holds"], true);
        assert!((json["gowa_value"].as_f64().unwrap() - 0.18).abs() < 1e-6);
        assert_eq!(json["minmax_value"].as_f64().unwrap(), 1.0);
    }

    #[test]
    fn human_and_json_outputs_agree() {
        let path = problem("ex32.prob");
        let text = run(&["eval", "--problem", &path, "--point", "0", "--what", "levels"]).human_text;
        let json = run(&["eval", "--problem", &path, "--point", "0", "--what", "levels", "--json"])
            .machine_payload
            .unwrap();
        let levels: Vec<String> = json["levels"].as_array().unwrap().iter().map(|v| fmt_g(v.as_f64().unwrap())).collect();
        assert!(text.contains(&format!("levels: [{}]", levels.join(", "))), "{text}");
        assert!(text.contains("realized by: [z3, z1, z2, z4]"), "{text}");

        let text = run(&["eval", "--problem", &path, "--point", "0"]).human_text;
        assert!(text.contains("1.77778"), "{text}");
    }

    #[test]
    fn classify_a_boundary_point() {
        let r = run(&["classify", "--problem", &problem("ex41.prob"), "--point", "1", "--json"]);
        let json = r.machine_payload.unwrap();
        assert_eq!(json["flimsily"], true);
        assert_eq!(json["highly"], false);
    }

    #[test]
    fn sample_writes_the_documented_columns() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("s.csv");
        let r = run(&["sample", "--problem", &problem("ex32.prob"), "--grid", "5", "--out", out.to_str().unwrap()]);
        assert_eq!(r.exit_code, 0, "{}", r.human_text);
        let text = std::fs::read_to_string(&out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x1,f_1,f_2,f_3,f_4,s_1,s_2,s_3,s_4,phi"));
        assert_eq!(lines.count(), 5);
        assert_eq!(sample_header(2, 1), vec!["x1", "x2", "f_1", "s_1", "phi"]);
    }

    #[test]
    fn malformed_files_are_usage_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.prob");
        std::fs::write(&path, "problem bad\ndim 1\nbox 0 1\nscenario z1 = x1 +\n").unwrap();
        let r = run(&["solve", "--problem", path.to_str().unwrap(), "--counterpart", "minmax", "--json"]);
        assert_eq!(r.exit_code, 1);
        let message = r.machine_payload.unwrap()["error"]["message"].as_str().unwrap().to_string();
        assert!(message.contains("line 4"), "{message}");
    }

    #[test]
    fn negative_samples_warn() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("neg.prob");
        std::fs::write(&path, "problem neg\ndim 1\nbox -1 1\nscenario z1 = x1\nweights 1\nlambda 1\n").unwrap();
        let r = run(&["solve", "--problem", path.to_str().unwrap(), "--counterpart", "minmax", "--json"]);
        assert_eq!(r.exit_code, 0);
        assert!(!r.machine_payload.unwrap()["warnings"].as_array().unwrap().is_empty());
    }
}
