//! `key = value` run configuration files.
//!
//! ```text
//! # 3-step SAGA at the default schedule
//! ranks = 2,2
//! estimator = saga
//! t = 3
//! alpha0 = 0.3          # ramp alpha_k = 0.3 (k-1)/(k+2); "const:0.3" for a constant
//! beta0 = 0.8
//! eta = 0.1             # or 1/L
//! B = auto              # 2 * max L_r
//! epochs = 200
//! seed = 0
//! reg = nonneg          # none | nonneg | ridge:<lambda>, or three comma-separated
//! mode_policy = random  # random | cyclic
//! sarah_q = auto
//! gamma_diag = none
//! ```
//!
//! `ranks` is required. `R` may be given alongside a single-entry `ranks` to
//! mean `R` equal blocks. `abs_tol`, `max_iters` and `trace` (epoch |
//! iteration) are also accepted. Unknown and repeated keys are errors.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{MidasError, Result};
use crate::estimators::EstimatorKind;
use crate::io::factors_dir::parse_usize_list;
use crate::model::RankVector;
use crate::prox::{Regularizer, RegularizerSpec};
use crate::solver::{InertialSchedule, Init, ModePolicy, SolverConfig, StepSize, TraceLevel};

/// One `key = value` line.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

/// Splits a config text into entries, dropping comments and blank lines.
pub fn parse_entries(text: &str, path: &Path) -> Result<Vec<Entry>> {
    let mut seen = BTreeMap::new();
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(parse_error(path, line, format!("expected key = value, got {content:?}")));
        };
        let (key, value) = (key.trim().to_string(), value.trim().to_string());
        if key.is_empty() {
            return Err(parse_error(path, line, "empty key".into()));
        }
        if let Some(first) = seen.insert(key.clone(), line) {
            return Err(parse_error(path, line, format!("key {key:?} already set on line {first}")));
        }
        out.push(Entry { line, key, value });
    }
    Ok(out)
}

pub fn read_config(path: impl AsRef<Path>) -> Result<SolverConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| MidasError::io(path, e))?;
    parse_config(&text, path)
}

pub fn parse_config(text: &str, path: &Path) -> Result<SolverConfig> {
    config_from_entries(&parse_entries(text, path)?, path)
}

/// Builds a config from entries; every key must be a config key.
pub fn config_from_entries(entries: &[Entry], path: &Path) -> Result<SolverConfig> {
    let get = |k: &str| entries.iter().find(|e| e.key == k);
    let ranks_entry = get("ranks").ok_or_else(|| parse_error(path, 0, "missing required key \"ranks\"".into()))?;
    let mut ranks = parse_usize_list(&ranks_entry.value).map_err(|m| parse_error(path, ranks_entry.line, m))?;
    if let Some(e) = get("R") {
        let r: usize = parse_num(path, e)?;
        if ranks.len() == 1 {
            ranks = vec![ranks[0]; r];
        } else if ranks.len() != r {
            return Err(parse_error(
                path,
                e.line,
                format!("R = {r} but ranks lists {} blocks", ranks.len()),
            ));
        }
    }
    let ranks = RankVector::new(ranks).map_err(|err| parse_error(path, ranks_entry.line, err.to_string()))?;
    let mut c = SolverConfig::new(ranks);
    let mut sarah_q: Option<(usize, Option<usize>)> = None;

    for e in entries {
        match e.key.as_str() {
            "ranks" | "R" => {}
            "estimator" => {
                c.estimator = match e.value.to_ascii_lowercase().as_str() {
                    "sgd" => EstimatorKind::Sgd,
                    "saga" => EstimatorKind::Saga,
                    "sarah" => EstimatorKind::Sarah { period: None },
                    _ => return Err(bad_value(path, e, "sgd, saga or sarah")),
                }
            }
            "t" => c.depth = parse_num(path, e)?,
            "alpha0" => c.alpha = parse_schedule(path, e)?,
            "beta0" => c.beta = parse_schedule(path, e)?,
            "eta" => {
                c.step = if e.value.eq_ignore_ascii_case("1/L") {
                    StepSize::InverseLipschitz
                } else {
                    StepSize::Constant(parse_num(path, e)?)
                }
            }
            "B" => c.batch_size = parse_auto(path, e)?,
            "epochs" => c.epochs = parse_num(path, e)?,
            "seed" => c.seed = parse_num(path, e)?,
            "reg" => c.reg = parse_reg(path, e)?,
            "mode_policy" => {
                c.mode_policy = match e.value.to_ascii_lowercase().as_str() {
                    "random" | "uniform" => ModePolicy::UniformRandom,
                    "cyclic" => ModePolicy::Cyclic,
                    _ => return Err(bad_value(path, e, "random or cyclic")),
                }
            }
            "sarah_q" => sarah_q = Some((e.line, parse_auto(path, e)?)),
            "gamma_diag" => {
                c.gamma_diag = if e.value.eq_ignore_ascii_case("none") {
                    None
                } else {
                    Some(parse_num(path, e)?)
                }
            }
            "abs_tol" => c.abs_tol = parse_num(path, e)?,
            "max_iters" => {
                c.max_iters = if e.value.eq_ignore_ascii_case("none") {
                    None
                } else {
                    Some(parse_num(path, e)?)
                }
            }
            "trace" => {
                c.trace_level = match e.value.to_ascii_lowercase().as_str() {
                    "epoch" => TraceLevel::Epoch,
                    "iteration" | "iter" => TraceLevel::Iteration,
                    _ => return Err(bad_value(path, e, "epoch or iteration")),
                }
            }
            other => return Err(parse_error(path, e.line, format!("unknown key {other:?}"))),
        }
    }
    if let Some((line, q)) = sarah_q {
        match &mut c.estimator {
            EstimatorKind::Sarah { period } => *period = q,
            _ if q.is_some() => log::warn!("{}:{line}: sarah_q ignored for this estimator", path.display()),
            _ => {}
        }
    }
    c.validate().map_err(|err| parse_error(path, 0, err.to_string()))?;
    Ok(c)
}

/// Renders a config so that [`parse_config`] gives it back unchanged.
/// Provided initial factors cannot be expressed and are left out.
pub fn render_config(c: &SolverConfig) -> String {
    let mut s = String::new();
    let list = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
    let auto = |v: Option<usize>| v.map_or("auto".to_string(), |x| x.to_string());
    let schedule = |v: InertialSchedule| match v {
        InertialSchedule::Ramp { scale } => format!("{scale:?}"),
        InertialSchedule::Constant(c) => format!("const:{c:?}"),
    };
    let reg = |r: Regularizer| match r {
        Regularizer::None => "none".to_string(),
        Regularizer::NonNegative => "nonneg".to_string(),
        Regularizer::Ridge(l) => format!("ridge:{l:?}"),
    };
    let modes = c.reg.modes();
    let reg_text = if modes.iter().all(|&m| m == modes[0]) {
        reg(modes[0])
    } else {
        modes.map(reg).join(",")
    };
    let _ = writeln!(s, "ranks = {}", list(c.ranks.ranks()));
    let _ = writeln!(s, "estimator = {}", c.estimator.name());
    let _ = writeln!(s, "t = {}", c.depth);
    let _ = writeln!(s, "alpha0 = {}", schedule(c.alpha));
    let _ = writeln!(s, "beta0 = {}", schedule(c.beta));
    match c.step {
        StepSize::Constant(eta) => {
            let _ = writeln!(s, "eta = {eta:?}");
        }
        StepSize::InverseLipschitz => {
            let _ = writeln!(s, "eta = 1/L");
        }
    }
    let _ = writeln!(s, "B = {}", auto(c.batch_size));
    let _ = writeln!(s, "epochs = {}", c.epochs);
    let _ = writeln!(s, "seed = {}", c.seed);
    let _ = writeln!(s, "reg = {reg_text}");
    let policy = match c.mode_policy {
        ModePolicy::UniformRandom => "random",
        ModePolicy::Cyclic => "cyclic",
    };
    let _ = writeln!(s, "mode_policy = {policy}");
    if let EstimatorKind::Sarah { period } = c.estimator {
        let _ = writeln!(s, "sarah_q = {}", auto(period));
    }
    let _ = writeln!(s, "gamma_diag = {}", c.gamma_diag.map_or("none".into(), |g| format!("{g:?}")));
    let _ = writeln!(s, "abs_tol = {:?}", c.abs_tol);
    let _ = writeln!(s, "max_iters = {}", c.max_iters.map_or("none".into(), |m| m.to_string()));
    let trace = match c.trace_level {
        TraceLevel::Epoch => "epoch",
        TraceLevel::Iteration => "iteration",
    };
    let _ = writeln!(s, "trace = {trace}");
    if matches!(c.init, Init::Provided(_)) {
        s.push_str("# initial factors were provided programmatically\n");
    }
    s
}

fn parse_error(path: &Path, line: usize, message: String) -> MidasError {
    MidasError::Parse {
        path: PathBuf::from(path),
        line,
        message,
    }
}

fn bad_value(path: &Path, e: &Entry, expected: &str) -> MidasError {
    parse_error(path, e.line, format!("{}: expected {expected}, got {:?}", e.key, e.value))
}

pub fn parse_num<T: std::str::FromStr>(path: &Path, e: &Entry) -> Result<T> {
    e.value
        .parse()
        .map_err(|_| parse_error(path, e.line, format!("{}: cannot parse {:?}", e.key, e.value)))
}

fn parse_auto(path: &Path, e: &Entry) -> Result<Option<usize>> {
    if e.value.eq_ignore_ascii_case("auto") {
        Ok(None)
    } else {
        parse_num(path, e).map(Some)
    }
}

fn parse_schedule(path: &Path, e: &Entry) -> Result<InertialSchedule> {
    let value = e.value.trim();
    let parsed = match value.strip_prefix("const:") {
        Some(rest) => rest.trim().parse().map(InertialSchedule::Constant),
        None => value.parse().map(|scale| InertialSchedule::Ramp { scale }),
    };
    parsed.map_err(|_| bad_value(path, e, "a number or const:<number>"))
}

fn parse_reg(path: &Path, e: &Entry) -> Result<RegularizerSpec> {
    let one = |s: &str| -> Result<Regularizer> {
        let s = s.trim();
        let r = match s.to_ascii_lowercase().as_str() {
            "none" => Regularizer::None,
            "nonneg" | "nonnegative" => Regularizer::NonNegative,
            other => match other.strip_prefix("ridge:").map(|l| l.trim().parse::<f64>()) {
                Some(Ok(l)) => Regularizer::Ridge(l),
                _ => return Err(bad_value(path, e, "none, nonneg or ridge:<lambda>")),
            },
        };
        r.validate().map_err(|err| parse_error(path, e.line, err.to_string()))
    };
    let parts: Vec<&str> = e.value.split(',').collect();
    match parts.len() {
        1 => Ok(RegularizerSpec::uniform(one(parts[0])?)),
        3 => RegularizerSpec::new([one(parts[0])?, one(parts[1])?, one(parts[2])?]),
        _ => Err(bad_value(path, e, "one regularizer or three comma-separated")),
    }
}
