//! Flat key/value run description, read from TOML and `--set` overrides.

use std::collections::BTreeMap;

use anyhow::{anyhow, bail, Context, Result};
use dcboost::config::{EpsSchedule, InexactMode, LambdaBarRule, SolverConfig, ViolationPolicy};
use dcboost::nu::{DeltaRule, EtaRule, NuStrategySpec, URule};
use dcboost::{problems, DcProblem, Solver};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use toml::Value;

pub type FlatMap = BTreeMap<String, Value>;

const KEYS: &[&str] = &[
    "problem",
    "solver",
    "rho",
    "beta",
    "theta",
    "lambda_bar",
    "eps.kind",
    "eps.eps0",
    "eps.q",
    "nu.kind",
    "stop_step_tol",
    "d_zero_tol",
    "max_iter",
    "max_backtracks",
    "inexact_mode",
    "on_violation",
    "starts.count",
    "starts.box",
    "starts.seed",
    "starts.list",
];

const NU_KEYS: &[&str] = &[
    "nu.omega",
    "nu.u",
    "nu.delta",
    "nu.delta_min",
    "nu.delta_start",
    "nu.nu0",
    "nu.fraction",
    "nu.eta",
    "nu.eta_min",
    "nu.eta_max",
    "nu.c0_offset",
    "nu.m",
];

#[derive(Clone, Debug)]
pub enum Starts {
    Explicit(Vec<Vec<f64>>),
    Sampled { count: usize, lo: f64, hi: f64 },
}

#[derive(Clone, Debug)]
pub struct RunSpec {
    pub problem: DcProblem,
    pub solver: Solver,
    pub config: SolverConfig,
    pub starts: Starts,
    pub seed: u64,
}

impl RunSpec {
    /// Starting points in run order; sampled starts are uniform per coordinate.
    pub fn start_points(&self) -> Vec<Vec<f64>> {
        match &self.starts {
            Starts::Explicit(v) => v.clone(),
            Starts::Sampled { count, lo, hi } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                (0..*count)
                    .map(|_| (0..self.problem.dim).map(|_| rng.gen_range(*lo..=*hi)).collect())
                    .collect()
            }
        }
    }
}

/// Reads a TOML document into dotted keys; nested tables and dotted keys are equivalent.
pub fn parse_toml(text: &str) -> Result<FlatMap> {
    let table: toml::Table = text.parse().context("config is not valid TOML")?;
    let mut out = FlatMap::new();
    flatten("", &Value::Table(table), &mut out);
    Ok(out)
}

fn flatten(prefix: &str, v: &Value, out: &mut FlatMap) {
    match v {
        Value::Table(t) => {
            for (k, sub) in t {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, sub, out);
            }
        }
        other => {
            out.insert(prefix.to_string(), other.clone());
        }
    }
}

/// `key=value`; the value is read as a TOML literal, falling back to a bare string.
pub fn parse_override(s: &str) -> Result<(String, Value)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| anyhow!("override `{s}` is not of the form key=value"))?;
    let raw = v.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    Ok((k.trim().to_string(), value))
}

fn num(map: &FlatMap, key: &str) -> Result<Option<f64>> {
    match map.get(key) {
        None => Ok(None),
        Some(Value::Float(f)) => Ok(Some(*f)),
        Some(Value::Integer(i)) => Ok(Some(*i as f64)),
        Some(other) => bail!("`{key}` must be a number, got {other}"),
    }
}

fn int(map: &FlatMap, key: &str) -> Result<Option<u64>> {
    match map.get(key) {
        None => Ok(None),
        Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
        Some(other) => bail!("`{key}` must be a non-negative integer, got {other}"),
    }
}

fn string<'a>(map: &'a FlatMap, key: &str) -> Result<Option<&'a str>> {
    match map.get(key) {
        None => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.as_str())),
        Some(other) => bail!("`{key}` must be a string, got {other}"),
    }
}

fn vector(v: &Value, key: &str) -> Result<Vec<f64>> {
    let arr = v.as_array().ok_or_else(|| anyhow!("`{key}` must be an array"))?;
    arr.iter()
        .map(|x| match x {
            Value::Float(f) => Ok(*f),
            Value::Integer(i) => Ok(*i as f64),
            other => bail!("`{key}` holds a non-number {other}"),
        })
        .collect()
}

fn nu_spec(map: &FlatMap) -> Result<NuStrategySpec> {
    let f = |k: &str, d: f64| num(map, k).map(|v| v.unwrap_or(d));
    let kind = string(map, "nu.kind")?.unwrap_or("ratio");
    Ok(match kind {
        "ratio" => {
            let u_rule = match map.get("nu.u") {
                None => URule::Linear,
                Some(Value::String(s)) if s == "linear" => URule::Linear,
                Some(Value::Float(p)) => URule::Power(*p),
                Some(Value::Integer(p)) => URule::Power(*p as f64),
                Some(other) => bail!("`nu.u` must be \"linear\" or an exponent, got {other}"),
            };
            NuStrategySpec::Ratio {
                omega: f("nu.omega", 0.01)?,
                u_rule,
            }
        }
        "a1" => {
            let delta_rule = match num(map, "nu.delta_start")? {
                Some(start) => DeltaRule::Decaying { start },
                None => DeltaRule::Constant(f("nu.delta", 0.5)?),
            };
            let delta_min = match (num(map, "nu.delta_min")?, delta_rule) {
                (Some(m), _) => m,
                (None, DeltaRule::Constant(d)) => d,
                (None, DeltaRule::Decaying { .. }) => 0.1,
            };
            NuStrategySpec::A1Direct {
                delta_min,
                delta_rule,
                nu0: f("nu.nu0", 0.0)?,
                fraction: f("nu.fraction", 1.0)?,
            }
        }
        "zhang-hager" => NuStrategySpec::ZhangHager {
            eta_min: f("nu.eta_min", 0.1)?,
            eta_max: f("nu.eta_max", 0.85)?,
            c0_offset: f("nu.c0_offset", 1.0)?,
            eta_rule: match num(map, "nu.eta")? {
                Some(e) => EtaRule::Constant(e),
                None => EtaRule::Ramp,
            },
        },
        "grippo" => NuStrategySpec::Grippo {
            m: int(map, "nu.m")?.unwrap_or(5) as usize,
        },
        "zero" => NuStrategySpec::Zero,
        other => bail!("unknown nu.kind `{other}` (ratio, a1, zhang-hager, grippo, zero)"),
    })
}

pub fn build(map: &FlatMap) -> Result<RunSpec> {
    for k in map.keys() {
        if !KEYS.contains(&k.as_str()) && !NU_KEYS.contains(&k.as_str()) {
            bail!("unknown config key `{k}`");
        }
    }
    let problem = problems::get(string(map, "problem")?.unwrap_or("ex2"))?;
    let solver_name = string(map, "solver")?.unwrap_or("inmbdca");
    let solver = Solver::parse(solver_name)
        .ok_or_else(|| anyhow!("unknown solver `{solver_name}` (dca, nmbdca, bdca, inmbdca)"))?;

    let mut cfg = SolverConfig::default();
    if let Some(v) = num(map, "rho")? {
        cfg.rho = v;
    }
    if let Some(v) = num(map, "beta")? {
        cfg.beta = v;
    }
    if let Some(v) = num(map, "theta")? {
        cfg.theta = v;
    }
    match map.get("lambda_bar") {
        None => {}
        Some(Value::String(s)) if s == "zero-boost" => cfg.lambda_bar_rule = LambdaBarRule::ZeroBoost,
        Some(_) => {
            cfg.lambda_bar_rule = LambdaBarRule::Constant(num(map, "lambda_bar")?.expect("present"));
        }
    }
    cfg.eps_schedule = match string(map, "eps.kind")?.unwrap_or("zero") {
        "zero" => EpsSchedule::Zero,
        "geometric" => EpsSchedule::Geometric {
            eps0: num(map, "eps.eps0")?.unwrap_or(0.1),
            q: num(map, "eps.q")?.unwrap_or(0.5),
        },
        "harmonic2" => EpsSchedule::Harmonic2 {
            eps0: num(map, "eps.eps0")?.unwrap_or(0.1),
        },
        other => bail!("unknown eps.kind `{other}` (zero, geometric, harmonic2)"),
    };
    cfg.nu_strategy = nu_spec(map)?;
    if let Some(v) = num(map, "stop_step_tol")? {
        cfg.stop_step_tol = v;
    }
    if let Some(v) = num(map, "d_zero_tol")? {
        cfg.d_zero_tol = v;
    }
    if let Some(v) = int(map, "max_iter")? {
        cfg.max_iter = v as usize;
    }
    if let Some(v) = int(map, "max_backtracks")? {
        cfg.max_backtracks = v as usize;
    }
    if let Some(m) = string(map, "inexact_mode")? {
        cfg.inexact_mode = match m {
            "inner" => InexactMode::InnerSolver,
            "perturbed" => InexactMode::PerturbedExact,
            "exact" => InexactMode::Exact,
            other => bail!("unknown inexact_mode `{other}` (inner, perturbed, exact)"),
        };
    }
    if let Some(p) = string(map, "on_violation")? {
        cfg.on_violation = match p {
            "abort" => ViolationPolicy::Abort,
            "warn" => ViolationPolicy::Warn,
            other => bail!("unknown on_violation `{other}` (abort, warn)"),
        };
    }

    let issues = dcboost::config::validate(&problem, &solver.effective_config(&cfg));
    if !issues.is_empty() {
        let text: Vec<String> = issues.iter().map(|v| v.to_string()).collect();
        bail!("invalid config: {}", text.join("; "));
    }

    let seed = int(map, "starts.seed")?.unwrap_or(0);
    let starts = match map.get("starts.list") {
        Some(v) => {
            let arr = v.as_array().ok_or_else(|| anyhow!("`starts.list` must be an array"))?;
            let pts = arr
                .iter()
                .map(|p| vector(p, "starts.list"))
                .collect::<Result<Vec<_>>>()?;
            if let Some(bad) = pts.iter().find(|p| p.len() != problem.dim) {
                bail!("start {bad:?} does not have dimension {}", problem.dim);
            }
            Starts::Explicit(pts)
        }
        None => {
            let (lo, hi) = match map.get("starts.box") {
                Some(v) => match vector(v, "starts.box")?.as_slice() {
                    [lo, hi] if lo <= hi => (*lo, *hi),
                    _ => bail!("`starts.box` must be [lo, hi] with lo ≤ hi"),
                },
                None => (-10.0, 10.0),
            };
            Starts::Sampled {
                count: int(map, "starts.count")?.unwrap_or(1) as usize,
                lo,
                hi,
            }
        }
    };

    Ok(RunSpec {
        problem,
        solver,
        config: cfg,
        starts,
        seed,
    })
}
