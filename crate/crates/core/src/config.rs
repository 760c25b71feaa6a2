//! Solver parameters and their validation against a problem.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::nu::NuStrategySpec;
use crate::problem::DcProblem;

/// Trial step `λ̄_k` at the start of each linesearch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaBarRule {
    Constant(f64),
    /// `λ̄_k = 0`: the boosted step is skipped and `x^{k+1} = y^k`.
    ZeroBoost,
}

impl LambdaBarRule {
    pub fn value(&self) -> f64 {
        match *self {
            LambdaBarRule::Constant(v) => v,
            LambdaBarRule::ZeroBoost => 0.0,
        }
    }
}

/// Tolerance sequence `ε_k` for the approximate subgradient of `h`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsSchedule {
    Zero,
    Geometric {
        eps0: f64,
        q: f64,
    },
    /// `ε_k = eps0 / (k + 1)²`
    Harmonic2 {
        eps0: f64,
    },
}

impl EpsSchedule {
    pub fn at(&self, k: usize) -> f64 {
        match *self {
            EpsSchedule::Zero => 0.0,
            EpsSchedule::Geometric { eps0, q } => eps0 * q.powi(k as i32),
            EpsSchedule::Harmonic2 { eps0 } => {
                let kp = (k + 1) as f64;
                eps0 / (kp * kp)
            }
        }
    }
}

/// How the Step 2 pair `(y^k, ξ^k)` is produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InexactMode {
    /// Kink-aware coordinate bisection, stopped at the first acceptable iterate.
    InnerSolver,
    /// Exact minimizer pushed as far as the acceptance test allows along a random direction.
    PerturbedExact,
    /// Closed-form minimizer with `ξ = w`.
    Exact,
}

/// What the solver does when a proven inequality fails on an iterate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationPolicy {
    Abort,
    Warn,
}

impl Default for ViolationPolicy {
    fn default() -> Self {
        if cfg!(debug_assertions) {
            ViolationPolicy::Abort
        } else {
            ViolationPolicy::Warn
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub rho: f64,
    pub beta: f64,
    pub theta: f64,
    pub lambda_bar_rule: LambdaBarRule,
    pub eps_schedule: EpsSchedule,
    pub nu_strategy: NuStrategySpec,
    pub stop_step_tol: f64,
    pub d_zero_tol: f64,
    pub max_iter: usize,
    pub max_backtracks: usize,
    pub inexact_mode: InexactMode,
    #[serde(default)]
    pub on_violation: ViolationPolicy,
}

impl Default for SolverConfig {
    /// Parameters of the two-dimensional experiments: `ρ = 0.6`, `β = 0.1`,
    /// `λ̄ = 1`, `θ = 0.2`, `ν_k = 0.01‖d^k‖²/(k+1)`, step tolerance `10⁻⁵`.
    fn default() -> Self {
        SolverConfig {
            rho: 0.6,
            beta: 0.1,
            theta: 0.2,
            lambda_bar_rule: LambdaBarRule::Constant(1.0),
            eps_schedule: EpsSchedule::Zero,
            nu_strategy: NuStrategySpec::ratio(0.01),
            stop_step_tol: 1e-5,
            d_zero_tol: 1e-12,
            max_iter: 10_000,
            max_backtracks: 60,
            inexact_mode: InexactMode::InnerSolver,
            on_violation: ViolationPolicy::default(),
        }
    }
}

/// A single failed parameter bound.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn push(out: &mut Vec<Violation>, field: &'static str, message: impl Into<String>) {
    out.push(Violation {
        field,
        message: message.into(),
    });
}

/// Lists every violated parameter bound; empty means the pair is runnable.
pub fn validate(problem: &DcProblem, config: &SolverConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    for msg in problem.violations() {
        push(&mut out, "problem", msg);
    }
    let sigma = problem.sigma;
    if !(config.rho > 0.0) {
        push(&mut out, "rho", format!("rho ≤ 0 (got {})", config.rho));
    }
    if !(config.beta > 0.0 && config.beta < 1.0) {
        push(&mut out, "beta", format!("beta ∉ (0,1) (got {})", config.beta));
    }
    if !(config.theta >= 0.0) {
        push(&mut out, "theta", format!("theta < 0 (got {})", config.theta));
    } else if !(config.theta < sigma / 2.0) {
        push(
            &mut out,
            "theta",
            format!("theta ≥ sigma/2 (theta {}, sigma {})", config.theta, sigma),
        );
    }
    if let LambdaBarRule::Constant(v) = config.lambda_bar_rule {
        if !(v >= 0.0 && v.is_finite()) {
            push(
                &mut out,
                "lambda_bar",
                format!("lambda_bar < 0 or non-finite (got {v})"),
            );
        }
    }
    match config.eps_schedule {
        EpsSchedule::Zero => {}
        EpsSchedule::Geometric { eps0, q } => {
            if !(eps0 >= 0.0) {
                push(&mut out, "eps.eps0", format!("eps0 < 0 (got {eps0})"));
            }
            if !(q > 0.0 && q < 1.0) {
                push(&mut out, "eps.q", format!("q ∉ (0,1) (got {q})"));
            }
        }
        EpsSchedule::Harmonic2 { eps0 } => {
            if !(eps0 >= 0.0) {
                push(&mut out, "eps.eps0", format!("eps0 < 0 (got {eps0})"));
            }
        }
    }
    for msg in config.nu_strategy.violations() {
        push(&mut out, "nu", msg);
    }
    if !(config.stop_step_tol > 0.0) {
        push(&mut out, "stop_step_tol", "stop_step_tol ≤ 0");
    }
    if !(config.d_zero_tol > 0.0) {
        push(&mut out, "d_zero_tol", "d_zero_tol ≤ 0");
    }
    if config.max_backtracks == 0 {
        push(&mut out, "max_backtracks", "max_backtracks must be positive");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems;

    #[test]
    fn default_config_is_valid_for_registered_problems() {
        let cfg = SolverConfig::default();
        for p in [problems::ex1(), problems::ex2(), problems::random_sep(4, 11)] {
            assert!(validate(&p, &cfg).is_empty(), "{}", p.name);
        }
    }

    #[test]
    fn theta_boundary() {
        let p = problems::ex1();
        let cfg = SolverConfig {
            theta: 0.5,
            ..SolverConfig::default()
        };
        let v = validate(&p, &cfg);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "theta");
        assert!(v[0].message.contains("theta ≥ sigma/2"));
    }

    #[test]
    fn beta_boundary() {
        let p = problems::ex1();
        let cfg = SolverConfig {
            beta: 1.0,
            ..SolverConfig::default()
        };
        let v = validate(&p, &cfg);
        assert_eq!(v.len(), 1);
        assert!(v[0].message.contains("beta ∉ (0,1)"));
    }

    #[test]
    fn validate_is_pure() {
        let p = problems::ex2();
        let cfg = SolverConfig {
            rho: -1.0,
            stop_step_tol: 0.0,
            ..SolverConfig::default()
        };
        assert_eq!(validate(&p, &cfg), validate(&p, &cfg));
        assert_eq!(validate(&p, &cfg).len(), 2);
    }

    #[test]
    fn schedules() {
        assert_eq!(EpsSchedule::Zero.at(5), 0.0);
        assert_eq!(EpsSchedule::Harmonic2 { eps0: 1.0 }.at(1), 0.25);
        assert!((EpsSchedule::Geometric { eps0: 2.0, q: 0.5 }.at(3) - 0.25).abs() < 1e-15);
    }
}
