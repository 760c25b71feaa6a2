//! Solver loops: InmBDCA and its exact / unboosted reductions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{validate, EpsSchedule, InexactMode, LambdaBarRule, SolverConfig, ViolationPolicy};
use crate::diagnostics::{DESCENT_TOL, LOWER_BOUND_TOL};
use crate::error::{check_dim, DcError, Result};
use crate::linalg::{axpy, dist, norm_sq, sub};
use crate::linesearch::{nonmonotone_search, tau_bound};
use crate::nu::{nu_init, NuStrategySpec};
use crate::oracles::eps_subgrad;
use crate::problem::DcProblem;
use crate::subproblem::{solve_inexact, INEXACT_SLACK};
use crate::trace::{IterationRecord, Termination, Trace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Dca,
    Nmbdca,
    Bdca,
    Inmbdca,
}

impl Solver {
    pub fn name(&self) -> &'static str {
        match self {
            Solver::Dca => "dca",
            Solver::Nmbdca => "nmbdca",
            Solver::Bdca => "bdca",
            Solver::Inmbdca => "inmbdca",
        }
    }

    pub fn parse(s: &str) -> Option<Solver> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dca" => Some(Solver::Dca),
            "nmbdca" => Some(Solver::Nmbdca),
            "bdca" => Some(Solver::Bdca),
            "inmbdca" => Some(Solver::Inmbdca),
            _ => None,
        }
    }

    /// The configuration this solver actually runs with.
    pub fn effective_config(&self, config: &SolverConfig) -> SolverConfig {
        let mut cfg = config.clone();
        if *self != Solver::Inmbdca {
            cfg.eps_schedule = EpsSchedule::Zero;
            cfg.theta = 0.0;
            cfg.inexact_mode = InexactMode::Exact;
        }
        match self {
            Solver::Dca => {
                // ν only enters through the linesearch, which λ̄ = 0 skips
                cfg.lambda_bar_rule = LambdaBarRule::ZeroBoost;
                cfg.nu_strategy = NuStrategySpec::Zero;
            }
            Solver::Bdca => cfg.nu_strategy = NuStrategySpec::Zero,
            _ => {}
        }
        cfg
    }

    pub fn run(&self, problem: &DcProblem, config: &SolverConfig, x0: &[f64], seed: u64) -> Result<Trace> {
        run_loop(problem, &self.effective_config(config), x0, seed, self.name())
    }
}

/// Inexact nonmonotone boosted DC algorithm.
pub fn run_inmbdca(problem: &DcProblem, config: &SolverConfig, x0: &[f64], seed: u64) -> Result<Trace> {
    Solver::Inmbdca.run(problem, config, x0, seed)
}

/// Exact nonmonotone boosted DCA: `ε_k = 0`, `θ = 0`, closed-form subproblems.
pub fn run_nmbdca(problem: &DcProblem, config: &SolverConfig, x0: &[f64]) -> Result<Trace> {
    Solver::Nmbdca.run(problem, config, x0, 0)
}

/// [`run_nmbdca`] with `ν ≡ 0`.
pub fn run_bdca(problem: &DcProblem, config: &SolverConfig, x0: &[f64]) -> Result<Trace> {
    Solver::Bdca.run(problem, config, x0, 0)
}

/// Classical DCA: [`run_nmbdca`] with `λ̄_k = 0` and `ν ≡ 0`.
pub fn run_dca(problem: &DcProblem, config: &SolverConfig, x0: &[f64]) -> Result<Trace> {
    Solver::Dca.run(problem, config, x0, 0)
}

/// Runs every start independently on the rayon pool; run `i` uses seed `seed + i`.
/// Results come back in start order.
pub fn run_multistart(
    problem: &DcProblem,
    config: &SolverConfig,
    solver: Solver,
    starts: &[Vec<f64>],
    seed: u64,
) -> Vec<Result<Trace>> {
    starts
        .par_iter()
        .enumerate()
        .map(|(i, x0)| solver.run(problem, config, x0, seed.wrapping_add(i as u64)))
        .collect()
}

struct Guard<'a> {
    policy: ViolationPolicy,
    violations: &'a mut Vec<String>,
}

impl Guard<'_> {
    fn require(&mut self, k: usize, slack: f64, tol: f64, inequality: &str) -> Result<()> {
        if slack >= -tol {
            return Ok(());
        }
        match self.policy {
            ViolationPolicy::Abort => Err(DcError::InvariantViolation {
                inequality: inequality.to_string(),
                k,
                slack,
            }),
            ViolationPolicy::Warn => {
                log::warn!("iteration {k}: {inequality} violated (slack {slack:e})");
                self.violations.push(format!("k={k}: {inequality} (slack {slack:e})"));
                Ok(())
            }
        }
    }
}

fn run_loop(problem: &DcProblem, config: &SolverConfig, x0: &[f64], seed: u64, solver: &str) -> Result<Trace> {
    let issues = validate(problem, config);
    if !issues.is_empty() {
        return Err(DcError::InvalidConfig(issues));
    }
    check_dim(problem.dim, x0.len())?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = problem.sigma;
    let theta = config.theta;
    let rho = config.rho;
    let phi = |z: &[f64]| problem.phi(z);

    let mut violations = Vec::new();
    let mut guard = Guard {
        policy: config.on_violation,
        violations: &mut violations,
    };

    let mut x = x0.to_vec();
    let mut phi_x = phi(&x)?;
    let (mut nu_state, _) = nu_init(&config.nu_strategy, phi_x);
    let mut records = Vec::new();
    let mut final_y = None;
    let mut k = 0;

    let termination = loop {
        if k >= config.max_iter {
            break Termination::MaxIter;
        }
        let eps_k = config.eps_schedule.at(k);
        let cert = eps_subgrad(&problem.h, &x, eps_k, &mut rng)?;
        let sol = solve_inexact(&problem.g, &cert.w, &x, theta, config.inexact_mode, &mut rng)?;
        let d = sub(&sol.y, &x);
        let dn2 = norm_sq(&d);
        let d_norm = dn2.sqrt();
        final_y = Some(sol.y.clone());
        if d_norm <= config.d_zero_tol {
            break Termination::DZero;
        }

        let nu_k = nu_state.current(k, dn2);
        let lambda_bar = config.lambda_bar_rule.value();
        let ls = nonmonotone_search(
            phi,
            &sol.y,
            &d,
            rho,
            config.beta,
            lambda_bar,
            nu_k,
            config.max_backtracks,
        )?;
        let tau = if nu_k > 0.0 {
            let t = tau_bound(&problem.g, &x, &sol.y, &d, nu_k, eps_k, sigma, rho).map_err(|e| match e {
                DcError::InvariantViolation { inequality, slack, .. } => {
                    DcError::InvariantViolation { inequality, k, slack }
                }
                other => other,
            })?;
            Some(t)
        } else {
            None
        };

        let x_next = axpy(&sol.y, ls.lambda, &d);
        let phi_y = phi(&sol.y)?;
        let phi_next = ls.accepted_value;

        let record = IterationRecord {
            k,
            x: x.clone(),
            phi_x,
            eps_k,
            eps_certified: cert.eps_achieved,
            w: cert.w,
            y: sol.y,
            xi: sol.xi,
            d_norm,
            inexact_lhs: sol.lhs,
            inexact_rhs: sol.rhs,
            nu_k,
            lambda_bar,
            lambda_k: ls.lambda,
            n_backtracks: ls.n_backtracks,
            phi_y,
            phi_next,
            tau_hat: tau.map(|t| t.tau_hat),
            tau: tau.map(|t| t.tau),
        };

        let half_gap = sigma / 2.0 - theta;
        guard.require(
            k,
            record.inexact_rhs - record.inexact_lhs,
            INEXACT_SLACK,
            "‖w − ξ‖ ≤ θ‖y − x‖",
        )?;
        guard.require(
            k,
            phi_x - half_gap * dn2 + eps_k - phi_y,
            DESCENT_TOL,
            "φ(y) ≤ φ(x) − (σ/2 − θ)‖d‖² + ε",
        )?;
        guard.require(
            k,
            phi_x - (half_gap + rho * ls.lambda * ls.lambda) * dn2 + nu_k + eps_k - phi_next,
            DESCENT_TOL,
            "φ(x⁺) ≤ φ(x) − (σ/2 − θ + ρλ²)‖d‖² + ν + ε",
        )?;
        if let Some(bar) = problem.phi_lower_bound {
            guard.require(k, phi_next - bar, LOWER_BOUND_TOL, "φ ≥ declared lower bound")?;
        }

        match nu_state.advance(k, phi_x, phi_next, eps_k) {
            Ok(_) => {}
            Err(DcError::InvariantViolation { inequality, slack, .. }) => {
                guard.require(k, slack, 0.0, &inequality)?;
                nu_state.advance(k, phi_x, phi_next, eps_k - slack)?;
            }
            Err(e) => return Err(e),
        }

        let step = dist(&x_next, &x);
        records.push(record);
        x = x_next;
        phi_x = phi_next;
        k += 1;
        if step < config.stop_step_tol {
            break Termination::StepTol;
        }
    };

    Ok(Trace {
        problem_name: problem.name.clone(),
        problem: problem.clone(),
        solver: solver.to_string(),
        config: config.clone(),
        seed,
        x0: x0.to_vec(),
        records,
        final_x: x,
        final_phi: phi_x,
        final_y,
        termination,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems;
    use approx::assert_relative_eq;

    #[test]
    fn figure_two_start_converges() {
        let t = run_inmbdca(&problems::ex2(), &SolverConfig::default(), &[-4.4615, -9.0766], 1).unwrap();
        assert!(dist(&t.final_x, &[1.5, 0.0]) < 1e-3, "{:?}", t.final_x);
        assert_ne!(t.termination, Termination::MaxIter);
    }

    #[test]
    fn critical_start_stops_at_once() {
        let cfg = SolverConfig {
            theta: 0.0,
            ..SolverConfig::default()
        };
        let t = run_inmbdca(&problems::ex2(), &cfg, &[1.5, 0.0], 0).unwrap();
        assert_eq!(t.termination, Termination::DZero);
        assert!(t.records.len() <= 1);
        let t = run_dca(&problems::ex1(), &cfg, &[-1.0, -1.0]).unwrap();
        assert_eq!(t.termination, Termination::DZero);
        assert!(t.records.is_empty());
        // critical, but sign(0) = 0 picks a subgradient of h that is not in ∂g
        let t = run_dca(&problems::ex1(), &cfg, &[-1.0, 0.0]).unwrap();
        assert_eq!(t.records[0].y, vec![-1.0, -1.0 / 3.0]);
    }

    #[test]
    fn zero_iterations() {
        let cfg = SolverConfig {
            max_iter: 0,
            ..SolverConfig::default()
        };
        let t = run_inmbdca(&problems::ex1(), &cfg, &[3.0, 4.0], 0).unwrap();
        assert!(t.records.is_empty());
        assert_eq!(t.termination, Termination::MaxIter);
        assert_eq!(t.final_x, vec![3.0, 4.0]);
    }

    #[test]
    fn one_dca_step_on_ex1() {
        let cfg = SolverConfig {
            max_iter: 1,
            ..SolverConfig::default()
        };
        let t = run_dca(&problems::ex1(), &cfg, &[1.0, 1.0]).unwrap();
        assert_relative_eq!(t.final_x[0], 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(t.final_x[1], 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn invalid_config_is_refused() {
        let cfg = SolverConfig {
            theta: 0.7,
            ..SolverConfig::default()
        };
        let e = run_inmbdca(&problems::ex1(), &cfg, &[1.0, 1.0], 0).unwrap_err();
        assert!(matches!(e, DcError::InvalidConfig(_)));
        let e = run_inmbdca(&problems::ex1(), &SolverConfig::default(), &[1.0], 0).unwrap_err();
        assert!(matches!(e, DcError::DimensionMismatch { .. }));
    }

    #[test]
    fn multistart_keeps_order_and_is_deterministic() {
        let starts: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 - 4.0, 3.0 - i as f64]).collect();
        let cfg = SolverConfig {
            inexact_mode: InexactMode::PerturbedExact,
            ..SolverConfig::default()
        };
        let a = run_multistart(&problems::ex1(), &cfg, Solver::Inmbdca, &starts, 9);
        let b = run_multistart(&problems::ex1(), &cfg, Solver::Inmbdca, &starts, 9);
        for (i, (ta, tb)) in a.iter().zip(&b).enumerate() {
            let (ta, tb) = (ta.as_ref().unwrap(), tb.as_ref().unwrap());
            assert_eq!(ta.x0, starts[i]);
            assert_eq!(ta, tb);
        }
    }
}
