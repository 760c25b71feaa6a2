//! Nonmonotone backtracking along the boosted direction, and the step size
//! below which acceptance is guaranteed.

use crate::error::{check_dim, DcError, Result};
use crate::linalg::{axpy, norm_sq};
use crate::oracles::ConvexExpr;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinesearchResult {
    pub lambda: f64,
    pub n_backtracks: usize,
    /// `φ(y + λd)` at the returned `λ`.
    pub accepted_value: f64,
    /// `φ(y) − ρλ²‖d‖² + ν − φ(y + λd)` at the returned `λ`.
    pub condition_slack: f64,
}

/// First `λ = λ̄βʲ` with `φ(y + λd) ≤ φ(y) − ρλ²‖d‖² + ν`.
///
/// `λ̄ = 0` returns immediately with `λ = 0`. After `max_backtracks` failed
/// shrinks the step falls back to `λ = 0`, which is acceptable for any `ν ≥ 0`.
#[allow(clippy::too_many_arguments)]
pub fn nonmonotone_search<F>(
    phi: F,
    y: &[f64],
    d: &[f64],
    rho: f64,
    beta: f64,
    lambda_bar: f64,
    nu: f64,
    max_backtracks: usize,
) -> Result<LinesearchResult>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    check_dim(y.len(), d.len())?;
    let dn2 = norm_sq(d);
    if !(dn2 > 0.0) {
        return Err(DcError::InvalidInput(
            "linesearch direction is zero; use the d = 0 stop".into(),
        ));
    }
    if !(nu >= 0.0) || !(lambda_bar >= 0.0) {
        return Err(DcError::InvalidInput(format!(
            "need nu ≥ 0 and lambda_bar ≥ 0 (got {nu}, {lambda_bar})"
        )));
    }
    let phi_y = phi(y)?;
    let zero_step = |n_backtracks| LinesearchResult {
        lambda: 0.0,
        n_backtracks,
        accepted_value: phi_y,
        condition_slack: nu,
    };
    if lambda_bar == 0.0 {
        return Ok(zero_step(0));
    }
    let mut lambda = lambda_bar;
    let mut j = 0;
    loop {
        let trial = phi(&axpy(y, lambda, d))?;
        let rhs = phi_y - rho * lambda * lambda * dn2 + nu;
        if trial <= rhs {
            return Ok(LinesearchResult {
                lambda,
                n_backtracks: j,
                accepted_value: trial,
                condition_slack: rhs - trial,
            });
        }
        if j == max_backtracks {
            return Ok(zero_step(j));
        }
        lambda *= beta;
        j += 1;
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TauBound {
    pub tau_hat: f64,
    pub tau: f64,
}

/// Relative slack allowed on `g(y+d) + g(x) − 2g(y) ≥ σ‖d‖²` before it is
/// reported as an oracle bug.
const CURVATURE_REL_TOL: f64 = 1e-9;

/// `τ̂ = ν/(g(y+d) + g(x) − 2g(y) + ε)` and `τ = min{1, τ̂, σ/ρ}`; every
/// `λ ∈ (0, τ]` passes the acceptance test.
#[allow(clippy::too_many_arguments)]
pub fn tau_bound(
    g: &ConvexExpr,
    x: &[f64],
    y: &[f64],
    d: &[f64],
    nu: f64,
    eps: f64,
    sigma: f64,
    rho: f64,
) -> Result<TauBound> {
    check_dim(x.len(), y.len())?;
    check_dim(x.len(), d.len())?;
    if !(nu > 0.0) {
        return Err(DcError::InvalidInput(format!("tau bound needs nu > 0, got {nu}")));
    }
    let dn2 = norm_sq(d);
    if !(dn2 > 0.0) {
        return Err(DcError::InvalidInput("tau bound needs d ≠ 0".into()));
    }
    let curvature = g.second_difference(x, y)?;
    let floor = sigma * dn2;
    if curvature < floor * (1.0 - CURVATURE_REL_TOL) {
        return Err(DcError::InvariantViolation {
            inequality: "g(y+d) + g(x) − 2g(y) ≥ σ‖d‖²".into(),
            k: 0,
            slack: curvature - floor,
        });
    }
    let tau_hat = nu / (curvature + eps);
    Ok(TauBound {
        tau_hat,
        tau: 1.0f64.min(tau_hat).min(sigma / rho),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems;
    use approx::assert_relative_eq;

    #[test]
    fn full_step_on_ex1() {
        let p = problems::ex1();
        let y = [1.0 / 3.0, 1.0 / 3.0];
        let d = [-2.0 / 3.0, -2.0 / 3.0];
        let r = nonmonotone_search(|z| p.phi(z), &y, &d, 0.6, 0.1, 1.0, 0.0, 60).unwrap();
        assert_eq!(r.lambda, 1.0);
        assert_eq!(r.n_backtracks, 0);
        assert_relative_eq!(r.accepted_value, -10.0 / 9.0, epsilon = 1e-14);
        assert_relative_eq!(p.phi(&y).unwrap(), 2.0 / 9.0, epsilon = 1e-15);
        assert!(r.accepted_value <= 2.0 / 9.0 - 0.6 * 8.0 / 9.0);
    }

    #[test]
    fn zero_trial_and_huge_nu() {
        let p = problems::ex1();
        let y = [0.3, -0.2];
        let d = [1.0, 2.0];
        let r = nonmonotone_search(|z| p.phi(z), &y, &d, 0.6, 0.1, 0.0, 0.5, 60).unwrap();
        assert_eq!((r.lambda, r.n_backtracks), (0.0, 0));
        let r = nonmonotone_search(|z| p.phi(z), &y, &d, 0.6, 0.1, 1.0, 1e6, 60).unwrap();
        assert_eq!((r.lambda, r.n_backtracks), (1.0, 0));
    }

    #[test]
    fn zero_direction_is_rejected() {
        let p = problems::ex1();
        let e = nonmonotone_search(|z| p.phi(z), &[0.0, 0.0], &[0.0, 0.0], 0.6, 0.1, 1.0, 0.0, 60);
        assert!(matches!(e, Err(DcError::InvalidInput(_))));
    }

    #[test]
    fn exhausted_backtracks_fall_back_to_zero() {
        // ascent direction on a quadratic bowl with ν = 0 never accepts
        let p = problems::ex2();
        let y = [1.5, 0.0];
        let d = [1.0, 0.0];
        let r = nonmonotone_search(|z| p.phi(z), &y, &d, 0.6, 0.5, 1.0, 0.0, 5).unwrap();
        assert_eq!(r.lambda, 0.0);
        assert_eq!(r.n_backtracks, 5);
        assert!(r.condition_slack >= 0.0);
    }

    #[test]
    fn tau_examples() {
        let p = problems::ex1();
        let x = [1.0, 1.0];
        let y = [1.0 / 3.0, 1.0 / 3.0];
        let d = [-2.0 / 3.0, -2.0 / 3.0];
        let nu = 0.01 * (8.0 / 9.0);
        let t = tau_bound(&p.g, &x, &y, &d, nu, 0.0, 1.0, 0.6).unwrap();
        // denominator g(−1/3,−1/3) + g(1,1) − 2g(1/3,1/3) = −1/3 + 5 − 2 = 8/3
        let direct =
            p.g.value(&[-1.0 / 3.0, -1.0 / 3.0]).unwrap() + p.g.value(&x).unwrap() - 2.0 * p.g.value(&y).unwrap();
        assert_relative_eq!(direct, 8.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(t.tau_hat, nu / (8.0 / 3.0), epsilon = 1e-15);
        assert_relative_eq!(t.tau_hat, 0.003333, epsilon = 1e-6);
        assert_eq!(t.tau, t.tau_hat);

        // symmetric quadratic: equality case of the curvature bound
        let q = ConvexExpr::quad(0.5);
        let t = tau_bound(&q, &[1.0, 0.0], &[0.0, 2.0], &[-1.0, 2.0], 0.3, 0.1, 1.0, 0.6).unwrap();
        assert_relative_eq!(t.tau_hat, 0.3 / (5.0 + 0.1), epsilon = 1e-15);

        let t = tau_bound(&p.g, &x, &y, &d, 1e12, 0.0, 1.0, 0.6).unwrap();
        assert_eq!(t.tau, 1.0);
        let t = tau_bound(&p.g, &x, &y, &d, 1e12, 0.0, 1.0, 2.0).unwrap();
        assert_eq!(t.tau, 0.5);
    }
}
