//! Checks that run on finished traces: descent residuals, criticality,
//! complexity bounds and a full replay of every per-iteration inequality.

use serde::Serialize;

use crate::error::{check_dim, DcError, Result};
use crate::linalg::{dist, norm_sq};
use crate::nu::verify_a3;
use crate::oracles::{interval_gap, ConvexExpr};
use crate::problem::DcProblem;
use crate::subproblem::{check_inexact, INEXACT_SLACK, MEMBERSHIP_TOL};
use crate::trace::Trace;

/// Absolute slack below which a descent residual counts as a violation.
pub const DESCENT_TOL: f64 = 1e-9;
/// Slack for `φ(x) ≥ φ̄`.
pub const LOWER_BOUND_TOL: f64 = 1e-9;
/// Slack for the recorded-vs-recomputed value checks in [`check_trace`].
pub const REPLAY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DescentResidual {
    pub k: usize,
    /// `φ(x) − (σ/2 − θ)‖d‖² + ε − φ(y)`
    pub at_y: f64,
    /// `φ(x) − (σ/2 − θ + ρλ²)‖d‖² + ν + ε − φ(x⁺)`
    pub at_next: f64,
    pub flagged: bool,
}

pub fn check_descent(trace: &Trace, sigma: f64, theta: f64) -> Vec<DescentResidual> {
    let rho = trace.config.rho;
    let half_gap = sigma / 2.0 - theta;
    trace
        .records
        .iter()
        .map(|r| {
            let dn2 = r.d_norm * r.d_norm;
            let at_y = r.phi_x - half_gap * dn2 + r.eps_k - r.phi_y;
            let at_next = r.phi_x - (half_gap + rho * r.lambda_k * r.lambda_k) * dn2 + r.nu_k + r.eps_k - r.phi_next;
            DescentResidual {
                k: r.k,
                at_y,
                at_next,
                flagged: at_y < -DESCENT_TOL || at_next < -DESCENT_TOL,
            }
        })
        .collect()
}

/// Largest per-coordinate gap between `∂_ε g(x)` and `∂_ε h(x)`; zero at
/// ε-critical points.
///
/// For `ε > 0` each side is the product of the per-coordinate exact
/// ε-subdifferentials, which contains the true `∂_ε` of the sum. A zero
/// residual therefore certifies the outer-box relaxation only.
pub fn criticality_residual(problem: &DcProblem, x: &[f64], eps: f64) -> Result<f64> {
    check_dim(problem.dim, x.len())?;
    if !(eps >= 0.0) {
        return Err(DcError::InvalidInput(format!("eps must be ≥ 0, got {eps}")));
    }
    if eps == 0.0 {
        let gb = problem.g.subdiff_box(x)?;
        let hb = problem.h.subdiff_box(x)?;
        return Ok(gb.gap_to(&hb));
    }
    let gc = problem.g.coords(problem.dim)?;
    let hc = problem.h.coords(problem.dim)?;
    Ok(x.iter()
        .enumerate()
        .map(|(i, &t)| interval_gap(gc[i].eps_interval(t, eps), hc[i].eps_interval(t, eps)))
        .fold(0.0, f64::max))
}

/// Criticality residual at the end of a run, measured at the last subproblem
/// solution. The boosted step moves `x` off the kinks of `g` and `h`, where
/// the exact-box residual jumps; `y` is where the subproblem certifies
/// near-criticality.
pub fn final_residual(trace: &Trace) -> Result<f64> {
    let at = trace.final_y.as_ref().unwrap_or(&trace.final_x);
    let eps = trace.config.eps_schedule.at(trace.records.len());
    criticality_residual(&trace.problem, at, eps)
}

/// Exact Fenchel–Young gap `f*(w) + f(x) − ⟨w, x⟩`; `w ∈ ∂_ε f(x)` iff it is `≤ ε`.
pub fn fenchel_young_gap(f: &ConvexExpr, x: &[f64], w: &[f64]) -> Result<f64> {
    check_dim(x.len(), w.len())?;
    let coords = f.coords(x.len())?;
    Ok(coords
        .iter()
        .zip(x.iter().zip(w))
        .map(|(q, (&t, &s))| q.conjugate(s) + q.value(t) - s * t)
        .sum())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComplexityReport {
    pub n: usize,
    pub phi_bar: f64,
    pub min_d_norm: f64,
    /// `√((φ(x⁰) − φ̄ + Σν + Σε) / ((σ/2 − θ)N))` over all `N` records.
    pub bound_a2: f64,
    /// `min_{k<N'} ‖d^k‖ ≤ bound(N')` held for every prefix length `N'`.
    pub prefix_ok: bool,
    /// Smallest `bound(N') − min_{k<N'} ‖d^k‖` over prefixes, and its `N'`.
    pub worst_prefix_margin: f64,
    pub worst_prefix_n: usize,
    pub xi_fraction: f64,
    /// First index from which `ν_k ≤ ξ(σ/2 − θ)‖d^k‖²` and `ε_k ≤ ξ(σ/2 − θ)‖d^k‖²` hold.
    pub k0: Option<usize>,
    /// The (A3) bound with the `(1 − 2ξ)` factor the proof produces.
    pub bound_a3: Option<f64>,
    /// The same bound with the `(1 − ξ)` factor.
    pub bound_a3_loose_factor: Option<f64>,
    pub a3_ok: Option<bool>,
    /// `min ‖d^k‖` over the second half of the trace.
    pub liminf_proxy: f64,
    sum_numerator: f64,
    half_gap: f64,
}

impl ComplexityReport {
    /// Iterations after which `min ‖d^k‖ ≤ target` is guaranteed under (A2),
    /// using the sums accumulated over this trace.
    pub fn iterations_for(&self, target: f64) -> f64 {
        (self.sum_numerator / (self.half_gap * target * target)).ceil()
    }
}

const PREFIX_TOL: f64 = 1e-10;

/// Compares observed step sizes with the complexity bounds. `xi_fraction`
/// must lie in `(0, ½)`.
pub fn complexity_report(
    trace: &Trace,
    phi_bar: f64,
    sigma: f64,
    theta: f64,
    xi_fraction: f64,
) -> Result<ComplexityReport> {
    if !(xi_fraction > 0.0 && xi_fraction < 0.5) {
        return Err(DcError::InvalidInput(format!(
            "xi must lie in (0, 1/2), got {xi_fraction}"
        )));
    }
    let half_gap = sigma / 2.0 - theta;
    if !(half_gap > 0.0) {
        return Err(DcError::InvalidInput("needs theta < sigma/2".into()));
    }
    let min_phi = trace
        .records
        .iter()
        .flat_map(|r| [r.phi_x, r.phi_y, r.phi_next])
        .fold(trace.final_phi, f64::min);
    if phi_bar > min_phi + LOWER_BOUND_TOL {
        return Err(DcError::InvalidInput(format!(
            "phi_bar = {phi_bar} exceeds a recorded value {min_phi}"
        )));
    }

    let phi0 = trace.phi_x0();
    let n = trace.records.len();
    let mut nu_sum = 0.0;
    let mut eps_sum = 0.0;
    let mut min_d = f64::INFINITY;
    let mut bound = f64::INFINITY;
    let mut worst_margin = f64::INFINITY;
    let mut worst_n = 0;
    for (i, r) in trace.records.iter().enumerate() {
        nu_sum += r.nu_k;
        eps_sum += r.eps_k;
        min_d = min_d.min(r.d_norm);
        let len = (i + 1) as f64;
        bound = ((phi0 - phi_bar + nu_sum + eps_sum) / (half_gap * len)).sqrt();
        let margin = bound - min_d;
        if margin < worst_margin {
            worst_margin = margin;
            worst_n = i + 1;
        }
    }
    let sum_numerator = phi0 - phi_bar + nu_sum + eps_sum;

    let delta = xi_fraction * half_gap;
    let k0 = verify_a3(trace, delta).map(|k0| {
        let mut k0 = k0;
        for (i, r) in trace.records.iter().enumerate().rev() {
            if i < k0 {
                break;
            }
            if r.eps_k > delta * r.d_norm * r.d_norm {
                k0 = i + 1;
                break;
            }
        }
        k0
    });
    let a3 = k0.filter(|&k0| k0 < n).map(|k0| {
        let head: f64 = trace.records[..k0].iter().map(|r| r.nu_k + r.eps_k).sum();
        let num = phi0 - phi_bar + head;
        let tight = (num / ((1.0 - 2.0 * xi_fraction) * half_gap * n as f64)).sqrt();
        let loose = (num / ((1.0 - xi_fraction) * half_gap * n as f64)).sqrt();
        (tight, loose)
    });

    let liminf_proxy = trace.records[n / 2..]
        .iter()
        .map(|r| r.d_norm)
        .fold(f64::INFINITY, f64::min);

    Ok(ComplexityReport {
        n,
        phi_bar,
        min_d_norm: min_d,
        bound_a2: bound,
        prefix_ok: worst_margin >= -PREFIX_TOL,
        worst_prefix_margin: worst_margin,
        worst_prefix_n: worst_n,
        xi_fraction,
        k0,
        bound_a3: a3.map(|b| b.0),
        bound_a3_loose_factor: a3.map(|b| b.1),
        a3_ok: a3.map(|b| min_d <= b.0 + PREFIX_TOL),
        liminf_proxy,
        sum_numerator,
        half_gap,
    })
}

/// `φ̄` for complexity checks: the explicit value, else the problem's declared
/// bound, else the best recorded value minus `10⁻⁶`. The flag marks the last case.
pub fn phi_bar_for(trace: &Trace, explicit: Option<f64>) -> (f64, bool) {
    if let Some(v) = explicit.or(trace.problem.phi_lower_bound) {
        return (v, false);
    }
    let best = trace
        .records
        .iter()
        .flat_map(|r| [r.phi_x, r.phi_y, r.phi_next])
        .fold(trace.final_phi, f64::min);
    (best - 1e-6, true)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InequalityReport {
    pub name: &'static str,
    /// Most negative slack seen and where; `None` if nothing was checked.
    pub worst: Option<(usize, f64)>,
    pub tol: f64,
}

impl InequalityReport {
    fn new(name: &'static str, tol: f64) -> Self {
        InequalityReport { name, worst: None, tol }
    }

    fn observe(&mut self, k: usize, slack: f64) {
        let slack = if slack.is_nan() { f64::NEG_INFINITY } else { slack };
        match self.worst {
            Some((_, s)) if s <= slack => {}
            _ => self.worst = Some((k, slack)),
        }
    }

    pub fn ok(&self) -> bool {
        self.worst.is_none_or(|(_, s)| s >= -self.tol)
    }
}

pub const CHECK_LINESEARCH: &str = "linesearch";
pub const CHECK_INEXACT: &str = "inexact";
pub const CHECK_MEMBERSHIP: &str = "xi-membership";
pub const CHECK_EPS_CERT: &str = "eps-subgradient";
pub const CHECK_DESCENT_Y: &str = "descent-y";
pub const CHECK_DESCENT_NEXT: &str = "descent-next";
pub const CHECK_RECONSTRUCTION: &str = "reconstruction";
pub const CHECK_PHI: &str = "phi-consistency";
pub const CHECK_CHAIN: &str = "chaining";
pub const CHECK_TAU: &str = "tau-guarantee";

/// Recomputes every per-iteration inequality from the stored fields.
pub fn check_trace(trace: &Trace) -> Result<Vec<InequalityReport>> {
    let p = &trace.problem;
    let cfg = &trace.config;
    let theta = cfg.theta;
    let rho = cfg.rho;
    let half_gap = p.sigma / 2.0 - theta;

    let mut ls = InequalityReport::new(CHECK_LINESEARCH, REPLAY_TOL);
    let mut inexact = InequalityReport::new(CHECK_INEXACT, INEXACT_SLACK);
    let mut member = InequalityReport::new(CHECK_MEMBERSHIP, MEMBERSHIP_TOL);
    let mut cert = InequalityReport::new(CHECK_EPS_CERT, REPLAY_TOL);
    let mut dy = InequalityReport::new(CHECK_DESCENT_Y, DESCENT_TOL);
    let mut dn = InequalityReport::new(CHECK_DESCENT_NEXT, DESCENT_TOL);
    let mut recon = InequalityReport::new(CHECK_RECONSTRUCTION, 0.0);
    let mut phi_c = InequalityReport::new(CHECK_PHI, REPLAY_TOL);
    let mut chain = InequalityReport::new(CHECK_CHAIN, 0.0);
    let mut tau = InequalityReport::new(CHECK_TAU, REPLAY_TOL);

    for (i, r) in trace.records.iter().enumerate() {
        let k = r.k;
        let d = r.d();
        let dn2 = norm_sq(&d);
        let lam = r.lambda_k;

        ls.observe(k, r.phi_y - rho * lam * lam * dn2 + r.nu_k - r.phi_next);

        let ic = check_inexact(&p.g, &r.w, &r.x, &r.y, &r.xi, theta)?;
        inexact.observe(k, ic.rhs - ic.lhs);
        member.observe(k, -ic.membership_gap);

        let fy = fenchel_young_gap(&p.h, &r.x, &r.w)?;
        cert.observe(k, r.eps_k - fy);
        cert.observe(k, r.eps_k - r.eps_certified);

        let phi_x = p.phi(&r.x)?;
        let phi_y = p.phi(&r.y)?;
        let next = r.next_point();
        let phi_next = p.phi(&next)?;
        for (stored, fresh) in [(r.phi_x, phi_x), (r.phi_y, phi_y), (r.phi_next, phi_next)] {
            phi_c.observe(k, -(stored - fresh).abs() / fresh.abs().max(1.0));
        }

        dy.observe(k, phi_x - half_gap * dn2 + r.eps_k - phi_y);
        dn.observe(
            k,
            phi_x - (half_gap + rho * lam * lam) * dn2 + r.nu_k + r.eps_k - phi_next,
        );

        let target = trace.records.get(i + 1).map_or(&trace.final_x, |s| &s.x);
        recon.observe(k, -dist(&next, target));
        if let Some(s) = trace.records.get(i + 1) {
            chain.observe(k, -((s.k as f64) - (k as f64 + 1.0)).abs());
        }

        if let Some(t) = r.tau {
            for step in [t, 0.5 * t] {
                let trial = p.phi(&crate::linalg::axpy(&r.y, step, &d))?;
                tau.observe(k, phi_y - rho * step * step * dn2 + r.nu_k - trial);
            }
        }
    }
    Ok(vec![ls, inexact, member, cert, dy, dn, recon, phi_c, chain, tau])
}
