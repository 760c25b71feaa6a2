//! Strategies for the nonmonotonicity term `ν_k` of the linesearch.
//!
//! * `A1Direct`: `ν_{k+1} = f·(1 − Δ_{k+1})·(φ(x^k) − φ(x^{k+1}) + ν_k + ε_k)`,
//!   the upper end of the admissible interval scaled by `fraction = f`.
//! * `ZhangHager`: averaged cost `C_k` with `ν_k = C_k − φ(x^k)`.
//! * `Grippo`: `ν_k = max_{0≤j≤m_k} φ(x^{k−j}) − φ(x^k)` with `m_k = min(m_{k−1}+1, M)`.
//! * `Ratio`: `ν_k = ω‖d^k‖²/u_k`.
//! * `Zero`: `ν_k = 0`.
//!
//! Carry strategies (the first three) know `ν_{k+1}` at the end of iteration
//! `k`; `Ratio` needs `d^{k+1}` and is evaluated when the next direction exists.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{DcError, Result};
use crate::trace::Trace;

/// Slack on the descent precondition of [`NuState::advance`].
pub const DESCENT_SLACK: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaRule {
    /// `Δ_{k+1} = v`
    Constant(f64),
    /// `Δ_{k+1} = max(delta_min, start/(k+1))`
    Decaying { start: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaRule {
    Constant(f64),
    /// `η_k = η_min + (η_max − η_min)·k/(k+1)`
    Ramp,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum URule {
    /// `u_k = k + 1`
    Linear,
    /// `u_k = (k + 1)^p`, `p > 0`
    Power(f64),
}

impl URule {
    pub fn at(&self, k: usize) -> f64 {
        let kp = (k + 1) as f64;
        match *self {
            URule::Linear => kp,
            URule::Power(p) => kp.powf(p),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NuStrategySpec {
    A1Direct {
        delta_min: f64,
        delta_rule: DeltaRule,
        nu0: f64,
        #[serde(default = "one")]
        fraction: f64,
    },
    ZhangHager {
        eta_min: f64,
        eta_max: f64,
        c0_offset: f64,
        eta_rule: EtaRule,
    },
    Grippo {
        m: usize,
    },
    Ratio {
        omega: f64,
        u_rule: URule,
    },
    Zero,
}

fn one() -> f64 {
    1.0
}

impl NuStrategySpec {
    /// `ν_k = ω‖d^k‖²/(k+1)`.
    pub fn ratio(omega: f64) -> Self {
        NuStrategySpec::Ratio {
            omega,
            u_rule: URule::Linear,
        }
    }

    pub fn a1_constant(delta: f64, nu0: f64) -> Self {
        NuStrategySpec::A1Direct {
            delta_min: delta,
            delta_rule: DeltaRule::Constant(delta),
            nu0,
            fraction: 1.0,
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        match self {
            NuStrategySpec::A1Direct {
                delta_min,
                delta_rule,
                nu0,
                fraction,
            } => {
                if !(*delta_min >= 0.0 && *delta_min < 1.0) {
                    out.push(format!("delta_min ∉ [0,1) (got {delta_min})"));
                }
                match delta_rule {
                    DeltaRule::Constant(d) if !(*d >= *delta_min && *d <= 1.0) => {
                        out.push(format!("delta ∉ [delta_min,1] (got {d})"))
                    }
                    DeltaRule::Decaying { start } if !(*start > 0.0) => {
                        out.push(format!("delta start must be positive (got {start})"))
                    }
                    _ => {}
                }
                if !(*nu0 >= 0.0) {
                    out.push(format!("nu0 < 0 (got {nu0})"));
                }
                if !(*fraction >= 0.0 && *fraction <= 1.0) {
                    out.push(format!("fraction ∉ [0,1] (got {fraction})"));
                }
            }
            NuStrategySpec::ZhangHager {
                eta_min,
                eta_max,
                c0_offset,
                eta_rule,
            } => {
                if !(*eta_min >= 0.0 && eta_min <= eta_max && *eta_max < 1.0) {
                    out.push(format!("need 0 ≤ eta_min ≤ eta_max < 1 (got {eta_min}, {eta_max})"));
                }
                if !(*c0_offset > 0.0) {
                    out.push(format!("c0_offset ≤ 0 (got {c0_offset})"));
                }
                if let EtaRule::Constant(e) = eta_rule {
                    if !(e >= eta_min && e <= eta_max) {
                        out.push(format!("eta ∉ [eta_min,eta_max] (got {e})"));
                    }
                }
            }
            NuStrategySpec::Grippo { m } => {
                if *m == 0 {
                    out.push("Grippo window M must be positive".into());
                }
            }
            NuStrategySpec::Ratio { omega, u_rule } => {
                if !(*omega > 0.0) {
                    out.push(format!("omega ≤ 0 (got {omega})"));
                }
                if let URule::Power(p) = u_rule {
                    if !(*p > 0.0) {
                        out.push(format!("u power must be positive (got {p})"));
                    }
                }
            }
            NuStrategySpec::Zero => {}
        }
        out
    }

    /// Lower bound `Δ_min` on the effective `Δ_{k+1}`, where one exists.
    pub fn delta_min(&self) -> Option<f64> {
        match self {
            NuStrategySpec::A1Direct { delta_min, .. } => Some(*delta_min),
            NuStrategySpec::ZhangHager { eta_max, .. } => Some(1.0 - eta_max),
            NuStrategySpec::Grippo { .. } => Some(0.0),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Carry {
    A1 { next: f64 },
    ZhangHager { q: f64, c: f64 },
    Grippo { window: VecDeque<f64>, m: usize, next: f64 },
    Ratio,
    Zero,
}

/// Strategy state threaded through the solver loop.
#[derive(Clone, Debug, PartialEq)]
pub struct NuState {
    spec: NuStrategySpec,
    carry: Carry,
    last_nu: f64,
    last_delta: Option<f64>,
}

/// Initial state and `ν₀`; `None` for `Ratio`, whose `ν₀` depends on `d⁰`.
pub fn nu_init(spec: &NuStrategySpec, phi_x0: f64) -> (NuState, Option<f64>) {
    let (carry, nu0) = match spec {
        NuStrategySpec::A1Direct { nu0, .. } => (Carry::A1 { next: *nu0 }, Some(*nu0)),
        NuStrategySpec::ZhangHager { c0_offset, .. } => (
            Carry::ZhangHager {
                q: 1.0,
                c: phi_x0 + c0_offset,
            },
            Some(*c0_offset),
        ),
        NuStrategySpec::Grippo { .. } => (
            Carry::Grippo {
                window: VecDeque::from(vec![phi_x0]),
                m: 0,
                next: 0.0,
            },
            Some(0.0),
        ),
        NuStrategySpec::Ratio { .. } => (Carry::Ratio, None),
        NuStrategySpec::Zero => (Carry::Zero, Some(0.0)),
    };
    if let NuStrategySpec::A1Direct { delta_min, .. } = spec {
        if *delta_min == 0.0 {
            log::warn!("A1 strategy with delta_min = 0: summability of nu is not guaranteed");
        }
    }
    let state = NuState {
        spec: spec.clone(),
        carry,
        last_nu: nu0.unwrap_or(0.0),
        last_delta: None,
    };
    (state, nu0)
}

impl NuState {
    pub fn spec(&self) -> &NuStrategySpec {
        &self.spec
    }

    /// `ν_k` for the iteration whose direction has squared norm `d_norm_sq`.
    pub fn current(&mut self, k: usize, d_norm_sq: f64) -> f64 {
        let nu = match (&self.carry, &self.spec) {
            (Carry::A1 { next }, _) => *next,
            (Carry::ZhangHager { .. }, _) => self.last_nu,
            (Carry::Grippo { next, .. }, _) => *next,
            (Carry::Ratio, NuStrategySpec::Ratio { omega, u_rule }) => omega * d_norm_sq / u_rule.at(k),
            _ => 0.0,
        };
        self.last_nu = nu;
        nu
    }

    /// `Δ_{k+1}` used by the last [`advance`](Self::advance) (A1 and Zhang–Hager).
    pub fn last_delta(&self) -> Option<f64> {
        self.last_delta
    }

    /// Zhang–Hager `Q_k`.
    pub fn q(&self) -> Option<f64> {
        match self.carry {
            Carry::ZhangHager { q, .. } => Some(q),
            _ => None,
        }
    }

    /// Grippo window contents, oldest first.
    pub fn window(&self) -> Option<Vec<f64>> {
        match &self.carry {
            Carry::Grippo { window, .. } => Some(window.iter().copied().collect()),
            _ => None,
        }
    }

    /// Closes iteration `k` once `φ(x^{k+1})` is known. Returns `ν_{k+1}` for
    /// carry strategies and `None` for `Ratio`.
    pub fn advance(&mut self, k: usize, phi_prev: f64, phi_curr: f64, eps_k: f64) -> Result<Option<f64>> {
        let budget = phi_prev - phi_curr + self.last_nu + eps_k;
        if budget < -DESCENT_SLACK {
            return Err(DcError::InvariantViolation {
                inequality: "descent: φ(x^k) − φ(x^{k+1}) + ν_k + ε_k ≥ 0".into(),
                k,
                slack: budget,
            });
        }
        let out = match (&mut self.carry, &self.spec) {
            (
                Carry::A1 { next },
                NuStrategySpec::A1Direct {
                    delta_min,
                    delta_rule,
                    fraction,
                    ..
                },
            ) => {
                let delta = match *delta_rule {
                    DeltaRule::Constant(d) => d,
                    DeltaRule::Decaying { start } => (start / (k + 1) as f64).clamp(*delta_min, 1.0),
                };
                self.last_delta = Some(delta);
                *next = fraction * (1.0 - delta) * budget.max(0.0);
                Some(*next)
            }
            (
                Carry::ZhangHager { q, c },
                NuStrategySpec::ZhangHager {
                    eta_min,
                    eta_max,
                    eta_rule,
                    ..
                },
            ) => {
                let eta = match *eta_rule {
                    EtaRule::Constant(e) => e,
                    EtaRule::Ramp => eta_min + (eta_max - eta_min) * k as f64 / (k + 1) as f64,
                };
                let q_next = eta * *q + 1.0;
                let mut c_next = (eta * *q * *c + phi_curr) / q_next;
                // only reachable with ε_k > 0, where C may dip below φ
                if c_next < phi_curr {
                    c_next = phi_curr;
                }
                *q = q_next;
                *c = c_next;
                self.last_delta = Some(1.0 / q_next);
                let nu = c_next - phi_curr;
                self.last_nu = nu;
                Some(nu)
            }
            (Carry::Grippo { window, m, next }, NuStrategySpec::Grippo { m: cap }) => {
                *m = (*m + 1).min(*cap);
                window.push_back(phi_curr);
                while window.len() > *m + 1 {
                    window.pop_front();
                }
                let top = window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                *next = top - phi_curr;
                Some(*next)
            }
            (Carry::Zero, _) => Some(0.0),
            _ => None,
        };
        Ok(out)
    }
}

/// `ν_{k+1}` from iteration `k`'s data. For `Ratio`, `d_norm_sq` is `‖d^{k+1}‖²`.
pub fn nu_next(state: &mut NuState, k: usize, phi_prev: f64, phi_curr: f64, eps_k: f64, d_norm_sq: f64) -> Result<f64> {
    match state.advance(k, phi_prev, phi_curr, eps_k)? {
        Some(v) => Ok(v),
        None => Ok(state.current(k + 1, d_norm_sq)),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct A2Report {
    pub partial_sums: Vec<f64>,
    /// Finite proxy only: the recorded `ν_k` tail has dropped below `10⁻¹⁰`.
    pub bounded: bool,
}

pub const A2_TAIL_TOL: f64 = 1e-10;

/// Partial sums of `ν_k` along a trace.
pub fn verify_a2(trace: &Trace) -> A2Report {
    let mut acc = 0.0;
    let partial_sums: Vec<f64> = trace
        .records
        .iter()
        .map(|r| {
            acc += r.nu_k;
            acc
        })
        .collect();
    let bounded = trace.records.last().is_none_or(|r| r.nu_k <= A2_TAIL_TOL);
    A2Report { partial_sums, bounded }
}

/// Smallest `k₀` with `ν_k ≤ δ‖d^k‖²` for every recorded `k ≥ k₀`.
pub fn verify_a3(trace: &Trace, delta: f64) -> Option<usize> {
    let n = trace.records.len();
    let mut k0 = n;
    for (i, r) in trace.records.iter().enumerate().rev() {
        if r.nu_k <= delta * r.d_norm * r.d_norm {
            k0 = i;
        } else {
            break;
        }
    }
    if n == 0 {
        Some(0)
    } else if k0 < n {
        Some(k0)
    } else {
        None
    }
}

/// Bound on `Σ_{k≥1} ν_k` under (A1) with `Δ_min > 0`:
/// `(φ(x⁰) + ν₀ − φ̄ + Σε)·(1 − Δ_min)/Δ_min`.
pub fn a1_sum_bound(phi_x0: f64, nu0: f64, phi_bar: f64, eps_sum: f64, delta_min: f64) -> f64 {
    (phi_x0 + nu0 - phi_bar + eps_sum) * (1.0 - delta_min) / delta_min
}
