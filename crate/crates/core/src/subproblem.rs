//! Step 2 pairs `(y, ξ)` with `ξ ∈ ∂g(y)` and `‖w − ξ‖ ≤ θ‖y − x‖`.

use rand::Rng;

use crate::config::InexactMode;
use crate::error::{check_dim, DcError, Result};
use crate::linalg::{dist, sub};
use crate::oracles::{sample_unit_sphere, ConvexExpr, Coord};

/// Tolerance on `ξ ∈ ∂g(y)`, measured as the largest per-coordinate distance to the box.
pub const MEMBERSHIP_TOL: f64 = 1e-10;
/// Slack on `‖w − ξ‖ ≤ θ‖y − x‖`.
pub const INEXACT_SLACK: f64 = 1e-12;

const INNER_MAX_ITERS: usize = 200;
const PERTURB_HALVINGS: usize = 40;

#[derive(Clone, Debug, PartialEq)]
pub struct SubproblemSolution {
    pub y: Vec<f64>,
    pub xi: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub inner_iters: usize,
    pub mode_used: InexactMode,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InexactCheck {
    pub ok: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub membership_gap: f64,
}

fn coords_of(g: &ConvexExpr, dim: usize) -> Result<Vec<Coord>> {
    let coords = g.coords(dim)?;
    if coords.iter().any(|q| !(q.a > 0.0)) {
        return Err(DcError::Unsupported(
            "subproblem needs a strongly convex g (modulus > 0)".into(),
        ));
    }
    Ok(coords)
}

/// Unique minimizer of `g(y) − ⟨w, y − x⟩`, solved coordinate-wise in closed form.
pub fn solve_exact(g: &ConvexExpr, w: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    check_dim(x.len(), w.len())?;
    let coords = coords_of(g, x.len())?;
    Ok(coords.iter().zip(w).map(|(q, wi)| q.solve(*wi)).collect())
}

/// Measures both Step 2 conditions for an arbitrary candidate.
pub fn check_inexact(g: &ConvexExpr, w: &[f64], x: &[f64], y: &[f64], xi: &[f64], theta: f64) -> Result<InexactCheck> {
    check_dim(x.len(), w.len())?;
    check_dim(x.len(), y.len())?;
    check_dim(x.len(), xi.len())?;
    let membership_gap = g.subdiff_box(y)?.membership_gap(xi);
    let lhs = dist(w, xi);
    let rhs = theta * dist(y, x);
    Ok(InexactCheck {
        ok: membership_gap <= MEMBERSHIP_TOL && lhs <= rhs + INEXACT_SLACK,
        lhs,
        rhs,
        membership_gap,
    })
}

/// Best subgradient at `y` for the test (projection of `w` onto `∂g(y)`).
struct Candidate {
    xi: Vec<f64>,
    lhs: f64,
    rhs: f64,
}

impl Candidate {
    fn at(g: &ConvexExpr, w: &[f64], x: &[f64], y: &[f64], theta: f64) -> Result<Self> {
        let xi = g.subdiff_box(y)?.project(w);
        let lhs = dist(w, &xi);
        let rhs = theta * dist(y, x);
        Ok(Candidate { xi, lhs, rhs })
    }

    fn passes(&self) -> bool {
        self.lhs <= self.rhs
    }
}

fn exact_solution(g: &ConvexExpr, w: &[f64], x: &[f64], theta: f64, inner_iters: usize) -> Result<SubproblemSolution> {
    let y = solve_exact(g, w, x)?;
    let rhs = theta * dist(&y, x);
    Ok(SubproblemSolution {
        y,
        xi: w.to_vec(),
        lhs: 0.0,
        rhs,
        inner_iters,
        mode_used: InexactMode::Exact,
    })
}

/// Produces a pair passing [`check_inexact`].
///
/// With `theta = 0` every mode returns the exact solution with `ξ = w`.
pub fn solve_inexact<R: Rng + ?Sized>(
    g: &ConvexExpr,
    w: &[f64],
    x: &[f64],
    theta: f64,
    mode: InexactMode,
    rng: &mut R,
) -> Result<SubproblemSolution> {
    check_dim(x.len(), w.len())?;
    if !(theta >= 0.0) {
        return Err(DcError::InvalidInput(format!("theta must be nonnegative, got {theta}")));
    }
    if theta == 0.0 {
        return exact_solution(g, w, x, theta, 0);
    }
    match mode {
        InexactMode::Exact => exact_solution(g, w, x, theta, 0),
        InexactMode::InnerSolver => inner_bisection(g, w, x, theta),
        InexactMode::PerturbedExact => perturbed(g, w, x, theta, rng),
    }
}

#[derive(Clone, Copy)]
struct Bracket {
    lo: f64,
    hi: f64,
    mid: f64,
    done: bool,
}

/// Coordinate-wise bisection on `w_i ∈ ∂q_i(t)`, run in lockstep and stopped at
/// the first iterate whose projected subgradient passes the relative test.
///
/// The kink `t = 0` is tested as soon as it lies inside a bracket: a root
/// sitting exactly on the kink is never reached by midpoints alone.
fn inner_bisection(g: &ConvexExpr, w: &[f64], x: &[f64], theta: f64) -> Result<SubproblemSolution> {
    let coords = coords_of(g, x.len())?;
    let mut brackets: Vec<Bracket> = coords
        .iter()
        .zip(w)
        .zip(x)
        .map(|((q, &wi), &xi)| {
            let center = (wi - q.c) / (2.0 * q.a);
            let half = q.b / (2.0 * q.a);
            let lo = xi.min(center - half) - 1.0;
            let hi = xi.max(center + half) + 1.0;
            Bracket {
                lo,
                hi,
                mid: 0.5 * (lo + hi),
                done: false,
            }
        })
        .collect();

    for it in 1..=INNER_MAX_ITERS {
        let mut moved = false;
        for ((b, q), &wi) in brackets.iter_mut().zip(&coords).zip(w) {
            if b.done {
                continue;
            }
            if q.b > 0.0 && b.lo < 0.0 && b.hi > 0.0 {
                let (l0, h0) = q.interval(0.0);
                if wi >= l0 && wi <= h0 {
                    b.mid = 0.0;
                    b.done = true;
                    moved = true;
                    continue;
                } else if wi > h0 {
                    b.lo = 0.0;
                } else {
                    b.hi = 0.0;
                }
            }
            let mid = 0.5 * (b.lo + b.hi);
            if mid == b.lo || mid == b.hi {
                continue;
            }
            moved = true;
            b.mid = mid;
            let (l, h) = q.interval(mid);
            if wi >= l && wi <= h {
                b.done = true;
            } else if l > wi {
                b.hi = mid;
            } else {
                b.lo = mid;
            }
        }
        let y: Vec<f64> = brackets.iter().map(|b| b.mid).collect();
        let cand = Candidate::at(g, w, x, &y, theta)?;
        if cand.passes() {
            return Ok(SubproblemSolution {
                y,
                xi: cand.xi,
                lhs: cand.lhs,
                rhs: cand.rhs,
                inner_iters: it,
                mode_used: InexactMode::InnerSolver,
            });
        }
        if !moved {
            return exact_solution(g, w, x, theta, it);
        }
    }
    exact_solution(g, w, x, theta, INNER_MAX_ITERS)
}

/// Exact minimizer moved along a random unit direction by the largest radius
/// (40 bisection halvings over `[0, ‖y* − x‖]`) that keeps the test passing.
fn perturbed<R: Rng + ?Sized>(
    g: &ConvexExpr,
    w: &[f64],
    x: &[f64],
    theta: f64,
    rng: &mut R,
) -> Result<SubproblemSolution> {
    let exact = exact_solution(g, w, x, theta, 0)?;
    let r_max = dist(&exact.y, x);
    if r_max == 0.0 {
        return Ok(exact);
    }
    let u = sample_unit_sphere(x.len(), rng);
    let at = |r: f64| -> Vec<f64> { exact.y.iter().zip(&u).map(|(yi, ui)| yi + r * ui).collect() };

    let full = at(r_max);
    let full_cand = Candidate::at(g, w, x, &full, theta)?;
    let (radius, cand, iters) = if full_cand.passes() {
        (r_max, full_cand, 0)
    } else {
        let (mut lo, mut hi) = (0.0, r_max);
        let mut best: Option<Candidate> = None;
        for _ in 0..PERTURB_HALVINGS {
            let mid = 0.5 * (lo + hi);
            let c = Candidate::at(g, w, x, &at(mid), theta)?;
            if c.passes() {
                lo = mid;
                best = Some(c);
            } else {
                hi = mid;
            }
        }
        match best {
            Some(c) => (lo, c, PERTURB_HALVINGS),
            None => {
                let mut e = exact;
                e.inner_iters = PERTURB_HALVINGS;
                return Ok(e);
            }
        }
    };
    Ok(SubproblemSolution {
        y: at(radius),
        xi: cand.xi,
        lhs: cand.lhs,
        rhs: cand.rhs,
        inner_iters: iters,
        mode_used: InexactMode::PerturbedExact,
    })
}

/// `g(x) − g(y) + ⟨w, y − x⟩`; nonnegative for every valid Step 2 pair.
pub fn model_decrease(g: &ConvexExpr, w: &[f64], x: &[f64], y: &[f64]) -> Result<f64> {
    let d = sub(y, x);
    Ok(g.value(x)? - g.value(y)? + crate::linalg::dot(w, &d))
}
