//! Registry of test problems.
//!
//! * `ex1`: `φ(x, y) = x² + y² + x + y − |x| − |y|`, critical set `{−1, 0}²`.
//! * `ex2`: `φ(x, y) = ½(x² + y²) + |x| + |y| − 2.5x`, unique critical point `(1.5, 0)`.
//! * `random-sep(dim,seed)`: seeded separable instances with a coercive `φ`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{DcError, Result};
use crate::oracles::ConvexExpr;
use crate::problem::DcProblem;

pub const NAMES: [&str; 3] = ["ex1", "ex2", "random-sep(dim,seed)"];

pub fn ex1() -> DcProblem {
    let g = ConvexExpr::sum(vec![ConvexExpr::quad(1.5), ConvexExpr::lin(vec![1.0, 1.0])]);
    let h = ConvexExpr::sum(vec![ConvexExpr::quad(0.5), ConvexExpr::l1(1.0)]);
    DcProblem::new("ex1", 2, g, h)
        .expect("ex1 is well formed")
        .with_lower_bound(-2.0)
        .with_critical_points(vec![vec![-1.0, -1.0], vec![-1.0, 0.0], vec![0.0, -1.0], vec![0.0, 0.0]])
}

pub fn ex2() -> DcProblem {
    let g = ConvexExpr::sum(vec![
        ConvexExpr::quad(1.0),
        ConvexExpr::l1(1.0),
        ConvexExpr::lin(vec![-2.5, 0.0]),
    ]);
    let h = ConvexExpr::quad(0.5);
    DcProblem::new("ex2", 2, g, h)
        .expect("ex2 is well formed")
        .with_lower_bound(-1.125)
        .with_critical_points(vec![vec![1.5, 0.0]])
}

/// Seeded separable instance with `σ ≥ 0.5` and an exactly known `inf φ`.
///
/// `h`'s quadratic weight is drawn first and `g`'s is strictly larger, so `φ`
/// is coercive. When the smaller modulus falls below 0.5 the same quadratic
/// is added to both components, which leaves `φ` unchanged.
pub fn random_sep(dim: usize, seed: u64) -> DcProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a_h: f64 = rng.gen_range(0.0..1.5);
    let a_g = a_h + rng.gen_range(0.1..1.0);
    let b_g: f64 = rng.gen_range(0.0..1.5);
    let b_h: f64 = rng.gen_range(0.0..1.5);
    let c_g: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let c_h: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();

    let mut g_parts = vec![ConvexExpr::quad(a_g), ConvexExpr::lin(c_g.clone()), ConvexExpr::l1(b_g)];
    let mut h_parts = vec![ConvexExpr::quad(a_h), ConvexExpr::lin(c_h.clone()), ConvexExpr::l1(b_h)];
    if 2.0 * a_h < 0.5 {
        let lift = 0.25 - a_h;
        g_parts.push(ConvexExpr::quad(lift));
        h_parts.push(ConvexExpr::quad(lift));
    }

    let curv = a_g - a_h;
    let kink = b_g - b_h;
    let phi_bar = (0..dim).map(|i| separable_min(curv, c_g[i] - c_h[i], kink)).sum();

    DcProblem::new(
        format!("random-sep({dim},{seed})"),
        dim,
        ConvexExpr::sum(g_parts),
        ConvexExpr::sum(h_parts),
    )
    .expect("random instances are strongly convex by construction")
    .with_lower_bound(phi_bar)
}

/// `min_t A t² + C t + B|t|` for `A > 0` and any sign of `B`.
fn separable_min(a: f64, c: f64, b: f64) -> f64 {
    let f = |t: f64| a * t * t + c * t + b * t.abs();
    let right = (-(c + b) / (2.0 * a)).max(0.0);
    let left = (-(c - b) / (2.0 * a)).min(0.0);
    f(right).min(f(left))
}

/// Looks up a problem by its registry name, e.g. `ex1` or `random-sep(5,7)`.
pub fn get(name: &str) -> Result<DcProblem> {
    let name = name.trim();
    match name {
        "ex1" => return Ok(ex1()),
        "ex2" => return Ok(ex2()),
        _ => {}
    }
    if let Some(args) = name.strip_prefix("random-sep(").and_then(|rest| rest.strip_suffix(')')) {
        let parts: Vec<&str> = args.split(',').map(str::trim).collect();
        if let [dim, seed] = parts.as_slice() {
            let dim: usize = dim.parse().map_err(|_| DcError::UnknownProblem(name.to_string()))?;
            let seed: u64 = seed.parse().map_err(|_| DcError::UnknownProblem(name.to_string()))?;
            if dim == 0 {
                return Err(DcError::InvalidInput("random-sep needs dim ≥ 1".into()));
            }
            return Ok(random_sep(dim, seed));
        }
    }
    Err(DcError::UnknownProblem(name.to_string()))
}
