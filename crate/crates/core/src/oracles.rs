//! Separable convex building blocks and their subdifferential calculus.
//!
//! Every expression is a sum of atoms acting on `x ∈ ℝⁿ`:
//!
//! * `Quad(a)`: `a·‖x‖²`, modulus `2a`
//! * `Lin(c)`: `⟨c, x⟩`, modulus `0`
//! * `L1(b)`: `b·Σ|xᵢ|`, modulus `0`
//!
//! Because each atom is coordinate-separable, so is every expression, and the
//! subdifferential at a point is exactly a product of closed intervals. The
//! per-coordinate view `qᵢ(t) = a·t² + cᵢ·t + b·|t|` is exposed as [`Coord`] and
//! is what the closed-form subproblem solves run on.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, DcError, Result};
use crate::linalg::{dot, sub};

/// A convex expression tree over the separable atom class.
///
/// Serializes as `{"sum":[{"quad":a},{"lin":[c...]},{"l1":b}]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConvexExpr {
    Quad(f64),
    Lin(Vec<f64>),
    L1(f64),
    Sum(Vec<ConvexExpr>),
}

/// Exact subdifferential of a separable function: `∂f(x) = Πᵢ [loᵢ, hiᵢ]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubdiffBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// A vector `w` certified to lie in `∂_ε f(x)` for `ε = eps_achieved`.
///
/// `w` is an exact subgradient at `anchor_z`; the certificate is the
/// linearization gap `f(x) − f(z) − ⟨w, x − z⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct EpsSubgradCert {
    pub w: Vec<f64>,
    pub eps_achieved: f64,
    pub anchor_z: Vec<f64>,
}

/// One coordinate of a separable expression: `q(t) = a·t² + c·t + b·|t|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coord {
    pub a: f64,
    pub c: f64,
    pub b: f64,
}

impl ConvexExpr {
    pub fn quad(a: f64) -> Self {
        ConvexExpr::Quad(a)
    }

    pub fn lin(c: impl Into<Vec<f64>>) -> Self {
        ConvexExpr::Lin(c.into())
    }

    pub fn l1(b: f64) -> Self {
        ConvexExpr::L1(b)
    }

    pub fn sum(parts: impl Into<Vec<ConvexExpr>>) -> Self {
        ConvexExpr::Sum(parts.into())
    }

    /// Checks atom coefficients (`a, b ≥ 0`, finite) and that all linear atoms
    /// agree on the dimension. Returns the fixed dimension, if any atom pins it.
    pub fn validate(&self) -> Result<Option<usize>> {
        match self {
            ConvexExpr::Quad(a) | ConvexExpr::L1(a) => {
                if !a.is_finite() || *a < 0.0 {
                    return Err(DcError::InvalidInput(format!(
                        "atom coefficient must be finite and nonnegative, got {a}"
                    )));
                }
                Ok(None)
            }
            ConvexExpr::Lin(c) => {
                if c.iter().any(|v| !v.is_finite()) {
                    return Err(DcError::InvalidInput("non-finite linear coefficient".into()));
                }
                Ok(Some(c.len()))
            }
            ConvexExpr::Sum(parts) => {
                let mut dim = None;
                for p in parts {
                    match (dim, p.validate()?) {
                        (Some(d), Some(e)) if d != e => return Err(DcError::DimensionMismatch { expected: d, got: e }),
                        (None, Some(e)) => dim = Some(e),
                        _ => {}
                    }
                }
                Ok(dim)
            }
        }
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        match self {
            ConvexExpr::Lin(c) => check_dim(c.len(), x.len()),
            ConvexExpr::Sum(parts) => parts.iter().try_for_each(|p| p.check(x)),
            _ => Ok(()),
        }
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(self.value_unchecked(x))
    }

    pub(crate) fn value_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            ConvexExpr::Quad(a) => a * dot(x, x),
            ConvexExpr::Lin(c) => dot(c, x),
            ConvexExpr::L1(b) => b * x.iter().map(|v| v.abs()).sum::<f64>(),
            ConvexExpr::Sum(parts) => parts.iter().map(|p| p.value_unchecked(x)).sum(),
        }
    }

    /// Canonical element of `∂f(x)`: the gradient on smooth atoms and
    /// `sign(xᵢ)` with `sign(0) = 0` on ℓ1 atoms.
    pub fn subgrad_select(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let mut out = vec![0.0; x.len()];
        self.add_subgrad(x, &mut out);
        Ok(out)
    }

    fn add_subgrad(&self, x: &[f64], out: &mut [f64]) {
        match self {
            ConvexExpr::Quad(a) => out.iter_mut().zip(x).for_each(|(o, v)| *o += 2.0 * a * v),
            ConvexExpr::Lin(c) => out.iter_mut().zip(c).for_each(|(o, v)| *o += v),
            ConvexExpr::L1(b) => out.iter_mut().zip(x).for_each(|(o, v)| *o += b * sign0(*v)),
            ConvexExpr::Sum(parts) => parts.iter().for_each(|p| p.add_subgrad(x, out)),
        }
    }

    /// Exact `∂f(x)` as a box, built by interval addition over the atoms.
    pub fn subdiff_box(&self, x: &[f64]) -> Result<SubdiffBox> {
        self.check(x)?;
        let mut bx = SubdiffBox {
            lo: vec![0.0; x.len()],
            hi: vec![0.0; x.len()],
        };
        self.add_box(x, &mut bx);
        Ok(bx)
    }

    #[allow(clippy::needless_range_loop)]
    fn add_box(&self, x: &[f64], bx: &mut SubdiffBox) {
        match self {
            ConvexExpr::Quad(a) => {
                for i in 0..x.len() {
                    bx.lo[i] += 2.0 * a * x[i];
                    bx.hi[i] += 2.0 * a * x[i];
                }
            }
            ConvexExpr::Lin(c) => {
                for i in 0..x.len() {
                    bx.lo[i] += c[i];
                    bx.hi[i] += c[i];
                }
            }
            ConvexExpr::L1(b) => {
                for i in 0..x.len() {
                    if x[i] == 0.0 {
                        bx.lo[i] -= b;
                        bx.hi[i] += b;
                    } else {
                        let s = b * x[i].signum();
                        bx.lo[i] += s;
                        bx.hi[i] += s;
                    }
                }
            }
            ConvexExpr::Sum(parts) => parts.iter().for_each(|p| p.add_box(x, bx)),
        }
    }

    /// Strong-convexity modulus, read structurally off the quadratic atoms.
    pub fn modulus(&self) -> f64 {
        match self {
            ConvexExpr::Quad(a) => 2.0 * a,
            ConvexExpr::Lin(_) | ConvexExpr::L1(_) => 0.0,
            ConvexExpr::Sum(parts) => parts.iter().map(|p| p.modulus()).sum(),
        }
    }

    /// `f(2y − x) + f(x) − 2f(y)` with `d = y − x`, evaluated atom by atom so
    /// the quadratic part is exactly `2a‖d‖²` and the linear part cancels.
    pub fn second_difference(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check(x)?;
        check_dim(x.len(), y.len())?;
        let d = sub(y, x);
        Ok(self.second_difference_inner(x, y, &d))
    }

    fn second_difference_inner(&self, x: &[f64], y: &[f64], d: &[f64]) -> f64 {
        match self {
            ConvexExpr::Quad(a) => 2.0 * a * dot(d, d),
            ConvexExpr::Lin(_) => 0.0,
            ConvexExpr::L1(b) => {
                b * (0..x.len())
                    .map(|i| (y[i] + d[i]).abs() + x[i].abs() - 2.0 * y[i].abs())
                    .sum::<f64>()
            }
            ConvexExpr::Sum(parts) => parts.iter().map(|p| p.second_difference_inner(x, y, d)).sum(),
        }
    }

    /// Collapses the tree into one [`Coord`] per coordinate.
    pub fn coords(&self, dim: usize) -> Result<Vec<Coord>> {
        let probe = vec![0.0; dim];
        self.check(&probe)?;
        let mut out = vec![Coord { a: 0.0, c: 0.0, b: 0.0 }; dim];
        self.add_coords(&mut out);
        Ok(out)
    }

    fn add_coords(&self, out: &mut [Coord]) {
        match self {
            ConvexExpr::Quad(a) => out.iter_mut().for_each(|q| q.a += a),
            ConvexExpr::Lin(c) => out.iter_mut().zip(c).for_each(|(q, v)| q.c += v),
            ConvexExpr::L1(b) => out.iter_mut().for_each(|q| q.b += b),
            ConvexExpr::Sum(parts) => parts.iter().for_each(|p| p.add_coords(out)),
        }
    }
}

/// `sign` with `sign(0) = 0`.
pub fn sign0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl SubdiffBox {
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Largest per-coordinate distance from `v` to the box (0 when inside).
    pub fn membership_gap(&self, v: &[f64]) -> f64 {
        v.iter()
            .enumerate()
            .map(|(i, vi)| (self.lo[i] - vi).max(vi - self.hi[i]).max(0.0))
            .fold(0.0, f64::max)
    }

    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        self.membership_gap(v) <= tol
    }

    /// Closest point of the box to `v`.
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .enumerate()
            .map(|(i, vi)| vi.clamp(self.lo[i], self.hi[i]))
            .collect()
    }

    /// Minkowski sum (interval addition per coordinate).
    pub fn add(&self, other: &SubdiffBox) -> SubdiffBox {
        SubdiffBox {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| a + b).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| a + b).collect(),
        }
    }

    /// Largest per-coordinate gap between two boxes; 0 iff they intersect.
    pub fn gap_to(&self, other: &SubdiffBox) -> f64 {
        (0..self.dim())
            .map(|i| interval_gap((self.lo[i], self.hi[i]), (other.lo[i], other.hi[i])))
            .fold(0.0, f64::max)
    }
}

pub(crate) fn interval_gap(p: (f64, f64), q: (f64, f64)) -> f64 {
    (p.0 - q.1).max(q.0 - p.1).max(0.0)
}

impl EpsSubgradCert {
    /// Certificate for `w = subgrad_select(f, z)` taken at anchor `z`.
    pub fn from_anchor(f: &ConvexExpr, x: &[f64], z: &[f64]) -> Result<Self> {
        check_dim(x.len(), z.len())?;
        let w = f.subgrad_select(z)?;
        let gap = f.value(x)? - f.value(z)? - dot(&w, &sub(x, z));
        Ok(EpsSubgradCert {
            w,
            eps_achieved: gap.max(0.0),
            anchor_z: z.to_vec(),
        })
    }
}

/// Returns some `w ∈ ∂_ε f(x)` with certified `ε ≤ eps_target`.
///
/// The anchor is drawn uniformly from a ball around `x` whose radius starts at
/// `min(0.1, √eps_target)` and halves until the gap certifies. After 60
/// halvings the anchor falls back to `x` itself (gap 0).
pub fn eps_subgrad<R: Rng + ?Sized>(f: &ConvexExpr, x: &[f64], eps_target: f64, rng: &mut R) -> Result<EpsSubgradCert> {
    if !(eps_target >= 0.0) {
        return Err(DcError::InvalidInput(format!(
            "eps_target must be nonnegative, got {eps_target}"
        )));
    }
    if eps_target == 0.0 || x.is_empty() {
        return EpsSubgradCert::from_anchor(f, x, x);
    }
    let n = x.len();
    let mut radius = 0.1f64.min(eps_target.sqrt());
    for _ in 0..60 {
        let u = sample_unit_ball(n, rng);
        let z: Vec<f64> = x.iter().zip(&u).map(|(xi, ui)| xi + radius * ui).collect();
        let cert = EpsSubgradCert::from_anchor(f, x, &z)?;
        if cert.eps_achieved <= eps_target {
            return Ok(cert);
        }
        radius *= 0.5;
    }
    EpsSubgradCert::from_anchor(f, x, x)
}

pub(crate) fn sample_unit_sphere<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let r = dot(&v, &v).sqrt();
        if r > 1e-300 {
            return v.into_iter().map(|vi| vi / r).collect();
        }
    }
}

fn sample_unit_ball<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let dir = sample_unit_sphere(n, rng);
    let r: f64 = rng.gen::<f64>().powf(1.0 / n as f64);
    dir.into_iter().map(|v| v * r).collect()
}

impl Coord {
    pub fn value(&self, t: f64) -> f64 {
        self.a * t * t + self.c * t + self.b * t.abs()
    }

    /// `∂q(t)` as a closed interval.
    pub fn interval(&self, t: f64) -> (f64, f64) {
        let base = 2.0 * self.a * t + self.c;
        if t == 0.0 {
            (base - self.b, base + self.b)
        } else {
            let s = base + self.b * t.signum();
            (s, s)
        }
    }

    /// Unique `t` with `w ∈ ∂q(t)`: a soft-threshold shifted by the linear term.
    /// Requires `a > 0`.
    pub fn solve(&self, w: f64) -> f64 {
        soft_threshold(w - self.c, self.b) / (2.0 * self.a)
    }

    /// Fenchel conjugate `q*(s)`; `+∞` outside the domain when `a = 0`.
    pub fn conjugate(&self, s: f64) -> f64 {
        let shifted = soft_threshold(s - self.c, self.b);
        if self.a > 0.0 {
            shifted * shifted / (4.0 * self.a)
        } else if shifted == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    /// Exact `∂_ε q(t)`: the sublevel set `{s : q*(s) + q(t) − s·t ≤ ε}`.
    ///
    /// The Fenchel–Young gap is convex in `s` and vanishes on `∂q(t)`, so the
    /// set is an interval containing `∂q(t)`; each endpoint is located by
    /// bracketing outward and bisecting.
    pub fn eps_interval(&self, t: f64, eps: f64) -> (f64, f64) {
        let (lo0, hi0) = self.interval(t);
        if eps <= 0.0 {
            return (lo0, hi0);
        }
        let qt = self.value(t);
        let gap = |s: f64| self.conjugate(s) + qt - s * t;
        let hi = self.eps_endpoint(hi0, 1.0, eps, &gap);
        let lo = self.eps_endpoint(lo0, -1.0, eps, &gap);
        (lo.min(lo0), hi.max(hi0))
    }

    fn eps_endpoint(&self, start: f64, dir: f64, eps: f64, gap: &dyn Fn(f64) -> f64) -> f64 {
        let mut inside = start;
        let mut step = 1.0f64.max(start.abs());
        let mut outside = start + dir * step;
        let mut guard = 0;
        while gap(outside) <= eps {
            inside = outside;
            step *= 2.0;
            outside = start + dir * step;
            guard += 1;
            if guard > 200 {
                return outside;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (inside + outside);
            if mid == inside || mid == outside {
                break;
            }
            if gap(mid) <= eps {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        inside
    }
}

pub fn soft_threshold(v: f64, k: f64) -> f64 {
    if v > k {
        v - k
    } else if v < -k {
        v + k
    } else {
        0.0
    }
}
