//! The DC program `min φ(x) = g(x) − h(x)`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, DcError, Result};
use crate::oracles::ConvexExpr;

/// A DC decomposition with a shared strong-convexity modulus `sigma`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DcProblem {
    pub name: String,
    pub dim: usize,
    pub g: ConvexExpr,
    pub h: ConvexExpr,
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_lower_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known_critical_points: Option<Vec<Vec<f64>>>,
}

impl DcProblem {
    /// Builds a problem with `sigma = min(modulus(g), modulus(h))`.
    pub fn new(name: impl Into<String>, dim: usize, g: ConvexExpr, h: ConvexExpr) -> Result<Self> {
        for f in [&g, &h] {
            if let Some(d) = f.validate()? {
                check_dim(dim, d)?;
            }
        }
        let sigma = g.modulus().min(h.modulus());
        if !(sigma > 0.0) {
            return Err(DcError::Unsupported(format!(
                "both components must be strongly convex (moduli {} and {})",
                g.modulus(),
                h.modulus()
            )));
        }
        Ok(DcProblem {
            name: name.into(),
            dim,
            g,
            h,
            sigma,
            phi_lower_bound: None,
            known_critical_points: None,
        })
    }

    pub fn with_lower_bound(mut self, phi_bar: f64) -> Self {
        self.phi_lower_bound = Some(phi_bar);
        self
    }

    pub fn with_critical_points(mut self, pts: Vec<Vec<f64>>) -> Self {
        self.known_critical_points = Some(pts);
        self
    }

    pub fn phi(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        Ok(self.g.value(x)? - self.h.value(x)?)
    }

    /// Problem-level invariant failures (modulus, dimension), as messages.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.sigma > 0.0) {
            out.push(format!("sigma must be positive, got {}", self.sigma));
        }
        if self.sigma > self.g.modulus() {
            out.push(format!("sigma > modulus(g) = {}", self.g.modulus()));
        }
        if self.sigma > self.h.modulus() {
            out.push(format!("sigma > modulus(h) = {}", self.h.modulus()));
        }
        for (label, f) in [("g", &self.g), ("h", &self.h)] {
            match f.validate() {
                Ok(Some(d)) if d != self.dim => {
                    out.push(format!("{label} has dimension {d}, problem has {}", self.dim))
                }
                Err(e) => out.push(format!("{label}: {e}")),
                _ => {}
            }
        }
        out
    }
}
