//! Dense vector helpers on plain slices.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `y + t * d`, evaluated coordinate-wise in exactly this form so that callers
/// re-deriving a step from stored `y`, `t`, `d` reproduce it bit for bit.
pub fn axpy(y: &[f64], t: f64, d: &[f64]) -> Vec<f64> {
    y.iter().zip(d).map(|(yi, di)| yi + t * di).collect()
}
