//! Per-iteration records and their JSONL / CSV encodings.
//!
//! A JSONL trace file has three kinds of lines: one header (problem, config,
//! start), one line per [`IterationRecord`], and one footer (final point and
//! termination reason). Records carry exactly the fields listed on the struct.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::SolverConfig;
use crate::error::{DcError, Result};
use crate::linalg::{axpy, sub};
use crate::problem::DcProblem;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterationRecord {
    pub k: usize,
    pub x: Vec<f64>,
    pub phi_x: f64,
    pub eps_k: f64,
    pub eps_certified: f64,
    pub w: Vec<f64>,
    pub y: Vec<f64>,
    pub xi: Vec<f64>,
    pub d_norm: f64,
    pub inexact_lhs: f64,
    pub inexact_rhs: f64,
    pub nu_k: f64,
    pub lambda_bar: f64,
    pub lambda_k: f64,
    pub n_backtracks: usize,
    pub phi_y: f64,
    pub phi_next: f64,
    /// Only defined when `nu_k > 0`.
    pub tau_hat: Option<f64>,
    pub tau: Option<f64>,
}

impl IterationRecord {
    pub fn d(&self) -> Vec<f64> {
        sub(&self.y, &self.x)
    }

    /// `y^k + λ_k d^k`, recomputed from the stored fields.
    pub fn next_point(&self) -> Vec<f64> {
        axpy(&self.y, self.lambda_k, &self.d())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    StepTol,
    DZero,
    MaxIter,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::StepTol => "StepTol",
            Termination::DZero => "DZero",
            Termination::MaxIter => "MaxIter",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub problem_name: String,
    pub problem: DcProblem,
    pub solver: String,
    pub config: SolverConfig,
    pub seed: u64,
    pub x0: Vec<f64>,
    pub records: Vec<IterationRecord>,
    pub final_x: Vec<f64>,
    pub final_phi: f64,
    /// Last subproblem solution `y`, including the one that triggered a `d = 0` stop.
    pub final_y: Option<Vec<f64>>,
    pub termination: Termination,
    /// Inequality failures recorded under [`crate::config::ViolationPolicy::Warn`].
    pub violations: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    problem_name: String,
    problem: DcProblem,
    solver: String,
    config: SolverConfig,
    seed: u64,
    x0: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Footer {
    final_x: Vec<f64>,
    final_phi: f64,
    #[serde(default)]
    final_y: Option<Vec<f64>>,
    termination: Termination,
    #[serde(default)]
    violations: Vec<String>,
}

pub const CSV_COLUMNS: [&str; 13] = [
    "k",
    "phi_x",
    "eps_k",
    "d_norm",
    "inexact_lhs",
    "inexact_rhs",
    "nu_k",
    "lambda_k",
    "n_backtracks",
    "phi_y",
    "phi_next",
    "tau_hat",
    "tau",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl Trace {
    /// `φ(x⁰)`: the first record's value, or the final value for an empty trace.
    pub fn phi_x0(&self) -> f64 {
        self.records.first().map_or(self.final_phi, |r| r.phi_x)
    }

    pub fn total_backtracks(&self) -> usize {
        self.records.iter().map(|r| r.n_backtracks).sum()
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        let header = Header {
            problem_name: self.problem_name.clone(),
            problem: self.problem.clone(),
            solver: self.solver.clone(),
            config: self.config.clone(),
            seed: self.seed,
            x0: self.x0.clone(),
        };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        let footer = Footer {
            final_x: self.final_x.clone(),
            final_phi: self.final_phi,
            final_y: self.final_y.clone(),
            termination: self.termination,
            violations: self.violations.clone(),
        };
        serde_json::to_writer(&mut out, &footer)?;
        out.write_all(b"\n")?;
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Trace> {
        let mut header: Option<Header> = None;
        let mut footer: Option<Footer> = None;
        let mut records = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let v: Value =
                serde_json::from_str(&line).map_err(|e| DcError::Format(format!("line {}: {e}", lineno + 1)))?;
            let obj = v
                .as_object()
                .ok_or_else(|| DcError::Format(format!("line {}: not an object", lineno + 1)))?;
            let at = |e: serde_json::Error| DcError::Format(format!("line {}: {e}", lineno + 1));
            if obj.contains_key("k") {
                records.push(serde_json::from_value(v).map_err(at)?);
            } else if obj.contains_key("problem_name") {
                header = Some(serde_json::from_value(v).map_err(at)?);
            } else if obj.contains_key("termination") {
                footer = Some(serde_json::from_value(v).map_err(at)?);
            } else {
                return Err(DcError::Format(format!("line {}: unrecognized line", lineno + 1)));
            }
        }
        let header = header.ok_or_else(|| DcError::Format("missing trace header".into()))?;
        let footer = footer.ok_or_else(|| DcError::Format("missing trace footer".into()))?;
        Ok(Trace {
            problem_name: header.problem_name,
            problem: header.problem,
            solver: header.solver,
            config: header.config,
            seed: header.seed,
            x0: header.x0,
            records,
            final_x: footer.final_x,
            final_phi: footer.final_phi,
            final_y: footer.final_y,
            termination: footer.termination,
            violations: footer.violations,
        })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_COLUMNS).map_err(csv_err)?;
        for r in &self.records {
            w.write_record([
                r.k.to_string(),
                r.phi_x.to_string(),
                r.eps_k.to_string(),
                r.d_norm.to_string(),
                r.inexact_lhs.to_string(),
                r.inexact_rhs.to_string(),
                r.nu_k.to_string(),
                r.lambda_k.to_string(),
                r.n_backtracks.to_string(),
                r.phi_y.to_string(),
                r.phi_next.to_string(),
                opt(r.tau_hat),
                opt(r.tau),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> DcError {
    DcError::Format(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drivers::run_inmbdca;
    use crate::problems;

    fn sample() -> Trace {
        let cfg = SolverConfig::default();
        run_inmbdca(&problems::ex2(), &cfg, &[-4.4615, -9.0766], 5).unwrap()
    }

    #[test]
    fn jsonl_round_trip_is_exact() {
        let t = sample();
        let mut buf = Vec::new();
        t.write_jsonl(&mut buf).unwrap();
        let back = Trace::read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back, t);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.ends_with('\n'));
        assert_eq!(text.lines().count(), t.records.len() + 2);
    }

    #[test]
    fn csv_layout() {
        let t = sample();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_COLUMNS.join(","));
        assert_eq!(lines.count(), t.records.len());
    }

    #[test]
    fn empty_input_is_a_format_error() {
        assert!(matches!(Trace::read_jsonl(&b""[..]), Err(DcError::Format(_))));
        assert!(matches!(
            Trace::read_jsonl(&b"{\"k\":1}\n"[..]),
            Err(DcError::Format(_))
        ));
    }
}
