mod runspec;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use dcboost::diagnostics::{check_trace, complexity_report, final_residual, phi_bar_for};
use dcboost::{DcError, Termination, Trace};
use rayon::prelude::*;
use serde_json::json;

use crate::runspec::{build, parse_override, parse_toml, FlatMap, RunSpec, Starts};

#[derive(Parser)]
#[command(name = "dcboost", version, about = "Boosted DC algorithms with certified iterations")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a solver from one or more starting points.
    Run {
        /// Flat TOML config file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override a config key, e.g. `--set rho=0.5`. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        problem: Option<String>,
        #[arg(long)]
        solver: Option<String>,
        /// Explicit start, comma separated. Repeatable; replaces sampled starts.
        #[arg(long = "start", value_name = "X1,X2,...", allow_hyphen_values = true)]
        starts: Vec<String>,
        /// Output directory for traces and summary.csv.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write per-run (k, φ) and iterate-path CSVs.
        #[arg(long)]
        plot: bool,
    },
    /// Replay every per-iteration inequality on recorded traces.
    Check {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
    },
    /// Compare observed step sizes with the complexity bounds.
    Complexity {
        trace: PathBuf,
        /// Lower bound on φ; defaults to the problem's declared bound.
        #[arg(long, allow_hyphen_values = true)]
        phibar: Option<f64>,
        /// Fraction in (0, 1/2) for the eventual-ν bound.
        #[arg(long, default_value_t = 0.25)]
        xi: f64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let outcome = match cli.cmd {
        Cmd::Run {
            config,
            overrides,
            problem,
            solver,
            starts,
            out,
            plot,
        } => load_spec(config, overrides, problem, solver, starts).and_then(|spec| cmd_run(&spec, &out, plot)),
        Cmd::Check { traces } => cmd_check(&traces),
        Cmd::Complexity { trace, phibar, xi } => cmd_complexity(&trace, phibar, xi),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("{}", json!({ "error": "usage", "message": format!("{e:#}") }));
            ExitCode::from(2)
        }
    }
}

fn load_spec(
    config: Option<PathBuf>,
    overrides: Vec<String>,
    problem: Option<String>,
    solver: Option<String>,
    starts: Vec<String>,
) -> Result<RunSpec> {
    let mut map = match &config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            parse_toml(&text)?
        }
        None => FlatMap::new(),
    };
    for o in &overrides {
        let (k, v) = parse_override(o)?;
        map.insert(k, v);
    }
    if let Some(p) = problem {
        map.insert("problem".into(), toml::Value::String(p));
    }
    if let Some(s) = solver {
        map.insert("solver".into(), toml::Value::String(s));
    }
    let mut spec = build(&map)?;
    if !starts.is_empty() {
        let pts = starts
            .iter()
            .map(|s| {
                s.split(',')
                    .map(|t| t.trim().parse::<f64>().with_context(|| format!("bad start `{s}`")))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(bad) = pts.iter().find(|p| p.len() != spec.problem.dim) {
            anyhow::bail!("start {bad:?} does not have dimension {}", spec.problem.dim);
        }
        spec.starts = Starts::Explicit(pts);
    }
    Ok(spec)
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

struct RunRow {
    start: Vec<f64>,
    outcome: std::result::Result<Trace, DcError>,
}

fn write_trace(trace: &Trace, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    trace.write_jsonl(&mut w)?;
    w.flush()?;
    Ok(())
}

fn write_plots(trace: &Trace, dir: &Path, i: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(dir.join(format!("phi_{i:04}.csv")))?;
    w.write_record(["k", "phi"])?;
    for r in &trace.records {
        w.write_record([r.k.to_string(), r.phi_x.to_string()])?;
    }
    w.write_record([trace.records.len().to_string(), trace.final_phi.to_string()])?;
    w.flush()?;
    if trace.problem.dim == 2 {
        let mut w = csv::Writer::from_path(dir.join(format!("path_{i:04}.csv")))?;
        w.write_record(["x1", "x2"])?;
        for p in trace.records.iter().map(|r| &r.x).chain([&trace.final_x]) {
            w.write_record([p[0].to_string(), p[1].to_string()])?;
        }
        w.flush()?;
    }
    Ok(())
}

fn cmd_run(spec: &RunSpec, out: &Path, plot: bool) -> Result<u8> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let starts = spec.start_points();
    let rows: Vec<RunRow> = starts
        .par_iter()
        .enumerate()
        .map(|(i, x0)| -> Result<RunRow> {
            let outcome = spec
                .solver
                .run(&spec.problem, &spec.config, x0, spec.seed.wrapping_add(i as u64));
            if let Ok(t) = &outcome {
                write_trace(t, &out.join(format!("trace_{i:04}.jsonl")))?;
                if plot {
                    write_plots(t, out, i)?;
                }
            }
            Ok(RunRow {
                start: x0.clone(),
                outcome,
            })
        })
        .collect::<Result<_>>()?;

    let mut failed = false;
    let mut w = csv::Writer::from_path(out.join("summary.csv"))?;
    w.write_record([
        "start",
        "final_x",
        "final_phi",
        "iterations",
        "total_backtracks",
        "termination",
        "final_residual",
    ])?;
    for (i, row) in rows.iter().enumerate() {
        match &row.outcome {
            Ok(t) => {
                let residual = final_residual(t)?;
                w.write_record([
                    join(&row.start),
                    join(&t.final_x),
                    t.final_phi.to_string(),
                    t.records.len().to_string(),
                    t.total_backtracks().to_string(),
                    t.termination.as_str().to_string(),
                    residual.to_string(),
                ])?;
                for v in &t.violations {
                    failed = true;
                    eprintln!("{}", json!({ "error": "invariant_violation", "start": i, "detail": v }));
                }
            }
            Err(e) => {
                failed = true;
                let record = match e {
                    DcError::InvariantViolation { inequality, k, slack } => json!({
                        "error": "invariant_violation",
                        "start": i,
                        "inequality": inequality,
                        "k": k,
                        "slack": slack,
                    }),
                    other => json!({ "error": "solver", "start": i, "message": other.to_string() }),
                };
                eprintln!("{record}");
            }
        }
    }
    w.flush()?;
    let ok = rows.iter().filter(|r| r.outcome.is_ok()).count();
    println!("{ok}/{} runs completed; output in {}", rows.len(), out.display());
    Ok(u8::from(failed))
}

fn read_trace(path: &Path) -> Result<Trace> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Trace::read_jsonl(BufReader::new(f)).with_context(|| format!("parsing {}", path.display()))
}

fn cmd_check(paths: &[PathBuf]) -> Result<u8> {
    let mut failed = false;
    for path in paths {
        let trace = read_trace(path)?;
        println!("{} ({} records)", path.display(), trace.records.len());
        for rep in check_trace(&trace)? {
            let (where_, slack) = match rep.worst {
                Some((k, s)) => (format!("k={k}"), format!("{s:e}")),
                None => ("-".to_string(), "-".to_string()),
            };
            let status = if rep.ok() { "ok" } else { "FAIL" };
            if !rep.ok() {
                failed = true;
            }
            println!("  {:<16} worst_slack={slack:<24} {where_:<8} {status}", rep.name);
        }
    }
    Ok(u8::from(failed))
}

fn cmd_complexity(path: &Path, phibar: Option<f64>, xi: f64) -> Result<u8> {
    let trace = read_trace(path)?;
    let (phi_bar, heuristic) = phi_bar_for(&trace, phibar);
    let p = &trace.problem;
    let rep = complexity_report(&trace, phi_bar, p.sigma, trace.config.theta, xi)?;
    if heuristic {
        println!("phi_bar = {phi_bar} (heuristic: best recorded value minus 1e-6)");
    }
    println!("{}", serde_json::to_string_pretty(&rep)?);
    if trace.termination == Termination::MaxIter && trace.records.is_empty() {
        println!("empty trace: nothing to check");
    }
    println!("prefix bound {}", if rep.prefix_ok { "holds" } else { "VIOLATED" });
    Ok(u8::from(!rep.prefix_ok))
}
