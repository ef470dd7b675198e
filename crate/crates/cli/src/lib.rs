//! Command-line front end for `qcompat`: reads state and constraint files,
//! evaluates compatibility measures, pooling and maximum-entropy assignment,
//! and reproduces the two qubit scenarios as plot-ready CSV or JSON.

pub mod error;
pub mod files;
pub mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use qcompat::compat::{self, CompatibilityReport, Criterion};
use qcompat::maxent::{self, MaxEntResult};
use qcompat::qmat::supports_intersection_dim;
use qcompat::{pooling, scenarios, Error, StateSet};
use serde_json::{json, Map, Value};

pub use error::{CliError, EXIT_SOLVER, EXIT_VALIDATION};
pub use files::{parse_constraints_file, parse_state_file, write_state_file, StateFile};
pub use output::Format;
use output::{matrix, num, nums, spectrum_summary};

#[derive(Debug, Parser)]
#[command(name = "qcompat", version, about = "Compatibility of quantum state assignments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    /// Write the report to this file instead of standard output.
    #[arg(short, long, global = true)]
    pub output: Option<PathBuf>,

    /// Solver tolerance.
    #[arg(long, global = true, default_value_t = qcompat::DEFAULT_TOL)]
    pub tol: f64,

    /// Relative eigenvalue threshold defining supports.
    #[arg(long, global = true, default_value_t = qcompat::DEFAULT_RANK_TOL)]
    pub rank_tol: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// BFM measure: largest trace of a positive operator below every state.
    Bfm(InputArgs),
    /// Post-Peierls measure: the same with a Hermitian operator.
    Pp(InputArgs),
    /// Equal-support measure: largest λ with λ Σⱼ ρⱼ ≤ ρᵢ.
    Es(InputArgs),
    /// Decide compatibility from the intersection of supports.
    Check(InputArgs),
    /// Maximum-entropy state from expectation-value constraints.
    Maxent {
        /// Constraints file.
        #[arg(short, long)]
        input: PathBuf,
        /// Second constraints file to pool with the first.
        #[arg(long)]
        pool: Option<PathBuf>,
    },
    /// Measurement pooling of exactly two states.
    Pool(InputArgs),
    /// Reproduce a qubit scenario curve.
    #[command(subcommand)]
    Scenario(Scenario),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// State file.
    #[arg(short, long)]
    pub input: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Scenario {
    /// Observable sharing under maximum entropy, averaged over pure states.
    Fig1 {
        #[arg(long, default_value_t = 64)]
        theta_steps: usize,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Two measurements performed in an unknown order.
    Fig2 {
        #[arg(long, default_value_t = 64)]
        theta_steps: usize,
    },
}

/// Validated run settings.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub tol: f64,
    pub rank_tol: f64,
    pub seed: u64,
    pub samples: usize,
    pub theta_steps: usize,
    pub format: Format,
}

impl RunConfig {
    pub fn from_cli(cli: &Cli) -> Result<Self, CliError> {
        let (seed, samples, theta_steps) = match cli.command {
            Command::Scenario(Scenario::Fig1 {
                theta_steps,
                samples,
                seed,
            }) => (seed, samples, theta_steps),
            Command::Scenario(Scenario::Fig2 { theta_steps }) => (42, 10_000, theta_steps),
            _ => (42, 10_000, 64),
        };
        let cfg = Self {
            tol: cli.tol,
            rank_tol: cli.rank_tol,
            seed,
            samples,
            theta_steps,
            format: cli.format,
        };
        for (name, x) in [("tol", cfg.tol), ("rank-tol", cfg.rank_tol)] {
            if !(x.is_finite() && x > 0.0) {
                return Err(CliError::Usage(format!("--{name} must be positive, got {x}")));
            }
        }
        for (name, n) in [("samples", cfg.samples), ("theta-steps", cfg.theta_steps)] {
            if n == 0 {
                return Err(CliError::Usage(format!("--{name} must be positive")));
            }
        }
        Ok(cfg)
    }
}

/// Rendered report: a single record or a table with fixed CSV columns.
enum Report {
    Record(Value),
    Table {
        header: Value,
        columns: &'static [&'static str],
        rows: Vec<Map<String, Value>>,
    },
}

impl Report {
    fn render(self, format: Format) -> String {
        match (self, format) {
            (Report::Record(v), Format::Json) => output::json_text(&v),
            (Report::Record(v), Format::Csv) => output::record_csv(&v),
            (Report::Table { header, rows, .. }, Format::Json) => {
                let mut v = header;
                v["rows"] = Value::Array(rows.into_iter().map(Value::Object).collect());
                output::json_text(&v)
            }
            (Report::Table { columns, rows, .. }, Format::Csv) => output::table_csv(columns, &rows),
        }
    }
}

fn load_states(path: &Path) -> Result<StateSet, CliError> {
    parse_state_file(path)
}

fn measure_report(s: &StateSet, crit: Criterion, cfg: &RunConfig) -> Result<Value, CliError> {
    let r: CompatibilityReport = match crit {
        Criterion::Bfm => compat::k_bfm_with_rank_tol(s, cfg.tol, cfg.rank_tol)?,
        Criterion::Pp => compat::k_pp(s, cfg.tol)?,
        Criterion::Es => compat::k_es_with_rank_tol(s, cfg.tol, cfg.rank_tol)?,
    };
    let certificate: Vec<Value> = s
        .labels()
        .iter()
        .zip(s.states())
        .zip(&r.dual_certificate)
        .enumerate()
        .map(|(i, ((label, st), m))| {
            let mut entry = json!({ "label": label, "weight": num(st.op().inner(m)) });
            if let (Value::Object(e), Value::Object(spec)) = (&mut entry, spectrum_summary(m)) {
                e.extend(spec);
                if let Some(&a) = r.alphas.get(i) {
                    e.insert("alpha".into(), num(a));
                }
            }
            entry
        })
        .collect();
    let mut v = json!({
        "criterion": r.criterion.to_string(),
        "states": s.len(),
        "dim": s.dim(),
        "value": num(r.value),
        "raw_value": num(r.raw_value),
        "dual_value": num(r.dual_value),
        "gap": num(r.gap),
    });
    if let Some(b) = r.upper_bound_trace_distance {
        v["bound_one_minus_trace_distance"] = num(b);
    }
    let extra = json!({
        "face_dim": r.face_dim,
        "status": format!("{:?}", r.solver.status),
        "iterations": r.solver.iterations,
        "primal_infeasibility": num(r.solver.primal_infeasibility),
        "dual_infeasibility": num(r.solver.dual_infeasibility),
        "tol": num(cfg.tol),
        "rank_tol": num(cfg.rank_tol),
        "witness": spectrum_summary(&r.primal_witness),
        "certificate": certificate,
    });
    if let (Value::Object(a), Value::Object(b)) = (&mut v, extra) {
        a.extend(b);
    }
    Ok(v)
}

fn check_report(s: &StateSet, cfg: &RunConfig) -> Result<Value, CliError> {
    let dim = supports_intersection_dim(s.states(), cfg.rank_tol)?;
    Ok(json!({
        "verdict": if dim > 0 { "compatible" } else { "incompatible" },
        "intersection_dim": dim,
        "states": s.len(),
        "dim": s.dim(),
        "rank_tol": num(cfg.rank_tol),
    }))
}

fn maxent_report(r: &MaxEntResult, dim: usize, pooled: bool) -> Value {
    json!({
        "dim": dim,
        "pooled": pooled,
        "entropy": num(r.entropy),
        "boundary": r.boundary,
        "iterations": r.iterations,
        "gibbs_residual": num(r.gibbs_residual),
        "max_residual": num(r.max_residual()),
        "feasibility_tol": num(maxent::FEASIBILITY_TOL),
        "multipliers": nums(&r.multipliers),
        "residuals": nums(&r.residuals),
        "state": matrix(r.state.matrix()),
    })
}

fn run_maxent(input: &Path, pool: Option<&Path>) -> Result<Value, CliError> {
    let (a, dim) = parse_constraints_file(input)?;
    let result = match pool {
        Some(other) => {
            let (b, d2) = parse_constraints_file(other)?;
            if d2 != dim {
                return Err(CliError::invalid(
                    "constraints",
                    format!(
                        "dimension mismatch: {} acts on {dim}, {} on {d2}",
                        input.display(),
                        other.display()
                    ),
                ));
            }
            maxent::pool_classical(&a, &b, dim)
        }
        None => maxent::maxent_estimate(&a, dim),
    };
    match result {
        Ok(r) => Ok(maxent_report(&r, dim, pool.is_some())),
        // A maximizer on the boundary is still the answer; the report flags it.
        Err(Error::BoundaryState(r)) => Ok(maxent_report(&r, dim, pool.is_some())),
        Err(e) => Err(e.into()),
    }
}

fn pool_report(s: &StateSet, cfg: &RunConfig) -> Result<Value, CliError> {
    if s.len() != 2 {
        return Err(CliError::invalid(
            "pool",
            format!("needs exactly 2 states, got {}", s.len()),
        ));
    }
    let p = pooling::pool_measurement(&s.states()[0], &s.states()[1], cfg.tol)?;
    let blocks: Map<String, Value> = ["e00", "e01", "e10", "e11"]
        .iter()
        .zip(p.blocks())
        .map(|(name, b)| (name.to_string(), spectrum_summary(b)))
        .collect();
    Ok(json!({
        "labels": s.labels(),
        "k_value": num(p.k_value),
        "c": num(p.c),
        "c_closed_form": num(p.c_closed_form),
        "p00": num(p.p00),
        "block_support_overlap": num(p.block_support_overlap),
        "tol": num(cfg.tol),
        "blocks": blocks,
        "r": matrix(p.r.matrix()),
        "joint_state": matrix(p.joint_state.matrix()),
    }))
}

fn fig1_report(cfg: &RunConfig) -> Result<Report, CliError> {
    let curve = scenarios::fig1_curve(cfg.theta_steps, cfg.samples, cfg.seed, cfg.tol)?;
    let rows = curve
        .iter()
        .map(|p| {
            let v = json!({
                "theta": num(p.theta),
                "k_avg": num(p.mc_mean),
                "stderr": num(p.mc_stderr),
                "paper_formula": num(p.paper_formula),
                "formula_mean": num(p.formula_mean),
                "bound_not_attained": p.discrepant,
            });
            v.as_object().cloned().expect("object literal")
        })
        .collect();
    Ok(Report::Table {
        header: json!({
            "scenario": "fig1",
            "theta_steps": cfg.theta_steps,
            "samples": cfg.samples,
            "seed": cfg.seed,
            "tol": num(cfg.tol),
        }),
        columns: &["theta", "k_avg", "stderr", "paper_formula"],
        rows,
    })
}

fn fig2_report(cfg: &RunConfig) -> Result<Report, CliError> {
    let curve = scenarios::fig2_curve(cfg.theta_steps, cfg.tol)?;
    let rows = curve
        .iter()
        .map(|p| {
            let v = json!({
                "theta": num(p.theta),
                "k_avg": num(p.k_avg),
                "probs": p.probs.iter().map(|r| nums(r)).collect::<Vec<_>>(),
                "k_pairs": p.k_pairs.iter().map(|r| nums(r)).collect::<Vec<_>>(),
            });
            v.as_object().cloned().expect("object literal")
        })
        .collect();
    Ok(Report::Table {
        header: json!({ "scenario": "fig2", "theta_steps": cfg.theta_steps, "tol": num(cfg.tol) }),
        columns: &["theta", "k_avg"],
        rows,
    })
}

/// Runs a parsed command and returns the rendered report.
pub fn execute(cli: &Cli) -> Result<String, CliError> {
    let cfg = RunConfig::from_cli(cli)?;
    let report = match &cli.command {
        Command::Bfm(a) => Report::Record(measure_report(&load_states(&a.input)?, Criterion::Bfm, &cfg)?),
        Command::Pp(a) => Report::Record(measure_report(&load_states(&a.input)?, Criterion::Pp, &cfg)?),
        Command::Es(a) => Report::Record(measure_report(&load_states(&a.input)?, Criterion::Es, &cfg)?),
        Command::Check(a) => Report::Record(check_report(&load_states(&a.input)?, &cfg)?),
        Command::Maxent { input, pool } => Report::Record(run_maxent(input, pool.as_deref())?),
        Command::Pool(a) => Report::Record(pool_report(&load_states(&a.input)?, &cfg)?),
        Command::Scenario(Scenario::Fig1 { .. }) => fig1_report(&cfg)?,
        Command::Scenario(Scenario::Fig2 { .. }) => fig2_report(&cfg)?,
    };
    Ok(report.render(cfg.format))
}

fn report_error(e: &CliError, format: Format, stderr: &mut dyn Write) {
    let text = match format {
        Format::Json => output::json_text(&json!({
            "error": { "kind": e.kind(), "exit_code": e.exit_code(), "message": e.to_string() }
        })),
        Format::Csv => format!("error: {e}\n"),
    };
    // Nothing sensible remains to be done if stderr itself fails.
    let _ = stderr.write_all(text.as_bytes());
}

/// Parses arguments, runs the command and writes the report. Returns the
/// process exit code: 0 on success, 1 for invalid input, 2 when a solver
/// fails.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                stdout.write_all(text.as_bytes())
            } else {
                stderr.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = execute(&cli).and_then(|text| match &cli.output {
        Some(path) => output::write_atomic(path, &text),
        None => stdout.write_all(text.as_bytes()).map_err(|source| CliError::Io {
            path: PathBuf::from("<stdout>"),
            source,
        }),
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            report_error(&e, cli.format, stderr);
            e.exit_code()
        }
    }
}
