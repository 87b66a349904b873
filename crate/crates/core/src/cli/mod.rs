//! Command-line driver.
//!
//! Exit codes: 0 success, 1 parse, usage or invalid input, 2 solver
//! non-convergence or a failed check, 3 I/O.

pub mod demo;
pub mod report;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::ctc_engine::{self, SolverMethod, SolverOptions};
use crate::dsl;
use crate::error::Error;
use crate::fidelity::fidelity;
use crate::sweep::{self, SweepConfig, SweepKind};

use demo::{ClonerChoice, DemoArgs, DemoName};
use report::{MarginalJson, RunReport, SweepReport, FORMAT_VERSION};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_FAILED: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "ctcsim",
    version,
    about = "Deutsch closed-timelike-curve simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse, lower and evolve a `.ctc` circuit file.
    Run {
        circuit: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        /// Comma-separated registers to trace out; repeat for several marginals.
        #[arg(long = "trace-out", value_name = "REG,...")]
        trace_out: Vec<String>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run one of the canned cloning experiments.
    Demo {
        #[arg(value_enum)]
        name: DemoName,
        /// `preset:zero-plus` or `@<states file>` (clone-pure).
        #[arg(long, default_value = "preset:zero-plus")]
        alphabet: String,
        /// Alphabet member to clone (clone-pure).
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// Diagonal of the target, e.g. `0.25,0.75` (clone-mixed).
        #[arg(long)]
        probs: Option<String>,
        /// Cloner fed half of the Bell state (nosignal).
        #[arg(long, value_enum, default_value = "mixed")]
        cloner: ClonerChoice,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run a seeded property sweep.
    Sweep {
        #[arg(value_parser = parse_sweep_kind)]
        kind: SweepKind,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
}

fn parse_sweep_kind(s: &str) -> Result<SweepKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_solver(s: &str) -> Result<SolverMethod, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// `eig` or `cesaro`; picked from the CTC dimension when omitted.
    #[arg(long, value_parser = parse_solver)]
    pub solver: Option<SolverMethod>,
    /// Fixed-point residual tolerance.
    #[arg(long, env = "CTCSIM_DEFAULT_TOL", default_value_t = 1e-12)]
    pub tol: f64,
    #[arg(long = "max-iter", default_value_t = 100_000)]
    pub max_iter: usize,
}

impl SolverArgs {
    pub fn options(&self) -> Result<SolverOptions, Error> {
        let opts = SolverOptions {
            method: self.solver,
            tol_residual: self.tol,
            max_iter: self.max_iter,
            ..SolverOptions::default()
        };
        opts.validate()?;
        Ok(opts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Failure carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NonConvergence { .. } => EXIT_FAILED,
            Error::Io { .. } => EXIT_IO,
            _ => EXIT_INVALID,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn render<T: Serialize>(report: &T, format: Format) -> Result<String, CliError> {
    let internal = |e: serde_json::Error| CliError {
        code: EXIT_INVALID,
        message: e.to_string(),
    };
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(report).map_err(internal)?;
            s.push('\n');
            Ok(s)
        }
        Format::Csv => Ok(report::flatten_scalars(
            &serde_json::to_value(report).map_err(internal)?,
        )),
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    let io_err = |path: &str, e: std::io::Error| CliError {
        code: EXIT_IO,
        message: format!("cannot write `{path}`: {e}"),
    };
    match out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| io_err(&path.display().to_string(), e))
        }
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| io_err("<stdout>", e)),
    }
}

fn cmd_run(
    circuit: &Path,
    solver: &SolverArgs,
    trace_out: &[String],
    output: &OutputArgs,
) -> Result<i32, CliError> {
    let opts = solver.options()?;
    let lowered = dsl::load_circuit(circuit)?;
    let problem = &lowered.problem;
    let (out_state, fp) = ctc_engine::evolve(problem, &opts)?;
    let layout = problem.layout();
    let cr: Vec<String> = layout
        .cr_indices()
        .iter()
        .map(|&i| layout.registers()[i].name.clone())
        .collect();

    let mut marginals = Vec::new();
    let mut fidelities = BTreeMap::new();
    fidelities.insert(
        "output_vs_input".to_string(),
        fidelity(&out_state, problem.cr_input())?,
    );
    for spec in trace_out {
        let traced: Vec<String> = spec
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        let mut traced_idx = Vec::new();
        for name in &traced {
            let pos = cr
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| Error::UnknownRegister(name.clone()))?;
            traced_idx.push(pos);
        }
        let kept: Vec<String> = cr
            .iter()
            .enumerate()
            .filter(|(i, _)| !traced_idx.contains(i))
            .map(|(_, n)| n.clone())
            .collect();
        let marginal = out_state.trace_out(&traced_idx)?;
        let input_marginal = problem.cr_input().trace_out(&traced_idx)?;
        fidelities.insert(
            format!("marginal[{}]_vs_input", kept.join(",")),
            fidelity(&marginal, &input_marginal)?,
        );
        marginals.push(MarginalJson {
            traced,
            kept,
            matrix: (&marginal).into(),
        });
    }

    let report = RunReport {
        format_version: FORMAT_VERSION,
        command: "run",
        circuit: circuit.display().to_string(),
        layout: report::layout_json(layout),
        permutation: lowered.permutation.clone(),
        solver_options: (&opts).into(),
        fixed_point: (&fp).into(),
        output: (&out_state).into(),
        marginals,
        fidelities,
    };
    emit(&render(&report, output.format)?, output.out.as_deref())?;
    Ok(EXIT_OK)
}

fn cmd_demo(
    name: DemoName,
    args: &DemoArgs<'_>,
    solver: &SolverArgs,
    output: &OutputArgs,
) -> Result<i32, CliError> {
    let opts = solver.options()?;
    let report = demo::run_demo(name, args, &opts)?;
    emit(&render(&report, output.format)?, output.out.as_deref())?;
    for c in &report.checks {
        let verdict = if c.pass { "PASS" } else { "FAIL" };
        eprintln!(
            "{verdict} {}: {} = {:e} (tolerance {:e})",
            name.as_str(),
            c.description,
            c.value,
            c.tolerance
        );
    }
    Ok(if report.pass { EXIT_OK } else { EXIT_FAILED })
}

fn cmd_sweep(config: &SweepConfig, output: &OutputArgs) -> Result<i32, CliError> {
    let summary = sweep::run_sweep(config)?;
    let text = match output.format {
        Format::Json => render(&SweepReport::from(&summary), Format::Json)?,
        Format::Csv => report::sweep_csv(&summary),
    };
    emit(&text, output.out.as_deref())?;
    for &i in &summary.violations {
        let row = &summary.rows[i];
        let why = row.error.as_deref().unwrap_or("margin out of bounds");
        eprintln!(
            "violation in {} trial {} (seed {}): {why}",
            config.kind, row.index, row.seed
        );
    }
    let worst: Vec<String> = summary
        .columns
        .iter()
        .zip(&summary.worst)
        .map(|(c, w)| {
            format!(
                "{}={}",
                c.name,
                w.map_or("n/a".to_string(), |v| format!("{v:e}"))
            )
        })
        .collect();
    eprintln!(
        "{} {}: {} trials, worst {}",
        if summary.pass() { "PASS" } else { "FAIL" },
        config.kind,
        config.trials,
        worst.join(" ")
    );
    Ok(if summary.pass() { EXIT_OK } else { EXIT_FAILED })
}

pub fn execute(cli: &Cli) -> Result<i32, CliError> {
    match &cli.command {
        Command::Run {
            circuit,
            solver,
            trace_out,
            output,
        } => cmd_run(circuit, solver, trace_out, output),
        Command::Demo {
            name,
            alphabet,
            index,
            probs,
            cloner,
            solver,
            output,
        } => {
            let args = DemoArgs {
                alphabet,
                index: *index,
                probs: probs.as_deref(),
                cloner: *cloner,
            };
            cmd_demo(*name, &args, solver, output)
        }
        Command::Sweep {
            kind,
            trials,
            dim,
            seed,
            output,
        } => {
            let config = SweepConfig {
                kind: *kind,
                trials: *trials,
                dim: *dim,
                seed: *seed,
            };
            cmd_sweep(&config, output)
        }
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
