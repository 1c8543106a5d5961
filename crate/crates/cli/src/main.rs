//! `qapdnn`: solve QAPLIB instances, run benchmark batches, run the
//! brute-force oracle.

use std::collections::HashMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use qapdnn::qaplib::{write_entries, ReportEntry};
use qapdnn::{
    brute_force_opt, known_optimum, parse_instance, solve, BoundsReport, QapError, QapInstance,
    ReportFormat, SolverMode, SolverParams, MAX_ORACLE_N,
};

const EXIT_FAILURE: u8 = 1;
const EXIT_NOT_FOUND: u8 = 2;
const EXIT_PARSE: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;
const EXIT_EMPTY_DIR: u8 = 5;

#[derive(Parser, Debug)]
#[command(name = "qapdnn", version, about = "DNN relaxation bounds for the quadratic assignment problem")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one instance and print its bounds row.
    Solve {
        path: PathBuf,
        #[command(flatten)]
        solver: SolverFlags,
        #[command(flatten)]
        output: OutputFlags,
    },
    /// Solve every `.dat` file in a directory and print a table sorted by name.
    Bench {
        dir: PathBuf,
        #[command(flatten)]
        solver: SolverFlags,
        #[command(flatten)]
        output: OutputFlags,
    },
    /// Enumerate all permutations (n <= 10) and print the optimum.
    Oracle { path: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Rprsm,
    Admm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum KktArg {
    /// On for n > 20.
    Auto,
    On,
    Off,
}

#[derive(Args, Debug, Clone)]
struct SolverFlags {
    /// Penalty parameter [default: n/3]
    #[arg(long)]
    beta: Option<f64>,
    /// Dual step length [default: 0.9, or 1.618 with --mode admm]
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 40_000)]
    maxiter: usize,
    /// Residual tolerance for the consecutive-iterations stop
    #[arg(long, default_value_t = 1e-5)]
    eps: f64,
    /// KKT residual tolerance
    #[arg(long, default_value_t = 1e-5)]
    delta: f64,
    /// Consecutive small-residual iterations required to stop
    #[arg(long, default_value_t = 100)]
    mt: usize,
    /// Bound evaluations without lower-bound progress before stopping
    #[arg(long, default_value_t = 100)]
    ml: usize,
    /// Bound evaluations without upper-bound progress before stopping
    #[arg(long, default_value_t = 100)]
    mu: usize,
    #[arg(long, default_value_t = 100)]
    bound_every: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Rprsm)]
    mode: ModeArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = KktArg::Auto)]
    kkt_stop: KktArg,
    /// Keep iterating after the lower bound meets the upper bound
    #[arg(long)]
    no_gap_stop: bool,
}

impl SolverFlags {
    fn params(&self, n: usize) -> SolverParams {
        let mode = match self.mode {
            ModeArg::Rprsm => SolverMode::Rprsm,
            ModeArg::Admm => SolverMode::Admm,
        };
        let defaults = SolverParams::defaults(n, mode);
        SolverParams {
            beta: self.beta.unwrap_or(defaults.beta),
            gamma: self.gamma.unwrap_or(defaults.gamma),
            maxiter: self.maxiter,
            eps: self.eps,
            delta: self.delta,
            m_t: self.mt,
            m_l: self.ml,
            m_u: self.mu,
            bound_every: self.bound_every,
            mode,
            seed: self.seed,
            use_kkt_stop: match self.kkt_stop {
                KktArg::Auto => defaults.use_kkt_stop,
                KktArg::On => true,
                KktArg::Off => false,
            },
            stop_on_gap_closure: !self.no_gap_stop,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct OutputFlags {
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    /// Write the table here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Whitespace-separated `name value` lines overriding the built-in optima
    #[arg(long)]
    optima: Option<PathBuf>,
    /// Report 0 in the time column, for byte-stable output
    #[arg(long)]
    no_timing: bool,
}

impl OutputFlags {
    fn format(&self) -> ReportFormat {
        match self.format {
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Json => ReportFormat::Json,
        }
    }
}

/// Error carrying the process exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn new(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code,
            error: error.into(),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure::new(EXIT_FAILURE, error)
    }
}

fn qap_exit_code(e: &QapError) -> u8 {
    match e {
        QapError::Numerical(_) => EXIT_NUMERICAL,
        e if e.is_input_error() => EXIT_PARSE,
        _ => EXIT_FAILURE,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Solve {
            path,
            solver,
            output,
        } => cmd_solve(&path, &solver, &output),
        Command::Bench {
            dir,
            solver,
            output,
        } => cmd_bench(&dir, &solver, &output),
        Command::Oracle { path } => cmd_oracle(&path),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn instance_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn load(path: &Path) -> Result<QapInstance, Failure> {
    let bytes = fs::read(path).map_err(|e| {
        let code = if e.kind() == io::ErrorKind::NotFound {
            EXIT_NOT_FOUND
        } else {
            EXIT_FAILURE
        };
        Failure::new(code, anyhow::Error::new(e).context(format!("reading {}", path.display())))
    })?;
    parse_instance(&bytes, &instance_name(path)).map_err(|e| {
        Failure::new(
            qap_exit_code(&e),
            anyhow::Error::new(e).context(format!("parsing {}", path.display())),
        )
    })
}

fn load_optima(path: Option<&Path>) -> Result<HashMap<String, f64>, Failure> {
    let mut table = HashMap::new();
    let Some(path) = path else {
        return Ok(table);
    };
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading optima table {}", path.display()))?;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(name), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(anyhow::anyhow!("{}:{}: expected `name value`", path.display(), lineno + 1).into());
        };
        let value: f64 = value
            .parse()
            .with_context(|| format!("{}:{}: bad value", path.display(), lineno + 1))?;
        table.insert(name.to_string(), value);
    }
    Ok(table)
}

fn optimum_for(name: &str, overrides: &HashMap<String, f64>) -> Option<f64> {
    overrides
        .get(name)
        .copied()
        .or_else(|| known_optimum(name).map(|k| k.value))
}

fn solve_one(
    inst: &QapInstance,
    solver: &SolverFlags,
    output: &OutputFlags,
    overrides: &HashMap<String, f64>,
) -> Result<BoundsReport, QapError> {
    let params = solver.params(inst.n());
    let res = solve(inst, &params)?;
    let time = if output.no_timing { 0.0 } else { res.time_sec };
    BoundsReport::new(
        inst.name(),
        optimum_for(inst.name(), overrides),
        res.lbd,
        res.ubd,
        res.iters,
        time,
        params.mode,
    )
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes()).context("writing to stdout")?;
            stdout.flush().context("writing to stdout")?;
        }
    }
    Ok(())
}

fn cmd_solve(path: &Path, solver: &SolverFlags, output: &OutputFlags) -> Result<(), Failure> {
    let overrides = load_optima(output.optima.as_deref())?;
    let inst = load(path)?;
    let report = solve_one(&inst, solver, output, &overrides)
        .map_err(|e| Failure::new(qap_exit_code(&e), e))?;
    emit(
        &write_entries(&[ReportEntry::Solved(report)], output.format()),
        output.out.as_deref(),
    )
}

fn dat_files(dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    let entries = fs::read_dir(dir).map_err(|e| {
        let code = if e.kind() == io::ErrorKind::NotFound {
            EXIT_NOT_FOUND
        } else {
            EXIT_FAILURE
        };
        Failure::new(code, anyhow::Error::new(e).context(format!("reading {}", dir.display())))
    })?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.context("listing directory")?.path();
        if path.is_file() && path.extension().is_some_and(|e| e.eq_ignore_ascii_case("dat")) {
            files.push(path);
        }
    }
    Ok(files)
}

fn worker_pool() -> Result<rayon::ThreadPool, Failure> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("QAPDNN_THREADS") {
        let threads: usize = v
            .parse()
            .ok()
            .filter(|&t| t > 0)
            .ok_or_else(|| anyhow::anyhow!("QAPDNN_THREADS must be a positive integer, got `{v}`"))?;
        builder = builder.num_threads(threads);
    }
    Ok(builder.build().context("starting worker threads")?)
}

fn cmd_bench(dir: &Path, solver: &SolverFlags, output: &OutputFlags) -> Result<(), Failure> {
    let overrides = load_optima(output.optima.as_deref())?;
    let files = dat_files(dir)?;
    if files.is_empty() {
        return Err(Failure::new(
            EXIT_EMPTY_DIR,
            anyhow::anyhow!("no .dat files in {}", dir.display()),
        ));
    }
    let pool = worker_pool()?;
    let mut entries: Vec<ReportEntry> = pool.install(|| {
        files
            .par_iter()
            .map(|path| {
                let name = instance_name(path);
                let outcome = load(path).map_err(|f| format!("{:#}", f.error)).and_then(|inst| {
                    solve_one(&inst, solver, output, &overrides).map_err(|e| e.to_string())
                });
                match outcome {
                    Ok(report) => {
                        eprintln!("{name}: lbd {} ubd {} ({} iterations)", report.lbd, report.ubd, report.iters);
                        ReportEntry::Solved(report)
                    }
                    Err(error) => {
                        eprintln!("{name}: failed: {error}");
                        ReportEntry::Failed {
                            opt_known: optimum_for(&name, &overrides),
                            name,
                            error,
                        }
                    }
                }
            })
            .collect()
    });
    entries.sort_by(|a, b| a.name().cmp(b.name()));
    emit(&write_entries(&entries, output.format()), output.out.as_deref())
}

fn cmd_oracle(path: &Path) -> Result<(), Failure> {
    let inst = load(path)?;
    if inst.n() > MAX_ORACLE_N {
        return Err(Failure::new(
            EXIT_FAILURE,
            anyhow::anyhow!(
                "instance too large for oracle: n = {} exceeds {}",
                inst.n(),
                MAX_ORACLE_N
            ),
        ));
    }
    let (value, perm) = brute_force_opt(&inst).map_err(|e| Failure::new(qap_exit_code(&e), e))?;
    emit(&format!("{}\n{}\n", value, perm), None)
}
