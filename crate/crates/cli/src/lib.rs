//! The `greedy-ldp` command line.
//!
//! Every subcommand flag can also come from a `--config` file of
//! `key = value` lines; flags given on the command line win.

pub mod config;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use greedy_ldp::deviations::{self, Side};
use greedy_ldp::dynamics::{self, RunSeed};
use greedy_ldp::io::{self, CsvMeta, Table};
use greedy_ldp::odeflow::{self, DEFAULT_STEP};
use greedy_ldp::{hamiltonian, legendre, montecarlo, validation};
use greedy_ldp::{Covector, DegreeDistribution, DegreeSequence, Error, MacroState, Result, Velocity};

pub use config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_DOMAIN: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "greedy-ldp", version, about = "Greedy independent sets on configuration-model graphs")]
pub struct Cli {
    /// Read default flag values from a `key = value` file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Write the effective configuration (file merged with flags) to FILE.
    #[arg(long, global = true, value_name = "FILE")]
    pub save_config: Option<PathBuf>,
    /// Worker threads for parallel subcommands.
    #[arg(long, global = true, env = "GREEDY_LDP_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the exact simulator on one graph until absorption.
    Simulate(SimulateArgs),
    /// Integrate the fluid limit.
    Fluid(FluidArgs),
    /// Integrate the Hamilton system from a given initial adjoint.
    Hamilton(HamiltonArgs),
    /// Tabulate T_alpha0 and F(alpha0) for a d-regular graph.
    RateCurve(RateCurveArgs),
    /// Rate of a deviation of T_N*/N from the jamming constant.
    Deviation(DeviationArgs),
    /// Monte Carlo ensemble of absorption times.
    Montecarlo(MontecarloArgs),
    /// Evaluate the local cost L(x, beta).
    Cost(CostArgs),
    /// Evaluate H(x, alpha) and its gradients.
    Hamiltonian(HamiltonianArgs),
    /// Run the built-in cross-checks.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
#[group(id = "model", required = true, multiple = false)]
pub struct ModelArgs {
    /// d-regular degree law.
    #[arg(long, group = "model")]
    pub regular: Option<usize>,
    /// Degree probabilities p_0,p_1,...
    #[arg(long, group = "model", value_name = "P0,P1,...")]
    pub probs: Option<String>,
    /// File of `j = p_j` lines.
    #[arg(long, group = "model", value_name = "FILE")]
    pub dist_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// CSV destination; standard output when absent.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Also write a gnuplot script next to the CSV (needs --out).
    #[arg(long)]
    pub gnuplot: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Number of vertices.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Keep every k-th state of the path (0 keeps only the ends).
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Also write the full run as JSON.
    #[arg(long, value_name = "FILE")]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FluidArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    pub step: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct HamiltonArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Initial adjoint: one number (tilt of the empty mass, d-regular only)
    /// or the full alpha_s,alpha_u,alpha_0,...,alpha_D.
    #[arg(long, allow_hyphen_values = true)]
    pub alpha0: String,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    pub step: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct RateCurveArgs {
    #[arg(long)]
    pub regular: usize,
    /// Interval of alpha0 as A,B.
    #[arg(long, allow_hyphen_values = true, default_value = "-1,1")]
    pub range: String,
    #[arg(long, default_value_t = 41)]
    pub points: usize,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    pub step: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct DeviationArgs {
    #[arg(long)]
    pub regular: usize,
    #[arg(long)]
    pub eps: f64,
    #[arg(long, default_value = "upper")]
    pub side: Side,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    pub step: f64,
    /// JSON destination; standard output when absent.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MontecarloArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1000)]
    pub replicas: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Estimate P(T_N*/N >= x) (upper) or P(T_N*/N <= x) (lower).
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, default_value = "upper")]
    pub side: Side,
    /// Histogram CSV destination.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[arg(long, requires = "out")]
    pub gnuplot: bool,
    /// JSON summary destination; standard output when absent.
    #[arg(long, value_name = "FILE")]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CostArgs {
    /// Use the d-regular closed form with x = s,u,e and beta = b_s,b_u,b_e.
    #[arg(long)]
    pub regular: Option<usize>,
    /// State s,u,e_0,...,e_D (or s,u,e with --regular).
    #[arg(long, allow_hyphen_values = true)]
    pub x: String,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: String,
}

#[derive(Debug, Args)]
pub struct HamiltonianArgs {
    /// State and covector as `s,u,e_0,..;a_s,a_u,a_0,..`, or one list of
    /// both halves.
    #[arg(long, allow_hyphen_values = true)]
    pub eval: String,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON report destination.
    #[arg(long, value_name = "FILE")]
    pub json: Option<PathBuf>,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidInput(_) | Error::Contract(_) | Error::Io(_) => EXIT_USAGE,
        Error::NumericalFailure(_) | Error::Singularity { .. } | Error::LeftStateSpace { .. } => EXIT_NUMERICAL,
        Error::Domain { .. } | Error::Infeasible(_) | Error::OutOfRange(_) => EXIT_DOMAIN,
    }
}

/// Global flags and whether they take a value.
const GLOBALS: [(&str, bool); 3] = [("--config", true), ("--save-config", true), ("--threads", true)];

struct Split {
    globals: Vec<String>,
    command: Vec<String>,
    config: Option<PathBuf>,
}

/// Separate the global flags from the subcommand and its flags, picking up
/// `--config` wherever it appears.
fn split_args(args: &[String]) -> Split {
    let mut split = Split { globals: vec![], command: vec![], config: None };
    let mut i = 0;
    while i < args.len() {
        let a = &args[i];
        let (name, inline) = match a.split_once('=') {
            Some((n, v)) => (n, Some(v.to_string())),
            None => (a.as_str(), None),
        };
        match GLOBALS.iter().find(|(g, _)| *g == name) {
            Some(&(g, takes)) => {
                let value = if takes && inline.is_none() && i + 1 < args.len() {
                    i += 1;
                    Some(args[i].clone())
                } else {
                    inline
                };
                if g == "--config" {
                    split.config = value.map(PathBuf::from);
                } else {
                    split.globals.push(g.to_string());
                    split.globals.extend(value);
                }
            }
            None => split.command.push(a.clone()),
        }
        i += 1;
    }
    split
}

fn asks_for_help(args: &[String]) -> bool {
    args.iter().any(|a| matches!(a.as_str(), "-h" | "--help" | "-V" | "--version" | "help"))
}

/// Merge the config file under the command line; returns the argv for
/// clap and the effective configuration.
fn resolve(argv: &[String]) -> Result<(Vec<String>, RunConfig)> {
    let prog = argv.first().cloned().unwrap_or_else(|| "greedy-ldp".into());
    let rest = &argv[argv.len().min(1)..];
    if asks_for_help(rest) {
        return Ok((argv.to_vec(), RunConfig::default()));
    }
    let split = split_args(rest);
    let from_cli = RunConfig::from_args(&split.command);
    let effective = match &split.config {
        Some(path) => RunConfig::parse(&fs::read_to_string(path)?)?.merged_under(&from_cli),
        None => from_cli,
    };
    let mut out = vec![prog];
    out.extend(split.globals);
    out.extend(effective.to_args());
    Ok((out, effective))
}

/// Parse `argv` (program name first), run the subcommand and return the
/// process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<String> = argv.into_iter().map(|a| a.into().to_string_lossy().into_owned()).collect();
    let (args, effective) = match resolve(&argv) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return EXIT_USAGE;
        }
        // the pool may already exist when run() is called more than once
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let result = cli
        .save_config
        .as_deref()
        .map_or(Ok(()), |p| fs::write(p, effective.to_text()).map_err(Error::from))
        .and_then(|_| dispatch(&cli.command, &effective));
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: &Command, cfg: &RunConfig) -> Result<i32> {
    let hash = cfg.hash();
    match cmd {
        Command::Simulate(a) => simulate(a, &hash),
        Command::Fluid(a) => fluid(a, &hash),
        Command::Hamilton(a) => hamilton(a, &hash),
        Command::RateCurve(a) => rate_curve(a, &hash),
        Command::Deviation(a) => {
            let rate = deviations::deviation_rate_with(a.regular, a.eps, a.side, a.step)?;
            emit_json(&rate, a.out.as_deref())
        }
        Command::Montecarlo(a) => monte_carlo(a, &hash),
        Command::Cost(a) => cost(a),
        Command::Hamiltonian(a) => {
            let (x, alpha) = parse_eval(&a.eval)?;
            emit_json(&hamiltonian::evaluate(&x, &alpha)?, None)
        }
        Command::Validate(a) => validate(a),
    }
}

pub fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|v| {
            let v = v.trim();
            v.parse::<f64>().map_err(|_| Error::InvalidInput(format!("not a number: {v:?}")))
        })
        .collect()
}

fn model(m: &ModelArgs) -> Result<DegreeDistribution> {
    match (m.regular, &m.probs, &m.dist_file) {
        (Some(d), _, _) => DegreeDistribution::regular(d),
        (_, Some(p), _) => DegreeDistribution::new(parse_list(p)?),
        (_, _, Some(path)) => io::read_distribution(path),
        _ => Err(Error::InvalidInput("one of --regular, --probs, --dist-file is required".into())),
    }
}

fn sequence(m: &ModelArgs, n: usize) -> Result<DegreeSequence> {
    match m.regular {
        Some(d) => DegreeSequence::regular(d, n),
        None => DegreeSequence::from_distribution(&model(m)?, n),
    }
}

fn emit_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<i32> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    match path {
        Some(p) => fs::write(p, text + "\n")?,
        None => print_stdout(&(text + "\n"))?,
    }
    Ok(EXIT_OK)
}

/// Write to standard output; a reader that went away (`| head`) is not an error.
fn print_stdout(text: &str) -> Result<()> {
    let mut lock = std::io::stdout().lock();
    match lock.write_all(text.as_bytes()).and_then(|_| lock.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn emit_table(table: &Table, meta: &CsvMeta, out: &OutputArgs, plot: Option<Plot>) -> Result<()> {
    match &out.out {
        Some(path) => {
            table.save(path, meta)?;
            if out.gnuplot {
                let plot = plot.ok_or_else(|| Error::InvalidInput("no plot for this output".into()))?;
                write_gnuplot(path, table, &plot)?;
            }
        }
        None if out.gnuplot => return Err(Error::InvalidInput("--gnuplot needs --out".into())),
        None => {
            let mut buf = Vec::new();
            table.write_csv(&mut buf, meta)?;
            print_stdout(&String::from_utf8_lossy(&buf))?;
        }
    }
    Ok(())
}

struct Plot {
    x: &'static str,
    /// Plotted columns; a trailing `*` matches every column with that prefix.
    y: &'static str,
    xlabel: &'static str,
    ylabel: &'static str,
}

fn write_gnuplot(csv: &Path, table: &Table, plot: &Plot) -> Result<()> {
    let col = |name: &str| table.header.iter().position(|h| h == name).map(|i| i + 1);
    let x = col(plot.x).ok_or_else(|| Error::Contract(format!("no column {}", plot.x)))?;
    let ys: Vec<(usize, &String)> = match plot.y.strip_suffix('*') {
        Some(prefix) => table.header.iter().enumerate().filter(|(_, h)| h.starts_with(prefix)).map(|(i, h)| (i + 1, h)).collect(),
        None => table.header.iter().enumerate().filter(|(_, h)| *h == plot.y).map(|(i, h)| (i + 1, h)).collect(),
    };
    let file = csv.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
    let curves: Vec<String> =
        ys.iter().map(|(i, h)| format!("'{file}' using {x}:{i} with lines title '{h}'")).collect();
    let script = format!(
        "set datafile separator ','\nset datafile commentschars '#'\nset xlabel '{}'\nset ylabel '{}'\nset key outside\nplot {}\npause mouse close\n",
        plot.xlabel,
        plot.ylabel,
        curves.join(", \\\n     ")
    );
    fs::write(csv.with_extension("gp"), script)?;
    Ok(())
}

#[derive(Serialize)]
struct SimulateSummary {
    n: usize,
    t_star_steps: usize,
    independent_set_fraction: f64,
    seed: RunSeed,
}

fn simulate(a: &SimulateArgs, hash: &str) -> Result<i32> {
    let seq = sequence(&a.model, a.n)?;
    let run = dynamics::run_to_absorption(&seq, RunSeed::new(a.seed, 0), a.thin);
    let meta = CsvMeta { config_hash: hash.into(), seed: Some(a.seed) };
    let plot = Plot { x: "t", y: "e_*", xlabel: "t", ylabel: "empty mass" };
    emit_table(&io::run_table(&run), &meta, &a.output, Some(plot))?;
    if let Some(p) = &a.json {
        emit_json(&run, Some(p))?;
    }
    if a.output.out.is_some() {
        let summary = SimulateSummary {
            n: run.n_vertices,
            t_star_steps: run.t_star_steps,
            independent_set_fraction: run.independent_set_fraction,
            seed: run.seed,
        };
        emit_json(&summary, None)?;
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct FluidSummary {
    t_star: f64,
    reached: bool,
    stop_times: Vec<Option<f64>>,
}

fn finite(v: &[f64]) -> Vec<Option<f64>> {
    v.iter().map(|&t| t.is_finite().then_some(t)).collect()
}

fn fluid(a: &FluidArgs, hash: &str) -> Result<i32> {
    let tr = odeflow::fluid_limit(&model(&a.model)?, a.step)?;
    let meta = CsvMeta { config_hash: hash.into(), seed: None };
    let plot = Plot { x: "t", y: "e_*", xlabel: "t", ylabel: "empty mass" };
    emit_table(&io::trajectory_table(&tr), &meta, &a.output, Some(plot))?;
    if a.output.out.is_some() {
        emit_json(&FluidSummary { t_star: tr.t_star, reached: tr.reached, stop_times: finite(&tr.stop_times) }, None)?;
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct HamiltonSummary {
    action: f64,
    t_alpha0: f64,
    reached: bool,
    stop_times: Vec<Option<f64>>,
}

fn hamilton(a: &HamiltonArgs, hash: &str) -> Result<i32> {
    let alpha = parse_list(&a.alpha0)?;
    let sol = match (alpha.as_slice(), a.model.regular) {
        (&[y], Some(d)) => odeflow::hamilton_path_regular(d, y, a.step)?,
        (&[_], None) => {
            return Err(Error::InvalidInput("a scalar --alpha0 needs --regular; give the full covector otherwise".into()))
        }
        _ => odeflow::hamilton_path(&model(&a.model)?, &Covector::from_flat(&alpha), a.step)?,
    };
    let meta = CsvMeta { config_hash: hash.into(), seed: None };
    let plot = Plot { x: "t", y: "e_*", xlabel: "t", ylabel: "empty mass" };
    emit_table(&io::hamilton_table(&sol), &meta, &a.output, Some(plot))?;
    if a.output.out.is_some() {
        let summary = HamiltonSummary {
            action: sol.action,
            t_alpha0: sol.t_alpha0,
            reached: sol.reached,
            stop_times: finite(&sol.trajectory.stop_times),
        };
        emit_json(&summary, None)?;
    }
    Ok(EXIT_OK)
}

fn rate_curve(a: &RateCurveArgs, hash: &str) -> Result<i32> {
    let range = match parse_list(&a.range)?.as_slice() {
        &[lo, hi] => (lo, hi),
        _ => return Err(Error::InvalidInput(format!("--range needs A,B, got {:?}", a.range))),
    };
    let curve = deviations::rate_curve_regular_with(a.regular, range, a.points, a.step)?;
    for (alpha0, err) in curve.alpha0_grid.iter().zip(&curve.errors) {
        if let Some(err) = err {
            eprintln!("warning: alpha0 = {alpha0}: {err}");
        }
    }
    let meta = CsvMeta { config_hash: hash.into(), seed: None };
    let plot = Plot { x: "alpha0", y: "F", xlabel: "alpha0", ylabel: "F(alpha0)" };
    emit_table(&io::rate_curve_table(&curve), &meta, &a.output, Some(plot))?;
    Ok(EXIT_OK)
}

fn monte_carlo(a: &MontecarloArgs, hash: &str) -> Result<i32> {
    let seq = sequence(&a.model, a.n)?;
    let mut result = montecarlo::ensemble(&seq, a.replicas, a.seed)?;
    if let Some(x) = a.threshold {
        result.tail(x, a.side);
    }
    if let Some(path) = &a.out {
        let meta = CsvMeta { config_hash: hash.into(), seed: Some(a.seed) };
        let out = OutputArgs { out: Some(path.clone()), gnuplot: a.gnuplot };
        let plot = Plot { x: "fraction", y: "probability", xlabel: "T_N*/N", ylabel: "probability" };
        emit_table(&io::histogram_table(&result.fractions.histogram), &meta, &out, Some(plot))?;
    }
    emit_json(&result, a.json.as_deref())
}

fn cost(a: &CostArgs) -> Result<i32> {
    let (x, beta) = (parse_list(&a.x)?, parse_list(&a.beta)?);
    let eval = match a.regular {
        Some(d) => match (x.as_slice(), beta.as_slice()) {
            (&[s, u, e], &[bs, bu, be]) => legendre::cost_regular(d, [s, u, e], [bs, bu, be])?,
            _ => return Err(Error::InvalidInput("with --regular, --x and --beta take three numbers each".into())),
        },
        None => {
            if x.len() != beta.len() || x.len() < 3 {
                return Err(Error::InvalidInput("--x and --beta need the same length, at least 3".into()));
            }
            legendre::cost_general(&MacroState::from_flat(&x), &Velocity::from_flat(&beta))?
        }
    };
    // JSON has no infinity; keep it readable instead of `null`
    let value = if eval.value.is_finite() { serde_json::json!(eval.value) } else { serde_json::json!(eval.value.to_string()) };
    emit_json(&serde_json::json!({ "value": value, "maximizer": eval.maximizer, "status": eval.status }), None)
}

fn parse_eval(text: &str) -> Result<(MacroState, Covector)> {
    let (x, alpha) = match text.split_once(';') {
        Some((x, a)) => (parse_list(x)?, parse_list(a)?),
        None => {
            let all = parse_list(text)?;
            if all.len() % 2 == 1 {
                return Err(Error::InvalidInput("--eval needs as many covector entries as state entries".into()));
            }
            let (x, a) = all.split_at(all.len() / 2);
            (x.to_vec(), a.to_vec())
        }
    };
    if x.len() < 3 || x.len() != alpha.len() {
        return Err(Error::InvalidInput("state and covector need the same length, at least 3".into()));
    }
    Ok((MacroState::from_flat(&x), Covector::from_flat(&alpha)))
}

fn validate(a: &ValidateArgs) -> Result<i32> {
    let checks = validation::run_all(a.seed);
    let report: String = checks
        .iter()
        .map(|c| format!("{} {}: {}\n", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail))
        .collect();
    print_stdout(&report)?;
    if let Some(p) = &a.json {
        emit_json(&checks, Some(p))?;
    }
    Ok(if checks.iter().all(|c| c.passed) { EXIT_OK } else { EXIT_NUMERICAL })
}
