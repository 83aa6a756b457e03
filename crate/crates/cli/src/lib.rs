//! Command-line front end: argument parsing, settings resolution and report files.

mod config;
mod output;

use std::fmt;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ecorate::fixture::{self, Benchmark};
use ecorate::measurements::{
    aggregate_energy, parse_normalized, parse_power_log, parse_raw, to_points, write_raw, Dataset,
    Measurement, PointSet,
};
use ecorate::report::{self, MethodSelection};
use ecorate::sensitivity::{self, Method, SizeGroupMap, StabilityReport};
use ecorate::{Diagnostic, Error};
use serde::Serialize;
use serde_json::json;

use config::{Mode, Overrides, Resolved, RunConfig};
use output::Sink;

/// Rates models on a benchmark by energy efficiency and accuracy.
#[derive(Parser, Debug)]
#[command(name = "ecorate", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Rate every model with CIRC, OTER or both
    Rate(Common),
    /// Export the fitted OTER expectation curve and the scored points
    Curve(Common),
    /// Sum power logs into per-model energy measurements
    Aggregate {
        #[command(flatten)]
        common: Common,
        /// CSV with model_id,benchmark_id,accuracy to join onto the energy totals
        #[arg(long)]
        accuracy: Option<PathBuf>,
    },
    /// Rerun OTER over a hyperparameter grid and compare with the baseline
    Sweep(Common),
    /// Leave each model out in turn and compare the remaining ratings
    Loo {
        #[command(flatten)]
        common: Common,
        /// Renormalize the remaining models after each exclusion
        #[arg(long)]
        renormalize: bool,
    },
    /// Perturb measurements with seeded uniform noise and compare ratings
    Noise {
        #[command(flatten)]
        common: Common,
        /// Relative noise amplitude, e.g. 0.05 for +-5%
        #[arg(long)]
        amplitude: Option<f64>,
        #[arg(long)]
        trials: Option<usize>,
        /// Shift normalized values instead of scaling raw measurements
        #[arg(long)]
        additive: bool,
    },
    /// Kruskal-Wallis test of ratings across model-size buckets
    Sizebias {
        #[command(flatten)]
        common: Common,
        /// CSV with model_id,size_bucket; defaults to the embedded grouping
        #[arg(long)]
        groups: Option<PathBuf>,
    },
    /// Write the embedded reference dataset (two benchmarks plus size buckets)
    Fixture(Common),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Input CSV (layout chosen by --mode)
    #[arg(long)]
    input: Option<PathBuf>,
    /// Input layout; defaults to normalized
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Rating method; defaults to both
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Number of rating classes
    #[arg(long)]
    scale: Option<u32>,
    /// JSON settings file; command-line flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; reports go to stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for FAST-MCD starts and noise draws
    #[arg(long)]
    seed: Option<u64>,
    /// Power sampling interval in seconds
    #[arg(long)]
    dt: Option<f64>,
    /// Do not write the JSON metadata file
    #[arg(long)]
    no_meta: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Circ,
    Oter,
    Both,
}

impl From<MethodArg> for MethodSelection {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Circ => MethodSelection::Circ,
            MethodArg::Oter => MethodSelection::Oter,
            MethodArg::Both => MethodSelection::Both,
        }
    }
}

/// Failure classes, one per exit code.
#[derive(Debug)]
pub enum Failure {
    /// Unreadable, malformed or invalid input data. Exit 1.
    Input(String),
    /// The fit could not be solved. Exit 2.
    Solver(String),
    /// Bad flags or settings. Exit 3.
    Config(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::Solver(_) => 2,
            Failure::Config(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Input(m) | Failure::Solver(m) | Failure::Config(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        match err {
            Error::SolverFailure { .. } | Error::Contract(_) => Failure::Solver(err.to_string()),
            Error::Argument(_) => Failure::Config(err.to_string()),
            _ => Failure::Input(err.to_string()),
        }
    }
}

/// Prefixes core errors with the file they came from.
fn in_file(path: &Path) -> impl Fn(Error) -> Failure + '_ {
    move |err| match Failure::from(err) {
        Failure::Input(m) => Failure::Input(format!("{}: {m}", path.display())),
        other => other,
    }
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code: 0 on success, 1 input, 2 solver, 3 configuration.
pub fn run_cli<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 3 } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {f}");
            f.code()
        }
    }
}

fn settings(common: &Common) -> Result<(Resolved, Sink), Failure> {
    let file = RunConfig::load(common.config.as_deref())?;
    let flags = Overrides {
        method: common.method.map(Into::into),
        scale: common.scale,
        input: common.input.clone(),
        mode: common.mode,
        out: common.out.clone(),
        seed: common.seed,
        dt: common.dt,
    };
    let cfg = config::resolve(file, flags)?;
    let sink = Sink::new(cfg.out.clone(), common.no_meta)?;
    Ok((cfg, sink))
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Rate(common) => cmd_rate(&common),
        Command::Curve(common) => cmd_curve(&common),
        Command::Aggregate { common, accuracy } => cmd_aggregate(&common, accuracy.as_deref()),
        Command::Sweep(common) => cmd_sweep(&common),
        Command::Loo {
            common,
            renormalize,
        } => cmd_loo(&common, renormalize),
        Command::Noise {
            common,
            amplitude,
            trials,
            additive,
        } => cmd_noise(&common, amplitude, trials, additive),
        Command::Sizebias { common, groups } => cmd_sizebias(&common, groups.as_deref()),
        Command::Fixture(common) => cmd_fixture(&common),
    }
}

fn echo(diagnostics: &[Diagnostic]) {
    for d in diagnostics {
        eprintln!("warning: {d}");
    }
}

fn input_path(cfg: &Resolved) -> Result<&Path, Failure> {
    cfg.input
        .as_deref()
        .ok_or_else(|| Failure::Config("--input is required".into()))
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

/// Normalized points from the input, with any normalization diagnostics.
fn load_points(cfg: &Resolved) -> Result<(PointSet, Vec<Diagnostic>), Failure> {
    let path = input_path(cfg)?;
    let (set, diagnostics) = match cfg.mode {
        Mode::Normalized => (
            parse_normalized(open(path)?).map_err(in_file(path))?,
            vec![],
        ),
        Mode::Raw => {
            let norm = to_points(&parse_raw(open(path)?).map_err(in_file(path))?)
                .map_err(in_file(path))?;
            (norm.points, norm.diagnostics)
        }
        Mode::Powerlog => {
            return Err(Failure::Config(
                "power logs carry no accuracy; run `aggregate` first".into(),
            ));
        }
    };
    if set.points.len() < 2 {
        return Err(in_file(path)(Error::InsufficientData {
            needed: 2,
            got: set.points.len(),
        }));
    }
    Ok((set, diagnostics))
}

/// Raw measurements from the input. Normalized input stands in as raw values
/// with accuracy = acc_norm and energy = 1 - eff_norm.
fn load_dataset(cfg: &Resolved) -> Result<Dataset, Failure> {
    let path = input_path(cfg)?;
    match cfg.mode {
        Mode::Raw => parse_raw(open(path)?).map_err(in_file(path)),
        Mode::Normalized => {
            let set = parse_normalized(open(path)?).map_err(in_file(path))?;
            let rows = set
                .points
                .iter()
                .map(|p| Measurement {
                    model_id: p.model_id.clone(),
                    benchmark_id: set.benchmark_id.clone(),
                    accuracy_raw: p.acc,
                    energy_joules: 1.0 - p.eff,
                })
                .collect();
            Dataset::new(rows).map_err(in_file(path))
        }
        Mode::Powerlog => Err(Failure::Config(
            "power logs carry no accuracy; run `aggregate` first".into(),
        )),
    }
}

fn methods(selection: MethodSelection) -> Vec<Method> {
    let mut out = Vec::new();
    if selection.circ() {
        out.push(Method::Circ);
    }
    if selection.oter() {
        out.push(Method::Oter);
    }
    out
}

fn cmd_rate(common: &Common) -> Result<(), Failure> {
    let (cfg, sink) = settings(common)?;
    let (set, mut diagnostics) = load_points(&cfg)?;
    let (report, _) = report::build_report(&set, cfg.method, &cfg.oter)?;
    diagnostics.extend(report.diagnostics.iter().cloned());
    echo(&diagnostics);
    sink.write("ratings.csv", |w| report::write_report(w, &report))?;
    sink.metadata("ratings", "rate", &cfg, &diagnostics)
}

fn cmd_curve(common: &Common) -> Result<(), Failure> {
    let (mut cfg, sink) = settings(common)?;
    if common.method.is_some_and(|m| m != MethodArg::Oter) {
        return Err(Failure::Config("curve export needs --method oter".into()));
    }
    cfg.method = MethodSelection::Oter;
    let (set, mut diagnostics) = load_points(&cfg)?;
    let result = ecorate::oter_rate(&set.points, &cfg.oter)?;
    diagnostics.extend(result.diagnostics.iter().cloned());
    echo(&diagnostics);
    sink.write("curve.csv", |w| {
        report::write_curve(w, &result.curve, cfg.oter.domain)
    })?;
    if sink.to_files() {
        sink.write("points.csv", |w| {
            report::write_scored_points(w, &set, &result)
        })?;
    }
    sink.metadata("curve", "curve", &cfg, &diagnostics)
}

fn cmd_aggregate(common: &Common, accuracy: Option<&Path>) -> Result<(), Failure> {
    let (cfg, sink) = settings(common)?;
    let path = input_path(&cfg)?;
    if cfg.mode != Mode::Powerlog && common.mode.is_some() {
        return Err(Failure::Config(
            "aggregate reads --mode powerlog input".into(),
        ));
    }
    let logs = parse_power_log(open(path)?, cfg.dt).map_err(in_file(path))?;
    if logs.is_empty() {
        return Err(in_file(path)(Error::InsufficientData { needed: 1, got: 0 }));
    }
    let energies = logs
        .iter()
        .map(aggregate_energy)
        .collect::<Result<Vec<_>, _>>()
        .map_err(in_file(path))?;
    match accuracy {
        Some(acc_path) => {
            let table = read_accuracy(acc_path)?;
            let rows = logs
                .iter()
                .zip(&energies)
                .map(|(log, &energy_joules)| {
                    let key = (log.model_id.clone(), log.benchmark_id.clone());
                    let accuracy_raw = table
                        .iter()
                        .find(|(k, _)| *k == key)
                        .map(|(_, a)| *a)
                        .ok_or_else(|| {
                            Failure::Input(format!(
                                "{}: no accuracy for {}/{}",
                                acc_path.display(),
                                key.0,
                                key.1
                            ))
                        })?;
                    Ok(Measurement {
                        model_id: key.0,
                        benchmark_id: key.1,
                        accuracy_raw,
                        energy_joules,
                    })
                })
                .collect::<Result<Vec<_>, Failure>>()?;
            sink.write("measurements.csv", |w| write_raw(w, &rows))?;
        }
        None => sink.write("energy.csv", |w| {
            writeln!(w, "model_id,benchmark_id,energy_joules")?;
            for (log, e) in logs.iter().zip(&energies) {
                writeln!(w, "{},{},{e}", log.model_id, log.benchmark_id)?;
            }
            Ok(())
        })?,
    }
    sink.metadata("aggregate", "aggregate", &cfg, &[])
}

type AccuracyTable = Vec<((String, String), f64)>;

fn read_accuracy(path: &Path) -> Result<AccuracyTable, Failure> {
    #[derive(serde::Deserialize)]
    struct Row {
        model_id: String,
        benchmark_id: String,
        accuracy: f64,
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(open(path)?);
    reader
        .deserialize::<Row>()
        .map(|r| {
            let r = r.map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
            Ok(((r.model_id, r.benchmark_id), r.accuracy))
        })
        .collect()
}

#[derive(Serialize)]
struct HarnessSummary<'a> {
    command: &'a str,
    benchmark_id: &'a str,
    method: Method,
    #[serde(flatten)]
    summary: &'a sensitivity::Summary,
}

fn finish_harness(
    sink: &Sink,
    cfg: &Resolved,
    command: &str,
    benchmark: &str,
    reports: &[StabilityReport],
) -> Result<(), Failure> {
    sink.write(&format!("{command}.csv"), |w| {
        report::write_stability(w, reports)
    })?;
    if reports.iter().any(|r| !r.per_model.is_empty()) && sink.to_files() {
        sink.write(&format!("{command}_models.csv"), |w| {
            report::write_model_changes(w, reports)
        })?;
    }
    for r in reports {
        sink.summary(&HarnessSummary {
            command,
            benchmark_id: benchmark,
            method: r.method,
            summary: &r.summary,
        })?;
    }
    sink.metadata(command, command, cfg, &[])
}

fn cmd_sweep(common: &Common) -> Result<(), Failure> {
    let (cfg, sink) = settings(common)?;
    if common.method.is_some_and(|m| m != MethodArg::Oter) {
        return Err(Failure::Config(
            "the hyperparameter sweep applies to --method oter only".into(),
        ));
    }
    if cfg.sweep.is_empty() {
        return Err(Failure::Config("sweep grid is empty".into()));
    }
    let (set, diagnostics) = load_points(&cfg)?;
    echo(&diagnostics);
    let report = sensitivity::hyperparam_sweep(&set.points, &cfg.sweep, &cfg.oter)?;
    finish_harness(&sink, &cfg, "sweep", &set.benchmark_id, &[report])
}

fn cmd_loo(common: &Common, renormalize: bool) -> Result<(), Failure> {
    let (cfg, sink) = settings(common)?;
    let (set, diagnostics) = load_points(&cfg)?;
    echo(&diagnostics);
    let reports = methods(cfg.method)
        .into_iter()
        .map(|m| sensitivity::loo_analysis(&set.points, m, &cfg.oter, renormalize))
        .collect::<Result<Vec<_>, _>>()?;
    finish_harness(&sink, &cfg, "loo", &set.benchmark_id, &reports)
}

fn cmd_noise(
    common: &Common,
    amplitude: Option<f64>,
    trials: Option<usize>,
    additive: bool,
) -> Result<(), Failure> {
    let (mut cfg, sink) = settings(common)?;
    if let Some(a) = amplitude {
        cfg.noise.amplitude = a;
    }
    if let Some(t) = trials {
        cfg.noise.trials = t;
    }
    cfg.noise.additive |= additive;
    if !(0.0..1.0).contains(&cfg.noise.amplitude) || cfg.noise.trials == 0 {
        return Err(Failure::Config(format!(
            "noise needs amplitude in [0, 1) and at least one trial, got {} and {}",
            cfg.noise.amplitude, cfg.noise.trials
        )));
    }
    let dataset = load_dataset(&cfg)?;
    let reports = methods(cfg.method)
        .into_iter()
        .map(|m| sensitivity::noise_robustness(&dataset, m, &cfg.oter, &cfg.noise))
        .collect::<Result<Vec<_>, _>>()?;
    finish_harness(&sink, &cfg, "noise", dataset.benchmark_id(), &reports)
}

fn cmd_sizebias(common: &Common, groups: Option<&Path>) -> Result<(), Failure> {
    let (cfg, sink) = settings(common)?;
    let groups = match groups {
        Some(path) => SizeGroupMap::parse(open(path)?).map_err(in_file(path))?,
        None => SizeGroupMap::fixture(),
    };
    let (set, mut diagnostics) = load_points(&cfg)?;
    let mut rows = Vec::new();
    for m in methods(cfg.method) {
        let (ratings, diag) = sensitivity::rate(&set.points, m, &cfg.oter)?;
        diagnostics.extend(diag);
        let pairs: Vec<(String, u32)> = set
            .points
            .iter()
            .map(|p| p.model_id.clone())
            .zip(ratings)
            .collect();
        let kw = sensitivity::size_bias_test(&pairs, &groups)?;
        diagnostics.extend(kw.diagnostics.iter().cloned());
        rows.push((m.name().to_string(), set.benchmark_id.clone(), kw));
    }
    echo(&diagnostics);
    sink.write("sizebias.csv", |w| report::write_size_bias(w, &rows))?;
    for (method, benchmark, kw) in &rows {
        sink.summary(&json!({
            "command": "sizebias",
            "benchmark_id": benchmark,
            "method": method,
            "h_statistic": kw.h_statistic,
            "dof": kw.dof,
            "p_value": kw.p_value,
        }))?;
    }
    sink.metadata("sizebias", "sizebias", &cfg, &diagnostics)
}

fn cmd_fixture(common: &Common) -> Result<(), Failure> {
    let (cfg, _) = settings(common)?;
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let sink = Sink::new(Some(dir), true)?;
    for b in Benchmark::ALL {
        let set = fixture::points(b);
        sink.write(&format!("table1_{}.csv", b.id().to_lowercase()), |w| {
            writeln!(w, "model_id,benchmark_id,acc_norm,eff_norm")?;
            for p in &set.points {
                writeln!(
                    w,
                    "{},{},{:.2},{:.2}",
                    p.model_id, set.benchmark_id, p.acc, p.eff
                )?;
            }
            Ok(())
        })?;
    }
    sink.write("sizes.csv", |w| {
        writeln!(w, "model_id,size_bucket")?;
        for (model, bucket) in SizeGroupMap::fixture().entries() {
            writeln!(w, "{model},{bucket}")?;
        }
        Ok(())
    })
}
