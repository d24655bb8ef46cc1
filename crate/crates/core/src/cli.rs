//! Command-line front end: `explain`, `validate` and `bench`.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{run_bench, BenchConfig, BenchReport};
use crate::cube::ValueFunctional;
use crate::data::Dataset;
use crate::engine::{explain_with, AttributionResult, ExplainOptions, ExplainRequest, Method};
use crate::error::{Error, Result};
use crate::model::{load_canonical, load_lightgbm_text, EnsembleModel};
use crate::patterns::{Mode, DEFAULT_CHUNK_ROWS, DEFAULT_DEPTH_CAP};
use crate::validate::{run_validate, ValidateConfig, ValidateReport, MAX_VALIDATE_DEPTH};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DEVIATION: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

pub const LOG_ENV: &str = "TREESHAP_HD_LOG";

#[derive(Debug, Parser)]
#[command(
    name = "treeshap-hd",
    version,
    about = "Exact tree-ensemble attributions for deep trees"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Explain consumer rows and write one CSV line per row.
    Explain(ExplainArgs),
    /// Compare the engine with brute-force oracles on seeded random models.
    Validate(ValidateArgs),
    /// Time synthetic deep trees per depth and method.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelFormat {
    Canonical,
    #[value(name = "lightgbm-text", alias = "lightgbm_text")]
    LightgbmText,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Background,
    PathDependent,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Background => Mode::Background,
            ModeArg::PathDependent => Mode::PathDependent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ValuesArg {
    Shapley,
    Banzhaf,
    Interaction,
}

impl From<ValuesArg> for ValueFunctional {
    fn from(v: ValuesArg) -> Self {
        match v {
            ValuesArg::Shapley => ValueFunctional::Shapley,
            ValuesArg::Banzhaf => ValueFunctional::Banzhaf,
            ValuesArg::Interaction => ValueFunctional::ShapleyInteraction,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Hd,
    Dense,
    Both,
}

/// Engine knobs shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct EngineArgs {
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub threads: u32,
    /// Bytes; accepts K, M and G suffixes (powers of 1024).
    #[arg(long, value_parser = parse_bytes, default_value = "4G")]
    pub memory_budget: u64,
    #[arg(long, default_value_t = DEFAULT_DEPTH_CAP)]
    pub depth_cap: usize,
    #[arg(long, default_value_t = DEFAULT_CHUNK_ROWS)]
    pub chunk_rows: usize,
    #[arg(long, hide = true)]
    pub corrupt_cache: bool,
}

impl EngineArgs {
    fn options(&self) -> ExplainOptions {
        ExplainOptions {
            threads: self.threads as usize,
            memory_budget_bytes: self.memory_budget,
            depth_cap: self.depth_cap,
            chunk_rows: self.chunk_rows,
            corrupt_cache: self.corrupt_cache,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum, default_value = "canonical")]
    pub model_format: ModelFormat,
    /// Consumer rows (CSV with a header).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub background: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "background")]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value = "shapley")]
    pub values: ValuesArg,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Accepted for symmetry with the other commands; explain is deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub engine: EngineArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 6)]
    pub max_depth: usize,
    /// Restrict to one functional; all three by default.
    #[arg(long, value_enum)]
    pub values: Option<ValuesArg>,
    /// Skip the dense-baseline comparison.
    #[arg(long)]
    pub no_dense: bool,
    /// Write the report as JSON.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub engine: EngineArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Comma-separated depths.
    #[arg(long, value_delimiter = ',', default_value = "6,8,10")]
    pub depths: Vec<usize>,
    #[arg(long, value_enum, default_value = "both")]
    pub method: MethodArg,
    #[arg(long, value_enum, default_value = "background")]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value = "shapley")]
    pub values: ValuesArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    #[arg(long, default_value_t = 16)]
    pub rows: usize,
    /// Trees per synthetic model.
    #[arg(long, default_value_t = 8)]
    pub trees: usize,
    /// JSON report path; the text summary always goes to standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub engine: EngineArgs,
}

/// Parse `1024`, `64K`, `512M`, `4G` (binary multiples).
pub fn parse_bytes(s: &str) -> std::result::Result<u64, String> {
    let s = s.trim();
    let (digits, mult) = match s.chars().last().map(|c| c.to_ascii_uppercase()) {
        Some('K') => (&s[..s.len() - 1], 1u64 << 10),
        Some('M') => (&s[..s.len() - 1], 1 << 20),
        Some('G') => (&s[..s.len() - 1], 1 << 30),
        _ => (s, 1),
    };
    digits
        .trim()
        .parse::<u64>()
        .ok()
        .and_then(|n| n.checked_mul(mult))
        .ok_or_else(|| format!("invalid byte size {s:?}"))
}

/// Everything an explain run needs.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model_path: PathBuf,
    pub model_format: ModelFormat,
    pub consumer_path: PathBuf,
    pub background_path: Option<PathBuf>,
    pub mode: Mode,
    pub functional: ValueFunctional,
    pub output_path: Option<PathBuf>,
    pub options: ExplainOptions,
}

impl From<&ExplainArgs> for RunConfig {
    fn from(a: &ExplainArgs) -> Self {
        Self {
            model_path: a.model.clone(),
            model_format: a.model_format,
            consumer_path: a.data.clone(),
            background_path: a.background.clone(),
            mode: a.mode.into(),
            functional: a.values.into(),
            output_path: a.output.clone(),
            options: a.engine.options(),
        }
    }
}

pub fn load_model(path: &Path, format: ModelFormat) -> Result<EnsembleModel> {
    match format {
        ModelFormat::Canonical => load_canonical(path),
        ModelFormat::LightgbmText => load_lightgbm_text(path),
    }
}

fn check_header(model: &EnsembleModel, data: &Dataset, path: &Path) -> Result<()> {
    if let (Some(expected), Some(found)) = (model.feature_names(), data.names()) {
        if expected != found {
            return Err(Error::Validation(format!(
                "{}: header {found:?} does not match model features {expected:?}",
                path.display()
            )));
        }
    }
    Ok(())
}

/// Load inputs and run the engine.
pub fn cmd_explain(config: &RunConfig) -> Result<(EnsembleModel, Dataset, AttributionResult)> {
    if config.options.threads == 0 {
        return Err(Error::Validation("--threads must be at least 1".into()));
    }
    let model = load_model(&config.model_path, config.model_format)?;
    let consumers = Dataset::from_csv(&config.consumer_path)?;
    check_header(&model, &consumers, &config.consumer_path)?;
    let background = match (&config.background_path, config.mode) {
        (Some(path), Mode::Background) => {
            let bg = Dataset::from_csv(path)?;
            check_header(&model, &bg, path)?;
            Some(bg)
        }
        (None, Mode::Background) => {
            return Err(Error::Validation(
                "background mode needs --background".into(),
            ))
        }
        (_, Mode::PathDependent) => None,
    };
    let result = explain_with(
        &ExplainRequest {
            model: &model,
            consumers: &consumers,
            background: background.as_ref(),
            mode: config.mode,
            functional: config.functional,
        },
        &config.options,
    )?;
    Ok((model, consumers, result))
}

/// Column names of the output CSV.
pub fn output_header(result: &AttributionResult, names: &[String]) -> Vec<String> {
    let mut header = vec!["row_id".to_owned(), "base_value".to_owned()];
    match result.functional {
        ValueFunctional::ShapleyInteraction => {
            for i in 0..result.n_features {
                for j in 0..result.n_features {
                    header.push(format!("phi_{i}_{j}"));
                }
            }
        }
        _ => header.extend(names.iter().cloned()),
    }
    header
}

/// Write results as CSV with 17 significant digits per value.
pub fn write_csv(result: &AttributionResult, names: &[String], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io_err = |e: csv::Error| Error::Invalid(format!("writing output: {e}"));
    w.write_record(output_header(result, names))
        .map_err(io_err)?;
    let base = format!("{:.16e}", result.base_value);
    for i in 0..result.n_rows {
        let mut record = vec![i.to_string(), base.clone()];
        record.extend(result.row(i).iter().map(|v| format!("{v:.16e}")));
        w.write_record(&record).map_err(io_err)?;
    }
    w.flush()
        .map_err(|e| Error::Invalid(format!("writing output: {e}")))?;
    Ok(())
}

fn feature_names(model: &EnsembleModel, data: &Dataset) -> Vec<String> {
    model
        .feature_names()
        .or(data.names())
        .map(<[String]>::to_vec)
        .unwrap_or_else(|| (0..model.n_features()).map(|f| format!("f{f}")).collect())
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Error::io(p, e))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn cmd_validate(args: &ValidateArgs) -> Result<ValidateReport> {
    if args.trials == 0 {
        return Err(Error::Validation("--trials 0 validates nothing".into()));
    }
    if args.max_depth > MAX_VALIDATE_DEPTH {
        return Err(Error::Validation(format!(
            "--max-depth must be at most {MAX_VALIDATE_DEPTH}"
        )));
    }
    let mut config = ValidateConfig {
        trials: args.trials,
        seed: args.seed,
        max_depth: args.max_depth,
        dense: !args.no_dense,
        options: args.engine.options(),
        ..ValidateConfig::default()
    };
    if let Some(v) = args.values {
        config.functionals = vec![v.into()];
    }
    run_validate(&config)
}

pub fn cmd_bench(args: &BenchArgs) -> Result<BenchReport> {
    let methods = match args.method {
        MethodArg::Hd => vec![Method::Hd],
        MethodArg::Dense => vec![Method::DenseBaseline],
        MethodArg::Both => vec![Method::Hd, Method::DenseBaseline],
    };
    run_bench(&BenchConfig {
        depths: args.depths.clone(),
        methods,
        mode: args.mode.into(),
        functional: args.values.into(),
        seed: args.seed,
        n_trees: args.trees,
        n_consumers: args.rows,
        n_background: args.rows,
        repeats: args.repeats,
        options: args.engine.options(),
    })
}

fn exit_code(e: &Error) -> i32 {
    if e.is_budget() {
        EXIT_BUDGET
    } else {
        EXIT_INVALID
    }
}

fn fail(e: &Error) -> i32 {
    eprintln!("error: {}", e.to_string().replace('\n', " "));
    exit_code(e)
}

pub fn init_logging() {
    let env = env_logger::Env::new().filter_or(LOG_ENV, "warn");
    let _ = env_logger::Builder::from_env(env).try_init();
}

/// Parse arguments and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
        }
    };
    init_logging();
    match cli.command {
        Command::Explain(args) => {
            let config = RunConfig::from(&args);
            let written = cmd_explain(&config).and_then(|(model, data, result)| {
                let names = feature_names(&model, &data);
                let out = open_output(config.output_path.as_deref())?;
                write_csv(&result, &names, out)
            });
            match written {
                Ok(()) => EXIT_OK,
                Err(e) => fail(&e),
            }
        }
        Command::Validate(args) => match cmd_validate(&args) {
            Ok(report) => {
                println!("{report}");
                if let Some(path) = &args.output {
                    let json = serde_json::to_string_pretty(&report).expect("report serializes");
                    if let Err(e) = std::fs::write(path, json) {
                        return fail(&Error::io(path, e));
                    }
                }
                if report.passed() {
                    EXIT_OK
                } else {
                    if let Some(seed) = report.failing_seeds.first() {
                        eprintln!("validation failed; rerun with --seed {seed} --trials 1");
                    }
                    EXIT_DEVIATION
                }
            }
            Err(e) => fail(&e),
        },
        Command::Bench(args) => match cmd_bench(&args) {
            Ok(report) => {
                print!("{}", report.summary());
                if let Some(path) = &args.output {
                    if let Err(e) = std::fs::write(path, report.to_json()) {
                        return fail(&Error::io(path, e));
                    }
                }
                EXIT_OK
            }
            Err(e) => fail(&e),
        },
    }
}
