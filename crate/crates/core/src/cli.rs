//! Command-line front end.
//!
//! Every option can also come from a `--config` file of `key = value`
//! lines whose keys are the long flag names; explicit flags win. The fully
//! resolved settings are printed in that same format before any work starts,
//! so the printout can be saved and replayed as a config file.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::dataset::Dataset;
use crate::error::Error;
use crate::fileio::write_atomic;
use crate::harness::{
    evaluate_mse, label_unbiasedness, make_testset, run_convergence, ConvergenceConfig, Quantity,
    DEFAULT_TEST_SIZE, DEFAULT_TRIALS,
};
use crate::plot::emit_plot;
use crate::problems::{ProblemId, ProblemSpec, DEFAULT_CHEB_DEGREE};
use crate::sampling::RngState;
use crate::training::{train, Mode, TrainConfig, TrainedModel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "paramint", version, about = "Neural surrogates for parametric integrals")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labelled training dataset.
    Gen(GenArgs),
    /// Train a surrogate and write the model file.
    Train(TrainArgs),
    /// Evaluate a model file against a fresh test set.
    Eval(EvalArgs),
    /// Run the MSE-versus-J study for both modes.
    Converge(ConvergeArgs),
    /// Check label and gradient unbiasedness at interior points.
    Proptest(ProptestArgs),
    /// Render a means file as an SVG chart.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct ProblemArgs {
    #[arg(long)]
    pub problem: Option<String>,
    /// Chebyshev degree L (K = L + 1).
    #[arg(long)]
    pub degree: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainingArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    /// Comma-separated hidden-layer widths.
    #[arg(long)]
    pub hidden: Option<String>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Dataset file; generated from `--size` and `--seed` when absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<Mode>,
    /// Differential-loss weight ω (DML mode only; default 1/d).
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub training: TrainingArgs,
    /// Model output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long = "test-size")]
    pub test_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Optional CSV with the MSE figures.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConvergeArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Comma-separated ascending training-set sizes.
    #[arg(long)]
    pub sizes: Option<String>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub training: TrainingArgs,
    #[arg(long = "test-size")]
    pub test_size: Option<usize>,
    /// Worker threads (0 = one per core).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Per-trial table output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-J means output.
    #[arg(long)]
    pub means: Option<PathBuf>,
    /// Cumulative (summed over outputs) means output.
    #[arg(long)]
    pub cumulative: Option<PathBuf>,
    /// SVG chart output.
    #[arg(long)]
    pub plot: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProptestArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub means: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn parse_mode(s: &str) -> std::result::Result<Mode, String> {
    s.parse::<Mode>().map_err(|e| match e {
        Error::Config(m) => m,
        other => other.to_string(),
    })
}

/// Failure of a command: usage problems exit with 2, everything else with 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

/// Parsed `key = value` config file.
#[derive(Debug, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str, allowed: &[&str]) -> CliResult<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return usage(format!("config line {}: expected 'key = value'", i + 1));
            };
            let key = k.trim();
            if !allowed.contains(&key) {
                return usage(format!("config line {}: unknown key '{key}'", i + 1));
            }
            values.insert(key.to_string(), v.trim().to_string());
        }
        Ok(Self { values })
    }

    fn load(path: Option<&Path>, allowed: &[&str]) -> CliResult<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                Self::parse(&text, allowed)
            }
        }
    }
}

/// Merges flags over config values and records the resolved settings.
struct Resolver {
    file: ConfigFile,
    printed: Vec<(String, String)>,
}

impl Resolver {
    fn new(config: Option<&Path>, allowed: &[&str]) -> CliResult<Self> {
        Ok(Self {
            file: ConfigFile::load(config, allowed)?,
            printed: Vec::new(),
        })
    }

    fn lookup<T: FromStr>(&self, key: &str, flag: Option<T>) -> CliResult<Option<T>>
    where
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|e| CliError::Usage(format!("invalid value '{v}' for '{key}': {e}"))),
        }
    }

    fn record(&mut self, key: &str, value: impl Display) {
        self.printed.push((key.to_string(), value.to_string()));
    }

    fn optional<T: FromStr + Display + Clone>(&mut self, key: &str, flag: Option<T>) -> CliResult<Option<T>>
    where
        T::Err: Display,
    {
        let v = self.lookup(key, flag)?;
        if let Some(x) = &v {
            self.record(key, x.clone());
        }
        Ok(v)
    }

    fn or_default<T: FromStr + Display + Clone>(&mut self, key: &str, flag: Option<T>, default: T) -> CliResult<T>
    where
        T::Err: Display,
    {
        let v = self.lookup(key, flag)?.unwrap_or(default);
        self.record(key, v.clone());
        Ok(v)
    }

    fn required<T: FromStr + Display + Clone>(&mut self, key: &str, flag: Option<T>) -> CliResult<T>
    where
        T::Err: Display,
    {
        match self.lookup(key, flag)? {
            Some(v) => {
                self.record(key, v.clone());
                Ok(v)
            }
            None => usage(format!("missing required option --{key}")),
        }
    }

    fn path(&mut self, key: &str, flag: Option<PathBuf>) -> CliResult<Option<PathBuf>> {
        let v = match flag {
            Some(p) => Some(p),
            None => self.file.values.get(key).map(PathBuf::from),
        };
        if let Some(p) = &v {
            self.record(key, p.display());
        }
        Ok(v)
    }

    fn required_path(&mut self, key: &str, flag: Option<PathBuf>) -> CliResult<PathBuf> {
        self.path(key, flag)?
            .map_or_else(|| usage(format!("missing required option --{key}")), Ok)
    }

    fn problem(&mut self, args: ProblemArgs) -> CliResult<ProblemSpec> {
        let id_text: String = self.required("problem", args.problem)?;
        let id = ProblemId::from_str(&id_text).map_err(|e| CliError::Usage(e.to_string()))?;
        let mut spec = ProblemSpec::new(id);
        if id.is_chebyshev() {
            let degree = self.or_default("degree", args.degree, DEFAULT_CHEB_DEGREE)?;
            spec = spec.with_degree(degree).map_err(|e| CliError::Usage(e.to_string()))?;
        } else if self.lookup::<usize>("degree", args.degree)?.is_some() {
            return usage(format!("--degree only applies to Chebyshev problems, not {id}"));
        }
        Ok(spec)
    }

    fn training(&mut self, args: TrainingArgs, base: TrainConfig) -> CliResult<TrainConfig> {
        let epochs = self.or_default("epochs", args.epochs, base.epochs)?;
        let batch = self.or_default("batch", args.batch, base.batch)?;
        let hidden_default = join(&base.hidden);
        let hidden_text = self.or_default("hidden", args.hidden, hidden_default)?;
        let hidden = parse_list(&hidden_text).map_err(|m| CliError::Usage(format!("--hidden: {m}")))?;
        Ok(TrainConfig {
            epochs,
            batch,
            hidden,
            ..base
        })
    }

    fn print(&self, command: &str) {
        println!("# resolved configuration ({command})");
        for (k, v) in &self.printed {
            println!("{k} = {v}");
        }
    }
}

fn join(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn parse_list(s: &str) -> std::result::Result<Vec<usize>, String> {
    let v = s
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|_| format!("'{t}' is not a positive integer")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if v.is_empty() || v.contains(&0) {
        return Err("expected a comma-separated list of positive integers".into());
    }
    Ok(v)
}

const GEN_KEYS: &[&str] = &["problem", "degree", "size", "seed", "out"];
const TRAIN_KEYS: &[&str] = &[
    "problem", "degree", "data", "size", "mode", "omega", "seed", "epochs", "batch", "hidden", "out",
];
const EVAL_KEYS: &[&str] = &["model", "test-size", "seed", "out"];
const CONVERGE_KEYS: &[&str] = &[
    "problem",
    "degree",
    "sizes",
    "trials",
    "seed",
    "epochs",
    "batch",
    "hidden",
    "test-size",
    "jobs",
    "out",
    "means",
    "cumulative",
    "plot",
];
const PROPTEST_KEYS: &[&str] = &["problem", "degree", "points", "samples", "seed"];
const PLOT_KEYS: &[&str] = &["means", "out"];

fn train_dataset_stream(size: usize) -> crate::sampling::StreamId {
    crate::harness::train_stream(size, 0, Mode::Ann)
}

fn cmd_gen(args: GenArgs) -> CliResult<()> {
    let mut r = Resolver::new(args.config.as_deref(), GEN_KEYS)?;
    let problem = r.problem(args.problem)?;
    let size: usize = r.required("size", args.size)?;
    let seed = r.or_default("seed", args.seed, 0u64)?;
    let out = r.required_path("out", args.out)?;
    r.print("gen");
    let mut rng = RngState::new(seed, train_dataset_stream(size));
    let data = Dataset::generate(&problem, size, &mut rng)?;
    data.write(&out)?;
    println!("wrote {} samples to {}", data.len(), out.display());
    Ok(())
}

fn cmd_train(args: TrainArgs) -> CliResult<()> {
    let mut r = Resolver::new(args.config.as_deref(), TRAIN_KEYS)?;
    let problem = r.problem(args.problem)?;
    let data_path = r.path("data", args.data)?;
    let size = if data_path.is_none() {
        Some(r.required::<usize>("size", args.size)?)
    } else {
        None
    };
    let mode = r.or_default("mode", args.mode, Mode::Dml)?;
    let omega = r.optional("omega", args.omega)?;
    let seed = r.or_default("seed", args.seed, 0u64)?;
    let config = r.training(
        args.training,
        TrainConfig {
            mode,
            omega,
            seed,
            ..TrainConfig::default()
        },
    )?;
    let out = r.required_path("out", args.out)?;
    r.print("train");
    let data = match (&data_path, size) {
        (Some(p), _) => Dataset::read(p)?,
        (None, Some(n)) => Dataset::generate(&problem, n, &mut RngState::new(seed, train_dataset_stream(n)))?,
        (None, None) => unreachable!(),
    };
    let model = train(&problem, &data, &config)?;
    model.write(&out)?;
    println!(
        "trained on {} samples, {} steps, final batch loss {:.6e}; model written to {}",
        data.len(),
        model.loss_trace.len(),
        model.loss_trace.last().copied().unwrap_or(f64::NAN),
        out.display()
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> CliResult<()> {
    let mut r = Resolver::new(args.config.as_deref(), EVAL_KEYS)?;
    let model_path = r.required_path("model", args.model)?;
    let test_size = r.or_default("test-size", args.test_size, DEFAULT_TEST_SIZE)?;
    let seed = r.or_default("seed", args.seed, 0u64)?;
    let out = r.path("out", args.out)?;
    r.print("eval");
    let model = TrainedModel::read(&model_path)?;
    let test = make_testset(&model.problem, test_size, seed)?;
    let report = evaluate_mse(&model, &test)?;
    println!("mse = {:.6e}", report.mse);
    println!("cumulative_mse = {:.6e}", report.cumulative);
    if let Some(p) = out {
        let text = format!(
            "problem,mode,test_size,mse,cumulative_mse\n{},{},{},{:.16e},{:.16e}\n",
            model.problem.id(),
            model.mode,
            test_size,
            report.mse,
            report.cumulative
        );
        write_atomic(&p, text.as_bytes())?;
    }
    Ok(())
}

fn cmd_converge(args: ConvergeArgs) -> CliResult<()> {
    let mut r = Resolver::new(args.config.as_deref(), CONVERGE_KEYS)?;
    let problem = r.problem(args.problem)?;
    let defaults = ConvergenceConfig::default();
    let sizes_text = r.or_default("sizes", args.sizes, join(&defaults.sizes))?;
    let sizes = parse_list(&sizes_text).map_err(|m| CliError::Usage(format!("--sizes: {m}")))?;
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return usage("--sizes must be strictly ascending");
    }
    let trials = r.or_default("trials", args.trials, DEFAULT_TRIALS)?;
    if trials == 0 {
        return usage("--trials must be >= 1");
    }
    let seed = r.or_default("seed", args.seed, 0u64)?;
    let train = r.training(args.training, TrainConfig::default())?;
    let test_size = r.or_default("test-size", args.test_size, DEFAULT_TEST_SIZE)?;
    let jobs = r.or_default("jobs", args.jobs, 1usize)?;
    let out = r.required_path("out", args.out)?;
    let means = r.path("means", args.means)?;
    let cumulative = r.path("cumulative", args.cumulative)?;
    let plot = r.path("plot", args.plot)?;
    r.print("converge");
    let config = ConvergenceConfig {
        sizes,
        trials,
        base_seed: seed,
        test_size,
        modes: Mode::ALL.to_vec(),
        jobs,
        train,
    };
    let table = run_convergence(&problem, &config)?;
    for row in &table.rows {
        if let Err(e) = &row.outcome {
            eprintln!("{} J={} trial={} failed: {e}", row.mode, row.size, row.trial);
        }
    }
    write_atomic(&out, table.table_csv().as_bytes())?;
    let means_text = table.means_csv();
    if let Some(p) = &means {
        write_atomic(p, means_text.as_bytes())?;
    }
    if let Some(p) = &cumulative {
        write_atomic(p, table.cumulative_csv().as_bytes())?;
    }
    if let Some(p) = &plot {
        write_atomic(p, emit_plot(&means_text)?.as_bytes())?;
    }
    print!("{means_text}");
    for mode in Mode::ALL {
        if let Some(s) = table.slope(mode) {
            println!("slope[{mode}] = {s:.4}");
        }
    }
    Ok(())
}

fn cmd_proptest(args: ProptestArgs) -> CliResult<()> {
    let mut r = Resolver::new(args.config.as_deref(), PROPTEST_KEYS)?;
    let problem = r.problem(args.problem)?;
    let points = r.or_default("points", args.points, 5usize)?;
    let samples = r.or_default("samples", args.samples, 1_000_000usize)?;
    if samples < 2 {
        return usage("--samples must be >= 2");
    }
    let seed = r.or_default("seed", args.seed, 0u64)?;
    r.print("proptest");
    let checks = label_unbiasedness(&problem, points, samples, seed)?;
    let mut failed = 0;
    for c in &checks {
        let what = match c.quantity {
            Quantity::Label(k) => format!("y_{k}"),
            Quantity::Gradient(k, i) => format!("g_{k}_{i}"),
        };
        let status = if c.passed() { "PASS" } else { "FAIL" };
        if !c.passed() {
            failed += 1;
        }
        println!(
            "{status} {what} at {:?}: mean {:.6e} truth {:.6e} se {:.2e} tol {:.2e}",
            c.point, c.mean, c.truth, c.std_error, c.tolerance
        );
    }
    println!("{} checks, {failed} failed", checks.len());
    if failed > 0 {
        return Err(CliError::Runtime(Error::Config(format!("{failed} unbiasedness checks failed"))));
    }
    Ok(())
}

fn cmd_plot(args: PlotArgs) -> CliResult<()> {
    let mut r = Resolver::new(args.config.as_deref(), PLOT_KEYS)?;
    let means = r.required_path("means", args.means)?;
    let out = r.required_path("out", args.out)?;
    r.print("plot");
    let text = std::fs::read_to_string(&means).map_err(Error::from)?;
    let svg = emit_plot(&text)?;
    write_atomic(&out, svg.as_bytes())?;
    println!("wrote {}", out.display());
    Ok(())
}

pub fn execute(command: Command) -> CliResult<()> {
    match command {
        Command::Gen(a) => cmd_gen(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Converge(a) => cmd_converge(a),
        Command::Proptest(a) => cmd_proptest(a),
        Command::Plot(a) => cmd_plot(a),
    }
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            EXIT_USAGE
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> std::result::Result<Cli, clap::Error> {
        Cli::try_parse_from(std::iter::once("paramint").chain(args.iter().copied()))
    }

    #[test]
    fn gen_command_parses() {
        let cli = parse(&["gen", "--problem", "chi2_cdf_2d", "--size", "65536", "--seed", "7", "--out", "d.csv"]).unwrap();
        match cli.command {
            Command::Gen(g) => {
                assert_eq!(g.size, Some(65536));
                assert_eq!(g.seed, Some(7));
                assert_eq!(g.problem.problem.as_deref(), Some("chi2_cdf_2d"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_mode_lists_valid_modes() {
        let err = parse(&["train", "--mode", "xyz"]).unwrap_err().to_string();
        assert!(err.contains("ann") && err.contains("dml"), "{err}");
    }

    #[test]
    fn unknown_flags_rejected() {
        assert!(parse(&["gen", "--bogus", "1"]).is_err());
        assert!(parse(&["plot", "--size", "3"]).is_err());
    }

    #[test]
    fn missing_problem_is_usage_error() {
        assert_eq!(run(["paramint", "train", "--mode", "dml"]), EXIT_USAGE);
        assert_eq!(run(["paramint", "train", "--mode", "xyz"]), EXIT_USAGE);
    }

    #[test]
    fn config_file_parsing() {
        let c = ConfigFile::parse("# comment\nproblem = cos_toy\n\nsize=12\n", GEN_KEYS).unwrap();
        assert_eq!(c.values["problem"], "cos_toy");
        assert_eq!(c.values["size"], "12");
        assert!(matches!(ConfigFile::parse("nonsense\n", GEN_KEYS), Err(CliError::Usage(_))));
        assert!(matches!(ConfigFile::parse("jobs = 2\n", GEN_KEYS), Err(CliError::Usage(_))));
    }

    #[test]
    fn flags_override_config_values() {
        let mut r = Resolver {
            file: ConfigFile::parse("seed = 5\nsize = 10\n", GEN_KEYS).unwrap(),
            printed: Vec::new(),
        };
        assert_eq!(r.or_default("seed", Some(9u64), 0).unwrap(), 9);
        assert_eq!(r.or_default("size", None::<usize>, 0).unwrap(), 10);
        assert_eq!(r.or_default("out", None::<String>, "x".into()).unwrap(), "x");
        assert_eq!(r.printed[0], ("seed".to_string(), "9".to_string()));
    }

    #[test]
    fn list_parsing() {
        assert_eq!(parse_list("1024, 2048").unwrap(), vec![1024, 2048]);
        assert!(parse_list("1,0").is_err());
        assert!(parse_list("a").is_err());
    }
}
