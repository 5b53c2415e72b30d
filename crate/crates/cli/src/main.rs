//! `pd-infer`: sampling, estimation, testing and classification under
//! partition exchangeability.
//!
//! Exit codes: 0 success (warnings allowed), 1 usage error, 2 data or parse
//! error, 3 numeric error where the requested operation is undefined.

mod manifest;

use std::fmt;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use pd_infer::classify::{classify_marginal, classify_simultaneous_with, ScoreRule, SimultaneousOptions, SweepOrder};
use pd_infer::experiment::{run_convergence_experiment, ExperimentSpec, DEFAULT_MEMORY_CAP, DEFAULT_POOL_SIZE};
use pd_infer::{
    fit_psi, lm_test, lr_test, read_dataset, sample_labeled_dataset, sample_sequence, train, write_dataset, Dataset,
    Error, Estimate, LabeledRecord, Model, Partition, Psi, Report, UrnConfig,
};

const VERSION: &str = env!("CARGO_PKG_VERSION");
const THREADS_VAR: &str = "PD_INFER_THREADS";

#[derive(Debug, Parser)]
#[command(name = "pd-infer", version, about = "Inference under partition exchangeability")]
#[command(after_help = "Any subcommand also accepts --manifest <FILE> with 'key = value' lines; \
                        flags on the command line take precedence.\n\
                        PD_INFER_THREADS sets the number of worker threads.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a dataset from the urn scheme (labeled when several --psi are given)
    Sample(SampleArgs),
    /// Fit the dispersal parameter
    Mle(MleArgs),
    /// Score test of a given psi or likelihood ratio test of a common psi
    Test(TestArgs),
    /// Classify an unlabeled test set against labeled training data
    Classify(ClassifyArgs),
    /// Convergence study of the two classifiers over growing training sets
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
struct SampleArgs {
    /// Dispersal parameter; one value per class, comma separated
    #[arg(long, required = true, value_delimiter = ',')]
    psi: Vec<f64>,
    /// Sequence length (per class when labeled)
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output if omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MleArgs {
    #[arg(long)]
    input: PathBuf,
    /// Fit each class of a labeled file separately
    #[arg(long)]
    per_class: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TestMode {
    Lm,
    Lrt,
}

#[derive(Debug, Args)]
struct TestArgs {
    #[arg(long, value_enum)]
    mode: TestMode,
    /// Hypothesised psi (score test only)
    #[arg(long)]
    psi0: Option<f64>,
    /// Sample files. Each class of a labeled file is a separate sample.
    #[arg(long, required = true, num_args = 1.., value_delimiter = ',')]
    input: Vec<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ClassifyMode {
    Marginal,
    Simultaneous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RuleArg {
    AsPrinted,
    ClassTotal,
}

impl From<RuleArg> for ScoreRule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::AsPrinted => ScoreRule::AsPrinted,
            RuleArg::ClassTotal => ScoreRule::ClassTotal,
        }
    }
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Denominator of the simultaneous factor; class-total is experimental
    #[arg(long, value_enum, default_value_t = RuleArg::AsPrinted)]
    rule: RuleArg,
    /// Sweep test items in a fresh random order each pass
    #[arg(long)]
    shuffle_seed: Option<u64>,
    /// Extra shuffled-order runs; the best final score is kept
    #[arg(long, default_value_t = 0)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    restart_seed: u64,
    #[arg(long, default_value_t = 100)]
    max_sweeps: usize,
}

impl SweepArgs {
    fn options(&self) -> SimultaneousOptions {
        SimultaneousOptions {
            order: match self.shuffle_seed {
                Some(seed) => SweepOrder::Shuffled { seed },
                None => SweepOrder::Input,
            },
            max_sweeps: self.max_sweeps,
            restarts: self.restarts,
            restart_seed: self.restart_seed,
            rule: self.rule.into(),
        }
    }
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    #[arg(long, value_enum)]
    mode: ClassifyMode,
    /// Labeled training file with at least 2 classes
    #[arg(long)]
    train: PathBuf,
    /// Test file; labels, if present, are ignored unless scoring
    #[arg(long)]
    test: PathBuf,
    /// Result file; standard output if omitted
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report the item-wise 0-1 error against the labels of the test file
    #[arg(long)]
    score_against_truth: bool,
    #[command(flatten)]
    sweep: SweepArgs,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// One psi per class, comma separated
    #[arg(long, required = true, value_delimiter = ',')]
    psi: Vec<f64>,
    /// Total training sizes, strictly increasing, comma separated
    #[arg(long, required = true, value_delimiter = ',')]
    training_sizes: Vec<usize>,
    /// Total test size
    #[arg(long, default_value_t = 2000)]
    test_size: usize,
    #[arg(long, default_value_t = 10)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Total training pool drawn per replicate
    #[arg(long, default_value_t = DEFAULT_POOL_SIZE)]
    pool_size: usize,
    /// Refuse runs whose estimated memory exceeds this many MiB
    #[arg(long, default_value_t = DEFAULT_MEMORY_CAP >> 20)]
    memory_cap_mb: u64,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    sweep: SweepArgs,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    fn in_file(path: &Path, err: Error) -> Self {
        match Self::from(err) {
            CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
            other => other,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numeric(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        let msg = err.to_string();
        match err {
            Error::InvalidPsi(_) | Error::InvalidExperiment(_) | Error::ResourceLimit { .. } => CliError::Usage(msg),
            Error::ZeroInformation | Error::DegenerateSample { .. } | Error::Domain(_) | Error::Convergence(_) => {
                CliError::Numeric(msg)
            }
            _ => CliError::Data(msg),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(err: io::Error) -> Self {
        CliError::Data(err.to_string())
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn warn(msg: &str) {
    eprintln!("pd-infer: warning: {msg}");
}

fn load(path: &Path) -> CliResult<Dataset> {
    let file = File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    read_dataset(BufReader::new(file)).map_err(|e| CliError::in_file(path, e))
}

fn output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn psi_of(x: f64) -> CliResult<Psi> {
    Psi::new(x).map_err(CliError::from)
}

fn num(x: f64) -> String {
    if x != 0.0 && !(1e-4..1e7).contains(&x.abs()) {
        format!("{x:e}")
    } else {
        format!("{x:.6}")
    }
}

/// Named samples from a dataset: the whole file, or one per class.
fn samples(path: &Path, data: &Dataset, split_classes: bool) -> CliResult<Vec<(String, Partition)>> {
    let name = path.display().to_string();
    let tables = if split_classes { data.class_counts() } else { vec![data.values().into_iter().collect()] };
    let labeled = split_classes && matches!(data, Dataset::Labeled(_));
    tables
        .iter()
        .enumerate()
        .filter(|(_, t)| !labeled || !t.is_empty())
        .map(|(c, t)| {
            let label = if labeled { format!("{name}#class{c}") } else { name.clone() };
            t.partition().map(|p| (label, p)).map_err(|e| CliError::in_file(path, e))
        })
        .collect()
}

fn cmd_sample(args: &SampleArgs, invocation: &str) -> CliResult {
    if args.n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let psis = args.psi.iter().map(|&p| psi_of(p)).collect::<CliResult<Vec<_>>>()?;
    let data = if psis.len() == 1 {
        Dataset::Unlabeled(sample_sequence(&UrnConfig::new(psis[0], args.n, args.seed)?).values)
    } else {
        Dataset::Labeled(sample_labeled_dataset(&psis, args.n, args.seed)?)
    };
    let extra = [("version", VERSION.to_string()), ("seed", args.seed.to_string()), ("args", invocation.to_string())];
    write_dataset(output(args.out.as_deref())?, &data, &extra)?;

    let mut report = if args.out.is_some() { Box::new(io::stdout().lock()) as Box<dyn Write> } else { Box::new(io::stderr().lock()) };
    for (c, table) in data.class_counts().iter().enumerate() {
        let rho = table.partition()?;
        writeln!(report, "class={c} n={} k_obs={} partition={}", rho.n(), rho.k_obs(), rho_summary(&rho))?;
    }
    Ok(())
}

fn rho_summary(rho: &Partition) -> String {
    rho.iter().map(|(t, c)| format!("{t}:{c}")).collect::<Vec<_>>().join(",")
}

fn cmd_mle(args: &MleArgs) -> CliResult {
    let data = load(&args.input)?;
    if args.per_class && !matches!(data, Dataset::Labeled(_)) {
        return Err(CliError::Usage("--per-class needs a labeled file".into()));
    }
    if data.is_empty() {
        return Err(CliError::Data(format!("{}: empty sample", args.input.display())));
    }
    let mut out = io::stdout().lock();
    for (i, (name, rho)) in samples(&args.input, &data, args.per_class)?.iter().enumerate() {
        let est: Estimate = fit_psi(rho);
        if est.status.is_degenerate() {
            warn(&format!("{name}: {} fit, psi_hat is the bracket end", est.status));
        }
        writeln!(
            out,
            "sample={i} source={name} psi_hat={} k_obs={} n={} residual={:e} iterations={} status={}",
            num(est.psi_hat),
            est.k_obs,
            est.n,
            est.residual,
            est.iterations,
            est.status
        )?;
    }
    Ok(())
}

fn write_report(out: &mut impl Write, report: &Report) -> io::Result<()> {
    writeln!(
        out,
        "method={} statistic={} df={} p_value={}",
        report.method,
        num(report.statistic),
        report.df,
        num(report.p_value)
    )?;
    if let Some(per) = &report.per_sample_psi {
        for (i, e) in per.iter().enumerate() {
            writeln!(out, "psi_hat[{i}]={} k_obs={} n={}", num(e.psi_hat), e.k_obs, e.n)?;
        }
    }
    if let Some(e) = &report.pooled_psi {
        writeln!(out, "psi_pooled={} k_obs={} n={}", num(e.psi_hat), e.k_obs, e.n)?;
    }
    Ok(())
}

fn cmd_test(args: &TestArgs) -> CliResult {
    let mut all = Vec::new();
    for path in &args.input {
        let data = load(path)?;
        all.extend(samples(path, &data, matches!(data, Dataset::Labeled(_)))?);
    }
    let report = match args.mode {
        TestMode::Lm => {
            let psi0 = args.psi0.ok_or_else(|| CliError::Usage("--mode lm needs --psi0".into()))?;
            if all.len() != 1 {
                return Err(CliError::Usage(format!("--mode lm needs exactly one sample, got {}", all.len())));
            }
            lm_test(&all[0].1, psi_of(psi0)?)?
        }
        TestMode::Lrt => {
            if args.psi0.is_some() {
                return Err(CliError::Usage("--psi0 only applies to --mode lm".into()));
            }
            if all.len() < 2 {
                return Err(CliError::Usage(format!("--mode lrt needs at least 2 samples, got {}", all.len())));
            }
            let parts: Vec<Partition> = all.iter().map(|(_, p)| p.clone()).collect();
            lr_test(&parts).map_err(|e| match e {
                Error::DegenerateSample { index: Some(i) } => {
                    CliError::Numeric(format!("{e} [{}]", all[i].0))
                }
                other => other.into(),
            })?
        }
    };
    let mut out = io::stdout().lock();
    for (i, (name, _)) in all.iter().enumerate() {
        writeln!(out, "sample[{i}]={name}")?;
    }
    write_report(&mut out, &report)?;
    Ok(())
}

fn training_model(path: &Path) -> CliResult<Model> {
    let data = load(path)?;
    let records: Vec<LabeledRecord> = match data {
        Dataset::Labeled(r) => r,
        Dataset::Unlabeled(_) => return Err(CliError::Data(format!("{}: training data must be labeled", path.display()))),
    };
    let model: Model = train(&records).map_err(|e| CliError::in_file(path, e))?;
    for w in model.warnings() {
        warn(&w);
    }
    Ok(model)
}

fn cmd_classify(args: &ClassifyArgs, invocation: &str) -> CliResult {
    let model = training_model(&args.train)?;
    let test = load(&args.test)?;
    let truth = match (args.score_against_truth, test.labels()) {
        (true, None) => return Err(CliError::Usage("--score-against-truth needs a labeled test file".into())),
        (true, Some(t)) => Some(t),
        (false, _) => None,
    };
    let values = test.values();
    if values.is_empty() {
        return Err(CliError::Data(format!("{}: empty sample", args.test.display())));
    }
    let (mode, result) = match args.mode {
        ClassifyMode::Marginal => ("marginal", classify_marginal(&model, &values)?),
        ClassifyMode::Simultaneous => ("simultaneous", classify_simultaneous_with(&model, &values, &args.sweep.options())?),
    };
    if !result.converged {
        warn(&format!("no fixed point after {} sweeps", result.sweeps));
    }

    let mut out = output(args.out.as_deref())?;
    writeln!(out, "# pd-infer {VERSION} classify mode={mode}")?;
    writeln!(out, "# args: {invocation}")?;
    let psis: Vec<String> = model.classes().iter().map(|c| format!("{}:{}", c.class_id, num(c.psi()))).collect();
    writeln!(out, "# psi_hat {}", psis.join(" "))?;
    writeln!(out, "# index\tclass\tlog_score")?;
    for (i, (&c, &l)) in result.labeling.as_slice().iter().zip(&result.per_item_log).enumerate() {
        writeln!(out, "{i}\t{c}\t{l:.10}")?;
    }
    writeln!(out, "# total_log_score={:.10}", result.log_score)?;
    writeln!(out, "# sweeps={} converged={}", result.sweeps, result.converged)?;
    if let Some(truth) = &truth {
        let err = result.labeling.error_rate(truth);
        writeln!(out, "# error_rate={err:.6}")?;
        if args.out.is_some() {
            println!("error_rate={err:.6}");
        }
    }
    out.flush()?;
    Ok(())
}

fn cmd_experiment(args: &ExperimentArgs, invocation: &str) -> CliResult {
    let spec = ExperimentSpec {
        psis: args.psi.clone(),
        training_sizes: args.training_sizes.clone(),
        test_size: args.test_size,
        replicates: args.replicates,
        master_seed: args.seed,
        pool_size: args.pool_size,
        memory_cap: args.memory_cap_mb.saturating_mul(1 << 20),
        options: args.sweep.options(),
    };
    let report = run_convergence_experiment(&spec)?;
    let header = vec![
        format!("pd-infer {VERSION} convergence experiment"),
        format!("args: {invocation}"),
        format!(
            "psi={} training_sizes={} test_size={} replicates={} seed={} pool_size={} rule={}",
            join(&spec.psis),
            join(&spec.training_sizes),
            spec.test_size,
            spec.replicates,
            spec.master_seed,
            spec.pool_size,
            spec.options.rule
        ),
        "replicate r uses seed derive_seed(seed, r); class c trains on urn derive_seed(rep, 2c), tests on derive_seed(rep, 2c+1)".into(),
    ];
    report.write_to(&args.out, &header)?;
    let mut out = io::stdout().lock();
    writeln!(out, "m\terr_marginal\terr_simultaneous\tdisagreement")?;
    for r in &report.rows {
        writeln!(out, "{}\t{:.4}\t{:.4}\t{:.4}", r.m, r.err_marginal, r.err_simultaneous, r.disagreement)?;
    }
    Ok(())
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn configure_threads() -> CliResult {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_VAR} must be a positive integer, got '{value}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn effective_args() -> CliResult<Vec<String>> {
    let mut args: Vec<String> = std::env::args().collect();
    let Some(path) = manifest::take_manifest_flag(&mut args).map_err(CliError::Usage)? else {
        return Ok(args);
    };
    let entries = manifest::load(Path::new(&path)).map_err(CliError::Usage)?;
    manifest::merge(&Cli::command(), args, &entries).map_err(CliError::Usage)
}

/// The invocation as written into output headers. The output destination
/// is left out so that reruns into another location match byte for byte.
fn recorded_args(args: &[String]) -> String {
    let mut kept = Vec::with_capacity(args.len());
    let mut iter = args.iter();
    while let Some(a) = iter.next() {
        if a == "--out" {
            iter.next();
        } else if !a.starts_with("--out=") {
            kept.push(a.as_str());
        }
    }
    kept.join(" ")
}

fn run() -> CliResult {
    let args = effective_args()?;
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return Ok(());
        }
        Err(e) => return Err(CliError::Usage(e.render().to_string().trim_end().to_string())),
    };
    configure_threads()?;
    let invocation = recorded_args(&args[1..]);
    match &cli.command {
        Command::Sample(a) => cmd_sample(a, &invocation),
        Command::Mle(a) => cmd_mle(a),
        Command::Test(a) => cmd_test(a),
        Command::Classify(a) => cmd_classify(a, &invocation),
        Command::Experiment(a) => cmd_experiment(a, &invocation),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string();
            if msg.starts_with("error:") {
                eprintln!("{msg}");
            } else {
                eprintln!("pd-infer: error: {msg}");
            }
            ExitCode::from(e.code())
        }
    }
}
