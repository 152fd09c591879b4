use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use discriminer_core::benchgen::{self, BenchSpec, Family, InputSampling};
use discriminer_core::dtree::{export_dot, TreeParams};
use discriminer_core::evaluation::{evaluate, train, EvalReport, Learner, Model};
use discriminer_core::labeling::label_corpus;
use discriminer_core::seed::derive_seed;
use discriminer_core::trace::load_corpus;
use discriminer_core::{Dataset, Error, KChoice, LabelFile, PredicateMode};

mod model;
mod summary;

use model::LearnedModel;

#[derive(Parser, Debug)]
#[command(
    name = "discriminer",
    version,
    about = "Explain execution-time differences from program traces"
)]
struct Cli {
    /// Progress messages on stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a micro-benchmark corpus.
    Benchgen(BenchgenArgs),
    /// Cluster trace mean times and attach weighted labels.
    Cluster(ClusterArgs),
    /// Learn a decision tree.
    LearnDtree(LearnDtreeArgs),
    /// Learn a maximum-likelihood conjunctive discriminant.
    LearnMlc(LearnMlcArgs),
    /// Group k-fold cross-validation of a learner.
    Eval(EvalArgs),
    /// Merge clustering, discriminant and accuracy into a readable summary.
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FamilyArg {
    Lsb0,
    Msb0,
    Pat,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SamplingArg {
    Uniform,
    Stratified,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LearnerArg {
    Dtree,
    Mlc,
}

#[derive(Args, Debug)]
struct BenchgenArgs {
    #[arg(long, value_enum)]
    family: FamilyArg,
    /// Pattern bits for `--family pat`, most significant first.
    #[arg(long)]
    pattern: Option<String>,
    #[arg(long, default_value_t = 10)]
    bits: usize,
    #[arg(long)]
    inputs: usize,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    #[arg(long, default_value_t = 1.0)]
    noise_ms: f64,
    #[arg(long, default_value_t = 10.0)]
    unit_ms: f64,
    /// Defaults to stratified for lsb0/msb0 and uniform for pat.
    #[arg(long, value_enum)]
    sampling: Option<SamplingArg>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ClusterArgs {
    #[arg(long)]
    input: PathBuf,
    /// `auto` or a fixed number of clusters.
    #[arg(long, default_value = "auto")]
    k: String,
    #[arg(long, default_value_t = 2)]
    k_min: usize,
    #[arg(long, default_value_t = 8)]
    k_max: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Scatter CSV; defaults to the `--out` path with a `.csv` extension.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DataArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// `called-once` or `counts:<c1>,<c2>,...`.
    #[arg(long, default_value = "called-once")]
    predicates: String,
}

#[derive(Args, Debug)]
struct LearnDtreeArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    dot: Option<PathBuf>,
    #[arg(long)]
    max_depth: Option<usize>,
}

#[derive(Args, Debug)]
struct LearnMlcArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    time_limit_s: Option<u64>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum)]
    learner: LearnerArg,
    #[arg(long, default_value_t = 20)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    time_limit_s: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[arg(long)]
    labels: PathBuf,
    /// Output of `learn-dtree` or `learn-mlc`.
    #[arg(long)]
    model: PathBuf,
    /// Output of `eval`.
    #[arg(long)]
    eval: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
    Learner(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Learner(_) => 3,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::Data(e) | Failure::Learner(e) => e,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Fold { .. } | Error::Discriminant(_) => Failure::Learner(e.into()),
            other => Failure::Data(other.into()),
        }
    }
}

type Outcome<T = ()> = std::result::Result<T, Failure>;

fn data_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Data(e.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let verbose = cli.verbose;
    match cli.command {
        Command::Benchgen(a) => benchgen_cmd(a, verbose),
        Command::Cluster(a) => cluster_cmd(a, verbose),
        Command::LearnDtree(a) => learn_dtree_cmd(a, verbose),
        Command::LearnMlc(a) => learn_mlc_cmd(a, verbose),
        Command::Eval(a) => eval_cmd(a, verbose),
        Command::Report(a) => report_cmd(a),
    }
}

fn progress(verbose: bool, msg: impl FnOnce() -> String) {
    if verbose {
        eprintln!("{}", msg());
    }
}

/// Writes each output to its path, or to stdout when the path is absent.
fn emit(outputs: &[(Option<&Path>, &str)]) -> Outcome {
    for (path, contents) in outputs {
        match path {
            Some(p) => std::fs::write(p, contents)
                .with_context(|| format!("writing {}", p.display()))
                .map_err(data_err)?,
            None => print!("{contents}"),
        }
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Outcome<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(data_err)?;
    s.push('\n');
    Ok(s)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Outcome<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(data_err)?;
    serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(data_err)
}

fn parse_predicates(s: &str) -> Outcome<PredicateMode> {
    if s == "called-once" {
        return Ok(PredicateMode::CalledOnce);
    }
    let list = s.strip_prefix("counts:").ok_or_else(|| {
        Failure::Usage(anyhow!(
            "--predicates must be `called-once` or `counts:<c>,...`"
        ))
    })?;
    let counts = list
        .split(',')
        .map(|c| c.trim().parse::<u64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Failure::Usage(anyhow!("--predicates {s:?}: {e}")))?;
    if counts.is_empty() || counts.contains(&0) {
        return Err(Failure::Usage(anyhow!(
            "--predicates thresholds must be positive"
        )));
    }
    Ok(PredicateMode::CountThresholds(counts))
}

fn load_dataset(a: &DataArgs, verbose: bool) -> Outcome<Dataset> {
    let mode = parse_predicates(&a.predicates)?;
    let corpus = load_corpus(&a.input)?;
    let labels: LabelFile = read_json(&a.labels)?;
    let data = Dataset::new(&corpus, &labels, &mode)?;
    progress(verbose, || {
        format!(
            "{} traces, {} methods, {} predicates, {} labels",
            data.len(),
            data.attribute_names.len(),
            data.predicates.num_predicates(),
            data.num_labels
        )
    });
    Ok(data)
}

fn benchgen_cmd(a: BenchgenArgs, verbose: bool) -> Outcome {
    let family = match (a.family, a.pattern.as_deref()) {
        (FamilyArg::Lsb0, None) => Family::Lsb0,
        (FamilyArg::Msb0, None) => Family::Msb0,
        (FamilyArg::Pat, Some(p)) => Family::pattern(p).map_err(|e| Failure::Usage(e.into()))?,
        (FamilyArg::Pat, None) => {
            return Err(Failure::Usage(anyhow!("--family pat needs --pattern")))
        }
        (_, Some(_)) => {
            return Err(Failure::Usage(anyhow!(
                "--pattern only applies to --family pat"
            )))
        }
    };
    let mut spec = BenchSpec::new(family, a.bits, a.inputs, derive_seed(a.seed, "benchgen"));
    spec.repeats = a.repeats;
    spec.noise_std_ms = a.noise_ms;
    spec.time_unit_ms = a.unit_ms;
    if let Some(s) = a.sampling {
        spec.sampling = match s {
            SamplingArg::Uniform => InputSampling::Uniform,
            SamplingArg::Stratified => InputSampling::Stratified,
        };
    }
    let corpus = benchgen::generate(&spec)?;
    progress(verbose, || {
        format!(
            "{}: {} traces, {} methods",
            spec.family,
            corpus.len(),
            corpus.observed_methods().len()
        )
    });
    emit(&[(a.out.as_deref(), &corpus.to_jsonl()?)])
}

fn cluster_cmd(a: ClusterArgs, verbose: bool) -> Outcome {
    let k = if a.k == "auto" {
        if a.k_min < 2 || a.k_min > a.k_max {
            return Err(Failure::Usage(anyhow!("need 2 <= --k-min <= --k-max")));
        }
        KChoice::Auto {
            min: a.k_min,
            max: a.k_max,
        }
    } else {
        let k =
            a.k.parse::<usize>()
                .map_err(|_| Failure::Usage(anyhow!("--k must be `auto` or a positive integer")))?;
        if k == 0 {
            return Err(Failure::Usage(anyhow!("--k must be positive")));
        }
        KChoice::Fixed(k)
    };
    let corpus = load_corpus(&a.input)?;
    let labels = label_corpus(&corpus, k, derive_seed(a.seed, "cluster"))?;
    progress(verbose, || {
        format!("k = {}, centers {:?}", labels.k, labels.centers_s)
    });
    let json = to_json(&labels)?;
    let csv = labels.scatter_csv();
    let csv_path = a
        .csv
        .clone()
        .or_else(|| a.out.as_ref().map(|p| p.with_extension("csv")));
    let mut outputs = vec![(a.out.as_deref(), json.as_str())];
    if let Some(p) = csv_path.as_deref() {
        outputs.push((Some(p), csv.as_str()));
    }
    emit(&outputs)
}

fn learn_dtree_cmd(a: LearnDtreeArgs, verbose: bool) -> Outcome {
    let data = load_dataset(&a.data, verbose)?;
    let params = TreeParams {
        max_depth: a.max_depth,
        ..TreeParams::default()
    };
    let all: Vec<usize> = (0..data.len()).collect();
    let trained = train(&data, &all, &Learner::DecisionTree(params));
    let learned = LearnedModel::new(&data, trained);
    let Some(tree) = &learned.tree else {
        return Err(Failure::Learner(anyhow!(
            "decision tree learner returned no tree"
        )));
    };
    progress(verbose, || {
        format!("height {}, {} leaves", tree.height(), tree.num_leaves())
    });
    let dot = export_dot(tree);
    let json = to_json(&learned)?;
    let mut outputs = vec![(a.out.as_deref(), json.as_str())];
    if let Some(p) = a.dot.as_deref() {
        outputs.push((Some(p), dot.as_str()));
    }
    emit(&outputs)
}

fn learn_mlc_cmd(a: LearnMlcArgs, verbose: bool) -> Outcome {
    let data = load_dataset(&a.data, verbose)?;
    let all: Vec<usize> = (0..data.len()).collect();
    let learner = Learner::MaxLikelihood {
        time_limit: a.time_limit_s.map(Duration::from_secs),
    };
    let trained = train(&data, &all, &learner);
    if let Model::Conjunctive(r) = &trained.model {
        for s in &r.steps {
            progress(verbose, || {
                format!(
                    "label {}: {} traces, {} conjuncts, {} nodes{}",
                    s.label,
                    s.traces_remaining,
                    s.conjuncts,
                    s.nodes_explored,
                    if s.optimal { "" } else { " (limit reached)" }
                )
            });
        }
    }
    let learned = LearnedModel::new(&data, trained);
    emit(&[(a.out.as_deref(), &to_json(&learned)?)])
}

fn eval_cmd(a: EvalArgs, verbose: bool) -> Outcome {
    let data = load_dataset(&a.data, verbose)?;
    let learner = match a.learner {
        LearnerArg::Dtree => Learner::DecisionTree(TreeParams {
            max_depth: a.max_depth,
            ..TreeParams::default()
        }),
        LearnerArg::Mlc => Learner::MaxLikelihood {
            time_limit: a.time_limit_s.map(Duration::from_secs),
        },
    };
    let mut report: EvalReport = evaluate(&data, &learner, a.k, derive_seed(a.seed, "cv"))?;
    report.seed = a.seed;
    progress(verbose, || {
        format!(
            "{}: accuracy {:.4}, total learn time {:.3} s",
            report.learner, report.accuracy, report.total_learn_time_s
        )
    });
    emit(&[(a.out.as_deref(), &to_json(&report)?)])
}

fn report_cmd(a: ReportArgs) -> Outcome {
    let labels: LabelFile = read_json(&a.labels)?;
    let learned: LearnedModel = read_json(&a.model)?;
    let eval: Option<EvalReport> = a.eval.as_deref().map(read_json).transpose()?;
    let text = summary::render(&labels, &learned, eval.as_ref());
    emit(&[(a.out.as_deref(), &text)])
}
