//! Command-line surface: `train`, `align`, `tune`, `eval` and `experiment`.

mod experiment;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::corpus::{
    occurrence_stats, split_annotated, split_unannotated, AnnotationSet, CorpusBuilder, ParallelCorpus, Vocabulary,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate_corpus, links_from_alignment};
use crate::model::{load_model, save_model, ModelInfo, TranslationTable};
use crate::objectives::{DevSet, ObjectiveKind, DEFAULT_ALPHA};
use crate::smoothing::{AddingStrategy, StrategyKind};
use crate::trainer::{train, TrainConfig};
use crate::tuner::{tune, TuneConfig, TuneResult};

pub use experiment::{run_experiment, CellOutcome, ExperimentReport, ExperimentSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_TUNING: i32 = 3;

/// Exit status for an error surfaced by a subcommand.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Argument(_) => EXIT_USAGE,
        Error::Io { .. } | Error::Format(_) | Error::Lookup { .. } => EXIT_DATA,
        Error::Tuning { .. } => EXIT_TUNING,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "lexalign",
    version,
    about = "IBM Model 1 word alignment with tunable additive smoothing"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a translation table and write it as TSV.
    Train(TrainArgs),
    /// Write Viterbi alignments, one line of `i-j` links per sentence pair.
    Align(AlignArgs),
    /// Tune the smoothing scale on development data.
    Tune(TuneArgs),
    /// Score a model's alignments against gold annotations.
    Eval(EvalArgs),
    /// Run the baseline plus every strategy × objective combination.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Source-side text, one sentence per line.
    #[arg(short = 's', long)]
    pub source: PathBuf,
    /// Target-side text, line-aligned with the source.
    #[arg(short = 't', long)]
    pub target: PathBuf,
    /// Lowercase every token on load.
    #[arg(long)]
    pub lowercase: bool,
}

impl CorpusArgs {
    fn load(&self) -> Result<ParallelCorpus> {
        ParallelCorpus::load(&self.source, &self.target, self.lowercase)
    }
}

#[derive(Debug, Args)]
pub struct TrainingArgs {
    /// EM iterations.
    #[arg(long, default_value_t = 10)]
    pub iters: usize,
    /// Parallelize the E-step across sentence pairs.
    #[arg(long)]
    pub parallel: bool,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// Comma-separated candidate scales (default: 0 and 1e-4..1e4 in quarter decades).
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    /// Absolute tolerance on the scale during refinement.
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    /// Evaluation budget for the refinement phase.
    #[arg(long, default_value_t = 100)]
    pub max_evals: usize,
    /// Sharpness of the smoothed error count.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
}

impl SearchArgs {
    fn config(&self) -> TuneConfig<f64> {
        let mut config = TuneConfig {
            tolerance: self.tol,
            max_refine_evals: self.max_evals,
            ..TuneConfig::default()
        };
        if let Some(grid) = &self.grid {
            config.grid = grid.clone();
        }
        config
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub training: TrainingArgs,
    /// Adding strategy: add-one, add-source-count or add-dice.
    #[arg(long)]
    pub strategy: Option<StrategyKind>,
    /// Smoothing scale applied to the strategy.
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    /// Model constant ε.
    #[arg(long, default_value_t = 1.0)]
    pub epsilon: f64,
    /// Model output path.
    #[arg(short = 'o', long)]
    pub out: PathBuf,
    /// Log-likelihood trace path (default: `<out>.trace`).
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Model written by `train`.
    #[arg(short = 'm', long)]
    pub model: PathBuf,
    /// Include links to NULL as `0-j`.
    #[arg(long)]
    pub emit_null: bool,
    /// Output path (default: standard output).
    #[arg(short = 'o', long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub training: TrainingArgs,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Gold annotations; required by every objective except ml-unannotated.
    #[arg(short = 'a', long)]
    pub annotations: Option<PathBuf>,
    #[arg(long, default_value = "add-one")]
    pub strategy: StrategyKind,
    #[arg(long, default_value = "smoothed-error-count")]
    pub objective: ObjectiveKind,
    /// Annotated pairs drawn for development (default: all annotated pairs).
    #[arg(long)]
    pub dev_size: Option<usize>,
    /// Fraction of the corpus held out for ml-unannotated.
    #[arg(long, default_value_t = 0.1)]
    pub dev_fraction: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Report path (default: standard output).
    #[arg(short = 'o', long)]
    pub out: Option<PathBuf>,
    /// Also write the model retrained on the whole corpus at the chosen scale.
    #[arg(long)]
    pub model_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(short = 'm', long)]
    pub model: PathBuf,
    #[arg(short = 'a', long)]
    pub annotations: PathBuf,
    /// Write `metric<TAB>value` lines here as well.
    #[arg(short = 'o', long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub training: TrainingArgs,
    #[command(flatten)]
    pub search: SearchArgs,
    #[arg(short = 'a', long)]
    pub annotations: PathBuf,
    /// Annotated pairs moved to development (default: a third of them).
    #[arg(long)]
    pub dev_size: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    pub dev_fraction: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Comma-separated strategies (default: all three).
    #[arg(long, value_delimiter = ',')]
    pub strategies: Option<Vec<StrategyKind>>,
    /// Comma-separated objectives (default: all four).
    #[arg(long, value_delimiter = ',')]
    pub objectives: Option<Vec<ObjectiveKind>>,
    /// Output directory for report.txt and report.tsv.
    #[arg(short = 'o', long)]
    pub out: PathBuf,
}

/// Parses `args` (program name first) and runs the command; returns the exit status.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}

pub fn run(command: Command) -> Result<i32> {
    match command {
        Command::Train(args) => cmd_train(&args).map(|_| EXIT_OK),
        Command::Align(args) => cmd_align(&args).map(|_| EXIT_OK),
        Command::Tune(args) => cmd_tune(&args).map(|_| EXIT_OK),
        Command::Eval(args) => cmd_eval(&args).map(|_| EXIT_OK),
        Command::Experiment(args) => cmd_experiment(&args),
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let corpus = args.corpus.load()?;
    let strategy = args
        .strategy
        .map(|kind| Arc::new(AddingStrategy::new(kind, Arc::new(occurrence_stats(&corpus)))));
    if strategy.is_none() && args.lambda != 0.0 {
        return Err(Error::argument("--lambda needs --strategy"));
    }
    let config = TrainConfig {
        iterations: args.training.iters,
        lambda: args.lambda,
        strategy,
        epsilon: args.epsilon,
        parallel: args.training.parallel,
    };
    let output = train(&corpus, &config)?;
    let info = ModelInfo {
        iterations: Some(args.training.iters),
        strategy: Some(args.strategy.map_or("none", StrategyKind::token).to_owned()),
        lambda: Some(args.lambda),
    };
    save_model(&args.out, &output.table, &info)?;

    let trace_path = args.trace.clone().unwrap_or_else(|| {
        let mut p = args.out.clone().into_os_string();
        p.push(".trace");
        PathBuf::from(p)
    });
    let mut trace = String::new();
    for (k, ll) in output.log_likelihood.iter().enumerate() {
        let _ = writeln!(trace, "{}\t{:.12e}", k + 1, ll);
    }
    fs::write(&trace_path, trace).map_err(|e| Error::io(&trace_path, e))
}

/// Viterbi links for every pair of `source`/`target` text under `table`.
///
/// Tokens unknown to the model get ids past its vocabularies, which carry zero
/// probability; positions left with an all-zero column fall back to the
/// uniform posterior and therefore align to NULL. Returns the rendered lines
/// and the number of unknown tokens.
pub fn align_texts(
    table: &TranslationTable<f64>,
    source: &str,
    target: &str,
    lowercase: bool,
    emit_null: bool,
) -> Result<(String, usize)> {
    let mut builder = CorpusBuilder::with_vocabularies(
        Vocabulary::clone(table.source_vocab()),
        Vocabulary::clone(table.target_vocab()),
    )
    .lowercase(lowercase);
    builder.push_texts(source, target)?;
    let unknown = builder.unknown_tokens();
    let corpus = builder.build()?;
    let mut out = String::new();
    for pair in corpus.pairs() {
        let links = links_from_alignment(&table.viterbi(pair), emit_null);
        let rendered: Vec<String> = links.iter().map(|l| format!("{}-{}", l.source, l.target)).collect();
        out.push_str(&rendered.join(" "));
        out.push('\n');
    }
    Ok((out, unknown))
}

pub fn cmd_align(args: &AlignArgs) -> Result<()> {
    let (table, _) = load_model::<f64>(&args.model)?;
    let source = crate::corpus::read_text(&args.corpus.source)?;
    let target = crate::corpus::read_text(&args.corpus.target)?;
    let (text, unknown) = align_texts(&table, &source, &target, args.corpus.lowercase, args.emit_null)?;
    if unknown > 0 {
        eprintln!("warning: {unknown} tokens are unknown to the model; their positions use the uniform fallback");
    }
    write_output(args.out.as_deref(), &text)
}

fn train_config(args: &TrainingArgs) -> TrainConfig<f64> {
    TrainConfig {
        iterations: args.iters,
        parallel: args.parallel,
        ..TrainConfig::default()
    }
}

pub fn format_tune_result(result: &TuneResult<f64>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "strategy\t{}", result.strategy);
    let _ = writeln!(out, "objective\t{}", result.objective);
    let _ = writeln!(out, "lambda\t{:.10e}", result.lambda_star);
    let _ = writeln!(out, "value\t{:.10e}", result.objective_value);
    if let Some(v) = result.baseline_value() {
        let _ = writeln!(out, "value_at_zero\t{v:.10e}");
    }
    let _ = writeln!(out, "# lambda\tvalue");
    for (l, v) in &result.evaluations {
        let _ = writeln!(out, "{l:.10e}\t{v:.10e}");
    }
    out
}

pub fn cmd_tune(args: &TuneArgs) -> Result<()> {
    let corpus = args.corpus.load()?;
    let objective = args.objective.with_alpha(args.search.alpha);
    let tune_config = args.search.config();
    let train_config = train_config(&args.training);

    let result = if objective.needs_annotation() {
        let path = args
            .annotations
            .as_ref()
            .ok_or_else(|| Error::argument(format!("objective {objective} needs --annotations")))?;
        let annotations = AnnotationSet::load(path, &corpus)?;
        let dev_ann = match args.dev_size {
            Some(k) => split_annotated(&annotations, k, args.seed)?.0,
            None => annotations,
        };
        let dev = DevSet::annotated(&corpus, &dev_ann)?;
        let strategy = Arc::new(AddingStrategy::new(args.strategy, Arc::new(occurrence_stats(&corpus))));
        tune(&corpus, &dev, strategy, objective, &tune_config, &train_config)?
    } else {
        let (train_part, dev_part) = split_unannotated(&corpus, args.dev_fraction, args.seed)?;
        let strategy = Arc::new(AddingStrategy::new(
            args.strategy,
            Arc::new(occurrence_stats(&train_part)),
        ));
        tune(
            &train_part,
            &DevSet::unannotated(dev_part),
            strategy,
            objective,
            &tune_config,
            &train_config,
        )?
    };
    write_output(args.out.as_deref(), &format_tune_result(&result))?;

    if let Some(path) = &args.model_out {
        let strategy = Arc::new(AddingStrategy::new(args.strategy, Arc::new(occurrence_stats(&corpus))));
        let config = TrainConfig {
            lambda: result.lambda_star,
            strategy: Some(strategy),
            ..train_config
        };
        let model = train(&corpus, &config)?;
        let info = ModelInfo {
            iterations: Some(args.training.iters),
            strategy: Some(args.strategy.token().to_owned()),
            lambda: Some(result.lambda_star),
        };
        save_model(path, &model.table, &info)?;
    }
    Ok(())
}

pub fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let (table, _) = load_model::<f64>(&args.model)?;
    let source = crate::corpus::read_text(&args.corpus.source)?;
    let target = crate::corpus::read_text(&args.corpus.target)?;
    let mut builder = CorpusBuilder::with_vocabularies(
        Vocabulary::clone(table.source_vocab()),
        Vocabulary::clone(table.target_vocab()),
    )
    .lowercase(args.corpus.lowercase);
    builder.push_texts(&source, &target)?;
    if builder.unknown_tokens() > 0 {
        eprintln!(
            "warning: {} tokens are unknown to the model; their positions use the uniform fallback",
            builder.unknown_tokens()
        );
    }
    let corpus = builder.build()?;
    let annotations = AnnotationSet::load(&args.annotations, &corpus)?;
    let pairs: Vec<usize> = annotations.pair_indices().collect();
    // unknown ids are past the table's vocabularies, so score with a table widened to cover them
    let report = evaluate_corpus(&widen(&table, &corpus)?, &corpus, &annotations, &pairs)?;
    println!("{report}");
    if let Some(path) = &args.out {
        fs::write(path, report.to_tsv()).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Same probabilities, over `corpus`' (super-set) vocabularies; new words get all-zero entries.
fn widen(table: &TranslationTable<f64>, corpus: &ParallelCorpus) -> Result<TranslationTable<f64>> {
    use crate::model::Row;
    let target_len = table.target_len();
    let mut rows: Vec<Row<f64>> = table
        .rows()
        .iter()
        .map(|row| {
            if row.background() > 0.0 {
                // materialize so the background does not leak onto the new target words
                Row::new(0.0, (0..target_len as u32).map(|f| (f, row.get(f))).collect())
            } else {
                row.clone()
            }
        })
        .collect();
    rows.resize(corpus.source_vocab().len(), Row::new(0.0, Vec::new()));
    TranslationTable::from_rows(
        rows,
        Arc::clone(corpus.source_vocab()),
        Arc::clone(corpus.target_vocab()),
        table.epsilon(),
    )
}

pub fn cmd_experiment(args: &ExperimentArgs) -> Result<i32> {
    let corpus = args.corpus.load()?;
    let annotations = AnnotationSet::load(&args.annotations, &corpus)?;
    let spec = ExperimentSpec {
        dev_size: args.dev_size.unwrap_or((annotations.len() / 3).max(1)),
        dev_fraction: args.dev_fraction,
        seed: args.seed,
        strategies: args.strategies.clone().unwrap_or_else(|| StrategyKind::ALL.to_vec()),
        objectives: args
            .objectives
            .clone()
            .unwrap_or_else(|| ObjectiveKind::all(args.search.alpha).to_vec())
            .into_iter()
            .map(|o| o.with_alpha(args.search.alpha))
            .collect(),
        tune: args.search.config(),
        train: train_config(&args.training),
    };
    let report = run_experiment(&corpus, &annotations, &spec)?;
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let txt = args.out.join("report.txt");
    let tsv = args.out.join("report.tsv");
    fs::write(&txt, report.to_text()).map_err(|e| Error::io(&txt, e))?;
    fs::write(&tsv, report.to_tsv()).map_err(|e| Error::io(&tsv, e))?;
    print!("{}", report.to_text());
    for cell in report.failed_cells() {
        eprintln!(
            "error: cell {} / {} failed: {}",
            cell.strategy,
            cell.objective,
            cell.error.as_deref().unwrap_or("")
        );
    }
    Ok(if report.failed_cells().next().is_some() {
        EXIT_TUNING
    } else {
        EXIT_OK
    })
}
