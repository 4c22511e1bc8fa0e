//! Command-line front end.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 data error,
//! 4 numeric failure during training. Failures print one line of the form
//! `error[<category>]: <message>` on stderr; `--verbose` adds the cause chain.

mod config;

use std::collections::HashSet;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

pub use config::{parse_order, RunConfig, DATA_ROOT_ENV, DEFAULT_EMBEDDING_DIM};

use crate::bigrucnn::{self, checkpoint};
use crate::corpus::{self, LoadOptions, Tweet};
use crate::embeddings::load_vectors_for;
use crate::ensemble::{self, PredictionSet, TieBreak, VoteConfig, DEFAULT_PRIORITY};
use crate::error::{Error, ErrorCategory, Result};
use crate::metrics;
use crate::preprocess::{self, normalize, tokenize};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "infotweet",
    version,
    about = "Informative COVID-19 tweet classification toolkit",
    arg_required_else_help = true
)]
struct Cli {
    /// Print the full error chain on failure.
    #[arg(long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Label counts per split.
    Stats(StatsArgs),
    /// Rewrite a split file with normalized text.
    Normalize(NormalizeArgs),
    /// Train the Bi-GRU-CNN model and write a checkpoint.
    Train(TrainArgs),
    /// Label a split file with a trained checkpoint.
    Predict(PredictArgs),
    /// Majority-vote several prediction files.
    Vote(VoteArgs),
    /// Score one prediction file against gold labels.
    Eval(EvalArgs),
    /// Comparison table and error analysis for several prediction files.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    dev: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    /// Split files start with a header row.
    #[arg(long)]
    header: bool,
    /// Also print a formatted table.
    #[arg(long)]
    table: bool,
}

#[derive(Debug, Args)]
struct NormalizeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    header: bool,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `[data] train`.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Overrides `[data] dev`.
    #[arg(long)]
    dev: Option<PathBuf>,
    /// Overrides `[data] embeddings`.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Model name for reports; defaults to the output file stem.
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    header: bool,
}

#[derive(Debug, Args)]
struct VoteArgs {
    /// Prediction files, or directories whose `*.tsv` files are all used.
    #[arg(long, num_args = 1.., value_delimiter = ',', required = true)]
    pred: Vec<PathBuf>,
    /// Members, highest priority first.
    #[arg(long, value_delimiter = ',')]
    order: Option<Vec<String>>,
    /// `priority` or `informative`.
    #[arg(long)]
    tie_break: Option<TieBreak>,
    /// Read `[vote]` defaults from a run config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Also print pairwise agreement rates.
    #[arg(long)]
    agreement: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    header: bool,
    /// List up to N misclassified tweets per gold label.
    #[arg(long, value_name = "N")]
    report_errors: Option<usize>,
    /// Print the confusion matrix and a score table.
    #[arg(long)]
    table: bool,
    /// Write the confusion matrix as CSV.
    #[arg(long, value_name = "PATH")]
    confusion_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long)]
    gold: PathBuf,
    #[arg(long, num_args = 1.., value_delimiter = ',', required = true)]
    pred: Vec<PathBuf>,
    #[arg(long)]
    header: bool,
    /// Add bundled published rows for `dev` or `test`.
    #[arg(long, value_name = "SPLIT")]
    published: Option<String>,
    /// Misclassified tweets to list per model and gold label.
    #[arg(long, value_name = "N", default_value_t = 0)]
    errors: usize,
}

/// Runs one invocation and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    EXIT_USAGE
                }
            };
        }
    };
    let verbose = cli.verbose;
    match dispatch(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            report_error(&e, verbose, err);
            exit_code(e.category())
        }
    }
}

pub fn exit_code(category: ErrorCategory) -> i32 {
    match category {
        ErrorCategory::Usage => EXIT_USAGE,
        ErrorCategory::Data => EXIT_DATA,
        ErrorCategory::Numeric => EXIT_NUMERIC,
    }
}

fn report_error(e: &Error, verbose: bool, err: &mut dyn Write) {
    let line = e.to_string().replace(['\n', '\r'], " ");
    let _ = writeln!(err, "error[{}]: {line}", e.category().as_str());
    if verbose {
        let _ = writeln!(err, "{e:#?}");
        let mut source = std::error::Error::source(e);
        while let Some(s) = source {
            let _ = writeln!(err, "caused by: {s}");
            source = s.source();
        }
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| Error::io("<stdout>", e))
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Stats(a) => stats(a, out),
        Command::Normalize(a) => normalize_cmd(a, out),
        Command::Train(a) => train(a, out),
        Command::Predict(a) => predict(a, out),
        Command::Vote(a) => vote(a, out),
        Command::Eval(a) => eval(a, out),
        Command::Report(a) => report(a, out),
    }
}

fn options(header: bool) -> LoadOptions {
    LoadOptions { skip_header: header }
}

fn require_file(name: &str, path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} file {} does not exist", path.display())))
    }
}

fn require_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => Err(Error::Config(format!(
            "output directory {} does not exist",
            dir.display()
        ))),
        _ => Ok(()),
    }
}

fn stats(a: StatsArgs, out: &mut dyn Write) -> Result<()> {
    let named: Vec<(&str, PathBuf)> = [("train", a.train), ("dev", a.dev), ("test", a.test)]
        .into_iter()
        .filter_map(|(n, p)| p.map(|p| (n, p)))
        .collect();
    if named.is_empty() {
        return Err(Error::Config("give at least one of --train, --dev, --test".into()));
    }
    for (name, path) in &named {
        require_file(name, path)?;
    }
    let mut loaded = Vec::with_capacity(named.len());
    for (name, path) in &named {
        loaded.push((*name, corpus::load_split_with(path, true, options(a.header))?));
    }
    let splits: Vec<(&str, &[Tweet])> = loaded.iter().map(|(n, t)| (*n, t.as_slice())).collect();
    let stats = corpus::summarize(&splits)?;
    emit(out, &stats.key_values())?;
    if a.table {
        emit(out, &stats.render_table())?;
    }
    Ok(())
}

fn normalize_cmd(a: NormalizeArgs, out: &mut dyn Write) -> Result<()> {
    require_file("input", &a.input)?;
    if let Some(path) = &a.out {
        require_parent(path)?;
    }
    let tweets: Vec<Tweet> = corpus::load_split_with(&a.input, false, options(a.header))?
        .into_iter()
        .map(|t| Tweet::new(t.id, normalize(&t.text), t.label))
        .collect();
    let rendered = corpus::render_split(&tweets);
    match &a.out {
        Some(path) => fs::write(path, rendered).map_err(|e| Error::io(path, e)),
        None => emit(out, &rendered),
    }
}

fn corpus_vocabulary<'a>(splits: impl IntoIterator<Item = &'a [Tweet]>) -> HashSet<String> {
    splits
        .into_iter()
        .flatten()
        .flat_map(|t| tokenize(&normalize(&t.text)))
        .collect()
}

fn train(a: TrainArgs, out: &mut dyn Write) -> Result<()> {
    let mut rc = RunConfig::load(&a.config)?;
    rc.train = a.train.or(rc.train);
    rc.dev = a.dev.or(rc.dev);
    rc.embeddings = a.embeddings.or(rc.embeddings);
    if let Some(seed) = a.seed {
        rc.seed = seed;
        rc.model.seed = seed;
    }
    rc.check_inputs(&[("train", &rc.train), ("dev", &rc.dev), ("embeddings", &rc.embeddings)])?;
    if rc.test.is_some() {
        rc.check_inputs(&[("test", &rc.test)])?;
    }
    require_parent(&a.out)?;

    let opts = options(rc.header);
    let train_set = corpus::load_split_with(rc.train.as_ref().unwrap(), true, opts)?;
    let dev_set = corpus::load_split_with(rc.dev.as_ref().unwrap(), true, opts)?;
    let test_set = match &rc.test {
        Some(p) => corpus::load_split_with(p, false, opts)?,
        None => Vec::new(),
    };
    let vocab = corpus_vocabulary([train_set.as_slice(), &dev_set, &test_set]);
    let table = load_vectors_for(rc.embeddings.as_ref().unwrap(), rc.embedding_dim, &vocab)?;

    let max_length = rc.model.max_length;
    let (train_seqs, _) = bigrucnn::encode_tweets(&train_set, &table, max_length, true)?;
    let (dev_seqs, _) = bigrucnn::encode_tweets(&dev_set, &table, max_length, true)?;
    emit(
        out,
        &format!(
            "train.size={}\ndev.size={}\nvocab.size={}\ntrain.oov_rate={:.4}\ndev.oov_rate={:.4}\nseed={}\n",
            train_set.len(),
            dev_set.len(),
            table.len(),
            preprocess::oov_rate(&train_seqs),
            preprocess::oov_rate(&dev_seqs),
            rc.seed
        ),
    )?;

    let outcome = bigrucnn::train(rc.model.clone(), table, &train_set, &dev_set)?;
    for record in &outcome.history {
        emit(out, &format!("{}\n", record.to_key_values()))?;
    }
    checkpoint::save(&outcome.state, &a.out)?;
    emit(out, &format!("best_epoch={}\ncheckpoint={}\n", outcome.best_epoch, a.out.display()))
}

fn predict(a: PredictArgs, out: &mut dyn Write) -> Result<()> {
    require_file("checkpoint", &a.ckpt)?;
    require_file("input", &a.input)?;
    require_parent(&a.out)?;
    let name = match a.name {
        Some(n) => n,
        None => a
            .out
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .ok_or_else(|| Error::Config("cannot derive a model name from --out".into()))?,
    };
    let state = checkpoint::load(&a.ckpt)?;
    let tweets = corpus::load_split_with(&a.input, false, options(a.header))?;
    let predictions = bigrucnn::predict(&state, &tweets, &name)?;
    predictions.write(&a.out)?;
    emit(out, &format!("model={name}\npredictions={}\n", predictions.len()))
}

/// Expands directories to their `*.tsv` files in name order.
fn prediction_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for path in paths {
        if path.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(path)
                .map_err(|e| Error::io(path, e))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "tsv"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            require_file("prediction", path)?;
            files.push(path.clone());
        }
    }
    Ok(files)
}

fn read_predictions(paths: &[PathBuf]) -> Result<Vec<PredictionSet>> {
    prediction_files(paths)?.iter().map(PredictionSet::read).collect()
}

/// Known members in default priority order, then any others by name.
fn default_order(sets: &[PredictionSet]) -> Vec<String> {
    let mut names: Vec<&str> = sets.iter().map(|s| s.model_name.as_str()).collect();
    names.sort_by_key(|n| {
        (
            DEFAULT_PRIORITY.iter().position(|p| p == n).unwrap_or(usize::MAX),
            n.to_string(),
        )
    });
    names.into_iter().map(str::to_string).collect()
}

fn vote(a: VoteArgs, out: &mut dyn Write) -> Result<()> {
    let base = match &a.config {
        Some(path) => Some(RunConfig::load(path)?.vote),
        None => None,
    };
    require_parent(&a.out)?;
    let mut sets = read_predictions(&a.pred)?;
    let members = match (a.order, &base) {
        (Some(order), _) => order.into_iter().map(|s| s.trim().to_string()).collect(),
        (None, Some(b)) => b.members.clone(),
        (None, None) => default_order(&sets),
    };
    let tie_break = a
        .tie_break
        .or(base.map(|b| b.tie_break))
        .unwrap_or_default();
    let config = VoteConfig::new(members, tie_break).map_err(|e| match e {
        Error::TooFewMembers(n) => Error::Config(format!("need at least two vote members, got {n}")),
        e => e,
    })?;
    // Output ids follow the highest-priority member's file.
    sets.sort_by_key(|s| config.members.iter().position(|m| *m == s.model_name));
    let outcome = ensemble::vote_detailed(&sets, &config)?;
    outcome.predictions.write(&a.out)?;
    emit(
        out,
        &format!(
            "members={}\ntie_break={}\nids={}\ntie_broken={}\n",
            config.members.join(","),
            config.tie_break,
            outcome.predictions.len(),
            outcome.tie_broken.len()
        ),
    )?;
    if a.agreement {
        emit(out, &ensemble::agreement_report(&sets)?.render())?;
    }
    Ok(())
}

fn eval(a: EvalArgs, out: &mut dyn Write) -> Result<()> {
    require_file("prediction", &a.pred)?;
    require_file("gold", &a.gold)?;
    if let Some(path) = &a.confusion_csv {
        require_parent(path)?;
    }
    let pred = PredictionSet::read(&a.pred)?;
    let gold = corpus::load_split_with(&a.gold, true, options(a.header))?;
    let report = metrics::evaluate(&pred, &gold)?;
    emit(out, &report.to_key_values())?;
    if a.table {
        emit(out, "\n")?;
        emit(out, &report.matrix.render())?;
        emit(out, "\n")?;
        emit(out, &metrics::comparison_table(std::slice::from_ref(&report), &[]))?;
    }
    if let Some(limit) = a.report_errors {
        let rows = metrics::misclassification_report(&pred, &gold, limit)?;
        emit(out, "\n")?;
        emit(out, &metrics::render_misclassified(&rows))?;
    }
    if let Some(path) = &a.confusion_csv {
        fs::write(path, report.matrix.to_csv()).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

fn report(a: ReportArgs, out: &mut dyn Write) -> Result<()> {
    require_file("gold", &a.gold)?;
    let published = match a.published.as_deref() {
        None => Vec::new(),
        Some(split @ ("dev" | "test")) => metrics::published_results(split),
        Some(other) => {
            return Err(Error::Config(format!(
                "--published expects dev or test, got {other:?}"
            )))
        }
    };
    let mut sets = read_predictions(&a.pred)?;
    let order = default_order(&sets);
    sets.sort_by_key(|s| order.iter().position(|n| *n == s.model_name));
    let gold = corpus::load_split_with(&a.gold, true, options(a.header))?;
    let reports = sets
        .iter()
        .map(|s| metrics::evaluate(s, &gold))
        .collect::<Result<Vec<_>>>()?;

    emit(out, &metrics::comparison_table(&reports, &published))?;
    for (set, r) in sets.iter().zip(&reports) {
        emit(out, &format!("\n[{}]\n", r.model_name))?;
        emit(out, &r.matrix.render())?;
        if a.errors > 0 {
            let rows = metrics::misclassification_report(set, &gold, a.errors)?;
            emit(out, &metrics::render_misclassified(&rows))?;
        }
    }
    if sets.len() >= 2 {
        emit(out, "\n")?;
        emit(out, &ensemble::agreement_report(&sets)?.render())?;
    }
    Ok(())
}
