//! Command-line interface.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 not found.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::corpus::{read_corpus, write_corpus, DocumentRecord};
use crate::error::Error;
use crate::model::{AttentionRecord, Model, Variant};
use crate::numeric::{SeededRng, Stream};
use crate::synthetic::{CueCorpus, NonRootCues};
use crate::text::{build_vocabulary, load_embeddings, Vocabulary};
use crate::train::{
    cross_validate, evaluate, grid_search, train, CrossValidation, EpochRecord, GridResult, GridSpec, Metrics,
    Setup, TrainingConfig,
};
use crate::trees::{parse_rst, rst_to_dependency, RelationNormalizer, RelationVocabulary};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NOT_FOUND: i32 = 3;

/// Environment variable consulted for the seed when neither the config nor
/// `--seed` sets one.
pub const SEED_ENV: &str = "DISCOCAT_SEED";

const CORPUS_FORMAT: &str = "\
CORPUS FORMAT
  One JSON object per line (UTF-8); blank lines are skipped:
    {\"id\": \"d1\", \"label\": \"pos\", \"edus\": [[\"great\", \"film\"], [\"really\"]],
     \"heads\": [-1, 0], \"relations\": [null, \"Elaboration\"]}
  heads[i] is the 0-based head EDU of EDU i, -1 for the single root.
  relations[i] labels the arc to the head (null at the root).
  \"label\" may be omitted for predict. Instead of heads/relations a record
  may carry \"rst\": a bracketed RST tree, e.g.
    (Elaboration (N (edu 0)) (S (edu 1)))

EXIT CODES
  0 success, 1 usage error, 2 data error, 3 not found";

#[derive(Debug, Parser)]
#[command(
    name = "discocat",
    version,
    about = "Text categorization with recursive networks over discourse dependency trees",
    after_help = CORPUS_FORMAT
)]
pub struct Cli {
    /// Log progress (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a vocabulary whose UNK rate is as close as possible to a target.
    ///
    /// Writes one "token<TAB>count" line per entry; the first two lines are
    /// <unk> and <num>.
    BuildVocab {
        /// Training corpus (JSON lines).
        #[arg(long)]
        corpus: PathBuf,
        /// Output vocabulary file.
        #[arg(long)]
        out: PathBuf,
        /// Target fraction of tokens mapped to <unk>.
        #[arg(long, default_value_t = 0.05)]
        unk_rate: f64,
        /// Lowercase, drop punctuation and map numbers to <num> first.
        #[arg(long)]
        normalize: bool,
    },
    /// Convert bracketed RST trees into dependency-form corpus records.
    ///
    /// Each input is either a corpus file whose records carry an "rst"
    /// field, or a tree file: one bracketed tree followed by one line of
    /// whitespace-separated tokens per EDU (optional). A tree file's record
    /// id is its file stem.
    ConvertTrees {
        /// Input files.
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Output corpus (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a model from a JSON run configuration.
    ///
    /// Keys: train, checkpoint (required paths); dev, vocab, embeddings,
    /// metrics (optional paths); unk_rate, normalize, normalize_relations,
    /// grid, folds; and the training keys d, h (required), variant,
    /// attention, learning_rate, optimizer, dropout, clip, epochs, patience,
    /// seed, freeze_embeddings. Relative paths are resolved against the
    /// config file's directory. Unknown keys are rejected.
    Train {
        /// Run configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Override the configured variant.
        #[arg(long)]
        variant: Option<Variant>,
        /// Override the seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Accuracy of a checkpoint on a labelled corpus.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Write the metrics JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        normalize: bool,
    },
    /// Predicted label and class probabilities per document, as JSON lines.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        normalize: bool,
    },
    /// Print one document's dependency tree with attention weights.
    InspectAttention {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Document id.
        #[arg(long)]
        doc: String,
        /// Also write the tree and weights as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        normalize: bool,
    },
    /// Generate a synthetic corpus whose label is a cue word in the root EDU.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 40)]
        docs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Cue words placed in non-root EDUs: none, random or contradict.
        #[arg(long, default_value = "none", value_parser = parse_cues)]
        non_root: NonRootCues,
    },
}

fn parse_cues(s: &str) -> Result<NonRootCues, String> {
    serde_json::from_value(Value::String(s.to_string())).map_err(|_| format!("unknown cue mode {s:?}"))
}

/// Error carrying the process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn data(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_DATA,
            message: message.into(),
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_NOT_FOUND,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match &e {
            Error::Io { source, .. } if source.kind() == io::ErrorKind::NotFound => {
                CliError::not_found(e.to_string())
            }
            _ => CliError::data(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path, e: io::Error) -> CliError {
    Error::io(path, e).into()
}

/// Parses `args` (including the program name) and runs the command; returns
/// the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match execute(cli.command, &mut out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            if e.code != EXIT_OK {
                eprintln!("error: {e}");
            }
            e.code
        }
    }
}

pub fn execute(command: Command, out: &mut dyn Write) -> CliResult<()> {
    match command {
        Command::BuildVocab {
            corpus,
            out: path,
            unk_rate,
            normalize,
        } => cmd_build_vocab(&corpus, &path, unk_rate, normalize, out),
        Command::ConvertTrees { files, out: path } => match path {
            Some(p) => {
                let mut buf = Vec::new();
                cmd_convert_trees(&files, &mut buf)?;
                fs::write(&p, buf).map_err(|e| io_err(&p, e))
            }
            None => cmd_convert_trees(&files, out),
        },
        Command::Train { config, variant, seed } => cmd_train(&config, variant, seed, out),
        Command::Evaluate {
            checkpoint,
            corpus,
            out: path,
            normalize,
        } => cmd_evaluate(&checkpoint, &corpus, path.as_deref(), normalize, out),
        Command::Predict {
            checkpoint,
            corpus,
            out: path,
            normalize,
        } => match path {
            Some(p) => {
                let mut buf = Vec::new();
                cmd_predict(&checkpoint, &corpus, normalize, &mut buf)?;
                fs::write(&p, buf).map_err(|e| io_err(&p, e))
            }
            None => cmd_predict(&checkpoint, &corpus, normalize, out),
        },
        Command::InspectAttention {
            checkpoint,
            corpus,
            doc,
            json,
            normalize,
        } => cmd_inspect_attention(&checkpoint, &corpus, &doc, json.as_deref(), normalize, out),
        Command::Synth {
            out: path,
            docs,
            seed,
            non_root,
        } => {
            let corpus = CueCorpus {
                docs,
                non_root,
                ..CueCorpus::default()
            };
            let records = corpus.generate(seed, "synth-");
            let mut buf = Vec::new();
            write_corpus(&mut buf, &records).map_err(|e| io_err(&path, e))?;
            fs::write(&path, buf).map_err(|e| io_err(&path, e))?;
            writeln!(out, "wrote {} documents to {}", records.len(), path.display()).map_err(stdout_err)
        }
    }
}

fn stdout_err(e: io::Error) -> CliError {
    if e.kind() == io::ErrorKind::BrokenPipe {
        // reader went away (e.g. `| head`); not an error
        return CliError {
            code: EXIT_OK,
            message: String::new(),
        };
    }
    CliError::data(format!("writing output: {e}"))
}

fn load_corpus(path: &Path, normalize: bool) -> CliResult<Vec<DocumentRecord>> {
    let mut docs = read_corpus(path)?;
    if normalize {
        docs.iter_mut().for_each(DocumentRecord::normalize);
    }
    Ok(docs)
}

pub fn cmd_build_vocab(
    corpus: &Path,
    path: &Path,
    unk_rate: f64,
    normalize: bool,
    out: &mut dyn Write,
) -> CliResult<()> {
    if !(0.0..=1.0).contains(&unk_rate) {
        return Err(CliError::usage(format!("--unk-rate must lie in [0, 1], got {unk_rate}")));
    }
    let docs = load_corpus(corpus, normalize)?;
    let built = build_vocabulary(docs.iter().flat_map(|d| d.tokens()), unk_rate)?;
    built.vocab.save(path)?;
    writeln!(
        out,
        "vocabulary size {} (min count {}), UNK rate {:.4} over {} tokens",
        built.vocab.len(),
        built.min_count.map_or("-".to_string(), |c| c.to_string()),
        built.unk_rate,
        built.total_tokens
    )
    .map_err(stdout_err)
}

/// Splits a tree file into the bracketed tree and the EDU lines after it.
fn split_tree_file(text: &str) -> (&str, &str) {
    let start = text.find('(').unwrap_or(0);
    let mut depth = 0usize;
    for (i, c) in text[start..].char_indices() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth = depth.saturating_sub(1);
                if depth == 0 {
                    let end = start + i + 1;
                    return (&text[..end], &text[end..]);
                }
            }
            _ => {}
        }
    }
    (text, "")
}

fn convert_record(mut record: DocumentRecord, source: &Path) -> CliResult<DocumentRecord> {
    let rst = record
        .rst
        .take()
        .ok_or_else(|| CliError::data(format!("{}: record {} has no \"rst\" field", source.display(), record.id)))?;
    let tree = parse_rst(&rst).map_err(|e| {
        CliError::data(format!("{}: record {}: {e}", source.display(), record.id))
    })?;
    let dep = rst_to_dependency(&tree);
    if record.edus.is_empty() {
        record.edus = vec![Vec::new(); dep.len()];
    }
    record.set_tree(&dep);
    record
        .dependency_tree()
        .map_err(|e| CliError::data(format!("{}: {e}", source.display())))?;
    Ok(record)
}

pub fn cmd_convert_trees(files: &[PathBuf], out: &mut dyn Write) -> CliResult<()> {
    let mut records = Vec::new();
    for path in files {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        if text.trim_start().starts_with('{') {
            for record in crate::corpus::parse_corpus(text.as_bytes(), path)? {
                records.push(convert_record(record, path)?);
            }
        } else {
            let (tree, rest) = split_tree_file(&text);
            let edus: Vec<Vec<String>> = rest
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(|l| l.split_whitespace().map(str::to_string).collect())
                .collect();
            let id = path
                .file_stem()
                .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
            let record = DocumentRecord {
                id,
                label: None,
                edus,
                heads: Vec::new(),
                relations: Vec::new(),
                rst: Some(tree.to_string()),
            };
            records.push(convert_record(record, path)?);
        }
    }
    write_corpus(out, &records).map_err(stdout_err)
}

/// Path-valued keys of a run configuration; every other key belongs to
/// [`TrainingConfig`].
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunPaths {
    train: PathBuf,
    checkpoint: PathBuf,
    #[serde(default)]
    dev: Option<PathBuf>,
    #[serde(default)]
    vocab: Option<PathBuf>,
    #[serde(default)]
    embeddings: Option<PathBuf>,
    #[serde(default)]
    metrics: Option<PathBuf>,
    #[serde(default = "default_unk_rate")]
    unk_rate: f64,
    #[serde(default)]
    normalize: bool,
    #[serde(default)]
    normalize_relations: bool,
    #[serde(default)]
    grid: Option<GridSpec>,
    #[serde(default)]
    folds: Option<usize>,
}

fn default_unk_rate() -> f64 {
    0.05
}

const RUN_KEYS: [&str; 11] = [
    "train",
    "checkpoint",
    "dev",
    "vocab",
    "embeddings",
    "metrics",
    "unk_rate",
    "normalize",
    "normalize_relations",
    "grid",
    "folds",
];

/// Parsed run configuration: file locations plus the training settings.
#[derive(Debug, Clone)]
pub struct RunConfigFile {
    paths: RunPaths,
    pub training: TrainingConfig,
    seed_given: bool,
}

impl RunConfigFile {
    pub fn parse(text: &str, path: &Path) -> CliResult<Self> {
        let bad = |msg: String| CliError::data(format!("{}: {msg}", path.display()));
        let value: Value = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        let Value::Object(all) = value else {
            return Err(bad("expected a JSON object".into()));
        };
        let (run, rest): (Map<String, Value>, Map<String, Value>) =
            all.into_iter().partition(|(k, _)| RUN_KEYS.contains(&k.as_str()));
        let seed_given = rest.contains_key("seed");
        let mut paths: RunPaths = serde_json::from_value(Value::Object(run)).map_err(|e| bad(e.to_string()))?;
        let training: TrainingConfig =
            serde_json::from_value(Value::Object(rest)).map_err(|e| bad(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut paths.train);
        resolve(&mut paths.checkpoint);
        for p in [&mut paths.dev, &mut paths.vocab, &mut paths.embeddings, &mut paths.metrics]
            .into_iter()
            .flatten()
        {
            resolve(p);
        }
        Ok(RunConfigFile {
            paths,
            training,
            seed_given,
        })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Self::parse(&text, path)
    }
}

/// Report written by `train`.
#[derive(Debug, Clone, Serialize)]
pub struct TrainMetrics {
    pub config: TrainingConfig,
    pub vocabulary_size: usize,
    pub relations: usize,
    pub labels: Vec<String>,
    pub skipped_documents: usize,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub train: Metrics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dev: Option<Metrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<GridResult>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cross_validation: Option<CrossValidation>,
}

fn resolve_seed(cli_seed: Option<u64>, run: &RunConfigFile) -> CliResult<u64> {
    if let Some(s) = cli_seed {
        return Ok(s);
    }
    if run.seed_given {
        return Ok(run.training.seed);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

pub fn cmd_train(config: &Path, variant: Option<Variant>, seed: Option<u64>, out: &mut dyn Write) -> CliResult<()> {
    let run = RunConfigFile::load(config)?;
    let mut cfg = run.training.clone();
    cfg.seed = resolve_seed(seed, &run)?;
    if let Some(v) = variant {
        cfg.variant = v;
    }
    cfg.validate().map_err(|e| CliError::data(format!("{}: {e}", config.display())))?;
    let p = &run.paths;
    for path in [Some(&p.train), p.dev.as_ref(), p.vocab.as_ref(), p.embeddings.as_ref()]
        .into_iter()
        .flatten()
    {
        if !path.exists() {
            return Err(CliError::not_found(format!("{}: no such file", path.display())));
        }
    }

    let train_records = load_corpus(&p.train, p.normalize)?;
    let dev_records = match &p.dev {
        Some(d) => load_corpus(d, p.normalize)?,
        None => Vec::new(),
    };
    let vocab = match &p.vocab {
        Some(v) => Vocabulary::load(v)?,
        None => build_vocabulary(train_records.iter().flat_map(|d| d.tokens()), p.unk_rate)?.vocab,
    };
    let normalizer = RelationNormalizer {
        case_fold: p.normalize_relations,
        strip_nuclearity: p.normalize_relations,
    };
    let trees: Vec<_> = train_records.iter().filter_map(|r| r.dependency_tree().ok()).collect();
    let relations = RelationVocabulary::build(trees.iter().flat_map(|t| t.relations().iter().flatten()), normalizer);
    let labels: Vec<String> = train_records
        .iter()
        .filter_map(|r| r.label.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if labels.is_empty() {
        return Err(CliError::data(format!("{}: no labelled documents", p.train.display())));
    }
    let embeddings = match &p.embeddings {
        Some(path) => {
            let mut rng = SeededRng::stream(cfg.seed, Stream::Embeddings);
            let mut table = load_embeddings(path, &vocab, cfg.word_dim, &mut rng)?;
            table.frozen = cfg.freeze_embeddings;
            Some(table)
        }
        None => None,
    };
    let setup = Setup {
        vocab,
        relations,
        labels,
        embeddings,
    };
    let (train_docs, skipped_train) = setup.prepare(&train_records);
    let (dev_docs, skipped_dev) = setup.prepare(&dev_records);
    if train_docs.is_empty() {
        return Err(CliError::data(format!("{}: no valid training documents", p.train.display())));
    }

    let cross_validation = match p.folds {
        Some(k) => Some(cross_validate(&setup, &cfg, &train_docs, k)?),
        None => None,
    };
    let grid = match &p.grid {
        Some(spec) => {
            let results = grid_search(&setup, &cfg, spec, &train_docs, &dev_docs)?;
            let best = results
                .iter()
                .find(|r| r.error.is_none())
                .ok_or_else(|| CliError::data("every grid cell failed"))?;
            cfg = best.cell.apply(&cfg);
            writeln!(out, "grid: best cell {}", best.cell.key()).map_err(stdout_err)?;
            Some(results)
        }
        None => None,
    };

    let mut model = setup.build_model(&cfg)?;
    let report = train(&mut model, &train_docs, &dev_docs, &cfg)?;
    let mut train_metrics = evaluate(&model, &train_docs)?;
    train_metrics.loss_curve = report.loss_curve();
    let dev = if dev_docs.is_empty() {
        None
    } else {
        Some(evaluate(&model, &dev_docs)?)
    };
    model.save(&p.checkpoint)?;

    let metrics = TrainMetrics {
        config: cfg,
        vocabulary_size: setup.vocab.len(),
        relations: setup.relations.len(),
        labels: setup.labels.clone(),
        skipped_documents: skipped_train + skipped_dev,
        epochs: report.epochs,
        best_epoch: report.best_epoch,
        train: train_metrics,
        dev,
        grid,
        cross_validation,
    };
    let json = serde_json::to_string_pretty(&metrics).map_err(|e| CliError::data(e.to_string()))?;
    if let Some(m) = &p.metrics {
        fs::write(m, format!("{json}\n")).map_err(|e| io_err(m, e))?;
    }
    writeln!(
        out,
        "trained {} model for {} epoch(s); best epoch {}; train accuracy {:.4}{}",
        metrics.config.variant,
        metrics.epochs.len(),
        metrics.best_epoch,
        metrics.train.accuracy,
        metrics
            .dev
            .as_ref()
            .map_or(String::new(), |d| format!("; dev accuracy {:.4}", d.accuracy))
    )
    .map_err(stdout_err)?;
    writeln!(out, "checkpoint written to {}", p.checkpoint.display()).map_err(stdout_err)
}

fn load_model(path: &Path) -> CliResult<Model> {
    if !path.exists() {
        return Err(CliError::not_found(format!("{}: no such file", path.display())));
    }
    Ok(Model::load(path)?)
}

pub fn cmd_evaluate(
    checkpoint: &Path,
    corpus: &Path,
    json_out: Option<&Path>,
    normalize: bool,
    out: &mut dyn Write,
) -> CliResult<()> {
    let model = load_model(checkpoint)?;
    let records = load_corpus(corpus, normalize)?;
    let docs = records
        .iter()
        .map(|r| model.prepare(r))
        .collect::<Result<Vec<_>, _>>()?;
    let metrics = evaluate(&model, &docs)?;
    let json = serde_json::to_string_pretty(&metrics).map_err(|e| CliError::data(e.to_string()))?;
    match json_out {
        Some(path) => {
            fs::write(path, format!("{json}\n")).map_err(|e| io_err(path, e))?;
            writeln!(
                out,
                "accuracy {:.4} ({}/{})",
                metrics.accuracy, metrics.correct, metrics.total
            )
        }
        None => writeln!(out, "{json}"),
    }
    .map_err(stdout_err)
}

#[derive(Debug, Serialize)]
struct PredictionLine<'a> {
    id: &'a str,
    label: &'a str,
    probs: &'a [f64],
}

pub fn cmd_predict(checkpoint: &Path, corpus: &Path, normalize: bool, out: &mut dyn Write) -> CliResult<()> {
    let model = load_model(checkpoint)?;
    for mut record in load_corpus(corpus, normalize)? {
        record.label = None;
        let doc = model.prepare(&record)?;
        let p = model.predict(&doc)?;
        let line = PredictionLine {
            id: &record.id,
            label: &model.config.labels[p.label],
            probs: &p.probs,
        };
        serde_json::to_writer(&mut *out, &line).map_err(|e| CliError::data(e.to_string()))?;
        writeln!(out).map_err(stdout_err)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct AttentionDump<'a> {
    id: &'a str,
    variant: Variant,
    attention: crate::model::AttentionMode,
    predicted: &'a str,
    probs: &'a [f64],
    root: usize,
    edus: &'a [Vec<String>],
    arcs: &'a [AttentionRecord],
}

pub fn cmd_inspect_attention(
    checkpoint: &Path,
    corpus: &Path,
    doc_id: &str,
    json_out: Option<&Path>,
    normalize: bool,
    out: &mut dyn Write,
) -> CliResult<()> {
    let model = load_model(checkpoint)?;
    if !model.config.variant.has_attention() {
        return Err(CliError::data(format!(
            "the {} variant has no attention weights; inspect a full or unlabeled checkpoint",
            model.config.variant
        )));
    }
    let records = load_corpus(corpus, normalize)?;
    let mut record = records
        .into_iter()
        .find(|r| r.id == doc_id)
        .ok_or_else(|| CliError::not_found(format!("document {doc_id:?} not found in {}", corpus.display())))?;
    record.label = None;
    let doc = model.prepare(&record)?;
    let p = model.predict(&doc)?;
    let root = doc.tree.root().expect("validated tree has a root");
    let predicted = &model.config.labels[p.label];

    let mut text = format!("{} -> {predicted}\n", record.id);
    let children = doc.tree.children();
    let edu_text = |i: usize| record.edus[i].join(" ");
    text.push_str(&format!("[{root}] {}\n", edu_text(root)));
    let mut stack: Vec<(usize, usize)> = children[root].iter().rev().map(|&c| (c, 1)).collect();
    while let Some((node, depth)) = stack.pop() {
        let arc = p
            .attention
            .iter()
            .find(|a| a.child == node)
            .expect("every non-root node has an arc");
        text.push_str(&format!(
            "{}{} {:.4} [{node}] {}\n",
            "  ".repeat(depth),
            arc.relation.as_deref().unwrap_or("-"),
            arc.alpha,
            edu_text(node)
        ));
        stack.extend(children[node].iter().rev().map(|&c| (c, depth + 1)));
    }
    out.write_all(text.as_bytes()).map_err(stdout_err)?;

    if let Some(path) = json_out {
        let dump = AttentionDump {
            id: &record.id,
            variant: model.config.variant,
            attention: model.config.attention,
            predicted,
            probs: &p.probs,
            root,
            edus: &record.edus,
            arcs: &p.attention,
        };
        let json = serde_json::to_string_pretty(&dump).map_err(|e| CliError::data(e.to_string()))?;
        fs::write(path, format!("{json}\n")).map_err(|e| io_err(path, e))?;
    }
    Ok(())
}
