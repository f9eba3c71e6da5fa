//! Online training, evaluation, grid search and k-fold splitting.

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::DocumentRecord;
use crate::error::{Error, Result};
use crate::model::{argmax, prepare_document, AttentionMode, EncodedDocument, Model, ModelConfig, Variant};
use crate::numeric::{
    clip_gradient_norm, derive_seed, dropout::check_rate, Graph, Method, Mode, Optimizer, SeededRng, Stream,
};
use crate::text::{EmbeddingTable, Vocabulary};
use crate::trees::RelationVocabulary;

pub const DEFAULT_DROPOUT: f64 = 0.3;
pub const DEFAULT_CLIP: f64 = 5.0;
pub const DEFAULT_EPOCHS: usize = 30;
pub const DEFAULT_PATIENCE: usize = 5;

fn default_dropout() -> f64 {
    DEFAULT_DROPOUT
}
fn default_clip() -> f64 {
    DEFAULT_CLIP
}
fn default_epochs() -> usize {
    DEFAULT_EPOCHS
}
fn default_patience() -> usize {
    DEFAULT_PATIENCE
}
fn default_learning_rate() -> f64 {
    0.001
}
fn default_optimizer() -> Method {
    Method::Adam
}
fn default_variant() -> Variant {
    Variant::Full
}

/// Everything that determines one training run. `d` and `h` have no default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    #[serde(default = "default_variant")]
    pub variant: Variant,
    #[serde(default)]
    pub attention: AttentionMode,
    #[serde(rename = "d")]
    pub word_dim: usize,
    #[serde(rename = "h")]
    pub hidden_dim: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_optimizer")]
    pub optimizer: Method,
    #[serde(default = "default_dropout")]
    pub dropout: f64,
    #[serde(default = "default_clip")]
    pub clip: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub freeze_embeddings: bool,
}

impl TrainingConfig {
    pub fn new(word_dim: usize, hidden_dim: usize) -> Self {
        TrainingConfig {
            variant: default_variant(),
            attention: AttentionMode::default(),
            word_dim,
            hidden_dim,
            learning_rate: default_learning_rate(),
            optimizer: default_optimizer(),
            dropout: DEFAULT_DROPOUT,
            clip: DEFAULT_CLIP,
            epochs: DEFAULT_EPOCHS,
            patience: DEFAULT_PATIENCE,
            seed: 0,
            freeze_embeddings: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_rate(self.dropout)?;
        if self.clip.is_nan() || self.clip <= 0.0 {
            return Err(Error::invalid(format!("clip must be positive, got {}", self.clip)));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::invalid(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.word_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::invalid("d and h must be positive"));
        }
        Ok(())
    }
}

/// Vocabularies, label set and optional pretrained vectors shared by every
/// model trained on one corpus.
#[derive(Debug, Clone)]
pub struct Setup {
    pub vocab: Vocabulary,
    pub relations: RelationVocabulary,
    pub labels: Vec<String>,
    pub embeddings: Option<EmbeddingTable>,
}

impl Setup {
    pub fn build_model(&self, cfg: &TrainingConfig) -> Result<Model> {
        cfg.validate()?;
        if let Some(e) = &self.embeddings {
            if e.dim() != cfg.word_dim {
                return Err(Error::invalid(format!(
                    "pretrained embeddings have dimension {} but d = {}",
                    e.dim(),
                    cfg.word_dim
                )));
            }
        }
        let config = ModelConfig {
            word_dim: cfg.word_dim,
            hidden_dim: cfg.hidden_dim,
            variant: cfg.variant,
            attention: cfg.attention,
            labels: self.labels.clone(),
        };
        let mut model = Model::new(
            config,
            self.vocab.clone(),
            self.relations.clone(),
            self.embeddings.clone(),
            cfg.seed,
        )?;
        if cfg.freeze_embeddings {
            let id = model.embedding_param();
            model.store.set_frozen(id, true);
        }
        Ok(model)
    }

    /// Encodes every record, skipping (and logging) invalid ones.
    pub fn prepare(&self, records: &[DocumentRecord]) -> (Vec<EncodedDocument>, usize) {
        let mut docs = Vec::with_capacity(records.len());
        let mut skipped = 0;
        for r in records {
            match prepare_document(r, &self.vocab, &self.relations, &self.labels) {
                Ok(d) => docs.push(d),
                Err(e) => {
                    warn!("skipping document {}: {e}", r.id);
                    skipped += 1;
                }
            }
        }
        (docs, skipped)
    }

    /// Encodes every record, failing on the first invalid one.
    pub fn prepare_strict(&self, records: &[DocumentRecord]) -> Result<Vec<EncodedDocument>> {
        records
            .iter()
            .map(|r| prepare_document(r, &self.vocab, &self.relations, &self.labels))
            .collect()
    }
}

/// One online update: forward, cross-entropy, backward, clipping, step.
/// Gradients are zeroed afterwards, also on failure.
pub fn train_one_example(
    model: &mut Model,
    doc: &EncodedDocument,
    optimizer: &mut Optimizer,
    dropout: f64,
    clip: f64,
    rng: &mut SeededRng,
) -> Result<f64> {
    let mut g = Graph::new();
    let result = (|| {
        let mut mode = Mode::Train { dropout, rng };
        let (loss, _) = model.loss(&mut g, doc, &mut mode)?;
        let value = g.value(loss).item();
        if !value.is_finite() {
            return Err(Error::invalid(format!("document {}: non-finite loss", doc.id)));
        }
        g.backward(loss, &mut model.store)?;
        clip_gradient_norm(&mut model.store, clip)?;
        Ok(value)
    })();
    match result {
        Ok(v) => {
            optimizer.step(&mut model.store);
            Ok(v)
        }
        Err(e) => {
            model.store.zero_grads();
            Err(e)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub label: String,
    pub gold: usize,
    pub predicted: usize,
    pub correct: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub total: usize,
    pub correct: usize,
    /// Mean cross-entropy over the dataset.
    pub loss: f64,
    pub per_class: Vec<ClassCounts>,
    /// Mean training loss per epoch; empty for plain evaluation.
    pub loss_curve: Vec<f64>,
}

/// Accuracy of argmax predictions over labelled documents.
pub fn evaluate(model: &Model, docs: &[EncodedDocument]) -> Result<Metrics> {
    if docs.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let labels = &model.config.labels;
    let mut per_class: Vec<ClassCounts> = labels
        .iter()
        .map(|l| ClassCounts {
            label: l.clone(),
            gold: 0,
            predicted: 0,
            correct: 0,
        })
        .collect();
    let mut correct = 0;
    let mut loss = 0.0;
    for doc in docs {
        let gold = doc
            .label
            .ok_or_else(|| Error::invalid(format!("document {} has no label", doc.id)))?;
        let p = model.predict(doc)?;
        loss -= p.probs[gold].max(crate::numeric::graph::PROB_FLOOR).ln();
        per_class[gold].gold += 1;
        per_class[p.label].predicted += 1;
        if p.label == gold {
            per_class[gold].correct += 1;
            correct += 1;
        }
    }
    Ok(Metrics {
        accuracy: correct as f64 / docs.len() as f64,
        total: docs.len(),
        correct,
        loss: loss / docs.len() as f64,
        per_class,
        loss_curve: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_accuracy: Option<f64>,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub best_dev_accuracy: Option<f64>,
}

impl TrainReport {
    pub fn loss_curve(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.train_loss).collect()
    }
}

/// Trains `model` online. With a dev set, the parameters of the epoch with
/// the best dev accuracy are restored at the end and training stops after
/// `patience` epochs without improvement; without one, all epochs run and
/// the final parameters are kept.
pub fn train(
    model: &mut Model,
    train_docs: &[EncodedDocument],
    dev_docs: &[EncodedDocument],
    cfg: &TrainingConfig,
) -> Result<TrainReport> {
    if train_docs.is_empty() {
        return Err(Error::Empty("training set"));
    }
    cfg.validate()?;
    let mut optimizer = Optimizer::new(cfg.optimizer, cfg.learning_rate);
    let mut dropout_rng = SeededRng::stream(cfg.seed, Stream::Dropout);
    let mut shuffle_rng = SeededRng::stream(cfg.seed, Stream::Shuffle);
    let mut order: Vec<usize> = (0..train_docs.len()).collect();

    let mut epochs = Vec::new();
    let mut best: Option<(f64, usize, crate::numeric::ParameterStore)> = None;
    let mut since_best = 0;
    for epoch in 1..=cfg.epochs.max(1) {
        shuffle_rng.shuffle(&mut order);
        let mut total = 0.0;
        let mut seen = 0;
        let mut skipped = 0;
        for &i in &order {
            let doc = &train_docs[i];
            match train_one_example(model, doc, &mut optimizer, cfg.dropout, cfg.clip, &mut dropout_rng) {
                Ok(l) => {
                    total += l;
                    seen += 1;
                }
                Err(e) => {
                    warn!("skipping document {}: {e}", doc.id);
                    skipped += 1;
                }
            }
        }
        if seen == 0 {
            return Err(Error::invalid("every training document failed"));
        }
        let train_loss = total / seen as f64;
        let dev_accuracy = if dev_docs.is_empty() {
            None
        } else {
            Some(evaluate(model, dev_docs)?.accuracy)
        };
        info!("epoch {epoch}: train loss {train_loss:.6}, dev accuracy {dev_accuracy:?}");
        epochs.push(EpochRecord {
            epoch,
            train_loss,
            dev_accuracy,
            skipped,
        });
        if let Some(acc) = dev_accuracy {
            if best.as_ref().is_none_or(|b| acc > b.0) {
                best = Some((acc, epoch, model.store.clone()));
                since_best = 0;
            } else {
                since_best += 1;
            }
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    let (best_epoch, best_dev_accuracy) = match best {
        Some((acc, epoch, store)) => {
            model.store = store;
            (epoch, Some(acc))
        }
        None => (epochs.len(), None),
    };
    Ok(TrainReport {
        epochs,
        best_epoch,
        best_dev_accuracy,
    })
}

fn grid_dims() -> Vec<usize> {
    vec![32, 48, 64, 128, 256]
}
fn grid_learning_rates() -> Vec<f64> {
    vec![0.1, 0.01, 0.001]
}
fn grid_optimizers() -> Vec<Method> {
    vec![Method::Sgd, Method::Adam]
}

/// Hyperparameter grid; cells are the Cartesian product in field order.
/// Omitted axes take the default grid's values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "grid_dims")]
    pub d: Vec<usize>,
    #[serde(default = "grid_dims")]
    pub h: Vec<usize>,
    #[serde(default = "grid_learning_rates")]
    pub learning_rate: Vec<f64>,
    #[serde(default = "grid_optimizers")]
    pub optimizer: Vec<Method>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            d: grid_dims(),
            h: grid_dims(),
            learning_rate: grid_learning_rates(),
            optimizer: grid_optimizers(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub index: usize,
    pub d: usize,
    pub h: usize,
    pub learning_rate: f64,
    pub optimizer: Method,
}

impl GridCell {
    /// Identity used for seed derivation; independent of enumeration order.
    pub fn key(&self) -> String {
        format!("d={},h={},lr={},opt={}", self.d, self.h, self.learning_rate, self.optimizer)
    }

    /// `base` with this cell's hyperparameters and a seed derived from the
    /// base seed and the cell identity.
    pub fn apply(&self, base: &TrainingConfig) -> TrainingConfig {
        TrainingConfig {
            word_dim: self.d,
            hidden_dim: self.h,
            learning_rate: self.learning_rate,
            optimizer: self.optimizer,
            seed: derive_seed(base.seed, &self.key()),
            ..base.clone()
        }
    }
}

impl GridSpec {
    pub fn cells(&self) -> Vec<GridCell> {
        let mut cells = Vec::new();
        for &d in &self.d {
            for &h in &self.h {
                for &learning_rate in &self.learning_rate {
                    for &optimizer in &self.optimizer {
                        cells.push(GridCell {
                            index: cells.len(),
                            d,
                            h,
                            learning_rate,
                            optimizer,
                        });
                    }
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub cell: GridCell,
    pub seed: u64,
    pub dev_accuracy: Option<f64>,
    pub best_epoch: Option<usize>,
    pub error: Option<String>,
}

/// Trains one model per cell in parallel and ranks the cells by dev
/// accuracy; ties go to smaller `h`, then smaller `d`, then enumeration
/// order. Failed cells are kept and ranked last.
pub fn grid_search(
    setup: &Setup,
    base: &TrainingConfig,
    spec: &GridSpec,
    train_docs: &[EncodedDocument],
    dev_docs: &[EncodedDocument],
) -> Result<Vec<GridResult>> {
    let cells = spec.cells();
    if cells.is_empty() {
        return Err(Error::Empty("hyperparameter grid"));
    }
    if dev_docs.is_empty() {
        return Err(Error::Empty("development set"));
    }
    let mut results: Vec<GridResult> = cells
        .par_iter()
        .map(|cell| {
            let cfg = cell.apply(base);
            let outcome = setup
                .build_model(&cfg)
                .and_then(|mut m| train(&mut m, train_docs, dev_docs, &cfg));
            match outcome {
                Ok(report) => GridResult {
                    cell: *cell,
                    seed: cfg.seed,
                    dev_accuracy: report.best_dev_accuracy,
                    best_epoch: Some(report.best_epoch),
                    error: None,
                },
                Err(e) => {
                    warn!("grid cell {} failed: {e}", cell.key());
                    GridResult {
                        cell: *cell,
                        seed: cfg.seed,
                        dev_accuracy: None,
                        best_epoch: None,
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect();
    rank(&mut results);
    Ok(results)
}

/// Sorts by dev accuracy (failed cells last), then smaller `h`, smaller
/// `d`, enumeration order.
pub fn rank(results: &mut [GridResult]) {
    results.sort_by(|a, b| {
        let acc = |r: &GridResult| r.dev_accuracy.unwrap_or(f64::NEG_INFINITY);
        acc(b)
            .total_cmp(&acc(a))
            .then(a.cell.h.cmp(&b.cell.h))
            .then(a.cell.d.cmp(&b.cell.d))
            .then(a.cell.index.cmp(&b.cell.index))
    });
}

/// Seeded shuffle of `0..n` cut into `k` contiguous folds; the first
/// `n % k` folds get one extra item. Returns `(train, test)` index pairs.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if k < 2 {
        return Err(Error::invalid(format!("k must be at least 2, got {k}")));
    }
    if k > n {
        return Err(Error::invalid(format!("k = {k} exceeds dataset size {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    SeededRng::stream(seed, Stream::Split).shuffle(&mut order);
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let test = order[start..start + size].to_vec();
        let train = order[..start].iter().chain(&order[start + size..]).copied().collect();
        folds.push((train, test));
        start += size;
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
}

/// k-fold cross-validation; each fold trains for the full epoch budget
/// without early stopping and is scored on its held-out part.
pub fn cross_validate(
    setup: &Setup,
    cfg: &TrainingConfig,
    docs: &[EncodedDocument],
    k: usize,
) -> Result<CrossValidation> {
    let folds = kfold_split(docs.len(), k, cfg.seed)?;
    let fold_accuracies = folds
        .par_iter()
        .enumerate()
        .map(|(f, (tr, te))| {
            let cfg = TrainingConfig {
                seed: derive_seed(cfg.seed, &format!("fold={f}")),
                ..cfg.clone()
            };
            let train_docs: Vec<EncodedDocument> = tr.iter().map(|&i| docs[i].clone()).collect();
            let test_docs: Vec<EncodedDocument> = te.iter().map(|&i| docs[i].clone()).collect();
            let mut model = setup.build_model(&cfg)?;
            train(&mut model, &train_docs, &[], &cfg)?;
            Ok(evaluate(&model, &test_docs)?.accuracy)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean_accuracy = fold_accuracies.iter().sum::<f64>() / fold_accuracies.len() as f64;
    Ok(CrossValidation {
        fold_accuracies,
        mean_accuracy,
    })
}

/// Majority label among `docs`, first index on ties.
pub fn majority_label(docs: &[EncodedDocument], classes: usize) -> Option<usize> {
    let mut counts = vec![0.0; classes];
    for d in docs {
        counts[d.label?] += 1.0;
    }
    (!docs.is_empty()).then(|| argmax(&counts))
}
