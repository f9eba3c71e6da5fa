//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::Rng;

use discocat::corpus::{write_corpus, DocumentRecord};
use discocat::model::{
    attention_weight, normalized_attention, AttentionMode, Model, ModelConfig, Variant,
};
use discocat::numeric::{clip_gradient_norm, Graph, Mode, ParameterStore, SeededRng, Tensor};
use discocat::synthetic::{random_tree, CueCorpus, NonRootCues, RELATIONS};
use discocat::text::{build_vocabulary, Vocabulary};
use discocat::train::{evaluate, train, Setup, TrainingConfig};
use discocat::trees::{RelationNormalizer, RelationVocabulary};

const GRAD_EPS: f64 = 1e-5;
const GRAD_TOL: f64 = 1e-4;
/// Denominator floor for relative gradient error; central differences with
/// a 1e-5 step carry ~1e-11 absolute round-off on an O(1) loss.
const GRAD_FLOOR: f64 = 1e-6;
const REDUCTION_TOL: f64 = 1e-12;
const NORMALIZED_SUM_TOL: f64 = 1e-9;
const CLIP_TAU: f64 = 5.0;
const CLIP_TOL: f64 = 1e-9;
const UNK_TARGET: f64 = 0.05;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn small_vocab(size: usize) -> Vocabulary {
    let mut entries = vec![("<unk>".to_string(), 0), ("<num>".to_string(), 0)];
    entries.extend((2..size).map(|i| (format!("w{i}"), 1)));
    Vocabulary::from_entries(entries).unwrap()
}

fn small_model(variant: Variant, attention: AttentionMode, seed: u64) -> Model {
    let config = ModelConfig {
        word_dim: 5,
        hidden_dim: 4,
        variant,
        attention,
        labels: vec!["a".into(), "b".into(), "c".into()],
    };
    let relations = RelationVocabulary::build(&RELATIONS[..3], RelationNormalizer::default());
    Model::new(config, small_vocab(20), relations, None, seed).unwrap()
}

fn random_record(rng: &mut SeededRng, n: usize) -> DocumentRecord {
    let tree = random_tree(rng, n, &RELATIONS[..3]);
    let edus = (0..n)
        .map(|_| {
            let len = rng.gen_range(1..5);
            (0..len).map(|_| format!("w{}", rng.gen_range(2..20))).collect()
        })
        .collect();
    let mut doc = DocumentRecord {
        id: "random".into(),
        label: Some(["a", "b", "c"][rng.gen_range(0..3)].into()),
        edus,
        heads: vec![],
        relations: vec![],
        rst: None,
    };
    doc.set_tree(&tree);
    doc
}

fn gradient_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = SeededRng::new(2024);
    let mut worst = (0.0f64, String::new());
    for variant in Variant::ALL {
        for attention in [AttentionMode::Unnormalized, AttentionMode::Normalized] {
            let mut model = small_model(variant, attention, rng.gen());
            let doc = model.prepare(&random_record(&mut rng, 5)).unwrap();
            let loss_of = |m: &Model| {
                let mut g = Graph::new();
                let (l, _) = m.loss(&mut g, &doc, &mut Mode::Eval).unwrap();
                g.value(l).item()
            };
            let mut g = Graph::new();
            let (loss, _) = model.loss(&mut g, &doc, &mut Mode::Eval).unwrap();
            g.backward(loss, &mut model.store).unwrap();
            let ids: Vec<_> = model.store.ids().collect();
            let mut probe = model.clone();
            for id in ids {
                for i in 0..model.store.value(id).len() {
                    let orig = model.store.value(id).data()[i];
                    probe.store.value_mut(id).data_mut()[i] = orig + GRAD_EPS;
                    let up = loss_of(&probe);
                    probe.store.value_mut(id).data_mut()[i] = orig - GRAD_EPS;
                    let down = loss_of(&probe);
                    probe.store.value_mut(id).data_mut()[i] = orig;
                    let numeric = (up - down) / (2.0 * GRAD_EPS);
                    let analytic = model.store.grad(id).data()[i];
                    let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRAD_FLOOR);
                    if rel > worst.0 {
                        worst = (rel, format!("{variant}/{attention} {}[{i}]", model.store.name(id)));
                    }
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!("max relative error {:.2e} at {}, {secs:.1}s", worst.0, worst.1);
    if worst.0 < GRAD_TOL && secs < 30.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn reduction_equivalence() -> Outcome {
    let start = Instant::now();
    let mut full = small_model(Variant::Full, AttentionMode::Unnormalized, 7);
    let width = full.config.width();
    for id in full.composition_params().to_vec() {
        full.store.set_value(id, Tensor::identity(width)).unwrap();
    }
    let mut unlabeled = small_model(Variant::Unlabeled, AttentionMode::Unnormalized, 8);
    unlabeled.transfer_from(&full);
    let mut rng = SeededRng::new(99);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(1..9);
        let doc = full.prepare(&random_record(&mut rng, n)).unwrap();
        let (a, b) = (full.predict(&doc).unwrap(), unlabeled.predict(&doc).unwrap());
        for (x, y) in a.t_root.iter().zip(&b.t_root).chain(a.probs.iter().zip(&b.probs)) {
            worst = worst.max((x - y).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!("max abs difference {worst:.2e} over 100 documents, {secs:.2}s");
    if worst <= REDUCTION_TOL && secs < 10.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn conversion_oracle(dir: &Path) -> Outcome {
    let tree = "(Concession \
        (S (Justify \
            (N (Justify (N (Justify (N (edu 0)) (S (Elaboration (N (edu 1)) (S (edu 2)))))) (S (edu 3)))) \
            (S (Justify (N (edu 4)) (S (edu 5)) (S (edu 6)))))) \
        (N (edu 7)))";
    let path = dir.join("movie.tree");
    std::fs::write(&path, tree).unwrap();
    let output = Command::new(env!("CARGO_BIN_EXE_discocat"))
        .arg("convert-trees")
        .arg(&path)
        .output()
        .unwrap();
    if !output.status.success() {
        return Err(String::from_utf8_lossy(&output.stderr).into_owned());
    }
    let record: DocumentRecord = serde_json::from_slice(&output.stdout).map_err(|e| e.to_string())?;
    // 1-based 1→8, 2→1, 3→2, 4→1, 5→1, 6→5, 7→5, 8 = root
    let heads = vec![7, 0, 1, 0, 0, 4, 4, -1];
    let relations: Vec<Option<String>> = [
        Some("Concession"),
        Some("Justify"),
        Some("Elaboration"),
        Some("Justify"),
        Some("Justify"),
        Some("Justify"),
        Some("Justify"),
        None,
    ]
    .iter()
    .map(|r| r.map(str::to_string))
    .collect();
    let detail = format!("heads {:?}, relations {:?}", record.heads, record.relations);
    if record.heads == heads && record.relations == relations {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn setup_for(records: &[DocumentRecord]) -> Setup {
    let vocab = build_vocabulary(records.iter().flat_map(|r| r.tokens()), 0.0).unwrap().vocab;
    let relations = RelationVocabulary::build(
        records.iter().flat_map(|r| r.relations.iter().flatten()),
        RelationNormalizer::default(),
    );
    let labels: BTreeSet<String> = records.iter().filter_map(|r| r.label.clone()).collect();
    Setup {
        vocab,
        relations,
        labels: labels.into_iter().collect(),
        embeddings: None,
    }
}

fn overfitting_run() -> Outcome {
    let start = Instant::now();
    let records = CueCorpus::default().generate(17, "s");
    let setup = setup_for(&records);
    let docs = setup.prepare_strict(&records).unwrap();
    let mut cfg = TrainingConfig::new(32, 32);
    cfg.variant = Variant::Full;
    cfg.dropout = 0.0;
    cfg.epochs = 50;
    cfg.patience = 50;
    cfg.seed = 5;
    let mut model = setup.build_model(&cfg).unwrap();
    // the training set doubles as the selection set, so dev accuracy per
    // epoch is training accuracy
    let report = train(&mut model, &docs, &docs, &cfg).unwrap();
    let first = report.epochs.iter().find(|e| e.dev_accuracy == Some(1.0)).map(|e| e.epoch);
    let final_acc = evaluate(&model, &docs).unwrap().accuracy;
    let secs = start.elapsed().as_secs_f64();
    let detail = format!(
        "{} documents, first epoch at 100% train accuracy: {first:?}, kept model accuracy {final_acc}, {secs:.1}s",
        docs.len()
    );
    if first.is_some() && final_acc == 1.0 && secs < 60.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn discourse_bias() -> Outcome {
    let train_spec = CueCorpus {
        docs: 60,
        non_root: NonRootCues::Random,
        ..CueCorpus::default()
    };
    let test_spec = CueCorpus {
        docs: 40,
        non_root: NonRootCues::Contradict,
        ..CueCorpus::default()
    };
    let train_records = train_spec.generate(31, "tr");
    let test_records = test_spec.generate(32, "te");
    let setup = setup_for(&train_records);
    let train_docs = setup.prepare_strict(&train_records).unwrap();
    let test_docs = setup.prepare_strict(&test_records).unwrap();
    let accuracy = |variant| {
        let mut cfg = TrainingConfig::new(16, 16);
        cfg.variant = variant;
        cfg.dropout = 0.0;
        cfg.epochs = 20;
        cfg.seed = 3;
        let mut model = setup.build_model(&cfg).unwrap();
        train(&mut model, &train_docs, &[], &cfg).unwrap();
        evaluate(&model, &test_docs).unwrap().accuracy
    };
    let root = accuracy(Variant::Root);
    let additive = accuracy(Variant::Additive);
    let detail = format!("adversarial accuracy: root {root:.4}, additive {additive:.4}");
    if root == 1.0 && root > additive {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn attention_invariants() -> Outcome {
    let mut rng = SeededRng::new(6);
    let uniform =
        |n: usize, rng: &mut SeededRng| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect() };
    let (mut lo, mut hi, mut worst_sum) = (1.0f64, 0.0f64, 0.0f64);
    for _ in 0..1000 {
        let w = rng.gen_range(1..7);
        let mut g = Graph::new();
        let e = g.constant(Tensor::vector(uniform(w, &mut rng)));
        let t = g.constant(Tensor::vector(uniform(w, &mut rng)));
        let m = g.constant(Tensor::new(vec![w, w], uniform(w * w, &mut rng)).unwrap());
        let a = attention_weight(&mut g, e, t, m).unwrap();
        let a = g.value(a).item();
        if !(a > 0.0 && a < 1.0) {
            return Err(format!("unnormalized alpha {a} outside (0, 1)"));
        }
        lo = lo.min(a);
        hi = hi.max(a);

        let k = rng.gen_range(1..7);
        let kids: Vec<_> = (0..k).map(|_| g.constant(Tensor::vector(uniform(w, &mut rng)))).collect();
        let alphas = normalized_attention(&mut g, e, &kids, m).unwrap();
        let sum: f64 = alphas.iter().map(|&v| g.value(v).item()).sum();
        worst_sum = worst_sum.max((sum - 1.0).abs());
    }
    let mut g = Graph::new();
    let zero = g.constant(Tensor::zeros(&[3]));
    let t = g.constant(Tensor::vector(vec![0.3, -2.0, 5.0]));
    let m = g.constant(Tensor::filled(&[3, 3], 0.7));
    let half = attention_weight(&mut g, zero, t, m).unwrap();
    let half = g.value(half).item();
    let detail = format!(
        "alpha range [{lo:.4}, {hi:.4}], max |sum - 1| {worst_sum:.1e}, sigma(0) = {half}"
    );
    if worst_sum <= NORMALIZED_SUM_TOL && half == 0.5 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn clipping_and_vocabulary() -> Outcome {
    let mut rng = SeededRng::new(12);
    let mut worst = 0.0f64;
    let scales = [1e-300, 1e-8, 1.0, 5.0, 1e3, 1e150, 1e300];
    for trial in 0..200 {
        let mut store = ParameterStore::new();
        for p in 0..rng.gen_range(1..6) {
            let n = rng.gen_range(1..20);
            let id = store.add(format!("p{p}"), Tensor::zeros(&[n])).unwrap();
            let scale = scales[(trial + p) % scales.len()];
            for g in store.grad_mut(id).data_mut() {
                *g = rng.gen_range(-1.0..1.0) * scale;
            }
        }
        clip_gradient_norm(&mut store, CLIP_TAU).unwrap();
        worst = worst.max(store.grad_norm());
    }
    if worst > CLIP_TAU + CLIP_TOL {
        return Err(format!("post-clip norm {worst}"));
    }

    // Zipf-like corpus of 100,000 tokens
    let types = 5000;
    let weights: Vec<f64> = (1..=types).map(|r| 1.0 / r as f64).collect();
    let total_w: f64 = weights.iter().sum();
    let mut tokens = Vec::with_capacity(100_000);
    for _ in 0..100_000 {
        let mut x = rng.gen_range(0.0..total_w);
        let mut k = 0;
        while k + 1 < types && x >= weights[k] {
            x -= weights[k];
            k += 1;
        }
        tokens.push(format!("t{k}"));
    }
    let built = build_vocabulary(&tokens, UNK_TARGET).unwrap();

    let mut counts = std::collections::HashMap::<&str, u64>::new();
    for t in &tokens {
        *counts.entry(t).or_default() += 1;
    }
    let max_count = counts.values().copied().max().unwrap();
    let n = tokens.len() as f64;
    let best = (1..=max_count + 1)
        .map(|c| {
            let unk: u64 = counts.values().filter(|&&v| v < c).sum();
            (unk as f64 / n - UNK_TARGET).abs()
        })
        .fold(f64::INFINITY, f64::min);
    let achieved = (built.unk_rate - UNK_TARGET).abs();
    let detail = format!(
        "max post-clip norm {worst:.12}; UNK rate {:.5} (distance {achieved:.2e}, best possible {best:.2e}), vocabulary {}",
        built.unk_rate,
        built.vocab.len()
    );
    if achieved <= best + 1e-12 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn determinism_and_round_trip(dir: &Path) -> Outcome {
    let corpus = CueCorpus {
        docs: 24,
        ..CueCorpus::default()
    };
    let mut buf = Vec::new();
    write_corpus(&mut buf, &corpus.generate(8, "tr")).unwrap();
    std::fs::write(dir.join("train.jsonl"), &buf).unwrap();
    buf.clear();
    write_corpus(&mut buf, &CueCorpus { docs: 10, ..corpus.clone() }.generate(9, "dev")).unwrap();
    std::fs::write(dir.join("dev.jsonl"), &buf).unwrap();

    let run = |tag: &str| -> Result<Vec<u8>, String> {
        let config = format!(
            r#"{{"train": "train.jsonl", "dev": "dev.jsonl", "checkpoint": "model-{tag}.json",
                "metrics": "metrics-{tag}.json", "d": 8, "h": 6, "epochs": 4, "seed": 42}}"#
        );
        let path = dir.join(format!("run-{tag}.json"));
        std::fs::write(&path, config).unwrap();
        let output = Command::new(env!("CARGO_BIN_EXE_discocat"))
            .args(["train", "--config"])
            .arg(&path)
            .output()
            .unwrap();
        if !output.status.success() {
            return Err(String::from_utf8_lossy(&output.stderr).into_owned());
        }
        std::fs::read(dir.join(format!("metrics-{tag}.json"))).map_err(|e| e.to_string())
    };
    let (a, b) = (run("a")?, run("b")?);
    if a != b {
        return Err("metrics reports differ between identical runs".into());
    }

    let model = Model::load(&dir.join("model-a.json")).map_err(|e| e.to_string())?;
    let reloaded_path = dir.join("model-resaved.json");
    model.save(&reloaded_path).map_err(|e| e.to_string())?;
    let reloaded = Model::load(&reloaded_path).map_err(|e| e.to_string())?;
    let records = discocat::corpus::read_corpus(&dir.join("dev.jsonl")).unwrap();
    let mut exact = true;
    for r in &records {
        let doc = model.prepare(r).unwrap();
        exact &= model.predict(&doc).unwrap().probs == reloaded.predict(&doc).unwrap().probs;
    }
    let docs: Vec<_> = records.iter().map(|r| model.prepare(r).unwrap()).collect();
    exact &= evaluate(&model, &docs).unwrap() == evaluate(&reloaded, &docs).unwrap();
    let detail = format!("{} byte metrics report identical across runs; reload exact: {exact}", a.len());
    if exact {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let criteria: Vec<Criterion> = vec![
        ("1 gradient oracle", Box::new(gradient_oracle)),
        ("2 reduction equivalence", Box::new(reduction_equivalence)),
        ("3 conversion oracle", Box::new(|| conversion_oracle(dir.path()))),
        ("4 overfitting run", Box::new(overfitting_run)),
        ("5 discourse-bias separation", Box::new(discourse_bias)),
        ("6 attention invariants", Box::new(attention_invariants)),
        ("7 clipping and preprocessing", Box::new(clipping_and_vocabulary)),
        ("8 determinism and round trip", Box::new(|| determinism_and_round_trip(dir.path()))),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
