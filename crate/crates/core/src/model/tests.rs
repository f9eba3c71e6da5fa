use rand::Rng;

use super::*;
use crate::numeric::tensor::sigmoid;
use crate::synthetic::{random_tree, RELATIONS};
use crate::text::Vocabulary;
use crate::trees::{RelationNormalizer, RelationVocabulary};

fn vocab(size: usize) -> Vocabulary {
    let mut entries = vec![("<unk>".to_string(), 0), ("<num>".to_string(), 0)];
    entries.extend((2..size).map(|i| (format!("w{i}"), 1)));
    Vocabulary::from_entries(entries).unwrap()
}

fn model(variant: Variant, attention: AttentionMode, h: usize, d: usize, seed: u64) -> Model {
    let config = ModelConfig {
        word_dim: d,
        hidden_dim: h,
        variant,
        attention,
        labels: vec!["a".into(), "b".into(), "c".into()],
    };
    let relations = RelationVocabulary::build(&RELATIONS[..3], RelationNormalizer::default());
    Model::new(config, vocab(20), relations, None, seed).unwrap()
}

fn random_record(rng: &mut SeededRng, n: usize) -> DocumentRecord {
    let tree = random_tree(rng, n, &RELATIONS[..3]);
    let edus = (0..n)
        .map(|_| {
            let len = rng.gen_range(1..4);
            (0..len).map(|_| format!("w{}", rng.gen_range(0..22))).collect()
        })
        .collect();
    let mut doc = DocumentRecord {
        id: "doc".into(),
        label: Some(["a", "b", "c"][rng.gen_range(0..3)].into()),
        edus,
        heads: vec![],
        relations: vec![],
        rst: None,
    };
    doc.set_tree(&tree);
    doc
}

fn eval(m: &Model, doc: &EncodedDocument) -> Prediction {
    m.predict(doc).unwrap()
}

fn edu_vectors(m: &Model, doc: &EncodedDocument) -> Vec<Vec<f64>> {
    let mut g = Graph::new();
    doc.edus
        .iter()
        .map(|ids| {
            let e = encode_edu(
                &mut g,
                &m.store,
                ids,
                m.ids.embedding,
                &m.ids.fwd,
                &m.ids.bwd,
                &mut Mode::Eval,
            )
            .unwrap();
            g.value(e).data().to_vec()
        })
        .collect()
}

fn same_params_as(base: &Model, variant: Variant, attention: AttentionMode) -> Model {
    let mut m = model(variant, attention, base.config.hidden_dim, base.config.word_dim, 99);
    m.transfer_from(base);
    m
}

#[test]
fn single_edu_document() {
    let full = model(Variant::Full, AttentionMode::Unnormalized, 3, 4, 1);
    let record = DocumentRecord {
        id: "one".into(),
        label: Some("a".into()),
        edus: vec![vec!["w3".into(), "w7".into()]],
        heads: vec![-1],
        relations: vec![None],
        rst: None,
    };
    let doc = full.prepare(&record).unwrap();
    let e = edu_vectors(&full, &doc).remove(0);
    for variant in Variant::ALL {
        let m = same_params_as(&full, variant, AttentionMode::Unnormalized);
        let t = eval(&m, &doc).t_root;
        let expected: Vec<f64> = match variant {
            Variant::Root | Variant::Additive => e.clone(),
            _ => e.iter().map(|x| x.tanh()).collect(),
        };
        assert_eq!(t, expected, "{variant}");
    }
}

#[test]
fn additive_ignores_edu_order() {
    let m = model(Variant::Additive, AttentionMode::Unnormalized, 3, 4, 2);
    let mut rng = SeededRng::new(5);
    let record = random_record(&mut rng, 5);
    let mut permuted = record.clone();
    permuted.edus.reverse();
    let a = eval(&m, &m.prepare(&record).unwrap()).t_root;
    let b = eval(&m, &m.prepare(&permuted).unwrap()).t_root;
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn chain_matches_hand_unrolled() {
    // 2 -> 1 -> 0 at width 2
    let mut m = model(Variant::Full, AttentionMode::Unnormalized, 1, 2, 3);
    let w_attn = m.ids.attention.unwrap();
    m.store
        .set_value(w_attn, Tensor::from_rows(&[vec![0.5, -0.25], vec![0.1, 0.3]]).unwrap())
        .unwrap();
    let record = DocumentRecord {
        id: "chain".into(),
        label: Some("b".into()),
        edus: vec![vec!["w2".into()], vec!["w5".into(), "w6".into()], vec!["w9".into()]],
        heads: vec![-1, 0, 1],
        relations: vec![None, Some("Elaboration".into()), Some("Justify".into())],
        rst: None,
    };
    let doc = m.prepare(&record).unwrap();
    let r_el = m.relations.index("Elaboration");
    let r_ju = m.relations.index("Justify");
    m.store
        .set_value(m.ids.composition[r_el], Tensor::from_rows(&[vec![0.2, 0.0], vec![-0.4, 0.6]]).unwrap())
        .unwrap();
    m.store
        .set_value(m.ids.composition[r_ju], Tensor::from_rows(&[vec![-0.7, 0.1], vec![0.05, 0.9]]).unwrap())
        .unwrap();

    let e = edu_vectors(&m, &doc);
    let wa = [[0.5, -0.25], [0.1, 0.3]];
    let wel = [[0.2, 0.0], [-0.4, 0.6]];
    let wju = [[-0.7, 0.1], [0.05, 0.9]];
    let mv = |w: &[[f64; 2]; 2], x: &[f64]| [w[0][0] * x[0] + w[0][1] * x[1], w[1][0] * x[0] + w[1][1] * x[1]];
    let dot = |a: &[f64], b: &[f64]| a[0] * b[0] + a[1] * b[1];

    let t2 = [e[2][0].tanh(), e[2][1].tanh()];
    let a12 = sigmoid(dot(&e[1], &mv(&wa, &t2)));
    let m12 = mv(&wju, &t2);
    let t1 = [(e[1][0] + a12 * m12[0]).tanh(), (e[1][1] + a12 * m12[1]).tanh()];
    let a01 = sigmoid(dot(&e[0], &mv(&wa, &t1)));
    let m01 = mv(&wel, &t1);
    let t0 = [(e[0][0] + a01 * m01[0]).tanh(), (e[0][1] + a01 * m01[1]).tanh()];

    let p = eval(&m, &doc);
    for (x, y) in p.t_root.iter().zip(t0) {
        assert!((x - y).abs() < 1e-14, "{x} vs {y}");
    }
    let alphas: Vec<(usize, usize, f64)> = p.attention.iter().map(|r| (r.parent, r.child, r.alpha)).collect();
    assert_eq!(alphas.len(), 2);
    assert_eq!((alphas[0].0, alphas[0].1), (1, 2));
    assert!((alphas[0].2 - a12).abs() < 1e-15);
    assert!((alphas[1].2 - a01).abs() < 1e-15);
}

#[test]
fn full_with_identity_relations_equals_unlabeled() {
    let mut full = model(Variant::Full, AttentionMode::Unnormalized, 3, 4, 4);
    let width = full.config.width();
    for id in full.ids.composition.clone() {
        full.store.set_value(id, Tensor::identity(width)).unwrap();
    }
    let unl = same_params_as(&full, Variant::Unlabeled, AttentionMode::Unnormalized);
    let mut rng = SeededRng::new(8);
    for _ in 0..20 {
        let n = rng.gen_range(1..7);
        let doc = full.prepare(&random_record(&mut rng, n)).unwrap();
        let (a, b) = (eval(&full, &doc), eval(&unl, &doc));
        for (x, y) in a.t_root.iter().zip(&b.t_root).chain(a.probs.iter().zip(&b.probs)) {
            assert!((x - y).abs() <= 1e-12);
        }
    }
}

#[test]
fn root_variant_only_reads_root_edu() {
    let m = model(Variant::Root, AttentionMode::Unnormalized, 3, 4, 6);
    let mut rng = SeededRng::new(9);
    let record = random_record(&mut rng, 5);
    let root = record.dependency_tree().unwrap().root().unwrap();
    let mut changed = record.clone();
    for (i, e) in changed.edus.iter_mut().enumerate() {
        if i != root {
            *e = vec!["w17".into(), "w4".into(), "w4".into()];
        }
    }
    let a = eval(&m, &m.prepare(&record).unwrap());
    let b = eval(&m, &m.prepare(&changed).unwrap());
    assert_eq!(a.probs, b.probs);
}

#[test]
fn parameter_count_ordering() {
    let count = |v| model(v, AttentionMode::Unnormalized, 4, 5, 0).num_parameters();
    let (full, unl, add, root) = (
        count(Variant::Full),
        count(Variant::Unlabeled),
        count(Variant::Additive),
        count(Variant::Root),
    );
    assert!(full > unl && unl > add);
    assert_eq!(add, root);
}

#[test]
fn attention_and_node_bounds() {
    let mut rng = SeededRng::new(10);
    for attention in [AttentionMode::Unnormalized, AttentionMode::Normalized] {
        let m = model(Variant::Full, attention, 3, 4, 11);
        for _ in 0..20 {
            let n = rng.gen_range(2..8);
            let doc = m.prepare(&random_record(&mut rng, n)).unwrap();
            let p = eval(&m, &doc);
            assert_eq!(p.attention.len(), n - 1);
            assert!(p.t_root.iter().all(|x| x.abs() < 1.0));
            assert!((p.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            match attention {
                AttentionMode::Unnormalized => {
                    assert!(p.attention.iter().all(|r| r.alpha > 0.0 && r.alpha < 1.0));
                }
                AttentionMode::Normalized => {
                    for parent in 0..n {
                        let kids: Vec<f64> = p
                            .attention
                            .iter()
                            .filter(|r| r.parent == parent)
                            .map(|r| r.alpha)
                            .collect();
                        if !kids.is_empty() {
                            assert!((kids.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn unknown_relation_uses_reserved_matrix() {
    let m = model(Variant::Full, AttentionMode::Unnormalized, 2, 3, 12);
    let record = DocumentRecord {
        id: "u".into(),
        label: None,
        edus: vec![vec!["w3".into()], vec!["w4".into()]],
        heads: vec![-1, 0],
        relations: vec![None, Some("NeverSeen".into())],
        rst: None,
    };
    let doc = m.prepare(&record).unwrap();
    assert_eq!(doc.relation_ids, vec![None, Some(crate::trees::UNK_RELATION_ID)]);
    let p = eval(&m, &doc);
    assert!((p.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn invalid_inputs_rejected() {
    let m = model(Variant::Full, AttentionMode::Unnormalized, 2, 3, 13);
    let cyclic = DocumentRecord {
        id: "c".into(),
        label: Some("a".into()),
        edus: vec![vec!["w3".into()], vec!["w4".into()]],
        heads: vec![1, 0],
        relations: vec![Some("x".into()), Some("y".into())],
        rst: None,
    };
    assert!(m.prepare(&cyclic).is_err());
    let bad_label = DocumentRecord {
        label: Some("zzz".into()),
        heads: vec![-1, 0],
        relations: vec![None, Some("x".into())],
        ..cyclic
    };
    assert!(m.prepare(&bad_label).is_err());
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let mut rng = SeededRng::new(14);
    for variant in Variant::ALL {
        let m = model(variant, AttentionMode::Normalized, 3, 4, 15);
        let back = Model::from_json(&m.to_json().unwrap()).unwrap();
        for id in m.store.ids() {
            assert_eq!(m.store.value(id), back.store.value(id));
        }
        let doc = m.prepare(&random_record(&mut rng, 4)).unwrap();
        assert_eq!(eval(&m, &doc), eval(&back, &doc));
    }
    let m = model(Variant::Full, AttentionMode::Unnormalized, 2, 3, 16);
    let text = m.to_json().unwrap().replace("\"version\":1", "\"version\":7");
    assert!(Model::from_json(&text).is_err());
}

#[test]
fn forward_gradients_match_finite_differences() {
    let mut m = model(Variant::Full, AttentionMode::Unnormalized, 2, 3, 17);
    let mut rng = SeededRng::new(18);
    let doc = m.prepare(&random_record(&mut rng, 4)).unwrap();
    let loss_at = |m: &Model| {
        let mut g = Graph::new();
        let (l, _) = m.loss(&mut g, &doc, &mut Mode::Eval).unwrap();
        g.value(l).item()
    };
    let mut g = Graph::new();
    let (l, _) = m.loss(&mut g, &doc, &mut Mode::Eval).unwrap();
    g.backward(l, &mut m.store).unwrap();
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for id in m.store.ids().collect::<Vec<_>>() {
        for i in 0..m.store.value(id).len() {
            let mut p = m.clone();
            p.store.value_mut(id).data_mut()[i] += eps;
            let up = loss_at(&p);
            p.store.value_mut(id).data_mut()[i] -= 2.0 * eps;
            let dn = loss_at(&p);
            let num = (up - dn) / (2.0 * eps);
            let an = m.store.grad(id).data()[i];
            // below ~1e-6 central differences at this step are round-off bound
            worst = worst.max((an - num).abs() / an.abs().max(num.abs()).max(1e-6));
        }
    }
    assert!(worst < 1e-4, "max relative error {worst}");
}

#[test]
fn variant_names_parse() {
    for v in Variant::ALL {
        assert_eq!(v.to_string().parse::<Variant>().unwrap(), v);
    }
    assert!("bogus".parse::<Variant>().is_err());
    assert_eq!("normalized".parse::<AttentionMode>().unwrap(), AttentionMode::Normalized);
}
