use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use super::*;
use crate::corpus::{Special, Token, TrainPair};
use crate::seq2seq::ModelConfig;
use crate::training::{loss_and_gradients, train, TrainConfig};

fn vocab(chars: &str) -> Vocabulary {
    let tokens = Special::ALL
        .into_iter()
        .map(Token::Special)
        .chain(chars.chars().map(Token::Char))
        .collect();
    Vocabulary::from_tokens(tokens).unwrap()
}

/// A and B are always adjacent and share the contexts x, y; C lives among
/// p, q and never meets A.
fn toy_corpus(v: &Vocabulary) -> Vec<Vec<usize>> {
    let lines = ["xABy", "xBAy", "yABx", "yBAx", "pCq", "qCp", "pqCpq"];
    (0..20)
        .flat_map(|_| lines.iter().map(|l| v.encode(l)))
        .collect()
}

fn config() -> SkipGramConfig {
    SkipGramConfig {
        dim: 10,
        window: 2,
        negatives: 3,
        epochs: 30,
        learning_rate: 0.005,
        seed: 4,
    }
}

#[test]
fn co_occurring_characters_end_closer() {
    let v = vocab("ABCxypq");
    let (m, _) = train_skipgram(&toy_corpus(&v), &v, &config()).unwrap();
    let id = |c| v.id_of(c).unwrap();
    let ab = cosine(&m, id('A'), id('B'));
    let ac = cosine(&m, id('A'), id('C'));
    assert!(ab > ac, "cos(A,B) = {ab}, cos(A,C) = {ac}");
    assert!(m.matrix.is_finite());
}

#[test]
fn same_seed_same_vectors() {
    let v = vocab("ABCxypq");
    let a = train_skipgram(&toy_corpus(&v), &v, &config()).unwrap();
    let b = train_skipgram(&toy_corpus(&v), &v, &config()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn tiny_run_has_vocab_by_dim_shape() {
    let v = vocab("abcde");
    let corpus = vec![v.encode("abcdeabcde")];
    let cfg = SkipGramConfig {
        dim: 2,
        epochs: 1,
        ..config()
    };
    let (m, report) = train_skipgram(&corpus, &v, &cfg).unwrap();
    assert_eq!(m.matrix.shape(), &[v.size(), 2]);
    assert_eq!(report.epoch_losses.len(), 1);
}

#[test]
fn epoch_loss_does_not_increase() {
    let v = vocab("ABCxypq");
    let (_, report) = train_skipgram(&toy_corpus(&v), &v, &config()).unwrap();
    for w in report.epoch_losses.windows(2) {
        assert!(w[1] <= w[0] + 1e-6, "{:?}", report.epoch_losses);
    }
    assert!(report.epoch_losses.last().unwrap() < &report.epoch_losses[0]);
}

#[test]
fn input_errors() {
    let v = vocab("ab");
    assert_eq!(
        train_skipgram(&[vec![4, 9]], &v, &config()),
        Err(EmbeddingError::IdOutOfRange {
            sequence: 0,
            id: 9,
            vocab_size: 6
        })
    );
    assert_eq!(
        train_skipgram(&[vec![4], vec![5]], &v, &config()),
        Err(EmbeddingError::EmptyCorpus)
    );
    let zero = SkipGramConfig {
        negatives: 0,
        ..config()
    };
    assert_eq!(
        train_skipgram(&[vec![4, 5]], &v, &zero),
        Err(EmbeddingError::InvalidConfig { field: "negatives" })
    );
}

fn model() -> Seq2SeqModel {
    Seq2SeqModel::new(ModelConfig::toy(12, 2), 3).unwrap()
}

fn pairs() -> Vec<TrainPair> {
    vec![
        TrainPair {
            cue_ids: vec![0, 4, 5, 6, 1],
            target_ids: vec![7, 8, 9, 1],
            tune_id: 0,
        },
        TrainPair {
            cue_ids: vec![0, 6, 10, 1],
            target_ids: vec![11, 4, 5, 1],
            tune_id: 1,
        },
    ]
}

fn pretrained(rows: usize, dim: usize) -> EmbeddingMatrix {
    let data = (0..rows * dim)
        .map(|i| (i as f64 * 0.37).sin() * 0.1)
        .collect();
    EmbeddingMatrix::new(Tensor::new(vec![rows, dim], data).unwrap(), true).unwrap()
}

fn five_steps(m: &mut Seq2SeqModel) {
    let cfg = TrainConfig {
        minibatch_size: 1,
        max_epochs: 3,
        ..TrainConfig::default()
    };
    let r = train(m, &pairs(), &cfg, |_, _| {}).unwrap();
    assert_eq!(r.epochs.last().unwrap().updates, 6);
}

#[test]
fn fixv_keeps_vectors_bit_identical() {
    let mut m = model();
    let pre = pretrained(12, 4);
    init_embedding(&mut m, &pre, Strategy::FixV).unwrap();
    assert!(!m.embedding.trainable);
    five_steps(&mut m);
    assert_eq!(m.embedding.matrix, pre.matrix);
}

#[test]
fn adaptv_moves_vectors() {
    let mut m = model();
    let pre = pretrained(12, 4);
    init_embedding(&mut m, &pre, Strategy::AdaptV).unwrap();
    assert!(m.embedding.trainable);
    let (_, grads) = loss_and_gradients(&m, &pairs()).unwrap();
    assert!(grads[0].iter().any(|&g| g != 0.0));
    five_steps(&mut m);
    assert_ne!(m.embedding.matrix, pre.matrix);
}

#[test]
fn strategy_never_changes_the_loss() {
    let pre = pretrained(12, 4);
    let (mut a, mut b) = (model(), model());
    init_embedding(&mut a, &pre, Strategy::FixV).unwrap();
    init_embedding(&mut b, &pre, Strategy::AdaptV).unwrap();
    assert_eq!(
        loss_and_gradients(&a, &pairs()),
        loss_and_gradients(&b, &pairs())
    );
}

#[test]
fn mismatched_shape_names_both() {
    let mut m = model();
    let err = init_embedding(&mut m, &pretrained(11, 4), Strategy::FixV).unwrap_err();
    assert_eq!(
        err,
        EmbeddingError::ShapeMismatch {
            expected: vec![12, 4],
            found: vec![11, 4]
        }
    );
    let msg = err.to_string();
    assert!(msg.contains("[11, 4]") && msg.contains("[12, 4]"), "{msg}");
}

#[test]
fn strategy_names_round_trip() {
    for s in [Strategy::FixV, Strategy::AdaptV] {
        assert_eq!(Strategy::from_name(s.name()), Some(s));
    }
    assert_eq!(Strategy::from_name("frozen"), None);
}
