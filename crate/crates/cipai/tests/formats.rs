use cipai::formats::*;
use cipai_core::autodiff::Tensor;
use cipai_core::corpus::{build_vocabulary, parse_corpus, TrainPair};
use cipai_core::embedding::EmbeddingMatrix;
use cipai_core::seq2seq::{ModelConfig, Seq2SeqModel};
use proptest::prelude::*;

const CORPUS: &str = include_str!("../../../data/corpus.txt");

fn checkpoint() -> Checkpoint {
    let corpus = parse_corpus(CORPUS).unwrap();
    let vocab = build_vocabulary(&corpus, 1).unwrap();
    let model = Seq2SeqModel::new(ModelConfig::toy(vocab.size(), 3), 9).unwrap();
    Checkpoint {
        model,
        vocab,
        tunes: vec!["甲".into(), "乙".into(), "丙".into()],
        seed: 9,
    }
}

#[test]
fn tensor_layout_is_rank_dims_values_little_endian() {
    let mut out = Vec::new();
    write_tensor(&mut out, &Tensor::matrix(1, 2, vec![1.5, -2.0]));
    let mut expected = Vec::new();
    for x in [2u64, 1, 2] {
        expected.extend_from_slice(&x.to_le_bytes());
    }
    expected.extend_from_slice(&1.5f64.to_le_bytes());
    expected.extend_from_slice(&(-2.0f64).to_le_bytes());
    assert_eq!(out, expected);
}

proptest! {
    #[test]
    fn tensors_round_trip_bit_exactly(rows in 1usize..5, cols in 1usize..5, seed in any::<u64>()) {
        let data: Vec<f64> = (0..rows * cols)
            .map(|i| f64::from_bits(seed.rotate_left(i as u32) & 0x7fef_ffff_ffff_ffff))
            .collect();
        let t = Tensor::matrix(rows, cols, data);
        let mut bytes = Vec::new();
        write_tensor(&mut bytes, &t);
        write_tensor(&mut bytes, &Tensor::scalar(0.25));
        let mut input = &bytes[..];
        let back = read_tensor(&mut input).unwrap();
        prop_assert_eq!(back.shape(), t.shape());
        prop_assert!(back.data().iter().zip(t.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
        prop_assert_eq!(read_tensor(&mut input).unwrap(), Tensor::scalar(0.25));
        prop_assert!(input.is_empty());
    }

    #[test]
    fn floats_print_round_trip(bits in any::<u64>()) {
        let x = f64::from_bits(bits);
        prop_assume!(x.is_finite());
        prop_assert_eq!(format_float(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
    }
}

#[test]
fn truncated_tensor_is_an_error() {
    let mut bytes = Vec::new();
    write_tensor(&mut bytes, &Tensor::vector(vec![1.0, 2.0]));
    bytes.pop();
    assert!(matches!(
        read_tensor(&mut &bytes[..]),
        Err(FormatError::Truncated { .. })
    ));
}

#[test]
fn checkpoint_round_trips_and_is_deterministic() {
    let ck = checkpoint();
    let bytes = encode_checkpoint(&ck);
    assert_eq!(&bytes[..8], CHECKPOINT_MAGIC);
    assert_eq!(bytes, encode_checkpoint(&ck.clone()));
    let back = decode_checkpoint(&bytes).unwrap();
    assert_eq!(back, ck);
    assert_eq!(encode_checkpoint(&back), bytes);
}

#[test]
fn checkpoint_corruption_is_detected() {
    let bytes = encode_checkpoint(&checkpoint());
    let mut flipped = bytes.clone();
    let mid = flipped.len() / 2;
    flipped[mid] ^= 1;
    assert_eq!(decode_checkpoint(&flipped), Err(FormatError::Checksum));
    assert_eq!(
        decode_checkpoint(&bytes[..bytes.len() - 5]),
        Err(FormatError::Checksum)
    );
    assert_eq!(
        decode_checkpoint(b"not a checkpoint at all"),
        Err(FormatError::BadMagic)
    );
}

#[test]
fn checkpoint_keeps_the_fix_flag() {
    let mut ck = checkpoint();
    ck.model.embedding.trainable = false;
    let back = decode_checkpoint(&encode_checkpoint(&ck)).unwrap();
    assert!(!back.model.embedding.trainable);
}

#[test]
fn vocab_file_round_trips() {
    let v = checkpoint().vocab;
    let text = render_vocab(&v);
    assert!(text.starts_with("<bos>\n<eos>\n<unk>\n<pad>\n"));
    assert_eq!(parse_vocab(&text).unwrap(), v);
    assert!(matches!(
        parse_vocab("<bos>\nab\n"),
        Err(FormatError::Parse { line: 2, .. })
    ));
}

#[test]
fn pairs_file_round_trips() {
    let pairs = vec![
        TrainPair {
            cue_ids: vec![0, 5, 6, 1],
            target_ids: vec![7, 4, 1],
            tune_id: 2,
        },
        TrainPair {
            cue_ids: vec![0, 9, 1],
            target_ids: vec![1],
            tune_id: 0,
        },
    ];
    let text = render_pairs(&pairs);
    assert_eq!(text.lines().next(), Some("2\t0 5 6 1\t7 4 1"));
    assert_eq!(parse_pairs(&text).unwrap(), pairs);
    assert!(matches!(
        parse_pairs("1\t0 x\t1\n"),
        Err(FormatError::Parse { line: 1, .. })
    ));
}

#[test]
fn vectors_round_trip_and_tolerate_missing_rows() {
    let ck = checkpoint();
    let v = &ck.vocab;
    let m = EmbeddingMatrix::new(ck.model.embedding.matrix.clone(), true).unwrap();
    let text = render_vectors(v, &m);
    assert_eq!(
        text.lines().next(),
        Some(format!("{} {}", v.size(), m.dim()).as_str())
    );
    let (dim, rows) = parse_vectors(&text).unwrap();
    let (back, missing) = vectors_to_embedding(dim, &rows, v, true);
    assert!(missing.is_empty());
    assert_eq!(back.matrix, m.matrix);

    let partial = "2 3\n<bos> 1 2 3\n春 0.5 0.25 -1\n";
    let (dim, rows) = parse_vectors(partial).unwrap();
    let (e, missing) = vectors_to_embedding(dim, &rows, v, false);
    assert_eq!(missing.len(), v.size() - 2);
    assert_eq!(e.row(0), &[1.0, 2.0, 3.0]);
    assert_eq!(e.row(v.id_of('春').unwrap()), &[0.5, 0.25, -1.0]);
    assert!(!e.trainable);

    assert!(parse_vectors("1 3\nA 1 2\n").is_err());
    assert!(parse_vectors("2 1\nA 1\n").is_err());
    assert!(parse_vectors("1 1\nA NaN\n").is_err());
    assert!(parse_vectors("").is_err());
}
