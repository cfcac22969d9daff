use cipai_core::corpus::{
    build_vocabulary, compile_tune_schema, make_train_pairs, parse_corpus, parse_rhyme_table,
    parse_tone_table, validate_iambic, Lexicon, TuneRegistry,
};
use cipai_core::evaluation::{bleu2, remainder_chars};
use cipai_core::generation::{compliance_report, generate, GenerationConfig};
use cipai_core::seq2seq::{ModelConfig, Seq2SeqModel};
use cipai_core::training::{train, TrainConfig};

const CORPUS: &str = include_str!("../../../data/corpus.txt");
const TONES: &str = include_str!("../../../data/tones.tsv");
const RHYMES: &str = include_str!("../../../data/rhymes.tsv");
const RUMENGLING: &str = include_str!("../../../data/schemas/如梦令.txt");
const CHANGXIANGSI: &str = include_str!("../../../data/schemas/长相思.txt");

#[test]
fn memorize_one_poem_and_give_it_back() {
    let registry = TuneRegistry::new(vec![
        compile_tune_schema(RUMENGLING).unwrap(),
        compile_tune_schema(CHANGXIANGSI).unwrap(),
    ])
    .unwrap();
    let lexicon = Lexicon::new(
        parse_tone_table(TONES).unwrap(),
        parse_rhyme_table(RHYMES).unwrap(),
    );
    let poem = parse_corpus(CORPUS)
        .unwrap()
        .into_iter()
        .find(|p| p.tune_name == "如梦令")
        .unwrap();
    let schema = registry.by_name("如梦令").unwrap();
    assert!(validate_iambic(&poem, schema, &lexicon).is_empty());

    let vocab = build_vocabulary(std::slice::from_ref(&poem), 1).unwrap();
    let pairs = make_train_pairs(std::slice::from_ref(&poem), &vocab, &registry).unwrap();
    let config = ModelConfig {
        emb_dim: 16,
        enc_hidden: 16,
        dec_hidden: 24,
        attn_dim: 12,
        nonrec_dim: 24,
        maxout_dim: 12,
        ..ModelConfig::toy(vocab.size(), registry.len())
    };
    let mut model = Seq2SeqModel::new(config, 3).unwrap();
    let cfg = TrainConfig {
        minibatch_size: 1,
        max_epochs: 120,
        ..TrainConfig::default()
    };
    let report = train(&mut model, &pairs, &cfg, |_, _| {}).unwrap();
    assert!(
        report.final_loss().unwrap() < 0.05,
        "{:?}",
        report.final_loss()
    );

    let cue = format!("{}{}", poem.lines[0].text, poem.lines[0].terminator);
    let g = generate(
        &model,
        &vocab,
        &registry,
        &lexicon,
        &cue,
        "如梦令",
        &GenerationConfig::default(),
    )
    .unwrap();
    assert!(g.completed);
    assert_eq!(g.iambic, poem);
    assert!(compliance_report(&g.iambic, schema, &lexicon).compliant());
    let candidate: Vec<char> = g
        .remainder()
        .chars()
        .filter(|c| !matches!(c, '，' | '。'))
        .collect();
    let score = bleu2(&candidate, &[remainder_chars(&poem)]).unwrap();
    assert_eq!(score.bleu2, 1.0);
}
