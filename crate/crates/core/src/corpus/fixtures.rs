//! Bundled sample data shared by unit tests.

use alloc::vec::Vec;

use super::*;

pub const CORPUS: &str = include_str!("../../../../data/corpus.txt");
pub const TONES: &str = include_str!("../../../../data/tones.tsv");
pub const RHYMES: &str = include_str!("../../../../data/rhymes.tsv");
pub const BEAUTY_YU: &str = include_str!("../../../../data/schemas/虞美人.txt");
pub const PUSAMAN: &str = include_str!("../../../../data/schemas/菩萨蛮.txt");

pub const SCHEMAS: [&str; 10] = [
    BEAUTY_YU,
    PUSAMAN,
    include_str!("../../../../data/schemas/如梦令.txt"),
    include_str!("../../../../data/schemas/相见欢.txt"),
    include_str!("../../../../data/schemas/长相思.txt"),
    include_str!("../../../../data/schemas/卜算子.txt"),
    include_str!("../../../../data/schemas/生查子.txt"),
    include_str!("../../../../data/schemas/浣溪沙.txt"),
    include_str!("../../../../data/schemas/忆江南.txt"),
    include_str!("../../../../data/schemas/渔歌子.txt"),
];

pub fn lexicon() -> Lexicon {
    Lexicon::new(
        parse_tone_table(TONES).unwrap(),
        parse_rhyme_table(RHYMES).unwrap(),
    )
}

pub fn corpus() -> Vec<Iambic> {
    parse_corpus(CORPUS).unwrap()
}

pub fn registry() -> TuneRegistry {
    TuneRegistry::new(
        SCHEMAS
            .iter()
            .map(|s| compile_tune_schema(s).unwrap())
            .collect(),
    )
    .unwrap()
}

pub fn beauty_yu() -> (Iambic, TuneSchema, Lexicon) {
    let poem = corpus()
        .into_iter()
        .find(|p| p.tune_name == "虞美人")
        .unwrap();
    (poem, compile_tune_schema(BEAUTY_YU).unwrap(), lexicon())
}

/// The generated Pusaman exhibited alongside the model's results.
pub fn pusaman() -> (Iambic, TuneSchema, Lexicon) {
    let poem = corpus()
        .into_iter()
        .find(|p| p.tune_name == "菩萨蛮")
        .unwrap();
    (poem, compile_tune_schema(PUSAMAN).unwrap(), lexicon())
}

#[test]
fn every_bundled_iambic_conforms_to_its_tune() {
    let lex = lexicon();
    let reg = registry();
    for (i, poem) in corpus().iter().enumerate() {
        let schema = reg.by_name(&poem.tune_name).unwrap();
        let v = validate_iambic(poem, schema, &lex);
        assert!(v.is_empty(), "iambic {i} ({}): {v:?}", poem.tune_name);
    }
}
