//! Iambic corpora, tone and rhyme dictionaries, tune schemas, the vocabulary
//! and id-encoded training pairs.

mod lexicon;
mod pairs;
mod schema;
mod text;
mod validate;
mod vocab;

use alloc::string::String;

pub use lexicon::{
    parse_rhyme_table, parse_tone_table, CharEntry, Lexicon, RhymeTable, TableError, Tone,
    ToneTable,
};
pub use pairs::{make_train_pairs, split_holdout, TrainPair};
pub use schema::{
    compile_tune_schema, render_tune_schema, LinePattern, SchemaError, ToneConstraint,
    TuneRegistry, TuneSchema,
};
pub use text::{parse_corpus, render_iambic, Iambic, Line};
pub use validate::{validate_iambic, Violation, ViolationKind};
pub use vocab::{build_vocabulary, Special, Token, Vocabulary};

/// Mid-sentence pause mark.
pub const COMMA: char = '，';
/// Sentence-final mark.
pub const PERIOD: char = '。';

pub fn is_terminator(c: char) -> bool {
    c == COMMA || c == PERIOD
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CorpusError {
    #[error("record {record}, line {line}: {message}")]
    Parse {
        record: usize,
        line: usize,
        message: String,
    },
    #[error("record {record}, line {line}: sentence must end in '，' or '。' (found '{found}')")]
    UnknownTerminator {
        record: usize,
        line: usize,
        found: char,
    },
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("min_count must be at least 1")]
    InvalidMinCount,
    #[error("invalid iambic: {0}")]
    InvalidIambic(String),
    #[error("iambic {index} uses unregistered tune '{tune}'")]
    UnregisteredTune { index: usize, tune: String },
    #[error("iambic {index} has {lines} line(s); at least 2 are needed to form a pair")]
    TooFewLines { index: usize, lines: usize },
    #[error("vocabulary: {0}")]
    Vocabulary(String),
    #[error("holdout of {requested} exceeds corpus size {available}")]
    HoldoutTooLarge { requested: usize, available: usize },
}

#[cfg(test)]
pub(crate) mod fixtures;
