use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{is_terminator, CorpusError, Iambic, COMMA, PERIOD};

/// Reserved tokens; their ids are their discriminants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Special {
    Bos = 0,
    Eos = 1,
    Unk = 2,
    Pad = 3,
}

impl Special {
    pub const ALL: [Special; 4] = [Special::Bos, Special::Eos, Special::Unk, Special::Pad];

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Special::Bos => "<bos>",
            Special::Eos => "<eos>",
            Special::Unk => "<unk>",
            Special::Pad => "<pad>",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|sp| sp.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Token {
    Special(Special),
    Char(char),
}

/// Dense bijection between tokens and ids `0..size`; ids 0-3 are the
/// specials in [`Special`] order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<Token>,
    index: BTreeMap<char, usize>,
}

impl Vocabulary {
    /// Rebuilds a vocabulary from its tokens in id order.
    pub fn from_tokens(tokens: Vec<Token>) -> Result<Self, CorpusError> {
        for (id, sp) in Special::ALL.iter().enumerate() {
            if tokens.get(id) != Some(&Token::Special(*sp)) {
                return Err(CorpusError::Vocabulary(format!(
                    "id {id} must be {}",
                    sp.name()
                )));
            }
        }
        let mut index = BTreeMap::new();
        for (id, t) in tokens.iter().enumerate().skip(Special::ALL.len()) {
            match t {
                Token::Special(sp) => {
                    return Err(CorpusError::Vocabulary(format!(
                        "{} repeated at id {id}",
                        sp.name()
                    )))
                }
                Token::Char(c) => {
                    if index.insert(*c, id).is_some() {
                        return Err(CorpusError::Vocabulary(format!(
                            "'{c}' repeated at id {id}"
                        )));
                    }
                }
            }
        }
        Ok(Self { tokens, index })
    }

    pub fn size(&self) -> usize {
        self.tokens.len()
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn token(&self, id: usize) -> Option<Token> {
        self.tokens.get(id).copied()
    }

    pub fn id_of(&self, c: char) -> Option<usize> {
        self.index.get(&c).copied()
    }

    pub fn char_of(&self, id: usize) -> Option<char> {
        match self.tokens.get(id) {
            Some(Token::Char(c)) => Some(*c),
            _ => None,
        }
    }

    /// Id of `c`, or UNK when it is out of vocabulary.
    pub fn encode_char(&self, c: char) -> usize {
        self.id_of(c).unwrap_or(Special::Unk.id())
    }

    pub fn encode(&self, text: &str) -> Vec<usize> {
        text.chars().map(|c| self.encode_char(c)).collect()
    }

    /// Characters for `ids`; specials are rendered by name.
    pub fn decode(&self, ids: &[usize]) -> String {
        let mut s = String::new();
        for &id in ids {
            match self.tokens.get(id) {
                Some(Token::Char(c)) => s.push(*c),
                Some(Token::Special(sp)) => s.push_str(sp.name()),
                None => s.push_str("<?>"),
            }
        }
        s
    }

    pub fn is_terminator_id(&self, id: usize) -> bool {
        self.char_of(id).is_some_and(is_terminator)
    }

    pub fn is_special_id(&self, id: usize) -> bool {
        id < Special::ALL.len()
    }
}

/// Specials first, then characters by descending corpus frequency with ties
/// broken by codepoint. Both terminator marks are always present.
pub fn build_vocabulary(iambics: &[Iambic], min_count: usize) -> Result<Vocabulary, CorpusError> {
    if min_count == 0 {
        return Err(CorpusError::InvalidMinCount);
    }
    if iambics.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let mut counts: BTreeMap<char, usize> = BTreeMap::new();
    for iambic in iambics {
        for line in &iambic.lines {
            for c in line.text.chars() {
                *counts.entry(c).or_default() += 1;
            }
            *counts.entry(line.terminator).or_default() += 1;
        }
    }
    counts.entry(COMMA).or_default();
    counts.entry(PERIOD).or_default();
    let mut chars: Vec<(char, usize)> = counts
        .into_iter()
        .filter(|&(c, n)| n >= min_count || is_terminator(c))
        .collect();
    chars.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let tokens = Special::ALL
        .into_iter()
        .map(Token::Special)
        .chain(chars.into_iter().map(|(c, _)| Token::Char(c)))
        .collect();
    Vocabulary::from_tokens(tokens)
}
