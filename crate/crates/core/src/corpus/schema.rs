use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{is_terminator, Tone};

/// What a single character cell of a tune demands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ToneConstraint {
    Level,
    Downward,
    Any,
}

impl ToneConstraint {
    pub fn code(self) -> char {
        match self {
            ToneConstraint::Level => 'P',
            ToneConstraint::Downward => 'Z',
            ToneConstraint::Any => '*',
        }
    }

    fn from_code(c: char) -> Option<Self> {
        match c {
            'P' => Some(ToneConstraint::Level),
            'Z' => Some(ToneConstraint::Downward),
            '*' => Some(ToneConstraint::Any),
            _ => None,
        }
    }

    /// Whether a character of tone `tone` may fill this cell.
    pub fn accepts(self, tone: Option<Tone>) -> bool {
        match (self, tone) {
            (ToneConstraint::Any, _) => true,
            (_, None) => false,
            (_, Some(Tone::Both)) => true,
            (ToneConstraint::Level, Some(t)) => t == Tone::Level,
            (ToneConstraint::Downward, Some(t)) => t == Tone::Downward,
        }
    }
}

/// One line of a tune: per-position tones, an optional rhyme slot and the
/// closing mark.
///
/// Rhymed lines sharing a slot must end in characters of one rhyme group.
/// Slot 1 is written `R`; tunes that change rhyme mid-poem use `R2`, `R3`, ...
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LinePattern {
    pub positions: Vec<ToneConstraint>,
    pub rhyme: Option<u32>,
    pub terminator: char,
}

impl LinePattern {
    pub fn rhymed(&self) -> bool {
        self.rhyme.is_some()
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TuneSchema {
    pub tune_name: String,
    pub lines: Vec<LinePattern>,
}

impl TuneSchema {
    pub fn char_count(&self) -> usize {
        self.lines.iter().map(LinePattern::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SchemaError {
    #[error("schema has no tune name")]
    MissingName,
    #[error("schema '{0}' has no pattern lines")]
    NoLines(String),
    #[error("line {line}: empty line")]
    EmptyLine { line: usize },
    #[error("line {line}, position {position}: pattern character '{found}' is not one of P, Z, *")]
    BadPatternChar {
        line: usize,
        position: usize,
        found: char,
    },
    #[error("line {line}: missing terminator")]
    MissingTerminator { line: usize },
    #[error("line {line}: terminator '{found}' is not '，' or '。'")]
    BadTerminator { line: usize, found: String },
    #[error("line {line}: unexpected token '{token}'")]
    BadToken { line: usize, token: String },
    #[error("schema '{0}' has no rhymed line")]
    NoRhymedLine(String),
    #[error("duplicate tune '{0}'")]
    DuplicateTune(String),
}

fn parse_rhyme_marker(token: &str) -> Option<u32> {
    let rest = token.strip_prefix('R')?;
    if rest.is_empty() {
        return Some(1);
    }
    match rest.parse::<u32>() {
        Ok(n) if n >= 1 => Some(n),
        _ => None,
    }
}

/// Compiles a schema file: the tune name, then one line per sentence of the
/// form `PATTERN [R|Rn] TERMINATOR`, e.g. `*P*ZPPZ R ，`.
pub fn compile_tune_schema(input: &str) -> Result<TuneSchema, SchemaError> {
    let mut rows = input.lines().enumerate();
    let tune_name = loop {
        match rows.next() {
            Some((_, l)) if l.trim().is_empty() => continue,
            Some((_, l)) => break String::from(l.trim()),
            None => return Err(SchemaError::MissingName),
        }
    };
    let body: Vec<(usize, &str)> = rows.map(|(i, l)| (i + 1, l.trim())).collect();
    let last = body
        .iter()
        .rposition(|(_, l)| !l.is_empty())
        .map_or(0, |p| p + 1);

    let mut lines = Vec::new();
    for &(lineno, text) in &body[..last] {
        if text.is_empty() {
            return Err(SchemaError::EmptyLine { line: lineno });
        }
        let tokens: Vec<&str> = text.split_whitespace().collect();
        let pattern = tokens[0];
        let mut positions = Vec::new();
        for (p, c) in pattern.chars().enumerate() {
            let constraint = ToneConstraint::from_code(c).ok_or(SchemaError::BadPatternChar {
                line: lineno,
                position: p + 1,
                found: c,
            })?;
            positions.push(constraint);
        }
        let (rhyme, term) = match tokens.len() {
            1 => return Err(SchemaError::MissingTerminator { line: lineno }),
            2 => (None, tokens[1]),
            3 => {
                let slot = parse_rhyme_marker(tokens[1]).ok_or_else(|| SchemaError::BadToken {
                    line: lineno,
                    token: tokens[1].into(),
                })?;
                (Some(slot), tokens[2])
            }
            _ => {
                return Err(SchemaError::BadToken {
                    line: lineno,
                    token: tokens[3].into(),
                })
            }
        };
        let mut tc = term.chars();
        let terminator = match (tc.next(), tc.next()) {
            (Some(c), None) if is_terminator(c) => c,
            _ if parse_rhyme_marker(term).is_some() => {
                return Err(SchemaError::MissingTerminator { line: lineno })
            }
            _ => {
                return Err(SchemaError::BadTerminator {
                    line: lineno,
                    found: term.into(),
                })
            }
        };
        lines.push(LinePattern {
            positions,
            rhyme,
            terminator,
        });
    }
    if lines.is_empty() {
        return Err(SchemaError::NoLines(tune_name));
    }
    if !lines.iter().any(LinePattern::rhymed) {
        return Err(SchemaError::NoRhymedLine(tune_name));
    }
    Ok(TuneSchema { tune_name, lines })
}

/// Inverse of [`compile_tune_schema`].
pub fn render_tune_schema(schema: &TuneSchema) -> String {
    let mut s = String::new();
    s.push_str(&schema.tune_name);
    s.push('\n');
    for l in &schema.lines {
        s.extend(l.positions.iter().map(|p| p.code()));
        match l.rhyme {
            Some(1) => s.push_str(" R"),
            Some(n) => s.push_str(&format!(" R{n}")),
            None => {}
        }
        s.push(' ');
        s.push(l.terminator);
        s.push('\n');
    }
    s
}

/// The set of known tunes; a tune's id is its index in name order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TuneRegistry {
    schemas: Vec<TuneSchema>,
}

impl TuneRegistry {
    pub fn new(mut schemas: Vec<TuneSchema>) -> Result<Self, SchemaError> {
        schemas.sort_by(|a, b| a.tune_name.cmp(&b.tune_name));
        for w in schemas.windows(2) {
            if w[0].tune_name == w[1].tune_name {
                return Err(SchemaError::DuplicateTune(w[0].tune_name.clone()));
            }
        }
        Ok(Self { schemas })
    }

    pub fn len(&self) -> usize {
        self.schemas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.schemas.is_empty()
    }

    pub fn id_of(&self, name: &str) -> Option<usize> {
        self.schemas
            .binary_search_by(|s| s.tune_name.as_str().cmp(name))
            .ok()
    }

    pub fn get(&self, id: usize) -> Option<&TuneSchema> {
        self.schemas.get(id)
    }

    pub fn by_name(&self, name: &str) -> Option<&TuneSchema> {
        self.id_of(name).map(|i| &self.schemas[i])
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.schemas.iter().map(|s| s.tune_name.as_str())
    }

    pub fn schemas(&self) -> &[TuneSchema] {
        &self.schemas
    }
}
