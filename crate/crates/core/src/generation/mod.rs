//! Constrained generation: greedy decoding where each step emits the most
//! probable n-best candidate that satisfies the tune's tonal, rhyme and
//! terminator regulations.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::corpus::{
    is_terminator, validate_iambic, Iambic, Lexicon, Line, Special, ToneConstraint, TuneRegistry,
    TuneSchema, Violation, ViolationKind, Vocabulary,
};
use crate::seq2seq::{ModelError, Seq2SeqModel};


#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GenerationError {
    #[error("unknown tune '{tune}'; registered tunes: {}", registered.join(", "))]
    UnknownTune {
        tune: String,
        registered: Vec<String>,
    },
    #[error("empty cue")]
    EmptyCue,
    #[error("n_best must be at least 1")]
    InvalidNBest,
    #[error("vocabulary has {vocab} entries but the model expects {model}")]
    VocabMismatch { vocab: usize, model: usize },
    #[error("vocabulary has no characters besides terminators")]
    NoCharacters,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// What the cursor's cell demands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    Char {
        tone: ToneConstraint,
        /// Rhyme slot when this is the final character of a rhymed line.
        rhyme_slot: Option<u32>,
    },
    Terminator(char),
}

impl Cell {
    /// Whether the cell restricts the candidates at all.
    pub fn is_constrained(&self) -> bool {
        !matches!(
            self,
            Cell::Char {
                tone: ToneConstraint::Any,
                rhyme_slot: None
            }
        )
    }
}

/// Cursor over a tune's cells plus the rhyme groups committed so far.
///
/// Position `len` of a line is its terminator cell; emitting the terminator
/// moves to the next line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerationConstraint<'s> {
    pub schema: &'s TuneSchema,
    pub line_idx: usize,
    pub pos_idx: usize,
    committed: BTreeMap<u32, u32>,
}

impl<'s> GenerationConstraint<'s> {
    pub fn new(schema: &'s TuneSchema) -> Self {
        Self {
            schema,
            line_idx: 0,
            pos_idx: 0,
            committed: BTreeMap::new(),
        }
    }

    pub fn is_finished(&self) -> bool {
        self.line_idx >= self.schema.lines.len()
    }

    pub fn cell(&self) -> Option<Cell> {
        let line = self.schema.lines.get(self.line_idx)?;
        if self.pos_idx == line.len() {
            return Some(Cell::Terminator(line.terminator));
        }
        let last = self.pos_idx + 1 == line.len();
        Some(Cell::Char {
            tone: line.positions[self.pos_idx],
            rhyme_slot: if last { line.rhyme } else { None },
        })
    }

    /// Group committed for `slot`, if any.
    pub fn committed_rhyme(&self, slot: u32) -> Option<u32> {
        self.committed.get(&slot).copied()
    }

    /// Records `ch` at the cursor and moves on. The first rhymed-final
    /// character with a known group commits its slot.
    pub fn advance(&mut self, ch: char, lexicon: &Lexicon) {
        match self.cell() {
            None => {}
            Some(Cell::Terminator(_)) => {
                self.line_idx += 1;
                self.pos_idx = 0;
            }
            Some(Cell::Char { rhyme_slot, .. }) => {
                if let (Some(slot), Some(group)) = (rhyme_slot, lexicon.rhymes.get(ch)) {
                    self.committed.entry(slot).or_insert(group);
                }
                self.pos_idx += 1;
            }
        }
    }
}

/// Whether `ch` may fill the cursor's cell.
///
/// A terminator cell takes exactly the schema's mark. A character cell takes
/// a non-terminator whose tone fits (`Any` takes everything, `B` fits both
/// tones, a character missing from the tone table fits only `Any`). The
/// final cell of a rhymed line also needs a known rhyme group, equal to the
/// committed one when its slot is committed.
pub fn admissible(ch: char, constraint: &GenerationConstraint<'_>, lexicon: &Lexicon) -> bool {
    match constraint.cell() {
        None => false,
        Some(Cell::Terminator(t)) => ch == t,
        Some(Cell::Char { tone, rhyme_slot }) => {
            if is_terminator(ch) || !tone.accepts(lexicon.tones.get(ch)) {
                return false;
            }
            match rhyme_slot {
                None => true,
                Some(slot) => match (lexicon.rhymes.get(ch), constraint.committed_rhyme(slot)) {
                    (None, _) => false,
                    (Some(g), Some(want)) => g == want,
                    (Some(_), None) => true,
                },
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenerationConfig {
    pub n_best: usize,
    /// Hard bound on decoder steps.
    pub max_steps: usize,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            n_best: 10,
            max_steps: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub step: usize,
    /// Zero-based schema line and position of the emitted cell.
    pub line: usize,
    pub pos: usize,
    /// Top candidates as `(id, probability)`, most probable first.
    pub nbest: Vec<(usize, f64)>,
    pub chosen: usize,
    /// An n-best candidate satisfied the cell.
    pub admissible: bool,
    /// The emitted token was not in the n-best list.
    pub forced: bool,
    /// The cell restricted candidates.
    pub constrained: bool,
    pub alpha: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub steps: Vec<TraceStep>,
    /// Cue characters outside the vocabulary, encoded as UNK.
    pub unknown_cue_chars: Vec<char>,
    /// Regulation violations of the cue against the tune's first line.
    pub cue_warnings: Vec<Violation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    /// The cue line followed by every completed generated line.
    pub iambic: Iambic,
    /// Characters of an unfinished line when `max_steps` cut generation short.
    pub partial: String,
    /// Generation ended by completing the schema.
    pub completed: bool,
    pub trace: Trace,
}

impl Generation {
    /// Generated lines without the cue, terminators included.
    pub fn remainder(&self) -> String {
        let mut s = String::new();
        for l in &self.iambic.lines[1..] {
            s.push_str(&l.text);
            s.push(l.terminator);
        }
        s.push_str(&self.partial);
        s
    }

    /// Every constrained step had an admissible n-best candidate.
    pub fn fully_admissible(&self) -> bool {
        self.trace
            .steps
            .iter()
            .all(|s| s.admissible || !s.constrained)
    }
}

fn cue_line(cue: &str, schema: &TuneSchema) -> Result<Line, GenerationError> {
    let mut text: String = cue.chars().filter(|c| !c.is_whitespace()).collect();
    while text.chars().last().is_some_and(is_terminator) {
        text.pop();
    }
    if text.is_empty() {
        return Err(GenerationError::EmptyCue);
    }
    Ok(Line::new(text, schema.lines[0].terminator))
}

fn cue_warnings(line: &Line, schema: &TuneSchema, lexicon: &Lexicon) -> Vec<Violation> {
    let first = TuneSchema {
        tune_name: schema.tune_name.clone(),
        lines: schema.lines[..1].to_vec(),
    };
    let iambic = Iambic {
        tune_name: schema.tune_name.clone(),
        lines: alloc::vec![line.clone()],
    };
    validate_iambic(&iambic, &first, lexicon)
}

/// Ids sorted by descending probability, ties by id.
pub(crate) fn ranked(probs: &[f64]) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..probs.len()).collect();
    ids.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    ids
}

/// Picks the emission for one step: `(id, admissible, forced)`.
pub(crate) fn choose(
    order: &[usize],
    n_best: usize,
    constraint: &GenerationConstraint<'_>,
    vocab: &Vocabulary,
    lexicon: &Lexicon,
) -> (usize, bool, bool) {
    let top = &order[..n_best.min(order.len())];
    let fits = |id: usize| {
        vocab
            .char_of(id)
            .is_some_and(|c| admissible(c, constraint, lexicon))
    };
    if let Some(&id) = top.iter().find(|&&id| fits(id)) {
        return (id, true, false);
    }
    match constraint.cell() {
        Some(Cell::Terminator(t)) => (vocab.encode_char(t), false, true),
        _ => {
            let real = |id: &&usize| vocab.char_of(**id).is_some_and(|c| !is_terminator(c));
            match top.iter().find(real) {
                Some(&id) => (id, false, false),
                None => (*order.iter().find(real).unwrap_or(&order[0]), false, true),
            }
        }
    }
}

/// Generates the remainder of an iambic for `cue` under `tune_name`.
///
/// The cue is encoded as in training (`BOS`, characters, the first line's
/// terminator, `EOS`); its own violations of line one are reported as
/// warnings. Each step ranks the vocabulary, emits the most probable
/// admissible n-best candidate, and otherwise falls back to the most
/// probable n-best character. A terminator cell without its mark in the
/// n-best gets the mark inserted; a character cell whose n-best holds no
/// real character gets the best one from the whole distribution. Both
/// insertions are flagged `forced`. Specials are never emitted.
pub fn generate(
    model: &Seq2SeqModel,
    vocab: &Vocabulary,
    registry: &TuneRegistry,
    lexicon: &Lexicon,
    cue: &str,
    tune_name: &str,
    config: &GenerationConfig,
) -> Result<Generation, GenerationError> {
    if config.n_best == 0 {
        return Err(GenerationError::InvalidNBest);
    }
    if vocab.size() != model.vocab_size() {
        return Err(GenerationError::VocabMismatch {
            vocab: vocab.size(),
            model: model.vocab_size(),
        });
    }
    let has_chars =
        (0..vocab.size()).any(|id| vocab.char_of(id).is_some_and(|c| !is_terminator(c)));
    if !has_chars {
        return Err(GenerationError::NoCharacters);
    }
    let (tune_id, schema) = registry
        .id_of(tune_name)
        .and_then(|id| registry.get(id).map(|s| (id, s)))
        .ok_or_else(|| GenerationError::UnknownTune {
            tune: tune_name.into(),
            registered: registry.names().map(String::from).collect(),
        })?;
    let first = cue_line(cue, schema)?;
    let mut trace = Trace {
        steps: Vec::new(),
        unknown_cue_chars: first
            .text
            .chars()
            .filter(|&c| vocab.id_of(c).is_none())
            .collect(),
        cue_warnings: cue_warnings(&first, schema, lexicon),
    };

    let mut cue_ids = alloc::vec![Special::Bos.id()];
    cue_ids.extend(vocab.encode(&first.text));
    cue_ids.push(vocab.encode_char(first.terminator));
    cue_ids.push(Special::Eos.id());

    let enc = model.encode(&cue_ids)?;
    let (mut s, mut c) = model.init_decoder_state(&enc, tune_id)?;

    let mut constraint = GenerationConstraint::new(schema);
    for ch in first.text.chars().chain(core::iter::once(first.terminator)) {
        if constraint.line_idx > 0 {
            break;
        }
        constraint.advance(ch, lexicon);
    }
    constraint.line_idx = 1;
    constraint.pos_idx = 0;

    let mut lines = alloc::vec![first];
    let mut current = String::new();
    let mut y_prev = Special::Bos.id();
    while !constraint.is_finished() && trace.steps.len() < config.max_steps {
        let (out, alpha) = model.attend_and_decode(&enc, &s, &c, y_prev)?;
        let probs = out.probs.data();
        let order = ranked(probs);
        let cell = constraint.cell().expect("cursor inside schema");
        let (chosen, ok, forced) = choose(&order, config.n_best, &constraint, vocab, lexicon);
        let ch = vocab.char_of(chosen).expect("only characters are emitted");
        trace.steps.push(TraceStep {
            step: trace.steps.len(),
            line: constraint.line_idx,
            pos: constraint.pos_idx,
            nbest: order
                .iter()
                .take(config.n_best)
                .map(|&id| (id, probs[id]))
                .collect(),
            chosen,
            admissible: ok,
            forced,
            constrained: cell.is_constrained(),
            alpha: alpha.into_data(),
        });
        match cell {
            Cell::Terminator(_) => lines.push(Line::new(core::mem::take(&mut current), ch)),
            Cell::Char { .. } => current.push(ch),
        }
        constraint.advance(ch, lexicon);
        (s, c, y_prev) = (out.state, out.cell, chosen);
    }
    Ok(Generation {
        iambic: Iambic {
            tune_name: schema.tune_name.clone(),
            lines,
        },
        partial: current,
        completed: constraint.is_finished(),
        trace,
    })
}

/// Violation counts of a poem against its tune.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ComplianceReport {
    pub tone: usize,
    pub rhyme: usize,
    /// Line-count and line-length violations.
    pub length: usize,
    pub terminator: usize,
    pub unknown: usize,
    pub violations: Vec<Violation>,
}

impl ComplianceReport {
    pub fn compliant(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn total(&self) -> usize {
        self.violations.len()
    }
}

pub fn compliance_report(
    iambic: &Iambic,
    schema: &TuneSchema,
    lexicon: &Lexicon,
) -> ComplianceReport {
    let violations = validate_iambic(iambic, schema, lexicon);
    let mut r = ComplianceReport::default();
    for v in &violations {
        match v.kind {
            ViolationKind::Tone => r.tone += 1,
            ViolationKind::Rhyme => r.rhyme += 1,
            ViolationKind::LineCount | ViolationKind::LineLength => r.length += 1,
            ViolationKind::Terminator => r.terminator += 1,
            ViolationKind::Unknown => r.unknown += 1,
        }
    }
    r.violations = violations;
    r
}
