//! BLEU-2 against per-cue reference sets drawn from same-tune training
//! iambics.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::corpus::{is_terminator, Iambic, Lexicon, TuneRegistry, Vocabulary};
use crate::generation::{generate, GenerationConfig, GenerationError};
use crate::seq2seq::Seq2SeqModel;


#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("empty candidate")]
    EmptyCandidate,
    #[error("no references to score against")]
    NoReferences,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("{test} test iambics but {refs} reference sets")]
    LengthMismatch { test: usize, refs: usize },
    #[error("test iambic {index} ({tune}): {source}")]
    Generation {
        index: usize,
        tune: String,
        source: GenerationError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BleuScore {
    pub bleu2: f64,
    /// Clipped unigram precision.
    pub p1: f64,
    /// Clipped bigram precision, smoothed when no bigram matches.
    pub p2: f64,
    pub brevity_penalty: f64,
}

fn counts<T: Ord + Copy>(items: impl Iterator<Item = T>) -> BTreeMap<T, usize> {
    let mut m = BTreeMap::new();
    for x in items {
        *m.entry(x).or_insert(0) += 1;
    }
    m
}

fn bigrams(s: &[char]) -> impl Iterator<Item = (char, char)> + '_ {
    s.windows(2).map(|w| (w[0], w[1]))
}

/// Matches of `cand` counts clipped by the per-item maximum over `refs`.
fn clipped<T: Ord + Copy>(cand: &BTreeMap<T, usize>, refs: &[BTreeMap<T, usize>]) -> usize {
    cand.iter()
        .map(|(k, &n)| {
            let max_ref = refs
                .iter()
                .map(|r| r.get(k).copied().unwrap_or(0))
                .max()
                .unwrap_or(0);
            n.min(max_ref)
        })
        .sum()
}

/// BLEU with unigrams and bigrams.
///
/// `p1`, `p2` are clipped precisions against the per-n-gram maximum count
/// over the references. With zero bigram matches `p2 = 1 / (2 B)`, where
/// `B` is the candidate's bigram count (at least 1). The brevity penalty
/// is `exp(1 - r / c)` when the candidate length `c` is below `r`, the
/// reference length closest to `c` (the shorter one on ties).
/// `bleu2 = BP * sqrt(p1 * p2)`, and 0 when `p1 = 0`.
pub fn bleu2(candidate: &[char], references: &[Vec<char>]) -> Result<BleuScore, EvalError> {
    if candidate.is_empty() {
        return Err(EvalError::EmptyCandidate);
    }
    if references.is_empty() {
        return Err(EvalError::NoReferences);
    }
    let c = candidate.len();
    let uni_refs: Vec<_> = references
        .iter()
        .map(|r| counts(r.iter().copied()))
        .collect();
    let bi_refs: Vec<_> = references.iter().map(|r| counts(bigrams(r))).collect();
    let p1 = clipped(&counts(candidate.iter().copied()), &uni_refs) as f64 / c as f64;
    let n_bigrams = c.saturating_sub(1);
    let bi_matches = clipped(&counts(bigrams(candidate)), &bi_refs);
    let p2 = if bi_matches == 0 {
        1.0 / (2.0 * n_bigrams.max(1) as f64)
    } else {
        bi_matches as f64 / n_bigrams as f64
    };
    let r = references
        .iter()
        .map(Vec::len)
        .min_by_key(|&len| (len.abs_diff(c), len))
        .expect("references checked non-empty");
    let brevity_penalty = if c < r {
        libm::exp(1.0 - r as f64 / c as f64)
    } else {
        1.0
    };
    let bleu2 = if p1 == 0.0 {
        0.0
    } else {
        brevity_penalty * libm::sqrt(p1 * p2)
    };
    Ok(BleuScore {
        bleu2,
        p1,
        p2,
        brevity_penalty,
    })
}

/// Characters of every line after the first, terminators dropped.
pub fn remainder_chars(iambic: &Iambic) -> Vec<char> {
    iambic.lines[1..]
        .iter()
        .flat_map(|l| l.text.chars())
        .collect()
}

/// Text with terminators removed.
pub fn strip_terminators(s: &str) -> Vec<char> {
    s.chars().filter(|&c| !is_terminator(c)).collect()
}

/// Dice coefficient of the character-bigram multisets of `a` and `b`.
/// Strings without bigrams score 1 against themselves and 0 otherwise.
pub fn bigram_dice(a: &str, b: &str) -> f64 {
    let (a, b): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
    let (ca, cb) = (counts(bigrams(&a)), counts(bigrams(&b)));
    let (na, nb) = (a.len().saturating_sub(1), b.len().saturating_sub(1));
    if na + nb == 0 {
        return if a == b { 1.0 } else { 0.0 };
    }
    let common: usize = ca
        .iter()
        .map(|(k, &n)| n.min(cb.get(k).copied().unwrap_or(0)))
        .sum();
    2.0 * common as f64 / (na + nb) as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSet {
    pub cue: String,
    pub tune_name: String,
    /// Remainders of the selected training iambics, without terminators.
    pub references: Vec<Vec<char>>,
    /// Corpus indices of the selected training iambics, best first.
    pub sources: Vec<usize>,
}

/// For each test iambic, the `k` same-tune training iambics whose first
/// lines have the highest bigram Dice with the cue, ties by corpus order.
/// A test tune absent from training yields an empty set.
pub fn build_reference_sets(
    test: &[Iambic],
    train: &[Iambic],
    k: usize,
) -> Result<Vec<ReferenceSet>, EvalError> {
    if k == 0 {
        return Err(EvalError::InvalidK);
    }
    Ok(test
        .iter()
        .map(|t| {
            let cue = &t.lines[0].text;
            let mut scored: Vec<(usize, f64)> = train
                .iter()
                .enumerate()
                .filter(|(_, x)| x.tune_name == t.tune_name && x.lines.len() > 1)
                .map(|(i, x)| (i, bigram_dice(cue, &x.lines[0].text)))
                .collect();
            scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            scored.truncate(k);
            ReferenceSet {
                cue: cue.clone(),
                tune_name: t.tune_name.clone(),
                references: scored
                    .iter()
                    .map(|&(i, _)| remainder_chars(&train[i]))
                    .collect(),
                sources: scored.iter().map(|&(i, _)| i).collect(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ItemResult {
    pub cue: String,
    pub tune_name: String,
    /// Generated remainder with terminators.
    pub candidate: String,
    /// `None` when the reference set was empty.
    pub score: Option<BleuScore>,
    pub num_refs: usize,
    pub completed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub items: Vec<ItemResult>,
    /// Mean BLEU-2 over scored items; 0 when none were scored.
    pub mean_bleu2: f64,
    pub scored: usize,
    /// Items skipped for an empty reference set.
    pub excluded: usize,
}

/// Generates from every test cue with constraints on and scores the
/// remainder against that cue's reference set.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_corpus(
    model: &Seq2SeqModel,
    vocab: &Vocabulary,
    registry: &TuneRegistry,
    lexicon: &Lexicon,
    test: &[Iambic],
    references: &[ReferenceSet],
    config: &GenerationConfig,
) -> Result<EvalReport, EvalError> {
    if test.len() != references.len() {
        return Err(EvalError::LengthMismatch {
            test: test.len(),
            refs: references.len(),
        });
    }
    let mut items = Vec::with_capacity(test.len());
    let (mut sum, mut scored, mut excluded) = (0.0, 0usize, 0usize);
    for (index, (t, refs)) in test.iter().zip(references).enumerate() {
        let g = generate(
            model,
            vocab,
            registry,
            lexicon,
            &t.lines[0].text,
            &t.tune_name,
            config,
        )
        .map_err(|source| EvalError::Generation {
            index,
            tune: t.tune_name.clone(),
            source,
        })?;
        let candidate = g.remainder();
        let chars = strip_terminators(&candidate);
        let score = if refs.references.is_empty() {
            excluded += 1;
            None
        } else if chars.is_empty() {
            scored += 1;
            Some(BleuScore {
                bleu2: 0.0,
                p1: 0.0,
                p2: 0.0,
                brevity_penalty: 0.0,
            })
        } else {
            let s = bleu2(&chars, &refs.references)?;
            sum += s.bleu2;
            scored += 1;
            Some(s)
        };
        items.push(ItemResult {
            cue: t.lines[0].text.clone(),
            tune_name: t.tune_name.clone(),
            candidate,
            score,
            num_refs: refs.references.len(),
            completed: g.completed,
        });
    }
    Ok(EvalReport {
        items,
        mean_bleu2: if scored == 0 {
            0.0
        } else {
            sum / scored as f64
        },
        scored,
        excluded,
    })
}
