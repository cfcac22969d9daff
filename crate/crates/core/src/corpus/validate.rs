use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{Iambic, Lexicon, ToneConstraint, TuneSchema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ViolationKind {
    LineCount,
    LineLength,
    Tone,
    Rhyme,
    Terminator,
    /// A constrained cell holds a character the dictionaries do not know.
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Violation {
    /// Zero-based line index.
    pub line: usize,
    /// Zero-based character position, when the violation is about one cell.
    pub position: Option<usize>,
    pub kind: ViolationKind,
    pub expected: String,
    pub found: String,
}

/// Checks line count, line lengths, terminators, tones of every constrained
/// cell and rhyme agreement within each rhyme slot.
///
/// A line of the wrong length only reports its length; its cells and rhyme
/// are not judged. Within a slot the first rhymed line with a known group
/// sets the reference.
pub fn validate_iambic(iambic: &Iambic, schema: &TuneSchema, lexicon: &Lexicon) -> Vec<Violation> {
    let mut out = Vec::new();
    if iambic.lines.len() != schema.lines.len() {
        out.push(Violation {
            line: iambic.lines.len().min(schema.lines.len()),
            position: None,
            kind: ViolationKind::LineCount,
            expected: schema.lines.len().to_string(),
            found: iambic.lines.len().to_string(),
        });
    }
    let mut reference: BTreeMap<u32, (usize, u32)> = BTreeMap::new();
    for (li, (line, pattern)) in iambic.lines.iter().zip(&schema.lines).enumerate() {
        if line.terminator != pattern.terminator {
            out.push(Violation {
                line: li,
                position: None,
                kind: ViolationKind::Terminator,
                expected: pattern.terminator.to_string(),
                found: line.terminator.to_string(),
            });
        }
        let chars: Vec<char> = line.text.chars().collect();
        if chars.len() != pattern.len() {
            out.push(Violation {
                line: li,
                position: None,
                kind: ViolationKind::LineLength,
                expected: pattern.len().to_string(),
                found: chars.len().to_string(),
            });
            continue;
        }
        for (pos, (&c, &cell)) in chars.iter().zip(&pattern.positions).enumerate() {
            if cell == ToneConstraint::Any {
                continue;
            }
            match lexicon.tones.get(c) {
                None => out.push(Violation {
                    line: li,
                    position: Some(pos),
                    kind: ViolationKind::Unknown,
                    expected: cell.code().to_string(),
                    found: c.to_string(),
                }),
                Some(t) if !cell.accepts(Some(t)) => out.push(Violation {
                    line: li,
                    position: Some(pos),
                    kind: ViolationKind::Tone,
                    expected: cell.code().to_string(),
                    found: format!("{c}:{}", t.code()),
                }),
                Some(_) => {}
            }
        }
        let Some(slot) = pattern.rhyme else { continue };
        let last = chars.len() - 1;
        let c = chars[last];
        match (lexicon.rhymes.get(c), reference.get(&slot)) {
            (None, _) => out.push(Violation {
                line: li,
                position: Some(last),
                kind: ViolationKind::Unknown,
                expected: format!("rhyme slot {slot}"),
                found: c.to_string(),
            }),
            (Some(g), None) => {
                reference.insert(slot, (li, g));
            }
            (Some(g), Some(&(ref_line, want))) if g != want => out.push(Violation {
                line: li,
                position: Some(last),
                kind: ViolationKind::Rhyme,
                expected: format!("group {want} (set by line {ref_line})"),
                found: format!("{c}:group {g}"),
            }),
            _ => {}
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::fixtures;
    use crate::corpus::{Line, Tone};
    use alloc::vec;
    use proptest::prelude::*;

    fn kinds(v: &[Violation]) -> Vec<ViolationKind> {
        v.iter().map(|x| x.kind).collect()
    }

    #[test]
    fn beauty_yu_conforms_to_its_schema() {
        let (poem, schema, lex) = fixtures::beauty_yu();
        assert_eq!(validate_iambic(&poem, &schema, &lex), vec![]);
    }

    #[test]
    fn table_five_pusaman_conforms() {
        let (poem, schema, lex) = fixtures::pusaman();
        assert_eq!(validate_iambic(&poem, &schema, &lex), vec![]);
    }

    #[test]
    fn swapping_a_rhyme_char_gives_one_rhyme_violation() {
        let (mut poem, schema, lex) = fixtures::beauty_yu();
        // 少 -> 去: both downward, different rhyme groups
        assert_eq!(lex.tones.get('去'), Some(Tone::Downward));
        assert_ne!(lex.rhymes.get('去'), lex.rhymes.get('少'));
        poem.lines[1] = Line::new("往事知多去", '。');
        let v = validate_iambic(&poem, &schema, &lex);
        assert_eq!(kinds(&v), vec![ViolationKind::Rhyme]);
        assert_eq!((v[0].line, v[0].position), (1, Some(4)));
    }

    #[test]
    fn shortened_line_gives_one_length_violation() {
        let (mut poem, schema, lex) = fixtures::beauty_yu();
        poem.lines[2] = Line::new("小楼昨夜又东", '，');
        let v = validate_iambic(&poem, &schema, &lex);
        assert_eq!(kinds(&v), vec![ViolationKind::LineLength]);
        assert_eq!(v[0].line, 2);
    }

    #[test]
    fn tone_terminator_count_and_unknown() {
        let (mut poem, schema, lex) = fixtures::beauty_yu();
        // position 1 of line 0 must be level; 月 is downward
        poem.lines[0] = Line::new("春月秋月何时了", '。');
        poem.lines.pop();
        poem.lines[3].text = "故国不X回首月明中".into();
        let v = validate_iambic(&poem, &schema, &lex);
        let mut k = kinds(&v);
        k.sort();
        assert_eq!(
            k,
            vec![
                ViolationKind::LineCount,
                ViolationKind::Tone,
                ViolationKind::Terminator,
                ViolationKind::Unknown
            ]
        );
    }

    proptest! {
        // Mutating one character only changes violations at that cell or in
        // the rhyme facts of that line's rhyme slot.
        #[test]
        fn single_mutation_is_local(line in 0usize..8, pos_seed in 0usize..100, pick in 0usize..64) {
            let (poem, schema, lex) = fixtures::beauty_yu();
            let alphabet: Vec<char> = lex.tones.iter().map(|(c, _)| c).collect();
            let before = validate_iambic(&poem, &schema, &lex);
            let mut mutated = poem.clone();
            let mut chars: Vec<char> = mutated.lines[line].text.chars().collect();
            let pos = pos_seed % chars.len();
            chars[pos] = alphabet[pick % alphabet.len()];
            mutated.lines[line].text = chars.iter().collect();
            let after = validate_iambic(&mutated, &schema, &lex);
            let slot = schema.lines[line].rhyme;
            let local = |v: &Violation| {
                (v.line == line && v.position == Some(pos))
                    || (slot.is_some()
                        && schema.lines[v.line].rhyme == slot
                        && matches!(v.kind, ViolationKind::Rhyme | ViolationKind::Unknown)
                        && v.position == Some(schema.lines[v.line].len() - 1))
            };
            let b: Vec<_> = before.iter().filter(|v| !local(v)).collect();
            let a: Vec<_> = after.iter().filter(|v| !local(v)).collect();
            prop_assert_eq!(a, b);
        }
    }
}
