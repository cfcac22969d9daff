use alloc::collections::BTreeMap;
use alloc::string::String;

/// Tone class of a character: level (P), downward (Z), or either (B) for
/// characters read in both classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tone {
    Level,
    Downward,
    Both,
}

impl Tone {
    pub fn code(self) -> char {
        match self {
            Tone::Level => 'P',
            Tone::Downward => 'Z',
            Tone::Both => 'B',
        }
    }

    pub fn from_code(c: &str) -> Option<Self> {
        match c {
            "P" => Some(Tone::Level),
            "Z" => Some(Tone::Downward),
            "B" => Some(Tone::Both),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TableError {
    #[error("line {line}: expected two tab-separated fields")]
    Malformed { line: usize },
    #[error("line {line}: unknown tone code '{code}'")]
    UnknownToneCode { line: usize, code: String },
    #[error("line {line}: '{ch}' is already defined")]
    Duplicate { line: usize, ch: char },
    #[error("line {line}: rhyme group id '{id}' is not a non-negative integer")]
    BadGroupId { line: usize, id: String },
    #[error("line {line}: tone entry must be a single character")]
    NotSingleChar { line: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ToneTable(BTreeMap<char, Tone>);

impl ToneTable {
    pub fn get(&self, c: char) -> Option<Tone> {
        self.0.get(&c).copied()
    }

    pub fn insert(&mut self, c: char, tone: Tone) -> Option<Tone> {
        self.0.insert(c, tone)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (char, Tone)> + '_ {
        self.0.iter().map(|(c, t)| (*c, *t))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RhymeTable(BTreeMap<char, u32>);

impl RhymeTable {
    pub fn get(&self, c: char) -> Option<u32> {
        self.0.get(&c).copied()
    }

    pub fn insert(&mut self, c: char, group: u32) -> Option<u32> {
        self.0.insert(c, group)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Tone class and rhyme group of one character.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CharEntry {
    pub ch: char,
    pub tone: Tone,
    pub rhyme_group: Option<u32>,
}

/// The pair of dictionaries that regulation checks consult.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    pub tones: ToneTable,
    pub rhymes: RhymeTable,
}

impl Lexicon {
    pub fn new(tones: ToneTable, rhymes: RhymeTable) -> Self {
        Self { tones, rhymes }
    }

    pub fn entry(&self, ch: char) -> Option<CharEntry> {
        self.tones.get(ch).map(|tone| CharEntry {
            ch,
            tone,
            rhyme_group: self.rhymes.get(ch),
        })
    }
}

fn split_tab(line: &str, lineno: usize) -> Result<(&str, &str), TableError> {
    let (a, b) = line
        .split_once('\t')
        .ok_or(TableError::Malformed { line: lineno })?;
    let (a, b) = (a.trim(), b.trim());
    if a.is_empty() || b.is_empty() || b.contains('\t') {
        return Err(TableError::Malformed { line: lineno });
    }
    Ok((a, b))
}

/// Parses `char<TAB>code` lines with code in {P, Z, B}. Blank lines are skipped.
pub fn parse_tone_table(input: &str) -> Result<ToneTable, TableError> {
    let mut table = ToneTable::default();
    for (idx, raw) in input.lines().enumerate() {
        let lineno = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let (ch, code) = split_tab(raw, lineno)?;
        let mut chars = ch.chars();
        let c = chars
            .next()
            .ok_or(TableError::NotSingleChar { line: lineno })?;
        if chars.next().is_some() {
            return Err(TableError::NotSingleChar { line: lineno });
        }
        let tone = Tone::from_code(code).ok_or_else(|| TableError::UnknownToneCode {
            line: lineno,
            code: code.into(),
        })?;
        if table.insert(c, tone).is_some() {
            return Err(TableError::Duplicate {
                line: lineno,
                ch: c,
            });
        }
    }
    Ok(table)
}

/// Parses `group_id<TAB>chars` lines; a character may belong to one group only.
pub fn parse_rhyme_table(input: &str) -> Result<RhymeTable, TableError> {
    let mut table = RhymeTable::default();
    for (idx, raw) in input.lines().enumerate() {
        let lineno = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let (id, chars) = split_tab(raw, lineno)?;
        let group: u32 = id.parse().map_err(|_| TableError::BadGroupId {
            line: lineno,
            id: id.into(),
        })?;
        for c in chars.chars().filter(|c| !c.is_whitespace()) {
            if table.insert(c, group).is_some() {
                return Err(TableError::Duplicate {
                    line: lineno,
                    ch: c,
                });
            }
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tone_line_parses() {
        let t = parse_tone_table("春\tP\n了\tZ\n思\tB\n").unwrap();
        assert_eq!(t.get('春'), Some(Tone::Level));
        assert_eq!(t.get('了'), Some(Tone::Downward));
        assert_eq!(t.get('思'), Some(Tone::Both));
        assert_eq!(t.get('秋'), None);
    }

    #[test]
    fn duplicate_tone_is_an_error() {
        assert_eq!(
            parse_tone_table("春\tP\n春\tZ\n"),
            Err(TableError::Duplicate { line: 2, ch: '春' })
        );
    }

    #[test]
    fn unknown_tone_code() {
        assert!(matches!(
            parse_tone_table("春\tQ\n"),
            Err(TableError::UnknownToneCode { line: 1, .. })
        ));
        assert!(matches!(
            parse_tone_table("春 P\n"),
            Err(TableError::Malformed { line: 1 })
        ));
    }

    #[test]
    fn rhyme_line_groups_every_char() {
        let r = parse_rhyme_table("3\t了少\n").unwrap();
        assert_eq!(r.get('了'), Some(3));
        assert_eq!(r.get('少'), Some(3));
        assert_eq!(r.len(), 2);
    }

    #[test]
    fn rhyme_duplicates_and_bad_ids() {
        assert_eq!(
            parse_rhyme_table("3\t了少\n4\t少\n"),
            Err(TableError::Duplicate { line: 2, ch: '少' })
        );
        assert!(matches!(
            parse_rhyme_table("x\t了\n"),
            Err(TableError::BadGroupId { .. })
        ));
    }

    #[test]
    fn lexicon_entry_combines_tables() {
        let lex = Lexicon::new(
            parse_tone_table("了\tZ\n春\tP\n").unwrap(),
            parse_rhyme_table("3\t了少\n").unwrap(),
        );
        assert_eq!(
            lex.entry('了'),
            Some(CharEntry {
                ch: '了',
                tone: Tone::Downward,
                rhyme_group: Some(3)
            })
        );
        assert_eq!(lex.entry('春').unwrap().rhyme_group, None);
        assert_eq!(lex.entry('少'), None);
    }
}
