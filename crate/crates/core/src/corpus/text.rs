use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{is_terminator, CorpusError};

/// One sentence of an iambic with its closing mark.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Line {
    pub text: String,
    pub terminator: char,
}

impl Line {
    pub fn new(text: impl Into<String>, terminator: char) -> Self {
        Self {
            text: text.into(),
            terminator,
        }
    }

    pub fn char_count(&self) -> usize {
        self.text.chars().count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Iambic {
    pub tune_name: String,
    pub lines: Vec<Line>,
}

impl Iambic {
    pub fn new(tune_name: impl Into<String>, lines: Vec<Line>) -> Result<Self, CorpusError> {
        let iambic = Self {
            tune_name: tune_name.into(),
            lines,
        };
        if iambic.lines.is_empty() {
            return Err(CorpusError::InvalidIambic("no lines".into()));
        }
        for (i, l) in iambic.lines.iter().enumerate() {
            if l.text.is_empty() {
                return Err(CorpusError::InvalidIambic(format!("line {i} is empty")));
            }
            if !is_terminator(l.terminator) {
                return Err(CorpusError::InvalidIambic(format!(
                    "line {i} ends in '{}'",
                    l.terminator
                )));
            }
            if l.text
                .chars()
                .any(|c| is_terminator(c) || c.is_whitespace())
            {
                return Err(CorpusError::InvalidIambic(format!(
                    "line {i} contains punctuation or whitespace"
                )));
            }
        }
        Ok(iambic)
    }

    /// Full text with terminators, lines concatenated.
    pub fn text(&self) -> String {
        let mut s = String::new();
        for l in &self.lines {
            s.push_str(&l.text);
            s.push(l.terminator);
        }
        s
    }
}

/// Parses the corpus record format: records separated by blank lines, the
/// first line of a record is the tune name and every following line holds one
/// or more sentences, each closed by '，' or '。'.
pub fn parse_corpus(input: &str) -> Result<Vec<Iambic>, CorpusError> {
    let mut out = Vec::new();
    let mut record = 0;
    let mut tune: Option<String> = None;
    let mut lines: Vec<Line> = Vec::new();
    let mut start_line = 0;

    let mut flush = |tune: &mut Option<String>, lines: &mut Vec<Line>, record: usize, at: usize| {
        if let Some(name) = tune.take() {
            if lines.is_empty() {
                return Err(CorpusError::Parse {
                    record,
                    line: at,
                    message: format!("tune '{name}' has no sentences"),
                });
            }
            out.push(Iambic {
                tune_name: name,
                lines: core::mem::take(lines),
            });
        }
        Ok(())
    };

    for (idx, raw) in input.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            flush(&mut tune, &mut lines, record, start_line)?;
            continue;
        }
        if tune.is_none() {
            record += 1;
            start_line = lineno;
            if line.chars().any(is_terminator) {
                return Err(CorpusError::Parse {
                    record,
                    line: lineno,
                    message: "record must start with a tune name".into(),
                });
            }
            tune = Some(line.into());
            continue;
        }
        let mut text = String::new();
        for c in line.chars() {
            if is_terminator(c) {
                if text.is_empty() {
                    return Err(CorpusError::Parse {
                        record,
                        line: lineno,
                        message: "empty sentence".into(),
                    });
                }
                lines.push(Line::new(core::mem::take(&mut text), c));
            } else if c.is_whitespace() {
                return Err(CorpusError::Parse {
                    record,
                    line: lineno,
                    message: "whitespace inside a sentence".into(),
                });
            } else {
                text.push(c);
            }
        }
        if let Some(found) = text.chars().last() {
            return Err(CorpusError::UnknownTerminator {
                record,
                line: lineno,
                found,
            });
        }
    }
    flush(&mut tune, &mut lines, record, start_line)?;
    Ok(out)
}

/// Renders one iambic as a corpus record (without the separating blank line).
pub fn render_iambic(iambic: &Iambic) -> String {
    let mut s = String::new();
    s.push_str(&iambic.tune_name);
    s.push('\n');
    for l in &iambic.lines {
        s.push_str(&l.text);
        s.push(l.terminator);
        s.push('\n');
    }
    s
}
