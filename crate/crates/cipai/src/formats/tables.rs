use std::fmt::Write as _;

use cipai_core::autodiff::{GradCheckReport, Tensor};
use cipai_core::corpus::{Special, Token, TrainPair, Vocabulary};
use cipai_core::embedding::EmbeddingMatrix;
use cipai_core::evaluation::EvalReport;
use cipai_core::generation::Generation;
use cipai_core::training::EpochStats;

use super::FormatError;

/// Shortest text that parses back to the same `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:?}")
}

fn token_name(t: Token) -> String {
    match t {
        Token::Special(sp) => sp.name().to_owned(),
        Token::Char(c) => c.to_string(),
    }
}

fn parse_token(s: &str) -> Option<Token> {
    if let Some(sp) = Special::from_name(s) {
        return Some(Token::Special(sp));
    }
    let mut it = s.chars();
    match (it.next(), it.next()) {
        (Some(c), None) => Some(Token::Char(c)),
        _ => None,
    }
}

/// One token per line, line `i` holding id `i`.
pub fn render_vocab(vocab: &Vocabulary) -> String {
    let mut s = String::new();
    for &t in vocab.tokens() {
        s.push_str(&token_name(t));
        s.push('\n');
    }
    s
}

pub fn parse_vocab(text: &str) -> Result<Vocabulary, FormatError> {
    let mut tokens = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = parse_token(line).ok_or_else(|| {
            FormatError::parse(
                i + 1,
                format!("'{line}' is neither a special nor one character"),
            )
        })?;
        tokens.push(t);
    }
    Vocabulary::from_tokens(tokens).map_err(|e| FormatError::parse(0, e.to_string()))
}

fn ids(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
}

/// `tune_id<TAB>cue ids<TAB>target ids`, ids space-separated.
pub fn render_pairs(pairs: &[TrainPair]) -> String {
    let mut s = String::new();
    for p in pairs {
        let _ = writeln!(
            s,
            "{}\t{}\t{}",
            p.tune_id,
            ids(&p.cue_ids),
            ids(&p.target_ids)
        );
    }
    s
}

pub fn parse_pairs(text: &str) -> Result<Vec<TrainPair>, FormatError> {
    let parse_ids = |line: usize, f: &str| -> Result<Vec<usize>, FormatError> {
        f.split(' ')
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|_| FormatError::parse(line, format!("bad id '{s}'")))
            })
            .collect()
    };
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(FormatError::parse(i + 1, "expected 3 tab-separated fields"));
        }
        pairs.push(TrainPair {
            tune_id: fields[0]
                .parse()
                .map_err(|_| FormatError::parse(i + 1, format!("bad tune id '{}'", fields[0])))?,
            cue_ids: parse_ids(i + 1, fields[1])?,
            target_ids: parse_ids(i + 1, fields[2])?,
        });
    }
    Ok(pairs)
}

/// `V d` header, then `token v1 ... vd` per vocabulary row.
pub fn render_vectors(vocab: &Vocabulary, m: &EmbeddingMatrix) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{} {}", m.vocab_size(), m.dim());
    for (id, &t) in vocab.tokens().iter().enumerate() {
        s.push_str(&token_name(t));
        for &v in m.row(id) {
            s.push(' ');
            s.push_str(&format_float(v));
        }
        s.push('\n');
    }
    s
}

/// Vector rows keyed by token text.
pub type VectorRows = Vec<(String, Vec<f64>)>;

/// Rows keyed by token text, plus the dimension.
pub fn parse_vectors(text: &str) -> Result<(usize, VectorRows), FormatError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| FormatError::parse(1, "missing 'V d' header"))?;
    let nums: Vec<usize> = header
        .split_whitespace()
        .map(|s| {
            s.parse()
                .map_err(|_| FormatError::parse(1, "header must be 'V d'"))
        })
        .collect::<Result<_, _>>()?;
    let [count, dim] = nums[..] else {
        return Err(FormatError::parse(1, "header must be 'V d'"));
    };
    let mut rows = Vec::with_capacity(count);
    for (i, line) in lines.enumerate() {
        let n = i + 2;
        let mut parts = line.split(' ');
        let key = parts.next().unwrap_or_default().to_owned();
        let values: Vec<f64> = parts
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|_| FormatError::parse(n, format!("bad value '{s}'")))
            })
            .collect::<Result<_, _>>()?;
        if values.len() != dim {
            return Err(FormatError::parse(
                n,
                format!("{} values, header says {dim}", values.len()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FormatError::parse(n, "non-finite value"));
        }
        rows.push((key, values));
    }
    if rows.len() != count {
        return Err(FormatError::parse(
            1,
            format!("header says {count} rows, found {}", rows.len()),
        ));
    }
    Ok((dim, rows))
}

/// Lays rows out in vocabulary order; tokens without a row stay zero and
/// are returned by name.
pub fn vectors_to_embedding(
    dim: usize,
    rows: &[(String, Vec<f64>)],
    vocab: &Vocabulary,
    trainable: bool,
) -> (EmbeddingMatrix, Vec<String>) {
    let mut data = vec![0.0; vocab.size() * dim];
    let mut missing = Vec::new();
    for (id, &t) in vocab.tokens().iter().enumerate() {
        let name = token_name(t);
        match rows.iter().find(|(k, _)| *k == name) {
            Some((_, v)) => data[id * dim..(id + 1) * dim].copy_from_slice(v),
            None => missing.push(name),
        }
    }
    let m =
        EmbeddingMatrix::new(Tensor::matrix(vocab.size(), dim, data), trainable).expect("rank 2");
    (m, missing)
}

fn floats(v: &[f64]) -> String {
    v.iter()
        .map(|&x| format_float(x))
        .collect::<Vec<_>>()
        .join(",")
}

/// Header comments, then one tab-separated `key=value` record per step.
pub fn render_trace(tune: &str, cue: &str, g: &Generation) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# tune={tune}");
    let _ = writeln!(s, "# cue={cue}");
    let _ = writeln!(s, "# completed={}", g.completed);
    if !g.trace.unknown_cue_chars.is_empty() {
        let unknown: String = g.trace.unknown_cue_chars.iter().collect();
        let _ = writeln!(s, "# unknown_cue_chars={unknown}");
    }
    for w in &g.trace.cue_warnings {
        let _ = writeln!(
            s,
            "# cue_warning\tline={}\tpos={}\tkind={:?}\texpected={}\tfound={}",
            w.line,
            w.position.map_or("-".to_owned(), |p| p.to_string()),
            w.kind,
            w.expected,
            w.found
        );
    }
    for st in &g.trace.steps {
        let nbest = st
            .nbest
            .iter()
            .map(|(id, p)| format!("{id}:{}", format_float(*p)))
            .collect::<Vec<_>>()
            .join(",");
        let _ = writeln!(
            s,
            "step={}\tline={}\tpos={}\tnbest={}\tchosen={}\tadmissible={}\tforced={}\tconstrained={}\talpha={}",
            st.step,
            st.line,
            st.pos,
            nbest,
            st.chosen,
            st.admissible,
            st.forced,
            st.constrained,
            floats(&st.alpha)
        );
    }
    s
}

/// `epoch<TAB>mean_loss<TAB>wall_seconds`.
pub fn render_log_line(stats: &EpochStats, wall_seconds: f64) -> String {
    format!(
        "{}\t{}\t{:.3}\n",
        stats.epoch,
        format_float(stats.mean_loss),
        wall_seconds
    )
}

/// `cue<TAB>bleu2<TAB>p1<TAB>p2<TAB>bp<TAB>num_refs` per item, `NA` scores
/// for items without references, then a `#` summary line.
pub fn render_results(report: &EvalReport) -> String {
    let mut s = String::new();
    for item in &report.items {
        let scores = match &item.score {
            Some(b) => [b.bleu2, b.p1, b.p2, b.brevity_penalty]
                .map(format_float)
                .join("\t"),
            None => ["NA"; 4].join("\t"),
        };
        let _ = writeln!(s, "{}\t{}\t{}", item.cue, scores, item.num_refs);
    }
    let _ = writeln!(
        s,
        "# mean_bleu2={}\tscored={}\texcluded={}",
        format_float(report.mean_bleu2),
        report.scored,
        report.excluded
    );
    s
}

/// `name<TAB>elements<TAB>max_rel_error<TAB>max_abs_error` per parameter and
/// a summary line.
pub fn render_grad_report(report: &GradCheckReport) -> String {
    let mut s = String::new();
    for p in &report.params {
        let _ = writeln!(
            s,
            "{}\t{}\t{:.3e}\t{:.3e}",
            p.name, p.elements, p.max_rel_error, p.max_abs_error
        );
    }
    let _ = writeln!(
        s,
        "max_rel_error={:.3e}\ttolerance={:e}\tstep={:e}\tpassed={}",
        report.max_rel_error(),
        report.tolerance,
        report.step,
        report.passed()
    );
    s
}
