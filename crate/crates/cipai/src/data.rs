//! Reading inputs and writing artifacts, with errors naming the module and
//! the file.

use std::fs;
use std::path::Path;

use cipai_core::corpus::{
    compile_tune_schema, parse_corpus, parse_rhyme_table, parse_tone_table, Iambic, Lexicon,
    TrainPair, TuneRegistry, Vocabulary,
};

use crate::error::CliError;
use crate::formats::{decode_checkpoint, parse_pairs, parse_vocab, Checkpoint};

pub fn require_exists(path: &Path, module: &'static str) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::data(
            module,
            format!("{}: no such file or directory", path.display()),
        ))
    }
}

pub fn read_text(path: &Path, module: &'static str) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::data(module, format!("{}: {e}", path.display())))
}

pub fn write_file(path: &Path, bytes: &[u8], module: &'static str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::data(module, format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::data(module, format!("{}: {e}", path.display())))
}

pub fn load_corpus(path: &Path) -> Result<Vec<Iambic>, CliError> {
    parse_corpus(&read_text(path, "corpus")?)
        .map_err(|e| CliError::data("corpus", format!("{}: {e}", path.display())))
}

pub fn load_lexicon(tones: &Path, rhymes: &Path) -> Result<Lexicon, CliError> {
    let t = parse_tone_table(&read_text(tones, "corpus")?)
        .map_err(|e| CliError::data("corpus", format!("{}: {e}", tones.display())))?;
    let r = parse_rhyme_table(&read_text(rhymes, "corpus")?)
        .map_err(|e| CliError::data("corpus", format!("{}: {e}", rhymes.display())))?;
    Ok(Lexicon::new(t, r))
}

/// Compiles every `.txt` file of `dir`; tune ids follow tune name order.
pub fn load_registry(dir: &Path) -> Result<TuneRegistry, CliError> {
    let entries = fs::read_dir(dir)
        .map_err(|e| CliError::data("corpus", format!("{}: {e}", dir.display())))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|e| CliError::data("corpus", format!("{}: {e}", dir.display())))?
            .path();
        if path.is_file() && path.extension().is_some_and(|x| x == "txt") {
            files.push(path);
        }
    }
    files.sort();
    let mut schemas = Vec::with_capacity(files.len());
    for f in &files {
        let s = compile_tune_schema(&read_text(f, "corpus")?)
            .map_err(|e| CliError::data("corpus", format!("{}: {e}", f.display())))?;
        schemas.push(s);
    }
    if schemas.is_empty() {
        return Err(CliError::data(
            "corpus",
            format!("{}: no schema files (*.txt)", dir.display()),
        ));
    }
    TuneRegistry::new(schemas)
        .map_err(|e| CliError::data("corpus", format!("{}: {e}", dir.display())))
}

pub fn load_vocab(path: &Path) -> Result<Vocabulary, CliError> {
    parse_vocab(&read_text(path, "corpus")?)
        .map_err(|e| CliError::data("corpus", format!("{}: {e}", path.display())))
}

pub fn load_pairs(path: &Path) -> Result<Vec<TrainPair>, CliError> {
    parse_pairs(&read_text(path, "corpus")?)
        .map_err(|e| CliError::data("corpus", format!("{}: {e}", path.display())))
}

/// Reads a checkpoint and checks it was trained with the same tunes.
pub fn load_checkpoint(path: &Path, registry: &TuneRegistry) -> Result<Checkpoint, CliError> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::data("seq2seq", format!("{}: {e}", path.display())))?;
    let ck = decode_checkpoint(&bytes)
        .map_err(|e| CliError::data("seq2seq", format!("{}: {e}", path.display())))?;
    let names: Vec<&str> = registry.names().collect();
    if ck.tunes != names {
        return Err(CliError::data(
            "seq2seq",
            format!(
                "{}: checkpoint tunes [{}] differ from the schema directory's [{}]",
                path.display(),
                ck.tunes.join(", "),
                names.join(", ")
            ),
        ));
    }
    Ok(ck)
}
