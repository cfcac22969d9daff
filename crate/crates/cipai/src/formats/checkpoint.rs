use std::collections::BTreeMap;

use cipai_core::corpus::{Special, Token, Vocabulary};
use cipai_core::seq2seq::{ModelConfig, Seq2SeqModel, TuneIndicatorTable, PARAM_COUNT};
use sha2::{Digest, Sha256};

use super::tensor::{read_tensor, read_u64, write_tensor};
use super::FormatError;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"CIPAICK1";
const DIGEST_LEN: usize = 32;

/// A trained model with everything needed to run it on new cues.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Seq2SeqModel,
    pub vocab: Vocabulary,
    /// Tune names in id order.
    pub tunes: Vec<String>,
    pub seed: u64,
}

fn manifest(ck: &Checkpoint) -> String {
    let c = &ck.model.config;
    let mut s = String::new();
    for (k, v) in [
        ("vocab_size", c.vocab_size),
        ("emb_dim", c.emb_dim),
        ("enc_hidden", c.enc_hidden),
        ("dec_hidden", c.dec_hidden),
        ("attn_dim", c.attn_dim),
        ("nonrec_dim", c.nonrec_dim),
        ("maxout_dim", c.maxout_dim),
        ("indicator_dim", c.indicator_dim),
        ("num_tunes", c.num_tunes),
    ] {
        s.push_str(&format!("{k}={v}\n"));
    }
    s.push_str(&format!("seed={}\n", ck.seed));
    s.push_str(&format!(
        "embedding_trainable={}\n",
        ck.model.embedding.trainable
    ));
    s.push_str(&format!("tunes={}\n", ck.tunes.join("\t")));
    let chars: String = ck
        .vocab
        .tokens()
        .iter()
        .filter_map(|t| match t {
            Token::Char(c) => Some(*c),
            Token::Special(_) => None,
        })
        .collect();
    s.push_str(&format!("vocab={chars}\n"));
    s
}

/// Magic, manifest length and text, tensor count, the parameters in
/// `PARAM_NAMES` order followed by the tune indicators, then a SHA-256 of
/// all preceding bytes.
pub fn encode_checkpoint(ck: &Checkpoint) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    let m = manifest(ck);
    out.extend_from_slice(&(m.len() as u64).to_le_bytes());
    out.extend_from_slice(m.as_bytes());
    out.extend_from_slice(&((PARAM_COUNT + 1) as u64).to_le_bytes());
    for p in ck.model.params() {
        write_tensor(&mut out, p);
    }
    write_tensor(&mut out, &ck.model.tune_indicators.vectors);
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

fn field<'a>(map: &BTreeMap<&str, &'a str>, key: &str) -> Result<&'a str, FormatError> {
    map.get(key)
        .copied()
        .ok_or_else(|| FormatError::Manifest(format!("missing key '{key}'")))
}

fn number<T: std::str::FromStr>(map: &BTreeMap<&str, &str>, key: &str) -> Result<T, FormatError> {
    field(map, key)?
        .parse()
        .map_err(|_| FormatError::Manifest(format!("key '{key}' is not a valid number")))
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint, FormatError> {
    if bytes.len() < CHECKPOINT_MAGIC.len() || &bytes[..CHECKPOINT_MAGIC.len()] != CHECKPOINT_MAGIC
    {
        return Err(FormatError::BadMagic);
    }
    if bytes.len() < CHECKPOINT_MAGIC.len() + DIGEST_LEN {
        return Err(FormatError::Truncated { what: "checksum" });
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if Sha256::digest(body).as_slice() != digest {
        return Err(FormatError::Checksum);
    }
    let mut input = &body[CHECKPOINT_MAGIC.len()..];
    let len = read_u64(&mut input, "manifest length")? as usize;
    if len > input.len() {
        return Err(FormatError::Truncated { what: "manifest" });
    }
    let (text, rest) = input.split_at(len);
    input = rest;
    let text = std::str::from_utf8(text).map_err(|_| FormatError::Manifest("not UTF-8".into()))?;
    let mut map = BTreeMap::new();
    for line in text.lines() {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| FormatError::Manifest(format!("malformed line '{line}'")))?;
        map.insert(k, v);
    }
    let config = ModelConfig {
        vocab_size: number(&map, "vocab_size")?,
        emb_dim: number(&map, "emb_dim")?,
        enc_hidden: number(&map, "enc_hidden")?,
        dec_hidden: number(&map, "dec_hidden")?,
        attn_dim: number(&map, "attn_dim")?,
        nonrec_dim: number(&map, "nonrec_dim")?,
        maxout_dim: number(&map, "maxout_dim")?,
        indicator_dim: number(&map, "indicator_dim")?,
        num_tunes: number(&map, "num_tunes")?,
    };
    let seed = number(&map, "seed")?;
    let trainable = number::<bool>(&map, "embedding_trainable")?;
    let tunes_field = field(&map, "tunes")?;
    let tunes: Vec<String> = if tunes_field.is_empty() {
        Vec::new()
    } else {
        tunes_field.split('\t').map(str::to_owned).collect()
    };
    if tunes.len() != config.num_tunes {
        return Err(FormatError::Manifest(format!(
            "{} tune names for num_tunes={}",
            tunes.len(),
            config.num_tunes
        )));
    }
    let tokens: Vec<Token> = Special::ALL
        .into_iter()
        .map(Token::Special)
        .chain(field(&map, "vocab")?.chars().map(Token::Char))
        .collect();
    let vocab =
        Vocabulary::from_tokens(tokens).map_err(|e| FormatError::Manifest(e.to_string()))?;
    if vocab.size() != config.vocab_size {
        return Err(FormatError::Manifest(format!(
            "vocabulary has {} entries, vocab_size={}",
            vocab.size(),
            config.vocab_size
        )));
    }
    let count = read_u64(&mut input, "tensor count")? as usize;
    if count != PARAM_COUNT + 1 {
        return Err(FormatError::Manifest(format!(
            "expected {} tensors, found {count}",
            PARAM_COUNT + 1
        )));
    }
    let mut params = Vec::with_capacity(PARAM_COUNT);
    for _ in 0..PARAM_COUNT {
        params.push(read_tensor(&mut input)?);
    }
    let vectors = read_tensor(&mut input)?;
    if !input.is_empty() {
        return Err(FormatError::Tensor(format!(
            "{} trailing bytes",
            input.len()
        )));
    }
    let model =
        Seq2SeqModel::from_params(config, params, TuneIndicatorTable { vectors }, trainable)?;
    Ok(Checkpoint {
        model,
        vocab,
        tunes,
        seed,
    })
}
