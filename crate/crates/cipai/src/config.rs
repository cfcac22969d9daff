//! `key = value` run configuration with flag overrides.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use cipai_core::embedding::{SkipGramConfig, Strategy};
use cipai_core::generation::GenerationConfig;
use cipai_core::seq2seq::ModelConfig;
use cipai_core::training::TrainConfig;

use crate::error::CliError;
use crate::formats::format_float;

pub trait ConfigValue: Sized {
    fn parse_value(s: &str) -> Result<Self, String>;
    fn render_value(&self) -> String;
    fn rebase(&mut self, _base: &Path) {}
}

impl ConfigValue for PathBuf {
    fn parse_value(s: &str) -> Result<Self, String> {
        if s.is_empty() {
            return Err("empty path".into());
        }
        Ok(PathBuf::from(s))
    }
    fn render_value(&self) -> String {
        self.display().to_string()
    }
    fn rebase(&mut self, base: &Path) {
        if self.is_relative() {
            *self = base.join(&*self);
        }
    }
}

macro_rules! numeric {
    ($($t:ty),*) => {$(
        impl ConfigValue for $t {
            fn parse_value(s: &str) -> Result<Self, String> {
                s.parse().map_err(|_| format!("'{s}' is not a valid {}", stringify!($t)))
            }
            fn render_value(&self) -> String {
                self.to_string()
            }
        }
    )*};
}
numeric!(usize, u64);

impl ConfigValue for f64 {
    fn parse_value(s: &str) -> Result<Self, String> {
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(format!("'{s}' is not a finite number")),
        }
    }
    fn render_value(&self) -> String {
        format_float(*self)
    }
}

impl ConfigValue for Option<f64> {
    fn parse_value(s: &str) -> Result<Self, String> {
        if s == "none" {
            Ok(None)
        } else {
            f64::parse_value(s).map(Some)
        }
    }
    fn render_value(&self) -> String {
        self.map_or("none".into(), format_float)
    }
}

/// How the character embedding starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingInit {
    /// Uniform random rows, trained with the rest of the model.
    Random,
    Pretrained(Strategy),
}

impl ConfigValue for EmbeddingInit {
    fn parse_value(s: &str) -> Result<Self, String> {
        if s == "random" {
            return Ok(EmbeddingInit::Random);
        }
        Strategy::from_name(s)
            .map(EmbeddingInit::Pretrained)
            .ok_or_else(|| format!("'{s}' is not one of fixV, adaptV, random"))
    }
    fn render_value(&self) -> String {
        match self {
            EmbeddingInit::Random => "random".into(),
            EmbeddingInit::Pretrained(s) => s.name().into(),
        }
    }
}

macro_rules! run_config {
    ($($(#[$doc:meta])* $field:ident : $ty:ty = $default:expr,)*) => {
        /// Every knob of every subcommand.
        #[derive(Debug, Clone, PartialEq)]
        pub struct RunConfig {
            $($(#[$doc])* pub $field: $ty,)*
        }

        impl Default for RunConfig {
            fn default() -> Self {
                Self { $($field: $default,)* }
            }
        }

        impl RunConfig {
            pub const KEYS: &'static [&'static str] = &[$(stringify!($field),)*];

            /// Sets one key; relative paths are joined onto `base` when given.
            pub fn set(&mut self, key: &str, value: &str, base: Option<&Path>) -> Result<(), String> {
                match key {
                    $(stringify!($field) => {
                        let mut v = <$ty as ConfigValue>::parse_value(value)
                            .map_err(|e| format!("{key}: {e}"))?;
                        if let Some(b) = base {
                            v.rebase(b);
                        }
                        self.$field = v;
                    })*
                    _ => return Err(format!("unknown key '{key}'")),
                }
                Ok(())
            }

            pub fn entries(&self) -> Vec<(&'static str, String)> {
                vec![$((stringify!($field), self.$field.render_value()),)*]
            }
        }
    };
}

run_config! {
    corpus: PathBuf = "data/corpus.txt".into(),
    tones: PathBuf = "data/tones.tsv".into(),
    rhymes: PathBuf = "data/rhymes.tsv".into(),
    /// Directory of schema files, one tune per file.
    schemas: PathBuf = "data/schemas".into(),
    pretrain_corpus: PathBuf = "data/corpus.txt".into(),
    vocab: PathBuf = "out/vocab.txt".into(),
    pairs: PathBuf = "out/pairs.tsv".into(),
    vectors: PathBuf = "out/vectors.txt".into(),
    checkpoint: PathBuf = "out/model.ckpt".into(),
    train_log: PathBuf = "out/train_log.tsv".into(),
    trace: PathBuf = "out/trace.txt".into(),
    results: PathBuf = "out/results.tsv".into(),
    min_count: usize = 1,
    /// Iambics held out for evaluation.
    holdout: usize = 0,
    split_seed: u64 = 1,
    emb_dim: usize = 200,
    enc_hidden: usize = 500,
    dec_hidden: usize = 500,
    attn_dim: usize = 200,
    nonrec_dim: usize = 600,
    maxout_dim: usize = 300,
    indicator_dim: usize = 200,
    model_seed: u64 = 1,
    strategy: EmbeddingInit = EmbeddingInit::Pretrained(Strategy::AdaptV),
    sg_window: usize = 2,
    sg_negatives: usize = 5,
    sg_epochs: usize = 5,
    sg_learning_rate: f64 = 0.025,
    sg_seed: u64 = 1,
    minibatch_size: usize = 60,
    max_epochs: usize = 10,
    shuffle_seed: u64 = 1,
    rho: f64 = 0.95,
    epsilon: f64 = 1e-6,
    clip_norm: Option<f64> = None,
    /// Extra checkpoint every this many epochs; 0 writes only the final one.
    checkpoint_every: usize = 0,
    n_best: usize = 10,
    max_steps: usize = 400,
    ref_k: usize = 20,
    gc_step: f64 = 1e-5,
    gc_tolerance: f64 = 1e-4,
    gc_seed: u64 = 16,
}

impl RunConfig {
    /// Applies a config file's `key = value` lines; `#` starts a comment.
    pub fn apply_text(
        &mut self,
        text: &str,
        base: Option<&Path>,
        origin: &str,
    ) -> Result<(), CliError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::usage(
                    "config",
                    format!("{origin}:{}: expected 'key = value'", i + 1),
                )
            })?;
            self.set(k.trim(), v.trim(), base)
                .map_err(|e| CliError::usage("config", format!("{origin}:{}: {e}", i + 1)))?;
        }
        Ok(())
    }

    /// Applies a `key=value` flag override.
    pub fn apply_override(&mut self, kv: &str) -> Result<(), CliError> {
        let (k, v) = kv.split_once('=').ok_or_else(|| {
            CliError::usage("config", format!("--set expects key=value, got '{kv}'"))
        })?;
        self.set(k.trim(), v.trim(), None)
            .map_err(|e| CliError::usage("config", e))
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn model_config(
        &self,
        vocab_size: usize,
        num_tunes: usize,
    ) -> Result<ModelConfig, CliError> {
        let c = ModelConfig {
            vocab_size,
            emb_dim: self.emb_dim,
            enc_hidden: self.enc_hidden,
            dec_hidden: self.dec_hidden,
            attn_dim: self.attn_dim,
            nonrec_dim: self.nonrec_dim,
            maxout_dim: self.maxout_dim,
            indicator_dim: self.indicator_dim,
            num_tunes,
        };
        c.validate().map_err(|e| CliError::usage("config", e))?;
        Ok(c)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            minibatch_size: self.minibatch_size,
            max_epochs: self.max_epochs,
            shuffle_seed: self.shuffle_seed,
            rho: self.rho,
            epsilon: self.epsilon,
            clip_norm: self.clip_norm,
        }
    }

    pub fn skipgram_config(&self) -> SkipGramConfig {
        SkipGramConfig {
            dim: self.emb_dim,
            window: self.sg_window,
            negatives: self.sg_negatives,
            epochs: self.sg_epochs,
            learning_rate: self.sg_learning_rate,
            seed: self.sg_seed,
        }
    }

    pub fn generation_config(&self) -> GenerationConfig {
        GenerationConfig {
            n_best: self.n_best,
            max_steps: self.max_steps,
        }
    }
}
