//! Attention encoder-decoder: a bidirectional LSTM encoder over the cue, an
//! additive attention model, and an LSTM decoder whose first state carries
//! the global context of the cue plus a fixed tune indicator. The output
//! stack is an affine layer, pairwise maxout, and a softmax over the
//! vocabulary.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tensor, TensorError};
use crate::embedding::EmbeddingMatrix;

mod eager;
mod indicators;
mod nodes;

pub use eager::{context, lstm_step, Encoding, StepOutput};
pub use indicators::{make_tune_indicators, TuneIndicatorTable};
pub use nodes::{
    attention_node, context_node, decode_step_node, encode_node, init_state_node, lstm_step_node,
    EncodedNodes, LstmNodes, ModelNodes, StepNodes,
};


/// Half-width of the uniform range used to initialize every parameter.
pub const INIT_RANGE: f64 = 0.08;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("empty input sequence")]
    EmptyInput,
    #[error("token id {id} is outside the vocabulary of {vocab_size}")]
    IdOutOfRange { id: usize, vocab_size: usize },
    #[error("tune id {tune_id} is not among the {num_tunes} registered tunes")]
    UnknownTune { tune_id: usize, num_tunes: usize },
    #[error("{num_tunes} tune indicators requested but the indicator dimension is {dim}")]
    TooManyTunes { num_tunes: usize, dim: usize },
    #[error("model config: {0}")]
    InvalidConfig(String),
    #[error("parameter {name}: expected shape {expected:?}, found {found:?}")]
    ParamShape {
        name: &'static str,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub emb_dim: usize,
    /// Hidden units per encoder direction.
    pub enc_hidden: usize,
    pub dec_hidden: usize,
    pub attn_dim: usize,
    /// Units of the non-recurrent layer before maxout.
    pub nonrec_dim: usize,
    /// Units after maxout; pools are adjacent pairs, so `nonrec_dim = 2 * maxout_dim`.
    pub maxout_dim: usize,
    pub indicator_dim: usize,
    pub num_tunes: usize,
}

impl ModelConfig {
    /// Published sizes: 500 recurrent units, 600 non-recurrent units reduced
    /// to 300 by maxout, 200-dimensional tune indicators.
    pub fn full(vocab_size: usize, num_tunes: usize) -> Self {
        Self {
            vocab_size,
            emb_dim: 200,
            enc_hidden: 500,
            dec_hidden: 500,
            attn_dim: 200,
            nonrec_dim: 600,
            maxout_dim: 300,
            indicator_dim: 200,
            num_tunes,
        }
    }

    /// Smallest configuration exercising every component.
    pub fn toy(vocab_size: usize, num_tunes: usize) -> Self {
        Self {
            vocab_size,
            emb_dim: 4,
            enc_hidden: 8,
            dec_hidden: 8,
            attn_dim: 6,
            nonrec_dim: 10,
            maxout_dim: 5,
            indicator_dim: 6,
            num_tunes,
        }
    }

    pub fn encoder_width(&self) -> usize {
        2 * self.enc_hidden
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fields = [
            ("vocab_size", self.vocab_size),
            ("emb_dim", self.emb_dim),
            ("enc_hidden", self.enc_hidden),
            ("dec_hidden", self.dec_hidden),
            ("attn_dim", self.attn_dim),
            ("nonrec_dim", self.nonrec_dim),
            ("maxout_dim", self.maxout_dim),
            ("indicator_dim", self.indicator_dim),
            ("num_tunes", self.num_tunes),
        ];
        for (name, v) in fields {
            if v == 0 {
                return Err(ModelError::InvalidConfig(format!(
                    "{name} must be positive"
                )));
            }
        }
        if self.nonrec_dim != 2 * self.maxout_dim {
            return Err(ModelError::InvalidConfig(format!(
                "nonrec_dim {} must be twice maxout_dim {}",
                self.nonrec_dim, self.maxout_dim
            )));
        }
        if self.num_tunes > self.indicator_dim {
            return Err(ModelError::TooManyTunes {
                num_tunes: self.num_tunes,
                dim: self.indicator_dim,
            });
        }
        Ok(())
    }

    /// Shapes of the trainable parameters in [`PARAM_NAMES`] order.
    pub fn param_shapes(&self) -> [Vec<usize>; PARAM_COUNT] {
        let (v, e, h, d, a) = (
            self.vocab_size,
            self.emb_dim,
            self.enc_hidden,
            self.dec_hidden,
            self.attn_dim,
        );
        let enc = 2 * h;
        [
            vec![v, e],
            vec![4 * h, e],
            vec![4 * h, h],
            vec![4 * h],
            vec![4 * h, e],
            vec![4 * h, h],
            vec![4 * h],
            vec![4 * d, e + enc],
            vec![4 * d, d],
            vec![4 * d],
            vec![a, d],
            vec![a, enc],
            vec![a],
            vec![d, enc],
            vec![d, self.indicator_dim],
            vec![self.nonrec_dim, d + enc + e],
            vec![self.nonrec_dim],
            vec![v, self.maxout_dim],
            vec![v],
        ]
    }
}

pub const PARAM_COUNT: usize = 19;

/// Names of the trainable parameters, in the order used by gradient
/// checks, optimizers and checkpoints.
pub const PARAM_NAMES: [&str; PARAM_COUNT] = [
    "embedding",
    "enc_fwd.w",
    "enc_fwd.u",
    "enc_fwd.b",
    "enc_bwd.w",
    "enc_bwd.u",
    "enc_bwd.b",
    "dec.w",
    "dec.u",
    "dec.b",
    "attn.w_a",
    "attn.u_a",
    "attn.v_a",
    "init_proj",
    "tune_proj",
    "nonrec.w",
    "nonrec.b",
    "out.w",
    "out.b",
];

/// Index of the embedding matrix in [`PARAM_NAMES`].
pub const EMBEDDING_PARAM: usize = 0;

/// LSTM weights with the four gates stacked row-wise in the order input,
/// forget, output, candidate: `w` is `(4h, input)`, `u` is `(4h, h)`, `b`
/// is `(4h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub w: Tensor,
    pub u: Tensor,
    pub b: Tensor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input,
    Forget,
    Output,
    Candidate,
}

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            w: Tensor::zeros(&[4 * hidden_dim, input_dim]),
            u: Tensor::zeros(&[4 * hidden_dim, hidden_dim]),
            b: Tensor::zeros(&[4 * hidden_dim]),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w.shape()[1]
    }

    pub fn hidden_dim(&self) -> usize {
        self.u.shape()[1]
    }

    /// Rows of the stacked weights belonging to `gate`.
    pub fn gate_rows(&self, gate: Gate) -> core::ops::Range<usize> {
        let h = self.hidden_dim();
        let k = gate as usize;
        k * h..(k + 1) * h
    }
}

/// Additive attention `e_j = v_a . tanh(W_a s + U_a h_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub w_a: Tensor,
    pub u_a: Tensor,
    pub v_a: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Seq2SeqModel {
    pub config: ModelConfig,
    pub embedding: EmbeddingMatrix,
    pub enc_fwd: LstmParams,
    pub enc_bwd: LstmParams,
    pub dec: LstmParams,
    pub attn: AttentionParams,
    /// Maps `[fwd_last; bwd_first]` into the decoder state.
    pub init_proj: Tensor,
    /// Maps the tune indicator into the decoder state.
    pub tune_proj: Tensor,
    pub nonrec_w: Tensor,
    pub nonrec_b: Tensor,
    pub out_w: Tensor,
    pub out_b: Tensor,
    pub tune_indicators: TuneIndicatorTable,
}

impl Seq2SeqModel {
    /// Every parameter uniform in `[-INIT_RANGE, INIT_RANGE]`; tune indicators
    /// from the same seed.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params: Vec<Tensor> = config
            .param_shapes()
            .iter()
            .map(|shape| {
                let n = shape.iter().product();
                let data = (0..n)
                    .map(|_| rng.gen_range(-INIT_RANGE..=INIT_RANGE))
                    .collect();
                Tensor::new(shape.clone(), data).expect("parameter shape")
            })
            .collect();
        let indicators = make_tune_indicators(config.num_tunes, config.indicator_dim, seed)?;
        Self::from_params(config, params, indicators, true)
    }

    /// Assembles a model from parameters in [`PARAM_NAMES`] order.
    pub fn from_params(
        config: ModelConfig,
        params: Vec<Tensor>,
        tune_indicators: TuneIndicatorTable,
        embedding_trainable: bool,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        if params.len() != PARAM_COUNT {
            return Err(ModelError::InvalidConfig(format!(
                "expected {PARAM_COUNT} parameter tensors, found {}",
                params.len()
            )));
        }
        for ((name, expected), p) in PARAM_NAMES.iter().zip(config.param_shapes()).zip(&params) {
            if p.shape() != expected.as_slice() {
                return Err(ModelError::ParamShape {
                    name,
                    expected,
                    found: p.shape().to_vec(),
                });
            }
        }
        let expected = vec![config.num_tunes, config.indicator_dim];
        if tune_indicators.vectors.shape() != expected.as_slice() {
            return Err(ModelError::ParamShape {
                name: "tune_indicators",
                expected,
                found: tune_indicators.vectors.shape().to_vec(),
            });
        }
        let mut it = params.into_iter();
        let mut next = || it.next().expect("parameter count checked");
        let embedding = EmbeddingMatrix {
            matrix: next(),
            trainable: embedding_trainable,
        };
        let mut lstm = || LstmParams {
            w: next(),
            u: next(),
            b: next(),
        };
        let (enc_fwd, enc_bwd, dec) = (lstm(), lstm(), lstm());
        let mut next = || it.next().expect("parameter count checked");
        let attn = AttentionParams {
            w_a: next(),
            u_a: next(),
            v_a: next(),
        };
        Ok(Self {
            config,
            embedding,
            enc_fwd,
            enc_bwd,
            dec,
            attn,
            init_proj: next(),
            tune_proj: next(),
            nonrec_w: next(),
            nonrec_b: next(),
            out_w: next(),
            out_b: next(),
            tune_indicators,
        })
    }

    /// Trainable parameters in [`PARAM_NAMES`] order.
    pub fn params(&self) -> [&Tensor; PARAM_COUNT] {
        [
            &self.embedding.matrix,
            &self.enc_fwd.w,
            &self.enc_fwd.u,
            &self.enc_fwd.b,
            &self.enc_bwd.w,
            &self.enc_bwd.u,
            &self.enc_bwd.b,
            &self.dec.w,
            &self.dec.u,
            &self.dec.b,
            &self.attn.w_a,
            &self.attn.u_a,
            &self.attn.v_a,
            &self.init_proj,
            &self.tune_proj,
            &self.nonrec_w,
            &self.nonrec_b,
            &self.out_w,
            &self.out_b,
        ]
    }

    pub fn param_mut(&mut self, index: usize) -> &mut Tensor {
        match index {
            0 => &mut self.embedding.matrix,
            1 => &mut self.enc_fwd.w,
            2 => &mut self.enc_fwd.u,
            3 => &mut self.enc_fwd.b,
            4 => &mut self.enc_bwd.w,
            5 => &mut self.enc_bwd.u,
            6 => &mut self.enc_bwd.b,
            7 => &mut self.dec.w,
            8 => &mut self.dec.u,
            9 => &mut self.dec.b,
            10 => &mut self.attn.w_a,
            11 => &mut self.attn.u_a,
            12 => &mut self.attn.v_a,
            13 => &mut self.init_proj,
            14 => &mut self.tune_proj,
            15 => &mut self.nonrec_w,
            16 => &mut self.nonrec_b,
            17 => &mut self.out_w,
            18 => &mut self.out_b,
            _ => panic!("parameter index {index} out of range"),
        }
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.numel()).sum()
    }

    pub fn vocab_size(&self) -> usize {
        self.config.vocab_size
    }

    pub(crate) fn check_id(&self, id: usize) -> Result<(), ModelError> {
        if id >= self.config.vocab_size {
            return Err(ModelError::IdOutOfRange {
                id,
                vocab_size: self.config.vocab_size,
            });
        }
        Ok(())
    }

    pub(crate) fn check_tune(&self, tune_id: usize) -> Result<(), ModelError> {
        if tune_id >= self.config.num_tunes {
            return Err(ModelError::UnknownTune {
                tune_id,
                num_tunes: self.config.num_tunes,
            });
        }
        Ok(())
    }
}
