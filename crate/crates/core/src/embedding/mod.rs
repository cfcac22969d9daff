//! Character vectors: skip-gram pretraining with negative sampling, and
//! installing pretrained vectors into a model under the fixV or adaptV
//! strategy.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::Tensor;
use crate::corpus::Vocabulary;
use crate::seq2seq::Seq2SeqModel;

#[cfg(test)]
mod tests;

/// A `(vocab_size, dim)` table of character vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub matrix: Tensor,
    /// `false` under fixV: the trainer leaves the matrix untouched.
    pub trainable: bool,
}

impl EmbeddingMatrix {
    pub fn new(matrix: Tensor, trainable: bool) -> Result<Self, EmbeddingError> {
        if matrix.rank() != 2 {
            return Err(EmbeddingError::NotAMatrix {
                shape: matrix.shape().to_vec(),
            });
        }
        Ok(Self { matrix, trainable })
    }

    pub fn vocab_size(&self) -> usize {
        self.matrix.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.matrix.shape()[1]
    }

    pub fn row(&self, id: usize) -> &[f64] {
        self.matrix.row(id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// Pretrained vectors stay fixed during model training.
    FixV,
    /// Pretrained vectors are fine-tuned with the other parameters.
    AdaptV,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::FixV => "fixV",
            Strategy::AdaptV => "adaptV",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "fixV" | "fixv" => Some(Strategy::FixV),
            "adaptV" | "adaptv" => Some(Strategy::AdaptV),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkipGramConfig {
    pub dim: usize,
    /// Context radius on each side of the centre character.
    pub window: usize,
    /// Negative samples per positive pair.
    pub negatives: usize,
    pub epochs: usize,
    /// Initial step size, decayed linearly towards zero over training.
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        Self {
            dim: 200,
            window: 2,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkipGramReport {
    /// Expected negative-sampling loss per positive pair after each epoch.
    pub epoch_losses: Vec<f64>,
    pub pairs_per_epoch: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EmbeddingError {
    #[error("skip-gram corpus has no context pairs")]
    EmptyCorpus,
    #[error("token id {id} in sequence {sequence} is outside the vocabulary of {vocab_size}")]
    IdOutOfRange {
        sequence: usize,
        id: usize,
        vocab_size: usize,
    },
    #[error("skip-gram config: {field} must be positive")]
    InvalidConfig { field: &'static str },
    #[error("embedding shape {found:?} does not match model embedding shape {expected:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("embedding must be a matrix, got shape {shape:?}")]
    NotAMatrix { shape: Vec<usize> },
    #[error("non-finite value in skip-gram training at epoch {epoch}")]
    NonFinite { epoch: usize },
}

fn validate(config: &SkipGramConfig) -> Result<(), EmbeddingError> {
    let checks = [
        (config.dim, "dim"),
        (config.window, "window"),
        (config.negatives, "negatives"),
        (config.epochs, "epochs"),
    ];
    for (v, field) in checks {
        if v == 0 {
            return Err(EmbeddingError::InvalidConfig { field });
        }
    }
    if !(config.learning_rate > 0.0 && config.learning_rate.is_finite()) {
        return Err(EmbeddingError::InvalidConfig {
            field: "learning_rate",
        });
    }
    Ok(())
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// `-ln sigmoid(x)` without overflow.
fn neg_log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        libm::log1p(libm::exp(-x))
    } else {
        -x + libm::log1p(libm::exp(x))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn context_pairs(corpus: &[Vec<usize>], window: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for seq in corpus {
        for (i, &centre) in seq.iter().enumerate() {
            let lo = i.saturating_sub(window);
            let hi = (i + window + 1).min(seq.len());
            for (j, &ctx) in seq.iter().enumerate().take(hi).skip(lo) {
                if j != i {
                    pairs.push((centre, ctx));
                }
            }
        }
    }
    pairs
}

struct SkipGram {
    dim: usize,
    input: Vec<f64>,
    output: Vec<f64>,
}

impl SkipGram {
    fn in_row(&self, id: usize) -> &[f64] {
        &self.input[id * self.dim..(id + 1) * self.dim]
    }

    fn out_row(&self, id: usize) -> &[f64] {
        &self.output[id * self.dim..(id + 1) * self.dim]
    }

    /// Expected negative-sampling loss per positive pair: the positive term
    /// of every pair plus `negatives` times the noise-weighted negative term
    /// of its centre.
    fn expected_loss(
        &self,
        pair_counts: &BTreeMap<(usize, usize), usize>,
        centre_counts: &BTreeMap<usize, usize>,
        noise: &[f64],
        negatives: usize,
    ) -> f64 {
        let mut total = 0.0;
        let mut pairs = 0usize;
        for (&(c, x), &n) in pair_counts {
            total += n as f64 * neg_log_sigmoid(dot(self.in_row(c), self.out_row(x)));
            pairs += n;
        }
        for (&c, &n) in centre_counts {
            let v = self.in_row(c);
            let neg: f64 = noise
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > 0.0)
                .map(|(w, &p)| p * neg_log_sigmoid(-dot(v, self.out_row(w))))
                .sum();
            total += (n * negatives) as f64 * neg;
        }
        total / pairs as f64
    }

    fn sgd_step(&mut self, centre: usize, ctx: usize, negatives: &[usize], lr: f64) {
        let d = self.dim;
        let mut grad_in = vec![0.0; d];
        let targets = core::iter::once((ctx, 1.0)).chain(negatives.iter().map(|&n| (n, 0.0)));
        for (word, label) in targets {
            let score = dot(self.in_row(centre), self.out_row(word));
            let g = lr * (label - sigmoid(score));
            let (vin, vout) = (centre * d, word * d);
            for (k, gi) in grad_in.iter_mut().enumerate() {
                *gi += g * self.output[vout + k];
                self.output[vout + k] += g * self.input[vin + k];
            }
        }
        for (k, g) in grad_in.into_iter().enumerate() {
            self.input[centre * d + k] += g;
        }
    }
}

/// Trains skip-gram vectors with negative sampling over id sequences.
///
/// Every character within `window` of a centre is a positive context; each
/// positive pair draws `negatives` noise characters from the unigram
/// distribution raised to 0.75. The reported epoch loss is the exact
/// expectation of that objective over the noise distribution. The returned matrix holds the input vectors
/// and is marked trainable; [`init_embedding`] decides the final strategy.
pub fn train_skipgram(
    corpus: &[Vec<usize>],
    vocab: &Vocabulary,
    config: &SkipGramConfig,
) -> Result<(EmbeddingMatrix, SkipGramReport), EmbeddingError> {
    validate(config)?;
    let v = vocab.size();
    let mut counts = vec![0.0f64; v];
    for (sequence, seq) in corpus.iter().enumerate() {
        for &id in seq {
            if id >= v {
                return Err(EmbeddingError::IdOutOfRange {
                    sequence,
                    id,
                    vocab_size: v,
                });
            }
            counts[id] += 1.0;
        }
    }
    let pairs = context_pairs(corpus, config.window);
    if pairs.is_empty() {
        return Err(EmbeddingError::EmptyCorpus);
    }
    let noise_weights: Vec<f64> = counts.iter().map(|&c| libm::pow(c, 0.75)).collect();
    let noise = WeightedIndex::new(&noise_weights).map_err(|_| EmbeddingError::EmptyCorpus)?;

    let d = config.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let half = 0.5 / d as f64;
    let mut model = SkipGram {
        dim: d,
        input: (0..v * d).map(|_| rng.gen_range(-half..half)).collect(),
        output: vec![0.0; v * d],
    };

    let norm: f64 = noise_weights.iter().sum();
    let noise_probs: Vec<f64> = noise_weights.iter().map(|w| w / norm).collect();
    let mut pair_counts = BTreeMap::new();
    let mut centre_counts = BTreeMap::new();
    for &(c, x) in &pairs {
        *pair_counts.entry((c, x)).or_insert(0usize) += 1;
        *centre_counts.entry(c).or_insert(0usize) += 1;
    }

    let total = (config.epochs * pairs.len()) as f64;
    let mut seen = 0usize;
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        for &(centre, ctx) in &pairs {
            let lr = config.learning_rate * (1.0 - seen as f64 / total).max(1e-4);
            let negs: Vec<usize> = (0..config.negatives)
                .map(|_| noise.sample(&mut rng))
                .collect();
            model.sgd_step(centre, ctx, &negs, lr);
            seen += 1;
        }
        let loss =
            model.expected_loss(&pair_counts, &centre_counts, &noise_probs, config.negatives);
        if !loss.is_finite() || model.input.iter().any(|x| !x.is_finite()) {
            return Err(EmbeddingError::NonFinite { epoch: epoch + 1 });
        }
        epoch_losses.push(loss);
    }
    let matrix = Tensor::new(vec![v, d], model.input).expect("skip-gram matrix shape");
    Ok((
        EmbeddingMatrix {
            matrix,
            trainable: true,
        },
        SkipGramReport {
            epoch_losses,
            pairs_per_epoch: pairs.len(),
        },
    ))
}

/// Copies pretrained vectors into the model and sets their trainability.
pub fn init_embedding(
    model: &mut Seq2SeqModel,
    pretrained: &EmbeddingMatrix,
    strategy: Strategy,
) -> Result<(), EmbeddingError> {
    let target = &mut model.embedding;
    if target.matrix.shape() != pretrained.matrix.shape() {
        return Err(EmbeddingError::ShapeMismatch {
            expected: target.matrix.shape().to_vec(),
            found: pretrained.matrix.shape().to_vec(),
        });
    }
    target.matrix = pretrained.matrix.clone();
    target.trainable = strategy == Strategy::AdaptV;
    Ok(())
}

/// Cosine similarity of two rows of `m`.
pub fn cosine(m: &EmbeddingMatrix, a: usize, b: usize) -> f64 {
    let (x, y) = (m.row(a), m.row(b));
    let n = libm::sqrt(dot(x, x) * dot(y, y));
    if n == 0.0 {
        0.0
    } else {
        dot(x, y) / n
    }
}
