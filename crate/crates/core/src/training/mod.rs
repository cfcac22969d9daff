//! Teacher-forced cross-entropy training with minibatch AdaDelta.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{check_problem, Differentiable, GradCheckReport, Graph, NodeId, Tensor};
use crate::corpus::{Special, TrainPair};
use crate::seq2seq::{
    attention_node, context_node, decode_step_node, encode_node, init_state_node, ModelError,
    ModelNodes, Seq2SeqModel, EMBEDDING_PARAM, PARAM_COUNT, PARAM_NAMES,
};


#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("no training pairs")]
    NoPairs,
    #[error("pair {index} has an empty target")]
    EmptyTarget { index: usize },
    #[error("training config: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch in AdaDelta update: parameter {param:?}, gradient {grad:?}")]
    ShapeMismatch { param: Vec<usize>, grad: Vec<usize> },
    #[error("numerical failure in epoch {epoch}, minibatch {batch}: {source}")]
    NonFinite {
        epoch: usize,
        batch: usize,
        source: ModelError,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Per-parameter AdaDelta accumulators.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaDeltaState {
    /// Running average of squared gradients, `E[g^2]`.
    pub mean_sq_grad: Tensor,
    /// Running average of squared updates, `E[dx^2]`.
    pub mean_sq_update: Tensor,
    pub rho: f64,
    pub epsilon: f64,
}

impl AdaDeltaState {
    pub const DEFAULT_RHO: f64 = 0.95;
    pub const DEFAULT_EPSILON: f64 = 1e-6;

    pub fn new(shape: &[usize], rho: f64, epsilon: f64) -> Self {
        Self {
            mean_sq_grad: Tensor::zeros(shape),
            mean_sq_update: Tensor::zeros(shape),
            rho,
            epsilon,
        }
    }
}

/// `E[g^2] <- rho E[g^2] + (1 - rho) g^2`,
/// `dx = -sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g`,
/// `E[dx^2] <- rho E[dx^2] + (1 - rho) dx^2`, `x <- x + dx`.
pub fn adadelta_update(
    param: &mut Tensor,
    grad: &[f64],
    state: &mut AdaDeltaState,
) -> Result<(), TrainError> {
    if param.numel() != grad.len() || state.mean_sq_grad.shape() != param.shape() {
        return Err(TrainError::ShapeMismatch {
            param: param.shape().to_vec(),
            grad: vec![grad.len()],
        });
    }
    let (rho, eps) = (state.rho, state.epsilon);
    let eg = state.mean_sq_grad.data_mut();
    let ex = state.mean_sq_update.data_mut();
    for (k, (x, &g)) in param.data_mut().iter_mut().zip(grad).enumerate() {
        eg[k] = rho * eg[k] + (1.0 - rho) * g * g;
        let dx = -(libm::sqrt(ex[k] + eps) / libm::sqrt(eg[k] + eps)) * g;
        ex[k] = rho * ex[k] + (1.0 - rho) * dx * dx;
        *x += dx;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub minibatch_size: usize,
    pub max_epochs: usize,
    pub shuffle_seed: u64,
    pub rho: f64,
    pub epsilon: f64,
    /// Rescale the minibatch gradient to at most this global L2 norm.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            minibatch_size: 60,
            max_epochs: 10,
            shuffle_seed: 1,
            rho: AdaDeltaState::DEFAULT_RHO,
            epsilon: AdaDeltaState::DEFAULT_EPSILON,
            clip_norm: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.minibatch_size == 0 {
            return Err(TrainError::InvalidConfig(
                "minibatch_size must be at least 1".into(),
            ));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(TrainError::InvalidConfig(format!(
                "rho {} not in (0, 1)",
                self.rho
            )));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(TrainError::InvalidConfig("epsilon must be positive".into()));
        }
        if let Some(c) = self.clip_norm {
            if c.is_nan() || c <= 0.0 {
                return Err(TrainError::InvalidConfig(
                    "clip_norm must be positive".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Summed and per-character cross-entropy of one pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairLoss {
    pub total: f64,
    pub chars: usize,
}

impl PairLoss {
    pub fn per_char(&self) -> f64 {
        self.total / self.chars as f64
    }
}

/// Builds the summed teacher-forced loss `sum_t -ln p(y_t | y_<t, cue, tune)`.
/// Returns the loss node and the number of target tokens.
pub fn pair_loss_node(
    g: &mut Graph<'_>,
    m: &ModelNodes,
    pair: &TrainPair,
) -> Result<(NodeId, usize), ModelError> {
    if pair.target_ids.is_empty() {
        return Err(ModelError::EmptyInput);
    }
    let enc = encode_node(g, m, &pair.cue_ids)?;
    let (mut s, mut c) = init_state_node(g, m, &enc, pair.tune_id)?;
    let mut y_prev = Special::Bos.id();
    let mut terms = Vec::with_capacity(pair.target_ids.len());
    for &y in &pair.target_ids {
        if y >= m.vocab_size {
            return Err(ModelError::IdOutOfRange {
                id: y,
                vocab_size: m.vocab_size,
            });
        }
        let alpha = attention_node(g, m, s, &enc)?;
        let ctx = context_node(g, alpha, &enc)?;
        let step = decode_step_node(g, m, s, c, y_prev, ctx)?;
        terms.push(g.cross_entropy(step.probs, y)?);
        (s, c, y_prev) = (step.state, step.cell, y);
    }
    let all = g.concat(&terms, 0)?;
    Ok((g.sum(all)?, terms.len()))
}

pub fn pair_loss(model: &Seq2SeqModel, pair: &TrainPair) -> Result<PairLoss, ModelError> {
    let mut g = Graph::new();
    let m = model.bind(&mut g);
    let (loss, chars) = pair_loss_node(&mut g, &m, pair)?;
    Ok(PairLoss {
        total: g.value(loss).item(),
        chars,
    })
}

/// Summed loss of `pairs` and its gradient for every parameter, in
/// `PARAM_NAMES` order.
pub fn loss_and_gradients(
    model: &Seq2SeqModel,
    pairs: &[TrainPair],
) -> Result<(PairLoss, Vec<Vec<f64>>), ModelError> {
    let mut acc: Vec<Vec<f64>> = model
        .params()
        .iter()
        .map(|p| vec![0.0; p.numel()])
        .collect();
    let mut total = PairLoss {
        total: 0.0,
        chars: 0,
    };
    for pair in pairs {
        let mut g = Graph::new();
        let m = model.bind(&mut g);
        let (loss, chars) = pair_loss_node(&mut g, &m, pair)?;
        total.total += g.value(loss).item();
        total.chars += chars;
        let grads = g.backward(loss)?;
        for (buf, node) in acc.iter_mut().zip(m.params()) {
            if let Some(gr) = grads.raw(node) {
                for (a, x) in buf.iter_mut().zip(gr) {
                    *a += x;
                }
            }
        }
    }
    Ok((total, acc))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    /// One-based epoch number.
    pub epoch: usize,
    /// Mean cross-entropy per target character over the epoch.
    pub mean_loss: f64,
    pub chars: usize,
    pub updates: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
}

impl TrainReport {
    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.mean_loss)
    }
}

/// Parameter indices the optimizer updates; the embedding is skipped when it
/// is not trainable.
pub fn trainable_params(model: &Seq2SeqModel) -> Vec<usize> {
    (0..PARAM_COUNT)
        .filter(|&k| k != EMBEDDING_PARAM || model.embedding.trainable)
        .collect()
}

/// Rescales the gradients listed in `active` so their joint L2 norm is at
/// most `max`. Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [Vec<f64>], active: &[usize], max: f64) -> f64 {
    let norm = libm::sqrt(
        active
            .iter()
            .flat_map(|&k| grads[k].iter())
            .map(|x| x * x)
            .sum::<f64>(),
    );
    if norm > max {
        let scale = max / norm;
        for &k in active {
            grads[k].iter_mut().for_each(|x| *x *= scale);
        }
    }
    norm
}

/// Trains for `config.max_epochs` epochs of seeded-shuffled minibatches.
/// Each minibatch sums the per-pair gradients and takes one AdaDelta step.
/// `on_epoch` runs after every epoch.
pub fn train<F>(
    model: &mut Seq2SeqModel,
    pairs: &[TrainPair],
    config: &TrainConfig,
    mut on_epoch: F,
) -> Result<TrainReport, TrainError>
where
    F: FnMut(&EpochStats, &Seq2SeqModel),
{
    config.validate()?;
    if pairs.is_empty() {
        return Err(TrainError::NoPairs);
    }
    if let Some(index) = pairs.iter().position(|p| p.target_ids.is_empty()) {
        return Err(TrainError::EmptyTarget { index });
    }
    let mut states: Vec<AdaDeltaState> = model
        .params()
        .iter()
        .map(|p| AdaDeltaState::new(p.shape(), config.rho, config.epsilon))
        .collect();
    let active = trainable_params(model);
    let mut rng = ChaCha8Rng::seed_from_u64(config.shuffle_seed);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut report = TrainReport { epochs: Vec::new() };
    let mut updates = 0usize;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let (mut total, mut chars) = (0.0, 0usize);
        for (batch, idx) in order.chunks(config.minibatch_size).enumerate() {
            let fail = |source| TrainError::NonFinite {
                epoch,
                batch,
                source,
            };
            let batch_pairs: Vec<TrainPair> = idx.iter().map(|&i| pairs[i].clone()).collect();
            let (loss, mut grads) = loss_and_gradients(model, &batch_pairs).map_err(fail)?;
            total += loss.total;
            chars += loss.chars;
            if let Some(max) = config.clip_norm {
                clip_global_norm(&mut grads, &active, max);
            }
            for &k in &active {
                adadelta_update(model.param_mut(k), &grads[k], &mut states[k])?;
                if !model.params()[k].is_finite() {
                    return Err(fail(ModelError::Tensor(
                        crate::autodiff::TensorError::NonFinite { op: PARAM_NAMES[k] },
                    )));
                }
            }
            updates += 1;
        }
        let stats = EpochStats {
            epoch,
            mean_loss: total / chars as f64,
            chars,
            updates,
        };
        on_epoch(&stats, model);
        report.epochs.push(stats);
    }
    Ok(report)
}

/// Gradient-check problem: summed loss of `pairs` against every model
/// parameter.
pub struct ModelProblem<'m> {
    pub model: &'m mut Seq2SeqModel,
    pub pairs: &'m [TrainPair],
}

impl Differentiable for ModelProblem<'_> {
    type Error = ModelError;

    fn param_count(&self) -> usize {
        PARAM_COUNT
    }

    fn param_name(&self, index: usize) -> String {
        PARAM_NAMES[index].into()
    }

    fn param_mut(&mut self, index: usize) -> &mut Tensor {
        self.model.param_mut(index)
    }

    fn loss(&self) -> Result<f64, ModelError> {
        let mut total = 0.0;
        for p in self.pairs {
            total += pair_loss(self.model, p)?.total;
        }
        Ok(total)
    }

    fn loss_and_grads(&self) -> Result<(f64, Vec<Tensor>), ModelError> {
        let (loss, grads) = loss_and_gradients(self.model, self.pairs)?;
        let tensors = grads
            .into_iter()
            .zip(self.model.params())
            .map(|(g, p)| Tensor::new(p.shape().to_vec(), g))
            .collect::<Result<_, _>>()?;
        Ok((loss.total, tensors))
    }
}

/// Central-difference check of every model parameter on `pairs`.
pub fn model_grad_check(
    model: &mut Seq2SeqModel,
    pairs: &[TrainPair],
    step: f64,
    tolerance: f64,
) -> Result<GradCheckReport, ModelError> {
    check_problem(&mut ModelProblem { model, pairs }, step, tolerance)
}
