//! Graph builders for the model's forward computation. Training
//! differentiates through them; the eager wrappers evaluate them.

use alloc::vec::Vec;

use super::{ModelError, Seq2SeqModel, PARAM_COUNT};
use crate::autodiff::{Graph, NodeId, Tensor};

#[derive(Debug, Clone, Copy)]
pub struct LstmNodes {
    pub w: NodeId,
    pub u: NodeId,
    pub b: NodeId,
    pub hidden: usize,
}

/// Model parameters bound as graph leaves.
#[derive(Debug, Clone, Copy)]
pub struct ModelNodes {
    pub embedding: NodeId,
    pub enc_fwd: LstmNodes,
    pub enc_bwd: LstmNodes,
    pub dec: LstmNodes,
    pub w_a: NodeId,
    pub u_a: NodeId,
    pub v_a: NodeId,
    pub init_proj: NodeId,
    pub tune_proj: NodeId,
    pub nonrec_w: NodeId,
    pub nonrec_b: NodeId,
    pub out_w: NodeId,
    pub out_b: NodeId,
    pub indicators: NodeId,
    pub vocab_size: usize,
    pub enc_hidden: usize,
    pub dec_hidden: usize,
    pub num_tunes: usize,
}

impl ModelNodes {
    /// Parameter leaves in `PARAM_NAMES` order.
    pub fn params(&self) -> [NodeId; PARAM_COUNT] {
        [
            self.embedding,
            self.enc_fwd.w,
            self.enc_fwd.u,
            self.enc_fwd.b,
            self.enc_bwd.w,
            self.enc_bwd.u,
            self.enc_bwd.b,
            self.dec.w,
            self.dec.u,
            self.dec.b,
            self.w_a,
            self.u_a,
            self.v_a,
            self.init_proj,
            self.tune_proj,
            self.nonrec_w,
            self.nonrec_b,
            self.out_w,
            self.out_b,
        ]
    }
}

impl Seq2SeqModel {
    /// Binds every trainable parameter as a gradient-receiving leaf and the
    /// tune indicators as a plain input.
    pub fn bind<'a>(&'a self, g: &mut Graph<'a>) -> ModelNodes {
        let lstm = |g: &mut Graph<'a>, p: &'a super::LstmParams| LstmNodes {
            w: g.param(&p.w),
            u: g.param(&p.u),
            b: g.param(&p.b),
            hidden: p.hidden_dim(),
        };
        let embedding = g.param(&self.embedding.matrix);
        let enc_fwd = lstm(g, &self.enc_fwd);
        let enc_bwd = lstm(g, &self.enc_bwd);
        let dec = lstm(g, &self.dec);
        ModelNodes {
            embedding,
            enc_fwd,
            enc_bwd,
            dec,
            w_a: g.param(&self.attn.w_a),
            u_a: g.param(&self.attn.u_a),
            v_a: g.param(&self.attn.v_a),
            init_proj: g.param(&self.init_proj),
            tune_proj: g.param(&self.tune_proj),
            nonrec_w: g.param(&self.nonrec_w),
            nonrec_b: g.param(&self.nonrec_b),
            out_w: g.param(&self.out_w),
            out_b: g.param(&self.out_b),
            indicators: g.input(&self.tune_indicators.vectors),
            vocab_size: self.config.vocab_size,
            enc_hidden: self.config.enc_hidden,
            dec_hidden: self.config.dec_hidden,
            num_tunes: self.config.num_tunes,
        }
    }
}

/// One LSTM update: `i, f, o = sigmoid(.)`, `g = tanh(.)`,
/// `c = f * c_prev + i * g`, `h = o * tanh(c)`.
pub fn lstm_step_node(
    g: &mut Graph<'_>,
    p: &LstmNodes,
    x: NodeId,
    h_prev: NodeId,
    c_prev: NodeId,
) -> Result<(NodeId, NodeId), ModelError> {
    let n = p.hidden;
    let wx = g.matmul(p.w, x)?;
    let uh = g.matmul(p.u, h_prev)?;
    let z = g.add(wx, uh)?;
    let z = g.add(z, p.b)?;
    let gates = g.slice(z, 0, 0, 3 * n)?;
    let gates = g.sigmoid(gates)?;
    let i = g.slice(gates, 0, 0, n)?;
    let f = g.slice(gates, 0, n, n)?;
    let o = g.slice(gates, 0, 2 * n, n)?;
    let cand = g.slice(z, 0, 3 * n, n)?;
    let cand = g.tanh(cand)?;
    let keep = g.mul(f, c_prev)?;
    let write = g.mul(i, cand)?;
    let c = g.add(keep, write)?;
    let tc = g.tanh(c)?;
    let h = g.mul(o, tc)?;
    Ok((h, c))
}

/// Encoder output as graph nodes.
#[derive(Debug, Clone, Copy)]
pub struct EncodedNodes {
    /// `(Tx, 2 * enc_hidden)`, row `j` is `[fwd_j; bwd_j]`.
    pub states: NodeId,
    /// Transpose of `states`, used to form contexts.
    pub states_t: NodeId,
    /// `states * U_a^T`, the attention keys, `(Tx, attn_dim)`.
    pub keys: NodeId,
    pub fwd_last: NodeId,
    pub bwd_first: NodeId,
    pub len: usize,
}

fn check_ids(ids: &[usize], vocab_size: usize) -> Result<(), ModelError> {
    if ids.is_empty() {
        return Err(ModelError::EmptyInput);
    }
    if let Some(&id) = ids.iter().find(|&&id| id >= vocab_size) {
        return Err(ModelError::IdOutOfRange { id, vocab_size });
    }
    Ok(())
}

pub(super) fn finish_encoding(
    g: &mut Graph<'_>,
    m: &ModelNodes,
    states: NodeId,
    fwd_last: NodeId,
    bwd_first: NodeId,
) -> Result<EncodedNodes, ModelError> {
    let len = g.value(states).shape()[0];
    let states_t = g.transpose(states)?;
    let u_t = g.transpose(m.u_a)?;
    let keys = g.matmul(states, u_t)?;
    Ok(EncodedNodes {
        states,
        states_t,
        keys,
        fwd_last,
        bwd_first,
        len,
    })
}

/// Runs the forward LSTM left to right and the backward LSTM right to left
/// over the cue embeddings.
pub fn encode_node(
    g: &mut Graph<'_>,
    m: &ModelNodes,
    cue_ids: &[usize],
) -> Result<EncodedNodes, ModelError> {
    check_ids(cue_ids, m.vocab_size)?;
    let n = cue_ids.len();
    let x = g.embedding_gather(m.embedding, cue_ids)?;
    let xs: Vec<NodeId> = (0..n).map(|t| g.row(x, t)).collect::<Result<_, _>>()?;
    let zero = Tensor::zeros(&[m.enc_hidden]);

    let (mut h, mut c) = (g.constant(zero.clone()), g.constant(zero.clone()));
    let mut fwd = Vec::with_capacity(n);
    for &xt in &xs {
        (h, c) = lstm_step_node(g, &m.enc_fwd, xt, h, c)?;
        fwd.push(h);
    }
    let (mut h, mut c) = (g.constant(zero.clone()), g.constant(zero));
    let mut bwd = alloc::vec![h; n];
    for t in (0..n).rev() {
        (h, c) = lstm_step_node(g, &m.enc_bwd, xs[t], h, c)?;
        bwd[t] = h;
    }
    let rows: Vec<NodeId> = fwd
        .iter()
        .zip(&bwd)
        .map(|(&f, &b)| g.concat(&[f, b], 0))
        .collect::<Result<_, _>>()?;
    let states = g.stack_rows(&rows)?;
    finish_encoding(g, m, states, fwd[n - 1], bwd[0])
}

/// `alpha = softmax_j(v_a . tanh(W_a s_prev + U_a h_j))`.
pub fn attention_node(
    g: &mut Graph<'_>,
    m: &ModelNodes,
    s_prev: NodeId,
    enc: &EncodedNodes,
) -> Result<NodeId, ModelError> {
    let q = g.matmul(m.w_a, s_prev)?;
    let pre = g.add_row(enc.keys, q)?;
    let act = g.tanh(pre)?;
    let scores = g.matmul(act, m.v_a)?;
    Ok(g.softmax(scores, 0)?)
}

/// `c = sum_j alpha_j h_j`.
pub fn context_node(
    g: &mut Graph<'_>,
    alpha: NodeId,
    enc: &EncodedNodes,
) -> Result<NodeId, ModelError> {
    Ok(g.matmul(enc.states_t, alpha)?)
}

/// `s_0 = tanh(init_proj [fwd_last; bwd_first] + tune_proj indicator)`,
/// `cell_0 = 0`.
pub fn init_state_node(
    g: &mut Graph<'_>,
    m: &ModelNodes,
    enc: &EncodedNodes,
    tune_id: usize,
) -> Result<(NodeId, NodeId), ModelError> {
    if tune_id >= m.num_tunes {
        return Err(ModelError::UnknownTune {
            tune_id,
            num_tunes: m.num_tunes,
        });
    }
    let summary = g.concat(&[enc.fwd_last, enc.bwd_first], 0)?;
    let a = g.matmul(m.init_proj, summary)?;
    let ind = g.row(m.indicators, tune_id)?;
    let b = g.matmul(m.tune_proj, ind)?;
    let pre = g.add(a, b)?;
    let s0 = g.tanh(pre)?;
    let cell0 = g.constant(Tensor::zeros(&[m.dec_hidden]));
    Ok((s0, cell0))
}

/// Outputs of one decoder step.
#[derive(Debug, Clone, Copy)]
pub struct StepNodes {
    pub probs: NodeId,
    pub state: NodeId,
    pub cell: NodeId,
}

/// Decoder LSTM on `[embed(y_prev); c_t]`, then the output stack on
/// `[s_t; c_t; embed(y_prev)]`: affine, pairwise maxout, affine, softmax.
pub fn decode_step_node(
    g: &mut Graph<'_>,
    m: &ModelNodes,
    s_prev: NodeId,
    cell_prev: NodeId,
    y_prev: usize,
    ctx: NodeId,
) -> Result<StepNodes, ModelError> {
    if y_prev >= m.vocab_size {
        return Err(ModelError::IdOutOfRange {
            id: y_prev,
            vocab_size: m.vocab_size,
        });
    }
    let e = g.embedding_lookup(m.embedding, y_prev)?;
    let x = g.concat(&[e, ctx], 0)?;
    let (state, cell) = lstm_step_node(g, &m.dec, x, s_prev, cell_prev)?;
    let feat = g.concat(&[state, ctx, e], 0)?;
    let hid = g.matmul(m.nonrec_w, feat)?;
    let hid = g.add(hid, m.nonrec_b)?;
    let pooled = g.max_pool_pairs(hid)?;
    let logits = g.matmul(m.out_w, pooled)?;
    let logits = g.add(logits, m.out_b)?;
    let probs = g.softmax(logits, 0)?;
    Ok(StepNodes { probs, state, cell })
}
