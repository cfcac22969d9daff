//! Value-level wrappers over the graph builders, for inference.

use super::nodes::{self, finish_encoding, LstmNodes};
use super::{LstmParams, ModelError, Seq2SeqModel};
use crate::autodiff::{Graph, Tensor};

/// Encoder output for one cue.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoding {
    /// `(Tx, 2 * enc_hidden)`; row `j` is `[fwd_j; bwd_j]`.
    pub states: Tensor,
    pub fwd_last: Tensor,
    pub bwd_first: Tensor,
}

impl Encoding {
    pub fn len(&self) -> usize {
        self.states.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn state(&self, j: usize) -> &[f64] {
        self.states.row(j)
    }

    fn bind<'a>(
        &'a self,
        g: &mut Graph<'a>,
        m: &nodes::ModelNodes,
    ) -> Result<nodes::EncodedNodes, ModelError> {
        let states = g.input(&self.states);
        let fwd = g.input(&self.fwd_last);
        let bwd = g.input(&self.bwd_first);
        finish_encoding(g, m, states, fwd, bwd)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    /// Distribution over the vocabulary.
    pub probs: Tensor,
    pub state: Tensor,
    pub cell: Tensor,
}

/// One LSTM update on plain tensors.
pub fn lstm_step(
    params: &LstmParams,
    x: &Tensor,
    h_prev: &Tensor,
    c_prev: &Tensor,
) -> Result<(Tensor, Tensor), ModelError> {
    let mut g = Graph::new();
    let p = LstmNodes {
        w: g.input(&params.w),
        u: g.input(&params.u),
        b: g.input(&params.b),
        hidden: params.hidden_dim(),
    };
    let (x, h, c) = (g.input(x), g.input(h_prev), g.input(c_prev));
    let (h, c) = nodes::lstm_step_node(&mut g, &p, x, h, c)?;
    Ok((g.value(h).clone(), g.value(c).clone()))
}

/// `sum_j alpha_j h_j` over the rows of `states`.
pub fn context(alpha: &Tensor, states: &Tensor) -> Result<Tensor, ModelError> {
    let mut g = Graph::new();
    let (a, s) = (g.input(alpha), g.input(states));
    let st = g.transpose(s)?;
    let c = g.matmul(st, a)?;
    Ok(g.value(c).clone())
}

impl Seq2SeqModel {
    pub fn encode(&self, cue_ids: &[usize]) -> Result<Encoding, ModelError> {
        let mut g = Graph::new();
        let m = self.bind(&mut g);
        let enc = nodes::encode_node(&mut g, &m, cue_ids)?;
        Ok(Encoding {
            states: g.value(enc.states).clone(),
            fwd_last: g.value(enc.fwd_last).clone(),
            bwd_first: g.value(enc.bwd_first).clone(),
        })
    }

    pub fn attention_weights(&self, s_prev: &Tensor, enc: &Encoding) -> Result<Tensor, ModelError> {
        let mut g = Graph::new();
        let m = self.bind(&mut g);
        let e = enc.bind(&mut g, &m)?;
        let s = g.input(s_prev);
        let alpha = nodes::attention_node(&mut g, &m, s, &e)?;
        Ok(g.value(alpha).clone())
    }

    pub fn init_decoder_state(
        &self,
        enc: &Encoding,
        tune_id: usize,
    ) -> Result<(Tensor, Tensor), ModelError> {
        self.check_tune(tune_id)?;
        let mut g = Graph::new();
        let m = self.bind(&mut g);
        let e = enc.bind(&mut g, &m)?;
        let (s, c) = nodes::init_state_node(&mut g, &m, &e, tune_id)?;
        Ok((g.value(s).clone(), g.value(c).clone()))
    }

    pub fn decode_step(
        &self,
        s_prev: &Tensor,
        cell_prev: &Tensor,
        y_prev: usize,
        ctx: &Tensor,
    ) -> Result<StepOutput, ModelError> {
        self.check_id(y_prev)?;
        let mut g = Graph::new();
        let m = self.bind(&mut g);
        let (s, c, x) = (g.input(s_prev), g.input(cell_prev), g.input(ctx));
        let out = nodes::decode_step_node(&mut g, &m, s, c, y_prev, x)?;
        Ok(StepOutput {
            probs: g.value(out.probs).clone(),
            state: g.value(out.state).clone(),
            cell: g.value(out.cell).clone(),
        })
    }

    /// Attention, context and decoder update for one generation step.
    /// Returns the step output and the attention weights.
    pub fn attend_and_decode(
        &self,
        enc: &Encoding,
        s_prev: &Tensor,
        cell_prev: &Tensor,
        y_prev: usize,
    ) -> Result<(StepOutput, Tensor), ModelError> {
        self.check_id(y_prev)?;
        let mut g = Graph::new();
        let m = self.bind(&mut g);
        let e = enc.bind(&mut g, &m)?;
        let (s, c) = (g.input(s_prev), g.input(cell_prev));
        let alpha = nodes::attention_node(&mut g, &m, s, &e)?;
        let ctx = nodes::context_node(&mut g, alpha, &e)?;
        let out = nodes::decode_step_node(&mut g, &m, s, c, y_prev, ctx)?;
        Ok((
            StepOutput {
                probs: g.value(out.probs).clone(),
                state: g.value(out.state).clone(),
                cell: g.value(out.cell).clone(),
            },
            g.value(alpha).clone(),
        ))
    }
}
