//! Graph-attention policy over edge edits.
//!
//! Node states pass through `K` attention layers restricted to the current
//! graph on the neighborhood; each candidate edit is embedded as
//! `X_a ‖ X_b ‖ type` (type 0 for deletion, 1 for addition), scored by an MLP,
//! and the scores are softmaxed over the whole action space.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::blackbox;
use crate::diff::{Params, Tape, Tensor, Var};
use crate::error::{bail, Result};
use crate::mdp::{ActionSpace, State};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PolicyConfig {
    /// Width of every attention layer.
    pub hidden: usize,
    pub gat_layers: usize,
    /// Hidden widths of the attention scorer; empty means a single linear map.
    pub attention_hidden: Vec<usize>,
    /// Hidden widths of the action-value MLP.
    pub mlp_hidden: Vec<usize>,
    pub gat_slope: f64,
    pub mlp_slope: f64,
    pub seed: u64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            hidden: 16,
            gat_layers: 3,
            attention_hidden: Vec::new(),
            mlp_hidden: vec![16],
            gat_slope: 0.01,
            mlp_slope: 0.1,
            seed: 0,
        }
    }
}

/// Parameters laid out as: per attention layer `W`, then the scorer layers;
/// then the value MLP layers.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNetwork {
    cfg: PolicyConfig,
    input_dim: usize,
    params: Params,
}

/// Tape handles for one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct PolicyOutput {
    /// `1×|A|` log-probabilities.
    pub log_probs: Var,
    /// `1×1` entropy of the action distribution.
    pub entropy: Var,
    pub embeddings: Var,
}

fn glorot(rng: &mut rng::Rng, fan_in: usize, fan_out: usize) -> Tensor {
    let a = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
    let data = (0..fan_in * fan_out).map(|_| rng.gen_range(-a..a)).collect();
    Tensor::from_vec(fan_in, fan_out, data).expect("sized")
}

impl PolicyNetwork {
    pub fn new(input_dim: usize, cfg: PolicyConfig) -> Result<Self> {
        if input_dim == 0 || cfg.hidden == 0 || cfg.gat_layers == 0 {
            bail!(Input, "policy needs positive input dim, width and depth");
        }
        let mut rng = rng::rng(cfg.seed);
        let mut params = Params::new();
        let mut d_in = input_dim;
        for k in 0..cfg.gat_layers {
            params.add(format!("gat{}.weight", k + 1), glorot(&mut rng, d_in, cfg.hidden));
            let mut a_in = 2 * d_in;
            for (j, &w) in cfg.attention_hidden.iter().enumerate() {
                params.add(format!("gat{}.att{}.weight", k + 1, j + 1), glorot(&mut rng, a_in, w));
                params.add(format!("gat{}.att{}.bias", k + 1, j + 1), Tensor::zeros(1, w));
                a_in = w;
            }
            // the scorer's output bias would cancel inside the softmax
            params.add(format!("gat{}.att_out.weight", k + 1), glorot(&mut rng, a_in, 1));
            d_in = cfg.hidden;
        }
        let mut m_in = 2 * cfg.hidden + 1;
        for (j, &w) in cfg.mlp_hidden.iter().enumerate() {
            params.add(format!("mlp{}.weight", j + 1), glorot(&mut rng, m_in, w));
            params.add(format!("mlp{}.bias", j + 1), Tensor::zeros(1, w));
            m_in = w;
        }
        params.add("mlp_out.weight", glorot(&mut rng, m_in, 1));
        params.add("mlp_out.bias", Tensor::zeros(1, 1));
        Ok(PolicyNetwork { cfg, input_dim, params })
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.cfg
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Params {
        &mut self.params
    }

    fn check_state(&self, s: &State) -> Result<()> {
        if s.dim() != self.input_dim {
            bail!(Shape, "state vectors have {} dims, policy expects {}", s.dim(), self.input_dim);
        }
        Ok(())
    }

    /// Closed 1-hop neighborhoods of every position, grouped by source.
    fn attention_edges(s: &State) -> (Arc<[usize]>, Arc<[usize]>, Arc<[usize]>) {
        let n = s.node_order.len();
        let mut nbrs: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for &(i, j) in &s.edges {
            nbrs[i].push(j);
            nbrs[j].push(i);
        }
        let mut src = Vec::new();
        let mut dst = Vec::new();
        let mut offsets = vec![0];
        for (i, list) in nbrs.iter_mut().enumerate() {
            list.sort_unstable();
            for &j in list.iter() {
                src.push(i);
                dst.push(j);
            }
            offsets.push(src.len());
        }
        (src.into(), dst.into(), offsets.into())
    }

    fn mlp(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        mut cursor: usize,
        mut x: Var,
        hidden: usize,
        slope: f64,
        out_bias: bool,
    ) -> Result<(Var, usize)> {
        for _ in 0..hidden {
            let z = tape.matmul(x, vars[cursor])?;
            let z = tape.add_bias(z, vars[cursor + 1])?;
            x = tape.leaky_relu(z, slope);
            cursor += 2;
        }
        let mut out = tape.matmul(x, vars[cursor])?;
        cursor += 1;
        if out_bias {
            out = tape.add_bias(out, vars[cursor])?;
            cursor += 1;
        }
        Ok((out, cursor))
    }

    fn encode(&self, tape: &mut Tape, vars: &[Var], s: &State, mut trace: Option<&mut Vec<Tensor>>) -> Result<(Var, usize)> {
        self.check_state(s)?;
        let (src, dst, offsets) = Self::attention_edges(s);
        let mut h = tape.constant(s.vectors.clone());
        let mut cursor = 0;
        for _ in 0..self.cfg.gat_layers {
            let w = vars[cursor];
            cursor += 1;
            let hs = tape.gather_rows(h, src.clone())?;
            let hd = tape.gather_rows(h, dst.clone())?;
            let pair = tape.concat_cols(&[hs, hd])?;
            let (e, next) = self.mlp(tape, vars, cursor, pair, self.cfg.attention_hidden.len(), self.cfg.gat_slope, false)?;
            cursor = next;
            let alpha = tape.segment_softmax(e, offsets.clone())?;
            if let Some(t) = trace.as_deref_mut() {
                t.push(tape.value(alpha).clone());
            }
            let wh = tape.matmul(h, w)?;
            let agg = tape.edge_aggregate(alpha, wh, src.clone(), dst.clone())?;
            h = tape.leaky_relu(agg, self.cfg.gat_slope);
        }
        Ok((h, cursor))
    }

    /// Node embeddings on the tape, one row per `state.node_order` entry.
    pub fn gat_encode(&self, tape: &mut Tape, vars: &[Var], s: &State) -> Result<Var> {
        Ok(self.encode(tape, vars, s, None)?.0)
    }

    /// Log-probabilities over `actions` given node embeddings.
    pub fn score_actions(&self, tape: &mut Tape, vars: &[Var], emb: Var, s: &State, actions: &ActionSpace) -> Result<Var> {
        if actions.is_empty() {
            bail!(Contract, "cannot score an empty action space");
        }
        let pos = |u: usize| s.position(u).ok_or_else(|| crate::Error::Contract(format!("action endpoint {} outside state", u)));
        let mut first = Vec::with_capacity(actions.len());
        let mut second = Vec::with_capacity(actions.len());
        let mut kind = Vec::with_capacity(actions.len());
        for &(a, b) in &actions.deletions {
            first.push(pos(a)?);
            second.push(pos(b)?);
            kind.push(0.0);
        }
        for &u in &actions.additions {
            first.push(pos(actions.target)?);
            second.push(pos(u)?);
            kind.push(1.0);
        }
        let xa = tape.gather_rows(emb, first.into())?;
        let xb = tape.gather_rows(emb, second.into())?;
        let t = tape.constant(Tensor::column(kind));
        let a = tape.concat_cols(&[xa, xb, t])?;
        let cursor = self.value_cursor();
        let (scores, _) = self.mlp(tape, vars, cursor, a, self.cfg.mlp_hidden.len(), self.cfg.mlp_slope, true)?;
        let row = tape.reshape(scores, 1, actions.len())?;
        Ok(tape.log_softmax_rows(row))
    }

    fn value_cursor(&self) -> usize {
        self.cfg.gat_layers * (1 + 2 * self.cfg.attention_hidden.len() + 1)
    }

    /// Full forward pass: embeddings, log-probabilities and their entropy.
    pub fn forward(&self, tape: &mut Tape, vars: &[Var], s: &State, actions: &ActionSpace) -> Result<PolicyOutput> {
        let embeddings = self.gat_encode(tape, vars, s)?;
        let log_probs = self.score_actions(tape, vars, embeddings, s, actions)?;
        let p = tape.exp(log_probs);
        let plogp = tape.mul(p, log_probs)?;
        let sum = tape.sum(plogp);
        let entropy = tape.scale(sum, -1.0);
        Ok(PolicyOutput { log_probs, entropy, embeddings })
    }

    /// Action probabilities without tracking gradients.
    pub fn distribution(&self, s: &State, actions: &ActionSpace) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let vars = self.constants(&mut tape);
        let out = self.forward(&mut tape, &vars, s, actions)?;
        Ok(tape.value(out.log_probs).data().iter().map(|&x| libm::exp(x)).collect())
    }

    /// Node embeddings without tracking gradients.
    pub fn embed(&self, s: &State) -> Result<Tensor> {
        let mut tape = Tape::new();
        let vars = self.constants(&mut tape);
        let e = self.gat_encode(&mut tape, &vars, s)?;
        Ok(tape.value(e).clone())
    }

    /// Attention coefficients of every layer as `(i, j, α_ij)` triples over
    /// state positions.
    pub fn attention(&self, s: &State) -> Result<Vec<Vec<(usize, usize, f64)>>> {
        let mut tape = Tape::new();
        let vars = self.constants(&mut tape);
        let mut trace = Vec::new();
        self.encode(&mut tape, &vars, s, Some(&mut trace))?;
        let (src, dst, _) = Self::attention_edges(s);
        Ok(trace.into_iter().map(|alpha| (0..src.len()).map(|e| (src[e], dst[e], alpha.data()[e])).collect()).collect())
    }

    fn constants(&self, tape: &mut Tape) -> Vec<Var> {
        self.params.values().iter().map(|t| tape.constant(t.clone())).collect()
    }
}

/// Entropy of an action distribution, in nats.
pub fn distribution_entropy(dist: &[f64]) -> f64 {
    blackbox::entropy(dist)
}
