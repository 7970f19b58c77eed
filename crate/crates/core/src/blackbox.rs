//! The frozen node classifier being explained.
//!
//! Explainers only see a model through [`NodeClassifier`]: a graph goes in,
//! per-node log-probabilities come out. [`GcnModel`] is the three-layer graph
//! convolutional network trained on each benchmark.

use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::diff::{adam_step, AdamConfig, AdamState, Params, Tape, Tensor, Var};
use crate::error::{bail, Result};
use crate::graph::Graph;
use crate::rng;

/// Black-box access to a node classifier.
pub trait NodeClassifier: Sync {
    fn n_classes(&self) -> usize;

    /// Row `u` holds `log p(c | G, u)` for every class `c`.
    fn log_probs(&self, g: &Graph) -> Result<Tensor>;

    /// Number of message-passing hops, if the model is local. When known,
    /// explainers may evaluate the model on a bounded subgraph around the
    /// target instead of the full graph; outputs are identical.
    fn receptive_field(&self) -> Option<usize> {
        None
    }
}

/// Argmax with ties going to the smallest class id.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Shannon entropy in nats, with `0 · ln 0 = 0`.
pub fn entropy(probs: &[f64]) -> f64 {
    -probs.iter().filter(|&&p| p > 0.0).map(|&p| p * libm::log(p)).sum::<f64>()
}

pub fn predict(m: &impl NodeClassifier, g: &Graph, v: usize) -> Result<usize> {
    Ok(argmax(&class_probs(m, g, v)?))
}

pub fn class_probs(m: &impl NodeClassifier, g: &Graph, v: usize) -> Result<Vec<f64>> {
    g.check_node(v)?;
    let lp = m.log_probs(g)?;
    Ok(lp.row(v).iter().map(|&x| libm::exp(x)).collect())
}

pub fn node_entropy(m: &impl NodeClassifier, g: &Graph, v: usize) -> Result<f64> {
    Ok(entropy(&class_probs(m, g, v)?))
}

/// Training provenance stored with a checkpoint.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainMeta {
    pub seed: u64,
    pub epochs: usize,
    pub lr: f64,
    pub n_train: usize,
    pub n_test: usize,
}

/// Three graph-convolution layers: ReLU after the first two, log-softmax
/// after the last.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnModel {
    dims: [usize; 4],
    params: Params,
    pub meta: TrainMeta,
}

const GCN_LAYERS: usize = 3;
const BIAS_SCALE: f64 = 3.0;

impl GcnModel {
    /// Weights uniform in `±1/sqrt(fan_out)`, biases in `±3/sqrt(fan_out)`.
    /// On constant-feature graphs the degree signal is all there is, and small
    /// biases leave most ReLUs in their linear region, where training tends
    /// to settle on the class prior.
    pub fn new(in_dim: usize, hidden: usize, n_classes: usize, seed: u64) -> Self {
        let dims = [in_dim, hidden, hidden, n_classes];
        let mut rng = rng::rng(seed);
        let mut params = Params::new();
        for l in 0..GCN_LAYERS {
            let (fi, fo) = (dims[l], dims[l + 1]);
            let a = 1.0 / libm::sqrt(fo as f64);
            let w = (0..fi * fo).map(|_| rng.gen_range(-a..a)).collect();
            let b = (0..fo).map(|_| BIAS_SCALE * rng.gen_range(-a..a)).collect();
            params.add(alloc::format!("gcn{}.weight", l + 1), Tensor::from_vec(fi, fo, w).expect("sized"));
            params.add(alloc::format!("gcn{}.bias", l + 1), Tensor::from_vec(1, fo, b).expect("sized"));
        }
        GcnModel { dims, params, meta: TrainMeta::default() }
    }

    /// Every weight and bias zero.
    pub fn zeros(in_dim: usize, hidden: usize, n_classes: usize) -> Self {
        let mut m = Self::new(in_dim, hidden, n_classes, 0);
        for id in m.params.ids().collect::<Vec<_>>() {
            m.params.get_mut(id).data_mut().fill(0.0);
        }
        m
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn hidden(&self) -> usize {
        self.dims[1]
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Params {
        &mut self.params
    }

    fn forward(&self, tape: &mut Tape, vars: &[Var], g: &Graph) -> Result<Var> {
        if g.feature_dim() != self.dims[0] {
            bail!(Shape, "model expects {} features, graph has {}", self.dims[0], g.feature_dim());
        }
        let adj = Arc::new(g.normalized_adjacency());
        let mut h = tape.constant(g.features().clone());
        for l in 0..GCN_LAYERS {
            let agg = tape.sparse_aggregate(adj.clone(), h)?;
            let lin = tape.matmul(agg, vars[2 * l])?;
            let z = tape.add_bias(lin, vars[2 * l + 1])?;
            h = if l + 1 < GCN_LAYERS { tape.relu(z) } else { tape.log_softmax_rows(z) };
        }
        Ok(h)
    }
}

impl NodeClassifier for GcnModel {
    fn n_classes(&self) -> usize {
        self.dims[3]
    }

    fn log_probs(&self, g: &Graph) -> Result<Tensor> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = self.params.values().iter().map(|t| tape.constant(t.clone())).collect();
        let out = self.forward(&mut tape, &vars, g)?;
        Ok(tape.value(out).clone())
    }

    fn receptive_field(&self) -> Option<usize> {
        Some(GCN_LAYERS)
    }
}

/// Disjoint train/test node sets.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Shuffle `nodes` and put the first `round(train_frac · n)` into train.
    /// Both halves are returned ascending.
    pub fn random(nodes: &[usize], train_frac: f64, seed: u64) -> Self {
        let mut shuffled = nodes.to_vec();
        shuffled.shuffle(&mut rng::rng(seed));
        let n_train = libm::round(train_frac * nodes.len() as f64) as usize;
        let mut train = shuffled[..n_train.min(nodes.len())].to_vec();
        let mut test = shuffled[n_train.min(nodes.len())..].to_vec();
        train.sort_unstable();
        test.sort_unstable();
        Split { train, test }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GcnTrainConfig {
    pub hidden: usize,
    pub lr: f64,
    pub epochs: usize,
    /// Independent initializations; the one with the lowest final training
    /// loss is kept.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for GcnTrainConfig {
    fn default() -> Self {
        GcnTrainConfig { hidden: 20, lr: 0.01, epochs: 2000, restarts: 4, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainReport {
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub final_loss: f64,
}

/// Fraction of `nodes` whose predicted class equals the true label.
pub fn accuracy(m: &impl NodeClassifier, g: &Graph, nodes: &[usize]) -> Result<f64> {
    if nodes.is_empty() {
        return Ok(0.0);
    }
    let lp = m.log_probs(g)?;
    let hits = nodes.iter().filter(|&&u| argmax(lp.row(u)) == g.label(u)).count();
    Ok(hits as f64 / nodes.len() as f64)
}

/// Full-batch Adam on the mean NLL of the training nodes, repeated from
/// `cfg.restarts` initializations.
pub fn train_blackbox(g: &Graph, split: &Split, cfg: &GcnTrainConfig) -> Result<(GcnModel, TrainReport)> {
    if split.train.is_empty() || split.test.is_empty() {
        bail!(Input, "train and test splits must both be non-empty");
    }
    for &u in split.train.iter().chain(&split.test) {
        g.check_node(u)?;
    }
    if split.train.iter().any(|u| split.test.binary_search(u).is_ok()) {
        bail!(Input, "train and test splits overlap");
    }
    if cfg.restarts == 0 {
        bail!(Input, "at least one initialization is needed");
    }
    let picks: Arc<[(usize, usize)]> = split.train.iter().map(|&u| (u, g.label(u))).collect();
    let mut best: Option<(GcnModel, f64)> = None;
    for r in 0..cfg.restarts {
        let init = if r == 0 { cfg.seed } else { rng::derive(cfg.seed, &[r as u64]) };
        let (model, loss) = fit(g, &picks, cfg, init)?;
        if best.as_ref().map_or(true, |(_, l)| loss < *l) {
            best = Some((model, loss));
        }
    }
    let (mut model, loss) = best.expect("at least one restart");
    model.meta = TrainMeta { seed: cfg.seed, epochs: cfg.epochs, lr: cfg.lr, n_train: split.train.len(), n_test: split.test.len() };
    let report = TrainReport {
        train_accuracy: accuracy(&model, g, &split.train)?,
        test_accuracy: accuracy(&model, g, &split.test)?,
        final_loss: loss,
    };
    Ok((model, report))
}

/// One initialization. Returns the parameters with the lowest training loss
/// seen, since a large Adam step can kill every ReLU and collapse the model
/// back to the class prior late in training.
fn fit(g: &Graph, picks: &Arc<[(usize, usize)]>, cfg: &GcnTrainConfig, seed: u64) -> Result<(GcnModel, f64)> {
    let mut model = GcnModel::new(g.feature_dim(), cfg.hidden, g.n_classes(), seed);
    let adam = AdamConfig::with_lr(cfg.lr);
    let mut state = AdamState::new(&model.params);
    let mut best: Option<(Params, f64)> = None;
    for epoch in 0..=cfg.epochs {
        let mut tape = Tape::new();
        let vars = tape.bind(&model.params);
        let out = model.forward(&mut tape, &vars, g)?;
        let nll = tape.nll_pick(out, picks.clone())?;
        let loss = tape.scalar(nll);
        if !loss.is_finite() {
            bail!(Numeric, "training loss {}", loss);
        }
        if best.as_ref().map_or(true, |(_, l)| loss < *l) {
            best = Some((model.params.clone(), loss));
        }
        if epoch == cfg.epochs {
            break;
        }
        let grads = tape.backward(nll)?;
        let pg = tape.param_grads(&grads, &model.params);
        adam_step(&mut model.params, &pg, &adam, &mut state)?;
    }
    let (params, loss) = best.expect("at least one evaluation");
    model.params = params;
    Ok((model, loss))
}
