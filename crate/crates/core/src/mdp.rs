//! The edit environment seen by the policy: state vectors over the target's
//! h-hop neighborhood, the set of admissible edge edits, per-step rewards and
//! return post-processing.

use alloc::vec::Vec;

use crate::blackbox::{argmax, entropy, NodeClassifier};
use crate::diff::Tensor;
use crate::error::{bail, Result};
use crate::graph::{EditKind, Graph, Perturbation};

/// Which node-level signals go into each state vector. All on by default;
/// turning parts off supports feature ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeatureFlags {
    pub raw: bool,
    pub degree: bool,
    pub entropy: bool,
    pub one_hot: bool,
}

impl Default for FeatureFlags {
    fn default() -> Self {
        FeatureFlags { raw: true, degree: true, entropy: true, one_hot: true }
    }
}

impl FeatureFlags {
    pub fn dim(&self, feature_dim: usize, n_classes: usize) -> usize {
        usize::from(self.raw) * feature_dim + usize::from(self.degree) + usize::from(self.entropy) + usize::from(self.one_hot) * n_classes
    }
}

/// Policy input at step `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub target: usize,
    pub step: usize,
    /// Neighborhood of the target in the original graph, ascending.
    pub node_order: Vec<usize>,
    /// One row per entry of `node_order`.
    pub vectors: Tensor,
    /// Current-graph edges among `node_order`, as `(i, j)` positions, `i < j`.
    pub edges: Vec<(usize, usize)>,
}

impl State {
    pub fn position(&self, u: usize) -> Option<usize> {
        self.node_order.binary_search(&u).ok()
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    /// Assemble a state from precomputed log-probabilities of `g_t`.
    pub fn from_log_probs(
        g_t: &Graph,
        target: usize,
        node_order: &[usize],
        logp: &Tensor,
        step: usize,
        flags: FeatureFlags,
    ) -> Result<State> {
        let c = logp.cols();
        let dim = flags.dim(g_t.feature_dim(), c);
        let mut vectors = Tensor::zeros(node_order.len(), dim);
        for (i, &u) in node_order.iter().enumerate() {
            let probs: Vec<f64> = logp.row(u).iter().map(|&x| libm::exp(x)).collect();
            let row = vectors.row_mut(i);
            let mut k = 0;
            if flags.raw {
                let f = g_t.features().row(u);
                row[..f.len()].copy_from_slice(f);
                k += f.len();
            }
            if flags.degree {
                row[k] = g_t.degree(u) as f64;
                k += 1;
            }
            if flags.entropy {
                row[k] = entropy(&probs);
                k += 1;
            }
            if flags.one_hot {
                row[k + argmax(&probs)] = 1.0;
            }
        }
        let mut edges = Vec::new();
        for (i, &u) in node_order.iter().enumerate() {
            for &w in g_t.neighbors(u) {
                if w > u {
                    if let Ok(j) = node_order.binary_search(&w) {
                        edges.push((i, j));
                    }
                }
            }
        }
        Ok(State { target, step, node_order: node_order.to_vec(), vectors, edges })
    }
}

/// State of `g_t` for target `v`; the neighborhood is taken from `g0`.
pub fn build_state(g_t: &Graph, g0: &Graph, v: usize, h: usize, m: &impl NodeClassifier, t: usize) -> Result<State> {
    let order = g0.khop(v, h)?;
    let logp = m.log_probs(g_t)?;
    State::from_log_probs(g_t, v, &order, &logp, t, FeatureFlags::default())
}

/// Admissible edits at one step: deletions of current edges inside the
/// neighborhood, then additions from the target to non-adjacent neighborhood
/// nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSpace {
    pub target: usize,
    /// Canonical `(u, w)` pairs, lexicographic.
    pub deletions: Vec<(usize, usize)>,
    /// Other endpoint of each addition `(target, u)`, ascending.
    pub additions: Vec<usize>,
}

impl ActionSpace {
    pub fn len(&self) -> usize {
        self.deletions.len() + self.additions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The `i`-th action: deletions first, then additions.
    pub fn get(&self, i: usize) -> Perturbation {
        let nd = self.deletions.len();
        if i < nd {
            let (a, b) = self.deletions[i];
            Perturbation { u: a, v: b, kind: EditKind::Delete }
        } else {
            Perturbation::new(self.target, self.additions[i - nd], EditKind::Add).expect("addition excludes target")
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Perturbation> + '_ {
        (0..self.len()).map(|i| self.get(i))
    }

    pub fn without_additions(mut self) -> Self {
        self.additions.clear();
        self
    }
}

pub(crate) fn actions_within(g_t: &Graph, v: usize, nbhd: &[usize]) -> ActionSpace {
    let inside = |u: &usize| nbhd.binary_search(u).is_ok();
    let mut deletions = Vec::new();
    for &u in nbhd {
        for &w in g_t.neighbors(u) {
            if w > u && inside(&w) {
                deletions.push((u, w));
            }
        }
    }
    let additions = nbhd.iter().copied().filter(|&u| u != v && !g_t.has_edge(v, u)).collect();
    ActionSpace { target: v, deletions, additions }
}

pub fn enumerate_actions(g_t: &Graph, g0: &Graph, v: usize, h: usize) -> Result<ActionSpace> {
    let nbhd = g0.khop(v, h)?;
    g_t.check_node(v)?;
    Ok(actions_within(g_t, v, &nbhd))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RewardConfig {
    pub beta: f64,
    /// Denominators smaller than this in magnitude are pushed out to it.
    pub eps: f64,
    pub cap: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig { beta: 0.5, eps: 1e-6, cap: 1e6 }
    }
}

/// `1 / (L + β·(t+1))` where `L` is the log-probability of the reward label
/// after the step-`t` edit.
pub fn reward_from_log_prob(log_prob: f64, t: usize, cfg: &RewardConfig) -> Result<f64> {
    if !log_prob.is_finite() {
        bail!(Numeric, "log-probability {}", log_prob);
    }
    let mut den = log_prob + cfg.beta * (t + 1) as f64;
    if den.abs() < cfg.eps {
        // exact zero takes the sign of the log-likelihood side (non-positive)
        den = if den > 0.0 { cfg.eps } else { -cfg.eps };
    }
    Ok((1.0 / den).clamp(-cfg.cap, cfg.cap))
}

/// Reward for `g_next` using the true label of `v`.
pub fn compute_reward(m: &impl NodeClassifier, g_next: &Graph, v: usize, t: usize, beta: f64) -> Result<f64> {
    g_next.check_node(v)?;
    let lp = m.log_probs(g_next)?;
    reward_from_log_prob(lp.get(v, g_next.label(v)), t, &RewardConfig { beta, ..RewardConfig::default() })
}

/// Returns-to-go `G_t = Σ_i γ^i r_{t+i}` over the realized trajectory.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = alloc::vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (i, &r) in rewards.iter().enumerate().rev() {
        acc = r + gamma * acc;
        out[i] = acc;
    }
    out
}

/// `(x - mean) / max(std, c)` with the population standard deviation.
pub fn normalize_returns(returns: &[f64], c: f64) -> Vec<f64> {
    if returns.is_empty() {
        return Vec::new();
    }
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let scale = libm::sqrt(var).max(c);
    returns.iter().map(|x| (x - mean) / scale).collect()
}

/// Which label's log-likelihood enters the reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum RewardLabel {
    #[default]
    True,
    OriginalPrediction,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub flipped: bool,
}

/// One edit episode for a target node.
///
/// When the model reports a finite receptive field `L`, the model is run on
/// the subgraph induced by the `(h + L + 1)`-hop ball around the target. All
/// edits stay inside the `h`-hop ball, so every node whose output matters has
/// its full `L`-hop input (degrees included) inside the view and predictions
/// equal those on the full graph. Ids inside an episode are local; use
/// [`Episode::to_global`] to translate.
#[derive(Debug, Clone)]
pub struct Episode<'a, M: NodeClassifier + ?Sized> {
    model: &'a M,
    view_nodes: Vec<usize>,
    g0: Graph,
    g: Graph,
    target: usize,
    nbhd: Vec<usize>,
    logp: Tensor,
    original_label: usize,
    reward_label: usize,
    reward: RewardConfig,
    flags: FeatureFlags,
    t: usize,
    edits: Vec<Perturbation>,
}

impl<'a, M: NodeClassifier + ?Sized> Episode<'a, M> {
    pub fn new(model: &'a M, g: &Graph, v: usize, hops: usize, reward: RewardConfig, label: RewardLabel) -> Result<Self> {
        Self::with_flags(model, g, v, hops, reward, label, FeatureFlags::default())
    }

    pub fn with_flags(
        model: &'a M,
        g: &Graph,
        v: usize,
        hops: usize,
        reward: RewardConfig,
        label: RewardLabel,
        flags: FeatureFlags,
    ) -> Result<Self> {
        g.check_node(v)?;
        let view_nodes = match model.receptive_field() {
            Some(l) => g.khop(v, hops + l + 1)?,
            None => (0..g.n_nodes()).collect(),
        };
        let g0 = if view_nodes.len() == g.n_nodes() { g.clone() } else { g.induced_subgraph(&view_nodes)? };
        let target = view_nodes.binary_search(&v).expect("view contains target");
        let nbhd = g0.khop(target, hops)?;
        let logp = model.log_probs(&g0)?;
        if logp.rows() != g0.n_nodes() {
            bail!(Shape, "model returned {} rows for {} nodes", logp.rows(), g0.n_nodes());
        }
        let original_label = argmax(logp.row(target));
        let reward_label = match label {
            RewardLabel::True => g0.label(target),
            RewardLabel::OriginalPrediction => original_label,
        };
        Ok(Episode {
            model,
            view_nodes,
            g: g0.clone(),
            g0,
            target,
            nbhd,
            logp,
            original_label,
            reward_label,
            reward,
            flags,
            t: 0,
            edits: Vec::new(),
        })
    }

    pub fn step_index(&self) -> usize {
        self.t
    }

    pub fn original_label(&self) -> usize {
        self.original_label
    }

    pub fn current_label(&self) -> usize {
        argmax(self.logp.row(self.target))
    }

    pub fn flipped(&self) -> bool {
        self.current_label() != self.original_label
    }

    /// Edges of the original graph inside the target's h-hop neighborhood.
    pub fn neighborhood_edge_count(&self) -> usize {
        actions_within(&self.g0, self.target, &self.nbhd).deletions.len()
    }

    pub fn neighborhood_size(&self) -> usize {
        self.nbhd.len()
    }

    /// Edits so far, in local ids.
    pub fn edits(&self) -> &[Perturbation] {
        &self.edits
    }

    pub fn global_edits(&self) -> Vec<Perturbation> {
        self.edits.iter().map(|p| self.to_global(p)).collect()
    }

    pub fn to_global(&self, p: &Perturbation) -> Perturbation {
        Perturbation::new(self.view_nodes[p.u], self.view_nodes[p.v], p.kind).expect("distinct endpoints")
    }

    pub fn state(&self) -> Result<State> {
        State::from_log_probs(&self.g, self.target, &self.nbhd, &self.logp, self.t, self.flags)
    }

    pub fn actions(&self, deletion_only: bool) -> ActionSpace {
        let a = actions_within(&self.g, self.target, &self.nbhd);
        if deletion_only {
            a.without_additions()
        } else {
            a
        }
    }

    /// Apply a (local-id) edit, re-run the model, and score the result.
    pub fn step(&mut self, p: &Perturbation) -> Result<StepOutcome> {
        self.g.apply_mut(p)?;
        self.logp = self.model.log_probs(&self.g)?;
        let lp = self.logp.get(self.target, self.reward_label);
        let reward = reward_from_log_prob(lp, self.t, &self.reward)?;
        self.edits.push(*p);
        self.t += 1;
        Ok(StepOutcome { reward, flipped: self.flipped() })
    }

    /// Whether applying the local-id edits simultaneously to the original
    /// view flips the target. Used by the exhaustive oracle.
    pub fn flips_with(&self, edits: &[Perturbation]) -> Result<bool> {
        let g = self.g0.apply_all(edits)?;
        let lp = self.model.log_probs(&g)?;
        Ok(argmax(lp.row(self.target)) != self.original_label)
    }

    /// Action space of the original graph (step 0).
    pub fn initial_actions(&self) -> ActionSpace {
        actions_within(&self.g0, self.target, &self.nbhd)
    }
}
