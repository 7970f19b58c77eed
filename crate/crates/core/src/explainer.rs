//! Counterfactual generation: greedy decoding of a trained policy, per-node
//! policy training, and a random-deletion baseline.

use alloc::vec::Vec;

use rand::Rng as _;

use crate::blackbox::{argmax, NodeClassifier};
use crate::error::Result;
use crate::exec::Sequential;
use crate::graph::{Graph, Perturbation};
use crate::mdp::Episode;
use crate::policy::PolicyNetwork;
use crate::rng;
use crate::trainer::{rollout, state_dim, Mode, TrainConfig, Trainer, Trajectory};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CounterfactualResult {
    pub node: usize,
    pub success: bool,
    /// Edits in application order.
    pub perturbations: Vec<Perturbation>,
    pub label_before: usize,
    pub label_after: usize,
    pub size: usize,
    pub nbhd_edges: usize,
    /// Wall time in milliseconds; zero unless the caller measured it.
    pub ms: u64,
}

impl CounterfactualResult {
    pub fn from_trajectory(t: &Trajectory) -> Self {
        CounterfactualResult {
            node: t.node,
            success: t.success,
            perturbations: t.actions(),
            label_before: t.label_before,
            label_after: t.label_after,
            size: t.len(),
            nbhd_edges: t.nbhd_edges,
            ms: 0,
        }
    }

    pub fn n_additions(&self) -> usize {
        self.perturbations.iter().filter(|p| p.is_add()).count()
    }

    pub fn n_deletions(&self) -> usize {
        self.perturbations.len() - self.n_additions()
    }
}

/// Predicted label of `v` after applying `edits` in order to `g`.
pub fn replay_label(m: &(impl NodeClassifier + ?Sized), g: &Graph, v: usize, edits: &[Perturbation]) -> Result<usize> {
    let g1 = g.apply_all(edits)?;
    let lp = m.log_probs(&g1)?;
    g1.check_node(v)?;
    Ok(argmax(lp.row(v)))
}

/// Replaying the edits reproduces `label_after`, and a success really flips.
pub fn replay_ok(m: &(impl NodeClassifier + ?Sized), g: &Graph, r: &CounterfactualResult) -> Result<bool> {
    let before = replay_label(m, g, r.node, &[])?;
    let after = replay_label(m, g, r.node, &r.perturbations)?;
    Ok(before == r.label_before && after == r.label_after && r.success == (after != before))
}

/// Greedy decoding with a frozen policy.
pub fn explain_inductive<M: NodeClassifier + ?Sized>(
    policy: &PolicyNetwork,
    model: &M,
    g: &Graph,
    v: usize,
    cfg: &TrainConfig,
) -> Result<CounterfactualResult> {
    // greedy decoding draws no randomness
    let t = rollout(policy, model, g, v, cfg, Mode::Greedy, &mut rng::rng(0))?;
    Ok(CounterfactualResult::from_trajectory(&t))
}

/// When per-node training stops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum StopRule {
    /// After the first sampled episode that flips the label.
    #[default]
    FirstSuccess,
    /// After exactly `episodes` updates.
    Fixed,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TransductiveConfig {
    /// `episodes` is the per-node update budget.
    pub train: TrainConfig,
    pub stop: StopRule,
}

impl Default for TransductiveConfig {
    fn default() -> Self {
        TransductiveConfig { train: TrainConfig { episodes: 500, ..TrainConfig::transductive() }, stop: StopRule::FirstSuccess }
    }
}

const TRANSDUCTIVE_STREAM: u64 = 0x5452_414e;

/// Train a policy on `{v}` alone, then decode greedily.
pub fn explain_transductive<M: NodeClassifier + ?Sized>(
    model: &M,
    g: &Graph,
    v: usize,
    cfg: &TransductiveConfig,
) -> Result<CounterfactualResult> {
    g.check_node(v)?;
    let seed = rng::derive(cfg.train.seed, &[TRANSDUCTIVE_STREAM, v as u64]);
    let mut train = cfg.train.clone();
    train.seed = seed;
    train.policy.seed = seed;
    let mut trainer = Trainer::new(state_dim(g, &train), train)?;
    for e in 0..cfg.train.episodes {
        let out = trainer.update(model, g, &[v], e, 0, &Sequential)?;
        let t = &out.trajectories[0];
        if t.steps.is_empty() {
            // nothing to learn from: no actions or nothing to flip
            break;
        }
        if cfg.stop == StopRule::FirstSuccess && t.success {
            break;
        }
    }
    explain_inductive(&trainer.policy, model, g, v, &trainer.cfg)
}

/// Uniformly random deletions inside the neighborhood until the label flips
/// or the budget runs out.
pub fn random_baseline<M: NodeClassifier + ?Sized>(
    model: &M,
    g: &Graph,
    v: usize,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<CounterfactualResult> {
    let mut rng = rng::rng_for(seed, &[v as u64]);
    let mut ep = Episode::with_flags(model, g, v, cfg.hops, cfg.reward(), cfg.reward_label, cfg.features)?;
    while !ep.flipped() && ep.step_index() < cfg.delta {
        let actions = ep.actions(true);
        if actions.is_empty() {
            break;
        }
        let a = actions.get(rng.gen_range(0..actions.len()));
        ep.step(&a)?;
    }
    let perturbations = ep.global_edits();
    Ok(CounterfactualResult {
        node: v,
        success: ep.flipped(),
        size: perturbations.len(),
        perturbations,
        label_before: ep.original_label(),
        label_after: ep.current_label(),
        nbhd_edges: ep.neighborhood_edge_count(),
        ms: 0,
    })
}
