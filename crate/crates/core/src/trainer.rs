//! REINFORCE over edit episodes.
//!
//! Each rollout records one tape; after the episode ends the per-step terms
//! `log p · R̃ + η · Ent` are summed on that tape and differentiated once.
//! Gradients of a batch are accumulated in node order and applied with a
//! single Adam step, so results do not depend on how rollouts are scheduled.

use alloc::vec::Vec;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;

use crate::blackbox::{argmax, NodeClassifier};
use crate::diff::{adam_step, AdamConfig, AdamState, Tape, Tensor, Var};
use crate::error::{bail, Result};
use crate::exec::Executor;
use crate::graph::{Graph, Perturbation};
use crate::mdp::{discounted_returns, normalize_returns, Episode, FeatureFlags, RewardConfig, RewardLabel};
use crate::policy::{PolicyConfig, PolicyNetwork};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    /// Edit budget per episode.
    pub delta: usize,
    pub episodes: usize,
    pub batch_size: usize,
    pub gamma: f64,
    pub eta: f64,
    pub beta: f64,
    pub hops: usize,
    pub lr: f64,
    pub seed: u64,
    pub deletion_only: bool,
    /// Floor on the standard deviation when normalizing returns.
    pub norm_eps: f64,
    pub reward_label: RewardLabel,
    pub features: FeatureFlags,
    pub policy: PolicyConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            delta: 15,
            episodes: 500,
            batch_size: 16,
            gamma: 0.4,
            eta: 0.1,
            beta: 0.5,
            hops: 4,
            lr: 3e-4,
            seed: 0,
            deletion_only: false,
            norm_eps: 1e-8,
            reward_label: RewardLabel::True,
            features: FeatureFlags::default(),
            policy: PolicyConfig::default(),
        }
    }
}

impl TrainConfig {
    /// Defaults for per-node training.
    pub fn transductive() -> Self {
        TrainConfig { gamma: 0.6, ..Self::default() }
    }

    pub fn reward(&self) -> RewardConfig {
        RewardConfig { beta: self.beta, ..RewardConfig::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.delta == 0 {
            bail!(Input, "delta must be at least 1");
        }
        if !(0.0..1.0).contains(&self.gamma) {
            bail!(Input, "gamma {} outside [0, 1)", self.gamma);
        }
        if !(self.eta >= 0.0 && self.beta >= 0.0) {
            bail!(Input, "eta and beta must be non-negative");
        }
        if self.batch_size == 0 {
            bail!(Input, "batch size must be positive");
        }
        if !(self.lr > 0.0 && self.norm_eps > 0.0) {
            bail!(Input, "learning rate and normalization floor must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Sample,
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum StopReason {
    Flipped,
    Budget,
    NoAction,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    /// Edit in global node ids.
    pub action: Perturbation,
    pub log_prob: f64,
    pub reward: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub node: usize,
    pub steps: Vec<Step>,
    pub success: bool,
    pub stop: StopReason,
    pub label_before: usize,
    pub label_after: usize,
    pub nbhd_edges: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn actions(&self) -> Vec<Perturbation> {
        self.steps.iter().map(|s| s.action).collect()
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.reward).collect()
    }

    /// Normalized discounted returns, one per step.
    pub fn advantages(&self, gamma: f64, c: f64) -> Vec<f64> {
        normalize_returns(&discounted_returns(&self.rewards(), gamma), c)
    }
}

/// Per-step tape handles kept for the loss.
struct Recorded {
    traj: Trajectory,
    tape: Tape,
    terms: Vec<(Var, Var)>,
}

fn select(probs: &[f64], mode: Mode, rng: &mut Rng) -> Result<usize> {
    match mode {
        Mode::Greedy => Ok(argmax(probs)),
        Mode::Sample => {
            let dist = WeightedIndex::new(probs).map_err(|e| crate::Error::Numeric(alloc::format!("action distribution: {}", e)))?;
            Ok(dist.sample(rng))
        }
    }
}

fn run<M: NodeClassifier + ?Sized>(
    policy: &PolicyNetwork,
    model: &M,
    g: &Graph,
    v: usize,
    cfg: &TrainConfig,
    mode: Mode,
    rng: &mut Rng,
    track: bool,
) -> Result<Recorded> {
    let mut ep = Episode::with_flags(model, g, v, cfg.hops, cfg.reward(), cfg.reward_label, cfg.features)?;
    let mut tape = Tape::new();
    let vars = if track { tape.bind(policy.params()) } else { policy.params().values().iter().map(|t| tape.constant(t.clone())).collect() };
    let mut steps = Vec::new();
    let mut terms = Vec::new();
    let stop = loop {
        if ep.flipped() {
            break StopReason::Flipped;
        }
        if ep.step_index() >= cfg.delta {
            break StopReason::Budget;
        }
        let actions = ep.actions(cfg.deletion_only);
        if actions.is_empty() {
            break StopReason::NoAction;
        }
        let state = ep.state()?;
        let out = policy.forward(&mut tape, &vars, &state, &actions)?;
        let logp = tape.value(out.log_probs).data().to_vec();
        let probs: Vec<f64> = logp.iter().map(|&x| libm::exp(x)).collect();
        let i = select(&probs, mode, rng)?;
        let action = actions.get(i);
        let outcome = ep.step(&action)?;
        steps.push(Step { action: ep.to_global(&action), log_prob: logp[i], reward: outcome.reward, entropy: tape.scalar(out.entropy) });
        if track {
            let picked = tape.pick(out.log_probs, i)?;
            terms.push((picked, out.entropy));
        }
    };
    let traj = Trajectory {
        node: v,
        success: ep.flipped(),
        stop,
        label_before: ep.original_label(),
        label_after: ep.current_label(),
        nbhd_edges: ep.neighborhood_edge_count(),
        steps,
    };
    Ok(Recorded { traj, tape, terms })
}

/// Run one episode for target `v` without recording gradients.
pub fn rollout<M: NodeClassifier + ?Sized>(
    policy: &PolicyNetwork,
    model: &M,
    g: &Graph,
    v: usize,
    cfg: &TrainConfig,
    mode: Mode,
    rng: &mut Rng,
) -> Result<Trajectory> {
    Ok(run(policy, model, g, v, cfg, mode, rng, false)?.traj)
}

/// Batch loss `-(1/|B|) Σ_v Σ_t (log p · R̃ + η · Ent)` from recorded values.
pub fn policy_loss(batch: &[Trajectory], gamma: f64, eta: f64, c: f64) -> Result<f64> {
    if batch.is_empty() {
        bail!(Contract, "empty batch");
    }
    let mut total = 0.0;
    for traj in batch {
        let adv = traj.advantages(gamma, c);
        for (s, a) in traj.steps.iter().zip(adv) {
            total += s.log_prob * a + eta * s.entropy;
        }
    }
    Ok(-total / batch.len() as f64)
}

/// One trajectory's share of the batch loss, built on its tape. Returns
/// `None` for empty trajectories.
pub fn loss_on_tape(tape: &mut Tape, terms: &[(Var, Var)], advantages: &[f64], eta: f64, batch_len: usize) -> Result<Option<Var>> {
    if terms.len() != advantages.len() {
        bail!(Shape, "{} steps but {} advantages", terms.len(), advantages.len());
    }
    let mut acc: Option<Var> = None;
    for (&(lp, ent), &a) in terms.iter().zip(advantages) {
        let x = tape.scale(lp, a);
        let e = tape.scale(ent, eta);
        let term = tape.add(x, e)?;
        acc = Some(match acc {
            None => term,
            Some(prev) => tape.add(prev, term)?,
        });
    }
    Ok(acc.map(|s| tape.scale(s, -1.0 / batch_len as f64)))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LogRecord {
    pub episode: usize,
    pub batch: usize,
    /// Mean undiscounted reward sum per trajectory.
    pub mean_return: f64,
    pub success_rate: f64,
    pub loss: f64,
}

/// Result of a batch update.
#[derive(Debug, Clone)]
pub struct BatchOutcome {
    pub trajectories: Vec<Trajectory>,
    pub record: LogRecord,
}

/// Stream ids separating the trainer's random draws.
const SHUFFLE_STREAM: u64 = 0x5348_5546;
const ROLLOUT_STREAM: u64 = 0x524f_4c4c;

/// Sampled rollouts on `nodes` with gradients of the batch loss.
fn batch_gradients<M: NodeClassifier + ?Sized, E: Executor>(
    policy: &PolicyNetwork,
    model: &M,
    g: &Graph,
    nodes: &[usize],
    episode: usize,
    cfg: &TrainConfig,
    exec: &E,
) -> Result<(Vec<Trajectory>, Vec<Tensor>)> {
    let per_node = exec.map(nodes, |&v| -> Result<(Trajectory, Option<Vec<Tensor>>)> {
        let mut rng = rng::rng_for(cfg.seed, &[ROLLOUT_STREAM, episode as u64, v as u64]);
        let mut rec = run(policy, model, g, v, cfg, Mode::Sample, &mut rng, true)?;
        let adv = rec.traj.advantages(cfg.gamma, cfg.norm_eps);
        let grads = match loss_on_tape(&mut rec.tape, &rec.terms, &adv, cfg.eta, nodes.len())? {
            Some(root) => {
                let gr = rec.tape.backward(root)?;
                Some(rec.tape.param_grads(&gr, policy.params()))
            }
            None => None,
        };
        Ok((rec.traj, grads))
    });
    let mut total: Vec<Tensor> = policy.params().values().iter().map(|t| Tensor::zeros(t.rows(), t.cols())).collect();
    let mut trajs = Vec::with_capacity(nodes.len());
    for r in per_node {
        let (traj, grads) = r?;
        if let Some(gs) = grads {
            for (acc, g) in total.iter_mut().zip(&gs) {
                acc.add_assign(g);
            }
        }
        trajs.push(traj);
    }
    Ok((trajs, total))
}

/// Stateful trainer; exposes single batch updates so callers can stop early.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub policy: PolicyNetwork,
    pub cfg: TrainConfig,
    adam: AdamConfig,
    state: AdamState,
}

impl Trainer {
    pub fn new(input_dim: usize, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let policy = PolicyNetwork::new(input_dim, cfg.policy.clone())?;
        Ok(Self::with_policy(policy, cfg))
    }

    pub fn with_policy(policy: PolicyNetwork, cfg: TrainConfig) -> Self {
        let state = AdamState::new(policy.params());
        Trainer { adam: AdamConfig::with_lr(cfg.lr), state, policy, cfg }
    }

    /// Sample one rollout per node, then take one optimizer step on the batch loss.
    pub fn update<M: NodeClassifier + ?Sized, E: Executor>(
        &mut self,
        model: &M,
        g: &Graph,
        nodes: &[usize],
        episode: usize,
        batch: usize,
        exec: &E,
    ) -> Result<BatchOutcome> {
        if nodes.is_empty() {
            bail!(Contract, "empty batch");
        }
        let (trajectories, grads) = batch_gradients(&self.policy, model, g, nodes, episode, &self.cfg, exec)?;
        let loss = policy_loss(&trajectories, self.cfg.gamma, self.cfg.eta, self.cfg.norm_eps)?;
        adam_step(self.policy.params_mut(), &grads, &self.adam, &mut self.state)?;
        let n = trajectories.len() as f64;
        let record = LogRecord {
            episode,
            batch,
            mean_return: trajectories.iter().map(|t| t.rewards().iter().sum::<f64>()).sum::<f64>() / n,
            success_rate: trajectories.iter().filter(|t| t.success).count() as f64 / n,
            loss,
        };
        Ok(BatchOutcome { trajectories, record })
    }
}

/// Input width of the policy for graph `g` under `cfg`.
pub fn state_dim(g: &Graph, cfg: &TrainConfig) -> usize {
    cfg.features.dim(g.feature_dim(), g.n_classes())
}

/// Train a fresh policy for `cfg.episodes` passes over `train_nodes`, split
/// each pass into shuffled batches of `cfg.batch_size`.
pub fn train_policy<M: NodeClassifier + ?Sized, E: Executor>(
    model: &M,
    g: &Graph,
    train_nodes: &[usize],
    cfg: &TrainConfig,
    exec: &E,
) -> Result<(PolicyNetwork, Vec<LogRecord>)> {
    if train_nodes.is_empty() {
        bail!(Input, "no training nodes");
    }
    for &v in train_nodes {
        g.check_node(v)?;
    }
    let mut trainer = Trainer::new(state_dim(g, cfg), cfg.clone())?;
    let mut log = Vec::new();
    let mut order = train_nodes.to_vec();
    for episode in 0..cfg.episodes {
        order.copy_from_slice(train_nodes);
        order.shuffle(&mut rng::rng_for(cfg.seed, &[SHUFFLE_STREAM, episode as u64]));
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            log.push(trainer.update(model, g, chunk, episode, b, exec)?.record);
        }
    }
    Ok((trainer.policy, log))
}
