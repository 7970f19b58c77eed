//! Run configuration: defaults, then a config file (flat `key = value` lines
//! or a JSON object), then `EDGEFLIP_<KEY>` environment variables, then
//! `--set key=value` flags.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use edgeflip_core::blackbox::GcnTrainConfig;
use edgeflip_core::explainer::{StopRule, TransductiveConfig};
use edgeflip_core::mdp::RewardLabel;
use edgeflip_core::policy::PolicyConfig;
use edgeflip_core::synth::{DatasetKind, GenConfig};
use edgeflip_core::trainer::TrainConfig;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub const ENV_PREFIX: &str = "EDGEFLIP_";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitScheme {
    #[serde(rename = "80-20")]
    TrainEval,
    #[serde(rename = "60-20-20")]
    TrainValEval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,

    pub dataset: DatasetKind,
    pub tree_depth: Option<usize>,
    pub ba_base_size: Option<usize>,
    pub ba_m: Option<usize>,
    pub n_motifs: Option<usize>,
    pub n_random_edges: Option<usize>,
    pub feature_dim: usize,

    pub bb_hidden: usize,
    pub bb_lr: f64,
    pub bb_epochs: usize,
    pub bb_restarts: usize,
    pub bb_train_frac: f64,

    pub split: SplitScheme,
    pub delta: usize,
    pub episodes: usize,
    pub batch_size: usize,
    /// Unset means 0.4 for inductive training and 0.6 per node.
    pub gamma: Option<f64>,
    pub eta: f64,
    pub beta: f64,
    pub hops: usize,
    pub lr: f64,
    pub deletion_only: bool,
    pub norm_eps: f64,
    pub reward_label: RewardLabel,
    pub gat_layers: usize,
    pub policy_hidden: usize,
    pub gat_slope: f64,
    pub mlp_slope: f64,

    pub transductive_episodes: usize,
    pub transductive_stop: StopRule,

    pub oracle_max_k: usize,
    pub oracle_max_subsets: u64,
    /// Radius of the neighborhood used for sparsity; unset means `hops`.
    pub sparsity_hops: Option<usize>,
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        let p = PolicyConfig::default();
        let bb = GcnTrainConfig::default();
        let tr = TransductiveConfig::default();
        RunConfig {
            seed: 0,
            dataset: DatasetKind::TreeCycles,
            tree_depth: None,
            ba_base_size: None,
            ba_m: None,
            n_motifs: None,
            n_random_edges: None,
            feature_dim: 10,
            bb_hidden: bb.hidden,
            bb_lr: bb.lr,
            bb_epochs: bb.epochs,
            bb_restarts: bb.restarts,
            bb_train_frac: 0.8,
            split: SplitScheme::TrainEval,
            delta: t.delta,
            episodes: t.episodes,
            batch_size: t.batch_size,
            gamma: None,
            eta: t.eta,
            beta: t.beta,
            hops: t.hops,
            lr: t.lr,
            deletion_only: false,
            norm_eps: t.norm_eps,
            reward_label: t.reward_label,
            gat_layers: p.gat_layers,
            policy_hidden: p.hidden,
            gat_slope: p.gat_slope,
            mlp_slope: p.mlp_slope,
            transductive_episodes: tr.train.episodes,
            transductive_stop: tr.stop,
            oracle_max_k: 3,
            oracle_max_subsets: 200_000,
            sparsity_hops: None,
            workers: 1,
        }
    }
}

/// A bare value: JSON if it parses, else a string.
fn scalar(raw: &str) -> Value {
    let raw = raw.trim();
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

fn parse_key_values(text: &str, origin: &str) -> Result<Map<String, Value>> {
    let mut out = Map::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("{origin}:{}: expected key = value", i + 1);
        };
        out.insert(k.trim().to_string(), scalar(v));
    }
    Ok(out)
}

impl RunConfig {
    /// Layer `file`, the environment and `overrides` over the defaults.
    pub fn resolve(file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        Self::resolve_with_env(file, overrides, |k| std::env::var(k).ok())
    }

    pub fn resolve_with_env(file: Option<&Path>, overrides: &[String], env: impl Fn(&str) -> Option<String>) -> Result<Self> {
        let mut merged = match serde_json::to_value(RunConfig::default())? {
            Value::Object(m) => m,
            _ => unreachable!("struct serializes to an object"),
        };
        let keys: Vec<String> = merged.keys().cloned().collect();
        if let Some(path) = file {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let layer = if text.trim_start().starts_with('{') {
                match serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))? {
                    Value::Object(m) => m,
                    _ => bail!("{} must hold a JSON object", path.display()),
                }
            } else {
                parse_key_values(&text, &path.display().to_string())?
            };
            merged.extend(layer);
        }
        for k in &keys {
            if let Some(v) = env(&format!("{ENV_PREFIX}{}", k.to_uppercase())) {
                merged.insert(k.clone(), scalar(&v));
            }
        }
        merged.extend(parse_key_values(&overrides.join("\n"), "--set")?);
        let cfg: RunConfig = serde_json::from_value(Value::Object(merged)).context("invalid configuration")?;
        cfg.train(false).validate()?;
        Ok(cfg)
    }

    pub fn generator(&self) -> GenConfig {
        let mut g = GenConfig::for_kind(self.dataset, self.seed);
        g.tree_depth = self.tree_depth.unwrap_or(g.tree_depth);
        g.ba_base_size = self.ba_base_size.unwrap_or(g.ba_base_size);
        g.ba_m = self.ba_m.unwrap_or(g.ba_m);
        g.n_motifs = self.n_motifs.unwrap_or(g.n_motifs);
        g.n_random_edges = self.n_random_edges.or(g.n_random_edges);
        g.feature_dim = self.feature_dim;
        g
    }

    pub fn blackbox(&self) -> GcnTrainConfig {
        GcnTrainConfig { hidden: self.bb_hidden, lr: self.bb_lr, epochs: self.bb_epochs, restarts: self.bb_restarts, seed: self.seed }
    }

    pub fn policy(&self) -> PolicyConfig {
        PolicyConfig {
            hidden: self.policy_hidden,
            gat_layers: self.gat_layers,
            gat_slope: self.gat_slope,
            mlp_slope: self.mlp_slope,
            seed: self.seed,
            ..PolicyConfig::default()
        }
    }

    /// Trainer settings; `per_node` selects the per-node discount default.
    pub fn train(&self, per_node: bool) -> TrainConfig {
        let base = if per_node { TrainConfig::transductive() } else { TrainConfig::default() };
        TrainConfig {
            delta: self.delta,
            episodes: if per_node { self.transductive_episodes } else { self.episodes },
            batch_size: self.batch_size,
            gamma: self.gamma.unwrap_or(base.gamma),
            eta: self.eta,
            beta: self.beta,
            hops: self.hops,
            lr: self.lr,
            seed: self.seed,
            deletion_only: self.deletion_only,
            norm_eps: self.norm_eps,
            reward_label: self.reward_label,
            features: base.features,
            policy: self.policy(),
        }
    }

    pub fn transductive(&self) -> TransductiveConfig {
        TransductiveConfig { train: self.train(true), stop: self.transductive_stop }
    }
}
