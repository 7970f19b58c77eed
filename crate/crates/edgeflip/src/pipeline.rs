//! The end-to-end steps behind each subcommand, usable as a library.

use std::time::Instant;

use anyhow::{bail, Result};
use edgeflip_core::blackbox::{predict, train_blackbox, GcnModel, Split, TrainReport};
use edgeflip_core::eval::brute_force_oracle;
use edgeflip_core::exec::Executor;
use edgeflip_core::explainer::{explain_inductive, explain_transductive, random_baseline, CounterfactualResult};
use edgeflip_core::graph::{Graph, Perturbation};
use edgeflip_core::policy::PolicyNetwork;
use edgeflip_core::rng;
use edgeflip_core::synth::generate;
use edgeflip_core::trainer::{state_dim, train_policy, LogRecord};
use edgeflip_core::Error;
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, SplitScheme};
use crate::formats::{params_to_weights, BlackboxCheckpoint, BlackboxHeader, PolicyCheckpoint, PolicyHeader};

const BLACKBOX_SPLIT: u64 = 1;
const POLICY_SPLIT: u64 = 2;
const RANDOM_BASELINE: u64 = 3;

pub fn gen_data(cfg: &RunConfig) -> Result<Graph> {
    Ok(generate(&cfg.generator())?)
}

pub fn blackbox_split(g: &Graph, cfg: &RunConfig) -> Split {
    let nodes: Vec<usize> = (0..g.n_nodes()).collect();
    Split::random(&nodes, cfg.bb_train_frac, rng::derive(cfg.seed, &[BLACKBOX_SPLIT]))
}

pub fn train_blackbox_checkpoint(name: &str, g: &Graph, cfg: &RunConfig) -> Result<(BlackboxCheckpoint, TrainReport)> {
    let split = blackbox_split(g, cfg);
    let (m, report) = train_blackbox(g, &split, &cfg.blackbox())?;
    let ckpt = BlackboxCheckpoint {
        header: BlackboxHeader {
            dataset: name.to_string(),
            n_classes: g.n_classes(),
            feature_dim: g.feature_dim(),
            hidden: m.hidden(),
            meta: m.meta.clone(),
            train_nodes: split.train,
            test_nodes: split.test,
        },
        weights: params_to_weights(m.params()),
    };
    Ok((ckpt, report))
}

/// Motif nodes split for policy training. Returns `(train, eval)`; the eval
/// set keeps only nodes whose original prediction is correct.
pub fn policy_split(g: &Graph, m: &GcnModel, cfg: &RunConfig) -> Result<(Vec<usize>, Vec<usize>)> {
    let motif: Vec<usize> = (0..g.n_nodes()).filter(|&u| g.motif(u).is_some()).collect();
    if motif.is_empty() {
        bail!("dataset has no motif nodes to explain");
    }
    let seed = rng::derive(cfg.seed, &[POLICY_SPLIT]);
    let (train, eval) = match cfg.split {
        SplitScheme::TrainEval => {
            let s = Split::random(&motif, 0.8, seed);
            (s.train, s.test)
        }
        SplitScheme::TrainValEval => {
            let s = Split::random(&motif, 0.6, seed);
            // validation half of the remainder is held out and unused
            let rest = Split::random(&s.test, 0.5, rng::derive(seed, &[1]));
            (s.train, rest.test)
        }
    };
    let lp = edgeflip_core::blackbox::NodeClassifier::log_probs(m, g)?;
    let eval = eval.into_iter().filter(|&u| edgeflip_core::blackbox::argmax(lp.row(u)) == g.label(u)).collect();
    Ok((train, eval))
}

pub fn train_policy_checkpoint<E: Executor>(
    name: &str,
    g: &Graph,
    m: &GcnModel,
    cfg: &RunConfig,
    exec: &E,
) -> Result<(PolicyCheckpoint, Vec<LogRecord>)> {
    let (train_nodes, eval_nodes) = policy_split(g, m, cfg)?;
    let tc = cfg.train(false);
    let (policy, log) = train_policy(m, g, &train_nodes, &tc, exec)?;
    let ckpt = PolicyCheckpoint {
        header: PolicyHeader {
            dataset: name.to_string(),
            input_dim: state_dim(g, &tc),
            architecture: policy.config().clone(),
            train_nodes,
            eval_nodes,
        },
        weights: params_to_weights(policy.params()),
    };
    Ok((ckpt, log))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExplainMode {
    Inductive,
    Transductive,
    Random,
}

fn timed(timing: bool, f: impl FnOnce() -> edgeflip_core::Result<CounterfactualResult>) -> edgeflip_core::Result<CounterfactualResult> {
    let start = Instant::now();
    let mut r = f()?;
    if timing {
        r.ms = start.elapsed().as_millis() as u64;
    }
    Ok(r)
}

/// Explain every node; results come back sorted by node id.
pub fn explain_nodes<E: Executor>(
    mode: ExplainMode,
    g: &Graph,
    m: &GcnModel,
    policy: Option<&PolicyNetwork>,
    nodes: &[usize],
    cfg: &RunConfig,
    timing: bool,
    exec: &E,
) -> Result<Vec<CounterfactualResult>> {
    let mut nodes = nodes.to_vec();
    nodes.sort_unstable();
    nodes.dedup();
    for &v in &nodes {
        g.check_node(v)?;
    }
    let tc = cfg.train(false);
    let trans = cfg.transductive();
    let policy = match (mode, policy) {
        (ExplainMode::Inductive, None) => bail!("inductive mode needs a policy checkpoint"),
        (_, p) => p,
    };
    let out = exec.map(&nodes, |&v| {
        timed(timing, || match mode {
            ExplainMode::Inductive => explain_inductive(policy.expect("checked"), m, g, v, &tc),
            ExplainMode::Transductive => explain_transductive(m, g, v, &trans),
            ExplainMode::Random => random_baseline(m, g, v, &tc, rng::derive(cfg.seed, &[RANDOM_BASELINE])),
        })
    });
    Ok(out.into_iter().collect::<edgeflip_core::Result<Vec<_>>>()?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRecord {
    pub node: usize,
    /// `found`, `none` or `budget-exceeded`.
    pub status: String,
    pub size: Option<usize>,
    pub perturbations: Vec<Perturbation>,
}

pub fn oracle_nodes<E: Executor>(g: &Graph, m: &GcnModel, nodes: &[usize], cfg: &RunConfig, exec: &E) -> Result<Vec<OracleRecord>> {
    let mut nodes = nodes.to_vec();
    nodes.sort_unstable();
    nodes.dedup();
    let out = exec.map(&nodes, |&v| -> edgeflip_core::Result<OracleRecord> {
        let (status, set) = match brute_force_oracle(m, g, v, cfg.hops, cfg.oracle_max_k, cfg.oracle_max_subsets) {
            Ok(Some(set)) => ("found", set),
            Ok(None) => ("none", Vec::new()),
            Err(Error::BudgetExceeded(_)) => ("budget-exceeded", Vec::new()),
            Err(e) => return Err(e),
        };
        Ok(OracleRecord { node: v, status: status.into(), size: (status == "found").then_some(set.len()), perturbations: set })
    });
    Ok(out.into_iter().collect::<edgeflip_core::Result<Vec<_>>>()?)
}

/// Whether `v`'s prediction under `m` is its true label.
pub fn correctly_predicted(g: &Graph, m: &GcnModel, v: usize) -> Result<bool> {
    Ok(predict(m, g, v)? == g.label(v))
}
