//! Command-line front end. Every subcommand builds its artifacts in memory,
//! then writes them together with the resolved configuration. With
//! `--self-check` the subcommand runs twice and the SHA-256 digests of both
//! runs must agree.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use edgeflip_core::blackbox::NodeClassifier;
use edgeflip_core::eval::{evaluate, sparsity_with_radius};
use edgeflip_core::explainer::CounterfactualResult;
use edgeflip_core::Graph;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::exec::Pool;
use crate::formats::{
    composition_csv, counterfactual_dot, load_dataset, read_json, read_jsonl, read_node_list, results_csv, write_text, BlackboxCheckpoint,
    DatasetFile, PolicyCheckpoint,
};
use crate::pipeline::{self, ExplainMode};

#[derive(Debug, Parser)]
#[command(name = "edgeflip", version, about = "Counterfactual edge-edit explanations for GNN node classifiers")]
pub struct Cli {
    /// Config file: flat `key = value` lines or a JSON object.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override one config key, e.g. `--set episodes=50`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Global seed; shorthand for `--set seed=N`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Run the subcommand twice and fail unless both runs hash identically.
    #[arg(long, global = true)]
    pub self_check: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic benchmark graph.
    GenData {
        /// tree-cycles, tree-grid or ba-shapes.
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the GCN black box.
    TrainBlackbox {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train an inductive explanation policy.
    TrainPolicy {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        blackbox: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Per-batch training log (JSON lines).
        #[arg(long)]
        log: Option<PathBuf>,
        #[command(flatten)]
        par: Parallel,
    },
    /// Produce counterfactual explanations for a list of nodes.
    Explain {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        blackbox: PathBuf,
        /// Required in inductive mode.
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Node list file; defaults to the evaluation split.
        #[arg(long)]
        nodes: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "inductive")]
        mode: ExplainMode,
        #[arg(long)]
        deletion_only: bool,
        /// Record wall-clock milliseconds per node. Makes output nondeterministic.
        #[arg(long)]
        timing: bool,
        /// Result records (JSON lines).
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        par: Parallel,
    },
    /// Compute metrics over result records.
    Evaluate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        results: PathBuf,
        /// Report (JSON). Per-node CSV and size histogram CSV go next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Exhaustive search for minimal perturbation sets.
    Oracle {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        blackbox: PathBuf,
        #[arg(long)]
        nodes: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        par: Parallel,
    },
    /// Write one DOT file per result showing the edited neighborhood.
    ExportViz {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        results: PathBuf,
        /// Restrict to these node ids.
        #[arg(long = "node")]
        nodes: Vec<usize>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct Parallel {
    /// Worker threads; defaults to the `workers` config key.
    #[arg(long)]
    pub workers: Option<usize>,
}

/// A file to be written: path plus exact bytes.
pub type Artifact = (PathBuf, Vec<u8>);

fn json<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_vec_pretty(v)?;
    s.push(b'\n');
    Ok(s)
}

fn jsonl<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut buf, r)?;
        buf.push(b'\n');
    }
    Ok(buf)
}

/// `path` with `suffix` appended to its full file name.
pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

fn pool(cfg: &RunConfig, par: &Parallel) -> Result<Pool> {
    Pool::new(par.workers.unwrap_or(cfg.workers))
}

fn blackbox(path: &Path) -> Result<edgeflip_core::blackbox::GcnModel> {
    read_json::<BlackboxCheckpoint>(path)?.model().with_context(|| format!("loading {}", path.display()))
}

fn check_dims(g: &Graph, m: &impl NodeClassifier, feature_dim: usize) -> Result<()> {
    if g.feature_dim() != feature_dim || g.n_classes() != m.n_classes() {
        bail!("black-box checkpoint does not match the dataset's feature or class count");
    }
    Ok(())
}

fn target_nodes(list: Option<&Path>, g: &Graph, m: &edgeflip_core::blackbox::GcnModel, cfg: &RunConfig) -> Result<Vec<usize>> {
    match list {
        Some(p) => read_node_list(p),
        None => Ok(pipeline::policy_split(g, m, cfg)?.1),
    }
}

impl Cli {
    pub fn resolve_config(&self) -> Result<RunConfig> {
        let mut overrides = self.overrides.clone();
        if let Some(s) = self.seed {
            overrides.push(format!("seed={s}"));
        }
        match &self.command {
            Command::GenData { kind: Some(k), .. } => overrides.push(format!("dataset=\"{k}\"")),
            Command::Explain { deletion_only: true, .. } => overrides.push("deletion_only=true".into()),
            _ => {}
        }
        RunConfig::resolve(self.config.as_deref(), &overrides)
    }

    /// Build every output of the subcommand without touching the disk.
    pub fn artifacts(&self, cfg: &RunConfig) -> Result<Vec<Artifact>> {
        let mut out = Vec::new();
        let primary = match &self.command {
            Command::GenData { out: path, .. } => {
                let g = pipeline::gen_data(cfg)?;
                out.push((path.clone(), json(&DatasetFile::from_graph(cfg.dataset.name(), &g))?));
                path
            }
            Command::TrainBlackbox { data, out: path } => {
                let (name, g) = load_dataset(data)?;
                let (ckpt, report) = pipeline::train_blackbox_checkpoint(&name, &g, cfg)?;
                out.push((path.clone(), json(&ckpt)?));
                out.push((sidecar(path, ".report.json"), json(&report)?));
                path
            }
            Command::TrainPolicy { data, blackbox: bb, out: path, log, par } => {
                let (name, g) = load_dataset(data)?;
                let m = blackbox(bb)?;
                check_dims(&g, &m, m.input_dim())?;
                let (ckpt, records) = pipeline::train_policy_checkpoint(&name, &g, &m, cfg, &pool(cfg, par)?)?;
                out.push((path.clone(), json(&ckpt)?));
                if let Some(log) = log {
                    out.push((log.clone(), jsonl(&records)?));
                }
                path
            }
            Command::Explain { data, blackbox: bb, policy, nodes, mode, timing, out: path, par, .. } => {
                if *timing && self.self_check {
                    bail!("--timing output is not reproducible; drop it or --self-check");
                }
                let (_, g) = load_dataset(data)?;
                let m = blackbox(bb)?;
                check_dims(&g, &m, m.input_dim())?;
                let policy = match policy {
                    Some(p) => Some(read_json::<PolicyCheckpoint>(p)?.policy()?),
                    None => None,
                };
                let targets = target_nodes(nodes.as_deref(), &g, &m, cfg)?;
                let results = pipeline::explain_nodes(*mode, &g, &m, policy.as_ref(), &targets, cfg, *timing, &pool(cfg, par)?)?;
                out.push((path.clone(), jsonl(&results)?));
                path
            }
            Command::Evaluate { data, results, out: path } => {
                let (_, g) = load_dataset(data)?;
                let rs: Vec<CounterfactualResult> = read_jsonl(results)?;
                let mut report = evaluate(&rs, &g)?;
                if let Some(h) = cfg.sparsity_hops {
                    report.sparsity = sparsity_with_radius(&rs, &g, h)?;
                }
                out.push((path.clone(), json(&report)?));
                out.push((sidecar(path, ".nodes.csv"), results_csv(&rs).into_bytes()));
                out.push((sidecar(path, ".histogram.csv"), composition_csv(&report).into_bytes()));
                path
            }
            Command::Oracle { data, blackbox: bb, nodes, out: path, par } => {
                let (_, g) = load_dataset(data)?;
                let m = blackbox(bb)?;
                check_dims(&g, &m, m.input_dim())?;
                let targets = target_nodes(nodes.as_deref(), &g, &m, cfg)?;
                let records = pipeline::oracle_nodes(&g, &m, &targets, cfg, &pool(cfg, par)?)?;
                out.push((path.clone(), jsonl(&records)?));
                path
            }
            Command::ExportViz { data, results, nodes, out: dir } => {
                let (_, g) = load_dataset(data)?;
                let rs: Vec<CounterfactualResult> = read_jsonl(results)?;
                for r in rs.iter().filter(|r| nodes.is_empty() || nodes.contains(&r.node)) {
                    let dot = counterfactual_dot(&g, r, cfg.hops)?;
                    out.push((dir.join(format!("node_{}.dot", r.node)), dot.into_bytes()));
                }
                if out.is_empty() {
                    bail!("no results matched the requested nodes");
                }
                dir
            }
        };
        let config_path = match &self.command {
            Command::ExportViz { .. } => primary.join("config.json"),
            _ => sidecar(primary, ".config.json"),
        };
        out.push((config_path, json(cfg)?));
        Ok(out)
    }
}

pub fn digest(artifacts: &[Artifact]) -> Vec<(PathBuf, String)> {
    artifacts
        .iter()
        .map(|(p, bytes)| {
            let h = Sha256::digest(bytes);
            (p.clone(), h.iter().map(|b| format!("{b:02x}")).collect())
        })
        .collect()
}

/// Parse-free entry point: run `cli` and write its outputs.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let cfg = cli.resolve_config()?;
    let artifacts = cli.artifacts(&cfg)?;
    if cli.self_check {
        let again = cli.artifacts(&cfg)?;
        for ((p, a), (_, b)) in digest(&artifacts).iter().zip(digest(&again)) {
            if *a != b {
                bail!("self-check failed: {} differs between runs ({a} vs {b})", p.display());
            }
        }
    }
    for (p, bytes) in &artifacts {
        write_text(p, std::str::from_utf8(bytes)?)?;
    }
    Ok(artifacts.into_iter().map(|(p, _)| p).collect())
}
