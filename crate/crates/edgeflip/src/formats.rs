//! On-disk formats. Everything is JSON or JSON lines except the flat CSV
//! tables and DOT exports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use edgeflip_core::blackbox::{GcnModel, TrainMeta};
use edgeflip_core::diff::{Params, Tensor};
use edgeflip_core::eval::EvalReport;
use edgeflip_core::explainer::CounterfactualResult;
use edgeflip_core::graph::{EditKind, Graph};
use edgeflip_core::policy::{PolicyConfig, PolicyNetwork};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let f = fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), i + 1))?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut buf, r)?;
        buf.write_all(b"\n")?;
    }
    write_text(path, std::str::from_utf8(&buf)?)
}

/// Serialized graph with labels, features and motif membership.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFile {
    pub name: String,
    pub n_nodes: usize,
    pub n_classes: usize,
    /// Canonical `(u, v)` pairs with `u < v`, lexicographic.
    pub edges: Vec<(usize, usize)>,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub motifs: Vec<Option<usize>>,
}

impl DatasetFile {
    pub fn from_graph(name: &str, g: &Graph) -> Self {
        let f = g.features();
        DatasetFile {
            name: name.to_string(),
            n_nodes: g.n_nodes(),
            n_classes: g.n_classes(),
            edges: g.edges().collect(),
            features: (0..f.rows()).map(|r| f.row(r).to_vec()).collect(),
            labels: g.labels().to_vec(),
            motifs: g.motif_of().to_vec(),
        }
    }

    pub fn to_graph(&self) -> Result<Graph> {
        let d = self.features.first().map_or(0, Vec::len);
        if self.features.iter().any(|r| r.len() != d) {
            bail!("feature rows have unequal lengths");
        }
        let features = Tensor::from_vec(self.features.len(), d, self.features.concat())?;
        Ok(Graph::new(self.n_nodes, self.edges.iter().copied(), features, self.labels.clone(), self.motifs.clone(), self.n_classes)?)
    }
}

pub fn load_dataset(path: &Path) -> Result<(String, Graph)> {
    let d: DatasetFile = read_json(path)?;
    let g = d.to_graph().with_context(|| format!("invalid dataset {}", path.display()))?;
    Ok((d.name, g))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightEntry {
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

/// Named weights in a fixed (sorted) order.
pub type Weights = BTreeMap<String, WeightEntry>;

pub fn params_to_weights(p: &Params) -> Weights {
    p.iter().map(|(n, t)| (n.to_string(), WeightEntry { shape: t.shape(), data: t.data().to_vec() })).collect()
}

pub fn load_weights(p: &mut Params, w: &Weights) -> Result<()> {
    let mut entries = Vec::with_capacity(w.len());
    for (name, e) in w {
        entries.push((name.as_str(), Tensor::from_vec(e.shape[0], e.shape[1], e.data.clone())?));
    }
    p.load(entries)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlackboxHeader {
    pub dataset: String,
    pub n_classes: usize,
    pub feature_dim: usize,
    pub hidden: usize,
    pub meta: TrainMeta,
    pub train_nodes: Vec<usize>,
    pub test_nodes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlackboxCheckpoint {
    pub header: BlackboxHeader,
    pub weights: Weights,
}

impl BlackboxCheckpoint {
    pub fn model(&self) -> Result<GcnModel> {
        let h = &self.header;
        let mut m = GcnModel::zeros(h.feature_dim, h.hidden, h.n_classes);
        load_weights(m.params_mut(), &self.weights)?;
        m.meta = h.meta.clone();
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyHeader {
    pub dataset: String,
    pub input_dim: usize,
    pub architecture: PolicyConfig,
    pub train_nodes: Vec<usize>,
    pub eval_nodes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyCheckpoint {
    pub header: PolicyHeader,
    pub weights: Weights,
}

impl PolicyCheckpoint {
    pub fn policy(&self) -> Result<PolicyNetwork> {
        let mut p = PolicyNetwork::new(self.header.input_dim, self.header.architecture.clone())?;
        load_weights(p.params_mut(), &self.weights)?;
        Ok(p)
    }
}

/// One node id per line; blank lines and `#` comments are skipped.
pub fn read_node_list(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        out.push(line.parse().with_context(|| format!("{}:{}: not a node id", path.display(), i + 1))?);
    }
    Ok(out)
}

pub fn write_node_list(path: &Path, nodes: &[usize]) -> Result<()> {
    let mut s = String::new();
    for v in nodes {
        writeln!(s, "{v}")?;
    }
    write_text(path, &s)
}

/// Flat per-node table of results.
pub fn results_csv(results: &[CounterfactualResult]) -> String {
    let mut s = String::from("node,success,size,additions,deletions,label_before,label_after,nbhd_edges,ms\n");
    for r in results {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.node,
            r.success,
            r.size,
            r.n_additions(),
            r.n_deletions(),
            r.label_before,
            r.label_after,
            r.nbhd_edges,
            r.ms
        );
    }
    s
}

pub fn composition_csv(report: &EvalReport) -> String {
    let mut s = String::from("size,results,additions,deletions\n");
    for (size, c) in &report.composition {
        let _ = writeln!(s, "{},{},{},{}", size, c.results, c.additions, c.deletions);
    }
    s
}

/// The target's neighborhood in the edited graph. Added edges are solid and
/// colored, deleted edges dashed, untouched edges gray.
pub fn counterfactual_dot(g: &Graph, r: &CounterfactualResult, hops: usize) -> Result<String> {
    let ball = g.khop(r.node, hops)?;
    let inside = |u: usize| ball.binary_search(&u).is_ok();
    let mut edited: BTreeMap<(usize, usize), EditKind> = BTreeMap::new();
    for p in &r.perturbations {
        edited.insert(p.edge(), p.kind);
    }
    let mut s = String::new();
    writeln!(s, "graph counterfactual_{} {{", r.node)?;
    writeln!(s, "  node [shape=circle, style=filled, fillcolor=white];")?;
    for &u in &ball {
        let fill = if u == r.node {
            "orange"
        } else if g.motif(u).is_some() {
            "lightblue"
        } else {
            "white"
        };
        writeln!(s, "  {u} [fillcolor={fill}, label=\"{u}\\nl={}\"];", g.label(u))?;
    }
    for (u, v) in g.edges().filter(|&(u, v)| inside(u) && inside(v)) {
        match edited.get(&(u, v)) {
            Some(EditKind::Delete) => writeln!(s, "  {u} -- {v} [style=dashed, color=red];")?,
            _ => writeln!(s, "  {u} -- {v} [color=gray50];")?,
        }
    }
    for (&(u, v), kind) in &edited {
        if *kind == EditKind::Add {
            writeln!(s, "  {u} -- {v} [style=solid, color=darkgreen, penwidth=2];")?;
        }
    }
    writeln!(s, "}}")?;
    Ok(s)
}
