//! Synthetic node-classification benchmarks with planted motifs.
//!
//! Each generator builds a base graph, appends `n_motifs` copies of a small
//! motif, joins every motif to a uniformly random base node through one
//! connector edge (from the motif's local node 0), then sprinkles random
//! base-to-base edges. Motif nodes carry positive labels, base nodes label 0,
//! and every node gets an all-ones feature row.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::diff::Tensor;
use crate::error::{bail, Result};
use crate::graph::Graph;
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum DatasetKind {
    TreeCycles,
    TreeGrid,
    BaShapes,
}

impl DatasetKind {
    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::TreeCycles => "tree-cycles",
            DatasetKind::TreeGrid => "tree-grid",
            DatasetKind::BaShapes => "ba-shapes",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "tree-cycles" | "tree_cycles" | "TreeCycles" => Some(DatasetKind::TreeCycles),
            "tree-grid" | "tree_grid" | "TreeGrid" => Some(DatasetKind::TreeGrid),
            "ba-shapes" | "ba_shapes" | "BaShapes" => Some(DatasetKind::BaShapes),
            _ => None,
        }
    }

    pub fn motif(self) -> Motif {
        match self {
            DatasetKind::TreeCycles => Motif::cycle6(),
            DatasetKind::TreeGrid => Motif::grid3x3(),
            DatasetKind::BaShapes => Motif::house(),
        }
    }

    pub fn n_classes(self) -> usize {
        match self {
            DatasetKind::BaShapes => 4,
            _ => 2,
        }
    }
}

/// Planted subgraph template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Motif {
    pub edges: Vec<(usize, usize)>,
    /// Label of each local node.
    pub labels: Vec<usize>,
}

impl Motif {
    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn cycle6() -> Motif {
        Motif { edges: (0..6).map(|i| (i, (i + 1) % 6)).collect(), labels: vec![1; 6] }
    }

    pub fn grid3x3() -> Motif {
        let mut edges = Vec::new();
        for r in 0..3 {
            for c in 0..3 {
                let i = r * 3 + c;
                if c < 2 {
                    edges.push((i, i + 1));
                }
                if r < 2 {
                    edges.push((i, i + 3));
                }
            }
        }
        Motif { edges, labels: vec![1; 9] }
    }

    /// Nodes 0,1 form the floor, 2,3 the walls, 4 the roof apex.
    /// Classes: roof 1, middle 2, bottom 3.
    pub fn house() -> Motif {
        Motif { edges: vec![(0, 1), (0, 2), (1, 3), (2, 3), (2, 4), (3, 4)], labels: vec![3, 3, 2, 2, 1] }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GenConfig {
    pub kind: DatasetKind,
    /// Depth of the full binary base tree (tree datasets).
    pub tree_depth: usize,
    /// Node count of the Barabási–Albert base (BA-Shapes).
    pub ba_base_size: usize,
    /// Edges attached per new BA node.
    pub ba_m: usize,
    pub n_motifs: usize,
    /// Extra random base edges; `None` means 10% of the edge count before
    /// the random edges are added.
    pub n_random_edges: Option<usize>,
    pub feature_dim: usize,
    pub seed: u64,
}

impl GenConfig {
    pub fn tree_cycles(seed: u64) -> Self {
        GenConfig {
            kind: DatasetKind::TreeCycles,
            tree_depth: 8,
            ba_base_size: 300,
            ba_m: 5,
            n_motifs: 60,
            n_random_edges: None,
            feature_dim: 10,
            seed,
        }
    }

    pub fn tree_grid(seed: u64) -> Self {
        GenConfig { kind: DatasetKind::TreeGrid, n_motifs: 80, ..Self::tree_cycles(seed) }
    }

    pub fn ba_shapes(seed: u64) -> Self {
        GenConfig { kind: DatasetKind::BaShapes, n_motifs: 80, ..Self::tree_cycles(seed) }
    }

    pub fn for_kind(kind: DatasetKind, seed: u64) -> Self {
        match kind {
            DatasetKind::TreeCycles => Self::tree_cycles(seed),
            DatasetKind::TreeGrid => Self::tree_grid(seed),
            DatasetKind::BaShapes => Self::ba_shapes(seed),
        }
    }

    pub fn base_size(&self) -> usize {
        match self.kind {
            DatasetKind::BaShapes => self.ba_base_size,
            _ => (1usize << (self.tree_depth + 1)) - 1,
        }
    }

    /// Closed-form node count.
    pub fn expected_nodes(&self) -> usize {
        self.base_size() + self.n_motifs * self.kind.motif().size()
    }

    fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 {
            bail!(Input, "feature_dim must be positive");
        }
        match self.kind {
            DatasetKind::BaShapes => {
                if self.ba_m == 0 || self.ba_base_size <= self.ba_m {
                    bail!(Input, "BA base of {} nodes with m = {}", self.ba_base_size, self.ba_m);
                }
            }
            _ => {
                if self.tree_depth == 0 || self.tree_depth > 20 {
                    bail!(Input, "tree depth {} outside 1..=20", self.tree_depth);
                }
            }
        }
        Ok(())
    }
}

pub fn generate(cfg: &GenConfig) -> Result<Graph> {
    cfg.validate()?;
    let mut rng = rng::rng(cfg.seed);
    let base_edges = match cfg.kind {
        DatasetKind::BaShapes => barabasi_albert(cfg.ba_base_size, cfg.ba_m, &mut rng),
        _ => binary_tree(cfg.tree_depth),
    };
    assemble(cfg, cfg.base_size(), base_edges, &cfg.kind.motif(), &mut rng)
}

fn require(cfg: &GenConfig, kind: DatasetKind) -> Result<()> {
    if cfg.kind != kind {
        bail!(Input, "config is for {}, not {}", cfg.kind.name(), kind.name());
    }
    Ok(())
}

pub fn gen_tree_cycles(cfg: &GenConfig) -> Result<Graph> {
    require(cfg, DatasetKind::TreeCycles)?;
    generate(cfg)
}

pub fn gen_tree_grid(cfg: &GenConfig) -> Result<Graph> {
    require(cfg, DatasetKind::TreeGrid)?;
    generate(cfg)
}

pub fn gen_ba_shapes(cfg: &GenConfig) -> Result<Graph> {
    require(cfg, DatasetKind::BaShapes)?;
    generate(cfg)
}

/// Full binary tree, node `i` has children `2i+1`, `2i+2`.
fn binary_tree(depth: usize) -> Vec<(usize, usize)> {
    let n = (1usize << (depth + 1)) - 1;
    (1..n).map(|c| ((c - 1) / 2, c)).collect()
}

/// Preferential attachment: `m` seed nodes, each later node links to `m`
/// distinct targets drawn proportionally to degree.
fn barabasi_albert(n: usize, m: usize, rng: &mut Rng) -> Vec<(usize, usize)> {
    let mut edges = Vec::with_capacity(m * (n - m));
    let mut repeated: Vec<usize> = Vec::new();
    let mut targets: Vec<usize> = (0..m).collect();
    for source in m..n {
        for &t in &targets {
            edges.push((t, source));
        }
        repeated.extend_from_slice(&targets);
        repeated.extend(core::iter::repeat(source).take(m));
        let mut chosen = BTreeSet::new();
        while chosen.len() < m {
            chosen.insert(repeated[rng.gen_range(0..repeated.len())]);
        }
        targets = chosen.into_iter().collect();
        targets.shuffle(rng);
    }
    edges
}

fn assemble(cfg: &GenConfig, base: usize, base_edges: Vec<(usize, usize)>, motif: &Motif, rng: &mut Rng) -> Result<Graph> {
    let n = base + cfg.n_motifs * motif.size();
    let mut edges: BTreeSet<(usize, usize)> = base_edges.into_iter().map(canon).collect();
    let mut labels = vec![0; n];
    let mut motif_of = vec![None; n];
    for m in 0..cfg.n_motifs {
        let off = base + m * motif.size();
        for (i, &l) in motif.labels.iter().enumerate() {
            labels[off + i] = l;
            motif_of[off + i] = Some(m);
        }
        for &(a, b) in &motif.edges {
            edges.insert(canon((off + a, off + b)));
        }
        let anchor = rng.gen_range(0..base);
        edges.insert(canon((anchor, off)));
    }
    let n_random = cfg.n_random_edges.unwrap_or(edges.len() / 10);
    let max_new = base * (base - 1) / 2 - edges.iter().filter(|e| e.1 < base).count();
    if n_random > max_new {
        bail!(Input, "{} random edges requested, base has room for {}", n_random, max_new);
    }
    let mut added = 0;
    while added < n_random {
        let a = rng.gen_range(0..base);
        let b = rng.gen_range(0..base);
        if a != b && edges.insert(canon((a, b))) {
            added += 1;
        }
    }
    Graph::new(n, edges, Tensor::filled(n, cfg.feature_dim, 1.0), labels, motif_of, cfg.kind.n_classes())
}

fn canon((a, b): (usize, usize)) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_tree_without_motifs() {
        let cfg = GenConfig { tree_depth: 1, n_motifs: 0, n_random_edges: Some(0), ..GenConfig::tree_cycles(1) };
        let g = gen_tree_cycles(&cfg).unwrap();
        assert_eq!(g.n_nodes(), 3);
        assert_eq!(g.n_edges(), 2);
        assert!(g.labels().iter().all(|&l| l == 0));
    }

    #[test]
    fn grid_with_small_tree() {
        let cfg = GenConfig { tree_depth: 2, n_motifs: 1, ..GenConfig::tree_grid(3) };
        let g = gen_tree_grid(&cfg).unwrap();
        assert_eq!(g.n_nodes(), 16);
    }

    #[test]
    fn motif_shapes() {
        assert_eq!(Motif::cycle6().edges.len(), 6);
        assert_eq!(Motif::grid3x3().edges.len(), 12);
        let h = Motif::house();
        assert_eq!(h.edges.len(), 6);
        let count = |c| h.labels.iter().filter(|&&l| l == c).count();
        assert_eq!((count(1), count(2), count(3)), (1, 2, 2));
    }

    #[test]
    fn wrong_kind_is_rejected() {
        assert!(gen_tree_grid(&GenConfig::tree_cycles(0)).is_err());
    }

    #[test]
    fn ba_edge_count() {
        let mut rng = rng::rng(5);
        let e = barabasi_albert(50, 3, &mut rng);
        assert_eq!(e.len(), 3 * 47);
        let set: BTreeSet<_> = e.iter().map(|&x| canon(x)).collect();
        assert_eq!(set.len(), e.len());
    }
}
