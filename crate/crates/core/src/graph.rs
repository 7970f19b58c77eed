//! Undirected graphs with node features, labels and motif membership.

use alloc::collections::VecDeque;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::diff::{SparseMatrix, Tensor};
use crate::error::{bail, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum EditKind {
    Add,
    Delete,
}

/// A single edge edit, stored with `u < v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Perturbation {
    pub u: usize,
    pub v: usize,
    pub kind: EditKind,
}

impl Perturbation {
    pub fn new(a: usize, b: usize, kind: EditKind) -> Result<Self> {
        if a == b {
            bail!(Contract, "self-loop edit on node {}", a);
        }
        let (u, v) = if a < b { (a, b) } else { (b, a) };
        Ok(Perturbation { u, v, kind })
    }

    pub fn add(a: usize, b: usize) -> Result<Self> {
        Self::new(a, b, EditKind::Add)
    }

    pub fn delete(a: usize, b: usize) -> Result<Self> {
        Self::new(a, b, EditKind::Delete)
    }

    pub fn is_add(&self) -> bool {
        self.kind == EditKind::Add
    }

    pub fn edge(&self) -> (usize, usize) {
        (self.u, self.v)
    }

    pub fn touches(&self, x: usize) -> bool {
        self.u == x || self.v == x
    }
}

/// Undirected simple graph. Node attributes are shared between a graph and
/// every graph derived from it by edge edits.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adj: Vec<Vec<usize>>,
    n_edges: usize,
    features: Arc<Tensor>,
    labels: Arc<Vec<usize>>,
    motif_of: Arc<Vec<Option<usize>>>,
    n_classes: usize,
}

impl Graph {
    pub fn new(
        n_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        features: Tensor,
        labels: Vec<usize>,
        motif_of: Vec<Option<usize>>,
        n_classes: usize,
    ) -> Result<Self> {
        if features.rows() != n_nodes {
            bail!(Input, "{} feature rows for {} nodes", features.rows(), n_nodes);
        }
        if labels.len() != n_nodes || motif_of.len() != n_nodes {
            bail!(Input, "{} labels / {} motif entries for {} nodes", labels.len(), motif_of.len(), n_nodes);
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            bail!(Input, "label {} outside {} classes", bad, n_classes);
        }
        let mut adj = vec![Vec::new(); n_nodes];
        let mut n_edges = 0;
        for (a, b) in edges {
            if a >= n_nodes || b >= n_nodes {
                bail!(Input, "edge ({}, {}) outside {} nodes", a, b, n_nodes);
            }
            if a == b {
                bail!(Input, "self-loop on node {}", a);
            }
            adj[a].push(b);
            adj[b].push(a);
            n_edges += 1;
        }
        for (u, list) in adj.iter_mut().enumerate() {
            list.sort_unstable();
            if list.windows(2).any(|w| w[0] == w[1]) {
                bail!(Input, "duplicate edge at node {}", u);
            }
        }
        Ok(Graph { adj, n_edges, features: Arc::new(features), labels: Arc::new(labels), motif_of: Arc::new(motif_of), n_classes })
    }

    /// Topology-only graph: one all-ones feature column, every label 0.
    pub fn from_edges(n_nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Self::new(n_nodes, edges.iter().copied(), Tensor::filled(n_nodes, 1, 1.0), vec![0; n_nodes], vec![None; n_nodes], 1)
    }

    pub fn n_nodes(&self) -> usize {
        self.adj.len()
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, u: usize) -> usize {
        self.labels[u]
    }

    pub fn motif_of(&self) -> &[Option<usize>] {
        &self.motif_of
    }

    pub fn motif(&self, u: usize) -> Option<usize> {
        self.motif_of[u]
    }

    pub fn has_motifs(&self) -> bool {
        self.motif_of.iter().any(Option::is_some)
    }

    /// Sorted neighbor list.
    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.adj[u]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.adj[u].len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a < self.adj.len() && self.adj[a].binary_search(&b).is_ok()
    }

    /// Edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj.iter().enumerate().flat_map(|(u, list)| list.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }

    pub fn check_node(&self, v: usize) -> Result<()> {
        if v >= self.n_nodes() {
            bail!(Input, "node {} outside graph of {} nodes", v, self.n_nodes());
        }
        Ok(())
    }

    /// Nodes within `hops` edges of `v` (including `v`), ascending.
    pub fn khop(&self, v: usize, hops: usize) -> Result<Vec<usize>> {
        self.check_node(v)?;
        let mut dist = vec![usize::MAX; self.n_nodes()];
        let mut queue = VecDeque::new();
        dist[v] = 0;
        queue.push_back(v);
        let mut out = vec![v];
        while let Some(u) = queue.pop_front() {
            if dist[u] == hops {
                continue;
            }
            for &w in &self.adj[u] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    out.push(w);
                    queue.push_back(w);
                }
            }
        }
        out.sort_unstable();
        Ok(out)
    }

    /// Copy of this graph with one edge added or removed.
    pub fn apply(&self, p: &Perturbation) -> Result<Graph> {
        let mut g = self.clone();
        g.apply_mut(p)?;
        Ok(g)
    }

    pub fn apply_mut(&mut self, p: &Perturbation) -> Result<()> {
        let (u, v) = p.edge();
        self.check_node(v)?;
        if u == v {
            bail!(Contract, "self-loop edit on node {}", u);
        }
        match (p.kind, self.has_edge(u, v)) {
            (EditKind::Add, false) => {
                insert_sorted(&mut self.adj[u], v);
                insert_sorted(&mut self.adj[v], u);
                self.n_edges += 1;
            }
            (EditKind::Delete, true) => {
                remove_sorted(&mut self.adj[u], v);
                remove_sorted(&mut self.adj[v], u);
                self.n_edges -= 1;
            }
            (EditKind::Add, true) => bail!(Contract, "edge ({}, {}) already present", u, v),
            (EditKind::Delete, false) => bail!(Contract, "edge ({}, {}) absent", u, v),
        }
        Ok(())
    }

    /// Apply edits in order.
    pub fn apply_all<'a>(&self, ps: impl IntoIterator<Item = &'a Perturbation>) -> Result<Graph> {
        let mut g = self.clone();
        for p in ps {
            g.apply_mut(p)?;
        }
        Ok(g)
    }

    /// `D̃^{-1/2} (A + I) D̃^{-1/2}` where `D̃` counts the self-loop.
    pub fn normalized_adjacency(&self) -> SparseMatrix {
        let inv_sqrt: Vec<f64> = self.adj.iter().map(|l| 1.0 / libm::sqrt((l.len() + 1) as f64)).collect();
        let mut triplets = Vec::with_capacity(self.n_nodes() + 2 * self.n_edges);
        for (u, list) in self.adj.iter().enumerate() {
            let mut self_done = false;
            for &w in list {
                if !self_done && w > u {
                    triplets.push((u, u, inv_sqrt[u] * inv_sqrt[u]));
                    self_done = true;
                }
                triplets.push((u, w, inv_sqrt[u] * inv_sqrt[w]));
            }
            if !self_done {
                triplets.push((u, u, inv_sqrt[u] * inv_sqrt[u]));
            }
        }
        SparseMatrix::from_sorted_triplets(self.n_nodes(), &triplets).expect("adjacency lists are sorted")
    }

    /// Subgraph induced by `nodes` (must be ascending and unique). Local id
    /// `i` corresponds to `nodes[i]`, so ascending order is preserved.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Result<Graph> {
        if nodes.windows(2).any(|w| w[0] >= w[1]) {
            bail!(Input, "induced subgraph nodes must be strictly ascending");
        }
        if let Some(&last) = nodes.last() {
            self.check_node(last)?;
        }
        let local = |g: usize| nodes.binary_search(&g).ok();
        let mut edges = Vec::new();
        for (i, &u) in nodes.iter().enumerate() {
            for &w in &self.adj[u] {
                if w > u {
                    if let Some(j) = local(w) {
                        edges.push((i, j));
                    }
                }
            }
        }
        let d = self.feature_dim();
        let mut feats = Tensor::zeros(nodes.len(), d);
        for (i, &u) in nodes.iter().enumerate() {
            feats.row_mut(i).copy_from_slice(self.features.row(u));
        }
        Graph::new(
            nodes.len(),
            edges,
            feats,
            nodes.iter().map(|&u| self.labels[u]).collect(),
            nodes.iter().map(|&u| self.motif_of[u]).collect(),
            self.n_classes,
        )
    }
}

fn insert_sorted(list: &mut Vec<usize>, x: usize) {
    if let Err(pos) = list.binary_search(&x) {
        list.insert(pos, x);
    }
}

fn remove_sorted(list: &mut Vec<usize>, x: usize) {
    if let Ok(pos) = list.binary_search(&x) {
        list.remove(pos);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> Graph {
        Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn khop_on_path() {
        let g = path3();
        assert_eq!(g.khop(0, 1).unwrap(), vec![0, 1]);
        assert_eq!(g.khop(0, 2).unwrap(), vec![0, 1, 2]);
        assert_eq!(g.khop(1, 0).unwrap(), vec![1]);
        assert!(g.khop(3, 1).is_err());
    }

    #[test]
    fn khop_isolated() {
        let g = Graph::from_edges(3, &[(0, 1)]).unwrap();
        assert_eq!(g.khop(2, 5).unwrap(), vec![2]);
    }

    #[test]
    fn perturbations_on_path() {
        let g = path3();
        let del = g.apply(&Perturbation::delete(0, 1).unwrap()).unwrap();
        assert_eq!(del.edges().collect::<Vec<_>>(), vec![(1, 2)]);
        let tri = g.apply(&Perturbation::add(2, 0).unwrap()).unwrap();
        assert_eq!(tri.edges().collect::<Vec<_>>(), vec![(0, 1), (0, 2), (1, 2)]);
        assert!(g.apply(&Perturbation::add(0, 1).unwrap()).is_err());
        assert!(g.apply(&Perturbation::delete(0, 2).unwrap()).is_err());
        // input untouched
        assert_eq!(g.n_edges(), 2);
        assert_eq!(del.features(), g.features());
    }

    #[test]
    fn perturbation_is_canonical() {
        let p = Perturbation::add(5, 2).unwrap();
        assert_eq!((p.u, p.v), (2, 5));
        assert!(Perturbation::delete(1, 1).is_err());
    }

    #[test]
    fn normalized_adjacency_small_cases() {
        let single = Graph::from_edges(1, &[]).unwrap().normalized_adjacency();
        assert_eq!(single.to_dense().data(), &[1.0]);
        let pair = Graph::from_edges(2, &[(0, 1)]).unwrap().normalized_adjacency();
        for &x in pair.to_dense().data() {
            assert!((x - 0.5).abs() < 1e-15);
        }
        let tri = Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap().normalized_adjacency();
        for &x in tri.to_dense().data() {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_invalid_graphs() {
        assert!(Graph::from_edges(2, &[(0, 0)]).is_err());
        assert!(Graph::from_edges(2, &[(0, 1), (1, 0)]).is_err());
        assert!(Graph::from_edges(2, &[(0, 2)]).is_err());
    }

    #[test]
    fn induced_subgraph_keeps_order() {
        let g = Graph::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)]).unwrap();
        let s = g.induced_subgraph(&[1, 2, 4]).unwrap();
        assert_eq!(s.edges().collect::<Vec<_>>(), vec![(0, 1)]);
        assert!(g.induced_subgraph(&[2, 1]).is_err());
    }
}
