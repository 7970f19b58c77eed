//! Metrics over counterfactual results and an exhaustive minimal-edit oracle.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::blackbox::NodeClassifier;
use crate::error::{bail, Error, Result};
use crate::explainer::CounterfactualResult;
use crate::graph::{Graph, Perturbation};
use crate::mdp::{Episode, RewardConfig, RewardLabel};

/// Percentage of results whose label did not flip.
pub fn fidelity(results: &[CounterfactualResult]) -> Result<f64> {
    if results.is_empty() {
        bail!(Input, "fidelity of an empty result set");
    }
    let failures = results.iter().filter(|r| !r.success).count();
    Ok(100.0 * failures as f64 / results.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "status", rename_all = "kebab-case"))]
pub enum SizeStats {
    NoSuccesses,
    Summary { count: usize, mean: f64, std: f64 },
}

impl SizeStats {
    pub fn mean(&self) -> Option<f64> {
        match *self {
            SizeStats::Summary { mean, .. } => Some(mean),
            SizeStats::NoSuccesses => None,
        }
    }
}

/// Mean and population standard deviation of sizes over successes.
pub fn size_stats(results: &[CounterfactualResult]) -> SizeStats {
    let sizes: Vec<f64> = results.iter().filter(|r| r.success).map(|r| r.size as f64).collect();
    if sizes.is_empty() {
        return SizeStats::NoSuccesses;
    }
    let n = sizes.len() as f64;
    let mean = sizes.iter().sum::<f64>() / n;
    let var = sizes.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
    SizeStats::Summary { count: sizes.len(), mean, std: libm::sqrt(var) }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Accuracy {
    /// Percentage of successful explanations whose every edit touches the
    /// target's motif instance.
    pub per_explanation: f64,
    /// Percentage of edits, pooled over successes, touching the target's motif.
    pub per_edge: f64,
}

/// Motif-based correctness of successful explanations. `None` when nothing
/// succeeded.
pub fn accuracy(results: &[CounterfactualResult], g: &Graph) -> Result<Option<Accuracy>> {
    if !g.has_motifs() {
        bail!(Input, "graph carries no motif annotation");
    }
    let (mut correct, mut succ, mut hit_edges, mut edges) = (0usize, 0usize, 0usize, 0usize);
    for r in results.iter().filter(|r| r.success) {
        g.check_node(r.node)?;
        let Some(m) = g.motif(r.node) else {
            bail!(Input, "target {} is not a motif node", r.node);
        };
        let hits = r.perturbations.iter().filter(|p| g.motif(p.u) == Some(m) || g.motif(p.v) == Some(m)).count();
        succ += 1;
        correct += usize::from(hits == r.perturbations.len());
        hit_edges += hits;
        edges += r.perturbations.len();
    }
    if succ == 0 {
        return Ok(None);
    }
    let per_edge = if edges == 0 { 100.0 } else { 100.0 * hit_edges as f64 / edges as f64 };
    Ok(Some(Accuracy { per_explanation: 100.0 * correct as f64 / succ as f64, per_edge }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Sparsity {
    pub mean: Option<f64>,
    /// Successes left out because their neighborhood had no edges.
    pub skipped: usize,
}

/// Mean fraction of neighborhood edges retained, over successes.
pub fn sparsity(results: &[CounterfactualResult]) -> Sparsity {
    let mut vals = Vec::new();
    let mut skipped = 0;
    for r in results.iter().filter(|r| r.success) {
        if r.nbhd_edges == 0 {
            skipped += 1;
            continue;
        }
        vals.push(1.0 - r.n_deletions() as f64 / r.nbhd_edges as f64);
    }
    let mean = if vals.is_empty() { None } else { Some(vals.iter().sum::<f64>() / vals.len() as f64) };
    Sparsity { mean, skipped }
}

/// Same as [`sparsity`] but with the neighborhood radius recomputed on `g`.
pub fn sparsity_with_radius(results: &[CounterfactualResult], g: &Graph, hops: usize) -> Result<Sparsity> {
    let mut adjusted = Vec::with_capacity(results.len());
    for r in results {
        let mut r = r.clone();
        r.nbhd_edges = neighborhood_edges(g, r.node, hops)?;
        adjusted.push(r);
    }
    Ok(sparsity(&adjusted))
}

/// Number of edges with both endpoints within `hops` of `v`.
pub fn neighborhood_edges(g: &Graph, v: usize, hops: usize) -> Result<usize> {
    let ball = g.khop(v, hops)?;
    Ok(ball.iter().map(|&u| g.neighbors(u).iter().filter(|&&w| w > u && ball.binary_search(&w).is_ok()).count()).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Composition {
    pub results: usize,
    pub additions: usize,
    pub deletions: usize,
}

/// Totals of additions and deletions keyed by explanation size.
pub fn edit_composition(results: &[CounterfactualResult]) -> BTreeMap<usize, Composition> {
    let mut out: BTreeMap<usize, Composition> = BTreeMap::new();
    for r in results {
        let c = out.entry(r.size).or_default();
        c.results += 1;
        c.additions += r.n_additions();
        c.deletions += r.n_deletions();
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub n: usize,
    pub fidelity: f64,
    pub size: SizeStats,
    pub accuracy: Option<Accuracy>,
    pub sparsity: Sparsity,
    pub composition: BTreeMap<usize, Composition>,
}

/// All metrics; accuracy is computed only when `g` has motif annotations.
pub fn evaluate(results: &[CounterfactualResult], g: &Graph) -> Result<EvalReport> {
    Ok(EvalReport {
        n: results.len(),
        fidelity: fidelity(results)?,
        size: size_stats(results),
        accuracy: if g.has_motifs() { accuracy(results, g)? } else { None },
        sparsity: sparsity(results),
        composition: edit_composition(results),
    })
}

fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Visit every `k`-subset of `0..n` in lexicographic order until `f` says stop.
fn for_each_subset(n: usize, k: usize, mut f: impl FnMut(&[usize]) -> Result<bool>) -> Result<bool> {
    if k > n {
        return Ok(false);
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        if f(&idx)? {
            return Ok(true);
        }
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return Ok(false);
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Smallest subset (by size, then enumeration order) of the step-0 edits that
/// flips the prediction of `v` when applied together. `Ok(None)` when no set
/// of at most `max_k` edits works; [`Error::BudgetExceeded`] when more than
/// `max_subsets` model evaluations would be needed.
pub fn brute_force_oracle<M: NodeClassifier + ?Sized>(
    model: &M,
    g: &Graph,
    v: usize,
    hops: usize,
    max_k: usize,
    max_subsets: u64,
) -> Result<Option<Vec<Perturbation>>> {
    let ep = Episode::new(model, g, v, hops, RewardConfig::default(), RewardLabel::True)?;
    let actions: Vec<Perturbation> = ep.initial_actions().iter().collect();
    let mut spent: u64 = 0;
    for k in 1..=max_k.min(actions.len()) {
        spent = spent.saturating_add(binomial(actions.len(), k));
        if spent > max_subsets {
            return Err(Error::BudgetExceeded(max_subsets));
        }
        let mut found = None;
        for_each_subset(actions.len(), k, |idx| {
            let set: Vec<Perturbation> = idx.iter().map(|&i| actions[i]).collect();
            if ep.flips_with(&set)? {
                found = Some(set);
                return Ok(true);
            }
            Ok(false)
        })?;
        if let Some(set) = found {
            return Ok(Some(set.iter().map(|p| ep.to_global(p)).collect()));
        }
    }
    Ok(None)
}
