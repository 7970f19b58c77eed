//! Brute-force action enumeration from the definition.

use std::collections::VecDeque;

use edgeflip_core::graph::Graph;
use edgeflip_core::mdp::enumerate_actions;
use edgeflip_core::rng;
use edgeflip_core::{EditKind, Perturbation};
use rand::Rng;

pub const GRAPHS: u64 = 200;

fn random_graph(r: &mut rng::Rng, n: usize, p: f64) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if r.gen_bool(p) {
                edges.push((a, b));
            }
        }
    }
    edges
}

fn bfs_ball(n: usize, edges: &[(usize, usize)], v: usize, h: usize) -> Vec<bool> {
    let mut dist = vec![usize::MAX; n];
    dist[v] = 0;
    let mut q = VecDeque::from([v]);
    while let Some(u) = q.pop_front() {
        for &(a, b) in edges {
            let w = if a == u {
                b
            } else if b == u {
                a
            } else {
                continue;
            };
            if dist[w] == usize::MAX {
                dist[w] = dist[u] + 1;
                q.push_back(w);
            }
        }
    }
    dist.iter().map(|&d| d <= h).collect()
}

/// Definition-level enumeration: every pair inside the ball of `g0`,
/// deletions where `g_t` has the edge, additions from `v` where it does not.
fn brute_actions(n: usize, e0: &[(usize, usize)], et: &[(usize, usize)], v: usize, h: usize) -> Vec<Perturbation> {
    let inside = bfs_ball(n, e0, v, h);
    let mut dels = Vec::new();
    let mut adds = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if !(inside[a] && inside[b]) {
                continue;
            }
            let present = et.contains(&(a, b));
            if present {
                dels.push(Perturbation { u: a, v: b, kind: EditKind::Delete });
            } else if a == v || b == v {
                adds.push(Perturbation { u: a, v: b, kind: EditKind::Add });
            }
        }
    }
    dels.extend(adds);
    dels
}

/// Graphs of at most 12 nodes on which `enumerate_actions` disagrees with
/// the brute force, or emits deletions and additions out of order.
pub fn mismatches() -> Vec<(u64, usize)> {
    let mut bad = Vec::new();
    for seed in 0..GRAPHS {
        let mut r = rng::rng(seed);
        let n = r.gen_range(1..=12);
        let e0 = random_graph(&mut r, n, 0.3);
        // g_t: g0 with a few random toggles
        let mut et = e0.clone();
        for _ in 0..r.gen_range(0..4) {
            if n < 2 {
                break;
            }
            let a = r.gen_range(0..n);
            let b = r.gen_range(0..n);
            if a == b {
                continue;
            }
            let e = (a.min(b), a.max(b));
            match et.iter().position(|&x| x == e) {
                Some(i) => {
                    et.remove(i);
                }
                None => et.push(e),
            }
        }
        et.sort_unstable();
        let g0 = Graph::from_edges(n, &e0).unwrap();
        let gt = Graph::from_edges(n, &et).unwrap();
        let v = r.gen_range(0..n);
        for h in 1..=3 {
            let got: Vec<Perturbation> = enumerate_actions(&gt, &g0, v, h).unwrap().iter().collect();
            let mut want = brute_actions(n, &e0, &et, v, h);
            let mut got_sorted = got.clone();
            got_sorted.sort_by_key(|p| (p.kind == EditKind::Add, p.u, p.v));
            want.sort_by_key(|p| (p.kind == EditKind::Add, p.u, p.v));
            // deletions first, each part ordered
            if got_sorted != want || got != got_sorted {
                bad.push((seed, h));
            }
        }
    }
    bad
}
