mod support;

use edgeflip_core::diff::Tensor;
use edgeflip_core::mdp::State;
use edgeflip_core::rng;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use support::policy_grad::{self, instance, policy, DIM, FORWARD_TOL, LOSS_TOL};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn constant_score_shift_leaves_distribution(seed in any::<u64>(), shift in -50.0f64..50.0) {
        let (_, s, a) = instance(seed, 6);
        prop_assume!(!a.is_empty());
        let p = policy(seed);
        let before = p.distribution(&s, &a).unwrap();
        let mut q = p.clone();
        let id = q.params().find("mlp_out.bias").unwrap();
        q.params_mut().get_mut(id).data_mut()[0] += shift;
        let after = q.distribution(&s, &a).unwrap();
        for (x, y) in before.iter().zip(&after) {
            prop_assert!((x - y).abs() < 1e-9);
        }
        prop_assert!((before.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn encoder_is_permutation_equivariant(seed in any::<u64>()) {
        let n = 6;
        let (_, s, _) = instance(seed, n);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng::rng(seed ^ 1));
        let mut vectors = Tensor::zeros(n, DIM);
        for u in 0..n {
            vectors.row_mut(perm[u]).copy_from_slice(s.vectors.row(u));
        }
        let mut edges: Vec<(usize, usize)> = s.edges.iter().map(|&(i, j)| (perm[i].min(perm[j]), perm[i].max(perm[j]))).collect();
        edges.sort_unstable();
        let sp = State { target: perm[0], step: 0, node_order: (0..n).collect(), vectors, edges };
        let p = policy(seed);
        let (e, ep) = (p.embed(&s).unwrap(), p.embed(&sp).unwrap());
        for u in 0..n {
            for (x, y) in e.row(u).iter().zip(ep.row(perm[u])) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}

/// Reverse-mode gradient of the full policy (GAT encoder, action scorer,
/// log-softmax and entropy) against finite differences.
#[test]
fn end_to_end_policy_gradient() {
    let c = policy_grad::forward();
    eprintln!("policy forward worst relative error {:e}, {} of {} components kinked", c.worst, c.kinked, c.total);
    assert!(c.passes(FORWARD_TOL));
}

#[test]
fn end_to_end_loss_gradient() {
    let c = policy_grad::loss();
    eprintln!("policy loss worst relative error {:e}, {} of {} components kinked", c.worst, c.kinked, c.total);
    assert!(c.passes(LOSS_TOL));
}
