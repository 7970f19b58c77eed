//! End-to-end finite-difference checks of the policy network.

use edgeflip_core::diff::{Tape, Tensor, Var};
use edgeflip_core::graph::Graph;
use edgeflip_core::mdp::{enumerate_actions, ActionSpace, State};
use edgeflip_core::policy::{PolicyConfig, PolicyNetwork};
use edgeflip_core::rng;
use edgeflip_core::trainer::loss_on_tape;
use edgeflip_core::Result;
use rand::Rng;

pub const DIM: usize = 5;
pub const EPS: f64 = 1e-5;
pub const CHECKED: usize = 100;
pub const FORWARD_TOL: f64 = 1e-4;
pub const LOSS_TOL: f64 = 1e-3;
/// Gradients here are O(1); five-point noise at this step is near 1e-10.
const FLOOR: f64 = 1e-5;

pub fn instance(seed: u64, n: usize) -> (Graph, State, ActionSpace) {
    let mut r = rng::rng(seed);
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if r.gen_bool(0.4) {
                edges.push((a, b));
            }
        }
    }
    let g = Graph::from_edges(n, &edges).unwrap();
    let vectors = Tensor::from_vec(n, DIM, (0..n * DIM).map(|_| r.gen_range(-1.0..1.0)).collect()).unwrap();
    let state = State { target: 0, step: 0, node_order: (0..n).collect(), vectors, edges: g.edges().collect() };
    let actions = enumerate_actions(&g, &g, 0, n).unwrap();
    (g, state, actions)
}

pub fn policy(seed: u64) -> PolicyNetwork {
    PolicyNetwork::new(DIM, PolicyConfig { seed, hidden: 8, ..PolicyConfig::default() }).unwrap()
}

/// Reverse-mode gradient against five-point differences, component by
/// component. A LeakyReLU kink inside the stencil makes the numeric estimate
/// depend on the step, so components whose estimates at `eps` and `eps / 2`
/// disagree by more than `tol` are excluded and counted instead. A wrong
/// analytic gradient still shows up, since both estimates agree on it.
fn smooth_check<F>(f: F, params: &[Tensor], eps: f64, tol: f64) -> (f64, usize, usize)
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let eval = |ps: &[Tensor]| {
        let mut tape = Tape::new();
        let vars: Vec<Var> = ps.iter().map(|p| tape.variable(p.clone())).collect();
        let out = f(&mut tape, &vars).unwrap();
        tape.scalar(out)
    };
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.variable(p.clone())).collect();
    let out = f(&mut tape, &vars).unwrap();
    let grads = tape.backward(out).unwrap();
    let (mut worst, mut total, mut kinked) = (0.0f64, 0, 0);
    let mut work = params.to_vec();
    for (pi, p) in params.iter().enumerate() {
        for k in 0..p.len() {
            let orig = p.data()[k];
            let mut at = |d: f64| {
                work[pi].data_mut()[k] = orig + d;
                eval(&work)
            };
            let mut stencil = |h: f64| (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
            let (wide, narrow) = (stencil(eps), stencil(eps / 2.0));
            work[pi].data_mut()[k] = orig;
            let rel = |x: f64, y: f64| (x - y).abs() / x.abs().max(y.abs()).max(FLOOR);
            total += 1;
            if rel(wide, narrow) > tol {
                kinked += 1;
                continue;
            }
            let a = grads.get(vars[pi]).map_or(0.0, |g| g.data()[k]);
            worst = worst.max(rel(a, wide));
        }
    }
    (worst, total, kinked)
}

pub struct Checked {
    pub worst: f64,
    pub total: usize,
    pub kinked: usize,
}

impl Checked {
    /// Fewer than one component in a hundred may be excluded as kinked.
    pub fn passes(&self, tol: f64) -> bool {
        self.worst < tol && self.kinked * 100 < self.total
    }
}

/// Worst error over `CHECKED` instances.
fn over_instances(
    offset: u64,
    tol: f64,
    objective: fn(u64, &mut Tape, &[Var], &PolicyNetwork, &State, &ActionSpace) -> Result<Var>,
) -> Checked {
    let (mut worst, mut total, mut kinked, mut checked) = (0.0f64, 0, 0, 0);
    let mut seed = 0u64;
    while checked < CHECKED {
        let (_, s, a) = instance(seed + offset, 6);
        let p = policy(seed);
        if !a.is_empty() {
            let (w, t, k) = smooth_check(|tape, vars| objective(seed, tape, vars, &p, &s, &a), p.params().values(), EPS, tol);
            worst = worst.max(w);
            total += t;
            kinked += k;
            checked += 1;
        }
        seed += 1;
    }
    Checked { worst, total, kinked }
}

fn forward_objective(seed: u64, tape: &mut Tape, vars: &[Var], p: &PolicyNetwork, s: &State, a: &ActionSpace) -> Result<Var> {
    let pick = rng::rng(seed ^ 2).gen_range(0..a.len());
    let out = p.forward(tape, vars, s, a)?;
    let lp = tape.pick(out.log_probs, pick)?;
    let ent = tape.scale(out.entropy, 0.3);
    tape.add(lp, ent)
}

/// The log-probability of one action plus an entropy bonus, through the
/// whole network.
pub fn forward() -> Checked {
    over_instances(0, FORWARD_TOL, forward_objective)
}

fn loss_objective(seed: u64, tape: &mut Tape, vars: &[Var], p: &PolicyNetwork, s: &State, a: &ActionSpace) -> Result<Var> {
    let mut r = rng::rng(seed ^ 3);
    let picks: Vec<usize> = (0..3).map(|_| r.gen_range(0..a.len())).collect();
    let adv: Vec<f64> = (0..3).map(|_| r.gen_range(-1.5..1.5)).collect();
    let mut terms = Vec::new();
    for &i in &picks {
        let out = p.forward(tape, vars, s, a)?;
        terms.push((tape.pick(out.log_probs, i)?, out.entropy));
    }
    Ok(loss_on_tape(tape, &terms, &adv, 0.1, 2)?.expect("non-empty"))
}

/// The training loss over three frozen steps sharing one state, through the
/// policy.
pub fn loss() -> Checked {
    over_instances(1000, LOSS_TOL, loss_objective)
}
