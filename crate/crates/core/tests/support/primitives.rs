//! Finite-difference checks shared by the core tests and the acceptance
//! suite.

use std::sync::Arc;

use edgeflip_core::diff::{gradient_check, SparseMatrix, Tape, Tensor, Var};
use edgeflip_core::rng;
use edgeflip_core::Result;
use rand::Rng;

pub const SEEDS: u64 = 100;
pub const TOL: f64 = 1e-4;
const EPS: f64 = 1e-5;

pub fn rand_tensor(r: &mut rng::Rng, rows: usize, cols: usize) -> Tensor {
    let data = (0..rows * cols).map(|_| r.gen_range(-1.0..1.0)).collect();
    Tensor::from_vec(rows, cols, data).unwrap()
}

/// Entries kept at least `margin` away from zero, for kinked activations.
fn away_from_zero(r: &mut rng::Rng, rows: usize, cols: usize, margin: f64) -> Tensor {
    let data = (0..rows * cols)
        .map(|_| {
            let x: f64 = r.gen_range(margin..1.0);
            if r.gen_bool(0.5) {
                x
            } else {
                -x
            }
        })
        .collect();
    Tensor::from_vec(rows, cols, data).unwrap()
}

/// Contract a tensor output to a scalar with fixed random weights.
fn project(tape: &mut Tape, x: Var, seed: u64) -> Result<Var> {
    let shape = tape.value(x).shape();
    let w = rand_tensor(&mut rng::rng_for(seed, &[77]), shape[0], shape[1]);
    let w = tape.constant(w);
    let m = tape.mul(x, w)?;
    Ok(tape.sum(m))
}

fn dims(r: &mut rng::Rng) -> (usize, usize, usize) {
    (r.gen_range(1..6), r.gen_range(1..6), r.gen_range(1..6))
}

fn matmul(seed: u64) -> f64 {
    let mut r = rng::rng(seed);
    let (a, b, c) = dims(&mut r);
    let ps = [rand_tensor(&mut r, a, b), rand_tensor(&mut r, b, c)];
    gradient_check(
        |t, v| {
            let y = t.matmul(v[0], v[1])?;
            project(t, y, seed)
        },
        &ps,
        EPS,
    )
    .unwrap()
}

fn add_bias_add_mul_scale(seed: u64) -> f64 {
    let mut r = rng::rng(seed);
    let (a, b, _) = dims(&mut r);
    let s: f64 = r.gen_range(-2.0..2.0);
    let ps = [rand_tensor(&mut r, a, b), rand_tensor(&mut r, 1, b), rand_tensor(&mut r, a, b)];
    gradient_check(
        |t, v| {
            let x = t.add_bias(v[0], v[1])?;
            let y = t.add(x, v[2])?;
            let z = t.mul(y, v[0])?;
            let z = t.scale(z, s);
            project(t, z, seed)
        },
        &ps,
        EPS,
    )
    .unwrap()
}

fn sparse_aggregate(seed: u64) -> f64 {
    let mut r = rng::rng(seed);
    let n = r.gen_range(1..7);
    let c = r.gen_range(1..4);
    let mut trip = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if r.gen_bool(0.4) {
                trip.push((i, j, r.gen_range(-1.0..1.0)));
            }
        }
    }
    let adj = Arc::new(SparseMatrix::from_sorted_triplets(n, &trip).unwrap());
    let ps = [rand_tensor(&mut r, n, c)];
    gradient_check(
        |t, v| {
            let y = t.sparse_aggregate(adj.clone(), v[0])?;
            project(t, y, seed)
        },
        &ps,
        EPS,
    )
    .unwrap()
}

fn concat_and_gather(seed: u64) -> f64 {
    let mut r = rng::rng(seed);
    let (a, b, c) = dims(&mut r);
    let idx: Arc<[usize]> = (0..r.gen_range(1..8)).map(|_| r.gen_range(0..a)).collect();
    let ps = [rand_tensor(&mut r, a, b), rand_tensor(&mut r, a, c), rand_tensor(&mut r, 2, b)];
    gradient_check(
        |t, v| {
            let cc = t.concat_cols(&[v[0], v[1]])?;
            let g = t.gather_rows(cc, idx.clone())?;
            let rr = t.concat_rows(&[v[0], v[2]])?;
            let p1 = project(t, g, seed)?;
            let p2 = project(t, rr, seed + 1)?;
            t.add(p1, p2)
        },
        &ps,
        EPS,
    )
    .unwrap()
}

fn relu_and_leaky_relu(seed: u64) -> f64 {
    let mut r = rng::rng(seed);
    let (a, b, _) = dims(&mut r);
    let ps = [away_from_zero(&mut r, a, b, 1e-3)];
    gradient_check(
        |t, v| {
            let x = t.relu(v[0]);
            let y = t.leaky_relu(v[0], 0.1);
            let z = t.add(x, y)?;
            project(t, z, seed)
        },
        &ps,
        EPS,
    )
    .unwrap()
}

fn exp_sum_pick_reshape(seed: u64) -> f64 {
    let mut r = rng::rng(seed);
    let (a, b, _) = dims(&mut r);
    let i = r.gen_range(0..a * b);
    let ps = [rand_tensor(&mut r, a, b)];
    gradient_check(
        |t, v| {
            let e = t.exp(v[0]);
            let flat = t.reshape(e, 1, a * b)?;
            let p = t.pick(flat, i)?;
            let s = t.sum(e);
            let p = t.mul(p, s)?;
            let q = project(t, v[0], seed)?;
            t.add(p, q)
        },
        &ps,
        EPS,
    )
    .unwrap()
}

fn softmaxes(seed: u64) -> f64 {
    let mut r = rng::rng(seed);
    let n = r.gen_range(1..10);
    let mut offsets = vec![0];
    while *offsets.last().unwrap() < n {
        let next = (offsets.last().unwrap() + r.gen_range(1..4)).min(n);
        offsets.push(next);
    }
    let offsets: Arc<[usize]> = offsets.into();
    let (a, b, _) = dims(&mut r);
    let ps = [rand_tensor(&mut r, n, 1), rand_tensor(&mut r, a, b)];
    gradient_check(
        |t, v| {
            let s = t.segment_softmax(v[0], offsets.clone())?;
            let all = t.softmax_over_set(v[0])?;
            let l = t.log_softmax_rows(v[1]);
            let p1 = project(t, s, seed)?;
            let p2 = project(t, all, seed + 1)?;
            let p3 = project(t, l, seed + 2)?;
            let p = t.add(p1, p2)?;
            t.add(p, p3)
        },
        &ps,
        EPS,
    )
    .unwrap()
}

fn nll_pick(seed: u64) -> f64 {
    let mut r = rng::rng(seed);
    let (a, b, _) = dims(&mut r);
    let picks: Arc<[(usize, usize)]> = (0..r.gen_range(1..6)).map(|_| (r.gen_range(0..a), r.gen_range(0..b))).collect();
    let ps = [rand_tensor(&mut r, a, b)];
    gradient_check(
        |t, v| {
            let l = t.log_softmax_rows(v[0]);
            t.nll_pick(l, picks.clone())
        },
        &ps,
        EPS,
    )
    .unwrap()
}

fn edge_aggregate(seed: u64) -> f64 {
    let mut r = rng::rng(seed);
    let n = r.gen_range(1..6);
    let c = r.gen_range(1..4);
    let m = r.gen_range(1..10);
    let src: Arc<[usize]> = (0..m).map(|_| r.gen_range(0..n)).collect();
    let dst: Arc<[usize]> = (0..m).map(|_| r.gen_range(0..n)).collect();
    let ps = [rand_tensor(&mut r, m, 1), rand_tensor(&mut r, n, c)];
    gradient_check(
        |t, v| {
            let y = t.edge_aggregate(v[0], v[1], src.clone(), dst.clone())?;
            project(t, y, seed)
        },
        &ps,
        EPS,
    )
    .unwrap()
}

fn composed_gcn_layer(seed: u64) -> f64 {
    let mut r = rng::rng(seed);
    let n = r.gen_range(2..7);
    let mut trip = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j || r.gen_bool(0.3) {
                trip.push((i, j, r.gen_range(0.1..1.0)));
            }
        }
    }
    let adj = Arc::new(SparseMatrix::from_sorted_triplets(n, &trip).unwrap());
    let picks: Arc<[(usize, usize)]> = (0..n).map(|i| (i, i % 2)).collect();
    let ps = [rand_tensor(&mut r, n, 3), rand_tensor(&mut r, 3, 4), rand_tensor(&mut r, 1, 4), rand_tensor(&mut r, 4, 2)];
    gradient_check(
        |t, v| {
            let h = t.sparse_aggregate(adj.clone(), v[0])?;
            let h = t.matmul(h, v[1])?;
            let h = t.add_bias(h, v[2])?;
            let h = t.leaky_relu(h, 0.2);
            let h = t.sparse_aggregate(adj.clone(), h)?;
            let h = t.matmul(h, v[3])?;
            let l = t.log_softmax_rows(h);
            t.nll_pick(l, picks.clone())
        },
        &ps,
        EPS,
    )
    .unwrap()
}

/// Every primitive check, by name.
pub const PRIMITIVES: &[(&str, fn(u64) -> f64)] = &[
    ("matmul", matmul),
    ("elementwise", add_bias_add_mul_scale),
    ("sparse_aggregate", sparse_aggregate),
    ("concat/gather", concat_and_gather),
    ("relu", relu_and_leaky_relu),
    ("exp/sum/pick/reshape", exp_sum_pick_reshape),
    ("softmax", softmaxes),
    ("nll_pick", nll_pick),
    ("edge_aggregate", edge_aggregate),
    ("gcn layer", composed_gcn_layer),
];

/// Worst relative error of a named check over `SEEDS` draws.
pub fn worst(check: fn(u64) -> f64) -> f64 {
    (0..SEEDS).map(check).fold(0.0, f64::max)
}
