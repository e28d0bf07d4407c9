//! Seeded random chain generators for property sweeps.

use nalgebra::DMatrix;
use rand::Rng;

use crate::markov::StochasticMatrix;

/// Random walk on a complete weighted graph with loops: reversible, ergodic,
/// and generically with simple spectrum.
pub fn random_reversible<R: Rng + ?Sized>(n: usize, rng: &mut R) -> StochasticMatrix {
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let x: f64 = rng.random_range(0.05..1.0);
            w[(i, j)] = x;
            w[(j, i)] = x;
        }
    }
    walk_on_weights(&w)
}

/// Reversible chain on a random connected sparse graph (a random spanning tree
/// plus extra edges with probability `density`).
pub fn random_sparse_reversible<R: Rng + ?Sized>(n: usize, density: f64, rng: &mut R) -> StochasticMatrix {
    let mut w = DMatrix::zeros(n, n);
    for j in 1..n {
        let i = rng.random_range(0..j);
        let x: f64 = rng.random_range(0.1..1.0);
        w[(i, j)] = x;
        w[(j, i)] = x;
    }
    for i in 0..n {
        w[(i, i)] = rng.random_range(0.1..1.0);
        for j in i + 1..n {
            if w[(i, j)] == 0.0 && rng.random_bool(density) {
                let x: f64 = rng.random_range(0.1..1.0);
                w[(i, j)] = x;
                w[(j, i)] = x;
            }
        }
    }
    walk_on_weights(&w)
}

fn walk_on_weights(w: &DMatrix<f64>) -> StochasticMatrix {
    let n = w.nrows();
    let m = DMatrix::from_fn(n, n, |i, j| w[(i, j)] / w.row(i).sum());
    StochasticMatrix::from_matrix(m).expect("normalized weights are stochastic")
}

/// Ergodic chain with independent random rows; almost never reversible.
pub fn random_chain<R: Rng + ?Sized>(n: usize, laziness: f64, rng: &mut R) -> StochasticMatrix {
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(0.0..1.0));
    let m = DMatrix::from_fn(n, n, |i, j| {
        let step = m[(i, j)] / m.row(i).sum();
        if i == j {
            laziness + (1.0 - laziness) * step
        } else {
            (1.0 - laziness) * step
        }
    });
    StochasticMatrix::from_matrix(m).expect("normalized rows are stochastic")
}

/// Star chain with hub 0 and `leaves` spokes. Leaf holding probabilities are
/// drawn from `holds`, so repeated values occur when `holds` is short.
pub fn random_star<R: Rng + ?Sized>(leaves: usize, holds: &[f64], rng: &mut R) -> StochasticMatrix {
    let n = leaves + 1;
    let mut m = DMatrix::zeros(n, n);
    let out: Vec<f64> = (0..leaves).map(|_| rng.random_range(0.1..1.0)).collect();
    let hub_hold: f64 = rng.random_range(0.05..0.6);
    let total: f64 = out.iter().sum();
    m[(0, 0)] = hub_hold;
    for j in 1..n {
        m[(0, j)] = (1.0 - hub_hold) * out[j - 1] / total;
        let g = holds[rng.random_range(0..holds.len())];
        m[(j, j)] = g;
        m[(j, 0)] = 1.0 - g;
    }
    StochasticMatrix::from_matrix(m).expect("star rows are stochastic")
}

/// A chain satisfying the block proportionality condition exactly: random
/// block laws `mu_i`, a random block kernel `P^`, diagonal blocks
/// `P^(i,i) K_i` with `K_i` reversible for `mu_i`, off-diagonal blocks
/// `P^(i,j) 1^T mu_j`. Returns the chain, its blocks and `P^`.
pub fn conforming_block_chain<R: Rng + ?Sized>(
    sizes: &[usize],
    rng: &mut R,
) -> (StochasticMatrix, crate::block::BlockStructure, DMatrix<f64>) {
    let k = sizes.len();
    let blocks = crate::block::BlockStructure::from_sizes(sizes).expect("nonempty sizes");
    let mus: Vec<Vec<f64>> = sizes
        .iter()
        .map(|&n| {
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
            let s: f64 = w.iter().sum();
            w.into_iter().map(|x| x / s).collect()
        })
        .collect();
    let mut p_hat = DMatrix::from_fn(k, k, |_, _| rng.random_range(0.05..1.0));
    for i in 0..k {
        let s = p_hat.row(i).sum();
        p_hat.row_mut(i).unscale_mut(s);
    }
    let n: usize = sizes.iter().sum();
    let mut p = DMatrix::zeros(n, n);
    for i in 0..k {
        let rows = blocks.members(i).to_vec();
        let kernel = reversible_for(&mus[i], rng);
        for j in 0..k {
            let cols = blocks.members(j);
            for (a, &r) in rows.iter().enumerate() {
                for (b, &c) in cols.iter().enumerate() {
                    p[(r, c)] = if i == j { p_hat[(i, i)] * kernel[(a, b)] } else { p_hat[(i, j)] * mus[j][b] };
                }
            }
        }
    }
    (StochasticMatrix::from_matrix(p).expect("stochastic by construction"), blocks, p_hat)
}

/// A random kernel in detailed balance with `mu`.
fn reversible_for<R: Rng + ?Sized>(mu: &[f64], rng: &mut R) -> DMatrix<f64> {
    let n = mu.len();
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = rng.random_range(0.0..1.0) * mu[i] * mu[j];
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    let scale = (0..n).map(|i| w.row(i).sum() / mu[i]).fold(1e-300, f64::max) * 1.25;
    let mut k = DMatrix::from_fn(n, n, |i, j| w[(i, j)] / (scale * mu[i]));
    for i in 0..n {
        k[(i, i)] = 1.0 - k.row(i).sum();
    }
    k
}
