//! Small named chains used throughout the tests, the guide and the CLI examples.

use num::BigRational;

use crate::markov::StochasticMatrix;
use crate::star::{make_block_star_chain, BlockStarChain};

/// Six-state star chain with hub 0 and leaf holding probabilities
/// 5/6, 5/6, 7/9, 2/3, 2/3. Stationary law `(6, 4, 4, 3, 2, 2) / 21`.
pub fn six_state_star() -> StochasticMatrix {
    StochasticMatrix::new(six_state_star_rows()).expect("fixture is stochastic")
}

pub fn six_state_star_rows() -> Vec<Vec<f64>> {
    let n = 1.0 / 9.0;
    vec![
        vec![4.0 / 9.0, n, n, n, n, n],
        vec![1.0 / 6.0, 5.0 / 6.0, 0.0, 0.0, 0.0, 0.0],
        vec![1.0 / 6.0, 0.0, 5.0 / 6.0, 0.0, 0.0, 0.0],
        vec![2.0 / 9.0, 0.0, 0.0, 7.0 / 9.0, 0.0, 0.0],
        vec![1.0 / 3.0, 0.0, 0.0, 0.0, 2.0 / 3.0, 0.0],
        vec![1.0 / 3.0, 0.0, 0.0, 0.0, 0.0, 2.0 / 3.0],
    ]
}

/// The six-state star in exact arithmetic.
pub fn six_state_star_exact() -> Vec<Vec<BigRational>> {
    let r = |a: i64, b: i64| BigRational::new(a.into(), b.into());
    let z = || r(0, 1);
    let mut rows = vec![vec![r(4, 9), r(1, 9), r(1, 9), r(1, 9), r(1, 9), r(1, 9)]];
    for (k, (back, hold)) in [((1, 6), (5, 6)), ((1, 6), (5, 6)), ((2, 9), (7, 9)), ((1, 3), (2, 3)), ((1, 3), (2, 3))]
        .into_iter()
        .enumerate()
    {
        let mut row: Vec<BigRational> = (0..6).map(|_| z()).collect();
        row[0] = r(back.0, back.1);
        row[k + 1] = r(hold.0, hold.1);
        rows.push(row);
    }
    rows
}

/// `[[0.7, 0.3], [0.2, 0.8]]`, stationary law `(0.4, 0.6)`, spectrum `{1, 0.5}`.
pub fn two_state() -> StochasticMatrix {
    StochasticMatrix::new(vec![vec![0.7, 0.3], vec![0.2, 0.8]]).expect("fixture is stochastic")
}

/// Walk on the symmetric weights `[[2,2,3],[2,7,2],[3,2,5]]`: reversible with
/// nonnegative spectrum, yet `P(2,0) = 3/10 > P(0,0) = 2/7`, so the reversed
/// kernel is not maximised at 0 and the ladder link has a negative entry.
pub fn link_counterexample() -> StochasticMatrix {
    StochasticMatrix::new(vec![
        vec![2.0 / 7.0, 2.0 / 7.0, 3.0 / 7.0],
        vec![2.0 / 11.0, 7.0 / 11.0, 2.0 / 11.0],
        vec![3.0 / 10.0, 2.0 / 10.0, 5.0 / 10.0],
    ])
    .expect("fixture is stochastic")
}

/// Deterministic 2-cycle; `P^t(0,0)` alternates.
pub fn two_cycle() -> StochasticMatrix {
    StochasticMatrix::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).expect("fixture is stochastic")
}

/// Lazy birth-death chain on `0..n` with up/down probability `p`/`q`.
pub fn birth_death(n: usize, up: f64, down: f64) -> StochasticMatrix {
    let mut rows = vec![vec![0.0; n]; n];
    for (i, row) in rows.iter_mut().enumerate() {
        if i + 1 < n {
            row[i + 1] = up;
        }
        if i > 0 {
            row[i - 1] = down;
        }
        row[i] = 1.0 - row.iter().sum::<f64>();
    }
    StochasticMatrix::new(rows).expect("fixture is stochastic")
}

/// Block star chain with hub weights `(0.3, 0.1, 0.25, 0.35)`, hub mass
/// parameter `0.6` and blocks of sizes 2, 3, 2; its big link is stochastic.
pub fn block_star() -> BlockStarChain {
    let qs = [
        StochasticMatrix::new(vec![vec![0.6, 0.4], vec![0.2, 0.8]]),
        StochasticMatrix::new(vec![vec![0.7, 0.3, 0.0], vec![0.15, 0.6, 0.25], vec![0.0, 0.25, 0.75]]),
        StochasticMatrix::new(vec![vec![0.5, 0.5], vec![0.5, 0.5]]),
    ]
    .map(|q| q.expect("fixture is stochastic"));
    make_block_star_chain(&[0.3, 0.1, 0.25, 0.35], 0.6, &qs).expect("fixture is a block star chain")
}
