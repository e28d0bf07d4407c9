use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::matrix::{ProbabilityVector, StochasticMatrix};

/// A simulated trajectory and the seed that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSample {
    pub states: Vec<usize>,
    pub seed: u64,
}

impl PathSample {
    /// First index at which the path sits in `target`.
    pub fn hitting_time(&self, target: usize) -> Option<usize> {
        self.states.iter().position(|&s| s == target)
    }
}

/// Per-row categorical samplers for repeated path simulation.
#[derive(Debug, Clone)]
pub struct PathSampler {
    initial: WeightedIndex<f64>,
    rows: Vec<WeightedIndex<f64>>,
}

impl PathSampler {
    pub fn new(pi0: &ProbabilityVector, p: &StochasticMatrix) -> Self {
        let initial = WeightedIndex::new(pi0.as_slice().iter().copied()).expect("initial law has positive mass");
        let rows = (0..p.len())
            .map(|i| WeightedIndex::new(p.row(i)).expect("stochastic rows have positive mass"))
            .collect();
        PathSampler { initial, rows }
    }

    /// `length` transitions after the initial draw, so `length + 1` states.
    pub fn sample<R: Rng + ?Sized>(&self, length: usize, rng: &mut R) -> Vec<usize> {
        let mut states = Vec::with_capacity(length + 1);
        let mut x = self.initial.sample(rng);
        states.push(x);
        for _ in 0..length {
            x = self.rows[x].sample(rng);
            states.push(x);
        }
        states
    }

    /// Like [`PathSampler::sample`] but stops early once `stop` is entered.
    pub fn sample_until<R: Rng + ?Sized>(&self, max_length: usize, stop: usize, rng: &mut R) -> Vec<usize> {
        let mut x = self.initial.sample(rng);
        let mut states = vec![x];
        while x != stop && states.len() <= max_length {
            x = self.rows[x].sample(rng);
            states.push(x);
        }
        states
    }
}

/// Simulates `length` steps of `(pi0, P)` with a ChaCha8 stream seeded by `seed`.
pub fn sample_path(pi0: &ProbabilityVector, p: &StochasticMatrix, length: usize, seed: u64) -> PathSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let states = PathSampler::new(pi0, p).sample(length, &mut rng);
    PathSample { states, seed }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_length_draws_initial_state() {
        let p = StochasticMatrix::new(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let path = sample_path(&ProbabilityVector::point_mass(2, 1), &p, 0, 7);
        assert_eq!(path.states, vec![1]);
    }

    #[test]
    fn permutation_orbit() {
        let p = StochasticMatrix::new(vec![
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
        ])
        .unwrap();
        let path = sample_path(&ProbabilityVector::point_mass(3, 0), &p, 6, 1);
        assert_eq!(path.states, vec![0, 1, 2, 0, 1, 2, 0]);
    }

    #[test]
    fn reproducible_given_seed() {
        let p = StochasticMatrix::new(vec![vec![0.7, 0.3], vec![0.2, 0.8]]).unwrap();
        let pi0 = ProbabilityVector::uniform(2);
        assert_eq!(sample_path(&pi0, &p, 50, 9), sample_path(&pi0, &p, 50, 9));
    }

    #[test]
    fn one_step_frequency() {
        let p = StochasticMatrix::new(vec![vec![0.7, 0.3], vec![0.2, 0.8]]).unwrap();
        let path = sample_path(&ProbabilityVector::point_mass(2, 0), &p, 100_000, 42);
        let (mut from0, mut to1) = (0usize, 0usize);
        for w in path.states.windows(2) {
            if w[0] == 0 {
                from0 += 1;
                to1 += (w[1] == 1) as usize;
            }
        }
        let freq = to1 as f64 / from0 as f64;
        let se = (0.3 * 0.7 / from0 as f64).sqrt();
        assert!((freq - 0.3).abs() <= 3.0 * se, "freq {freq}, se {se}");
        for w in path.states.windows(2) {
            assert!(p.get(w[0], w[1]) > 0.0);
        }
    }
}
