#![allow(dead_code)]

use mwcons::matgraph::{MatrixWeightedNetwork, WeightMatrix};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vector(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> DVector<f64> {
    DVector::from_iterator(len, (0..len).map(|_| rng.random_range(-scale..scale)))
}

/// `M Mᵀ + I`, comfortably positive definite.
pub fn random_pd(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let m = DMatrix::from_iterator(d, d, (0..d * d).map(|_| rng.random_range(-1.0..1.0)));
    &m * m.transpose() + DMatrix::identity(d, d)
}

/// A connected, structurally balanced network with random signs and positive
/// definite weight magnitudes, together with the signs used to build it.
pub fn random_balanced(rng: &mut ChaCha8Rng, n: usize, d: usize) -> (MatrixWeightedNetwork, Vec<f64>) {
    let signs: Vec<f64> = (0..n).map(|i| if i == 0 || rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
    let mut g = MatrixWeightedNetwork::new(n, d);
    let add = |g: &mut MatrixWeightedNetwork, rng: &mut ChaCha8Rng, i: usize, j: usize| {
        let w = random_pd(rng, d) * (signs[i] * signs[j]);
        g.add_edge(i, j, WeightMatrix::new(w, 1e-9).unwrap()).unwrap();
    };
    for j in 1..n {
        let i = rng.random_range(0..j);
        add(&mut g, rng, i, j);
    }
    for i in 0..n {
        for j in i + 1..n {
            if g.weight(i, j).is_none() && rng.random_bool(0.3) {
                add(&mut g, rng, i, j);
            }
        }
    }
    (g, signs)
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration, independent of the library's eigensolver.
pub fn power_lambda_max(m: &DMatrix<f64>) -> f64 {
    let d = m.nrows();
    let mut v = DVector::from_iterator(d, (0..d).map(|k| 1.0 + 0.1 * k as f64));
    let mut lambda = 0.0;
    for _ in 0..2000 {
        let w = m * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = v.dot(&w) / v.dot(&v);
        v = w / norm;
        if (next - lambda).abs() <= 1e-15 * next.abs() {
            return next;
        }
        lambda = next;
    }
    lambda
}
