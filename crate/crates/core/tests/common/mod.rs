#![allow(dead_code)]
use nalgebra::{DMatrix, DVector};
use pgnn_core::model::{Layer, NeuralNet};
use rand::Rng;

/// Dense tanh net with uniform weights in [−s, s].
pub fn random_net<R: Rng>(rng: &mut R, n_in: usize, hidden: &[usize], s: f64) -> NeuralNet {
    let mut layers = Vec::new();
    let mut prev = n_in;
    for &h in hidden.iter().chain(std::iter::once(&1)) {
        let w = DMatrix::from_fn(h, prev, |_, _| rng.random_range(-s..=s));
        let b = DVector::from_fn(h, |_, _| rng.random_range(-s..=s));
        layers.push(Layer { w, b });
        prev = h;
    }
    NeuralNet::from_layers(layers).unwrap()
}

pub fn random_vec<R: Rng>(rng: &mut R, n: usize, s: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-s..=s))
}

/// |a − b| ≤ rel·max(|a|, |b|) or |a − b| ≤ floor.
pub fn close(a: f64, b: f64, rel: f64, floor: f64) -> bool {
    let d = (a - b).abs();
    d <= floor || d <= rel * a.abs().max(b.abs())
}

/// Companion matrix with first row `c` (empty for n = 0).
pub fn companion(c: &[f64]) -> DMatrix<f64> {
    let n = c.len();
    let mut a = DMatrix::zeros(n, n);
    for j in 0..n {
        a[(0, j)] = c[j];
    }
    for i in 1..n {
        a[(i, i - 1)] = 1.0;
    }
    a
}

/// Monic polynomial coefficients (descending powers) from real roots.
pub fn poly_from_real_roots(roots: &[f64]) -> Vec<f64> {
    let mut p = vec![1.0];
    for r in roots {
        let mut q = vec![0.0; p.len() + 1];
        for (i, c) in p.iter().enumerate() {
            q[i] += c;
            q[i + 1] -= r * c;
        }
        p = q;
    }
    p
}

/// Five-point central differences of `f` at `x`.
pub fn fd5<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut p = x.to_vec();
    for i in 0..x.len() {
        let x0 = p[i];
        let mut at = |d: f64| {
            p[i] = x0 + d;
            let v = f(&p);
            p[i] = x0;
            v
        };
        let (a, b, c, d) = (at(2.0 * h), at(h), at(-h), at(-2.0 * h));
        out.push((-a + 8.0 * b - 8.0 * c + d) / (12.0 * h));
    }
    out
}
