//! Small dense helpers shared across modules.
use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

/// Least squares `min ‖A x − b‖²` via SVD on column-equilibrated `A`.
/// Returns the solution and the condition number of the scaled matrix.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let (m, n) = a.shape();
    if m < n {
        return Err(Error::RankDeficient { rank: m, cols: n });
    }
    let scale = DVector::from_fn(n, |j, _| {
        let s = a.column(j).norm();
        if s > 0.0 {
            1.0 / s
        } else {
            1.0
        }
    });
    let mut a_s = a.clone();
    for j in 0..n {
        a_s.column_mut(j).scale_mut(scale[j]);
    }
    let svd = a_s.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let tol = smax * (m.max(n) as f64) * f64::EPSILON;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    if rank < n || smax == 0.0 {
        return Err(Error::RankDeficient { rank, cols: n });
    }
    let cond = smax / smin;
    let x = svd.solve(b, tol).map_err(|e| Error::Invalid(e.to_string()))?;
    Ok((x.component_mul(&scale), cond))
}

/// JᵀJ. Goes through an explicit transpose so the product hits the blocked
/// GEMM kernel, which is much faster than `tr_mul` for tall matrices.
pub fn gram(j: &DMatrix<f64>) -> DMatrix<f64> {
    let jt = j.transpose();
    let mut m = &jt * j;
    // exact symmetry
    for c in 0..m.ncols() {
        for r in 0..c {
            m[(c, r)] = m[(r, c)];
        }
    }
    m
}

/// Condition number of a symmetric PSD matrix after Jacobi (diagonal)
/// equilibration.
pub fn equilibrated_cond(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let d = DVector::from_fn(n, |i, _| {
        let v = m[(i, i)];
        if v > 0.0 {
            1.0 / v.sqrt()
        } else {
            1.0
        }
    });
    let s = DMatrix::from_fn(n, n, |i, j| d[i] * m[(i, j)] * d[j]);
    let ev = s.symmetric_eigenvalues();
    let max = ev.iter().cloned().fold(f64::MIN, f64::max);
    let min = ev.iter().cloned().fold(f64::MAX, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Eigenvalues of a real square matrix.
pub fn eigenvalues(a: &DMatrix<f64>) -> Vec<Complex<f64>> {
    if a.nrows() == 0 {
        return vec![];
    }
    a.complex_eigenvalues().iter().cloned().collect()
}

pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    eigenvalues(a).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Roots of `c[0] x^n + c[1] x^{n-1} + … + c[n]` (leading coefficient first).
pub fn poly_roots(c: &[f64]) -> Vec<Complex<f64>> {
    // strip leading zeros
    let first = c.iter().position(|v| *v != 0.0);
    let Some(first) = first else { return vec![] };
    let c = &c[first..];
    let n = c.len() - 1;
    if n == 0 {
        return vec![];
    }
    let mut comp = DMatrix::zeros(n, n);
    for j in 0..n {
        comp[(0, j)] = -c[j + 1] / c[0];
    }
    for i in 1..n {
        comp[(i, i - 1)] = 1.0;
    }
    eigenvalues(&comp)
}

/// Monic polynomial (leading coefficient first) with the given roots.
/// Complex roots are assumed to come in conjugate pairs; the imaginary
/// residue is dropped.
pub fn poly_from_roots(roots: &[Complex<f64>]) -> Vec<f64> {
    let mut p = vec![Complex::new(1.0, 0.0)];
    for r in roots {
        let mut q = vec![Complex::new(0.0, 0.0); p.len() + 1];
        for (i, c) in p.iter().enumerate() {
            q[i] += c;
            q[i + 1] -= c * r;
        }
        p = q;
    }
    p.into_iter().map(|z| z.re).collect()
}

pub fn conv(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return vec![];
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Evaluate `Σ c[i] z^{-i}` at complex `z`.
pub fn eval_poly_qinv(c: &[f64], z: Complex<f64>) -> Complex<f64> {
    let zi = z.inv();
    let mut acc = Complex::new(0.0, 0.0);
    let mut p = Complex::new(1.0, 0.0);
    for v in c {
        acc += p * *v;
        p *= zi;
    }
    acc
}

/// Kronecker product.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    DMatrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

pub fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}
