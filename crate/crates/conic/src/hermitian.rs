//! Complex Hermitian helpers shared by the solvers and their callers.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Eigen-decomposition of a Hermitian matrix, eigenvalues sorted descending.
///
/// Ties keep the order produced by the underlying decomposition, so the
/// choice of eigenvector for a repeated eigenvalue is deterministic.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl HermitianEigen {
    pub fn new(m: &CMat) -> Self {
        let h = hermitian_part(m);
        let eig = h.symmetric_eigen();
        let n = eig.eigenvalues.len();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| {
            eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
        });
        let values = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut vectors = CMat::zeros(n, n);
        for (dst, &src) in idx.iter().enumerate() {
            let mut v = eig.eigenvectors.column(src).into_owned();
            normalize_phase(&mut v);
            vectors.set_column(dst, &v);
        }
        Self { values, vectors }
    }

    pub fn max_value(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn min_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn principal_vector(&self) -> CVec {
        self.vectors.column(0).into_owned()
    }
}

/// Largest eigenvalue and its unit eigenvector.
pub fn principal(m: &CMat) -> (f64, CVec) {
    let eig = HermitianEigen::new(m);
    (eig.max_value(), eig.principal_vector())
}

/// Rotates `v` so that its first non-negligible entry is real and positive.
pub fn normalize_phase(v: &mut CVec) {
    let scale = v.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return;
    }
    if let Some(pivot) = v.iter().find(|c| c.norm() > 1e-8 * scale).copied() {
        let rot = pivot.conj() / pivot.norm();
        for c in v.iter_mut() {
            *c *= rot;
        }
    }
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

pub fn is_hermitian(m: &CMat, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let n = m.nrows();
    let scale = m.iter().map(|c| c.norm()).fold(1.0, f64::max);
    for i in 0..n {
        for j in i..n {
            if (m[(i, j)] - m[(j, i)].conj()).norm() > tol * scale {
                return false;
            }
        }
    }
    true
}

pub fn outer(v: &CVec) -> CMat {
    v * v.adjoint()
}

/// `Re tr(A B)`; equals the trace inner product for Hermitian arguments.
pub fn trace_product(a: &CMat, b: &CMat) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..n {
            acc += (a[(i, k)] * b[(k, i)]).re;
        }
    }
    acc
}

/// `Re(vᴴ M v)`.
pub fn quad_form(m: &CMat, v: &CVec) -> f64 {
    v.dotc(&(m * v)).re
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Real symmetric embedding `[Re -Im; Im Re]` of a Hermitian matrix.
pub fn embed(m: &CMat) -> DMatrix<f64> {
    let n = m.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let c = m[(i, j)];
            out[(i, j)] = c.re;
            out[(i + n, j + n)] = c.re;
            out[(i, j + n)] = -c.im;
            out[(i + n, j)] = c.im;
        }
    }
    out
}

/// Inverse of [`embed`]; averages the two copies of each block.
pub fn unembed(x: &DMatrix<f64>) -> CMat {
    let n = x.nrows() / 2;
    let mut out = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let re = 0.5 * (x[(i, j)] + x[(i + n, j + n)]);
            let im = 0.5 * (x[(i + n, j)] - x[(i, j + n)]);
            out[(i, j)] = Complex64::new(re, im);
        }
    }
    hermitian_part(&out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn embedding_preserves_trace_products() {
        let a = CMat::from_row_slice(2, 2, &[c(2.0, 0.0), c(1.0, -1.0), c(1.0, 1.0), c(3.0, 0.0)]);
        let b = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.5, 0.5), c(0.5, -0.5), c(4.0, 0.0)]);
        let real = embed(&a).component_mul(&embed(&b)).sum();
        assert!((0.5 * real - trace_product(&a, &b)).abs() < 1e-12);
        let back = unembed(&embed(&a));
        assert!((back - a).iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn eigen_sorted_descending_with_unit_vectors() {
        let m = CMat::from_row_slice(2, 2, &[c(5.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)]);
        let eig = HermitianEigen::new(&m);
        assert!((eig.values[0] - 5.0).abs() < 1e-12);
        assert!((eig.values[1] - 2.0).abs() < 1e-12);
        let v = eig.principal_vector();
        assert!((v[0] - c(1.0, 0.0)).norm() < 1e-12);
        assert!(v[1].norm() < 1e-12);
    }

    #[test]
    fn complex_eigenvector_satisfies_definition() {
        let m = CMat::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)]);
        let (lam, v) = principal(&m);
        assert!((lam - 3.0).abs() < 1e-12);
        let resid = &m * &v - &v * c(lam, 0.0);
        assert!(resid.norm() < 1e-12);
    }
}
