//! Dense linear-algebra helpers shared by the quadratic (`p = 2`) paths.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Weighted Laplacian `sum_k w_k (e_a - e_b)(e_a - e_b)^T`.
pub fn laplacian(n: usize, pairs: impl IntoIterator<Item = (usize, usize, f64)>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for (a, b, w) in pairs {
        m[(a, a)] += w;
        m[(b, b)] += w;
        m[(a, b)] -= w;
        m[(b, a)] -= w;
    }
    m
}

/// Basis of the complement of constants: columns `e_i - e_{n-1}`.
pub fn constant_complement_basis(n: usize) -> DMatrix<f64> {
    let mut q = DMatrix::zeros(n, n.saturating_sub(1));
    for i in 0..n.saturating_sub(1) {
        q[(i, i)] = 1.0;
        q[(n - 1, i)] = -1.0;
    }
    q
}

/// Eigenpairs of the pencil `A x = lambda B x` with `B` positive definite.
/// Eigenvalues ascend; eigenvectors are `B`-orthonormal.
pub fn generalized_eigen(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let chol = Cholesky::new(b.clone())
        .ok_or_else(|| Error::Numerical("pencil matrix is not positive definite".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    let mut c = &linv * a * linv.transpose();
    c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let back = linv.transpose();
    let mut vectors = DMatrix::zeros(a.nrows(), order.len());
    for (k, &i) in order.iter().enumerate() {
        let v = &back * eig.eigenvectors.column(i);
        vectors.set_column(k, &v);
    }
    Ok((values, vectors))
}

/// Generalized eigenpairs of two symmetric forms restricted to the complement
/// of constants. Returned vectors live in the original coordinates.
pub fn pencil_on_constant_complement(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let q = constant_complement_basis(a.nrows());
    let ar = q.transpose() * a * &q;
    let br = q.transpose() * b * &q;
    let (values, vectors) = generalized_eigen(&ar, &br)?;
    Ok((values, q * vectors))
}

/// Solves `B x = rhs` for a Laplacian-like `B` whose kernel is exactly the
/// constants; `rhs` must sum to zero. The returned `x` sums to zero.
pub fn solve_mean_zero(b: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let n = b.nrows();
    let shift = DMatrix::from_element(n, n, 1.0 / n as f64);
    let chol = Cholesky::new(b + shift)
        .ok_or_else(|| Error::Numerical("form is not definite off the constants".into()))?;
    Ok(chol.solve(rhs))
}

/// Cholesky with a growing diagonal shift for nearly singular Hessians.
pub fn robust_cholesky(mut h: DMatrix<f64>) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    let n = h.nrows();
    let scale = (0..n)
        .map(|i| h[(i, i)].abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut shift = 0.0;
    for _ in 0..40 {
        if let Some(c) = Cholesky::new(h.clone()) {
            return Ok(c);
        }
        let next = if shift == 0.0 {
            1e-14 * scale
        } else {
            shift * 10.0
        };
        for i in 0..n {
            h[(i, i)] += next - shift;
        }
        shift = next;
    }
    Err(Error::Numerical("Hessian could not be factorized".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_laplacian_spectrum() {
        let l = laplacian(3, [(0, 1, 1.0), (1, 2, 1.0)]);
        let (vals, vecs) = pencil_on_constant_complement(&l, &DMatrix::identity(3, 3)).unwrap();
        // Path Laplacian spectrum is {0, 1, 3}; the restriction drops the 0.
        assert!((vals[0] - 1.0).abs() < 1e-12 && (vals[1] - 3.0).abs() < 1e-12);
        for (k, &v) in vals.iter().enumerate() {
            let x = vecs.column(k);
            let rq = (x.transpose() * &l * x)[0] / (x.transpose() * x)[0];
            assert!((rq - v).abs() < 1e-12);
        }
    }

    #[test]
    fn mean_zero_solve() {
        let l = laplacian(3, [(0, 1, 1.0), (1, 2, 1.0)]);
        let rhs = DVector::from_vec(vec![-0.5, 0.0, 0.5]);
        let x = solve_mean_zero(&l, &rhs).unwrap();
        assert!((x.sum()).abs() < 1e-14);
        assert!(((&l * &x) - rhs).amax() < 1e-14);
        assert!((x[0] + 0.5).abs() < 1e-14 && x[1].abs() < 1e-14);
    }
}
