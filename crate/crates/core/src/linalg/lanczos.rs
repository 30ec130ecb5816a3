use super::banded::BandedCholesky;
use super::csr::CsrMatrix;
use crate::error::{Error, Result};
use crate::scalar::{axpy, Real};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Largest eigenvalue of the pencil `K v = λ M v` for symmetric `K` and SPD `M`.
///
/// Lanczos in the `M` inner product with full reorthogonalisation. The returned
/// value is the top Ritz value plus its residual bound, so it errs on the high side.
pub fn max_generalized_eigenvalue<T: Real>(
    k: &CsrMatrix<T>,
    m: &CsrMatrix<T>,
    max_iter: usize,
    rel_tol: T,
) -> Result<T> {
    let n = k.nrows();
    if n == 0 {
        return Ok(T::zero());
    }
    let chol = BandedCholesky::factor(m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut q: Vec<T> = (0..n).map(|_| T::lit(rng.random::<f64>() - 0.5)).collect();
    let mq = m.mul_vec(&q);
    let nrm = crate::scalar::dot(&q, &mq).sqrt();
    q.iter_mut().for_each(|v| *v /= nrm);

    let steps = max_iter.min(n).max(1);
    let mut basis: Vec<Vec<T>> = Vec::with_capacity(steps);
    let mut mbasis: Vec<Vec<T>> = Vec::with_capacity(steps);
    let mut alpha: Vec<T> = Vec::new();
    let mut beta: Vec<T> = Vec::new();
    let mut estimate = T::zero();
    for it in 0..steps {
        let mq = m.mul_vec(&q);
        let kq = k.mul_vec(&q);
        let a = crate::scalar::dot(&q, &kq);
        let mut w = kq.clone();
        chol.solve_in_place(&mut w);
        basis.push(q.clone());
        mbasis.push(mq);
        alpha.push(a);
        // Two passes of classical Gram-Schmidt against all previous vectors.
        for _ in 0..2 {
            for (v, mv) in basis.iter().zip(&mbasis) {
                let c = crate::scalar::dot(mv, &w);
                axpy(-c, v, &mut w);
            }
        }
        let mw = m.mul_vec(&w);
        let b = crate::scalar::dot(&w, &mw).max(T::zero()).sqrt();

        let dim = alpha.len();
        let mut t = DMatrix::<T>::zeros(dim, dim);
        for i in 0..dim {
            t[(i, i)] = alpha[i];
            if i + 1 < dim {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let (top, theta) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .fold((0, T::lit(f64::NEG_INFINITY)), |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc });
        let residual = (b * eig.eigenvectors[(dim - 1, top)]).abs();
        estimate = theta + residual;
        let exhausted = b <= T::default_epsilon() * theta.abs().max(T::one()) || it + 1 == n;
        if residual <= rel_tol * theta.abs() || exhausted {
            return Ok(estimate);
        }
        beta.push(b);
        q = w.into_iter().map(|v| v / b).collect();
    }
    if steps < max_iter {
        return Ok(estimate);
    }
    Err(Error::NotConverged {
        what: "Lanczos eigenvalue estimate",
        iterations: steps,
    })
}
