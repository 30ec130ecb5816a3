use super::csr::CsrMatrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// LU factorisation with partial pivoting of a banded matrix.
///
/// Row `i` stores columns `i - kl ..= i + kl + ku`, which leaves room for the
/// fill-in produced by row interchanges.
#[derive(Clone, Debug)]
pub struct BandedLu<T> {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<T>,
    pivots: Vec<usize>,
}

impl<T: Real> BandedLu<T> {
    pub fn factor(a: &CsrMatrix<T>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch {
                what: "square matrix",
                expected: a.nrows(),
                found: a.ncols(),
            });
        }
        if !a.is_finite() {
            return Err(Error::NonFinite("matrix to factorise".into()));
        }
        let n = a.nrows();
        let (kl, ku) = a.bandwidth();
        let width = 2 * kl + ku + 1;
        let mut lu = Self {
            n,
            kl,
            ku,
            width,
            data: vec![T::zero(); n * width],
            pivots: vec![0; n],
        };
        let mut scale = T::zero();
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (c, v) in cols.iter().zip(vals) {
                *lu.at_mut(i, *c) = *v;
                scale = scale.max(v.abs());
            }
        }
        let tiny = scale * T::default_epsilon() * T::lit(1e-6);
        let upper = kl + ku;
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = lu.at(k, k).abs();
            for i in k + 1..=last_row {
                let v = lu.at(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= tiny {
                return Err(Error::Singular { row: k });
            }
            lu.pivots[k] = p;
            let last_col = (k + upper).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let tmp = lu.at(k, j);
                    *lu.at_mut(k, j) = lu.at(p, j);
                    *lu.at_mut(p, j) = tmp;
                }
            }
            let pivot = lu.at(k, k);
            for i in k + 1..=last_row {
                let l = lu.at(i, k) / pivot;
                *lu.at_mut(i, k) = l;
                if l != T::zero() {
                    for j in k + 1..=last_col {
                        let u = lu.at(k, j);
                        *lu.at_mut(i, j) -= l * u;
                    }
                }
            }
        }
        Ok(lu)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku);
        i * self.width + (j + self.kl - i)
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> T {
        self.data[self.idx(i, j)]
    }

    #[inline]
    fn at_mut(&mut self, i: usize, j: usize) -> &mut T {
        let k = self.idx(i, j);
        &mut self.data[k]
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [T]) {
        assert_eq!(b.len(), self.n, "right-hand side length");
        let n = self.n;
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != T::zero() {
                for i in k + 1..=(k + self.kl).min(n.saturating_sub(1)) {
                    b[i] -= self.at(i, k) * bk;
                }
            }
        }
        let upper = self.kl + self.ku;
        for i in (0..n).rev() {
            let mut acc = b[i];
            for j in i + 1..=(i + upper).min(n - 1) {
                acc -= self.at(i, j) * b[j];
            }
            b[i] = acc / self.at(i, i);
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Cholesky factor `A = L Lᵀ` of a symmetric positive definite banded matrix.
#[derive(Clone, Debug)]
pub struct BandedCholesky<T> {
    n: usize,
    kd: usize,
    // Row i holds L[i, i-kd ..= i].
    data: Vec<T>,
}

impl<T: Real> BandedCholesky<T> {
    pub fn factor(a: &CsrMatrix<T>) -> Result<Self> {
        let n = a.nrows();
        let (kl, ku) = a.bandwidth();
        let kd = kl.max(ku);
        let w = kd + 1;
        let mut data = vec![T::zero(); n * w];
        let at = |i: usize, j: usize| i * w + (j + kd - i);
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (c, v) in cols.iter().zip(vals) {
                if *c <= i {
                    data[at(i, *c)] = *v;
                }
            }
        }
        for j in 0..n {
            let lo = j.saturating_sub(kd);
            let mut d = data[at(j, j)];
            for k in lo..j {
                let l = data[at(j, k)];
                d -= l * l;
            }
            if !(d > T::zero()) {
                return Err(Error::NotPositiveDefinite { row: j });
            }
            let d = d.sqrt();
            data[at(j, j)] = d;
            for i in j + 1..=(j + kd).min(n.saturating_sub(1)) {
                let lo_i = i.saturating_sub(kd).max(lo);
                let mut s = data[at(i, j)];
                for k in lo_i..j {
                    s -= data[at(i, k)] * data[at(j, k)];
                }
                data[at(i, j)] = s / d;
            }
        }
        Ok(Self { n, kd, data })
    }

    #[inline]
    fn l(&self, i: usize, j: usize) -> T {
        self.data[i * (self.kd + 1) + (j + self.kd - i)]
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `Lᵀ x`
    pub fn mul_lt(&self, x: &[T]) -> Vec<T> {
        let n = self.n;
        let mut y = vec![T::zero(); n];
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = T::zero();
            for j in i..=(i + self.kd).min(n - 1) {
                acc += self.l(j, i) * x[j];
            }
            *yi = acc;
        }
        y
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [T]) {
        let n = self.n;
        for i in 0..n {
            let mut acc = b[i];
            for k in i.saturating_sub(self.kd)..i {
                acc -= self.l(i, k) * b[k];
            }
            b[i] = acc / self.l(i, i);
        }
        for i in (0..n).rev() {
            let mut acc = b[i];
            for k in i + 1..=(i + self.kd).min(n - 1) {
                acc -= self.l(k, i) * b[k];
            }
            b[i] = acc / self.l(i, i);
        }
    }
}
