use crate::error::{Error, Result};
use crate::scalar::Real;
use nalgebra::DMatrix;

/// Compressed sparse row matrix with strictly increasing column indices per row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![T::one(); n],
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are summed in
    /// insertion order, so assembly is bitwise reproducible.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, T)]) -> Result<Self> {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        for &(r, c, _) in triplets {
            if r >= nrows || c >= ncols {
                return Err(Error::InvalidInput(format!(
                    "triplet ({r}, {c}) outside {nrows}x{ncols} matrix"
                )));
            }
        }
        order.sort_by_key(|&k| (triplets[k].0, triplets[k].1));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<T> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for k in order {
            let (r, c, v) = triplets[k];
            if last == Some((r, c)) {
                let end = values.len() - 1;
                values[end] += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn from_dense(dense: &DMatrix<T>) -> Self {
        let mut triplets = Vec::new();
        for i in 0..dense.nrows() {
            for j in 0..dense.ncols() {
                let v = dense[(i, j)];
                if v != T::zero() {
                    triplets.push((i, j, v));
                }
            }
        }
        Self::from_triplets(dense.nrows(), dense.ncols(), &triplets).expect("in-range triplets")
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[a..b], &self.values[a..b])
    }

    fn row_mut(&mut self, i: usize) -> (&[usize], &mut [T]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[a..b], &mut self.values[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => T::zero(),
        }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// `y = A x`
    pub fn mul_vec_into(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.ncols, "operand length");
        assert_eq!(y.len(), self.nrows, "result length");
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            let mut acc = T::zero();
            for (c, v) in cols.iter().zip(vals) {
                acc += *v * x[*c];
            }
            *yi = acc;
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `y = Aᵀ x`
    pub fn mul_vec_transpose(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.nrows, "operand length");
        let mut y = vec![T::zero(); self.ncols];
        for (i, xi) in x.iter().enumerate() {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                y[*c] += *v * *xi;
            }
        }
        y
    }

    /// Sparse times dense, column by column.
    pub fn mul_dense(&self, x: &DMatrix<T>) -> DMatrix<T> {
        assert_eq!(x.nrows(), self.ncols, "operand rows");
        let mut out = DMatrix::zeros(self.nrows, x.ncols());
        for k in 0..x.ncols() {
            let src = x.column(k);
            let mut dst = out.column_mut(k);
            self.mul_vec_into(src.as_slice(), dst.as_mut_slice());
        }
        out
    }

    /// `yᵀ A x`
    pub fn bilinear(&self, y: &[T], x: &[T]) -> T {
        let mut acc = T::zero();
        for (i, yi) in y.iter().enumerate() {
            let (cols, vals) = self.row(i);
            let mut row = T::zero();
            for (c, v) in cols.iter().zip(vals) {
                row += *v * x[*c];
            }
            acc += *yi * row;
        }
        acc
    }

    pub fn transpose(&self) -> Self {
        let mut triplets = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                triplets.push((*c, i, *v));
            }
        }
        Self::from_triplets(self.ncols, self.nrows, &triplets).expect("in-range triplets")
    }

    pub fn scale(&self, alpha: T) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= alpha;
        }
        out
    }

    /// `Σ αᵢ Aᵢ` over matrices of equal shape. The sparsity pattern is the union.
    pub fn linear_combination(terms: &[(T, &CsrMatrix<T>)]) -> Result<Self> {
        let Some((_, first)) = terms.first() else {
            return Err(Error::InvalidInput("empty linear combination".into()));
        };
        let (n, m) = (first.nrows, first.ncols);
        let mut triplets = Vec::new();
        for (alpha, a) in terms {
            if a.nrows != n || a.ncols != m {
                return Err(Error::DimensionMismatch {
                    what: "linear combination operand",
                    expected: n,
                    found: a.nrows,
                });
            }
            for i in 0..n {
                let (cols, vals) = a.row(i);
                for (c, v) in cols.iter().zip(vals) {
                    triplets.push((i, *c, *alpha * *v));
                }
            }
        }
        Self::from_triplets(n, m, &triplets)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        Self::linear_combination(&[(T::one(), self), (T::one(), other)])
    }

    /// Replaces constrained rows and columns by those of the identity.
    pub fn constrain_symmetric(&self, constrained: &[bool]) -> Self {
        let mut out = self.clone();
        for i in 0..out.nrows {
            let row_fixed = constrained[i];
            let (cols, vals) = out.row_mut(i);
            for (c, v) in cols.iter().zip(vals.iter_mut()) {
                if row_fixed || constrained[*c] {
                    *v = if *c == i { T::one() } else { T::zero() };
                }
            }
        }
        out
    }

    /// Principal submatrix on the given (sorted) index set.
    pub fn submatrix(&self, keep: &[usize]) -> Self {
        let mut map = vec![usize::MAX; self.ncols.max(self.nrows)];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let mut triplets = Vec::new();
        for (new_i, &i) in keep.iter().enumerate() {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                if map[*c] != usize::MAX {
                    triplets.push((new_i, map[*c], *v));
                }
            }
        }
        Self::from_triplets(keep.len(), keep.len(), &triplets).expect("in-range triplets")
    }

    pub fn to_dense(&self) -> DMatrix<T> {
        let mut d = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                d[(i, *c)] += *v;
            }
        }
        d
    }

    /// Lower and upper bandwidths.
    pub fn bandwidth(&self) -> (usize, usize) {
        let (mut kl, mut ku) = (0, 0);
        for i in 0..self.nrows {
            let (cols, _) = self.row(i);
            if let (Some(&lo), Some(&hi)) = (cols.first(), cols.last()) {
                kl = kl.max(i.saturating_sub(lo));
                ku = ku.max(hi.saturating_sub(i));
            }
        }
        (kl, ku)
    }

    /// Largest `|A_ij − A_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        let mut scale = T::zero();
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                scale = scale.max(v.abs());
                worst = worst.max((*v - self.get(*c, i)).abs());
            }
        }
        if scale > T::zero() {
            worst / scale
        } else {
            T::zero()
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
