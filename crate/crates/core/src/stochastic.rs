//! Discrete probability space `(Ω̂, μ̂)` and the `L²_μ̂` operations on it.

use crate::error::{Error, Result};
use crate::scalar::Real;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::{BufRead, Write};

/// Tolerances for the stochastic-space checks.
#[derive(Clone, Copy, Debug)]
pub struct StochasticTolerances {
    /// Accepted defect for orthonormal, zero-mean stochastic bases.
    pub orthonormal: f64,
    /// Relative pivot below which Gram-Schmidt reports rank loss.
    pub rank_pivot: f64,
    /// Accepted deviation of the weight sum from one.
    pub weight_sum: f64,
}

impl Default for StochasticTolerances {
    fn default() -> Self {
        Self {
            orthonormal: 1e-8,
            rank_pivot: 1e-12,
            weight_sum: 1e-12,
        }
    }
}

/// Function on the sample set: one value per sample.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomVector<T>(pub Vec<T>);

impl<T: Real> RandomVector<T> {
    pub fn constant(n: usize, v: T) -> Self {
        Self(vec![v; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }
}

/// Supported parameter distributions for Monte Carlo sampling.
#[derive(Clone, Debug, PartialEq)]
pub enum Distribution {
    /// Independent uniform components on the given intervals.
    Uniform(Vec<(f64, f64)>),
}

impl Distribution {
    pub fn from_name(name: &str, bounds: Vec<(f64, f64)>) -> Result<Self> {
        match name {
            "uniform" => Ok(Self::Uniform(bounds)),
            other => Err(Error::Unsupported(format!("distribution `{other}`"))),
        }
    }
}

/// Finite sample set with positive weights summing to one.
#[derive(Clone, Debug)]
pub struct SampleSpace<T> {
    dim: usize,
    samples: Vec<T>,
    weights: Vec<T>,
    pub tolerances: StochasticTolerances,
}

impl<T: Real> SampleSpace<T> {
    /// `samples` holds one parameter vector per sample.
    pub fn new(samples: Vec<Vec<T>>, weights: Vec<T>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidInput("sample space needs at least one sample".into()));
        }
        if samples.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                what: "sample weights",
                expected: samples.len(),
                found: weights.len(),
            });
        }
        let dim = samples[0].len();
        if let Some(s) = samples.iter().find(|s| s.len() != dim) {
            return Err(Error::DimensionMismatch {
                what: "sample parameter vector",
                expected: dim,
                found: s.len(),
            });
        }
        if weights.iter().any(|w| !(*w > T::zero()) || !w.is_finite()) {
            return Err(Error::InvalidInput("sample weights must be positive and finite".into()));
        }
        let tolerances = StochasticTolerances::default();
        let sum = weights.iter().fold(T::zero(), |a, w| a + *w);
        let tol = T::lit(tolerances.weight_sum).max(T::default_epsilon() * T::from_usize_lossy(weights.len()));
        if (sum - T::one()).abs() > tol {
            return Err(Error::InvalidInput(format!("sample weights sum to {sum}, not 1")));
        }
        if samples.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sample parameters".into()));
        }
        Ok(Self {
            dim,
            samples: samples.into_iter().flatten().collect(),
            weights,
            tolerances,
        })
    }

    /// Tensor grid of equispaced points with equal weights. Points along axis
    /// `d` are `a + j (b - a)/(N - 1)`; a single point sits at the midpoint.
    /// The last axis varies fastest.
    pub fn tensor_grid(intervals: &[(T, T)], points_per_axis: usize) -> Result<Self> {
        if points_per_axis == 0 || intervals.is_empty() {
            return Err(Error::InvalidInput("tensor grid needs points and axes".into()));
        }
        let axes: Vec<Vec<T>> = intervals
            .iter()
            .map(|&(a, b)| {
                if points_per_axis == 1 {
                    vec![(a + b) * T::lit(0.5)]
                } else {
                    let step = (b - a) / T::from_usize_lossy(points_per_axis - 1);
                    (0..points_per_axis).map(|j| a + step * T::from_usize_lossy(j)).collect()
                }
            })
            .collect();
        let total = points_per_axis
            .checked_pow(intervals.len() as u32)
            .ok_or_else(|| Error::InvalidInput("tensor grid too large".into()))?;
        let mut samples = Vec::with_capacity(total);
        for flat in 0..total {
            let mut rem = flat;
            let mut point = vec![T::zero(); intervals.len()];
            for d in (0..intervals.len()).rev() {
                point[d] = axes[d][rem % points_per_axis];
                rem /= points_per_axis;
            }
            samples.push(point);
        }
        let w = T::one() / T::from_usize_lossy(total);
        Self::new(samples, vec![w; total])
    }

    /// `n` independent draws with weights `1/n` from a seeded ChaCha8 stream.
    pub fn monte_carlo(dist: &Distribution, n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("Monte Carlo needs at least one sample".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let Distribution::Uniform(bounds) = dist;
        if bounds.is_empty() || bounds.iter().any(|(a, b)| !(a <= b)) {
            return Err(Error::InvalidInput("uniform bounds must satisfy a <= b".into()));
        }
        let samples = (0..n)
            .map(|_| {
                bounds
                    .iter()
                    .map(|&(a, b)| T::lit(a + (b - a) * rng.random::<f64>()))
                    .collect()
            })
            .collect();
        let w = T::one() / T::from_usize_lossy(n);
        Self::new(samples, vec![w; n])
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn sample(&self, i: usize) -> &[T] {
        &self.samples[i * self.dim..(i + 1) * self.dim]
    }

    /// Evaluates a function of the parameters on every sample.
    pub fn evaluate(&self, f: impl Fn(&[T]) -> T) -> RandomVector<T> {
        RandomVector((0..self.len()).map(|i| f(self.sample(i))).collect())
    }

    fn check_len(&self, v: &[T]) -> Result<()> {
        if v.len() != self.len() {
            return Err(Error::DimensionMismatch {
                what: "random vector",
                expected: self.len(),
                found: v.len(),
            });
        }
        Ok(())
    }

    /// `E_μ̂[z]`
    pub fn expectation(&self, z: &[T]) -> T {
        debug_assert_eq!(z.len(), self.len());
        z.iter().zip(&self.weights).fold(T::zero(), |a, (v, w)| a + *v * *w)
    }

    /// `E_μ̂[y z]`
    pub fn inner(&self, y: &[T], z: &[T]) -> T {
        debug_assert_eq!(y.len(), self.len());
        y.iter()
            .zip(z)
            .zip(&self.weights)
            .fold(T::zero(), |a, ((u, v), w)| a + *u * *v * *w)
    }

    /// `E_μ̂[x y z]`
    pub fn inner3(&self, x: &[T], y: &[T], z: &[T]) -> T {
        let mut acc = T::zero();
        for i in 0..self.len() {
            acc += self.weights[i] * x[i] * y[i] * z[i];
        }
        acc
    }

    pub fn norm(&self, z: &[T]) -> T {
        self.inner(z, z).max(T::zero()).sqrt()
    }

    /// Returns `(E[z], z - E[z])`.
    pub fn split_mean(&self, z: &[T]) -> Result<(T, RandomVector<T>)> {
        self.check_len(z)?;
        let m = self.expectation(z);
        Ok((m, RandomVector(z.iter().map(|v| *v - m).collect())))
    }

    /// Largest entry of `|E[Yᵢ Yⱼ] - δᵢⱼ|` and `|E[Yᵢ]|` over the columns of `y`.
    pub fn orthonormality_defect(&self, y: &DMatrix<T>) -> T {
        let mut worst = T::zero();
        for i in 0..y.ncols() {
            let yi = y.column(i);
            worst = worst.max(self.expectation(yi.as_slice()).abs());
            for j in 0..=i {
                let g = self.inner(yi.as_slice(), y.column(j).as_slice());
                let target = if i == j { T::one() } else { T::zero() };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }

    /// Fails unless the columns of `y` are zero-mean and orthonormal.
    pub fn check_basis(&self, y: &DMatrix<T>) -> Result<()> {
        if y.nrows() != self.len() {
            return Err(Error::DimensionMismatch {
                what: "stochastic basis rows",
                expected: self.len(),
                found: y.nrows(),
            });
        }
        let defect = self.orthonormality_defect(y);
        if !(defect <= T::lit(self.tolerances.orthonormal)) {
            return Err(Error::NonOrthonormal { defect: defect.as_f64() });
        }
        Ok(())
    }

    /// `P^⊥_Y z = z - E[z] - Σᵢ E[z Yᵢ] Yᵢ` for an orthonormal zero-mean basis `y`.
    pub fn project_complement(&self, z: &[T], y: &DMatrix<T>) -> Result<RandomVector<T>> {
        self.check_len(z)?;
        self.check_basis(y)?;
        let mut out = z.to_vec();
        self.project_complement_unchecked(&mut out, y);
        Ok(RandomVector(out))
    }

    /// In-place projection without validating `y`. Two sweeps keep the result
    /// orthogonal to rounding level.
    pub fn project_complement_unchecked(&self, z: &mut [T], y: &DMatrix<T>) {
        for _ in 0..2 {
            let m = self.expectation(z);
            z.iter_mut().for_each(|v| *v -= m);
            for i in 0..y.ncols() {
                let yi = y.column(i);
                let c = self.inner(z, yi.as_slice());
                for (v, b) in z.iter_mut().zip(yi.iter()) {
                    *v -= c * *b;
                }
            }
        }
    }

    /// Weighted modified Gram-Schmidt with one reorthogonalisation pass.
    ///
    /// Returns `(Q, T)` with `Ỹ = Q T`, `Q` orthonormal in `L²_μ̂` and `T` upper
    /// triangular. Zero-mean inputs give zero-mean outputs.
    pub fn orthonormalize(&self, y_tilde: &DMatrix<T>) -> Result<(DMatrix<T>, DMatrix<T>)> {
        if y_tilde.nrows() != self.len() {
            return Err(Error::DimensionMismatch {
                what: "stochastic modes",
                expected: self.len(),
                found: y_tilde.nrows(),
            });
        }
        let r = y_tilde.ncols();
        let mut q = y_tilde.clone();
        let mut t = DMatrix::zeros(r, r);
        let max_norm = (0..r).fold(T::zero(), |a, k| a.max(self.norm(y_tilde.column(k).as_slice())));
        let threshold = T::lit(self.tolerances.rank_pivot) * max_norm;
        let mut accepted: Vec<usize> = Vec::with_capacity(r);
        let mut deficient = false;
        for k in 0..r {
            let mut v: Vec<T> = q.column(k).iter().copied().collect();
            for _ in 0..2 {
                for &i in &accepted {
                    let c = self.inner(q.column(i).as_slice(), &v);
                    t[(i, k)] += c;
                    for (vj, qj) in v.iter_mut().zip(q.column(i).iter()) {
                        *vj -= c * *qj;
                    }
                }
            }
            let nrm = self.norm(&v);
            if !(nrm > threshold) || !nrm.is_finite() {
                deficient = true;
                continue;
            }
            t[(k, k)] = nrm;
            for (dst, src) in q.column_mut(k).iter_mut().zip(&v) {
                *dst = *src / nrm;
            }
            accepted.push(k);
        }
        if deficient {
            return Err(Error::RankLoss {
                rank: accepted.len(),
                requested: r,
            });
        }
        Ok((q, t))
    }

    /// Writes `N_C p` followed by one `weight ω₁ … ω_p` row per sample.
    pub fn write_table(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "{} {}", self.len(), self.dim)?;
        for i in 0..self.len() {
            write!(w, "{}", self.weights[i])?;
            for v in self.sample(i) {
                write!(w, " {v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_table(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty sample table".into()))??;
        let head: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad header token `{t}`"))))
            .collect::<Result<_>>()?;
        let [n, p] = head[..] else {
            return Err(Error::Parse("sample table header must be `N_C p`".into()));
        };
        let mut samples = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for _ in 0..n {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse("sample table truncated".into()))??;
            let vals: Vec<T> = line
                .split_whitespace()
                .map(|t| t.parse::<T>().map_err(|_| Error::Parse(format!("bad number `{t}`"))))
                .collect::<Result<_>>()?;
            if vals.len() != p + 1 {
                return Err(Error::Parse(format!("expected {} columns, found {}", p + 1, vals.len())));
            }
            weights.push(vals[0]);
            samples.push(vals[1..].to_vec());
        }
        Self::new(samples, weights)
    }
}
