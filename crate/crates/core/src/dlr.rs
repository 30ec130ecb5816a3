//! Low-rank representation `u(ω) = U₀ + Σₖ Uₖ Yₖ(ω)`.

use crate::error::{Error, Result};
use crate::linalg::{BandedCholesky, CsrMatrix};
use crate::mesh::Mesh;
use crate::scalar::Real;
use crate::stochastic::SampleSpace;
use nalgebra::{DMatrix, DVector, SVD};
use std::io::{BufRead, Write};

/// Dynamical low-rank state at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct DlrState<T: Real> {
    /// Mean mode, carries the boundary data.
    pub u0: DVector<T>,
    /// Deterministic modes as columns (`N_h × R`).
    pub u: DMatrix<T>,
    /// Stochastic modes as columns (`N_C × R`), zero-mean and orthonormal.
    pub y: DMatrix<T>,
    pub t: T,
}

/// How many modes to keep when compressing snapshots.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Truncation {
    Rank(usize),
    /// Smallest rank whose relative tail `√(Σ_{k>R} σ²/Σ σ²)` is at most this value.
    Tolerance(f64),
}

/// Spectrum information returned with a snapshot compression.
#[derive(Clone, Debug)]
pub struct SnapshotInfo<T> {
    pub singular_values: Vec<T>,
    pub rank: usize,
    /// Relative truncation error in the mean-square sense.
    pub relative_tail: T,
}

impl<T: Real> DlrState<T> {
    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    pub fn ndofs(&self) -> usize {
        self.u0.len()
    }

    pub fn n_samples(&self) -> usize {
        self.y.nrows()
    }

    /// Checks shapes, the stochastic basis and homogeneous boundary values of the modes.
    pub fn validate(&self, samples: &SampleSpace<T>, mesh: &Mesh<T>) -> Result<()> {
        if self.u0.len() != mesh.n_vertices() || self.u.nrows() != mesh.n_vertices() {
            return Err(Error::DimensionMismatch {
                what: "deterministic modes",
                expected: mesh.n_vertices(),
                found: self.u.nrows(),
            });
        }
        if self.y.ncols() != self.u.ncols() {
            return Err(Error::DimensionMismatch {
                what: "stochastic mode count",
                expected: self.u.ncols(),
                found: self.y.ncols(),
            });
        }
        samples.check_basis(&self.y)?;
        let scale = self.u.iter().fold(T::zero(), |a, v| a.max(v.abs())).max(T::one());
        for v in mesh.boundary_vertices() {
            for k in 0..self.rank() {
                if self.u[(v, k)].abs() > T::lit(1e-10) * scale {
                    return Err(Error::InvalidInput(format!(
                        "mode {k} does not vanish at boundary vertex {v}"
                    )));
                }
            }
        }
        if self.u0.iter().chain(self.u.iter()).chain(self.y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("low-rank state".into()));
        }
        Ok(())
    }

    /// Builds a state from arbitrary modes. Mode means are moved into `U₀` and the
    /// stochastic modes are orthonormalised, so the represented field is unchanged.
    pub fn init_from_modes(
        u0: DVector<T>,
        u: DMatrix<T>,
        y: DMatrix<T>,
        samples: &SampleSpace<T>,
        mesh: &Mesh<T>,
    ) -> Result<Self> {
        if u.ncols() != y.ncols() {
            return Err(Error::DimensionMismatch {
                what: "stochastic mode count",
                expected: u.ncols(),
                found: y.ncols(),
            });
        }
        if y.nrows() != samples.len() {
            return Err(Error::DimensionMismatch {
                what: "stochastic mode length",
                expected: samples.len(),
                found: y.nrows(),
            });
        }
        let mut u0 = u0;
        let mut y = y;
        for k in 0..y.ncols() {
            let mean = samples.expectation(y.column(k).as_slice());
            u0.axpy(mean, &u.column(k), T::one());
            y.column_mut(k).iter_mut().for_each(|v| *v -= mean);
        }
        let (q, t) = samples.orthonormalize(&y)?;
        let state = Self {
            u0,
            u: &u * t.transpose(),
            y: q,
            t: T::zero(),
        };
        state.validate(samples, mesh)?;
        Ok(state)
    }

    /// Compresses snapshots (columns = samples) by a mass-weighted SVD.
    pub fn init_from_snapshot(
        snapshots: &DMatrix<T>,
        mass: &CsrMatrix<T>,
        samples: &SampleSpace<T>,
        truncation: Truncation,
    ) -> Result<(Self, SnapshotInfo<T>)> {
        let (nh, nc) = (snapshots.nrows(), snapshots.ncols());
        if nc != samples.len() || mass.nrows() != nh {
            return Err(Error::DimensionMismatch {
                what: "snapshot matrix",
                expected: samples.len(),
                found: nc,
            });
        }
        let w = samples.weights();
        let mut u0 = DVector::zeros(nh);
        for i in 0..nc {
            u0.axpy(w[i], &snapshots.column(i), T::one());
        }
        let sqrt_w: Vec<T> = w.iter().map(|v| v.sqrt()).collect();
        let mut xc = snapshots.clone();
        for i in 0..nc {
            let mut col = xc.column_mut(i);
            col -= &u0;
        }
        let chol = BandedCholesky::factor(mass)?;
        let mut b = DMatrix::zeros(nh, nc);
        for i in 0..nc {
            let lt = chol.mul_lt(xc.column(i).as_slice());
            for (r, v) in lt.into_iter().enumerate() {
                b[(r, i)] = v * sqrt_w[i];
            }
        }
        let svd = SVD::new(b, false, true);
        let vt = svd.v_t.ok_or(Error::NotConverged {
            what: "snapshot SVD",
            iterations: 0,
        })?;
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|a, b| {
            svd.singular_values[*b]
                .partial_cmp(&svd.singular_values[*a])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let sigma: Vec<T> = order.iter().map(|&k| svd.singular_values[k]).collect();
        let total: T = sigma.iter().fold(T::zero(), |a, s| a + *s * *s);
        let smax = sigma.first().copied().unwrap_or_else(T::zero);
        let numerical = sigma
            .iter()
            .take(nc.saturating_sub(1))
            .take_while(|s| **s > T::lit(1e-13) * smax && **s > T::zero())
            .count();
        let tail_from = |r: usize| -> T {
            if total == T::zero() {
                return T::zero();
            }
            let tail = sigma[r.min(sigma.len())..].iter().fold(T::zero(), |a, s| a + *s * *s);
            (tail / total).sqrt()
        };
        let rank = match truncation {
            Truncation::Rank(r) => r.min(numerical),
            Truncation::Tolerance(tol) => {
                let tol = T::lit(tol);
                (0..=numerical).find(|&r| tail_from(r) <= tol).unwrap_or(numerical)
            }
        };
        let mut y = DMatrix::zeros(nc, rank);
        for k in 0..rank {
            let row = vt.row(order[k]);
            for i in 0..nc {
                y[(i, k)] = row[i] / sqrt_w[i];
            }
        }
        // U_k = X_c diag(m) Y_k
        let mut wy = y.clone();
        for i in 0..nc {
            for k in 0..rank {
                wy[(i, k)] *= w[i];
            }
        }
        let u = &xc * wy;
        // Small singular values leave rounding-level means in Y; move them into U₀.
        for k in 0..rank {
            let mean = samples.expectation(y.column(k).as_slice());
            u0.axpy(mean, &u.column(k), T::one());
            y.column_mut(k).iter_mut().for_each(|v| *v -= mean);
        }
        // One Gram-Schmidt sweep removes the rounding drift of the SVD basis.
        let (q, t) = samples.orthonormalize(&y)?;
        let state = Self {
            u0,
            u: u * t.transpose(),
            y: q,
            t: T::zero(),
        };
        let info = SnapshotInfo {
            relative_tail: tail_from(rank),
            singular_values: sigma,
            rank,
        };
        Ok((state, info))
    }

    /// Field of sample `i`.
    pub fn realization(&self, i: usize) -> DVector<T> {
        let mut out = self.u0.clone();
        for k in 0..self.rank() {
            out.axpy(self.y[(i, k)], &self.u.column(k), T::one());
        }
        out
    }

    /// All sample fields as columns.
    pub fn realizations(&self) -> DMatrix<T> {
        let mut out = &self.u * self.y.transpose();
        for mut col in out.column_iter_mut() {
            col += &self.u0;
        }
        out
    }

    /// `E‖u‖²` in the norm induced by `m`, using orthonormality of `Y`.
    pub fn norm_sq(&self, m: &CsrMatrix<T>) -> T {
        let mut acc = m.bilinear(self.u0.as_slice(), self.u0.as_slice());
        for k in 0..self.rank() {
            let c = self.u.column(k);
            acc += m.bilinear(c.as_slice(), c.as_slice());
        }
        acc
    }

    pub fn write_checkpoint(&self, mesh: &Mesh<T>, w: &mut impl Write) -> Result<()> {
        writeln!(
            w,
            "dlr {} {} {} {} {}",
            self.t,
            self.rank(),
            mesh.n_per_side(),
            self.ndofs(),
            self.n_samples()
        )?;
        write_row(w, self.u0.iter())?;
        for k in 0..self.rank() {
            write_row(w, self.u.column(k).iter())?;
        }
        for k in 0..self.rank() {
            write_row(w, self.y.column(k).iter())?;
        }
        Ok(())
    }

    pub fn read_checkpoint(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let header = next_line(&mut lines)?;
        let toks: Vec<&str> = header.split_whitespace().collect();
        if toks.len() != 6 || toks[0] != "dlr" {
            return Err(Error::Parse("checkpoint header must be `dlr t R n N_h N_C`".into()));
        }
        let t = parse_tok::<T>(toks[1])?;
        let rank = parse_tok::<usize>(toks[2])?;
        let nh = parse_tok::<usize>(toks[4])?;
        let nc = parse_tok::<usize>(toks[5])?;
        let u0 = DVector::from_vec(parse_row(&next_line(&mut lines)?, nh)?);
        let mut u = DMatrix::zeros(nh, rank);
        for k in 0..rank {
            u.set_column(k, &DVector::from_vec(parse_row(&next_line(&mut lines)?, nh)?));
        }
        let mut y = DMatrix::zeros(nc, rank);
        for k in 0..rank {
            y.set_column(k, &DVector::from_vec(parse_row(&next_line(&mut lines)?, nc)?));
        }
        Ok(Self { u0, u, y, t })
    }
}

pub(crate) fn write_row<'a, T: Real>(w: &mut impl Write, vals: impl Iterator<Item = &'a T>) -> Result<()> {
    let mut first = true;
    for v in vals {
        if first {
            write!(w, "{v}")?;
            first = false;
        } else {
            write!(w, " {v}")?;
        }
    }
    writeln!(w)?;
    Ok(())
}

pub(crate) fn next_line(lines: &mut impl Iterator<Item = std::io::Result<String>>) -> Result<String> {
    Ok(lines.next().ok_or_else(|| Error::Parse("unexpected end of file".into()))??)
}

pub(crate) fn parse_tok<V: std::str::FromStr>(tok: &str) -> Result<V> {
    tok.parse().map_err(|_| Error::Parse(format!("bad token `{tok}`")))
}

pub(crate) fn parse_row<T: Real>(line: &str, expected: usize) -> Result<Vec<T>> {
    let row: Vec<T> = line.split_whitespace().map(parse_tok::<T>).collect::<Result<_>>()?;
    if row.len() != expected {
        return Err(Error::Parse(format!("expected {expected} values, found {}", row.len())));
    }
    Ok(row)
}

/// `W̃ = Ũᵀ (M + Sᵀ) Ũ` together with conditioning information.
#[derive(Clone, Debug)]
pub struct SkewedGram<T: Real> {
    pub matrix: DMatrix<T>,
    pub condition: T,
    pub min_singular: T,
}

pub fn skewed_gram<T: Real>(u_tilde: &DMatrix<T>, mass: &CsrMatrix<T>, supg_mass: &CsrMatrix<T>) -> SkewedGram<T> {
    // (M + Sᵀ)Ũ column j paired with Ũ_i gives Ũ_iᵀ M Ũ_j + Ũ_jᵀ S Ũ_i.
    let mu = mass.mul_dense(u_tilde);
    let su = supg_mass.mul_dense(u_tilde);
    let r = u_tilde.ncols();
    let g_m = u_tilde.transpose() * mu;
    let g_s = u_tilde.transpose() * su;
    let mut w = DMatrix::zeros(r, r);
    for i in 0..r {
        for j in 0..r {
            w[(i, j)] = g_m[(i, j)] + g_s[(j, i)];
        }
    }
    let (condition, min_singular) = condition_number(&w);
    SkewedGram {
        matrix: w,
        condition,
        min_singular,
    }
}

/// 2-norm condition number and smallest singular value.
pub fn condition_number<T: Real>(a: &DMatrix<T>) -> (T, T) {
    if a.is_empty() {
        return (T::one(), T::zero());
    }
    let s = a.clone().singular_values();
    let max = s.iter().fold(T::zero(), |acc, v| acc.max(*v));
    let min = s.iter().fold(T::infinity(), |acc, v| acc.min(*v));
    let cond = if min > T::zero() { max / min } else { T::infinity() };
    (cond, min)
}
