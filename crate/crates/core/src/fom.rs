//! Sample-by-sample full-order reference solver.

use crate::dlr::{next_line, parse_row, parse_tok, write_row};
use crate::error::{Error, Result};
use crate::integrator::{step_count, Scheme, StepWorkspace};
use crate::mesh::Mesh;
use crate::operator::DiscreteProblem;
use crate::scalar::Real;
use nalgebra::{DMatrix, DVector};
use std::io::{BufRead, Write};

/// One full field per sample (columns).
#[derive(Clone, Debug, PartialEq)]
pub struct FomState<T: Real> {
    pub fields: DMatrix<T>,
    pub t: T,
}

impl<T: Real> FomState<T> {
    pub fn new(fields: DMatrix<T>, t: T) -> Self {
        Self { fields, t }
    }

    pub fn n_samples(&self) -> usize {
        self.fields.ncols()
    }

    /// `E‖u‖²` in the norm induced by `m`.
    pub fn norm_sq(&self, m: &crate::linalg::CsrMatrix<T>, weights: &[T]) -> T {
        (0..self.n_samples()).fold(T::zero(), |a, i| {
            let c = self.fields.column(i);
            a + weights[i] * m.bilinear(c.as_slice(), c.as_slice())
        })
    }

    pub fn mean(&self, weights: &[T]) -> DVector<T> {
        let mut out = DVector::zeros(self.fields.nrows());
        for i in 0..self.n_samples() {
            out.axpy(weights[i], &self.fields.column(i), T::one());
        }
        out
    }

    pub fn write_checkpoint(&self, mesh: &Mesh<T>, w: &mut impl Write) -> Result<()> {
        writeln!(
            w,
            "fom {} 0 {} {} {}",
            self.t,
            mesh.n_per_side(),
            self.fields.nrows(),
            self.n_samples()
        )?;
        for i in 0..self.n_samples() {
            write_row(w, self.fields.column(i).iter())?;
        }
        Ok(())
    }

    pub fn read_checkpoint(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let header = next_line(&mut lines)?;
        let toks: Vec<&str> = header.split_whitespace().collect();
        if toks.len() != 6 || toks[0] != "fom" {
            return Err(Error::Parse("checkpoint header must be `fom t 0 n N_h N_C`".into()));
        }
        let t = parse_tok::<T>(toks[1])?;
        let nh = parse_tok::<usize>(toks[4])?;
        let nc = parse_tok::<usize>(toks[5])?;
        let mut fields = DMatrix::zeros(nh, nc);
        for i in 0..nc {
            fields.set_column(i, &DVector::from_vec(parse_row(&next_line(&mut lines)?, nh)?));
        }
        Ok(Self { fields, t })
    }
}

/// Steps every sample with the same implicit/explicit split as the low-rank scheme.
pub struct FomSolver<'a, T: Real> {
    problem: &'a DiscreteProblem<T>,
    ws: StepWorkspace<T>,
}

impl<'a, T: Real> FomSolver<'a, T> {
    pub fn new(problem: &'a DiscreteProblem<T>, scheme: Scheme, dt: T) -> Result<Self> {
        Ok(Self {
            problem,
            ws: StepWorkspace::new(problem, scheme, dt)?,
        })
    }

    pub fn dt(&self) -> T {
        self.ws.dt
    }

    /// `[(M+S)/Δt + A₂] uⁿ⁺¹ = (M+S)/Δt uⁿ - A₁(ω) uⁿ + F(ω)` for every sample.
    pub fn step(&self, state: &FomState<T>) -> Result<FomState<T>> {
        let p = self.problem;
        let nc = state.n_samples();
        if nc != p.n_samples() || state.fields.nrows() != p.ndofs() {
            return Err(Error::DimensionMismatch {
                what: "full-order state",
                expected: p.n_samples(),
                found: nc,
            });
        }
        let mut rhs = p.time_matrix.mul_dense(&state.fields) / self.ws.dt;
        for (e, term) in self.ws.explicit.iter().zip(&p.terms) {
            if let Some(e) = e {
                let au = term.matrix.mul_dense(&state.fields);
                for i in 0..nc {
                    rhs.column_mut(i).axpy(-e[i], &au.column(i), T::one());
                }
            }
        }
        let t_next = state.t + self.ws.dt;
        for (gamma, load) in p.forcing_coefficients(t_next).iter().zip(&p.loads) {
            let load = DVector::from_column_slice(load);
            for i in 0..nc {
                rhs.column_mut(i).axpy(gamma[i], &load, T::one());
            }
        }
        for i in 0..nc {
            self.ws.solve(p, rhs.column_mut(i).as_mut_slice(), false);
        }
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("full-order fields".into()));
        }
        Ok(FomState { fields: rhs, t: t_next })
    }

    /// Advances to `t_final`, calling `callback(step_index, state)` after each step.
    pub fn run<F>(&self, initial: FomState<T>, t_final: T, mut callback: F) -> Result<FomState<T>>
    where
        F: FnMut(usize, &FomState<T>) -> Result<()>,
    {
        let n_steps = step_count(initial.t, t_final, self.ws.dt);
        let w = self.problem.samples.weights();
        let norm0 = initial.norm_sq(&self.problem.mass, w).sqrt();
        let limit = T::lit(1e12) * norm0.max(T::lit(1e-300));
        let mut state = initial;
        for n in 0..n_steps {
            state = self.step(&state).map_err(|e| match e {
                Error::NonFinite(_) => Error::BlowUp {
                    step: n + 1,
                    norm: f64::INFINITY,
                },
                other => other,
            })?;
            let norm = state.norm_sq(&self.problem.mass, w).sqrt();
            if !norm.is_finite() || norm > limit {
                return Err(Error::BlowUp {
                    step: n + 1,
                    norm: norm.as_f64(),
                });
            }
            callback(n + 1, &state)?;
        }
        Ok(state)
    }
}
