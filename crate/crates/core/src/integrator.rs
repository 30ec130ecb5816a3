//! Time stepping of the low-rank system: deterministic modes first, then the
//! stochastic modes, then re-orthonormalisation.

use crate::dlr::{condition_number, skewed_gram, DlrState};
use crate::error::{Error, Result};
use crate::linalg::{BandedLu, CsrMatrix};
use crate::operator::DiscreteProblem;
use crate::scalar::Real;
use nalgebra::{DMatrix, DVector};

/// Which coefficient parts are treated implicitly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Mean coefficients implicit, fluctuations explicit.
    SemiImplicit,
    /// Fully implicit; only valid for deterministic coefficients.
    ImplicitEulerDeterministic,
    /// Everything explicit except the skewed mass matrix.
    Explicit,
}

#[derive(Clone, Copy, Debug)]
pub struct SchemeConfig<T> {
    pub scheme: Scheme,
    pub dt: T,
    /// Largest tolerated condition number of the reduced stochastic system.
    pub max_condition: T,
    /// Norm growth relative to the initial state treated as blow-up.
    pub blowup_factor: T,
}

impl<T: Real> SchemeConfig<T> {
    pub fn new(scheme: Scheme, dt: T) -> Self {
        Self {
            scheme,
            dt,
            max_condition: T::lit(1e12),
            blowup_factor: T::lit(1e12),
        }
    }
}

/// Implicit/explicit coefficient split and the factorised implicit matrix.
#[derive(Clone, Debug)]
pub struct StepWorkspace<T> {
    pub dt: T,
    /// Implicit weight of each affine term.
    pub implicit: Vec<T>,
    /// Explicit per-sample weight of each affine term, `None` when zero.
    pub explicit: Vec<Option<Vec<T>>>,
    /// `(M+S)/Δt + Σ_q ĉ_q A_q` before boundary conditions.
    pub implicit_matrix: CsrMatrix<T>,
    lu: BandedLu<T>,
}

impl<T: Real> StepWorkspace<T> {
    pub fn new(problem: &DiscreteProblem<T>, scheme: Scheme, dt: T) -> Result<Self> {
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(Error::InvalidInput("time step must be positive".into()));
        }
        let mut implicit = Vec::with_capacity(problem.terms.len());
        let mut explicit = Vec::with_capacity(problem.terms.len());
        for term in &problem.terms {
            let c = &term.coeff;
            match scheme {
                Scheme::SemiImplicit => {
                    implicit.push(c.mean);
                    explicit.push((!c.is_deterministic()).then(|| c.fluct.clone()));
                }
                Scheme::ImplicitEulerDeterministic => {
                    if !c.is_deterministic() {
                        return Err(Error::InvalidInput(format!(
                            "fully implicit scheme needs deterministic coefficients, `{}` fluctuates",
                            term.label
                        )));
                    }
                    implicit.push(c.mean);
                    explicit.push(None);
                }
                Scheme::Explicit => {
                    implicit.push(T::zero());
                    explicit.push(Some(c.values.clone()));
                }
            }
        }
        let mut parts = vec![(T::one() / dt, &problem.time_matrix)];
        for (c, term) in implicit.iter().zip(&problem.terms) {
            if *c != T::zero() {
                parts.push((*c, &term.matrix));
            }
        }
        let implicit_matrix = CsrMatrix::linear_combination(&parts)?;
        let lu = BandedLu::factor(&problem.dirichlet.constrain_matrix(&implicit_matrix))?;
        Ok(Self {
            dt,
            implicit,
            explicit,
            implicit_matrix,
            lu,
        })
    }

    /// Solves the implicit system for one right-hand side, imposing boundary data.
    pub fn solve(&self, problem: &DiscreteProblem<T>, rhs: &mut [T], homogeneous: bool) {
        problem.dirichlet.constrain_rhs(&self.implicit_matrix, rhs, homogeneous);
        self.lu.solve_in_place(rhs);
    }
}

/// Diagnostics of one low-rank step.
#[derive(Clone, Debug)]
pub struct StepInfo<T: Real> {
    /// Updated deterministic modes `[Ũ₀ | Ũ₁ … Ũ_R]`.
    pub u_tilde: DMatrix<T>,
    /// Stochastic modes before re-orthonormalisation.
    pub y_tilde: DMatrix<T>,
    pub skewed_gram_condition: T,
    pub reduced_condition: T,
    /// `max |E[Ỹᵢ Yⱼ] - δᵢⱼ|`
    pub lemma_defect: T,
}

/// Passed to the per-step callback of [`Integrator::run`].
pub struct StepEvent<'a, T: Real> {
    pub index: usize,
    pub previous: &'a DlrState<T>,
    pub current: &'a DlrState<T>,
    pub info: &'a StepInfo<T>,
}

pub struct Integrator<'a, T: Real> {
    problem: &'a DiscreteProblem<T>,
    cfg: SchemeConfig<T>,
    ws: StepWorkspace<T>,
}

/// `[1 | Y]`
fn extend_with_one<T: Real>(y: &DMatrix<T>) -> DMatrix<T> {
    let mut out = DMatrix::from_element(y.nrows(), y.ncols() + 1, T::one());
    out.columns_mut(1, y.ncols()).copy_from(y);
    out
}

/// `[U₀ | U]`
fn extend_with_mean<T: Real>(state: &DlrState<T>) -> DMatrix<T> {
    let mut out = DMatrix::zeros(state.ndofs(), state.rank() + 1);
    out.set_column(0, &state.u0);
    out.columns_mut(1, state.rank()).copy_from(&state.u);
    out
}

/// `E[e Yⱼ Yₖ]` for the columns of `y_ext`.
fn weighted_gram<T: Real>(weights: &[T], e: &[T], y_ext: &DMatrix<T>) -> DMatrix<T> {
    let mut wy = y_ext.clone();
    for (i, mut row) in wy.row_iter_mut().enumerate() {
        row *= weights[i] * e[i];
    }
    y_ext.transpose() * wy
}

impl<'a, T: Real> Integrator<'a, T> {
    pub fn new(problem: &'a DiscreteProblem<T>, cfg: SchemeConfig<T>) -> Result<Self> {
        let ws = StepWorkspace::new(problem, cfg.scheme, cfg.dt)?;
        Ok(Self { problem, cfg, ws })
    }

    pub fn config(&self) -> &SchemeConfig<T> {
        &self.cfg
    }

    pub fn workspace(&self) -> &StepWorkspace<T> {
        &self.ws
    }

    /// Changes the step size and refactorises.
    pub fn set_dt(&mut self, dt: T) -> Result<()> {
        self.ws = StepWorkspace::new(self.problem, self.cfg.scheme, dt)?;
        self.cfg.dt = dt;
        Ok(())
    }

    fn explicit_products(&self, u_ext: &DMatrix<T>) -> Vec<Option<DMatrix<T>>> {
        self.ws
            .explicit
            .iter()
            .zip(&self.problem.terms)
            .map(|(e, term)| e.as_ref().map(|_| term.matrix.mul_dense(u_ext)))
            .collect()
    }

    /// Solves for `Ũ₀ … Ũ_R` with the stochastic modes frozen.
    pub fn step_deterministic_modes(&self, state: &DlrState<T>) -> Result<DMatrix<T>> {
        let u_ext = extend_with_mean(state);
        let au = self.explicit_products(&u_ext);
        self.deterministic_modes(state, &u_ext, &au)
    }

    fn deterministic_modes(
        &self,
        state: &DlrState<T>,
        u_ext: &DMatrix<T>,
        au: &[Option<DMatrix<T>>],
    ) -> Result<DMatrix<T>> {
        let p = self.problem;
        let w = p.samples.weights();
        let y_ext = extend_with_one(&state.y);
        let inv_dt = T::one() / self.ws.dt;
        let mut rhs = p.time_matrix.mul_dense(u_ext) * inv_dt;
        for (e, a) in self.ws.explicit.iter().zip(au) {
            if let (Some(e), Some(a)) = (e, a) {
                let g = weighted_gram(w, e, &y_ext);
                rhs -= a * g;
            }
        }
        let t_next = state.t + self.ws.dt;
        for (gamma, load) in p.forcing_coefficients(t_next).iter().zip(&p.loads) {
            let load = DVector::from_column_slice(load);
            for j in 0..y_ext.ncols() {
                let c = p.samples.inner(gamma, y_ext.column(j).as_slice());
                rhs.column_mut(j).axpy(c, &load, T::one());
            }
        }
        for j in 0..rhs.ncols() {
            self.ws.solve(p, rhs.column_mut(j).as_mut_slice(), j > 0);
        }
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("deterministic modes".into()));
        }
        Ok(rhs)
    }

    /// Returns the updated stochastic modes `Ỹ = Y + δY` (not yet orthonormal).
    pub fn step_stochastic_modes(&self, state: &DlrState<T>, u_tilde: &DMatrix<T>) -> Result<(DMatrix<T>, T)> {
        let u_ext = extend_with_mean(state);
        let au = self.explicit_products(&u_ext);
        self.stochastic_modes(state, u_tilde, &au)
    }

    fn stochastic_modes(
        &self,
        state: &DlrState<T>,
        u_tilde: &DMatrix<T>,
        au: &[Option<DMatrix<T>>],
    ) -> Result<(DMatrix<T>, T)> {
        let p = self.problem;
        let r = state.rank();
        let nc = p.n_samples();
        if r == 0 {
            return Ok((DMatrix::zeros(nc, 0), T::one()));
        }
        let ut = u_tilde.columns(1, r).into_owned();
        let lu_t = self.ws.implicit_matrix.mul_dense(&ut);
        let w_hat = lu_t.transpose() * &ut;
        let (cond, _) = condition_number(&w_hat);
        if !(cond <= self.cfg.max_condition) {
            return Err(Error::NearSingular {
                condition: cond.as_f64(),
            });
        }
        let y_ext = extend_with_one(&state.y);
        let mut rm = DMatrix::zeros(nc, r);
        for (e, a) in self.ws.explicit.iter().zip(au) {
            if let (Some(e), Some(a)) = (e, a) {
                // B[k, j] = Ũ_jᵀ A_q U_k
                let b = a.transpose() * &ut;
                let contrib = &y_ext * b;
                for j in 0..r {
                    for i in 0..nc {
                        rm[(i, j)] -= e[i] * contrib[(i, j)];
                    }
                }
            }
        }
        let t_next = state.t + self.ws.dt;
        for (gamma, load) in p.forcing_coefficients(t_next).iter().zip(&p.loads) {
            let proj = ut.transpose() * DVector::from_column_slice(load);
            for j in 0..r {
                for i in 0..nc {
                    rm[(i, j)] += gamma[i] * proj[j];
                }
            }
        }
        for j in 0..r {
            p.samples
                .project_complement_unchecked(rm.column_mut(j).as_mut_slice(), &state.y);
        }
        // δY Ŵ = R  ⇔  Ŵᵀ δYᵀ = Rᵀ
        let lu = w_hat.transpose().lu();
        let dy_t = lu
            .solve(&rm.transpose())
            .ok_or(Error::NearSingular { condition: f64::INFINITY })?;
        let y_tilde = &state.y + dy_t.transpose();
        if y_tilde.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("stochastic modes".into()));
        }
        Ok((y_tilde, cond))
    }

    /// One full step `uⁿ → uⁿ⁺¹`.
    pub fn step(&self, state: &DlrState<T>) -> Result<(DlrState<T>, StepInfo<T>)> {
        let p = self.problem;
        let u_ext = extend_with_mean(state);
        let au = self.explicit_products(&u_ext);
        let u_tilde = self.deterministic_modes(state, &u_ext, &au)?;
        let (y_tilde, reduced_condition) = self.stochastic_modes(state, &u_tilde, &au)?;
        let r = state.rank();
        let ut = u_tilde.columns(1, r).into_owned();
        let gram = skewed_gram(&ut, &p.mass, &p.supg_mass);
        let mut lemma_defect = T::zero();
        for i in 0..r {
            for j in 0..r {
                let v = p.samples.inner(y_tilde.column(i).as_slice(), state.y.column(j).as_slice());
                let target = if i == j { T::one() } else { T::zero() };
                lemma_defect = lemma_defect.max((v - target).abs());
            }
        }
        let (y_new, tri) = p.samples.orthonormalize(&y_tilde)?;
        let next = DlrState {
            u0: u_tilde.column(0).into_owned(),
            u: ut * tri.transpose(),
            y: y_new,
            t: state.t + self.ws.dt,
        };
        let info = StepInfo {
            u_tilde,
            y_tilde,
            skewed_gram_condition: gram.condition,
            reduced_condition,
            lemma_defect,
        };
        Ok((next, info))
    }

    /// Advances until `t_final` (the last step lands on it up to rounding).
    pub fn run<F>(&self, initial: DlrState<T>, t_final: T, mut callback: F) -> Result<DlrState<T>>
    where
        F: FnMut(&StepEvent<'_, T>) -> Result<()>,
    {
        let n_steps = step_count(initial.t, t_final, self.ws.dt);
        let norm0 = initial.norm_sq(&self.problem.mass).sqrt();
        let limit = self.cfg.blowup_factor * norm0.max(T::lit(1e-300));
        let mut state = initial;
        for n in 0..n_steps {
            let (next, info) = self.step(&state).map_err(|e| match e {
                Error::NonFinite(_) => Error::BlowUp {
                    step: n + 1,
                    norm: f64::INFINITY,
                },
                other => other,
            })?;
            let norm = next.norm_sq(&self.problem.mass).sqrt();
            if !norm.is_finite() || norm > limit {
                return Err(Error::BlowUp {
                    step: n + 1,
                    norm: norm.as_f64(),
                });
            }
            callback(&StepEvent {
                index: n + 1,
                previous: &state,
                current: &next,
                info: &info,
            })?;
            state = next;
        }
        Ok(state)
    }
}

/// Number of steps of size `dt` from `t0` to `t_final`.
pub fn step_count<T: Real>(t0: T, t_final: T, dt: T) -> usize {
    let n = ((t_final - t0) / dt - T::lit(1e-9)).ceil();
    if n > T::zero() {
        n.to_usize().unwrap_or(0)
    } else {
        0
    }
}
