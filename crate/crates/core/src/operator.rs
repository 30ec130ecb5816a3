//! Discrete problem: the affine SUPG operator `A(ω) = Σ_q a_q(ω) A_q`, the
//! skewed mass matrix, load vectors and boundary data.

use crate::coefficients::{CoefficientModel, SampledCoefficients, SampledTerm};
use crate::error::{Error, Result};
use crate::fem::{assemble_blocks, Dirichlet, FemBlocks, P1Space};
use crate::linalg::CsrMatrix;
use crate::scalar::Real;
use crate::stochastic::SampleSpace;
use nalgebra::DMatrix;
use std::collections::BTreeMap;

/// Whether streamline-upwind test functions are used.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stabilization {
    None,
    Supg,
}

/// One term `a_q(ω) A_q` of the affine operator.
#[derive(Clone, Debug)]
pub struct AffineTerm<T> {
    pub label: String,
    pub coeff: SampledTerm<T>,
    pub matrix: CsrMatrix<T>,
}

/// Everything the time steppers need, assembled once.
#[derive(Clone, Debug)]
pub struct DiscreteProblem<T> {
    pub space: P1Space<T>,
    pub samples: SampleSpace<T>,
    pub coeffs: SampledCoefficients<T>,
    pub stabilization: Stabilization,
    /// Per-element stabilisation parameters (all zero without SUPG).
    pub delta: Vec<T>,
    pub mass: CsrMatrix<T>,
    pub stiffness: CsrMatrix<T>,
    pub supg_mass: CsrMatrix<T>,
    /// `M + S`
    pub time_matrix: CsrMatrix<T>,
    pub terms: Vec<AffineTerm<T>>,
    /// `l_s = (g_s, φ_i + δ b̄·∇φ_i)` for each forcing term.
    pub loads: Vec<Vec<T>>,
    /// `(g_s, g_s')` for the forcing norm.
    pub forcing_gram: DMatrix<T>,
    pub dirichlet: Dirichlet<T>,
}

impl<T: Real> DiscreteProblem<T> {
    pub fn new(
        space: P1Space<T>,
        samples: SampleSpace<T>,
        model: &CoefficientModel<T>,
        stabilization: Stabilization,
        delta: Vec<T>,
        boundary_values: &BTreeMap<String, T>,
    ) -> Result<Self> {
        if delta.len() != space.n_elements() {
            return Err(Error::DimensionMismatch {
                what: "stabilisation parameters",
                expected: space.n_elements(),
                found: delta.len(),
            });
        }
        let delta = match stabilization {
            Stabilization::None => vec![T::zero(); space.n_elements()],
            Stabilization::Supg => delta,
        };
        let coeffs = SampledCoefficients::new(model, &samples)?;
        let b_bar = |x: [T; 2]| coeffs.mean_advection(x);
        let mass = space.mass()?;
        let stiffness = space.stiffness()?;
        let supg_mass = space.supg_mass(&b_bar, &delta)?;
        let time_matrix = mass.add(&supg_mass)?;

        let mut terms = vec![AffineTerm {
            label: "diffusion".into(),
            coeff: coeffs.diffusion.clone(),
            matrix: stiffness.clone(),
        }];
        for (t, (term, s)) in model.advection.iter().zip(&coeffs.advection).enumerate() {
            let field = |x: [T; 2]| (term.field)(x);
            let conv = space.convection(&field)?;
            let streamline = space.supg_convection(&field, &b_bar, &delta)?;
            terms.push(AffineTerm {
                label: format!("advection{t}"),
                coeff: s.clone(),
                matrix: conv.add(&streamline)?,
            });
        }
        for (t, (term, s)) in model.reaction.iter().zip(&coeffs.reaction).enumerate() {
            let field = |x: [T; 2]| (term.field)(x);
            let react = space.reaction(&field)?;
            let streamline = space.supg_reaction(&field, &b_bar, &delta)?;
            terms.push(AffineTerm {
                label: format!("reaction{t}"),
                coeff: s.clone(),
                matrix: react.add(&streamline)?,
            });
        }
        let loads = model
            .forcing
            .iter()
            .map(|f| space.load(&|x| (f.field)(x), &b_bar, &delta))
            .collect::<Result<Vec<_>>>()?;
        let nf = model.forcing.len();
        let mut forcing_gram = DMatrix::zeros(nf, nf);
        for s in 0..nf {
            for r in 0..=s {
                let g = |x: [T; 2]| (model.forcing[s].field)(x) * (model.forcing[r].field)(x);
                let v = space
                    .elements
                    .iter()
                    .flat_map(|e| e.points.iter().zip(&e.weights))
                    .fold(T::zero(), |a, (x, w)| a + g(*x) * *w);
                forcing_gram[(s, r)] = v;
                forcing_gram[(r, s)] = v;
            }
        }
        let dirichlet = Dirichlet::new(&space.mesh, boundary_values)?;
        Ok(Self {
            space,
            samples,
            coeffs,
            stabilization,
            delta,
            mass,
            stiffness,
            supg_mass,
            time_matrix,
            terms,
            loads,
            forcing_gram,
            dirichlet,
        })
    }

    pub fn ndofs(&self) -> usize {
        self.space.ndofs()
    }

    pub fn n_samples(&self) -> usize {
        self.samples.len()
    }

    /// `γ_s(t, ω_i)` for every forcing term and sample.
    pub fn forcing_coefficients(&self, t: T) -> Vec<Vec<T>> {
        self.coeffs
            .model
            .forcing
            .iter()
            .map(|f| (0..self.n_samples()).map(|i| (f.coefficient)(t, self.samples.sample(i))).collect())
            .collect()
    }

    /// `E‖f(t)‖²`
    pub fn forcing_norm_sq(&self, t: T) -> T {
        let gamma = self.forcing_coefficients(t);
        let mut acc = T::zero();
        for s in 0..gamma.len() {
            for r in 0..gamma.len() {
                acc += self.forcing_gram[(s, r)] * self.samples.inner(&gamma[s], &gamma[r]);
            }
        }
        acc
    }

    /// `A(ω_i)`
    pub fn operator_sample(&self, i: usize) -> Result<CsrMatrix<T>> {
        let parts: Vec<(T, &CsrMatrix<T>)> = self.terms.iter().map(|t| (t.coeff.values[i], &t.matrix)).collect();
        CsrMatrix::linear_combination(&parts)
    }

    /// Blocks built with the mean advection and reaction.
    pub fn mean_blocks(&self) -> Result<FemBlocks<T>> {
        let b_bar = |x: [T; 2]| self.coeffs.mean_advection(x);
        let c_bar = |x: [T; 2]| self.coeffs.mean_reaction(x);
        assemble_blocks(&self.space, &b_bar, &c_bar, &self.delta)
    }
}
