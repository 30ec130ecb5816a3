//! Random coefficient fields, their sample statistics and the stabilisation
//! parameters derived from them.
//!
//! Coefficients are finite sums of separable terms, for example
//! `b(x, ω) = Σ_t β_t(ω) b_t(x)`. This keeps the discrete operator affine in the
//! random coefficients so that expectations reduce to small moment tensors.

use crate::error::{Error, Result};
use crate::fem::P1Space;
use crate::linalg::max_generalized_eigenvalue;
use crate::scalar::Real;
use crate::stochastic::SampleSpace;
use std::fmt;
use std::sync::Arc;

pub type RandomScalar<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;
pub type TimeRandomScalar<T> = Arc<dyn Fn(T, &[T]) -> T + Send + Sync>;
pub type SpatialScalar<T> = Arc<dyn Fn([T; 2]) -> T + Send + Sync>;
pub type SpatialVector<T> = Arc<dyn Fn([T; 2]) -> [T; 2] + Send + Sync>;

/// `β(ω) b(x)` with the divergence of `b` supplied analytically.
#[derive(Clone)]
pub struct AdvectionTerm<T> {
    pub coefficient: RandomScalar<T>,
    pub field: SpatialVector<T>,
    pub divergence: SpatialScalar<T>,
}

/// `θ(ω) c(x)`
#[derive(Clone)]
pub struct ReactionTerm<T> {
    pub coefficient: RandomScalar<T>,
    pub field: SpatialScalar<T>,
}

/// `γ(t, ω) g(x)`
#[derive(Clone)]
pub struct ForcingTerm<T> {
    pub coefficient: TimeRandomScalar<T>,
    pub field: SpatialScalar<T>,
}

/// Random advection-diffusion-reaction coefficients.
#[derive(Clone)]
pub struct CoefficientModel<T> {
    pub name: String,
    /// Number of random parameters the closures expect.
    pub parameter_dim: usize,
    pub diffusion: RandomScalar<T>,
    pub advection: Vec<AdvectionTerm<T>>,
    pub reaction: Vec<ReactionTerm<T>>,
    pub forcing: Vec<ForcingTerm<T>>,
}

impl<T> fmt::Debug for CoefficientModel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientModel")
            .field("name", &self.name)
            .field("parameter_dim", &self.parameter_dim)
            .field("advection_terms", &self.advection.len())
            .field("reaction_terms", &self.reaction.len())
            .field("forcing_terms", &self.forcing.len())
            .finish()
    }
}

/// How the advection field of [`ConstantAdrParams`] depends on space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvectionKind {
    Constant,
    Rotating,
}

/// Simple test model with constant coefficients. Fluctuations are driven by the
/// first random parameter.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstantAdrParams {
    pub eps: f64,
    pub eps_fluct: f64,
    pub advection: AdvectionKind,
    pub bx: f64,
    pub by: f64,
    pub c: f64,
    pub c_fluct: f64,
    pub f: f64,
}

impl Default for ConstantAdrParams {
    fn default() -> Self {
        Self {
            eps: 1e-2,
            eps_fluct: 0.0,
            advection: AdvectionKind::Constant,
            bx: 1.0,
            by: 0.0,
            c: 0.0,
            c_fluct: 0.0,
            f: 0.0,
        }
    }
}

fn zero_scalar<T: Real>() -> SpatialScalar<T> {
    Arc::new(|_| T::zero())
}

fn one_random<T: Real>() -> RandomScalar<T> {
    Arc::new(|_| T::one())
}

impl<T: Real> CoefficientModel<T> {
    /// Rotating body problem: `ε = 10^{y₁-16}`, solid-body rotation about the
    /// centre of the square, no reaction and no forcing.
    pub fn rotating_body() -> Self {
        let half = T::lit(0.5);
        Self {
            name: "rotating_body".into(),
            parameter_dim: 3,
            diffusion: Arc::new(|y: &[T]| T::lit(10.0).powf(y[0] - T::lit(16.0))),
            advection: vec![AdvectionTerm {
                coefficient: one_random(),
                field: Arc::new(move |x: [T; 2]| [half - x[1], x[0] - half]),
                divergence: zero_scalar(),
            }],
            reaction: Vec::new(),
            forcing: Vec::new(),
        }
    }

    /// Boundary layer problem: `ε = 1/y₁` and `b = (1,1) + (y₂ - k)(x₂, x₁)`
    /// where `k` should be the sample mean of `y₂`.
    pub fn boundary_layer(k: T) -> Self {
        Self {
            name: "boundary_layer".into(),
            parameter_dim: 4,
            diffusion: Arc::new(|y: &[T]| T::one() / y[0]),
            advection: vec![
                AdvectionTerm {
                    coefficient: one_random(),
                    field: Arc::new(|_| [T::one(), T::one()]),
                    divergence: zero_scalar(),
                },
                AdvectionTerm {
                    coefficient: Arc::new(move |y: &[T]| y[1] - k),
                    field: Arc::new(|x: [T; 2]| [x[1], x[0]]),
                    divergence: zero_scalar(),
                },
            ],
            reaction: Vec::new(),
            forcing: Vec::new(),
        }
    }

    pub fn constant_adr(p: &ConstantAdrParams) -> Self {
        let (eps, eps_fluct) = (T::lit(p.eps), T::lit(p.eps_fluct));
        let diffusion: RandomScalar<T> = if p.eps_fluct == 0.0 {
            Arc::new(move |_| eps)
        } else {
            Arc::new(move |y: &[T]| eps + eps_fluct * y[0])
        };
        let advection = match p.advection {
            AdvectionKind::Constant => {
                let (bx, by) = (T::lit(p.bx), T::lit(p.by));
                AdvectionTerm {
                    coefficient: one_random(),
                    field: Arc::new(move |_| [bx, by]),
                    divergence: zero_scalar(),
                }
            }
            AdvectionKind::Rotating => CoefficientModel::<T>::rotating_body().advection.remove(0),
        };
        let mut reaction = Vec::new();
        if p.c != 0.0 {
            let c = T::lit(p.c);
            reaction.push(ReactionTerm {
                coefficient: one_random(),
                field: Arc::new(move |_| c),
            });
        }
        if p.c_fluct != 0.0 {
            let c = T::lit(p.c_fluct);
            reaction.push(ReactionTerm {
                coefficient: Arc::new(|y: &[T]| y[0]),
                field: Arc::new(move |_| c),
            });
        }
        let mut forcing = Vec::new();
        if p.f != 0.0 {
            let f = T::lit(p.f);
            forcing.push(ForcingTerm {
                coefficient: Arc::new(|_, _| T::one()),
                field: Arc::new(move |_| f),
            });
        }
        let uses_params = p.eps_fluct != 0.0 || p.c_fluct != 0.0;
        Self {
            name: "constant_adr".into(),
            parameter_dim: usize::from(uses_params),
            diffusion,
            advection: vec![advection],
            reaction,
            forcing,
        }
    }

    pub fn advection_at(&self, x: [T; 2], y: &[T]) -> [T; 2] {
        let mut b = [T::zero(); 2];
        for term in &self.advection {
            let beta = (term.coefficient)(y);
            let f = (term.field)(x);
            b[0] += beta * f[0];
            b[1] += beta * f[1];
        }
        b
    }

    pub fn divergence_at(&self, x: [T; 2], y: &[T]) -> T {
        self.advection
            .iter()
            .fold(T::zero(), |a, t| a + (t.coefficient)(y) * (t.divergence)(x))
    }

    pub fn reaction_at(&self, x: [T; 2], y: &[T]) -> T {
        self.reaction
            .iter()
            .fold(T::zero(), |a, t| a + (t.coefficient)(y) * (t.field)(x))
    }

    pub fn forcing_at(&self, t: T, x: [T; 2], y: &[T]) -> T {
        self.forcing
            .iter()
            .fold(T::zero(), |a, f| a + (f.coefficient)(t, y) * (f.field)(x))
    }

    pub fn has_forcing(&self) -> bool {
        !self.forcing.is_empty()
    }
}

/// Per-sample values of one random coefficient with its mean/fluctuation split.
#[derive(Clone, Debug)]
pub struct SampledTerm<T> {
    pub values: Vec<T>,
    pub mean: T,
    pub fluct: Vec<T>,
}

impl<T: Real> SampledTerm<T> {
    pub fn new(space: &SampleSpace<T>, values: Vec<T>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("random coefficient".into()));
        }
        let (mean, fluct) = space.split_mean(&values)?;
        Ok(Self {
            values,
            mean,
            fluct: fluct.0,
        })
    }

    /// True when the fluctuation is negligible relative to the values.
    pub fn is_deterministic(&self) -> bool {
        let scale = self.values.iter().fold(T::zero(), |a, v| a.max(v.abs()));
        let fl = self.fluct.iter().fold(T::zero(), |a, v| a.max(v.abs()));
        fl <= T::lit(1e-14) * scale
    }
}

/// Coefficients evaluated on a sample space.
#[derive(Clone, Debug)]
pub struct SampledCoefficients<T> {
    pub model: CoefficientModel<T>,
    pub diffusion: SampledTerm<T>,
    pub advection: Vec<SampledTerm<T>>,
    pub reaction: Vec<SampledTerm<T>>,
    /// `min_ω ε(ω)`
    pub eps_hat: T,
    /// `max_ω ε(ω) / ε̂`, so that `ε̂ ≤ ε(ω) ≤ C_E ε̂`.
    pub c_e: T,
}

impl<T: Real> SampledCoefficients<T> {
    pub fn new(model: &CoefficientModel<T>, space: &SampleSpace<T>) -> Result<Self> {
        if space.dim() < model.parameter_dim {
            return Err(Error::DimensionMismatch {
                what: "random parameters",
                expected: model.parameter_dim,
                found: space.dim(),
            });
        }
        let eps = space.evaluate(|y| (model.diffusion)(y)).0;
        if eps.iter().any(|e| !(*e > T::zero()) || !e.is_finite()) {
            return Err(Error::InvalidInput("diffusion must be positive and finite".into()));
        }
        let eps_hat = eps.iter().fold(T::infinity(), |a, e| a.min(*e));
        let c_e = eps.iter().fold(T::zero(), |a, e| a.max(*e)) / eps_hat;
        let diffusion = SampledTerm::new(space, eps)?;
        let advection = model
            .advection
            .iter()
            .map(|t| SampledTerm::new(space, space.evaluate(|y| (t.coefficient)(y)).0))
            .collect::<Result<_>>()?;
        let reaction = model
            .reaction
            .iter()
            .map(|t| SampledTerm::new(space, space.evaluate(|y| (t.coefficient)(y)).0))
            .collect::<Result<_>>()?;
        Ok(Self {
            model: model.clone(),
            diffusion,
            advection,
            reaction,
            eps_hat,
            c_e,
        })
    }

    /// `b̄(x) = E[b(x, ·)]`
    pub fn mean_advection(&self, x: [T; 2]) -> [T; 2] {
        let mut b = [T::zero(); 2];
        for (term, s) in self.model.advection.iter().zip(&self.advection) {
            let f = (term.field)(x);
            b[0] += s.mean * f[0];
            b[1] += s.mean * f[1];
        }
        b
    }

    /// `c̄(x) = E[c(x, ·)]`
    pub fn mean_reaction(&self, x: [T; 2]) -> T {
        self.model
            .reaction
            .iter()
            .zip(&self.reaction)
            .fold(T::zero(), |a, (t, s)| a + s.mean * (t.field)(x))
    }

    pub fn advection_sample(&self, x: [T; 2], i: usize) -> [T; 2] {
        let mut b = [T::zero(); 2];
        for (term, s) in self.model.advection.iter().zip(&self.advection) {
            let f = (term.field)(x);
            b[0] += s.values[i] * f[0];
            b[1] += s.values[i] * f[1];
        }
        b
    }

    pub fn reaction_sample(&self, x: [T; 2], i: usize) -> T {
        self.model
            .reaction
            .iter()
            .zip(&self.reaction)
            .fold(T::zero(), |a, (t, s)| a + s.values[i] * (t.field)(x))
    }

    pub fn divergence_sample(&self, x: [T; 2], i: usize) -> T {
        self.model
            .advection
            .iter()
            .zip(&self.advection)
            .fold(T::zero(), |a, (t, s)| a + s.values[i] * (t.divergence)(x))
    }

    /// True when every coefficient is free of fluctuations.
    pub fn is_deterministic(&self) -> bool {
        self.diffusion.is_deterministic()
            && self.advection.iter().all(SampledTerm::is_deterministic)
            && self.reaction.iter().all(SampledTerm::is_deterministic)
    }

    pub fn n_samples(&self) -> usize {
        self.diffusion.values.len()
    }
}

/// Storage of the shifted reaction `μ(x, ω)` at the quadrature points.
#[derive(Clone, Debug)]
pub enum MuField<T> {
    Zero,
    /// Value per quadrature point, element-major.
    Deterministic(Vec<T>),
    /// `n_qp × N_C` values, quadrature point major.
    Random(Vec<T>),
}

/// `μ̃ = c - |c|/2 - ½∇·b`, the shift `ν` and the shifted `μ = μ̃ + ν`.
#[derive(Clone, Debug)]
pub struct ReactionAnalysis<T> {
    pub nu: T,
    /// `min μ` over quadrature points and samples.
    pub mu0: T,
    pub mu: MuField<T>,
    /// `max |c|` per element over its quadrature points and all samples.
    pub c_sup: Vec<T>,
    /// `max_ω |ε(ω) - ε̄|`
    pub eps_star_sup: T,
    n_samples: usize,
    n_quad: usize,
}

impl<T: Real> ReactionAnalysis<T> {
    pub fn new(space: &P1Space<T>, coeffs: &SampledCoefficients<T>) -> Result<Self> {
        let nc = coeffs.n_samples();
        let nq = space.quad.len();
        let model = &coeffs.model;
        let mut mu_tilde = Vec::with_capacity(space.n_elements() * nq * nc);
        let mut c_sup = vec![T::zero(); space.n_elements()];
        let mut c_vals = vec![T::zero(); nc];
        for (k, e) in space.elements.iter().enumerate() {
            for x in &e.points {
                c_vals.iter_mut().for_each(|v| *v = T::zero());
                let mut div = vec![T::zero(); nc];
                for (term, s) in model.reaction.iter().zip(&coeffs.reaction) {
                    let f = (term.field)(*x);
                    for i in 0..nc {
                        c_vals[i] += s.values[i] * f;
                    }
                }
                for (term, s) in model.advection.iter().zip(&coeffs.advection) {
                    let d = (term.divergence)(*x);
                    if d != T::zero() {
                        for i in 0..nc {
                            div[i] += s.values[i] * d;
                        }
                    }
                }
                for i in 0..nc {
                    let c = c_vals[i];
                    c_sup[k] = c_sup[k].max(c.abs());
                    let v = c - c.abs() * T::lit(0.5) - div[i] * T::lit(0.5);
                    if !v.is_finite() {
                        return Err(Error::NonFinite("reaction analysis".into()));
                    }
                    mu_tilde.push(v);
                }
            }
        }
        let min_tilde = mu_tilde.iter().fold(T::infinity(), |a, v| a.min(*v));
        let nu = (-min_tilde).max(T::zero());
        let mu0 = min_tilde + nu;
        let all_zero = mu_tilde.iter().all(|v| *v + nu == T::zero());
        let mu = if all_zero {
            MuField::Zero
        } else {
            let deterministic = mu_tilde.chunks(nc).all(|row| {
                let s = row[0].abs().max(T::one());
                row.iter().all(|v| (*v - row[0]).abs() <= T::lit(1e-14) * s)
            });
            if deterministic {
                MuField::Deterministic(mu_tilde.chunks(nc).map(|row| row[0] + nu).collect())
            } else {
                MuField::Random(mu_tilde.into_iter().map(|v| v + nu).collect())
            }
        };
        let eps_star_sup = coeffs.diffusion.fluct.iter().fold(T::zero(), |a, v| a.max(v.abs()));
        Ok(Self {
            nu,
            mu0,
            mu,
            c_sup,
            eps_star_sup,
            n_samples: nc,
            n_quad: nq,
        })
    }

    /// `μ` at quadrature point `q` of element `k` for sample `i`.
    pub fn mu_at(&self, k: usize, q: usize, i: usize) -> T {
        let p = k * self.n_quad + q;
        match &self.mu {
            MuField::Zero => T::zero(),
            MuField::Deterministic(v) => v[p],
            MuField::Random(v) => v[p * self.n_samples + i],
        }
    }
}

/// Rule used to pick the per-element stabilisation parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaPolicy {
    /// Coercivity-driven bound for the implicit scheme.
    Coercivity,
    /// Bound for the semi-implicit scheme (includes `2Δt`).
    SemiImplicit,
    /// `h_K / 4`
    Experiment,
}

/// Inputs that the stabilisation bounds depend on.
#[derive(Clone, Debug)]
pub struct StabilizationParams<T> {
    pub delta: Vec<T>,
    pub policy: DeltaPolicy,
    pub h: Vec<T>,
    pub c_inverse: T,
    pub c_e: T,
    pub eps_hat: T,
    pub dim: usize,
}

impl<T: Real> StabilizationParams<T> {
    pub fn delta_max(&self) -> T {
        self.delta.iter().fold(T::zero(), |a, d| a.max(*d))
    }
}

fn reaction_limit<T: Real>(c_sup: T) -> T {
    if c_sup > T::zero() {
        T::one() / (T::lit(2.0) * c_sup)
    } else {
        T::infinity()
    }
}

/// `δ_K ≤ min(1/(2⦀c⦀_K), h_K²/(2 d C_I² C_E² ε̂))`.
///
/// With `drop_p1_diffusion_bound` the diffusion term is omitted, which is valid
/// for P1 elements. An inactive bound yields `+∞`.
pub fn delta_coercivity<T: Real>(
    h: &[T],
    c_sup: &[T],
    eps_hat: T,
    c_inverse: T,
    c_e: T,
    dim: usize,
    drop_p1_diffusion_bound: bool,
) -> Vec<T> {
    let d = T::from_usize_lossy(dim);
    h.iter()
        .zip(c_sup)
        .map(|(hk, ck)| {
            let react = reaction_limit(*ck);
            if drop_p1_diffusion_bound {
                react
            } else {
                let diff = *hk * *hk / (T::lit(2.0) * d * c_inverse * c_inverse * c_e * c_e * eps_hat);
                react.min(diff)
            }
        })
        .collect()
}

/// `δ_K ≤ ⅛ min(1/(2⦀c⦀_K), h_K²/(2 ε̂ C_I² max(C_E², 1) d), 2Δt)`.
pub fn delta_semi_implicit<T: Real>(
    h: &[T],
    c_sup: &[T],
    eps_hat: T,
    c_inverse: T,
    c_e: T,
    dim: usize,
    dt: T,
) -> Vec<T> {
    let d = T::from_usize_lossy(dim);
    let ce2 = (c_e * c_e).max(T::one());
    h.iter()
        .zip(c_sup)
        .map(|(hk, ck)| {
            let diff = *hk * *hk / (T::lit(2.0) * eps_hat * c_inverse * c_inverse * ce2 * d);
            reaction_limit(*ck).min(diff).min(T::lit(2.0) * dt) / T::lit(8.0)
        })
        .collect()
}

/// `δ_K = h_K / 4`
pub fn delta_experiment<T: Real>(h: &[T]) -> Vec<T> {
    h.iter().map(|hk| *hk / T::lit(4.0)).collect()
}

/// Replaces infinite or oversized entries by the matching entry of `cap`.
pub fn cap_delta<T: Real>(delta: &[T], cap: &[T]) -> Vec<T> {
    delta.iter().zip(cap).map(|(d, c)| d.min(*c)).collect()
}

/// Constant `C_I` in `‖∇v_h‖ ≤ C_I h⁻¹ ‖v_h‖` over the interior P1 space,
/// from the largest eigenvalue of `K v = λ M v`.
pub fn inverse_inequality_constant<T: Real>(space: &P1Space<T>) -> Result<T> {
    let interior = space.mesh.interior_vertices();
    if interior.is_empty() {
        return Err(Error::InvalidInput("mesh has no interior vertices".into()));
    }
    let k = space.stiffness()?.submatrix(&interior);
    let m = space.mass()?.submatrix(&interior);
    let lambda = max_generalized_eigenvalue(&k, &m, 300, T::lit(1e-10))?;
    Ok(space.mesh.h() * lambda.sqrt())
}

/// Local Péclet numbers `|b| h_K / (2ε)` maximised over quadrature points.
#[derive(Clone, Debug)]
pub struct PecletReport<T> {
    /// Maximum over samples, per element.
    pub element_max: Vec<T>,
    /// Maximum over elements, per sample.
    pub sample_max: Vec<T>,
    /// True when some local Péclet number exceeds one.
    pub advection_dominated: bool,
}

pub fn local_peclet<T: Real>(space: &P1Space<T>, coeffs: &SampledCoefficients<T>) -> PecletReport<T> {
    let nc = coeffs.n_samples();
    let mut element_max = vec![T::zero(); space.n_elements()];
    let mut sample_max = vec![T::zero(); nc];
    for (k, e) in space.elements.iter().enumerate() {
        for x in &e.points {
            for i in 0..nc {
                let b = coeffs.advection_sample(*x, i);
                let nb = (b[0] * b[0] + b[1] * b[1]).sqrt();
                let pe = nb * e.diameter / (T::lit(2.0) * coeffs.diffusion.values[i]);
                element_max[k] = element_max[k].max(pe);
                sample_max[i] = sample_max[i].max(pe);
            }
        }
    }
    let advection_dominated = element_max.iter().any(|p| *p > T::one());
    PecletReport {
        element_max,
        sample_max,
        advection_dominated,
    }
}

/// Outcome of the moderate-stochasticity conditions `|ε⋆| ≤ ε̂/32` and `|c⋆| ≤ μ/32`.
///
/// Ratios are `bound / |value|` minimised over all points (`+∞` if the
/// fluctuation vanishes); a ratio of at least one means the condition holds.
#[derive(Clone, Debug, PartialEq)]
pub struct ModerateStochasticity<T> {
    pub eps_ok: bool,
    pub eps_ratio: T,
    pub c_ok: bool,
    pub c_ratio: T,
}

impl<T: Real> ModerateStochasticity<T> {
    pub fn holds(&self) -> bool {
        self.eps_ok && self.c_ok
    }
}

pub fn moderate_stochasticity<T: Real>(
    space: &P1Space<T>,
    coeffs: &SampledCoefficients<T>,
    analysis: &ReactionAnalysis<T>,
) -> ModerateStochasticity<T> {
    let eps_bound = coeffs.eps_hat / T::lit(32.0);
    let eps_ratio = if analysis.eps_star_sup > T::zero() {
        eps_bound / analysis.eps_star_sup
    } else {
        T::infinity()
    };
    let mut c_ratio = T::infinity();
    let mut c_ok = true;
    let nc = coeffs.n_samples();
    if coeffs.reaction.iter().any(|s| !s.is_deterministic()) {
        for (k, e) in space.elements.iter().enumerate() {
            for (q, x) in e.points.iter().enumerate() {
                let c_bar = coeffs.mean_reaction(*x);
                for i in 0..nc {
                    let c_star = (coeffs.reaction_sample(*x, i) - c_bar).abs();
                    let bound = analysis.mu_at(k, q, i) / T::lit(32.0);
                    if c_star > bound {
                        c_ok = false;
                    }
                    if c_star > T::zero() {
                        c_ratio = c_ratio.min(bound / c_star);
                    }
                }
            }
        }
    }
    ModerateStochasticity {
        eps_ok: analysis.eps_star_sup <= eps_bound,
        eps_ratio,
        c_ok,
        c_ratio,
    }
}
