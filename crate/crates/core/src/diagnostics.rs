//! Norms, invariant checks and the stability-bound ledger.

use crate::coefficients::{MuField, ModerateStochasticity, ReactionAnalysis};
use crate::dlr::DlrState;
use crate::error::{Error, Result};
use crate::fom::FomState;
use crate::integrator::Scheme;
use crate::linalg::CsrMatrix;
use crate::operator::DiscreteProblem;
use crate::scalar::Real;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::io::Write;

/// Squared SUPG norm split into its three contributions.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SupgNormParts<T> {
    /// `ε̂ ‖∇u‖²`
    pub diffusion: T,
    /// `Σ_K δ_K ‖b·∇u‖²_K`
    pub streamline: T,
    /// `‖μ^{1/2} u‖²`
    pub reaction: T,
}

impl<T: Real> SupgNormParts<T> {
    pub fn total(&self) -> T {
        self.diffusion + self.streamline + self.reaction
    }
}

/// Precomputed matrices for the norms of a fixed discrete problem.
pub struct NormEvaluator<'a, T: Real> {
    problem: &'a DiscreteProblem<T>,
    analysis: &'a ReactionAnalysis<T>,
    /// `(t, t', Σ_K δ_K (b_t·∇φ_j, b_t'·∇φ_i)_K)` for `t ≤ t'`.
    streamline: Vec<(usize, usize, CsrMatrix<T>)>,
    mu_matrix: Option<CsrMatrix<T>>,
}

/// `Σ_{k,l} E[a Y_k Y_l] U_kᵀ A U_l` over `[U₀|U]` and `[1|Y]`.
fn expected_quadratic<T: Real>(
    state: &DlrState<T>,
    weights: &[T],
    coeff: Option<&[T]>,
    a: &CsrMatrix<T>,
) -> T {
    let r = state.rank();
    let mut u_ext = DMatrix::zeros(state.ndofs(), r + 1);
    u_ext.set_column(0, &state.u0);
    u_ext.columns_mut(1, r).copy_from(&state.u);
    let h = u_ext.transpose() * a.mul_dense(&u_ext);
    let nc = weights.len();
    let mut y_ext = DMatrix::from_element(nc, r + 1, T::one());
    y_ext.columns_mut(1, r).copy_from(&state.y);
    let mut wy = y_ext.clone();
    for i in 0..nc {
        let s = weights[i] * coeff.map_or(T::one(), |c| c[i]);
        for k in 0..=r {
            wy[(i, k)] *= s;
        }
    }
    let g = y_ext.transpose() * wy;
    g.component_mul(&h).sum()
}

impl<'a, T: Real> NormEvaluator<'a, T> {
    pub fn new(problem: &'a DiscreteProblem<T>, analysis: &'a ReactionAnalysis<T>) -> Result<Self> {
        let model = &problem.coeffs.model;
        let mut streamline = Vec::new();
        if problem.delta.iter().any(|d| *d > T::zero()) {
            for t in 0..model.advection.len() {
                for s in t..model.advection.len() {
                    let bt = |x: [T; 2]| (model.advection[t].field)(x);
                    let bs = |x: [T; 2]| (model.advection[s].field)(x);
                    streamline.push((t, s, problem.space.supg_convection(&bt, &bs, &problem.delta)?));
                }
            }
        }
        let mu_matrix = match &analysis.mu {
            MuField::Deterministic(_) => {
                let space = &problem.space;
                Some(space.assemble(|k, e, local| {
                    for (q, w) in e.weights.iter().enumerate() {
                        let mw = analysis.mu_at(k, q, 0) * *w;
                        for a in 0..3 {
                            for b in 0..3 {
                                local[a][b] += mw * space.basis(q, a) * space.basis(q, b);
                            }
                        }
                    }
                })?)
            }
            _ => None,
        };
        Ok(Self {
            problem,
            analysis,
            streamline,
            mu_matrix,
        })
    }

    fn streamline_coeff(&self, t: usize, s: usize) -> Vec<T> {
        let a = &self.problem.coeffs.advection;
        let factor = if t == s { T::one() } else { T::lit(2.0) };
        a[t].values.iter().zip(&a[s].values).map(|(x, y)| factor * *x * *y).collect()
    }

    /// `E‖u‖²`
    pub fn l2_sq(&self, state: &DlrState<T>) -> T {
        state.norm_sq(&self.problem.mass)
    }

    /// `E‖∇u‖²`
    pub fn grad_sq(&self, state: &DlrState<T>) -> T {
        state.norm_sq(&self.problem.stiffness)
    }

    pub fn supg_sq(&self, state: &DlrState<T>) -> SupgNormParts<T> {
        let w = self.problem.samples.weights();
        let diffusion = self.problem.coeffs.eps_hat * self.grad_sq(state);
        let streamline = self.streamline.iter().fold(T::zero(), |acc, (t, s, d)| {
            acc + expected_quadratic(state, w, Some(&self.streamline_coeff(*t, *s)), d)
        });
        let reaction = match (&self.analysis.mu, &self.mu_matrix) {
            (MuField::Zero, _) => T::zero(),
            (_, Some(m)) => state.norm_sq(m),
            _ => self.mu_term_dense(&state.realizations()),
        };
        SupgNormParts {
            diffusion,
            streamline,
            reaction,
        }
    }

    fn mu_term_dense(&self, fields: &DMatrix<T>) -> T {
        let space = &self.problem.space;
        let w = self.problem.samples.weights();
        let nq = space.quad.len();
        let mut vals = vec![T::zero(); nq];
        let mut acc = T::zero();
        for i in 0..fields.ncols() {
            let col = fields.column(i);
            let mut s = T::zero();
            for (k, e) in space.elements.iter().enumerate() {
                space.eval_at_quadrature(k, col.as_slice(), &mut vals);
                for q in 0..nq {
                    s += e.weights[q] * self.analysis.mu_at(k, q, i) * vals[q] * vals[q];
                }
            }
            acc += w[i] * s;
        }
        acc
    }

    /// Per-sample fields: `E‖u‖²`.
    pub fn l2_sq_dense(&self, fields: &DMatrix<T>) -> T {
        FomState::new(fields.clone(), T::zero()).norm_sq(&self.problem.mass, self.problem.samples.weights())
    }

    pub fn grad_sq_dense(&self, fields: &DMatrix<T>) -> T {
        FomState::new(fields.clone(), T::zero()).norm_sq(&self.problem.stiffness, self.problem.samples.weights())
    }

    /// SUPG norm of per-sample fields (columns).
    pub fn supg_sq_dense(&self, fields: &DMatrix<T>) -> SupgNormParts<T> {
        let w = self.problem.samples.weights();
        let diffusion = self.problem.coeffs.eps_hat * self.grad_sq_dense(fields);
        let mut streamline = T::zero();
        for (t, s, d) in &self.streamline {
            let c = self.streamline_coeff(*t, *s);
            for i in 0..fields.ncols() {
                let col = fields.column(i);
                streamline += w[i] * c[i] * d.bilinear(col.as_slice(), col.as_slice());
            }
        }
        let reaction = match (&self.analysis.mu, &self.mu_matrix) {
            (MuField::Zero, _) => T::zero(),
            (_, Some(m)) => FomState::new(fields.clone(), T::zero()).norm_sq(m, w),
            _ => self.mu_term_dense(fields),
        };
        SupgNormParts {
            diffusion,
            streamline,
            reaction,
        }
    }

    /// `E[a_SUPG(u, u)]` for per-sample fields, using the full operator.
    pub fn bilinear_dense(&self, fields: &DMatrix<T>) -> T {
        let w = self.problem.samples.weights();
        let mut acc = T::zero();
        for term in &self.problem.terms {
            let au = term.matrix.mul_dense(fields);
            for i in 0..fields.ncols() {
                let d = fields.column(i).dot(&au.column(i));
                acc += w[i] * term.coeff.values[i] * d;
            }
        }
        acc
    }
}

/// Oscillation indicator `max u - min u`.
pub fn md_metric<T: Real>(field: &[T]) -> T {
    let max = field.iter().fold(T::lit(f64::NEG_INFINITY), |a, v| a.max(*v));
    let min = field.iter().fold(T::infinity(), |a, v| a.min(*v));
    if field.is_empty() {
        T::zero()
    } else {
        max - min
    }
}

/// Outcome of the randomised weak-coercivity check.
#[derive(Clone, Debug)]
pub struct CoercivityReport<T> {
    pub trials: usize,
    pub violations: usize,
    /// Smallest `(a(u,u) - ½‖u‖²_SUPG + ν‖u‖²) / scale` over all trials.
    pub worst_margin: T,
    /// Seeds of the fields that violated the inequality.
    pub failing_seeds: Vec<u64>,
}

impl<T> CoercivityReport<T> {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Tests `a(u,u) ≥ ½‖u‖²_SUPG − ν‖u‖²` on random finite element random fields
/// vanishing on the boundary. Trial `k` uses seed `seed + k`.
pub fn check_coercivity<T: Real>(
    norms: &NormEvaluator<'_, T>,
    trials: usize,
    seed: u64,
) -> CoercivityReport<T> {
    let p = norms.problem;
    let (nh, nc) = (p.ndofs(), p.n_samples());
    let mut worst = T::infinity();
    let mut failing = Vec::new();
    for k in 0..trials {
        let s = seed.wrapping_add(k as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let mut u = DMatrix::zeros(nh, nc);
        for j in 0..nc {
            for i in 0..nh {
                if !p.dirichlet.constrained[i] {
                    u[(i, j)] = T::lit(rng.random::<f64>() * 2.0 - 1.0);
                }
            }
        }
        let a = norms.bilinear_dense(&u);
        let supg = norms.supg_sq_dense(&u).total();
        let l2 = norms.l2_sq_dense(&u);
        let rhs = supg * T::lit(0.5) - norms.analysis.nu * l2;
        let scale = a.abs().max(supg).max(T::one());
        let margin = (a - rhs) / scale;
        worst = worst.min(margin);
        if margin < -T::lit(1e-10) {
            failing.push(s);
        }
    }
    CoercivityReport {
        trials,
        violations: failing.len(),
        worst_margin: worst,
        failing_seeds: failing,
    }
}

/// Maximum relative residual of one low-rank step tested against the tangent
/// space at `Ũ (Yⁿ)ᵀ`. Operators are reassembled per sample from the model so the
/// check does not share code paths with the affine decomposition.
pub fn check_tangent_residual<T: Real>(
    problem: &DiscreteProblem<T>,
    scheme: Scheme,
    dt: T,
    u_n: &DlrState<T>,
    u_np1: &DlrState<T>,
    u_tilde: &DMatrix<T>,
) -> Result<T> {
    let space = &problem.space;
    let samples = &problem.samples;
    let coeffs = &problem.coeffs;
    let delta = &problem.delta;
    let nc = samples.len();
    let r = u_n.rank();
    if nc > 64 {
        return Err(Error::InvalidInput("tangent residual needs at most 64 samples".into()));
    }
    let b_bar = |x: [T; 2]| coeffs.mean_advection(x);
    let c_bar = |x: [T; 2]| coeffs.mean_reaction(x);
    let mass = space.mass()?;
    let time = mass.add(&space.supg_mass(&b_bar, delta)?)?;
    let stiff = space.stiffness()?;
    let mean_op = CsrMatrix::linear_combination(&[
        (coeffs.diffusion.mean, &stiff),
        (T::one(), &space.convection(&b_bar)?),
        (T::one(), &space.supg_convection(&b_bar, &b_bar, delta)?),
        (T::one(), &space.reaction(&c_bar)?),
        (T::one(), &space.supg_reaction(&c_bar, &b_bar, delta)?),
    ])?;
    let old = u_n.realizations();
    let new = u_np1.realizations();
    let t_next = u_n.t + dt;
    // Four contributions per sample: time term, explicit, implicit, forcing.
    let mut parts: Vec<[Vec<T>; 4]> = Vec::with_capacity(nc);
    for i in 0..nc {
        let y = samples.sample(i);
        let b_i = |x: [T; 2]| coeffs.model.advection_at(x, y);
        let c_i = |x: [T; 2]| coeffs.model.reaction_at(x, y);
        let full = CsrMatrix::linear_combination(&[
            (coeffs.diffusion.values[i], &stiff),
            (T::one(), &space.convection(&b_i)?),
            (T::one(), &space.supg_convection(&b_i, &b_bar, delta)?),
            (T::one(), &space.reaction(&c_i)?),
            (T::one(), &space.supg_reaction(&c_i, &b_bar, delta)?),
        ])?;
        let (explicit, implicit) = match scheme {
            Scheme::SemiImplicit => (
                CsrMatrix::linear_combination(&[(T::one(), &full), (-T::one(), &mean_op)])?,
                mean_op.clone(),
            ),
            Scheme::ImplicitEulerDeterministic => (CsrMatrix::zeros(full.nrows(), full.ncols()), full),
            Scheme::Explicit => (full, CsrMatrix::zeros(mean_op.nrows(), mean_op.ncols())),
        };
        let diff: Vec<T> = new
            .column(i)
            .iter()
            .zip(old.column(i).iter())
            .map(|(a, b)| (*a - *b) / dt)
            .collect();
        let f = |x: [T; 2]| coeffs.model.forcing_at(t_next, x, y);
        let load = space.load(&f, &b_bar, delta)?;
        parts.push([
            time.mul_vec(&diff),
            explicit.mul_vec(old.column(i).as_slice()),
            implicit.mul_vec(new.column(i).as_slice()),
            load.into_iter().map(|v| -v).collect(),
        ]);
    }

    // Tests: φ_k Y_j (Y₀ = 1) and Ũ_j z for z spanning the complement of {1, Y}.
    let mut tests_y: Vec<Vec<T>> = vec![vec![T::one(); nc]];
    for j in 0..r {
        tests_y.push(u_n.y.column(j).iter().copied().collect());
    }
    let complement = complement_basis(samples, &u_n.y)?;
    let mut worst = T::zero();
    let mut scale = T::zero();
    let w = samples.weights();
    for k in 0..problem.ndofs() {
        if problem.dirichlet.constrained[k] {
            continue;
        }
        for z in &tests_y {
            let mut total = T::zero();
            for part in 0..4 {
                let v = (0..nc).fold(T::zero(), |a, i| a + w[i] * z[i] * parts[i][part][k]);
                scale = scale.max(v.abs());
                total += v;
            }
            worst = worst.max(total.abs());
        }
    }
    for j in 1..=r {
        let uj = u_tilde.column(j);
        let proj: Vec<[T; 4]> = parts
            .iter()
            .map(|p| {
                let mut out = [T::zero(); 4];
                for (o, v) in out.iter_mut().zip(p.iter()) {
                    *o = crate::scalar::dot(uj.as_slice(), v);
                }
                out
            })
            .collect();
        for z in &complement {
            let mut total = T::zero();
            for part in 0..4 {
                let v = (0..nc).fold(T::zero(), |a, i| a + w[i] * z[i] * proj[i][part]);
                scale = scale.max(v.abs());
                total += v;
            }
            worst = worst.max(total.abs());
        }
    }
    Ok(if scale > T::zero() { worst / scale } else { T::zero() })
}

/// Orthonormal basis of the complement of `{1, Y₁, …, Y_R}` in `L²_μ̂`.
pub fn complement_basis<T: Real>(samples: &crate::stochastic::SampleSpace<T>, y: &DMatrix<T>) -> Result<Vec<Vec<T>>> {
    let nc = samples.len();
    let mut basis: Vec<Vec<T>> = Vec::new();
    let push = |v: Vec<T>, basis: &mut Vec<Vec<T>>, keep_small: bool| {
        let mut v = v;
        for _ in 0..2 {
            for b in basis.iter() {
                let c = samples.inner(b, &v);
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= c * *bi;
                }
            }
        }
        let n = samples.norm(&v);
        if keep_small || n > T::lit(1e-8) {
            v.iter_mut().for_each(|x| *x /= n);
            basis.push(v);
        }
    };
    push(vec![T::one(); nc], &mut basis, true);
    for j in 0..y.ncols() {
        push(y.column(j).iter().copied().collect(), &mut basis, true);
    }
    let lead = basis.len();
    for i in 0..nc {
        if basis.len() == nc {
            break;
        }
        let mut e = vec![T::zero(); nc];
        e[i] = T::one();
        push(e, &mut basis, false);
    }
    if basis.len() != nc {
        return Err(Error::RankLoss {
            rank: basis.len(),
            requested: nc,
        });
    }
    Ok(basis.split_off(lead))
}

/// Per-step record written to `norms.csv`.
#[derive(Clone, Debug)]
pub struct StepReport<T> {
    pub step: usize,
    pub t: T,
    /// `E‖u‖²`
    pub l2_sq: T,
    /// `E‖∇u‖²`
    pub grad_sq: T,
    pub supg: SupgNormParts<T>,
    /// `E‖f(t)‖²`
    pub forcing_sq: T,
    /// `‖U_k‖` in the mass norm.
    pub mode_norms: Vec<T>,
    pub gram_condition: T,
    pub orthogonality_defect: T,
    pub lemma_defect: T,
    pub tangent_residual: Option<T>,
}

impl<T: Real> StepReport<T> {
    pub fn csv_header(rank: usize) -> String {
        let mut h = String::from(
            "step,t,l2,grad,supg,supg_diffusion,supg_streamline,supg_reaction,forcing_sq,gram_condition,orthogonality_defect,lemma_defect,tangent_residual",
        );
        for k in 1..=rank {
            h.push_str(&format!(",mode{k}"));
        }
        h
    }

    pub fn csv_row(&self) -> String {
        let mut s = format!(
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},",
            self.step,
            self.t,
            self.l2_sq.sqrt(),
            self.grad_sq.sqrt(),
            self.supg.total().sqrt(),
            self.supg.diffusion,
            self.supg.streamline,
            self.supg.reaction,
            self.forcing_sq,
            self.gram_condition,
            self.orthogonality_defect,
            self.lemma_defect,
        );
        if let Some(r) = self.tangent_residual {
            s.push_str(&format!("{r:e}"));
        }
        for m in &self.mode_norms {
            s.push_str(&format!(",{m:e}"));
        }
        s
    }
}

pub fn write_reports<T: Real>(w: &mut impl Write, reports: &[StepReport<T>]) -> Result<()> {
    let rank = reports.first().map_or(0, |r| r.mode_norms.len());
    writeln!(w, "{}", StepReport::<T>::csv_header(rank))?;
    for r in reports {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    /// Implicit Euler with deterministic coefficients.
    ImStab,
    /// Semi-implicit scheme.
    SiStab,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundCase {
    /// `μ₀ > 0`
    I,
    /// `f = 0`
    II,
    /// `Δt < 1/(1+2ν)`
    III,
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Theorem::ImStab => "im_stab",
            Theorem::SiStab => "si_stab",
        })
    }
}

impl fmt::Display for BoundCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundCase::I => "i",
            BoundCase::II => "ii",
            BoundCase::III => "iii",
        })
    }
}

/// Problem data the bounds and their preconditions depend on.
#[derive(Clone, Debug)]
pub struct BoundContext<T> {
    pub dt: T,
    /// Length of the time interval.
    pub horizon: T,
    pub nu: T,
    pub mu0: T,
    pub delta: Vec<T>,
    pub h: Vec<T>,
    pub c_sup: Vec<T>,
    pub eps_hat: T,
    pub c_inverse: T,
    pub c_e: T,
    pub dim: usize,
    /// Skip the diffusion part of the coercivity bound on δ (valid for P1).
    pub drop_p1_diffusion_bound: bool,
    pub moderate: ModerateStochasticity<T>,
    pub forcing_zero: bool,
    /// `‖∇u⁰‖²` and `‖μ^{1/2}u⁰‖²` for the semi-implicit initial term.
    pub initial_grad_sq: T,
    pub initial_mu_sq: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundStatus {
    Pass,
    Fail,
}

/// Both sides of one stability bound, taken at the step with the smallest margin.
#[derive(Clone, Debug)]
pub struct BoundLedger<T> {
    pub theorem: Theorem,
    pub case: BoundCase,
    pub c1: T,
    pub c2: T,
    pub c3: T,
    pub lhs: T,
    pub rhs: T,
    pub margin: T,
    pub status: BoundStatus,
    /// Step at which `lhs`/`rhs` were recorded.
    pub step: usize,
    /// Alternative left-side constant and its worst margin, if any.
    pub alt_c1: Option<T>,
    pub alt_margin: Option<T>,
}

#[derive(Clone, Debug)]
pub enum BoundOutcome<T> {
    Evaluated(BoundLedger<T>),
    NotApplicable { theorem: Theorem, case: BoundCase, reason: String },
}

impl<T: Real> BoundOutcome<T> {
    pub fn passed(&self) -> bool {
        matches!(self, BoundOutcome::Evaluated(l) if l.status == BoundStatus::Pass)
    }

    pub fn is_applicable(&self) -> bool {
        matches!(self, BoundOutcome::Evaluated(_))
    }

    pub fn csv_header() -> &'static str {
        "theorem,case,status,c1,c2,c3,lhs,rhs,margin,step,alt_c1,alt_margin,reason"
    }

    pub fn csv_row(&self) -> String {
        match self {
            BoundOutcome::Evaluated(l) => format!(
                "{},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{},{},{},",
                l.theorem,
                l.case,
                if l.status == BoundStatus::Pass { "PASS" } else { "FAIL" },
                l.c1,
                l.c2,
                l.c3,
                l.lhs,
                l.rhs,
                l.margin,
                l.step,
                l.alt_c1.map_or(String::new(), |v| format!("{v:e}")),
                l.alt_margin.map_or(String::new(), |v| format!("{v:e}")),
            ),
            BoundOutcome::NotApplicable { theorem, case, reason } => {
                format!("{theorem},{case},NOT_APPLICABLE,,,,,,,,,,{}", reason.replace(',', ";"))
            }
        }
    }
}

fn within<T: Real>(value: T, bound: T) -> bool {
    value <= bound * (T::one() + T::lit(1e-12))
}

fn check_preconditions<T: Real>(theorem: Theorem, case: BoundCase, ctx: &BoundContext<T>) -> std::result::Result<(), String> {
    match case {
        BoundCase::I if !(ctx.mu0 > T::zero()) => return Err(format!("case (i) needs mu0 > 0, got {}", ctx.mu0)),
        BoundCase::II if !ctx.forcing_zero => return Err("case (ii) needs f = 0".into()),
        BoundCase::II if ctx.nu > T::zero() => return Err(format!("case (ii) needs nu = 0, got {}", ctx.nu)),
        BoundCase::III if !(ctx.dt * (T::one() + T::lit(2.0) * ctx.nu) < T::one()) => {
            return Err("case (iii) needs dt < 1/(1 + 2 nu)".into())
        }
        _ => {}
    }
    match theorem {
        Theorem::ImStab => {
            let coer = crate::coefficients::delta_coercivity(
                &ctx.h,
                &ctx.c_sup,
                ctx.eps_hat,
                ctx.c_inverse,
                ctx.c_e,
                ctx.dim,
                ctx.drop_p1_diffusion_bound,
            );
            for (k, dk) in ctx.delta.iter().enumerate() {
                if !within(*dk, ctx.dt / T::lit(4.0)) {
                    return Err(format!("delta on triangle {k} exceeds dt/4"));
                }
                if !within(*dk, coer[k]) {
                    return Err(format!("delta on triangle {k} exceeds the coercivity bound"));
                }
            }
        }
        Theorem::SiStab => {
            let si = crate::coefficients::delta_semi_implicit(
                &ctx.h,
                &ctx.c_sup,
                ctx.eps_hat,
                ctx.c_inverse,
                ctx.c_e,
                ctx.dim,
                ctx.dt,
            );
            if let Some(k) = ctx.delta.iter().zip(&si).position(|(a, b)| !within(*a, *b)) {
                return Err(format!("delta on triangle {k} exceeds the semi-implicit bound"));
            }
            if !ctx.moderate.eps_ok {
                return Err("diffusion fluctuation exceeds eps_hat/32".into());
            }
            if !ctx.moderate.c_ok {
                return Err("reaction fluctuation exceeds mu/32".into());
            }
        }
    }
    Ok(())
}

/// Evaluates a norm-stability bound along a trajectory.
///
/// `trajectory[0]` must describe the initial state; the bound is checked after
/// every step and reported at the step with the smallest relative margin.
pub fn evaluate_bound<T: Real>(
    trajectory: &[StepReport<T>],
    theorem: Theorem,
    case: BoundCase,
    ctx: &BoundContext<T>,
) -> BoundOutcome<T> {
    if let Err(reason) = check_preconditions(theorem, case, ctx) {
        return BoundOutcome::NotApplicable { theorem, case, reason };
    }
    let Some(first) = trajectory.first() else {
        return BoundOutcome::NotApplicable {
            theorem,
            case,
            reason: "empty trajectory".into(),
        };
    };
    let delta_max = ctx.delta.iter().fold(T::zero(), |a, d| a.max(*d));
    let c2_forcing = if ctx.mu0 > T::zero() {
        T::lit(2.0) / ctx.mu0 + T::lit(4.0) * delta_max
    } else {
        T::zero()
    };
    let c3 = ((T::one() + T::lit(2.0) * ctx.nu) * ctx.horizon).exp();
    let eighth = T::lit(0.125);
    let a0 = first.l2_sq + eighth * ctx.eps_hat * ctx.initial_grad_sq + eighth * ctx.initial_mu_sq;
    let (c1, c2, alt_c1, base, gronwall) = match (theorem, case) {
        (Theorem::ImStab, BoundCase::I) => (T::lit(0.5), c2_forcing, None, first.l2_sq, false),
        (Theorem::ImStab, BoundCase::II) => (T::lit(0.75), T::zero(), None, first.l2_sq, false),
        (Theorem::ImStab, BoundCase::III) => (T::lit(0.5), T::one(), None, first.l2_sq, true),
        (Theorem::SiStab, BoundCase::I) => (T::lit(0.25), c2_forcing, None, a0, false),
        (Theorem::SiStab, BoundCase::II) => (T::lit(0.5), T::zero(), Some(T::lit(0.25)), a0, false),
        (Theorem::SiStab, BoundCase::III) => (T::lit(0.25), T::one(), None, a0, true),
    };
    let mut supg_sum = T::zero();
    let mut f_sum = T::zero();
    let mut worst: Option<(T, T, T, usize, T)> = None;
    let mut alt_worst: Option<T> = None;
    let mut pass = true;
    for rep in &trajectory[1..] {
        supg_sum += rep.supg.total();
        f_sum += rep.forcing_sq;
        let lhs = rep.l2_sq + ctx.dt * c1 * supg_sum;
        let rhs = if gronwall {
            c3 * (base + ctx.dt * f_sum)
        } else {
            base + ctx.dt * c2 * f_sum
        };
        let margin = rhs - lhs;
        if !(lhs <= rhs + T::lit(1e-10) * rhs) {
            pass = false;
        }
        let rel = margin / rhs.abs().max(T::lit(1e-300));
        if worst.is_none_or(|w| rel < w.4 || !rel.is_finite()) {
            worst = Some((lhs, rhs, margin, rep.step, rel));
        }
        if let Some(a) = alt_c1 {
            let alt = rhs - (rep.l2_sq + ctx.dt * a * supg_sum);
            alt_worst = Some(alt_worst.map_or(alt, |w: T| w.min(alt)));
        }
    }
    let (lhs, rhs, margin, step, _) = worst.unwrap_or((first.l2_sq, base, base - first.l2_sq, 0, T::zero()));
    BoundOutcome::Evaluated(BoundLedger {
        theorem,
        case,
        c1,
        c2: if gronwall { T::zero() } else { c2 },
        c3: if gronwall { c3 } else { T::zero() },
        lhs,
        rhs,
        margin,
        status: if pass { BoundStatus::Pass } else { BoundStatus::Fail },
        step,
        alt_c1,
        alt_margin: alt_worst,
    })
}
