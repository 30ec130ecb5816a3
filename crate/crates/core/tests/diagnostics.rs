mod common;

use common::*;
use nalgebra::DMatrix;
use supg_dlr::coefficients::{AdvectionKind, ConstantAdrParams, ModerateStochasticity, ReactionAnalysis};
use supg_dlr::diagnostics::*;
use supg_dlr::integrator::{Integrator, Scheme, SchemeConfig};
use supg_dlr::operator::Stabilization;

fn nodal(p: &supg_dlr::operator::DiscreteProblem<f64>, f: impl Fn([f64; 2]) -> f64) -> DMatrix<f64> {
    let mesh = &p.space.mesh;
    DMatrix::from_fn(p.ndofs(), p.n_samples(), |v, _| f(mesh.vertex(v)))
}

#[test]
fn md_metric_is_range() {
    assert_eq!(md_metric(&[0.5, -0.25, 1.0, 0.0]), 1.25);
    assert_eq!(md_metric::<f64>(&[]), 0.0);
    assert_eq!(md_metric(&[3.0]), 0.0);
}

#[test]
fn norms_of_a_linear_field_match_closed_forms() {
    let params = ConstantAdrParams {
        eps: 0.1,
        advection: AdvectionKind::Constant,
        bx: 2.0,
        by: -1.0,
        c: 0.5,
        ..Default::default()
    };
    let delta = 0.03;
    let p = problem(6, mc_samples(3, 1, 1), &params, Stabilization::Supg, delta, &[]);
    let analysis = ReactionAnalysis::new(&p.space, &p.coeffs).unwrap();
    let norms = NormEvaluator::new(&p, &analysis).unwrap();
    let u = nodal(&p, |x| x[0]);
    // ∫ x² = 1/3, |∇x|² = 1, b·∇x = 2, μ = c - |c|/2.
    assert!((norms.l2_sq_dense(&u) - 1.0 / 3.0).abs() < 1e-12);
    assert!((norms.grad_sq_dense(&u) - 1.0).abs() < 1e-12);
    let parts = norms.supg_sq_dense(&u);
    assert!((parts.diffusion - 0.1).abs() < 1e-12);
    assert!((parts.streamline - delta * 4.0).abs() < 1e-12);
    assert!((parts.reaction - 0.25 / 3.0).abs() < 1e-12);
    assert!((parts.total() - (0.1 + delta * 4.0 + 0.25 / 3.0)).abs() < 1e-12);
}

#[test]
fn low_rank_norms_agree_with_realisations() {
    let p = problem(5, mc_samples(9, 1, 2), &random_params(), Stabilization::Supg, 0.02, &[]);
    let analysis = ReactionAnalysis::new(&p.space, &p.coeffs).unwrap();
    let norms = NormEvaluator::new(&p, &analysis).unwrap();
    let st = random_state(&p, 3, 3);
    let fields = st.realizations();
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
    assert!(rel(norms.l2_sq(&st), norms.l2_sq_dense(&fields)) < 1e-12);
    assert!(rel(norms.grad_sq(&st), norms.grad_sq_dense(&fields)) < 1e-12);
    let (a, b) = (norms.supg_sq(&st), norms.supg_sq_dense(&fields));
    assert!(rel(a.streamline, b.streamline) < 1e-12);
    assert!(rel(a.reaction, b.reaction) < 1e-12);
    assert!(rel(a.total(), b.total()) < 1e-12);
}

#[test]
fn bilinear_form_matches_per_sample_operators() {
    let p = problem(4, mc_samples(5, 1, 4), &random_params(), Stabilization::Supg, 0.02, &[]);
    let analysis = ReactionAnalysis::new(&p.space, &p.coeffs).unwrap();
    let norms = NormEvaluator::new(&p, &analysis).unwrap();
    let ops = sample_operators(&p);
    let mut r = rng(5);
    let u = DMatrix::from_fn(p.ndofs(), p.n_samples(), |_, _| uniform(&mut r));
    let expected: f64 = (0..p.n_samples())
        .map(|i| p.samples.weights()[i] * u.column(i).dot(&(&ops.a[i] * u.column(i))))
        .sum();
    assert!((norms.bilinear_dense(&u) - expected).abs() < 1e-11 * expected.abs().max(1.0));
}

#[test]
fn coercivity_holds_for_admissible_delta() {
    let p = problem(6, mc_samples(6, 1, 6), &random_params(), Stabilization::Supg, 0.01, &[]);
    let analysis = ReactionAnalysis::new(&p.space, &p.coeffs).unwrap();
    let norms = NormEvaluator::new(&p, &analysis).unwrap();
    let report = check_coercivity(&norms, 50, 11);
    assert!(report.passed(), "{report:?}");
    assert_eq!(report.trials, 50);
    assert!(report.failing_seeds.is_empty());
    assert!(report.worst_margin >= -1e-10);
}

#[test]
fn coercivity_fails_for_oversized_delta_when_advection_reverses() {
    use supg_dlr::coefficients::CoefficientModel;
    use supg_dlr::operator::DiscreteProblem;
    use supg_dlr::stochastic::SampleSpace;
    // Two realisations whose fields deviate from the mean field by more than its size.
    let samples = SampleSpace::new(vec![vec![5000.0, -3.0, 0.0, 0.0], vec![6000.0, 3.0, 0.0, 0.0]], vec![0.5, 0.5]).unwrap();
    let sp = space(6);
    let ne = sp.n_elements();
    let model = CoefficientModel::boundary_layer(0.0);
    let p = DiscreteProblem::new(sp, samples, &model, Stabilization::Supg, vec![1.0; ne], &Default::default()).unwrap();
    let analysis = ReactionAnalysis::new(&p.space, &p.coeffs).unwrap();
    let norms = NormEvaluator::new(&p, &analysis).unwrap();
    let report = check_coercivity(&norms, 20, 1);
    assert!(!report.passed(), "{report:?}");
    assert_eq!(report.violations, report.failing_seeds.len());
    assert!(report.worst_margin < 0.0);
}

#[test]
fn tangent_residual_vanishes_on_an_exact_step_and_detects_perturbation() {
    for stab in [Stabilization::None, Stabilization::Supg] {
        let p = problem(3, mc_samples(6, 1, 8), &random_params(), stab, 0.03, &[("boundary", 0.5)]);
        let dt = 0.05;
        let integ = Integrator::new(&p, SchemeConfig::new(Scheme::SemiImplicit, dt)).unwrap();
        let st = random_state(&p, 2, 9);
        let (next, info) = integ.step(&st).unwrap();
        let res = check_tangent_residual(&p, Scheme::SemiImplicit, dt, &st, &next, &info.u_tilde).unwrap();
        assert!(res < 1e-9, "{stab:?}: {res:e}");

        let mut bad = next.clone();
        bad.u[(4, 0)] += 1e-3;
        let res = check_tangent_residual(&p, Scheme::SemiImplicit, dt, &st, &bad, &info.u_tilde).unwrap();
        assert!(res > 1e-5, "{stab:?}: {res:e}");
    }
}

#[test]
fn complement_basis_is_orthonormal_and_orthogonal_to_modes() {
    let samples = mc_samples(7, 1, 10);
    let mut r = rng(11);
    let raw = DMatrix::from_fn(7, 2, |_, _| uniform(&mut r));
    let (y, _) = samples.orthonormalize(&raw).unwrap();
    let basis = complement_basis(&samples, &y).unwrap();
    assert_eq!(basis.len(), 7 - 1 - 2);
    let one = vec![1.0; 7];
    for (a, za) in basis.iter().enumerate() {
        assert!(samples.inner(za, &one).abs() < 1e-12);
        for j in 0..2 {
            assert!(samples.inner(za, y.column(j).as_slice()).abs() < 1e-12);
        }
        for (b, zb) in basis.iter().enumerate() {
            let target = if a == b { 1.0 } else { 0.0 };
            assert!((samples.inner(za, zb) - target).abs() < 1e-12);
        }
    }
}

fn report(step: usize, l2: f64, supg: f64, forcing: f64) -> StepReport<f64> {
    StepReport {
        step,
        t: step as f64 * 0.1,
        l2_sq: l2,
        grad_sq: 0.0,
        supg: SupgNormParts {
            diffusion: supg,
            streamline: 0.0,
            reaction: 0.0,
        },
        forcing_sq: forcing,
        mode_norms: vec![1.0, 0.5],
        gram_condition: 1.0,
        orthogonality_defect: 0.0,
        lemma_defect: 0.0,
        tangent_residual: None,
    }
}

fn context() -> BoundContext<f64> {
    BoundContext {
        dt: 0.1,
        horizon: 0.3,
        nu: 0.0,
        mu0: 0.0,
        delta: vec![0.0; 4],
        h: vec![0.5; 4],
        c_sup: vec![1.0; 4],
        eps_hat: 0.01,
        c_inverse: 10.0,
        c_e: 1.0,
        dim: 2,
        drop_p1_diffusion_bound: false,
        moderate: ModerateStochasticity {
            eps_ok: true,
            eps_ratio: 0.0,
            c_ok: true,
            c_ratio: 0.0,
        },
        forcing_zero: true,
        initial_grad_sq: 0.0,
        initial_mu_sq: 0.0,
    }
}

#[test]
fn case_two_ledger_passes_and_fails_by_hand() {
    // ‖u_N‖² + Δt·¾·Σ‖u‖²_SUPG ≤ ‖u₀‖²
    let ctx = context();
    let good = vec![report(0, 1.0, 0.0, 0.0), report(1, 0.8, 1.0, 0.0), report(2, 0.6, 1.0, 0.0)];
    let BoundOutcome::Evaluated(l) = evaluate_bound(&good, Theorem::ImStab, BoundCase::II, &ctx) else {
        panic!("expected evaluation");
    };
    assert_eq!(l.status, BoundStatus::Pass);
    assert_eq!(l.c1, 0.75);
    // Step 2: 0.6 + 0.1·0.75·2 = 0.75 and step 1: 0.8 + 0.075 = 0.875.
    assert_eq!(l.step, 1);
    assert!((l.lhs - 0.875).abs() < 1e-15);
    assert!((l.rhs - 1.0).abs() < 1e-15);

    let bad = vec![report(0, 1.0, 0.0, 0.0), report(1, 0.95, 1.0, 0.0)];
    let out = evaluate_bound(&bad, Theorem::ImStab, BoundCase::II, &ctx);
    assert!(out.is_applicable() && !out.passed());
}

#[test]
fn case_constants_follow_reaction_and_horizon() {
    let mut ctx = context();
    ctx.forcing_zero = false;
    ctx.mu0 = 0.5;
    ctx.delta = vec![0.01, 0.02, 0.0, 0.0];
    ctx.c_sup = vec![0.0; 4];
    let traj = vec![report(0, 1.0, 0.0, 0.0), report(1, 1.0, 0.1, 1.0)];
    let BoundOutcome::Evaluated(l) = evaluate_bound(&traj, Theorem::ImStab, BoundCase::I, &ctx) else {
        panic!("case (i) should apply");
    };
    assert!((l.c2 - (2.0 / 0.5 + 4.0 * 0.02)).abs() < 1e-14);
    assert_eq!(l.status, BoundStatus::Pass);

    ctx.mu0 = 0.0;
    ctx.nu = 0.5;
    let BoundOutcome::Evaluated(l) = evaluate_bound(&traj, Theorem::ImStab, BoundCase::III, &ctx) else {
        panic!("case (iii) should apply");
    };
    assert!((l.c3 - (2.0f64 * 0.3).exp()).abs() < 1e-14);
}

#[test]
fn preconditions_gate_the_bounds() {
    let traj = vec![report(0, 1.0, 0.0, 0.0), report(1, 0.5, 0.0, 0.0)];
    let mut ctx = context();
    assert!(!evaluate_bound(&traj, Theorem::ImStab, BoundCase::I, &ctx).is_applicable());
    ctx.nu = 0.2;
    assert!(!evaluate_bound(&traj, Theorem::ImStab, BoundCase::II, &ctx).is_applicable());
    ctx.nu = 0.0;
    ctx.delta = vec![0.1; 4];
    assert!(!evaluate_bound(&traj, Theorem::ImStab, BoundCase::II, &ctx).is_applicable());
    ctx.delta = vec![0.0; 4];
    ctx.moderate.eps_ok = false;
    assert!(evaluate_bound(&traj, Theorem::ImStab, BoundCase::II, &ctx).is_applicable());
    let out = evaluate_bound(&traj, Theorem::SiStab, BoundCase::II, &ctx);
    let BoundOutcome::NotApplicable { reason, .. } = &out else {
        panic!("moderate stochasticity should gate the semi-implicit bound");
    };
    assert!(reason.contains("diffusion"));
    assert!(out.csv_row().contains("NOT_APPLICABLE"));
    ctx.dt = 2.0;
    ctx.nu = 0.5;
    assert!(!evaluate_bound(&traj, Theorem::ImStab, BoundCase::III, &ctx).is_applicable());
}

#[test]
fn csv_rows_match_headers() {
    let cols = |s: &str| s.split(',').count();
    let mut r = report(3, 1.0, 0.5, 0.0);
    let header = StepReport::<f64>::csv_header(2);
    assert_eq!(cols(&r.csv_row()), cols(&header));
    r.tangent_residual = Some(1e-12);
    assert_eq!(cols(&r.csv_row()), cols(&header));
    let mut buf = Vec::new();
    write_reports(&mut buf, &[r.clone(), r]).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 3);

    let ctx = context();
    let traj = vec![report(0, 1.0, 0.0, 0.0), report(1, 0.5, 0.0, 0.0)];
    let ledger_cols = cols(BoundOutcome::<f64>::csv_header());
    assert_eq!(cols(&evaluate_bound(&traj, Theorem::SiStab, BoundCase::II, &ctx).csv_row()), ledger_cols);
    assert_eq!(cols(&evaluate_bound(&traj, Theorem::SiStab, BoundCase::I, &ctx).csv_row()), ledger_cols);
}
