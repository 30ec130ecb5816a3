mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use supg_dlr::coefficients::{AdvectionKind, ConstantAdrParams};
use supg_dlr::integrator::{step_count, Integrator, Scheme, SchemeConfig};
use supg_dlr::operator::Stabilization;
use supg_dlr::Error;

fn deterministic_params() -> ConstantAdrParams {
    ConstantAdrParams {
        eps: 0.02,
        advection: AdvectionKind::Rotating,
        c: 0.4,
        f: 1.0,
        ..Default::default()
    }
}

/// Dense per-sample march `[(M+S)/Δt + Ā] uⁿ⁺¹ = (M+S)/Δt uⁿ - A⋆ uⁿ + F`.
fn dense_march(p: &supg_dlr::operator::DiscreteProblem<f64>, fields: &DMatrix<f64>, dt: f64, steps: usize) -> DMatrix<f64> {
    let ops = sample_operators(p);
    let lhs = &ops.time / dt + &ops.a_mean;
    let mut u = fields.clone();
    for _ in 0..steps {
        let mut next = u.clone();
        for i in 0..p.n_samples() {
            let un = u.column(i).into_owned();
            let rhs = &ops.time / dt * &un - (&ops.a[i] - &ops.a_mean) * &un + DVector::from_vec(ops.load.clone());
            next.set_column(i, &dirichlet_solve(p, &lhs, &rhs));
        }
        u = next;
    }
    u
}

#[test]
fn deterministic_coefficients_are_exact_at_any_rank() {
    for scheme in [Scheme::SemiImplicit, Scheme::ImplicitEulerDeterministic] {
        for stab in [Stabilization::None, Stabilization::Supg] {
            let p = problem(5, mc_samples(12, 1, 1), &deterministic_params(), stab, 0.02, &[("boundary", 0.3)]);
            let dt = 0.05;
            let init = random_state(&p, 2, 2);
            let integ = Integrator::new(&p, SchemeConfig::new(scheme, dt)).unwrap();
            let mut st = init.clone();
            for _ in 0..6 {
                st = integ.step(&st).unwrap().0;
            }
            let expected = dense_march(&p, &init.realizations(), dt, 6);
            let dev = (st.realizations() - expected).amax();
            assert!(dev < 1e-11, "{scheme:?} {stab:?}: {dev:e}");
        }
    }
}

#[test]
fn full_rank_matches_dense_march_with_random_coefficients() {
    for stab in [Stabilization::None, Stabilization::Supg] {
        let p = problem(3, mc_samples(4, 1, 3), &random_params(), stab, 0.03, &[("boundary", 1.0)]);
        let dt = 0.05;
        let init = random_state(&p, 3, 4);
        let integ = Integrator::new(&p, SchemeConfig::new(Scheme::SemiImplicit, dt)).unwrap();
        let mut st = init.clone();
        let mut fields = init.realizations();
        for _ in 0..10 {
            st = integ.step(&st).unwrap().0;
            fields = dense_march(&p, &fields, dt, 1);
            assert!((st.realizations() - &fields).amax() < 1e-10);
        }
    }
}

#[test]
fn steps_keep_stochastic_basis_and_orthogonality_lemma() {
    let p = problem(6, mc_samples(30, 1, 5), &random_params(), Stabilization::Supg, 0.02, &[]);
    let integ = Integrator::new(&p, SchemeConfig::new(Scheme::SemiImplicit, 0.02)).unwrap();
    let mut st = random_state(&p, 3, 6);
    for _ in 0..20 {
        let (next, info) = integ.step(&st).unwrap();
        assert!(p.samples.orthonormality_defect(&next.y) < 1e-12);
        assert!(info.lemma_defect < 1e-11, "{:e}", info.lemma_defect);
        assert!(info.skewed_gram_condition.is_finite());
        st = next;
    }
}

#[test]
fn fully_implicit_scheme_refuses_random_coefficients() {
    let p = problem(3, mc_samples(5, 1, 7), &random_params(), Stabilization::Supg, 0.02, &[]);
    assert!(matches!(
        Integrator::new(&p, SchemeConfig::new(Scheme::ImplicitEulerDeterministic, 0.1)),
        Err(Error::InvalidInput(_))
    ));
}

#[test]
fn run_reaches_final_time_and_reports_every_step() {
    let p = problem(4, mc_samples(8, 1, 8), &random_params(), Stabilization::Supg, 0.02, &[]);
    let mut integ = Integrator::new(&p, SchemeConfig::new(Scheme::SemiImplicit, 0.1)).unwrap();
    integ.set_dt(0.05).unwrap();
    let mut seen = Vec::new();
    let last = integ
        .run(random_state(&p, 2, 9), 0.3, |ev| {
            seen.push(ev.index);
            assert!((ev.current.t - ev.previous.t - 0.05).abs() < 1e-15);
            Ok(())
        })
        .unwrap();
    assert_eq!(seen, vec![1, 2, 3, 4, 5, 6]);
    assert!((last.t - 0.3).abs() < 1e-12);
    assert_eq!(step_count(0.0, 1.0, 0.1), 10);
    assert_eq!(step_count(0.0, 1.0 + 1e-13, 0.1), 10);
    assert_eq!(step_count(0.0, 1.05, 0.1), 11);
    assert_eq!(step_count(1.0, 1.0, 0.1), 0);
}

#[test]
fn explicit_blow_up_is_detected() {
    let params = ConstantAdrParams { eps: 1.0, ..Default::default() };
    let p = problem(8, mc_samples(4, 1, 9), &params, Stabilization::None, 0.0, &[]);
    let mut cfg = SchemeConfig::new(Scheme::Explicit, 1.0);
    cfg.blowup_factor = 1e6;
    let integ = Integrator::new(&p, cfg).unwrap();
    let err = integ.run(random_state(&p, 1, 10), 100.0, |_| Ok(())).unwrap_err();
    assert!(matches!(err, Error::BlowUp { .. }), "{err}");
}

#[test]
fn invalid_time_step_is_rejected() {
    let p = problem(2, mc_samples(3, 1, 1), &random_params(), Stabilization::None, 0.0, &[]);
    assert!(Integrator::new(&p, SchemeConfig::new(Scheme::SemiImplicit, 0.0)).is_err());
    assert!(Integrator::new(&p, SchemeConfig::new(Scheme::SemiImplicit, f64::NAN)).is_err());
}
