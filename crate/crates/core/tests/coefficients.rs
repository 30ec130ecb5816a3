mod common;

use approx::assert_relative_eq;
use common::*;
use supg_dlr::coefficients::*;
use supg_dlr::stochastic::{Distribution, SampleSpace};

fn two_point() -> SampleSpace<f64> {
    SampleSpace::new(vec![vec![-1.0], vec![1.0]], vec![0.5, 0.5]).unwrap()
}

fn mc(n: usize, dim: usize, seed: u64) -> SampleSpace<f64> {
    SampleSpace::monte_carlo(&Distribution::Uniform(vec![(-1.0, 1.0); dim]), n, seed).unwrap()
}

fn constant(p: ConstantAdrParams, samples: &SampleSpace<f64>) -> SampledCoefficients<f64> {
    SampledCoefficients::new(&CoefficientModel::constant_adr(&p), samples).unwrap()
}

#[test]
fn rotating_body_coefficients() {
    let m = CoefficientModel::<f64>::rotating_body();
    assert_eq!(m.parameter_dim, 3);
    assert_relative_eq!((m.diffusion)(&[0.5, 0.0, 0.0]), 10f64.powf(-15.5), max_relative = 1e-14);
    assert_eq!(m.advection_at([0.2, 0.9], &[0.0; 3]), [0.5 - 0.9, 0.2 - 0.5]);
    assert_eq!(m.divergence_at([0.3, 0.3], &[0.0; 3]), 0.0);
    assert!(!m.has_forcing());
}

#[test]
fn boundary_layer_mean_advection_is_one_one_after_centring() {
    let s = SampleSpace::<f64>::tensor_grid(&[(5000.0, 6000.0), (-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0)], 3).unwrap();
    let y2: Vec<f64> = (0..s.len()).map(|i| s.sample(i)[1] + 0.25).collect();
    let s = SampleSpace::new((0..s.len()).map(|i| {
        let mut p = s.sample(i).to_vec();
        p[1] = y2[i];
        p
    }).collect(), s.weights().to_vec()).unwrap();
    let k = s.expectation(&y2);
    let c = SampledCoefficients::new(&CoefficientModel::boundary_layer(k), &s).unwrap();
    for x in [[0.0, 0.0], [0.3, 0.8], [1.0, 1.0]] {
        let b = c.mean_advection(x);
        assert!((b[0] - 1.0).abs() < 1e-12 && (b[1] - 1.0).abs() < 1e-12);
    }
    assert_relative_eq!(c.eps_hat, 1.0 / 6000.0, max_relative = 1e-14);
    assert_relative_eq!(c.c_e, 6000.0 / 5000.0, max_relative = 1e-14);
}

#[test]
fn sampled_terms_split_into_mean_and_fluctuation() {
    let s = mc(20, 1, 1);
    let c = constant(
        ConstantAdrParams {
            eps: 1.0,
            eps_fluct: 0.3,
            ..Default::default()
        },
        &s,
    );
    let d = &c.diffusion;
    assert!(!d.is_deterministic());
    for i in 0..s.len() {
        assert_relative_eq!(d.mean + d.fluct[i], d.values[i], epsilon = 1e-15);
        assert_relative_eq!(d.values[i], 1.0 + 0.3 * s.sample(i)[0], epsilon = 1e-15);
    }
    assert!(s.expectation(&d.fluct).abs() < 1e-15);
    assert!(c.advection[0].is_deterministic());
}

#[test]
fn reaction_analysis_shift_and_closed_form_mu() {
    let sp = space(3);
    let s = two_point();
    // c ≥ 0 and div b = 0 give μ = c/2 with no shift.
    let a = ReactionAnalysis::new(&sp, &constant(ConstantAdrParams { c: 2.0, ..Default::default() }, &s)).unwrap();
    assert_eq!(a.nu, 0.0);
    assert_relative_eq!(a.mu0, 1.0);
    assert!(matches!(a.mu, MuField::Deterministic(_)));
    assert_relative_eq!(a.mu_at(4, 2, 1), 1.0);
    assert!(a.c_sup.iter().all(|v| *v == 2.0));
    // Negative reaction needs a shift ν = 3|c|/2.
    let a = ReactionAnalysis::new(&sp, &constant(ConstantAdrParams { c: -1.0, ..Default::default() }, &s)).unwrap();
    assert_relative_eq!(a.nu, 1.5);
    assert_relative_eq!(a.mu0, 0.0);
    // No reaction at all.
    let a = ReactionAnalysis::new(&sp, &constant(ConstantAdrParams::default(), &s)).unwrap();
    assert!(matches!(a.mu, MuField::Zero));
    // Random reaction keeps per-sample values.
    let p = ConstantAdrParams { c: 2.0, c_fluct: 1.0, ..Default::default() };
    let a = ReactionAnalysis::new(&sp, &constant(p, &s)).unwrap();
    assert!(matches!(a.mu, MuField::Random(_)));
    assert_relative_eq!(a.mu_at(0, 0, 0), 0.5);
    assert_relative_eq!(a.mu_at(0, 0, 1), 1.5);
    assert_relative_eq!(a.c_sup[0], 3.0);
}

#[test]
fn coercivity_delta_matches_formula() {
    let h = vec![2f64.sqrt() / 8.0; 3];
    let c = vec![4.0, 0.0, 0.0];
    let (eps, ci) = (0.01, 3.7);
    let d = delta_coercivity(&h, &c, eps, ci, 1.0, 2, false);
    let diff = h[0] * h[0] / (4.0 * ci * ci * eps);
    assert_relative_eq!(d[0], (1.0f64 / 8.0).min(diff));
    assert_relative_eq!(d[1], diff);
    let dropped = delta_coercivity(&h, &c, eps, ci, 1.0, 2, true);
    assert_relative_eq!(dropped[0], 0.125);
    assert!(dropped[1].is_infinite());
    let capped = cap_delta(&dropped, &delta_experiment(&h));
    assert_relative_eq!(capped[1], h[1] / 4.0);
}

#[test]
fn semi_implicit_delta_never_exceeds_coercivity_delta() {
    let h: Vec<f64> = (1..20).map(|k| 0.01 * k as f64).collect();
    let c: Vec<f64> = (0..19).map(|k| (k % 5) as f64).collect();
    for (eps, ci, ce, dt) in [(1e-3, 2.0, 1.0, 0.1), (0.5, 5.0, 3.0, 1e-3), (1e-8, 1.0, 1.5, 10.0)] {
        let si = delta_semi_implicit(&h, &c, eps, ci, ce, 2, dt);
        let co = delta_coercivity(&h, &c, eps, ci, ce, 2, false);
        for (a, b) in si.iter().zip(&co) {
            assert!(a <= b);
        }
        // Formula re-evaluation.
        for k in 0..h.len() {
            let r = if c[k] > 0.0 { 1.0 / (2.0 * c[k]) } else { f64::INFINITY };
            let dd = h[k] * h[k] / (2.0 * eps * ci * ci * ce.max(1.0).powi(2) * 2.0);
            assert_relative_eq!(si[k], r.min(dd).min(2.0 * dt) / 8.0, max_relative = 1e-14);
        }
    }
}

#[test]
fn inverse_constant_certifies_inequality() {
    let sp = space(8);
    let ci = inverse_inequality_constant(&sp).unwrap();
    let h = sp.mesh.h();
    let (m, k) = (sp.mass().unwrap(), sp.stiffness().unwrap());
    let mut r = rng(42);
    for _ in 0..1000 {
        let v: Vec<f64> = (0..sp.ndofs())
            .map(|i| if sp.mesh.is_boundary(i) { 0.0 } else { uniform(&mut r) })
            .collect();
        let grad = k.bilinear(&v, &v).sqrt();
        let l2 = m.bilinear(&v, &v).sqrt();
        assert!(grad <= ci / h * l2 * (1.0 + 1e-12));
    }
}

#[test]
fn peclet_numbers_and_flag() {
    let sp = space(4);
    let s = two_point();
    let c = constant(ConstantAdrParams { eps: 0.01, ..Default::default() }, &s);
    let p = local_peclet(&sp, &c);
    let expected = sp.mesh.h() / (2.0 * 0.01);
    assert_relative_eq!(p.sample_max[0], expected, max_relative = 1e-14);
    assert!(p.advection_dominated);
    let c = constant(ConstantAdrParams { eps: 1e6, ..Default::default() }, &s);
    assert!(!local_peclet(&sp, &c).advection_dominated);
    let rb = SampledCoefficients::new(&CoefficientModel::rotating_body(), &mc(10, 3, 2)).unwrap();
    let p = local_peclet(&space(32), &rb);
    assert!(p.advection_dominated);
    assert!(p.sample_max.iter().all(|v| *v > 1e10));
}

#[test]
fn moderate_stochasticity_examples() {
    let sp = space(2);
    let s = two_point();
    let check = |fluct: f64| {
        let c = constant(ConstantAdrParams { eps: 1.0, eps_fluct: fluct, ..Default::default() }, &s);
        let a = ReactionAnalysis::new(&sp, &c).unwrap();
        moderate_stochasticity(&sp, &c, &a)
    };
    let det = check(0.0);
    assert!(det.holds() && det.eps_ratio.is_infinite() && det.c_ratio.is_infinite());
    let bad = check(0.5);
    assert!(!bad.eps_ok);
    assert_relative_eq!(bad.eps_ratio, 0.5 / 32.0 / 0.5);
    let good = check(0.01);
    assert!(good.eps_ok);
    assert_relative_eq!(good.eps_ratio, 0.99 / 32.0 / 0.01, max_relative = 1e-12);
}
