//! The numerical core is generic; single precision should run end to end.

use std::collections::BTreeMap;
use supg_dlr::coefficients::{AdvectionKind, CoefficientModel, ConstantAdrParams, ReactionAnalysis};
use supg_dlr::diagnostics::NormEvaluator;
use supg_dlr::dlr::DlrState;
use supg_dlr::fem::P1Space;
use supg_dlr::integrator::{Integrator, Scheme, SchemeConfig};
use supg_dlr::mesh::{Mesh, QuadratureRule};
use supg_dlr::operator::{DiscreteProblem, Stabilization};
use supg_dlr::stochastic::{Distribution, SampleSpace};

#[test]
fn single_precision_step_keeps_invariants() {
    let space = P1Space::<f32>::new(Mesh::unit_square(6).unwrap(), QuadratureRule::of_degree(4).unwrap()).unwrap();
    let samples = SampleSpace::<f32>::monte_carlo(&Distribution::Uniform(vec![(-1.0, 1.0)]), 10, 3).unwrap();
    let params = ConstantAdrParams {
        eps: 0.05,
        eps_fluct: 0.02,
        advection: AdvectionKind::Rotating,
        c: 0.5,
        ..Default::default()
    };
    let ne = space.n_elements();
    let p = DiscreteProblem::new(
        space,
        samples,
        &CoefficientModel::constant_adr(&params),
        Stabilization::Supg,
        vec![0.01f32; ne],
        &BTreeMap::new(),
    )
    .unwrap();
    let mesh = &p.space.mesh;
    let nh = p.ndofs();
    let bump = |v: usize, k: f32| {
        if mesh.is_boundary(v) {
            return 0.0;
        }
        let [x, y] = mesh.vertex(v);
        (k * std::f32::consts::PI * x).sin() * (k * std::f32::consts::PI * y).sin()
    };
    let u0 = nalgebra::DVector::from_fn(nh, |v, _| bump(v, 1.0));
    let u = nalgebra::DMatrix::from_fn(nh, 1, |v, _| bump(v, 2.0));
    let y = nalgebra::DMatrix::from_fn(p.n_samples(), 1, |i, _| p.samples.sample(i)[0]);
    let init = DlrState::init_from_modes(u0, u, y, &p.samples, mesh).unwrap();

    let integ = Integrator::new(&p, SchemeConfig::new(Scheme::SemiImplicit, 0.01f32)).unwrap();
    let analysis = ReactionAnalysis::new(&p.space, &p.coeffs).unwrap();
    let norms = NormEvaluator::new(&p, &analysis).unwrap();
    let start = norms.l2_sq(&init);
    let end = integ.run(init, 0.1, |_| Ok(())).unwrap();
    assert!(p.samples.orthonormality_defect(&end.y) < 1e-5);
    let l2 = norms.l2_sq(&end);
    assert!(l2.is_finite() && l2 < start);
}
