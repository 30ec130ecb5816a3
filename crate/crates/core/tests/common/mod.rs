#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use supg_dlr::linalg::CsrMatrix;
use supg_dlr::mesh::{Mesh, QuadratureRule};
use supg_dlr::fem::P1Space;

pub fn space(n: usize) -> P1Space<f64> {
    P1Space::new(Mesh::unit_square(n).unwrap(), QuadratureRule::of_degree(4).unwrap()).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    rng.random::<f64>() * 2.0 - 1.0
}

pub fn max_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

pub fn dense(m: &CsrMatrix<f64>) -> DMatrix<f64> {
    m.to_dense()
}

/// Hand formulas for one triangle: area and barycentric gradients.
pub fn triangle_data(p: [[f64; 2]; 3]) -> (f64, [[f64; 2]; 3]) {
    let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let area = 0.5 * det.abs();
    let mut g = [[0.0; 2]; 3];
    for a in 0..3 {
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        g[a] = [(p[b][1] - p[c][1]) / det, (p[c][0] - p[b][0]) / det];
    }
    (area, g)
}

use std::collections::BTreeMap;
use supg_dlr::coefficients::{AdvectionKind, CoefficientModel, ConstantAdrParams};
use supg_dlr::operator::{DiscreteProblem, Stabilization};
use supg_dlr::stochastic::{Distribution, SampleSpace};

pub fn mc_samples(n: usize, dim: usize, seed: u64) -> SampleSpace<f64> {
    SampleSpace::monte_carlo(&Distribution::Uniform(vec![(-1.0, 1.0); dim]), n, seed).unwrap()
}

pub fn random_params() -> ConstantAdrParams {
    ConstantAdrParams {
        eps: 0.05,
        eps_fluct: 0.02,
        advection: AdvectionKind::Rotating,
        c: 0.5,
        c_fluct: 0.3,
        f: 1.0,
        ..Default::default()
    }
}

pub fn problem(
    n: usize,
    samples: SampleSpace<f64>,
    params: &ConstantAdrParams,
    stab: Stabilization,
    delta: f64,
    boundary: &[(&str, f64)],
) -> DiscreteProblem<f64> {
    let sp = space(n);
    let ne = sp.n_elements();
    let bc: BTreeMap<String, f64> = boundary.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    DiscreteProblem::new(sp, samples, &CoefficientModel::constant_adr(params), stab, vec![delta; ne], &bc).unwrap()
}

/// Random state with boundary-free modes.
pub fn random_state(p: &DiscreteProblem<f64>, rank: usize, seed: u64) -> supg_dlr::dlr::DlrState<f64> {
    let mut r = rng(seed);
    let mesh = &p.space.mesh;
    let nh = p.ndofs();
    let u0 = nalgebra::DVector::from_fn(nh, |v, _| if mesh.is_boundary(v) { 0.0 } else { uniform(&mut r) });
    let u = DMatrix::from_fn(nh, rank, |v, _| if mesh.is_boundary(v) { 0.0 } else { uniform(&mut r) });
    let y = DMatrix::from_fn(p.n_samples(), rank, |_, _| uniform(&mut r));
    supg_dlr::dlr::DlrState::init_from_modes(u0, u, y, &p.samples, mesh).unwrap()
}

/// Per-sample operator `A(ω_i)` and load assembled directly from the model
/// (no affine decomposition), plus the time matrix `M + S`.
pub struct SampleOperators {
    pub time: DMatrix<f64>,
    pub a: Vec<DMatrix<f64>>,
    pub a_mean: DMatrix<f64>,
    pub load: Vec<f64>,
}

pub fn sample_operators(p: &DiscreteProblem<f64>) -> SampleOperators {
    let sp = &p.space;
    let model = &p.coeffs.model;
    let nc = p.n_samples();
    let b_bar = |x: [f64; 2]| {
        let mut acc = [0.0; 2];
        for i in 0..nc {
            let b = model.advection_at(x, p.samples.sample(i));
            acc[0] += p.samples.weights()[i] * b[0];
            acc[1] += p.samples.weights()[i] * b[1];
        }
        acc
    };
    let d = &p.delta;
    let time = sp.mass().unwrap().to_dense() + sp.supg_mass(&b_bar, d).unwrap().to_dense();
    let op = |y: &[f64]| -> DMatrix<f64> {
        let eps = (model.diffusion)(y);
        let b = |x: [f64; 2]| model.advection_at(x, y);
        let c = |x: [f64; 2]| model.reaction_at(x, y);
        sp.stiffness().unwrap().to_dense() * eps
            + sp.convection(&b).unwrap().to_dense()
            + sp.supg_convection(&b, &b_bar, d).unwrap().to_dense()
            + sp.reaction(&c).unwrap().to_dense()
            + sp.supg_reaction(&c, &b_bar, d).unwrap().to_dense()
    };
    let a: Vec<DMatrix<f64>> = (0..nc).map(|i| op(p.samples.sample(i))).collect();
    let a_mean = a.iter().enumerate().fold(DMatrix::zeros(p.ndofs(), p.ndofs()), |acc, (i, m)| {
        acc + m * p.samples.weights()[i]
    });
    let load = if model.has_forcing() {
        sp.load(&|x| model.forcing_at(0.0, x, p.samples.sample(0)), &b_bar, d).unwrap()
    } else {
        vec![0.0; p.ndofs()]
    };
    SampleOperators { time, a, a_mean, load }
}

/// Dense solve of `lhs u = rhs` with boundary rows replaced by the Dirichlet data.
pub fn dirichlet_solve(p: &DiscreteProblem<f64>, lhs: &DMatrix<f64>, rhs: &nalgebra::DVector<f64>) -> nalgebra::DVector<f64> {
    let mut a = lhs.clone();
    let mut b = rhs.clone();
    for v in 0..p.ndofs() {
        if p.dirichlet.constrained[v] {
            a.row_mut(v).fill(0.0);
            a[(v, v)] = 1.0;
            b[v] = p.dirichlet.values[v];
        }
    }
    a.lu().solve(&b).unwrap()
}
