//! Initial conditions of the experiments.

use crate::dlr::{DlrState, SnapshotInfo, Truncation};
use crate::error::Result;
use crate::fem::P1Space;
use crate::linalg::CsrMatrix;
use crate::stochastic::SampleSpace;
use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

const R0: f64 = 0.15;

fn scaled_radius(x: [f64; 2], centre: [f64; 2]) -> f64 {
    ((x[0] - centre[0]).powi(2) + (x[1] - centre[1]).powi(2)).sqrt() / R0
}

/// Slotted cylinder of radius 0.15 at (0.5, 0.75), slot of half-width 0.025
/// open towards the centre and reaching up to 0.85.
pub fn slotted_cylinder(x: [f64; 2]) -> f64 {
    let (a, b) = (0.5, 0.75);
    let inside = scaled_radius(x, [a, b]) <= 1.0;
    if inside && ((x[0] - a).abs() >= 0.025 || x[1] >= 0.85) {
        1.0
    } else {
        0.0
    }
}

/// Smooth hump at (0.25, 0.5).
pub fn hump(x: [f64; 2]) -> f64 {
    0.25 * (1.0 + (PI * scaled_radius(x, [0.25, 0.5]).min(1.0)).cos())
}

/// Cone at (0.5, 0.25).
pub fn cone(x: [f64; 2]) -> f64 {
    1.0 - scaled_radius(x, [0.5, 0.25]).min(1.0)
}

/// `U₀` = slotted cylinder, modes hump ⊗ `2y₂cos(y₃)` and cone ⊗ `30y₃y₂³`.
pub fn rotating_body_initial(space: &P1Space<f64>, samples: &SampleSpace<f64>) -> Result<DlrState<f64>> {
    let nh = space.ndofs();
    let u0 = DVector::from_vec(space.interpolate(slotted_cylinder));
    let mut u = DMatrix::zeros(nh, 2);
    u.set_column(0, &DVector::from_vec(space.interpolate(hump)));
    u.set_column(1, &DVector::from_vec(space.interpolate(cone)));
    let mut y = DMatrix::zeros(samples.len(), 2);
    for i in 0..samples.len() {
        let s = samples.sample(i);
        y[(i, 0)] = 2.0 * s[1] * s[2].cos();
        y[(i, 1)] = 30.0 * s[2] * s[1].powi(3);
    }
    DlrState::init_from_modes(u0, u, y, samples, &space.mesh)
}

/// `5 sin(2πx₁) sin(2πx₂) exp(cos(y₃x₁ + y₄x₂))` for every sample (columns).
pub fn boundary_layer_snapshots(space: &P1Space<f64>, samples: &SampleSpace<f64>) -> DMatrix<f64> {
    let verts = space.mesh.vertices();
    DMatrix::from_fn(verts.len(), samples.len(), |v, i| {
        let x = verts[v];
        let y = samples.sample(i);
        5.0 * (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).sin() * (y[2] * x[0] + y[3] * x[1]).cos().exp()
    })
}

/// Compressed fluctuation of the boundary layer field with a zero mean mode.
pub fn boundary_layer_initial(
    space: &P1Space<f64>,
    mass: &CsrMatrix<f64>,
    samples: &SampleSpace<f64>,
    truncation: Truncation,
) -> Result<(DlrState<f64>, SnapshotInfo<f64>)> {
    let snaps = boundary_layer_snapshots(space, samples);
    let (mut state, info) = DlrState::init_from_snapshot(&snaps, mass, samples, truncation)?;
    state.u0.fill(0.0);
    // Nodal rounding can leave tiny boundary values in the modes.
    for v in space.mesh.boundary_vertices() {
        state.u.row_mut(v).fill(0.0);
    }
    Ok((state, info))
}

/// Separable sine modes used by small tests and examples.
pub fn sine_initial(
    space: &P1Space<f64>,
    samples: &SampleSpace<f64>,
    amplitude: f64,
    rank: usize,
) -> Result<DlrState<f64>> {
    let u0 = DVector::from_vec(space.interpolate(|x| amplitude * (PI * x[0]).sin() * (PI * x[1]).sin()));
    let mut u = DMatrix::zeros(space.ndofs(), rank);
    let mut y = DMatrix::zeros(samples.len(), rank);
    for k in 0..rank {
        let f = (k + 2) as f64;
        let col = space.interpolate(|x| (f * PI * x[0]).sin() * (f * PI * x[1]).sin() / f);
        u.set_column(k, &DVector::from_vec(col));
        for i in 0..samples.len() {
            y[(i, k)] = (0.5 * (k + 1) as f64 * PI * samples.sample(i)[0]).sin();
        }
    }
    for v in space.mesh.boundary_vertices() {
        u.row_mut(v).fill(0.0);
    }
    DlrState::init_from_modes(u0, u, y, samples, &space.mesh)
}
