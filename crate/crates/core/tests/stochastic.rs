mod common;

use approx::assert_relative_eq;
use common::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use supg_dlr::stochastic::{Distribution, SampleSpace};
use supg_dlr::Error;

fn mc(n: usize, dim: usize, seed: u64) -> SampleSpace<f64> {
    SampleSpace::monte_carlo(&Distribution::Uniform(vec![(-1.0, 1.0); dim]), n, seed).unwrap()
}

#[test]
fn tensor_grid_points_weights_and_order() {
    let s = SampleSpace::<f64>::tensor_grid(&[(0.0, 1.0), (10.0, 20.0)], 3).unwrap();
    assert_eq!(s.len(), 9);
    assert_eq!(s.sample(0), &[0.0, 10.0]);
    assert_eq!(s.sample(1), &[0.0, 15.0]);
    assert_eq!(s.sample(3), &[0.5, 10.0]);
    assert_eq!(s.sample(8), &[1.0, 20.0]);
    assert!(s.weights().iter().all(|w| (*w - 1.0 / 9.0).abs() < 1e-16));
    let single = SampleSpace::<f64>::tensor_grid(&[(2.0, 4.0)], 1).unwrap();
    assert_eq!(single.sample(0), &[3.0]);
}

#[test]
fn monte_carlo_is_seeded_and_in_bounds() {
    let a = mc(50, 3, 9);
    let b = mc(50, 3, 9);
    let c = mc(50, 3, 10);
    assert_eq!(a.sample(17), b.sample(17));
    assert_ne!(a.sample(17), c.sample(17));
    for i in 0..a.len() {
        assert!(a.sample(i).iter().all(|v| (-1.0..=1.0).contains(v)));
    }
}

#[test]
fn bad_weights_are_rejected() {
    assert!(SampleSpace::new(vec![vec![0.0], vec![1.0]], vec![0.5, 0.6]).is_err());
    assert!(SampleSpace::new(vec![vec![0.0], vec![1.0]], vec![1.5, -0.5]).is_err());
    assert!(matches!(
        Distribution::from_name("gaussian", vec![]),
        Err(Error::Unsupported(_))
    ));
}

#[test]
fn weighted_moments_follow_definitions() {
    let s = SampleSpace::new(vec![vec![0.0], vec![1.0], vec![2.0]], vec![0.5, 0.25, 0.25]).unwrap();
    let z = [1.0, 2.0, 4.0];
    let y = [3.0, -1.0, 0.5];
    assert_relative_eq!(s.expectation(&z), 0.5 + 0.5 + 1.0);
    assert_relative_eq!(s.inner(&y, &z), 1.5 - 0.5 + 0.5);
    assert_relative_eq!(s.inner3(&y, &z, &z), 1.5 - 1.0 + 2.0);
    assert_relative_eq!(s.norm(&z), (0.5 + 1.0 + 4.0f64).sqrt());
    let (m, c) = s.split_mean(&z).unwrap();
    assert_relative_eq!(m, 2.0);
    assert_relative_eq!(s.expectation(c.as_slice()), 0.0, epsilon = 1e-15);
}

#[test]
fn orthonormalize_gives_qr_of_centred_modes() {
    let s = mc(40, 2, 1);
    let mut r = rng(2);
    let mut y = DMatrix::from_fn(40, 3, |_, _| uniform(&mut r));
    for k in 0..3 {
        let m = s.expectation(y.column(k).as_slice());
        y.column_mut(k).add_scalar_mut(-m);
    }
    let (q, t) = s.orthonormalize(&y).unwrap();
    assert!(s.orthonormality_defect(&q) < 1e-14);
    assert!((&q * &t - &y).amax() < 1e-14);
    for i in 0..3 {
        for j in 0..i {
            assert_eq!(t[(i, j)], 0.0);
        }
    }
    s.check_basis(&q).unwrap();
}

#[test]
fn rank_loss_reports_numerical_rank() {
    let s = mc(10, 1, 4);
    let mut y = DMatrix::zeros(10, 3);
    for i in 0..10 {
        let v = s.sample(i)[0];
        y[(i, 0)] = v;
        y[(i, 1)] = 2.0 * v;
        y[(i, 2)] = v * v;
    }
    assert!(matches!(s.orthonormalize(&y), Err(Error::RankLoss { rank: 2, requested: 3 })));
}

#[test]
fn complement_projection_is_orthogonal_and_idempotent() {
    let s = mc(30, 1, 5);
    let mut r = rng(6);
    let raw = DMatrix::from_fn(30, 2, |_, _| uniform(&mut r));
    let mut centred = raw.clone();
    for k in 0..2 {
        let m = s.expectation(raw.column(k).as_slice());
        centred.column_mut(k).add_scalar_mut(-m);
    }
    let (y, _) = s.orthonormalize(&centred).unwrap();
    let z: Vec<f64> = (0..30).map(|_| uniform(&mut r)).collect();
    let p = s.project_complement(&z, &y).unwrap();
    assert!(s.expectation(p.as_slice()).abs() < 1e-15);
    for k in 0..2 {
        assert!(s.inner(p.as_slice(), y.column(k).as_slice()).abs() < 1e-15);
    }
    let pp = s.project_complement(p.as_slice(), &y).unwrap();
    for (a, b) in pp.as_slice().iter().zip(p.as_slice()) {
        assert!((a - b).abs() < 1e-15);
    }
    // A non-orthonormal basis is refused.
    assert!(s.project_complement(&z, &raw).is_err());
}

#[test]
fn sample_table_round_trip() {
    let s = mc(12, 3, 8);
    let mut buf = Vec::new();
    s.write_table(&mut buf).unwrap();
    let back = SampleSpace::<f64>::read_table(buf.as_slice()).unwrap();
    assert_eq!(back.len(), 12);
    for i in 0..12 {
        assert_eq!(back.sample(i), s.sample(i));
        assert_eq!(back.weights()[i], s.weights()[i]);
    }
}

proptest! {
    #[test]
    fn orthonormal_output_for_random_modes(n in 6usize..40, r in 1usize..4, seed in 0u64..500) {
        let s = mc(n, 1, seed);
        let mut g = rng(seed + 1);
        let mut y = DMatrix::from_fn(n, r, |_, _| uniform(&mut g));
        for k in 0..r {
            let m = s.expectation(y.column(k).as_slice());
            y.column_mut(k).add_scalar_mut(-m);
        }
        let (q, t) = s.orthonormalize(&y).unwrap();
        prop_assert!(s.orthonormality_defect(&q) < 1e-12);
        prop_assert!((&q * &t - &y).amax() < 1e-12);
    }
}
