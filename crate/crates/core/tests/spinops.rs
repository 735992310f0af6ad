use proptest::prelude::*;
use std::f64::consts::PI;
use timecrystal::linalg::{expm, identity, max_abs, CMatrix, CVector, C64};
use timecrystal::*;

mod common;
use common::QubitOracle;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

#[test]
fn spin_half_ladder() {
    let ops = build_collective_ops(1).unwrap();
    assert_eq!(ops.jz.matrix[(0, 0)], c(0.5));
    assert_eq!(ops.jz.matrix[(1, 1)], c(-0.5));
    assert_eq!(ops.jminus.matrix[(1, 0)], c(1.0));
    assert_eq!(ops.jminus.matrix.iter().filter(|z| z.norm() > 0.0).count(), 1);
}

#[test]
fn two_atom_ladder_entries() {
    let ops = build_collective_ops(2).unwrap();
    let s2 = 2f64.sqrt();
    assert!((ops.jminus.matrix[(1, 0)] - c(s2)).norm() < 1e-15);
    assert!((ops.jminus.matrix[(2, 1)] - c(s2)).norm() < 1e-15);
}

#[test]
fn lowest_weight_is_annihilated() {
    for n in [1, 2, 5, 40] {
        let ops = build_collective_ops(n).unwrap();
        let mut v = CVector::zeros(n + 1);
        v[n] = c(1.0);
        assert_eq!((&ops.jminus.matrix * v).norm(), 0.0);
    }
}

#[test]
fn symmetric_subspace_projection_matches_for_small_n() {
    for n in 1..=4 {
        let ops = build_collective_ops(n).unwrap();
        let oracle = QubitOracle::new(n);
        for (mine, theirs) in [
            (&ops.jx.matrix, &oracle.jx),
            (&ops.jy.matrix, &oracle.jy),
            (&ops.jz.matrix, &oracle.jz),
            (&ops.jminus.matrix, &oracle.jminus),
        ] {
            let err = max_abs(&(mine - oracle.project(theirs)));
            assert!(err < 1e-12, "n = {n}: error {err}");
        }
        let jp = oracle.jminus.adjoint();
        assert!(max_abs(&(&ops.jplus.matrix - oracle.project(&jp))) < 1e-12);
    }
}

#[test]
fn angular_momentum_algebra() {
    for n in [1, 2, 3, 10, 64, 255, 512] {
        let ops = build_collective_ops(n).unwrap();
        let (x, y, z) = (&ops.jx.matrix, &ops.jy.matrix, &ops.jz.matrix);
        let i = C64::new(0.0, 1.0);
        let j = n as f64 / 2.0;
        let errors = [
            max_abs(&(x * y - y * x - z * i)),
            max_abs(&(y * z - z * y - x * i)),
            max_abs(&(z * x - x * z - y * i)),
        ];
        // entries of the products are of order J^2, so beyond N ~ 100 the
        // absolute error is bounded by the f64 spacing of those entries
        let bound = if n <= 64 { 1e-12 } else { 1e-12 * j * (j + 1.0) };
        for e in errors {
            assert!(e <= bound, "n = {n}: commutator error {e:e}");
        }
        for m in [x, y, z] {
            assert!(max_abs(&(m - m.adjoint())) <= 1e-12);
        }
        assert_eq!(ops.jplus.matrix, ops.jminus.matrix.adjoint());
        let casimir = identity(n + 1) * c(j * (j + 1.0));
        let rhs = casimir - z * z + z;
        assert!(max_abs(&(&ops.jplus.matrix * &ops.jminus.matrix - rhs)) <= 1e-10);
    }
}

fn pade_coherent(sys: &CollectiveSpinSystem, theta: f64, phi: f64) -> CVector {
    let ops = &sys.ops;
    let g = (&ops.jx.matrix * c(phi.sin()) - &ops.jy.matrix * c(phi.cos())) * C64::new(0.0, theta);
    expm(&g).column(0).into_owned()
}

fn dense_expectation(op: &CMatrix, v: &CVector) -> f64 {
    (v.adjoint() * op * v)[(0, 0)].re
}

#[test]
fn coherent_state_examples() {
    let sys = CollectiveSpinSystem::new(100, 1.0, 1.0).unwrap();
    let top = spin_coherent_state(&sys, 0.0, 1.234).unwrap();
    assert!((top.amplitudes[0] - c(1.0)).norm() < 1e-12);

    let bottom = spin_coherent_state(&sys, PI, 0.0).unwrap();
    assert!((bottom.amplitudes[100].norm() - 1.0).abs() < 1e-10);

    let eq = spin_coherent_state(&sys, PI / 2.0, PI / 2.0).unwrap();
    let m = magnetization(&sys, &eq).unwrap();
    assert!(m.x.abs() < 1e-10 && (m.y - 1.0).abs() < 1e-10 && m.z.abs() < 1e-10);

    // phi = 0: the generator is -i theta Jy, a rotation about y taking z to x
    let small = CollectiveSpinSystem::new(12, 1.0, 1.0).unwrap();
    let psi = spin_coherent_state(&small, PI / 2.0, 0.0).unwrap();
    let oracle = pade_coherent(&small, PI / 2.0, 0.0);
    let j = 6.0;
    let m = magnetization(&small, &psi).unwrap();
    assert!((m.x - dense_expectation(&small.ops.jx.matrix, &oracle) / j).abs() < 1e-10);
    assert!((m.x - 1.0).abs() < 1e-10 && m.y.abs() < 1e-10 && m.z.abs() < 1e-10);
}

#[test]
fn magnetization_of_extreme_states() {
    let sys = CollectiveSpinSystem::new(9, 0.0, 1.0).unwrap();
    let up = QuantumState::basis(10, 0);
    let down = QuantumState::basis(10, 9);
    assert_eq!(magnetization(&sys, &up).unwrap().as_array(), [0.0, 0.0, 1.0]);
    assert_eq!(magnetization(&sys, &down).unwrap().as_array(), [0.0, 0.0, -1.0]);
    let bad = QuantumState {
        amplitudes: vec![c(2.0); 10],
        normalized: false,
    };
    assert!(magnetization(&sys, &bad).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn coherent_states_match_pade_rotation(theta in 0.0..PI, phi in 0.0..(2.0 * PI), n in 1usize..40) {
        let sys = CollectiveSpinSystem::new(n, 1.0, 1.0).unwrap();
        let psi = spin_coherent_state(&sys, theta, phi).unwrap();
        prop_assert!((psi.norm() - 1.0).abs() < 1e-10);
        let oracle = pade_coherent(&sys, theta, phi);
        let overlap: C64 = oracle.iter().zip(&psi.amplitudes).map(|(a, b)| a.conj() * b).sum();
        prop_assert!((overlap.norm() - 1.0).abs() < 1e-10);
        let m = magnetization(&sys, &psi).unwrap();
        let j = n as f64 / 2.0;
        prop_assert!((m.x - dense_expectation(&sys.ops.jx.matrix, &oracle) / j).abs() < 1e-10);
        prop_assert!((m.y - dense_expectation(&sys.ops.jy.matrix, &oracle) / j).abs() < 1e-10);
        prop_assert!((m.z - dense_expectation(&sys.ops.jz.matrix, &oracle) / j).abs() < 1e-10);
        prop_assert!((m.length_squared() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn density_and_state_magnetizations_agree(theta in 0.0..PI, phi in 0.0..(2.0 * PI)) {
        let sys = CollectiveSpinSystem::new(15, 1.0, 1.0).unwrap();
        let psi = spin_coherent_state(&sys, theta, phi).unwrap();
        let a = magnetization(&sys, &psi).unwrap();
        let b = magnetization_of_density(&sys, &psi.to_density()).unwrap();
        for (p, q) in a.as_array().iter().zip(b.as_array()) {
            prop_assert!((p - q).abs() < 1e-12);
        }
    }
}
