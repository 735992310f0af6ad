use proptest::prelude::*;
use std::f64::consts::PI;
use timecrystal::linalg::{
    expm, hermitian_part, kron, max_abs, trace, unvectorize, vectorize, CMatrix, CVector, C64,
};
use timecrystal::mastereq::*;
use timecrystal::superop::liouvillian;
use timecrystal::*;

mod common;
use common::QubitOracle;

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn random_density(dim: usize, seed: u64) -> CMatrix {
    // deterministic pseudo-random positive matrix
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    };
    let a = CMatrix::from_fn(dim, dim, |_, _| C64::new(next(), next()));
    let rho = &a * a.adjoint();
    let tr = trace(&rho);
    rho / tr
}

/// Lindblad generator on the full n-qubit space with collective operators.
fn qubit_lindblad(oracle: &QubitOracle, n: usize, omega: f64, kappa: f64, rho: &CMatrix) -> CMatrix {
    let jm = &oracle.jminus;
    let jp = jm.adjoint();
    let jpjm = &jp * jm;
    let h = &oracle.jx * c(omega);
    let r = kappa / n as f64;
    (&h * rho - rho * &h) * C64::new(0.0, -1.0) + (jm * rho * &jp * c(2.0) - &jpjm * rho - rho * &jpjm) * c(r)
}

#[test]
fn dark_state_is_stationary_without_drive() {
    let sys = CollectiveSpinSystem::new(6, 0.0, 1.0).unwrap();
    let dark = QuantumState::basis(7, 6).to_density();
    assert_eq!(max_abs(&liouvillian_apply(&sys, &dark).unwrap()), 0.0);
}

#[test]
fn two_qubit_oracle_for_excited_state_decay() {
    let oracle = QubitOracle::new(2);
    let sys = CollectiveSpinSystem::new(2, 0.0, 1.0).unwrap();
    let top = QuantumState::basis(3, 0).to_density();
    let drho = liouvillian_apply(&sys, &top).unwrap();
    let djz = trace(&(&sys.ops.jz.matrix * &drho)).re;
    assert!((djz + 2.0).abs() < 1e-12);

    let full_top = &oracle.dicke * &top * oracle.dicke.adjoint();
    let full = qubit_lindblad(&oracle, 2, 0.0, 1.0, &full_top);
    let full_djz = trace(&(&oracle.jz * &full)).re;
    assert!((full_djz - djz).abs() < 1e-12);
}

#[test]
fn generator_matches_qubit_space_for_driven_states() {
    for n in 1..=4 {
        let oracle = QubitOracle::new(n);
        let sys = CollectiveSpinSystem::new(n, 0.7, 1.3).unwrap();
        let rho = random_density(n + 1, n as u64);
        let full_rho = &oracle.dicke * &rho * oracle.dicke.adjoint();
        let full = qubit_lindblad(&oracle, n, 0.7, 1.3, &full_rho);
        let projected = oracle.project(&full);
        let mine = liouvillian_apply(&sys, &rho).unwrap();
        assert!(max_abs(&(mine - projected)) < 1e-12, "n = {n}");
    }
}

#[test]
fn sparse_generator_matches_dense_application() {
    let sys = CollectiveSpinSystem::new(9, 1.1, 0.8).unwrap();
    let l = liouvillian(&sys);
    for seed in 0..3 {
        let rho = random_density(10, seed);
        let dense = liouvillian_apply(&sys, &rho).unwrap();
        let sparse = unvectorize(&l.matvec(&vectorize(&rho)), 10);
        assert!(max_abs(&(dense - sparse)) < 1e-12);
    }
}

#[test]
fn rejects_mismatched_dimension() {
    let sys = CollectiveSpinSystem::new(3, 1.0, 1.0).unwrap();
    assert!(liouvillian_apply(&sys, &CMatrix::zeros(3, 3)).is_err());
}

#[test]
fn evolution_of_dark_state_is_constant() {
    let sys = CollectiveSpinSystem::new(5, 0.0, 1.0).unwrap();
    let dark = DensityMatrix::from_state(&QuantumState::basis(6, 5));
    let path = evolve_me(&sys, &dark, 2.0, 1e-2, 0.5).unwrap();
    assert_eq!(path.times.len(), 5);
    for rho in &path.states {
        assert!(max_abs(&(rho.matrix() - dark.matrix())) < 1e-14);
    }
}

#[test]
fn evolution_matches_vectorized_propagator() {
    let n = 4;
    let sys = CollectiveSpinSystem::new(n, 0.9, 1.0).unwrap();
    let d = n + 1;
    let ops = &sys.ops;
    let id = CMatrix::identity(d, d);
    let jx = &ops.jx.matrix;
    let jm = &ops.jminus.matrix;
    let jp = &ops.jplus.matrix;
    let jpjm = jp * jm;
    // vec(A X B) = (B^T (x) A) vec(X)
    let generator = (kron(&id, jx) - kron(&jx.transpose(), &id)) * C64::new(0.0, -0.9)
        + (kron(&jp.transpose(), jm) * c(2.0) - kron(&id, &jpjm) - kron(&jpjm.transpose(), &id))
            * c(1.0 / n as f64);
    let psi = spin_coherent_state(&sys, PI / 3.0, 0.4).unwrap();
    let rho0 = DensityMatrix::from_state(&psi);
    let exact = unvectorize(
        (expm(&generator) * CVector::from_vec(vectorize(rho0.matrix()))).as_slice(),
        d,
    );
    let path = evolve_me(&sys, &rho0, 1.0, 1e-3, 1.0).unwrap();
    let last = path.states.last().unwrap();
    assert!((path.times.last().unwrap() - 1.0).abs() < 1e-12);
    assert!(max_abs(&(last.matrix() - exact)) < 1e-8);
}

#[test]
fn evolution_settles_on_stationary_magnetization() {
    let sys = CollectiveSpinSystem::new(10, 0.5, 1.0).unwrap();
    let psi = spin_coherent_state(&sys, PI / 2.0, PI / 2.0).unwrap();
    let path = evolve_me(&sys, &DensityMatrix::from_state(&psi), 50.0, 1e-2, 10.0).unwrap();
    let ss = stationary_state(&sys).unwrap();
    let mz_ss = magnetization_of_density(&sys, ss.matrix()).unwrap().z;
    let mz_t = magnetization_of_density(&sys, path.states.last().unwrap().matrix())
        .unwrap()
        .z;
    assert!((mz_t - mz_ss).abs() < 1e-3, "{mz_t} vs {mz_ss}");
    for rho in &path.states {
        assert!((trace(rho.matrix()) - c(1.0)).norm() < 1e-10);
        assert!(rho.min_eigenvalue() > -1e-8);
    }
}

#[test]
fn oversized_step_is_rejected() {
    let sys = CollectiveSpinSystem::new(3, 1.0, 1.0).unwrap();
    let rho = DensityMatrix::from_state(&QuantumState::basis(4, 0));
    assert!(matches!(
        evolve_me(&sys, &rho, 1.0, 0.05, 0.1),
        Err(Error::StepTooLarge(_))
    ));
}

#[test]
fn undriven_stationary_state_is_dark() {
    let sys = CollectiveSpinSystem::new(8, 0.0, 1.0).unwrap();
    let ss = stationary_state(&sys).unwrap();
    let dark = QuantumState::basis(9, 8).to_density();
    assert!(max_abs(&(ss.matrix() - &dark)) < 1e-10);
    let diag = diagnostics(&sys, &ss);
    assert!(diag.rmax < 1e-10);
    assert!((diag.purity - 1.0).abs() < 1e-10);
}

#[test]
fn stationary_states_are_fixed_points() {
    for (n, w) in [(30, 0.5), (30, 1.5), (100, 0.5), (100, 1.5)] {
        let sys = CollectiveSpinSystem::new(n, w, 1.0).unwrap();
        let ss = stationary_state(&sys).unwrap();
        let residual = max_abs(&liouvillian_apply(&sys, ss.matrix()).unwrap());
        assert!(residual <= 1e-9, "N = {n}, w = {w}: residual {residual:e}");
        assert!(DensityMatrix::new(ss.matrix().clone()).is_ok());
        let mz = magnetization_of_density(&sys, ss.matrix()).unwrap().z;
        if n == 100 && w == 0.5 {
            assert!((mz + 0.75_f64.sqrt()).abs() < 0.05, "{mz}");
        }
        if n == 100 && w == 1.5 {
            assert!(mz.abs() < 0.2, "{mz}");
        }
    }
}

#[test]
fn near_coherent_stationary_state_below_threshold() {
    let sys = CollectiveSpinSystem::new(100, 0.3, 1.0).unwrap();
    let diag = diagnostics(&sys, &stationary_state(&sys).unwrap());
    assert!(diag.rmax < 1e-2, "{diag:?}");
    assert!(1.0 - diag.purity < 1e-2, "{diag:?}");
    let sys = CollectiveSpinSystem::new(100, 0.5, 1.0).unwrap();
    let diag = diagnostics(&sys, &stationary_state(&sys).unwrap());
    assert!((diag.beta - 25.0).abs() < 1e-12);
}

#[test]
fn coherence_sharpens_with_atom_number() {
    let mut previous: Option<StationaryDiagnostics> = None;
    for n in [25, 50, 100] {
        let sys = CollectiveSpinSystem::new(n, 0.5, 1.0).unwrap();
        let diag = diagnostics(&sys, &stationary_state(&sys).unwrap());
        if let Some(p) = previous {
            assert!(diag.rmax < p.rmax, "N = {n}: {} !< {}", diag.rmax, p.rmax);
            assert!(diag.purity > p.purity);
        }
        previous = Some(diag);
    }
}

#[test]
fn scan_rows_follow_grid() {
    let rows = stationary_scan(20, 1.0, &[0.0, 0.5, 1.5]).unwrap();
    assert_eq!(rows.len(), 3);
    assert!((rows[0].m_z + 1.0).abs() < 1e-10);
    assert_eq!(rows[2].omega_over_kappa, 1.5);
    assert!((rows[1].beta - 5.0).abs() < 1e-12);
}

#[test]
fn density_matrix_validation() {
    let mut m = CMatrix::zeros(2, 2);
    m[(0, 0)] = c(1.5);
    m[(1, 1)] = c(-0.5);
    assert!(DensityMatrix::new(m.clone()).is_err());
    m[(0, 1)] = C64::new(0.0, 0.1);
    assert!(DensityMatrix::new(m).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn generator_output_is_hermitian_and_traceless(seed in any::<u64>(), w in 0.0..3.0f64, n in 1usize..12) {
        let sys = CollectiveSpinSystem::new(n, w, 1.0).unwrap();
        let rho = hermitian_part(&random_density(n + 1, seed));
        let out = liouvillian_apply(&sys, &rho).unwrap();
        prop_assert!(trace(&out).norm() < 1e-12);
        prop_assert!(max_abs(&(&out - out.adjoint())) < 1e-12);
    }
}
