use timecrystal::largedev::*;
use timecrystal::linalg::{identity, kron, max_abs, trace, trace_distance, CMatrix, C64};
use timecrystal::unravel::{homodyne_trajectory, RecordOptions};
use timecrystal::*;

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Dense tilted generator assembled from Kronecker products.
fn dense_tilted(sys: &CollectiveSpinSystem, s: f64) -> CMatrix {
    let d = sys.dim();
    let id = identity(d);
    let ops = &sys.ops;
    let jx = &ops.jx.matrix;
    let jm = &ops.jminus.matrix;
    let jp = &ops.jplus.matrix;
    let jpjm = jp * jm;
    let g = (2.0 * sys.kappa / sys.n as f64).sqrt();
    let r = sys.kappa / sys.n as f64;
    (kron(&id, jx) - kron(&jx.transpose(), &id)) * C64::new(0.0, -sys.omega)
        + (kron(&jp.transpose(), jm) * c(2.0) - kron(&id, &jpjm) - kron(&jpjm.transpose(), &id)) * c(r)
        - (kron(&id, jm) + kron(&jp.transpose(), &id)) * c(s * g)
        + kron(&id, &id) * c(0.5 * s * s)
}

/// Largest real part in the dense spectrum.
fn dense_abscissa(m: &CMatrix) -> C64 {
    let ev = m.clone().schur().eigenvalues().expect("complex Schur");
    *ev.iter().max_by(|a, b| a.re.total_cmp(&b.re)).unwrap()
}

#[test]
fn sparse_generator_matches_dense_assembly() {
    let sys = CollectiveSpinSystem::new(5, 1.3, 0.7).unwrap();
    for s in [-0.4, 0.0, 0.25] {
        let sparse = build_tilted(&sys, s).matrix.to_dense();
        assert!(max_abs(&(sparse - dense_tilted(&sys, s))) < 1e-13);
    }
}

#[test]
fn unbiased_leading_eigenvalue_is_zero() {
    let sys = CollectiveSpinSystem::new(20, 1.5, 1.0).unwrap();
    let sol = leading_eigenpair(&build_tilted(&sys, 0.0), None).unwrap();
    assert!(sol.theta.abs() < 1e-10, "{}", sol.theta);
    let ss = mastereq::stationary_state(&sys).unwrap();
    assert!(trace_distance(&sol.r0, ss.matrix()) < 1e-8);
    assert!(max_abs(&(&sol.l0 - identity(21))) < 1e-7);
}

#[test]
fn leading_eigenvalue_matches_dense_spectrum() {
    for (n, w) in [(4, 0.5), (6, 1.5), (8, 1.0)] {
        let sys = CollectiveSpinSystem::new(n, w, 1.0).unwrap();
        for s in [-0.6, -0.1, 0.05, 0.5] {
            let sol = leading_eigenpair(&build_tilted(&sys, s), None).unwrap();
            let dense = dense_abscissa(&dense_tilted(&sys, s));
            assert!(dense.im.abs() < 1e-9, "N={n} s={s}: {dense}");
            assert!((sol.theta - dense.re).abs() < 1e-9, "N={n} w={w} s={s}: {} vs {}", sol.theta, dense.re);
            assert!(sol.residual < 1e-9);
            assert!((trace(&sol.r0) - c(1.0)).norm() < 1e-12);
            assert!((trace(&(&sol.l0 * &sol.r0)) - c(1.0)).norm() < 1e-12);
        }
    }
}

#[test]
fn eigenvalue_respects_bound() {
    let sys = CollectiveSpinSystem::new(30, 0.8, 1.0).unwrap();
    for s in [-1.0, -0.2, 0.2, 1.0] {
        let sol = leading_eigenpair(&build_tilted(&sys, s), None).unwrap();
        assert!(sol.theta <= timecrystal::superop::spectral_abscissa_bound(&sys, s));
    }
}

#[test]
fn warm_start_agrees_with_cold_start() {
    let sys = CollectiveSpinSystem::new(40, 1.5, 1.0).unwrap();
    let first = leading_eigenpair(&build_tilted(&sys, 0.1), None).unwrap();
    let warm = leading_eigenpair(&build_tilted(&sys, 0.15), Some(&first)).unwrap();
    let cold = leading_eigenpair(&build_tilted(&sys, 0.15), None).unwrap();
    assert!((warm.theta - cold.theta).abs() < 1e-10);
}

#[test]
fn hellmann_feynman_matches_finite_differences() {
    for (w, s) in [(0.5, 0.0), (1.5, 0.2), (1.5, -0.3), (1.0, 0.05)] {
        let sys = CollectiveSpinSystem::new(16, w, 1.0).unwrap();
        let sol = leading_eigenpair(&build_tilted(&sys, s), None).unwrap();
        let fd = finite_difference_activity(&sys, &sol).unwrap();
        assert!((sol.k - fd).abs() < 1e-6, "w={w} s={s}: {} vs {fd}", sol.k);
        assert!(activity(&sol, &sys).is_ok());
    }
}

#[test]
fn unbiased_activity_is_the_mean_current() {
    // k(0) = <x>_ss sqrt(2k/N) with x = J+ + J-
    let sys = CollectiveSpinSystem::new(30, 0.6, 1.0).unwrap();
    let sol = leading_eigenpair(&build_tilted(&sys, 0.0), None).unwrap();
    let ss = mastereq::stationary_state(&sys).unwrap();
    let m = magnetization_of_density(&sys, ss.matrix()).unwrap();
    let x = 2.0 * m.x * sys.spin();
    assert!((sol.k - sys.coupling() * x).abs() < 1e-8);
}

#[test]
fn theta_scan_shape_and_continuity() {
    let s_grid: Vec<f64> = (0..=10).map(|i| -0.5 + 0.1 * i as f64).collect();
    let rows = theta_scan(12, 1.0, &[0.5, 1.5], &s_grid).unwrap();
    assert_eq!(rows.len(), 22);
    assert!(rows.iter().all(|r| r.converged));
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r.s, s_grid[i % 11]);
        let sys = CollectiveSpinSystem::new(12, r.omega_over_kappa, 1.0).unwrap();
        let dense = dense_abscissa(&dense_tilted(&sys, r.s));
        assert!((r.theta - dense.re).abs() < 1e-9);
    }
    // convexity of the cumulant generating function
    for row in rows.chunks(11) {
        for w in row.windows(3) {
            assert!(w[0].theta + w[2].theta - 2.0 * w[1].theta > -1e-10);
        }
    }
}

#[test]
fn doob_dynamics_is_trace_preserving_with_zero_leading_eigenvalue() {
    for (w, s) in [(1.5, -0.1), (0.5, 0.3), (1.2, -0.4)] {
        let sys = CollectiveSpinSystem::new(10, w, 1.0).unwrap();
        let sol = leading_eigenpair(&build_tilted(&sys, s), None).unwrap();
        let doob = doob_transform(&sol, &sys).unwrap();
        assert!(doob.trace_preservation_residual() < 1e-10, "{}", doob.trace_preservation_residual());
        assert!(max_abs(&(&doob.hamiltonian - doob.hamiltonian.adjoint())) < 1e-12);
        let dense = dense_abscissa(&doob.dense_generator());
        assert!(dense.norm() < 1e-9, "{dense}");
        let rho = doob.stationary_state().unwrap();
        let predicted = doob.stationary_from_eigenpair(&sol);
        assert!(trace_distance(&rho, &predicted) < 1e-8);
        assert!(max_abs(&doob.generator_apply(&predicted)) < 1e-9);
    }
}

#[test]
fn unbiased_doob_system_reduces_to_the_original() {
    let sys = CollectiveSpinSystem::new(8, 1.5, 1.0).unwrap();
    let sol = leading_eigenpair(&build_tilted(&sys, 0.0), None).unwrap();
    let doob = doob_transform(&sol, &sys).unwrap();
    let h = &sys.ops.jx.matrix * c(1.5);
    assert!(max_abs(&(&doob.hamiltonian - h)) < 1e-7);
    assert!(max_abs(&(&doob.jminus_tilde - &sys.ops.jminus.matrix)) < 1e-7);

    let psi = spin_coherent_state(&sys, 1.0, 0.3).unwrap();
    let opts = RecordOptions {
        output_interval: 0.1,
        record_current: true,
        ..Default::default()
    };
    let plain = homodyne_trajectory(&sys, &psi, 1.0, 1e-3, 5, opts).unwrap();
    let tilted = doob_homodyne_trajectory(&doob, &psi, 1.0, 1e-3, 5, opts).unwrap();
    assert_eq!(tilted.tilted_quadrature.len(), tilted.times.len());
    for (a, b) in plain.magnetizations.iter().zip(&tilted.magnetizations) {
        assert!((a.z - b.z).abs() < 1e-5);
    }
}

#[test]
fn non_positive_left_eigenmatrix_is_rejected() {
    let sys = CollectiveSpinSystem::new(4, 1.0, 1.0).unwrap();
    let mut sol = leading_eigenpair(&build_tilted(&sys, 0.1), None).unwrap();
    sol.l0[(0, 0)] = c(-1.0);
    assert!(doob_transform(&sol, &sys).is_err());
}

#[test]
fn tilted_action_on_stationary_state() {
    let sys = CollectiveSpinSystem::new(10, 1.2, 1.0).unwrap();
    let ss = mastereq::stationary_state(&sys).unwrap();
    let m = magnetization_of_density(&sys, ss.matrix()).unwrap();
    let re_jm = m.x * sys.spin();
    for s in [-0.3, 0.2] {
        let gen = build_tilted(&sys, s);
        let v = timecrystal::linalg::vectorize(ss.matrix());
        let out = timecrystal::linalg::unvectorize(&gen.matrix.matvec(&v), 11);
        let dense = timecrystal::linalg::unvectorize(
            (dense_tilted(&sys, s) * timecrystal::linalg::CVector::from_vec(v)).as_slice(),
            11,
        );
        assert!(max_abs(&(&out - &dense)) < 1e-12);
        let expected = -s * sys.coupling() * 2.0 * re_jm + 0.5 * s * s;
        assert!((trace(&out).re - expected).abs() < 1e-10);
    }
}

#[test]
fn below_threshold_cumulant_is_gaussian() {
    let sys = CollectiveSpinSystem::new(60, 0.5, 1.0).unwrap();
    let ss = mastereq::stationary_state(&sys).unwrap();
    let mut warm: Option<TiltedEigenSolution> = None;
    for i in 0..=10 {
        let s = -0.5 + 0.1 * i as f64;
        let sol = leading_eigenpair(&build_tilted(&sys, s), warm.as_ref()).unwrap();
        assert!((sol.theta - 0.5 * s * s).abs() <= 1e-2, "s={s}: {}", sol.theta);
        assert!((sol.k + s).abs() <= 2e-2, "s={s}: k={}", sol.k);
        if s.abs() <= 0.2 + 1e-12 {
            let td = trace_distance(&sol.r0, ss.matrix());
            assert!(td <= 0.05, "s={s}: {td}");
        }
        warm = Some(sol);
    }
}

#[test]
fn above_threshold_cumulant_has_a_kink() {
    let second_difference = |w: f64| {
        let sys = CollectiveSpinSystem::new(60, w, 1.0).unwrap();
        let t: Vec<f64> = [-0.01, 0.0, 0.01]
            .iter()
            .map(|&s| leading_eigenpair(&build_tilted(&sys, s), None).unwrap().theta)
            .collect();
        (t[0] + t[2] - 2.0 * t[1]) / 1e-4
    };
    let below = second_difference(0.5);
    let above = second_difference(1.5);
    assert!(above > 10.0 * below, "{above} vs {below}");
}

#[test]
fn scan_activity_matches_row_differences() {
    // the kink above threshold needs a fine grid for three-point differences
    let s_grid: Vec<f64> = (0..=120).map(|i| -0.03 + 0.0005 * i as f64).collect();
    let rows = theta_scan(20, 1.0, &[0.5, 1.5], &s_grid).unwrap();
    for row in rows.chunks(121) {
        for i in 1..120 {
            let fd = -(row[i + 1].theta - row[i - 1].theta) / (row[i + 1].s - row[i - 1].s);
            assert!((fd - row[i].k).abs() < 1e-3, "w={} s={}: {fd} vs {}", row[i].omega_over_kappa, row[i].s, row[i].k);
        }
    }
}

#[test]
fn doob_square_roots_and_trace_preservation_at_n30() {
    let sys = CollectiveSpinSystem::new(30, 1.5, 1.0).unwrap();
    for s in [-0.05, 0.05] {
        let sol = leading_eigenpair(&build_tilted(&sys, s), None).unwrap();
        let doob = doob_transform(&sol, &sys).unwrap();
        assert!(max_abs(&(&doob.l0_half * &doob.l0_half_inv - identity(31))) < 1e-8);
        assert!(doob.trace_preservation_residual() <= 1e-8);
        let rho = doob.stationary_from_eigenpair(&sol);
        assert!(timecrystal::linalg::hermitian_eigenvalues(&rho)[0] >= -1e-8);
    }
}
