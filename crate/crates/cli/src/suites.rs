//! Oracle suites behind `validate`. Tolerances are fixed here.

use serde::Serialize;
use timecrystal::largedev::{
    build_tilted, doob_transform, finite_difference_activity, leading_eigenpair, theta_scan, TiltedEigenSolution,
};
use timecrystal::linalg::{commutator, hermitian_eigenvalues, hermiticity_error, identity, max_abs, trace_distance, CMatrix, C64};
use timecrystal::mastereq::{evolve_me, DensityMatrix};
use timecrystal::semiclassical::{conserved_ratio, integrate_mf, limit_cycle_frequency, mf_analytic};
use timecrystal::unravel::{ensemble_density_with, JumpMethod, Scheme};
use timecrystal::{build_collective_ops, spin_coherent_state, CollectiveSpinSystem, Magnetization, Result};

pub const COMMUTATOR_TOL: f64 = 1e-12;
pub const HERMITICITY_TOL: f64 = 1e-12;
pub const LADDER_PRODUCT_TOL: f64 = 1e-10;
pub const PROJECTION_TOL: f64 = 1e-12;
pub const DRIFT_PER_TIME_TOL: f64 = 1e-8;
pub const ANALYTIC_ORBIT_TOL: f64 = 1e-6;
pub const CONVEXITY_TOL: f64 = 1e-8;
pub const THETA_ZERO_TOL: f64 = 1e-9;
pub const ACTIVITY_TOL: f64 = 1e-4;
pub const TRACE_PRESERVATION_TOL: f64 = 1e-8;
pub const DOOB_POSITIVITY_TOL: f64 = 1e-8;
pub const ENSEMBLE_SE_MULTIPLE: f64 = 3.0;

pub const ALGEBRA_SIZES: [usize; 10] = [1, 2, 3, 4, 8, 16, 64, 128, 256, 512];

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            passed: value <= tolerance,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    fn new(suite: &str) -> Self {
        Self {
            suite: suite.into(),
            checks: Vec::new(),
        }
    }

    fn push(&mut self, name: impl Into<String>, value: f64, tolerance: f64) {
        self.checks.push(Check::at_most(name, value, tolerance));
    }

    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Collective operators of `n` qubits on the full `2^n` space, projected on
/// the Dicke states: `(jx, jy, jz, j-)`.
fn qubit_projection(n: usize) -> [CMatrix; 4] {
    let dim = 1usize << n;
    let mut ops = [(); 4].map(|_| CMatrix::zeros(dim, dim));
    for b in 0..dim {
        for q in 0..n {
            let up = b & (1 << q) == 0;
            let f = b ^ (1 << q);
            let sign = if up { 1.0 } else { -1.0 };
            ops[0][(f, b)] += C64::new(0.5, 0.0);
            ops[1][(f, b)] += C64::new(0.0, 0.5 * sign);
            ops[2][(b, b)] += C64::new(0.5 * sign, 0.0);
            if up {
                ops[3][(f, b)] += C64::new(1.0, 0.0);
            }
        }
    }
    let mut dicke = CMatrix::zeros(dim, n + 1);
    for b in 0..dim {
        dicke[(b, (b as u32).count_ones() as usize)] = C64::new(1.0, 0.0);
    }
    for k in 0..=n {
        let nrm = dicke.column(k).norm();
        dicke.column_mut(k).unscale_mut(nrm);
    }
    ops.map(|op| dicke.adjoint() * op * &dicke)
}

/// Commutators, ladder identities, Hermiticity and the symmetric-subspace
/// brute force for `n <= 4`.
pub fn operator_algebra(sizes: &[usize]) -> Result<SuiteReport> {
    let mut r = SuiteReport::new("operator algebra");
    let i = C64::new(0.0, 1.0);
    for &n in sizes {
        let ops = build_collective_ops(n)?;
        let (jx, jy, jz) = (&ops.jx.matrix, &ops.jy.matrix, &ops.jz.matrix);
        let (jp, jm) = (&ops.jplus.matrix, &ops.jminus.matrix);
        let herm = hermiticity_error(jx).max(hermiticity_error(jy)).max(hermiticity_error(jz));
        r.push(format!("hermiticity N={n}"), herm, HERMITICITY_TOL);
        r.push(format!("J+ = adjoint(J-) N={n}"), max_abs(&(jp - jm.adjoint())), 0.0);
        let comm = max_abs(&(commutator(jx, jy) - jz * i))
            .max(max_abs(&(commutator(jy, jz) - jx * i)))
            .max(max_abs(&(commutator(jz, jx) - jy * i)));
        r.push(format!("commutators N={n}"), comm, COMMUTATOR_TOL);
        let j = n as f64 / 2.0;
        let rhs = identity(n + 1) * C64::new(j * (j + 1.0), 0.0) - jz * jz + jz;
        r.push(format!("J+J- = J^2 - Jz^2 + Jz N={n}"), max_abs(&(jp * jm - rhs)), LADDER_PRODUCT_TOL);
        if n <= 4 {
            let [bx, by, bz, bm] = qubit_projection(n);
            let err = max_abs(&(jx - bx))
                .max(max_abs(&(jy - by)))
                .max(max_abs(&(jz - bz)))
                .max(max_abs(&(jm - bm)));
            r.push(format!("symmetric subspace N={n}"), err, PROJECTION_TOL);
        }
    }
    Ok(r)
}

/// Drift of `|m|^2` and `M` under RK4 at `dt = 1e-3`, and the closed-form
/// orbit against RK4 over ten periods.
pub fn conservation() -> Result<SuiteReport> {
    let mut r = SuiteReport::new("conservation");
    let dt = 1e-3;
    let t_final = 20.0;
    let (mut j2_drift, mut m_drift) = (0.0f64, 0.0f64);
    for &w in &[0.5, 1.0, 1.5] {
        for &theta in &[0.3f64, 1.1, 2.0, 2.9] {
            for &phi in &[0.4f64, 2.5, 4.0, 5.5] {
                let m0 = Magnetization::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
                let path = integrate_mf(m0, w, 1.0, t_final, dt)?;
                let j0 = m0.length_squared();
                let c0 = conserved_ratio(m0, w, 1.0);
                for (t, p) in path.times.iter().zip(&path.points).skip(1) {
                    j2_drift = j2_drift.max((p.length_squared() - j0).abs() / t);
                    if let (Some(a), Some(b)) = (c0, conserved_ratio(*p, w, 1.0)) {
                        m_drift = m_drift.max((a - b).abs() / t);
                    }
                }
            }
        }
    }
    r.push("|m|^2 drift per unit time", j2_drift, DRIFT_PER_TIME_TOL);
    r.push("M drift per unit time", m_drift, DRIFT_PER_TIME_TOL);

    let mut orbit = 0.0f64;
    for &w in &[1.5, 2.0] {
        let period = 2.0 * std::f64::consts::PI / limit_cycle_frequency(w, 1.0)?;
        for &a in &[0.0, 1.0, 2.5, 4.0] {
            let (y0, z0) = f64::sin_cos(a);
            let path = integrate_mf(Magnetization::new(0.0, y0, z0), w, 1.0, 10.0 * period, dt)?;
            for (t, p) in path.times.iter().zip(&path.points).step_by(10) {
                let (y, z) = mf_analytic(y0, z0, w, 1.0, *t)?;
                orbit = orbit.max((p.y - y).abs()).max((p.z - z).abs());
            }
        }
    }
    r.push("closed-form orbit vs RK4 over 10 periods", orbit, ANALYTIC_ORBIT_TOL);
    Ok(r)
}

/// Convexity and `theta(0) = 0` on `theta_scan` grids, Hellmann-Feynman
/// against finite differences, and validity of the Doob generator.
pub fn large_deviation(n: usize) -> Result<SuiteReport> {
    let mut r = SuiteReport::new("large deviation");
    let omegas = [0.5, 1.0, 1.5];
    let s_grid: Vec<f64> = (-10..=10).map(|i| i as f64 * 0.05).collect();
    let rows = theta_scan(n, 1.0, &omegas, &s_grid)?;
    for (row, &w) in rows.chunks(s_grid.len()).zip(&omegas) {
        let unconverged = row.iter().filter(|p| !p.converged).count();
        r.push(format!("unconverged points w={w}"), unconverged as f64, 0.0);
        let worst = row
            .windows(3)
            .map(|t| -(t[0].theta - 2.0 * t[1].theta + t[2].theta))
            .fold(f64::NEG_INFINITY, f64::max);
        r.push(format!("convexity violation w={w}"), worst, CONVEXITY_TOL);
        let zero = row.iter().find(|p| p.s == 0.0).map_or(f64::NAN, |p| p.theta.abs());
        r.push(format!("|theta(0)| w={w}"), zero, THETA_ZERO_TOL);
    }

    let mut gap = 0.0f64;
    for &w in &omegas {
        let sys = CollectiveSpinSystem::new(n, w, 1.0)?;
        let mut warm: Option<TiltedEigenSolution> = None;
        for &s in &[0.0, 0.05, 0.2, 0.5] {
            let sol = leading_eigenpair(&build_tilted(&sys, s), warm.as_ref())?;
            gap = gap.max((sol.k - finite_difference_activity(&sys, &sol)?).abs());
            warm = Some(sol);
        }
        warm = None;
        for &s in &[-0.05, -0.2, -0.5] {
            let sol = leading_eigenpair(&build_tilted(&sys, s), warm.as_ref())?;
            gap = gap.max((sol.k - finite_difference_activity(&sys, &sol)?).abs());
            warm = Some(sol);
        }
    }
    r.push("|k_HF - k_FD| / kappa", gap, ACTIVITY_TOL);

    let doob_n = 30;
    let sys = CollectiveSpinSystem::new(doob_n, 1.5, 1.0)?;
    let (mut trace_res, mut neg) = (0.0f64, 0.0f64);
    for &s in &[-0.1, -0.05, 0.05, 0.1] {
        let sol = leading_eigenpair(&build_tilted(&sys, s), None)?;
        let doob = doob_transform(&sol, &sys)?;
        trace_res = trace_res.max(doob.trace_preservation_residual());
        let ss = doob.stationary_state()?;
        let min = hermitian_eigenvalues(&ss).into_iter().fold(f64::INFINITY, f64::min);
        neg = neg.max(-min);
    }
    r.push(format!("Doob trace preservation N={doob_n}"), trace_res, TRACE_PRESERVATION_TOL);
    r.push(format!("Doob stationary negativity N={doob_n}"), neg, DOOB_POSITIVITY_TOL);
    Ok(r)
}

/// Ensemble-averaged trajectories of both schemes against the master
/// equation at five checkpoints, as multiples of the batch-means error.
pub fn unraveling(n: usize, trajectories: usize, master_seed: u64) -> Result<SuiteReport> {
    let mut r = SuiteReport::new("unraveling");
    let sys = CollectiveSpinSystem::new(n, 1.3, 1.0)?;
    let psi = spin_coherent_state(&sys, 1.2, 0.4)?;
    let checkpoints = [0.5, 1.0, 1.5, 2.0, 3.0];
    let me = evolve_me(&sys, &DensityMatrix::from_state(&psi), 3.0, 1e-3, 0.5)?;
    for (scheme, dt) in [(Scheme::Jump, 1e-3), (Scheme::Homodyne, 1e-4)] {
        let ens = ensemble_density_with(
            &sys,
            &psi,
            scheme,
            JumpMethod::default(),
            &checkpoints,
            trajectories,
            dt,
            master_seed,
        )?;
        for (i, t) in checkpoints.iter().enumerate() {
            let k = (t / 0.5f64).round() as usize;
            let d = trace_distance(&ens.mean[i], me.states[k].matrix());
            r.push(
                format!("{scheme} t={t}: trace distance / standard error"),
                d / ens.standard_error[i],
                ENSEMBLE_SE_MULTIPLE,
            );
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_algebra_passes() {
        let r = operator_algebra(&[1, 2, 3, 4, 16]).unwrap();
        assert!(r.passed(), "{:?}", r.failures().collect::<Vec<_>>());
    }

    #[test]
    fn nan_never_passes() {
        assert!(!Check::at_most("x", f64::NAN, 1.0).passed);
    }
}
