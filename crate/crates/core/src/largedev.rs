//! Large deviations of the time-integrated homodyne current.
//!
//! The tilted generator `L_s` (see [`crate::superop`]) has a real leading
//! eigenvalue `theta(s)`, the scaled cumulant generating function of the
//! current, with right and left eigenmatrices `R0`, `L0` normalized by
//! `Tr[R0] = 1` and `Tr[L0 R0] = 1`. The activity is `k(s) = -theta'(s)`.
//!
//! Eigenpairs come from shift-invert Arnoldi with a real shift placed above a
//! rigorous bound on `theta`, followed by inverse-iteration refinement of the
//! right and left eigenvectors with a shift just above the converged value.

use serde::{Deserialize, Serialize};

use crate::arnoldi::{largest_magnitude, ArnoldiOptions};
use crate::error::{Error, Result};
use crate::linalg::{
    dot, hermitian_eigen, hermitian_part, identity, kron, max_abs, norm, trace, unvectorize,
    vectorize, CMatrix, CVector, C64, I, ONE, ZERO,
};
use crate::parallel::map_indexed;
use crate::sparse::{BandedLu, CsrMatrix};
use crate::spinops::{CollectiveOps, CollectiveSpinSystem, QuantumState};
use crate::superop::{spectral_abscissa_bound, tilted_generator};
use crate::unravel::{homodyne_record, MonitoredSystem, RecordOptions, Scheme, TrajectoryParams, TrajectoryRecord};

/// Largest tolerated imaginary part of `theta`.
pub const MAX_IMAGINARY_PART: f64 = 1e-9;
/// Required agreement between the two activity estimates, in units of kappa.
pub const ACTIVITY_TOLERANCE: f64 = 1e-4;
/// Initial bias step of the finite-difference activity.
pub const ACTIVITY_STEP: f64 = 1e-3;

/// Vectorized tilted generator at bias `s`.
#[derive(Debug, Clone)]
pub struct TiltedGenerator {
    pub s: f64,
    pub matrix: CsrMatrix,
    sys: CollectiveSpinSystem,
}

pub fn build_tilted(sys: &CollectiveSpinSystem, s: f64) -> TiltedGenerator {
    TiltedGenerator {
        s,
        matrix: tilted_generator(sys, s),
        sys: sys.clone(),
    }
}

impl TiltedGenerator {
    pub fn system(&self) -> &CollectiveSpinSystem {
        &self.sys
    }

    pub fn dim(&self) -> usize {
        self.sys.dim()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    pub krylov_dim: usize,
    pub tol: f64,
    pub max_restarts: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            krylov_dim: 60,
            tol: 1e-10,
            max_restarts: 300,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TiltedEigenSolution {
    pub s: f64,
    pub theta: f64,
    pub r0: CMatrix,
    pub l0: CMatrix,
    /// Hellmann-Feynman activity `sqrt(2k/N) Tr[L0 (J- R0 + R0 J+)] - s`.
    pub k: f64,
    /// `||L_s r - theta r||_inf / ||r||_inf` of the refined right eigenvector.
    pub residual: f64,
    pub imaginary_part: f64,
}

/// Upper bound on `theta(s)`, tightened by continuation from a nearby
/// solution using `|theta'| <= sqrt(2k/N) N + |s|`.
fn theta_bound(gen: &TiltedGenerator, warm: Option<&TiltedEigenSolution>) -> f64 {
    let global = spectral_abscissa_bound(&gen.sys, gen.s);
    match warm {
        Some(w) => {
            let ds = (gen.s - w.s).abs();
            let slope = gen.sys.coupling() * gen.sys.n as f64 + gen.s.abs().max(w.s.abs());
            global.min(w.theta + ds * slope)
        }
        None => global,
    }
}

fn inverse_iteration(
    lu: &BandedLu,
    mut x: Vec<C64>,
    adjoint: bool,
    iterations: usize,
) -> Vec<C64> {
    for _ in 0..iterations {
        if adjoint {
            lu.solve_adjoint_in_place(&mut x);
        } else {
            lu.solve_in_place(&mut x);
        }
        let nrm = norm(&x);
        x.iter_mut().for_each(|a| *a /= nrm);
    }
    x
}

fn hellmann_feynman(sys: &CollectiveSpinSystem, s: f64, r0: &CMatrix, l0: &CMatrix) -> f64 {
    let jm = &sys.ops.jminus.matrix;
    let jp = &sys.ops.jplus.matrix;
    let inner = jm * r0 + r0 * jp;
    sys.coupling() * trace(&(l0 * inner)).re - s
}

pub fn leading_eigenpair(gen: &TiltedGenerator, warm: Option<&TiltedEigenSolution>) -> Result<TiltedEigenSolution> {
    leading_eigenpair_with(gen, warm, EigenOptions::default())
}

/// Leading (largest real part) eigenpair of the tilted generator.
pub fn leading_eigenpair_with(
    gen: &TiltedGenerator,
    warm: Option<&TiltedEigenSolution>,
    options: EigenOptions,
) -> Result<TiltedEigenSolution> {
    let d = gen.dim();
    let l = &gen.matrix;
    let bound = theta_bound(gen, warm);
    let sigma = bound + 1e-3 * (1.0 + bound.abs());
    let lu = BandedLu::factor(l, C64::new(sigma, 0.0))?;
    let start = match warm {
        Some(w) => vectorize(&w.r0),
        None => vectorize(&(identity(d) / C64::new(d as f64, 0.0))),
    };
    let arnoldi = largest_magnitude(
        d * d,
        |x, y| {
            y.copy_from_slice(x);
            lu.solve_in_place(y);
        },
        Some(&start),
        ArnoldiOptions {
            nev: 2,
            ncv: options.krylov_dim,
            tol: options.tol,
            max_restarts: options.max_restarts,
        },
    )?;
    let mu = arnoldi.pairs[0].value;
    let estimate = C64::new(sigma, 0.0) + ONE / mu;
    if estimate.im.abs() > 1e-6 * (1.0 + estimate.re.abs()) {
        return Err(Error::ComplexLeadingEigenvalue(estimate.im));
    }

    let shift = estimate.re + 1e-6 * (1.0 + estimate.re.abs());
    let lu = BandedLu::factor(l, C64::new(shift, 0.0))?;
    let right = inverse_iteration(&lu, arnoldi.pairs[0].vector.clone(), false, 4);
    let left_start = match warm {
        Some(w) => vectorize(&w.l0),
        None => vectorize(&identity(d)),
    };
    let left = inverse_iteration(&lu, left_start, true, 6);

    let l_right = l.matvec(&right);
    let theta_c = dot(&left, &l_right) / dot(&left, &right);
    if theta_c.im.abs() > MAX_IMAGINARY_PART {
        return Err(Error::ComplexLeadingEigenvalue(theta_c.im));
    }
    let theta = theta_c.re;
    let scale = right.iter().fold(0.0_f64, |a, z| a.max(z.norm()));
    let residual = l_right
        .iter()
        .zip(&right)
        .fold(0.0_f64, |a, (lx, x)| a.max((lx - x * theta).norm()))
        / scale;

    let r = unvectorize(&right, d);
    let r = &r / trace(&r);
    let r0 = hermitian_part(&r);
    let r0 = &r0 / trace(&r0);
    let y = unvectorize(&left, d);
    let y = &y / trace(&(&y * &r0));
    let l0 = hermitian_part(&y);
    let l0 = &l0 / C64::new(trace(&(&l0 * &r0)).re, 0.0);

    let k = hellmann_feynman(&gen.sys, gen.s, &r0, &l0);
    Ok(TiltedEigenSolution {
        s: gen.s,
        theta,
        r0,
        l0,
        k,
        residual,
        imaginary_part: theta_c.im,
    })
}

/// `theta` at `s`, warm-started from `near`.
fn theta_at(sys: &CollectiveSpinSystem, s: f64, near: &TiltedEigenSolution) -> Result<f64> {
    Ok(leading_eigenpair(&build_tilted(sys, s), Some(near))?.theta)
}

/// `-theta'(s)` from central differences with Richardson extrapolation,
/// starting at a bias step of `1e-3` and halving.
pub fn finite_difference_activity(sys: &CollectiveSpinSystem, sol: &TiltedEigenSolution) -> Result<f64> {
    let mut table: Vec<Vec<f64>> = Vec::new();
    let mut h = ACTIVITY_STEP;
    for j in 0..6 {
        let plus = theta_at(sys, sol.s + h, sol)?;
        let minus = theta_at(sys, sol.s - h, sol)?;
        let mut row = vec![(plus - minus) / (2.0 * h)];
        for m in 1..=j {
            let factor = 4f64.powi(m as i32) - 1.0;
            let v = row[m - 1] + (row[m - 1] - table[j - 1][m - 1]) / factor;
            row.push(v);
        }
        let converged = j > 0 && (row[j] - table[j - 1][j - 1]).abs() < 1e-7;
        table.push(row);
        if converged {
            break;
        }
        h /= 2.0;
    }
    let last = table.last().expect("at least one level");
    Ok(-last[last.len() - 1])
}

/// Hellmann-Feynman activity, cross-checked against finite differences of
/// `theta`.
pub fn activity(sol: &TiltedEigenSolution, sys: &CollectiveSpinSystem) -> Result<f64> {
    let fd = finite_difference_activity(sys, sol)?;
    if (sol.k - fd).abs() > ACTIVITY_TOLERANCE * sys.kappa {
        return Err(Error::ActivityMismatch {
            hellmann_feynman: sol.k,
            finite_difference: fd,
        });
    }
    Ok(sol.k)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaRow {
    pub omega_over_kappa: f64,
    pub s: f64,
    pub theta: f64,
    pub k: f64,
    pub converged: bool,
    pub residual: f64,
}

/// `theta` and `k` over an `(omega, s)` grid at fixed `N` and `kappa`. Each
/// omega row is a warm-started continuation along `s_grid`; rows run in
/// parallel. Failed points are reported with `converged = false`.
pub fn theta_scan(n: usize, kappa: f64, omegas_over_kappa: &[f64], s_grid: &[f64]) -> Result<Vec<ThetaRow>> {
    let rows: Vec<Result<Vec<ThetaRow>>> = map_indexed(omegas_over_kappa.len(), |i| {
        let w = omegas_over_kappa[i];
        let sys = CollectiveSpinSystem::new(n, w * kappa, kappa)?;
        let mut warm: Option<TiltedEigenSolution> = None;
        let mut out = Vec::with_capacity(s_grid.len());
        for &s in s_grid {
            match leading_eigenpair(&build_tilted(&sys, s), warm.as_ref()) {
                Ok(sol) => {
                    out.push(ThetaRow {
                        omega_over_kappa: w,
                        s,
                        theta: sol.theta,
                        k: sol.k,
                        converged: true,
                        residual: sol.residual,
                    });
                    warm = Some(sol);
                }
                Err(e) => {
                    let residual = match e {
                        Error::NotConverged { residual, .. } => residual,
                        _ => f64::NAN,
                    };
                    out.push(ThetaRow {
                        omega_over_kappa: w,
                        s,
                        theta: f64::NAN,
                        k: f64::NAN,
                        converged: false,
                        residual,
                    });
                }
            }
        }
        Ok(out)
    });
    let mut all = Vec::new();
    for r in rows {
        all.extend(r?);
    }
    Ok(all)
}

/// Proper (trace-preserving) dynamics generated from the tilted problem:
/// jump operator `J~- = L0^{1/2} J- L0^{-1/2}` with rate `2k/N` and
/// Hamiltonian `H_D`.
#[derive(Debug, Clone)]
pub struct DoobSystem {
    pub s: f64,
    pub theta: f64,
    pub jminus_tilde: CMatrix,
    pub hamiltonian: CMatrix,
    pub l0_half: CMatrix,
    pub l0_half_inv: CMatrix,
    /// `J~+ J~-`.
    jpjm_tilde: CMatrix,
    /// Non-Hermitian part of the sandwiched no-jump generator.
    effective: CMatrix,
    sys: CollectiveSpinSystem,
}

/// Builds the Doob-transformed system from a converged eigenpair.
///
/// With `K = i w Jx + (k/N) J+J- + s sqrt(2k/N) J-` the tilted generator reads
/// `L_s rho = (2k/N) J- rho J+ - K rho - rho K^+ + (s^2/2) rho`, so the
/// transform `L0^{1/2} (L_s - theta)(L0^{-1/2} . L0^{-1/2}) L0^{1/2}` has
/// jump operator `J~-` and no-jump generator
/// `G = L0^{1/2} K L0^{-1/2} - (s^2/2 - theta)/2`. Trace preservation is
/// `G + G^+ = (2k/N) J~+ J~-` and the Hamiltonian is `(G - G^+)/(2i)`.
pub fn doob_transform(sol: &TiltedEigenSolution, sys: &CollectiveSpinSystem) -> Result<DoobSystem> {
    let d = sys.dim();
    let (values, vectors) = hermitian_eigen(&sol.l0);
    let top = values.last().copied().unwrap_or(0.0);
    if !(top > 0.0) || values[0] < -1e-8 * top {
        return Err(Error::NotPositive(values[0] / top));
    }
    let floor = 1e-12 * top;
    let root = |p: f64| {
        let diag = CVector::from_iterator(d, values.iter().map(|&v| C64::new(v.max(floor).powf(p), 0.0)));
        &vectors * CMatrix::from_diagonal(&diag) * vectors.adjoint()
    };
    let l0_half = root(0.5);
    let l0_half_inv = root(-0.5);
    let ops = &sys.ops;
    let g = sys.coupling();
    let k_op = &ops.jx.matrix * C64::new(0.0, sys.omega)
        + &ops.jplus.matrix * &ops.jminus.matrix * C64::new(sys.rate(), 0.0)
        + &ops.jminus.matrix * C64::new(sol.s * g, 0.0);
    let effective = &l0_half * k_op * &l0_half_inv
        - identity(d) * C64::new(0.5 * (0.5 * sol.s * sol.s - sol.theta), 0.0);
    let jminus_tilde = &l0_half * &ops.jminus.matrix * &l0_half_inv;
    let jpjm_tilde = jminus_tilde.adjoint() * &jminus_tilde;
    let hamiltonian = (&effective - effective.adjoint()) / C64::new(0.0, 2.0);
    Ok(DoobSystem {
        s: sol.s,
        theta: sol.theta,
        jminus_tilde,
        hamiltonian,
        l0_half,
        l0_half_inv,
        jpjm_tilde,
        effective,
        sys: sys.clone(),
    })
}

impl DoobSystem {
    pub fn system(&self) -> &CollectiveSpinSystem {
        &self.sys
    }

    /// `max |(2k/N) J~+J~- - G - G^+|`, the adjoint generator applied to the
    /// identity.
    pub fn trace_preservation_residual(&self) -> f64 {
        let lhs = &self.jpjm_tilde * C64::new(2.0 * self.sys.rate(), 0.0);
        max_abs(&(lhs - &self.effective - self.effective.adjoint()))
    }

    /// `-i [H_D, rho] + (k/N)(2 J~- rho J~+ - {J~+J~-, rho})`.
    pub fn generator_apply(&self, rho: &CMatrix) -> CMatrix {
        let h = &self.hamiltonian;
        let jm = &self.jminus_tilde;
        let jp = jm.adjoint();
        (h * rho - rho * h) * -I
            + (jm * rho * jp * C64::new(2.0, 0.0) - &self.jpjm_tilde * rho - rho * &self.jpjm_tilde)
                * C64::new(self.sys.rate(), 0.0)
    }

    /// Dense vectorized generator (column stacking), for small systems.
    pub fn dense_generator(&self) -> CMatrix {
        let d = self.sys.dim();
        let id = identity(d);
        let h = &self.hamiltonian;
        let jm = &self.jminus_tilde;
        let jp = jm.adjoint();
        let q = &self.jpjm_tilde;
        (kron(&id, h) - kron(&h.transpose(), &id)) * -I
            + (kron(&jp.transpose(), jm) * C64::new(2.0, 0.0) - kron(&id, q) - kron(&q.transpose(), &id))
                * C64::new(self.sys.rate(), 0.0)
    }

    /// Stationary state implied by the eigenpair: `L0^{1/2} R0 L0^{1/2}`.
    pub fn stationary_from_eigenpair(&self, sol: &TiltedEigenSolution) -> CMatrix {
        let rho = &self.l0_half * &sol.r0 * &self.l0_half;
        let tr = trace(&rho);
        hermitian_part(&(rho / tr))
    }

    /// Stationary state from the null space of the dense generator.
    pub fn stationary_state(&self) -> Result<CMatrix> {
        let d = self.sys.dim();
        let mut l = self.dense_generator();
        let shift = 1e-10 * (1.0 + max_abs(&l));
        for i in 0..d * d {
            l[(i, i)] -= C64::new(shift, 0.0);
        }
        let lu = l.lu();
        let mut x = CVector::from_vec(vectorize(&(identity(d) / C64::new(d as f64, 0.0))));
        for _ in 0..4 {
            x = lu.solve(&x).ok_or(Error::Singular(0))?;
            let n = x.norm();
            x.unscale_mut(n);
        }
        let rho = unvectorize(x.as_slice(), d);
        let tr = trace(&rho);
        Ok(hermitian_part(&(rho / tr)))
    }
}

impl MonitoredSystem for DoobSystem {
    fn dim(&self) -> usize {
        self.sys.dim()
    }

    fn gamma(&self) -> f64 {
        2.0 * self.sys.rate()
    }

    fn apply_hamiltonian(&self, x: &[C64], y: &mut [C64]) {
        dense_apply(&self.hamiltonian, x, y);
    }

    fn apply_jump(&self, x: &[C64], y: &mut [C64]) {
        dense_apply(&self.jminus_tilde, x, y);
    }

    fn apply_jump_dag_jump(&self, x: &[C64], y: &mut [C64]) {
        dense_apply(&self.jpjm_tilde, x, y);
    }

    fn collective(&self) -> &CollectiveOps {
        &self.sys.ops
    }
}

fn dense_apply(m: &CMatrix, x: &[C64], y: &mut [C64]) {
    y.iter_mut().for_each(|v| *v = ZERO);
    for (j, xj) in x.iter().enumerate() {
        if *xj == ZERO {
            continue;
        }
        for (yi, mij) in y.iter_mut().zip(m.column(j).iter()) {
            *yi += mij * xj;
        }
    }
}

/// Homodyne trajectory of the Doob-transformed dynamics, monitoring
/// `J~+ + J~-`. Records the untransformed magnetization and
/// `<J~+ + J~->/N`.
pub fn doob_homodyne_trajectory(
    doob: &DoobSystem,
    psi0: &QuantumState,
    t_final: f64,
    dt: f64,
    seed: u64,
    options: RecordOptions,
) -> Result<TrajectoryRecord> {
    let sys = &doob.sys;
    let params = TrajectoryParams {
        n: sys.n,
        omega: sys.omega,
        kappa: sys.kappa,
        dt,
        t_final,
        output_interval: options.output_interval,
        s: Some(doob.s),
    };
    homodyne_record(doob, Scheme::Doob, params, psi0, seed, options, Some(1.0 / sys.n as f64))
}
