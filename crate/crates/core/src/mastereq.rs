//! Lindblad evolution, stationary states and their near-coherence diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    hermitian_eigenvalues, hermitian_part, hermiticity_error, max_abs, trace, unvectorize,
    vectorize, CMatrix, C64, ONE, ZERO,
};
use crate::parallel::map_indexed;
use crate::sparse::{BandedLu, CsrMatrix};
use crate::spinops::{magnetization_of_density, CollectiveSpinSystem, QuantumState};
use crate::superop::liouvillian;

/// Largest `dt * kappa` accepted by [`evolve_me`].
pub const MAX_ME_STEP: f64 = 1e-2;
/// Smallest eigenvalue tolerated along an evolution before aborting.
pub const POSITIVITY_ABORT: f64 = -1e-6;
/// Residual bound `||L rho_ss||_inf` for stationary states.
pub const STATIONARY_RESIDUAL: f64 = 1e-9;

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

impl DensityMatrix {
    /// Validates `matrix` against the density-matrix invariants.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        let herm = hermiticity_error(&matrix);
        if herm > 1e-10 {
            return Err(Error::InvalidInput(format!("matrix not Hermitian (error {herm:.3e})")));
        }
        let tr = trace(&matrix);
        if (tr - ONE).norm() > 1e-10 {
            return Err(Error::NotNormalized(tr.re));
        }
        let min = hermitian_eigenvalues(&matrix)[0];
        if min < -1e-8 {
            return Err(Error::PositivityViolation {
                time: f64::NAN,
                min_eigenvalue: min,
            });
        }
        Ok(Self { matrix })
    }

    /// Hermitizes and trace-normalizes without the positivity check.
    pub(crate) fn normalized_unchecked(m: &CMatrix) -> Self {
        let h = hermitian_part(m);
        let tr = trace(&h).re;
        Self { matrix: h / C64::new(tr, 0.0) }
    }

    pub fn from_state(psi: &QuantumState) -> Self {
        Self {
            matrix: psi.to_density(),
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_inner(self) -> CMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&self.matrix)[0]
    }
}

/// `d rho/dt = -i w [Jx, rho] + (k/N)(2 J- rho J+ - J+J- rho - rho J+J-)`.
pub fn liouvillian_apply(sys: &CollectiveSpinSystem, rho: &CMatrix) -> Result<CMatrix> {
    if rho.nrows() != sys.dim() || rho.ncols() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            got: rho.nrows(),
        });
    }
    let ops = &sys.ops;
    let jx = &ops.jx.matrix;
    let jm = &ops.jminus.matrix;
    let jp = &ops.jplus.matrix;
    let jpjm = jp * jm;
    let coherent = (jx * rho - rho * jx) * C64::new(0.0, -sys.omega);
    let dissipative = (jm * rho * jp * C64::new(2.0, 0.0) - &jpjm * rho - rho * &jpjm)
        * C64::new(sys.rate(), 0.0);
    Ok(coherent + dissipative)
}

/// Sampled solution of the master equation.
#[derive(Debug, Clone)]
pub struct MasterPath {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
}

fn rk4_step(l: &CsrMatrix, x: &mut [C64], dt: f64, k: &mut [Vec<C64>; 4], tmp: &mut [C64]) {
    let h = C64::new(dt, 0.0);
    l.matvec_into(x, &mut k[0]);
    for ((t, xi), ki) in tmp.iter_mut().zip(x.iter()).zip(&k[0]) {
        *t = xi + ki * h * 0.5;
    }
    l.matvec_into(tmp, &mut k[1]);
    for ((t, xi), ki) in tmp.iter_mut().zip(x.iter()).zip(&k[1]) {
        *t = xi + ki * h * 0.5;
    }
    l.matvec_into(tmp, &mut k[2]);
    for ((t, xi), ki) in tmp.iter_mut().zip(x.iter()).zip(&k[2]) {
        *t = xi + ki * h;
    }
    l.matvec_into(tmp, &mut k[3]);
    for (i, xi) in x.iter_mut().enumerate() {
        *xi += (k[0][i] + k[1][i] * 2.0 + k[2][i] * 2.0 + k[3][i]) * (h / 6.0);
    }
}

/// Fourth-order Runge-Kutta integration of the master equation, sampled every
/// `output_interval` (rounded to a whole number of steps).
pub fn evolve_me(
    sys: &CollectiveSpinSystem,
    rho0: &DensityMatrix,
    t_final: f64,
    dt: f64,
    output_interval: f64,
) -> Result<MasterPath> {
    if rho0.dim() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            got: rho0.dim(),
        });
    }
    if !(dt > 0.0 && t_final >= 0.0 && output_interval > 0.0) {
        return Err(Error::InvalidInput("dt, output interval must be positive and T >= 0".into()));
    }
    if dt * sys.kappa > MAX_ME_STEP * (1.0 + 1e-12) {
        return Err(Error::StepTooLarge(format!(
            "dt*kappa = {} exceeds {MAX_ME_STEP}",
            dt * sys.kappa
        )));
    }
    let steps = (t_final / dt).round() as usize;
    let every = ((output_interval / dt).round() as usize).max(1);
    let l = liouvillian(sys);
    let n = l.dim();
    let mut x = vectorize(rho0.matrix());
    let mut k = [vec![ZERO; n], vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]];
    let mut tmp = vec![ZERO; n];
    let mut path = MasterPath {
        times: vec![0.0],
        states: vec![rho0.clone()],
    };
    for step in 1..=steps {
        rk4_step(&l, &mut x, dt, &mut k, &mut tmp);
        if step % every == 0 || step == steps {
            let t = step as f64 * dt;
            let rho = DensityMatrix::normalized_unchecked(&unvectorize(&x, sys.dim()));
            let min = rho.min_eigenvalue();
            if min < POSITIVITY_ABORT {
                return Err(Error::PositivityViolation {
                    time: t,
                    min_eigenvalue: min,
                });
            }
            path.times.push(t);
            path.states.push(rho);
        }
    }
    Ok(path)
}

/// Solves `(L - sigma) x = x` repeatedly from `start` until the normalized
/// iterate is a fixed point of the generator.
fn null_vector(l: &CsrMatrix, lu: &BandedLu, start: Vec<C64>, dim: usize) -> (CMatrix, f64) {
    let mut x = start;
    let mut best = (CMatrix::zeros(dim, dim), f64::INFINITY);
    for _ in 0..12 {
        lu.solve_in_place(&mut x);
        let rho = DensityMatrix::normalized_unchecked(&unvectorize(&x, dim)).into_inner();
        let v = vectorize(&rho);
        let res = l.matvec(&v).iter().fold(0.0_f64, |a, z| a.max(z.norm()));
        if res < best.1 {
            best = (rho, res);
        }
        if best.1 <= STATIONARY_RESIDUAL * 1e-2 {
            break;
        }
        x = v;
    }
    best
}

/// Unique stationary state of the master equation by shifted inverse
/// iteration on the vectorized generator.
pub fn stationary_state(sys: &CollectiveSpinSystem) -> Result<DensityMatrix> {
    let d = sys.dim();
    let l = liouvillian(sys);
    let shift = -1e-10 * (1.0 + l.inf_norm());
    let lu = BandedLu::factor(&l, C64::new(shift, 0.0))?;
    let mixed = vectorize(&(CMatrix::identity(d, d) / C64::new(d as f64, 0.0)));
    let mut corner = vec![ZERO; d * d];
    corner[0] = ONE;
    let (rho_a, res_a) = null_vector(&l, &lu, mixed, d);
    let (rho_b, _) = null_vector(&l, &lu, corner, d);
    if res_a > STATIONARY_RESIDUAL {
        return Err(Error::Residual {
            residual: res_a,
            tolerance: STATIONARY_RESIDUAL,
        });
    }
    let mismatch = max_abs(&(&rho_a - &rho_b));
    if mismatch > 1e-6 {
        return Err(Error::DegenerateStationaryState(mismatch));
    }
    Ok(DensityMatrix { matrix: rho_a })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryDiagnostics {
    /// `max_ij |(J- rho - <J-> rho)_ij|`.
    pub rmax: f64,
    pub purity: f64,
    /// `omega N / (2 kappa)`.
    pub beta: f64,
}

pub fn diagnostics(sys: &CollectiveSpinSystem, rho_ss: &DensityMatrix) -> StationaryDiagnostics {
    let rho = rho_ss.matrix();
    let jm = &sys.ops.jminus.matrix;
    let mean = trace(&(jm * rho));
    let r = jm * rho - rho * mean;
    StationaryDiagnostics {
        rmax: max_abs(&r),
        purity: rho_ss.purity(),
        beta: sys.omega * sys.n as f64 / (2.0 * sys.kappa),
    }
}

/// One row of a stationary scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub omega_over_kappa: f64,
    pub m_x: f64,
    pub m_y: f64,
    pub m_z: f64,
    pub purity: f64,
    pub rmax: f64,
    pub beta: f64,
}

/// Stationary magnetization and diagnostics over a grid of `omega/kappa`
/// (with `kappa` fixed).
pub fn stationary_scan(n: usize, kappa: f64, omegas_over_kappa: &[f64]) -> Result<Vec<ScanRow>> {
    map_indexed(omegas_over_kappa.len(), |i| {
        let w = omegas_over_kappa[i];
        let sys = CollectiveSpinSystem::new(n, w * kappa, kappa)?;
        let rho = stationary_state(&sys)?;
        let m = magnetization_of_density(&sys, rho.matrix())?;
        let diag = diagnostics(&sys, &rho);
        Ok(ScanRow {
            n,
            omega_over_kappa: w,
            m_x: m.x,
            m_y: m.y,
            m_z: m.z,
            purity: diag.purity,
            rmax: diag.rmax,
            beta: diag.beta,
        })
    })
    .into_iter()
    .collect()
}
