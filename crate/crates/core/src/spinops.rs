//! Collective spin operators in the symmetric (Dicke) sector.
//!
//! Basis index `k = 0..=N` labels `|J, m = J - k>` with `J = N/2`, so the
//! fully excited state sits at index 0 and `J-` moves amplitude to higher
//! indices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_function, CMatrix, CVector, C64, ONE, ZERO};

/// Tolerance on the norm of states handed to observables.
const NORM_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorLabel {
    Jx,
    Jy,
    Jz,
    Jplus,
    Jminus,
    Custom,
}

#[derive(Debug, Clone)]
pub struct DenseOperator {
    pub label: OperatorLabel,
    pub matrix: CMatrix,
}

impl DenseOperator {
    pub fn new(label: OperatorLabel, matrix: CMatrix) -> Self {
        Self { label, matrix }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// The five collective operators plus the ladder coefficients used by the
/// tridiagonal fast paths.
#[derive(Debug, Clone)]
pub struct CollectiveOps {
    pub jx: DenseOperator,
    pub jy: DenseOperator,
    pub jz: DenseOperator,
    pub jplus: DenseOperator,
    pub jminus: DenseOperator,
    /// `J-|k> = ladder[k] |k+1>`; the last entry is zero.
    ladder: Vec<f64>,
}

/// Builds `Jx, Jy, Jz, J+, J-` for `n` two-level atoms.
pub fn build_collective_ops(n: usize) -> Result<CollectiveOps> {
    if n == 0 {
        return Err(Error::InvalidInput("atom number must be at least 1".into()));
    }
    let d = n + 1;
    let j = n as f64 / 2.0;
    let ladder: Vec<f64> = (0..d)
        .map(|k| {
            let m = j - k as f64;
            (j * (j + 1.0) - m * (m - 1.0)).max(0.0).sqrt()
        })
        .collect();
    let mut jminus = CMatrix::zeros(d, d);
    for k in 0..n {
        jminus[(k + 1, k)] = C64::new(ladder[k], 0.0);
    }
    let jplus = jminus.adjoint();
    let half = C64::new(0.5, 0.0);
    let jx = (&jplus + &jminus) * half;
    // J+ = Jx + i Jy  =>  Jy = (J+ - J-) / (2i)
    let jy = (&jplus - &jminus) * C64::new(0.0, -0.5);
    let jz = CMatrix::from_diagonal(&CVector::from_iterator(
        d,
        (0..d).map(|k| C64::new(j - k as f64, 0.0)),
    ));
    Ok(CollectiveOps {
        jx: DenseOperator::new(OperatorLabel::Jx, jx),
        jy: DenseOperator::new(OperatorLabel::Jy, jy),
        jz: DenseOperator::new(OperatorLabel::Jz, jz),
        jplus: DenseOperator::new(OperatorLabel::Jplus, jplus),
        jminus: DenseOperator::new(OperatorLabel::Jminus, jminus),
        ladder,
    })
}

impl CollectiveOps {
    pub fn dim(&self) -> usize {
        self.ladder.len()
    }

    pub fn ladder(&self) -> &[f64] {
        &self.ladder
    }

    /// Diagonal of `J+J-`.
    pub fn jpjm_diagonal(&self) -> impl Iterator<Item = f64> + '_ {
        self.ladder.iter().map(|c| c * c)
    }

    pub fn spin(&self) -> f64 {
        (self.dim() - 1) as f64 / 2.0
    }

    /// `y = J- x`.
    pub fn lower(&self, x: &[C64], y: &mut [C64]) {
        y[0] = ZERO;
        for k in 0..self.dim() - 1 {
            y[k + 1] = x[k] * self.ladder[k];
        }
    }

    /// `y = J+ x`.
    pub fn raise(&self, x: &[C64], y: &mut [C64]) {
        let n = self.dim() - 1;
        for k in 0..n {
            y[k] = x[k + 1] * self.ladder[k];
        }
        y[n] = ZERO;
    }

    /// `<x| J- |x>` without normalization.
    pub fn expect_lower(&self, x: &[C64]) -> C64 {
        (0..self.dim() - 1)
            .map(|k| x[k + 1].conj() * x[k] * self.ladder[k])
            .sum()
    }

    /// `<x| J+J- |x>` without normalization.
    pub fn expect_jpjm(&self, x: &[C64]) -> f64 {
        x.iter()
            .zip(&self.ladder)
            .map(|(a, c)| a.norm_sqr() * c * c)
            .sum()
    }

    /// `<x| Jz |x>` without normalization.
    pub fn expect_jz(&self, x: &[C64]) -> f64 {
        let j = self.spin();
        x.iter()
            .enumerate()
            .map(|(k, a)| a.norm_sqr() * (j - k as f64))
            .sum()
    }
}

/// Atom number, drive and decay rate together with the prebuilt operators.
#[derive(Debug, Clone)]
pub struct CollectiveSpinSystem {
    pub n: usize,
    pub omega: f64,
    pub kappa: f64,
    pub ops: CollectiveOps,
}

impl CollectiveSpinSystem {
    pub fn new(n: usize, omega: f64, kappa: f64) -> Result<Self> {
        if !(omega.is_finite() && omega >= 0.0) {
            return Err(Error::InvalidInput(format!("omega must be finite and >= 0, got {omega}")));
        }
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::InvalidInput(format!("kappa must be finite and > 0, got {kappa}")));
        }
        Ok(Self {
            n,
            omega,
            kappa,
            ops: build_collective_ops(n)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.n + 1
    }

    /// Total spin `J = N/2`.
    pub fn spin(&self) -> f64 {
        self.n as f64 / 2.0
    }

    /// Collective decay rate per jump channel, `kappa / N`.
    pub fn rate(&self) -> f64 {
        self.kappa / self.n as f64
    }

    /// Homodyne coupling `sqrt(2 kappa / N)`.
    pub fn coupling(&self) -> f64 {
        (2.0 * self.kappa / self.n as f64).sqrt()
    }

    /// Index of the basis vector `|J, m>`.
    pub fn index_of(&self, m: f64) -> Option<usize> {
        let k = self.spin() - m;
        if (k - k.round()).abs() > 1e-9 || k < -1e-9 || k > self.n as f64 + 1e-9 {
            return None;
        }
        Some(k.round() as usize)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    pub amplitudes: Vec<C64>,
    pub normalized: bool,
}

impl QuantumState {
    /// Wraps amplitudes, normalizing them.
    pub fn new(mut amplitudes: Vec<C64>) -> Result<Self> {
        let nrm = crate::linalg::norm(&amplitudes);
        if !(nrm.is_finite() && nrm > 0.0) {
            return Err(Error::NotNormalized(nrm));
        }
        amplitudes.iter_mut().for_each(|a| *a /= nrm);
        Ok(Self {
            amplitudes,
            normalized: true,
        })
    }

    /// Unit vector on basis index `k`.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut amplitudes = vec![ZERO; dim];
        amplitudes[k] = ONE;
        Self {
            amplitudes,
            normalized: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        crate::linalg::norm(&self.amplitudes)
    }

    pub fn to_density(&self) -> CMatrix {
        let v = CVector::from_column_slice(&self.amplitudes);
        &v * v.adjoint()
    }
}

/// `exp[i theta (Jx sin(phi) - Jy cos(phi))] |J, J>`.
pub fn spin_coherent_state(sys: &CollectiveSpinSystem, theta: f64, phi: f64) -> Result<QuantumState> {
    let tol = 1e-12;
    if !(-tol..=std::f64::consts::PI + tol).contains(&theta) {
        return Err(Error::InvalidInput(format!("theta = {theta} outside [0, pi]")));
    }
    if !(-tol..=2.0 * std::f64::consts::PI + tol).contains(&phi) {
        return Err(Error::InvalidInput(format!("phi = {phi} outside [0, 2 pi]")));
    }
    let ops = &sys.ops;
    let generator = &ops.jx.matrix * C64::new(theta * phi.sin(), 0.0)
        - &ops.jy.matrix * C64::new(theta * phi.cos(), 0.0);
    let u = hermitian_function(&generator, |x| C64::new(0.0, x).exp());
    QuantumState::new(u.column(0).iter().copied().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Magnetization {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Magnetization {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// `j^2 = m_x^2 + m_y^2 + m_z^2`.
    pub fn length_squared(&self) -> f64 {
        self.x * self.x + self.y * self.y + self.z * self.z
    }
}

/// Magnetization from `<J->` and `<Jz>`: `<Jx> = Re<J->`, `<Jy> = -Im<J->`.
pub(crate) fn magnetization_from(jminus: C64, jz: f64, spin: f64) -> Magnetization {
    Magnetization::new(jminus.re / spin, -jminus.im / spin, jz / spin)
}

/// Magnetization of a normalized amplitude vector, without validation.
pub(crate) fn magnetization_unchecked(ops: &CollectiveOps, x: &[C64]) -> Magnetization {
    magnetization_from(ops.expect_lower(x), ops.expect_jz(x), ops.spin())
}

/// `m = <J>/(N/2)` for a normalized pure state.
pub fn magnetization(sys: &CollectiveSpinSystem, state: &QuantumState) -> Result<Magnetization> {
    if state.dim() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            got: state.dim(),
        });
    }
    let nrm = state.norm();
    if (nrm - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized(nrm));
    }
    Ok(magnetization_unchecked(&sys.ops, &state.amplitudes))
}

/// `m = Tr[rho J]/(N/2)` for a unit-trace density matrix.
pub fn magnetization_of_density(sys: &CollectiveSpinSystem, rho: &CMatrix) -> Result<Magnetization> {
    if rho.nrows() != sys.dim() || rho.ncols() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            got: rho.nrows(),
        });
    }
    let tr = crate::linalg::trace(rho);
    if (tr - ONE).norm() > NORM_TOL {
        return Err(Error::NotNormalized(tr.norm()));
    }
    let ladder = sys.ops.ladder();
    let j = sys.spin();
    // Tr[J- rho] = sum_k c_k rho[k, k+1]
    let jm: C64 = (0..sys.n).map(|k| rho[(k, k + 1)] * ladder[k]).sum();
    let jz: f64 = (0..sys.dim()).map(|k| rho[(k, k)].re * (j - k as f64)).sum();
    Ok(magnetization_from(jm, jz, j))
}
