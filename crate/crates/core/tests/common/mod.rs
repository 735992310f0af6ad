//! Brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use timecrystal::linalg::{CMatrix, C64};

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Collective operators built on the full 2^n qubit space and projected onto
/// the symmetric subspace spanned by normalized Dicke states.
pub struct QubitOracle {
    pub jx: CMatrix,
    pub jy: CMatrix,
    pub jz: CMatrix,
    pub jminus: CMatrix,
    /// Columns are the Dicke states in the highest-weight-first order.
    pub dicke: CMatrix,
}

impl QubitOracle {
    pub fn new(n: usize) -> Self {
        let dim = 1 << n;
        // qubit bit = 0 means excited (up)
        let mut sm = CMatrix::zeros(dim, dim);
        let mut sx = CMatrix::zeros(dim, dim);
        let mut sy = CMatrix::zeros(dim, dim);
        let mut sz = CMatrix::zeros(dim, dim);
        for b in 0..dim {
            for q in 0..n {
                let up = b & (1 << q) == 0;
                let flipped = b ^ (1 << q);
                if up {
                    sm[(flipped, b)] += c(1.0);
                    sx[(flipped, b)] += c(0.5);
                    sy[(flipped, b)] += C64::new(0.0, 0.5);
                    sz[(b, b)] += c(0.5);
                } else {
                    sx[(flipped, b)] += c(0.5);
                    sy[(flipped, b)] += C64::new(0.0, -0.5);
                    sz[(b, b)] += c(-0.5);
                }
            }
        }
        let mut dicke = CMatrix::zeros(dim, n + 1);
        for b in 0..dim {
            let k = (b as u32).count_ones() as usize;
            dicke[(b, k)] = c(1.0);
        }
        for k in 0..=n {
            let nrm = dicke.column(k).norm();
            dicke.column_mut(k).unscale_mut(nrm);
        }
        Self {
            jx: sx,
            jy: sy,
            jz: sz,
            jminus: sm,
            dicke,
        }
    }

    pub fn project(&self, op: &CMatrix) -> CMatrix {
        self.dicke.adjoint() * op * &self.dicke
    }
}

