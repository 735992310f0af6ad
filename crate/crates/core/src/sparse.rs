//! Compressed-row sparse matrices and a banded LU factorization.
//!
//! Vectorized superoperators of the collective-spin model are banded: with
//! column stacking, `I (x) A` couples neighbouring rows and `A^T (x) I` couples
//! rows one block (`d = N + 1`) apart. A banded LU with partial pivoting
//! therefore factors an `(N+1)^2` generator in `O(N^4)` work and `O(N^3)`
//! memory, which is what makes stationary solves and shift-invert eigen-solves
//! cheap up to N ~ 150.

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64, ZERO};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<C64>,
}

impl CsrMatrix {
    /// Builds an `n x n` matrix from `(row, col, value)` triplets; duplicates
    /// are summed and exact zeros dropped.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, C64)>) -> Self {
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        let mut rows = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            debug_assert!(r < n && c < n);
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                rows.push(r);
                last = Some((r, c));
            }
        }
        // drop explicit zeros created by cancellation
        let mut keep_cols = Vec::with_capacity(col_idx.len());
        let mut keep_vals = Vec::with_capacity(values.len());
        for ((r, c), v) in rows.into_iter().zip(col_idx).zip(values) {
            if v != ZERO {
                row_ptr[r + 1] += 1;
                keep_cols.push(c);
                keep_vals.push(v);
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n,
            row_ptr,
            col_idx: keep_cols,
            values: keep_vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.n).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.row(i).find(|&(c, _)| c == j).map_or(ZERO, |(_, v)| v)
    }

    /// `y = A x`
    pub fn matvec_into(&self, x: &[C64], y: &mut [C64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let mut acc = ZERO;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let t = self.triplets().map(|(i, j, v)| (j, i, v.conj())).collect();
        Self::from_triplets(self.n, t)
    }

    pub fn add_diagonal(&self, shift: C64) -> Self {
        let mut t: Vec<_> = self.triplets().collect();
        t.extend((0..self.n).map(|i| (i, i, shift)));
        Self::from_triplets(self.n, t)
    }

    pub fn scale(&self, factor: C64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let t = self.triplets().chain(other.triplets()).collect();
        Self::from_triplets(self.n, t)
    }

    /// Lower and upper bandwidths `(kl, ku)`.
    pub fn bandwidths(&self) -> (usize, usize) {
        self.triplets().fold((0, 0), |(kl, ku), (i, j, _)| {
            if i > j {
                (kl.max(i - j), ku)
            } else {
                (kl, ku.max(j - i))
            }
        })
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.n, self.n);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }
}

/// LU factorization with partial pivoting of a banded matrix, stored in the
/// LAPACK `gbtrf` column layout (`A(i, j)` at row `kl + ku + i - j` of column `j`).
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    kv: usize,
    ldab: usize,
    ab: Vec<C64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    /// Factors `A - shift * I`.
    pub fn factor(a: &CsrMatrix, shift: C64) -> Result<Self> {
        let n = a.dim();
        let (kl, ku) = a.bandwidths();
        let kv = kl + ku;
        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![ZERO; ldab * n];
        for (i, j, v) in a.triplets() {
            ab[j * ldab + kv + i - j] += v;
        }
        for j in 0..n {
            ab[j * ldab + kv] -= shift;
        }
        let mut lu = Self {
            n,
            kl,
            kv,
            ldab,
            ab,
            pivots: vec![0; n],
        };
        lu.decompose()?;
        Ok(lu)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        j * self.ldab + self.kv + i - j
    }

    fn decompose(&mut self) -> Result<()> {
        let n = self.n;
        let kl = self.kl;
        let kv = self.kv;
        let ldab = self.ldab;
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let col = j * ldab + kv;
            let mut jp = 0;
            let mut best = -1.0;
            for p in 0..=km {
                let mag = self.ab[col + p].norm();
                if mag > best {
                    best = mag;
                    jp = p;
                }
            }
            self.pivots[j] = j + jp;
            if best == 0.0 {
                return Err(Error::Singular(j));
            }
            ju = ju.max((j + kv - kl + jp).min(n - 1)); // j + ku + jp
            if jp != 0 {
                for c in j..=ju {
                    let a = self.idx(j, c);
                    let b = self.idx(j + jp, c);
                    self.ab.swap(a, b);
                }
            }
            if km > 0 {
                let inv = self.ab[col].inv();
                for p in 1..=km {
                    self.ab[col + p] *= inv;
                }
                for c in (j + 1)..=ju {
                    let u = self.ab[self.idx(j, c)];
                    if u == ZERO {
                        continue;
                    }
                    let base_c = c * ldab + kv + j - c;
                    for p in 1..=km {
                        let l = self.ab[col + p];
                        self.ab[base_c + p] -= l * u;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `(A - shift) x = b` in place.
    pub fn solve_in_place(&self, b: &mut [C64]) {
        let n = self.n;
        for j in 0..n.saturating_sub(1) {
            let lm = self.kl.min(n - 1 - j);
            let l = self.pivots[j];
            if l != j {
                b.swap(l, j);
            }
            let bj = b[j];
            if bj != ZERO {
                let col = j * self.ldab + self.kv;
                for p in 1..=lm {
                    b[j + p] -= self.ab[col + p] * bj;
                }
            }
        }
        for j in (0..n).rev() {
            let col = j * self.ldab + self.kv;
            b[j] /= self.ab[col];
            let bj = b[j];
            if bj != ZERO {
                let lo = j.saturating_sub(self.kv);
                for i in lo..j {
                    b[i] -= self.ab[col + i - j] * bj;
                }
            }
        }
    }

    /// Solves `(A - shift)^H x = b` in place.
    pub fn solve_adjoint_in_place(&self, b: &mut [C64]) {
        let n = self.n;
        for j in 0..n {
            let col = j * self.ldab + self.kv;
            let lo = j.saturating_sub(self.kv);
            let mut acc = b[j];
            for i in lo..j {
                acc -= self.ab[col + i - j].conj() * b[i];
            }
            b[j] = acc / self.ab[col].conj();
        }
        for j in (0..n.saturating_sub(1)).rev() {
            let lm = self.kl.min(n - 1 - j);
            let col = j * self.ldab + self.kv;
            let mut acc = b[j];
            for p in 1..=lm {
                acc -= self.ab[col + p].conj() * b[j + p];
            }
            b[j] = acc;
            let l = self.pivots[j];
            if l != j {
                b.swap(l, j);
            }
        }
    }
}
