//! Vectorized (column-stacking) generators.
//!
//! With `vec(X)[i + j d] = X[i, j]` and `vec(A X B) = (B^T (x) A) vec(X)` the
//! tilted generator
//!
//! ```text
//! L_s rho = -i w [Jx, rho] + (k/N)(2 J- rho J+ - J+J- rho - rho J+J-)
//!           - s sqrt(2k/N) (J- rho + rho J+) + (s^2/2) rho
//! ```
//!
//! becomes a sparse matrix with lower bandwidth `d + 1` and upper bandwidth
//! `d`. At `s = 0` it is the plain Lindblad generator.

use crate::linalg::C64;
use crate::sparse::CsrMatrix;
use crate::spinops::CollectiveSpinSystem;

/// Sparse vectorized tilted generator `L_s` of dimension `(N+1)^2`.
pub fn tilted_generator(sys: &CollectiveSpinSystem, s: f64) -> CsrMatrix {
    let d = sys.dim();
    let c = sys.ops.ladder();
    let w = sys.omega;
    let r = sys.rate();
    let g = s * sys.coupling();
    let idx = |i: usize, j: usize| i + j * d;
    let mut t: Vec<(usize, usize, C64)> = Vec::with_capacity(d * d * 9);
    for j in 0..d {
        for i in 0..d {
            let row = idx(i, j);
            let diag = -r * (c[i] * c[i] + c[j] * c[j]) + 0.5 * s * s;
            t.push((row, row, C64::new(diag, 0.0)));
            // -i w Jx rho: Jx[i, i'] = c/2 on the off-diagonals
            if i > 0 {
                t.push((row, idx(i - 1, j), C64::new(0.0, -0.5 * w * c[i - 1])));
                // J- rho
                if g != 0.0 {
                    t.push((row, idx(i - 1, j), C64::new(-g * c[i - 1], 0.0)));
                }
            }
            if i + 1 < d {
                t.push((row, idx(i + 1, j), C64::new(0.0, -0.5 * w * c[i])));
            }
            // +i w rho Jx: contributes Jx[j', j] at column (i, j')
            if j > 0 {
                t.push((row, idx(i, j - 1), C64::new(0.0, 0.5 * w * c[j - 1])));
                // rho J+: J+[j-1, j] = c[j-1]
                if g != 0.0 {
                    t.push((row, idx(i, j - 1), C64::new(-g * c[j - 1], 0.0)));
                }
            }
            if j + 1 < d {
                t.push((row, idx(i, j + 1), C64::new(0.0, 0.5 * w * c[j])));
            }
            // 2 (k/N) J- rho J+
            if i > 0 && j > 0 {
                t.push((row, idx(i - 1, j - 1), C64::new(2.0 * r * c[i - 1] * c[j - 1], 0.0)));
            }
        }
    }
    CsrMatrix::from_triplets(d * d, t)
}

/// Sparse vectorized Lindblad generator (the `s = 0` case).
pub fn liouvillian(sys: &CollectiveSpinSystem) -> CsrMatrix {
    tilted_generator(sys, 0.0)
}

/// Upper bound on the largest real part in the spectrum of `L_s`.
///
/// The leading eigenvalue of a tilted completely positive semigroup is the
/// scaled cumulant generating function of the current, and the conditioned
/// mean current is bounded by `sqrt(2k/N) N`, so
/// `theta(s) <= s^2/2 + |s| sqrt(2k/N) N`.
pub fn spectral_abscissa_bound(sys: &CollectiveSpinSystem, s: f64) -> f64 {
    0.5 * s * s + s.abs() * sys.coupling() * sys.n as f64
}
