//! Implicitly restarted Arnoldi iteration for the largest-magnitude
//! eigenvalues of a complex linear operator.
//!
//! The operator is supplied as a closure, so the same routine drives plain
//! sparse products and shift-invert solves. Restarts use exact shifts (the
//! unwanted Ritz values) applied through Givens-based QR steps on the
//! Hessenberg matrix.

use nalgebra::Schur;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, CMatrix, C64, ZERO};

#[derive(Debug, Clone, Copy)]
pub struct ArnoldiOptions {
    /// Number of wanted eigenpairs.
    pub nev: usize,
    /// Krylov subspace dimension.
    pub ncv: usize,
    /// Relative residual tolerance for the wanted Ritz pairs.
    pub tol: f64,
    pub max_restarts: usize,
}

impl Default for ArnoldiOptions {
    fn default() -> Self {
        Self {
            nev: 4,
            ncv: 60,
            tol: 1e-10,
            max_restarts: 300,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RitzPair {
    pub value: C64,
    pub vector: Vec<C64>,
    /// Residual estimate `||A x - value x||` for the unit Ritz vector.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct ArnoldiResult {
    /// Wanted pairs, sorted by decreasing magnitude.
    pub pairs: Vec<RitzPair>,
    pub restarts: usize,
    pub operator_applications: usize,
}

struct Factorization {
    n: usize,
    m: usize,
    basis: Vec<Vec<C64>>,
    hessenberg: CMatrix,
    beta: f64,
    rng: ChaCha8Rng,
    applications: usize,
}

impl Factorization {
    fn random_orthogonal(&mut self, upto: usize) -> Vec<C64> {
        loop {
            let mut r: Vec<C64> = (0..self.n)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(&mut self.rng);
                    let im: f64 = StandardNormal.sample(&mut self.rng);
                    C64::new(re, im)
                })
                .collect();
            for _ in 0..2 {
                for v in &self.basis[..upto] {
                    let h = dot(v, &r);
                    r.iter_mut().zip(v).for_each(|(x, y)| *x -= h * y);
                }
            }
            let nr = norm(&r);
            if nr > 1e-8 {
                r.iter_mut().for_each(|x| *x /= nr);
                return r;
            }
        }
    }

    /// Extends the factorization from length `k` to `m`.
    fn extend<F: FnMut(&[C64], &mut [C64])>(&mut self, k: usize, op: &mut F) {
        let mut w = vec![ZERO; self.n];
        for j in k..self.m {
            op(&self.basis[j], &mut w);
            self.applications += 1;
            let wnorm0 = norm(&w);
            let mut h = vec![ZERO; j + 1];
            // classical Gram-Schmidt with one DGKS correction
            for pass in 0..2 {
                let coeffs: Vec<C64> = self.basis[..=j].iter().map(|v| dot(v, &w)).collect();
                for (v, c) in self.basis[..=j].iter().zip(&coeffs) {
                    w.iter_mut().zip(v).for_each(|(x, y)| *x -= c * y);
                }
                h.iter_mut().zip(&coeffs).for_each(|(a, b)| *a += b);
                if pass == 0 && norm(&w) > 0.717 * wnorm0 {
                    break;
                }
            }
            for (i, hi) in h.into_iter().enumerate() {
                self.hessenberg[(i, j)] = hi;
            }
            let beta = norm(&w);
            let next = if beta <= 1e-12 * wnorm0.max(f64::MIN_POSITIVE) {
                // invariant subspace found
                self.beta_or_set(j, 0.0);
                if j + 1 < self.m {
                    self.random_orthogonal(j + 1)
                } else {
                    vec![ZERO; self.n]
                }
            } else {
                self.beta_or_set(j, beta);
                w.iter().map(|x| x / beta).collect()
            };
            if self.basis.len() > j + 1 {
                self.basis[j + 1] = next;
            } else {
                self.basis.push(next);
            }
        }
    }

    fn beta_or_set(&mut self, j: usize, beta: f64) {
        if j + 1 < self.m {
            self.hessenberg[(j + 1, j)] = C64::new(beta, 0.0);
        } else {
            self.beta = beta;
        }
    }
}

/// Eigenpairs of a small dense matrix: values and unit eigenvectors.
fn dense_eigenpairs(h: &CMatrix) -> (Vec<C64>, CMatrix) {
    let m = h.nrows();
    let (q, t) = Schur::new(h.clone()).unpack();
    let values: Vec<C64> = (0..m).map(|i| t[(i, i)]).collect();
    let scale = t.iter().fold(0.0_f64, |a, z| a.max(z.norm())).max(f64::MIN_POSITIVE);
    let mut x = CMatrix::zeros(m, m);
    for i in 0..m {
        let lambda = values[i];
        x[(i, i)] = C64::new(1.0, 0.0);
        for k in (0..i).rev() {
            let mut acc = ZERO;
            for l in (k + 1)..=i {
                acc += t[(k, l)] * x[(l, i)];
            }
            let mut denom = t[(k, k)] - lambda;
            if denom.norm() < f64::EPSILON * scale {
                denom = C64::new(f64::EPSILON * scale, 0.0);
            }
            x[(k, i)] = -acc / denom;
        }
    }
    let mut y = q * x;
    for i in 0..m {
        let nrm = y.column(i).norm();
        y.column_mut(i).unscale_mut(nrm);
    }
    (values, y)
}

fn givens(a: C64, b: C64) -> (f64, C64) {
    let an = a.norm();
    let r = (an * an + b.norm_sqr()).sqrt();
    if r == 0.0 {
        return (1.0, ZERO);
    }
    if an == 0.0 {
        return (0.0, b.conj() / b.norm());
    }
    (an / r, (a / an) * b.conj() / r)
}

/// One shifted QR step `H <- Q^H H Q` on an upper Hessenberg matrix, with `Q`
/// accumulated into `acc`.
fn shifted_qr_step(h: &mut CMatrix, shift: C64, acc: &mut CMatrix) {
    let m = h.nrows();
    for i in 0..m {
        h[(i, i)] -= shift;
    }
    let mut rotations = Vec::with_capacity(m.saturating_sub(1));
    for i in 0..m.saturating_sub(1) {
        let (c, s) = givens(h[(i, i)], h[(i + 1, i)]);
        for col in i..m {
            let a = h[(i, col)];
            let b = h[(i + 1, col)];
            h[(i, col)] = a * c + s * b;
            h[(i + 1, col)] = -s.conj() * a + b * c;
        }
        h[(i + 1, i)] = ZERO;
        rotations.push((c, s));
    }
    for (i, &(c, s)) in rotations.iter().enumerate() {
        let top = (i + 2).min(m);
        for row in 0..top {
            let a = h[(row, i)];
            let b = h[(row, i + 1)];
            h[(row, i)] = a * c + s.conj() * b;
            h[(row, i + 1)] = -s * a + b * c;
        }
        for row in 0..acc.nrows() {
            let a = acc[(row, i)];
            let b = acc[(row, i + 1)];
            acc[(row, i)] = a * c + s.conj() * b;
            acc[(row, i + 1)] = -s * a + b * c;
        }
    }
    for i in 0..m {
        h[(i, i)] += shift;
    }
}

/// Computes the `nev` largest-magnitude eigenpairs of the `n`-dimensional
/// operator `op(x, y): y = A x`.
pub fn largest_magnitude<F>(
    n: usize,
    mut op: F,
    start: Option<&[C64]>,
    options: ArnoldiOptions,
) -> Result<ArnoldiResult>
where
    F: FnMut(&[C64], &mut [C64]),
{
    if n == 0 || options.nev == 0 {
        return Err(Error::InvalidInput("empty eigenproblem".into()));
    }
    let m = options.ncv.min(n).max((options.nev + 2).min(n));
    let nev = options.nev.min(m);
    let mut fact = Factorization {
        n,
        m,
        basis: Vec::with_capacity(m + 1),
        hessenberg: CMatrix::zeros(m, m),
        beta: 0.0,
        rng: ChaCha8Rng::seed_from_u64(0x5eed_a11d),
        applications: 0,
    };
    let v0 = match start {
        Some(s) if s.len() == n && norm(s) > 0.0 => {
            let nr = norm(s);
            s.iter().map(|x| x / nr).collect()
        }
        _ => fact.random_orthogonal(0),
    };
    fact.basis.push(v0);
    fact.extend(0, &mut op);

    let mut restarts = 0;
    loop {
        let (values, vectors) = dense_eigenpairs(&fact.hessenberg);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| values[b].norm().total_cmp(&values[a].norm()));
        let eps23 = f64::EPSILON.powf(2.0 / 3.0);
        let residual = |i: usize| fact.beta * vectors[(m - 1, i)].norm();
        let worst = order[..nev]
            .iter()
            .map(|&i| residual(i) / values[i].norm().max(eps23))
            .fold(0.0, f64::max);
        let converged = worst <= options.tol || m == n;
        if converged || restarts >= options.max_restarts {
            if !converged {
                return Err(Error::NotConverged {
                    restarts,
                    residual: worst,
                });
            }
            let pairs = order[..nev]
                .iter()
                .map(|&i| {
                    let mut x = vec![ZERO; n];
                    for (j, v) in fact.basis[..m].iter().enumerate() {
                        let c = vectors[(j, i)];
                        x.iter_mut().zip(v).for_each(|(a, b)| *a += c * b);
                    }
                    let nr = norm(&x);
                    x.iter_mut().for_each(|a| *a /= nr);
                    RitzPair {
                        value: values[i],
                        vector: x,
                        residual: residual(i),
                    }
                })
                .collect();
            return Ok(ArnoldiResult {
                pairs,
                restarts,
                operator_applications: fact.applications,
            });
        }

        // keep a few extra vectors beyond the wanted ones
        let k = (nev + (m - nev) / 3).clamp(nev, m - 1);
        let mut acc = CMatrix::identity(m, m);
        for &i in &order[k..] {
            shifted_qr_step(&mut fact.hessenberg, values[i], &mut acc);
        }
        let sub = fact.hessenberg[(k, k - 1)];
        let sigma = acc[(m - 1, k - 1)];
        let old_next = std::mem::take(&mut fact.basis[m]);
        let mut new_basis: Vec<Vec<C64>> = Vec::with_capacity(m + 1);
        for col in 0..=k {
            let mut x = vec![ZERO; n];
            for (j, v) in fact.basis[..m].iter().enumerate() {
                let c = acc[(j, col)];
                if c != ZERO {
                    x.iter_mut().zip(v).for_each(|(a, b)| *a += c * b);
                }
            }
            new_basis.push(x);
        }
        // f_k = V_m Q e_{k+1} * H+[k, k-1] + f_m * Q[m-1, k-1]
        let mut f: Vec<C64> = new_basis[k].iter().map(|x| x * sub).collect();
        let scale = sigma * fact.beta;
        f.iter_mut().zip(&old_next).for_each(|(a, b)| *a += scale * b);
        new_basis.truncate(k);
        fact.basis = new_basis;
        let mut h = CMatrix::zeros(m, m);
        h.view_mut((0, 0), (k, k))
            .copy_from(&fact.hessenberg.view((0, 0), (k, k)));
        fact.hessenberg = h;
        let beta_k = norm(&f);
        if beta_k <= 1e-14 {
            fact.hessenberg[(k, k - 1)] = ZERO;
            let r = fact.random_orthogonal(k);
            fact.basis.push(r);
        } else {
            fact.hessenberg[(k, k - 1)] = C64::new(beta_k, 0.0);
            fact.basis.push(f.iter().map(|x| x / beta_k).collect());
        }
        fact.beta = 0.0;
        fact.extend(k, &mut op);
        restarts += 1;
    }
}
