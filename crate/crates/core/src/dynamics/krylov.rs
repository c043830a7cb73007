//! Short-iteration Lanczos propagator for `exp(-i dt H) ψ` with Hermitian `H`.
//!
//! The Krylov space grows until the a-posteriori error estimate
//! `β_m |[exp(-i dt T_m)]_{m,1}|` falls below tolerance; if the maximum
//! subspace size is reached first, the step is split in halves.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::operator::{LinearOperator, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovOptions {
    /// Absolute error target per step, relative to `|ψ|`.
    pub tolerance: f64,
    pub max_dim: usize,
    /// Maximum number of step halvings before giving up.
    pub max_splits: u32,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self { tolerance: 1e-13, max_dim: 40, max_splits: 10 }
    }
}

/// Output of one Lanczos expansion.
struct Expansion {
    basis: Vec<Vec<C64>>,
    coeffs: Vec<C64>,
    error: f64,
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// `exp(-i dt T) e_1` for the tridiagonal `T` with the given diagonals.
fn tridiagonal_exp_e1(alpha: &[f64], beta: &[f64], dt: f64) -> Vec<C64> {
    let m = alpha.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    (0..m)
        .map(|row| {
            (0..m)
                .map(|k| {
                    let q = eig.eigenvectors[(row, k)] * eig.eigenvectors[(0, k)];
                    C64::from_polar(q, -dt * eig.eigenvalues[k])
                })
                .sum()
        })
        .collect()
}

fn expand(h: &dyn LinearOperator, psi: &[C64], dt: f64, opts: &KrylovOptions) -> Expansion {
    let dim = h.dim();
    let beta0 = norm(psi);
    let mut basis: Vec<Vec<C64>> = vec![psi.iter().map(|x| x / beta0).collect()];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![C64::new(0.0, 0.0); dim];
    let max_dim = opts.max_dim.min(dim).max(1);
    loop {
        let k = basis.len() - 1;
        h.apply(&basis[k], &mut w);
        let a = dot(&basis[k], &w).re;
        alpha.push(a);
        // Full reorthogonalization, two passes.
        for _ in 0..2 {
            for v in &basis {
                let c = dot(v, &w);
                w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= c * vi);
            }
        }
        let b = norm(&w);
        let coeffs = tridiagonal_exp_e1(&alpha, &beta, dt);
        let error = b * coeffs[k].norm();
        let invariant = b <= 1e-14 * (a.abs() + beta.last().copied().unwrap_or(0.0)).max(1e-300);
        if error <= opts.tolerance || invariant || basis.len() >= max_dim {
            let error = if invariant { 0.0 } else { error };
            let coeffs = coeffs.into_iter().map(|c| c * beta0).collect();
            return Expansion { basis, coeffs, error };
        }
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }
}

/// `exp(-i dt H) ψ`.
pub fn krylov_step(h: &dyn LinearOperator, psi: &[C64], dt: f64, opts: &KrylovOptions) -> Result<Vec<C64>> {
    if psi.len() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), actual: psi.len() });
    }
    if norm(psi) == 0.0 || dt == 0.0 {
        return Ok(psi.to_vec());
    }
    step_recursive(h, psi, dt, opts, 0)
}

fn step_recursive(h: &dyn LinearOperator, psi: &[C64], dt: f64, opts: &KrylovOptions, depth: u32) -> Result<Vec<C64>> {
    let exp = expand(h, psi, dt, opts);
    if exp.error <= opts.tolerance {
        let mut out = vec![C64::new(0.0, 0.0); psi.len()];
        for (v, c) in exp.basis.iter().zip(&exp.coeffs) {
            out.iter_mut().zip(v).for_each(|(o, vi)| *o += c * vi);
        }
        return Ok(out);
    }
    if depth >= opts.max_splits {
        return Err(Error::StepRejected { estimate: exp.error, tolerance: opts.tolerance });
    }
    let half = step_recursive(h, psi, dt / 2.0, opts, depth + 1)?;
    step_recursive(h, &half, dt / 2.0, opts, depth + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{HermitianOperator, SparseMatrix};

    #[test]
    fn zero_hamiltonian_is_identity() {
        let h = HermitianOperator::zeros(5);
        let psi: Vec<C64> = (0..5).map(|i| C64::new(i as f64, 1.0)).collect();
        let out = krylov_step(&h, &psi, 0.7, &KrylovOptions::default()).unwrap();
        assert_eq!(out, psi);
    }

    #[test]
    fn diagonal_hamiltonian_multiplies_phases() {
        let diag = [0.3, -1.2, 2.5, 0.0];
        let h = HermitianOperator::from_real_diagonal(&diag);
        let psi = vec![C64::new(0.5, 0.0); 4];
        let dt = 0.37;
        let out = krylov_step(&h, &psi, dt, &KrylovOptions::default()).unwrap();
        for (o, d) in out.iter().zip(diag) {
            let expected = C64::from_polar(0.5, -d * dt);
            assert!((o - expected).norm() < 1e-13);
        }
    }

    #[test]
    fn long_step_is_split() {
        let m = SparseMatrix::from_triplets(
            60,
            (0..59).flat_map(|i| [(i, i + 1, C64::new(3.0, 0.0)), (i + 1, i, C64::new(3.0, 0.0))]).collect::<Vec<_>>(),
        )
        .unwrap();
        let h = HermitianOperator::new(m).unwrap();
        let mut psi = vec![C64::new(0.0, 0.0); 60];
        psi[30] = C64::new(1.0, 0.0);
        let opts = KrylovOptions { max_dim: 8, ..Default::default() };
        let out = krylov_step(&h, &psi, 2.0, &opts).unwrap();
        let n: f64 = out.iter().map(|x| x.norm_sqr()).sum();
        assert!((n - 1.0).abs() < 1e-12);
        let strict = KrylovOptions { max_dim: 4, max_splits: 1, ..Default::default() };
        assert!(matches!(krylov_step(&h, &psi, 2.0, &strict), Err(Error::StepRejected { .. })));
    }
}
