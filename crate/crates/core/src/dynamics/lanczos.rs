//! Restarted Lanczos with full reorthogonalization for the lowest eigenpair.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::operator::{LinearOperator, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosOptions {
    /// Krylov vectors kept per restart cycle.
    pub max_krylov: usize,
    pub max_restarts: usize,
    /// Target residual `|Hψ - Eψ|`.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self { max_krylov: 160, max_restarts: 40, tolerance: 1e-10, seed: 0x5eed }
    }
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn lowest_ritz(alpha: &[f64], beta: &[f64]) -> (f64, Vec<f64>) {
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
    let (k, &theta) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .expect("non-empty tridiagonal");
    (theta, eig.eigenvectors.column(k).iter().copied().collect())
}

/// Lowest eigenvalue and a normalized eigenvector of a Hermitian operator.
pub fn lowest_eigenpair(h: &dyn LinearOperator, opts: &LanczosOptions) -> Result<(f64, Vec<C64>)> {
    let dim = h.dim();
    if dim < 2 {
        return Err(Error::InvalidParameter("ground state needs dimension >= 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut start: Vec<C64> = (0..dim)
        .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let n0 = norm(&start);
    start.iter_mut().for_each(|x| *x /= n0);

    let m_max = opts.max_krylov.min(dim);
    let mut w = vec![C64::new(0.0, 0.0); dim];
    let mut last_residual = f64::INFINITY;
    for _restart in 0..opts.max_restarts {
        let mut basis = vec![start.clone()];
        let mut alpha = Vec::new();
        let mut beta = Vec::new();
        let (theta, y) = loop {
            let k = basis.len() - 1;
            h.apply(&basis[k], &mut w);
            alpha.push(dot(&basis[k], &w).re);
            for _ in 0..2 {
                for v in &basis {
                    let c = dot(v, &w);
                    w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= c * vi);
                }
            }
            let b = norm(&w);
            let (theta, y) = lowest_ritz(&alpha, &beta);
            let estimate = b * y[k].abs();
            let scale = alpha.iter().map(|a| a.abs()).fold(0.0, f64::max).max(1.0);
            if estimate < opts.tolerance * 0.1 || b < 1e-14 * scale || basis.len() >= m_max {
                break (theta, y);
            }
            beta.push(b);
            basis.push(w.iter().map(|x| x / b).collect());
        };
        let mut ritz = vec![C64::new(0.0, 0.0); dim];
        for (v, &c) in basis.iter().zip(&y) {
            ritz.iter_mut().zip(v).for_each(|(r, vi)| *r += vi * c);
        }
        let nr = norm(&ritz);
        ritz.iter_mut().for_each(|x| *x /= nr);
        h.apply(&ritz, &mut w);
        let energy = dot(&ritz, &w).re;
        let residual = norm(&w.iter().zip(&ritz).map(|(hw, r)| hw - r * energy).collect::<Vec<_>>());
        log::debug!("lanczos cycle: theta = {theta}, residual = {residual:e}");
        last_residual = residual;
        if residual < opts.tolerance {
            return Ok((energy, ritz));
        }
        start = ritz;
    }
    Err(Error::NotConverged { iterations: opts.max_restarts * m_max, residual: last_residual })
}
