#![allow(dead_code)]

use jj_epr::operator::{HermitianOperator, C64};
use nalgebra::{DMatrix, DVector};

/// `exp(-i t H)` by scaling and squaring of a Taylor series.
pub fn taylor_expm(h: &DMatrix<C64>, t: f64) -> DMatrix<C64> {
    let a = h.map(|x| x * C64::new(0.0, -t));
    let norm = a.iter().map(|x| x.norm()).sum::<f64>();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scaled = a / C64::new(2f64.powi(squarings as i32), 0.0);
    let n = h.nrows();
    let mut result = DMatrix::<C64>::identity(n, n);
    let mut term = DMatrix::<C64>::identity(n, n);
    for k in 1..=40 {
        term = &term * &scaled / C64::new(k as f64, 0.0);
        result += &term;
        if term.iter().map(|x| x.norm()).fold(0.0, f64::max) < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

pub fn apply_dense(u: &DMatrix<C64>, psi: &[C64]) -> Vec<C64> {
    (u * DVector::from_column_slice(psi)).iter().copied().collect()
}

pub fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn lowest_dense_eigenvalue(h: &HermitianOperator) -> f64 {
    h.matrix().to_dense().symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}
