//! Sparse complex matrices in CSR layout and the Hermitian operators built on them.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Anything that can act on a complex vector as a linear map `y = A x`.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[C64], y: &mut [C64]);
}

/// Square sparse complex matrix, compressed by rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are summed
    /// and exact zeros are dropped.
    pub fn from_triplets<I>(dim: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, C64)>,
    {
        let mut entries: Vec<(usize, usize, C64)> = triplets.into_iter().collect();
        if let Some(&(r, c, _)) = entries.iter().find(|&&(r, c, _)| r >= dim || c >= dim) {
            return Err(Error::InvalidParameter(format!(
                "entry ({r}, {c}) outside a {dim}x{dim} matrix"
            )));
        }
        entries.sort_by_key(|&(r, c, _)| (r, c));

        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(entries.len());
        let mut vals: Vec<C64> = Vec::with_capacity(entries.len());
        let mut rows = Vec::with_capacity(entries.len());
        for (r, c, v) in entries {
            if let (Some(&lr), Some(&lc)) = (rows.last(), cols.last()) {
                if lr == r && lc == c {
                    *vals.last_mut().unwrap() += v;
                    continue;
                }
            }
            rows.push(r);
            cols.push(c);
            vals.push(v);
        }
        let mut keep_rows = Vec::with_capacity(rows.len());
        let mut keep_cols = Vec::with_capacity(rows.len());
        let mut keep_vals = Vec::with_capacity(rows.len());
        for ((r, c), v) in rows.into_iter().zip(cols).zip(vals) {
            if v != C64::new(0.0, 0.0) {
                keep_rows.push(r);
                keep_cols.push(c);
                keep_vals.push(v);
            }
        }
        for &r in &keep_rows {
            row_ptr[r + 1] += 1;
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self { dim, row_ptr, cols: keep_cols, vals: keep_vals })
    }

    pub fn zeros(dim: usize) -> Self {
        Self { dim, row_ptr: vec![0; dim + 1], cols: Vec::new(), vals: Vec::new() }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![C64::new(1.0, 0.0); dim])
    }

    pub fn diagonal(values: &[C64]) -> Self {
        Self::from_triplets(values.len(), values.iter().enumerate().map(|(i, &v)| (i, i, v)))
            .expect("diagonal entries are in range")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[range.clone()].iter().copied().zip(self.vals[range].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[range.clone()].binary_search(&j) {
            Ok(k) => self.vals[range.start + k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.dim, self.triplets().map(|(i, j, v)| (j, i, v.conj())))
            .expect("same dimension")
    }

    pub fn scale(&self, factor: C64) -> Self {
        let mut out = self.clone();
        out.vals.iter_mut().for_each(|v| *v *= factor);
        out.drop_zeros()
    }

    fn drop_zeros(self) -> Self {
        if self.vals.iter().all(|v| *v != C64::new(0.0, 0.0)) {
            return self;
        }
        Self::from_triplets(self.dim, self.triplets().collect::<Vec<_>>()).expect("same dimension")
    }

    /// `alpha * self + beta * other`.
    pub fn combine(&self, alpha: C64, other: &Self, beta: C64) -> Result<Self> {
        check_dim(self.dim, other.dim)?;
        let lhs = self.triplets().map(|(i, j, v)| (i, j, alpha * v));
        let rhs = other.triplets().map(|(i, j, v)| (i, j, beta * v));
        Self::from_triplets(self.dim, lhs.chain(rhs).collect::<Vec<_>>())
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        check_dim(self.dim, other.dim)?;
        let mut triplets = Vec::new();
        for i in 0..self.dim {
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    triplets.push((i, j, a * b));
                }
            }
        }
        Self::from_triplets(self.dim, triplets)
    }

    /// `self * other - other * self`.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        let ab = self.matmul(other)?;
        let ba = other.matmul(self)?;
        ab.combine(C64::new(1.0, 0.0), &ba, C64::new(-1.0, 0.0))
    }

    /// Kronecker product `self ⊗ other`; the left factor is the slow index.
    pub fn kron(&self, other: &Self) -> Self {
        let db = other.dim;
        let triplets = self.triplets().flat_map(|(i, j, a)| {
            other.triplets().map(move |(k, l, b)| (i * db + k, j * db + l, a * b))
        });
        Self::from_triplets(self.dim * db, triplets.collect::<Vec<_>>())
            .expect("kron indices are in range")
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let diff = self
            .combine(C64::new(1.0, 0.0), other, C64::new(-1.0, 0.0))
            .expect("equal dimensions");
        diff.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Exact conjugate symmetry of the stored entries.
    pub fn is_hermitian(&self) -> bool {
        self.triplets().all(|(i, j, v)| self.get(j, i) == v.conj())
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }
}

impl LinearOperator for SparseMatrix {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.dim) {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *yi = acc;
        }
    }
}

fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

/// A sparse matrix whose stored entries satisfy `A[i,j] == conj(A[j,i])` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    matrix: SparseMatrix,
}

impl HermitianOperator {
    pub fn new(matrix: SparseMatrix) -> Result<Self> {
        if !matrix.is_hermitian() {
            return Err(Error::InvalidParameter("matrix is not Hermitian".into()));
        }
        Ok(Self { matrix })
    }

    /// Symmetrizes `(M + M†)/2`, which is exactly conjugate-symmetric in floating point.
    pub fn hermitian_part(matrix: &SparseMatrix) -> Self {
        let sum = matrix
            .combine(C64::new(0.5, 0.0), &matrix.adjoint(), C64::new(0.5, 0.0))
            .expect("same dimension");
        Self { matrix: sum }
    }

    pub fn from_real_diagonal(values: &[f64]) -> Self {
        let diag: Vec<C64> = values.iter().map(|&v| C64::new(v, 0.0)).collect();
        Self { matrix: SparseMatrix::diagonal(&diag) }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { matrix: SparseMatrix::zeros(dim) }
    }

    pub fn identity(dim: usize) -> Self {
        Self { matrix: SparseMatrix::identity(dim) }
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self { matrix: self.matrix.scale(C64::new(factor, 0.0)) }
    }

    /// Real linear combination `alpha * self + beta * other`.
    pub fn combine(&self, alpha: f64, other: &Self, beta: f64) -> Result<Self> {
        let m = self.matrix.combine(C64::new(alpha, 0.0), &other.matrix, C64::new(beta, 0.0))?;
        Ok(Self::hermitian_part(&m))
    }

    pub fn square(&self) -> Self {
        Self::hermitian_part(&self.matrix.matmul(&self.matrix).expect("same dimension"))
    }

    /// Symmetrized product `(AB + BA)/2`.
    pub fn anticommutator_half(&self, other: &Self) -> Result<Self> {
        let ab = self.matrix.matmul(&other.matrix)?;
        Ok(Self::hermitian_part(&ab))
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self { matrix: self.matrix.kron(&other.matrix) }
    }

    pub fn diagonal_real(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.matrix.get(i, i).re).collect()
    }

    /// `<x|A|x>` for an arbitrary (not necessarily normalized) vector.
    pub fn quadratic_form(&self, x: &[C64]) -> f64 {
        let mut y = vec![C64::new(0.0, 0.0); self.dim()];
        self.matrix.apply(x, &mut y);
        x.iter().zip(&y).map(|(a, b)| (a.conj() * b).re).sum()
    }
}

impl LinearOperator for HermitianOperator {
    fn dim(&self) -> usize {
        self.matrix.dim
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        self.matrix.apply(x, y)
    }
}

/// `y = sum_k coeff_k * A_k x` over Hermitian terms sharing a dimension, plus
/// an optional real diagonal. Used for Hamiltonians whose couplings vary in time.
pub struct OperatorSum<'a> {
    terms: Vec<(f64, &'a HermitianOperator)>,
    diagonal: Option<&'a [f64]>,
    dim: usize,
}

impl<'a> OperatorSum<'a> {
    pub fn new(dim: usize) -> Self {
        Self { terms: Vec::new(), diagonal: None, dim }
    }

    pub fn term(mut self, coeff: f64, op: &'a HermitianOperator) -> Self {
        assert_eq!(op.dim(), self.dim, "term dimension");
        if coeff != 0.0 {
            self.terms.push((coeff, op));
        }
        self
    }

    pub fn with_diagonal(mut self, diag: &'a [f64]) -> Self {
        assert_eq!(diag.len(), self.dim, "diagonal length");
        self.diagonal = Some(diag);
        self
    }
}

impl LinearOperator for OperatorSum<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        match self.diagonal {
            Some(d) => y.iter_mut().zip(d.iter().zip(x)).for_each(|(yi, (&di, &xi))| *yi = xi * di),
            None => y.iter_mut().for_each(|yi| *yi = C64::new(0.0, 0.0)),
        }
        let mut tmp = vec![C64::new(0.0, 0.0); self.dim];
        for &(c, op) in &self.terms {
            op.apply(x, &mut tmp);
            y.iter_mut().zip(&tmp).for_each(|(yi, ti)| *yi += ti * c);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn duplicates_are_summed_and_zeros_dropped() {
        let m = SparseMatrix::from_triplets(
            2,
            vec![(0, 1, c(1.0, 0.0)), (0, 1, c(2.0, 0.0)), (1, 1, c(1.0, 0.0)), (1, 1, c(-1.0, 0.0))],
        )
        .unwrap();
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 1), c(3.0, 0.0));
        assert_eq!(m.get(1, 1), c(0.0, 0.0));
    }

    #[test]
    fn out_of_range_entry_rejected() {
        assert!(SparseMatrix::from_triplets(2, vec![(2, 0, c(1.0, 0.0))]).is_err());
    }

    #[test]
    fn non_hermitian_rejected() {
        let m = SparseMatrix::from_triplets(2, vec![(0, 1, c(0.0, 1.0)), (1, 0, c(0.0, 1.0))]).unwrap();
        assert!(HermitianOperator::new(m).is_err());
        let m = SparseMatrix::from_triplets(2, vec![(0, 1, c(0.0, 1.0)), (1, 0, c(0.0, -1.0))]).unwrap();
        assert!(HermitianOperator::new(m).is_ok());
    }

    #[test]
    fn kron_matches_dense() {
        let a = SparseMatrix::from_triplets(2, vec![(0, 1, c(1.0, 2.0)), (1, 0, c(3.0, 0.0))]).unwrap();
        let b = SparseMatrix::from_triplets(3, vec![(0, 0, c(2.0, 0.0)), (2, 1, c(0.0, -1.0))]).unwrap();
        let k = a.kron(&b).to_dense();
        let (ad, bd) = (a.to_dense(), b.to_dense());
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(k[(i, j)], ad[(i / 3, j / 3)] * bd[(i % 3, j % 3)]);
            }
        }
    }

    #[test]
    fn operator_sum_applies_terms_and_diagonal() {
        let a = HermitianOperator::from_real_diagonal(&[1.0, 2.0]);
        let diag = [0.5, -0.5];
        let sum = OperatorSum::new(2).term(3.0, &a).with_diagonal(&diag);
        let mut y = vec![C64::new(0.0, 0.0); 2];
        sum.apply(&[c(1.0, 0.0), c(0.0, 1.0)], &mut y);
        assert_eq!(y, vec![c(3.5, 0.0), c(0.0, 5.5)]);
    }
}
