//! Joint number-difference basis of two atomic species in a double well.
//!
//! Each species is a Schwinger pseudo-spin of length `N/2`: the left/right
//! populations `(N/2 + m, N/2 - m)` map to `Jz = m`, and tunneling between the
//! wells is proportional to `Jx`. The joint basis is ordered row-major over
//! `(m_a, m_b)` with `m` ascending in each factor.

use std::fmt;

use crate::error::{Error, Result};
use crate::operator::{HermitianOperator, LinearOperator, SparseMatrix, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Species {
    A,
    B,
}

impl fmt::Display for Species {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Species::A => write!(f, "A"),
            Species::B => write!(f, "B"),
        }
    }
}

/// The `Jz` ladder of one species, possibly truncated to `|m| <= cutoff`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpinFactor {
    n_atoms: usize,
    /// Twice the lowest retained `m`.
    two_m_min: i64,
    levels: usize,
}

impl SpinFactor {
    pub fn full(n_atoms: usize) -> Result<Self> {
        if n_atoms == 0 {
            return Err(Error::InvalidParameter("atom number must be at least 1".into()));
        }
        Ok(Self { n_atoms, two_m_min: -(n_atoms as i64), levels: n_atoms + 1 })
    }

    /// Keeps `|m| <= cutoff` for even `N` and `|m| <= cutoff + 1/2` for odd `N`.
    pub fn truncated(n_atoms: usize, cutoff: usize) -> Result<Self> {
        let full = Self::full(n_atoms)?;
        if cutoff == 0 {
            return Err(Error::InvalidParameter("number cutoff too small: need at least 1".into()));
        }
        let two_max = if n_atoms % 2 == 0 { 2 * cutoff as i64 } else { 2 * cutoff as i64 + 1 };
        if two_max >= n_atoms as i64 {
            return Ok(full);
        }
        Ok(Self { n_atoms, two_m_min: -two_max, levels: two_max as usize + 1 })
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn is_full(&self) -> bool {
        self.levels == self.n_atoms + 1
    }

    /// Spin length `j = N/2`.
    pub fn spin(&self) -> f64 {
        self.n_atoms as f64 / 2.0
    }

    pub fn m(&self, level: usize) -> f64 {
        (self.two_m_min + 2 * level as i64) as f64 / 2.0
    }

    pub fn m_values(&self) -> Vec<f64> {
        (0..self.levels).map(|k| self.m(k)).collect()
    }

    /// `Jx`, `Jy`, `Jz` acting on this factor alone.
    pub fn operators(&self) -> SpinOperators {
        let j = self.spin();
        let mut plus = Vec::with_capacity(self.levels);
        for k in 0..self.levels.saturating_sub(1) {
            let m = self.m(k);
            let amp = (j * (j + 1.0) - m * (m + 1.0)).max(0.0).sqrt();
            plus.push((k + 1, k, amp));
        }
        let jx = plus
            .iter()
            .flat_map(|&(r, c, a)| [(r, c, C64::new(a / 2.0, 0.0)), (c, r, C64::new(a / 2.0, 0.0))]);
        let jy = plus
            .iter()
            .flat_map(|&(r, c, a)| [(r, c, C64::new(0.0, -a / 2.0)), (c, r, C64::new(0.0, a / 2.0))]);
        let jx = SparseMatrix::from_triplets(self.levels, jx.collect::<Vec<_>>()).expect("in range");
        let jy = SparseMatrix::from_triplets(self.levels, jy.collect::<Vec<_>>()).expect("in range");
        SpinOperators {
            jx: HermitianOperator::new(jx).expect("constructed conjugate-symmetric"),
            jy: HermitianOperator::new(jy).expect("constructed conjugate-symmetric"),
            jz: HermitianOperator::from_real_diagonal(&self.m_values()),
        }
    }

    /// SU(2) coherent state with Bloch angles `(theta, phi)`:
    /// `c_m = sqrt(C(N, j+m)) cos(θ/2)^(j+m) sin(θ/2)^(j-m) e^(-i m φ)`.
    /// `theta = 0` puts every atom in the left well (`m = +N/2`).
    /// On a truncated factor the retained amplitudes are renormalized.
    pub fn coherent_amplitudes(&self, theta: f64, phi: f64) -> Result<Vec<C64>> {
        if !theta.is_finite() || !phi.is_finite() {
            return Err(Error::InvalidParameter("coherent-state angles must be finite".into()));
        }
        let n = self.n_atoms;
        let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
        let mut ln_binom = vec![0.0; n + 1];
        for k in 1..=n {
            ln_binom[k] = ln_binom[k - 1] + ((n - k + 1) as f64).ln() - (k as f64).ln();
        }
        let amps: Vec<C64> = (0..self.levels)
            .map(|level| {
                let m = self.m(level);
                let up = (self.two_m_min + 2 * level as i64 + n as i64) as usize / 2;
                let down = n - up;
                let magnitude = signed_power(c, up) * signed_power(s, down) * (0.5 * ln_binom[up]).exp();
                C64::from_polar(1.0, -m * phi) * magnitude
            })
            .collect();
        if self.is_full() {
            Ok(amps)
        } else {
            normalize(amps)
        }
    }
}

fn signed_power(base: f64, exp: usize) -> f64 {
    if exp == 0 {
        return 1.0;
    }
    if base == 0.0 {
        return 0.0;
    }
    let sign = if base < 0.0 && exp % 2 == 1 { -1.0 } else { 1.0 };
    sign * (exp as f64 * base.abs().ln()).exp()
}

fn normalize(mut amps: Vec<C64>) -> Result<Vec<C64>> {
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::InvalidParameter("state has zero or non-finite norm".into()));
    }
    amps.iter_mut().for_each(|a| *a /= norm);
    Ok(amps)
}

/// Angular-momentum components of one spin.
#[derive(Debug, Clone)]
pub struct SpinOperators {
    pub jx: HermitianOperator,
    pub jy: HermitianOperator,
    pub jz: HermitianOperator,
}

/// Product space of the two species' `Jz` ladders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TwoSpinBasis {
    a: SpinFactor,
    b: SpinFactor,
}

impl TwoSpinBasis {
    pub fn new(n_atoms_a: usize, n_atoms_b: usize) -> Result<Self> {
        Ok(Self { a: SpinFactor::full(n_atoms_a)?, b: SpinFactor::full(n_atoms_b)? })
    }

    /// Basis restricted to `|m_α|` within `cutoff` in both species.
    pub fn truncated(n_atoms_a: usize, n_atoms_b: usize, cutoff: usize) -> Result<Self> {
        Ok(Self {
            a: SpinFactor::truncated(n_atoms_a, cutoff)?,
            b: SpinFactor::truncated(n_atoms_b, cutoff)?,
        })
    }

    pub fn n_atoms_a(&self) -> usize {
        self.a.n_atoms
    }

    pub fn n_atoms_b(&self) -> usize {
        self.b.n_atoms
    }

    pub fn n_atoms(&self, species: Species) -> usize {
        self.factor(species).n_atoms
    }

    pub fn factor(&self, species: Species) -> &SpinFactor {
        match species {
            Species::A => &self.a,
            Species::B => &self.b,
        }
    }

    pub fn is_full(&self) -> bool {
        self.a.is_full() && self.b.is_full()
    }

    pub fn dimension(&self) -> usize {
        self.a.levels * self.b.levels
    }

    pub fn index(&self, level_a: usize, level_b: usize) -> usize {
        debug_assert!(level_a < self.a.levels && level_b < self.b.levels);
        level_a * self.b.levels + level_b
    }

    pub fn levels_of(&self, index: usize) -> (usize, usize) {
        (index / self.b.levels, index % self.b.levels)
    }

    /// `(m_a, m_b)` of a basis index.
    pub fn m_of(&self, index: usize) -> (f64, f64) {
        let (ia, ib) = self.levels_of(index);
        (self.a.m(ia), self.b.m(ib))
    }

    /// Index of the state with the given `(m_a, m_b)`, if it is in the basis.
    pub fn index_of(&self, m_a: f64, m_b: f64) -> Option<usize> {
        let level = |f: &SpinFactor, m: f64| {
            let two = (2.0 * m).round() as i64 - f.two_m_min;
            (two >= 0 && two % 2 == 0 && ((two / 2) as usize) < f.levels).then_some((two / 2) as usize)
        };
        Some(self.index(level(&self.a, m_a)?, level(&self.b, m_b)?))
    }

    /// Spin operators of one species, acting as identity on the other.
    pub fn spin_operators(&self, species: Species) -> SpinOperators {
        let ops = self.factor(species).operators();
        let embed = |op: &HermitianOperator| match species {
            Species::A => op.kron(&HermitianOperator::identity(self.b.levels)),
            Species::B => HermitianOperator::identity(self.a.levels).kron(op),
        };
        SpinOperators { jx: embed(&ops.jx), jy: embed(&ops.jy), jz: embed(&ops.jz) }
    }

    /// Product of one SU(2) coherent state per species.
    pub fn coherent_state(&self, theta_a: f64, phi_a: f64, theta_b: f64, phi_b: f64) -> Result<StateVector> {
        let amps_a = self.a.coherent_amplitudes(theta_a, phi_a)?;
        let amps_b = self.b.coherent_amplitudes(theta_b, phi_b)?;
        Ok(StateVector::product(&amps_a, &amps_b))
    }
}

/// Free-function form of [`TwoSpinBasis::new`].
pub fn build_basis(n_atoms_a: usize, n_atoms_b: usize) -> Result<TwoSpinBasis> {
    TwoSpinBasis::new(n_atoms_a, n_atoms_b)
}

pub fn spin_operators(basis: &TwoSpinBasis, species: Species) -> SpinOperators {
    basis.spin_operators(species)
}

pub fn coherent_spin_state(
    basis: &TwoSpinBasis,
    theta_a: f64,
    phi_a: f64,
    theta_b: f64,
    phi_b: f64,
) -> Result<StateVector> {
    basis.coherent_state(theta_a, phi_a, theta_b, phi_b)
}

/// Normalized complex amplitude vector.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: Vec<C64>,
}

pub const NORM_TOLERANCE: f64 = 1e-9;

impl StateVector {
    /// Wraps amplitudes that are already normalized to within [`NORM_TOLERANCE`].
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        let norm_sqr: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sqr - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidParameter(format!("state norm² = {norm_sqr} is not 1")));
        }
        Ok(Self { amps })
    }

    pub fn normalized(amps: Vec<C64>) -> Result<Self> {
        Ok(Self { amps: normalize(amps)? })
    }

    pub(crate) fn from_raw(amps: Vec<C64>) -> Self {
        Self { amps }
    }

    pub fn product(a: &[C64], b: &[C64]) -> Self {
        let amps = a.iter().flat_map(|&x| b.iter().map(move |&y| x * y)).collect();
        Self { amps }
    }

    pub fn basis_state(dim: usize, index: usize) -> Self {
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[index] = C64::new(1.0, 0.0);
        Self { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn overlap_sqr(&self, other: &StateVector) -> f64 {
        self.inner(other).norm_sqr()
    }

    pub fn apply(&self, op: &dyn LinearOperator) -> Vec<C64> {
        assert_eq!(op.dim(), self.dim(), "operator and state dimensions differ");
        let mut out = vec![C64::new(0.0, 0.0); self.dim()];
        op.apply(&self.amps, &mut out);
        out
    }

    pub fn expectation(&self, op: &HermitianOperator) -> f64 {
        let image = self.apply(op);
        self.amps.iter().zip(&image).map(|(a, b)| (a.conj() * b).re).sum()
    }

    /// `<A²> - <A>²` evaluated as `|A ψ|² - <ψ|A ψ>²`, clamped at zero.
    pub fn variance(&self, op: &HermitianOperator) -> f64 {
        let image = self.apply(op);
        let mean: f64 = self.amps.iter().zip(&image).map(|(a, b)| (a.conj() * b).re).sum();
        let second: f64 = image.iter().map(|b| b.norm_sqr()).sum();
        (second - mean * mean).max(0.0)
    }
}
