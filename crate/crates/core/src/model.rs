//! Two-species double-well Hamiltonians.
//!
//! The exact builder uses the Schwinger form
//! `H = Σ_α [-2J Jx_α + E_αα Jz_α²] + 2 E_AB Jz_A Jz_B`.
//! The phase builder discretizes the number-phase pendulum form
//! `E_AA n_A² + E_BB n_B² + 2 E_AB n_A n_B - JN(cos φ_A + cos φ_B)
//!  + (2J/N)(n_A² cos φ_A + n_B² cos φ_B)` on a truncated number basis, and
//! exists to cross-check the exact builder in the small-imbalance regime.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::basis::{Species, SpinFactor, TwoSpinBasis};
use crate::error::{Error, Result};
use crate::operator::{HermitianOperator, SparseMatrix, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n_atoms_a: usize,
    pub n_atoms_b: usize,
    /// Tunneling energy `J` (ħ = 1).
    pub tunneling_j: f64,
    pub ec_aa: f64,
    pub ec_bb: f64,
    pub ec_ab: f64,
}

impl ModelParams {
    /// Equal atom numbers and all three charging energies equal to `ec`.
    pub fn symmetric(n_atoms: usize, tunneling_j: f64, ec: f64) -> Self {
        Self { n_atoms_a: n_atoms, n_atoms_b: n_atoms, tunneling_j, ec_aa: ec, ec_bb: ec, ec_ab: ec }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_atoms_a == 0 || self.n_atoms_b == 0 {
            return Err(Error::InvalidParameter("atom numbers must be at least 1".into()));
        }
        if !(self.tunneling_j.is_finite() && self.tunneling_j >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tunneling_j must be finite and non-negative, got {}",
                self.tunneling_j
            )));
        }
        for (name, v) in [("ec_aa", self.ec_aa), ("ec_bb", self.ec_bb), ("ec_ab", self.ec_ab)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite")));
            }
            if v < 0.0 {
                warn!("{name} = {v} is negative (attractive interaction)");
            }
        }
        Ok(())
    }

    pub fn basis(&self) -> Result<TwoSpinBasis> {
        TwoSpinBasis::new(self.n_atoms_a, self.n_atoms_b)
    }

    pub fn max_charging(&self) -> f64 {
        self.ec_aa.abs().max(self.ec_bb.abs()).max(self.ec_ab.abs())
    }

    /// `0.01 / max(J, N·E_c,max)`: resolves the fastest Josephson or charging frequency.
    pub fn default_dt(&self) -> f64 {
        let n = self.n_atoms_a.max(self.n_atoms_b) as f64;
        let scale = self.tunneling_j.abs().max(n * self.max_charging());
        if scale > 0.0 {
            0.01 / scale
        } else {
            0.01
        }
    }

    fn check_basis(&self, basis: &TwoSpinBasis) -> Result<()> {
        if basis.n_atoms_a() != self.n_atoms_a || basis.n_atoms_b() != self.n_atoms_b {
            return Err(Error::InvalidParameter(format!(
                "basis holds ({}, {}) atoms but parameters specify ({}, {})",
                basis.n_atoms_a(),
                basis.n_atoms_b(),
                self.n_atoms_a,
                self.n_atoms_b
            )));
        }
        Ok(())
    }
}

/// The exact Hamiltonian split into its tunneling and interaction parts,
/// `H = J * tunneling + interaction`, so that `J` can be varied in time.
#[derive(Debug, Clone)]
pub struct HamiltonianParts {
    /// `-2 (Jx_A + Jx_B)`.
    pub tunneling: HermitianOperator,
    /// Diagonal of `Σ_α E_αα Jz_α² + 2 E_AB Jz_A Jz_B`.
    pub interaction: Vec<f64>,
}

impl HamiltonianParts {
    pub fn new(params: &ModelParams, basis: &TwoSpinBasis) -> Result<Self> {
        params.validate()?;
        params.check_basis(basis)?;
        let ja = basis.spin_operators(Species::A);
        let jb = basis.spin_operators(Species::B);
        let tunneling = ja.jx.combine(-2.0, &jb.jx, -2.0)?;
        let interaction = (0..basis.dimension())
            .map(|i| {
                let (ma, mb) = basis.m_of(i);
                params.ec_aa * ma * ma + params.ec_bb * mb * mb + 2.0 * params.ec_ab * ma * mb
            })
            .collect();
        Ok(Self { tunneling, interaction })
    }

    pub fn dim(&self) -> usize {
        self.interaction.len()
    }

    pub fn assemble(&self, tunneling_j: f64) -> HermitianOperator {
        self.tunneling
            .scale(tunneling_j)
            .combine(1.0, &HermitianOperator::from_real_diagonal(&self.interaction), 1.0)
            .expect("same dimension")
    }
}

pub fn build_exact_hamiltonian(params: &ModelParams, basis: &TwoSpinBasis) -> Result<HermitianOperator> {
    Ok(HamiltonianParts::new(params, basis)?.assemble(params.tunneling_j))
}

/// Number-phase Hamiltonian on the truncated basis `|m_α| <= number_cutoff`.
///
/// `cos φ` acts as `(shift up + shift down)/2` between neighbouring number
/// states; the non-Hermitian `n² cos φ` is symmetrized.
pub fn build_phase_hamiltonian(params: &ModelParams, number_cutoff: usize) -> Result<(TwoSpinBasis, HermitianOperator)> {
    params.validate()?;
    let basis = TwoSpinBasis::truncated(params.n_atoms_a, params.n_atoms_b, number_cutoff)?;
    let j = params.tunneling_j;
    let single = |factor: &SpinFactor| -> SparseMatrix {
        let n = factor.n_atoms() as f64;
        let mut triplets = Vec::new();
        for k in 0..factor.levels().saturating_sub(1) {
            let (m0, m1) = (factor.m(k), factor.m(k + 1));
            // -JN/2 from the cosine, (2J/N)(m0² + m1²)/4 from the symmetrized n² cos φ.
            let hop = -j * n / 2.0 + (j / n) * (m0 * m0 + m1 * m1) / 2.0;
            triplets.push((k, k + 1, C64::new(hop, 0.0)));
            triplets.push((k + 1, k, C64::new(hop, 0.0)));
        }
        SparseMatrix::from_triplets(factor.levels(), triplets).expect("in range")
    };
    let fa = basis.factor(Species::A);
    let fb = basis.factor(Species::B);
    let ka = single(fa).kron(&SparseMatrix::identity(fb.levels()));
    let kb = SparseMatrix::identity(fa.levels()).kron(&single(fb));
    let diag: Vec<C64> = (0..basis.dimension())
        .map(|i| {
            let (ma, mb) = basis.m_of(i);
            C64::new(params.ec_aa * ma * ma + params.ec_bb * mb * mb + 2.0 * params.ec_ab * ma * mb, 0.0)
        })
        .collect();
    let one = C64::new(1.0, 0.0);
    let h = ka.combine(one, &kb, one)?.combine(one, &SparseMatrix::diagonal(&diag), one)?;
    Ok((basis, HermitianOperator::hermitian_part(&h)))
}

/// Coefficients of the collective harmonic Hamiltonian
/// `a_+ n_+² + b φ_+² + a_- n_-² + b φ_-²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicCoefficients {
    pub a_plus: f64,
    pub a_minus: f64,
    pub b: f64,
}

/// `a_± = E_c ± E_AB + 2J/N`, `b = JN/2`, with `E_c = (E_AA + E_BB)/2`.
pub fn harmonic_coefficients(params: &ModelParams) -> Result<HarmonicCoefficients> {
    if params.n_atoms_a != params.n_atoms_b {
        return Err(Error::Unsupported(format!(
            "harmonic expansion needs equal atom numbers, got {} and {}",
            params.n_atoms_a, params.n_atoms_b
        )));
    }
    params.validate()?;
    let n = params.n_atoms_a as f64;
    let ec = (params.ec_aa + params.ec_bb) / 2.0;
    let tunnel = 2.0 * params.tunneling_j / n;
    Ok(HarmonicCoefficients {
        a_plus: ec + params.ec_ab + tunnel,
        a_minus: ec - params.ec_ab + tunnel,
        b: params.tunneling_j * n / 2.0,
    })
}
