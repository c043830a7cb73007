//! EPR correlation measures on two-species states.
//!
//! Three measures are evaluated from the same set of first and second spin moments:
//!
//! * the angular-momentum criterion `Var(L_y±) Var(L_z∓) / <L_x>²` with
//!   unnormalized sums `L_y± = Jy_A ± Jy_B`, `L_z± = Jz_A ± Jz_B`;
//! * the number-phase product `Var(n_±) Var(φ_∓)` with
//!   `n_± = (Jz_A ± Jz_B)/√2`, `φ_± = (φ_A ± φ_B)/√2` and the linearized
//!   phase `φ_α = Jy_α / <Jx_α>`;
//! * the inseparability `ε = Var(x_±) + Var(p_∓) - 1` in quadratures scaled so
//!   that a coherent state has `Var(x) = Var(p) = 1/2`.
//!
//! Each is minimized over the two `±` pairings. All three equal their
//! uncorrelated bound (`1/4`, `1/4`, `0`) on a coherent product state.
//! Because the moments are linear in the density matrix, ensemble averages of
//! [`CollectiveMoments`] give the criteria of the mixed state.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::basis::{Species, SpinOperators, StateVector, TwoSpinBasis};
use crate::error::{Error, Result};
use crate::operator::{HermitianOperator, C64};

/// Threshold on `|<Jx>| / N` below which no phase reference exists.
pub const PHASE_REFERENCE_FLOOR: f64 = 1e-9;

/// Spin operators of both species and their collective combinations.
#[derive(Debug, Clone)]
pub struct CollectiveOperators {
    pub n_atoms_a: usize,
    pub n_atoms_b: usize,
    pub a: SpinOperators,
    pub b: SpinOperators,
    pub lx: HermitianOperator,
    pub ly_plus: HermitianOperator,
    pub ly_minus: HermitianOperator,
    pub lz_plus: HermitianOperator,
    pub lz_minus: HermitianOperator,
}

impl CollectiveOperators {
    pub fn new(basis: &TwoSpinBasis) -> Self {
        let a = basis.spin_operators(Species::A);
        let b = basis.spin_operators(Species::B);
        let sum = |x: &HermitianOperator, y: &HermitianOperator, s: f64| x.combine(1.0, y, s).expect("same basis");
        Self {
            n_atoms_a: basis.n_atoms_a(),
            n_atoms_b: basis.n_atoms_b(),
            lx: sum(&a.jx, &b.jx, 1.0),
            ly_plus: sum(&a.jy, &b.jy, 1.0),
            ly_minus: sum(&a.jy, &b.jy, -1.0),
            lz_plus: sum(&a.jz, &b.jz, 1.0),
            lz_minus: sum(&a.jz, &b.jz, -1.0),
            a,
            b,
        }
    }

    pub fn dim(&self) -> usize {
        self.lx.dim()
    }
}

pub fn collective_operators(basis: &TwoSpinBasis) -> CollectiveOperators {
    CollectiveOperators::new(basis)
}

/// `<A²> - <A>²`, clamped at zero.
pub fn variance(psi: &StateVector, op: &HermitianOperator) -> f64 {
    psi.variance(op)
}

/// First and second moments of the spin components entering the criteria.
/// Index 0 is species A, index 1 species B.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CollectiveMoments {
    pub n_atoms: [f64; 2],
    pub jx: [f64; 2],
    pub jy: [f64; 2],
    pub jz: [f64; 2],
    pub jy_sq: [f64; 2],
    pub jz_sq: [f64; 2],
    /// `<Jy_A Jy_B>`.
    pub jy_ab: f64,
    /// `<Jz_A Jz_B>`.
    pub jz_ab: f64,
}

fn dot_re(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x.conj() * y).re).sum()
}

impl CollectiveMoments {
    pub fn of_state(ops: &CollectiveOperators, psi: &StateVector) -> Result<Self> {
        if psi.dim() != ops.dim() {
            return Err(Error::DimensionMismatch { expected: ops.dim(), actual: psi.dim() });
        }
        let amps = psi.amplitudes();
        let y = [psi.apply(&ops.a.jy), psi.apply(&ops.b.jy)];
        let z = [psi.apply(&ops.a.jz), psi.apply(&ops.b.jz)];
        let mean = |img: &[C64]| dot_re(amps, img);
        let sq = |img: &[C64]| img.iter().map(|c| c.norm_sqr()).sum::<f64>();
        Ok(Self {
            n_atoms: [ops.n_atoms_a as f64, ops.n_atoms_b as f64],
            jx: [psi.expectation(&ops.a.jx), psi.expectation(&ops.b.jx)],
            jy: [mean(&y[0]), mean(&y[1])],
            jz: [mean(&z[0]), mean(&z[1])],
            jy_sq: [sq(&y[0]), sq(&y[1])],
            jz_sq: [sq(&z[0]), sq(&z[1])],
            jy_ab: dot_re(&y[0], &y[1]),
            jz_ab: dot_re(&z[0], &z[1]),
        })
    }

    /// Equal-weight mixture of several states' moments.
    pub fn mean<'a>(items: impl IntoIterator<Item = &'a CollectiveMoments>) -> Option<Self> {
        let mut count = 0usize;
        let mut acc = Self::default();
        for m in items {
            if count == 0 {
                acc.n_atoms = m.n_atoms;
            }
            count += 1;
            for s in 0..2 {
                acc.jx[s] += m.jx[s];
                acc.jy[s] += m.jy[s];
                acc.jz[s] += m.jz[s];
                acc.jy_sq[s] += m.jy_sq[s];
                acc.jz_sq[s] += m.jz_sq[s];
            }
            acc.jy_ab += m.jy_ab;
            acc.jz_ab += m.jz_ab;
        }
        if count == 0 {
            return None;
        }
        let k = count as f64;
        for s in 0..2 {
            acc.jx[s] /= k;
            acc.jy[s] /= k;
            acc.jz[s] /= k;
            acc.jy_sq[s] /= k;
            acc.jz_sq[s] /= k;
        }
        acc.jy_ab /= k;
        acc.jz_ab /= k;
        Some(acc)
    }

    pub fn var_jy(&self, s: usize) -> f64 {
        (self.jy_sq[s] - self.jy[s] * self.jy[s]).max(0.0)
    }

    pub fn var_jz(&self, s: usize) -> f64 {
        (self.jz_sq[s] - self.jz[s] * self.jz[s]).max(0.0)
    }

    pub fn cov_yy(&self) -> f64 {
        self.jy_ab - self.jy[0] * self.jy[1]
    }

    pub fn cov_zz(&self) -> f64 {
        self.jz_ab - self.jz[0] * self.jz[1]
    }

    pub fn mean_lx(&self) -> f64 {
        self.jx[0] + self.jx[1]
    }

    /// `Var(Jy_A + sign Jy_B)`.
    pub fn var_ly(&self, sign: f64) -> f64 {
        (self.var_jy(0) + self.var_jy(1) + 2.0 * sign * self.cov_yy()).max(0.0)
    }

    /// `Var(Jz_A + sign Jz_B)`.
    pub fn var_lz(&self, sign: f64) -> f64 {
        (self.var_jz(0) + self.var_jz(1) + 2.0 * sign * self.cov_zz()).max(0.0)
    }

    fn check_species_reference(&self) -> Result<()> {
        for s in 0..2 {
            let threshold = PHASE_REFERENCE_FLOOR * self.n_atoms[s];
            if self.jx[s].abs() < threshold {
                return Err(Error::PhaseReferenceLost { mean_jx: self.jx[s], threshold });
            }
        }
        Ok(())
    }

    /// `Var(n_±)` with `n_± = (Jz_A ± Jz_B)/√2`.
    pub fn var_n(&self, sign: f64) -> f64 {
        self.var_lz(sign) / 2.0
    }

    /// `Var(φ_±)` with `φ_α = Jy_α / <Jx_α>` and `φ_± = (φ_A ± φ_B)/√2`.
    pub fn var_phi(&self, sign: f64) -> Result<f64> {
        self.check_species_reference()?;
        let (xa, xb) = (self.jx[0], self.jx[1]);
        let v = self.var_jy(0) / (xa * xa) + self.var_jy(1) / (xb * xb) + 2.0 * sign * self.cov_yy() / (xa * xb);
        Ok((v / 2.0).max(0.0))
    }

    /// Quadrature variances `(Var(x_±), Var(p_±))`, scaled so a coherent state gives 1/2 each.
    pub fn quadrature_variances(&self, sign: f64) -> Result<(f64, f64)> {
        self.check_species_reference()?;
        let (ha, hb) = (self.n_atoms[0] / 2.0, self.n_atoms[1] / 2.0);
        let (xa, xb) = (self.jx[0], self.jx[1]);
        let var_x = (self.var_jz(0) / ha + self.var_jz(1) / hb + 2.0 * sign * self.cov_zz() / (ha * hb).sqrt()) / 2.0;
        let var_p = (self.var_jy(0) * ha / (xa * xa)
            + self.var_jy(1) * hb / (xb * xb)
            + 2.0 * sign * self.cov_yy() * (ha * hb).sqrt() / (xa * xb))
            / 2.0;
        Ok((var_x.max(0.0), var_p.max(0.0)))
    }
}

/// Which pairing of collective variables attained the minimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    /// `(L_y+, L_z-)`, equivalently `(φ_+, n_-)`.
    #[serde(rename = "+-")]
    PlusMinus,
    /// `(L_y-, L_z+)`, equivalently `(φ_-, n_+)`.
    #[serde(rename = "-+")]
    MinusPlus,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Branch::PlusMinus => write!(f, "+-"),
            Branch::MinusPlus => write!(f, "-+"),
        }
    }
}

/// All criteria at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EprReport {
    pub mean_lx: f64,
    pub var_ly_plus: f64,
    pub var_ly_minus: f64,
    pub var_lz_plus: f64,
    pub var_lz_minus: f64,
    /// `min Var(L_y±) Var(L_z∓) / <L_x>²`; entangled below 1/4.
    pub l_value: f64,
    /// `1 / (4 l_value)`.
    pub s_l: f64,
    pub branch: Branch,
    /// `min Var(n_±) Var(φ_∓)`.
    pub product_np: f64,
    pub var_n_plus: f64,
    pub var_n_minus: f64,
    pub var_phi_plus: f64,
    pub var_phi_minus: f64,
    /// `min Var(x_±) + Var(p_∓) - 1`; entangled below 0.
    pub epsilon: f64,
}

impl EprReport {
    pub fn from_moments(m: &CollectiveMoments) -> Result<Self> {
        let mean_lx = m.mean_lx();
        let threshold = PHASE_REFERENCE_FLOOR * (m.n_atoms[0] + m.n_atoms[1]);
        if mean_lx.abs() < threshold {
            return Err(Error::PhaseReferenceLost { mean_jx: mean_lx, threshold });
        }
        let (var_ly_plus, var_ly_minus) = (m.var_ly(1.0), m.var_ly(-1.0));
        let (var_lz_plus, var_lz_minus) = (m.var_lz(1.0), m.var_lz(-1.0));
        let lx2 = mean_lx * mean_lx;
        let pm = var_ly_plus * var_lz_minus / lx2;
        let mp = var_ly_minus * var_lz_plus / lx2;
        let (l_value, branch) = if mp <= pm { (mp, Branch::MinusPlus) } else { (pm, Branch::PlusMinus) };

        let (var_n_plus, var_n_minus) = (m.var_n(1.0), m.var_n(-1.0));
        let (var_phi_plus, var_phi_minus) = (m.var_phi(1.0)?, m.var_phi(-1.0)?);
        let product_np = (var_n_plus * var_phi_minus).min(var_n_minus * var_phi_plus);

        let (xp, pp) = m.quadrature_variances(1.0)?;
        let (xm, pmv) = m.quadrature_variances(-1.0)?;
        let epsilon = (xp + pmv).min(xm + pp) - 1.0;

        Ok(Self {
            mean_lx,
            var_ly_plus,
            var_ly_minus,
            var_lz_plus,
            var_lz_minus,
            l_value,
            s_l: 1.0 / (4.0 * l_value),
            branch,
            product_np,
            var_n_plus,
            var_n_minus,
            var_phi_plus,
            var_phi_minus,
            epsilon,
        })
    }

    pub fn is_entangled(&self) -> bool {
        self.l_value < 0.25
    }

    /// `1 / (4 product_np)`.
    pub fn s_np(&self) -> f64 {
        1.0 / (4.0 * self.product_np)
    }
}

pub fn epr_l_criterion(ops: &CollectiveOperators, psi: &StateVector) -> Result<EprReport> {
    EprReport::from_moments(&CollectiveMoments::of_state(ops, psi)?)
}

pub fn epr_number_phase(ops: &CollectiveOperators, psi: &StateVector) -> Result<f64> {
    let m = CollectiveMoments::of_state(ops, psi)?;
    Ok((m.var_n(1.0) * m.var_phi(-1.0)?).min(m.var_n(-1.0) * m.var_phi(1.0)?))
}

pub fn inseparability_epsilon(ops: &CollectiveOperators, psi: &StateVector) -> Result<f64> {
    let m = CollectiveMoments::of_state(ops, psi)?;
    let (xp, pp) = m.quadrature_variances(1.0)?;
    let (xm, pm) = m.quadrature_variances(-1.0)?;
    Ok((xp + pm).min(xm + pp) - 1.0)
}
