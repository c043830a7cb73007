//! Closed-form predictions of the collective harmonic approximation.
//!
//! Each collective mode is an oscillator `H = a n² + b φ²` with `[φ, n] = i`,
//! whose ground state has `Var(n) = √(b/a)/2` and `Var(φ) = √(a/b)/2`.

use serde::Serialize;

use crate::criteria;
use crate::dynamics::ground_state;
use crate::error::{Error, Result};
use crate::model::{build_exact_hamiltonian, HarmonicCoefficients, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HarmonicPrediction {
    pub var_n_plus: f64,
    pub var_n_minus: f64,
    pub var_phi_plus: f64,
    pub var_phi_minus: f64,
    pub omega_plus: f64,
    pub omega_minus: f64,
    /// `a_+ / a_-`, the ratio quoted for the harmonic model.
    pub s_ratio: f64,
    /// `1 / (4 Var(n_+) Var(φ_-)) = √(a_+ / a_-)`, from the ground-state variances.
    pub s_product: f64,
    /// Set when `a_- <= 0`: the minus mode is unbound and `s` diverges.
    pub minus_mode_divergent: bool,
}

impl HarmonicPrediction {
    /// Ground-state value of the EPR product `Var(n_+) Var(φ_-)`.
    pub fn epr_product(&self) -> f64 {
        1.0 / (4.0 * self.s_product)
    }
}

pub fn harmonic_prediction(coeffs: &HarmonicCoefficients) -> Result<HarmonicPrediction> {
    let HarmonicCoefficients { a_plus, a_minus, b } = *coeffs;
    if !(a_plus > 0.0) || !(b > 0.0) {
        return Err(Error::InvalidRegime(format!(
            "harmonic prediction needs a_+ > 0 and b > 0 (a_+ = {a_plus}, b = {b})"
        )));
    }
    let var_n_plus = 0.5 * (b / a_plus).sqrt();
    let var_phi_plus = 0.5 * (a_plus / b).sqrt();
    let omega_plus = 2.0 * (a_plus * b).sqrt();
    if a_minus <= 0.0 {
        return Ok(HarmonicPrediction {
            var_n_plus,
            var_n_minus: f64::INFINITY,
            var_phi_plus,
            var_phi_minus: 0.0,
            omega_plus,
            omega_minus: 0.0,
            s_ratio: f64::INFINITY,
            s_product: f64::INFINITY,
            minus_mode_divergent: true,
        });
    }
    let var_n_minus = 0.5 * (b / a_minus).sqrt();
    let var_phi_minus = 0.5 * (a_minus / b).sqrt();
    Ok(HarmonicPrediction {
        var_n_plus,
        var_n_minus,
        var_phi_plus,
        var_phi_minus,
        omega_plus,
        omega_minus: 2.0 * (a_minus * b).sqrt(),
        s_ratio: a_plus / a_minus,
        s_product: 1.0 / (4.0 * var_n_plus * var_phi_minus),
        minus_mode_divergent: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HarmonicComparison {
    pub n_atoms: usize,
    /// From the number-phase EPR product of the exact ground state.
    pub s_exact: f64,
    pub s_product: f64,
    pub s_ratio: f64,
}

/// Exact ground-state squeezing against the harmonic prediction, for each
/// atom number in `atom_numbers` (both species equal; other parameters from `params`).
pub fn harmonic_vs_exact_report(params: &ModelParams, atom_numbers: &[usize]) -> Result<Vec<HarmonicComparison>> {
    atom_numbers
        .iter()
        .map(|&n| {
            let p = ModelParams { n_atoms_a: n, n_atoms_b: n, ..*params };
            let prediction = harmonic_prediction(&crate::model::harmonic_coefficients(&p)?)?;
            let basis = p.basis()?;
            let ops = criteria::CollectiveOperators::new(&basis);
            let h = build_exact_hamiltonian(&p, &basis)?;
            let (_, psi) = ground_state(&h)?;
            let product = criteria::epr_number_phase(&ops, &psi)?;
            Ok(HarmonicComparison {
                n_atoms: n,
                s_exact: 1.0 / (4.0 * product),
                s_product: prediction.s_product,
                s_ratio: prediction.s_ratio,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn quoted_ratio_example() {
        // E_c = 1, E_AB = 0.5, 2J/N = 0.5.
        let c = HarmonicCoefficients { a_plus: 2.0, a_minus: 1.0, b: 3.0 };
        let p = harmonic_prediction(&c).unwrap();
        assert_abs_diff_eq!(p.s_ratio, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.s_product, 2f64.sqrt(), epsilon = 1e-12);
        assert!(!p.minus_mode_divergent);
    }

    #[test]
    fn no_coupling_is_minimum_uncertainty() {
        let c = HarmonicCoefficients { a_plus: 0.3, a_minus: 0.3, b: 25.0 };
        let p = harmonic_prediction(&c).unwrap();
        assert_abs_diff_eq!(p.s_ratio, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.s_product, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.var_n_plus * p.var_phi_minus, 0.25, epsilon = 1e-12);
        assert_eq!(p.omega_plus, p.omega_minus);
    }

    #[test]
    fn equal_couplings_without_tunneling_diverge() {
        let params = ModelParams::symmetric(20, 1e-12, 0.2);
        let mut c = crate::model::harmonic_coefficients(&params).unwrap();
        c.a_minus = 0.0;
        let p = harmonic_prediction(&c).unwrap();
        assert!(p.minus_mode_divergent);
        assert!(p.s_ratio.is_infinite() && p.s_product.is_infinite());
    }

    #[test]
    fn invalid_regime() {
        assert!(harmonic_prediction(&HarmonicCoefficients { a_plus: 0.0, a_minus: 1.0, b: 1.0 }).is_err());
        assert!(harmonic_prediction(&HarmonicCoefficients { a_plus: 1.0, a_minus: 1.0, b: 0.0 }).is_err());
    }

    #[test]
    fn uncoupled_exact_ground_state_is_unsqueezed() {
        // The exact ground state is only approximately minimum-uncertainty; the
        // deviation grows with N·E_c/J (about 1e-5 at N·E_c/J = 5).
        let params = ModelParams { n_atoms_a: 0, n_atoms_b: 0, tunneling_j: 1.0, ec_aa: 0.01, ec_bb: 0.01, ec_ab: 0.0 };
        for row in harmonic_vs_exact_report(&params, &[10, 20, 40, 100]).unwrap() {
            assert_abs_diff_eq!(row.s_exact, 1.0, epsilon = 1e-6);
            assert_eq!(row.s_product, 1.0);
        }
    }

    #[test]
    fn weak_coupling_tracks_harmonic_prediction() {
        let params = ModelParams { n_atoms_a: 0, n_atoms_b: 0, tunneling_j: 1.0, ec_aa: 0.05, ec_bb: 0.05, ec_ab: 0.04 };
        let rows = harmonic_vs_exact_report(&params, &[20]).unwrap();
        let r = rows[0];
        assert!((r.s_exact / r.s_product - 1.0).abs() < 0.2, "{r:?}");
    }

    proptest! {
        #[test]
        fn algebraic_identities(a_plus in 1e-3f64..10.0, a_minus in 1e-3f64..10.0, b in 1e-2f64..100.0) {
            let p = harmonic_prediction(&HarmonicCoefficients { a_plus, a_minus, b }).unwrap();
            prop_assert!((p.var_n_plus * p.var_phi_plus - 0.25).abs() < 1e-12);
            prop_assert!((p.var_n_minus * p.var_phi_minus - 0.25).abs() < 1e-12);
            prop_assert!((p.s_product - p.s_ratio.sqrt()).abs() < 1e-12 * p.s_product.max(1.0));
            prop_assert!(p.omega_plus > 0.0 && p.omega_minus > 0.0);
        }
    }
}
