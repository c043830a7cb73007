//! The two ways of generating EPR correlations.
//!
//! Global: both species start in phase-coherent states in the double well and
//! evolve under the full two-species Hamiltonian, optionally after a ramp of
//! the tunneling and with dephasing noise.
//!
//! Local: the interspecies collision in one well acts as one-axis twisting
//! `H = χ Jz²` on the spin formed by the two species there. The resulting
//! single-spin squeezing maps onto `Var(n_+)` and `Var(φ_-)` of the two-well
//! system.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::basis::{SpinFactor, StateVector, TwoSpinBasis};
use crate::criteria::{CollectiveMoments, CollectiveOperators, EprReport, PHASE_REFERENCE_FLOOR};
use crate::dynamics::krylov::{krylov_step, KrylovOptions};
use crate::dynamics::{evolve_sampled, sample_steps, step_count, RampSchedule};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::noise::{evolve_dephased, NoiseModel, ReportErrors};
use crate::operator::{HermitianOperator, C64};

fn default_theta() -> f64 {
    FRAC_PI_2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalSchemeConfig {
    pub params: ModelParams,
    pub ramp: RampSchedule,
    pub dt: f64,
    pub t_max: f64,
    pub sample_stride: usize,
    #[serde(default)]
    pub noise: Option<NoiseModel>,
    /// Bloch polar angle of both initial coherent states.
    #[serde(default = "default_theta")]
    pub initial_theta: f64,
    #[serde(default)]
    pub initial_phi: f64,
    /// Also run the same scheme with `E_AB = 0`.
    #[serde(default)]
    pub uncoupled_reference: bool,
}

impl GlobalSchemeConfig {
    pub fn new(params: ModelParams, ramp: RampSchedule, dt: f64, t_max: f64) -> Self {
        Self {
            params,
            ramp,
            dt,
            t_max,
            sample_stride: 1,
            noise: None,
            initial_theta: FRAC_PI_2,
            initial_phi: 0.0,
            uncoupled_reference: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.ramp.validate()?;
        step_count(self.dt, self.t_max)?;
        if self.sample_stride == 0 {
            return Err(Error::InvalidParameter("sample_stride must be at least 1".into()));
        }
        if let Some(noise) = &self.noise {
            noise.validate()?;
        }
        if !self.initial_theta.is_finite() || !self.initial_phi.is_finite() {
            return Err(Error::InvalidParameter("initial angles must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalSample {
    pub t: f64,
    pub moments: CollectiveMoments,
    /// `None` when the phase reference `<L_x>` has vanished.
    pub report: Option<EprReport>,
    /// Jackknife errors, only for noisy ensembles.
    pub errors: Option<ReportErrors>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalSchemeResult {
    pub samples: Vec<GlobalSample>,
    pub uncoupled: Option<Vec<GlobalSample>>,
}

fn run_samples(cfg: &GlobalSchemeConfig, params: &ModelParams) -> Result<Vec<GlobalSample>> {
    let basis = params.basis()?;
    let psi0 = basis.coherent_state(cfg.initial_theta, cfg.initial_phi, cfg.initial_theta, cfg.initial_phi)?;
    match &cfg.noise {
        Some(noise) => Ok(evolve_dephased(&psi0, params, &cfg.ramp, noise, cfg.dt, cfg.t_max, cfg.sample_stride, &[])?
            .into_iter()
            .map(|s| GlobalSample { t: s.t, moments: s.moments, report: s.report, errors: s.errors })
            .collect()),
        None => {
            let ops = CollectiveOperators::new(&basis);
            let traj = evolve_sampled(&psi0, params, &cfg.ramp, cfg.dt, cfg.t_max, cfg.sample_stride, |t, psi| {
                let moments = CollectiveMoments::of_state(&ops, psi)?;
                Ok(GlobalSample { t, moments, report: EprReport::from_moments(&moments).ok(), errors: None })
            })?;
            Ok(traj.samples)
        }
    }
}

pub fn run_global_scheme(cfg: &GlobalSchemeConfig) -> Result<GlobalSchemeResult> {
    cfg.validate()?;
    let samples = run_samples(cfg, &cfg.params)?;
    let uncoupled = if cfg.uncoupled_reference {
        Some(run_samples(cfg, &ModelParams { ec_ab: 0.0, ..cfg.params })?)
    } else {
        None
    };
    Ok(GlobalSchemeResult { samples, uncoupled })
}

/// Earliest time of the smallest `l_value` among samples with a phase reference.
pub fn min_l_value(samples: &[GlobalSample]) -> Option<(f64, f64)> {
    min_by_field(samples, |r| r.l_value)
}

/// Earliest time of the smallest `epsilon` among samples with a phase reference.
pub fn min_epsilon(samples: &[GlobalSample]) -> Option<(f64, f64)> {
    min_by_field(samples, |r| r.epsilon)
}

fn min_by_field(samples: &[GlobalSample], field: impl Fn(&EprReport) -> f64) -> Option<(f64, f64)> {
    samples
        .iter()
        .filter_map(|s| s.report.as_ref().map(|r| (s.t, field(r))))
        .filter(|(_, v)| v.is_finite())
        .fold(None, |best, (t, v)| match best {
            Some((_, bv)) if bv <= v => best,
            _ => Some((t, v)),
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalSchemeConfig {
    /// Atoms in the well (both species together).
    pub n_atoms: usize,
    /// Twisting strength `χ` of `H = χ Jz²`.
    pub chi: f64,
    pub dt: f64,
    /// Twisting time; the evolution is sampled on `[0, t_hold]`.
    pub t_hold: f64,
    pub sample_stride: usize,
}

impl LocalSchemeConfig {
    /// Twisting strength of the two-species spin in one well.
    pub fn chi_from_charging(ec_aa: f64, ec_bb: f64, ec_ab: f64) -> f64 {
        ec_aa + ec_bb - 2.0 * ec_ab
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_atoms == 0 {
            return Err(Error::InvalidParameter("n_atoms must be at least 1".into()));
        }
        if !self.chi.is_finite() {
            return Err(Error::InvalidParameter("chi must be finite".into()));
        }
        if self.sample_stride == 0 {
            return Err(Error::InvalidParameter("sample_stride must be at least 1".into()));
        }
        step_count(self.dt, self.t_hold)?;
        Ok(())
    }
}

/// Spin moments of one collective spin whose mean lies along x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SingleSpinMoments {
    pub mean_jx: f64,
    pub var_jy: f64,
    pub var_jz: f64,
    /// Symmetrized covariance of `Jy` and `Jz`.
    pub cov_yz: f64,
}

impl SingleSpinMoments {
    pub fn of_state(factor: &SpinFactor, amps: &[C64]) -> Self {
        let ops = factor.operators();
        let psi = StateVector::from_raw(amps.to_vec());
        let y = psi.apply(&ops.jy);
        let z = psi.apply(&ops.jz);
        let dot = |a: &[C64], b: &[C64]| a.iter().zip(b).map(|(x, w)| (x.conj() * w).re).sum::<f64>();
        let (my, mz) = (dot(amps, &y), dot(amps, &z));
        Self {
            mean_jx: psi.expectation(&ops.jx),
            var_jy: dot(&y, &y) - my * my,
            var_jz: dot(&z, &z) - mz * mz,
            cov_yz: dot(&y, &z) - my * mz,
        }
    }

    /// Smallest variance in the y-z plane and the angle of its axis from y.
    pub fn min_variance(&self) -> (f64, f64) {
        let mid = 0.5 * (self.var_jy + self.var_jz);
        let half = 0.5 * (self.var_jy - self.var_jz);
        let radius = half.hypot(self.cov_yz);
        let angle = 0.5 * (-2.0 * self.cov_yz).atan2(-2.0 * half);
        (mid - radius, angle)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalSample {
    pub t: f64,
    pub mean_jx: f64,
    /// `(N/4) / λ_min`: inverse of the squeezing parameter.
    pub s_single: f64,
    pub var_n_plus: f64,
    pub var_phi_minus: f64,
    pub phase_reference_lost: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalSchemeResult {
    pub samples: Vec<LocalSample>,
    /// Earliest sample with the largest `s_single`.
    pub best: LocalSample,
}

fn twisted_amplitudes(factor: &SpinFactor, initial: &[C64], chi_t: f64) -> Vec<C64> {
    initial
        .iter()
        .enumerate()
        .map(|(level, c)| {
            let m = factor.m(level);
            c * C64::from_polar(1.0, -chi_t * m * m)
        })
        .collect()
}

/// One-axis twisting of an x-polarized coherent state, sampled every `sample_stride` steps.
pub fn run_local_scheme(cfg: &LocalSchemeConfig) -> Result<LocalSchemeResult> {
    cfg.validate()?;
    let factor = SpinFactor::full(cfg.n_atoms)?;
    let initial = factor.coherent_amplitudes(FRAC_PI_2, 0.0)?;
    let n = cfg.n_atoms as f64;
    let n_steps = step_count(cfg.dt, cfg.t_hold)?;
    let samples: Vec<LocalSample> = sample_steps(n_steps, cfg.sample_stride)
        .into_iter()
        .map(|k| {
            let t = k as f64 * cfg.dt;
            let m = SingleSpinMoments::of_state(&factor, &twisted_amplitudes(&factor, &initial, cfg.chi * t));
            let s = 0.25 * n / m.min_variance().0;
            LocalSample {
                t,
                mean_jx: m.mean_jx,
                s_single: s,
                var_n_plus: 0.25 * n / s,
                var_phi_minus: 1.0 / (n * s),
                phase_reference_lost: m.mean_jx.abs() < PHASE_REFERENCE_FLOOR * n,
            }
        })
        .collect();
    let best = *samples
        .iter()
        .filter(|s| !s.phase_reference_lost)
        .fold(None::<&LocalSample>, |b, s| match b {
            Some(x) if x.s_single >= s.s_single => b,
            _ => Some(s),
        })
        .unwrap_or(&samples[0]);
    Ok(LocalSchemeResult { samples, best })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialStateKind {
    Coherent,
    /// Both species number-squeezed.
    SameQuadrature,
    /// Species A number-squeezed, species B phase-squeezed.
    CrossQuadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InitialStateReport {
    pub kind: InitialStateKind,
    pub s_single: f64,
    pub report: EprReport,
}

/// Twists an x-polarized coherent state for `chi_t`, then rotates it about x
/// so that its narrowest axis is z (`number = true`) or y.
pub fn presqueezed_amplitudes(factor: &SpinFactor, chi_t: f64, number: bool) -> Result<Vec<C64>> {
    let initial = factor.coherent_amplitudes(FRAC_PI_2, 0.0)?;
    let twisted = twisted_amplitudes(factor, &initial, chi_t);
    let (_, angle) = SingleSpinMoments::of_state(factor, &twisted).min_variance();
    let target = if number { FRAC_PI_2 } else { 0.0 };
    let jx: HermitianOperator = factor.operators().jx;
    let opts = KrylovOptions::default();
    let mut best: Option<(f64, Vec<C64>)> = None;
    for theta in [target - angle, angle - target] {
        let rotated = krylov_step(&jx, &twisted, theta, &opts)?;
        let m = SingleSpinMoments::of_state(factor, &rotated);
        let var = if number { m.var_jz } else { m.var_jy };
        if best.as_ref().is_none_or(|(v, _)| var < *v) {
            best = Some((var, rotated));
        }
    }
    Ok(best.expect("two candidates").1)
}

/// Criteria of a product of two pre-squeezed (or coherent) species at `t = 0`.
pub fn compare_initial_states(kind: InitialStateKind, n_atoms: usize, chi_t: f64) -> Result<InitialStateReport> {
    let factor = SpinFactor::full(n_atoms)?;
    let (a, b) = match kind {
        InitialStateKind::Coherent => {
            let c = factor.coherent_amplitudes(FRAC_PI_2, 0.0)?;
            (c.clone(), c)
        }
        InitialStateKind::SameQuadrature => {
            let s = presqueezed_amplitudes(&factor, chi_t, true)?;
            (s.clone(), s)
        }
        InitialStateKind::CrossQuadrature => {
            (presqueezed_amplitudes(&factor, chi_t, true)?, presqueezed_amplitudes(&factor, chi_t, false)?)
        }
    };
    let s_single = 0.25 * n_atoms as f64 / SingleSpinMoments::of_state(&factor, &a).min_variance().0;
    let basis = TwoSpinBasis::new(n_atoms, n_atoms)?;
    let psi = StateVector::product(&a, &b);
    let report = EprReport::from_moments(&CollectiveMoments::of_state(&CollectiveOperators::new(&basis), &psi)?)?;
    Ok(InitialStateReport { kind, s_single, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::Species;
    use approx::assert_abs_diff_eq;

    fn global(ec: f64, ramp: RampSchedule) -> GlobalSchemeConfig {
        GlobalSchemeConfig { sample_stride: 10, ..GlobalSchemeConfig::new(ModelParams::symmetric(6, 1.0, ec), ramp, 0.01, 3.0) }
    }

    #[test]
    fn coherent_start_is_at_the_boundary() {
        let res = run_global_scheme(&global(0.3, RampSchedule::sudden(1.0))).unwrap();
        let r = res.samples[0].report.unwrap();
        assert_abs_diff_eq!(r.l_value, 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(r.epsilon, 0.0, epsilon = 1e-12);
        assert_eq!(res.samples.len(), 1 + 300 / 10);
    }

    #[test]
    fn coupling_entangles_and_reference_does_not() {
        let cfg = GlobalSchemeConfig { uncoupled_reference: true, ..global(0.3, RampSchedule::sudden(1.0)) };
        let res = run_global_scheme(&cfg).unwrap();
        assert!(min_l_value(&res.samples).unwrap().1 < 0.25);
        for s in res.uncoupled.as_ref().unwrap() {
            let r = s.report.unwrap();
            assert!(r.l_value >= 0.25 - 1e-9 && r.epsilon >= -1e-9, "{r:?}");
        }
    }

    #[test]
    fn species_populations_are_conserved() {
        let params = ModelParams { n_atoms_a: 4, n_atoms_b: 5, tunneling_j: 1.0, ec_aa: 0.4, ec_bb: 0.2, ec_ab: 0.3 };
        let basis = params.basis().unwrap();
        let psi0 = basis.coherent_state(1.0, 0.3, 2.0, -0.5).unwrap();
        let cas: Vec<HermitianOperator> = [Species::A, Species::B]
            .iter()
            .map(|&s| {
                let o = basis.spin_operators(s);
                o.jx.square().combine(1.0, &o.jy.square(), 1.0).unwrap().combine(1.0, &o.jz.square(), 1.0).unwrap()
            })
            .collect();
        let ramp = RampSchedule::linear(3.0, 1.0, 1.0).unwrap();
        evolve_sampled(&psi0, &params, &ramp, 0.01, 2.0, 20, |_, psi| {
            assert_abs_diff_eq!(psi.norm_sqr(), 1.0, epsilon = 1e-9);
            assert_abs_diff_eq!(psi.expectation(&cas[0]), 2.0 * 3.0, epsilon = 1e-9);
            assert_abs_diff_eq!(psi.expectation(&cas[1]), 2.5 * 3.5, epsilon = 1e-9);
            Ok(())
        })
        .unwrap();
    }

    #[test]
    fn noisy_run_reports_errors() {
        let cfg = GlobalSchemeConfig {
            noise: Some(NoiseModel { xi: 0.0, diffusion_rate: 0.01, n_trajectories: 8, master_seed: 1 }),
            ..global(0.2, RampSchedule::sudden(1.0))
        };
        let res = run_global_scheme(&cfg).unwrap();
        assert!(res.samples.iter().all(|s| s.errors.is_some()));
        assert_eq!(res.samples[0].errors.unwrap().l_value, 0.0);
    }

    #[test]
    fn one_axis_twisting_mean_spin() {
        let cfg = LocalSchemeConfig { n_atoms: 10, chi: 0.7, dt: 0.01, t_hold: 2.0, sample_stride: 7 };
        let res = run_local_scheme(&cfg).unwrap();
        for s in &res.samples {
            let expected = 5.0 * (0.7 * s.t).cos().powi(9);
            assert_abs_diff_eq!(s.mean_jx, expected, epsilon = 1e-12);
        }
        let first = res.samples[0];
        assert_abs_diff_eq!(first.s_single, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(first.var_n_plus * first.var_phi_minus, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn squeezing_peaks_then_degrades() {
        let cfg = LocalSchemeConfig { n_atoms: 40, chi: 1.0, dt: 0.002, t_hold: 1.5, sample_stride: 1 };
        let res = run_local_scheme(&cfg).unwrap();
        assert!(res.best.s_single > 1.0);
        assert!(res.best.t > 0.0 && res.best.t < cfg.t_hold);
        assert!(res.samples.last().unwrap().s_single < res.best.s_single);
    }

    #[test]
    fn two_atoms_lose_the_phase_reference() {
        let chi = 1.0;
        let cfg = LocalSchemeConfig { n_atoms: 2, chi, dt: FRAC_PI_2 / 100.0, t_hold: FRAC_PI_2, sample_stride: 100 };
        let res = run_local_scheme(&cfg).unwrap();
        assert!(!res.samples[0].phase_reference_lost);
        assert!(res.samples.last().unwrap().phase_reference_lost);
    }

    #[test]
    fn rotation_puts_narrow_axis_on_target() {
        let factor = SpinFactor::full(20).unwrap();
        for number in [true, false] {
            let amps = presqueezed_amplitudes(&factor, 0.05, number).unwrap();
            let m = SingleSpinMoments::of_state(&factor, &amps);
            let (lmin, _) = m.min_variance();
            let narrow = if number { m.var_jz } else { m.var_jy };
            assert_abs_diff_eq!(narrow, lmin, epsilon = 1e-8);
            assert!(lmin < 5.0);
            assert_abs_diff_eq!(StateVector::from_raw(amps).norm_sqr(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn product_initial_states_are_separable() {
        let coherent = compare_initial_states(InitialStateKind::Coherent, 10, 0.0).unwrap();
        assert_abs_diff_eq!(coherent.report.l_value, 0.25, epsilon = 1e-12);
        for kind in [InitialStateKind::SameQuadrature, InitialStateKind::CrossQuadrature] {
            let r = compare_initial_states(kind, 10, 0.08).unwrap();
            assert!(r.s_single > 1.0);
            assert!(r.report.l_value >= 0.25 - 1e-12, "{kind:?} {:?}", r.report);
        }
        let cross = compare_initial_states(InitialStateKind::CrossQuadrature, 10, 0.08).unwrap();
        assert!(cross.report.l_value > 0.25 + 1e-3);
    }
}
