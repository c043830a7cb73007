//! Stochastic proper dephasing in a symmetrized environment.
//!
//! Each well `w ∈ {L, R}` carries an independent white-noise energy shift
//! `η_w` (variance `D/dt` per step). Species couple to it as
//! `ε_Aw = (1 - ξ) η_w`, `ε_Bw = (1 + ξ) η_w`. The shifts add
//! `Σ ε_αw N_αw` to the Hamiltonian, which up to a global phase is
//! `(η_L - η_R) [(1 - ξ) Jz_A + (1 + ξ) Jz_B]`.
//!
//! The ensemble is unravelled into independent pure-state trajectories. Each
//! trajectory draws from its own ChaCha stream selected by its index, and
//! reductions run in trajectory order, so results do not depend on thread count.

use log::warn;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{StateVector, TwoSpinBasis};
use crate::criteria::{CollectiveMoments, CollectiveOperators, EprReport};
use crate::dynamics::{sample_steps, step_count, Evolver, RampSchedule};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::operator::HermitianOperator;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Asymmetry `ξ` between the two species' couplings.
    pub xi: f64,
    /// White-noise strength `D` of each well's energy shift (energy² × time).
    pub diffusion_rate: f64,
    pub n_trajectories: usize,
    pub master_seed: u64,
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.xi.is_finite() && self.xi >= 0.0) {
            return Err(Error::InvalidParameter(format!("xi must be non-negative, got {}", self.xi)));
        }
        if !(self.diffusion_rate.is_finite() && self.diffusion_rate >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "diffusion_rate must be non-negative, got {}",
                self.diffusion_rate
            )));
        }
        if self.n_trajectories == 0 {
            return Err(Error::InvalidParameter("n_trajectories must be at least 1".into()));
        }
        if self.xi >= 0.2 {
            warn!("xi = {} is outside the nearly symmetric regime xi << 1", self.xi);
        }
        Ok(())
    }

    /// Independent random stream of trajectory `index`.
    pub fn trajectory_rng(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(index);
        rng
    }
}

/// Energy shift of each species in each well over one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSample {
    pub eps_al: f64,
    pub eps_bl: f64,
    pub eps_ar: f64,
    pub eps_br: f64,
}

impl NoiseSample {
    /// Diagonal of `Σ ε_αw N_αw` on `basis`, dropping the state-independent part.
    pub fn diagonal(&self, basis: &TwoSpinBasis) -> Vec<f64> {
        let (ga, gb) = (self.eps_al - self.eps_ar, self.eps_bl - self.eps_br);
        (0..basis.dimension())
            .map(|i| {
                let (ma, mb) = basis.m_of(i);
                ga * ma + gb * mb
            })
            .collect()
    }
}

pub fn sample_noise_step<R: Rng + ?Sized>(model: &NoiseModel, rng: &mut R, dt: f64) -> NoiseSample {
    let sigma = (model.diffusion_rate / dt).sqrt();
    let eta_l: f64 = rng.sample::<f64, _>(StandardNormal) * sigma;
    let eta_r: f64 = rng.sample::<f64, _>(StandardNormal) * sigma;
    NoiseSample {
        eps_al: (1.0 - model.xi) * eta_l,
        eps_bl: (1.0 + model.xi) * eta_l,
        eps_ar: (1.0 - model.xi) * eta_r,
        eps_br: (1.0 + model.xi) * eta_r,
    }
}

/// Ensemble mean and mixed-state variance of one observable, with standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObservableStat {
    pub mean: f64,
    pub mean_se: f64,
    pub variance: f64,
    pub variance_se: f64,
}

/// Jackknife standard errors of the ensemble criteria.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ReportErrors {
    pub mean_lx: f64,
    pub l_value: f64,
    pub product_np: f64,
    pub epsilon: f64,
    pub var_n_plus: f64,
    pub var_n_minus: f64,
    pub var_phi_plus: f64,
    pub var_phi_minus: f64,
}

impl ReportErrors {
    fn fields(r: &EprReport) -> [f64; 8] {
        [r.mean_lx, r.l_value, r.product_np, r.epsilon, r.var_n_plus, r.var_n_minus, r.var_phi_plus, r.var_phi_minus]
    }

    fn from_fields(f: [f64; 8]) -> Self {
        Self {
            mean_lx: f[0],
            l_value: f[1],
            product_np: f[2],
            epsilon: f[3],
            var_n_plus: f[4],
            var_n_minus: f[5],
            var_phi_plus: f[6],
            var_phi_minus: f[7],
        }
    }
}

/// Ensemble averages at one sample time.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSample {
    pub t: f64,
    pub moments: CollectiveMoments,
    pub report: Option<EprReport>,
    pub errors: Option<ReportErrors>,
    pub observables: Vec<ObservableStat>,
}

fn jackknife<T: Copy>(values: &[T], sum: impl Fn(&[T]) -> Vec<f64>, eval: impl Fn(&[f64]) -> Option<Vec<f64>>) -> Option<Vec<f64>> {
    let k = values.len();
    if k < 2 {
        return None;
    }
    let total = sum(values);
    let mut estimates = Vec::with_capacity(k);
    for v in values {
        let own = sum(std::slice::from_ref(v));
        let loo: Vec<f64> = total.iter().zip(&own).map(|(t, o)| (t - o) / (k - 1) as f64).collect();
        estimates.push(eval(&loo)?);
    }
    let width = estimates[0].len();
    let se = (0..width)
        .map(|j| {
            let mean = estimates.iter().map(|e| e[j]).sum::<f64>() / k as f64;
            let ss: f64 = estimates.iter().map(|e| (e[j] - mean).powi(2)).sum();
            ((k - 1) as f64 / k as f64 * ss).sqrt()
        })
        .collect();
    Some(se)
}

fn moments_to_vec(m: &CollectiveMoments) -> [f64; 14] {
    [
        m.jx[0], m.jx[1], m.jy[0], m.jy[1], m.jz[0], m.jz[1], m.jy_sq[0], m.jy_sq[1], m.jz_sq[0], m.jz_sq[1],
        m.jy_ab, m.jz_ab, m.n_atoms[0], m.n_atoms[1],
    ]
}

fn moments_from_vec(v: &[f64]) -> CollectiveMoments {
    CollectiveMoments {
        jx: [v[0], v[1]],
        jy: [v[2], v[3]],
        jz: [v[4], v[5]],
        jy_sq: [v[6], v[7]],
        jz_sq: [v[8], v[9]],
        jy_ab: v[10],
        jz_ab: v[11],
        n_atoms: [v[12], v[13]],
    }
}

struct TrajectoryRecord {
    moments: Vec<CollectiveMoments>,
    /// Per sample, per observable: `(<O>, <O²>)`.
    observables: Vec<Vec<(f64, f64)>>,
}

fn run_trajectory(
    evolver: &Evolver,
    basis: &TwoSpinBasis,
    ops: &CollectiveOperators,
    psi0: &StateVector,
    model: &NoiseModel,
    index: u64,
    n_steps: usize,
    samples: &[usize],
    observables: &[HermitianOperator],
) -> Result<TrajectoryRecord> {
    let mut rng = model.trajectory_rng(index);
    let mut psi = psi0.clone();
    let mut record = TrajectoryRecord { moments: Vec::with_capacity(samples.len()), observables: Vec::with_capacity(samples.len()) };
    let mut next = samples.iter().peekable();
    let noisy = model.diffusion_rate > 0.0;
    for k in 0..=n_steps {
        if next.peek() == Some(&&k) {
            next.next();
            record.moments.push(CollectiveMoments::of_state(ops, &psi)?);
            record.observables.push(
                observables
                    .iter()
                    .map(|op| {
                        let image = psi.apply(op);
                        let mean: f64 = psi.amplitudes().iter().zip(&image).map(|(a, b)| (a.conj() * b).re).sum();
                        (mean, image.iter().map(|c| c.norm_sqr()).sum())
                    })
                    .collect(),
            );
        }
        if k == n_steps {
            break;
        }
        let amps = if noisy {
            let diag = sample_noise_step(model, &mut rng, evolver.dt()).diagonal(basis);
            evolver.step(k, psi.amplitudes(), Some(&diag))?
        } else {
            evolver.step(k, psi.amplitudes(), None)?
        };
        psi = StateVector::from_raw(amps);
    }
    Ok(record)
}

/// Noise-averaged evolution. Criteria are evaluated on the ensemble (mixed)
/// state; `observables` get their ensemble mean and mixed-state variance.
#[allow(clippy::too_many_arguments)]
pub fn evolve_dephased(
    psi0: &StateVector,
    params: &ModelParams,
    ramp: &RampSchedule,
    model: &NoiseModel,
    dt: f64,
    t_max: f64,
    stride: usize,
    observables: &[HermitianOperator],
) -> Result<Vec<EnsembleSample>> {
    model.validate()?;
    let basis = params.basis()?;
    if psi0.dim() != basis.dimension() {
        return Err(Error::DimensionMismatch { expected: basis.dimension(), actual: psi0.dim() });
    }
    if let Some(op) = observables.iter().find(|op| op.dim() != basis.dimension()) {
        return Err(Error::DimensionMismatch { expected: basis.dimension(), actual: op.dim() });
    }
    let n_steps = step_count(dt, t_max)?;
    let samples = sample_steps(n_steps, stride);
    let evolver = Evolver::new(params, &basis, ramp, dt)?;
    let ops = CollectiveOperators::new(&basis);

    let records: Vec<TrajectoryRecord> = (0..model.n_trajectories as u64)
        .into_par_iter()
        .map(|i| run_trajectory(&evolver, &basis, &ops, psi0, model, i, n_steps, &samples, observables))
        .collect::<Result<_>>()?;

    let sum_moments = |ms: &[CollectiveMoments]| -> Vec<f64> {
        let mut acc = vec![0.0; 14];
        for m in ms {
            acc.iter_mut().zip(moments_to_vec(m)).for_each(|(a, v)| *a += v);
        }
        acc
    };

    let out = samples
        .iter()
        .enumerate()
        .map(|(si, &step)| {
            let per_traj: Vec<CollectiveMoments> = records.iter().map(|r| r.moments[si]).collect();
            let moments = CollectiveMoments::mean(&per_traj).expect("at least one trajectory");
            let report = EprReport::from_moments(&moments).ok();
            let errors = report.and_then(|_| {
                jackknife(&per_traj, sum_moments, |v| {
                    EprReport::from_moments(&moments_from_vec(v)).ok().map(|r| ReportErrors::fields(&r).to_vec())
                })
                .map(|se| ReportErrors::from_fields(se.try_into().expect("eight fields")))
            });
            let observables = (0..observables.len())
                .map(|oi| {
                    let pairs: Vec<(f64, f64)> = records.iter().map(|r| r.observables[si][oi]).collect();
                    observable_stat(&pairs)
                })
                .collect();
            EnsembleSample { t: step as f64 * dt, moments, report, errors, observables }
        })
        .collect();
    Ok(out)
}

fn observable_stat(pairs: &[(f64, f64)]) -> ObservableStat {
    let k = pairs.len() as f64;
    let m1 = pairs.iter().map(|p| p.0).sum::<f64>() / k;
    let m2 = pairs.iter().map(|p| p.1).sum::<f64>() / k;
    let sum = |ps: &[(f64, f64)]| vec![ps.iter().map(|p| p.0).sum(), ps.iter().map(|p| p.1).sum()];
    let se = jackknife(pairs, sum, |v| Some(vec![v[0], v[1] - v[0] * v[0]])).unwrap_or_else(|| vec![f64::NAN, f64::NAN]);
    ObservableStat { mean: m1, mean_se: se[0], variance: (m2 - m1 * m1).max(0.0), variance_se: se[1] }
}
