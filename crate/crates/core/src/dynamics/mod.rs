//! Ground states and unitary time evolution under constant or ramped tunneling.

pub mod krylov;
pub mod lanczos;

pub use krylov::{krylov_step, KrylovOptions};
pub use lanczos::{lowest_eigenpair, LanczosOptions};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{StateVector, TwoSpinBasis};
use crate::error::{Error, Result};
use crate::model::{HamiltonianParts, ModelParams};
use crate::operator::{HermitianOperator, OperatorSum, C64};

/// Below this dimension a constant Hamiltonian is propagated with a cached
/// dense exponential instead of Krylov steps.
pub const DENSE_LIMIT: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RampKind {
    Sudden,
    Linear,
    Piecewise,
}

/// Tunneling energy as a function of time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RampSchedule {
    pub kind: RampKind,
    pub j_initial: f64,
    pub j_final: f64,
    pub ramp_duration: f64,
    /// `(t, J)` knots of a piecewise-linear schedule; empty otherwise.
    pub knots: Vec<(f64, f64)>,
}

impl RampSchedule {
    pub fn sudden(j: f64) -> Self {
        Self { kind: RampKind::Sudden, j_initial: j, j_final: j, ramp_duration: 0.0, knots: Vec::new() }
    }

    pub fn linear(j_initial: f64, j_final: f64, ramp_duration: f64) -> Result<Self> {
        let ramp = Self { kind: RampKind::Linear, j_initial, j_final, ramp_duration, knots: Vec::new() };
        ramp.validate()?;
        Ok(ramp)
    }

    /// Piecewise-linear through `knots`, which must start at `t = 0`.
    pub fn piecewise(knots: Vec<(f64, f64)>) -> Result<Self> {
        let (first, last) = match (knots.first(), knots.last()) {
            (Some(&f), Some(&l)) if knots.len() >= 2 => (f, l),
            _ => return Err(Error::InvalidParameter("piecewise ramp needs at least two knots".into())),
        };
        let ramp = Self {
            kind: RampKind::Piecewise,
            j_initial: first.1,
            j_final: last.1,
            ramp_duration: last.0,
            knots,
        };
        ramp.validate()?;
        Ok(ramp)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.j_initial.is_finite() && self.j_final.is_finite() && self.ramp_duration.is_finite();
        if !finite || self.j_initial < 0.0 || self.j_final < 0.0 || self.ramp_duration < 0.0 {
            return Err(Error::InvalidParameter("ramp energies and duration must be finite and non-negative".into()));
        }
        match self.kind {
            RampKind::Sudden if self.ramp_duration != 0.0 => {
                Err(Error::InvalidParameter("sudden ramp must have zero duration".into()))
            }
            RampKind::Linear | RampKind::Piecewise if self.ramp_duration <= 0.0 => {
                Err(Error::InvalidParameter("non-sudden ramp needs a positive duration".into()))
            }
            RampKind::Piecewise => {
                let ok = self.knots[0].0 == 0.0
                    && self.knots.windows(2).all(|w| w[1].0 > w[0].0)
                    && self.knots.iter().all(|k| k.1.is_finite() && k.1 >= 0.0);
                if ok {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(
                        "piecewise knots must start at t = 0, increase strictly, and carry non-negative J".into(),
                    ))
                }
            }
            _ => Ok(()),
        }
    }

    pub fn j_of_t(&self, t: f64) -> f64 {
        if t >= self.ramp_duration {
            return self.j_final;
        }
        match self.kind {
            RampKind::Sudden => self.j_final,
            RampKind::Linear => {
                let f = (t / self.ramp_duration).max(0.0);
                self.j_initial + (self.j_final - self.j_initial) * f
            }
            RampKind::Piecewise => {
                let k = self.knots.partition_point(|&(tk, _)| tk <= t).max(1);
                let ((t0, j0), (t1, j1)) = (self.knots[k - 1], self.knots[k]);
                j0 + (j1 - j0) * (t - t0) / (t1 - t0)
            }
        }
    }
}

/// Sampled evolution: `samples[i]` was taken at `times[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub dt: f64,
    pub times: Vec<f64>,
    pub samples: Vec<T>,
}

impl<T> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &T)> {
        self.times.iter().copied().zip(&self.samples)
    }

    pub fn map<U>(self, f: impl FnMut(T) -> U) -> Trajectory<U> {
        Trajectory { dt: self.dt, times: self.times, samples: self.samples.into_iter().map(f).collect() }
    }
}

/// Number of `dt` steps covering `[0, t_max]`.
pub fn step_count(dt: f64, t_max: f64) -> Result<usize> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    if !(t_max.is_finite() && t_max >= 0.0) {
        return Err(Error::InvalidParameter(format!("t_max must be non-negative, got {t_max}")));
    }
    Ok((t_max / dt - 1e-9).ceil().max(0.0) as usize)
}

/// Step indices at which observables are recorded: every `stride`-th step and the last one.
pub fn sample_steps(n_steps: usize, stride: usize) -> Vec<usize> {
    let stride = stride.max(1);
    let mut steps: Vec<usize> = (0..=n_steps).step_by(stride).collect();
    if steps.last() != Some(&n_steps) {
        steps.push(n_steps);
    }
    steps
}

/// Dense `exp(-i dt H)` via the eigendecomposition of `H`.
pub fn dense_propagator(h: &HermitianOperator, dt: f64) -> DMatrix<C64> {
    let eig = h.matrix().to_dense().symmetric_eigen();
    let phases = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|&e| C64::from_polar(1.0, -e * dt)));
    let v = &eig.eigenvectors;
    v * DMatrix::from_diagonal(&phases) * v.adjoint()
}

fn dense_apply(u: &DMatrix<C64>, psi: &[C64]) -> Vec<C64> {
    (u * DVector::from_column_slice(psi)).iter().copied().collect()
}

/// Steps states forward under `H(t) = J(t)·T + V (+ optional diagonal)`,
/// sampling `J` at the midpoint of each step.
pub struct Evolver {
    parts: HamiltonianParts,
    ramp: RampSchedule,
    dt: f64,
    krylov: KrylovOptions,
    dense_final: Option<DMatrix<C64>>,
    final_h: HermitianOperator,
}

impl Evolver {
    pub fn new(params: &ModelParams, basis: &TwoSpinBasis, ramp: &RampSchedule, dt: f64) -> Result<Self> {
        ramp.validate()?;
        step_count(dt, dt)?;
        let parts = HamiltonianParts::new(params, basis)?;
        let final_h = parts.assemble(ramp.j_final);
        let dense_final = (parts.dim() < DENSE_LIMIT).then(|| dense_propagator(&final_h, dt));
        Ok(Self { parts, ramp: ramp.clone(), dt, krylov: KrylovOptions::default(), dense_final, final_h })
    }

    pub fn with_krylov(mut self, krylov: KrylovOptions) -> Self {
        self.krylov = krylov;
        self
    }

    /// Disables the dense propagator so that every step runs through Krylov.
    pub fn krylov_only(mut self) -> Self {
        self.dense_final = None;
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dim(&self) -> usize {
        self.parts.dim()
    }

    pub fn parts(&self) -> &HamiltonianParts {
        &self.parts
    }

    /// Tunneling energy used for step `k`, which spans `[k dt, (k+1) dt]`.
    pub fn j_at_step(&self, k: usize) -> f64 {
        self.ramp.j_of_t((k as f64 + 0.5) * self.dt)
    }

    /// Hamiltonian at the final tunneling value.
    pub fn final_hamiltonian(&self) -> &HermitianOperator {
        &self.final_h
    }

    /// Applies step `k`, with an optional extra real diagonal added to `H`.
    pub fn step(&self, k: usize, psi: &[C64], extra_diagonal: Option<&[f64]>) -> Result<Vec<C64>> {
        let j = self.j_at_step(k);
        if extra_diagonal.is_none() && j == self.ramp.j_final {
            if let Some(u) = &self.dense_final {
                return Ok(dense_apply(u, psi));
            }
            return krylov_step(&self.final_h, psi, self.dt, &self.krylov);
        }
        let combined: Vec<f64>;
        let diag = match extra_diagonal {
            Some(extra) => {
                combined = self.parts.interaction.iter().zip(extra).map(|(a, b)| a + b).collect();
                &combined[..]
            }
            None => &self.parts.interaction[..],
        };
        let h = OperatorSum::new(self.dim()).term(j, &self.parts.tunneling).with_diagonal(diag);
        krylov_step(&h, psi, self.dt, &self.krylov)
    }

    /// Runs `n_steps` steps and records `observe(t, ψ)` at the sampled steps.
    pub fn run<T>(
        &self,
        psi0: &StateVector,
        n_steps: usize,
        stride: usize,
        mut observe: impl FnMut(f64, &StateVector) -> Result<T>,
    ) -> Result<Trajectory<T>> {
        if psi0.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: psi0.dim() });
        }
        let sampled = sample_steps(n_steps, stride);
        let mut next = sampled.iter().peekable();
        let mut traj = Trajectory { dt: self.dt, times: Vec::with_capacity(sampled.len()), samples: Vec::with_capacity(sampled.len()) };
        let mut psi = psi0.clone();
        for k in 0..=n_steps {
            if next.peek() == Some(&&k) {
                next.next();
                let t = k as f64 * self.dt;
                traj.samples.push(observe(t, &psi)?);
                traj.times.push(t);
            }
            if k < n_steps {
                psi = StateVector::from_raw(self.step(k, psi.amplitudes(), None)?);
            }
        }
        Ok(traj)
    }
}

/// Lowest eigenvalue and eigenvector by restarted Lanczos.
pub fn ground_state(h: &HermitianOperator) -> Result<(f64, StateVector)> {
    let (energy, vec) = lowest_eigenpair(h, &LanczosOptions::default())?;
    Ok((energy, StateVector::from_raw(vec)))
}

/// One Krylov propagation step `exp(-i dt H) ψ`.
pub fn propagator_step(h: &HermitianOperator, psi: &StateVector, dt: f64) -> Result<StateVector> {
    if psi.dim() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), actual: psi.dim() });
    }
    Ok(StateVector::from_raw(krylov_step(h, psi.amplitudes(), dt, &KrylovOptions::default())?))
}

/// Evolves `psi0` and stores the state after every step.
pub fn evolve(psi0: &StateVector, params: &ModelParams, ramp: &RampSchedule, dt: f64, t_max: f64) -> Result<Trajectory<StateVector>> {
    evolve_sampled(psi0, params, ramp, dt, t_max, 1, |_, psi| Ok(psi.clone()))
}

/// Evolves `psi0` and records `observe(t, ψ)` every `stride` steps and at `t_max`.
pub fn evolve_sampled<T>(
    psi0: &StateVector,
    params: &ModelParams,
    ramp: &RampSchedule,
    dt: f64,
    t_max: f64,
    stride: usize,
    observe: impl FnMut(f64, &StateVector) -> Result<T>,
) -> Result<Trajectory<T>> {
    let n_steps = step_count(dt, t_max)?;
    let basis = params.basis()?;
    Evolver::new(params, &basis, ramp, dt)?.run(psi0, n_steps, stride, observe)
}
