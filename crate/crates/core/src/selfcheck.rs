//! Cross-checks of the sparse solvers against dense linear algebra, run by
//! the `oracle` subcommand.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::basis::StateVector;
use crate::criteria::{epr_l_criterion, CollectiveOperators};
use crate::dynamics::{dense_propagator, evolve_sampled, ground_state, krylov_step, KrylovOptions, RampSchedule};
use crate::error::Result;
use crate::model::{build_exact_hamiltonian, ModelParams};
use crate::operator::{HermitianOperator, SparseMatrix, C64};

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Worst deviation observed.
    pub deviation: f64,
    pub tolerance: f64,
}

fn check(name: &'static str, deviation: f64, tolerance: f64) -> CheckResult {
    CheckResult { name, passed: deviation <= tolerance, deviation, tolerance }
}

/// Random Hermitian matrix with about `fill` nonzeros per row.
pub fn random_sparse_hermitian(dim: usize, fill: usize, rng: &mut impl Rng) -> HermitianOperator {
    let mut triplets = Vec::new();
    for i in 0..dim {
        triplets.push((i, i, C64::new(rng.random_range(-1.0..1.0), 0.0)));
        for _ in 0..fill / 2 {
            let j = rng.random_range(0..dim);
            if j == i {
                continue;
            }
            let v = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            triplets.push((i, j, v));
            triplets.push((j, i, v.conj()));
        }
    }
    HermitianOperator::new(SparseMatrix::from_triplets(dim, triplets).expect("indices in range")).expect("hermitian")
}

fn ground_state_check() -> Result<CheckResult> {
    let params = ModelParams::symmetric(6, 1.0, 0.3);
    let h = build_exact_hamiltonian(&params, &params.basis()?)?;
    let (e, _) = ground_state(&h)?;
    let dense: DMatrix<C64> = h.matrix().to_dense();
    let eig = dense.symmetric_eigen();
    let lowest = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(check("lanczos ground energy vs dense eigensolver (N=6)", (e - lowest).abs(), 1e-9))
}

fn propagator_check() -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for dim in [10, 50, 100] {
        let h = random_sparse_hermitian(dim, 6, &mut rng);
        let psi: Vec<C64> = (0..dim).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let psi = StateVector::normalized(psi)?;
        let krylov = krylov_step(&h, psi.amplitudes(), 0.1, &KrylovOptions::default())?;
        let u = dense_propagator(&h, 0.1);
        let dense = &u * nalgebra::DVector::from_column_slice(psi.amplitudes());
        let diff = krylov.iter().zip(dense.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        worst = worst.max(diff);
    }
    Ok(check("krylov step vs dense exponential (dim 10-100)", worst, 1e-10))
}

fn twisting_check() -> Result<CheckResult> {
    let chi = 0.37;
    let mut worst: f64 = 0.0;
    for n in [2usize, 10] {
        let params = ModelParams { n_atoms_a: n, n_atoms_b: 1, tunneling_j: 0.0, ec_aa: chi, ec_bb: 0.0, ec_ab: 0.0 };
        let basis = params.basis()?;
        let psi0 = basis.coherent_state(FRAC_PI_2, 0.0, FRAC_PI_2, 0.0)?;
        let jx = basis.spin_operators(crate::basis::Species::A).jx;
        let traj = evolve_sampled(&psi0, &params, &RampSchedule::sudden(0.0), 0.01, 3.0, 10, |t, psi| {
            Ok((psi.expectation(&jx) - 0.5 * n as f64 * (chi * t).cos().powi(n as i32 - 1)).abs())
        })?;
        worst = traj.samples.into_iter().fold(worst, f64::max);
    }
    Ok(check("one-axis twisting <Jx>(t) closed form", worst, 1e-9))
}

fn baseline_check() -> Result<CheckResult> {
    let mut worst: f64 = 0.0;
    for n in [2usize, 10, 40] {
        let basis = crate::basis::TwoSpinBasis::new(n, n)?;
        let psi = basis.coherent_state(FRAC_PI_2, 0.0, FRAC_PI_2, 0.0)?;
        let r = epr_l_criterion(&CollectiveOperators::new(&basis), &psi)?;
        worst = worst.max((r.l_value - 0.25).abs()).max(r.epsilon.abs());
    }
    Ok(check("coherent-state criteria at the separable bound", worst, 1e-9))
}

/// Runs every check; an `Err` means a check could not be carried out at all.
pub fn run_all() -> Result<Vec<CheckResult>> {
    Ok(vec![ground_state_check()?, propagator_check()?, twisting_check()?, baseline_check()?])
}
