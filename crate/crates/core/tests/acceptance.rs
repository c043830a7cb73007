//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

mod common;

use std::f64::consts::FRAC_PI_2;
use std::fs;
use std::time::Instant;

use common::{apply_dense, max_diff, taylor_expm};
use jj_epr::analytics::harmonic_prediction;
use jj_epr::app::run;
use jj_epr::basis::{Species, StateVector, TwoSpinBasis};
use jj_epr::config::parse_config;
use jj_epr::criteria::{epr_l_criterion, epr_number_phase, CollectiveOperators};
use jj_epr::dynamics::{evolve_sampled, ground_state, krylov_step, Evolver, KrylovOptions, RampSchedule};
use jj_epr::model::{build_exact_hamiltonian, harmonic_coefficients, ModelParams};
use jj_epr::noise::{evolve_dephased, NoiseModel};
use jj_epr::operator::C64;
use jj_epr::schemes::{min_l_value, run_global_scheme, GlobalSample, GlobalSchemeConfig};
use jj_epr::selfcheck::random_sparse_hermitian;
use jj_epr::sweep::{refine_sweep, run_sweep, Objective, SweepAxis, SweepSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn coherent(basis: &TwoSpinBasis) -> StateVector {
    basis.coherent_state(FRAC_PI_2, 0.0, FRAC_PI_2, 0.0).expect("valid angles")
}

fn c1_coherent_baseline() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in [2usize, 10, 100] {
        let basis = TwoSpinBasis::new(n, n).map_err(err)?;
        let r = epr_l_criterion(&CollectiveOperators::new(&basis), &coherent(&basis)).map_err(err)?;
        worst = worst.max((r.l_value - 0.25).abs()).max(r.epsilon.abs());
    }
    Ok((worst <= 1e-9, format!("N in {{2,10,100}}: max |L - 1/4|, |eps| = {worst:.2e} (tol 1e-9)")))
}

fn c2_harmonic_limit() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for ec in [0.001, 0.005] {
        let params = ModelParams::symmetric(100, 1.0, ec);
        let basis = params.basis().map_err(err)?;
        let h = build_exact_hamiltonian(&params, &basis).map_err(err)?;
        let (_, psi) = ground_state(&h).map_err(err)?;
        let exact = epr_number_phase(&CollectiveOperators::new(&basis), &psi).map_err(err)?;
        let pred = harmonic_prediction(&harmonic_coefficients(&params).map_err(err)?).map_err(err)?;
        let predicted = 1.0 / (4.0 * pred.s_product);
        let rel = (exact / predicted - 1.0).abs();
        pass &= rel < 0.10;
        parts.push(format!(
            "Ec={ec}: exact {exact:.5} vs 1/(4 s_product) {predicted:.5} (rel {rel:.3}; s_product {:.4}, s_ratio {:.4})",
            pred.s_product, pred.s_ratio
        ));
    }
    Ok((pass, format!("{} (tol 10%)", parts.join("; "))))
}

fn global_config(params: ModelParams, ramp: RampSchedule, t_max: f64, stride: usize) -> GlobalSchemeConfig {
    GlobalSchemeConfig { sample_stride: stride, ..GlobalSchemeConfig::new(params, ramp, 0.01, t_max) }
}

fn c3_separability_floor() -> Outcome {
    let mut worst_l = f64::INFINITY;
    let mut worst_np = f64::INFINITY;
    let mut worst_eps = f64::INFINITY;
    let mut lost = 0usize;
    for n in [10usize, 20] {
        for ec in [0.01, 0.1, 0.5, 1.0, 2.0] {
            let params = ModelParams { ec_ab: 0.0, ..ModelParams::symmetric(n, 1.0, ec) };
            let res = run_global_scheme(&global_config(params, RampSchedule::sudden(1.0), 10.0, 1)).map_err(err)?;
            for s in &res.samples {
                match &s.report {
                    Some(r) => {
                        worst_l = worst_l.min(r.l_value);
                        worst_np = worst_np.min(r.product_np);
                        worst_eps = worst_eps.min(r.epsilon);
                    }
                    None => lost += 1,
                }
            }
        }
    }
    let pass = worst_l >= 0.25 - 1e-6 && worst_np >= 0.25 - 1e-6 && worst_eps >= -1e-6;
    Ok((
        pass,
        format!(
            "E_AB=0, N in {{10,20}}, Ec in {{0.01..2}}: min L {worst_l:.9}, min product {worst_np:.9}, min eps {worst_eps:.2e}, samples without phase reference {lost}"
        ),
    ))
}

fn c4_entanglement_generation() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for ec in [0.1, 0.5, 1.0] {
        let res = run_global_scheme(&global_config(ModelParams::symmetric(10, 1.0, ec), RampSchedule::sudden(1.0), 10.0, 1))
            .map_err(err)?;
        let (t, v) = min_l_value(&res.samples).ok_or("no sample kept a phase reference")?;
        pass &= v < 0.25;
        parts.push(format!("Ec=E_AB={ec}: min L {v:.4} at t={t}"));
    }
    Ok((pass, parts.join("; ")))
}

fn c5_sudden_beats_slow() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for ec in [0.1, 0.5] {
        let params = ModelParams::symmetric(10, 1.0, ec);
        let sudden = run_global_scheme(&global_config(params, RampSchedule::sudden(1.0), 10.0, 1)).map_err(err)?;
        let slow_ramp = RampSchedule::linear(10.0, 1.0, 5.0).map_err(err)?;
        let slow = run_global_scheme(&global_config(params, slow_ramp, 10.0, 1)).map_err(err)?;
        let s = min_l_value(&sudden.samples).ok_or("sudden run lost its phase reference")?.1;
        let w = min_l_value(&slow.samples).ok_or("slow run lost its phase reference")?.1;
        pass &= s <= w;
        parts.push(format!("Ec=E_AB={ec}: sudden {s:.4} <= slow {w:.4}"));
    }
    Ok((pass, format!("N=10, J=1, t_max=10, slow = linear J 10->1 over 5/J: {}", parts.join("; "))))
}

fn c6_optimal_charging_energy() -> Outcome {
    let template = global_config(ModelParams::symmetric(10, 1.0, 0.0), RampSchedule::sudden(1.0), 10.0, 1);
    let spec = SweepSpec {
        axis: SweepAxis::EcAll,
        grid: vec![0.0, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0],
        objective: Objective::MinLValue,
        template,
    };
    let res = run_sweep(&spec).map_err(err)?;
    let values: Vec<f64> = res.rows.iter().map(|r| r.objective.unwrap_or(f64::NAN)).collect();
    let i = res.argmin.ok_or("no grid point succeeded")?;
    let interior = i > 0 && i + 1 < values.len();
    let non_monotone = values.windows(2).any(|w| w[1] < w[0]) && values.windows(2).any(|w| w[1] > w[0]);
    let refined = if interior { refine_sweep(&spec, &res).map_err(err)? } else { (f64::NAN, f64::NAN) };
    let table: Vec<String> = spec.grid.iter().zip(&values).map(|(e, v)| format!("{e}:{v:.4}")).collect();
    Ok((
        interior && non_monotone && refined.1 <= values[i],
        format!(
            "N=10 sweep Ec -> min L [{}]; grid optimum Ec={}, refined Ec*={:.4} (L {:.4})",
            table.join(" "),
            spec.grid[i],
            refined.0,
            refined.1
        ),
    ))
}

fn c7_one_axis_twisting() -> Outcome {
    // A single twisted species: species B is one spectator atom with no energy.
    let chi = 0.8;
    let mut worst: f64 = 0.0;
    for n in [2usize, 10, 50] {
        let params = ModelParams { n_atoms_a: n, n_atoms_b: 1, tunneling_j: 0.0, ec_aa: chi, ec_bb: 0.0, ec_ab: 0.0 };
        let basis = params.basis().map_err(err)?;
        let jx = basis.spin_operators(Species::A).jx;
        let dev = evolve_sampled(&coherent(&basis), &params, &RampSchedule::sudden(0.0), 0.01, 4.0, 1, |t, psi| {
            Ok((psi.expectation(&jx) - 0.5 * n as f64 * (chi * t).cos().powi(n as i32 - 1)).abs())
        })
        .map_err(err)?;
        worst = dev.samples.into_iter().fold(worst, f64::max);
    }
    Ok((
        worst <= 1e-6,
        format!("J=0, H = chi Jz^2, N in {{2,10,50}}: max |<Jx> - (N/2)cos^(N-1)(chi t)| = {worst:.2e} (tol 1e-6)"),
    ))
}

fn linear_fit_r2(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - my - slope * (a - mx)).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    (slope, 1.0 - ss_res / ss_tot)
}

fn c8_dephasing_signature() -> Outcome {
    let n = 10usize;
    let params = ModelParams::symmetric(n, 1.0, 0.1);
    let basis = params.basis().map_err(err)?;
    // Start from the stationary ground state so the noiseless variances stay constant.
    let (_, psi0) = ground_state(&build_exact_hamiltonian(&params, &basis).map_err(err)?).map_err(err)?;
    let ramp = RampSchedule::sudden(1.0);
    let (dt, t_max, stride) = (0.01, 20.0, 20);
    let noise = NoiseModel { xi: 0.0, diffusion_rate: 0.01, n_trajectories: 500, master_seed: 8 };
    let noisy = evolve_dephased(&psi0, &params, &ramp, &noise, dt, t_max, stride, &[]).map_err(err)?;
    let clean = evolve_dephased(&psi0, &params, &ramp, &NoiseModel { diffusion_rate: 0.0, n_trajectories: 1, ..noise }, dt, t_max, stride, &[])
        .map_err(err)?;
    let mut times = Vec::new();
    let mut dn = Vec::new();
    let mut dphi = Vec::new();
    for (a, b) in noisy.iter().zip(&clean) {
        times.push(a.t);
        dn.push(a.moments.var_n(1.0) - b.moments.var_n(1.0));
        dphi.push(a.moments.var_phi(-1.0).map_err(err)? - b.moments.var_phi(-1.0).map_err(err)?);
    }
    let (slope, r2) = linear_fit_r2(&times, &dn);
    // Both changes in units of their coherent-state variances, N/4 and 1/N.
    let growth = dn.last().copied().unwrap_or(0.0) / (n as f64 / 4.0);
    let phi_change = dphi.iter().map(|v| v.abs()).fold(0.0, f64::max) * n as f64;
    let pass = slope > 0.0 && r2 > 0.95 && phi_change < 0.1 * growth;
    Ok((
        pass,
        format!(
            "N=10 ground state, xi=0, D=0.01, 500 trajectories, t<=20: Var(n+) excess slope {slope:.4}, R^2 {r2:.4}; relative growth {growth:.3}, max |dVar(phi-)| relative {phi_change:.4} = {:.1}% of growth (tol 10%)",
            100.0 * phi_change / growth
        ),
    ))
}

fn c9_propagator_fidelity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst: f64 = 0.0;
    for dim in [5usize, 20, 50, 80, 100] {
        for _ in 0..3 {
            let h = random_sparse_hermitian(dim, 6, &mut rng);
            let amps = (0..dim).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            let psi = StateVector::normalized(amps).map_err(err)?;
            let dt = rng.random_range(0.01..0.5);
            let k = krylov_step(&h, psi.amplitudes(), dt, &KrylovOptions::default()).map_err(err)?;
            worst = worst.max(max_diff(&k, &apply_dense(&taylor_expm(&h.matrix().to_dense(), dt), psi.amplitudes())));
        }
    }
    let params = ModelParams::symmetric(20, 1.0, 0.3);
    let basis = params.basis().map_err(err)?;
    let ramp = RampSchedule::linear(3.0, 1.0, 10.0).map_err(err)?;
    let evolver = Evolver::new(&params, &basis, &ramp, 0.01).map_err(err)?;
    let norms = evolver.run(&coherent(&basis), 1000, 1000, |_, psi| Ok(psi.norm_sqr())).map_err(err)?;
    let drift = (norms.samples.last().copied().unwrap_or(f64::NAN) - 1.0).abs();
    Ok((
        worst <= 1e-10 && drift < 1e-9,
        format!("Krylov vs Taylor exponential, dim <= 100: max dev {worst:.2e} (tol 1e-10); norm drift over 1000 ramped steps {drift:.2e} (tol 1e-9)"),
    ))
}

fn c10_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let global = "model.n_atoms = 4\nmodel.tunneling_j = 1.0\nmodel.ec = 0.5\nevolution.dt = 0.01\nevolution.t_max = 1.0\nevolution.sample_stride = 10\nnoise.diffusion_rate = 0.02\nnoise.n_trajectories = 16\nseed = 5\nglobal.uncoupled_reference = true\n";
    let sweep = "model.n_atoms = 4\nmodel.tunneling_j = 1.0\nmodel.ec = 0.5\nevolution.dt = 0.01\nevolution.t_max = 1.0\nevolution.sample_stride = 10\nnoise.diffusion_rate = 0.02\nnoise.n_trajectories = 8\nseed = 6\nsweep.axis = \"ec_all\"\nsweep.grid = [0.1, 0.3, 0.5, 0.7]\nsweep.per_point = true\n";
    let mut compared = 0usize;
    for (name, text) in [("global", global), ("sweep", sweep)] {
        let mut outputs = Vec::new();
        for threads in [1usize, 4, 4] {
            let out = dir.path().join(format!("{name}_{threads}_{}", outputs.len()));
            let mut cfg = parse_config(text).map_err(err)?;
            cfg.output_dir = out.clone();
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(err)?;
            let res = pool.install(|| run(&cfg)).map_err(err)?;
            let mut files = Vec::new();
            for path in &res.csv_files {
                files.push((path.file_name().map(|f| f.to_owned()), fs::read(path).map_err(err)?));
            }
            outputs.push(files);
        }
        if outputs.windows(2).any(|w| w[0] != w[1]) {
            return Ok((false, format!("{name}: CSV outputs differ between runs")));
        }
        compared += outputs[0].len();
    }
    Ok((true, format!("{compared} CSV files byte-identical across 3 runs each (1 and 4 threads, noisy global and sweep)")))
}

fn c11_criteria_equivalence() -> Outcome {
    // Unequal charging energies so the two species' phase references differ.
    let params = ModelParams { n_atoms_a: 20, n_atoms_b: 20, tunneling_j: 1.0, ec_aa: 0.01, ec_bb: 0.015, ec_ab: 0.01 };
    let res = run_global_scheme(&global_config(params, RampSchedule::sudden(1.0), 5.0, 5)).map_err(err)?;
    let full = 0.5 * (params.n_atoms_a + params.n_atoms_b) as f64;
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    let mut min_coherence = f64::INFINITY;
    for GlobalSample { report, .. } in &res.samples {
        let r = report.as_ref().ok_or("phase reference lost")?;
        let coherence = r.mean_lx.abs() / full;
        min_coherence = min_coherence.min(coherence);
        if 1.0 - coherence < 0.01 {
            worst = worst.max((r.product_np / r.l_value - 1.0).abs());
            checked += 1;
        }
    }
    Ok((
        checked > 0 && worst < 0.05,
        format!("N=20+20, weak unequal Ec, t<=5: {checked} samples with 1-|<Lx>|/Lmax < 0.01 (min coherence {min_coherence:.5}); max |product/L - 1| = {worst:.2e} (tol 5%)"),
    ))
}

fn main() {
    let criteria: [(&str, &str, fn() -> Outcome); 11] = [
        ("C1", "coherent-state baseline", c1_coherent_baseline),
        ("C2", "harmonic-limit oracle", c2_harmonic_limit),
        ("C3", "separability floor", c3_separability_floor),
        ("C4", "entanglement generation", c4_entanglement_generation),
        ("C5", "sudden beats slow", c5_sudden_beats_slow),
        ("C6", "optimal charging energy", c6_optimal_charging_energy),
        ("C7", "one-axis-twisting closed form", c7_one_axis_twisting),
        ("C8", "dephasing signature", c8_dephasing_signature),
        ("C9", "propagator fidelity", c9_propagator_fidelity),
        ("C10", "determinism", c10_determinism),
        ("C11", "criteria equivalence regime", c11_criteria_equivalence),
    ];
    let mut failures = 0;
    for (id, name, check) in criteria {
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok((true, detail)) => println!("[PASS] {id} {name}: {detail} ({secs:.2} s)"),
            Ok((false, detail)) => {
                failures += 1;
                println!("[FAIL] {id} {name}: {detail} ({secs:.2} s)");
            }
            Err(e) => {
                failures += 1;
                println!("[FAIL] {id} {name}: error: {e} ({secs:.2} s)");
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
