//! One-dimensional parameter sweeps over the global scheme.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::harmonic_prediction;
use crate::dynamics::{RampKind, RampSchedule};
use crate::error::{Error, Result};
use crate::model::harmonic_coefficients;
use crate::schemes::{min_epsilon, min_l_value, run_global_scheme, GlobalSchemeConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// All three charging energies set to the value.
    EcAll,
    /// Only the interspecies energy `E_AB`.
    EcAb,
    /// Final tunneling `J` (and the initial one for a sudden ramp).
    TunnelingJ,
    RampDuration,
    Xi,
    DiffusionRate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    MinLValue,
    MinEpsilon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
    pub objective: Objective,
    pub template: GlobalSchemeConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    /// Best objective over time, `None` if the point failed or never kept a phase reference.
    pub objective: Option<f64>,
    pub t_opt: Option<f64>,
    /// Harmonic ground-state `Var(n_+) Var(φ_-)` at this point, when defined.
    pub harmonic_product: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Index of the row with the smallest objective.
    pub argmin: Option<usize>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::InvalidParameter("sweep grid is empty".into()));
        }
        if self.grid.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("sweep grid has non-finite values".into()));
        }
        let increasing = self.grid.windows(2).all(|w| w[1] > w[0]);
        let decreasing = self.grid.windows(2).all(|w| w[1] < w[0]);
        if !(increasing || decreasing) {
            return Err(Error::InvalidParameter("sweep grid must be strictly monotone".into()));
        }
        if matches!(self.axis, SweepAxis::Xi | SweepAxis::DiffusionRate) && self.template.noise.is_none() {
            return Err(Error::InvalidParameter(format!("sweeping {:?} needs a noise section", self.axis)));
        }
        if self.axis == SweepAxis::RampDuration && self.template.ramp.kind != RampKind::Linear {
            return Err(Error::InvalidParameter("sweeping ramp_duration needs a linear ramp".into()));
        }
        Ok(())
    }

    /// The template with the swept parameter set to `value`.
    pub fn config_at(&self, value: f64) -> Result<GlobalSchemeConfig> {
        let mut cfg = self.template.clone();
        match self.axis {
            SweepAxis::EcAll => {
                cfg.params.ec_aa = value;
                cfg.params.ec_bb = value;
                cfg.params.ec_ab = value;
            }
            SweepAxis::EcAb => cfg.params.ec_ab = value,
            SweepAxis::TunnelingJ => {
                cfg.params.tunneling_j = value;
                cfg.ramp = match cfg.ramp.kind {
                    RampKind::Sudden => RampSchedule::sudden(value),
                    _ => RampSchedule { j_final: value, ..cfg.ramp },
                };
            }
            SweepAxis::RampDuration => cfg.ramp = RampSchedule::linear(cfg.ramp.j_initial, cfg.ramp.j_final, value)?,
            SweepAxis::Xi => cfg.noise.as_mut().expect("validated").xi = value,
            SweepAxis::DiffusionRate => cfg.noise.as_mut().expect("validated").diffusion_rate = value,
        }
        Ok(cfg)
    }

    /// Runs the scheme at `value` and returns `(objective, t_opt)`.
    pub fn evaluate(&self, value: f64) -> Result<(f64, f64)> {
        let cfg = self.config_at(value)?;
        let samples = run_global_scheme(&cfg)?.samples;
        let best = match self.objective {
            Objective::MinLValue => min_l_value(&samples),
            Objective::MinEpsilon => min_epsilon(&samples),
        };
        best.map(|(t, v)| (v, t)).ok_or(Error::PhaseReferenceLost { mean_jx: 0.0, threshold: 0.0 })
    }
}

fn harmonic_product(cfg: &GlobalSchemeConfig) -> Option<f64> {
    let coeffs = harmonic_coefficients(&cfg.params).ok()?;
    let p = harmonic_prediction(&coeffs).ok()?;
    (!p.minus_mode_divergent).then(|| p.epr_product())
}

/// Evaluates every grid point in parallel. Failures are recorded per row.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let rows: Vec<SweepRow> = spec
        .grid
        .par_iter()
        .map(|&value| {
            let harmonic = spec.config_at(value).ok().as_ref().and_then(harmonic_product);
            match spec.evaluate(value) {
                Ok((objective, t)) => {
                    SweepRow { value, objective: Some(objective), t_opt: Some(t), harmonic_product: harmonic, error: None }
                }
                Err(e) => SweepRow { value, objective: None, t_opt: None, harmonic_product: harmonic, error: Some(e.to_string()) },
            }
        })
        .collect();
    let argmin = rows
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.objective.map(|o| (i, o)))
        .fold(None, |best: Option<(usize, f64)>, (i, o)| match best {
            Some((_, b)) if b <= o => best,
            _ => Some((i, o)),
        })
        .map(|(i, _)| i);
    Ok(SweepResult { rows, argmin })
}

const GOLDEN: f64 = 0.381_966_011_250_105_1;

/// Golden-section search from a bracketing triple `a < b < c` with `f(b)`
/// below `f(a)` and `f(c)`. Stops when the bracket is narrower than `rel_tol`
/// times the abscissa (or `rel_tol` itself near zero) and returns the best
/// point evaluated, which is never worse than `b`.
pub fn golden_section(mut f: impl FnMut(f64) -> Result<f64>, a: f64, b: f64, c: f64, rel_tol: f64) -> Result<(f64, f64)> {
    if !(a.is_finite() && c.is_finite() && a < b && b < c) {
        return Err(Error::InvalidBracket(format!("need finite a < b < c, got ({a}, {b}, {c})")));
    }
    let (fa, fb, fc) = (f(a)?, f(b)?, f(c)?);
    if !(fb < fa && fb < fc) {
        return Err(Error::InvalidBracket(format!(
            "middle point does not lie below the ends: f({a}) = {fa}, f({b}) = {fb}, f({c}) = {fc}"
        )));
    }
    let (mut x0, mut x3) = (a, c);
    let (mut x1, mut x2, mut f1, mut f2);
    if c - b > b - a {
        x1 = b;
        f1 = fb;
        x2 = b + GOLDEN * (c - b);
        f2 = f(x2)?;
    } else {
        x2 = b;
        f2 = fb;
        x1 = b - GOLDEN * (b - a);
        f1 = f(x1)?;
    }
    for _ in 0..200 {
        let scale = x1.abs().max(x2.abs());
        if x3 - x0 <= rel_tol * if scale > 0.0 { scale } else { 1.0 } {
            break;
        }
        if f2 < f1 {
            x0 = x1;
            x1 = x2;
            f1 = f2;
            x2 = x1 + GOLDEN * (x3 - x1);
            f2 = f(x2)?;
        } else {
            x3 = x2;
            x2 = x1;
            f2 = f1;
            x1 = x2 - GOLDEN * (x2 - x0);
            f1 = f(x1)?;
        }
    }
    Ok(if f1 <= f2 { (x1, f1) } else { (x2, f2) })
}

/// Refines an optimum bracketed by `(lo, mid, hi)` to relative tolerance `1e-3`.
pub fn refine_optimum(spec: &SweepSpec, lo: f64, mid: f64, hi: f64) -> Result<(f64, f64)> {
    spec.validate()?;
    golden_section(|v| spec.evaluate(v).map(|(o, _)| o), lo, mid, hi, 1e-3)
}

/// Refines the grid optimum of `result` using its two neighbours as the bracket.
pub fn refine_sweep(spec: &SweepSpec, result: &SweepResult) -> Result<(f64, f64)> {
    let i = result.argmin.ok_or_else(|| Error::InvalidBracket("sweep has no successful point".into()))?;
    if i == 0 || i + 1 == spec.grid.len() {
        return Err(Error::InvalidBracket(format!("grid optimum {} lies on the edge of the grid", spec.grid[i])));
    }
    let (p, q) = (spec.grid[i - 1], spec.grid[i + 1]);
    refine_optimum(spec, p.min(q), spec.grid[i], p.max(q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use approx::assert_abs_diff_eq;

    fn spec(grid: Vec<f64>) -> SweepSpec {
        let template = GlobalSchemeConfig {
            sample_stride: 5,
            ..GlobalSchemeConfig::new(ModelParams::symmetric(4, 1.0, 0.0), RampSchedule::sudden(1.0), 0.02, 4.0)
        };
        SweepSpec { axis: SweepAxis::EcAll, grid, objective: Objective::MinLValue, template }
    }

    #[test]
    fn golden_section_finds_quadratic_minimum() {
        let (x, fx) = golden_section(|x| Ok((x - 1.3).powi(2) + 2.0), 0.0, 0.5, 4.0, 1e-6).unwrap();
        assert_abs_diff_eq!(x, 1.3, epsilon = 1e-5);
        assert_abs_diff_eq!(fx, 2.0, epsilon = 1e-10);
    }

    #[test]
    fn golden_section_rejects_monotone_bracket() {
        assert!(matches!(golden_section(|x| Ok(x), 0.0, 0.5, 1.0, 1e-3), Err(Error::InvalidBracket(_))));
        assert!(matches!(golden_section(|x| Ok(-x * x), 1.0, 0.5, 0.0, 1e-3), Err(Error::InvalidBracket(_))));
    }

    #[test]
    fn grid_validation() {
        assert!(run_sweep(&spec(vec![])).is_err());
        assert!(run_sweep(&spec(vec![0.1, 0.1])).is_err());
        assert!(run_sweep(&spec(vec![0.1, 0.3, 0.2])).is_err());
        assert!(spec(vec![0.3, 0.2]).validate().is_ok());
        let mut s = spec(vec![0.1]);
        s.axis = SweepAxis::Xi;
        assert!(s.validate().is_err());
    }

    #[test]
    fn single_point_matches_direct_run() {
        let s = spec(vec![0.4]);
        let res = run_sweep(&s).unwrap();
        let direct = min_l_value(&run_global_scheme(&s.config_at(0.4).unwrap()).unwrap().samples).unwrap();
        assert_eq!(res.rows[0].objective, Some(direct.1));
        assert_eq!(res.rows[0].t_opt, Some(direct.0));
        assert_eq!(res.argmin, Some(0));
    }

    #[test]
    fn no_interaction_no_entanglement() {
        let res = run_sweep(&spec(vec![0.0, 0.5])).unwrap();
        assert_abs_diff_eq!(res.rows[0].objective.unwrap(), 0.25, epsilon = 1e-12);
        assert!(res.rows[1].objective.unwrap() < 0.25);
        assert_eq!(res.argmin, Some(1));
        assert!(res.rows[1].harmonic_product.unwrap() < 0.25);
    }

    #[test]
    fn refinement_does_not_lose_to_the_grid() {
        let s = spec(vec![0.25, 0.5, 1.0, 2.0, 4.0]);
        let res = run_sweep(&s).unwrap();
        let i = res.argmin.unwrap();
        assert!(i > 0 && i + 1 < s.grid.len(), "{:?}", res.rows);
        let (x, fx) = refine_sweep(&s, &res).unwrap();
        assert!(fx <= res.rows[i].objective.unwrap(), "{x} {fx} {:?}", res.rows);
        assert!(x > s.grid[i - 1] && x < s.grid[i + 1]);
    }
}
