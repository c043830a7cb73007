//! Runs a parsed configuration and writes its CSV and JSON outputs.
//!
//! Every CSV starts with a comment line carrying the schema version, the
//! package version, the config hash and the seed, followed by a header row.
//! Numbers use Rust's shortest round-trip formatting, so identical inputs give
//! byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde_json::json;

use crate::config::{ConfigError, RunConfig, SchemeConfig, SCHEMA_VERSION};
use crate::criteria::CollectiveMoments;
use crate::error::Error;
use crate::schemes::{min_l_value, run_global_scheme, run_local_scheme, GlobalSample, LocalSample};
use crate::sweep::{refine_sweep, run_sweep, SweepResult};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Model(#[from] Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("self-check failed: {0}")]
    CheckFailed(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Model(e) if e.is_numerical() => 3,
            RunError::Model(_) => 2,
            RunError::Io { .. } => 1,
            RunError::CheckFailed(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "config",
            3 => "numerical",
            _ => "io",
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let details: Vec<String> = match self {
            RunError::Config(c) => c.messages.clone(),
            other => vec![other.to_string()],
        };
        json!({ "error": self.kind(), "exit_code": self.exit_code(), "message": self.to_string(), "details": details })
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub csv_files: Vec<PathBuf>,
    pub metadata_file: PathBuf,
    pub summary: serde_json::Value,
}

fn header(cfg: &RunConfig, columns: &[&str]) -> String {
    format!(
        "# schema={SCHEMA_VERSION} version={VERSION} config_hash={} seed={}\n{}\n",
        cfg.hash(),
        cfg.seed,
        columns.join(",")
    )
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

const GLOBAL_COLUMNS: &[&str] = &[
    "t",
    "mean_lx",
    "var_ly_plus",
    "var_ly_minus",
    "var_lz_plus",
    "var_lz_minus",
    "l_value",
    "product_np",
    "epsilon",
    "branch",
];

const ERROR_COLUMNS: &[&str] =
    &["se_mean_lx", "se_l_value", "se_product_np", "se_epsilon", "se_var_n_plus", "se_var_phi_minus"];

/// CSV of a global-scheme run. Criteria columns are empty where the phase reference is lost.
pub fn global_csv(cfg: &RunConfig, samples: &[GlobalSample], noisy: bool) -> String {
    let mut columns = GLOBAL_COLUMNS.to_vec();
    if noisy {
        columns.extend_from_slice(ERROR_COLUMNS);
    }
    let mut out = header(cfg, &columns);
    for s in samples {
        let m: &CollectiveMoments = &s.moments;
        let r = s.report.as_ref();
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            s.t,
            m.mean_lx(),
            m.var_ly(1.0),
            m.var_ly(-1.0),
            m.var_lz(1.0),
            m.var_lz(-1.0),
            opt(r.map(|r| r.l_value)),
            opt(r.map(|r| r.product_np)),
            opt(r.map(|r| r.epsilon)),
            r.map(|r| r.branch.to_string()).unwrap_or_default(),
        );
        if noisy {
            let e = s.errors.as_ref();
            for v in [
                e.map(|e| e.mean_lx),
                e.map(|e| e.l_value),
                e.map(|e| e.product_np),
                e.map(|e| e.epsilon),
                e.map(|e| e.var_n_plus),
                e.map(|e| e.var_phi_minus),
            ] {
                let _ = write!(out, ",{}", opt(v));
            }
        }
        out.push('\n');
    }
    out
}

pub fn local_csv(cfg: &RunConfig, samples: &[LocalSample]) -> String {
    let mut out = header(cfg, &["t", "mean_jx", "s_single", "var_n_plus", "var_phi_minus", "phase_reference_lost"]);
    for s in samples {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            s.t, s.mean_jx, s.s_single, s.var_n_plus, s.var_phi_minus, s.phase_reference_lost
        );
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn sweep_csv(cfg: &RunConfig, result: &SweepResult) -> String {
    let mut out = header(cfg, &["value", "objective", "t_opt", "harmonic_product", "error"]);
    for r in &result.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.value,
            opt(r.objective),
            opt(r.t_opt),
            opt(r.harmonic_product),
            csv_field(r.error.as_deref().unwrap_or(""))
        );
    }
    out
}

fn write(path: &Path, contents: &str) -> Result<(), RunError> {
    fs::write(path, contents).map_err(|source| RunError::Io { path: path.to_path_buf(), source })
}

/// Runs `cfg` and writes its files into `cfg.output_dir`.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome, RunError> {
    let started = Instant::now();
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|source| RunError::Io { path: dir.clone(), source })?;
    let mut files: Vec<(PathBuf, String)> = Vec::new();
    let summary = match &cfg.scheme {
        SchemeConfig::Global(g) => {
            let res = run_global_scheme(g)?;
            let noisy = g.noise.is_some();
            files.push((dir.join("global.csv"), global_csv(cfg, &res.samples, noisy)));
            let best = min_l_value(&res.samples);
            let mut summary = json!({ "min_l_value": best.map(|b| b.1), "t_of_min": best.map(|b| b.0) });
            if let Some(unc) = &res.uncoupled {
                files.push((dir.join("global_uncoupled.csv"), global_csv(cfg, unc, noisy)));
                summary["uncoupled_min_l_value"] = json!(min_l_value(unc).map(|b| b.1));
            }
            summary
        }
        SchemeConfig::Local(l) => {
            let res = run_local_scheme(l)?;
            files.push((dir.join("local.csv"), local_csv(cfg, &res.samples)));
            json!({ "best_s_single": res.best.s_single, "t_of_best": res.best.t })
        }
        SchemeConfig::Sweep { spec, refine, per_point } => {
            let res = run_sweep(spec)?;
            files.push((dir.join("sweep.csv"), sweep_csv(cfg, &res)));
            if *per_point {
                let points: Vec<(PathBuf, String)> = spec
                    .grid
                    .par_iter()
                    .enumerate()
                    .map(|(i, &v)| {
                        let point = spec.config_at(v)?;
                        let samples = run_global_scheme(&point)?.samples;
                        Ok((dir.join(format!("point_{i:03}.csv")), global_csv(cfg, &samples, point.noise.is_some())))
                    })
                    .collect::<Result<_, Error>>()?;
                files.extend(points);
            }
            let mut summary = json!({
                "argmin": res.argmin,
                "best_value": res.argmin.map(|i| res.rows[i].value),
                "best_objective": res.argmin.and_then(|i| res.rows[i].objective),
            });
            if *refine {
                match refine_sweep(spec, &res) {
                    Ok((x, f)) => summary["refined"] = json!({ "value": x, "objective": f }),
                    Err(e) => summary["refine_error"] = json!(e.to_string()),
                }
            }
            summary
        }
    };
    for (path, contents) in &files {
        write(path, contents)?;
    }
    let metadata_file = dir.join("metadata.json");
    let csv_files: Vec<PathBuf> = files.into_iter().map(|(p, _)| p).collect();
    let metadata = json!({
        "schema_version": SCHEMA_VERSION,
        "version": VERSION,
        "scheme": cfg.scheme.kind().name(),
        "seed": cfg.seed,
        "config_hash": cfg.hash(),
        "config_text": cfg.to_text(),
        "config": cfg,
        "wall_time_seconds": started.elapsed().as_secs_f64(),
        "files": csv_files.iter().map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned())).collect::<Vec<_>>(),
        "summary": summary,
    });
    write(&metadata_file, &(serde_json::to_string_pretty(&metadata).expect("serializable") + "\n"))?;
    Ok(RunOutcome { csv_files, metadata_file, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn config(dir: &Path, extra: &str) -> RunConfig {
        let text = format!(
            "scheme = \"global\"\nmodel.n_atoms = 3\nmodel.tunneling_j = 1.0\nmodel.ec = 0.3\nevolution.dt = 0.01\nevolution.t_max = 0.1\noutput.dir = {:?}\n{extra}",
            dir.to_string_lossy()
        );
        parse_config(&text).unwrap()
    }

    fn data_rows(csv: &str) -> usize {
        csv.lines().filter(|l| !l.starts_with('#')).count() - 1
    }

    #[test]
    fn row_count_follows_stride() {
        let dir = tempfile::tempdir().unwrap();
        for stride in [1usize, 3, 4, 10, 11] {
            let cfg = config(dir.path(), &format!("evolution.sample_stride = {stride}\n"));
            let out = run(&cfg).unwrap();
            let csv = fs::read_to_string(&out.csv_files[0]).unwrap();
            assert_eq!(data_rows(&csv), 1 + 10usize.div_ceil(stride), "stride {stride}");
        }
    }

    #[test]
    fn header_is_self_describing() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path(), "");
        let out = run(&cfg).unwrap();
        let csv = fs::read_to_string(&out.csv_files[0]).unwrap();
        let first = csv.lines().next().unwrap();
        assert!(first.contains("schema=1") && first.contains(&cfg.hash()));
        assert_eq!(csv.lines().nth(1).unwrap(), GLOBAL_COLUMNS.join(","));
        let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.metadata_file).unwrap()).unwrap();
        assert_eq!(meta["config_hash"], cfg.hash());
        assert!(meta["wall_time_seconds"].as_f64().unwrap() >= 0.0);
    }

    #[test]
    fn noisy_runs_add_error_columns() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path(), "noise.diffusion_rate = 0.01\nnoise.n_trajectories = 4\n");
        let out = run(&cfg).unwrap();
        let csv = fs::read_to_string(&out.csv_files[0]).unwrap();
        let cols = csv.lines().nth(1).unwrap().split(',').count();
        assert_eq!(cols, GLOBAL_COLUMNS.len() + ERROR_COLUMNS.len());
        assert!(csv.lines().skip(2).all(|l| l.split(',').count() == cols));
    }

    #[test]
    fn error_codes() {
        assert_eq!(RunError::from(ConfigError { messages: vec!["x".into()] }).exit_code(), 2);
        assert_eq!(RunError::from(Error::StepRejected { estimate: 1.0, tolerance: 0.1 }).exit_code(), 3);
        assert_eq!(RunError::from(Error::InvalidParameter("x".into())).exit_code(), 2);
        let j = RunError::from(Error::NotConverged { iterations: 3, residual: 1.0 }).to_json();
        assert_eq!(j["error"], "numerical");
    }
}
