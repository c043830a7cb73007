//! Run configuration in flat dotted-key form, e.g.
//!
//! ```text
//! model.n_atoms = 10
//! model.tunneling_j = 1.0
//! model.ec = 0.5
//! evolution.t_max = 10.0
//! global.uncoupled_reference = true
//! ```
//!
//! The text is TOML, so `[model]` tables work too. Parsing reports every
//! problem it finds rather than stopping at the first.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::PathBuf;

use serde::Serialize;
use sha2::{Digest, Sha256};
use toml::Value;

use crate::dynamics::{RampKind, RampSchedule};
use crate::model::ModelParams;
use crate::noise::NoiseModel;
use crate::schemes::{GlobalSchemeConfig, LocalSchemeConfig};
use crate::sweep::{Objective, SweepAxis, SweepSpec};

pub const SCHEMA_VERSION: u32 = 1;
const DEFAULT_TRAJECTORIES: usize = 100;
const DEFAULT_OUTPUT_DIR: &str = "out";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub messages: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.messages.join("; "))
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    Global,
    Local,
    Sweep,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Global => "global",
            SchemeKind::Local => "local",
            SchemeKind::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "scheme", rename_all = "lowercase")]
pub enum SchemeConfig {
    Global(GlobalSchemeConfig),
    Local(LocalSchemeConfig),
    Sweep {
        spec: SweepSpec,
        /// Golden-section refinement around the grid optimum.
        refine: bool,
        /// Also write the time series of every grid point.
        per_point: bool,
    },
}

impl SchemeConfig {
    pub fn kind(&self) -> SchemeKind {
        match self {
            SchemeConfig::Global(_) => SchemeKind::Global,
            SchemeConfig::Local(_) => SchemeKind::Local,
            SchemeConfig::Sweep { .. } => SchemeKind::Sweep,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub scheme: SchemeConfig,
    pub output_dir: PathBuf,
    /// Master seed of the noise ensemble.
    pub seed: u64,
}

impl RunConfig {
    /// Replaces the seed everywhere it is used.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        let noise = match &mut self.scheme {
            SchemeConfig::Global(g) => g.noise.as_mut(),
            SchemeConfig::Sweep { spec, .. } => spec.template.noise.as_mut(),
            SchemeConfig::Local(_) => None,
        };
        if let Some(n) = noise {
            n.master_seed = seed;
        }
    }

    /// Canonical text with every key explicit; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let mut out = Vec::new();
        let mut put = |k: &str, v: String| out.push(format!("{k} = {v}"));
        put("scheme", quote(self.scheme.kind().name()));
        put("seed", if self.seed <= i64::MAX as u64 { self.seed.to_string() } else { quote(&self.seed.to_string()) });
        put("output.dir", quote(&self.output_dir.to_string_lossy()));
        let global_like = |cfg: &GlobalSchemeConfig, global: bool, put: &mut dyn FnMut(&str, String)| {
            let p = &cfg.params;
            put("model.n_atoms_a", p.n_atoms_a.to_string());
            put("model.n_atoms_b", p.n_atoms_b.to_string());
            put("model.tunneling_j", num(p.tunneling_j));
            put("model.ec_aa", num(p.ec_aa));
            put("model.ec_bb", num(p.ec_bb));
            put("model.ec_ab", num(p.ec_ab));
            let r = &cfg.ramp;
            put("ramp.kind", quote(ramp_kind_name(r.kind)));
            match r.kind {
                RampKind::Sudden => {}
                RampKind::Linear => {
                    put("ramp.j_initial", num(r.j_initial));
                    put("ramp.duration", num(r.ramp_duration));
                }
                RampKind::Piecewise => {
                    let knots: Vec<String> = r.knots.iter().map(|(t, j)| format!("[{}, {}]", num(*t), num(*j))).collect();
                    put("ramp.knots", format!("[{}]", knots.join(", ")));
                }
            }
            put("evolution.dt", num(cfg.dt));
            put("evolution.t_max", num(cfg.t_max));
            put("evolution.sample_stride", cfg.sample_stride.to_string());
            if let Some(n) = &cfg.noise {
                put("noise.xi", num(n.xi));
                put("noise.diffusion_rate", num(n.diffusion_rate));
                put("noise.n_trajectories", n.n_trajectories.to_string());
            }
            put("initial.theta", num(cfg.initial_theta));
            put("initial.phi", num(cfg.initial_phi));
            if global {
                put("global.uncoupled_reference", cfg.uncoupled_reference.to_string());
            }
        };
        match &self.scheme {
            SchemeConfig::Global(cfg) => global_like(cfg, true, &mut put),
            SchemeConfig::Local(cfg) => {
                put("local.n_atoms", cfg.n_atoms.to_string());
                put("local.chi", num(cfg.chi));
                put("local.t_hold", num(cfg.t_hold));
                put("evolution.dt", num(cfg.dt));
                put("evolution.sample_stride", cfg.sample_stride.to_string());
            }
            SchemeConfig::Sweep { spec, refine, per_point } => {
                global_like(&spec.template, false, &mut put);
                put("sweep.axis", quote(axis_name(spec.axis)));
                let grid: Vec<String> = spec.grid.iter().map(|v| num(*v)).collect();
                put("sweep.grid", format!("[{}]", grid.join(", ")));
                put("sweep.objective", quote(objective_name(spec.objective)));
                put("sweep.refine", refine.to_string());
                put("sweep.per_point", per_point.to_string());
            }
        }
        out.sort_by(|a, b| key_rank(a).cmp(&key_rank(b)).then_with(|| a.cmp(b)));
        out.join("\n") + "\n"
    }

    /// SHA-256 of the canonical text, leaving out the output directory.
    pub fn hash(&self) -> String {
        let text = self.to_text();
        let mut hasher = Sha256::new();
        for line in text.lines().filter(|l| !l.starts_with("output.")) {
            hasher.update(line.as_bytes());
            hasher.update(b"\n");
        }
        hex::encode(hasher.finalize())
    }
}

fn key_rank(line: &str) -> usize {
    ["scheme", "seed", "output.", "model.", "ramp.", "evolution.", "noise.", "initial.", "global.", "local.", "sweep."]
        .iter()
        .position(|p| line.starts_with(p))
        .unwrap_or(usize::MAX)
}

fn quote(s: &str) -> String {
    Value::String(s.to_string()).to_string()
}

/// Floats always carry a decimal point or exponent so they read back as floats.
fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:?}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn ramp_kind_name(kind: RampKind) -> &'static str {
    match kind {
        RampKind::Sudden => "sudden",
        RampKind::Linear => "linear",
        RampKind::Piecewise => "piecewise",
    }
}

pub fn axis_name(axis: SweepAxis) -> &'static str {
    match axis {
        SweepAxis::EcAll => "ec_all",
        SweepAxis::EcAb => "ec_ab",
        SweepAxis::TunnelingJ => "tunneling_j",
        SweepAxis::RampDuration => "ramp_duration",
        SweepAxis::Xi => "xi",
        SweepAxis::DiffusionRate => "diffusion_rate",
    }
}

fn objective_name(o: Objective) -> &'static str {
    match o {
        Objective::MinLValue => "min_l_value",
        Objective::MinEpsilon => "min_epsilon",
    }
}

const KNOWN_KEYS: &[&str] = &[
    "scheme",
    "seed",
    "output.dir",
    "model.n_atoms",
    "model.n_atoms_a",
    "model.n_atoms_b",
    "model.tunneling_j",
    "model.ec",
    "model.ec_aa",
    "model.ec_bb",
    "model.ec_ab",
    "ramp.kind",
    "ramp.j_initial",
    "ramp.duration",
    "ramp.knots",
    "evolution.dt",
    "evolution.t_max",
    "evolution.sample_stride",
    "noise.xi",
    "noise.diffusion_rate",
    "noise.n_trajectories",
    "initial.theta",
    "initial.phi",
    "global.uncoupled_reference",
    "local.n_atoms",
    "local.chi",
    "local.t_hold",
    "sweep.axis",
    "sweep.grid",
    "sweep.objective",
    "sweep.refine",
    "sweep.per_point",
];

struct Reader {
    values: BTreeMap<String, Value>,
    errors: Vec<String>,
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::String(_) => "string",
        Value::Integer(_) => "integer",
        Value::Float(_) => "float",
        Value::Boolean(_) => "boolean",
        Value::Datetime(_) => "datetime",
        Value::Array(_) => "array",
        Value::Table(_) => "table",
    }
}

impl Reader {
    fn has(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    fn section(&self, name: &str) -> bool {
        let prefix = format!("{name}.");
        self.values.keys().any(|k| k.starts_with(&prefix))
    }

    fn mismatch(&mut self, key: &str, expected: &str, got: &Value) {
        self.errors.push(format!("type mismatch for `{key}`: expected {expected}, got {}", type_name(got)));
    }

    fn missing(&mut self, key: &str) {
        self.errors.push(format!("missing required key `{key}`"));
    }

    fn float(&mut self, key: &str) -> Option<f64> {
        let v = self.values.get(key)?.clone();
        match v {
            Value::Float(f) => Some(f),
            Value::Integer(i) => Some(i as f64),
            other => {
                self.mismatch(key, "number", &other);
                None
            }
        }
    }

    fn count(&mut self, key: &str) -> Option<usize> {
        let v = self.values.get(key)?.clone();
        match v {
            Value::Integer(i) if i >= 0 => Some(i as usize),
            Value::Integer(i) => {
                self.errors.push(format!("`{key}` must be non-negative, got {i}"));
                None
            }
            other => {
                self.mismatch(key, "non-negative integer", &other);
                None
            }
        }
    }

    fn boolean(&mut self, key: &str) -> Option<bool> {
        let v = self.values.get(key)?.clone();
        match v {
            Value::Boolean(b) => Some(b),
            other => {
                self.mismatch(key, "boolean", &other);
                None
            }
        }
    }

    fn string(&mut self, key: &str) -> Option<String> {
        let v = self.values.get(key)?.clone();
        match v {
            Value::String(s) => Some(s),
            other => {
                self.mismatch(key, "string", &other);
                None
            }
        }
    }

    fn floats(&mut self, key: &str) -> Option<Vec<f64>> {
        let v = self.values.get(key)?.clone();
        let parsed = match &v {
            Value::Array(items) => items
                .iter()
                .map(|x| match x {
                    Value::Float(f) => Some(*f),
                    Value::Integer(i) => Some(*i as f64),
                    _ => None,
                })
                .collect::<Option<Vec<f64>>>(),
            _ => None,
        };
        if parsed.is_none() {
            self.mismatch(key, "array of numbers", &v);
        }
        parsed
    }

    fn knots(&mut self, key: &str) -> Option<Vec<(f64, f64)>> {
        let v = self.values.get(key)?.clone();
        let parsed = match &v {
            Value::Array(items) => items
                .iter()
                .map(|x| match x {
                    Value::Array(pair) if pair.len() == 2 => {
                        let f = |p: &Value| p.as_float().or_else(|| p.as_integer().map(|i| i as f64));
                        Some((f(&pair[0])?, f(&pair[1])?))
                    }
                    _ => None,
                })
                .collect::<Option<Vec<_>>>(),
            _ => None,
        };
        if parsed.is_none() {
            self.mismatch(key, "array of [t, J] pairs", &v);
        }
        parsed
    }

    fn required_float(&mut self, key: &str) -> Option<f64> {
        if !self.has(key) {
            self.missing(key);
            return None;
        }
        self.float(key)
    }

    fn seed(&mut self) -> Option<u64> {
        let v = self.values.get("seed")?.clone();
        match v {
            Value::Integer(i) if i >= 0 => Some(i as u64),
            Value::String(s) => s.parse().map_err(|_| self.errors.push(format!("`seed` is not a u64: {s:?}"))).ok(),
            other => {
                self.mismatch("seed", "non-negative integer", &other);
                None
            }
        }
    }

    /// Value of `key`, or of `shorthand` (applied to several keys); both is an error.
    fn with_shorthand<T>(&mut self, key: &str, shorthand: &str, get: impl Fn(&mut Self, &str) -> Option<T>) -> Option<T> {
        match (self.has(key), self.has(shorthand)) {
            (true, true) => {
                self.errors.push(format!("conflicting keys `{shorthand}` and `{key}`"));
                None
            }
            (true, false) => get(self, key),
            (false, true) => get(self, shorthand),
            (false, false) => None,
        }
    }
}

fn parse_model(r: &mut Reader) -> Option<ModelParams> {
    let n_a = r.with_shorthand("model.n_atoms_a", "model.n_atoms", Reader::count);
    let n_b = r.with_shorthand("model.n_atoms_b", "model.n_atoms", Reader::count);
    if n_a.is_none() && !r.has("model.n_atoms_a") && !r.has("model.n_atoms") {
        r.missing("model.n_atoms");
    }
    let j = r.required_float("model.tunneling_j");
    let ec = |r: &mut Reader, key: &str| {
        let v = r.with_shorthand(key, "model.ec", Reader::float);
        if v.is_none() && !r.has(key) && !r.has("model.ec") {
            r.missing("model.ec");
        }
        v
    };
    let (aa, bb, ab) = (ec(r, "model.ec_aa"), ec(r, "model.ec_bb"), ec(r, "model.ec_ab"));
    Some(ModelParams { n_atoms_a: n_a?, n_atoms_b: n_b?, tunneling_j: j?, ec_aa: aa?, ec_bb: bb?, ec_ab: ab? })
}

fn parse_ramp(r: &mut Reader, j_final: Option<f64>) -> Option<RampSchedule> {
    let kind = r.string("ramp.kind").unwrap_or_else(|| "sudden".into());
    let j_final = j_final?;
    let built = match kind.as_str() {
        "sudden" => {
            for key in ["ramp.j_initial", "ramp.duration", "ramp.knots"] {
                if r.has(key) {
                    r.errors.push(format!("`{key}` does not apply to a sudden ramp"));
                }
            }
            Ok(RampSchedule::sudden(j_final))
        }
        "linear" => {
            let j0 = r.required_float("ramp.j_initial");
            let dur = r.required_float("ramp.duration");
            RampSchedule::linear(j0?, j_final, dur?)
        }
        "piecewise" => {
            if !r.has("ramp.knots") {
                r.missing("ramp.knots");
            }
            let knots = r.knots("ramp.knots")?;
            match knots.last() {
                Some(&(_, j_end)) if j_end != j_final => {
                    r.errors.push(format!("last ramp knot J = {j_end} differs from model.tunneling_j = {j_final}"));
                    return None;
                }
                _ => RampSchedule::piecewise(knots),
            }
        }
        other => {
            r.errors.push(format!("`ramp.kind` must be sudden, linear or piecewise, got {other:?}"));
            return None;
        }
    };
    built.map_err(|e| r.errors.push(format!("ramp: {e}"))).ok()
}

fn parse_noise(r: &mut Reader, seed: u64) -> Option<Option<NoiseModel>> {
    if !r.section("noise") {
        return Some(None);
    }
    let xi = r.float("noise.xi").unwrap_or(0.0);
    let d = r.required_float("noise.diffusion_rate");
    let k = r.count("noise.n_trajectories").unwrap_or(DEFAULT_TRAJECTORIES);
    let model = NoiseModel { xi, diffusion_rate: d?, n_trajectories: k, master_seed: seed };
    model.validate().map_err(|e| r.errors.push(format!("noise: {e}"))).ok()?;
    Some(Some(model))
}

fn parse_global(r: &mut Reader, seed: u64, global: bool) -> Option<GlobalSchemeConfig> {
    let params = parse_model(r);
    let ramp = parse_ramp(r, params.map(|p| p.tunneling_j));
    let noise = parse_noise(r, seed);
    let t_max = r.required_float("evolution.t_max");
    let dt = r.float("evolution.dt");
    let stride = r.count("evolution.sample_stride").unwrap_or(1);
    let theta = r.float("initial.theta");
    let phi = r.float("initial.phi");
    let uncoupled = if global { r.boolean("global.uncoupled_reference").unwrap_or(false) } else { false };
    let params = params?;
    let cfg = GlobalSchemeConfig {
        dt: dt.unwrap_or_else(|| params.default_dt()),
        sample_stride: stride,
        noise: noise?,
        initial_theta: theta.unwrap_or(std::f64::consts::FRAC_PI_2),
        initial_phi: phi.unwrap_or(0.0),
        uncoupled_reference: uncoupled,
        ..GlobalSchemeConfig::new(params, ramp?, 0.0, t_max?)
    };
    cfg.validate().map_err(|e| r.errors.push(e.to_string())).ok()?;
    Some(cfg)
}

fn parse_local(r: &mut Reader) -> Option<LocalSchemeConfig> {
    let n = r.count("local.n_atoms");
    if !r.has("local.n_atoms") {
        r.missing("local.n_atoms");
    }
    let chi = if r.has("local.chi") {
        r.float("local.chi")
    } else if r.section("model") {
        let aa = r.required_float("model.ec_aa");
        let bb = r.required_float("model.ec_bb");
        let ab = r.required_float("model.ec_ab");
        Some(LocalSchemeConfig::chi_from_charging(aa?, bb?, ab?))
    } else {
        r.missing("local.chi");
        None
    };
    let t_hold = r.required_float("local.t_hold");
    let dt = r.float("evolution.dt");
    let stride = r.count("evolution.sample_stride").unwrap_or(1);
    let foreign: Vec<String> = r
        .values
        .keys()
        .filter(|k| {
            ["model.n_atoms", "model.tunneling_j", "model.ec", "ramp.", "noise.", "initial.", "evolution.t_max"]
                .iter()
                .any(|p| k.as_str() == *p || (p.ends_with('.') || *p == "model.n_atoms") && k.starts_with(p))
        })
        .cloned()
        .collect();
    for key in foreign {
        r.errors.push(format!("`{key}` does not apply to the local scheme"));
    }
    let (n, chi, t_hold) = (n?, chi?, t_hold?);
    let cfg = LocalSchemeConfig {
        n_atoms: n,
        chi,
        dt: dt.unwrap_or_else(|| local_default_dt(n, chi, t_hold)),
        t_hold,
        sample_stride: stride,
    };
    cfg.validate().map_err(|e| r.errors.push(e.to_string())).ok()?;
    Some(cfg)
}

/// `0.01 / (|χ| N)`, the fastest twisting frequency, capped at a hundredth of `t_hold`.
fn local_default_dt(n_atoms: usize, chi: f64, t_hold: f64) -> f64 {
    let rate = chi.abs() * n_atoms as f64;
    let by_rate = if rate > 0.0 { 0.01 / rate } else { f64::INFINITY };
    let by_hold = if t_hold > 0.0 { t_hold / 100.0 } else { 0.01 };
    by_rate.min(by_hold)
}

fn parse_axis(s: &str) -> Option<SweepAxis> {
    [SweepAxis::EcAll, SweepAxis::EcAb, SweepAxis::TunnelingJ, SweepAxis::RampDuration, SweepAxis::Xi, SweepAxis::DiffusionRate]
        .into_iter()
        .find(|a| axis_name(*a) == s)
}

fn parse_sweep(r: &mut Reader, seed: u64) -> Option<SchemeConfig> {
    let template = parse_global(r, seed, false);
    let axis = match r.string("sweep.axis") {
        Some(s) => parse_axis(&s).or_else(|| {
            r.errors.push(format!("unknown sweep axis {s:?}"));
            None
        }),
        None => {
            if !r.has("sweep.axis") {
                r.missing("sweep.axis");
            }
            None
        }
    };
    if !r.has("sweep.grid") {
        r.missing("sweep.grid");
    }
    let grid = r.floats("sweep.grid");
    let objective = match r.string("sweep.objective").as_deref() {
        None | Some("min_l_value") => Some(Objective::MinLValue),
        Some("min_epsilon") => Some(Objective::MinEpsilon),
        Some(other) => {
            r.errors.push(format!("unknown sweep objective {other:?}"));
            None
        }
    };
    let refine = r.boolean("sweep.refine").unwrap_or(false);
    let per_point = r.boolean("sweep.per_point").unwrap_or(false);
    let spec = SweepSpec { axis: axis?, grid: grid?, objective: objective?, template: template? };
    spec.validate().map_err(|e| r.errors.push(e.to_string())).ok()?;
    Some(SchemeConfig::Sweep { spec, refine, per_point })
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError { messages: vec![format!("syntax: {}", e.message())] })?;
    let mut values = BTreeMap::new();
    flatten("", &table, &mut values);
    let mut r = Reader { values, errors: Vec::new() };

    let known: BTreeSet<&str> = KNOWN_KEYS.iter().copied().collect();
    for key in r.values.keys() {
        if !known.contains(key.as_str()) {
            r.errors.push(format!("unknown key `{key}`"));
        }
    }

    let present: Vec<SchemeKind> =
        [SchemeKind::Global, SchemeKind::Local, SchemeKind::Sweep].into_iter().filter(|k| r.section(k.name())).collect();
    let declared = match r.string("scheme").as_deref() {
        None => None,
        Some("global") => Some(SchemeKind::Global),
        Some("local") => Some(SchemeKind::Local),
        Some("sweep") => Some(SchemeKind::Sweep),
        Some(other) => {
            r.errors.push(format!("`scheme` must be global, local or sweep, got {other:?}"));
            None
        }
    };
    if present.len() > 1 {
        let names: Vec<&str> = present.iter().map(|k| k.name()).collect();
        r.errors.push(format!("conflicting scheme sections: {}", names.join(" and ")));
    }
    if let (Some(d), Some(p)) = (declared, present.first()) {
        if present.len() == 1 && d != *p {
            r.errors.push(format!("conflicting scheme sections: scheme = {:?} but section `{}` is present", d.name(), p.name()));
        }
    }
    let kind = declared.or_else(|| (present.len() == 1).then(|| present[0]));
    if declared.is_none() && present.is_empty() && !r.has("scheme") {
        r.errors.push("no scheme: set `scheme` or provide a global, local or sweep section".into());
    }

    let seed = r.seed().unwrap_or(0);
    let output_dir = PathBuf::from(r.string("output.dir").unwrap_or_else(|| DEFAULT_OUTPUT_DIR.into()));
    let scheme = match kind {
        Some(SchemeKind::Global) => parse_global(&mut r, seed, true).map(SchemeConfig::Global),
        Some(SchemeKind::Local) => parse_local(&mut r).map(SchemeConfig::Local),
        Some(SchemeKind::Sweep) => parse_sweep(&mut r, seed),
        None => None,
    };
    match scheme {
        Some(scheme) if r.errors.is_empty() => Ok(RunConfig { scheme, output_dir, seed }),
        _ => {
            if r.errors.is_empty() {
                r.errors.push("invalid configuration".into());
            }
            Err(ConfigError { messages: r.errors })
        }
    }
}
