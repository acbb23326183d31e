//! Run configuration: TOML files, flat JSON manifests and command-line
//! overrides, layered over the reference parameter set.
//!
//! Frequencies are plain numbers in MHz (used as rad/μs) or strings with a
//! `MHz`/`kHz` suffix. Times are plain numbers in μs or strings with a
//! `us`/`μs`/`ms`/`tau` suffix; `tau` multiples resolve against the final τ.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde_json::Value;
use stirap_core::model::{REFERENCE_DENSITY, REFERENCE_OMEGA0, REFERENCE_OMEGA0_TAU, RB87_INTERACTIONS};
use stirap_core::stability::JacobianMethod;
use stirap_core::{collision_rates_from_density, EvolveOptions, ModelError, Params, StabilityOptions};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {path}: {reason}")]
    Parse { path: PathBuf, reason: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("`{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("`{0}` and `{1}` describe the same quantity; give only one")]
    Conflict(String, String),
}

impl ConfigError {
    fn invalid(key: &str, reason: impl Into<String>) -> Self {
        ConfigError::Invalid { key: key.to_string(), reason: reason.into() }
    }
}

impl From<ModelError> for ConfigError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::InvalidParameter { name, reason } => ConfigError::invalid(name, reason),
            other => ConfigError::invalid("params", other.to_string()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Frequency,
    Time,
    Number,
    Integer,
    Bool,
    Text,
    TimeList,
}

/// Every accepted key. Keys with a `meta_` or `result_` prefix are output
/// only and skipped on input.
const KEYS: &[(&str, Kind)] = &[
    ("omega0", Kind::Frequency),
    ("tau", Kind::Time),
    ("omega0_tau", Kind::Number),
    ("t1", Kind::Time),
    ("t2", Kind::Time),
    ("delta1", Kind::Frequency),
    ("delta1_over_gamma_b", Kind::Number),
    ("gamma_b", Kind::Frequency),
    ("lambda_aa", Kind::Frequency),
    ("lambda_ag", Kind::Frequency),
    ("lambda_gg", Kind::Frequency),
    ("density", Kind::Number),
    ("u_aa", Kind::Number),
    ("u_ag", Kind::Number),
    ("u_gg", Kind::Number),
    ("reltol", Kind::Number),
    ("abstol", Kind::Number),
    ("samples", Kind::Integer),
    ("t_start", Kind::Time),
    ("t_end", Kind::Time),
    ("alt_gamma_b", Kind::Number),
    ("eta_target", Kind::Number),
    ("eta_tolerance", Kind::Number),
    ("cpt_ratio_min", Kind::Number),
    ("cpt_ratio_max", Kind::Number),
    ("cpt_points", Kind::Integer),
    ("map_ratio_min", Kind::Number),
    ("map_ratio_max", Kind::Number),
    ("map_ratio_points", Kind::Integer),
    ("map_detuning_min", Kind::Number),
    ("map_detuning_max", Kind::Number),
    ("map_detuning_points", Kind::Integer),
    ("map_include_decay", Kind::Bool),
    ("map_threshold", Kind::Number),
    ("map_jacobian", Kind::Text),
    ("sweep_delta1_over_gamma_b_min", Kind::Number),
    ("sweep_delta1_over_gamma_b_max", Kind::Number),
    ("sweep_delta1_points", Kind::Integer),
    ("sweep_t1", Kind::TimeList),
    ("opt_delta1_min", Kind::Frequency),
    ("opt_delta1_max", Kind::Frequency),
    ("opt_delay_min", Kind::Time),
    ("opt_delay_max", Kind::Time),
    ("opt_budget", Kind::Integer),
    ("threads", Kind::Integer),
];

/// Alternative spellings of one quantity. Within one layer only one side may
/// appear; a later layer setting either side replaces the other.
const EXCLUSIVE: &[(&[&str], &[&str])] = &[
    (&["delta1"], &["delta1_over_gamma_b"]),
    (&["tau"], &["omega0_tau"]),
    (&["lambda_aa", "lambda_ag", "lambda_gg"], &["density", "u_aa", "u_ag", "u_gg"]),
];

fn kind_of(key: &str) -> Option<Kind> {
    KEYS.iter().find(|(k, _)| *k == key).map(|&(_, kind)| kind)
}

fn is_output_key(key: &str) -> bool {
    key.starts_with("meta_") || key.starts_with("result_")
}

/// One source of settings (file, `--set`, or a dedicated flag).
#[derive(Clone, Debug, Default)]
pub struct Layer {
    values: BTreeMap<String, Value>,
}

impl Layer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `key = value`; the value is kept raw until resolution.
    pub fn set(&mut self, key: &str, value: Value) -> Result<(), ConfigError> {
        if is_output_key(key) {
            return Ok(());
        }
        if kind_of(key).is_none() {
            return Err(ConfigError::UnknownKey(key.to_string()));
        }
        self.values.insert(key.to_string(), value);
        Ok(())
    }

    /// Parses `key=value` where the value uses TOML syntax; a bare word that
    /// is not valid TOML is taken as a string (so `--set t1=3.0tau` works).
    pub fn set_assignment(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| ConfigError::invalid(assignment, "expected KEY=VALUE"))?;
        let key = key.trim();
        let raw = raw.trim();
        let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
            Ok(mut t) => toml_to_json(t.remove("v").expect("key present")),
            Err(_) => Value::String(raw.to_string()),
        };
        self.set(key, value)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        let parse_err = |reason: String| ConfigError::Parse { path: path.to_path_buf(), reason };
        let object = if path.extension().is_some_and(|e| e == "json") {
            match serde_json::from_str::<Value>(&text).map_err(|e| parse_err(e.to_string()))? {
                Value::Object(m) => m,
                _ => return Err(parse_err("expected a flat JSON object".into())),
            }
        } else {
            let table: toml::Table = toml::from_str(&text).map_err(|e| parse_err(e.to_string()))?;
            match toml_to_json(toml::Value::Table(table)) {
                Value::Object(m) => m,
                _ => unreachable!("a table converts to an object"),
            }
        };
        let mut layer = Layer::new();
        for (k, v) in object {
            if v.is_object() {
                return Err(ConfigError::invalid(&k, "nested tables are not supported; use flat keys"));
            }
            layer.set(&k, v)?;
        }
        layer.check_exclusive()?;
        Ok(layer)
    }

    fn check_exclusive(&self) -> Result<(), ConfigError> {
        for (left, right) in EXCLUSIVE {
            let l = left.iter().find(|k| self.values.contains_key(**k));
            let r = right.iter().find(|k| self.values.contains_key(**k));
            if let (Some(l), Some(r)) = (l, r) {
                return Err(ConfigError::Conflict(l.to_string(), r.to_string()));
            }
        }
        Ok(())
    }
}

fn toml_to_json(v: toml::Value) -> Value {
    match v {
        toml::Value::String(s) => Value::String(s),
        toml::Value::Integer(i) => Value::from(i),
        toml::Value::Float(f) => serde_json::Number::from_f64(f).map(Value::Number).unwrap_or(Value::Null),
        toml::Value::Boolean(b) => Value::Bool(b),
        toml::Value::Datetime(d) => Value::String(d.to_string()),
        toml::Value::Array(a) => Value::Array(a.into_iter().map(toml_to_json).collect()),
        toml::Value::Table(t) => Value::Object(t.into_iter().map(|(k, v)| (k, toml_to_json(v))).collect()),
    }
}

/// Merges layers in order, later ones winning.
pub fn merge(layers: &[Layer]) -> Result<BTreeMap<String, Value>, ConfigError> {
    let mut out: BTreeMap<String, Value> = BTreeMap::new();
    for layer in layers {
        layer.check_exclusive()?;
        for (left, right) in EXCLUSIVE {
            let touches = |side: &[&str]| side.iter().any(|k| layer.values.contains_key(*k));
            if touches(left) {
                right.iter().for_each(|k| {
                    out.remove(*k);
                });
            }
            if touches(right) {
                left.iter().for_each(|k| {
                    out.remove(*k);
                });
            }
        }
        out.extend(layer.values.iter().map(|(k, v)| (k.clone(), v.clone())));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        stirap_core::linspace(self.min, self.max, self.points)
    }
}

/// Fully resolved, validated settings for every subcommand.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub params: Params,
    pub evolve: EvolveOptions<f64>,
    pub t_start: f64,
    pub t_end: f64,
    /// Extra `γ_b` values to re-run `evolve` with, `Δ₁/γ_b` held fixed.
    pub alt_gamma_b: Vec<f64>,
    /// `evolve` reports which decay rates land within `eta_tolerance` of this.
    pub eta_target: Option<f64>,
    pub eta_tolerance: f64,
    pub cpt_ratio: Axis,
    pub map_ratio: Axis,
    pub map_detuning: Axis,
    pub stability: StabilityOptions<f64>,
    pub sweep_delta1_over_gamma_b: Axis,
    pub sweep_t1: Vec<f64>,
    pub opt_delta1: (f64, f64),
    pub opt_delay: (f64, f64),
    pub opt_budget: usize,
    pub threads: Option<usize>,
}

struct Resolver<'a> {
    values: &'a BTreeMap<String, Value>,
    tau: Option<f64>,
}

impl Resolver<'_> {
    fn has(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    fn quantity(&self, key: &str, value: &Value) -> Result<f64, ConfigError> {
        let kind = kind_of(key).expect("key table checked on insert");
        let x = match value {
            Value::Number(n) => n.as_f64().ok_or_else(|| ConfigError::invalid(key, "not a number"))?,
            Value::String(s) => self.with_unit(key, kind, s)?,
            _ => return Err(ConfigError::invalid(key, format!("expected a number, got {value}"))),
        };
        if !x.is_finite() {
            return Err(ConfigError::invalid(key, "must be finite"));
        }
        Ok(x)
    }

    fn with_unit(&self, key: &str, kind: Kind, s: &str) -> Result<f64, ConfigError> {
        let s = s.trim();
        let split = s
            .find(|c: char| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')))
            .unwrap_or(s.len());
        let (num, unit) = s.split_at(split);
        let x: f64 = num.trim().parse().map_err(|_| ConfigError::invalid(key, format!("cannot read a number from `{s}`")))?;
        let unit = unit.trim();
        let scale = match (kind, unit) {
            (_, "") => 1.0,
            (Kind::Frequency, "MHz") => 1.0,
            (Kind::Frequency, "kHz") => 1e-3,
            (Kind::Time | Kind::TimeList, "us" | "μs" | "µs") => 1.0,
            (Kind::Time | Kind::TimeList, "ms") => 1e3,
            (Kind::Time | Kind::TimeList, "tau" | "τ") => {
                self.tau.ok_or_else(|| ConfigError::invalid(key, "τ is not known yet"))?
            }
            (Kind::Frequency, _) => return Err(ConfigError::invalid(key, format!("unknown frequency unit `{unit}` (MHz or kHz)"))),
            (Kind::Time | Kind::TimeList, _) => {
                return Err(ConfigError::invalid(key, format!("unknown time unit `{unit}` (us, ms or tau)")))
            }
            _ => return Err(ConfigError::invalid(key, format!("takes no unit, got `{unit}`"))),
        };
        Ok(x * scale)
    }

    fn num(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.values.get(key) {
            Some(v) => self.quantity(key, v),
            None => Ok(default),
        }
    }

    fn int(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.values.get(key) {
            None => Ok(default),
            Some(Value::Number(n)) => n
                .as_u64()
                .map(|x| x as usize)
                .ok_or_else(|| ConfigError::invalid(key, "expected a non-negative integer")),
            Some(other) => Err(ConfigError::invalid(key, format!("expected an integer, got {other}"))),
        }
    }

    fn boolean(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.values.get(key) {
            None => Ok(default),
            Some(Value::Bool(b)) => Ok(*b),
            Some(other) => Err(ConfigError::invalid(key, format!("expected true or false, got {other}"))),
        }
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.values.get(key) {
            None => Ok(None),
            Some(Value::Array(items)) => items.iter().map(|v| self.quantity(key, v)).collect::<Result<_, _>>().map(Some),
            Some(single) => Ok(Some(vec![self.quantity(key, single)?])),
        }
    }
}

fn positive(key: &str, x: f64) -> Result<f64, ConfigError> {
    if x > 0.0 {
        Ok(x)
    } else {
        Err(ConfigError::invalid(key, format!("must be positive, got {x}")))
    }
}

fn axis(r: &Resolver, prefix: &str, points_key: &str, default: Axis, min_points: usize) -> Result<Axis, ConfigError> {
    let min_key = format!("{prefix}_min");
    let max_key = format!("{prefix}_max");
    let a = Axis { min: r.num(&min_key, default.min)?, max: r.num(&max_key, default.max)?, points: r.int(points_key, default.points)? };
    if a.points < min_points {
        return Err(ConfigError::invalid(points_key, format!("need at least {min_points} point(s)")));
    }
    if a.points > 1 && !(a.min < a.max) {
        return Err(ConfigError::invalid(&max_key, format!("must exceed {min_key}")));
    }
    Ok(a)
}

impl RunConfig {
    /// The reference configuration (no overrides).
    pub fn reference() -> Self {
        Self::resolve(&BTreeMap::new()).expect("defaults are valid")
    }

    pub fn from_layers(layers: &[Layer]) -> Result<Self, ConfigError> {
        Self::resolve(&merge(layers)?)
    }

    pub fn resolve(values: &BTreeMap<String, Value>) -> Result<Self, ConfigError> {
        let mut r = Resolver { values, tau: None };

        let omega0 = positive("omega0", r.num("omega0", REFERENCE_OMEGA0)?)?;
        let tau = if r.has("tau") {
            positive("tau", r.num("tau", 0.0)?)?
        } else {
            positive("omega0_tau", r.num("omega0_tau", REFERENCE_OMEGA0_TAU)?)? / omega0
        };
        r.tau = Some(tau);

        let gamma_b = r.num("gamma_b", stirap_core::model::REFERENCE_GAMMA_B)?;
        if gamma_b < 0.0 {
            return Err(ConfigError::invalid("gamma_b", "must be non-negative"));
        }
        let delta1 = if r.has("delta1") { r.num("delta1", 0.0)? } else { r.num("delta1_over_gamma_b", -1.4)? * gamma_b };

        let (lambda_aa, lambda_ag, lambda_gg) = if ["lambda_aa", "lambda_ag", "lambda_gg"].iter().any(|k| r.has(k)) {
            let reference = Params::reference();
            (
                r.num("lambda_aa", reference.lambda_aa)?,
                r.num("lambda_ag", reference.lambda_ag)?,
                r.num("lambda_gg", reference.lambda_gg)?,
            )
        } else {
            let (u_aa, u_ag, u_gg) = RB87_INTERACTIONS;
            let rho = r.num("density", REFERENCE_DENSITY)?;
            collision_rates_from_density(rho, r.num("u_aa", u_aa)?, r.num("u_ag", u_ag)?, r.num("u_gg", u_gg)?)
                .map_err(|e| ConfigError::invalid("density", e.to_string()))?
        };

        let t2 = r.num("t2", 2.5 * tau)?;
        let t1 = r.num("t1", 3.77 * tau)?;
        let params = Params { omega0, tau, t1, t2, delta1, gamma_b, lambda_aa, lambda_ag, lambda_gg };
        params.validate()?;

        let reltol = positive("reltol", r.num("reltol", 1e-9)?)?;
        let abstol = positive("abstol", r.num("abstol", 1e-12)?)?;
        let samples = r.int("samples", 2000)?;
        if samples < 2 {
            return Err(ConfigError::invalid("samples", "need at least 2"));
        }
        let (w0, w1) = stirap_core::default_window(&params);
        let t_start = r.num("t_start", w0)?;
        let t_end = r.num("t_end", w1)?;
        if !(t_end > t_start) {
            return Err(ConfigError::invalid("t_end", "must exceed t_start"));
        }

        let alt_gamma_b = r.list("alt_gamma_b")?.unwrap_or_default();
        if let Some(g) = alt_gamma_b.iter().find(|g| **g < 0.0) {
            return Err(ConfigError::invalid("alt_gamma_b", format!("must be non-negative, got {g}")));
        }

        let eta_target = if r.has("eta_target") { Some(r.num("eta_target", 0.0)?) } else { None };
        let eta_tolerance = r.num("eta_tolerance", 0.04)?;
        if eta_tolerance < 0.0 {
            return Err(ConfigError::invalid("eta_tolerance", "must be non-negative"));
        }

        let cpt_ratio = axis(&r, "cpt_ratio", "cpt_points", Axis { min: 0.0, max: 10.0, points: 201 }, 1)?;
        if cpt_ratio.min < 0.0 {
            return Err(ConfigError::invalid("cpt_ratio_min", "ratios are non-negative"));
        }
        let map_ratio = axis(&r, "map_ratio", "map_ratio_points", Axis { min: 0.01, max: 3.0, points: 200 }, 1)?;
        if !(map_ratio.min > 0.0) {
            return Err(ConfigError::invalid("map_ratio_min", "Ω₂/Ω₁ must be positive"));
        }
        let map_detuning = axis(&r, "map_detuning", "map_detuning_points", Axis { min: -1.5, max: 1.5, points: 200 }, 1)?;
        let method = match r.values.get("map_jacobian") {
            None => JacobianMethod::FiniteDifference,
            Some(Value::String(s)) if s == "finite-difference" => JacobianMethod::FiniteDifference,
            Some(Value::String(s)) if s == "analytic" => JacobianMethod::Analytic,
            Some(other) => return Err(ConfigError::invalid("map_jacobian", format!("expected \"finite-difference\" or \"analytic\", got {other}"))),
        };
        let stability = StabilityOptions {
            include_decay: r.boolean("map_include_decay", false)?,
            threshold: positive("map_threshold", r.num("map_threshold", 1e-6)?)?,
            method,
            ..StabilityOptions::default()
        };

        let sweep_delta1_over_gamma_b =
            axis(&r, "sweep_delta1_over_gamma_b", "sweep_delta1_points", Axis { min: -3.0, max: 1.0, points: 41 }, 1)?;
        let sweep_t1 = r.list("sweep_t1")?.unwrap_or_else(|| vec![3.0 * tau, 3.77 * tau, 4.5 * tau]);
        if sweep_t1.is_empty() {
            return Err(ConfigError::invalid("sweep_t1", "needs at least one value"));
        }

        let opt_delta1 = (r.num("opt_delta1_min", -3.0 * gamma_b)?, r.num("opt_delta1_max", 0.0)?);
        let opt_delay = (r.num("opt_delay_min", 0.5 * tau)?, r.num("opt_delay_max", 2.0 * tau)?);
        if opt_delta1.0 > opt_delta1.1 {
            return Err(ConfigError::invalid("opt_delta1_max", "must not be below opt_delta1_min"));
        }
        if opt_delay.0 > opt_delay.1 {
            return Err(ConfigError::invalid("opt_delay_max", "must not be below opt_delay_min"));
        }
        let opt_budget = r.int("opt_budget", 100)?;
        if opt_budget < 9 {
            return Err(ConfigError::invalid("opt_budget", "must be at least 9"));
        }
        let threads = match r.int("threads", 0)? {
            0 => None,
            n => Some(n),
        };

        Ok(RunConfig {
            params,
            evolve: EvolveOptions { reltol, abstol, samples },
            t_start,
            t_end,
            alt_gamma_b,
            eta_target,
            eta_tolerance,
            cpt_ratio,
            map_ratio,
            map_detuning,
            stability,
            sweep_delta1_over_gamma_b,
            sweep_t1,
            opt_delta1,
            opt_delay,
            opt_budget,
            threads,
        })
    }

    /// Every resolved setting as a flat record in base units (MHz, μs).
    /// Feeding it back through [`Layer::from_file`] gives the same config.
    pub fn to_record(&self) -> BTreeMap<String, Value> {
        let p = &self.params;
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: Value| {
            m.insert(k.to_string(), v);
        };
        let f = |x: f64| Value::from(x);
        put("omega0", f(p.omega0));
        put("tau", f(p.tau));
        put("t1", f(p.t1));
        put("t2", f(p.t2));
        put("delta1", f(p.delta1));
        put("gamma_b", f(p.gamma_b));
        put("lambda_aa", f(p.lambda_aa));
        put("lambda_ag", f(p.lambda_ag));
        put("lambda_gg", f(p.lambda_gg));
        put("reltol", f(self.evolve.reltol));
        put("abstol", f(self.evolve.abstol));
        put("samples", Value::from(self.evolve.samples));
        put("t_start", f(self.t_start));
        put("t_end", f(self.t_end));
        put("alt_gamma_b", Value::from(self.alt_gamma_b.clone()));
        if let Some(x) = self.eta_target {
            put("eta_target", f(x));
        }
        put("eta_tolerance", f(self.eta_tolerance));
        for (prefix, points, a) in [
            ("cpt_ratio", "cpt_points", self.cpt_ratio),
            ("map_ratio", "map_ratio_points", self.map_ratio),
            ("map_detuning", "map_detuning_points", self.map_detuning),
            ("sweep_delta1_over_gamma_b", "sweep_delta1_points", self.sweep_delta1_over_gamma_b),
        ] {
            put(&format!("{prefix}_min"), f(a.min));
            put(&format!("{prefix}_max"), f(a.max));
            put(points, Value::from(a.points));
        }
        put("map_include_decay", Value::Bool(self.stability.include_decay));
        put("map_threshold", f(self.stability.threshold));
        put(
            "map_jacobian",
            Value::from(match self.stability.method {
                JacobianMethod::FiniteDifference => "finite-difference",
                JacobianMethod::Analytic => "analytic",
            }),
        );
        put("sweep_t1", Value::from(self.sweep_t1.clone()));
        put("opt_delta1_min", f(self.opt_delta1.0));
        put("opt_delta1_max", f(self.opt_delta1.1));
        put("opt_delay_min", f(self.opt_delay.0));
        put("opt_delay_max", f(self.opt_delay.1));
        put("opt_budget", Value::from(self.opt_budget));
        put("threads", Value::from(self.threads.unwrap_or(0)));
        m
    }
}
