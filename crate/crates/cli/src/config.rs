//! Flat `key = value` configuration: per-subcommand key schemas, parsing
//! with line numbers, and layering of defaults, file and flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use pp04::{Forcing, ModelParams};

/// A resolved configuration value.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Text(String),
}

impl Value {
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Value::Num(x) => serde_json::json!(x),
            Value::Text(s) => serde_json::json!(s),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(x) => write!(f, "{x}"),
            Value::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Kind {
    /// Real number in `lo..hi`; `open_lo` excludes the lower end.
    Real {
        lo: f64,
        hi: f64,
        open_lo: bool,
    },
    /// Whole number in `lo..=hi`.
    Int {
        lo: i64,
        hi: i64,
    },
    Choice(&'static [&'static str]),
}

impl Kind {
    const ANY: Kind = Kind::Real { lo: f64::NEG_INFINITY, hi: f64::INFINITY, open_lo: false };
    const POSITIVE: Kind = Kind::Real { lo: 0.0, hi: f64::INFINITY, open_lo: true };
    const NON_NEGATIVE: Kind = Kind::Real { lo: 0.0, hi: f64::INFINITY, open_lo: false };

    fn describe(&self) -> String {
        match *self {
            Kind::Real { lo, hi, open_lo } => match (lo.is_finite(), hi.is_finite()) {
                (false, false) => "a finite number".into(),
                (true, false) if open_lo => format!("a number > {lo}"),
                (true, false) => format!("a number ≥ {lo}"),
                (true, true) if open_lo => format!("a number in ({lo}, {hi}]"),
                _ => format!("a number in [{lo}, {hi}]"),
            },
            Kind::Int { lo, hi } if hi == i64::MAX => format!("an integer ≥ {lo}"),
            Kind::Int { lo, hi } => format!("an integer in [{lo}, {hi}]"),
            Kind::Choice(opts) => format!("one of {}", opts.join(", ")),
        }
    }

    /// Check a raw value. `Err(true)` means well-formed but out of range.
    fn accept(&self, raw: &Value) -> Result<Value, bool> {
        match (self, raw) {
            (Kind::Real { lo, hi, open_lo }, Value::Num(x)) => {
                let above = if *open_lo { *x > *lo } else { *x >= *lo };
                if x.is_finite() && above && *x <= *hi {
                    Ok(Value::Num(*x))
                } else {
                    Err(true)
                }
            }
            (Kind::Int { lo, hi }, Value::Num(x)) => {
                if x.fract() != 0.0 || !x.is_finite() {
                    Err(false)
                } else if *x >= *lo as f64 && *x <= *hi as f64 {
                    Ok(Value::Num(*x))
                } else {
                    Err(true)
                }
            }
            (Kind::Choice(opts), Value::Text(s)) => {
                if opts.contains(&s.as_str()) {
                    Ok(raw.clone())
                } else {
                    Err(true)
                }
            }
            (Kind::Choice(opts), Value::Num(x)) => {
                let s = x.to_string();
                if opts.contains(&s.as_str()) {
                    Ok(Value::Text(s))
                } else {
                    Err(true)
                }
            }
            _ => Err(false),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Key {
    pub name: &'static str,
    pub kind: Kind,
    pub default: Value,
    pub help: &'static str,
}

impl Key {
    fn real(name: &'static str, default: f64, kind: Kind, help: &'static str) -> Key {
        Key { name, kind, default: Value::Num(default), help }
    }

    fn int(name: &'static str, default: i64, lo: i64, hi: i64, help: &'static str) -> Key {
        Key { name, kind: Kind::Int { lo, hi }, default: Value::Num(default as f64), help }
    }

    fn choice(name: &'static str, default: &'static str, opts: &'static [&'static str], help: &'static str) -> Key {
        Key { name, kind: Kind::Choice(opts), default: Value::Text(default.into()), help }
    }

    /// Long flag spelling: lower case, dashes for underscores.
    pub fn flag(&self) -> String {
        self.name.to_lowercase().replace('_', "-")
    }

    pub fn describe(&self) -> String {
        format!("{} ({}; default {})", self.help, self.kind.describe(), self.default)
    }
}

/// Seed is accepted in every config file next to the subcommand keys.
pub const SEED_KEY: &str = "seed";

#[derive(Debug)]
pub enum ConfigError {
    Io { path: PathBuf, message: String },
    Malformed { path: PathBuf, line: usize, message: String },
    UnknownKey { key: String, location: String },
    InvalidValue { key: String, value: String, expected: String, location: String },
    OutOfRange { key: String, value: String, expected: String, location: String },
    WrongSubcommand { path: PathBuf, found: String, expected: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io { path, message } => write!(f, "cannot read {}: {message}", path.display()),
            ConfigError::Malformed { path, line, message } => write!(f, "{}:{line}: {message}", path.display()),
            ConfigError::UnknownKey { key, location } => write!(f, "UnknownKey: '{key}' ({location})"),
            ConfigError::InvalidValue { key, value, expected, location } => {
                write!(f, "InvalidValue: '{key}' = {value} is not {expected} ({location})")
            }
            ConfigError::OutOfRange { key, value, expected, location } => {
                write!(f, "OutOfRange: '{key}' = {value} must be {expected} ({location})")
            }
            ConfigError::WrongSubcommand { path, found, expected } => {
                write!(f, "{} is a manifest of '{found}', not '{expected}'", path.display())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

/// One raw assignment and where it came from.
#[derive(Debug, Clone)]
pub struct Assignment {
    pub key: String,
    pub value: Value,
    pub location: String,
}

fn parse_scalar(text: &str) -> Value {
    let t = text.trim();
    let unquoted = t.strip_prefix('"').and_then(|s| s.strip_suffix('"'));
    match unquoted {
        Some(s) => Value::Text(s.to_string()),
        None => t.parse::<f64>().map(Value::Num).unwrap_or_else(|_| Value::Text(t.to_string())),
    }
}

/// Interpret a command-line value the same way as a file value.
pub fn parse_scalar_flag(text: &str) -> Value {
    parse_scalar(text)
}

/// Parse flat `key = value` text. `#` starts a comment.
pub fn parse_key_values(path: &Path, text: &str) -> Result<Vec<Assignment>, ConfigError> {
    let mut out: Vec<Assignment> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            return Err(ConfigError::Malformed {
                path: path.into(),
                line,
                message: format!("expected 'key = value', got '{content}'"),
            });
        };
        let key = k.trim();
        if key.is_empty() || v.trim().is_empty() {
            return Err(ConfigError::Malformed { path: path.into(), line, message: "empty key or value".into() });
        }
        if let Some(prev) = out.iter().find(|a| a.key == key) {
            return Err(ConfigError::Malformed {
                path: path.into(),
                line,
                message: format!("'{key}' already set ({})", prev.location),
            });
        }
        out.push(Assignment {
            key: key.into(),
            value: parse_scalar(v),
            location: format!("{}:{line}", path.display()),
        });
    }
    Ok(out)
}

/// Read a manifest written by an earlier run: its `config` object becomes
/// the assignment list, and `seed` is carried over.
pub fn parse_manifest(path: &Path, text: &str, subcommand: &str) -> Result<Vec<Assignment>, ConfigError> {
    let malformed = |message: String| ConfigError::Malformed { path: path.into(), line: 1, message };
    let doc: serde_json::Value = serde_json::from_str(text).map_err(|e| ConfigError::Malformed {
        path: path.into(),
        line: e.line(),
        message: e.to_string(),
    })?;
    if let Some(found) = doc.get("subcommand").and_then(|s| s.as_str()) {
        if found != subcommand {
            return Err(ConfigError::WrongSubcommand {
                path: path.into(),
                found: found.into(),
                expected: subcommand.into(),
            });
        }
    }
    let config = doc.get("config").and_then(|c| c.as_object()).ok_or_else(|| malformed("no 'config' object".into()))?;
    let mut out = Vec::new();
    let location = format!("{} config", path.display());
    for (k, v) in config {
        let value = match v {
            serde_json::Value::Number(n) => Value::Num(n.as_f64().unwrap_or(f64::NAN)),
            serde_json::Value::String(s) => Value::Text(s.clone()),
            other => return Err(malformed(format!("'{k}' has unsupported value {other}"))),
        };
        out.push(Assignment { key: k.clone(), value, location: location.clone() });
    }
    if let Some(seed) = doc.get("seed").and_then(|s| s.as_u64()) {
        out.push(Assignment {
            key: SEED_KEY.into(),
            value: Value::Num(seed as f64),
            location: format!("{} seed", path.display()),
        });
    }
    Ok(out)
}

pub fn read_config_file(path: &Path, subcommand: &str) -> Result<Vec<Assignment>, ConfigError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| ConfigError::Io { path: path.into(), message: e.to_string() })?;
    let is_json = path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
    if is_json {
        parse_manifest(path, &text, subcommand)
    } else {
        parse_key_values(path, &text)
    }
}

/// Fully resolved configuration of one run.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub values: BTreeMap<&'static str, Value>,
    pub seed: u64,
}

impl Resolved {
    pub fn num(&self, key: &str) -> f64 {
        match self.values.get(key) {
            Some(Value::Num(x)) => *x,
            other => panic!("config key {key} is not numeric: {other:?}"),
        }
    }

    pub fn usize(&self, key: &str) -> usize {
        self.num(key) as usize
    }

    pub fn text(&self, key: &str) -> &str {
        match self.values.get(key) {
            Some(Value::Text(s)) => s,
            other => panic!("config key {key} is not text: {other:?}"),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Object(self.values.iter().map(|(k, v)| (k.to_string(), v.to_json())).collect())
    }

    pub fn model_params(&self) -> ModelParams {
        let mut p = ModelParams::default();
        for (name, _) in ModelParams::default().entries() {
            if let (Some(slot), Some(Value::Num(x))) = (p.slot_mut(name), self.values.get(name)) {
                *slot = *x;
            }
        }
        p
    }

    pub fn forcing(&self) -> Forcing {
        let mut f = Forcing::single(self.num("mu"), self.num("omega"));
        f.terms[0].phase = self.num("phase");
        if let (Some(Value::Num(mu2)), Some(Value::Num(w2))) = (self.values.get("mu2"), self.values.get("omega2")) {
            if *mu2 > 0.0 {
                f = Forcing::two(self.num("mu"), self.num("omega"), *mu2, *w2);
                f.terms[0].phase = self.num("phase");
            }
        }
        f
    }

    pub fn state(&self, v: &str, a: &str, c: &str) -> pp04::StateVec {
        pp04::Vec3::new(self.num(v), self.num(a), self.num(c))
    }

    /// Ordering constraint between two keys, reported as a range error on `hi`.
    pub fn require_less(&self, lo: &str, hi: &str) -> Result<(), ConfigError> {
        if self.num(lo) < self.num(hi) {
            Ok(())
        } else {
            Err(ConfigError::OutOfRange {
                key: hi.into(),
                value: self.num(hi).to_string(),
                expected: format!("greater than {lo} = {}", self.num(lo)),
                location: "resolved configuration".into(),
            })
        }
    }
}

pub const DEFAULT_SEED: u64 = 42;

/// Layer defaults ← file ← flags. `env_seed` is used only when neither
/// the file nor a flag sets the seed.
pub fn resolve(
    schema: &[Key],
    file: &[Assignment],
    flags: &[Assignment],
    env_seed: Option<Assignment>,
) -> Result<Resolved, ConfigError> {
    let mut values: BTreeMap<&'static str, Value> = schema.iter().map(|k| (k.name, k.default.clone())).collect();
    let mut seed: Option<(u64, String)> = None;
    let seed_kind = Kind::Int { lo: 0, hi: i64::MAX };
    let layers = env_seed.iter().chain(file).chain(flags);
    for a in layers {
        let (kind, name) = if a.key == SEED_KEY {
            (seed_kind, SEED_KEY)
        } else {
            match schema.iter().find(|k| k.name == a.key) {
                Some(k) => (k.kind, k.name),
                None => return Err(ConfigError::UnknownKey { key: a.key.clone(), location: a.location.clone() }),
            }
        };
        let accepted = kind.accept(&a.value).map_err(|range| {
            let (key, value, expected, location) =
                (a.key.clone(), a.value.to_string(), kind.describe(), a.location.clone());
            if range {
                ConfigError::OutOfRange { key, value, expected, location }
            } else {
                ConfigError::InvalidValue { key, value, expected, location }
            }
        })?;
        if name == SEED_KEY {
            let Value::Num(x) = accepted else { unreachable!() };
            seed = Some((x as u64, a.location.clone()));
        } else {
            values.insert(name, accepted);
        }
    }
    Ok(Resolved { values, seed: seed.map_or(DEFAULT_SEED, |s| s.0) })
}

// Schemas ---------------------------------------------------------------

fn model_keys() -> Vec<Key> {
    let d = ModelParams::default();
    let help = |name: &str| -> &'static str {
        match name {
            "tau_V" => "ice-volume time scale, kyr",
            "tau_A" => "Antarctic ice time scale, kyr",
            "tau_C" => "CO2 time scale, kyr",
            "x" => "ice-volume response to CO2",
            "y" => "ice-volume forcing coefficient",
            "z" => "ice-volume constant",
            "alpha" => "CO2 response to ice volume",
            "beta" => "CO2 response to Antarctic ice",
            "gamma" => "CO2 constant",
            "delta" => "CO2 drawdown coefficient",
            "a" => "switching weight of ice volume",
            "b" => "switching weight of Antarctic ice",
            "d" => "switching offset",
            "eta" => "steepness of the smoothed switch",
            _ => "",
        }
    };
    d.entries()
        .into_iter()
        .map(|(name, value)| {
            let kind = if name.starts_with("tau") || name == "eta" { Kind::POSITIVE } else { Kind::ANY };
            Key::real(name, value, kind, help(name))
        })
        .collect()
}

fn forcing_keys(mu: f64, omega: f64) -> Vec<Key> {
    vec![
        Key::real("mu", mu, Kind::NON_NEGATIVE, "forcing amplitude"),
        Key::real("omega", omega, Kind::POSITIVE, "forcing angular frequency, rad/kyr"),
        Key::real("phase", 0.0, Kind::ANY, "forcing phase, rad"),
    ]
}

fn start_keys(v: f64, a: f64, c: f64) -> Vec<Key> {
    vec![
        Key::real("v0", v, Kind::ANY, "initial ice volume V"),
        Key::real("a0", a, Kind::ANY, "initial Antarctic ice A"),
        Key::real("c0", c, Kind::ANY, "initial CO2 C"),
    ]
}

fn classify_keys() -> Vec<Key> {
    vec![
        Key::real("t_settle", 3000.0, Kind::NON_NEGATIVE, "transient discarded before classification, kyr"),
        Key::int("n_max", 8, 1, 64, "largest period multiple tested"),
        Key::real("eps_per", 1e-5, Kind::POSITIVE, "recurrence tolerance"),
        Key::int("rotation_periods", 300, 1, 100_000, "forcing periods for the rotation number"),
    ]
}

fn graze_search_keys(v_lo: f64, v_hi: f64, t_near: f64) -> Vec<Key> {
    vec![
        Key::real("t0", 0.0, Kind::ANY, "section time"),
        Key::real("v_lo", v_lo, Kind::ANY, "lower end of the V bracket"),
        Key::real("v_hi", v_hi, Kind::ANY, "upper end of the V bracket"),
        Key::real("t_near", t_near, Kind::ANY, "grazing time to track"),
        Key::choice("region", "plus", &["plus", "minus"], "side from which the surface is approached"),
        Key::real("track_radius", 10.0, Kind::POSITIVE, "largest drift of the tracked extremum, kyr"),
        Key::real("horizon", 300.0, Kind::POSITIVE, "propagation horizon past t_near, kyr"),
    ]
}

/// Keys, output description and summary of one subcommand.
pub struct Schema {
    pub name: &'static str,
    pub about: &'static str,
    pub outputs: &'static str,
    pub keys: Vec<Key>,
}

const X31: (f64, f64, f64) = (0.3636, 0.2089, 0.2356);

pub fn schemas() -> Vec<Schema> {
    let with = |mut extra: Vec<Key>, forcing: bool| {
        let mut keys = model_keys();
        if forcing {
            keys.extend(forcing_keys(0.3, 0.115));
        }
        keys.append(&mut extra);
        keys
    };
    let run_keys = |t_end: f64| {
        let mut k = start_keys(X31.0, X31.1, X31.2);
        k.push(Key::real("t0", 0.0, Kind::ANY, "start time, kyr"));
        k.push(Key::real("t_end", t_end, Kind::ANY, "end time, kyr"));
        k.push(Key::real("output_step", 0.5, Kind::POSITIVE, "sample spacing of the trajectory CSV, kyr"));
        k
    };
    vec![
        Schema {
            name: "simulate",
            about: "Exact event-driven trajectory",
            outputs: "trajectory.csv: t,V,A,C,F,region\n\
                      events.csv: t,kind,V,A,C,f_dot,f_ddot_incoming,f_ddot_jump\n\
                      summary.json: event counts and final state",
            keys: with(
                {
                    let mut k = run_keys(500.0);
                    k.push(Key::choice("graze_policy", "stay", &["stay", "cross"], "region after a tangency"));
                    k
                },
                true,
            ),
        },
        Schema {
            name: "simulate-smoothed",
            about: "Trajectory of the tanh-smoothed system (adaptive Dormand-Prince)",
            outputs: "trajectory.csv: t,V,A,C,F,region\n\
                      events.csv: t,kind,V,A,C,f_dot,f_ddot_incoming,f_ddot_jump\n\
                      summary.json: event counts and final state",
            keys: with(
                {
                    let mut k = run_keys(500.0);
                    k.push(Key::real("rtol", 1e-8, Kind::POSITIVE, "relative tolerance"));
                    k.push(Key::real("atol", 1e-10, Kind::POSITIVE, "absolute tolerance"));
                    k.push(Key::real("h_max", 1.0, Kind::POSITIVE, "largest step, kyr"));
                    k
                },
                true,
            ),
        },
        Schema {
            name: "ramp",
            about: "Smoothed trajectory under a linearly drifting omega or d",
            outputs: "trajectory.csv: t,V,A,C,F,region\n\
                      cycles.csv: t_start,length,periods,n,param\n\
                      regimes.csv: n,t,param (start of each run of equal n)",
            keys: with(
                {
                    let mut k = start_keys(X31.0, X31.1, X31.2);
                    k.push(Key::choice("param", "omega", &["omega", "d"], "drifting parameter"));
                    k.push(Key::real("from", 0.2, Kind::ANY, "value at ramp_start"));
                    k.push(Key::real("to", 0.1, Kind::ANY, "value at ramp_end"));
                    k.push(Key::real("ramp_start", 0.0, Kind::ANY, "ramp start time, kyr"));
                    k.push(Key::real("ramp_end", 2000.0, Kind::ANY, "ramp end time, kyr"));
                    k.push(Key::real("t_end", 2000.0, Kind::ANY, "end of integration, kyr"));
                    k.push(Key::choice(
                        "convention",
                        "instantaneous",
                        &["instantaneous", "integrated"],
                        "forcing argument omega(t)*t or the integral of omega",
                    ));
                    k.push(Key::int("min_cycles", 2, 1, 1000, "cycles a regime must last to be reported"));
                    k.push(Key::real("output_step", 1.0, Kind::POSITIVE, "sample spacing, kyr"));
                    k
                },
                true,
            ),
        },
        Schema {
            name: "classify",
            about: "Classify the attractor reached from one initial state",
            outputs: "classification.json: class, residual, crossings, grazes, anchor, margin, rotation",
            keys: with(
                {
                    let mut k = start_keys(X31.0, X31.1, X31.2);
                    k.extend(classify_keys());
                    k
                },
                true,
            ),
        },
        Schema {
            name: "orbit",
            about: "Polish a periodic orbit and compute its Floquet multipliers",
            outputs: "orbit.json: class, period, anchors, margin, residual, multipliers\n\
                      orbit.csv: t,V,A,C,F,region over one period",
            keys: with(
                {
                    let mut k = start_keys(X31.0, X31.1, X31.2);
                    k.push(Key::int("n", 0, 0, 64, "period multiple; 0 detects it by classification"));
                    k.extend(classify_keys());
                    k
                },
                true,
            ),
        },
        Schema {
            name: "probe-sqrt",
            about: "Square-root discontinuity of the stroboscopic map at a grazing orbit",
            outputs: "probe.csv: eps,distance,impacts,V,A,C\n\
                      probe.json: exponents, jump and its prediction",
            keys: with(
                {
                    let mut k = graze_search_keys(0.36, 0.40, 72.4);
                    k.push(Key::real("a0", X31.1, Kind::ANY, "section value of A"));
                    k.push(Key::real("c0", X31.2, Kind::ANY, "section value of C"));
                    k.push(Key::real("dir_v", 1.0, Kind::ANY, "perturbation direction, V"));
                    k.push(Key::real("dir_a", 0.0, Kind::ANY, "perturbation direction, A"));
                    k.push(Key::real("dir_c", 0.0, Kind::ANY, "perturbation direction, C"));
                    k.push(Key::real("eps_min", 1e-8, Kind::POSITIVE, "smallest perturbation"));
                    k.push(Key::real("eps_max", 1e-3, Kind::POSITIVE, "largest perturbation"));
                    k.push(Key::int("count", 21, 2, 10_000, "perturbations per side"));
                    k
                },
                true,
            ),
        },
        Schema {
            name: "grazing-times",
            about: "Roots of the analytic grazing condition",
            outputs: "grazing_times.csv: t,residual\n\
                      grazing_times.json: amplitude, offset and roots",
            keys: with(
                vec![
                    Key::real("t0", 0.0, Kind::ANY, "window start, kyr"),
                    Key::real("t_max", 250.0, Kind::POSITIVE, "window length, kyr"),
                    Key::choice("region", "plus", &["plus", "minus"], "region whose tangencies are sought"),
                ],
                true,
            ),
        },
        Schema {
            name: "grazing-ic",
            about: "Initial V on the section whose orbit grazes near t_near",
            outputs: "grazing_ic.json: V, A, C, t_g, impacts_before, margin",
            keys: with(
                {
                    let mut k = graze_search_keys(0.36, 0.40, 72.4);
                    k.push(Key::real("a0", X31.1, Kind::ANY, "section value of A"));
                    k.push(Key::real("c0", X31.2, Kind::ANY, "section value of C"));
                    k
                },
                true,
            ),
        },
        Schema {
            name: "leaf",
            about: "Continue a grazing leaf across C on the section A = a0",
            outputs: "leaf.csv: leaf_id,tg,V,C,tg_realized,impacts_before\n\
                      leaf.json: line fit, t_g spread, angle to the slow-mode normal",
            keys: with(
                {
                    let mut k = graze_search_keys(0.36, 0.40, 72.4);
                    k.push(Key::real("a0", X31.1, Kind::ANY, "section value of A"));
                    k.push(Key::real("c0", X31.2, Kind::ANY, "C of the seed point"));
                    k.push(Key::real("c_lo", 0.0, Kind::ANY, "lower end of the traced C range"));
                    k.push(Key::real("c_hi", 1.0, Kind::ANY, "upper end of the traced C range"));
                    k.push(Key::int("samples", 41, 2, 100_000, "C samples"));
                    k.push(Key::int("leaf_id", 1, 0, i64::MAX, "identifier written to the CSV"));
                    k
                },
                true,
            ),
        },
        Schema {
            name: "sweep",
            about: "Monte-Carlo bifurcation sweep over one parameter",
            outputs: "sweep.csv: param,ic_index,class_m,class_n,grazing_margin,f_extrema (';'-joined)\n\
                      edges.csv: class,kind,lo,hi,estimate\n\
                      sweep.json: per-point class counts and dominant-class changes\n\
                      class codes: (m,n) periodic, (0,0) quasi-periodic, (0,-1) unclassified, (-1,-1) failed",
            keys: with(
                {
                    let mut k = vec![
                        Key::choice("param", "omega", &["omega", "mu", "d", "eta"], "swept parameter"),
                        Key::real("from", 0.06, Kind::ANY, "first value"),
                        Key::real("to", 0.15, Kind::ANY, "last value"),
                        Key::real("step", 5e-4, Kind::POSITIVE, "grid step"),
                        Key::int("samples", 10, 1, 100_000, "random initial states per value"),
                        Key::int("refine_levels", 1, 0, 30, "bisection levels per reported edge"),
                    ];
                    k.extend(classify_keys());
                    k
                },
                true,
            ),
        },
        Schema {
            name: "tongue",
            about: "Observed attractor classes on an (omega, mu) grid",
            outputs: "tongue.csv: omega,mu,classes (';'-joined labels, failures as fail:k)",
            keys: with(
                {
                    let mut k = vec![
                        Key::real("omega_lo", 0.02, Kind::POSITIVE, "smallest omega"),
                        Key::real("omega_hi", 0.3, Kind::POSITIVE, "largest omega"),
                        Key::int("omega_n", 57, 1, 100_000, "omega nodes"),
                        Key::real("mu_lo", 0.0, Kind::NON_NEGATIVE, "smallest mu"),
                        Key::real("mu_hi", 1.5, Kind::NON_NEGATIVE, "largest mu"),
                        Key::int("mu_n", 31, 1, 100_000, "mu nodes"),
                        Key::int("samples", 5, 1, 100_000, "random initial states per cell"),
                    ];
                    k.extend(classify_keys());
                    k
                },
                false,
            ),
        },
        Schema {
            name: "doa",
            about: "Basins of attraction on the section A = a0 at time t0",
            outputs: "doa.csv: V,C,class_m,class_n,phase (phase -1 when not resolved)",
            keys: with(
                {
                    let mut k = vec![
                        Key::real("t0", 0.0, Kind::ANY, "section time"),
                        Key::real("a0", X31.1, Kind::ANY, "section value of A"),
                        Key::real("v_lo", -1.0, Kind::ANY, "smallest V"),
                        Key::real("v_hi", 1.5, Kind::ANY, "largest V"),
                        Key::int("v_n", 100, 1, 100_000, "V cells"),
                        Key::real("c_lo", 0.0, Kind::ANY, "smallest C"),
                        Key::real("c_hi", 1.0, Kind::ANY, "largest C"),
                        Key::int("c_n", 100, 1, 100_000, "C cells"),
                        Key::choice("phase_resolve", "yes", &["yes", "no"], "label cells by attractor phase too"),
                    ];
                    k.extend(classify_keys());
                    k
                },
                true,
            ),
        },
        Schema {
            name: "grazing-curve",
            about: "Locus in (mu, omega) where the (1,n) orbit grazes",
            outputs: "grazing_curve.csv: mu,omega_g,residual\n\
                      grazing_curve.json: linear fit and failed amplitudes",
            keys: with(
                vec![
                    Key::int("n", 3, 1, 64, "orbit index (1,n)"),
                    Key::real("mu_from", 0.3, Kind::NON_NEGATIVE, "first amplitude"),
                    Key::real("mu_to", 1.0, Kind::NON_NEGATIVE, "last amplitude"),
                    Key::real("mu_step", 0.1, Kind::POSITIVE, "amplitude step"),
                    Key::real("omega_seed", 0.114, Kind::POSITIVE, "omega at which the orbit is first sought"),
                    Key::real("omega_step", 2e-3, Kind::POSITIVE, "omega decrement while following the orbit"),
                    Key::real("omega_tol", 1e-7, Kind::POSITIVE, "width of the final omega bracket"),
                ],
                false,
            ),
        },
        Schema {
            name: "quasi",
            about: "Two-frequency forcing compared with the single-frequency run",
            outputs: "trajectory.csv, reference.csv: t,V,A,C,F,region\n\
                      quasi.json: deviations, grazes and near-grazes",
            keys: with(
                {
                    let mut k = start_keys(X31.0, X31.1, X31.2);
                    k.push(Key::real("mu2", 0.05, Kind::NON_NEGATIVE, "second forcing amplitude"));
                    k.push(Key::real("omega2", 0.145, Kind::POSITIVE, "second forcing frequency"));
                    k.push(Key::real("horizon", 2000.0, Kind::POSITIVE, "integration length, kyr"));
                    k.push(Key::real(
                        "t_transient",
                        500.0,
                        Kind::NON_NEGATIVE,
                        "transient excluded from deviations, kyr",
                    ));
                    k.push(Key::real("near_graze", 1e-3, Kind::POSITIVE, "margin counted as a near-graze"));
                    k
                },
                true,
            ),
        },
    ]
}
