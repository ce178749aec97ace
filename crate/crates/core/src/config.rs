//! Run configuration: JSON ingestion with unit strings, defaults and the
//! echo written back into reports.
//!
//! ```json
//! {
//!   "crystal": {"preset": "bibo-0.4um-typeI", "length": "0.1mm"},
//!   "spopo": {"free_spectral_range": "75MHz", "pump_pulse_duration": "100fs",
//!             "pump_center_wavelength": "0.4um", "signal_mirror_transmission": 0.01,
//!             "geometry": "ring", "resonance": "singly", "pump_waist": "70um",
//!             "pump_ratio": 0.9},
//!   "numerics": {"kappa": 1000},
//!   "analyses": [{"kind": "diagonalize"}, {"kind": "count", "bounds_db": [-5]}]
//! }
//! ```

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use std::path::Path;
use thiserror::Error;

use crate::dispersion::{
    find_preset, presets, CrystalDispersion, Geometry, ParameterError, PumpLevel, Resonance, SpopoConfig,
};
use crate::spectral::DEFAULT_EPSILON;
use crate::units::{parse_quantity, Dimension};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("{path}: {message}")]
    Field { path: String, message: String },
    #[error("unknown crystal preset {name:?} (known: {known})")]
    UnknownPreset { name: String, known: String },
    #[error("spopo: give either pump_ratio or pump_irradiance, not both")]
    ConflictingPump,
    #[error("spopo: one of pump_ratio or pump_irradiance is required")]
    MissingPump,
    #[error(transparent)]
    Parameter(#[from] ParameterError),
}

fn field_error(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field { path: path.to_string(), message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Numerics {
    /// Overrides the automatic scale factor.
    pub kappa: Option<f64>,
    /// Overrides the automatic scaled half-width.
    pub grid_half_width: Option<usize>,
    /// Supermodes with `|Λ_k/Λ₀|` below this are not reported.
    pub epsilon_significant: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Self { kappa: None, grid_half_width: None, epsilon_significant: DEFAULT_EPSILON }
    }
}

/// Local oscillator shapes understood by the squeeze analysis. A missing
/// phase means the better of the two quadratures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum LoSpec {
    GaussHermite { k: usize, n_l: f64, phase: Option<f64> },
    Supermode { k: usize, phase: Option<f64> },
}

/// `r: None` takes the pump ratio from the spopo block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Analysis {
    Diagonalize,
    Threshold,
    Squeeze { r: Option<f64>, w: Vec<f64>, modes: usize, local_oscillators: Vec<LoSpec> },
    LoOptimize { r: Option<f64>, w: f64, modes: Vec<usize>, n_min: Option<f64>, n_max: Option<f64> },
    Count { r: Option<f64>, w: f64, bounds_db: Vec<f64>, bands_db: Vec<[f64; 2]> },
    LengthSweep { lengths: Vec<f64>, kappa: Option<f64> },
    CompareAnalytic { modes: usize },
}

impl Analysis {
    pub fn name(&self) -> &'static str {
        match self {
            Analysis::Diagonalize => "diagonalize",
            Analysis::Threshold => "threshold",
            Analysis::Squeeze { .. } => "squeeze",
            Analysis::LoOptimize { .. } => "lo-optimize",
            Analysis::Count { .. } => "count",
            Analysis::LengthSweep { .. } => "length-sweep",
            Analysis::CompareAnalytic { .. } => "compare-analytic",
        }
    }

    /// True when the analysis needs the supermode decomposition.
    pub fn needs_basis(&self) -> bool {
        !matches!(self, Analysis::LengthSweep { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub crystal: CrystalDispersion,
    pub spopo: SpopoConfig,
    pub numerics: Numerics,
    pub analyses: Vec<Analysis>,
}

impl RunConfig {
    /// Resolved configuration in the same layout `parse_config` reads, all
    /// quantities SI.
    pub fn to_json(&self) -> Value {
        let s = &self.spopo;
        let mut spopo = json!({
            "free_spectral_range": s.free_spectral_range,
            "pump_pulse_duration": s.pump_pulse_duration,
            "pump_center_wavelength": s.pump_center_wavelength,
            "signal_mirror_transmission": s.signal_mirror_transmission,
            "pump_mirror_transmission": s.pump_mirror_transmission,
            "geometry": s.geometry,
            "resonance": s.resonance,
            "pump_waist": s.pump_waist,
            "signal_waist": s.signal_waist,
        });
        let (key, v) = match s.pump {
            PumpLevel::Ratio(r) => ("pump_ratio", r),
            PumpLevel::Irradiance(p) => ("pump_irradiance", p),
        };
        spopo[key] = json!(v);
        json!({
            "crystal": self.crystal,
            "spopo": spopo,
            "numerics": self.numerics,
            "analyses": self.analyses,
        })
    }

    /// Pump ratio from the spopo block, if given as a ratio.
    pub fn pump_ratio(&self) -> Option<f64> {
        match self.spopo.pump {
            PumpLevel::Ratio(r) => Some(r),
            PumpLevel::Irradiance(_) => None,
        }
    }
}

pub fn parse_config_file(path: &Path) -> Result<RunConfig, ConfigError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let root: Value = serde_json::from_str(text)
        .map_err(|e| ConfigError::Syntax { line: e.line(), column: e.column(), message: e.to_string() })?;
    let root = Obj::new(&root, "")?;
    root.allow(&["crystal", "spopo", "numerics", "analyses"])?;
    let crystal = parse_crystal(root.required("crystal")?, "crystal")?;
    let spopo = parse_spopo(&Obj::new(root.required("spopo")?, "spopo")?)?;
    let numerics = match root.get("numerics") {
        Some(v) => parse_numerics(&Obj::new(v, "numerics")?)?,
        None => Numerics::default(),
    };
    let analyses = match root.get("analyses") {
        Some(Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(i, v)| parse_analysis(&Obj::new(v, &format!("analyses[{i}]"))?, spopo.pump))
            .collect::<Result<_, _>>()?,
        Some(Value::Null) | None => Vec::new(),
        Some(_) => return Err(field_error("analyses", "expected an array")),
    };
    crystal.validate()?;
    spopo.validate()?;
    Ok(RunConfig { crystal, spopo, numerics, analyses })
}

/// JSON object with its path for error messages.
struct Obj<'a> {
    map: &'a Map<String, Value>,
    path: String,
}

impl<'a> Obj<'a> {
    fn new(v: &'a Value, path: &str) -> Result<Self, ConfigError> {
        match v {
            Value::Object(map) => Ok(Self { map, path: path.to_string() }),
            _ => Err(field_error(if path.is_empty() { "<root>" } else { path }, "expected an object")),
        }
    }

    fn child(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.path)
        }
    }

    fn allow(&self, keys: &[&str]) -> Result<(), ConfigError> {
        match self.map.keys().find(|k| !keys.contains(&k.as_str())) {
            Some(k) => Err(field_error(&self.child(k), format!("unknown field (expected one of {})", keys.join(", ")))),
            None => Ok(()),
        }
    }

    /// Value under `key` or its first present alias; null counts as absent.
    fn get(&self, key: &str) -> Option<&'a Value> {
        self.map.get(key).filter(|v| !v.is_null())
    }

    fn required(&self, key: &str) -> Result<&'a Value, ConfigError> {
        self.get(key).ok_or_else(|| field_error(&self.child(key), "missing required field"))
    }

    fn quantity(&self, key: &str, dim: Dimension) -> Result<Option<f64>, ConfigError> {
        self.get(key).map(|v| quantity(v, &self.child(key), dim)).transpose()
    }

    fn required_quantity(&self, key: &str, dim: Dimension) -> Result<f64, ConfigError> {
        quantity(self.required(key)?, &self.child(key), dim)
    }

    fn number(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.quantity(key, Dimension::Dimensionless)
    }

    fn index(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        self.get(key).map(|v| index(v, &self.child(key))).transpose()
    }

    fn string(&self, key: &str) -> Result<Option<&'a str>, ConfigError> {
        self.get(key)
            .map(|v| v.as_str().ok_or_else(|| field_error(&self.child(key), "expected a string")))
            .transpose()
    }

    fn array(&self, key: &str) -> Result<Option<&'a Vec<Value>>, ConfigError> {
        self.get(key)
            .map(|v| v.as_array().ok_or_else(|| field_error(&self.child(key), "expected an array")))
            .transpose()
    }

    fn numbers(&self, key: &str, dim: Dimension) -> Result<Option<Vec<f64>>, ConfigError> {
        let path = self.child(key);
        self.array(key)?
            .map(|a| a.iter().enumerate().map(|(i, v)| quantity(v, &format!("{path}[{i}]"), dim)).collect())
            .transpose()
    }
}

fn quantity(v: &Value, path: &str, dim: Dimension) -> Result<f64, ConfigError> {
    match v {
        Value::Number(n) => n.as_f64().ok_or_else(|| field_error(path, "number out of range")),
        Value::String(s) => parse_quantity(s, dim).map_err(|e| field_error(path, e.to_string())),
        _ => Err(field_error(path, "expected a number or a quantity string")),
    }
}

fn index(v: &Value, path: &str) -> Result<usize, ConfigError> {
    v.as_u64().map(|n| n as usize).ok_or_else(|| field_error(path, "expected a non-negative integer"))
}

const CRYSTAL_FIELDS: [&str; 7] = ["kp_prime", "kp_double_prime", "ks_prime", "ks_double_prime", "chi", "n0", "length"];

fn unknown_preset(name: &str) -> ConfigError {
    let known = presets().iter().map(|p| p.name).collect::<Vec<_>>().join(", ");
    ConfigError::UnknownPreset { name: name.to_string(), known }
}

/// A preset name, or an object with an optional `preset` whose values any
/// listed field overrides.
fn parse_crystal(v: &Value, path: &str) -> Result<CrystalDispersion, ConfigError> {
    if let Value::String(name) = v {
        let p = find_preset(name).ok_or_else(|| unknown_preset(name))?;
        return p.values.ok_or_else(|| field_error(path, format!("preset {:?} carries no values; give them inline", p.name)));
    }
    let obj = Obj::new(v, path)?;
    let mut keys = CRYSTAL_FIELDS.to_vec();
    keys.extend(["preset", "label"]);
    obj.allow(&keys)?;
    let base = match obj.string("preset")? {
        Some(name) => {
            let p = find_preset(name).ok_or_else(|| unknown_preset(name))?;
            Some(p.values.unwrap_or_else(|| CrystalDispersion {
                kp_prime: f64::NAN,
                kp_double_prime: f64::NAN,
                ks_prime: f64::NAN,
                ks_double_prime: f64::NAN,
                chi: f64::NAN,
                n0: f64::NAN,
                length: f64::NAN,
                label: p.name.to_string(),
            }))
        }
        None => None,
    };
    let field = |key: &str, dim: Dimension, from_base: Option<f64>| -> Result<f64, ConfigError> {
        match obj.quantity(key, dim)? {
            Some(x) => Ok(x),
            None => from_base
                .filter(|x| !x.is_nan())
                .ok_or_else(|| field_error(&obj.child(key), "missing required field")),
        }
    };
    let b = base.as_ref();
    Ok(CrystalDispersion {
        kp_prime: field("kp_prime", Dimension::Dimensionless, b.map(|c| c.kp_prime))?,
        kp_double_prime: field("kp_double_prime", Dimension::Dimensionless, b.map(|c| c.kp_double_prime))?,
        ks_prime: field("ks_prime", Dimension::Dimensionless, b.map(|c| c.ks_prime))?,
        ks_double_prime: field("ks_double_prime", Dimension::Dimensionless, b.map(|c| c.ks_double_prime))?,
        chi: field("chi", Dimension::Dimensionless, b.map(|c| c.chi))?,
        n0: field("n0", Dimension::Dimensionless, b.map(|c| c.n0))?,
        length: field("length", Dimension::Length, b.map(|c| c.length))?,
        label: match obj.string("label")? {
            Some(l) => l.to_string(),
            None => b.map(|c| c.label.clone()).unwrap_or_default(),
        },
    })
}

/// Canonical key followed by accepted spellings.
const SPOPO_KEYS: [(&str, &[&str]); 11] = [
    ("free_spectral_range", &["omega", "Ω"]),
    ("pump_pulse_duration", &["tau_p", "τ_p"]),
    ("pump_center_wavelength", &["lambda_pump", "λ_p"]),
    ("signal_mirror_transmission", &["T_s"]),
    ("pump_mirror_transmission", &["T_p"]),
    ("geometry", &[]),
    ("resonance", &[]),
    ("pump_waist", &["w_p"]),
    ("signal_waist", &["w_s"]),
    ("pump_ratio", &["r"]),
    ("pump_irradiance", &["P"]),
];

fn parse_spopo(raw: &Obj) -> Result<SpopoConfig, ConfigError> {
    // fold aliases onto canonical names
    let mut map = Map::new();
    for (k, v) in raw.map {
        let canonical = SPOPO_KEYS
            .iter()
            .find(|(c, aliases)| c == k || aliases.contains(&k.as_str()))
            .map(|(c, _)| *c)
            .ok_or_else(|| {
                let names: Vec<&str> = SPOPO_KEYS.iter().map(|p| p.0).collect();
                field_error(&raw.child(k), format!("unknown field (expected one of {})", names.join(", ")))
            })?;
        if map.insert(canonical.to_string(), v.clone()).is_some() {
            return Err(field_error(&raw.child(k), format!("given twice (as {canonical} and an alias)")));
        }
    }
    let value = Value::Object(map);
    let o = Obj::new(&value, &raw.path)?;
    let pump = match (o.number("pump_ratio")?, o.quantity("pump_irradiance", Dimension::Irradiance)?) {
        (Some(_), Some(_)) => return Err(ConfigError::ConflictingPump),
        (Some(r), None) => PumpLevel::Ratio(r),
        (None, Some(p)) => PumpLevel::Irradiance(p),
        (None, None) => return Err(ConfigError::MissingPump),
    };
    let geometry = match o.string("geometry")? {
        None | Some("ring") => Geometry::Ring,
        Some("linear") => Geometry::Linear,
        Some(other) => return Err(field_error(&o.child("geometry"), format!("expected ring or linear, got {other:?}"))),
    };
    let resonance = match o.string("resonance")? {
        None | Some("singly") => Resonance::Singly,
        Some("doubly") => Resonance::Doubly,
        Some(other) => {
            return Err(field_error(&o.child("resonance"), format!("expected singly or doubly, got {other:?}")))
        }
    };
    Ok(SpopoConfig {
        free_spectral_range: o.required_quantity("free_spectral_range", Dimension::AngularFrequency)?,
        pump_pulse_duration: o.required_quantity("pump_pulse_duration", Dimension::Time)?,
        pump_center_wavelength: o.required_quantity("pump_center_wavelength", Dimension::Length)?,
        signal_mirror_transmission: o.required_quantity("signal_mirror_transmission", Dimension::Dimensionless)?,
        pump_mirror_transmission: o.number("pump_mirror_transmission")?,
        geometry,
        resonance,
        pump_waist: o.required_quantity("pump_waist", Dimension::Length)?,
        signal_waist: o.quantity("signal_waist", Dimension::Length)?,
        pump,
    })
}

fn parse_numerics(o: &Obj) -> Result<Numerics, ConfigError> {
    o.allow(&["kappa", "grid_half_width", "epsilon_significant"])?;
    let kappa = o.number("kappa")?;
    if let Some(k) = kappa {
        if !(k >= 1.0) {
            return Err(field_error(&o.child("kappa"), format!("must be >= 1, got {k}")));
        }
    }
    let epsilon_significant = o.number("epsilon_significant")?.unwrap_or(DEFAULT_EPSILON);
    if !(epsilon_significant > 0.0 && epsilon_significant < 1.0) {
        return Err(field_error(&o.child("epsilon_significant"), "must lie in (0, 1)"));
    }
    Ok(Numerics { kappa, grid_half_width: o.index("grid_half_width")?, epsilon_significant })
}

fn default_ratio(o: &Obj, pump: PumpLevel) -> Result<Option<f64>, ConfigError> {
    let r = o.number("r")?.or(match pump {
        PumpLevel::Ratio(r) => Some(r),
        PumpLevel::Irradiance(_) => None,
    });
    if let Some(r) = r {
        if !(r >= 0.0) {
            return Err(field_error(&o.child("r"), format!("must be >= 0, got {r}")));
        }
    }
    Ok(r)
}

fn parse_analysis(o: &Obj, pump: PumpLevel) -> Result<Analysis, ConfigError> {
    let kind = o.string("kind")?.ok_or_else(|| field_error(&o.child("kind"), "missing required field"))?;
    let indices = |key: &str| -> Result<Option<Vec<usize>>, ConfigError> {
        let path = o.child(key);
        o.array(key)?
            .map(|a| a.iter().enumerate().map(|(i, v)| index(v, &format!("{path}[{i}]"))).collect())
            .transpose()
    };
    Ok(match kind {
        "diagonalize" => {
            o.allow(&["kind"])?;
            Analysis::Diagonalize
        }
        "threshold" => {
            o.allow(&["kind"])?;
            Analysis::Threshold
        }
        "squeeze" => {
            o.allow(&["kind", "r", "w", "modes", "local_oscillators"])?;
            let los = match o.array("local_oscillators")? {
                Some(a) => a
                    .iter()
                    .enumerate()
                    .map(|(i, v)| parse_lo(&Obj::new(v, &format!("{}[{i}]", o.child("local_oscillators")))?))
                    .collect::<Result<_, _>>()?,
                None => Vec::new(),
            };
            Analysis::Squeeze {
                r: default_ratio(o, pump)?,
                w: o.numbers("w", Dimension::Dimensionless)?.unwrap_or_else(|| vec![0.0]),
                modes: o.index("modes")?.unwrap_or(4),
                local_oscillators: los,
            }
        }
        "lo-optimize" => {
            o.allow(&["kind", "r", "w", "modes", "n_min", "n_max"])?;
            Analysis::LoOptimize {
                r: default_ratio(o, pump)?,
                w: o.number("w")?.unwrap_or(0.0),
                modes: indices("modes")?.unwrap_or_else(|| vec![0]),
                n_min: o.number("n_min")?,
                n_max: o.number("n_max")?,
            }
        }
        "count" => {
            o.allow(&["kind", "r", "w", "bounds_db", "bands_db"])?;
            let bands = match o.array("bands_db")? {
                Some(a) => a
                    .iter()
                    .enumerate()
                    .map(|(i, v)| {
                        let path = format!("{}[{i}]", o.child("bands_db"));
                        match v.as_array().map(|p| p.as_slice()) {
                            Some([lo, hi]) => {
                                let (lo, hi) = (quantity(lo, &path, Dimension::Dimensionless)?, quantity(hi, &path, Dimension::Dimensionless)?);
                                Ok([lo.min(hi), lo.max(hi)])
                            }
                            _ => Err(field_error(&path, "expected a [lower, upper] pair")),
                        }
                    })
                    .collect::<Result<_, _>>()?,
                None => Vec::new(),
            };
            Analysis::Count {
                r: default_ratio(o, pump)?,
                w: o.number("w")?.unwrap_or(0.0),
                bounds_db: o.numbers("bounds_db", Dimension::Dimensionless)?.unwrap_or_else(|| vec![-5.0]),
                bands_db: bands,
            }
        }
        "length-sweep" => {
            o.allow(&["kind", "lengths", "kappa"])?;
            let lengths = o
                .numbers("lengths", Dimension::Length)?
                .ok_or_else(|| field_error(&o.child("lengths"), "missing required field"))?;
            Analysis::LengthSweep { lengths, kappa: o.number("kappa")? }
        }
        "compare-analytic" => {
            o.allow(&["kind", "modes"])?;
            Analysis::CompareAnalytic { modes: o.index("modes")?.unwrap_or(4) }
        }
        other => {
            return Err(field_error(
                &o.child("kind"),
                format!(
                    "unknown analysis {other:?} (expected diagonalize, threshold, squeeze, lo-optimize, count, length-sweep or compare-analytic)"
                ),
            ))
        }
    })
}

fn parse_lo(o: &Obj) -> Result<LoSpec, ConfigError> {
    let k = o.index("k")?.ok_or_else(|| field_error(&o.child("k"), "missing required field"))?;
    match o.string("type")? {
        Some("gauss-hermite") => {
            o.allow(&["type", "k", "n_l", "phase"])?;
            let n_l = o.number("n_l")?.ok_or_else(|| field_error(&o.child("n_l"), "missing required field"))?;
            if !(n_l > 0.0) {
                return Err(field_error(&o.child("n_l"), "must be > 0"));
            }
            Ok(LoSpec::GaussHermite { k, n_l, phase: o.number("phase")? })
        }
        Some("supermode") => {
            o.allow(&["type", "k", "phase"])?;
            Ok(LoSpec::Supermode { k, phase: o.number("phase")? })
        }
        _ => Err(field_error(&o.child("type"), "expected gauss-hermite or supermode")),
    }
}
