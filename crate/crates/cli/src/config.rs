//! Run configuration: strict JSON schema, flag overrides, and defaults.

use std::fmt;
use std::str::FromStr;

use serde::de::{self, DeserializeOwned};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};

use qbridge::bohr_sommerfeld::{MotionKind, DEFAULT_ORDER};
use qbridge::model::{CanonicalEnsemble, PotentialSpec};
use qbridge::oracle::{Boundary, DEFAULT_GRID_POINTS, DEFAULT_RESOLUTION_TOLERANCE};
use qbridge::thermo::Normalization;
use qbridge::wigner::PdeForm;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandName {
    Wigner,
    Equilibrium,
    Thermo,
    Quantize,
    Propagate,
    Oracle,
}

impl CommandName {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Wigner => "wigner",
            Self::Equilibrium => "equilibrium",
            Self::Thermo => "thermo",
            Self::Quantize => "quantize",
            Self::Propagate => "propagate",
            Self::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Top level of a config file. `options` is checked against the schema of
/// `command` in a second pass.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    command: CommandName,
    potential: PotentialSpec,
    #[serde(default)]
    ensemble: EnsembleConfig,
    #[serde(default)]
    options: Value,
    #[serde(default)]
    format: Format,
    #[serde(default)]
    out: Option<String>,
    #[serde(default)]
    normalization: Normalization,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    /// Absent means "use the curvature-matched value" where that makes sense.
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(rename = "k_B", default = "one")]
    pub k_b: f64,
    #[serde(default)]
    pub masses: Vec<f64>,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            beta: None,
            hbar: 1.0,
            k_b: 1.0,
            masses: Vec::new(),
        }
    }
}

impl EnsembleConfig {
    pub fn with_beta(&self, beta: f64) -> CanonicalEnsemble {
        CanonicalEnsemble {
            beta,
            hbar: self.hbar,
            k_b: self.k_b,
            masses: self.masses.clone(),
        }
    }

    pub fn required(&self) -> Result<CanonicalEnsemble, CliError> {
        match self.beta {
            Some(beta) => Ok(self.with_beta(beta)),
            None => Err(CliError::validation("ensemble.beta", "this command needs an inverse temperature")),
        }
    }
}

fn one() -> f64 {
    1.0
}

/// Fully resolved configuration; serializes with every default filled in.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: CommandName,
    pub potential: PotentialSpec,
    pub ensemble: EnsembleConfig,
    pub options: Options,
    pub format: Format,
    pub out: Option<String>,
    pub normalization: Normalization,
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum Options {
    Wigner(WignerOptions),
    Equilibrium(EquilibriumOptions),
    Thermo(ThermoOptions),
    Quantize(QuantizeOptions),
    Propagate(PropagateOptions),
    Oracle(OracleOptions),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WignerOptions {
    #[serde(default = "default_q_grid")]
    pub q: Grid,
    #[serde(default = "default_dq_grid")]
    pub dq: Grid,
    #[serde(rename = "box", default)]
    pub bounds: Option<Interval>,
    #[serde(default)]
    pub form: PdeForm,
}

fn default_q_grid() -> Grid {
    Grid {
        start: -2.0,
        stop: 2.0,
        count: 21,
    }
}

fn default_dq_grid() -> Grid {
    Grid {
        start: -0.2,
        stop: 0.2,
        count: 11,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriumOptions {
    /// Search interval; the family's default when absent.
    #[serde(default)]
    pub interval: Option<Interval>,
    #[serde(default = "default_root_tolerance")]
    pub tolerance: f64,
}

fn default_root_tolerance() -> f64 {
    qbridge::model::DEFAULT_ROOT_TOLERANCE
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermoOptions {
    #[serde(default = "default_thermo_grid")]
    pub grid: Grid,
}

fn default_thermo_grid() -> Grid {
    Grid {
        start: -3.0,
        stop: 3.0,
        count: 121,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassChoice {
    #[default]
    Auto,
    Libration,
    Rotation,
}

impl ClassChoice {
    pub fn kind(self) -> Option<MotionKind> {
        match self {
            Self::Auto => None,
            Self::Libration => Some(MotionKind::Libration),
            Self::Rotation => Some(MotionKind::Rotation),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantizeOptions {
    #[serde(default)]
    pub class: ClassChoice,
    #[serde(default = "default_levels")]
    pub levels: LevelRange,
    #[serde(default)]
    pub oracle: bool,
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
}

fn default_levels() -> LevelRange {
    LevelRange { first: 0, last: 4 }
}

fn default_order() -> usize {
    DEFAULT_ORDER
}

fn default_grid_points() -> usize {
    DEFAULT_GRID_POINTS
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagateOptions {
    pub from: f64,
    pub to: f64,
    pub time: f64,
    #[serde(default = "default_slices")]
    pub slices: Slices,
    #[serde(default)]
    pub energy: EnergyChoice,
}

fn default_slices() -> Slices {
    Slices(vec![1000, 2000, 4000])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleOptions {
    #[serde(default = "default_level_count")]
    pub levels: usize,
    #[serde(default)]
    pub boundary: Boundary,
    #[serde(rename = "box", default)]
    pub bounds: Option<Interval>,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default = "yes")]
    pub richardson: bool,
    #[serde(default = "default_resolution")]
    pub tolerance: f64,
    /// Emit eigenvectors in CSV output.
    #[serde(default)]
    pub vectors: bool,
}

fn default_level_count() -> usize {
    4
}

fn yes() -> bool {
    true
}

fn default_resolution() -> f64 {
    DEFAULT_RESOLUTION_TOLERANCE
}

/// `start:stop:count`, inclusive of both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.count - 1) as f64;
        (0..self.count).map(|i| self.start + step * i as f64).collect()
    }
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [start, stop, count] = parts.as_slice() else {
            return Err(format!("expected start:stop:count, got {s:?}"));
        };
        let start: f64 = parse_finite(start)?;
        let stop: f64 = parse_finite(stop)?;
        let count: usize = count.trim().parse().map_err(|_| format!("bad point count {count:?}"))?;
        if count == 0 {
            return Err("point count must be at least 1".into());
        }
        if count > 1 && stop < start {
            return Err(format!("stop {stop} is below start {start}"));
        }
        Ok(Self { start, stop, count })
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.stop, self.count)
    }
}

/// `lo:hi` with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl FromStr for Interval {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let Some((lo, hi)) = s.split_once(':') else {
            return Err(format!("expected lo:hi, got {s:?}"));
        };
        let (lo, hi) = (parse_finite(lo)?, parse_finite(hi)?);
        if lo >= hi {
            return Err(format!("empty interval {lo}:{hi}"));
        }
        Ok(Self { lo, hi })
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.lo, self.hi)
    }
}

/// `n0..n1`, inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelRange {
    pub first: u32,
    pub last: u32,
}

impl FromStr for LevelRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let Some((a, b)) = s.split_once("..") else {
            return Err(format!("expected n0..n1, got {s:?}"));
        };
        let first: u32 = a.trim().parse().map_err(|_| format!("bad level {a:?}"))?;
        let last: u32 = b.trim().parse().map_err(|_| format!("bad level {b:?}"))?;
        if last < first {
            return Err(format!("empty level range {first}..{last}"));
        }
        Ok(Self { first, last })
    }
}

impl fmt::Display for LevelRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.first, self.last)
    }
}

/// `N[,N2,...]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Slices(pub Vec<usize>);

impl FromStr for Slices {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let counts = s
            .split(',')
            .map(|n| match n.trim().parse::<usize>() {
                Ok(0) | Err(_) => Err(format!("bad slice count {n:?}")),
                Ok(n) => Ok(n),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self(counts))
    }
}

impl fmt::Display for Slices {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(usize::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

/// `auto` (energy of the classical path) or a number.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum EnergyChoice {
    #[default]
    Auto,
    Value(f64),
}

impl FromStr for EnergyChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            Ok(Self::Auto)
        } else {
            parse_finite(s).map(Self::Value)
        }
    }
}

impl fmt::Display for EnergyChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Auto => f.write_str("auto"),
            Self::Value(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for EnergyChoice {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::Auto => s.serialize_str("auto"),
            Self::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for EnergyChoice {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match Value::deserialize(d)? {
            Value::Number(n) => n.as_f64().map(Self::Value).ok_or_else(|| de::Error::custom("energy out of range")),
            Value::String(s) => s.parse().map_err(de::Error::custom),
            other => Err(de::Error::custom(format!("expected \"auto\" or a number, got {other}"))),
        }
    }
}

fn parse_finite(s: &str) -> Result<f64, String> {
    match s.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("bad number {s:?}")),
    }
}

/// Serialize through `Display` and parse through `FromStr`.
macro_rules! string_serde {
    ($($t:ty),*) => {$(
        impl Serialize for $t {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $t {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(de::Error::custom)
            }
        }
    )*};
}

string_serde!(Grid, Interval, LevelRange, Slices);

fn strict<T: DeserializeOwned>(value: Value, prefix: &str) -> Result<T, CliError> {
    serde_path_to_error::deserialize(value).map_err(|err| {
        let path = err.path().to_string();
        let mut field = match (prefix.is_empty(), path.as_str()) {
            (true, _) => path.clone(),
            (false, ".") => prefix.to_string(),
            (false, p) => format!("{prefix}.{p}"),
        };
        let message = err.into_inner().to_string();
        // tagged enums report unknown fields at the enclosing path
        if let Some(name) = unknown_field(&message) {
            if !field.ends_with(name) {
                field = if field == "." { name.to_string() } else { format!("{field}.{name}") };
            }
        }
        CliError::validation(&field, &message)
    })
}

fn unknown_field(message: &str) -> Option<&str> {
    let rest = message.strip_prefix("unknown field `")?;
    rest.split_once('`').map(|(name, _)| name)
}

/// Resolve a config document (already merged with command-line overrides).
pub fn resolve(document: Value) -> Result<RunConfig, CliError> {
    if !document.is_object() {
        return Err(CliError::validation(".", "config must be a JSON object"));
    }
    let raw: RawConfig = strict(document, "")?;
    raw.potential.validate().map_err(|e| prefixed(e, "potential"))?;
    let options_value = match raw.options {
        Value::Null => Value::Object(Map::new()),
        v => v,
    };
    let options = match raw.command {
        CommandName::Wigner => Options::Wigner(strict(options_value, "options")?),
        CommandName::Equilibrium => Options::Equilibrium(strict(options_value, "options")?),
        CommandName::Thermo => Options::Thermo(strict(options_value, "options")?),
        CommandName::Quantize => Options::Quantize(strict(options_value, "options")?),
        CommandName::Propagate => Options::Propagate(strict(options_value, "options")?),
        CommandName::Oracle => Options::Oracle(strict(options_value, "options")?),
    };
    let ensemble = raw.ensemble;
    for (name, value) in [("hbar", ensemble.hbar), ("k_B", ensemble.k_b)] {
        if !(value.is_finite() && value > 0.0) {
            return Err(CliError::validation(&format!("ensemble.{name}"), "must be finite and positive"));
        }
    }
    if let Some(beta) = ensemble.beta {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(CliError::validation("ensemble.beta", "must be finite and positive"));
        }
    }
    Ok(RunConfig {
        command: raw.command,
        potential: raw.potential,
        ensemble,
        options,
        format: raw.format,
        out: raw.out,
        normalization: raw.normalization,
    })
}

fn prefixed(err: qbridge::Error, prefix: &str) -> CliError {
    match err {
        qbridge::Error::InvalidParameter { name, reason } => CliError::validation(&format!("{prefix}.{name}"), &reason),
        other => CliError::validation(prefix, &other.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn grid_syntax() {
        let g: Grid = "-3:3:121".parse().unwrap();
        assert_eq!(g.points().len(), 121);
        assert_eq!(g.points()[60], 0.0);
        assert!("1:2".parse::<Grid>().is_err());
        assert!("2:1:5".parse::<Grid>().is_err());
        assert!("0:1:0".parse::<Grid>().is_err());
    }

    #[test]
    fn level_syntax() {
        let l: LevelRange = "3..10".parse().unwrap();
        assert_eq!((l.first, l.last), (3, 10));
        assert!("4..2".parse::<LevelRange>().is_err());
        assert!("4".parse::<LevelRange>().is_err());
    }

    #[test]
    fn unknown_option_is_named() {
        let err = resolve(json!({
            "command": "quantize",
            "potential": {"family": "harmonic", "omega": 1.0},
            "options": {"levles": "0..4"}
        }))
        .unwrap_err();
        assert_eq!(err.field(), Some("options.levles"));
    }

    #[test]
    fn bad_potential_parameter_is_named() {
        let err = resolve(json!({
            "command": "oracle",
            "potential": {"family": "harmonic", "omega": -1.0}
        }))
        .unwrap_err();
        assert_eq!(err.field(), Some("potential.omega"));
    }

    #[test]
    fn unknown_fields_are_named_at_every_level() {
        let err = resolve(json!({
            "command": "oracle",
            "potential": {"family": "harmonic", "omga": 1.0}
        }))
        .unwrap_err();
        assert_eq!(err.field(), Some("potential.omga"));
        let err = resolve(json!({
            "command": "oracle",
            "potential": {"family": "harmonic", "omega": 1.0},
            "colour": "red"
        }))
        .unwrap_err();
        assert_eq!(err.field(), Some("colour"));
    }

    #[test]
    fn defaults_are_filled() {
        let cfg = resolve(json!({
            "command": "quantize",
            "potential": {"family": "harmonic", "omega": 1.0}
        }))
        .unwrap();
        let echoed = serde_json::to_value(&cfg).unwrap();
        assert_eq!(echoed["options"]["levels"], "0..4");
        assert_eq!(echoed["options"]["class"], "auto");
        assert_eq!(echoed["ensemble"]["hbar"], 1.0);
    }
}
