//! TOML configuration documents.
//!
//! Every frequency is a string carrying its unit, `"5 gamma"` or
//! `"-31.7 MHz"`; a bare number where a frequency is expected is rejected.
//! MHz values need the calibration `units.gamma_mhz` (MHz per Γ). Unknown
//! keys are errors, and every error names the offending key path.
//!
//! ```toml
//! [units]
//! gamma_mhz = 6.0666      # optional unless MHz appears
//! display = "gamma"       # or "MHz"
//!
//! [levels]
//! delta23 = "5 gamma"
//! delta34 = "10 gamma"
//! gammas = ["1 gamma", "1 gamma", "1 gamma"]   # optional
//!
//! [coupling]
//! g_sqrt_n = "4.3 gamma"  # or per_transition = [g2, g3, g4]
//!
//! [cavity]
//! kappa = "2 gamma"
//! delta_c = "0 gamma"
//! drive = 1.0             # optional, dimensionless
//!
//! [scan]
//! dp_min = "-30 gamma"
//! dp_max = "20 gamma"
//! points = 5001
//!
//! [branches]              # optional; defaults to the scan range, 601 points
//! dc_min = "-40 gamma"
//! dc_max = "20 gamma"
//! points = 601
//!
//! [fit]                   # optional
//! free = ["g", "kappa", "delta_c"]
//! max_iterations = 500
//! scale = 1.0
//! offset = "0 gamma"
//! bounds = { kappa = ["0.1 gamma", "20 gamma"], scale = [0.1, 10.0] }
//! ```

use std::fmt;

use cqed_core::fit::{Parameter, DEFAULT_MAX_ITERATIONS};
use cqed_core::model::{
    convert, CavityParams, CollectiveCoupling, FrequencyQuantity, FrequencyUnit, ScanGrid, SystemConfig,
    TransitionLadder,
};
use toml::{Table, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    /// Dotted key path, empty for document-level problems.
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

type Result<T> = std::result::Result<T, ConfigError>;

/// A parsed but not yet unit-resolved configuration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Document {
    pub gamma_mhz: Option<f64>,
    pub display: Option<FrequencyUnit>,
    pub delta23: Option<FrequencyQuantity>,
    pub delta34: Option<FrequencyQuantity>,
    pub gammas: Option<Vec<FrequencyQuantity>>,
    pub g_sqrt_n: Option<FrequencyQuantity>,
    pub per_transition: Option<Vec<FrequencyQuantity>>,
    pub kappa: Option<FrequencyQuantity>,
    pub delta_c: Option<FrequencyQuantity>,
    pub drive: Option<f64>,
    pub dp_min: Option<FrequencyQuantity>,
    pub dp_max: Option<FrequencyQuantity>,
    pub points: Option<i64>,
    pub dc_min: Option<FrequencyQuantity>,
    pub dc_max: Option<FrequencyQuantity>,
    pub dc_points: Option<i64>,
    pub fit: FitSection,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitSection {
    pub free: Option<Vec<String>>,
    pub max_iterations: Option<i64>,
    pub scale: Option<f64>,
    pub offset: Option<FrequencyQuantity>,
    /// Raw (lower, upper) per parameter name; units depend on the parameter.
    pub bounds: Vec<(String, Value, Value)>,
}

/// Values given on the command line. Bare numbers are read in the
/// document's display unit.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub g_sqrt_n: Option<String>,
    pub delta_c: Option<String>,
    pub kappa: Option<String>,
    pub dp_min: Option<String>,
    pub dp_max: Option<String>,
    pub points: Option<usize>,
}

pub fn parse_unit(s: &str) -> Option<FrequencyUnit> {
    match s {
        "gamma" | "Gamma" | "Γ" => Some(FrequencyUnit::Gamma),
        "MHz" | "mhz" => Some(FrequencyUnit::MHz),
        _ => None,
    }
}

pub fn unit_name(unit: FrequencyUnit) -> &'static str {
    match unit {
        FrequencyUnit::Gamma => "gamma",
        FrequencyUnit::MHz => "MHz",
    }
}

/// `"<number> <unit>"`.
pub fn parse_frequency(s: &str, path: &str) -> Result<FrequencyQuantity> {
    let mut parts = s.split_whitespace();
    let (Some(number), Some(unit), None) = (parts.next(), parts.next(), parts.next()) else {
        return Err(ConfigError::new(path, format!("expected \"<number> <unit>\", got {s:?}")));
    };
    let value: f64 = number
        .parse()
        .map_err(|_| ConfigError::new(path, format!("{number:?} is not a number")))?;
    if !value.is_finite() {
        return Err(ConfigError::new(path, "must be finite"));
    }
    let unit = parse_unit(unit).ok_or_else(|| ConfigError::new(path, format!("unknown unit {unit:?} (use gamma or MHz)")))?;
    Ok(FrequencyQuantity { value, unit })
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn check_keys(table: &Table, path: &str, allowed: &[&str]) -> Result<()> {
    match table.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(ConfigError::new(
            join(path, k),
            format!("unknown key (expected one of: {})", allowed.join(", ")),
        )),
        None => Ok(()),
    }
}

fn sub_table<'a>(table: &'a Table, key: &str) -> Result<Option<&'a Table>> {
    match table.get(key) {
        None => Ok(None),
        Some(Value::Table(t)) => Ok(Some(t)),
        Some(_) => Err(ConfigError::new(key, "expected a table")),
    }
}

fn frequency_value(value: &Value, path: &str) -> Result<FrequencyQuantity> {
    match value {
        Value::String(s) => parse_frequency(s, path),
        Value::Integer(_) | Value::Float(_) => Err(ConfigError::new(
            path,
            "frequency needs a unit tag, e.g. \"5 gamma\" or \"31.7 MHz\"",
        )),
        _ => Err(ConfigError::new(path, "expected a frequency string")),
    }
}

fn opt_frequency(table: &Table, path: &str, key: &str) -> Result<Option<FrequencyQuantity>> {
    table.get(key).map(|v| frequency_value(v, &join(path, key))).transpose()
}

fn opt_frequency_list(table: &Table, path: &str, key: &str) -> Result<Option<Vec<FrequencyQuantity>>> {
    let p = join(path, key);
    match table.get(key) {
        None => Ok(None),
        Some(Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(i, v)| frequency_value(v, &format!("{p}[{i}]")))
            .collect::<Result<Vec<_>>>()
            .map(Some),
        Some(_) => Err(ConfigError::new(p, "expected an array of frequency strings")),
    }
}

fn number_value(value: &Value, path: &str) -> Result<f64> {
    match value {
        Value::Float(x) if x.is_finite() => Ok(*x),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(ConfigError::new(path, "expected a finite number")),
    }
}

fn opt_number(table: &Table, path: &str, key: &str) -> Result<Option<f64>> {
    table.get(key).map(|v| number_value(v, &join(path, key))).transpose()
}

fn opt_integer(table: &Table, path: &str, key: &str) -> Result<Option<i64>> {
    match table.get(key) {
        None => Ok(None),
        Some(Value::Integer(i)) => Ok(Some(*i)),
        Some(_) => Err(ConfigError::new(join(path, key), "expected an integer")),
    }
}

pub fn parse_document(text: &str) -> Result<Document> {
    let root: Table = toml::from_str(text).map_err(|e| ConfigError::new("", format!("syntax error: {}", e.message())))?;
    check_keys(&root, "", &["units", "levels", "coupling", "cavity", "scan", "branches", "fit"])?;
    let mut doc = Document::default();

    if let Some(t) = sub_table(&root, "units")? {
        check_keys(t, "units", &["gamma_mhz", "display"])?;
        doc.gamma_mhz = opt_number(t, "units", "gamma_mhz")?;
        doc.display = match t.get("display") {
            None => None,
            Some(Value::String(s)) => Some(
                parse_unit(s).ok_or_else(|| ConfigError::new("units.display", format!("unknown unit {s:?} (use gamma or MHz)")))?,
            ),
            Some(_) => return Err(ConfigError::new("units.display", "expected \"gamma\" or \"MHz\"")),
        };
    }
    if let Some(t) = sub_table(&root, "levels")? {
        check_keys(t, "levels", &["delta23", "delta34", "gammas"])?;
        doc.delta23 = opt_frequency(t, "levels", "delta23")?;
        doc.delta34 = opt_frequency(t, "levels", "delta34")?;
        doc.gammas = opt_frequency_list(t, "levels", "gammas")?;
    }
    if let Some(t) = sub_table(&root, "coupling")? {
        check_keys(t, "coupling", &["g_sqrt_n", "per_transition"])?;
        doc.g_sqrt_n = opt_frequency(t, "coupling", "g_sqrt_n")?;
        doc.per_transition = opt_frequency_list(t, "coupling", "per_transition")?;
    }
    if let Some(t) = sub_table(&root, "cavity")? {
        check_keys(t, "cavity", &["kappa", "delta_c", "drive"])?;
        doc.kappa = opt_frequency(t, "cavity", "kappa")?;
        doc.delta_c = opt_frequency(t, "cavity", "delta_c")?;
        doc.drive = opt_number(t, "cavity", "drive")?;
    }
    if let Some(t) = sub_table(&root, "scan")? {
        check_keys(t, "scan", &["dp_min", "dp_max", "points"])?;
        doc.dp_min = opt_frequency(t, "scan", "dp_min")?;
        doc.dp_max = opt_frequency(t, "scan", "dp_max")?;
        doc.points = opt_integer(t, "scan", "points")?;
    }
    if let Some(t) = sub_table(&root, "branches")? {
        check_keys(t, "branches", &["dc_min", "dc_max", "points"])?;
        doc.dc_min = opt_frequency(t, "branches", "dc_min")?;
        doc.dc_max = opt_frequency(t, "branches", "dc_max")?;
        doc.dc_points = opt_integer(t, "branches", "points")?;
    }
    if let Some(t) = sub_table(&root, "fit")? {
        check_keys(t, "fit", &["free", "max_iterations", "scale", "offset", "bounds"])?;
        doc.fit.free = match t.get("free") {
            None => None,
            Some(Value::Array(items)) => Some(
                items
                    .iter()
                    .enumerate()
                    .map(|(i, v)| match v {
                        Value::String(s) => Ok(s.clone()),
                        _ => Err(ConfigError::new(format!("fit.free[{i}]"), "expected a parameter name")),
                    })
                    .collect::<Result<_>>()?,
            ),
            Some(_) => return Err(ConfigError::new("fit.free", "expected an array of parameter names")),
        };
        doc.fit.max_iterations = opt_integer(t, "fit", "max_iterations")?;
        doc.fit.scale = opt_number(t, "fit", "scale")?;
        doc.fit.offset = opt_frequency(t, "fit", "offset")?;
        match t.get("bounds") {
            None => {}
            Some(Value::Table(b)) => {
                for (name, v) in b {
                    let path = format!("fit.bounds.{name}");
                    match v {
                        Value::Array(pair) if pair.len() == 2 => {
                            doc.fit.bounds.push((name.clone(), pair[0].clone(), pair[1].clone()))
                        }
                        _ => return Err(ConfigError::new(path, "expected [lower, upper]")),
                    }
                }
            }
            Some(_) => return Err(ConfigError::new("fit.bounds", "expected a table")),
        }
    }
    Ok(doc)
}

/// Fit settings in Γ-units.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSettings {
    pub free: Vec<Parameter>,
    pub max_iterations: usize,
    pub scale: f64,
    pub offset: f64,
    pub bounds: Vec<(Parameter, f64, f64)>,
}

/// A validated configuration with every frequency in Γ-units.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub system: SystemConfig,
    pub gamma_mhz: Option<f64>,
    pub display: FrequencyUnit,
    pub per_transition: bool,
    /// (min, max, points) for cavity-detuning scans.
    pub branches: (f64, f64, usize),
    pub fit: FitSettings,
}

impl Resolved {
    /// Γ-units to the display unit.
    pub fn to_display(&self, x: f64) -> f64 {
        match self.display {
            FrequencyUnit::Gamma => x,
            FrequencyUnit::MHz => x * self.gamma_mhz.unwrap_or(1.0),
        }
    }

    /// Display unit to Γ-units.
    pub fn from_display(&self, x: f64) -> f64 {
        match self.display {
            FrequencyUnit::Gamma => x,
            FrequencyUnit::MHz => x / self.gamma_mhz.unwrap_or(1.0),
        }
    }

    pub fn display_name(&self) -> &'static str {
        unit_name(self.display)
    }
}

pub fn parse_parameter(name: &str, per_transition: bool, path: &str) -> Result<Parameter> {
    let p = match name {
        "g" if !per_transition => Parameter::CommonCoupling,
        "g2" if per_transition => Parameter::Coupling(0),
        "g3" if per_transition => Parameter::Coupling(1),
        "g4" if per_transition => Parameter::Coupling(2),
        "kappa" => Parameter::Kappa,
        "delta_c" => Parameter::DeltaC,
        "scale" => Parameter::Scale,
        "offset" => Parameter::Offset,
        _ => {
            let names = if per_transition {
                "g2, g3, g4, kappa, delta_c, scale, offset"
            } else {
                "g, kappa, delta_c, scale, offset"
            };
            return Err(ConfigError::new(path, format!("unknown parameter {name:?} (expected one of: {names})")));
        }
    };
    Ok(p)
}

impl Document {
    fn display_unit(&self) -> FrequencyUnit {
        self.display.unwrap_or(FrequencyUnit::Gamma)
    }

    fn flag_frequency(&self, s: &str, flag: &str) -> Result<FrequencyQuantity> {
        match s.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(FrequencyQuantity {
                value: v,
                unit: self.display_unit(),
            }),
            _ => parse_frequency(s, flag),
        }
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(s) = &o.g_sqrt_n {
            self.g_sqrt_n = Some(self.flag_frequency(s, "--gN")?);
            self.per_transition = None;
        }
        if let Some(s) = &o.delta_c {
            self.delta_c = Some(self.flag_frequency(s, "--delta-c")?);
        }
        if let Some(s) = &o.kappa {
            self.kappa = Some(self.flag_frequency(s, "--kappa")?);
        }
        if let Some(s) = &o.dp_min {
            self.dp_min = Some(self.flag_frequency(s, "--dp-min")?);
        }
        if let Some(s) = &o.dp_max {
            self.dp_max = Some(self.flag_frequency(s, "--dp-max")?);
        }
        if let Some(n) = o.points {
            self.points = Some(n as i64);
        }
        Ok(())
    }

    /// Parse a frequency given in the display unit or with a tag; used for
    /// command-line values that are not part of the document.
    pub fn frequency_flag(&self, s: &str, flag: &str) -> Result<f64> {
        let q = self.flag_frequency(s, flag)?;
        self.gamma(q, flag)
    }

    fn gamma(&self, q: FrequencyQuantity, path: &str) -> Result<f64> {
        match q.unit {
            FrequencyUnit::Gamma => Ok(q.value),
            FrequencyUnit::MHz => {
                let cal = self
                    .gamma_mhz
                    .ok_or_else(|| ConfigError::new("units.gamma_mhz", format!("required to convert {path} from MHz")))?;
                convert(q, FrequencyUnit::Gamma, cal)
                    .map(|c| c.value)
                    .map_err(|e| ConfigError::new("units.gamma_mhz", e.to_string()))
            }
        }
    }

    fn required(&self, q: Option<FrequencyQuantity>, path: &str) -> Result<f64> {
        let q = q.ok_or_else(|| ConfigError::new(path, "missing required key"))?;
        self.gamma(q, path)
    }

    fn positive(&self, q: Option<FrequencyQuantity>, path: &str) -> Result<f64> {
        let v = self.required(q, path)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(ConfigError::new(path, "must be > 0"))
        }
    }

    pub fn resolve(&self) -> Result<Resolved> {
        if let Some(c) = self.gamma_mhz {
            if !(c > 0.0) {
                return Err(ConfigError::new("units.gamma_mhz", "must be > 0"));
            }
        }
        if self.display == Some(FrequencyUnit::MHz) && self.gamma_mhz.is_none() {
            return Err(ConfigError::new("units.gamma_mhz", "required when units.display is MHz"));
        }
        let delta23 = self.positive(self.delta23, "levels.delta23")?;
        let delta34 = self.positive(self.delta34, "levels.delta34")?;
        let gammas = match &self.gammas {
            None => [1.0; 3],
            Some(list) => {
                if list.len() != 3 {
                    return Err(ConfigError::new("levels.gammas", format!("expected 3 entries, got {}", list.len())));
                }
                let mut out = [0.0; 3];
                for (i, q) in list.iter().enumerate() {
                    out[i] = self.positive(Some(*q), &format!("levels.gammas[{i}]"))?;
                }
                out
            }
        };
        let ladder = TransitionLadder::from_splittings(delta23, delta34, gammas)
            .map_err(|e| ConfigError::new("levels", e.to_string()))?;

        let (strengths, per_transition) = match (&self.g_sqrt_n, &self.per_transition) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::new("coupling", "give either g_sqrt_n or per_transition, not both"))
            }
            (None, None) => return Err(ConfigError::new("coupling.g_sqrt_n", "missing required key (or coupling.per_transition)")),
            (Some(g), None) => (vec![self.non_negative(*g, "coupling.g_sqrt_n")?; 3], false),
            (None, Some(list)) => {
                if list.len() != 3 {
                    return Err(ConfigError::new(
                        "coupling.per_transition",
                        format!("expected 3 entries, got {}", list.len()),
                    ));
                }
                let g = list
                    .iter()
                    .enumerate()
                    .map(|(i, q)| self.non_negative(*q, &format!("coupling.per_transition[{i}]")))
                    .collect::<Result<Vec<_>>>()?;
                (g, true)
            }
        };
        let coupling = CollectiveCoupling::new(strengths).map_err(|e| ConfigError::new("coupling", e.to_string()))?;

        let kappa = self.positive(self.kappa, "cavity.kappa")?;
        let delta_c = self.required(self.delta_c, "cavity.delta_c")?;
        let drive = self.drive.unwrap_or(1.0);
        if !(drive > 0.0) {
            return Err(ConfigError::new("cavity.drive", "must be > 0"));
        }
        let cavity = CavityParams::new(kappa, delta_c, drive).map_err(|e| ConfigError::new("cavity", e.to_string()))?;

        let dp_min = self.required(self.dp_min, "scan.dp_min")?;
        let dp_max = self.required(self.dp_max, "scan.dp_max")?;
        if dp_max <= dp_min {
            return Err(ConfigError::new("scan.dp_max", "must exceed scan.dp_min"));
        }
        let points = self.count(self.points, "scan.points")?;
        let grid = ScanGrid::new(dp_min, dp_max, points).map_err(|e| ConfigError::new("scan", e.to_string()))?;
        let system = SystemConfig::new(ladder, coupling, cavity, grid).map_err(|e| ConfigError::new("", e.to_string()))?;

        let dc_min = match self.dc_min {
            Some(q) => self.gamma(q, "branches.dc_min")?,
            None => dp_min,
        };
        let dc_max = match self.dc_max {
            Some(q) => self.gamma(q, "branches.dc_max")?,
            None => dp_max,
        };
        if dc_max <= dc_min {
            return Err(ConfigError::new("branches.dc_max", "must exceed branches.dc_min"));
        }
        let dc_points = match self.dc_points {
            Some(_) => self.count(self.dc_points, "branches.points")?,
            None => 601,
        };

        let fit = self.resolve_fit(per_transition)?;
        Ok(Resolved {
            system,
            gamma_mhz: self.gamma_mhz,
            display: self.display_unit(),
            per_transition,
            branches: (dc_min, dc_max, dc_points),
            fit,
        })
    }

    fn non_negative(&self, q: FrequencyQuantity, path: &str) -> Result<f64> {
        let v = self.gamma(q, path)?;
        if v >= 0.0 {
            Ok(v)
        } else {
            Err(ConfigError::new(path, "must be ≥ 0"))
        }
    }

    fn count(&self, n: Option<i64>, path: &str) -> Result<usize> {
        match n {
            None => Err(ConfigError::new(path, "missing required key")),
            Some(n) if n >= 2 => Ok(n as usize),
            Some(_) => Err(ConfigError::new(path, "must be ≥ 2")),
        }
    }

    fn resolve_fit(&self, per_transition: bool) -> Result<FitSettings> {
        let f = &self.fit;
        let free = match &f.free {
            None => {
                if per_transition {
                    vec![Parameter::Coupling(0), Parameter::Coupling(1), Parameter::Coupling(2), Parameter::Kappa, Parameter::DeltaC]
                } else {
                    vec![Parameter::CommonCoupling, Parameter::Kappa, Parameter::DeltaC]
                }
            }
            Some(names) => names
                .iter()
                .enumerate()
                .map(|(i, n)| parse_parameter(n, per_transition, &format!("fit.free[{i}]")))
                .collect::<Result<_>>()?,
        };
        let max_iterations = match f.max_iterations {
            None => DEFAULT_MAX_ITERATIONS,
            Some(n) if n >= 1 => n as usize,
            Some(_) => return Err(ConfigError::new("fit.max_iterations", "must be ≥ 1")),
        };
        let scale = f.scale.unwrap_or(1.0);
        if !(scale > 0.0) {
            return Err(ConfigError::new("fit.scale", "must be > 0"));
        }
        let offset = match f.offset {
            Some(q) => self.gamma(q, "fit.offset")?,
            None => 0.0,
        };
        let mut bounds = Vec::new();
        for (name, lo, hi) in &f.bounds {
            let path = format!("fit.bounds.{name}");
            let id = parse_parameter(name, per_transition, &path)?;
            let (lo, hi) = if id == Parameter::Scale {
                (number_value(lo, &format!("{path}[0]"))?, number_value(hi, &format!("{path}[1]"))?)
            } else {
                (
                    self.gamma(frequency_value(lo, &format!("{path}[0]"))?, &path)?,
                    self.gamma(frequency_value(hi, &format!("{path}[1]"))?, &path)?,
                )
            };
            if !(lo < hi) {
                return Err(ConfigError::new(path, "lower bound must be below upper bound"));
            }
            bounds.push((id, lo, hi));
        }
        Ok(FitSettings {
            free,
            max_iterations,
            scale,
            offset,
            bounds,
        })
    }
}

/// Parse and resolve in one step.
pub fn parse_config(text: &str) -> Result<Resolved> {
    parse_document(text)?.resolve()
}
