//! Experiment configuration.
//!
//! A configuration is one JSON document. Missing keys take the defaults of
//! [`ExperimentConfig::default`]; dotted `key=value` overrides are applied on
//! top. Field quantities are in μT, times in μs and rates in μs⁻¹; any of
//! them may also be written as a string with an explicit unit suffix, e.g.
//! `"0.006 mT"` or `"500 ns"`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::dynamics::{
    ControlSignal, FieldModel, FilterConfig, HalfStepRule, Prism, TimeGrid, Vec3,
};
use crate::error::{Error, Result};
use crate::model::{triplet_states, HyperfineTable, ModelAssembly, PhysicalConstants};
use crate::optimize::{ControlProblem, GpmSettings, IpmpSettings, Method};
use crate::spin_algebra::{build_spin_system, DEFAULT_MAX_PROTONS};

/// Physical unit attached to a configuration key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Dimensionless,
    Microsecond,
    PerMicrosecond,
    Microtesla,
    Millitesla,
    RadPerMicrosecondMillitesla,
}

impl Unit {
    pub fn symbol(self) -> &'static str {
        match self {
            Unit::Dimensionless => "-",
            Unit::Microsecond => "μs",
            Unit::PerMicrosecond => "μs⁻¹",
            Unit::Microtesla => "μT",
            Unit::Millitesla => "mT",
            Unit::RadPerMicrosecondMillitesla => "rad·μs⁻¹·mT⁻¹",
        }
    }

    /// Scale factors from accepted suffixes into this unit.
    fn suffixes(self) -> &'static [(&'static str, f64)] {
        match self {
            Unit::Microsecond => &[("us", 1.0), ("μs", 1.0), ("µs", 1.0), ("ns", 1e-3), ("ms", 1e3), ("s", 1e6)],
            Unit::PerMicrosecond => &[("/us", 1.0), ("/μs", 1.0), ("/µs", 1.0), ("/ns", 1e3), ("/ms", 1e-3), ("/s", 1e-6)],
            Unit::Microtesla => &[("uT", 1.0), ("μT", 1.0), ("µT", 1.0), ("nT", 1e-3), ("mT", 1e3), ("T", 1e6)],
            Unit::Millitesla => &[("mT", 1.0), ("uT", 1e-3), ("μT", 1e-3), ("µT", 1e-3), ("T", 1e3)],
            Unit::Dimensionless | Unit::RadPerMicrosecondMillitesla => &[],
        }
    }
}

/// Documentation entry for one configuration key.
#[derive(Debug, Clone, Copy)]
pub struct ConfigKey {
    pub path: &'static str,
    pub unit: Unit,
    pub help: &'static str,
}

const fn key(path: &'static str, unit: Unit, help: &'static str) -> ConfigKey {
    ConfigKey { path, unit, help }
}

/// Every configuration key, in document order.
pub const CONFIG_KEYS: &[ConfigKey] = &[
    key("p", Unit::Dimensionless, "number of protons, 1..=7 (default 1)"),
    key("t_final", Unit::Microsecond, "final time T (default 0.5)"),
    key("steps", Unit::Dimensionless, "number of uniform time intervals (default 200)"),
    key("constants.gyro", Unit::RadPerMicrosecondMillitesla, "electron gyromagnetic ratio (default 176.0859)"),
    key("constants.k_singlet", Unit::PerMicrosecond, "singlet recombination rate k_S (default 10)"),
    key("constants.k_triplet", Unit::PerMicrosecond, "triplet recombination rate k_T (default 10)"),
    key("hyperfine", Unit::Millitesla, "rows [A_x, A_y, A_z], one per proton (default: reference table)"),
    key("half_step", Unit::Dimensionless, "midpoint reconstruction: \"hermite\" (default) or \"average\""),
    key("prism.lower", Unit::Microtesla, "lower control bounds (default [3, 3, 3])"),
    key("prism.upper", Unit::Microtesla, "upper control bounds (default [6, 6, 6])"),
    key("filter.enabled", Unit::Dimensionless, "false selects the no-filter model (default true)"),
    key("filter.gamma", Unit::PerMicrosecond, "filter rate γ (default 1)"),
    key("filter.v0", Unit::Microtesla, "initial field v(0) (default [3, 3, 3])"),
    key("filter.match_v0", Unit::Dimensionless, "set v0 to the no-filter optimum at t = 0 (default false)"),
    key("u0.constant", Unit::Microtesla, "constant initial control (default [3, 3, 3])"),
    key("u0.explicit", Unit::Microtesla, "initial control, one [u_x, u_y, u_z] per interval"),
    key("u0.grid.vertex", Unit::Microtesla, "grid initializer vertex + spacing·(1−i, 1−j, 1−k)"),
    key("u0.grid.spacing", Unit::Microtesla, "grid initializer spacing (default 0.5)"),
    key("u0.grid.index", Unit::Dimensionless, "grid initializer indices [i, j, k] in 0..=2 (default [1, 1, 1])"),
    key("optimizer", Unit::Dimensionless, "\"ipmp\" (default) or \"gpm\""),
    key("gpm.eps_cost", Unit::Dimensionless, "relative cost tolerance (default 1e-5)"),
    key("gpm.eps_ctrl", Unit::Dimensionless, "relative control tolerance (default 1e-5)"),
    key("gpm.max_iters", Unit::Dimensionless, "iteration cap (default 200)"),
    key("gpm.step_scale", Unit::Dimensionless, "multiplier on the Barzilai-Borwein step (default 4)"),
    key("gpm.lambda0", Unit::Dimensionless, "first step length in μT²·μs; null = 10% of the narrowest prism side"),
    key("gpm.bb_denominator", Unit::Dimensionless, "\"squared\" (default) or \"norm\""),
    key("ipmp.max_iters", Unit::Dimensionless, "iteration cap (default 50)"),
    key("ipmp.cycle_window", Unit::Dimensionless, "history length for cycle detection (default 8)"),
    key("seed", Unit::Dimensionless, "seed for randomized checks (default 0)"),
    key("sweep.gammas", Unit::PerMicrosecond, "γ values for sweep-gamma and yield-loss"),
    key("yield_loss.p_max", Unit::Dimensionless, "largest proton count in the yield-loss table (default 3)"),
    key("yield_loss.u0s", Unit::Microtesla, "constant initial controls of the table columns"),
    key("yield_loss.v0s", Unit::Microtesla, "filter initial fields; \"matched\" uses the no-filter optimum"),
    key("grid_study.vertices", Unit::Microtesla, "vertices of the 27-point initializer grids"),
    key("grid_study.spacing", Unit::Microtesla, "initializer grid spacing (default 0.5)"),
];

/// Keys whose value is replaced wholesale rather than merged.
const REPLACED: &[&str] = &["u0", "hyperfine"];

fn unit_of(path: &str) -> Unit {
    CONFIG_KEYS
        .iter()
        .find(|k| k.path == path)
        .map_or(Unit::Dimensionless, |k| k.unit)
}

/// Human-readable key table for command-line help.
pub fn config_key_help() -> String {
    let width = CONFIG_KEYS.iter().map(|k| k.path.len()).max().unwrap_or(0);
    let mut out = String::from("Configuration keys (JSON document, or --override key=value):\n");
    for k in CONFIG_KEYS {
        out.push_str(&format!(
            "  {:width$}  [{}] {}\n",
            k.path,
            k.unit.symbol(),
            k.help
        ));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSettings {
    pub enabled: bool,
    pub gamma: f64,
    pub v0: Vec3,
    pub match_v0: bool,
}

impl Default for FilterSettings {
    fn default() -> Self {
        Self {
            enabled: true,
            gamma: 1.0,
            v0: [3.0; 3],
            match_v0: false,
        }
    }
}

/// One point of a 27-point initializer grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridPoint {
    pub vertex: Vec3,
    #[serde(default = "default_spacing")]
    pub spacing: f64,
    #[serde(default = "center_index")]
    pub index: [usize; 3],
}

fn default_spacing() -> f64 {
    0.5
}

fn center_index() -> [usize; 3] {
    [1, 1, 1]
}

impl GridPoint {
    /// `vertex + spacing · (1−i, 1−j, 1−k)`, before clipping.
    pub fn value(&self) -> Vec3 {
        std::array::from_fn(|c| self.vertex[c] + self.spacing * (1.0 - self.index[c] as f64))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialControl {
    Constant(Vec3),
    Explicit(Vec<Vec3>),
    Grid(GridPoint),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum V0Keyword {
    Matched,
}

/// Filter initial field used by the yield-loss table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum V0Choice {
    Fixed(Vec3),
    Keyword(V0Keyword),
}

impl V0Choice {
    pub fn label(&self) -> String {
        match self {
            V0Choice::Fixed(v) => format_vec(v),
            V0Choice::Keyword(V0Keyword::Matched) => "matched".into(),
        }
    }
}

/// `[3,3,3]`-style label with shortest round-trip numbers.
pub fn format_vec(v: &Vec3) -> String {
    format!("[{},{},{}]", v[0], v[1], v[2])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSettings {
    pub gammas: Vec<f64>,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            gammas: vec![0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 40.0, 60.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct YieldLossSettings {
    pub p_max: usize,
    pub u0s: Vec<Vec3>,
    pub v0s: Vec<V0Choice>,
}

impl Default for YieldLossSettings {
    fn default() -> Self {
        Self {
            p_max: 3,
            u0s: vec![[3.0; 3], [6.0; 3], [6.0, 6.0, 3.0]],
            v0s: vec![
                V0Choice::Fixed([3.0; 3]),
                V0Choice::Fixed([6.0; 3]),
                V0Choice::Keyword(V0Keyword::Matched),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridStudySettings {
    pub vertices: Vec<Vec3>,
    pub spacing: f64,
}

impl Default for GridStudySettings {
    fn default() -> Self {
        Self {
            vertices: vec![[6.0, 6.0, -1.0], [6.0, 6.0, 2.0]],
            spacing: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub p: usize,
    pub t_final: f64,
    pub steps: usize,
    pub constants: PhysicalConstants,
    /// `None` selects the reference table for `p` protons.
    pub hyperfine: Option<HyperfineTable>,
    pub half_step: HalfStepRule,
    pub prism: Prism,
    pub filter: FilterSettings,
    pub u0: InitialControl,
    pub optimizer: Method,
    pub gpm: GpmSettings,
    pub ipmp: IpmpSettings,
    pub seed: u64,
    pub sweep: SweepSettings,
    pub yield_loss: YieldLossSettings,
    pub grid_study: GridStudySettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            p: 1,
            t_final: 0.5,
            steps: 200,
            constants: PhysicalConstants::default(),
            hyperfine: None,
            half_step: HalfStepRule::default(),
            prism: Prism::cube(3.0, 6.0),
            filter: FilterSettings::default(),
            u0: InitialControl::Constant([3.0; 3]),
            optimizer: Method::Ipmp,
            gpm: GpmSettings::default(),
            ipmp: IpmpSettings::default(),
            seed: 0,
            sweep: SweepSettings::default(),
            yield_loss: YieldLossSettings::default(),
            grid_study: GridStudySettings::default(),
        }
    }
}

fn check_vec(key: &str, v: &Vec3) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::config(key, "components must be finite"))
    }
}

fn check_protons(key: &str, p: usize) -> Result<()> {
    if (1..=DEFAULT_MAX_PROTONS).contains(&p) {
        Ok(())
    } else {
        Err(Error::config(
            key,
            format!("proton count {p} outside 1..={DEFAULT_MAX_PROTONS}"),
        ))
    }
}

impl ExperimentConfig {
    /// Fills implicit defaults (the hyperfine table) and validates.
    pub fn resolved(mut self) -> Result<Self> {
        check_protons("p", self.p)?;
        if self.hyperfine.is_none() {
            self.hyperfine = Some(HyperfineTable::reference(self.p));
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        check_protons("p", self.p)?;
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::config("t_final", "must be positive and finite"));
        }
        if self.steps == 0 {
            return Err(Error::config("steps", "must be at least 1"));
        }
        self.constants.validate()?;
        if let Some(table) = &self.hyperfine {
            if table.len() != self.p {
                return Err(Error::HyperfineRowMismatch {
                    rows: table.len(),
                    protons: self.p,
                });
            }
            if table.rows.iter().flatten().any(|x| !x.is_finite()) {
                return Err(Error::config("hyperfine", "couplings must be finite"));
            }
        }
        self.prism.validate()?;
        if self.filter.enabled && !(self.filter.gamma > 0.0 && self.filter.gamma.is_finite()) {
            return Err(Error::config("filter.gamma", "must be positive and finite"));
        }
        check_vec("filter.v0", &self.filter.v0)?;
        let grid = self.grid()?;
        let u0 = self.initial_control(&grid)?;
        if !u0.is_within(&self.prism) {
            return Err(Error::config("u0", "initial control lies outside the prism"));
        }
        self.gpm.validate()?;
        self.ipmp.validate()?;
        if self.sweep.gammas.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
            return Err(Error::config("sweep.gammas", "every γ must be positive and finite"));
        }
        check_protons("yield_loss.p_max", self.yield_loss.p_max)?;
        for u in &self.yield_loss.u0s {
            check_vec("yield_loss.u0s", u)?;
        }
        for v in &self.yield_loss.v0s {
            if let V0Choice::Fixed(v) = v {
                check_vec("yield_loss.v0s", v)?;
            }
        }
        for v in &self.grid_study.vertices {
            check_vec("grid_study.vertices", v)?;
        }
        if !(self.grid_study.spacing > 0.0 && self.grid_study.spacing.is_finite()) {
            return Err(Error::config("grid_study.spacing", "must be positive and finite"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.t_final, self.steps)
    }

    pub fn hyperfine_table(&self) -> HyperfineTable {
        self.hyperfine
            .clone()
            .unwrap_or_else(|| HyperfineTable::reference(self.p))
    }

    pub fn field_model(&self) -> FieldModel {
        if self.filter.enabled {
            FieldModel::Filtered(FilterConfig {
                gamma: self.filter.gamma,
                v0: self.filter.v0,
            })
        } else {
            FieldModel::NoFilter
        }
    }

    pub fn initial_control(&self, grid: &TimeGrid) -> Result<ControlSignal> {
        match &self.u0 {
            InitialControl::Constant(v) => {
                check_vec("u0.constant", v)?;
                Ok(ControlSignal::constant(*grid, *v))
            }
            InitialControl::Explicit(values) => {
                if values.len() != grid.steps() {
                    return Err(Error::config(
                        "u0.explicit",
                        format!("{} values given for {} intervals", values.len(), grid.steps()),
                    ));
                }
                for v in values {
                    check_vec("u0.explicit", v)?;
                }
                ControlSignal::new(*grid, values.clone())
            }
            InitialControl::Grid(point) => {
                check_vec("u0.grid.vertex", &point.vertex)?;
                if point.index.iter().any(|&i| i > 2) {
                    return Err(Error::config("u0.grid.index", "indices must lie in 0..=2"));
                }
                Ok(ControlSignal::constant(*grid, self.prism.clamp(point.value())))
            }
        }
    }

    /// Builds the optimal-control problem described by this configuration.
    pub fn problem(&self) -> Result<ControlProblem> {
        let sys = build_spin_system(self.p)?;
        let assembly = ModelAssembly::new(sys, self.constants, &self.hyperfine_table())?;
        let basis = triplet_states(assembly.system());
        Ok(ControlProblem {
            assembly,
            basis,
            grid: self.grid()?,
            field_model: self.field_model(),
            prism: self.prism,
            half_step: self.half_step,
        })
    }

    /// Copy with the filter set to `gamma`, or the no-filter model for `None`.
    pub fn with_gamma(&self, gamma: Option<f64>) -> Self {
        let mut cfg = self.clone();
        match gamma {
            Some(g) => {
                cfg.filter.enabled = true;
                cfg.filter.gamma = g;
            }
            None => cfg.filter.enabled = false,
        }
        cfg
    }

    /// Copy for a different proton count. A table with at least `p` rows is
    /// truncated; the reference table is regenerated.
    pub fn with_protons(&self, p: usize) -> Result<Self> {
        check_protons("p", p)?;
        let mut cfg = self.clone();
        cfg.p = p;
        cfg.hyperfine = match &self.hyperfine {
            None => None,
            Some(t) if *t == HyperfineTable::reference(self.p) => Some(HyperfineTable::reference(p)),
            Some(t) if t.len() >= p => Some(HyperfineTable {
                rows: t.rows[..p].to_vec(),
            }),
            Some(t) => {
                return Err(Error::config(
                    "hyperfine",
                    format!("table has {} rows, {p} protons requested", t.len()),
                ))
            }
        };
        Ok(cfg)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }
}

/// Loads a configuration file (or the defaults when `path` is `None`),
/// applies dotted overrides and resolves it.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<ExperimentConfig> {
    let user = match path {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::config(path.display().to_string(), format!("parse error: {e}")))?
        }
        None => Value::Object(Map::new()),
    };
    config_from_value(user, overrides)
}

/// Parses a configuration document held in memory.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<ExperimentConfig> {
    let user = serde_json::from_str(text)
        .map_err(|e| Error::config("config", format!("parse error: {e}")))?;
    config_from_value(user, overrides)
}

fn config_from_value(user: Value, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut doc = serde_json::to_value(ExperimentConfig::default())?;
    if !user.is_object() {
        return Err(Error::config("config", "top level must be a JSON object"));
    }
    merge(&mut doc, user, "")?;
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    normalize_units(&mut doc, "")?;
    let cfg: ExperimentConfig =
        serde_json::from_value(doc).map_err(|e| Error::config("config", e.to_string()))?;
    cfg.resolved()
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

fn merge(base: &mut Value, user: Value, path: &str) -> Result<()> {
    match (base, user) {
        (Value::Object(b), Value::Object(u)) => {
            for (k, v) in u {
                let p = join(path, &k);
                let Some(slot) = b.get_mut(&k) else {
                    return Err(Error::config(p, "unknown key"));
                };
                if REPLACED.contains(&p.as_str()) || !(slot.is_object() && v.is_object()) {
                    *slot = v;
                } else {
                    merge(slot, v, &p)?;
                }
            }
            Ok(())
        }
        (slot, v) => {
            *slot = v;
            Ok(())
        }
    }
}

/// Applies `a.b.c=value`. The value is parsed as JSON, falling back to a
/// plain string.
fn apply_override(doc: &mut Value, text: &str) -> Result<()> {
    let (path, raw) = text
        .split_once('=')
        .ok_or_else(|| Error::config(text, "override must have the form key=value"))?;
    let path = path.trim();
    let value: Value =
        serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(Error::config(path, "empty key segment"));
    }
    let mut node = doc;
    let mut walked = String::new();
    // Inside a replaced value new keys may be created; serde checks them.
    let mut free = false;
    for (n, seg) in segments.iter().enumerate() {
        let last = n + 1 == segments.len();
        let entering = REPLACED.contains(&walked.as_str());
        walked = join(&walked, seg);
        node = match node {
            Value::Object(map) => {
                if !map.contains_key(*seg) {
                    if entering {
                        // Switching variant of a replaced value, e.g. u0.grid.
                        map.clear();
                        free = true;
                    } else if !free {
                        return Err(Error::config(path, "unknown key"));
                    }
                    map.insert(seg.to_string(), Value::Object(Map::new()));
                }
                map.get_mut(*seg).expect("key present")
            }
            Value::Array(items) => {
                let idx: usize = seg
                    .parse()
                    .map_err(|_| Error::config(path, format!("'{seg}' is not an array index")))?;
                let len = items.len();
                items
                    .get_mut(idx)
                    .ok_or_else(|| Error::config(path, format!("index {idx} out of range (length {len})")))?
            }
            _ => return Err(Error::config(path, format!("'{walked}' has no sub-keys"))),
        };
        if last {
            *node = value;
            return Ok(());
        }
    }
    unreachable!("split yields at least one segment")
}

/// Converts unit-suffixed strings into plain numbers in the key's unit.
fn normalize_units(value: &mut Value, path: &str) -> Result<()> {
    match value {
        Value::Object(map) => {
            for (k, v) in map.iter_mut() {
                normalize_units(v, &join(path, k))?;
            }
        }
        // Array elements share their parent's unit.
        Value::Array(items) => {
            for v in items {
                normalize_units(v, path)?;
            }
        }
        Value::String(s) => {
            let unit = unit_of(path);
            if unit.suffixes().is_empty() {
                return Ok(());
            }
            if path == "yield_loss.v0s" && s == "matched" {
                return Ok(());
            }
            *value = Value::from(parse_quantity(s, unit).map_err(|reason| Error::config(path, reason))?);
        }
        _ => {}
    }
    Ok(())
}

fn parse_quantity(text: &str, unit: Unit) -> std::result::Result<f64, String> {
    let text = text.trim();
    let split = text
        .char_indices()
        .find(|(i, c)| {
            !(c.is_ascii_digit() || matches!(c, '.' | '+' | '-' | 'e' | 'E'))
                // An 'e' followed by a non-digit starts a suffix, not an exponent.
                || (matches!(c, 'e' | 'E') && !text[i + 1..].starts_with(|d: char| d.is_ascii_digit() || d == '-' || d == '+'))
        })
        .map_or(text.len(), |(i, _)| i);
    let (number, suffix) = text.split_at(split);
    let number: f64 = number
        .trim()
        .parse()
        .map_err(|_| format!("'{text}' is not a number with a unit suffix"))?;
    let suffix = suffix.trim();
    unit.suffixes()
        .iter()
        .find(|(s, _)| *s == suffix)
        .map(|(_, scale)| number * scale)
        .ok_or_else(|| {
            let accepted: Vec<&str> = unit.suffixes().iter().map(|(s, _)| *s).collect();
            format!(
                "unknown unit suffix '{suffix}' for a quantity in {}; accepted: {}",
                unit.symbol(),
                accepted.join(", ")
            )
        })
}
