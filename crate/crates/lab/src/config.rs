//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Lists are comma
//! separated. Tolerance overrides are written `tol.<key> = <value>`.
//! Command-line overrides go through [`RunConfig::set`], so they obey the
//! same validation as the file.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use benney_core::io::fmt_g17;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKeyAt { line: usize, key: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("line {line}: {message}")]
    BadValueAt { line: usize, message: String },
    #[error("{0}")]
    BadValue(String),
    #[error("cannot read config {path}: {message}")]
    Read { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Classify,
    Simulate,
    ReduceLift,
    Travelwave,
    Strata,
    Verify,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Classify,
        Command::Simulate,
        Command::ReduceLift,
        Command::Travelwave,
        Command::Strata,
        Command::Verify,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Classify => "classify",
            Command::Simulate => "simulate",
            Command::ReduceLift => "reduce-lift",
            Command::Travelwave => "travelwave",
            Command::Strata => "strata",
            Command::Verify => "verify",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown command `{s}`"))
    }
}

/// Which system a sweep or an initial condition refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum System {
    /// The `n`-component Lax system.
    Lax,
    /// The 2×2 reduction in `(w, v)`.
    Reduced,
}

impl FromStr for System {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "lax" => Ok(System::Lax),
            "reduced" => Ok(System::Reduced),
            _ => Err(format!("system must be `lax` or `reduced`, got `{s}`")),
        }
    }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            System::Lax => "lax",
            System::Reduced => "reduced",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub n: usize,
    /// Cell count.
    pub grid: usize,
    pub length: f64,
    pub cfl: f64,
    pub tmax: f64,
    pub visc: f64,
    pub frame_dt: Option<f64>,
    /// Builtin initial-data name.
    pub init: String,
    /// Initial data file for the `csv` builtin.
    pub csv: Option<PathBuf>,
    pub amp: Option<f64>,
    pub offset: Option<f64>,
    pub mu: f64,
    pub constants: Vec<f64>,
    pub lower: Vec<f64>,
    pub state: Vec<f64>,
    pub system: System,
    pub range: (f64, f64),
    pub points: usize,
    pub out: Option<PathBuf>,
    pub seed: u64,
    /// Check ids selected for `verify`; empty runs all.
    pub check: Vec<String>,
    pub tol: BTreeMap<String, f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: None,
            n: 3,
            grid: 256,
            length: 1.0,
            cfl: 0.45,
            tmax: 1.0,
            visc: 0.0,
            frame_dt: None,
            init: "autonomous-n3".into(),
            csv: None,
            amp: None,
            offset: None,
            mu: 0.0,
            constants: Vec::new(),
            lower: Vec::new(),
            state: Vec::new(),
            system: System::Lax,
            range: (-2.0, 2.0),
            points: 101,
            out: None,
            seed: 20240611,
            check: Vec::new(),
            tol: BTreeMap::new(),
        }
    }
}

pub const KEYS: [&str; 22] = [
    "command",
    "n",
    "grid",
    "length",
    "cfl",
    "tmax",
    "visc",
    "frame_dt",
    "init",
    "csv",
    "amp",
    "offset",
    "mu",
    "constants",
    "lower",
    "state",
    "system",
    "range",
    "points",
    "out",
    "seed",
    "check",
];

fn number(key: &str, value: &str) -> Result<f64, ConfigError> {
    let x: f64 = value
        .parse()
        .map_err(|_| ConfigError::BadValue(format!("{key}: `{value}` is not a number")))?;
    if !x.is_finite() {
        return Err(ConfigError::BadValue(format!(
            "{key}: value must be finite"
        )));
    }
    Ok(x)
}

fn positive(key: &str, value: &str) -> Result<f64, ConfigError> {
    let x = number(key, value)?;
    if x <= 0.0 {
        return Err(ConfigError::BadValue(format!(
            "{key}: must be positive, got {value}"
        )));
    }
    Ok(x)
}

fn count(key: &str, value: &str) -> Result<usize, ConfigError> {
    value.parse().map_err(|_| {
        ConfigError::BadValue(format!("{key}: `{value}` is not a non-negative integer"))
    })
}

fn list(key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|s| number(key, s.trim())).collect()
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| fmt_g17(*x)).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    text: trimmed.to_string(),
                });
            };
            cfg.set(key.trim(), value.trim()).map_err(|e| match e {
                ConfigError::UnknownKey(key) => ConfigError::UnknownKeyAt { line, key },
                ConfigError::BadValue(message) => ConfigError::BadValueAt { line, message },
                other => other,
            })?;
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if let Some(name) = key.strip_prefix("tol.") {
            return self.set_tol(name, value);
        }
        match key {
            "command" => {
                self.command = if value.is_empty() {
                    None
                } else {
                    Some(value.parse().map_err(ConfigError::BadValue)?)
                }
            }
            "n" => {
                let n = count(key, value)?;
                if n < 2 {
                    return Err(ConfigError::BadValue(format!(
                        "n must be at least 2, got {n}"
                    )));
                }
                self.n = n;
            }
            "grid" => {
                let g = count(key, value)?;
                if g < 16 {
                    return Err(ConfigError::BadValue(format!(
                        "grid must be at least 16, got {g}"
                    )));
                }
                self.grid = g;
            }
            "length" => self.length = positive(key, value)?,
            "cfl" => self.cfl = positive(key, value)?,
            "tmax" => self.tmax = positive(key, value)?,
            "visc" => {
                let v = number(key, value)?;
                if v < 0.0 {
                    return Err(ConfigError::BadValue(format!(
                        "visc must be non-negative, got {value}"
                    )));
                }
                self.visc = v;
            }
            "frame_dt" => {
                self.frame_dt = if value.is_empty() {
                    None
                } else {
                    Some(positive(key, value)?)
                }
            }
            "init" => self.init = value.to_string(),
            "csv" => self.csv = (!value.is_empty()).then(|| PathBuf::from(value)),
            "amp" => {
                self.amp = if value.is_empty() {
                    None
                } else {
                    Some(number(key, value)?)
                }
            }
            "offset" => {
                self.offset = if value.is_empty() {
                    None
                } else {
                    Some(number(key, value)?)
                }
            }
            "mu" => self.mu = number(key, value)?,
            "constants" => self.constants = list(key, value)?,
            "lower" => self.lower = list(key, value)?,
            "state" => self.state = list(key, value)?,
            "system" => self.system = value.parse().map_err(ConfigError::BadValue)?,
            "range" => {
                let r = list(key, value)?;
                match r[..] {
                    [lo, hi] if lo < hi => self.range = (lo, hi),
                    _ => {
                        return Err(ConfigError::BadValue(format!(
                            "range must be `lo,hi` with lo < hi, got `{value}`"
                        )))
                    }
                }
            }
            "points" => {
                let p = count(key, value)?;
                if p < 2 {
                    return Err(ConfigError::BadValue(format!(
                        "points must be at least 2, got {p}"
                    )));
                }
                self.points = p;
            }
            "out" => self.out = (!value.is_empty()).then(|| PathBuf::from(value)),
            "seed" => {
                self.seed = value.parse().map_err(|_| {
                    ConfigError::BadValue(format!("seed: `{value}` is not an integer"))
                })?
            }
            "check" => {
                self.check = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect()
            }
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Tolerance override: `scale` or a check id, each a positive factor.
    pub fn set_tol(&mut self, name: &str, value: &str) -> Result<(), ConfigError> {
        let known = name == "scale" || crate::checks::CHECK_IDS.contains(&name);
        if !known {
            return Err(ConfigError::UnknownKey(format!("tol.{name}")));
        }
        let x = positive(&format!("tol.{name}"), value)?;
        self.tol.insert(name.to_string(), x);
        Ok(())
    }

    /// Every key, in a fixed order, parseable by [`RunConfig::parse`].
    pub fn to_text(&self) -> String {
        let opt = |x: Option<f64>| x.map(fmt_g17).unwrap_or_default();
        let path = |p: &Option<PathBuf>| {
            p.as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default()
        };
        let mut lines = vec![
            format!("command = {}", self.command.map(|c| c.name()).unwrap_or("")),
            format!("n = {}", self.n),
            format!("grid = {}", self.grid),
            format!("length = {}", fmt_g17(self.length)),
            format!("cfl = {}", fmt_g17(self.cfl)),
            format!("tmax = {}", fmt_g17(self.tmax)),
            format!("visc = {}", fmt_g17(self.visc)),
            format!("frame_dt = {}", opt(self.frame_dt)),
            format!("init = {}", self.init),
            format!("csv = {}", path(&self.csv)),
            format!("amp = {}", opt(self.amp)),
            format!("offset = {}", opt(self.offset)),
            format!("mu = {}", fmt_g17(self.mu)),
            format!("constants = {}", join(&self.constants)),
            format!("lower = {}", join(&self.lower)),
            format!("state = {}", join(&self.state)),
            format!("system = {}", self.system),
            format!(
                "range = {},{}",
                fmt_g17(self.range.0),
                fmt_g17(self.range.1)
            ),
            format!("points = {}", self.points),
            format!("out = {}", path(&self.out)),
            format!("seed = {}", self.seed),
            format!("check = {}", self.check.join(",")),
        ];
        for (k, v) in &self.tol {
            lines.push(format!("tol.{k} = {}", fmt_g17(*v)));
        }
        let mut text = lines.join("\n");
        text.push('\n');
        text
    }

    /// Scale applied to a check's tolerances: the global `scale` times the
    /// check's own factor.
    pub fn tol_scale(&self, check: &str) -> f64 {
        self.tol.get("scale").copied().unwrap_or(1.0) * self.tol.get(check).copied().unwrap_or(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
        assert_eq!(KEYS.len(), cfg.to_text().lines().count());
    }

    #[test]
    fn parse_reports_line_numbers() {
        let err = RunConfig::parse("n = 3\n\n# c\nbogus = 1\n").unwrap_err();
        assert_eq!(
            err,
            ConfigError::UnknownKeyAt {
                line: 4,
                key: "bogus".into()
            }
        );
        let err = RunConfig::parse("cfl = -1\n").unwrap_err();
        assert!(matches!(err, ConfigError::BadValueAt { line: 1, .. }));
        let err = RunConfig::parse("just text\n").unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 1, .. }));
        assert!(RunConfig::parse("tmax = nan\n").is_err());
        assert!(RunConfig::parse("grid = 8\n").is_err());
        assert!(RunConfig::parse("tol.bogus = 2\n").is_err());
    }

    #[test]
    fn overrides_and_lists() {
        let mut cfg =
            RunConfig::parse("state = 1, -2.5,3e-3\ncommand = strata\ntol.scale = 1e-6\n").unwrap();
        assert_eq!(cfg.state, vec![1.0, -2.5, 3e-3]);
        assert_eq!(cfg.command, Some(Command::Strata));
        cfg.set("tol.c3", "10").unwrap();
        assert!((cfg.tol_scale("c3") - 1e-5).abs() < 1e-20);
        assert_eq!(cfg.tol_scale("c1"), 1e-6);
        assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }
}
