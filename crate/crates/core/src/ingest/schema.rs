use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use super::IngestError;

/// What a CSV column carries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnRole {
    Timestamp,
    Device,
    /// Impedance of one cell, labelled.
    Impedance(String),
    /// Fluid temperature of one cell, labelled.
    FluidTemp(String),
    /// Named auxiliary channel (acceleration, magnetic field, RF power, ...).
    Env(String),
    Ignore,
}

impl fmt::Display for ColumnRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnRole::Timestamp => write!(f, "timestamp"),
            ColumnRole::Device => write!(f, "device"),
            ColumnRole::Impedance(l) => write!(f, "impedance:{l}"),
            ColumnRole::FluidTemp(l) => write!(f, "fluid_temp:{l}"),
            ColumnRole::Env(n) => write!(f, "env:{n}"),
            ColumnRole::Ignore => write!(f, "ignore"),
        }
    }
}

/// Column-to-channel mapping for one device log.
///
/// Text form, one `column = role` per line, `#` starts a comment:
///
/// ```text
/// time = timestamp
/// dev  = device
/// Z1   = impedance:1
/// T1   = fluid_temp:1
/// co2  = env:co2_ppm
/// junk = ignore
/// ```
///
/// The label after `impedance:` / `fluid_temp:` / `env:` is optional and
/// defaults to the column name.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Schema {
    columns: Vec<(String, ColumnRole)>,
}

const ENV_NAMES: &[&str] = &[
    "acc_x", "acc_y", "acc_z", "mag_x", "mag_y", "mag_z", "rf_power", "pressure", "humidity",
    "air_temp", "co2",
];

impl Schema {
    pub fn new(columns: Vec<(String, ColumnRole)>) -> Result<Self, IngestError> {
        let mut seen = HashSet::new();
        for (i, (name, _)) in columns.iter().enumerate() {
            if !seen.insert(name.as_str()) {
                return Err(IngestError::Schema {
                    line: i + 1,
                    message: format!("column {name:?} mapped twice"),
                });
            }
        }
        let schema = Self { columns };
        if schema.timestamp_column().is_none() {
            return Err(IngestError::MissingTimestamp);
        }
        Ok(schema)
    }

    pub fn parse(text: &str) -> Result<Self, IngestError> {
        let mut columns = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| IngestError::Schema {
                line: idx + 1,
                message: "expected `column = role`".into(),
            })?;
            let key = key.trim().to_string();
            let role = parse_role(&key, value.trim()).map_err(|message| IngestError::Schema {
                line: idx + 1,
                message,
            })?;
            columns.push((key, role));
        }
        Self::new(columns)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, IngestError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Infers a schema from header names using the conventional column names
    /// (`timestamp`/`time`, `device`, `Z<n>`/`impedance<n>`, `T<n>`/`fluid_temp<n>`,
    /// and the known environment channel names).
    pub fn infer(header: &[&str]) -> Result<Self, IngestError> {
        let mut columns = Vec::with_capacity(header.len());
        for &h in header {
            let name = h.trim();
            let lower = name.to_ascii_lowercase();
            let role = if lower == "timestamp" || lower == "time" {
                ColumnRole::Timestamp
            } else if lower == "device" || lower == "device_id" {
                ColumnRole::Device
            } else if let Some(label) = numbered(&lower, &["impedance", "z"]) {
                ColumnRole::Impedance(label)
            } else if let Some(label) = numbered(&lower, &["fluid_temp", "t"]) {
                ColumnRole::FluidTemp(label)
            } else if ENV_NAMES.contains(&lower.as_str()) {
                ColumnRole::Env(lower.clone())
            } else {
                return Err(IngestError::UnknownColumn {
                    column: name.to_string(),
                });
            };
            columns.push((name.to_string(), role));
        }
        Self::new(columns)
    }

    pub fn columns(&self) -> &[(String, ColumnRole)] {
        &self.columns
    }

    pub fn role_of(&self, column: &str) -> Option<&ColumnRole> {
        self.columns.iter().find(|(c, _)| c == column).map(|(_, r)| r)
    }

    pub fn timestamp_column(&self) -> Option<&str> {
        self.columns
            .iter()
            .find(|(_, r)| *r == ColumnRole::Timestamp)
            .map(|(c, _)| c.as_str())
    }

    pub fn impedance_labels(&self) -> Vec<String> {
        self.columns
            .iter()
            .filter_map(|(_, r)| match r {
                ColumnRole::Impedance(l) => Some(l.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn fluid_temp_labels(&self) -> Vec<String> {
        self.columns
            .iter()
            .filter_map(|(_, r)| match r {
                ColumnRole::FluidTemp(l) => Some(l.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn env_names(&self) -> Vec<String> {
        self.columns
            .iter()
            .filter_map(|(_, r)| match r {
                ColumnRole::Env(n) => Some(n.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (c, r) in &self.columns {
            out.push_str(&format!("{c} = {r}\n"));
        }
        out
    }
}

fn numbered(lower: &str, prefixes: &[&str]) -> Option<String> {
    prefixes.iter().find_map(|p| {
        let rest = lower.strip_prefix(p)?;
        let rest = rest.trim_start_matches('_');
        (!rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit())).then(|| rest.to_string())
    })
}

fn parse_role(column: &str, value: &str) -> Result<ColumnRole, String> {
    let (kind, label) = match value.split_once(':') {
        Some((k, l)) => (k.trim(), Some(l.trim())),
        None => (value, None),
    };
    let label = || {
        label
            .filter(|l| !l.is_empty())
            .unwrap_or(column)
            .to_string()
    };
    match kind {
        "timestamp" => Ok(ColumnRole::Timestamp),
        "device" => Ok(ColumnRole::Device),
        "impedance" => Ok(ColumnRole::Impedance(label())),
        "fluid_temp" => Ok(ColumnRole::FluidTemp(label())),
        "env" => Ok(ColumnRole::Env(label())),
        "ignore" => Ok(ColumnRole::Ignore),
        other => Err(format!("unknown role {other:?}")),
    }
}
