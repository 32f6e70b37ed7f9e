use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::schema::{ColumnRole, Schema};
use super::IngestError;

/// One timestamped reading of every channel of one acquisition device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    /// Seconds since the epoch.
    pub timestamp: f64,
    pub device_id: String,
    /// Ohm, one per cell, in schema order. `NaN` marks a missing reading.
    pub impedance: Vec<f64>,
    /// °C, one per cell, in schema order.
    pub fluid_temp: Vec<f64>,
    pub env: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Error, Serialize)]
#[error("line {line}: {kind}")]
pub struct LineError {
    pub line: u64,
    pub kind: LineErrorKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum LineErrorKind {
    NonNumeric { column: String, value: String },
    NonPositiveImpedance { column: String, value: f64 },
    /// Timestamp went backwards by more than the configured tolerance.
    NonMonotonic { timestamp: f64, previous: f64 },
    /// Timestamp did not increase but stayed within tolerance; the line is skipped.
    NonIncreasing { timestamp: f64, previous: f64 },
    FieldCount { expected: usize, found: usize },
}

impl fmt::Display for LineErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LineErrorKind::NonNumeric { column, value } => {
                write!(f, "non-numeric value {value:?} in column {column:?}")
            }
            LineErrorKind::NonPositiveImpedance { column, value } => {
                write!(f, "non-positive impedance {value} in column {column:?}")
            }
            LineErrorKind::NonMonotonic {
                timestamp,
                previous,
            } => write!(
                f,
                "non-monotonic timestamp {timestamp} after {previous} beyond tolerance"
            ),
            LineErrorKind::NonIncreasing {
                timestamp,
                previous,
            } => write!(f, "non-increasing timestamp {timestamp} after {previous}"),
            LineErrorKind::FieldCount { expected, found } => {
                write!(f, "expected {expected} fields, found {found}")
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParseOptions {
    /// Backward timestamp jumps up to this many seconds skip the line instead
    /// of failing.
    pub monotonic_tolerance: f64,
    /// Fail on the first malformed line. When false, malformed lines are
    /// collected in [`ParsedLog::rejected`].
    pub strict: bool,
    /// Device id for logs without a device column.
    pub device_id: Option<String>,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            monotonic_tolerance: 0.0,
            strict: true,
            device_id: None,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParsedLog {
    pub schema: Schema,
    pub records: Vec<SampleRecord>,
    /// Lines that did not produce a record, in file order.
    pub rejected: Vec<LineError>,
}

impl ParsedLog {
    /// Total data lines seen, accepted or not.
    pub fn lines_read(&self) -> usize {
        self.records.len() + self.rejected.len()
    }
}

/// Parses one device log. The first row is the header; `schema` maps its
/// columns to channels, or the mapping is inferred from the header names.
pub fn parse_log<R: Read>(
    input: R,
    schema: Option<&Schema>,
    opts: &ParseOptions,
) -> Result<ParsedLog, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut rows = reader.records();

    let header = match rows.next() {
        None => {
            return Ok(ParsedLog {
                schema: schema.cloned().unwrap_or_default(),
                ..ParsedLog::default()
            })
        }
        Some(h) => h.map_err(|e| IngestError::Csv(e.to_string()))?,
    };
    let names: Vec<&str> = header.iter().collect();
    let schema = match schema {
        Some(s) => s.clone(),
        None => Schema::infer(&names)?,
    };

    let mut roles = Vec::with_capacity(names.len());
    for name in &names {
        let role = schema
            .role_of(name)
            .ok_or_else(|| IngestError::UnknownColumn {
                column: name.to_string(),
            })?;
        roles.push(role.clone());
    }
    for (column, role) in schema.columns() {
        if *role != ColumnRole::Ignore && !names.contains(&column.as_str()) {
            return Err(IngestError::MissingColumn {
                column: column.clone(),
            });
        }
    }

    let imp_labels = schema.impedance_labels();
    let temp_labels = schema.fluid_temp_labels();
    let slot = |labels: &[String], l: &str| labels.iter().position(|x| x == l).unwrap();

    let fallback_device = opts.device_id.clone().unwrap_or_else(|| "device".to_string());
    let mut last_ts: HashMap<String, f64> = HashMap::new();
    let mut out = ParsedLog {
        schema: schema.clone(),
        ..ParsedLog::default()
    };

    for row in rows {
        let row = row.map_err(|e| IngestError::Csv(e.to_string()))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() == 1 && row.get(0).is_some_and(str::is_empty) {
            continue;
        }
        let parsed = parse_row(
            &row,
            &names,
            &roles,
            &imp_labels,
            &temp_labels,
            &slot,
            &fallback_device,
        )
        .and_then(|rec| {
            if let Some(&prev) = last_ts.get(&rec.device_id) {
                if rec.timestamp <= prev {
                    let kind = if prev - rec.timestamp > opts.monotonic_tolerance {
                        LineErrorKind::NonMonotonic {
                            timestamp: rec.timestamp,
                            previous: prev,
                        }
                    } else {
                        LineErrorKind::NonIncreasing {
                            timestamp: rec.timestamp,
                            previous: prev,
                        }
                    };
                    return Err(kind);
                }
            }
            Ok(rec)
        });
        match parsed {
            Ok(rec) => {
                last_ts.insert(rec.device_id.clone(), rec.timestamp);
                out.records.push(rec);
            }
            Err(kind) => {
                let err = LineError { line, kind };
                let fatal = opts.strict && !matches!(err.kind, LineErrorKind::NonIncreasing { .. });
                if fatal {
                    return Err(err.into());
                }
                log::debug!("skipping {err}");
                out.rejected.push(err);
            }
        }
    }
    Ok(out)
}

fn parse_row(
    row: &csv::StringRecord,
    names: &[&str],
    roles: &[ColumnRole],
    imp_labels: &[String],
    temp_labels: &[String],
    slot: &dyn Fn(&[String], &str) -> usize,
    fallback_device: &str,
) -> Result<SampleRecord, LineErrorKind> {
    if row.len() != names.len() {
        return Err(LineErrorKind::FieldCount {
            expected: names.len(),
            found: row.len(),
        });
    }
    let mut rec = SampleRecord {
        timestamp: f64::NAN,
        device_id: fallback_device.to_string(),
        impedance: vec![f64::NAN; imp_labels.len()],
        fluid_temp: vec![f64::NAN; temp_labels.len()],
        env: BTreeMap::new(),
    };
    for ((field, name), role) in row.iter().zip(names).zip(roles) {
        match role {
            ColumnRole::Ignore => {}
            ColumnRole::Device => {
                if !field.is_empty() {
                    rec.device_id = field.to_string();
                }
            }
            ColumnRole::Timestamp => {
                let v = parse_value(field, name)?;
                if v.is_nan() {
                    return Err(LineErrorKind::NonNumeric {
                        column: name.to_string(),
                        value: field.to_string(),
                    });
                }
                rec.timestamp = v;
            }
            ColumnRole::Impedance(label) => {
                let v = parse_value(field, name)?;
                if v <= 0.0 {
                    return Err(LineErrorKind::NonPositiveImpedance {
                        column: name.to_string(),
                        value: v,
                    });
                }
                rec.impedance[slot(imp_labels, label)] = v;
            }
            ColumnRole::FluidTemp(label) => {
                rec.fluid_temp[slot(temp_labels, label)] = parse_value(field, name)?;
            }
            ColumnRole::Env(n) => {
                rec.env.insert(n.clone(), parse_value(field, name)?);
            }
        }
    }
    Ok(rec)
}

/// Empty fields and `NaN` are missing readings; anything else must be a
/// finite number.
fn parse_value(field: &str, column: &str) -> Result<f64, LineErrorKind> {
    if field.is_empty() || field.eq_ignore_ascii_case("nan") {
        return Ok(f64::NAN);
    }
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(LineErrorKind::NonNumeric {
            column: column.to_string(),
            value: field.to_string(),
        }),
    }
}

/// Writes records in the column layout of `schema`. Values use the shortest
/// representation that parses back to the same `f64`, so
/// `parse_log(write_log(..))` is bit-exact.
pub fn write_log<W: Write>(
    records: &[SampleRecord],
    schema: &Schema,
    out: W,
) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| IngestError::Csv(e.to_string());
    w.write_record(schema.columns().iter().map(|(c, _)| c.as_str()))
        .map_err(csv_err)?;
    let imp_labels = schema.impedance_labels();
    let temp_labels = schema.fluid_temp_labels();
    for rec in records {
        let fields: Vec<String> = schema
            .columns()
            .iter()
            .map(|(_, role)| match role {
                ColumnRole::Timestamp => fmt_value(rec.timestamp),
                ColumnRole::Device => rec.device_id.clone(),
                ColumnRole::Impedance(l) => {
                    let i = imp_labels.iter().position(|x| x == l).unwrap();
                    fmt_value(rec.impedance.get(i).copied().unwrap_or(f64::NAN))
                }
                ColumnRole::FluidTemp(l) => {
                    let i = temp_labels.iter().position(|x| x == l).unwrap();
                    fmt_value(rec.fluid_temp.get(i).copied().unwrap_or(f64::NAN))
                }
                ColumnRole::Env(n) => fmt_value(rec.env.get(n).copied().unwrap_or(f64::NAN)),
                ColumnRole::Ignore => String::new(),
            })
            .collect();
        w.write_record(&fields).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:?}")
    }
}
