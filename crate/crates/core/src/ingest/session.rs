use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::align::AlignmentReport;
use super::IngestError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Impedance,
    FluidTemp,
    Env,
}

impl ChannelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ChannelKind::Impedance => "impedance",
            ChannelKind::FluidTemp => "fluid_temp",
            ChannelKind::Env => "env",
        }
    }
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ChannelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "impedance" => Ok(ChannelKind::Impedance),
            "fluid_temp" => Ok(ChannelKind::FluidTemp),
            "env" => Ok(ChannelKind::Env),
            other => Err(format!("unknown channel kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSeries {
    pub id: String,
    pub kind: ChannelKind,
    pub unit: String,
    /// One value per sample tick; `NaN` marks a missing sample.
    pub values: Vec<f64>,
}

impl ChannelSeries {
    pub fn new(id: impl Into<String>, kind: ChannelKind, unit: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            id: id.into(),
            kind,
            unit: unit.into(),
            values,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub sources: Vec<String>,
    /// Sample offset of this session inside the session it was cut from.
    pub parent_offset: usize,
    pub alignment: Option<AlignmentReport>,
}

/// Time-aligned multichannel frame on a uniform sample grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    /// Seconds between consecutive samples.
    pub sample_period: f64,
    /// Epoch seconds of sample 0.
    pub t0: f64,
    pub channels: Vec<ChannelSeries>,
    pub provenance: Provenance,
}

impl Session {
    pub fn new(sample_period: f64, t0: f64, channels: Vec<ChannelSeries>) -> Result<Self, IngestError> {
        let s = Self {
            sample_period,
            t0,
            channels,
            provenance: Provenance::default(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if !(self.sample_period > 0.0 && self.sample_period.is_finite()) {
            return Err(IngestError::InvalidSession(format!(
                "sample period {} must be positive",
                self.sample_period
            )));
        }
        let n = self.n_samples();
        for ch in &self.channels {
            if ch.values.len() != n {
                return Err(IngestError::InvalidSession(format!(
                    "channel {:?} has {} samples, expected {n}",
                    ch.id,
                    ch.values.len()
                )));
            }
            if ch.id.is_empty() || ch.id.contains([',', '\n', ';']) {
                return Err(IngestError::InvalidSession(format!("bad channel id {:?}", ch.id)));
            }
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        self.channels.first().map_or(0, |c| c.values.len())
    }

    /// Session length in seconds.
    pub fn duration(&self) -> f64 {
        self.n_samples() as f64 * self.sample_period
    }

    pub fn channel(&self, id: &str) -> Option<&ChannelSeries> {
        self.channels.iter().find(|c| c.id == id)
    }

    pub fn channels_of(&self, kind: ChannelKind) -> impl Iterator<Item = &ChannelSeries> {
        self.channels.iter().filter(move |c| c.kind == kind)
    }

    pub fn time_of(&self, index: usize) -> f64 {
        self.t0 + index as f64 * self.sample_period
    }

    /// Copies samples `start..start + length`, shifting `t0` accordingly.
    pub fn slice_frame(&self, start: usize, length: usize) -> Result<Session, IngestError> {
        let n = self.n_samples();
        let end = start.checked_add(length).unwrap_or(usize::MAX);
        if length == 0 || end > n {
            return Err(IngestError::OutOfRange {
                start,
                end,
                n_samples: n,
            });
        }
        Ok(Session {
            sample_period: self.sample_period,
            t0: self.time_of(start),
            channels: self
                .channels
                .iter()
                .map(|c| ChannelSeries {
                    values: c.values[start..end].to_vec(),
                    ..c.clone()
                })
                .collect(),
            provenance: Provenance {
                parent_offset: self.provenance.parent_offset + start,
                ..self.provenance.clone()
            },
        })
    }

    /// Drops the first `skip_hours` of the session (initial oscillations
    /// triggered by setting up the experiment).
    pub fn reject_initial(&self, skip_hours: f64) -> Result<Session, IngestError> {
        if !(skip_hours >= 0.0 && skip_hours.is_finite()) {
            return Err(IngestError::InvalidArgument(format!(
                "skip duration {skip_hours} h must be non-negative"
            )));
        }
        let n = self.n_samples();
        // Snap to the grid so that e.g. 24 h at 2 s gives exactly 43200 samples.
        let ticks = skip_hours * 3600.0 / self.sample_period;
        let skip = (ticks - 1e-9 * ticks.max(1.0)).ceil().max(0.0) as usize;
        if skip == 0 {
            return Ok(self.clone());
        }
        if skip >= n {
            return Err(IngestError::RejectionWindow { skip, n_samples: n });
        }
        self.slice_frame(skip, n - skip)
    }
}
