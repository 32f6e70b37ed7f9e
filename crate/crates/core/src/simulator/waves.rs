use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::ingest::{ChannelKind, Session};

/// Temperature wave accompanying an impedance wave: `sign` +1 in phase,
/// −1 in anti-phase, `amplitude` in °C.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TempCoupling {
    pub sign: f64,
    pub amplitude: f64,
}

/// A raised-cosine burst added to a set of cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveEvent {
    pub t0: usize,
    pub duration: usize,
    /// Cell indices (0-based).
    pub cells: Vec<usize>,
    /// Peak amplitude, Ohm.
    pub amplitude: f64,
    /// Carrier period in samples; without one the event is a single hump.
    #[serde(default)]
    pub period: Option<f64>,
    /// Per-cell sign, +1 in phase or −1 in anti-phase. Empty means all +1.
    #[serde(default)]
    pub phase_pattern: Vec<f64>,
    #[serde(default)]
    pub temp_coupling: Option<TempCoupling>,
}

impl WaveEvent {
    /// Every cell with the same sign.
    pub fn in_phase(t0: usize, duration: usize, cells: Vec<usize>, amplitude: f64, period: Option<f64>) -> Self {
        Self {
            t0,
            duration,
            cells,
            amplitude,
            period,
            phase_pattern: Vec::new(),
            temp_coupling: None,
        }
    }

    /// First half of `cells` at +1, the rest at −1.
    pub fn anti_phase(t0: usize, duration: usize, cells: Vec<usize>, amplitude: f64, period: Option<f64>) -> Self {
        let half = cells.len().div_ceil(2);
        let phase_pattern = (0..cells.len()).map(|k| if k < half { 1.0 } else { -1.0 }).collect();
        Self {
            t0,
            duration,
            cells,
            amplitude,
            period,
            phase_pattern,
            temp_coupling: None,
        }
    }

    pub fn with_temp(mut self, sign: f64, amplitude: f64) -> Self {
        self.temp_coupling = Some(TempCoupling { sign, amplitude });
        self
    }

    pub fn end(&self) -> usize {
        self.t0 + self.duration
    }

    pub fn sign_of(&self, k: usize) -> f64 {
        self.phase_pattern.get(k).copied().unwrap_or(1.0)
    }

    /// Unit waveform at sample `t`, zero outside the event.
    pub fn shape(&self, t: usize) -> f64 {
        if t < self.t0 || t >= self.end() {
            return 0.0;
        }
        let s = (t - self.t0) as f64;
        let envelope = 0.5 - 0.5 * (2.0 * PI * s / self.duration as f64).cos();
        let carrier = self.period.map_or(1.0, |p| (2.0 * PI * s / p).sin());
        envelope * carrier
    }

    pub fn validate(&self, n_cells: usize, n_samples: usize) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidEvent(m));
        if self.duration == 0 {
            return bad("duration must be positive".into());
        }
        if self.end() > n_samples {
            return Err(SimError::OutOfBounds {
                start: self.t0,
                end: self.end(),
                n_samples,
            });
        }
        if self.cells.is_empty() {
            return bad("no cells".into());
        }
        let mut seen = vec![false; n_cells];
        for &c in &self.cells {
            if c >= n_cells {
                return bad(format!("cell {c} does not exist ({n_cells} cells)"));
            }
            if std::mem::replace(&mut seen[c], true) {
                return bad(format!("cell {c} listed twice"));
            }
        }
        if !self.phase_pattern.is_empty() && self.phase_pattern.len() != self.cells.len() {
            return bad("phase pattern length differs from cell count".into());
        }
        if self.phase_pattern.iter().any(|s| s.abs() != 1.0) {
            return bad("phase signs must be +1 or -1".into());
        }
        if !self.amplitude.is_finite() {
            return bad("amplitude must be finite".into());
        }
        if let Some(p) = self.period {
            if !(p > 0.0 && p.is_finite()) {
                return bad(format!("carrier period {p} must be positive"));
            }
        }
        if let Some(tc) = self.temp_coupling {
            if tc.sign.abs() != 1.0 || !tc.amplitude.is_finite() {
                return bad("temperature coupling needs sign ±1 and finite amplitude".into());
            }
        }
        Ok(())
    }
}

/// Original values displaced by [`inject_wave`], enough to undo it exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Injection {
    pub start: usize,
    /// `(index into session.channels, original values from start)`.
    pub originals: Vec<(usize, Vec<f64>)>,
}

impl Injection {
    /// Puts the displaced values back.
    pub fn revert(&self, session: &Session) -> Result<Session, SimError> {
        let mut out = session.clone();
        for (ch, values) in &self.originals {
            let dst = out
                .channels
                .get_mut(*ch)
                .and_then(|c| c.values.get_mut(self.start..self.start + values.len()))
                .ok_or(SimError::OutOfBounds {
                    start: self.start,
                    end: self.start + values.len(),
                    n_samples: session.n_samples(),
                })?;
            dst.copy_from_slice(values);
        }
        Ok(out)
    }
}

/// Adds `event` to the impedance channels of `session` (cell `k` is the
/// `k`-th impedance channel) and, with temperature coupling, to the matching
/// fluid-temperature channels.
pub fn inject_wave(session: &Session, event: &WaveEvent) -> Result<(Session, Injection), SimError> {
    let imp: Vec<usize> = channel_indices(session, ChannelKind::Impedance);
    let temp: Vec<usize> = channel_indices(session, ChannelKind::FluidTemp);
    event.validate(imp.len(), session.n_samples())?;
    let mut out = session.clone();
    let mut originals = Vec::new();
    let span = event.t0..event.end();
    for (k, &cell) in event.cells.iter().enumerate() {
        let sign = event.sign_of(k);
        let mut targets = vec![(imp[cell], sign * event.amplitude)];
        if let Some(tc) = event.temp_coupling {
            let &t = temp.get(cell).ok_or_else(|| {
                SimError::InvalidEvent(format!("cell {cell} has no temperature channel"))
            })?;
            targets.push((t, tc.sign * sign * tc.amplitude));
        }
        for (ch, amp) in targets {
            let values = &mut out.channels[ch].values;
            originals.push((ch, values[span.clone()].to_vec()));
            for t in span.clone() {
                values[t] += amp * event.shape(t);
            }
        }
    }
    Ok((
        out,
        Injection {
            start: event.t0,
            originals,
        },
    ))
}

fn channel_indices(session: &Session, kind: ChannelKind) -> Vec<usize> {
    session
        .channels
        .iter()
        .enumerate()
        .filter(|(_, c)| c.kind == kind)
        .map(|(i, _)| i)
        .collect()
}
