//! End-to-end analysis of a session: initial rejection, framing, detrending,
//! self-oscillation masking, low-pass filtering, rolling correlations,
//! metrics, events and rates.
//!
//! Frames are processed in parallel and spliced back in order, so the result
//! does not depend on the thread count. Metric positions are sample indices
//! of the session after initial rejection; the first `window - 1` positions
//! of every frame have no complete window and stay undefined.

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detrend::{self, DetrendError, LmConfig, FitReport};
use crate::error::{Error, Result};
use crate::filtering::{ButterworthLowpass, LowpassConfig};
use crate::ingest::{ChannelKind, Session};
use crate::metrics::{
    default_criteria, detect_events, group_correlations, reject_self_oscillation, DetectConfig, GroupCorrelations,
    MetricsSeries, OscillationConfig, RateCriterion, RateReport, SyncEvent, MAX_CHANNELS,
};
use crate::synccorr::rolling_correlations;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetrendScope {
    /// One polynomial per channel and frame.
    #[default]
    Frame,
    /// One polynomial per channel over the whole session.
    Session,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    /// Samples per analysis frame; 0 analyzes the session as one frame.
    pub frame_len: usize,
    /// Rolling correlation window `t_synch`, samples.
    pub window: usize,
    pub detrend_order: usize,
    pub detrend_scope: DetrendScope,
    pub lm: LmConfig,
    /// `None` disables filtering.
    pub lowpass: Option<LowpassConfig>,
    pub z: f64,
    pub detect: DetectConfig,
    /// `None` disables self-oscillation masking.
    pub rejection: Option<OscillationConfig>,
    pub skip_hours: f64,
    pub criteria: Vec<RateCriterion>,
    /// Compute impedance/temperature group correlations when temperature
    /// channels are present.
    pub groups: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            frame_len: 2000,
            window: 100,
            detrend_order: 10,
            detrend_scope: DetrendScope::Frame,
            lm: LmConfig::default(),
            lowpass: Some(LowpassConfig::default()),
            z: 0.7,
            detect: DetectConfig::default(),
            rejection: Some(OscillationConfig::default()),
            skip_hours: 24.0,
            criteria: default_criteria(),
            groups: true,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.z > 0.0 && self.z < 1.0) {
            return bad(format!("z = {} outside (0, 1)", self.z));
        }
        if !(self.detect.l_thresh > 0.0 && self.detect.l_thresh <= 1.0) {
            return bad(format!("l_thresh = {} outside (0, 1]", self.detect.l_thresh));
        }
        if self.window < 2 {
            return bad(format!("window {} must be at least 2", self.window));
        }
        if self.frame_len != 0 && self.frame_len < self.window {
            return bad(format!("frame of {} samples shorter than window {}", self.frame_len, self.window));
        }
        if !(1..=detrend::MAX_ORDER).contains(&self.detrend_order) {
            return bad(format!("detrend order {} outside 1..={}", self.detrend_order, detrend::MAX_ORDER));
        }
        if let Some(lp) = self.lowpass {
            ButterworthLowpass::design(lp)?;
        }
        if !(self.skip_hours >= 0.0) {
            return bad(format!("skip of {} h must be non-negative", self.skip_hours));
        }
        for c in &self.criteria {
            if !(c.threshold > 0.0 && c.threshold < 1.0) {
                return bad(format!("criterion threshold {} outside (0, 1)", c.threshold));
            }
        }
        if let Some(r) = self.rejection {
            if r.window < 8 || r.hop == 0 || !(r.amp_factor > 0.0) || !(r.peak_frac > 0.0 && r.peak_frac < 1.0) {
                return bad(format!("invalid rejection settings {r:?}"));
            }
        }
        Ok(())
    }

    fn min_frame(&self) -> usize {
        let filter = self.lowpass.map_or(0, |l| 3 * l.order + 1);
        self.window.max(self.detrend_order + 1).max(filter)
    }
}

/// Fit of one channel over one frame (or the whole session).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelFit {
    pub channel: String,
    pub frame_start: usize,
    pub coefficients: Vec<f64>,
    pub report: Option<FitReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskedSpan {
    pub channel: String,
    pub start: usize,
    pub end: usize,
}

/// Detrended, masked and filtered channels of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedFrame {
    pub range: Range<usize>,
    pub impedance: Vec<Vec<f64>>,
    pub temperature: Vec<Vec<f64>>,
    pub fits: Vec<ChannelFit>,
    pub masked: Vec<MaskedSpan>,
}

impl PreparedFrame {
    pub fn impedance_refs(&self) -> Vec<&[f64]> {
        self.impedance.iter().map(Vec::as_slice).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisResult {
    /// Samples after initial rejection.
    pub n_samples: usize,
    /// Samples dropped by initial rejection.
    pub skipped_samples: usize,
    pub sample_period: f64,
    pub channels: Vec<String>,
    pub temperature_channels: Vec<String>,
    pub frames: Vec<(usize, usize)>,
    pub metrics: MetricsSeries,
    pub events: Vec<SyncEvent>,
    pub rates: RateReport,
    pub groups: Option<GroupCorrelations>,
    pub fits: Vec<ChannelFit>,
    pub masked: Vec<MaskedSpan>,
}

/// Frame ranges over `n` samples. A tail shorter than `min_len` is dropped.
pub fn frame_ranges(n: usize, frame_len: usize, min_len: usize) -> Vec<Range<usize>> {
    if frame_len == 0 || frame_len >= n {
        return if n >= min_len { vec![0..n] } else { Vec::new() };
    }
    (0..n)
        .step_by(frame_len)
        .map(|s| s..(s + frame_len).min(n))
        .filter(|r| r.len() >= min_len)
        .collect()
}

struct Inputs<'a> {
    impedance: Vec<(&'a str, &'a [f64])>,
    temperature: Vec<(&'a str, &'a [f64])>,
    /// Session-wide residuals and fits when detrending over the session.
    session_residuals: Option<(Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<ChannelFit>)>,
}

fn inputs<'a>(session: &'a Session, cfg: &AnalysisConfig) -> Result<Inputs<'a>> {
    let pick = |kind| -> Vec<(&str, &[f64])> {
        session
            .channels_of(kind)
            .map(|c| (c.id.as_str(), c.values.as_slice()))
            .collect()
    };
    let impedance = pick(ChannelKind::Impedance);
    let temperature = if cfg.groups { pick(ChannelKind::FluidTemp) } else { Vec::new() };
    if impedance.len() < 2 {
        return Err(Error::Config(format!(
            "need at least 2 impedance channels, session has {}",
            impedance.len()
        )));
    }
    if impedance.len() > MAX_CHANNELS {
        return Err(Error::Config(format!(
            "{} impedance channels exceed the maximum of {MAX_CHANNELS}",
            impedance.len()
        )));
    }
    let session_residuals = match cfg.detrend_scope {
        DetrendScope::Frame => None,
        DetrendScope::Session => {
            let mut fits = Vec::new();
            let mut run = |set: &[(&str, &[f64])]| -> Result<Vec<Vec<f64>>> {
                set.iter()
                    .map(|&(id, v)| {
                        let (res, fit) = detrend_or_undefined(v, id, 0, cfg)?;
                        fits.push(fit);
                        Ok(res)
                    })
                    .collect()
            };
            let imp = run(&impedance)?;
            let temp = run(&temperature)?;
            Some((imp, temp, fits))
        }
    };
    Ok(Inputs {
        impedance,
        temperature,
        session_residuals,
    })
}

/// Residual of `values`, or all-`NaN` when too few samples are valid.
fn detrend_or_undefined(values: &[f64], id: &str, frame_start: usize, cfg: &AnalysisConfig) -> Result<(Vec<f64>, ChannelFit)> {
    match detrend::detrend(values, id, cfg.detrend_order, &cfg.lm) {
        Ok((res, report)) => Ok((
            res.values,
            ChannelFit {
                channel: id.to_string(),
                frame_start,
                coefficients: res.model.coefficients,
                report: Some(report),
            },
        )),
        Err(DetrendError::TooShort { valid, .. }) => {
            log::warn!("{id}: only {valid} valid samples in frame at {frame_start}, channel left undefined");
            Ok((
                vec![f64::NAN; values.len()],
                ChannelFit {
                    channel: id.to_string(),
                    frame_start,
                    coefficients: Vec::new(),
                    report: None,
                },
            ))
        }
        Err(e) => Err(e.into()),
    }
}

fn prepare_frame(input: &Inputs<'_>, range: Range<usize>, cfg: &AnalysisConfig) -> Result<PreparedFrame> {
    let filter = cfg.lowpass.map(ButterworthLowpass::design).transpose()?;
    let mut fits = Vec::new();
    let mut masked = Vec::new();
    let mut process = |set: &[(&str, &[f64])], pre: Option<&Vec<Vec<f64>>>, reject: bool| -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(set.len());
        for (k, &(id, values)) in set.iter().enumerate() {
            let residual = match pre {
                Some(r) => r[k][range.clone()].to_vec(),
                None => {
                    let (r, fit) = detrend_or_undefined(&values[range.clone()], id, range.start, cfg)?;
                    fits.push(fit);
                    r
                }
            };
            let mask = match (reject, cfg.rejection) {
                (true, Some(rc)) => Some(reject_self_oscillation(&residual, &rc).0),
                _ => None,
            };
            let mut y = match &filter {
                Some(f) => f.apply(&residual)?,
                None => residual,
            };
            if let Some(mask) = mask {
                let mut t = 0;
                while t < mask.len() {
                    if !mask[t] {
                        t += 1;
                        continue;
                    }
                    let s = t;
                    while t < mask.len() && mask[t] {
                        y[t] = f64::NAN;
                        t += 1;
                    }
                    masked.push(MaskedSpan {
                        channel: id.to_string(),
                        start: range.start + s,
                        end: range.start + t,
                    });
                }
            }
            out.push(y);
        }
        Ok(out)
    };
    let pre = input.session_residuals.as_ref();
    let impedance = process(&input.impedance, pre.map(|p| &p.0), true)?;
    let temperature = process(&input.temperature, pre.map(|p| &p.1), false)?;
    Ok(PreparedFrame {
        range,
        impedance,
        temperature,
        fits,
        masked,
    })
}

/// Applies initial rejection and returns the analyzed session.
pub fn trimmed(session: &Session, cfg: &AnalysisConfig) -> Result<Session> {
    cfg.validate()?;
    Ok(session.reject_initial(cfg.skip_hours)?)
}

/// Detrended, masked and filtered frames of an already trimmed session.
pub fn prepare(session: &Session, cfg: &AnalysisConfig) -> Result<Vec<PreparedFrame>> {
    cfg.validate()?;
    let input = inputs(session, cfg)?;
    frame_ranges(session.n_samples(), cfg.frame_len, cfg.min_frame())
        .into_par_iter()
        .map(|r| prepare_frame(&input, r, cfg))
        .collect()
}

pub fn analyze(session: &Session, cfg: &AnalysisConfig) -> Result<AnalysisResult> {
    let base_offset = session.provenance.parent_offset;
    let session = trimmed(session, cfg)?;
    let skipped_samples = session.provenance.parent_offset - base_offset;
    let input = inputs(&session, cfg)?;
    let n = session.n_samples();
    let ranges = frame_ranges(n, cfg.frame_len, cfg.min_frame());
    if ranges.is_empty() {
        return Err(Error::Config(format!(
            "session of {n} samples too short for window {} and order {}",
            cfg.window, cfg.detrend_order
        )));
    }

    type FrameOut = (MetricsSeries, Option<GroupCorrelations>, Vec<ChannelFit>, Vec<MaskedSpan>);
    let parts: Vec<FrameOut> = ranges
        .par_iter()
        .map(|r| -> Result<FrameOut> {
            let frame = prepare_frame(&input, r.clone(), cfg)?;
            let pairs = rolling_correlations(&frame.impedance_refs(), cfg.window)?;
            let metrics = MetricsSeries::from_pairs(&pairs, cfg.z, r.start)?;
            let groups = if frame.temperature.is_empty() {
                None
            } else {
                let imp = frame.impedance_refs();
                let temp: Vec<&[f64]> = frame.temperature.iter().map(Vec::as_slice).collect();
                Some(group_correlations(&imp, &temp, cfg.window, r.start)?)
            };
            Ok((metrics, groups, frame.fits, frame.masked))
        })
        .collect::<Result<_>>()?;

    let mut metric_parts = Vec::with_capacity(parts.len());
    let mut group_parts = Vec::new();
    let mut fits = input.session_residuals.as_ref().map_or_else(Vec::new, |p| p.2.clone());
    let mut masked = Vec::new();
    for (m, g, f, k) in parts {
        metric_parts.push(m);
        group_parts.extend(g);
        fits.extend(f);
        masked.extend(k);
    }
    let metrics = MetricsSeries::concat(&metric_parts)?;
    let groups = if group_parts.is_empty() {
        None
    } else {
        Some(GroupCorrelations::concat(&group_parts)?)
    };
    let events = detect_events(&metrics, &cfg.detect)?;
    let rates = RateReport::from_metrics(&metrics, &cfg.criteria, n, session.sample_period, cfg.frame_len)?;

    Ok(AnalysisResult {
        n_samples: n,
        skipped_samples,
        sample_period: session.sample_period,
        channels: input.impedance.iter().map(|c| c.0.to_string()).collect(),
        temperature_channels: input.temperature.iter().map(|c| c.0.to_string()).collect(),
        frames: ranges.iter().map(|r| (r.start, r.end)).collect(),
        metrics,
        events,
        rates,
        groups,
        fits,
        masked,
    })
}
