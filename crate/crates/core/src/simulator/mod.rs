//! Synthetic multi-cell sessions with known ground truth.
//!
//! Impedance of cell `c` at sample `t`:
//!
//! ```text
//! Z_c(t) = baseline + drift_c(x_t) + Σ_{s<t} slope_c(s) + noise + waves + self-oscillations
//! slope_c(s) = step_amp · (coupling · S(s) + (1 - coupling) · S_c(s))
//! ```
//!
//! where `S` and `S_c` are ±1 random telegraph processes (shared and own)
//! standing for alternating forward and reverse reaction phases, and `x_t`
//! maps the session onto `[-1, 1]`. Temperatures follow
//! `baseline + drift(x_t) + noise` plus optional coupled waves.

mod waves;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{ChannelKind, ChannelSeries, IngestError, Session};
use crate::metrics::MAX_CHANNELS;

pub use waves::{inject_wave, Injection, TempCoupling, WaveEvent};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulator configuration: {0}")]
    Config(String),
    #[error("invalid wave event: {0}")]
    InvalidEvent(String),
    #[error("span {start}..{end} outside session of {n_samples} samples")]
    OutOfBounds { start: usize, end: usize, n_samples: usize },
    #[error("events {a} and {b} overlap on cell {cell}")]
    Overlap { a: usize, b: usize, cell: usize },
    #[error("cannot parse simulator configuration: {0}")]
    Parse(String),
    #[error(transparent)]
    Session(#[from] IngestError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TelegraphConfig {
    /// Switching probability per sample.
    pub switch_rate: f64,
    /// Drift slope in each phase, Ohm per sample.
    pub step_amp: f64,
}

impl Default for TelegraphConfig {
    fn default() -> Self {
        Self {
            switch_rate: 1.0 / 400.0,
            step_amp: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TempConfig {
    pub enabled: bool,
    pub baseline: f64,
    /// Coefficients in normalized session time, °C.
    pub drift: Vec<f64>,
    pub noise_rms: f64,
}

impl Default for TempConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            baseline: 25.0,
            drift: vec![0.0, 0.05, -0.02],
            noise_rms: 1e-3,
        }
    }
}

/// A stable large sinusoid on one cell with abrupt start and stop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillationSpec {
    pub cell: usize,
    pub t0: usize,
    pub duration: usize,
    pub amplitude: f64,
    pub period: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n_cells: usize,
    /// Session length in samples.
    pub duration: usize,
    /// Seconds.
    pub sample_period: f64,
    /// Epoch seconds of the first sample.
    pub t0: f64,
    /// Ohm.
    pub baseline: f64,
    /// Per-cell drift coefficients in normalized session time, Ohm. Cells
    /// beyond the list get random drift.
    pub drift: Vec<Vec<f64>>,
    /// Standard deviation of random drift coefficients, Ohm.
    pub drift_scale: f64,
    pub drift_order: usize,
    pub telegraph: TelegraphConfig,
    /// White noise, Ohm.
    pub noise_rms: f64,
    /// Weight of the shared telegraph process, `[0, 1]`.
    pub coupling: f64,
    pub events: Vec<WaveEvent>,
    pub oscillations: Vec<OscillationSpec>,
    pub temp: TempConfig,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_cells: 8,
            duration: 20_000,
            sample_period: 1.0,
            t0: 1.66e9,
            baseline: 1e5,
            drift: Vec::new(),
            drift_scale: 50.0,
            drift_order: 3,
            telegraph: TelegraphConfig::default(),
            noise_rms: 1.0,
            coupling: 0.0,
            events: Vec::new(),
            oscillations: Vec::new(),
            temp: TempConfig::default(),
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        toml::from_str(text).map_err(|e| SimError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String, SimError> {
        toml::to_string(self).map_err(|e| SimError::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        if !(2..=MAX_CHANNELS).contains(&self.n_cells) {
            return bad(format!("n_cells {} outside 2..={MAX_CHANNELS}", self.n_cells));
        }
        if self.duration < 2 {
            return bad("duration must be at least 2 samples".into());
        }
        if !(self.sample_period > 0.0 && self.sample_period.is_finite()) {
            return bad(format!("sample period {} must be positive", self.sample_period));
        }
        let tg = &self.telegraph;
        if !(tg.switch_rate > 0.0 && tg.switch_rate <= 1.0) {
            return bad(format!("switch rate {} outside (0, 1]", tg.switch_rate));
        }
        if !(tg.step_amp >= 0.0) || !(self.noise_rms >= 0.0) || !(self.drift_scale >= 0.0) {
            return bad("amplitudes must be non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.coupling) {
            return bad(format!("coupling {} outside [0, 1]", self.coupling));
        }
        if !(self.temp.noise_rms >= 0.0) {
            return bad("temperature noise must be non-negative".into());
        }
        if self.drift.len() > self.n_cells {
            return bad("more drift polynomials than cells".into());
        }
        for e in &self.events {
            e.validate(self.n_cells, self.duration)?;
            if e.temp_coupling.is_some() && !self.temp.enabled {
                return Err(SimError::InvalidEvent("temperature coupling without temperature channels".into()));
            }
        }
        for (a, ea) in self.events.iter().enumerate() {
            for (b, eb) in self.events.iter().enumerate().skip(a + 1) {
                if ea.t0 < eb.end() && eb.t0 < ea.end() {
                    if let Some(&cell) = ea.cells.iter().find(|c| eb.cells.contains(c)) {
                        return Err(SimError::Overlap { a, b, cell });
                    }
                }
            }
        }
        for o in &self.oscillations {
            if o.cell >= self.n_cells || o.duration == 0 || !(o.period > 0.0) {
                return bad(format!("invalid self-oscillation {o:?}"));
            }
            if o.t0 + o.duration > self.duration {
                return Err(SimError::OutOfBounds {
                    start: o.t0,
                    end: o.t0 + o.duration,
                    n_samples: self.duration,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthEvent {
    pub start: usize,
    pub end: usize,
    pub cells: Vec<usize>,
    pub signs: Vec<f64>,
    pub anti_phase: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSpan {
    pub cell: usize,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub events: Vec<TruthEvent>,
    pub self_oscillations: Vec<TruthSpan>,
    /// Samples at which each cell's own telegraph state flips.
    pub switch_times: Vec<Vec<usize>>,
    pub shared_switch_times: Vec<usize>,
    pub initial_states: Vec<i8>,
    pub shared_initial_state: i8,
    pub n_samples: usize,
}

impl GroundTruth {
    /// ±1 own telegraph state of `cell` at every sample.
    pub fn telegraph_states(&self, cell: usize) -> Vec<f64> {
        states(self.initial_states[cell], &self.switch_times[cell], self.n_samples)
    }

    pub fn shared_states(&self) -> Vec<f64> {
        states(self.shared_initial_state, &self.shared_switch_times, self.n_samples)
    }
}

fn states(initial: i8, flips: &[usize], n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut s = initial as f64;
    let mut next = flips.iter().peekable();
    for t in 0..n {
        if next.peek() == Some(&&t) {
            s = -s;
            next.next();
        }
        out.push(s);
    }
    out
}

pub fn impedance_id(cell: usize) -> String {
    format!("sim/Z{}", cell + 1)
}

pub fn temperature_id(cell: usize) -> String {
    format!("sim/T{}", cell + 1)
}

/// Generates a session from `config` with the random stream seeded by `seed`.
pub fn simulate(config: &SimConfig, seed: u64) -> Result<(Session, GroundTruth), SimError> {
    config.validate()?;
    let n = config.duration;
    let p = config.n_cells;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let drift_dist = Normal::new(0.0, config.drift_scale).map_err(|e| SimError::Config(e.to_string()))?;
    let drift: Vec<Vec<f64>> = (0..p)
        .map(|c| match config.drift.get(c) {
            Some(k) => k.clone(),
            None => {
                let mut k = vec![0.0];
                k.extend((0..config.drift_order).map(|_| drift_dist.sample(&mut rng)));
                k
            }
        })
        .collect();

    let flip = |rng: &mut ChaCha8Rng| rng.random::<f64>() < config.telegraph.switch_rate;
    let sign = |rng: &mut ChaCha8Rng| if rng.random::<bool>() { 1i8 } else { -1i8 };
    let shared_initial_state = sign(&mut rng);
    let initial_states: Vec<i8> = (0..p).map(|_| sign(&mut rng)).collect();

    let mut shared = shared_initial_state as f64;
    let mut own: Vec<f64> = initial_states.iter().map(|&s| s as f64).collect();
    let mut level = vec![0.0; p];
    let mut switch_times = vec![Vec::new(); p];
    let mut shared_switch_times = Vec::new();

    let half = (n - 1) as f64 / 2.0;
    let mut imp = vec![vec![0.0; n]; p];
    let mut temp = vec![vec![0.0; n]; if config.temp.enabled { p } else { 0 }];
    let c = config.coupling;
    let step = config.telegraph.step_amp;

    for t in 0..n {
        let x = (t as f64 - half) / half;
        if t > 0 && flip(&mut rng) {
            shared = -shared;
            shared_switch_times.push(t);
        }
        for cell in 0..p {
            if t > 0 && flip(&mut rng) {
                own[cell] = -own[cell];
                switch_times[cell].push(t);
            }
            let noise: f64 = StandardNormal.sample(&mut rng);
            imp[cell][t] = config.baseline + horner(&drift[cell], x) + level[cell] + config.noise_rms * noise;
            level[cell] += step * (c * shared + (1.0 - c) * own[cell]);
        }
        for series in temp.iter_mut() {
            let noise: f64 = StandardNormal.sample(&mut rng);
            series[t] = config.temp.baseline + horner(&config.temp.drift, x) + config.temp.noise_rms * noise;
        }
    }

    for e in &config.events {
        for (k, &cell) in e.cells.iter().enumerate() {
            let s = e.sign_of(k);
            for t in e.t0..e.end() {
                let w = e.shape(t);
                imp[cell][t] += s * e.amplitude * w;
                if let Some(tc) = e.temp_coupling {
                    temp[cell][t] += tc.sign * s * tc.amplitude * w;
                }
            }
        }
    }
    for o in &config.oscillations {
        for t in o.t0..o.t0 + o.duration {
            let s = (t - o.t0) as f64;
            imp[o.cell][t] += o.amplitude * (2.0 * std::f64::consts::PI * s / o.period).sin();
        }
    }

    let mut channels: Vec<ChannelSeries> = imp
        .into_iter()
        .enumerate()
        .map(|(cell, v)| ChannelSeries::new(impedance_id(cell), ChannelKind::Impedance, "Ohm", v))
        .collect();
    channels.extend(
        temp.into_iter()
            .enumerate()
            .map(|(cell, v)| ChannelSeries::new(temperature_id(cell), ChannelKind::FluidTemp, "°C", v)),
    );
    let mut session = Session::new(config.sample_period, config.t0, channels)?;
    session.provenance.sources.push(format!("simulator seed={seed}"));

    let truth = GroundTruth {
        events: config
            .events
            .iter()
            .map(|e| {
                let signs: Vec<f64> = (0..e.cells.len()).map(|k| e.sign_of(k)).collect();
                TruthEvent {
                    start: e.t0,
                    end: e.end(),
                    cells: e.cells.clone(),
                    anti_phase: signs.iter().any(|&s| s < 0.0) && signs.iter().any(|&s| s > 0.0),
                    signs,
                }
            })
            .collect(),
        self_oscillations: config
            .oscillations
            .iter()
            .map(|o| TruthSpan {
                cell: o.cell,
                start: o.t0,
                end: o.t0 + o.duration,
            })
            .collect(),
        switch_times,
        shared_switch_times,
        initial_states,
        shared_initial_state,
        n_samples: n,
    };
    Ok((session, truth))
}

fn horner(k: &[f64], x: f64) -> f64 {
    k.iter().rev().fold(0.0, |acc, c| acc * x + c)
}
