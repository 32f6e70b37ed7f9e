//! Masking of spontaneous large-amplitude self-oscillations on one channel.
//!
//! A window is flagged when its RMS exceeds `amp_factor` times the median
//! window RMS of the frame and a single spectral peak (the peak bin and its
//! two neighbours of a Hann-windowed FFT) holds more than `peak_frac` of the
//! window power. Short synchronization waves of a few cycles fail one or both
//! tests and stay visible.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OscillationConfig {
    pub amp_factor: f64,
    pub peak_frac: f64,
    pub window: usize,
    pub hop: usize,
}

impl Default for OscillationConfig {
    fn default() -> Self {
        Self {
            amp_factor: 5.0,
            peak_frac: 0.6,
            window: 256,
            hop: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillationWindow {
    pub start: usize,
    pub rms: f64,
    pub peak_frac: f64,
    /// Period of the peak bin in samples.
    pub peak_period: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OscillationDiagnostics {
    pub median_rms: f64,
    /// Windows that passed the amplitude test, flagged or not.
    pub loud_windows: Vec<OscillationWindow>,
    pub masked_samples: usize,
}

/// Mask (`true` = excluded) over `residual` and per-window diagnostics.
pub fn reject_self_oscillation(residual: &[f64], cfg: &OscillationConfig) -> (Vec<bool>, OscillationDiagnostics) {
    let n = residual.len();
    let mut mask = vec![false; n];
    let mut diag = OscillationDiagnostics {
        median_rms: f64::NAN,
        ..Default::default()
    };
    let w = cfg.window;
    if w < 8 || cfg.hop == 0 || n < w {
        return (mask, diag);
    }
    let mut starts: Vec<usize> = (0..=n - w).step_by(cfg.hop).collect();
    if starts.last() != Some(&(n - w)) {
        starts.push(n - w);
    }
    let rms: Vec<f64> = starts.iter().map(|&s| window_rms(&residual[s..s + w])).collect();
    let mut finite: Vec<f64> = rms.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return (mask, diag);
    }
    finite.sort_by(f64::total_cmp);
    let mid = finite.len() / 2;
    let median = if finite.len() % 2 == 1 {
        finite[mid]
    } else {
        0.5 * (finite[mid - 1] + finite[mid])
    };
    diag.median_rms = median;

    let mut spectrum: Option<Spectrum> = None;
    for (&s, &r) in starts.iter().zip(&rms) {
        if !(r > cfg.amp_factor * median) {
            continue;
        }
        let spec = spectrum.get_or_insert_with(|| Spectrum::new(w));
        let (frac, bin) = spec.peak_fraction(&residual[s..s + w]);
        let flagged = frac > cfg.peak_frac;
        if flagged {
            mask[s..s + w].iter_mut().for_each(|m| *m = true);
        }
        diag.loud_windows.push(OscillationWindow {
            start: s,
            rms: r,
            peak_frac: frac,
            peak_period: if bin == 0 { f64::INFINITY } else { w as f64 / bin as f64 },
            flagged,
        });
    }
    diag.masked_samples = mask.iter().filter(|&&m| m).count();
    (mask, diag)
}

fn window_rms(x: &[f64]) -> f64 {
    if x.iter().any(|v| !v.is_finite()) {
        return f64::NAN;
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

struct Spectrum {
    fft: Arc<dyn Fft<f64>>,
    taper: Vec<f64>,
    buf: Vec<Complex64>,
}

impl Spectrum {
    fn new(w: usize) -> Self {
        let taper = (0..w)
            .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / w as f64).cos())
            .collect();
        Self {
            fft: FftPlanner::new().plan_fft_forward(w),
            taper,
            buf: vec![Complex64::default(); w],
        }
    }

    /// Share of the non-DC one-sided power in the strongest bin and its
    /// neighbours, with the strongest bin.
    fn peak_fraction(&mut self, x: &[f64]) -> (f64, usize) {
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        for ((b, &v), &t) in self.buf.iter_mut().zip(x).zip(&self.taper) {
            *b = Complex64::new((v - mean) * t, 0.0);
        }
        self.fft.process(&mut self.buf);
        let half = x.len() / 2;
        let power: Vec<f64> = self.buf[..=half].iter().map(|c| c.norm_sqr()).collect();
        let total: f64 = power[1..].iter().sum();
        if !(total > 0.0) {
            return (0.0, 0);
        }
        let peak = (1..=half).fold(1, |b, k| if power[k] > power[b] { k } else { b });
        let band: f64 = power[peak.saturating_sub(1).max(1)..=(peak + 1).min(half)].iter().sum();
        (band / total, peak)
    }
}
