//! Causal Butterworth low-pass for residual series.
//!
//! Order 2 is one biquad, order 4 is two cascaded biquads, both designed by
//! the bilinear transform with pre-warping. Every channel goes through the
//! same filter, so the common group delay does not change their mutual
//! correlation.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detrend::ResidualSeries;

#[derive(Debug, Error, PartialEq)]
pub enum FilterError {
    #[error("cutoff {0} must lie strictly between 0 and 1 (fraction of Nyquist)")]
    Cutoff(f64),
    #[error("filter order {0} not supported (2 or 4)")]
    Order(usize),
    #[error("series of {len} samples too short for an order-{order} filter")]
    TooShort { len: usize, order: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowpassConfig {
    /// Cutoff as a fraction of the Nyquist frequency.
    pub cutoff: f64,
    pub order: usize,
}

impl Default for LowpassConfig {
    fn default() -> Self {
        Self {
            cutoff: 0.1,
            order: 2,
        }
    }
}

/// Normalized second-order section, `a0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    fn lowpass(k: f64, q: f64) -> Self {
        let norm = 1.0 / (1.0 + k / q + k * k);
        let b0 = k * k * norm;
        Self {
            b0,
            b1: 2.0 * b0,
            b2: b0,
            a1: 2.0 * (k * k - 1.0) * norm,
            a2: (1.0 - k / q + k * k) * norm,
        }
    }

    fn response(&self, z: Complex64) -> Complex64 {
        let zi = z.inv();
        let zi2 = zi * zi;
        (self.b0 + self.b1 * zi + self.b2 * zi2) / (1.0 + self.a1 * zi + self.a2 * zi2)
    }

    /// Transposed direct form II state that holds a constant input `x` at
    /// steady state.
    fn steady_state(&self, x: f64) -> (f64, f64) {
        let z2 = (self.b2 - self.a2) * x;
        (((self.b1 - self.a1) * x) + z2, z2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ButterworthLowpass {
    config: LowpassConfig,
    sections: Vec<Biquad>,
}

impl ButterworthLowpass {
    pub fn design(config: LowpassConfig) -> Result<Self, FilterError> {
        if !(config.cutoff > 0.0 && config.cutoff < 1.0) {
            return Err(FilterError::Cutoff(config.cutoff));
        }
        if config.order != 2 && config.order != 4 {
            return Err(FilterError::Order(config.order));
        }
        let k = (PI * config.cutoff / 2.0).tan();
        let n = config.order as f64;
        let sections = (1..=config.order / 2)
            .map(|i| {
                let theta = PI * (2 * i - 1) as f64 / (2.0 * n);
                Biquad::lowpass(k, 1.0 / (2.0 * theta.cos()))
            })
            .collect();
        Ok(Self { config, sections })
    }

    pub fn config(&self) -> LowpassConfig {
        self.config
    }

    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    /// `|H(e^{jω})|` at `freq` given as a fraction of Nyquist.
    pub fn magnitude(&self, freq: f64) -> f64 {
        let z = Complex64::from_polar(1.0, PI * freq);
        self.sections
            .iter()
            .map(|s| s.response(z))
            .fold(Complex64::new(1.0, 0.0), |acc, h| acc * h)
            .norm()
    }

    /// Filters `x`. `NaN` samples stay `NaN` and split the series into
    /// segments that are filtered independently, each one starting from the
    /// steady state of its first sample.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, FilterError> {
        if x.len() <= 3 * self.config.order {
            return Err(FilterError::TooShort {
                len: x.len(),
                order: self.config.order,
            });
        }
        let mut out = vec![f64::NAN; x.len()];
        let mut state: Option<Vec<(f64, f64)>> = None;
        for (i, &xi) in x.iter().enumerate() {
            if !xi.is_finite() {
                state = None;
                continue;
            }
            let st = state.get_or_insert_with(|| self.sections.iter().map(|s| s.steady_state(xi)).collect());
            let mut v = xi;
            for (s, (z1, z2)) in self.sections.iter().zip(st.iter_mut()) {
                let y = s.b0 * v + *z1;
                *z1 = s.b1 * v - s.a1 * y + *z2;
                *z2 = s.b2 * v - s.a2 * y;
                v = y;
            }
            out[i] = v;
        }
        Ok(out)
    }
}

/// Low-pass filters a residual series, keeping its channel and model.
pub fn lowpass(residual: &ResidualSeries, config: LowpassConfig) -> Result<ResidualSeries, FilterError> {
    let filter = ButterworthLowpass::design(config)?;
    Ok(ResidualSeries {
        values: filter.apply(&residual.values)?,
        channel: residual.channel.clone(),
        model: residual.model.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Analog Butterworth magnitude after pre-warping, an independent
    /// closed form for the bilinear design.
    fn butterworth_oracle(freq: f64, cutoff: f64, order: usize) -> f64 {
        let ratio = (PI * freq / 2.0).tan() / (PI * cutoff / 2.0).tan();
        1.0 / (1.0 + ratio.powi(2 * order as i32)).sqrt()
    }

    fn steady_amplitude(y: &[f64]) -> f64 {
        y[y.len() / 2..].iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    #[test]
    fn designed_response_matches_closed_form() {
        for order in [2, 4] {
            for cutoff in [0.05, 0.1, 0.3, 0.8] {
                let f = ButterworthLowpass::design(LowpassConfig { cutoff, order }).unwrap();
                for freq in [0.0, 0.01, 0.05, 0.1, 0.2, 0.5, 0.9, 0.999] {
                    let got = f.magnitude(freq);
                    let want = butterworth_oracle(freq, cutoff, order);
                    assert!((got - want).abs() < 1e-9, "order {order} fc {cutoff} f {freq}: {got} vs {want}");
                }
                assert!((f.magnitude(cutoff) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn constant_passes_unchanged() {
        let f = ButterworthLowpass::design(LowpassConfig::default()).unwrap();
        let y = f.apply(&vec![3.5; 200]).unwrap();
        assert!(y.iter().all(|v| (v - 3.5).abs() < 1e-9));
    }

    #[test]
    fn nyquist_is_attenuated() {
        let cfg = LowpassConfig {
            cutoff: 0.1,
            order: 2,
        };
        let f = ButterworthLowpass::design(cfg).unwrap();
        let x: Vec<f64> = (0..4000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let y = f.apply(&x).unwrap();
        let measured = steady_amplitude(&y);
        let designed = f.magnitude(1.0);
        assert!(designed < 1e-12);
        assert!(measured <= designed + 1e-9);
        assert!(20.0 * measured.max(1e-300).log10() <= -20.0);
    }

    #[test]
    fn slow_sinusoid_is_preserved() {
        let cfg = LowpassConfig {
            cutoff: 0.1,
            order: 2,
        };
        let f = ButterworthLowpass::design(cfg).unwrap();
        let freq = 0.01;
        let x: Vec<f64> = (0..20000).map(|i| (PI * freq * i as f64).sin()).collect();
        let y = f.apply(&x).unwrap();
        let measured = steady_amplitude(&y);
        let designed = f.magnitude(freq);
        assert!((measured - designed).abs() < 1e-3, "{measured} vs {designed}");
        assert!((measured - 1.0).abs() < 0.05);
    }

    #[test]
    fn gaps_restart_the_filter() {
        let f = ButterworthLowpass::design(LowpassConfig::default()).unwrap();
        let mut x = vec![1.0; 50];
        x.extend([f64::NAN; 3]);
        x.extend(vec![-2.0; 50]);
        let y = f.apply(&x).unwrap();
        assert!(y[50..53].iter().all(|v| v.is_nan()));
        assert!((y[53] + 2.0).abs() < 1e-12);
        assert!((y[49] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_config() {
        for c in [0.0, 1.0, -0.2, 1.5, f64::NAN] {
            assert!(matches!(
                ButterworthLowpass::design(LowpassConfig { cutoff: c, order: 2 }),
                Err(FilterError::Cutoff(_))
            ));
        }
        assert_eq!(
            ButterworthLowpass::design(LowpassConfig { cutoff: 0.1, order: 3 }),
            Err(FilterError::Order(3))
        );
        let f = ButterworthLowpass::design(LowpassConfig { cutoff: 0.1, order: 4 }).unwrap();
        assert!(matches!(f.apply(&[0.0; 12]), Err(FilterError::TooShort { .. })));
    }
}
