//! Synchronization metrics over rolling pair correlations.
//!
//! At every window position `i` the rolling mean `r_mean_i` averages all
//! defined pair coefficients and `l_pair_i` is the fraction of defined pairs
//! above the correlation threshold `z`, either by signed value or by
//! magnitude (the latter also sees anti-phase pairs).

mod events;
mod groups;
mod oscillation;
mod rates;
mod scan;
mod subset;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::synccorr::{CorrError, PairSeries};

pub use events::{detect_events, DetectConfig, Phase, SyncEvent, Trigger};
pub use groups::{
    group_correlations, group_sizes, thermal_impedance_bound, GroupCorrelations, THERMAL_COEFF_MAX,
    THERMAL_COEFF_MIN,
};
pub use oscillation::{reject_self_oscillation, OscillationConfig, OscillationDiagnostics, OscillationWindow};
pub use rates::{
    count_runs, count_samples, default_criteria, event_rate, RateCriterion, RateMetric, RateReport, RateRow,
};
pub use scan::{scan_window, ScanResult};
pub use subset::{saturation_ratio, subset_counts, subset_ratio, SubsetSeries};

/// Cells are tracked in a 64-bit mask.
pub const MAX_CHANNELS: usize = 64;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("correlation threshold {0} outside (0, 1)")]
    Threshold(f64),
    #[error("invalid metrics configuration: {0}")]
    Config(String),
    #[error("{0} channels exceed the supported maximum of {MAX_CHANNELS}")]
    TooManyChannels(usize),
    #[error("series to splice are inconsistent: {0}")]
    Splice(String),
    #[error("experiment time {0} s must be positive")]
    ExperimentTime(f64),
    #[error("scan range {lo}..={hi} step {step} invalid for {len} samples")]
    ScanRange { lo: usize, hi: usize, step: usize, len: usize },
    #[error(transparent)]
    Corr(#[from] CorrError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LPairMode {
    /// `r > z`
    Signed,
    /// `|r| > z`
    #[default]
    Absolute,
}

impl LPairMode {
    #[inline]
    pub fn qualifies(self, r: f64, z: f64) -> bool {
        match self {
            LPairMode::Signed => r > z,
            LPairMode::Absolute => r.abs() > z,
        }
    }
}

pub(crate) fn check_threshold(z: f64) -> Result<(), MetricsError> {
    if z > 0.0 && z < 1.0 {
        Ok(())
    } else {
        Err(MetricsError::Threshold(z))
    }
}

/// Per-position metrics of one window size and threshold.
///
/// Element `k` belongs to the window that ends at sample `start + k`. `NaN`
/// marks positions with no defined pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSeries {
    pub window: usize,
    pub z: f64,
    pub n_channels: usize,
    pub start: usize,
    pub r_mean: Vec<f64>,
    pub l_pair_signed: Vec<f64>,
    pub l_pair_abs: Vec<f64>,
    /// Number of defined pairs.
    pub n_defined: Vec<u32>,
    /// Bit `c` set when cell `c` belongs to a pair with `r > z`.
    pub involved_signed: Vec<u64>,
    /// Bit `c` set when cell `c` belongs to a pair with `|r| > z`.
    pub involved_abs: Vec<u64>,
}

impl MetricsSeries {
    /// Metrics of `pairs`, whose series starts at sample `offset`.
    pub fn from_pairs(pairs: &PairSeries, z: f64, offset: usize) -> Result<Self, MetricsError> {
        check_threshold(z)?;
        if pairs.n_channels > MAX_CHANNELS {
            return Err(MetricsError::TooManyChannels(pairs.n_channels));
        }
        let n = pairs.len();
        let mut m = Self::empty(pairs.window, z, pairs.n_channels, offset + pairs.first_end());
        m.resize(n);
        let masks: Vec<u64> = pairs.pairs.iter().map(|p| (1u64 << p.i) | (1u64 << p.j)).collect();
        for t in 0..n {
            let (mut sum, mut defined, mut above, mut above_abs) = (0.0, 0u32, 0u32, 0u32);
            let (mut inv_s, mut inv_a) = (0u64, 0u64);
            for (series, &mask) in pairs.values.iter().zip(&masks) {
                let r = series[t];
                if r.is_nan() {
                    continue;
                }
                defined += 1;
                sum += r;
                if r > z {
                    above += 1;
                    inv_s |= mask;
                }
                if r.abs() > z {
                    above_abs += 1;
                    inv_a |= mask;
                }
            }
            if defined > 0 {
                let d = defined as f64;
                m.r_mean[t] = sum / d;
                m.l_pair_signed[t] = above as f64 / d;
                m.l_pair_abs[t] = above_abs as f64 / d;
            }
            m.n_defined[t] = defined;
            m.involved_signed[t] = inv_s;
            m.involved_abs[t] = inv_a;
        }
        Ok(m)
    }

    fn empty(window: usize, z: f64, n_channels: usize, start: usize) -> Self {
        Self {
            window,
            z,
            n_channels,
            start,
            r_mean: Vec::new(),
            l_pair_signed: Vec::new(),
            l_pair_abs: Vec::new(),
            n_defined: Vec::new(),
            involved_signed: Vec::new(),
            involved_abs: Vec::new(),
        }
    }

    fn resize(&mut self, n: usize) {
        self.r_mean.resize(n, f64::NAN);
        self.l_pair_signed.resize(n, f64::NAN);
        self.l_pair_abs.resize(n, f64::NAN);
        self.n_defined.resize(n, 0);
        self.involved_signed.resize(n, 0);
        self.involved_abs.resize(n, 0);
    }

    pub fn len(&self) -> usize {
        self.r_mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r_mean.is_empty()
    }

    /// One past the last covered sample index.
    pub fn end(&self) -> usize {
        self.start + self.len()
    }

    pub fn l_pair(&self, mode: LPairMode) -> &[f64] {
        match mode {
            LPairMode::Signed => &self.l_pair_signed,
            LPairMode::Absolute => &self.l_pair_abs,
        }
    }

    pub fn involved(&self, mode: LPairMode) -> &[u64] {
        match mode {
            LPairMode::Signed => &self.involved_signed,
            LPairMode::Absolute => &self.involved_abs,
        }
    }

    /// Positions with at least one defined pair.
    pub fn n_valid(&self) -> usize {
        self.n_defined.iter().filter(|&&d| d > 0).count()
    }

    /// Largest defined `r_mean`, `NaN` when nothing is defined.
    pub fn peak_r_mean(&self) -> f64 {
        nan_max(&self.r_mean)
    }

    /// Joins series of the same window, threshold and channel count that
    /// cover increasing, non-overlapping sample ranges. Uncovered positions
    /// in between are undefined.
    pub fn concat(parts: &[MetricsSeries]) -> Result<Self, MetricsError> {
        let first = parts
            .first()
            .ok_or_else(|| MetricsError::Splice("nothing to splice".into()))?;
        let mut out = Self::empty(first.window, first.z, first.n_channels, first.start);
        for part in parts {
            if part.window != out.window || part.z != out.z || part.n_channels != out.n_channels {
                return Err(MetricsError::Splice("window, threshold or channel count differ".into()));
            }
            if part.start < out.end() {
                return Err(MetricsError::Splice(format!(
                    "part starting at {} overlaps data ending at {}",
                    part.start,
                    out.end()
                )));
            }
            let gap = part.start - out.end();
            let n = out.len() + gap;
            out.resize(n);
            out.r_mean.extend_from_slice(&part.r_mean);
            out.l_pair_signed.extend_from_slice(&part.l_pair_signed);
            out.l_pair_abs.extend_from_slice(&part.l_pair_abs);
            out.n_defined.extend_from_slice(&part.n_defined);
            out.involved_signed.extend_from_slice(&part.involved_signed);
            out.involved_abs.extend_from_slice(&part.involved_abs);
        }
        Ok(out)
    }
}

pub(crate) fn nan_max(values: &[f64]) -> f64 {
    values
        .iter()
        .copied()
        .filter(|v| !v.is_nan())
        .fold(f64::NAN, |m, v| if m.is_nan() || v > m { v } else { m })
}

pub(crate) fn cells_of(mask: u64) -> Vec<usize> {
    (0..64).filter(|c| mask & (1u64 << c) != 0).collect()
}

/// Mean of all defined pair coefficients at each position with the number of
/// defined pairs; `NaN` where every pair is undefined.
pub fn rolling_mean_corr(pairs: &PairSeries) -> (Vec<f64>, Vec<u32>) {
    let n = pairs.len();
    let mut sums = vec![0.0; n];
    let mut counts = vec![0u32; n];
    for series in &pairs.values {
        for ((s, c), &r) in sums.iter_mut().zip(counts.iter_mut()).zip(series) {
            if !r.is_nan() {
                *s += r;
                *c += 1;
            }
        }
    }
    let means = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| if c == 0 { f64::NAN } else { s / c as f64 })
        .collect();
    (means, counts)
}

/// Fraction of defined pairs above `z` at each position.
pub fn pair_fraction(pairs: &PairSeries, z: f64, mode: LPairMode) -> Result<Vec<f64>, MetricsError> {
    check_threshold(z)?;
    let n = pairs.len();
    let mut above = vec![0u32; n];
    let mut defined = vec![0u32; n];
    for series in &pairs.values {
        for t in 0..n {
            let r = series[t];
            if !r.is_nan() {
                defined[t] += 1;
                if mode.qualifies(r, z) {
                    above[t] += 1;
                }
            }
        }
    }
    Ok(above
        .iter()
        .zip(&defined)
        .map(|(&a, &d)| if d == 0 { f64::NAN } else { a as f64 / d as f64 })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synccorr::pair_list;

    fn constant_pairs(p: usize, values: &[f64], len: usize) -> PairSeries {
        let pairs = pair_list(p);
        assert_eq!(pairs.len(), values.len());
        PairSeries {
            window: 10,
            n_channels: p,
            pairs,
            values: values.iter().map(|&r| vec![r; len]).collect(),
        }
    }

    #[test]
    fn all_ones_mean_is_one() {
        let ps = constant_pairs(4, &[1.0; 6], 3);
        let (m, c) = rolling_mean_corr(&ps);
        assert!(m.iter().all(|&v| v == 1.0));
        assert!(c.iter().all(|&v| v == 6));
    }

    #[test]
    fn opposite_pairs_cancel() {
        let ps = constant_pairs(4, &[1.0, 1.0, 1.0, -1.0, -1.0, -1.0], 2);
        let (m, _) = rolling_mean_corr(&ps);
        assert_eq!(m, vec![0.0, 0.0]);
        assert_eq!(pair_fraction(&ps, 0.7, LPairMode::Absolute).unwrap(), vec![1.0, 1.0]);
        assert_eq!(pair_fraction(&ps, 0.7, LPairMode::Signed).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn undefined_pairs_are_excluded() {
        let ps = constant_pairs(3, &[0.9, f64::NAN, 0.1], 1);
        let (m, c) = rolling_mean_corr(&ps);
        assert!((m[0] - 0.5).abs() < 1e-15);
        assert_eq!(c[0], 2);
        let all_nan = constant_pairs(2, &[f64::NAN], 2);
        assert!(rolling_mean_corr(&all_nan).0.iter().all(|v| v.is_nan()));
        assert!(pair_fraction(&all_nan, 0.5, LPairMode::Signed).unwrap()[0].is_nan());
    }

    #[test]
    fn series_matches_standalone_functions() {
        let ps = PairSeries {
            window: 5,
            n_channels: 3,
            pairs: pair_list(3),
            values: vec![vec![0.8, -0.9, f64::NAN], vec![0.1, -0.75, 0.3], vec![0.95, 0.2, f64::NAN]],
        };
        let m = MetricsSeries::from_pairs(&ps, 0.7, 100).unwrap();
        assert_eq!(m.start, 104);
        let (mean, counts) = rolling_mean_corr(&ps);
        assert_eq!(m.n_defined, counts);
        for t in 0..3 {
            assert_eq!(m.r_mean[t].to_bits(), mean[t].to_bits());
        }
        assert_eq!(m.l_pair_signed, pair_fraction(&ps, 0.7, LPairMode::Signed).unwrap());
        assert_eq!(m.l_pair_abs, pair_fraction(&ps, 0.7, LPairMode::Absolute).unwrap());
        // Pairs (0,1), (0,2), (1,2): position 1 has |r| > z for (0,1) and (0,2).
        assert_eq!(m.involved_abs[1], 0b011 | 0b101);
        assert_eq!(m.involved_signed[1], 0);
        assert_eq!(m.involved_signed[0], 0b011 | 0b110);
    }

    #[test]
    fn rejects_bad_threshold() {
        let ps = constant_pairs(2, &[0.5], 1);
        for z in [0.0, 1.0, 1.5, -0.1, f64::NAN] {
            assert!(MetricsSeries::from_pairs(&ps, z, 0).is_err());
            assert!(pair_fraction(&ps, z, LPairMode::Signed).is_err());
        }
    }

    #[test]
    fn concat_fills_gaps() {
        let ps = constant_pairs(2, &[0.9], 3);
        let a = MetricsSeries::from_pairs(&ps, 0.7, 0).unwrap();
        let b = MetricsSeries::from_pairs(&ps, 0.7, 20).unwrap();
        let joined = MetricsSeries::concat(&[a.clone(), b]).unwrap();
        assert_eq!(joined.start, 9);
        assert_eq!(joined.end(), 32);
        assert_eq!(joined.n_valid(), 6);
        assert!(joined.r_mean[3..20].iter().all(|v| v.is_nan()));
        assert!(MetricsSeries::concat(&[a.clone(), a]).is_err());
        assert!(MetricsSeries::concat(&[]).is_err());
    }
}
