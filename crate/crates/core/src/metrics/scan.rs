use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{nan_max, rolling_mean_corr, MetricsError};
use crate::synccorr::rolling_correlations;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub best_window: usize,
    /// `NaN` when no window produced a defined `r_mean`.
    pub best_peak: f64,
    /// `(window, peak r_mean)` for every scanned window.
    pub curve: Vec<(usize, f64)>,
}

/// Peak `r_mean` of `channels` for windows `lo, lo + step, ... ≤ hi`, and the
/// window that maximizes it (the smallest one on ties).
pub fn scan_window(channels: &[&[f64]], lo: usize, hi: usize, step: usize) -> Result<ScanResult, MetricsError> {
    let len = channels.first().map_or(0, |c| c.len());
    if step == 0 || lo < 2 || lo > hi || hi > len / 2 {
        return Err(MetricsError::ScanRange { lo, hi, step, len });
    }
    let windows: Vec<usize> = (lo..=hi).step_by(step).collect();
    let curve = windows
        .par_iter()
        .map(|&w| {
            let pairs = rolling_correlations(channels, w)?;
            Ok((w, nan_max(&rolling_mean_corr(&pairs).0)))
        })
        .collect::<Result<Vec<_>, MetricsError>>()?;
    let (best_window, best_peak) = curve
        .iter()
        .copied()
        .fold((lo, f64::NAN), |(bw, bp), (w, p)| {
            if !p.is_nan() && (bp.is_nan() || p > bp) {
                (w, p)
            } else {
                (bw, bp)
            }
        });
    Ok(ScanResult {
        best_window,
        best_peak,
        curve,
    })
}
