//! Impedance/temperature cross-checks.

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::synccorr::{n_pairs, rolling_correlations};

/// Temperature coefficient range of electrolyte conductivity, 1/°C.
pub const THERMAL_COEFF_MIN: f64 = 0.0191;
pub const THERMAL_COEFF_MAX: f64 = 0.025;

/// Rolling mean correlations of the three channel groups. Series element `k`
/// belongs to the window ending at sample `start + k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCorrelations {
    pub window: usize,
    pub start: usize,
    /// Pair counts `(imp-imp, temp-temp, imp-temp)`.
    pub sizes: (usize, usize, usize),
    pub imp_imp: Vec<f64>,
    pub temp_temp: Vec<f64>,
    pub imp_temp: Vec<f64>,
}

impl GroupCorrelations {
    pub fn len(&self) -> usize {
        self.imp_imp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.imp_imp.is_empty()
    }

    /// Joins consecutive, non-overlapping parts, leaving gaps undefined.
    pub fn concat(parts: &[GroupCorrelations]) -> Result<Self, MetricsError> {
        let first = parts
            .first()
            .ok_or_else(|| MetricsError::Splice("nothing to splice".into()))?;
        let mut out = GroupCorrelations {
            window: first.window,
            start: first.start,
            sizes: first.sizes,
            imp_imp: Vec::new(),
            temp_temp: Vec::new(),
            imp_temp: Vec::new(),
        };
        for part in parts {
            let end = out.start + out.len();
            if part.window != out.window || part.sizes != out.sizes || part.start < end {
                return Err(MetricsError::Splice("group series do not line up".into()));
            }
            let n = out.len() + (part.start - end);
            for (dst, src) in [
                (&mut out.imp_imp, &part.imp_imp),
                (&mut out.temp_temp, &part.temp_temp),
                (&mut out.imp_temp, &part.imp_temp),
            ] {
                dst.resize(n, f64::NAN);
                dst.extend_from_slice(src);
            }
        }
        Ok(out)
    }
}

/// `(C(p, 2), C(q, 2), p·q)`.
pub fn group_sizes(p: usize, q: usize) -> (usize, usize, usize) {
    (n_pairs(p), n_pairs(q), p * q)
}

/// Rolling correlations of `p` impedance and `q` temperature channels,
/// averaged per group with undefined pairs excluded. A group without pairs
/// yields an all-`NaN` series. `offset` is the sample index of the first
/// input sample.
pub fn group_correlations(
    impedance: &[&[f64]],
    temperature: &[&[f64]],
    window: usize,
    offset: usize,
) -> Result<GroupCorrelations, MetricsError> {
    let p = impedance.len();
    let q = temperature.len();
    let all: Vec<&[f64]> = impedance.iter().chain(temperature).copied().collect();
    let pairs = rolling_correlations(&all, window)?;
    let n = pairs.len();
    let mut sums = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut counts = [vec![0u32; n], vec![0u32; n], vec![0u32; n]];
    for (pair, series) in pairs.pairs.iter().zip(&pairs.values) {
        let g = match (pair.i < p, pair.j < p) {
            (true, true) => 0,
            (false, false) => 1,
            _ => 2,
        };
        for (t, &r) in series.iter().enumerate() {
            if !r.is_nan() {
                sums[g][t] += r;
                counts[g][t] += 1;
            }
        }
    }
    let mean = |g: usize| -> Vec<f64> {
        sums[g]
            .iter()
            .zip(&counts[g])
            .map(|(&s, &c)| if c == 0 { f64::NAN } else { s / c as f64 })
            .collect()
    };
    Ok(GroupCorrelations {
        window,
        start: offset + pairs.first_end(),
        sizes: group_sizes(p, q),
        imp_imp: mean(0),
        temp_temp: mean(1),
        imp_temp: mean(2),
    })
}

/// First-order impedance change `Z·a·dT` produced by a temperature change
/// `dT` for a conductivity temperature coefficient `a`. Coefficients outside
/// the electrolyte range only log a warning.
pub fn thermal_impedance_bound(reference_impedance: f64, a: f64, dt: f64) -> Result<f64, MetricsError> {
    if !(dt >= 0.0) || !(reference_impedance >= 0.0) || !a.is_finite() {
        return Err(MetricsError::Config(format!(
            "thermal bound needs Z ≥ 0 and dT ≥ 0, got Z={reference_impedance}, a={a}, dT={dt}"
        )));
    }
    if !(THERMAL_COEFF_MIN..=THERMAL_COEFF_MAX).contains(&a) {
        log::warn!("temperature coefficient {a} outside [{THERMAL_COEFF_MIN}, {THERMAL_COEFF_MAX}]");
    }
    Ok(reference_impedance * a * dt)
}
