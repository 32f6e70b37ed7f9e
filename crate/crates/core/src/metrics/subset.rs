use serde::{Deserialize, Serialize};

use super::{check_threshold, LPairMode, MetricsError};
use crate::synccorr::{PairId, PairSeries};

/// Qualifying pairs, the distinct cells they touch, and pairs per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetSeries {
    pub z: f64,
    pub mode: LPairMode,
    pub start: usize,
    pub n_pairs: Vec<u32>,
    pub n_cells: Vec<u32>,
    pub ratio: Vec<f64>,
}

/// `(N_pairs, N_cells, N_pairs / N_cells)` of a set of pairs; the ratio is 0
/// when no pair qualifies.
pub fn subset_counts(pairs: &[PairId]) -> (usize, usize, f64) {
    let mask = pairs.iter().fold(0u128, |m, p| m | (1u128 << p.i) | (1u128 << p.j));
    let cells = mask.count_ones() as usize;
    let ratio = if cells == 0 { 0.0 } else { pairs.len() as f64 / cells as f64 };
    (pairs.len(), cells, ratio)
}

/// Ratio reached when every pair among `n_cells` cells qualifies,
/// `C(n, 2) / n = (n - 1) / 2`.
pub fn saturation_ratio(n_cells: usize) -> f64 {
    if n_cells == 0 {
        0.0
    } else {
        (n_cells as f64 - 1.0) / 2.0
    }
}

pub fn subset_ratio(pairs: &PairSeries, z: f64, mode: LPairMode, offset: usize) -> Result<SubsetSeries, MetricsError> {
    check_threshold(z)?;
    let n = pairs.len();
    let mut out = SubsetSeries {
        z,
        mode,
        start: offset + pairs.first_end(),
        n_pairs: vec![0; n],
        n_cells: vec![0; n],
        ratio: vec![0.0; n],
    };
    let mut hits = Vec::with_capacity(pairs.pairs.len());
    for t in 0..n {
        hits.clear();
        hits.extend(
            pairs
                .at(t)
                .filter(|&(_, r)| !r.is_nan() && mode.qualifies(r, z))
                .map(|(p, _)| p),
        );
        let (np, nc, ratio) = subset_counts(&hits);
        out.n_pairs[t] = np as u32;
        out.n_cells[t] = nc as u32;
        out.ratio[t] = ratio;
    }
    Ok(out)
}
